//! Scenario configuration: a TOML file with a backend block, one task block
//! and reproducibility fields. Unknown keys are rejected so that typos fail
//! loudly instead of silently running a default.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use rockland::backend::{make_abelian_backend, make_heisenberg_backend, Backend};
use rockland::elliptic::CurveSpec;
use rockland::funcalc::{keyhole_contour, Contour, ContourFunction};
use rockland::symbol::{multiplier_symbol, Symbol};
use rockland::{Error, Result};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub output_dir: String,
    pub backend: BackendConfig,
    pub task: TaskConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "group", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Abelian {
        n: usize,
        xi_max: f64,
        n_xi: usize,
    },
    Heisenberg {
        lambda_min: f64,
        lambda_max: f64,
        n_lambda: usize,
        hermite_dim: usize,
    },
}

impl BackendConfig {
    pub fn build(&self) -> Result<Backend> {
        match *self {
            BackendConfig::Abelian { n, xi_max, n_xi } => make_abelian_backend(n, xi_max, n_xi),
            BackendConfig::Heisenberg {
                lambda_min,
                lambda_max,
                n_lambda,
                hermite_dim,
            } => make_heisenberg_backend(lambda_min, lambda_max, n_lambda, hermite_dim),
        }
    }
}

/// The multiplier registry: named spectral functions of the Rockland
/// eigenvalue. No expression language by design.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiplierSpec {
    /// sum_k coeffs[k] nu^k
    Poly { coeffs: Vec<f64> },
    /// nu^exponent
    Power { exponent: f64 },
    /// e^(-nu)
    ExpNeg,
    /// (1 + nu)^exponent
    ShiftedPower { exponent: f64 },
}

impl MultiplierSpec {
    pub fn eval(&self, nu: f64) -> f64 {
        match self {
            MultiplierSpec::Poly { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| c * nu.powi(k as i32))
                .sum(),
            MultiplierSpec::Power { exponent } => nu.powf(*exponent),
            MultiplierSpec::ExpNeg => (-nu).exp(),
            MultiplierSpec::ShiftedPower { exponent } => (1.0 + nu).powf(*exponent),
        }
    }
}

/// The x-factor registry for x-dependent abelian symbols.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum XFactorSpec {
    /// 2 + sin x
    TwoPlusSin,
    /// 1 + cos(x) / 2
    OnePlusHalfCos,
}

impl XFactorSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            XFactorSpec::TwoPlusSin => 2.0 + x.sin(),
            XFactorSpec::OnePlusHalfCos => 1.0 + 0.5 * x.cos(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub multiplier: MultiplierSpec,
    pub order: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Present => x-dependent symbol g(x) * m(nu) on the abelian cell.
    #[serde(default)]
    pub x_factor: Option<XFactorSpec>,
    /// Samples of the x-cell (x-dependent symbols only).
    #[serde(default)]
    pub n_x: Option<usize>,
}

fn default_scale() -> f64 {
    1.0
}

impl SymbolSpec {
    pub fn build(&self, backend: &Backend) -> Result<Symbol> {
        match &self.x_factor {
            None => {
                let spec = self.multiplier.clone();
                let scale = self.scale;
                multiplier_symbol(backend, self.order, move |nu| {
                    Complex64::new(scale * spec.eval(nu), 0.0)
                })
            }
            Some(xf) => {
                let n_x = self
                    .n_x
                    .ok_or_else(|| Error::Config("x-dependent symbols need n_x".to_string()))?;
                let spec = self.multiplier.clone();
                let xf = xf.clone();
                let scale = self.scale;
                Symbol::xdep_from_fn(backend, n_x, self.order, move |x, xi| {
                    Complex64::new(scale * xf.eval(x) * spec.eval(xi * xi), 0.0)
                })
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveConfig {
    NegativeRealAxis {
        #[serde(default)]
        per_decade: Option<usize>,
    },
    RayPair {
        theta: f64,
        #[serde(default)]
        per_decade: Option<usize>,
    },
    Custom {
        points: Vec<[f64; 2]>,
    },
}

impl CurveConfig {
    pub fn build(&self) -> CurveSpec {
        match self {
            CurveConfig::NegativeRealAxis { per_decade } => {
                let mut c = CurveSpec::negative_real_axis();
                if let Some(pd) = per_decade {
                    c.per_decade = *pd;
                }
                c
            }
            CurveConfig::RayPair { theta, per_decade } => {
                let mut c = CurveSpec::ray_pair(*theta);
                if let Some(pd) = per_decade {
                    c.per_decade = *pd;
                }
                c
            }
            CurveConfig::Custom { points } => {
                CurveSpec::custom(points.iter().map(|p| Complex64::new(p[0], p[1])).collect())
            }
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CurveConfig::NegativeRealAxis { .. } => "negative_real_axis",
            CurveConfig::RayPair { .. } => "ray_pair",
            CurveConfig::Custom { .. } => "custom",
        }
    }
}

impl std::fmt::Display for CurveConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.kind_name())
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_epsilon() -> f64 {
    0.5
}
fn default_theta() -> f64 {
    0.35
}
fn default_r_max() -> f64 {
    1e4
}
fn default_nodes() -> usize {
    200
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            epsilon: default_epsilon(),
            theta: default_theta(),
            r_max: default_r_max(),
            nodes: default_nodes(),
        }
    }
}

impl ContourConfig {
    pub fn build(&self) -> Result<Contour> {
        keyhole_contour(self.epsilon, self.theta, self.r_max, self.nodes)
    }
}

/// The contour-function registry.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Inv,
    InvSqrt,
    Power { s_re: f64, s_im: f64 },
    ExpNegInv,
}

impl FunctionSpec {
    pub fn build(&self) -> Result<ContourFunction> {
        match self {
            FunctionSpec::Inv => Ok(ContourFunction::inv()),
            FunctionSpec::InvSqrt => Ok(ContourFunction::inv_sqrt()),
            FunctionSpec::Power { s_re, s_im } => {
                ContourFunction::power(Complex64::new(*s_re, *s_im))
            }
            FunctionSpec::ExpNegInv => Ok(ContourFunction::exp_neg_inv()),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// Unit coefficient at (point_index, i, j).
    UnitMode {
        point_index: usize,
        #[serde(default)]
        i: usize,
        #[serde(default)]
        j: usize,
    },
    /// Scalar Gaussian transform e^(-|xi|^2 / (2 width^2)) (abelian).
    Gaussian { width: f64 },
    /// Seeded random field with spectral decay (1 + nu)^(-power).
    RandomDecay { power: f64 },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    None,
    /// amp e^(-decay t) at a single mode.
    DecayingMode {
        point_index: usize,
        #[serde(default)]
        i: usize,
        #[serde(default)]
        j: usize,
        amp_re: f64,
        amp_im: f64,
        decay: f64,
    },
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeFactor {
    #[default]
    Constant,
    /// multiplies the generator by (1 + sin(t) / 2)
    OnePlusHalfSin,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DissipativityConfig {
    pub order_m: f64,
    pub c0: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Seminorm {
        symbol: SymbolSpec,
        alpha: Vec<usize>,
        beta: Vec<usize>,
        gamma: f64,
        m: f64,
    },
    ClassCheck {
        symbol: SymbolSpec,
        m: f64,
        rho: f64,
        delta: f64,
        k_max: usize,
    },
    Resolvent {
        symbol: SymbolSpec,
        lambda_re: f64,
        lambda_im: f64,
    },
    ParamElliptic {
        symbol: SymbolSpec,
        curve: CurveConfig,
        m: f64,
        /// lambda-derivative order; 0 gives the plain parameter-ellipticity sup.
        #[serde(default)]
        k: usize,
        #[serde(default)]
        alpha: Vec<usize>,
        #[serde(default)]
        beta: Vec<usize>,
    },
    Parametrix {
        symbol: SymbolSpec,
        corrections: usize,
        lambda_spec: f64,
        /// residual-study frequencies
        cutoffs: Vec<f64>,
    },
    Funcalc {
        symbol: SymbolSpec,
        function: FunctionSpec,
        #[serde(default)]
        contour: ContourConfig,
    },
    Power {
        symbol: SymbolSpec,
        s_re: f64,
        #[serde(default)]
        s_im: f64,
    },
    Garding {
        symbol: SymbolSpec,
        m: f64,
        c0: f64,
        /// defaults to c0 / 2
        #[serde(default)]
        c1: Option<f64>,
        trials: usize,
    },
    Interpolate {
        s: f64,
        t: f64,
        eps: f64,
    },
    Diffuse {
        k: SymbolSpec,
        #[serde(default)]
        time_factor: TimeFactor,
        data: DataSpec,
        forcing: ForcingSpec,
        /// Sobolev index of the reported conjugation check (0 = skip).
        #[serde(default)]
        s: f64,
        t_final: f64,
        n_steps: usize,
        dissipativity: DissipativityConfig,
        /// also write per-mode coefficients
        #[serde(default)]
        emit_modes: bool,
    },
}

impl TaskConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TaskConfig::Seminorm { .. } => "seminorm",
            TaskConfig::ClassCheck { .. } => "class_check",
            TaskConfig::Resolvent { .. } => "resolvent",
            TaskConfig::ParamElliptic { .. } => "param_elliptic",
            TaskConfig::Parametrix { .. } => "parametrix",
            TaskConfig::Funcalc { .. } => "funcalc",
            TaskConfig::Power { .. } => "power",
            TaskConfig::Garding { .. } => "garding",
            TaskConfig::Interpolate { .. } => "interpolate",
            TaskConfig::Diffuse { .. } => "diffuse",
        }
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    toml::from_str(text).map_err(|e| Error::Config(format!("config schema violation: {e}")))
}
