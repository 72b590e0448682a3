//! The two computable group backends: abelian R^n and the Heisenberg group
//! H^1. A backend owns a quadrature grid over the unitary dual together with
//! Plancherel weights and the spectrum of the canonical positive Rockland
//! operator at every grid point (|xi|^2 for R^n, |lambda|(2k+1) for H^1).

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub type Backend = Arc<GroupBackend>;

#[derive(Debug, Clone, PartialEq)]
pub enum GroupKind {
    Abelian { dim: usize },
    Heisenberg,
}

/// Quadrature grid over the unitary dual with Plancherel weights.
#[derive(Debug, Clone)]
pub struct RepGrid {
    /// Coordinates per representation point: xi in R^n, or [lambda] for H^1.
    pub points: Vec<Vec<f64>>,
    /// Strictly positive Plancherel quadrature weights, one per point.
    pub weights: Vec<f64>,
}

/// Tensor structure of the abelian grid, used for finite differences in xi.
#[derive(Debug, Clone)]
pub struct AbelianAxes {
    /// Per-axis coordinate values (shared by all axes).
    pub xi: Vec<f64>,
    pub spacing: f64,
}

#[derive(Debug)]
pub struct GroupBackend {
    pub kind: GroupKind,
    pub dilation_weights: Vec<u32>,
    /// Q = sum of the dilation weights.
    pub homogeneous_dimension: u32,
    /// Homogeneity degree nu of the Rockland operator (2 for both backends).
    pub rockland_degree: u32,
    pub rep_grid: RepGrid,
    /// Matrix dimension per representation point (1 on the abelian backend).
    pub truncation: usize,
    /// Rockland eigenvalues nu_kk per point, ascending.
    spectrum: Vec<Vec<f64>>,
    pub abelian_axes: Option<AbelianAxes>,
}

/// Abelian backend on a uniform grid over [-xi_max, xi_max]^n; weight per
/// point is the cell volume over (2 pi)^n so that grid sums realize the
/// Plancherel integral.
pub fn make_abelian_backend(n: usize, xi_max: f64, n_xi: usize) -> Result<Backend> {
    if n < 1 {
        return Err(Error::Config(format!("n must be >= 1, got {n}")));
    }
    if !(xi_max > 0.0) {
        return Err(Error::Config(format!("xi_max must be > 0, got {xi_max}")));
    }
    if n_xi < 2 {
        return Err(Error::Config(format!("n_xi must be >= 2, got {n_xi}")));
    }
    let spacing = 2.0 * xi_max / (n_xi as f64 - 1.0);
    let axis: Vec<f64> = (0..n_xi).map(|j| -xi_max + spacing * j as f64).collect();
    let weight = (spacing / (2.0 * std::f64::consts::PI)).powi(n as i32);

    let total = n_xi.pow(n as u32);
    let mut points = Vec::with_capacity(total);
    let mut spectrum = Vec::with_capacity(total);
    for flat in 0..total {
        let mut idx = flat;
        let mut coords = vec![0.0; n];
        for ax in (0..n).rev() {
            coords[ax] = axis[idx % n_xi];
            idx /= n_xi;
        }
        let nu: f64 = coords.iter().map(|x| x * x).sum();
        points.push(coords);
        spectrum.push(vec![nu]);
    }
    Ok(Arc::new(GroupBackend {
        kind: GroupKind::Abelian { dim: n },
        dilation_weights: vec![1; n],
        homogeneous_dimension: n as u32,
        rockland_degree: 2,
        rep_grid: RepGrid {
            points,
            weights: vec![weight; total],
        },
        truncation: 1,
        spectrum,
        abelian_axes: Some(AbelianAxes { xi: axis, spacing }),
    }))
}

/// Heisenberg backend: Schroedinger representations pi_lambda on a symmetric
/// grid over [-lambda_max, -lambda_min] u [lambda_min, lambda_max], truncated
/// to the first `n_hermite` oscillator modes. The degenerate lambda = 0 is
/// excluded. Plancherel density |lambda| d lambda / (2 pi)^2.
pub fn make_heisenberg_backend(
    lambda_min: f64,
    lambda_max: f64,
    n_lambda: usize,
    n_hermite: usize,
) -> Result<Backend> {
    if !(lambda_min > 0.0) {
        return Err(Error::Config(format!(
            "lambda_min must be > 0 (lambda = 0 is the degenerate representation), got {lambda_min}"
        )));
    }
    if !(lambda_max > lambda_min) {
        return Err(Error::Config(format!(
            "lambda_max must exceed lambda_min, got [{lambda_min}, {lambda_max}]"
        )));
    }
    if n_lambda < 2 {
        return Err(Error::Config(format!(
            "n_lambda must be >= 2, got {n_lambda}"
        )));
    }
    if n_hermite < 1 {
        return Err(Error::Config(format!(
            "hermite_dim must be >= 1, got {n_hermite}"
        )));
    }
    let spacing = (lambda_max - lambda_min) / (n_lambda as f64 - 1.0);
    let positive: Vec<f64> = (0..n_lambda)
        .map(|j| lambda_min + spacing * j as f64)
        .collect();
    let mut lambdas: Vec<f64> = positive.iter().map(|l| -l).collect();
    lambdas.sort_by(|a, b| a.total_cmp(b));
    lambdas.extend(&positive);

    let two_pi_sq = (2.0 * std::f64::consts::PI).powi(2);
    let mut points = Vec::with_capacity(lambdas.len());
    let mut weights = Vec::with_capacity(lambdas.len());
    let mut spectrum = Vec::with_capacity(lambdas.len());
    for l in &lambdas {
        points.push(vec![*l]);
        weights.push(l.abs() * spacing / two_pi_sq);
        spectrum.push(
            (0..n_hermite)
                .map(|k| l.abs() * (2 * k + 1) as f64)
                .collect(),
        );
    }
    Ok(Arc::new(GroupBackend {
        kind: GroupKind::Heisenberg,
        dilation_weights: vec![1, 1, 2],
        homogeneous_dimension: 4,
        rockland_degree: 2,
        rep_grid: RepGrid { points, weights },
        truncation: n_hermite,
        spectrum,
        abelian_axes: None,
    }))
}

impl GroupBackend {
    pub fn n_points(&self) -> usize {
        self.rep_grid.points.len()
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self.kind, GroupKind::Abelian { .. })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            GroupKind::Abelian { dim } => dim,
            GroupKind::Heisenberg => 3,
        }
    }

    /// Rockland eigenvalues nu_kk at a representation point, ascending.
    pub fn eigenvalues(&self, point: usize) -> &[f64] {
        &self.spectrum[point]
    }

    /// Diagonal of pi(M)^t, i.e. (1 + nu_kk)^(t / nu), at one point.
    pub fn m_weight(&self, point: usize, t: f64) -> Vec<f64> {
        let nu = self.rockland_degree as f64;
        self.spectrum[point]
            .iter()
            .map(|&e| (1.0 + e).powf(t / nu))
            .collect()
    }

    /// Two backends are interchangeable for field/symbol operations.
    pub fn compatible(&self, other: &GroupBackend) -> bool {
        self.kind == other.kind
            && self.truncation == other.truncation
            && self.rep_grid.points == other.rep_grid.points
    }

    fn check_field(&self, u: &FourierField) -> Result<()> {
        if u.data.len() != self.n_points() {
            return Err(Error::Shape(format!(
                "field has {} points, backend has {}",
                u.data.len(),
                self.n_points()
            )));
        }
        for (p, m) in u.data.iter().enumerate() {
            if m.nrows() != self.truncation || m.ncols() != self.truncation {
                return Err(Error::Shape(format!(
                    "field matrix at point {p} is {}x{}, backend truncation is {}",
                    m.nrows(),
                    m.ncols(),
                    self.truncation
                )));
            }
        }
        Ok(())
    }

    /// Plancherel pairing sum_p w_p Tr(w(pi)^* u(pi)); conjugate-linear in w.
    pub fn plancherel_inner(&self, u: &FourierField, w: &FourierField) -> Result<Complex64> {
        self.check_field(u)?;
        self.check_field(w)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..self.n_points() {
            let mut tr = Complex64::new(0.0, 0.0);
            for i in 0..self.truncation {
                for j in 0..self.truncation {
                    tr += w.data[p][(i, j)].conj() * u.data[p][(i, j)];
                }
            }
            acc += Complex64::new(self.rep_grid.weights[p], 0.0) * tr;
        }
        Ok(acc)
    }

    /// Sobolev norm of index s: weight (1 + nu_ii)^(2s/nu) on the row index.
    pub fn sobolev_norm(&self, u: &FourierField, s: f64) -> Result<f64> {
        self.check_field(u)?;
        let nu = self.rockland_degree as f64;
        let mut acc = 0.0;
        for p in 0..self.n_points() {
            let w = self.rep_grid.weights[p];
            for i in 0..self.truncation {
                let factor = (1.0 + self.spectrum[p][i]).powf(2.0 * s / nu);
                for j in 0..self.truncation {
                    acc += w * factor * u.data[p][(i, j)].norm_sqr();
                }
            }
        }
        Ok(acc.sqrt())
    }
}

/// Fourier transform of a test function: one truncation-sized matrix per
/// representation point (a scalar on the abelian backend).
#[derive(Debug, Clone)]
pub struct FourierField {
    pub data: Vec<CMatrix>,
}

impl FourierField {
    pub fn zero(backend: &GroupBackend) -> Self {
        let n = backend.truncation;
        FourierField {
            data: vec![CMatrix::zeros(n, n); backend.n_points()],
        }
    }

    /// Single unit coefficient at (point, i, j), zero elsewhere.
    pub fn unit_mode(backend: &GroupBackend, point: usize, i: usize, j: usize) -> Self {
        let mut f = Self::zero(backend);
        f.data[point][(i, j)] = Complex64::new(1.0, 0.0);
        f
    }

    pub fn from_fn<F>(backend: &GroupBackend, mut f: F) -> Self
    where
        F: FnMut(usize, &[f64]) -> CMatrix,
    {
        FourierField {
            data: (0..backend.n_points())
                .map(|p| f(p, &backend.rep_grid.points[p]))
                .collect(),
        }
    }

    /// Abelian helper: scalar transform values per grid point.
    pub fn from_scalar_fn<F>(backend: &GroupBackend, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        if backend.truncation != 1 {
            return Err(Error::Shape(
                "scalar fields require truncation 1".to_string(),
            ));
        }
        Ok(FourierField {
            data: backend
                .rep_grid
                .points
                .iter()
                .map(|xi| CMatrix::from_element(1, 1, f(xi)))
                .collect(),
        })
    }

    /// Random field with per-row spectral decay (1 + nu_ii)^(-decay).
    pub fn random_decay(
        backend: &GroupBackend,
        decay: f64,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Self {
        use rand::Rng;
        let n = backend.truncation;
        FourierField {
            data: (0..backend.n_points())
                .map(|p| {
                    CMatrix::from_fn(n, n, |i, _| {
                        let w = (1.0 + backend.eigenvalues(p)[i]).powf(-decay);
                        Complex64::new(w * (rng.gen::<f64>() - 0.5), w * (rng.gen::<f64>() - 0.5))
                    })
                })
                .collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        FourierField {
            data: self.data.iter().map(|m| m.map(|e| e * c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        FourierField {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        FourierField {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}
