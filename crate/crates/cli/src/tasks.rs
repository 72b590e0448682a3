//! Task execution: one function per subcommand, each writing a JSON report
//! plus columnar data files into the output directory.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use rockland::backend::{Backend, FourierField};
use rockland::diffusion::{
    energy_check_invariant, sobolev_energy_check, solve_invariant, Dissipativity, InvariantProblem,
};
use rockland::elliptic::{
    parameter_ellipticity_report, parametrix, resolvent, resolvent_estimate_check,
};
use rockland::funcalc::{complex_power, dunford_riesz, matfun_oracle};
use rockland::garding::{garding_certify, interpolation_constant};
use rockland::linalg::{self, relative_diff};
use rockland::symbol::Symbol;
use rockland::{cell, Error, GroupKind};

use crate::config::{DataSpec, ForcingSpec, ScenarioConfig, TaskConfig, TimeFactor};
use crate::output::{f, i, CsvValue, OutputDir};
use crate::CliError;

fn multi_index_text(idx: &[usize]) -> String {
    if idx.is_empty() {
        "0".to_string()
    } else {
        idx.iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Oracle comparison for hermitian outputs: max relative deviation of the
/// contour result from U F(D) U^* over all points, None when any point is
/// not hermitian.
fn oracle_max_rel_diff<F>(a: &Symbol, out: &Symbol, scalar: F) -> Option<f64>
where
    F: Fn(f64) -> Complex64,
{
    let mut worst: f64 = 0.0;
    for x in 0..a.n_x() {
        for p in 0..a.backend().n_points() {
            let m = a.value(x, p);
            if !linalg::is_hermitian(m, 1e-10) {
                return None;
            }
            let want = matfun_oracle(m, &scalar).ok()?;
            worst = worst.max(relative_diff(out.value(x, p), &want));
        }
    }
    Some(worst)
}

pub fn run_scenario(config: &ScenarioConfig, out: &OutputDir) -> Result<(), CliError> {
    let backend = config.backend.build()?;
    match &config.task {
        TaskConfig::Seminorm {
            symbol,
            alpha,
            beta,
            gamma,
            m,
        } => {
            let a = symbol.build(&backend)?;
            let value = a.seminorm(alpha, beta, *gamma, *m)?;
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                alpha: Vec<usize>,
                beta: Vec<usize>,
                gamma: f64,
                m: f64,
                value: f64,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "seminorm",
                    alpha: alpha.clone(),
                    beta: beta.clone(),
                    gamma: *gamma,
                    m: *m,
                    value,
                },
            )?;
            out.write_csv(
                "seminorm.csv",
                &[],
                &["alpha", "beta", "gamma", "m", "value"],
                &[vec![
                    CsvValue::Text(multi_index_text(alpha)),
                    CsvValue::Text(multi_index_text(beta)),
                    f(*gamma),
                    f(*m),
                    f(value),
                ]],
            )?;
        }

        TaskConfig::ClassCheck {
            symbol,
            m,
            rho,
            delta,
            k_max,
        } => {
            let a = symbol.build(&backend)?;
            let rep = a.check_class_membership(*m, *rho, *delta, *k_max)?;
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                m: f64,
                rho: f64,
                delta: f64,
                k_max: usize,
                norm: f64,
                stable: bool,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "class_check",
                    m: rep.m,
                    rho: rep.rho,
                    delta: rep.delta,
                    k_max: rep.k_max,
                    norm: rep.norm,
                    stable: rep.stable,
                },
            )?;
            let rows: Vec<Vec<CsvValue>> = rep
                .entries
                .iter()
                .map(|e| {
                    vec![
                        CsvValue::Text(multi_index_text(&e.alpha)),
                        CsvValue::Text(multi_index_text(&e.beta)),
                        f(e.value),
                        f(e.half_extent),
                        f(e.coarse),
                    ]
                })
                .collect();
            out.write_csv(
                "class_table.csv",
                &[],
                &["alpha", "beta", "value", "half_extent", "coarse"],
                &rows,
            )?;
        }

        TaskConfig::Resolvent {
            symbol,
            lambda_re,
            lambda_im,
        } => {
            let a = symbol.build(&backend)?;
            let r = resolvent(&a, Complex64::new(*lambda_re, *lambda_im))?;
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                lambda_re: f64,
                lambda_im: f64,
                order: f64,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "resolvent",
                    lambda_re: *lambda_re,
                    lambda_im: *lambda_im,
                    order: r.order(),
                },
            )?;
            crate::output::write_symbol_csv(out, "resolvent_symbol.csv", &r)?;
        }

        TaskConfig::ParamElliptic {
            symbol,
            curve,
            m,
            k,
            alpha,
            beta,
        } => {
            let a = symbol.build(&backend)?.with_order(*m);
            let spec = curve.build();
            let rep = if *k == 0 && alpha.iter().all(|&v| v == 0) && beta.iter().all(|&v| v == 0) {
                parameter_ellipticity_report(&a, &spec, *m)?
            } else {
                resolvent_estimate_check(&a, &spec, *k, alpha, beta)?
            };
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                curve: String,
                m: f64,
                k: usize,
                alpha: Vec<usize>,
                beta: Vec<usize>,
                sup: f64,
                sup_refined: f64,
                stable: bool,
                worst_lambda_re: f64,
                worst_lambda_im: f64,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "param_elliptic",
                    curve: curve.kind_name().to_string(),
                    m: *m,
                    k: *k,
                    alpha: alpha.clone(),
                    beta: beta.clone(),
                    sup: rep.sup,
                    sup_refined: rep.sup_refined,
                    stable: rep.stable,
                    worst_lambda_re: rep.worst_lambda.re,
                    worst_lambda_im: rep.worst_lambda.im,
                },
            )?;
            let rows: Vec<Vec<CsvValue>> = rep
                .per_sample
                .iter()
                .map(|(l, v)| vec![f(l.norm()), f(*v)])
                .collect();
            out.write_csv("sweep.csv", &[], &["lambda_abs", "sup_value"], &rows)?;
        }

        TaskConfig::Parametrix {
            symbol,
            corrections,
            lambda_spec,
            cutoffs,
        } => {
            let sigma = symbol.build(&backend)?;
            let tau = parametrix(&sigma, *corrections, *lambda_spec)?;
            let n_x = if sigma.is_invariant() {
                let k_max = backend
                    .rep_grid
                    .points
                    .iter()
                    .map(|p| p[0].abs())
                    .fold(0.0f64, f64::max)
                    .round() as usize;
                (2 * k_max + 2).next_power_of_two()
            } else {
                sigma.n_x()
            };
            let mut rows = Vec::new();
            let mut lx = Vec::new();
            let mut ly = Vec::new();
            for &cutoff in cutoffs {
                let u: Vec<Complex64> = cell::points(n_x)
                    .into_iter()
                    .map(|x| Complex64::from_polar(1.0, cutoff * x))
                    .collect();
                let w = sigma.apply_samples(&tau.apply_samples(&u)?)?;
                let diff: Vec<Complex64> = w.iter().zip(&u).map(|(a, b)| a - b).collect();
                let r = cell::l2_norm(&diff) / cell::l2_norm(&u);
                rows.push(vec![f(cutoff), f(r)]);
                lx.push(cutoff.ln());
                ly.push(r.ln());
            }
            let slope = if lx.len() >= 2 {
                fit_slope(&lx, &ly)
            } else {
                f64::NAN
            };
            let target = -(sigma.rho() - sigma.delta()) * (*corrections as f64 + 1.0);
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                corrections: usize,
                lambda_spec: f64,
                slope: f64,
                target_slope: f64,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "parametrix",
                    corrections: *corrections,
                    lambda_spec: *lambda_spec,
                    slope,
                    target_slope: target,
                },
            )?;
            out.write_csv("residuals.csv", &[], &["cutoff", "residual_norm"], &rows)?;
            crate::output::write_symbol_csv(out, "parametrix_symbol.csv", &tau)?;
        }

        TaskConfig::Funcalc {
            symbol,
            function,
            contour,
        } => {
            let a = symbol.build(&backend)?;
            let func = function.build()?;
            let cont = contour.build()?;
            let result = dunford_riesz(&a, &func, &cont)?;
            let oracle = oracle_max_rel_diff(&a, &result, |t| func.eval_real(t));
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                function: String,
                decay: f64,
                order: f64,
                epsilon: f64,
                theta: f64,
                r_max: f64,
                nodes: usize,
                oracle_max_rel_diff: Option<f64>,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "funcalc",
                    function: func.name.clone(),
                    decay: func.decay,
                    order: result.order(),
                    epsilon: cont.epsilon,
                    theta: cont.theta,
                    r_max: cont.r_max,
                    nodes: cont.n_nodes,
                    oracle_max_rel_diff: oracle,
                },
            )?;
            crate::output::write_symbol_csv(out, "funcalc_symbol.csv", &result)?;
        }

        TaskConfig::Power { symbol, s_re, s_im } => {
            let a = symbol.build(&backend)?;
            let s = Complex64::new(*s_re, *s_im);
            let result = complex_power(&a, s)?;
            let oracle = oracle_max_rel_diff(&a, &result, |t| Complex64::new(t, 0.0).powc(s));
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                s_re: f64,
                s_im: f64,
                order: f64,
                oracle_max_rel_diff: Option<f64>,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "power",
                    s_re: *s_re,
                    s_im: *s_im,
                    order: result.order(),
                    oracle_max_rel_diff: oracle,
                },
            )?;
            crate::output::write_symbol_csv(out, "power_symbol.csv", &result)?;
        }

        TaskConfig::Garding {
            symbol,
            m,
            c0,
            c1,
            trials,
        } => {
            let a = symbol.build(&backend)?;
            let c1 = c1.unwrap_or(c0 / 2.0);
            let rep = garding_certify(&a, *m, *c0, c1, *trials, config.seed)?;
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                m: f64,
                c0: f64,
                c1: f64,
                c2: f64,
                margin: f64,
                witness: usize,
                remainder_order: Option<f64>,
                remainder_order_target: f64,
                roundoff_clamped: bool,
                sqrt_degenerate: bool,
                certified: bool,
                seed: u64,
                trials: usize,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "garding",
                    m: *m,
                    c0: rep.c0,
                    c1: rep.c1,
                    c2: rep.c2,
                    margin: rep.margin,
                    witness: rep.witness,
                    remainder_order: rep.remainder_order,
                    remainder_order_target: rep.remainder_order_target,
                    roundoff_clamped: rep.roundoff_clamped,
                    sqrt_degenerate: rep.sqrt_degenerate,
                    certified: rep.certified,
                    seed: rep.seed,
                    trials: rep.trials,
                },
            )?;
            out.write_csv(
                "garding.csv",
                &[],
                &["c0", "c1", "c2", "margin"],
                &[vec![f(rep.c0), f(rep.c1), f(rep.c2), f(rep.margin)]],
            )?;
        }

        TaskConfig::Interpolate { s, t, eps } => {
            let c_eps = interpolation_constant(&backend, *s, *t, *eps)?;
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                s: f64,
                t: f64,
                eps: f64,
                c_eps: f64,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "interpolate",
                    s: *s,
                    t: *t,
                    eps: *eps,
                    c_eps,
                },
            )?;
            let nu = backend.rockland_degree as f64;
            let mut rows = Vec::new();
            for p in 0..backend.n_points() {
                for (k, &e) in backend.eigenvalues(p).iter().enumerate() {
                    let mu = 1.0 + e;
                    rows.push(vec![
                        i(p),
                        i(k),
                        f(mu),
                        f(mu.powf(2.0 * t / nu)),
                        f(eps * mu.powf(2.0 * s / nu) + c_eps),
                    ]);
                }
            }
            out.write_csv(
                "interpolation.csv",
                &[],
                &["point", "k", "mu", "lhs", "bound"],
                &rows,
            )?;
        }

        TaskConfig::Diffuse {
            k,
            time_factor,
            data,
            forcing,
            s,
            t_final,
            n_steps,
            dissipativity,
            emit_modes,
        } => {
            if k.x_factor.is_some() {
                return Err(CliError::from(Error::Unsupported(
                    "the diffuse task drives invariant multiplier generators only".into(),
                )));
            }
            let mult_spec = k.multiplier.clone();
            let scale = k.scale;
            let (mult, time_dependent): (rockland::diffusion::MultiplierFn, bool) =
                match time_factor {
                    TimeFactor::Constant => (
                        Arc::new(move |_t: f64, nu: f64| {
                            Complex64::new(scale * mult_spec.eval(nu), 0.0)
                        }),
                        false,
                    ),
                    TimeFactor::OnePlusHalfSin => (
                        Arc::new(move |t: f64, nu: f64| {
                            Complex64::new(scale * mult_spec.eval(nu) * (1.0 + 0.5 * t.sin()), 0.0)
                        }),
                        true,
                    ),
                };

            let u0 = build_data(&backend, data, config.seed)?;
            let mut problem = InvariantProblem::new(
                &backend,
                mult,
                time_dependent,
                u0,
                *t_final,
                *n_steps,
                Dissipativity {
                    order_m: dissipativity.order_m,
                    c0: dissipativity.c0,
                    c2: dissipativity.c2,
                },
            );
            if let Some(fc) = build_forcing(&backend, forcing)? {
                problem = problem.with_forcing(fc);
            }
            let trace = solve_invariant(&problem)?;
            let energy = energy_check_invariant(&problem, &trace)?;
            let sobolev = if *s != 0.0 {
                Some(sobolev_energy_check(&problem, &trace, *s)?)
            } else {
                None
            };

            #[derive(Serialize)]
            struct SobolevPart {
                s: f64,
                c: f64,
                c_prime: f64,
                conjugation_residual: f64,
            }
            #[derive(Serialize)]
            struct Report {
                task: &'static str,
                t_final: f64,
                n_steps: usize,
                final_l2: f64,
                final_hm2: f64,
                energy_c: f64,
                energy_c_prime: f64,
                energy_certified: bool,
                c1_differential: f64,
                sobolev: Option<SobolevPart>,
            }
            out.write_json(
                "report.json",
                &Report {
                    task: "diffuse",
                    t_final: *t_final,
                    n_steps: *n_steps,
                    final_l2: *trace.l2_norms.last().unwrap(),
                    final_hm2: *trace.hm2_norms.last().unwrap(),
                    energy_c: energy.c,
                    energy_c_prime: energy.c_prime,
                    energy_certified: energy.certified,
                    c1_differential: energy.c1_differential,
                    sobolev: sobolev.map(|rep| SobolevPart {
                        s: *s,
                        c: rep.energy.c,
                        c_prime: rep.energy.c_prime,
                        conjugation_residual: rep.conjugation_residual,
                    }),
                },
            )?;
            let rows: Vec<Vec<CsvValue>> = trace
                .times
                .iter()
                .zip(trace.l2_norms.iter().zip(&trace.hm2_norms))
                .map(|(&t, (&l2, &hs))| vec![f(t), f(l2), f(hs)])
                .collect();
            out.write_csv("trace.csv", &[], &["t", "l2_norm", "hs_norm"], &rows)?;
            if *emit_modes {
                let n = backend.truncation;
                let mut rows = Vec::new();
                for (ti, field) in trace.fields.iter().enumerate() {
                    for p in 0..backend.n_points() {
                        for ii in 0..n {
                            for jj in 0..n {
                                let v = field.data[p][(ii, jj)];
                                rows.push(vec![
                                    f(trace.times[ti]),
                                    i(p),
                                    i(ii),
                                    i(jj),
                                    f(v.re),
                                    f(v.im),
                                ]);
                            }
                        }
                    }
                }
                out.write_csv(
                    "modes.csv",
                    &[],
                    &["t", "point", "i", "j", "re", "im"],
                    &rows,
                )?;
            }
        }
    }
    Ok(())
}

fn build_data(backend: &Backend, spec: &DataSpec, seed: u64) -> Result<FourierField, CliError> {
    match spec {
        DataSpec::UnitMode { point_index, i, j } => {
            if *point_index >= backend.n_points()
                || *i >= backend.truncation
                || *j >= backend.truncation
            {
                return Err(CliError::from(Error::Config(format!(
                    "unit_mode out of range: point_index {point_index}, i {i}, j {j}"
                ))));
            }
            Ok(FourierField::unit_mode(backend, *point_index, *i, *j))
        }
        DataSpec::Gaussian { width } => {
            if !matches!(backend.kind, GroupKind::Abelian { .. }) {
                return Err(CliError::from(Error::Unsupported(
                    "gaussian data is an abelian scalar transform".into(),
                )));
            }
            let w = *width;
            Ok(FourierField::from_scalar_fn(backend, |xi| {
                let q: f64 = xi.iter().map(|v| v * v).sum();
                Complex64::new((-q / (2.0 * w * w)).exp(), 0.0)
            })?)
        }
        DataSpec::RandomDecay { power } => {
            let mut rng = linalg::seeded_rng(seed);
            Ok(FourierField::random_decay(backend, *power, &mut rng))
        }
    }
}

fn build_forcing(
    backend: &Backend,
    spec: &ForcingSpec,
) -> Result<Option<rockland::diffusion::FieldForcing>, CliError> {
    match spec {
        ForcingSpec::None => Ok(None),
        ForcingSpec::DecayingMode {
            point_index,
            i,
            j,
            amp_re,
            amp_im,
            decay,
        } => {
            if *point_index >= backend.n_points()
                || *i >= backend.truncation
                || *j >= backend.truncation
            {
                return Err(CliError::from(Error::Config(format!(
                    "decaying_mode out of range: point_index {point_index}, i {i}, j {j}"
                ))));
            }
            let base = FourierField::unit_mode(backend, *point_index, *i, *j)
                .scale(Complex64::new(*amp_re, *amp_im));
            let decay = *decay;
            Ok(Some(Arc::new(move |t: f64| {
                base.scale(Complex64::new((-decay * t).exp(), 0.0))
            })))
        }
    }
}
