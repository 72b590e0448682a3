//! Ellipticity diagnostics, resolvents, the uniform weighted resolvent
//! estimates along a spectral curve, and the parametrix recursion.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::symbol::{homogeneity, multi_indices, Symbol};

/// Singular values below this are treated as singular rather than inverted.
pub const SV_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum CurveKind {
    NegativeRealAxis,
    /// Pair of rays at angles pi -+ theta (theta measured from the negative
    /// real axis).
    RayPair {
        theta: f64,
    },
    Custom(Vec<Complex64>),
}

/// A discretised spectral curve: sup evaluations run over a logarithmic
/// ladder of magnitudes (default 60 per decade, 1e-3 .. 1e+6).
#[derive(Debug, Clone)]
pub struct CurveSpec {
    pub kind: CurveKind,
    pub mag_min: f64,
    pub mag_max: f64,
    pub per_decade: usize,
}

impl CurveSpec {
    pub fn negative_real_axis() -> Self {
        CurveSpec {
            kind: CurveKind::NegativeRealAxis,
            mag_min: 1e-3,
            mag_max: 1e6,
            per_decade: 60,
        }
    }

    pub fn ray_pair(theta: f64) -> Self {
        CurveSpec {
            kind: CurveKind::RayPair { theta },
            mag_min: 1e-3,
            mag_max: 1e6,
            per_decade: 60,
        }
    }

    pub fn custom(points: Vec<Complex64>) -> Self {
        CurveSpec {
            kind: CurveKind::Custom(points),
            mag_min: 0.0,
            mag_max: 0.0,
            per_decade: 0,
        }
    }

    fn ladder(&self, per_decade: usize) -> Vec<f64> {
        let decades = (self.mag_max / self.mag_min).log10();
        let n = (decades * per_decade as f64).round() as usize;
        (0..=n)
            .map(|j| self.mag_min * 10f64.powf(j as f64 / per_decade as f64))
            .collect()
    }

    /// Sample points of the curve; `refine` doubles the ladder density.
    pub fn samples(&self, refine: bool) -> Vec<Complex64> {
        let pd = if refine {
            self.per_decade * 2
        } else {
            self.per_decade
        };
        match &self.kind {
            CurveKind::Custom(pts) => pts.clone(),
            CurveKind::NegativeRealAxis => self
                .ladder(pd)
                .into_iter()
                .map(|r| Complex64::new(-r, 0.0))
                .collect(),
            CurveKind::RayPair { theta } => {
                let phi = std::f64::consts::PI - theta;
                let mut out = Vec::new();
                for r in self.ladder(pd) {
                    out.push(Complex64::from_polar(r, phi));
                    out.push(Complex64::from_polar(r, -phi));
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticityReport {
    pub is_elliptic: bool,
    pub m0: f64,
    pub lambda_spec: f64,
    /// min over gammas and the grid of the restricted smallest singular value.
    pub lower_bound: f64,
    /// (gamma, lower bound) table.
    pub per_gamma: Vec<(f64, f64)>,
    /// (point, x index) attaining the worst bound.
    pub worst_point: Option<(usize, usize)>,
}

/// Ellipticity with respect to the Rockland operator: for each gamma the
/// smallest singular value of pi(M)^gamma a pi(M)^(-gamma-m0) with the domain
/// restricted to eigenvalues above the spectral cutoff.
pub fn is_elliptic(
    a: &Symbol,
    m0: f64,
    lambda_spec: f64,
    gammas: &[f64],
) -> Result<EllipticityReport> {
    if lambda_spec < 0.0 {
        return Err(Error::Config("Lambda_spec must be >= 0".into()));
    }
    let backend = a.backend();
    let mut per_gamma = Vec::with_capacity(gammas.len());
    let mut lower = f64::INFINITY;
    let mut worst = None;
    let mut any_block = false;
    for &gamma in gammas {
        let mut g_lower = f64::INFINITY;
        for p in 0..backend.n_points() {
            let eigs = backend.eigenvalues(p);
            let high: Vec<usize> = (0..eigs.len()).filter(|&k| eigs[k] > lambda_spec).collect();
            if high.is_empty() || !a.point_in_interior(p) {
                continue;
            }
            any_block = true;
            let wl = backend.m_weight(p, gamma);
            let wr = backend.m_weight(p, -gamma - m0);
            for x in 0..a.n_x() {
                let m = a.value(x, p);
                let restricted = CMatrix::from_fn(m.nrows(), high.len(), |i, jj| {
                    let j = high[jj];
                    m[(i, j)] * wl[i] * wr[j]
                });
                let sv = linalg::smallest_sv(&restricted);
                if sv < g_lower {
                    g_lower = sv;
                }
                if sv < lower {
                    lower = sv;
                    worst = Some((p, x));
                }
            }
        }
        per_gamma.push((gamma, g_lower));
    }
    if !any_block {
        return Err(Error::Config(format!(
            "no grid eigenvalue exceeds the cutoff {lambda_spec}"
        )));
    }
    Ok(EllipticityReport {
        is_elliptic: lower.is_finite() && lower > SV_FLOOR,
        m0,
        lambda_spec,
        lower_bound: lower,
        per_gamma,
        worst_point: worst,
    })
}

/// Per-point resolvent (a - lambda)^{-1}; refuses near-singular points.
pub fn resolvent(a: &Symbol, lambda: Complex64) -> Result<Symbol> {
    let n = a.backend().truncation;
    let id = CMatrix::identity(n, n);
    a.map_values(-a.order(), |x, p, m| {
        let shifted = m - id.map(|e| e * lambda);
        linalg::guarded_inverse(&shifted, SV_FLOOR).map_err(|sv| Error::SingularResolvent {
            point: p,
            x_index: x,
            sigma_min: sv,
        })
    })
}

#[derive(Debug, Clone)]
pub struct CurveSupReport {
    /// sup over curve samples and the grid.
    pub sup: f64,
    /// Same sup with the magnitude ladder doubled.
    pub sup_refined: f64,
    /// Relative change under ladder doubling < 5%.
    pub stable: bool,
    pub worst_lambda: Complex64,
    /// (lambda, sup over the grid) per sample of the base ladder.
    pub per_sample: Vec<(Complex64, f64)>,
}

fn weighted_resolvent_sup(a: &Symbol, lambda: Complex64, m: f64) -> Result<f64> {
    let r = resolvent(a, lambda)?;
    let backend = a.backend();
    let nu = backend.rockland_degree as f64;
    let mut best = 0.0f64;
    for p in 0..backend.n_points() {
        if !a.point_in_interior(p) {
            continue;
        }
        let w: Vec<f64> = backend
            .eigenvalues(p)
            .iter()
            .map(|&e| (lambda.norm().powf(1.0 / m) + (1.0 + e).powf(1.0 / nu)).powf(m))
            .collect();
        for x in 0..a.n_x() {
            let rm = r.value(x, p);
            let scaled = CMatrix::from_fn(rm.nrows(), rm.ncols(), |i, j| rm[(i, j)] * w[i]);
            best = best.max(linalg::op_norm(&scaled));
        }
    }
    Ok(best)
}

/// Parameter ellipticity along a curve: the sup of
/// || (|lambda|^(1/m) + pi(M))^m (a - lambda)^{-1} ||_op
/// over curve samples and the grid, with a ladder-doubling stability probe.
pub fn parameter_ellipticity_report(
    a: &Symbol,
    curve: &CurveSpec,
    m: f64,
) -> Result<CurveSupReport> {
    if m <= 0.0 {
        return Err(Error::Config(
            "parameter ellipticity requires order m > 0".into(),
        ));
    }
    let mut per_sample = Vec::new();
    let mut sup = 0.0f64;
    let mut worst = Complex64::new(0.0, 0.0);
    for lambda in curve.samples(false) {
        let v = weighted_resolvent_sup(a, lambda, m)?;
        if v > sup {
            sup = v;
            worst = lambda;
        }
        per_sample.push((lambda, v));
    }
    let mut sup_refined = 0.0f64;
    for lambda in curve.samples(true) {
        sup_refined = sup_refined.max(weighted_resolvent_sup(a, lambda, m)?);
    }
    let stable = (sup - sup_refined).abs() <= 0.05 * sup.max(1e-300);
    Ok(CurveSupReport {
        sup,
        sup_refined,
        stable,
        worst_lambda: worst,
        per_sample,
    })
}

/// The quantity of the uniform resolvent estimate at a single lambda:
/// sup over the grid of
/// || (|l|^(1/m)+pi(M))^(m(k+1)) pi(M)^(rho[alpha]-delta[beta]) D_l^k X^beta Delta^alpha R_l ||_op,
/// with D_l^k R_l taken through the exact identity k! R_l^(k+1).
pub fn resolvent_estimate_at(
    a: &Symbol,
    lambda: Complex64,
    k: usize,
    alpha: &[usize],
    beta: &[usize],
) -> Result<f64> {
    let m = a.order();
    if m <= 0.0 {
        return Err(Error::Config(
            "resolvent estimates require order m > 0".into(),
        ));
    }
    let backend = a.backend().clone();
    let r = resolvent(a, lambda)?;
    // lambda-derivative: d^k/d lambda^k R = k! R^(k+1) (all factors commute)
    let mut rk = r.clone();
    for _ in 0..k {
        rk = rk.pointwise_product(&r)?;
    }
    let kfac: f64 = (1..=k).map(|v| v as f64).product();
    let rk = rk.scale(Complex64::new(kfac, 0.0));
    let d = rk.x_derivative(beta)?.difference_op(alpha)?;

    let ah = homogeneity(&backend, alpha)? as f64;
    let bh = homogeneity(&backend, beta)? as f64;
    let nu = backend.rockland_degree as f64;
    let (rho, delta) = (a.rho(), a.delta());
    let mut best = 0.0f64;
    for p in 0..backend.n_points() {
        if !d.point_in_interior(p) {
            continue;
        }
        let w: Vec<f64> = backend
            .eigenvalues(p)
            .iter()
            .map(|&e| {
                let base = lambda.norm().powf(1.0 / m) + (1.0 + e).powf(1.0 / nu);
                base.powf(m * (k as f64 + 1.0)) * (1.0 + e).powf((rho * ah - delta * bh) / nu)
            })
            .collect();
        for x in 0..d.n_x() {
            let mm = d.value(x, p);
            let scaled = CMatrix::from_fn(mm.nrows(), mm.ncols(), |i, j| mm[(i, j)] * w[i]);
            best = best.max(linalg::op_norm(&scaled));
        }
    }
    Ok(best)
}

/// Curve sup of `resolvent_estimate_at` with the ladder-doubling probe.
pub fn resolvent_estimate_check(
    a: &Symbol,
    curve: &CurveSpec,
    k: usize,
    alpha: &[usize],
    beta: &[usize],
) -> Result<CurveSupReport> {
    let mut per_sample = Vec::new();
    let mut sup = 0.0f64;
    let mut worst = Complex64::new(0.0, 0.0);
    for lambda in curve.samples(false) {
        let v = resolvent_estimate_at(a, lambda, k, alpha, beta)?;
        if v > sup {
            sup = v;
            worst = lambda;
        }
        per_sample.push((lambda, v));
    }
    let mut sup_refined = 0.0f64;
    for lambda in curve.samples(true) {
        sup_refined = sup_refined.max(resolvent_estimate_at(a, lambda, k, alpha, beta)?);
    }
    let stable = (sup - sup_refined).abs() <= 0.05 * sup.max(1e-300);
    Ok(CurveSupReport {
        sup,
        sup_refined,
        stable,
        worst_lambda: worst,
        per_sample,
    })
}

/// Inverse of sigma on the high-frequency block (eigenvalues > cutoff),
/// embedded back with zeros on the low block.
fn cutoff_inverse(sigma: &Symbol, lambda_spec: f64) -> Result<Symbol> {
    let backend = sigma.backend().clone();
    sigma.map_values(-sigma.order(), |x, p, m| {
        let eigs = backend.eigenvalues(p);
        let high: Vec<usize> = (0..eigs.len()).filter(|&k| eigs[k] > lambda_spec).collect();
        let n = m.nrows();
        if high.is_empty() {
            return Ok(CMatrix::zeros(n, n));
        }
        let block = CMatrix::from_fn(high.len(), high.len(), |i, j| m[(high[i], high[j])]);
        let inv =
            linalg::guarded_inverse(&block, SV_FLOOR).map_err(|sv| Error::SingularResolvent {
                point: p,
                x_index: x,
                sigma_min: sv,
            })?;
        let mut out = CMatrix::zeros(n, n);
        for (i, &hi) in high.iter().enumerate() {
            for (j, &hj) in high.iter().enumerate() {
                out[(hi, hj)] = inv[(i, j)];
            }
        }
        Ok(out)
    })
}

/// Parametrix of an elliptic symbol: tau_0 is the high-frequency cutoff
/// inverse, and on the abelian backend the corrections follow
/// tau_N = -sigma_cut^{-1} sum_{k<N} sum_{|gamma|=N-k} (1/gamma!)
///         (d_xi^gamma sigma)(D_x^gamma tau_k).
pub fn parametrix(sigma: &Symbol, n_corrections: usize, lambda_spec: f64) -> Result<Symbol> {
    let rep = is_elliptic(sigma, sigma.order(), lambda_spec, &[0.0])?;
    if !rep.is_elliptic {
        return Err(Error::NotElliptic(format!(
            "lower bound {:.3e} at cutoff {lambda_spec}",
            rep.lower_bound
        )));
    }
    if n_corrections >= 1 && !sigma.backend().is_abelian() {
        return Err(Error::Unsupported(
            "parametrix corrections need the difference calculus of the abelian backend".into(),
        ));
    }
    let inv0 = cutoff_inverse(sigma, lambda_spec)?;
    let mut taus: Vec<Symbol> = vec![inv0.clone()];
    for n in 1..=n_corrections {
        let mut acc: Option<Symbol> = None;
        for k in 0..n {
            let g_total = n - k;
            for gamma in multi_indices(sigma.backend().dim(), g_total) {
                if gamma.iter().sum::<usize>() != g_total {
                    continue;
                }
                let ds = sigma.d_xi(&gamma)?;
                let dt = taus[k].x_derivative(&gamma)?;
                let coeff = Complex64::new(0.0, -1.0).powu(g_total as u32)
                    / Complex64::new(gamma_factorial(&gamma), 0.0);
                let term = ds.pointwise_product(&dt)?.scale(coeff);
                acc = Some(match acc {
                    None => term,
                    Some(s) => s.add(&term)?,
                });
            }
        }
        let rhs = acc.expect("n >= 1 has at least one term");
        let tau_n = inv0
            .pointwise_product(&rhs)?
            .scale(Complex64::new(-1.0, 0.0));
        taus.push(tau_n);
    }
    let mut total = taus[0].clone();
    for t in &taus[1..] {
        total = total.add(t)?;
    }
    Ok(total.with_order(-sigma.order()))
}

fn gamma_factorial(gamma: &[usize]) -> f64 {
    gamma
        .iter()
        .map(|&g| (1..=g).map(|v| v as f64).product::<f64>())
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{make_abelian_backend, make_heisenberg_backend};
    use crate::symbol::{multiplier_symbol, sobolev_weight};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sobolev_weight_is_elliptic_with_unit_bound() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 4).unwrap();
        let a = sobolev_weight(&h, c(1.5, 0.0));
        let rep = is_elliptic(&a, 1.5, 0.0, &[-1.0, 0.0, 2.0]).unwrap();
        assert!(rep.is_elliptic);
        assert!((rep.lower_bound - 1.0).abs() < 1e-12);
        for (_, b) in &rep.per_gamma {
            assert!((b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_symbol_is_not_elliptic() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 4).unwrap();
        let z = Symbol::zero(&h, 0.0);
        let rep = is_elliptic(&z, 0.0, 0.0, &[0.0]).unwrap();
        assert!(!rep.is_elliptic);
        assert_eq!(rep.lower_bound, 0.0);
    }

    #[test]
    fn abelian_shifted_laplacian_elliptic_bound_one() {
        let b = make_abelian_backend(1, 8.0, 33).unwrap();
        let a = multiplier_symbol(&b, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let rep = is_elliptic(&a, 2.0, 0.0, &[0.0, 1.0]).unwrap();
        assert!(rep.is_elliptic);
        assert!((rep.lower_bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_curve_is_reciprocal_of_ellipticity_bound() {
        // sup_(x,pi) || pi(M)^m a^{-1} || over the trivial curve {0} is the
        // reciprocal of the gamma = 0 ellipticity lower bound
        let h = make_heisenberg_backend(0.5, 4.0, 5, 4).unwrap();
        let m = 2.0;
        let mut rng = linalg::seeded_rng(97);
        let w = crate::symbol::sobolev_weight(&h, c(m, 0.0));
        let pert = Symbol::invariant_from_fn(&h, m, |_, _| {
            linalg::random_hermitian_bounded(4, 0.3, &mut rng)
        });
        let a = w.add(&pert).unwrap().with_order(m);
        let curve = CurveSpec::custom(vec![c(0.0, 0.0)]);
        let sup = parameter_ellipticity_report(&a, &curve, m).unwrap().sup;
        let bound = is_elliptic(&a, m, 0.0, &[0.0]).unwrap().lower_bound;
        assert!(
            (sup - 1.0 / bound).abs() < 1e-10 * sup,
            "sup {sup} vs 1/bound {}",
            1.0 / bound
        );
    }

    #[test]
    fn resolvent_of_diagonal_multiplier() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 3).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let r = resolvent(&a, c(-1.0, 0.0)).unwrap();
        let p = h.rep_grid.points.iter().position(|q| q[0] == 2.0).unwrap();
        for (k, &e) in h.eigenvalues(p).iter().enumerate() {
            let want = 1.0 / (2.0 + e);
            assert!((r.value(0, p)[(k, k)] - c(want, 0.0)).norm() < 1e-14);
        }
        assert_eq!(r.order(), -2.0);
    }

    #[test]
    fn resolvent_of_two_by_two_block() {
        // [[2,1],[1,2]] - (-1) = [[3,1],[1,3]]; inverse = (1/8)[[3,-1],[-1,3]]
        let h = make_heisenberg_backend(0.5, 4.0, 2, 2).unwrap();
        let a = Symbol::invariant_from_fn(&h, 1.0, |_, _| {
            CMatrix::from_row_slice(2, 2, &[c(2., 0.), c(1., 0.), c(1., 0.), c(2., 0.)])
        });
        let r = resolvent(&a, c(-1.0, 0.0)).unwrap();
        let want = CMatrix::from_row_slice(
            2,
            2,
            &[
                c(3. / 8., 0.),
                c(-1. / 8., 0.),
                c(-1. / 8., 0.),
                c(3. / 8., 0.),
            ],
        );
        assert!((r.value(0, 0) - want).norm() < 1e-14);
    }

    #[test]
    fn resolvent_identity_holds() {
        let h = make_heisenberg_backend(0.5, 4.0, 6, 4).unwrap();
        let mut rng = linalg::seeded_rng(21);
        let a =
            Symbol::invariant_from_fn(&h, 1.0, |_, _| linalg::random_hpd(4, 1.0, 50.0, &mut rng));
        let lambda = c(-2.0, 0.5);
        let r = resolvent(&a, lambda).unwrap();
        for p in 0..h.n_points() {
            let shifted = a.value(0, p) - CMatrix::identity(4, 4).map(|e| e * lambda);
            let prod = &shifted * r.value(0, p);
            assert!(linalg::relative_diff(&prod, &CMatrix::identity(4, 4)) < 1e-10);
        }
    }

    #[test]
    fn resolvent_at_eigenvalue_is_singular_error() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 3).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        // 1 + nu = 2 is attained at lambda = 1, k = 0
        let r = resolvent(&a, c(2.0, 0.0));
        assert!(matches!(r, Err(Error::SingularResolvent { .. })));
    }

    #[test]
    fn lambda_derivative_identity_vs_finite_differences() {
        let h = make_heisenberg_backend(0.5, 4.0, 4, 3).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let lambda = c(-2.0, 0.0);
        let r = resolvent(&a, lambda).unwrap();
        let dr_exact = r.pointwise_product(&r).unwrap(); // R^2
        let eps = 1e-5;
        let rp = resolvent(&a, lambda + c(eps, 0.0)).unwrap();
        let rm = resolvent(&a, lambda - c(eps, 0.0)).unwrap();
        for p in 0..h.n_points() {
            let fd = (rp.value(0, p) - rm.value(0, p)).map(|e| e / (2.0 * eps));
            assert!((fd - dr_exact.value(0, p)).norm() < 1e-6);
        }
    }

    #[test]
    fn parameter_ellipticity_of_shifted_rockland() {
        // a = 1 + nu on H^1, negative real axis: the scalar sup is <= 2 and
        // approaches 2 where |lambda| matches an eigenvalue band.
        let h = make_heisenberg_backend(0.5, 4.0, 8, 4).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let curve = CurveSpec::negative_real_axis();
        let rep = parameter_ellipticity_report(&a, &curve, 2.0).unwrap();
        assert!(rep.sup <= 2.0 + 1e-9, "{}", rep.sup);
        assert!(rep.sup > 1.9);
        assert!(rep.stable);
    }

    #[test]
    fn parameter_ellipticity_at_origin_matches_ellipticity() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 4).unwrap();
        let m = 2.0;
        let a = sobolev_weight(&h, c(m, 0.0));
        let curve = CurveSpec::custom(vec![c(0.0, 0.0)]);
        let rep = parameter_ellipticity_report(&a, &curve, m).unwrap();
        assert!((rep.sup - 1.0).abs() < 1e-10, "{}", rep.sup);
    }

    #[test]
    fn curve_crossing_spectrum_errors() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 3).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let curve = CurveSpec::custom(vec![c(2.0, 0.0)]);
        assert!(parameter_ellipticity_report(&a, &curve, 2.0).is_err());
    }

    #[test]
    fn resolvent_estimate_spot_value() {
        // a = 1 + nu, m = 2, entry with 1 + nu = 2, lambda = -2, k = 1:
        // ((sqrt 2 + sqrt 2)^4) / (2 + 2)^2 = 4
        let h = make_heisenberg_backend(0.5, 4.0, 8, 4).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let v = resolvent_estimate_at(&a, c(-2.0, 0.0), 1, &[], &[]).unwrap();
        assert!((v - 4.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn resolvent_estimate_k0_matches_parameter_report() {
        let h = make_heisenberg_backend(0.5, 4.0, 6, 3).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let lambda = c(-3.7, 0.0);
        let v = resolvent_estimate_at(&a, lambda, 0, &[], &[]).unwrap();
        let w = weighted_resolvent_sup(&a, lambda, 2.0).unwrap();
        assert!((v - w).abs() < 1e-12);
    }

    #[test]
    fn resolvent_estimate_k2_finite_and_stable() {
        let h = make_heisenberg_backend(0.5, 4.0, 6, 3).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let curve = CurveSpec::negative_real_axis();
        let rep = resolvent_estimate_check(&a, &curve, 2, &[], &[]).unwrap();
        assert!(rep.sup.is_finite());
        assert!(rep.stable, "sup {} refined {}", rep.sup, rep.sup_refined);
    }

    #[test]
    fn positive_definite_invariant_symbols_are_parameter_elliptic_on_ray() {
        // positivity implies parameter ellipticity on the negative real axis
        let h = make_heisenberg_backend(0.5, 4.0, 5, 4).unwrap();
        let m = 2.0;
        let mut rng = linalg::seeded_rng(77);
        for _ in 0..10 {
            let w = sobolev_weight(&h, c(m, 0.0));
            let b = Symbol::invariant_from_fn(&h, m, |_, _| {
                linalg::random_hermitian_bounded(4, 0.4, &mut rng)
            });
            // a = pi(M)^m + B with ||B|| <= 0.4: a >= 0.6 pi(M)^m > 0
            let a = w.add(&b).unwrap().with_order(m);
            let rep =
                parameter_ellipticity_report(&a, &CurveSpec::negative_real_axis(), m).unwrap();
            assert!(rep.sup.is_finite());
            assert!(rep.stable);
        }
    }

    #[test]
    fn parametrix_of_invariant_symbol_inverts_above_cutoff() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 4).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        let cutoff = 3.0;
        let tau = parametrix(&a, 0, cutoff).unwrap();
        for p in 0..h.n_points() {
            let prod = a.value(0, p) * tau.value(0, p);
            for (k, &e) in h.eigenvalues(p).iter().enumerate() {
                let want = if e > cutoff { 1.0 } else { 0.0 };
                assert!((prod[(k, k)] - c(want, 0.0)).norm() < 1e-12);
            }
        }
        assert_eq!(tau.order(), -2.0);
    }

    #[test]
    fn parametrix_requires_ellipticity() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 3).unwrap();
        let z = Symbol::zero(&h, 2.0);
        assert!(matches!(parametrix(&z, 0, 0.0), Err(Error::NotElliptic(_))));
    }

    #[test]
    fn parametrix_corrections_rejected_on_heisenberg() {
        let h = make_heisenberg_backend(0.5, 4.0, 8, 3).unwrap();
        let a = multiplier_symbol(&h, 2.0, |t| c(1.0 + t, 0.0)).unwrap();
        assert!(matches!(parametrix(&a, 1, 0.0), Err(Error::Unsupported(_))));
    }
}
