//! Constructive certification of the lower bound
//! Re(Op(a)u, u) >= C1 ||u||_{m/2}^2 - C2 ||u||^2
//! for symbols whose real part dominates C0 pi(M)^m, via the square-root
//! symbol q = (Re a - C1 pi(M)^m)^(1/2), plus the interpolation constants
//! between Sobolev scales.

use num_complex::Complex64;

use crate::backend::FourierField;
use crate::cell;
use crate::error::{Error, Result};
use crate::funcalc::sqrt_symbol;
use crate::linalg;
use crate::symbol::{sobolev_weight, Symbol};

/// Certification tolerance: negative margins above this are attributed to
/// roundoff, clamped to C2 = 0 and flagged.
pub const MARGIN_TOLERANCE: f64 = -1e-9;

#[derive(Debug, Clone)]
pub struct GardingReport {
    /// Assumed operator lower-bound constant.
    pub c0: f64,
    /// Chosen constant in (0, C0).
    pub c1: f64,
    /// Smallest shift making the inequality hold on every trial.
    pub c2: f64,
    /// min over trials of (Re(Op(a)u,u) - C1 ||u||_{m/2}^2 + C2 ||u||^2) / ||u||^2.
    pub margin: f64,
    /// Trial index attaining the margin.
    pub witness: usize,
    /// Measured order of the composition remainder (x-dependent case only).
    pub remainder_order: Option<f64>,
    /// Target order m - (rho - delta) for the remainder.
    pub remainder_order_target: f64,
    /// True when a tiny negative raw margin was clamped to C2 = 0.
    pub roundoff_clamped: bool,
    /// True when C1 = C0 made Re a - C1 pi(M)^m only semidefinite, so the
    /// square-root symbol degenerates and is skipped.
    pub sqrt_degenerate: bool,
    pub certified: bool,
    pub seed: u64,
    pub trials: usize,
}

/// Hermitian part of a symbol. Invariant symbols are hermitianised pointwise;
/// x-dependent abelian symbols go through the order-2 adjoint expansion first.
pub fn real_part_symbol(a: &Symbol) -> Result<Symbol> {
    let sum = if a.is_invariant() {
        a.clone()
    } else {
        a.add(&a.adjoint_symbol(2)?)?
            .scale(Complex64::new(0.5, 0.0))
    };
    let herm = sum.map_values(a.order(), |_, _, m| Ok(linalg::hermitian_part(m)))?;
    Ok(herm.with_type(a.rho(), a.delta()))
}

/// Worst eigenvalue of Re(a) - C0 pi(M)^m over the grid; nonnegative means
/// the operator lower bound holds.
pub fn lower_bound_check(a: &Symbol, m: f64, c0: f64) -> Result<(bool, f64)> {
    let re = real_part_symbol(a)?;
    let backend = a.backend();
    let nu = backend.rockland_degree as f64;
    let mut worst = f64::INFINITY;
    for p in 0..backend.n_points() {
        if !re.point_in_interior(p) {
            continue;
        }
        let w: Vec<f64> = backend
            .eigenvalues(p)
            .iter()
            .map(|&e| c0 * (1.0 + e).powf(m / nu))
            .collect();
        for x in 0..re.n_x() {
            let mut shifted = re.value(x, p).clone();
            for (k, wk) in w.iter().enumerate() {
                shifted[(k, k)] -= Complex64::new(*wk, 0.0);
            }
            let min = linalg::hermitian_eigenvalues(&shifted)
                .first()
                .copied()
                .unwrap_or(0.0);
            worst = worst.min(min);
        }
    }
    Ok((worst >= 0.0, worst))
}

fn estimate_remainder_order(r: &Symbol) -> Option<f64> {
    // fit || r(., xi) ||_op ~ (1 + nu)^(order / nu) in log-log
    let backend = r.backend();
    let nu = backend.rockland_degree as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut scale = 0.0f64;
    let mut samples = Vec::new();
    for p in 0..backend.n_points() {
        if !r.point_in_interior(p) {
            continue;
        }
        let mut v = 0.0f64;
        for x in 0..r.n_x() {
            v = v.max(linalg::op_norm(r.value(x, p)));
        }
        let mu = 1.0 + backend.eigenvalues(p)[0];
        samples.push((mu, v));
        scale = scale.max(v);
    }
    for (mu, v) in samples {
        if v > 1e-13 * scale.max(1e-300) && mu > 1.0 {
            xs.push(mu.ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 3 {
        return None;
    }
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|v| v * v).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    Some(slope * nu)
}

/// A random band-limited test function on the cell with spectral decay
/// (1 + k^2)^(-2), synthesised from seeded coefficients.
fn random_cell_field(
    n_x: usize,
    k_max: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<Complex64> {
    use rand::Rng;
    let mut out = vec![Complex64::new(0.0, 0.0); n_x];
    for k in -(k_max as i64)..=(k_max as i64) {
        let w = (1.0 + (k * k) as f64).powf(-2.0);
        let ck = Complex64::new(w * (rng.gen::<f64>() - 0.5), w * (rng.gen::<f64>() - 0.5));
        for (j, o) in out.iter_mut().enumerate() {
            let x = 2.0 * std::f64::consts::PI * j as f64 / n_x as f64;
            *o += ck * Complex64::from_polar(1.0, k as f64 * x);
        }
    }
    out
}

/// Certify the quadratic-form inequality on seeded random band-limited test
/// fields. Reports the smallest admissible C2 and the relative margin.
pub fn garding_certify(
    a: &Symbol,
    m: f64,
    c0: f64,
    c1: f64,
    trials: usize,
    seed: u64,
) -> Result<GardingReport> {
    if !(c1 > 0.0 && c1 <= c0) {
        return Err(Error::Config(format!(
            "need 0 < C1 <= C0, got C1 = {c1}, C0 = {c0}"
        )));
    }
    let (ok, worst) = lower_bound_check(a, m, c0)?;
    if !ok {
        return Err(Error::Positivity {
            point: 0,
            eigenvalue: worst,
        });
    }

    // q = (Re a - C1 pi(M)^m)^(1/2) is the constructive core; at the boundary
    // C1 = C0 the shifted symbol can be merely semidefinite, in which case q
    // degenerates (towards zero) and the construction is skipped.
    let re = real_part_symbol(a)?;
    let shift = sobolev_weight(a.backend(), Complex64::new(m, 0.0));
    let s = re.sub(&shift.scale(Complex64::new(c1, 0.0)))?.with_order(m);
    let target = m - (a.rho() - a.delta());
    let (remainder_order, sqrt_degenerate) = match sqrt_symbol(&s) {
        Ok(q) => {
            // remainder of q q^* against Re a - C1 pi(M)^m: exactly zero
            // pointwise in the invariant case, the order-2 expansion residue
            // otherwise
            let ord = if a.is_invariant() {
                None
            } else {
                let qq = q.compose(&q.adjoint_symbol(2)?, 2)?;
                estimate_remainder_order(&qq.sub(&s)?)
            };
            (ord, false)
        }
        Err(Error::Positivity { .. }) => (None, true),
        Err(e) => return Err(e),
    };

    let mut rng = linalg::seeded_rng(seed);
    let backend = a.backend();
    let mut needed_c2 = 0.0f64;
    let mut raw_margins = Vec::with_capacity(trials);
    if a.is_invariant() {
        for _ in 0..trials {
            let u = FourierField::random_decay(backend, 2.0, &mut rng);
            let au = a.apply_invariant(&u)?;
            let quad = backend.plancherel_inner(&au, &u)?.re;
            let hs = backend.sobolev_norm(&u, m / 2.0)?;
            let l2 = backend.plancherel_inner(&u, &u)?.re;
            let e = quad - c1 * hs * hs;
            raw_margins.push((e, l2));
            needed_c2 = needed_c2.max(-e / l2);
        }
    } else {
        let n_x = a.n_x();
        let k_max = backend
            .rep_grid
            .points
            .iter()
            .map(|p| p[0].abs())
            .fold(0.0f64, f64::max)
            .round() as usize;
        let k_band = k_max.min((n_x - 1) / 2);
        for _ in 0..trials {
            let u = random_cell_field(n_x, k_band, &mut rng);
            let au = a.apply_samples(&u)?;
            let quad = cell::inner(&au, &u).re;
            let hs = cell::sobolev_norm(&u, m / 2.0);
            let l2 = cell::l2_norm(&u).powi(2);
            let e = quad - c1 * hs * hs;
            raw_margins.push((e, l2));
            needed_c2 = needed_c2.max(-e / l2);
        }
    }

    let roundoff_clamped = needed_c2 > 0.0 && needed_c2 <= MARGIN_TOLERANCE.abs();
    let c2 = if needed_c2 <= MARGIN_TOLERANCE.abs() {
        0.0
    } else {
        needed_c2
    };
    let mut margin = f64::INFINITY;
    let mut witness = 0;
    for (i, (e, l2)) in raw_margins.iter().enumerate() {
        let rel = (e + c2 * l2) / l2;
        if rel < margin {
            margin = rel;
            witness = i;
        }
    }
    Ok(GardingReport {
        c0,
        c1,
        c2,
        margin,
        witness,
        remainder_order,
        remainder_order_target: target,
        roundoff_clamped,
        sqrt_degenerate,
        certified: margin >= MARGIN_TOLERANCE,
        seed,
        trials,
    })
}

/// Smallest constant with (1 + nu)^(2t/nu) <= eps (1 + nu)^(2s/nu) + C_eps on
/// every grid eigenvalue; hypothesis s >= t >= 0 or s, t < 0.
pub fn interpolation_constant(
    backend: &crate::backend::Backend,
    s: f64,
    t: f64,
    eps: f64,
) -> Result<f64> {
    if !((s >= t && t >= 0.0) || (s < 0.0 && t < 0.0)) {
        return Err(Error::Contract(format!(
            "interpolation needs s >= t >= 0 or s, t < 0; got s = {s}, t = {t}"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("eps must be positive, got {eps}")));
    }
    let nu = backend.rockland_degree as f64;
    let mut c = 0.0f64;
    for p in 0..backend.n_points() {
        for &e in backend.eigenvalues(p) {
            let mu = 1.0 + e;
            c = c.max(mu.powf(2.0 * t / nu) - eps * mu.powf(2.0 * s / nu));
        }
    }
    Ok(c.max(0.0))
}
