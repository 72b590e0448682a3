//! The periodic cell [0, 2 pi): sample points, FFT plumbing, spectral
//! differentiation and discrete L^2 / Sobolev norms. This is where the
//! x-dependence of abelian symbols lives.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Equispaced sample points of the cell.
pub fn points(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
        .collect()
}

pub fn fft(v: &[Complex64]) -> Vec<Complex64> {
    let mut buf = v.to_vec();
    FftPlanner::new()
        .plan_fft_forward(v.len())
        .process(&mut buf);
    buf
}

pub fn ifft(v: &[Complex64]) -> Vec<Complex64> {
    let mut buf = v.to_vec();
    FftPlanner::new()
        .plan_fft_inverse(v.len())
        .process(&mut buf);
    let scale = 1.0 / v.len() as f64;
    for e in &mut buf {
        *e *= scale;
    }
    buf
}

/// Signed integer frequency of FFT bin `j` for length `n`.
pub fn bin_frequency(j: usize, n: usize) -> i64 {
    if j <= (n - 1) / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Spectral derivative d^order/dx^order on the cell. The unmatched Nyquist
/// bin of even lengths is zeroed for odd orders.
pub fn spectral_derivative(v: &[Complex64], order: usize) -> Vec<Complex64> {
    if order == 0 {
        return v.to_vec();
    }
    let n = v.len();
    let mut hat = fft(v);
    for (j, h) in hat.iter_mut().enumerate() {
        let k = bin_frequency(j, n);
        if n % 2 == 0 && j == n / 2 && order % 2 == 1 {
            *h = Complex64::new(0.0, 0.0);
        } else {
            *h *= Complex64::new(0.0, k as f64).powu(order as u32);
        }
    }
    ifft(&hat)
}

/// L^2(cell) inner product, conjugate-linear in `w`.
pub fn inner(u: &[Complex64], w: &[Complex64]) -> Complex64 {
    let h = 2.0 * std::f64::consts::PI / u.len() as f64;
    u.iter()
        .zip(w)
        .map(|(a, b)| a * b.conj())
        .sum::<Complex64>()
        * h
}

pub fn l2_norm(u: &[Complex64]) -> f64 {
    inner(u, u).re.max(0.0).sqrt()
}

/// Sobolev norm of index s on the cell, through the Fourier coefficients:
/// ||u||_s^2 = 2 pi sum_k (1 + k^2)^s |c_k|^2.
pub fn sobolev_norm(u: &[Complex64], s: f64) -> f64 {
    let n = u.len();
    let hat = fft(u);
    let mut acc = 0.0;
    for (j, h) in hat.iter().enumerate() {
        let k = bin_frequency(j, n) as f64;
        let c = h / n as f64;
        acc += (1.0 + k * k).powf(s) * c.norm_sqr();
    }
    (2.0 * std::f64::consts::PI * acc).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample<F: Fn(f64) -> Complex64>(n: usize, f: F) -> Vec<Complex64> {
        points(n).into_iter().map(f).collect()
    }

    #[test]
    fn derivative_of_sin_is_cos() {
        let u = sample(64, |x| Complex64::new(x.sin(), 0.0));
        let d = spectral_derivative(&u, 1);
        for (x, v) in points(64).into_iter().zip(&d) {
            assert!((v.re - x.cos()).abs() < 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn l2_norm_of_sin() {
        // ||sin||_{L^2(0,2pi)} = sqrt(pi)
        let u = sample(128, |x| Complex64::new(x.sin(), 0.0));
        assert!((l2_norm(&u) - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sobolev_weighting_single_mode() {
        // u = e^{3ix}: ||u||_s^2 = 2 pi (1 + 9)^s
        let u = sample(64, |x| Complex64::from_polar(1.0, 3.0 * x));
        let got = sobolev_norm(&u, 0.5);
        let expect = (2.0 * std::f64::consts::PI * 10.0f64.powf(0.5)).sqrt();
        assert!((got - expect).abs() < 1e-12);
    }
}
