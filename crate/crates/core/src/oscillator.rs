//! Independent reference eigenvalues of the 1-d quantum harmonic oscillator
//! -d^2/du^2 + lambda^2 u^2, obtained by diagonalising a finite-difference
//! discretisation. This is the oracle the Heisenberg spectral data is checked
//! against; it never uses the closed-form |lambda|(2k+1).

/// 6th-order central stencil for -d^2/du^2, offsets 0..=3 (symmetric).
const D2_STENCIL: [f64; 4] = [49.0 / 18.0, -3.0 / 2.0, 3.0 / 20.0, -1.0 / 90.0];

const BANDWIDTH: usize = 3;

/// Symmetric banded matrix stored by diagonals: `diag[d][i] = A[i + d, i]`.
struct Banded {
    n: usize,
    diag: [Vec<f64>; BANDWIDTH + 1],
}

impl Banded {
    /// Discretised oscillator on (-u_max, u_max) with `n` interior points and
    /// Dirichlet walls; the eigenfunctions of interest vanish at the walls to
    /// machine precision for the domains used here.
    fn oscillator(lambda: f64, n: usize, u_max: f64) -> Self {
        let h = 2.0 * u_max / (n as f64 + 1.0);
        let h2 = h * h;
        let mut diag = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let u = -u_max + h * (i as f64 + 1.0);
            diag[0][i] = D2_STENCIL[0] / h2 + lambda * lambda * u * u;
        }
        for d in 1..=BANDWIDTH {
            for i in 0..n.saturating_sub(d) {
                diag[d][i] = D2_STENCIL[d] / h2;
            }
        }
        Banded { n, diag }
    }

    /// Number of eigenvalues strictly below `shift`, by Sylvester inertia of
    /// the LDL^T factorisation of A - shift*I.
    fn count_below(&self, shift: f64) -> usize {
        let n = self.n;
        let b = BANDWIDTH;
        // l[d][j] holds L[j+d, j]; d[j] the pivot
        let mut l = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut d = vec![0.0; n];
        let mut negatives = 0usize;
        for j in 0..n {
            let mut dj = self.diag[0][j] - shift;
            let kmin = j.saturating_sub(b);
            for k in kmin..j {
                let ljk = l[j - k - 1][k];
                dj -= ljk * ljk * d[k];
            }
            // a zero pivot means `shift` is (numerically) an eigenvalue of a
            // leading principal submatrix; nudge it off
            if dj == 0.0 {
                dj = f64::MIN_POSITIVE;
            }
            d[j] = dj;
            if dj < 0.0 {
                negatives += 1;
            }
            for i in (j + 1)..(j + b + 1).min(n) {
                let mut v = self.diag[i - j][j];
                let kmin = i.saturating_sub(b);
                for k in kmin..j {
                    v -= l[i - k - 1][k] * l[j - k - 1][k] * d[k];
                }
                l[i - j - 1][j] = v / dj;
            }
        }
        negatives
    }

    fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut r = 0.0;
            for d in 1..=BANDWIDTH {
                if i + d < self.n {
                    r += self.diag[d][i].abs();
                }
                if i >= d {
                    r += self.diag[d][i - d].abs();
                }
            }
            lo = lo.min(self.diag[0][i] - r);
            hi = hi.max(self.diag[0][i] + r);
        }
        (lo, hi)
    }
}

/// The `count` smallest eigenvalues of the discretised oscillator, ascending.
pub fn oscillator_eigenvalues(lambda: f64, count: usize, n_grid: usize, u_max: f64) -> Vec<f64> {
    assert!(count <= n_grid);
    let a = Banded::oscillator(lambda.abs(), n_grid, u_max);
    let (lo0, hi0) = a.gershgorin();
    (0..count)
        .map(|k| {
            let (mut lo, mut hi) = (lo0, hi0);
            while hi - lo > 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
                let mid = 0.5 * (lo + hi);
                if a.count_below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

/// Oracle value for a single (lambda, k) pair on the default fine grid.
pub fn oscillator_eigenvalue(lambda: f64, k: usize) -> f64 {
    oscillator_eigenvalues(lambda, k + 1, 4096, 12.0)[k]
}
