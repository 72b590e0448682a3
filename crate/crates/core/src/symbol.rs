//! The symbol algebra: construction, quantization, seminorms, difference and
//! space-derivative operators, composition and adjoint expansions. Exact on
//! the abelian backend; invariant-symbol exact on the Heisenberg backend.
//!
//! Conventions fixed here once and used everywhere:
//! difference operator Delta^alpha = i^|alpha| d^alpha/d xi^alpha (matching
//! the transform fhat(xi) = int f e^{-i x xi} dx), hence the classical
//! 1/gamma! and D_x = -i d/dx in the composition and adjoint expansions.

use num_complex::Complex64;

use crate::backend::{Backend, FourierField, GroupBackend};
use crate::cell;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Layers dropped per grid end after one 6th-order stencil pass. Boundary
/// values are filled with one-sided stencils but excluded from sup scans.
const STENCIL_HALF_WIDTH: usize = 3;
const STENCIL_NODES: usize = 7;

/// A field of complex matrices over the representation grid, optionally
/// sampled over the periodic x-cell (abelian backend only).
#[derive(Debug, Clone)]
pub struct Symbol {
    backend: Backend,
    /// data[x][p]; the x dimension has length 1 for invariant symbols.
    data: Vec<Vec<CMatrix>>,
    /// Sample points of the x-cell; empty when invariant.
    x_grid: Vec<f64>,
    order: f64,
    rho: f64,
    delta: f64,
    /// Grid layers per xi-axis end carrying one-sided stencil values.
    skip: usize,
}

impl Symbol {
    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_invariant(&self) -> bool {
        self.x_grid.is_empty()
    }

    pub fn n_x(&self) -> usize {
        self.data.len()
    }

    pub fn x_grid(&self) -> &[f64] {
        &self.x_grid
    }

    pub fn skip(&self) -> usize {
        self.skip
    }

    pub fn value(&self, x: usize, p: usize) -> &CMatrix {
        &self.data[x][p]
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.order = order;
        self
    }

    pub fn with_type(mut self, rho: f64, delta: f64) -> Self {
        self.rho = rho;
        self.delta = delta;
        self
    }

    fn same_shape(&self, other: &Symbol) -> Result<()> {
        if !self.backend.compatible(&other.backend) {
            return Err(Error::Shape("symbols live on different backends".into()));
        }
        if !self.is_invariant() && !other.is_invariant() && self.x_grid != other.x_grid {
            return Err(Error::Shape("symbols live on different x-grids".into()));
        }
        Ok(())
    }

    /// Invariant symbol from a per-point matrix generator.
    pub fn invariant_from_fn<F>(backend: &Backend, order: f64, mut f: F) -> Self
    where
        F: FnMut(usize, &[f64]) -> CMatrix,
    {
        let data = vec![(0..backend.n_points())
            .map(|p| f(p, &backend.rep_grid.points[p]))
            .collect()];
        Symbol {
            backend: backend.clone(),
            data,
            x_grid: Vec::new(),
            order,
            rho: 1.0,
            delta: 0.0,
            skip: 0,
        }
    }

    /// Scalar x-dependent symbol a(x, xi) on the 1-d abelian backend, sampled
    /// on an n_x-point periodic cell.
    pub fn xdep_from_fn<F>(backend: &Backend, n_x: usize, order: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(f64, f64) -> Complex64,
    {
        if !backend.is_abelian() || backend.dim() != 1 {
            return Err(Error::Unsupported(
                "x-dependent symbols are only supported on the 1-d abelian backend".into(),
            ));
        }
        if n_x < 2 {
            return Err(Error::Config(format!("n_x must be >= 2, got {n_x}")));
        }
        let xs = cell::points(n_x);
        let data = xs
            .iter()
            .map(|&x| {
                backend
                    .rep_grid
                    .points
                    .iter()
                    .map(|xi| CMatrix::from_element(1, 1, f(x, xi[0])))
                    .collect()
            })
            .collect();
        Ok(Symbol {
            backend: backend.clone(),
            data,
            x_grid: xs,
            order,
            rho: 1.0,
            delta: 0.0,
            skip: 0,
        })
    }

    pub fn zero(backend: &Backend, order: f64) -> Self {
        let n = backend.truncation;
        Symbol::invariant_from_fn(backend, order, |_, _| CMatrix::zeros(n, n))
    }

    pub fn identity(backend: &Backend) -> Self {
        let n = backend.truncation;
        Symbol::invariant_from_fn(backend, 0.0, |_, _| CMatrix::identity(n, n))
    }

    /// Map every stored matrix, keeping grid metadata and declaring `order`.
    pub fn map_values<F>(&self, order: f64, mut f: F) -> Result<Symbol>
    where
        F: FnMut(usize, usize, &CMatrix) -> Result<CMatrix>,
    {
        let mut data = Vec::with_capacity(self.n_x());
        for x in 0..self.n_x() {
            let mut row = Vec::with_capacity(self.backend.n_points());
            for p in 0..self.backend.n_points() {
                row.push(f(x, p, &self.data[x][p])?);
            }
            data.push(row);
        }
        Ok(Symbol {
            backend: self.backend.clone(),
            data,
            x_grid: self.x_grid.clone(),
            order,
            rho: self.rho,
            delta: self.delta,
            skip: self.skip,
        })
    }

    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        self.binary(other, self.order.max(other.order), |a, b| a + b)
    }

    pub fn sub(&self, other: &Symbol) -> Result<Symbol> {
        self.binary(other, self.order.max(other.order), |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Symbol {
        self.map_values(self.order, |_, _, m| Ok(m.map(|e| e * c)))
            .expect("scale cannot fail")
    }

    /// Pointwise product (the exact composition of invariant symbols).
    pub fn pointwise_product(&self, other: &Symbol) -> Result<Symbol> {
        self.binary(other, self.order + other.order, |a, b| a * b)
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint_pointwise(&self) -> Symbol {
        self.map_values(self.order, |_, _, m| Ok(m.adjoint()))
            .expect("adjoint cannot fail")
    }

    fn binary<F>(&self, other: &Symbol, order: f64, f: F) -> Result<Symbol>
    where
        F: Fn(&CMatrix, &CMatrix) -> CMatrix,
    {
        self.same_shape(other)?;
        // broadcast an invariant factor over the other's x-grid
        let (nx, xg) = if self.n_x() >= other.n_x() {
            (self.n_x(), self.x_grid.clone())
        } else {
            (other.n_x(), other.x_grid.clone())
        };
        let pick = |s: &Symbol, x: usize| if s.n_x() == 1 { 0 } else { x };
        let mut data = Vec::with_capacity(nx);
        for x in 0..nx {
            let row = (0..self.backend.n_points())
                .map(|p| f(&self.data[pick(self, x)][p], &other.data[pick(other, x)][p]))
                .collect();
            data.push(row);
        }
        Ok(Symbol {
            backend: self.backend.clone(),
            data,
            x_grid: xg,
            order,
            rho: self.rho.min(other.rho),
            delta: self.delta.max(other.delta),
            skip: self.skip.max(other.skip),
        })
    }
}

/// Diagonal symbol f(nu_kk(pi)) from the spectral calculus of the Rockland
/// operator. Rejects generators that are not finite on the grid spectrum.
pub fn multiplier_symbol<F>(backend: &Backend, order: f64, f: F) -> Result<Symbol>
where
    F: Fn(f64) -> Complex64,
{
    let n = backend.truncation;
    let mut data = Vec::with_capacity(backend.n_points());
    for p in 0..backend.n_points() {
        let mut m = CMatrix::zeros(n, n);
        for (k, &e) in backend.eigenvalues(p).iter().enumerate() {
            let v = f(e);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Domain {
                    point: p,
                    message: format!("multiplier not finite at eigenvalue {e}"),
                });
            }
            m[(k, k)] = v;
        }
        data.push(m);
    }
    Ok(Symbol {
        backend: backend.clone(),
        data: vec![data],
        x_grid: Vec::new(),
        order,
        rho: 1.0,
        delta: 0.0,
        skip: 0,
    })
}

/// Symbol of the Rockland operator itself: diag(nu_kk), order nu, type (1,0).
pub fn rockland_symbol(backend: &Backend) -> Symbol {
    let order = backend.rockland_degree as f64;
    multiplier_symbol(backend, order, |e| Complex64::new(e, 0.0))
        .expect("rockland spectrum is finite")
}

/// Symbol of (1 + R)^(s/nu): diagonal entries (1 + nu_kk)^(s/nu). For real s
/// this is the Sobolev weight of order Re(s), globally elliptic.
pub fn sobolev_weight(backend: &Backend, s: Complex64) -> Symbol {
    let nu = backend.rockland_degree as f64;
    let entry = move |e: f64| {
        if s.im == 0.0 {
            Complex64::new((1.0 + e).powf(s.re / nu), 0.0)
        } else {
            Complex64::new(1.0 + e, 0.0).powc(s / nu)
        }
    };
    multiplier_symbol(backend, s.re, entry).expect("(1 + nu)^s is finite for nu >= 0")
}

/// Finite-difference weights for the m-th derivative at `z` on arbitrary
/// nodes (Fornberg's recursion).
pub fn fd_weights(nodes: &[f64], z: f64, m: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > m);
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mi = m.min(i);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mi).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mi).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Per-position stencils (window start, weights) for one d/dxi pass on a
/// uniform axis of `n` points: 6th-order central in the interior, 6th-order
/// one-sided near the ends.
fn axis_stencils(n: usize, h: f64) -> Result<Vec<(usize, Vec<f64>)>> {
    if n < STENCIL_NODES {
        return Err(Error::Boundary(format!(
            "axis has {n} points, the 6th-order stencil needs {STENCIL_NODES}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let start = t.saturating_sub(STENCIL_HALF_WIDTH).min(n - STENCIL_NODES);
        let nodes: Vec<f64> = (0..STENCIL_NODES)
            .map(|k| ((start + k) as f64 - t as f64) * h)
            .collect();
        out.push((start, fd_weights(&nodes, 0.0, 1)));
    }
    Ok(out)
}

fn multi_index_total(idx: &[usize]) -> usize {
    idx.iter().sum()
}

/// Homogeneity degree [alpha] = sum nu_j alpha_j. An empty slice is the zero
/// multi-index.
pub fn homogeneity(backend: &GroupBackend, idx: &[usize]) -> Result<usize> {
    if idx.is_empty() {
        return Ok(0);
    }
    let w = &backend.dilation_weights;
    if idx.len() != w.len() {
        return Err(Error::Shape(format!(
            "multi-index has {} entries, the group has {} coordinates",
            idx.len(),
            w.len()
        )));
    }
    Ok(idx.iter().zip(w).map(|(&a, &nu)| a * nu as usize).sum())
}

/// All multi-indices of the given dimension with total order <= max, in
/// deterministic (total, lexicographic) order.
pub fn multi_indices(dim: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max_total {
        let mut idx = vec![0usize; dim];
        fill(&mut out, &mut idx, 0, total);
    }
    return out;

    fn fill(out: &mut Vec<Vec<usize>>, idx: &mut Vec<usize>, pos: usize, rem: usize) {
        if pos + 1 == idx.len() {
            idx[pos] = rem;
            out.push(idx.clone());
            return;
        }
        for v in (0..=rem).rev() {
            idx[pos] = v;
            fill(out, idx, pos + 1, rem - v);
        }
        idx[pos] = 0;
    }
}

impl Symbol {
    /// One plain d/dxi pass along `axis` (no i factor). Tracks the layers that
    /// now carry one-sided values.
    fn d_xi_axis(&self, axis: usize) -> Result<Symbol> {
        let axes = self.backend.abelian_axes.as_ref().ok_or_else(|| {
            Error::Unsupported(
                "difference operators beyond the identity are not available on the Heisenberg backend"
                    .into(),
            )
        })?;
        let dim = self.backend.dim();
        if axis >= dim {
            return Err(Error::Shape(format!(
                "axis {axis} out of range for dim {dim}"
            )));
        }
        let n_xi = axes.xi.len();
        let stencils = axis_stencils(n_xi, axes.spacing)?;
        let stride = n_xi.pow((dim - 1 - axis) as u32);
        let new_skip = self.skip + STENCIL_HALF_WIDTH;
        if 2 * new_skip >= n_xi {
            return Err(Error::Boundary(format!(
                "no interior points remain after {new_skip} boundary layers on a {n_xi}-point axis"
            )));
        }

        let nrows = self.backend.truncation;
        let mut data = Vec::with_capacity(self.n_x());
        for x in 0..self.n_x() {
            let mut row = Vec::with_capacity(self.backend.n_points());
            for p in 0..self.backend.n_points() {
                let t = (p / stride) % n_xi;
                let (start, weights) = &stencils[t];
                let base = p - t * stride + start * stride;
                let mut acc = CMatrix::zeros(nrows, nrows);
                for (k, w) in weights.iter().enumerate() {
                    acc += self.data[x][base + k * stride].map(|e| e * w);
                }
                row.push(acc);
            }
            data.push(row);
        }
        Ok(Symbol {
            backend: self.backend.clone(),
            data,
            x_grid: self.x_grid.clone(),
            order: self.order,
            rho: self.rho,
            delta: self.delta,
            skip: new_skip,
        })
    }

    /// Plain partial derivative d^gamma/dxi^gamma (repeated first-derivative
    /// passes per axis).
    pub(crate) fn d_xi(&self, gamma: &[usize]) -> Result<Symbol> {
        let mut out = self.clone();
        for (axis, &times) in gamma.iter().enumerate() {
            for _ in 0..times {
                out = out.d_xi_axis(axis)?;
            }
        }
        Ok(out)
    }

    /// Difference operator Delta^alpha = i^|alpha| d^alpha/dxi^alpha on the
    /// abelian backend; declared order drops by rho [alpha].
    pub fn difference_op(&self, alpha: &[usize]) -> Result<Symbol> {
        if alpha.is_empty() || multi_index_total(alpha) == 0 {
            return Ok(self.clone());
        }
        if !self.backend.is_abelian() {
            return Err(Error::Unsupported(
                "general difference operators on the Heisenberg backend are out of scope".into(),
            ));
        }
        let h = homogeneity(&self.backend, alpha)?;
        let phase = Complex64::i().powu(multi_index_total(alpha) as u32);
        let d = self.d_xi(alpha)?;
        d.map_values(self.order - self.rho * h as f64, |_, _, m| {
            Ok(m.map(|e| e * phase))
        })
    }

    /// Spectral x-derivative on the periodic cell. Invariant symbols map to
    /// the zero symbol for beta != 0.
    pub fn x_derivative(&self, beta: &[usize]) -> Result<Symbol> {
        let total = multi_index_total(beta);
        if total == 0 {
            return Ok(self.clone());
        }
        if self.is_invariant() {
            return Ok(
                Symbol::zero(&self.backend, self.order + self.delta * total as f64)
                    .with_type(self.rho, self.delta),
            );
        }
        if beta.len() != 1 {
            return Err(Error::Unsupported(
                "x-derivatives are only supported on the 1-d abelian backend".into(),
            ));
        }
        let nx = self.n_x();
        let np = self.backend.n_points();
        let mut data = vec![vec![CMatrix::zeros(1, 1); np]; nx];
        for p in 0..np {
            let col: Vec<Complex64> = (0..nx).map(|x| self.data[x][p][(0, 0)]).collect();
            let d = cell::spectral_derivative(&col, total);
            for x in 0..nx {
                data[x][p] = CMatrix::from_element(1, 1, d[x]);
            }
        }
        Ok(Symbol {
            backend: self.backend.clone(),
            data,
            x_grid: self.x_grid.clone(),
            order: self.order + self.delta * total as f64,
            rho: self.rho,
            delta: self.delta,
            skip: self.skip,
        })
    }

    /// True when the point lies at least `skip` layers away from every
    /// xi-axis end (always true on the Heisenberg grid).
    pub fn point_in_interior(&self, p: usize) -> bool {
        if self.skip == 0 {
            return true;
        }
        let Some(axes) = self.backend.abelian_axes.as_ref() else {
            return true;
        };
        let n_xi = axes.xi.len();
        let dim = self.backend.dim();
        let mut rest = p;
        for _ in 0..dim {
            let t = rest % n_xi;
            if t < self.skip || t + self.skip >= n_xi {
                return false;
            }
            rest /= n_xi;
        }
        true
    }

    fn seminorm_scan<P>(
        &self,
        gamma: f64,
        m: f64,
        rho: f64,
        delta: f64,
        alpha_h: usize,
        beta_h: usize,
        keep: P,
    ) -> (f64, Option<(usize, usize)>)
    where
        P: Fn(&[f64]) -> bool,
    {
        let e_left = rho * alpha_h as f64 - delta * beta_h as f64 - m - gamma;
        let mut best = 0.0;
        let mut arg = None;
        for p in 0..self.backend.n_points() {
            if !self.point_in_interior(p) || !keep(&self.backend.rep_grid.points[p]) {
                continue;
            }
            let wl = self.backend.m_weight(p, e_left);
            let wr = self.backend.m_weight(p, gamma);
            for x in 0..self.n_x() {
                let m0 = &self.data[x][p];
                let scaled =
                    CMatrix::from_fn(m0.nrows(), m0.ncols(), |i, j| m0[(i, j)] * wl[i] * wr[j]);
                let v = linalg::op_norm(&scaled);
                if v > best {
                    best = v;
                    arg = Some((x, p));
                }
            }
        }
        (best, arg)
    }

    /// Seminorm p_{alpha,beta,gamma,m}: sup over the grid of
    /// || pi(M)^(rho[alpha]-delta[beta]-m-gamma) (X^beta Delta^alpha a) pi(M)^gamma ||_op,
    /// boundary stencil layers excluded.
    pub fn seminorm(&self, alpha: &[usize], beta: &[usize], gamma: f64, m: f64) -> Result<f64> {
        let d = self.x_derivative(beta)?.difference_op(alpha)?;
        let ah = homogeneity(&self.backend, alpha)?;
        let bh = homogeneity(&self.backend, beta)?;
        Ok(
            d.seminorm_scan(gamma, m, self.rho, self.delta, ah, bh, |_| true)
                .0,
        )
    }

    /// Quantization on Fourier data: left multiplication by the symbol per
    /// representation point. Invariant symbols only.
    pub fn apply_invariant(&self, u: &FourierField) -> Result<FourierField> {
        if !self.is_invariant() {
            return Err(Error::Unsupported(
                "per-point application needs an invariant symbol; use apply_samples for x-dependent abelian symbols"
                    .into(),
            ));
        }
        if u.data.len() != self.backend.n_points() {
            return Err(Error::Shape(format!(
                "field has {} points, backend has {}",
                u.data.len(),
                self.backend.n_points()
            )));
        }
        Ok(FourierField {
            data: (0..self.backend.n_points())
                .map(|p| &self.data[0][p] * &u.data[p])
                .collect(),
        })
    }

    fn integer_grid(&self) -> Result<Vec<i64>> {
        let axes = self.backend.abelian_axes.as_ref().ok_or_else(|| {
            Error::Unsupported("sample quantization needs the abelian backend".into())
        })?;
        if self.backend.dim() != 1 {
            return Err(Error::Unsupported(
                "sample quantization is implemented for dimension 1".into(),
            ));
        }
        let mut out = Vec::with_capacity(axes.xi.len());
        for &v in &axes.xi {
            let r = v.round();
            if (v - r).abs() > 1e-9 {
                return Err(Error::Config(
                    "quantization on the periodic cell requires an integer frequency grid \
                     (xi_max integral, spacing 1)"
                        .into(),
                ));
            }
            out.push(r as i64);
        }
        Ok(out)
    }

    /// Kohn-Nirenberg quantization on periodic-cell samples:
    /// (Op(a)u)(x_j) = sum_k a(x_j, xi_k) uhat_k e^{i xi_k x_j}. Exact for
    /// inputs band-limited to the frequency grid.
    pub fn apply_samples(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let freqs = self.integer_grid()?;
        let n_x = if self.is_invariant() {
            u.len()
        } else {
            self.x_grid.len()
        };
        if u.len() != n_x {
            return Err(Error::Shape(format!(
                "input has {} samples, the symbol's x-grid has {}",
                u.len(),
                n_x
            )));
        }
        let k_max = freqs.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0) as usize;
        if n_x < 2 * k_max + 1 {
            return Err(Error::Config(format!(
                "n_x = {n_x} cannot resolve the frequency grid up to |xi| = {k_max}; need n_x >= {}",
                2 * k_max + 1
            )));
        }
        let uhat = analyze(u, &freqs);
        let mut out = vec![Complex64::new(0.0, 0.0); n_x];
        for (j, o) in out.iter_mut().enumerate() {
            let xi_row = if self.is_invariant() { 0 } else { j };
            for (kk, &k) in freqs.iter().enumerate() {
                let a = self.data[xi_row][kk][(0, 0)];
                let phase = Complex64::from_polar(
                    1.0,
                    2.0 * std::f64::consts::PI * (k as f64) * (j as f64) / (n_x as f64),
                );
                *o += a * uhat[kk] * phase;
            }
        }
        Ok(out)
    }

    /// Composition: exact pointwise product for invariant symbols; the
    /// Kohn-Nirenberg expansion
    /// sum_{|gamma| <= n_terms} (1/gamma!) (d_xi^gamma a)(D_x^gamma b)
    /// on the abelian backend.
    pub fn compose(&self, other: &Symbol, n_terms: usize) -> Result<Symbol> {
        self.same_shape(other)?;
        if self.is_invariant() && other.is_invariant() {
            return self.pointwise_product(other);
        }
        if !self.backend.is_abelian() {
            return Err(Error::Unsupported(
                "x-dependent composition is only available on the abelian backend".into(),
            ));
        }
        let order = self.order + other.order;
        let mut acc: Option<Symbol> = None;
        for gamma in multi_indices(self.backend.dim(), n_terms) {
            let g = multi_index_total(&gamma);
            let da = self.d_xi(&gamma)?;
            let db = other.x_derivative(&gamma)?;
            let coeff =
                Complex64::new(0.0, -1.0).powu(g as u32) / Complex64::new(factorial(&gamma), 0.0);
            let term = da.pointwise_product(&db)?.scale(coeff);
            acc = Some(match acc {
                None => term,
                Some(s) => s.add(&term)?,
            });
        }
        Ok(acc.expect("at least the gamma = 0 term").with_order(order))
    }

    /// Adjoint symbol: exact pointwise conjugate transpose for invariant
    /// symbols; sum_{|gamma| <= n_terms} (1/gamma!) d_xi^gamma D_x^gamma (a^*)
    /// on the abelian backend.
    pub fn adjoint_symbol(&self, n_terms: usize) -> Result<Symbol> {
        if self.is_invariant() {
            return Ok(self.adjoint_pointwise());
        }
        if !self.backend.is_abelian() {
            return Err(Error::Unsupported(
                "x-dependent adjoints are only available on the abelian backend".into(),
            ));
        }
        let star = self.adjoint_pointwise();
        let mut acc: Option<Symbol> = None;
        for gamma in multi_indices(self.backend.dim(), n_terms) {
            let g = multi_index_total(&gamma);
            let term = star.x_derivative(&gamma)?.d_xi(&gamma)?.scale(
                Complex64::new(0.0, -1.0).powu(g as u32) / Complex64::new(factorial(&gamma), 0.0),
            );
            acc = Some(match acc {
                None => term,
                Some(s) => s.add(&term)?,
            });
        }
        Ok(acc
            .expect("at least the gamma = 0 term")
            .with_order(self.order))
    }
}

fn factorial(gamma: &[usize]) -> f64 {
    gamma
        .iter()
        .map(|&g| (1..=g).map(|v| v as f64).product::<f64>())
        .product()
}

/// Exact DFT analysis at the given integer frequencies:
/// uhat_k = (1/n) sum_j u_j e^{-i k x_j}.
fn analyze(u: &[Complex64], freqs: &[i64]) -> Vec<Complex64> {
    let n = u.len();
    freqs
        .iter()
        .map(|&k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &v) in u.iter().enumerate() {
                let phase = Complex64::from_polar(
                    1.0,
                    -2.0 * std::f64::consts::PI * (k as f64) * (j as f64) / (n as f64),
                );
                acc += v * phase;
            }
            acc / n as f64
        })
        .collect()
}

/// Recover the symbol of a linear operator acting on cell samples:
/// sigma(x, xi) = e^{-i x xi} (A e^{i xi .})(x). The applier is spot-checked
/// for linearity.
pub fn extract_symbol<F>(
    backend: &Backend,
    n_x: usize,
    order: f64,
    mut applier: F,
) -> Result<Symbol>
where
    F: FnMut(&[Complex64]) -> Vec<Complex64>,
{
    let probe = Symbol::zero(backend, 0.0);
    let freqs = probe.integer_grid()?;
    let xs = cell::points(n_x);

    // linearity spot-check on two deterministic pseudo-random inputs
    {
        let u1: Vec<Complex64> = (0..n_x)
            .map(|j| {
                Complex64::new(
                    ((j * 37 + 11) % 97) as f64 / 97.0 - 0.5,
                    ((j * 53 + 7) % 89) as f64 / 89.0 - 0.5,
                )
            })
            .collect();
        let u2: Vec<Complex64> = (0..n_x)
            .map(|j| {
                Complex64::new(
                    ((j * 29 + 3) % 83) as f64 / 83.0 - 0.5,
                    ((j * 41 + 19) % 79) as f64 / 79.0 - 0.5,
                )
            })
            .collect();
        let c1 = Complex64::new(0.7, -0.2);
        let c2 = Complex64::new(-0.3, 0.5);
        let mixed: Vec<Complex64> = u1.iter().zip(&u2).map(|(a, b)| c1 * a + c2 * b).collect();
        let lhs = applier(&mixed);
        let r1 = applier(&u1);
        let r2 = applier(&u2);
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for j in 0..n_x {
            err = err.max((lhs[j] - c1 * r1[j] - c2 * r2[j]).norm());
            scale = scale.max(lhs[j].norm());
        }
        if err > 1e-8 * scale.max(1.0) {
            return Err(Error::Contract(format!(
                "applier is not linear: deviation {err:.3e}"
            )));
        }
    }

    let mut data = vec![Vec::with_capacity(freqs.len()); n_x];
    for &k in &freqs {
        let e: Vec<Complex64> = xs
            .iter()
            .map(|&x| Complex64::from_polar(1.0, k as f64 * x))
            .collect();
        let w = applier(&e);
        for (j, &x) in xs.iter().enumerate() {
            let v = w[j] * Complex64::from_polar(1.0, -(k as f64) * x);
            data[j].push(CMatrix::from_element(1, 1, v));
        }
    }
    Ok(Symbol {
        backend: backend.clone(),
        data,
        x_grid: xs,
        order,
        rho: 1.0,
        delta: 0.0,
        skip: 0,
    })
}

/// One row of the class-membership table.
#[derive(Debug, Clone)]
pub struct ClassEntry {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    /// p_{alpha,beta,0,m} over the full grid.
    pub value: f64,
    /// Same sup restricted to half the dual-grid extent.
    pub half_extent: f64,
    /// Same sup on the every-other-point subgrid.
    pub coarse: f64,
}

#[derive(Debug, Clone)]
pub struct ClassReport {
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
    pub k_max: usize,
    pub entries: Vec<ClassEntry>,
    /// max over the table = ||sigma||_{k, S^m}.
    pub norm: f64,
    /// Every entry changes by < 10% against both subgrid sups.
    pub stable: bool,
}

impl Symbol {
    /// Table of p_{alpha,beta,0,m} for [alpha] + [beta] <= k_max plus a
    /// refinement-stability flag. The stability probe compares the sup on the
    /// full grid against the half-extent and every-other-point subgrids: a
    /// sup that keeps growing with the grid extent flags the symbol as not
    /// resolvable in the declared class.
    pub fn check_class_membership(
        &self,
        m: f64,
        rho: f64,
        delta: f64,
        k_max: usize,
    ) -> Result<ClassReport> {
        let dim_idx = self.backend.dilation_weights.len();
        if !self.backend.is_abelian() && k_max > 0 {
            return Err(Error::Unsupported(
                "class tables with derivatives require the abelian backend".into(),
            ));
        }
        let half = self.half_extent_bound();
        let coarse_keep = self.coarse_mask();

        let mut entries = Vec::new();
        let mut norm = 0.0f64;
        let mut stable = true;
        for alpha in multi_indices(dim_idx, k_max) {
            let ah = homogeneity(&self.backend, &alpha)?;
            if ah > k_max {
                continue;
            }
            for beta in multi_indices(dim_idx, k_max - ah) {
                let bh = homogeneity(&self.backend, &beta)?;
                if ah + bh > k_max {
                    continue;
                }
                let d = self.x_derivative(&beta)?.difference_op(&alpha)?;
                let (value, _) = d.seminorm_scan(0.0, m, rho, delta, ah, bh, |_| true);
                let (he, _) = d.seminorm_scan(0.0, m, rho, delta, ah, bh, |pt| {
                    pt.iter().all(|c| c.abs() <= half + 1e-12)
                });
                let coarse = {
                    let mask = &coarse_keep;
                    let mut best = 0.0f64;
                    for p in 0..self.backend.n_points() {
                        if !mask[p] || !d.point_in_interior(p) {
                            continue;
                        }
                        let (v, _) = d.scan_single_point(p, 0.0, m, rho, delta, ah, bh);
                        best = best.max(v);
                    }
                    best
                };
                let rel = |a: f64, b: f64| {
                    if a.max(b) <= 1e-300 {
                        0.0
                    } else {
                        (a - b).abs() / a.max(b)
                    }
                };
                if rel(value, he) >= 0.10 || rel(value, coarse) >= 0.10 {
                    stable = false;
                }
                norm = norm.max(value);
                entries.push(ClassEntry {
                    alpha: alpha.clone(),
                    beta,
                    value,
                    half_extent: he,
                    coarse,
                });
            }
        }
        Ok(ClassReport {
            m,
            rho,
            delta,
            k_max,
            entries,
            norm,
            stable,
        })
    }

    fn scan_single_point(
        &self,
        p: usize,
        gamma: f64,
        m: f64,
        rho: f64,
        delta: f64,
        alpha_h: usize,
        beta_h: usize,
    ) -> (f64, usize) {
        let e_left = rho * alpha_h as f64 - delta * beta_h as f64 - m - gamma;
        let wl = self.backend.m_weight(p, e_left);
        let wr = self.backend.m_weight(p, gamma);
        let mut best = 0.0;
        let mut bx = 0;
        for x in 0..self.n_x() {
            let m0 = &self.data[x][p];
            let scaled =
                CMatrix::from_fn(m0.nrows(), m0.ncols(), |i, j| m0[(i, j)] * wl[i] * wr[j]);
            let v = linalg::op_norm(&scaled);
            if v > best {
                best = v;
                bx = x;
            }
        }
        (best, bx)
    }

    fn half_extent_bound(&self) -> f64 {
        let coords = &self.backend.rep_grid.points;
        let max = coords
            .iter()
            .flat_map(|p| p.iter().map(|c| c.abs()))
            .fold(0.0f64, f64::max);
        max / 2.0
    }

    fn coarse_mask(&self) -> Vec<bool> {
        if let Some(axes) = self.backend.abelian_axes.as_ref() {
            let n_xi = axes.xi.len();
            let dim = self.backend.dim();
            (0..self.backend.n_points())
                .map(|p| {
                    let mut rest = p;
                    for _ in 0..dim {
                        if rest % n_xi % 2 != 0 {
                            return false;
                        }
                        rest /= n_xi;
                    }
                    true
                })
                .collect()
        } else {
            (0..self.backend.n_points()).map(|p| p % 2 == 0).collect()
        }
    }
}
