//! Radial blocks of the volume operator on a disk.
//!
//! For `f = φ(r) e^{imθ}` the volume operator with kernel `-(i/4) H_0(|x-y|)`
//! acts as `φ ↦ ∫_0^R κ_m(h, r) φ(r) r dr` with
//! `κ_m(h, r) = -(iπ/2) J_m(min(h, r)) H_m(max(h, r))`. The factor `2π` from the
//! angular integral is part of the kernel, so the eigenvalues here are those
//! of the full operator restricted to one angular harmonic.
//!
//! The grid is composite Gauss–Legendre. The kernel has a kink on the diagonal,
//! so the panel containing the target is split at the target and integrated
//! with its own Gauss rule, interpolating the density from the panel nodes.

use crate::linalg::{self, CMat, Lu};
use crate::quad::{barycentric_weights, gauss_legendre, lagrange_basis};
use crate::specfun::{self, h1n, j_h1_product, jn};
use num_complex::Complex64;
use std::f64::consts::PI;

pub const PANEL_ORDER: usize = 16;
pub const DEFAULT_GRID: usize = 800;
/// Pivot ratio under which a solve is reported as resonant.
pub const RESONANCE_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RadialError {
    #[error("grid needs at least 64 points, got {0}")]
    GridTooSmall(usize),
    #[error("radius must be positive")]
    BadRadius,
    #[error(transparent)]
    Special(#[from] specfun::SpecfunError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error("need at least {need} eigenpairs, have {have}")]
    TooFewPairs { need: usize, have: usize },
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `κ_m(h, r)`.
pub fn kernel(m: i32, h: f64, r: f64) -> Complex64 {
    let (a, b) = if h < r { (h, r) } else { (r, h) };
    -0.5 * PI * I * j_h1_product(m, a, b)
}

/// Leading large-rank form `-4R²/(π²(m+2l)²)` of the eigenvalues, with `l`
/// the zero-based rank in descending modulus.
pub fn asymptotic_eigenvalue(m: i32, l: usize, r: f64) -> f64 {
    let k = m.unsigned_abs() as f64 + 2.0 * l as f64;
    -4.0 * r * r / (PI * PI * k * k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub radius: f64,
    pub points: Vec<f64>,
    /// Weights for `∫_0^R · r dr`.
    pub weights: Vec<f64>,
    panel_width: f64,
}

impl RadialGrid {
    /// Composite Gauss–Legendre grid; `n_grid` is rounded up to a multiple of
    /// the panel order.
    pub fn new(radius: f64, n_grid: usize) -> Result<Self, RadialError> {
        if n_grid < 64 {
            return Err(RadialError::GridTooSmall(n_grid));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(RadialError::BadRadius);
        }
        let panels = n_grid.div_ceil(PANEL_ORDER);
        let width = radius / panels as f64;
        let (x, w) = gauss_legendre(PANEL_ORDER);
        let mut points = Vec::with_capacity(panels * PANEL_ORDER);
        let mut weights = Vec::with_capacity(panels * PANEL_ORDER);
        for p in 0..panels {
            let a = p as f64 * width;
            for (t, wt) in x.iter().zip(&w) {
                let r = a + 0.5 * width * (1.0 + t);
                points.push(r);
                weights.push(0.5 * width * wt * r);
            }
        }
        Ok(Self { radius, points, weights, panel_width: width })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `∫_0^R f g r dr` without conjugation.
    pub fn dot(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a * b * w).sum()
    }

    pub fn norm(&self, f: &[Complex64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().sqrt()
    }

    /// `J_m` sampled on the grid.
    pub fn bessel(&self, m: i32) -> Vec<Complex64> {
        self.points.iter().map(|&r| Complex64::new(jn(m, r), 0.0)).collect()
    }
}

/// Which of the two radial operators: the restriction of the volume operator
/// or of its adjoint (conjugate kernel).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    First,
    Second,
}

#[derive(Debug, Clone)]
pub struct RadialOperator {
    pub m: i32,
    pub kind: Kind,
    pub grid: RadialGrid,
    pub matrix: CMat,
}

pub fn assemble_radial(m: i32, r: f64, n_grid: usize) -> Result<RadialOperator, RadialError> {
    assemble_radial_kind(m, r, n_grid, Kind::First)
}

pub fn assemble_radial_kind(m: i32, r: f64, n_grid: usize, kind: Kind) -> Result<RadialOperator, RadialError> {
    specfun::bessel_j(m, 1.0)?;
    let grid = RadialGrid::new(r, n_grid)?;
    let n = grid.len();
    let q = PANEL_ORDER;
    let (gx, gw) = gauss_legendre(q);
    let mut a = CMat::zeros(n, n);
    for i in 0..n {
        let h = grid.points[i];
        for j in 0..n {
            a[(i, j)] = grid.weights[j] * kernel(m, h, grid.points[j]);
        }
        // Replace the owning panel by the split rule.
        let p = i / q;
        let lo = p as f64 * grid.panel_width;
        let hi = lo + grid.panel_width;
        let nodes = &grid.points[p * q..(p + 1) * q];
        let bw = barycentric_weights(nodes);
        let mut row = vec![Complex64::new(0.0, 0.0); q];
        for (s0, s1) in [(lo, h), (h, hi)] {
            let half = 0.5 * (s1 - s0);
            for (t, w) in gx.iter().zip(&gw) {
                let x = s0 + half * (1.0 + t);
                let kx = kernel(m, h, x) * (half * w * x);
                for (rj, lj) in row.iter_mut().zip(lagrange_basis(nodes, &bw, x)) {
                    *rj += kx * lj;
                }
            }
        }
        for (k, v) in row.into_iter().enumerate() {
            a[(i, p * q + k)] = v;
        }
    }
    if kind == Kind::Second {
        for j in 0..n {
            for i in 0..n {
                a[(i, j)] = a[(i, j)].conj();
            }
        }
    }
    Ok(RadialOperator { m, kind, grid, matrix: a })
}

impl RadialOperator {
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        linalg::matvec(&self.matrix, f)
    }

    /// The extension of the operator evaluated at `h >= R`.
    pub fn apply_outside(&self, f: &[Complex64], h: f64) -> Complex64 {
        debug_assert!(h >= self.grid.radius * (1.0 - 1e-12));
        let moment: Complex64 = self
            .grid
            .points
            .iter()
            .zip(&self.grid.weights)
            .zip(f)
            .map(|((&r, w), v)| v * (jn(self.m, r) * w))
            .sum();
        let k = -0.5 * PI * I * h1n(self.m, h);
        match self.kind {
            Kind::First => moment * k,
            Kind::Second => moment * k.conj(),
        }
    }

    /// `D^{1/2} A D^{-1/2}`: the matrix whose spectral norms are the
    /// `L²(r dr)` operator norms.
    pub fn symmetrized(&self) -> CMat {
        let s: Vec<f64> = self.grid.weights.iter().map(|w| w.sqrt()).collect();
        let n = s.len();
        CMat::from_fn(n, n, |i, j| self.matrix[(i, j)] * (s[i] / s[j]))
    }
}

#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub m: i32,
    pub radius: f64,
    pub grid: RadialGrid,
    /// Sorted by descending modulus.
    pub eigenvalues: Vec<Complex64>,
    /// Unit `L²(r dr)` eigenvectors; the largest sample is real positive.
    pub eigenvectors: Vec<Vec<Complex64>>,
    /// Largest `‖Av - λv‖ / ‖A‖` over all pairs (Euclidean norms).
    pub max_residual: f64,
}

pub fn eig(op: &RadialOperator) -> Result<EigenSystem, RadialError> {
    let (vals, vecs) = linalg::eig(&op.matrix)?;
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].norm().total_cmp(&vals[a].norm()).then(a.cmp(&b)));
    let anorm = linalg::frobenius(&op.matrix).max(f64::MIN_POSITIVE);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    let mut max_residual = 0.0f64;
    for &k in &order {
        let mut v: Vec<Complex64> = (0..n).map(|i| vecs[(i, k)]).collect();
        let big = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
        let scale = op.grid.norm(&v);
        if scale > 0.0 && big.norm() > 0.0 {
            let phase = big.conj() / big.norm();
            for x in &mut v {
                *x *= phase / scale;
            }
        }
        let av = op.apply(&v);
        let res: f64 = av.iter().zip(&v).map(|(a, x)| (a - vals[k] * x).norm_sqr()).sum::<f64>().sqrt();
        max_residual = max_residual.max(res / (anorm * linalg::norm2(&v).max(f64::MIN_POSITIVE)));
        eigenvalues.push(vals[k]);
        eigenvectors.push(v);
    }
    Ok(EigenSystem { m: op.m, radius: op.grid.radius, grid: op.grid.clone(), eigenvalues, eigenvectors, max_residual })
}

/// Eigenvalues only, sorted by descending modulus.
pub fn eigenvalues(op: &RadialOperator) -> Result<Vec<Complex64>, RadialError> {
    let mut vals = op.matrix.eigenvalues().map_err(|_| linalg::LinalgError::Eigen)?;
    vals.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(vals)
}

pub fn spectral_radius(op: &RadialOperator) -> Result<f64, RadialError> {
    Ok(eigenvalues(op)?.first().map_or(0.0, |v| v.norm()))
}

/// Solution of `(1/ε + K) f = rhs` on the grid plus its extension to `r = R`.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub f: Vec<Complex64>,
    pub f_boundary: Complex64,
    pub pivot_ratio: f64,
    pub near_resonance: bool,
    /// `‖(1/ε + K) f - rhs‖ / ‖rhs‖` in Euclidean norm (scaled by ε).
    pub residual: f64,
}

/// Solves `(1/ε + K) f = rhs` as `(I + εK) f = ε rhs`, which stays regular
/// as `ε → 0`. `rhs_boundary` is the value of the right-hand side at `R`.
pub fn resolvent_apply(op: &RadialOperator, eps: f64, rhs: &[Complex64], rhs_boundary: Complex64) -> Resolved {
    let n = op.grid.len();
    let mut m = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            m[(i, j)] = op.matrix[(i, j)] * eps;
        }
        m[(j, j)] += 1.0;
    }
    let lu = Lu::new(&m);
    let b: Vec<Complex64> = rhs.iter().map(|v| v * eps).collect();
    let f = lu.solve(&b);
    let mf = linalg::matvec(&m, &f);
    let bn = linalg::norm2(&b);
    let residual = if bn > 0.0 {
        mf.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt() / bn
    } else {
        0.0
    };
    let f_boundary = eps * (rhs_boundary - op.apply_outside(&f, op.grid.radius));
    let pivot_ratio = lu.pivot_ratio();
    Resolved { f, f_boundary, pivot_ratio, near_resonance: pivot_ratio < RESONANCE_PIVOT, residual }
}

/// `f_m = (1/ε + K_m)^{-1} J_m` with its boundary value.
pub fn resolve_bessel(op: &RadialOperator, eps: f64) -> Resolved {
    let rhs = op.grid.bessel(op.m);
    resolvent_apply(op, eps, &rhs, Complex64::new(jn(op.m, op.grid.radius), 0.0))
}

/// Diagonal scattering coefficient of the disk, `2π ∫ J_m f_m r dr`.
pub fn w_mm_radial(m: i32, r: f64, eps: f64, n_grid: usize) -> Result<Complex64, RadialError> {
    let op = assemble_radial(m, r, n_grid)?;
    Ok(w_mm_from(&op, eps))
}

pub fn w_mm_from(op: &RadialOperator, eps: f64) -> Complex64 {
    if eps == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let res = resolve_bessel(op, eps);
    2.0 * PI * op.grid.dot(&op.grid.bessel(op.m), &res.f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCoeff {
    /// Zero-based rank.
    pub l: usize,
    pub lambda: Complex64,
    pub alpha: Complex64,
    pub beta: Complex64,
}

#[derive(Debug, Clone)]
pub struct TailTable {
    pub m: i32,
    pub coeffs: Vec<TailCoeff>,
    /// Pivot ratio of the eigenvector frame solve.
    pub frame_pivot_ratio: f64,
    pub ill_conditioned: bool,
}

/// Expansion `J_m = Σ c_l e_l` in the eigenvector frame, with
/// `α_l = c_l ∫ J_m e_l r dr` and `β_l = c_l e_l(R)`.
pub fn tail_coeffs(es: &EigenSystem) -> TailTable {
    let n = es.grid.len();
    let v = CMat::from_fn(n, n, |i, l| es.eigenvectors[l][i]);
    let lu = Lu::new(&v);
    let jm = es.grid.bessel(es.m);
    let c = lu.solve(&jm);
    let r = es.radius;
    let h = h1n(es.m, r);
    let coeffs = (0..n)
        .map(|l| {
            let e = &es.eigenvectors[l];
            let inner = es.grid.dot(&jm, e);
            let lambda = es.eigenvalues[l];
            let e_r = -0.5 * PI * I * inner * h / lambda;
            TailCoeff { l, lambda, alpha: c[l] * inner, beta: c[l] * e_r }
        })
        .collect();
    let frame_pivot_ratio = lu.pivot_ratio();
    TailTable { m: es.m, coeffs, frame_pivot_ratio, ill_conditioned: frame_pivot_ratio < 1e-13 }
}

/// Hilbert–Schmidt norm of the kernel on `L²(r dr)`, integrated row by row
/// with the same split rule used for assembly.
pub fn schatten2_norm(op: &RadialOperator) -> f64 {
    let grid = &op.grid;
    let (gx, gw) = gauss_legendre(PANEL_ORDER);
    let mut total = 0.0;
    for (i, &h) in grid.points.iter().enumerate() {
        let p = i / PANEL_ORDER;
        let lo = p as f64 * grid.panel_width;
        let hi = lo + grid.panel_width;
        let mut row = 0.0;
        for (j, &r) in grid.points.iter().enumerate() {
            if j / PANEL_ORDER != p {
                row += grid.weights[j] * kernel(op.m, h, r).norm_sqr();
            }
        }
        for (s0, s1) in [(lo, h), (h, hi)] {
            let half = 0.5 * (s1 - s0);
            for (t, w) in gx.iter().zip(&gw) {
                let x = s0 + half * (1.0 + t);
                row += half * w * x * kernel(op.m, h, x).norm_sqr();
            }
        }
        total += grid.weights[i] * row;
    }
    total.sqrt()
}

/// Operator norm on `L²(r dr)`.
pub fn operator_norm(op: &RadialOperator) -> Result<f64, RadialError> {
    Ok(linalg::singular_values(&op.symmetrized())?[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub holds: bool,
    /// `log(bound) - log(‖resolvent‖)`; non-negative when the estimate holds.
    pub margin: f64,
    pub resolvent_norm: f64,
    pub distance: f64,
    pub schatten2: f64,
}

/// Checks `‖(z - K)^{-1}‖ ≤ d^{-1} exp(‖K‖²_{S2}/d² + 1/2)` at `z = -1/ε`,
/// where `d` is the distance from `z` to the computed spectrum.
pub fn resolvent_bound_check(op: &RadialOperator, spectrum: &[Complex64], eps: f64) -> Result<BoundCheck, RadialError> {
    let z = Complex64::new(-1.0 / eps, 0.0);
    let distance = spectrum.iter().map(|l| (z - l).norm()).fold(f64::INFINITY, f64::min);
    let s = op.symmetrized();
    let n = s.nrows();
    let shifted = CMat::from_fn(n, n, |i, j| if i == j { z - s[(i, j)] } else { -s[(i, j)] });
    let sv = linalg::singular_values(&shifted)?;
    let smin = *sv.last().unwrap_or(&0.0);
    let s2 = schatten2_norm(op);
    let log_bound = -distance.ln() + (s2 / distance).powi(2) + 0.5;
    let log_norm = -smin.ln();
    let margin = log_bound - log_norm;
    Ok(BoundCheck { holds: margin >= 0.0, margin, resolvent_norm: 1.0 / smin, distance, schatten2: s2 })
}
