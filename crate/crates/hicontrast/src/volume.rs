//! Volume discretisation of the Lippmann–Schwinger equation
//! `(I + ε K_D) u = uⁱ` on a uniform grid masked by the inclusion.
//!
//! The grid operator is a Toeplitz convolution, applied with FFTs, and the
//! system is solved with unrestarted GMRES.

use crate::geometry::BoundaryCurve;
use crate::layerpot::{curve_id, ScatteringMatrix, MODE_CAP};
use crate::specfun::jn;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

const MIN_CELLS: f64 = 400.0;
const SUBSAMPLE: usize = 8;
const GMRES_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VolumeError {
    #[error("contrast must exceed -1, got {0}")]
    Contrast(f64),
    #[error("grid too coarse: {cells:.0} cells cover the inclusion, need at least {MIN_CELLS}")]
    TooCoarse { cells: f64 },
    #[error("GMRES stalled at relative residual {0:e}")]
    NoConvergence(f64),
    #[error("mode order {0} exceeds the validated cap {MODE_CAP}")]
    OrderTooLarge(i32),
}

/// `Φ(r) = −(i/4) H_0(r)`.
fn phi(r: f64) -> Complex64 {
    Complex64::new(0.25 * libm::y0(r), -0.25 * libm::j0(r))
}

/// `∫_{|y|<ρ} Φ(|y|) dy = 1 − (iπ/2) ρ H_1(ρ)`.
pub fn disk_self_integral(rho: f64) -> Complex64 {
    let h1 = Complex64::new(libm::j1(rho), libm::y1(rho));
    1.0 - 0.5 * PI * Complex64::i() * rho * h1
}

/// Active cells of a uniform grid over the inclusion.
#[derive(Debug, Clone)]
pub struct VolumeGrid {
    pub cell: f64,
    pub origin: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    /// Grid index of each active cell.
    pub index: Vec<(usize, usize)>,
    pub centers: Vec<[f64; 2]>,
    /// Covered area of each cell.
    pub areas: Vec<f64>,
}

impl VolumeGrid {
    pub fn new(curve: &BoundaryCurve, cell: f64) -> Result<Self, VolumeError> {
        let area = curve.area();
        if !(cell > 0.0) || area / (cell * cell) < MIN_CELLS {
            return Err(VolumeError::TooCoarse { cells: area / (cell * cell) });
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &curve.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let nx = ((hi[0] - lo[0]) / cell).ceil() as usize + 2;
        let ny = ((hi[1] - lo[1]) / cell).ceil() as usize + 2;
        let origin = [
            0.5 * (lo[0] + hi[0]) - 0.5 * nx as f64 * cell,
            0.5 * (lo[1] + hi[1]) - 0.5 * ny as f64 * cell,
        ];
        let mut g = VolumeGrid { cell, origin, nx, ny, index: Vec::new(), centers: Vec::new(), areas: Vec::new() };
        for j in 0..ny {
            for i in 0..nx {
                let c = g.center(i, j);
                let h = 0.5 * cell;
                let corners = [[c[0] - h, c[1] - h], [c[0] + h, c[1] - h], [c[0] - h, c[1] + h], [c[0] + h, c[1] + h]];
                let inside = corners.iter().filter(|p| curve.contains(**p)).count() + curve.contains(c) as usize;
                let frac = match inside {
                    0 => 0.0,
                    5 => 1.0,
                    _ => {
                        let mut hit = 0;
                        for a in 0..SUBSAMPLE {
                            for b in 0..SUBSAMPLE {
                                let p = [
                                    c[0] - h + (a as f64 + 0.5) * cell / SUBSAMPLE as f64,
                                    c[1] - h + (b as f64 + 0.5) * cell / SUBSAMPLE as f64,
                                ];
                                hit += curve.contains(p) as usize;
                            }
                        }
                        hit as f64 / (SUBSAMPLE * SUBSAMPLE) as f64
                    }
                };
                if frac > 0.0 {
                    g.index.push((i, j));
                    g.centers.push(c);
                    g.areas.push(frac * cell * cell);
                }
            }
        }
        Ok(g)
    }

    fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + (i as f64 + 0.5) * self.cell, self.origin[1] + (j as f64 + 0.5) * self.cell]
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Samples of `J_m(r) e^{imθ}` at the cell centres.
    pub fn cylindrical_wave(&self, m: i32) -> Vec<Complex64> {
        self.centers.iter().map(|x| cyl(m, *x)).collect()
    }
}

fn cyl(m: i32, x: [f64; 2]) -> Complex64 {
    Complex64::from_polar(jn(m, x[0].hypot(x[1])), m as f64 * x[1].atan2(x[0]))
}

/// `(I + ε K_D)` on a [`VolumeGrid`].
pub struct VolumeSystem {
    pub grid: VolumeGrid,
    pub eps: f64,
    px: usize,
    py: usize,
    kernel_hat: Vec<Complex64>,
    self_term: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for VolumeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VolumeSystem").field("cells", &self.grid.len()).field("eps", &self.eps).finish()
    }
}

impl VolumeSystem {
    pub fn new(curve: &BoundaryCurve, eps: f64, cell: f64) -> Result<Self, VolumeError> {
        if !(eps > -1.0) || !eps.is_finite() {
            return Err(VolumeError::Contrast(eps));
        }
        let grid = VolumeGrid::new(curve, cell)?;
        let (px, py) = (2 * grid.nx, 2 * grid.ny);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(px);
        let inv = planner.plan_fft_inverse(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_y = planner.plan_fft_inverse(py);
        let mut table = vec![Complex64::new(0.0, 0.0); px * py];
        for b in 0..py {
            let dy = if b < py / 2 { b as f64 } else { b as f64 - py as f64 };
            for a in 0..px {
                let dx = if a < px / 2 { a as f64 } else { a as f64 - px as f64 };
                if a != 0 || b != 0 {
                    table[b * px + a] = phi(cell * dx.hypot(dy));
                }
            }
        }
        let self_term = grid.areas.iter().map(|a| disk_self_integral((a / PI).sqrt())).collect();
        let mut sys = VolumeSystem { grid, eps, px, py, kernel_hat: Vec::new(), self_term, fwd, inv, fwd_y, inv_y };
        sys.fft2(&mut table, false);
        sys.kernel_hat = table;
        Ok(sys)
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let (px, py) = (self.px, self.py);
        let (fx, fy) = if inverse { (&self.inv, &self.inv_y) } else { (&self.fwd, &self.fwd_y) };
        for row in data.chunks_mut(px) {
            fx.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); py];
        for a in 0..px {
            for b in 0..py {
                col[b] = data[b * px + a];
            }
            fy.process(&mut col);
            for b in 0..py {
                data[b * px + a] = col[b];
            }
        }
    }

    /// `K_D u` at the cell centres.
    pub fn apply_kernel(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.px * self.py];
        for (k, &(i, j)) in self.grid.index.iter().enumerate() {
            buf[j * self.px + i] = u[k] * self.grid.areas[k];
        }
        self.fft2(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft2(&mut buf, true);
        let scale = 1.0 / (self.px * self.py) as f64;
        self.grid
            .index
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| buf[j * self.px + i] * scale + self.self_term[k] * u[k])
            .collect()
    }

    /// `(I + ε K_D) u`.
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.apply_kernel(u).iter().zip(u).map(|(k, v)| v + self.eps * k).collect()
    }

    /// Total field for the incident samples `rhs`.
    pub fn solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, VolumeError> {
        gmres(|u| self.apply(u), rhs, GMRES_TOL, 4 * self.grid.len().min(1500))
    }

    /// `ε Σ J_n(r) e^{−inθ} u a` over the cells.
    pub fn project(&self, u: &[Complex64], n: i32) -> Complex64 {
        self.eps
            * self
                .grid
                .centers
                .iter()
                .zip(&self.grid.areas)
                .zip(u)
                .map(|((x, a), v)| cyl(n, *x).conj() * a * v)
                .sum::<Complex64>()
    }

    /// Field at an arbitrary point from the Lippmann–Schwinger representation
    /// `u(x) = uⁱ(x) − ε ∫_D Φ(x − y) u(y) dy`; cells near `x` are subdivided.
    pub fn field_at(&self, u: &[Complex64], incident: Complex64, x: [f64; 2]) -> Complex64 {
        let h = self.grid.cell;
        let sub = 6usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for ((c, a), v) in self.grid.centers.iter().zip(&self.grid.areas).zip(u) {
            let r = (x[0] - c[0]).hypot(x[1] - c[1]);
            if r > 2.5 * h {
                acc += phi(r) * a * v;
                continue;
            }
            let w = a / (sub * sub) as f64;
            let rho = (w / PI).sqrt();
            let mut s = Complex64::new(0.0, 0.0);
            for p in 0..sub {
                for q in 0..sub {
                    let y = [
                        c[0] - 0.5 * h + (p as f64 + 0.5) * h / sub as f64,
                        c[1] - 0.5 * h + (q as f64 + 0.5) * h / sub as f64,
                    ];
                    let d = (x[0] - y[0]).hypot(x[1] - y[1]);
                    s += if d < rho { disk_self_integral(rho) } else { phi(d) * w };
                }
            }
            acc += s * v;
        }
        incident - self.eps * acc
    }

    pub fn scattering_matrix(&self, order: i32, curve_id: &str) -> Result<ScatteringMatrix, VolumeError> {
        if order > MODE_CAP {
            return Err(VolumeError::OrderTooLarge(order));
        }
        let mut w = ScatteringMatrix::zeros(order, self.eps, curve_id, &format!("volume/cell={}", self.grid.cell));
        if self.eps == 0.0 {
            return Ok(w);
        }
        for m in -order..=order {
            let u = self.solve(&self.grid.cylindrical_wave(m))?;
            for n in -order..=order {
                w.set(n, m, self.project(&u, n));
            }
        }
        Ok(w)
    }
}

/// Scattering matrix from the volume discretisation with square cells of side
/// `cell`.
pub fn ls_volume_w(curve: &BoundaryCurve, eps: f64, order: i32, cell: f64) -> Result<ScatteringMatrix, VolumeError> {
    VolumeSystem::new(curve, eps, cell)?.scattering_matrix(order, &curve_id(curve))
}

/// Unrestarted GMRES with modified Gram–Schmidt and Givens rotations.
pub fn gmres<F>(apply: F, b: &[Complex64], tol: f64, max_iter: usize) -> Result<Vec<Complex64>, VolumeError>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    let mut basis: Vec<Vec<Complex64>> = vec![b.iter().map(|v| v / bnorm).collect()];
    let mut h: Vec<Vec<Complex64>> = Vec::new();
    let mut cs: Vec<(f64, Complex64)> = Vec::new();
    let mut g = vec![Complex64::new(bnorm, 0.0)];
    let mut resid = 1.0;
    for k in 0..max_iter.max(1) {
        let mut w = apply(&basis[k]);
        let mut col = Vec::with_capacity(k + 2);
        for v in &basis {
            let d: Complex64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in w.iter_mut().zip(v) {
                *x -= d * y;
            }
            col.push(d);
        }
        let wn = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        col.push(Complex64::new(wn, 0.0));
        for (i, &(c, s)) in cs.iter().enumerate() {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = c * a + s * b;
            col[i + 1] = -s.conj() * a + c * b;
        }
        let (a, b) = (col[k], col[k + 1]);
        let r = a.norm().hypot(b.norm());
        let (c, s) = if a.norm() == 0.0 { (0.0, Complex64::new(1.0, 0.0)) } else { (a.norm() / r, a / a.norm() * b.conj() / r) };
        col[k] = c * a + s * b;
        col[k + 1] = Complex64::new(0.0, 0.0);
        cs.push((c, s));
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s.conj() * gk);
        h.push(col);
        resid = g[k + 1].norm() / bnorm;
        if resid < tol || wn == 0.0 {
            break;
        }
        basis.push(w.iter().map(|v| v / wn).collect());
    }
    let m = h.len();
    let mut y = vec![Complex64::new(0.0, 0.0); m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for j in i + 1..m {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (yj, v) in y.iter().zip(&basis) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += yj * vi;
        }
    }
    if resid > tol {
        return Err(VolumeError::NoConvergence(resid));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk, make_triangle_with_nodes};
    use crate::layerpot;
    use crate::mie;
    use crate::specfun::lommel_equal;
    use crate::testutil::adaptive_quad;

    #[test]
    fn self_integral_matches_quadrature() {
        for rho in [0.01, 0.2, 1.5] {
            let re = adaptive_quad(&|t: f64| 0.5 * PI * libm::y0(t) * t, 0.0, rho, 1e-14);
            let im = adaptive_quad(&|t: f64| -0.5 * PI * libm::j0(t) * t, 0.0, rho, 1e-14);
            let d = disk_self_integral(rho);
            assert!((d - Complex64::new(re, im)).norm() < 1e-10, "{rho} {d} {re} {im}");
        }
    }

    #[test]
    fn gmres_solves_small_system() {
        let a = |x: &[Complex64]| vec![2.0 * x[0] + x[1], Complex64::i() * x[0] + 3.0 * x[1]];
        let b = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        let x = gmres(a, &b, 1e-14, 10).unwrap();
        let r = a(&x);
        assert!((r[0] - b[0]).norm() < 1e-13 && (r[1] - b[1]).norm() < 1e-13);
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let c = make_triangle_with_nodes(0.5, 300);
        let s = VolumeSystem::new(&c, 3.0, 0.015).unwrap();
        let u: Vec<Complex64> = (0..s.grid.len()).map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let fast = s.apply_kernel(&u);
        for k in [0, s.grid.len() / 2, s.grid.len() - 1] {
            let x = s.grid.centers[k];
            let mut direct = s.self_term[k] * u[k];
            for (j, y) in s.grid.centers.iter().enumerate() {
                if j != k {
                    direct += phi((x[0] - y[0]).hypot(x[1] - y[1])) * s.grid.areas[j] * u[j];
                }
            }
            assert!((fast[k] - direct).norm() < 1e-10 * direct.norm(), "{k}");
        }
    }

    #[test]
    fn grid_covers_area() {
        let d = make_disk(0.3, 512);
        let g = VolumeGrid::new(&d, 0.3 / 40.0).unwrap();
        assert!((g.total_area() - PI * 0.09).abs() < 2e-3 * PI * 0.09);
        assert!(matches!(VolumeGrid::new(&d, 0.1), Err(VolumeError::TooCoarse { .. })));
    }

    #[test]
    fn born_limit_and_zero_contrast() {
        let d = make_disk(0.3, 512);
        let eps = 1e-6;
        let w = ls_volume_w(&d, eps, 2, 0.3 / 40.0).unwrap();
        for m in 0..=2 {
            let born = 2.0 * PI * eps * lommel_equal(m, 1.0, 0.3).unwrap();
            assert!(((w.get(m, m) - born) / born).norm() < 5e-3, "{m}");
        }
        let z = ls_volume_w(&d, 0.0, 3, 0.3 / 40.0).unwrap();
        assert_eq!(z.max_diagonal(), 0.0);
    }

    #[test]
    fn interior_potential_of_uniform_disk() {
        // K_D[1] at the centre of a disk of radius R equals 1 − (iπ/2) R H_1(R).
        let d = make_disk(0.3, 512);
        let s = VolumeSystem::new(&d, 1.0, 0.3 / 40.0).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); s.grid.len()];
        let k = s.apply_kernel(&ones);
        let centre = s.grid.centers.iter().enumerate().min_by(|a, b| a.1[0].hypot(a.1[1]).total_cmp(&b.1[0].hypot(b.1[1]))).unwrap().0;
        let exact = disk_self_integral(0.3);
        assert!(((k[centre] - exact) / exact).norm() < 2e-3, "{} {exact}", k[centre]);
    }

    #[test]
    fn disk_matches_mie() {
        let d = make_disk(0.3, 512);
        for eps in [5.0, 63.2576] {
            let w = ls_volume_w(&d, eps, 4, 0.3 / 40.0).unwrap();
            for m in 0..=4 {
                let a = mie::w_mm_analytic(m, 0.3, eps).unwrap();
                assert!(((w.get(m, m) - a) / a).norm() < 0.02, "eps={eps} m={m} {} {a}", w.get(m, m));
            }
        }
    }

    #[test]
    fn triangle_matches_layer_potentials() {
        let t = make_triangle_with_nodes(0.5, 600);
        let eps = 10.0;
        let a = layerpot::scattering_matrix(&t, eps, 3).unwrap();
        let b = ls_volume_w(&t, eps, 3, 0.01).unwrap();
        let scale = a.max_diagonal();
        for (n, m) in a.indices() {
            let x = a.get(n, m);
            if x.norm() > 1e-2 * scale {
                assert!(((b.get(n, m) - x) / x).norm() < 0.05, "{n} {m} {} {x}", b.get(n, m));
            }
        }
    }

    #[test]
    fn field_at_boundary_matches_mie() {
        let (r, eps, m) = (0.3, 20.0, 1);
        let d = make_disk(r, 512);
        let s = VolumeSystem::new(&d, eps, r / 40.0).unwrap();
        let u = s.solve(&s.grid.cylindrical_wave(m)).unwrap();
        let exact = mie::disk_transmission(m, r, eps).unwrap().interior(r);
        for th in [0.0, 1.0, 2.5] {
            let x = [r * f64::cos(th), r * f64::sin(th)];
            let got = s.field_at(&u, cyl(m, x), x) * Complex64::from_polar(1.0, -th);
            assert!(((got - exact) / exact).norm() < 0.03, "{th} {got} {exact}");
        }
    }
}
