//! Shape derivative of the scattering coefficients of a disk.
//!
//! For `∂D^δ = {r = R + δ h(θ)}` around the disk `B(0, R)`,
//! `W_nm(D^δ) − W_nm(D) = δ C(n, m) 𝔉[h](n − m) + O(δ²)` with
//! `𝔉[h](k) = (1/2π) ∫ h e^{−ikθ} dθ` and `C = (2πR/ε) f_m(R) f_n(R)`,
//! `f_p = (1/ε + K_p)^{-1} J_p`.

use crate::geometry::{make_disk, make_fourier_domain, BoundaryCurve, FourierPerturbation, GeometryError};
use crate::layerpot::{self, LayerError, ScatteringMatrix};
use crate::linalg::CMat;
use crate::mie::{self, MieError};
use crate::radialop::{self, RadialError, RadialOperator};
use crate::volume::{VolumeError, VolumeSystem};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Radial grid used by [`c_coeff_radial`].
pub const RADIAL_GRID: usize = 400;
/// Boundary nodes used by the finite-difference route.
pub const FD_NODES: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensitivityError {
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Mie(#[from] MieError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error("contrast must be nonzero and exceed -1, got {0}")]
    Contrast(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Radial resolvent on a discretised grid.
    Radial,
    /// Closed-form disk transmission coefficients.
    Analytic,
    /// Difference quotient of two forward solves.
    FiniteDifference,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Radial => "radial",
            Method::Analytic => "analytic",
            Method::FiniteDifference => "finite-difference",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SensitivityTable {
    pub eps: f64,
    pub radius: f64,
    pub order: i32,
    /// Row `n + N`, column `m + N`.
    pub c: CMat,
    pub method: Method,
    /// Orders whose resolvent solve was flagged as near-resonant.
    pub flagged: Vec<i32>,
}

impl SensitivityTable {
    pub fn get(&self, n: i32, m: i32) -> Complex64 {
        self.c[((n + self.order) as usize, (m + self.order) as usize)]
    }

    pub fn max_abs(&self) -> f64 {
        let s = (2 * self.order + 1) as usize;
        (0..s).flat_map(|i| (0..s).map(move |j| (i, j))).map(|(i, j)| self.c[(i, j)].norm()).fold(0.0, f64::max)
    }

    fn from_boundary_values(eps: f64, radius: f64, order: i32, f: &BTreeMap<i32, Complex64>, method: Method, flagged: Vec<i32>) -> Self {
        let s = (2 * order + 1) as usize;
        let c = CMat::from_fn(s, s, |i, j| {
            let (n, m) = (i as i32 - order, j as i32 - order);
            2.0 * PI * radius / eps * f[&n] * f[&m]
        });
        SensitivityTable { eps, radius, order, c, method, flagged }
    }
}

fn check_eps(eps: f64) -> Result<(), SensitivityError> {
    if eps == 0.0 || !(eps > -1.0) || !eps.is_finite() {
        return Err(SensitivityError::Contrast(eps));
    }
    Ok(())
}

/// `C` with a near-resonance flag from the radial resolvent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub value: Complex64,
    pub near_resonance: bool,
}

fn f_radial(op: &RadialOperator, eps: f64) -> (Complex64, bool) {
    let r = radialop::resolve_bessel(op, eps);
    (r.f_boundary, r.near_resonance)
}

/// Shape coefficient from the radial resolvent, `(2πR/ε) f_m(R) f_n(R)`.
pub fn c_coeff_radial(eps: f64, n: i32, m: i32, r: f64) -> Result<Coefficient, SensitivityError> {
    check_eps(eps)?;
    let (fm, a) = f_radial(&radialop::assemble_radial(m, r, RADIAL_GRID)?, eps);
    let (fn_, b) = if n.abs() == m.abs() {
        // J_{−p} = (−1)^p J_p carries straight through the resolvent.
        let s = if n == m || n % 2 == 0 { 1.0 } else { -1.0 };
        (fm * s, a)
    } else {
        f_radial(&radialop::assemble_radial(n, r, RADIAL_GRID)?, eps)
    };
    Ok(Coefficient { value: 2.0 * PI * r / eps * fm * fn_, near_resonance: a || b })
}

/// Full radial table for `|n|, |m| <= order`.
pub fn table_radial(eps: f64, r: f64, order: i32, n_grid: usize) -> Result<SensitivityTable, SensitivityError> {
    check_eps(eps)?;
    let vals: Vec<(i32, Complex64, bool)> = (0..=order)
        .into_par_iter()
        .map(|p| -> Result<_, SensitivityError> {
            let (f, flag) = f_radial(&radialop::assemble_radial(p, r, n_grid)?, eps);
            Ok((p, f, flag))
        })
        .collect::<Result<_, _>>()?;
    let mut f = BTreeMap::new();
    let mut flagged = Vec::new();
    for (p, v, flag) in vals {
        f.insert(p, v);
        f.insert(-p, if p % 2 == 0 { v } else { -v });
        if flag {
            flagged.push(p);
        }
    }
    Ok(SensitivityTable::from_boundary_values(eps, r, order, &f, Method::Radial, flagged))
}

/// Same table from the closed-form disk solution.
pub fn table_analytic(eps: f64, r: f64, order: i32) -> Result<SensitivityTable, SensitivityError> {
    check_eps(eps)?;
    let mut f = BTreeMap::new();
    for p in -order..=order {
        f.insert(p, mie::boundary_resolvent(p, r, eps)?);
    }
    Ok(SensitivityTable::from_boundary_values(eps, r, order, &f, Method::Analytic, Vec::new()))
}

/// Finite-difference settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub delta0: f64,
    pub n_nodes: usize,
    /// Extrapolate from `δ₀` and `δ₀/2`. Off the diagonal the second-order
    /// change has no content at offset `n − m`, so the error there is
    /// `O(δ²)`; on the diagonal it is `O(δ)`.
    pub richardson: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { delta0: 0.1, n_nodes: FD_NODES, richardson: false }
    }
}

/// Boundary `r = R(1 + δ cos kθ)` (`sine = false`) or `R(1 + δ sin kθ)`.
pub fn perturbed_disk(r: f64, k: i32, delta: f64, sine: bool) -> FourierPerturbation {
    let mut coeffs = BTreeMap::new();
    let k = k.abs();
    if k == 0 {
        coeffs.insert(0, Complex64::new(r, 0.0));
    } else if sine {
        coeffs.insert(k, Complex64::new(0.0, -0.5 * r));
        coeffs.insert(-k, Complex64::new(0.0, 0.5 * r));
    } else {
        coeffs.insert(k, Complex64::new(0.5 * r, 0.0));
        coeffs.insert(-k, Complex64::new(0.5 * r, 0.0));
    }
    FourierPerturbation::new(r, coeffs, delta)
}

fn perturbed_w(r: f64, k: i32, delta: f64, sine: bool, eps: f64, order: i32, nodes: usize) -> Result<ScatteringMatrix, SensitivityError> {
    let c = make_fourier_domain(&perturbed_disk(r, k, delta, sine), nodes)?;
    Ok(layerpot::scattering_matrix(&c, eps, order)?)
}

/// Difference quotients at one `δ` for all offsets `|n − m| <= 2N`.
fn fd_single(eps: f64, r: f64, order: i32, delta: f64, nodes: usize, base: &ScatteringMatrix) -> Result<CMat, SensitivityError> {
    let s = (2 * order + 1) as usize;
    let jobs: Vec<(i32, bool)> = std::iter::once((0, false)).chain((1..=2 * order).flat_map(|k| [(k, false), (k, true)])).collect();
    let ws: Vec<ScatteringMatrix> = jobs
        .par_iter()
        .map(|&(k, sine)| perturbed_w(r, k, delta, sine, eps, order, nodes))
        .collect::<Result<_, _>>()?;
    let mut by_job = BTreeMap::new();
    for (job, w) in jobs.iter().zip(ws) {
        by_job.insert(*job, w);
    }
    let scale = delta * r;
    Ok(CMat::from_fn(s, s, |i, j| {
        let (n, m) = (i as i32 - order, j as i32 - order);
        let k = n - m;
        let dc = by_job[&(k.abs(), false)].get(n, m) - base.get(n, m);
        if k == 0 {
            return dc / scale;
        }
        let ds = by_job[&(k.abs(), true)].get(n, m) - base.get(n, m);
        let i_s = if k > 0 { Complex64::i() } else { -Complex64::i() };
        (dc + i_s * ds) / scale
    }))
}

/// Finite-difference table for `|n|, |m| <= order`.
pub fn table_fd(eps: f64, r: f64, order: i32, cfg: FdConfig) -> Result<SensitivityTable, SensitivityError> {
    check_eps(eps)?;
    let base = layerpot::scattering_matrix(&make_disk(r, cfg.n_nodes), eps, order)?;
    let mut c = fd_single(eps, r, order, cfg.delta0, cfg.n_nodes, &base)?;
    if cfg.richardson {
        let half = fd_single(eps, r, order, 0.5 * cfg.delta0, cfg.n_nodes, &base)?;
        c = CMat::from_fn(c.nrows(), c.ncols(), |i, j| richardson(i == j, c[(i, j)], half[(i, j)]));
    }
    Ok(SensitivityTable { eps, radius: r, order, c, method: Method::FiniteDifference, flagged: Vec::new() })
}

/// `C(n, m)` from one perturbed forward solve pair, with
/// the complex perturbation split into its cosine and sine parts.
pub fn c_coeff_fd(eps: f64, n: i32, m: i32, r: f64, delta0: f64) -> Result<Complex64, SensitivityError> {
    check_eps(eps)?;
    let order = n.abs().max(m.abs());
    let base = layerpot::scattering_matrix(&make_disk(r, FD_NODES), eps, order)?;
    let k = n - m;
    let scale = delta0 * r;
    let dc = perturbed_w(r, k, delta0, false, eps, order, FD_NODES)?.get(n, m) - base.get(n, m);
    if k == 0 {
        return Ok(dc / scale);
    }
    let ds = perturbed_w(r, k, delta0, true, eps, order, FD_NODES)?.get(n, m) - base.get(n, m);
    Ok((dc + Complex64::i() * k.signum() as f64 * ds) / scale)
}

fn richardson(diagonal: bool, full: Complex64, half: Complex64) -> Complex64 {
    if diagonal {
        2.0 * half - full
    } else {
        (4.0 * half - full) / 3.0
    }
}

/// [`c_coeff_fd`] extrapolated from `δ₀` and `δ₀/2`.
pub fn c_coeff_fd_richardson(eps: f64, n: i32, m: i32, r: f64, delta0: f64) -> Result<Complex64, SensitivityError> {
    Ok(richardson(n == m, c_coeff_fd(eps, n, m, r, delta0)?, c_coeff_fd(eps, n, m, r, 0.5 * delta0)?))
}

/// Samples of `∇W_nm = ε u_m v_n` at the boundary nodes, where `u_m` and
/// `v_n` are the volume solutions for the incident fields `J_m e^{imθ}` and
/// `J_n e^{−inθ}`. Pairing with a normal displacement `h` gives
/// `δW_nm ≈ ∮ ∇W_nm h ds`.
pub fn shape_gradient(curve: &BoundaryCurve, eps: f64, n: i32, m: i32, cell: f64) -> Result<Vec<Complex64>, SensitivityError> {
    check_eps(eps)?;
    let sys = VolumeSystem::new(curve, eps, cell)?;
    let cyl = |p: i32, x: [f64; 2], sign: f64| Complex64::from_polar(crate::specfun::jn(p, x[0].hypot(x[1])), sign * p as f64 * x[1].atan2(x[0]));
    let inc_u: Vec<Complex64> = sys.grid.centers.iter().map(|x| cyl(m, *x, 1.0)).collect();
    let inc_v: Vec<Complex64> = sys.grid.centers.iter().map(|x| cyl(n, *x, -1.0)).collect();
    let u = sys.solve(&inc_u)?;
    let v = sys.solve(&inc_v)?;
    Ok(curve
        .nodes
        .par_iter()
        .map(|x| {
            let a = sys.field_at(&u, cyl(m, *x, 1.0), *x);
            let b = sys.field_at(&v, cyl(n, *x, -1.0), *x);
            eps * a * b
        })
        .collect())
}

/// `∮ g h ds` on the curve nodes.
pub fn pair(curve: &BoundaryCurve, g: &[Complex64], h: &[Complex64]) -> Complex64 {
    g.iter().zip(h).zip(&curve.weights).map(|((a, b), w)| a * b * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::jn;

    #[test]
    fn radial_matches_analytic_and_is_symmetric() {
        let r = 0.3;
        for eps in [5.0, 300.0] {
            let a = table_analytic(eps, r, 4).unwrap();
            let b = table_radial(eps, r, 4, 256).unwrap();
            for n in -4..=4 {
                for m in -4..=4 {
                    let x = a.get(n, m);
                    assert!(((b.get(n, m) - x) / x).norm() < 1e-6);
                    assert!((a.get(m, n) - x).norm() <= 1e-14 * x.norm());
                    let parity = if (n + m) % 2 == 0 { 1.0 } else { -1.0 };
                    assert!((a.get(-n, -m) - parity * x).norm() <= 1e-10 * x.norm());
                }
            }
        }
        let c = c_coeff_radial(300.0, 3, -1, r).unwrap();
        let a = table_analytic(300.0, r, 3).unwrap().get(3, -1);
        assert!(((c.value - a) / a).norm() < 1e-6 && !c.near_resonance);
    }

    #[test]
    fn small_contrast_limit() {
        let r = 0.3;
        let eps = 1e-6;
        let t = table_analytic(eps, r, 3).unwrap();
        for (n, m) in [(0, 0), (1, 2), (3, -3)] {
            let born = 2.0 * PI * r * eps * jn(n, r) * jn(m, r);
            assert!(((t.get(n, m) - born) / born).norm() < 1e-5, "{n} {m}");
        }
        assert!(matches!(c_coeff_radial(0.0, 1, 1, r), Err(SensitivityError::Contrast(_))));
    }

    #[test]
    fn dilation_matches_radius_derivative() {
        // A uniform normal displacement gives dW_mm/dR = C(m, m).
        let (r, eps) = (0.3, 40.0);
        let d = 1e-5;
        for m in 0..3 {
            let dw = (mie::w_mm_analytic(m, r + d, eps).unwrap() - mie::w_mm_analytic(m, r - d, eps).unwrap()) / (2.0 * d);
            let c = table_analytic(eps, r, 2).unwrap().get(m, m);
            assert!(((c - dw) / dw).norm() < 1e-6, "{m} {c} {dw}");
        }
    }

    #[test]
    fn finite_difference_orders() {
        let (r, eps) = (0.3, 50.0);
        let exact = table_analytic(eps, r, 2).unwrap();
        let fd = |d: f64, rich: bool| table_fd(eps, r, 2, FdConfig { delta0: d, n_nodes: 128, richardson: rich }).unwrap();
        let rel = |t: &SensitivityTable, n: i32, m: i32| ((t.get(n, m) - exact.get(n, m)) / exact.get(n, m)).norm();
        let (a, b) = (fd(0.004, false), fd(0.002, false));
        // Diagonal (dilation): first order. Off-diagonal: second order.
        let q = rel(&b, 1, 1) / rel(&a, 1, 1);
        assert!(q > 0.45 && q < 0.55, "{q}");
        let q = rel(&b, 2, -1) / rel(&a, 2, -1);
        assert!(q > 0.2 && q < 0.3, "{q}");
        let rich = fd(0.004, true);
        for (n, m) in [(1, 1), (2, -1), (0, 2), (-2, 2)] {
            assert!(rel(&rich, n, m) < 0.05 * rel(&b, n, m).max(1e-6), "{n} {m}");
        }
        let single = c_coeff_fd(eps, 2, -1, r, 0.004).unwrap();
        let tab = table_fd(eps, r, 2, FdConfig { delta0: 0.004, n_nodes: FD_NODES, richardson: false }).unwrap();
        assert!((single - tab.get(2, -1)).norm() < 1e-12 * single.norm());
    }

    #[test]
    fn gradient_on_disk() {
        let (r, eps) = (0.3, 10.0);
        let d = make_disk(r, 128);
        let th = d.angles();
        let exact = table_analytic(eps, r, 2).unwrap();
        for (n, m) in [(1, 0), (2, -1)] {
            let g = shape_gradient(&d, eps, n, m, r / 40.0).unwrap();
            for k in -3..=3 {
                let h: Vec<Complex64> = th.iter().map(|t| Complex64::from_polar(1.0, k as f64 * t)).collect();
                let p = pair(&d, &g, &h);
                let c = exact.get(n, m);
                if k == n - m {
                    assert!(((p - c) / c).norm() < 0.05, "{n} {m} {p} {c}");
                } else {
                    assert!(p.norm() < 0.02 * c.norm(), "{n} {m} {k} {p}");
                }
            }
        }
    }

    #[test]
    fn gradient_born_limit() {
        let (r, eps) = (0.3, 1e-4);
        let d = make_disk(r, 64);
        let g = shape_gradient(&d, eps, 1, 2, r / 40.0).unwrap();
        for (x, v) in d.nodes.iter().zip(&g).step_by(8) {
            let t = x[1].atan2(x[0]);
            let born = eps * jn(1, r) * jn(2, r) * Complex64::from_polar(1.0, t);
            assert!((v - born).norm() < 1e-2 * born.norm(), "{v} {born}");
        }
    }
}

