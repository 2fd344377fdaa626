//! Boundary-integral forward solver for the transmission problem.
//!
//! Interior field `S^{k₁}[φ]`, exterior field `uⁱ + S[ψ]` with `k₁ = √(1+ε)`.
//! Matching value and normal derivative on the boundary gives
//!
//! ```text
//! S^{k₁}φ − Sψ                     = uⁱ
//! (−½ + K*^{k₁})φ − (½ + K*)ψ      = ∂_ν uⁱ
//! ```
//!
//! and the far field of `S[ψ]` yields `W_nm = −∮ J_n(r) e^{−inθ} ψ_m ds`.

use crate::geometry::{BoundaryCurve, Shape};
use crate::linalg::{self, CMat, Lu};
use crate::specfun::{jn, jnp};
use num_complex::Complex64;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
/// Largest mode order validated for the forward solver.
pub const MODE_CAP: i32 = 25;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LayerError {
    #[error("contrast must exceed -1, got {0}")]
    Contrast(f64),
    #[error("system is numerically singular at eps = {eps} (pivot ratio {pivot:e})")]
    Resonance { eps: f64, pivot: f64 },
    #[error("mode order {0} exceeds the validated cap {MODE_CAP}")]
    OrderTooLarge(i32),
    #[error("spectral quadrature needs an equispaced smooth parametrisation")]
    NotPeriodic,
    #[error("scattering matrices do not match: {0}")]
    Mismatch(&'static str),
}

/// Treatment of the log-singular self-interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagonalRule {
    /// Logarithmic splitting with trigonometric product weights (smooth,
    /// equispaced curves only).
    Spectral,
    /// Rectangular rule with a log-corrected self term, `w ln(w/2π)/2π`, which
    /// cancels the leading error of the punctured sum.
    PanelLog,
    /// Rectangular rule with the self term dropped.
    Naive,
}

impl DiagonalRule {
    pub fn name(self) -> &'static str {
        match self {
            DiagonalRule::Spectral => "spectral",
            DiagonalRule::PanelLog => "panel-log",
            DiagonalRule::Naive => "naive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spectral" => Some(DiagonalRule::Spectral),
            "panel-log" => Some(DiagonalRule::PanelLog),
            "naive" => Some(DiagonalRule::Naive),
            _ => None,
        }
    }

    /// Spectral for smooth parametrised curves, panel-log for polygons.
    pub fn default_for(curve: &BoundaryCurve) -> Self {
        if is_periodic(curve) {
            DiagonalRule::Spectral
        } else {
            DiagonalRule::PanelLog
        }
    }
}

fn is_periodic(curve: &BoundaryCurve) -> bool {
    matches!(curve.shape, Shape::Disk { .. } | Shape::Fourier(_))
}

/// `Φ(k r) = −(i/4) H_0(k r)`.
fn phi(k: f64, r: f64) -> Complex64 {
    let z = k * r;
    Complex64::new(0.25 * libm::y0(z), -0.25 * libm::j0(z))
}

/// `(ik/4) H_1(k r) / r`, so that `∂_{ν_x} Φ = this · (x − y)·ν_x`.
fn dphi_over_r(k: f64, r: f64) -> Complex64 {
    let z = k * r;
    let h1 = Complex64::new(libm::j1(z), libm::y1(z));
    0.25 * k * I * h1 / r
}

/// Smooth constant in `Φ(k r) = (1/2π) ln r + c_k + o(1)`.
fn phi_constant(k: f64) -> Complex64 {
    Complex64::new(((0.5 * k).ln() + EULER_GAMMA) / (2.0 * PI), -0.25)
}

/// Single-layer and adjoint double-layer matrices at wavenumber `k`.
fn layer_blocks(curve: &BoundaryCurve, k: f64, rule: DiagonalRule) -> (CMat, CMat) {
    let n = curve.len();
    let x = &curve.nodes;
    let nu = &curve.normals;
    let w = &curve.weights;
    let mut s = CMat::zeros(n, n);
    let mut kp = CMat::zeros(n, n);
    let ck = phi_constant(k);
    if rule == DiagonalRule::Spectral {
        let half = n / 2;
        let logw = kress_weights(n);
        let dt = 2.0 * PI / n as f64;
        for j in 0..n {
            let speed_j = w[j] / dt;
            for i in 0..n {
                let d = (i + n - j) % n;
                if i == j {
                    let speed = speed_j;
                    let m2 = (ck + (speed).ln() / (2.0 * PI)) * speed;
                    s[(i, i)] = logw[0] * speed / (4.0 * PI) + (PI / half as f64) * m2;
                    kp[(i, i)] = Complex64::new((PI / half as f64) * curve.curvature[i] / (4.0 * PI) * speed, 0.0);
                    continue;
                }
                let dx = [x[i][0] - x[j][0], x[i][1] - x[j][1]];
                let r = dx[0].hypot(dx[1]);
                let z = k * r;
                let (j0, j1) = (libm::j0(z), libm::j1(z));
                let lg = (4.0 * (0.5 * d as f64 * dt).sin().powi(2)).ln();
                // S: M = Φ|x'|, M1 = J0/(4π)|x'|.
                let m = phi(k, r) * speed_j;
                let m1 = j0 / (4.0 * PI) * speed_j;
                s[(i, j)] = logw[d] * m1 + (PI / half as f64) * (m - m1 * lg);
                // K*: L = (ik/4)H1/r (x−y)·ν_x |x'|, L1 = −(k/4π) J1/r (x−y)·ν_x |x'|.
                let proj = dx[0] * nu[i][0] + dx[1] * nu[i][1];
                let l = dphi_over_r(k, r) * proj * speed_j;
                let l1 = -k / (4.0 * PI) * j1 / r * proj * speed_j;
                kp[(i, j)] = logw[d] * l1 + (PI / half as f64) * (l - l1 * lg);
            }
        }
        return (s, kp);
    }
    for j in 0..n {
        for i in 0..n {
            if i == j {
                if rule == DiagonalRule::PanelLog {
                    s[(i, i)] = w[i] * (ck + (w[i] / (2.0 * PI)).ln() / (2.0 * PI));
                    kp[(i, i)] = Complex64::new(w[i] * curve.curvature[i] / (4.0 * PI), 0.0);
                }
                continue;
            }
            let dx = [x[i][0] - x[j][0], x[i][1] - x[j][1]];
            let r = dx[0].hypot(dx[1]);
            s[(i, j)] = phi(k, r) * w[j];
            let proj = dx[0] * nu[i][0] + dx[1] * nu[i][1];
            kp[(i, j)] = dphi_over_r(k, r) * proj * w[j];
        }
    }
    (s, kp)
}

/// Weights `R_d` for `∫ ln(4 sin²((t−τ)/2)) f(τ) dτ ≈ Σ R_{(i−j) mod N} f(t_j)`.
fn kress_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let hf = half as f64;
    (0..n)
        .map(|d| {
            let t = PI * d as f64 / hf;
            let mut s = 0.0;
            for m in 1..half {
                s += (m as f64 * t).cos() / m as f64;
            }
            -2.0 * PI / hf * s - PI / (hf * hf) * (hf * t).cos()
        })
        .collect()
}

/// Dense Nyström system for one curve and contrast.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub curve: BoundaryCurve,
    pub eps: f64,
    pub rule: DiagonalRule,
    pub matrix: CMat,
}

pub fn assemble_system(curve: &BoundaryCurve, eps: f64) -> Result<BlockSystem, LayerError> {
    assemble_system_with(curve, eps, DiagonalRule::default_for(curve))
}

pub fn assemble_system_with(curve: &BoundaryCurve, eps: f64, rule: DiagonalRule) -> Result<BlockSystem, LayerError> {
    if !(eps > -1.0) || !eps.is_finite() {
        return Err(LayerError::Contrast(eps));
    }
    if rule == DiagonalRule::Spectral && (!is_periodic(curve) || curve.len() % 2 == 1) {
        return Err(LayerError::NotPeriodic);
    }
    let n = curve.len();
    let k1 = (1.0 + eps).sqrt();
    let (s1, kp1) = layer_blocks(curve, k1, rule);
    let (s0, kp0) = layer_blocks(curve, 1.0, rule);
    let mut a = CMat::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = s1[(i, j)];
            a[(i, n + j)] = -s0[(i, j)];
            a[(n + i, j)] = kp1[(i, j)];
            a[(n + i, n + j)] = -kp0[(i, j)];
        }
        a[(n + j, j)] -= 0.5;
        a[(n + j, n + j)] -= 0.5;
    }
    Ok(BlockSystem { curve: curve.clone(), eps, rule, matrix: a })
}

/// A factorised system, reusable for any number of incident fields.
pub struct Factored {
    pub system: BlockSystem,
    lu: Lu,
}

impl BlockSystem {
    pub fn factor(self) -> Result<Factored, LayerError> {
        let lu = Lu::new(&self.matrix);
        if lu.pivot_ratio() < 1e-14 {
            return Err(LayerError::Resonance { eps: self.eps, pivot: lu.pivot_ratio() });
        }
        Ok(Factored { system: self, lu })
    }

    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values(&self.matrix).unwrap_or_default()
    }
}

/// Boundary data of the cylindrical wave `J_m(r) e^{imθ}`: value and normal
/// derivative at each node.
pub fn cylindrical_wave(curve: &BoundaryCurve, m: i32) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut val = Vec::with_capacity(curve.len());
    let mut dn = Vec::with_capacity(curve.len());
    for (x, nu) in curve.nodes.iter().zip(&curve.normals) {
        let r = x[0].hypot(x[1]);
        let th = x[1].atan2(x[0]);
        let e = Complex64::from_polar(1.0, m as f64 * th);
        let (c, s) = (th.cos(), th.sin());
        let er = nu[0] * c + nu[1] * s;
        let et = -nu[0] * s + nu[1] * c;
        let tang = if r > 0.0 { I * m as f64 * jn(m, r) / r } else { Complex64::new(0.0, 0.0) };
        val.push(e * jn(m, r));
        dn.push(e * (jnp(m, r) * er + tang * et));
    }
    (val, dn)
}

/// Boundary data of the plane wave `e^{i d·x}`.
pub fn plane_wave(curve: &BoundaryCurve, theta_d: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    let d = [theta_d.cos(), theta_d.sin()];
    curve
        .nodes
        .iter()
        .zip(&curve.normals)
        .map(|(x, nu)| {
            let u = Complex64::from_polar(1.0, d[0] * x[0] + d[1] * x[1]);
            (u, I * (d[0] * nu[0] + d[1] * nu[1]) * u)
        })
        .unzip()
}

#[derive(Debug, Clone)]
pub struct Densities {
    pub phi: Vec<Complex64>,
    pub psi: Vec<Complex64>,
    /// `‖Ax − b‖ / ‖b‖`.
    pub residual: f64,
}

impl Factored {
    pub fn solve(&self, value: &[Complex64], normal: &[Complex64]) -> Densities {
        let n = self.system.curve.len();
        let mut b = Vec::with_capacity(2 * n);
        b.extend_from_slice(value);
        b.extend_from_slice(normal);
        let x = self.lu.solve(&b);
        let ax = linalg::matvec(&self.system.matrix, &x);
        let residual = linalg::norm2(&ax.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>()) / linalg::norm2(&b).max(f64::MIN_POSITIVE);
        Densities { phi: x[..n].to_vec(), psi: x[n..].to_vec(), residual }
    }

    pub fn solve_mode(&self, m: i32) -> Densities {
        let (v, d) = cylindrical_wave(&self.system.curve, m);
        self.solve(&v, &d)
    }

    /// `−∮ J_n e^{−inθ} ψ ds`.
    pub fn project(&self, psi: &[Complex64], n: i32) -> Complex64 {
        let c = &self.system.curve;
        -c.nodes
            .iter()
            .zip(&c.weights)
            .zip(psi)
            .map(|((x, w), p)| {
                let r = x[0].hypot(x[1]);
                let th = x[1].atan2(x[0]);
                Complex64::from_polar(jn(n, r) * w, -(n as f64) * th) * p
            })
            .sum::<Complex64>()
    }

    pub fn scattering_matrix(&self, order: i32) -> Result<ScatteringMatrix, LayerError> {
        if order > MODE_CAP {
            return Err(LayerError::OrderTooLarge(order));
        }
        let size = (2 * order + 1) as usize;
        let curve = &self.system.curve;
        let nn = curve.len();
        let mut rhs = CMat::zeros(2 * nn, size);
        for (col, m) in (-order..=order).enumerate() {
            let (v, d) = cylindrical_wave(curve, m);
            for i in 0..nn {
                rhs[(i, col)] = v[i];
                rhs[(nn + i, col)] = d[i];
            }
        }
        let sol = self.lu.solve_mat(&rhs);
        // Test functions J_n(r) e^{−inθ} w at every node.
        let mut test = CMat::zeros(size, nn);
        for (j, (x, w)) in curve.nodes.iter().zip(&curve.weights).enumerate() {
            let r = x[0].hypot(x[1]);
            let th = x[1].atan2(x[0]);
            for (row, n) in (-order..=order).enumerate() {
                test[(row, j)] = Complex64::from_polar(-jn(n, r) * w, -(n as f64) * th);
            }
        }
        let mut entries = CMat::zeros(size, size);
        for c in 0..size {
            for rr in 0..size {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..nn {
                    acc += test[(rr, j)] * sol[(nn + j, c)];
                }
                entries[(rr, c)] = acc;
            }
        }
        Ok(ScatteringMatrix {
            order,
            entries,
            eps: self.system.eps,
            curve_id: curve_id(curve),
            solver: format!("layer-potential/{}/{}", self.system.rule.name(), nn),
        })
    }
}

pub fn solve_densities(system: &BlockSystem, m: i32) -> Result<Densities, LayerError> {
    Ok(system.clone().factor()?.solve_mode(m))
}

/// `W_nm` for `|n|, |m| <= order`.
#[derive(Debug, Clone)]
pub struct ScatteringMatrix {
    pub order: i32,
    /// `(2N+1)²`, row `n + N`, column `m + N`.
    pub entries: CMat,
    pub eps: f64,
    pub curve_id: String,
    pub solver: String,
}

impl ScatteringMatrix {
    pub fn zeros(order: i32, eps: f64, curve_id: &str, solver: &str) -> Self {
        let s = (2 * order + 1) as usize;
        Self { order, entries: CMat::zeros(s, s), eps, curve_id: curve_id.into(), solver: solver.into() }
    }

    pub fn get(&self, n: i32, m: i32) -> Complex64 {
        self.entries[((n + self.order) as usize, (m + self.order) as usize)]
    }

    pub fn set(&mut self, n: i32, m: i32, v: Complex64) {
        self.entries[((n + self.order) as usize, (m + self.order) as usize)] = v;
    }

    pub fn indices(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        let o = self.order;
        (-o..=o).flat_map(move |n| (-o..=o).map(move |m| (n, m)))
    }

    pub fn max_diagonal(&self) -> f64 {
        (-self.order..=self.order).map(|m| self.get(m, m).norm()).fold(0.0, f64::max)
    }

    pub fn max_off_diagonal(&self) -> f64 {
        self.indices().filter(|(n, m)| n != m).map(|(n, m)| self.get(n, m).norm()).fold(0.0, f64::max)
    }

    /// Entry-wise difference `self − other`.
    pub fn difference(&self, other: &ScatteringMatrix) -> Result<ScatteringMatrix, LayerError> {
        if self.order != other.order {
            return Err(LayerError::Mismatch("truncation order"));
        }
        if self.eps != other.eps {
            return Err(LayerError::Mismatch("contrast"));
        }
        let mut out = self.clone();
        for (n, m) in self.indices() {
            out.set(n, m, self.get(n, m) - other.get(n, m));
        }
        Ok(out)
    }

    /// Far-field pattern `A(θ_d, θ_x) = Σ i^{m−n} W_nm e^{i(nθ_x − mθ_d)}`,
    /// rows indexed by incidence.
    pub fn far_field(&self, incident: &[f64], observed: &[f64]) -> CMat {
        CMat::from_fn(incident.len(), observed.len(), |a, b| {
            let mut s = Complex64::new(0.0, 0.0);
            for (n, m) in self.indices() {
                let ph = I.powi(m - n) * Complex64::from_polar(1.0, n as f64 * observed[b] - m as f64 * incident[a]);
                s += self.get(n, m) * ph;
            }
            s
        })
    }

    /// Inverse of [`Self::far_field`] on a uniform `p × p` angle grid,
    /// `W_nm = i^{n−m} F[A](−m, n)`.
    pub fn from_far_field(a: &CMat, order: i32, eps: f64, curve_id: &str) -> ScatteringMatrix {
        let p = a.nrows();
        let angles: Vec<f64> = (0..p).map(|j| 2.0 * PI * j as f64 / p as f64).collect();
        let mut w = ScatteringMatrix::zeros(order, eps, curve_id, "far-field-dft");
        for n in -order..=order {
            for m in -order..=order {
                let mut s = Complex64::new(0.0, 0.0);
                for (i, td) in angles.iter().enumerate() {
                    for (j, tx) in angles.iter().enumerate() {
                        s += a[(i, j)] * Complex64::from_polar(1.0, m as f64 * td - n as f64 * tx);
                    }
                }
                w.set(n, m, I.powi(n - m) * s / (p * p) as f64);
            }
        }
        w
    }
}

/// Short stable identifier of a discretised curve.
pub fn curve_id(curve: &BoundaryCurve) -> String {
    let kind = match &curve.shape {
        Shape::Disk { radius } => format!("disk(R={radius})"),
        Shape::Fourier(p) => format!("fourier(R={},delta={},modes={})", p.radius, p.delta, p.coeffs.len()),
        Shape::Polygon { vertices } => format!("polygon({} vertices)", vertices.len()),
    };
    format!("{kind}/n={}", curve.len())
}

pub fn scattering_matrix(curve: &BoundaryCurve, eps: f64, order: i32) -> Result<ScatteringMatrix, LayerError> {
    scattering_matrix_with(curve, eps, order, DiagonalRule::default_for(curve))
}

pub fn scattering_matrix_with(curve: &BoundaryCurve, eps: f64, order: i32, rule: DiagonalRule) -> Result<ScatteringMatrix, LayerError> {
    if order > MODE_CAP {
        return Err(LayerError::OrderTooLarge(order));
    }
    if eps == 0.0 {
        return Ok(ScatteringMatrix::zeros(order, eps, &curve_id(curve), "zero-contrast"));
    }
    assemble_system_with(curve, eps, rule)?.factor()?.scattering_matrix(order)
}

/// Far field synthesised from the scattering matrix of order `order`.
pub fn far_field(curve: &BoundaryCurve, eps: f64, incident: &[f64], observed: &[f64], order: i32) -> Result<CMat, LayerError> {
    Ok(scattering_matrix(curve, eps, order)?.far_field(incident, observed))
}

/// Far field computed directly from plane-wave densities,
/// `A(θ_d, θ_x) = −∮ e^{−i x̂·y} ψ(y) ds(y)`.
pub fn far_field_direct(curve: &BoundaryCurve, eps: f64, incident: &[f64], observed: &[f64]) -> Result<CMat, LayerError> {
    let f = assemble_system(curve, eps)?.factor()?;
    let mut out = CMat::zeros(incident.len(), observed.len());
    for (a, &td) in incident.iter().enumerate() {
        let (v, d) = plane_wave(curve, td);
        let dens = f.solve(&v, &d);
        for (b, &tx) in observed.iter().enumerate() {
            let xh = [tx.cos(), tx.sin()];
            out[(a, b)] = -curve
                .nodes
                .iter()
                .zip(&curve.weights)
                .zip(&dens.psi)
                .map(|((y, w), p)| Complex64::from_polar(*w, -(xh[0] * y[0] + xh[1] * y[1])) * p)
                .sum::<Complex64>();
        }
    }
    Ok(out)
}

/// Interior field `S^{k₁}[φ](x)` at a point away from the boundary.
pub fn interior_field(curve: &BoundaryCurve, eps: f64, phi_density: &[Complex64], x: [f64; 2]) -> Complex64 {
    let k1 = (1.0 + eps).sqrt();
    curve
        .nodes
        .iter()
        .zip(&curve.weights)
        .zip(phi_density)
        .map(|((y, w), p)| phi(k1, (x[0] - y[0]).hypot(x[1] - y[1])) * w * p)
        .sum()
}

pub use crate::volume::ls_volume_w;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk, make_fourier_domain, make_triangle_with_nodes, FourierPerturbation};
    use crate::mie;
    use crate::specfun::h1n;

    #[test]
    fn kress_weights_integrate_the_log_kernel() {
        // ∫ ln(4 sin²((t−τ)/2)) cos(kτ) dτ = −2π cos(kt)/k.
        let n = 64;
        let w = kress_weights(n);
        for k in 1..20 {
            let s: f64 = (0..n).map(|j| w[j] * (k as f64 * 2.0 * PI * j as f64 / n as f64).cos()).sum();
            assert!((s + 2.0 * PI / k as f64).abs() < 1e-12, "{k} {s}");
        }
        let s0: f64 = w.iter().sum();
        assert!(s0.abs() < 1e-12);
    }

    #[test]
    fn kernels_match_direct_evaluation() {
        let c = make_triangle_with_nodes(0.5, 120);
        let (s, kp) = layer_blocks(&c, 3.0, DiagonalRule::PanelLog);
        for (i, j) in [(0, 5), (17, 90), (100, 3)] {
            let dx = [c.nodes[i][0] - c.nodes[j][0], c.nodes[i][1] - c.nodes[j][1]];
            let r = dx[0].hypot(dx[1]);
            let direct = -0.25 * I * h1n(0, 3.0 * r) * c.weights[j];
            assert!((s[(i, j)] - direct).norm() < 1e-15 * direct.norm().max(1.0));
            let proj = (dx[0] * c.normals[i][0] + dx[1] * c.normals[i][1]) / r;
            let dk = 0.25 * I * 3.0 * h1n(1, 3.0 * r) * proj * c.weights[j];
            assert!((kp[(i, j)] - dk).norm() < 1e-14 * dk.norm().max(1.0));
        }
    }

    #[test]
    fn disk_diagonal_matches_mie() {
        let d = make_disk(0.3, 256);
        for eps in [1.0, 50.0, 500.0] {
            let w = scattering_matrix(&d, eps, 10).unwrap();
            for m in -10..=10 {
                let a = mie::w_mm_analytic(m, 0.3, eps).unwrap();
                assert!(((w.get(m, m) - a) / a).norm() < 1e-8, "eps={eps} m={m} {} {a}", w.get(m, m));
            }
            assert!(w.max_off_diagonal() <= 1e-10 * w.max_diagonal());
        }
    }

    #[test]
    fn panel_log_and_naive_converge() {
        let eps = 20.0;
        let exact = mie::w_mm_analytic(1, 0.3, eps).unwrap();
        let err = |n: usize, rule| {
            let w = scattering_matrix_with(&make_disk(0.3, n), eps, 1, rule).unwrap();
            ((w.get(1, 1) - exact) / exact).norm()
        };
        let (p1, p2) = (err(128, DiagonalRule::PanelLog), err(256, DiagonalRule::PanelLog));
        let (n1, n2) = (err(128, DiagonalRule::Naive), err(256, DiagonalRule::Naive));
        assert!(p2 < p1 / 3.0, "{p1} {p2}");
        assert!(n2 < n1 / 1.8, "{n1} {n2}");
        assert!(p2 < n2);
    }

    #[test]
    fn densities_reproduce_transmission_field() {
        let (r, eps, m) = (0.3, 40.0, 2);
        let c = make_disk(r, 256);
        let f = assemble_system(&c, eps).unwrap().factor().unwrap();
        let dens = f.solve_mode(m);
        assert!(dens.residual < 1e-10);
        let t = mie::disk_transmission(m, r, eps).unwrap();
        let x: [f64; 2] = [0.1, 0.07];
        let th = x[1].atan2(x[0]);
        let exact = t.interior(x[0].hypot(x[1])) * Complex64::from_polar(1.0, m as f64 * th);
        let got = interior_field(&c, eps, &dens.phi, x);
        assert!(((got - exact) / exact).norm() < 1e-6, "{got} {exact}");
    }

    #[test]
    fn rotated_rhs_rotates_densities() {
        let n = 128;
        let c = make_disk(0.3, n);
        let f = assemble_system(&c, 10.0).unwrap().factor().unwrap();
        let m = 3;
        let dens = f.solve_mode(m);
        let shift = 5;
        let phase = Complex64::from_polar(1.0, m as f64 * 2.0 * PI * shift as f64 / n as f64);
        for j in 0..n {
            let a = dens.psi[(j + shift) % n];
            assert!((a - phase * dens.psi[j]).norm() < 1e-10 * dens.psi[j].norm().max(1.0));
        }
    }

    #[test]
    fn rotation_leaves_singular_values() {
        let f = FourierPerturbation::from_cosines(0.3, &[(3, 0.2)], 0.1);
        let c = make_fourier_domain(&f, 64).unwrap();
        let a = assemble_system(&c, 30.0).unwrap().singular_values();
        let b = assemble_system(&c.rotated(0.7), 30.0).unwrap().singular_values();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * a[0]);
        }
    }

    #[test]
    fn far_field_round_trip_and_direct() {
        let f = FourierPerturbation::from_cosines(0.3, &[(3, 0.3), (5, 0.2)], 0.1);
        let c = make_fourier_domain(&f, 128).unwrap();
        let eps = 30.0;
        let w = scattering_matrix(&c, eps, 12).unwrap();
        let p = 32;
        let ang: Vec<f64> = (0..p).map(|j| 2.0 * PI * j as f64 / p as f64).collect();
        let a = w.far_field(&ang, &ang);
        let back = ScatteringMatrix::from_far_field(&a, 12, eps, "x");
        for (n, m) in w.indices() {
            assert!((back.get(n, m) - w.get(n, m)).norm() < 1e-8 * w.max_diagonal());
        }
        // Against densities for actual plane waves.
        let inc = [0.0, 1.0];
        let obs = [0.3, 2.0, 4.0];
        let direct = far_field_direct(&c, eps, &inc, &obs).unwrap();
        let synth = w.far_field(&inc, &obs);
        for i in 0..2 {
            for j in 0..3 {
                assert!((direct[(i, j)] - synth[(i, j)]).norm() < 1e-9 * direct[(i, j)].norm(), "{i} {j}");
            }
        }
    }

    #[test]
    fn disk_far_field_reciprocity_and_zero_contrast() {
        let c = make_disk(0.3, 128);
        let w = scattering_matrix(&c, 80.0, 10).unwrap();
        let a = w.far_field(&[0.4], &[1.9]);
        let b = w.far_field(&[1.9 + PI], &[0.4 + PI]);
        assert!((a[(0, 0)] - b[(0, 0)]).norm() < 1e-12 * a[(0, 0)].norm());
        let z = far_field(&c, 0.0, &[0.0], &[1.0], 5).unwrap();
        assert_eq!(z[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rotation_equivariance_of_far_field() {
        let f = FourierPerturbation::from_cosines(0.3, &[(2, 0.3)], 0.1);
        let c = make_fourier_domain(&f, 96).unwrap();
        let phi0 = 0.4;
        let a = far_field(&c, 25.0, &[0.2], &[1.1], 12).unwrap();
        let b = far_field(&c.rotated(phi0), 25.0, &[0.2 + phi0], &[1.1 + phi0], 12).unwrap();
        assert!((a[(0, 0)] - b[(0, 0)]).norm() < 1e-10 * a[(0, 0)].norm());
    }

    #[test]
    fn decay_envelope() {
        let c = make_triangle_with_nodes(0.5, 256);
        let w = scattering_matrix(&c, 5.0, 8).unwrap();
        let floor = 1e-11 * w.max_diagonal();
        let pw = |k: i32| (k.abs() as f64).powi(k.abs());
        let mut cs = Vec::new();
        for (n, m) in w.indices() {
            let v = w.get(n, m).norm();
            if n.abs() + m.abs() >= 4 && v > floor {
                cs.push((v * pw(n) * pw(m)).powf(1.0 / (n.abs() + m.abs()) as f64));
            }
        }
        let cmax = cs.iter().cloned().fold(0.0, f64::max);
        assert!(cmax < 2.0, "{cmax}");
    }

    #[test]
    fn rejects_bad_input() {
        let c = make_disk(0.3, 64);
        assert!(matches!(assemble_system(&c, -2.0), Err(LayerError::Contrast(_))));
        assert!(matches!(scattering_matrix(&c, 1.0, 30), Err(LayerError::OrderTooLarge(30))));
        let t = make_triangle_with_nodes(0.5, 64);
        assert!(matches!(assemble_system_with(&t, 1.0, DiagonalRule::Spectral), Err(LayerError::NotPeriodic)));
    }
}
