//! Separation-of-variables solution for a homogeneous disk.

use crate::quad::gauss_legendre_on;
use crate::specfun::{self, h1n, h1np, jn, jnp, lommel_cross};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MieError {
    #[error("contrast must exceed -1, got {0}")]
    Contrast(f64),
    #[error("transmission determinant vanishes at eps = {0}")]
    Resonance(f64),
    #[error(transparent)]
    Special(#[from] specfun::SpecfunError),
}

/// Interior field `t J_m(k₁ r)` and exterior field `J_m(r) + b H_m(r)` for
/// the incident harmonic `J_m(r) e^{imθ}`, `k₁ = √(1+ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskTransmission {
    pub m: i32,
    pub radius: f64,
    pub eps: f64,
    pub t: Complex64,
    pub b: Complex64,
}

impl DiskTransmission {
    pub fn k1(&self) -> f64 {
        (1.0 + self.eps).sqrt()
    }

    /// Value and radial derivative jumps at `r = R`, relative to the incident
    /// field scale.
    pub fn continuity_residuals(&self) -> (f64, f64) {
        let (m, r, k1) = (self.m, self.radius, self.k1());
        let inside = self.t * jn(m, k1 * r);
        let outside = jn(m, r) + self.b * h1n(m, r);
        let dinside = self.t * k1 * jnp(m, k1 * r);
        let doutside = jnp(m, r) + self.b * h1np(m, r);
        let s0 = inside.norm().max(jn(m, r).abs()).max(f64::MIN_POSITIVE);
        let s1 = dinside.norm().max(jnp(m, r).abs()).max(f64::MIN_POSITIVE);
        ((inside - outside).norm() / s0, (dinside - doutside).norm() / s1)
    }

    /// Interior total field at radius `r <= R` (radial factor only).
    pub fn interior(&self, r: f64) -> Complex64 {
        self.t * jn(self.m, self.k1() * r)
    }
}

/// `k₁ J_m'(k₁R) H_m(R) - J_m(k₁R) H_m'(R)`; its zeros are the resonances.
pub fn determinant(m: i32, r: f64, eps: f64) -> Complex64 {
    let k1 = (1.0 + eps).sqrt();
    k1 * jnp(m, k1 * r) * h1n(m, r) - jn(m, k1 * r) * h1np(m, r)
}

pub fn disk_transmission(m: i32, r: f64, eps: f64) -> Result<DiskTransmission, MieError> {
    if !(eps > -1.0) || !eps.is_finite() {
        return Err(MieError::Contrast(eps));
    }
    specfun::bessel_j(m, r)?;
    let k1 = (1.0 + eps).sqrt();
    let (ja, jpa) = (jn(m, k1 * r), k1 * jnp(m, k1 * r));
    let (j, jp) = (jn(m, r), jnp(m, r));
    let (h, hp) = (h1n(m, r), h1np(m, r));
    // t ja - b h = j ; t jpa - b hp = jp
    let det = -ja * hp + jpa * h;
    // High orders have quasi-resonances far narrower than one ulp of ε, where
    // the two terms cancel to a few digits; only a cancellation down to the
    // rounding level is treated as singular.
    let scale = (ja * hp).norm() + (jpa * h).norm();
    if det.norm() <= 4.0 * f64::EPSILON * scale {
        return Err(MieError::Resonance(eps));
    }
    let t = (-j * hp + jp * h) / det;
    let b = (ja * jp - jpa * j) / det;
    Ok(DiskTransmission { m, radius: r, eps, t, b })
}

/// `∫_0^R J_m(r) J_m(k r) r dr`, by quadrature when `k` is too close to 1 for
/// the closed form to keep its digits.
fn bessel_overlap(m: i32, k: f64, r: f64) -> Result<f64, MieError> {
    if (k - 1.0).abs() > 1e-3 {
        return Ok(lommel_cross(m, 1.0, k, r)?);
    }
    let panels = (4.0 * r.max(0.25)).ceil() as usize;
    let w = r / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let (x, wt) = gauss_legendre_on(24, p as f64 * w, (p + 1) as f64 * w);
        s += x.iter().zip(&wt).map(|(t, v)| v * t * jn(m, *t) * jn(m, k * t)).sum::<f64>();
    }
    Ok(s)
}

/// Diagonal scattering coefficient `W_mm = 2π ε t ∫_0^R J_m(r) J_m(k₁r) r dr`.
pub fn w_mm_analytic(m: i32, r: f64, eps: f64) -> Result<Complex64, MieError> {
    if eps == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let d = disk_transmission(m, r, eps)?;
    Ok(2.0 * PI * eps * d.t * bessel_overlap(m, d.k1(), r)?)
}

/// Diagonal of the disk scattering matrix for `|m| <= n`, ordered `-n..=n`.
pub fn w_diagonal(n: i32, r: f64, eps: f64) -> Result<Vec<Complex64>, MieError> {
    (-n..=n).map(|m| w_mm_analytic(m, r, eps)).collect()
}

/// `f_m(R)`, the boundary value of `(1/ε + K_m)^{-1} J_m`, equal to `ε` times
/// the interior field at the rim.
pub fn boundary_resolvent(m: i32, r: f64, eps: f64) -> Result<Complex64, MieError> {
    let d = disk_transmission(m, r, eps)?;
    Ok(eps * d.interior(r))
}
