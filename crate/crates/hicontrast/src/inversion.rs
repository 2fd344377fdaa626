//! Noise model, per-mode linearised inversion and boundary reconstruction.

use crate::layerpot::{ScatteringMatrix, MODE_CAP};
use crate::sensitivity::SensitivityTable;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InversionError {
    #[error("inputs disagree: {0}")]
    Mismatch(String),
    #[error("regularisation parameter must be positive, got {0}")]
    Alpha(f64),
    #[error("noise level must be non-negative, got {0}")]
    Gamma(f64),
}

/// Multiplicative noise `W (1 + γ(η₁ + iη₂))`, `η` uniform on `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub gamma: f64,
    pub seed: u64,
}

/// ChaCha stream index of entry `(n, m)`; independent of the truncation so
/// that the same entry gets the same draw at any `N`.
fn stream(n: i32, m: i32) -> u64 {
    let side = (2 * MODE_CAP + 1) as u64;
    (n + MODE_CAP) as u64 * side + (m + MODE_CAP) as u64
}

/// The pair `(η₁, η₂)` for entry `(n, m)`.
pub fn noise_draw(seed: u64, n: i32, m: i32) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream(n, m));
    (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
}

pub fn add_noise(w: &ScatteringMatrix, spec: NoiseSpec) -> Result<ScatteringMatrix, InversionError> {
    if !(spec.gamma >= 0.0) {
        return Err(InversionError::Gamma(spec.gamma));
    }
    let mut out = w.clone();
    if spec.gamma == 0.0 {
        return Ok(out);
    }
    for (n, m) in w.indices() {
        let (a, b) = noise_draw(spec.seed, n, m);
        out.set(n, m, w.get(n, m) * Complex64::new(1.0 + spec.gamma * a, spec.gamma * b));
    }
    out.solver = format!("{}+noise(gamma={},seed={})", w.solver, spec.gamma, spec.seed);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// `Σ_{n−m=k} ΔW_nm / (C_nm + α)`.
    QuotientSum,
    /// `Σ conj(C) ΔW / (Σ |C|² + α²)` over the same anti-diagonal.
    LeastSquares,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::QuotientSum => "quotient-sum",
            Estimator::LeastSquares => "least-squares",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub k_max: i32,
    /// Recovered `δ𝔉[h](k)` for `|k| <= k_max`.
    pub modes: BTreeMap<i32, Complex64>,
    pub truth: Option<BTreeMap<i32, Complex64>>,
    pub per_mode_error: BTreeMap<i32, f64>,
    pub estimator: Estimator,
}

impl RecoveryResult {
    pub fn magnitude(&self, k: i32) -> f64 {
        self.modes.get(&k).map_or(0.0, |v| v.norm())
    }

    /// Offsets sorted by recovered magnitude, largest first, `k >= 1` only.
    pub fn ranked(&self) -> Vec<(i32, f64)> {
        let mut v: Vec<(i32, f64)> = (1..=self.k_max).map(|k| (k, self.magnitude(k))).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// Recovers `δ𝔉[h](k)` from `ΔW = W_pert − W_base` anti-diagonal by
/// anti-diagonal, then symmetrises so that the boundary is real.
pub fn recover_modes(
    w_pert: &ScatteringMatrix,
    w_base: &ScatteringMatrix,
    c: &SensitivityTable,
    alpha: f64,
    k_max: i32,
    estimator: Estimator,
    truth: Option<&BTreeMap<i32, Complex64>>,
) -> Result<RecoveryResult, InversionError> {
    if !(alpha > 0.0) {
        return Err(InversionError::Alpha(alpha));
    }
    if w_pert.order != w_base.order || w_pert.order != c.order {
        return Err(InversionError::Mismatch(format!("orders {} / {} / {}", w_pert.order, w_base.order, c.order)));
    }
    if w_pert.eps != w_base.eps || w_pert.eps != c.eps {
        return Err(InversionError::Mismatch(format!("contrasts {} / {} / {}", w_pert.eps, w_base.eps, c.eps)));
    }
    let o = w_pert.order;
    let mut raw = BTreeMap::new();
    for k in -k_max..=k_max {
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for n in -o..=o {
            let m = n - k;
            if m.abs() > o {
                continue;
            }
            let dw = w_pert.get(n, m) - w_base.get(n, m);
            let cc = c.get(n, m);
            match estimator {
                Estimator::QuotientSum => num += dw / (cc + alpha),
                Estimator::LeastSquares => {
                    num += cc.conj() * dw;
                    den += cc.norm_sqr();
                }
            }
        }
        let v = match estimator {
            Estimator::QuotientSum => num,
            Estimator::LeastSquares => num / (den + alpha * alpha),
        };
        raw.insert(k, v);
    }
    let modes: BTreeMap<i32, Complex64> = (-k_max..=k_max).map(|k| (k, 0.5 * (raw[&k] + raw[&-k].conj()))).collect();
    let per_mode_error = match truth {
        Some(t) => modes.iter().map(|(k, v)| (*k, (v - t.get(k).copied().unwrap_or_default()).norm())).collect(),
        None => BTreeMap::new(),
    };
    Ok(RecoveryResult { k_max, modes, truth: truth.cloned(), per_mode_error, estimator })
}

#[derive(Debug, Clone)]
pub struct Boundary {
    pub theta: Vec<f64>,
    pub r: Vec<f64>,
    pub r_true: Option<Vec<f64>>,
    /// `(∫ (r − r_true)² dθ)^{1/2}`.
    pub l2_error: Option<f64>,
}

/// `r(θ) = R + Re Σ_k modes(k) e^{ikθ}` on `samples` uniform angles.
pub fn reconstruct_boundary(result: &RecoveryResult, r0: f64, samples: usize, truth: Option<&dyn Fn(f64) -> f64>) -> Boundary {
    let theta: Vec<f64> = (0..samples).map(|j| 2.0 * PI * j as f64 / samples as f64).collect();
    let r: Vec<f64> = theta
        .iter()
        .map(|t| r0 + result.modes.iter().map(|(k, v)| (v * Complex64::from_polar(1.0, *k as f64 * t)).re).sum::<f64>())
        .collect();
    let r_true: Option<Vec<f64>> = truth.map(|f| theta.iter().map(|t| f(*t)).collect());
    let l2_error = r_true.as_ref().map(|rt| {
        let s: f64 = r.iter().zip(rt).map(|(a, b)| (a - b) * (a - b)).sum();
        (s * 2.0 * PI / samples as f64).sqrt()
    });
    Boundary { theta, r, r_true, l2_error }
}

/// Fourier modes `δ𝔉[h](k)` of a radial profile `r(θ) − R`, `|k| <= k_max`.
pub fn profile_modes(r_of_theta: &dyn Fn(f64) -> f64, r0: f64, k_max: i32, samples: usize) -> BTreeMap<i32, Complex64> {
    let vals: Vec<f64> = (0..samples).map(|j| r_of_theta(2.0 * PI * j as f64 / samples as f64) - r0).collect();
    (-k_max..=k_max)
        .map(|k| {
            let s: Complex64 = vals
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k as i64 * j as i64) as f64 / samples as f64))
                .sum();
            (k, s / samples as f64)
        })
        .collect()
}
