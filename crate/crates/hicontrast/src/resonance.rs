//! Resonant contrasts, contrast sweeps and the spectral series of `W_mm`.
//!
//! The catalog estimate `a_{m,l}²/R² − 1` uses zeros of `J_m`. Near such a
//! contrast the transmission determinant of order `m + 1` nearly vanishes
//! (its small-`R` limit is `k₁ J_m(k₁R)`), and the matching eigenvalue of the
//! radial operator of order `m + 1` satisfies `−Re(1/λ) ≈ a_{m,l}²/R² − 1`.

use crate::geometry::BoundaryCurve;
use crate::layerpot::{self, LayerError, ScatteringMatrix};
use crate::linalg::CMat;
use crate::radialop::{self, EigenSystem, RadialError};
use crate::sensitivity::SensitivityTable;
use crate::specfun::{self, SpecfunError};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Largest zero used in the worked examples.
pub const DEFAULT_ZERO_CAP: f64 = 18.901;
/// Relative window for attaching an eigenvalue to a catalog entry.
pub const REFINE_WINDOW: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResonanceError {
    #[error(transparent)]
    Special(#[from] SpecfunError),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error("need at least {need} eigenpairs, have {have}")]
    TooFewPairs { need: usize, have: usize },
    #[error("zero cap {0} is below the first zero of J_0")]
    Cap(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined {
    pub eps: f64,
    /// Order of the radial operator carrying the eigenvalue.
    pub mode: i32,
    pub lambda: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub m: u32,
    pub l: u32,
    pub a: f64,
    pub eps_star: f64,
    pub refined: Option<Refined>,
}

impl CatalogEntry {
    /// Refined contrast when available, else the zero-based estimate.
    pub fn best(&self) -> f64 {
        self.refined.map_or(self.eps_star, |r| r.eps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceCatalog {
    pub radius: f64,
    /// Sorted by `eps_star`.
    pub entries: Vec<CatalogEntry>,
}

/// All `(m, l)` with `R < a_{m,l} <= zero_cap`.
pub fn resonant_contrasts(r: f64, zero_cap: f64) -> Result<ResonanceCatalog, ResonanceError> {
    if zero_cap <= specfun::bessel_zero(0, 1)?.value {
        return Err(ResonanceError::Cap(zero_cap));
    }
    let mut entries: Vec<CatalogEntry> = specfun::zeros_below(zero_cap)?
        .into_iter()
        .filter(|z| z.value > r)
        .map(|z| CatalogEntry { m: z.m, l: z.l, a: z.value, eps_star: z.value * z.value / (r * r) - 1.0, refined: None })
        .collect();
    entries.sort_by(|a, b| a.eps_star.total_cmp(&b.eps_star));
    Ok(ResonanceCatalog { radius: r, entries })
}

impl ResonanceCatalog {
    /// Attaches `−Re(1/λ)` of the radial operator of order `m + 1` when it lies
    /// within [`REFINE_WINDOW`] of the estimate.
    pub fn refine(&mut self, n_grid: usize) -> Result<(), ResonanceError> {
        let orders: Vec<i32> = {
            let mut v: Vec<i32> = self.entries.iter().map(|e| e.m as i32 + 1).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let r = self.radius;
        let spectra: Vec<(i32, Vec<Complex64>)> = orders
            .par_iter()
            .map(|&p| -> Result<_, ResonanceError> { Ok((p, radialop::eigenvalues(&radialop::assemble_radial(p, r, n_grid)?)?)) })
            .collect::<Result<_, _>>()?;
        let spectra: BTreeMap<i32, Vec<Complex64>> = spectra.into_iter().collect();
        for e in &mut self.entries {
            let p = e.m as i32 + 1;
            e.refined = spectra[&p]
                .iter()
                .map(|l| (-(1.0 / l).re, *l))
                .filter(|(x, _)| ((x - e.eps_star) / e.eps_star).abs() < REFINE_WINDOW)
                .min_by(|a, b| (a.0 - e.eps_star).abs().total_cmp(&(b.0 - e.eps_star).abs()))
                .map(|(x, l)| Refined { eps: x, mode: p, lambda: l });
        }
        Ok(())
    }

    /// Entry whose estimate is nearest to `eps`.
    pub fn nearest(&self, eps: f64) -> Option<&CatalogEntry> {
        self.entries.iter().min_by(|a, b| (a.eps_star - eps).abs().total_cmp(&(b.eps_star - eps).abs()))
    }

    pub fn contrasts(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.best()).collect()
    }

    /// Midpoints between consecutive (refined) contrasts.
    pub fn midpoints(&self) -> Vec<f64> {
        let c = self.contrasts();
        c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioKind {
    /// `max_{|n−m|=k} |W| / max_{n≠m} |W|`.
    Max,
    /// Same with Frobenius norms over the anti-diagonals.
    Frobenius,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub contrasts: Vec<f64>,
    pub ks: Vec<i32>,
    /// `ratios[i][j]` for contrast `i` and offset `ks[j]`; `None` when the
    /// off-diagonal part vanishes (disk) or the solve failed.
    pub ratios: Vec<Vec<Option<f64>>>,
    pub failures: Vec<(f64, String)>,
    pub matrices: Vec<Option<ScatteringMatrix>>,
}

/// Relative magnitude of the offsets `ks` in one scattering matrix.
pub fn offset_ratios(w: &ScatteringMatrix, ks: &[i32], kind: RatioKind) -> Vec<Option<f64>> {
    let mut per_k: BTreeMap<i32, (f64, f64)> = BTreeMap::new();
    let (mut all_max, mut all_sq) = (0.0f64, 0.0f64);
    for (n, m) in w.indices() {
        if n == m {
            continue;
        }
        let v = w.get(n, m).norm();
        let e = per_k.entry((n - m).abs()).or_default();
        e.0 = e.0.max(v);
        e.1 += v * v;
        all_max = all_max.max(v);
        all_sq += v * v;
    }
    if all_max <= 1e-10 * w.max_diagonal() || all_max == 0.0 {
        return vec![None; ks.len()];
    }
    ks.iter()
        .map(|k| {
            let (mx, sq) = per_k.get(&k.abs()).copied().unwrap_or_default();
            Some(match kind {
                RatioKind::Max => mx / all_max,
                RatioKind::Frobenius => (sq / all_sq).sqrt(),
            })
        })
        .collect()
}

/// One forward solve per contrast; failures are recorded and skipped.
pub fn sweep(curve: &BoundaryCurve, contrasts: &[f64], order: i32, ks: &[i32], keep: bool) -> SweepResult {
    let solved: Vec<Result<ScatteringMatrix, LayerError>> =
        contrasts.par_iter().map(|&e| layerpot::scattering_matrix(curve, e, order)).collect();
    let mut out = SweepResult { contrasts: contrasts.to_vec(), ks: ks.to_vec(), ratios: Vec::new(), failures: Vec::new(), matrices: Vec::new() };
    for (eps, res) in contrasts.iter().zip(solved) {
        match res {
            Ok(w) => {
                out.ratios.push(offset_ratios(&w, ks, RatioKind::Max));
                out.matrices.push(keep.then_some(w));
            }
            Err(e) => {
                out.ratios.push(vec![None; ks.len()]);
                out.failures.push((*eps, e.to_string()));
                out.matrices.push(None);
            }
        }
    }
    out
}

/// `W_mm = S₁ + S₂` split at `head_count` eigenpairs.
#[derive(Debug, Clone)]
pub struct SeriesDecomposition {
    pub m: i32,
    pub eps: f64,
    pub s1: Complex64,
    pub s2: Complex64,
    /// `2π α_l / (1/ε + λ_l)` for every eigenpair, in eigenvalue order.
    pub terms: Vec<Complex64>,
    /// `W_mm` from the radial resolvent.
    pub total: Complex64,
}

pub fn series_decomposition(es: &EigenSystem, eps: f64, head_count: usize) -> Result<SeriesDecomposition, ResonanceError> {
    let need = head_count + 10;
    if es.eigenvalues.len() < need {
        return Err(ResonanceError::TooFewPairs { need, have: es.eigenvalues.len() });
    }
    let table = radialop::tail_coeffs(es);
    let terms: Vec<Complex64> = table.coeffs.iter().map(|c| 2.0 * PI * c.alpha / (1.0 / eps + c.lambda)).collect();
    let s2: Complex64 = terms[head_count..].iter().sum();
    let op = radialop::assemble_radial(es.m, es.radius, es.grid.len())?;
    let total = radialop::w_mm_from(&op, eps);
    Ok(SeriesDecomposition { m: es.m, eps, s1: total - s2, s2, terms, total })
}

/// Banded linear map `x_k ↦ ΔW_nm = C(n, m) x_{n−m}` for `|k| <= 2N`; rows
/// are `(n, m)` in row-major order, column `k + 2N`.
pub fn linearized_map(table: &SensitivityTable) -> CMat {
    let o = table.order;
    let s = (2 * o + 1) as usize;
    let mut a = CMat::zeros(s * s, (4 * o + 1) as usize);
    for n in -o..=o {
        for m in -o..=o {
            let row = (n + o) as usize * s + (m + o) as usize;
            a[(row, (n - m + 2 * o) as usize)] = table.get(n, m);
        }
    }
    a
}

/// Singular values of [`linearized_map`] by offset: the columns have disjoint
/// supports, so `s_k = (Σ_{n−m=k} |C|²)^{1/2}`.
pub fn offset_singular_values(table: &SensitivityTable) -> Vec<(i32, f64)> {
    let o = table.order;
    (-2 * o..=2 * o)
        .map(|k| {
            let s: f64 = (-o..=o).filter(|n| (n - k).abs() <= o).map(|n| table.get(n, n - k).norm_sqr()).sum();
            (k, s.sqrt())
        })
        .collect()
}
