//! Versioned JSON experiment configuration.

use std::path::Path;

use hicontrast::geometry::{make_disk, make_fourier_domain, make_triangle_with_nodes, BoundaryCurve, FourierPerturbation};
use hicontrast::layerpot::{DiagonalRule, MODE_CAP};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub shape: ShapeSpec,
    /// Radius of the reference disk. Also the base radius of Fourier shapes.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub contrasts: Contrasts,
    /// Mode truncation `N`.
    #[serde(default = "default_order")]
    pub order: i32,
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_k_max")]
    pub k_max: i32,
    /// Not part of the config hash; `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub eigen: EigenOptions,
    #[serde(default)]
    pub sweep: SweepOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    #[default]
    Disk,
    /// `r(θ) = R(1 + δ Σ amp cos kθ)` given as `[k, amp]` pairs.
    Fourier { modes: Vec<(i32, f64)>, delta: f64 },
    /// Three-petal flower `r = R(1 + δ cos 3θ + 2δ cos 6θ + 4δ cos 9θ)`.
    Flower { delta: f64 },
    /// Right isosceles triangle with legs of the given length.
    Triangle { legs: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Contrasts {
    List(Vec<f64>),
    /// Resonant contrasts of the reference disk with Bessel zeros up to `catalog`.
    /// A non-empty `near` keeps only the entries nearest those values.
    Catalog {
        catalog: f64,
        #[serde(default)]
        near: Vec<f64>,
    },
    Range {
        from: f64,
        to: f64,
        count: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Default for Contrasts {
    fn default() -> Self {
        Contrasts::List(vec![50.0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for Noise {
    fn default() -> Self {
        Noise { gamma: default_gamma(), seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSpec {
    /// Spectral for smooth curves, panel-log for polygons.
    #[default]
    Auto,
    Spectral,
    PanelLog,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivitySpec {
    #[default]
    Analytic,
    Radial,
    Fd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorSpec {
    #[default]
    QuotientSum,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    #[serde(default)]
    pub diagonal_rule: RuleSpec,
    /// Radial grid size for eigenvalues, refinement and radial sensitivities.
    #[serde(default = "default_grid")]
    pub n_grid: usize,
    #[serde(default)]
    pub sensitivity: SensitivitySpec,
    /// First step of the finite-difference sensitivities.
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    /// Samples of the reconstructed boundary.
    #[serde(default = "default_samples")]
    pub boundary_samples: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            diagonal_rule: RuleSpec::Auto,
            n_grid: default_grid(),
            sensitivity: SensitivitySpec::Analytic,
            delta0: default_delta0(),
            estimator: EstimatorSpec::QuotientSum,
            boundary_samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenOptions {
    #[serde(default = "default_m")]
    pub m: Vec<i32>,
    /// Eigenvalues per order written to the table.
    #[serde(default = "default_eigenvalues")]
    pub eigenvalues: usize,
    /// Orders whose leading eigenfunctions are written and plotted.
    #[serde(default = "default_function_m")]
    pub function_m: Vec<i32>,
    #[serde(default = "default_functions")]
    pub functions: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { m: default_m(), eigenvalues: default_eigenvalues(), function_m: default_function_m(), functions: default_functions() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    #[serde(default = "default_ks")]
    pub ks: Vec<i32>,
    /// Also solve halfway between consecutive contrasts.
    #[serde(default)]
    pub midpoints: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { ks: default_ks(), midpoints: false }
    }
}

fn default_radius() -> f64 {
    0.3
}
fn default_order() -> i32 {
    25
}
fn default_nodes() -> usize {
    1024
}
fn default_gamma() -> f64 {
    0.05
}
fn default_alpha() -> f64 {
    1e-8
}
fn default_k_max() -> i32 {
    50
}
fn default_grid() -> usize {
    hicontrast::radialop::DEFAULT_GRID
}
fn default_delta0() -> f64 {
    0.1
}
fn default_samples() -> usize {
    1024
}
fn default_m() -> Vec<i32> {
    (0..=11).collect()
}
fn default_eigenvalues() -> usize {
    20
}
fn default_function_m() -> Vec<i32> {
    vec![1, 2, 3]
}
fn default_functions() -> usize {
    4
}
fn default_ks() -> Vec<i32> {
    vec![3, 6, 9]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: SCHEMA_VERSION,
            shape: ShapeSpec::Disk,
            radius: default_radius(),
            contrasts: Contrasts::default(),
            order: default_order(),
            n_nodes: default_nodes(),
            noise: Noise::default(),
            alpha: default_alpha(),
            k_max: default_k_max(),
            out_dir: None,
            solver: SolverOptions::default(),
            eigen: EigenOptions::default(),
            sweep: SweepOptions::default(),
        }
    }
}

/// A validation failure on one field.
struct Invalid {
    field: &'static str,
    message: String,
}

fn invalid(field: &'static str, message: impl Into<String>) -> Invalid {
    Invalid { field, message: message.into() }
}

fn positive(field: &'static str, v: f64) -> Result<(), Invalid> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parses and validates; errors carry the line of the offending field.
    pub fn from_json(src: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(src).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        cfg.validate().map_err(|bad| {
            let key = bad.field.rsplit('.').next().unwrap_or(bad.field);
            let needle = format!("\"{key}\"");
            let at = src.lines().position(|l| l.contains(&needle)).map(|i| format!(" at line {}", i + 1)).unwrap_or_default();
            CliError::Config(format!("{origin}: field `{}`{at}: {}", bad.field, bad.message))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&src, &path.display().to_string())
    }

    /// Checks a config built in code (no source text to point into).
    pub fn checked(self) -> Result<Self, CliError> {
        self.validate().map_err(|bad| CliError::Config(format!("field `{}`: {}", bad.field, bad.message)))?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), Invalid> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid("version", format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version)));
        }
        positive("radius", self.radius)?;
        match &self.shape {
            ShapeSpec::Disk => {}
            ShapeSpec::Fourier { modes, delta } => {
                if modes.iter().any(|&(k, a)| k < 0 || !a.is_finite()) {
                    return Err(invalid("shape.modes", "need [k, amp] pairs with k >= 0 and finite amp"));
                }
                if !delta.is_finite() {
                    return Err(invalid("shape.delta", "must be finite"));
                }
            }
            ShapeSpec::Flower { delta } => {
                if !delta.is_finite() {
                    return Err(invalid("shape.delta", "must be finite"));
                }
            }
            ShapeSpec::Triangle { legs } => positive("shape.legs", *legs)?,
        }
        if let Some(p) = self.perturbation() {
            p.check().map_err(|e| invalid("shape", e.to_string()))?;
        }
        match &self.contrasts {
            Contrasts::List(v) => {
                if v.is_empty() {
                    return Err(invalid("contrasts", "list is empty"));
                }
                for &e in v {
                    positive("contrasts", e)?;
                }
            }
            Contrasts::Catalog { catalog, near } => {
                positive("catalog", *catalog)?;
                if *catalog > 200.0 {
                    return Err(invalid("catalog", format!("zero cap {catalog} exceeds 200")));
                }
                for &e in near {
                    positive("near", e)?;
                }
            }
            Contrasts::Range { from, to, count, .. } => {
                positive("from", *from)?;
                positive("to", *to)?;
                if to < from {
                    return Err(invalid("to", format!("range end {to} is below its start {from}")));
                }
                if *count == 0 || *count > 100_000 {
                    return Err(invalid("count", format!("must be in 1..=100000, got {count}")));
                }
            }
        }
        if !(1..=MODE_CAP).contains(&self.order) {
            return Err(invalid("order", format!("must be in 1..={MODE_CAP}, got {}", self.order)));
        }
        if !(16..=65_536).contains(&self.n_nodes) {
            return Err(invalid("n_nodes", format!("must be in 16..=65536, got {}", self.n_nodes)));
        }
        if !(self.noise.gamma >= 0.0 && self.noise.gamma.is_finite()) {
            return Err(invalid("noise.gamma", format!("must be non-negative, got {}", self.noise.gamma)));
        }
        positive("alpha", self.alpha)?;
        if !(0..=2 * self.order).contains(&self.k_max) {
            return Err(invalid("k_max", format!("must be in 0..=2*order = {}, got {}", 2 * self.order, self.k_max)));
        }
        if self.solver.n_grid == 0 || self.solver.n_grid > 20_000 {
            return Err(invalid("solver.n_grid", format!("must be in 1..=20000, got {}", self.solver.n_grid)));
        }
        positive("solver.delta0", self.solver.delta0)?;
        if self.solver.boundary_samples < 8 {
            return Err(invalid("solver.boundary_samples", "need at least 8 samples"));
        }
        if self.eigen.m.is_empty() {
            return Err(invalid("eigen.m", "list of angular orders is empty"));
        }
        if self.eigen.m.iter().chain(&self.eigen.function_m).any(|m| !(0..=200).contains(m)) {
            return Err(invalid("eigen.m", "orders must lie in 0..=200"));
        }
        if self.eigen.eigenvalues == 0 {
            return Err(invalid("eigen.eigenvalues", "must be at least 1"));
        }
        if self.sweep.ks.is_empty() || self.sweep.ks.iter().any(|&k| k < 1 || k > 2 * self.order) {
            return Err(invalid("sweep.ks", format!("need offsets in 1..=2*order = {}", 2 * self.order)));
        }
        Ok(())
    }

    /// Canonical serialisation used for hashing and `run.json`.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        serde_json::to_string(&c).expect("config serialises")
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Smaller discretisation for quick runs.
    pub fn make_fast(&mut self) {
        self.n_nodes = self.n_nodes.min(256);
        self.order = self.order.min(12);
        self.k_max = self.k_max.min(2 * self.order);
        self.solver.n_grid = self.solver.n_grid.min(400);
        self.solver.boundary_samples = self.solver.boundary_samples.min(256);
        self.sweep.ks.retain(|&k| k <= 2 * self.order);
        if let Contrasts::Range { count, .. } = &mut self.contrasts {
            *count = (*count).div_ceil(4);
        }
    }

    pub fn perturbation(&self) -> Option<FourierPerturbation> {
        match &self.shape {
            ShapeSpec::Fourier { modes, delta } => Some(FourierPerturbation::from_cosines(self.radius, modes, *delta * self.radius)),
            ShapeSpec::Flower { delta } => Some(FourierPerturbation::from_cosines(self.radius, &[(3, 1.0), (6, 2.0), (9, 4.0)], *delta * self.radius)),
            _ => None,
        }
    }

    pub fn curve(&self, n_nodes: usize) -> Result<BoundaryCurve, String> {
        match &self.shape {
            ShapeSpec::Disk => Ok(make_disk(self.radius, n_nodes)),
            ShapeSpec::Triangle { legs } => Ok(make_triangle_with_nodes(*legs, n_nodes)),
            _ => make_fourier_domain(&self.perturbation().expect("fourier shape"), n_nodes).map_err(|e| e.to_string()),
        }
    }

    pub fn rule(&self, curve: &BoundaryCurve) -> DiagonalRule {
        match self.solver.diagonal_rule {
            RuleSpec::Auto => DiagonalRule::default_for(curve),
            RuleSpec::Spectral => DiagonalRule::Spectral,
            RuleSpec::PanelLog => DiagonalRule::PanelLog,
            RuleSpec::Naive => DiagonalRule::Naive,
        }
    }
}
