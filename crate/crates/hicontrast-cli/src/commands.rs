//! The subcommands. Each writes its artifacts and returns notes for `run.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt::Display;

use hicontrast::geometry::{make_disk, radial_profile, BoundaryCurve, FourierPerturbation};
use hicontrast::inversion::{add_noise, profile_modes, reconstruct_boundary, recover_modes, Estimator, NoiseSpec};
use hicontrast::mie::w_diagonal;
use hicontrast::layerpot::{scattering_matrix_with, DiagonalRule, ScatteringMatrix};
use hicontrast::radialop::{assemble_radial, asymptotic_eigenvalue, eig, schatten2_norm};
use hicontrast::resonance::{offset_ratios, resonant_contrasts, sweep as sweep_contrasts, RatioKind, ResonanceCatalog};
use hicontrast::sensitivity::{table_analytic, table_fd, table_radial, FdConfig, SensitivityTable};
use hicontrast::Complex64;

use crate::config::{Contrasts, EstimatorSpec, ExperimentConfig, RuleSpec, SensitivitySpec, ShapeSpec, SweepOptions};
use crate::output::{num, Artifacts};
use crate::svg::{Plot, Series};
use crate::CliError;

fn stage<E: Display>(what: impl Into<String>) -> impl FnOnce(E) -> CliError {
    let stage = what.into();
    move |e| CliError::Numerical { stage, message: e.to_string() }
}

fn row<const N: usize>(vals: [f64; N]) -> Vec<String> {
    vals.iter().map(|&v| num(v)).collect()
}

struct Resolved {
    values: Vec<f64>,
    catalog: Option<ResonanceCatalog>,
}

fn resolve_contrasts(cfg: &ExperimentConfig) -> Result<Resolved, CliError> {
    match &cfg.contrasts {
        Contrasts::List(v) => Ok(Resolved { values: v.clone(), catalog: None }),
        Contrasts::Range { from, to, count, log } => {
            let n = *count;
            let values = (0..n)
                .map(|i| {
                    let t = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                    if *log {
                        (from.ln() + t * (to.ln() - from.ln())).exp()
                    } else {
                        from + t * (to - from)
                    }
                })
                .collect();
            Ok(Resolved { values, catalog: None })
        }
        Contrasts::Catalog { catalog, near } => {
            let mut cat = resonant_contrasts(cfg.radius, *catalog).map_err(stage("resonance catalog"))?;
            cat.refine(cfg.solver.n_grid).map_err(stage("catalog refinement"))?;
            let values = if near.is_empty() {
                cat.contrasts()
            } else {
                let mut v: Vec<f64> = Vec::new();
                for &target in near {
                    let e = cat.nearest(target).ok_or_else(|| stage("resonance catalog")("catalog is empty"))?.best();
                    if !v.contains(&e) {
                        v.push(e);
                    }
                }
                v
            };
            Ok(Resolved { values, catalog: Some(cat) })
        }
    }
}

fn write_catalog(out: &mut Artifacts, cat: &ResonanceCatalog) -> Result<(), CliError> {
    let rows = cat.entries.iter().map(|e| {
        let (re, mode) = e.refined.as_ref().map_or((String::new(), String::new()), |r| (num(r.eps), r.mode.to_string()));
        vec![e.m.to_string(), e.l.to_string(), num(e.a), num(e.eps_star), re, mode]
    });
    out.csv("catalog.csv", &["m", "l", "zero", "eps_estimate", "eps_refined", "refined_mode"], rows)
}

fn build_curve(cfg: &ExperimentConfig) -> Result<BoundaryCurve, CliError> {
    cfg.curve(cfg.n_nodes).map_err(stage("geometry"))
}

fn forward_solve(curve: &BoundaryCurve, eps: f64, order: i32, rule: DiagonalRule) -> Result<ScatteringMatrix, CliError> {
    scattering_matrix_with(curve, eps, order, rule).map_err(stage(format!("forward solve at eps={eps}")))
}

fn log_spread(v: &[f64]) -> bool {
    let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    lo > 0.0 && hi / lo > 20.0
}

fn shape_plot(curve: &BoundaryCurve, r0: f64) -> Plot {
    let mut p = Plot::new("inclusion boundary", "x", "y");
    p.equal = true;
    let mut pts: Vec<(f64, f64)> = curve.nodes.iter().map(|n| (n[0], n[1])).collect();
    pts.push(pts[0]);
    p.series.push(Series::line("boundary", pts));
    p.series.push(Series::line("reference disk", (0..=256).map(|j| 2.0 * PI * j as f64 / 256.0).map(|t| (r0 * t.cos(), r0 * t.sin())).collect()));
    p
}

pub fn eigen(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let r = cfg.radius;
    let opts = &cfg.eigen;
    let orders: BTreeSet<i32> = opts.m.iter().chain(&opts.function_m).copied().collect();
    let (mut radius_rows, mut value_rows, mut function_rows) = (Vec::new(), Vec::new(), Vec::new());
    let mut radii: Vec<(f64, f64)> = Vec::new();
    let mut spectra: Vec<Series> = Vec::new();
    let mut notes = Vec::new();
    for &m in &orders {
        eprintln!("eigen: m = {m}");
        let op = assemble_radial(m, r, cfg.solver.n_grid).map_err(stage(format!("radial operator m={m}")))?;
        let es = eig(&op).map_err(stage(format!("eigendecomposition m={m}")))?;
        if opts.m.contains(&m) {
            let rho = es.eigenvalues.first().map_or(0.0, |v| v.norm());
            radius_rows.push(row([m as f64, rho, schatten2_norm(&op), es.max_residual]));
            radii.push((m as f64, rho));
            let mut pts = Vec::new();
            for (l, lam) in es.eigenvalues.iter().take(opts.eigenvalues).enumerate() {
                let asym = asymptotic_eigenvalue(m, l, r);
                let mut r = row([m as f64, l as f64, lam.re, lam.im, lam.norm()]);
                // The form is singular for m = l = 0.
                if asym.is_finite() {
                    r.extend([num(asym), num(lam.re / asym)]);
                } else {
                    r.extend([String::new(), String::new()]);
                }
                value_rows.push(r);
                pts.push((l as f64, lam.norm()));
            }
            spectra.push(Series::line(format!("m = {m}"), pts));
        }
        if opts.function_m.contains(&m) {
            let mut plot = Plot::new(format!("leading eigenfunctions, m = {m}"), "r", "Re v(r)");
            for (l, v) in es.eigenvectors.iter().take(opts.functions).enumerate() {
                let mut pts = Vec::with_capacity(v.len());
                for (&x, f) in es.grid.points.iter().zip(v) {
                    function_rows.push(row([m as f64, l as f64, x, f.re, f.im]));
                    pts.push((x, f.re));
                }
                plot.series.push(Series::line(format!("l = {l}"), pts));
            }
            out.svg(&format!("eigenfunctions_m{m}.svg"), &plot)?;
        }
    }
    let rising: Vec<String> = radii.windows(2).filter(|w| w[1].1 >= w[0].1).map(|w| (w[1].0 as i32).to_string()).collect();
    if !rising.is_empty() {
        notes.push(format!("spectral radius does not decrease at m = {}", rising.join(", ")));
    }
    out.csv("spectral_radius.csv", &["m", "spectral_radius", "schatten2", "max_residual"], radius_rows)?;
    out.csv("eigenvalues.csv", &["m", "l", "re", "im", "abs", "asymptote", "ratio"], value_rows)?;
    out.csv("eigenfunctions.csv", &["m", "l", "r", "re", "im"], function_rows)?;
    let mut p = Plot::new(format!("spectral radius, R = {r}"), "m", "max |lambda|");
    p.series.push(Series::line("spectral radius", radii.clone()));
    p.series.push(Series::markers("", radii));
    out.svg("spectral_radius.svg", &p)?;
    let mut p = Plot::new("eigenvalue moduli", "l", "|lambda|");
    p.log_y = true;
    p.series = spectra;
    out.svg("eigenvalues.svg", &p)?;
    Ok(notes)
}

/// Largest `|W_nm|` on each anti-diagonal `|n - m| = k`.
fn offset_maxima(w: &ScatteringMatrix) -> BTreeMap<i32, f64> {
    let mut best = BTreeMap::new();
    for (n, m) in w.indices() {
        let e = best.entry((n - m).abs()).or_insert(0.0f64);
        *e = e.max(w.get(n, m).norm());
    }
    best
}

pub fn forward(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let resolved = resolve_contrasts(cfg)?;
    if let Some(cat) = &resolved.catalog {
        write_catalog(out, cat)?;
    }
    let curve = build_curve(cfg)?;
    let rule = cfg.rule(&curve);
    out.csv("shape.csv", &["x", "y", "nx", "ny", "weight"], curve.rows().into_iter().map(row))?;
    out.svg("shape.svg", &shape_plot(&curve, cfg.radius))?;
    let ks: Vec<i32> = (1..=2 * cfg.order).collect();
    let (mut w_rows, mut k_rows) = (Vec::new(), Vec::new());
    let mut plot = Plot::new("off-diagonal decay", "|n - m|", "max |W_nm|");
    plot.log_y = true;
    for &eps in &resolved.values {
        eprintln!("forward: eps = {eps}");
        let w = forward_solve(&curve, eps, cfg.order, rule)?;
        for (n, m) in w.indices() {
            let v = w.get(n, m);
            w_rows.push(row([eps, n as f64, m as f64, v.re, v.im, v.norm()]));
        }
        let maxima = offset_maxima(&w);
        let ratios = offset_ratios(&w, &ks, RatioKind::Max);
        for (k, ratio) in ks.iter().zip(&ratios) {
            let mut r = row([eps, *k as f64, maxima[k]]);
            r.push(ratio.map(num).unwrap_or_default());
            k_rows.push(r);
        }
        plot.series.push(Series::line(format!("eps = {eps:.4}"), maxima.iter().map(|(&k, &v)| (k as f64, v)).collect()));
    }
    out.csv("scattering.csv", &["eps", "n", "m", "re", "im", "abs"], w_rows)?;
    out.csv("offsets.csv", &["eps", "k", "max_abs", "ratio"], k_rows)?;
    out.svg("offsets.svg", &plot)?;
    Ok(Vec::new())
}

fn with_midpoints(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mids: Vec<f64> = v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    v.extend(mids);
    v.sort_by(f64::total_cmp);
    v
}

pub fn sweep(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let resolved = resolve_contrasts(cfg)?;
    if let Some(cat) = &resolved.catalog {
        write_catalog(out, cat)?;
    }
    let SweepOptions { ks, midpoints } = &cfg.sweep;
    let contrasts = if *midpoints { with_midpoints(&resolved.values) } else { resolved.values.clone() };
    let curve = build_curve(cfg)?;
    out.csv("shape.csv", &["x", "y", "nx", "ny", "weight"], curve.rows().into_iter().map(row))?;
    out.svg("shape.svg", &shape_plot(&curve, cfg.radius))?;
    eprintln!("sweep: {} contrasts", contrasts.len());
    // The library sweep runs the contrasts in parallel with the automatic rule.
    let (ratios, failures): (Vec<Vec<Option<f64>>>, Vec<(f64, String)>) = if cfg.solver.diagonal_rule == RuleSpec::Auto {
        let res = sweep_contrasts(&curve, &contrasts, cfg.order, ks, false);
        (res.ratios, res.failures)
    } else {
        let rule = cfg.rule(&curve);
        let mut ratios = Vec::new();
        let mut failures = Vec::new();
        for &eps in &contrasts {
            match scattering_matrix_with(&curve, eps, cfg.order, rule) {
                Ok(w) => ratios.push(offset_ratios(&w, ks, RatioKind::Max)),
                Err(e) => {
                    ratios.push(vec![None; ks.len()]);
                    failures.push((eps, e.to_string()));
                }
            }
        }
        (ratios, failures)
    };
    if failures.len() == contrasts.len() {
        let (eps, msg) = &failures[0];
        return Err(stage(format!("sweep (all {} solves failed, first at eps={eps})", contrasts.len()))(msg));
    }
    let mut header = vec!["eps".to_string()];
    header.extend(ks.iter().map(|k| format!("ratio_k{k}")));
    header.push("status".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = contrasts.iter().zip(&ratios).map(|(&eps, rs)| {
        let mut r = vec![num(eps)];
        r.extend(rs.iter().map(|v| v.map(num).unwrap_or_default()));
        r.push(failures.iter().find(|f| f.0 == eps).map_or("ok".to_string(), |f| f.1.clone()));
        r
    });
    out.csv("sweep.csv", &header, rows)?;
    let mut plot = Plot::new("relative size of the offsets", "eps", "max |W_nm| on |n-m| = k / max off-diagonal");
    plot.log_x = log_spread(&contrasts);
    plot.log_y = true;
    for (j, k) in ks.iter().enumerate() {
        let pts = contrasts.iter().zip(&ratios).filter_map(|(&e, rs)| rs[j].map(|v| (e, v))).collect();
        plot.series.push(Series::line(format!("k = {k}"), pts));
    }
    out.svg("sweep.svg", &plot)?;
    Ok(failures.iter().map(|(e, m)| format!("solve failed at eps={e}: {m}")).collect())
}

/// Diagonal disk matrix from the series solution. Used when the reference
/// disk sits so close to a resonance that its discrete system is singular.
fn mie_disk(r0: f64, eps: f64, order: i32) -> Result<ScatteringMatrix, CliError> {
    let diag = w_diagonal(order, r0, eps).map_err(stage(format!("closed-form disk coefficients at eps={eps}")))?;
    let mut w = ScatteringMatrix::zeros(order, eps, "disk", "mie");
    for (m, v) in (-order..=order).zip(diag) {
        w.set(m, m, v);
    }
    Ok(w)
}

fn sensitivity(cfg: &ExperimentConfig, eps: f64) -> Result<SensitivityTable, CliError> {
    let (r, order) = (cfg.radius, cfg.order);
    let what = format!("sensitivity table at eps={eps}");
    match cfg.solver.sensitivity {
        SensitivitySpec::Analytic => table_analytic(eps, r, order).map_err(stage(what)),
        SensitivitySpec::Radial => table_radial(eps, r, order, cfg.solver.n_grid).map_err(stage(what)),
        SensitivitySpec::Fd => {
            let fd = FdConfig { delta0: cfg.solver.delta0, n_nodes: cfg.n_nodes, richardson: true };
            table_fd(eps, r, order, fd).map_err(stage(what))
        }
    }
}

pub fn invert(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<String>, CliError> {
    let resolved = resolve_contrasts(cfg)?;
    if let Some(cat) = &resolved.catalog {
        write_catalog(out, cat)?;
    }
    let r0 = cfg.radius;
    let curve = build_curve(cfg)?;
    let base_curve = make_disk(r0, cfg.n_nodes);
    let rule = cfg.rule(&curve);
    let base_rule = cfg.rule(&base_curve);
    out.csv("shape.csv", &["x", "y", "nx", "ny", "weight"], curve.rows().into_iter().map(row))?;
    out.svg("shape.svg", &shape_plot(&curve, r0))?;

    let pert: Option<FourierPerturbation> = cfg.perturbation();
    let truth: BTreeMap<i32, Complex64> = match (&cfg.shape, &pert) {
        (ShapeSpec::Disk, _) => (-cfg.k_max..=cfg.k_max).map(|k| (k, Complex64::new(0.0, 0.0))).collect(),
        (ShapeSpec::Triangle { .. }, _) => radial_profile(&curve, r0, cfg.k_max as usize).map_err(stage("radial profile of the target"))?.coeffs,
        (_, Some(p)) => profile_modes(&|t| p.r(t), r0, cfg.k_max, 4096),
        (_, None) => unreachable!("fourier shapes carry a perturbation"),
    };
    let r_true = |t: f64| match (&cfg.shape, &pert) {
        (_, Some(p)) => p.r(t),
        (ShapeSpec::Triangle { .. }, _) => curve.radius_at(t).unwrap_or(f64::NAN),
        _ => r0,
    };
    let estimator = match cfg.solver.estimator {
        EstimatorSpec::QuotientSum => Estimator::QuotientSum,
        EstimatorSpec::LeastSquares => Estimator::LeastSquares,
    };
    let noise = NoiseSpec { gamma: cfg.noise.gamma, seed: cfg.noise.seed };

    let mut notes = vec![format!("estimator {}, sensitivity {:?}", estimator.name(), cfg.solver.sensitivity)];
    let (mut mode_rows, mut boundary_rows, mut coeff_rows, mut summary_rows) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut mode_plot = Plot::new("recovered Fourier modes of r - R", "k", "|mode|");
    mode_plot.log_y = true;
    mode_plot.series.push(Series::line("true", (0..=cfg.k_max).map(|k| (k as f64, truth.get(&k).map_or(0.0, |v| v.norm()))).collect()));
    for (i, &eps) in resolved.values.iter().enumerate() {
        eprintln!("invert: eps = {eps}");
        let w = forward_solve(&curve, eps, cfg.order, rule)?;
        let w0 = match scattering_matrix_with(&base_curve, eps, cfg.order, base_rule) {
            Ok(w0) => w0,
            Err(e) => {
                notes.push(format!("reference disk solve failed at eps={eps} ({e}); used the closed-form disk coefficients"));
                mie_disk(r0, eps, cfg.order)?
            }
        };
        let c = sensitivity(cfg, eps)?;
        let noisy = add_noise(&w, noise).map_err(stage("noise"))?;
        let rec = recover_modes(&noisy, &w0, &c, cfg.alpha, cfg.k_max, estimator, Some(&truth)).map_err(stage(format!("mode recovery at eps={eps}")))?;
        let boundary = reconstruct_boundary(&rec, r0, cfg.solver.boundary_samples, Some(&r_true));

        for (&k, v) in &rec.modes {
            let t = truth.get(&k).copied().unwrap_or_default();
            mode_rows.push(row([eps, k as f64, v.re, v.im, v.norm(), t.norm(), (v - t).norm()]));
        }
        let r_true_samples = boundary.r_true.clone().unwrap_or_default();
        for (j, (&t, &rv)) in boundary.theta.iter().zip(&boundary.r).enumerate() {
            boundary_rows.push(row([eps, t, rv, r_true_samples.get(j).copied().unwrap_or(f64::NAN)]));
        }
        for n in -cfg.order..=cfg.order {
            for m in -cfg.order..=cfg.order {
                let v = c.get(n, m);
                coeff_rows.push(row([eps, n as f64, m as f64, v.re, v.im, v.norm()]));
            }
        }
        let top: Vec<String> = rec.ranked().iter().take(3).map(|x| x.0.to_string()).collect();
        let mut s = row([eps, boundary.l2_error.unwrap_or(f64::NAN), c.max_abs()]);
        s.push(top.join(" "));
        summary_rows.push(s);

        mode_plot.series.push(Series::markers(format!("eps = {eps:.4}"), (0..=cfg.k_max).map(|k| (k as f64, rec.magnitude(k))).collect()));
        let mut bp = Plot::new(format!("reconstruction at eps = {eps:.4}"), "x", "y");
        bp.equal = true;
        let polar = |rs: &[f64]| {
            let mut v: Vec<(f64, f64)> = boundary.theta.iter().zip(rs).map(|(t, r)| (r * t.cos(), r * t.sin())).collect();
            v.extend(v.first().copied());
            v
        };
        bp.series.push(Series::line("true", polar(&r_true_samples)));
        bp.series.push(Series::line("recovered", polar(&boundary.r)));
        out.svg(&format!("boundary_{i}.svg"), &bp)?;
    }
    out.csv("modes.csv", &["eps", "k", "re", "im", "abs", "true_abs", "error"], mode_rows)?;
    out.csv("boundary.csv", &["eps", "theta", "r", "r_true"], boundary_rows)?;
    out.csv("coefficients.csv", &["eps", "n", "m", "re", "im", "abs"], coeff_rows)?;
    out.csv("summary.csv", &["eps", "l2_error", "max_abs_c", "top_modes"], summary_rows)?;
    out.svg("modes.svg", &mode_plot)?;
    Ok(notes)
}

/// The two experiment pipelines: a contrast sweep over the resonance catalog
/// followed by an inversion at the published contrasts. Refined catalog
/// values can sit on the disk resonance itself, where the reference problem
/// is singular, so the inversion uses the rounded published values.
pub fn example(which: u8) -> (ExperimentConfig, ExperimentConfig) {
    let base = ExperimentConfig::default();
    match which {
        1 => {
            let shape = ShapeSpec::Flower { delta: 0.1 };
            let sweep = ExperimentConfig {
                shape: shape.clone(),
                radius: 0.3,
                contrasts: Contrasts::Catalog { catalog: 18.91, near: Vec::new() },
                sweep: SweepOptions { ks: vec![3, 6, 9], midpoints: true },
                ..base.clone()
            };
            let invert = ExperimentConfig {
                shape,
                radius: 0.3,
                contrasts: Contrasts::List(vec![63.2669, 1971.2481, 3627.456]),
                alpha: 1e-8,
                ..base
            };
            (sweep, invert)
        }
        _ => {
            let shape = ShapeSpec::Triangle { legs: 0.5 };
            let sweep = ExperimentConfig {
                shape: shape.clone(),
                radius: 0.2,
                contrasts: Contrasts::Catalog { catalog: 15.0, near: Vec::new() },
                sweep: SweepOptions { ks: (1..=6).collect(), midpoints: true },
                ..base.clone()
            };
            let invert = ExperimentConfig {
                shape,
                radius: 0.2,
                contrasts: Contrasts::List(vec![143.6006, 5237.1406]),
                alpha: 1e-6,
                ..base
            };
            (sweep, invert)
        }
    }
}
