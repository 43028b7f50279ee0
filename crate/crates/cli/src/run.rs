//! Pipeline execution: stages run in dependency order, each writing its
//! artifacts; a failed stage only skips the stages that depend on it.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use ebk_core::oracle::{
    discretize, discretize_checked, eigenvector, node_count, richardson_self_consistency,
    DEFAULT_EIG_TOL,
};
use ebk_core::spectrum::{
    branch_exit_hbar, density_gap_bound, distance_to_spectrum, edge_trim,
    endpoint_safety_distance, ENDPOINT_SAFETY,
};
use ebk_core::{
    ball_multiplicity, branch_energy, build_action_table, build_families, compact_preimage_box,
    convergence_study, doublet_scan, domain_auto, exact_weyl_count, match_spectra, merged_spectrum,
    nearest_level, quantize_family, regularity_report, richardson_eigenvalues, verify_weyl,
    ActionTable, BranchPoint, BsSpectrum, ComponentFamily, EbkError, EnergyWindow,
    OracleSpectrum, PortraitOptions, SymbolSpec, TraceOptions, TridiagonalOperator,
};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, Stage};
use crate::error::{CliError, EXIT_HYPOTHESIS, EXIT_INTERNAL, EXIT_OK, EXIT_VERIFICATION};
use crate::output::{fmt_f64, sha256_file, OutputDir};

/// Largest change of Richardson-extrapolated eigenvalues under one more
/// grid refinement that the oracle is trusted with. It doubles as the
/// oracle accuracy below which convergence fits are floor-limited.
pub const ORACLE_SELF_CONSISTENCY: f64 = 1e-8;
/// Random endpoint pairs per `ħ` in the eigenvalue-count check.
pub const WEYL_TRIALS: usize = 20;
/// Random probe energies per `ħ` in the density check.
pub const DENSITY_PROBES: usize = 50;
/// Admissible fitted convergence orders for single-well symbols.
pub const SLOPE_RANGE: (f64, f64) = (1.7, 2.3);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: Stage,
    pub status: String,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    pub auto_inserted: Vec<Stage>,
    pub files: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    pub exit_code: i32,
}

impl Manifest {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct OracleRun {
    spectrum: OracleSpectrum,
    fine: TridiagonalOperator,
    nodes: Vec<usize>,
}

struct Context<'a> {
    config: &'a RunConfig,
    spec: SymbolSpec,
    window: EnergyWindow,
    trace: TraceOptions,
    families: Option<Vec<ComponentFamily>>,
    tables: Option<Vec<ActionTable>>,
    spectra: Option<Vec<BsSpectrum>>,
    oracles: Option<Vec<OracleRun>>,
    checks: Vec<Check>,
    out: OutputDir,
}

impl Context<'_> {
    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        let (name, detail) = (name.into(), detail.into());
        if !pass {
            warn!("check failed: {name}: {detail}");
        }
        self.checks.push(Check { name, pass, detail });
    }

    fn families(&self) -> &[ComponentFamily] {
        self.families.as_deref().expect("trace ran")
    }

    fn tables(&self) -> &[ActionTable] {
        self.tables.as_deref().expect("actions ran")
    }

    fn spectra(&self) -> &[BsSpectrum] {
        self.spectra.as_deref().expect("spectrum ran")
    }

    fn oracles(&self) -> &[OracleRun] {
        self.oracles.as_deref().expect("oracle ran")
    }

    fn rng(&self, stage: Stage, hbar_index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream((stage as u64) << 32 | hbar_index as u64);
        rng
    }
}

/// Run every planned stage and write the artifacts plus `manifest.json`
/// into `output_dir`.
pub fn run(config: &RunConfig, output_dir: &Path) -> Result<Manifest, CliError> {
    config.validate()?;
    let plan = config.stage_plan();
    for s in &plan.auto_inserted {
        info!("stage {s} inserted to satisfy dependencies");
    }
    let tol = config.tolerances;
    let mut ctx = Context {
        config,
        spec: config.symbol_spec()?,
        window: config.energy_window()?,
        trace: TraceOptions {
            trace_tol: tol.trace_tol,
            ..TraceOptions::default()
        },
        families: None,
        tables: None,
        spectra: None,
        oracles: None,
        checks: Vec::new(),
        out: OutputDir::create(output_dir)?,
    };

    let mut records: Vec<StageRecord> = Vec::new();
    let mut errors: Vec<CliError> = Vec::new();
    for &stage in &plan.stages {
        let blocked = stage
            .dependencies()
            .iter()
            .any(|d| records.iter().any(|r| r.name == *d && r.status != "ok"));
        if blocked {
            info!("stage {stage} skipped");
            records.push(StageRecord {
                name: stage,
                status: "skipped".into(),
                wall_time_s: 0.0,
                error: None,
            });
            continue;
        }
        info!("stage {stage} started");
        let start = Instant::now();
        let result = match stage {
            Stage::Trace => stage_trace(&mut ctx),
            Stage::Actions => stage_actions(&mut ctx),
            Stage::Spectrum => stage_spectrum(&mut ctx),
            Stage::Oracle => stage_oracle(&mut ctx),
            Stage::Compare => stage_compare(&mut ctx),
            Stage::Weyl => stage_weyl(&mut ctx),
            Stage::Branches => stage_branches(&mut ctx),
            Stage::Doublets => stage_doublets(&mut ctx),
        };
        let wall_time_s = start.elapsed().as_secs_f64();
        info!("stage {stage} finished in {wall_time_s:.3} s");
        let (status, error) = match result {
            Ok(()) => ("ok".to_string(), None),
            Err(e) => {
                warn!("stage {stage} failed: {e}");
                let msg = e.to_string();
                errors.push(e);
                ("failed".to_string(), Some(msg))
            }
        };
        records.push(StageRecord {
            name: stage,
            status,
            wall_time_s,
            error,
        });
    }

    let exit_code = if errors.iter().any(|e| e.exit_code() == EXIT_HYPOTHESIS) {
        EXIT_HYPOTHESIS
    } else if errors.iter().any(|e| e.exit_code() == EXIT_VERIFICATION) || ctx.checks.iter().any(|c| !c.pass) {
        EXIT_VERIFICATION
    } else if !errors.is_empty() {
        EXIT_INTERNAL
    } else {
        EXIT_OK
    };

    let mut files = BTreeMap::new();
    for name in ctx.out.written() {
        files.insert(name.clone(), sha256_file(&ctx.out.root().join(name))?);
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        stages: records,
        auto_inserted: plan.auto_inserted,
        files,
        checks: ctx.checks,
        exit_code,
    };
    ctx.out.write_json("manifest.json", &manifest)?;
    Ok(manifest)
}

fn stage_trace(ctx: &mut Context) -> Result<(), CliError> {
    let n = ctx.config.tolerances.action_samples;
    let opts = PortraitOptions {
        trace: ctx.trace,
        ..PortraitOptions::default()
    };
    let families = build_families(&ctx.spec, &ctx.window, n, &opts)?;
    let rect = compact_preimage_box(&ctx.spec, &ctx.window)?;
    let report = regularity_report(&ctx.spec, &ctx.window, &rect)?;
    ctx.check(
        "regular window",
        report.regular,
        format!("critical values near the window: {:?}", report.critical_values_found),
    );
    if !report.regular {
        return Err(EbkError::CriticalValueInWindow {
            values: report.critical_values_found,
        }
        .into());
    }

    // the full trace of every energy would be large; a stride keeps nine levels
    let stride = ((n - 1) / 8).max(1);
    let mut rows = Vec::new();
    for f in &families {
        for (i, c) in f.members.iter().enumerate() {
            if i % stride != 0 && i + 1 != f.members.len() {
                continue;
            }
            for (t, p) in c.times.iter().zip(&c.points) {
                rows.push(vec![
                    f.k.to_string(),
                    fmt_f64(c.energy),
                    fmt_f64(*t),
                    fmt_f64(p[0]),
                    fmt_f64(p[1]),
                ]);
            }
        }
    }
    ctx.out.write_csv("components.csv", &["k", "E", "t", "x", "xi"], &rows)?;
    ctx.check(
        "component families",
        !families.is_empty(),
        format!("{} families with constant topology", families.len()),
    );
    ctx.families = Some(families);
    Ok(())
}

fn stage_actions(ctx: &mut Context) -> Result<(), CliError> {
    let n = ctx.config.tolerances.action_samples;
    let tables = ctx
        .families()
        .par_iter()
        .map(|f| build_action_table(&ctx.spec, f, &ctx.window, n, &ctx.trace))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for t in &tables {
        for s in &t.samples {
            rows.push(vec![
                t.k.to_string(),
                fmt_f64(s.energy),
                fmt_f64(s.action),
                fmt_f64(s.period),
                t.maslov.0.to_string(),
            ]);
        }
    }
    ctx.out.write_csv("actions.csv", &["k", "E", "A0", "tau", "maslov"], &rows)?;
    let maslov: Vec<i32> = tables.iter().map(|t| t.maslov.0).collect();
    ctx.check(
        "maslov index",
        maslov.iter().all(|&m| m == 2),
        format!("indices with flow orientation: {maslov:?}"),
    );
    ctx.tables = Some(tables);
    Ok(())
}

fn stage_spectrum(ctx: &mut Context) -> Result<(), CliError> {
    let mut spectra = Vec::new();
    let mut rows = Vec::new();
    for &hbar in &ctx.config.hbars {
        let bs = merged_spectrum(ctx.tables(), hbar, &ctx.window)?;
        for e in &bs.entries {
            rows.push(vec![fmt_f64(hbar), e.k.to_string(), e.n.to_string(), fmt_f64(e.energy)]);
        }
        spectra.push(bs);
    }
    ctx.out.write_csv("spectrum.csv", &["hbar", "k", "n", "E"], &rows)?;

    let mut density = Vec::new();
    for (i, (bs, &hbar)) in spectra.iter().zip(&ctx.config.hbars).enumerate() {
        let spacing = edge_trim(ctx.tables(), hbar);
        let bound = density_gap_bound(ctx.tables(), hbar);
        let (lo, hi) = (ctx.window.e1 + spacing, ctx.window.e2 - spacing);
        if lo >= hi || bs.entries.is_empty() {
            density.push(json!({"hbar": hbar, "probes": 0, "note": "window narrower than two spacings"}));
            continue;
        }
        let mut rng = ctx.rng(Stage::Spectrum, i);
        let mut worst: f64 = 0.0;
        let mut failures = 0;
        for _ in 0..DENSITY_PROBES {
            let e0 = rng.random_range(lo..=hi);
            let (_, gap) = nearest_level(bs, e0)?;
            worst = worst.max(gap);
            if gap > bound {
                failures += 1;
            }
        }
        density.push(json!({
            "hbar": hbar,
            "probes": DENSITY_PROBES,
            "bound": bound,
            "max_distance": worst,
            "failures": failures,
        }));
        ctx.check(
            format!("density hbar={hbar}"),
            failures == 0,
            format!("max distance {worst:e} against bound {bound:e} over {DENSITY_PROBES} probes"),
        );
    }
    ctx.out.write_json("density.json", &density)?;
    ctx.spectra = Some(spectra);
    Ok(())
}

fn stage_oracle(ctx: &mut Context) -> Result<(), CliError> {
    let potential = ctx
        .spec
        .potential()
        .ok_or_else(|| CliError::Config("the oracle needs a Schrödinger symbol".into()))?
        .clone();
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for &hbar in &ctx.config.hbars {
        let domain = domain_auto(&potential, &ctx.window, hbar, ctx.config.tolerances.oracle_tol)?;
        discretize_checked(&potential, &ctx.window, hbar, domain)?;
        let spectrum = richardson_eigenvalues(
            &potential,
            hbar,
            domain,
            ctx.window.lower(),
            ctx.window.upper(),
            DEFAULT_EIG_TOL,
        )?;
        let drift = richardson_self_consistency(&potential, &spectrum, DEFAULT_EIG_TOL)?;
        ctx.check(
            format!("oracle self-consistency hbar={hbar}"),
            drift <= ORACLE_SELF_CONSISTENCY,
            format!("Richardson drift {drift:e} on N = {}, L = {}", domain.points, domain.half_width),
        );
        let fine = discretize(&potential, hbar, domain.half_width, 2 * domain.points - 1)?;
        let nodes = spectrum
            .fine
            .par_iter()
            .map(|&lambda| eigenvector(&fine, lambda).map(|v| node_count(&v)))
            .collect::<Result<Vec<_>, _>>()?;
        for ((j, e), n) in spectrum.indices.iter().zip(&spectrum.eigenvalues).zip(&nodes) {
            rows.push(vec![fmt_f64(hbar), j.to_string(), fmt_f64(*e), n.to_string()]);
        }
        runs.push(OracleRun { spectrum, fine, nodes });
    }
    ctx.out.write_csv("oracle.csv", &["hbar", "index", "E", "nodes"], &rows)?;
    ctx.oracles = Some(runs);
    Ok(())
}

fn stage_compare(ctx: &mut Context) -> Result<(), CliError> {
    let single_well = ctx.families().len() == 1;
    let mut per_hbar = Vec::new();
    let mut points = Vec::new();
    let mut first_error: Option<EbkError> = None;
    let mut new_checks = Vec::new();
    for ((bs, run), &hbar) in ctx.spectra().iter().zip(ctx.oracles()).zip(&ctx.config.hbars) {
        let trim = edge_trim(ctx.tables(), hbar);
        match match_spectra(bs, &run.spectrum, trim) {
            Ok(report) => {
                let pairs: Vec<_> = report
                    .pairs
                    .iter()
                    .map(|p| {
                        let pos = run
                            .spectrum
                            .indices
                            .iter()
                            .position(|&j| j == p.oracle_index)
                            .expect("paired index comes from the oracle");
                        json!({
                            "k": p.bs.k,
                            "n": p.bs.n,
                            "bs": p.bs.energy,
                            "oracle": p.oracle_energy,
                            "index": p.oracle_index,
                            "error": p.error,
                            "nodes": run.nodes[pos],
                        })
                    })
                    .collect();
                new_checks.push(Check {
                    name: format!("bijection hbar={hbar}"),
                    pass: true,
                    detail: format!(
                        "{} pairs, {} unmatched edge levels, interior max error {:e}",
                        report.pairs.len(),
                        report.unmatched.len(),
                        report.interior_max_error
                    ),
                });
                if single_well {
                    let bad = pairs.iter().filter(|p| p["nodes"].as_i64() != p["n"].as_i64()).count();
                    new_checks.push(Check {
                        name: format!("node count hbar={hbar}"),
                        pass: bad == 0,
                        detail: format!("{bad} of {} pairs disagree", pairs.len()),
                    });
                }
                if report.interior_pairs().next().is_some() {
                    points.push((hbar, report.interior_max_error));
                }
                per_hbar.push(json!({
                    "hbar": hbar,
                    "band": [report.band.0, report.band.1],
                    "max_error": report.max_error,
                    "interior_max_error": report.interior_max_error,
                    "pairs": pairs,
                    "unmatched": report.unmatched,
                }));
            }
            Err(e) => {
                new_checks.push(Check {
                    name: format!("bijection hbar={hbar}"),
                    pass: false,
                    detail: e.to_string(),
                });
                per_hbar.push(json!({"hbar": hbar, "error": e.to_string()}));
                first_error.get_or_insert(e);
            }
        }
    }
    let convergence = if points.len() >= 3 && first_error.is_none() {
        match convergence_study(&points, ORACLE_SELF_CONSISTENCY) {
            Ok(r) => {
                if single_well {
                    let pass = SLOPE_RANGE.0 <= r.slope && r.slope <= SLOPE_RANGE.1;
                    new_checks.push(Check {
                        name: "convergence order".into(),
                        pass,
                        detail: format!("fitted slope {:.4} over {} points", r.slope, r.used.len()),
                    });
                }
                json!({"points": points, "slope": r.slope, "intercept": r.intercept,
                       "residual": r.residual, "floor_limited": r.floor_limited, "used": r.used})
            }
            // every point sits at the oracle floor: the BS levels are exact to oracle accuracy
            Err(_) => json!({"points": points, "floor_limited": true}),
        }
    } else {
        json!({"points": points, "note": "needs three hbar values with a bijection"})
    };
    ctx.checks.extend(new_checks);
    ctx.out.write_json("match.json", &json!({"per_hbar": per_hbar, "convergence": convergence}))?;
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn stage_weyl(ctx: &mut Context) -> Result<(), CliError> {
    let mut trials = Vec::new();
    let mut failures = 0;
    let mut total = 0;
    for (i, ((bs, run), &hbar)) in ctx.spectra().iter().zip(ctx.oracles()).zip(&ctx.config.hbars).enumerate() {
        let required = endpoint_safety_distance(ctx.tables(), hbar, ENDPOINT_SAFETY);
        let mut rng = ctx.rng(Stage::Weyl, i);
        let (lo, hi) = (ctx.window.e1, ctx.window.e2);
        let safe = |e: f64| distance_to_spectrum(bs, e) >= required;
        for _ in 0..WEYL_TRIALS {
            let mut pair = None;
            for _ in 0..10_000 {
                let (a, b) = (rng.random_range(lo..=hi), rng.random_range(lo..=hi));
                let (a, b) = (a.min(b), a.max(b));
                if a < b && safe(a) && safe(b) {
                    pair = Some((a, b));
                    break;
                }
            }
            let Some((a, b)) = pair else {
                return Err(EbkError::UnsafeEndpoint {
                    endpoint: lo,
                    distance: 0.0,
                    required,
                }
                .into());
            };
            let count = exact_weyl_count(ctx.tables(), hbar, a, b, bs, ENDPOINT_SAFETY)?;
            let check = verify_weyl(&count, &run.spectrum, a, b);
            total += 1;
            if !check.agrees {
                failures += 1;
            }
            trials.push(json!({
                "hbar": hbar,
                "e1": a,
                "e2": b,
                "total": count.count,
                "per_family": count.per_family,
                "leading": count.leading,
                "correction": count.correction,
                "delta": count.delta,
                "deltas": count.deltas,
                "oracle": check.oracle,
                "agrees": check.agrees,
            }));
        }
    }
    ctx.check(
        "eigenvalue count",
        failures == 0,
        format!("{} of {total} random safe intervals agree exactly", total - failures),
    );
    ctx.out.write_json("weyl.json", &json!({"trials": trials}))?;
    Ok(())
}

fn stage_branches(ctx: &mut Context) -> Result<(), CliError> {
    let hbar0 = ctx.config.hbars[0];
    let mut branches = Vec::new();
    let mut failures = 0;
    for t in ctx.tables() {
        let (a_lo, a_hi) = t.action_range();
        for (n, e0) in quantize_family(t, hbar0, &ctx.window)? {
            let m = n as f64 + t.maslov.quarter();
            let exit = branch_exit_hbar(t, n);
            let leaves = match exit {
                Some(h) => branch_energy(t, n, h * (1.0 - 1e-3))? == BranchPoint::OutOfWindow,
                None => false,
            };
            // the branch is inside the window for ħ between ħ* and the upper exit
            let (h_lo, h_hi) = (a_lo / (2.0 * std::f64::consts::PI * m), a_hi / (2.0 * std::f64::consts::PI * m));
            let samples = 65;
            let mut energies = Vec::with_capacity(samples);
            for s in 0..samples {
                let h = h_lo + (h_hi - h_lo) * (1e-6 + (1.0 - 2e-6) * s as f64 / (samples - 1) as f64);
                if let BranchPoint::Inside(e) = branch_energy(t, n, h)? {
                    energies.push(e);
                }
            }
            let monotone = energies.len() == samples && energies.windows(2).all(|w| w[1] > w[0]);
            if !(leaves && monotone) {
                failures += 1;
            }
            branches.push(json!({
                "k": t.k,
                "n": n,
                "energy": e0,
                "hbar": hbar0,
                "hbar_exit": exit,
                "leaves_below_exit": leaves,
                "monotone": monotone,
            }));
        }
    }
    ctx.check(
        "branch drift",
        failures == 0 && !branches.is_empty(),
        format!("{} branches at hbar={hbar0}, {failures} without exit or monotonicity", branches.len()),
    );
    ctx.out.write_json("branches.json", &json!({"branches": branches}))?;
    Ok(())
}

fn stage_doublets(ctx: &mut Context) -> Result<(), CliError> {
    let mut per_hbar = Vec::new();
    let mut new_checks = Vec::new();
    for ((bs, run), &hbar) in ctx.spectra().iter().zip(ctx.oracles()).zip(&ctx.config.hbars) {
        let radius = hbar * hbar;
        let clusters = doublet_scan(bs, radius)?;
        let mut rows = Vec::new();
        let (mut multiplets, mut bad) = (0, 0);
        for c in &clusters {
            let energies: Vec<f64> = c.members.iter().map(|m| m.energy).collect();
            let bs_gap = energies.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                - energies.iter().fold(f64::INFINITY, |a, &b| a.min(b));
            let near: Vec<f64> = run
                .spectrum
                .eigenvalues
                .iter()
                .copied()
                .filter(|e| (e - c.center).abs() <= radius)
                .collect();
            let oracle_split = if near.len() >= 2 {
                near[near.len() - 1] - near[0]
            } else {
                0.0
            };
            let multiplicity = ball_multiplicity(&run.fine, c.center, radius);
            let ok = multiplicity == c.members.len()
                && (c.members.len() < 2 || (bs_gap <= 1e-9 && oracle_split <= hbar.powi(3)));
            multiplets += usize::from(c.is_multiplet());
            bad += usize::from(!ok);
            rows.push(json!({
                "center": c.center,
                "members": c.members,
                "families": c.families,
                "bs_gap": bs_gap,
                "oracle_split": oracle_split,
                "ball_multiplicity": multiplicity,
            }));
        }
        new_checks.push(Check {
            name: format!("doublets hbar={hbar}"),
            pass: bad == 0,
            detail: format!("{multiplets} multiplets, {bad} of {} clusters inconsistent", clusters.len()),
        });
        per_hbar.push(json!({"hbar": hbar, "radius": radius, "clusters": rows}));
    }
    ctx.checks.extend(new_checks);
    ctx.out.write_json("doublets.json", &json!({"per_hbar": per_hbar}))?;
    Ok(())
}
