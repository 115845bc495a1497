use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Value};
use log::info;
use serde::Serialize;
use serde_json::json;

use mapsieve::basis::compute_basis_norms;
use mapsieve::estimator::{RegressionData, SieveConfig, SieveFit};
use mapsieve::inference::{
    build_scr, scr_grid_axes, test_exact_form, test_homogeneity, test_separability, BootstrapConfig,
    HypothesisKind, ScrGrid, TestReport,
};
use mapsieve::process::{simulate_scenario_with, CenteredTruth, SimOptions};
use mapsieve::rng::derive;
use mapsieve::study::{check_budget, run_replicates, ReplicateOutcome, StudyConfig, StudySummary};
use mapsieve::tuning::{select_cd, select_m, with_sizes, MSelection};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{digest, ensure_dir, fmt_float, fmt_opt, load_data, write_csv, write_json, Table};

const VERSION: &str = env!("CARGO_PKG_VERSION");

fn out_path(cfg: &RunConfig, name: &str) -> CliResult<PathBuf> {
    let dir = cfg.out_dir();
    ensure_dir(&dir)?;
    Ok(dir.join(name))
}

fn manifest(command: &str, cfg: &RunConfig, config: serde_json::Value) -> serde_json::Value {
    json!({
        "command": command,
        "version": VERSION,
        "seed": cfg.seed,
        "digest": digest(&config),
        "config": config,
    })
}

pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let sc = cfg.scenario.scenario()?;
    let s = &cfg.scenario;
    let opts = SimOptions {
        burn_in: s.burn_in,
        ..SimOptions::default()
    };
    let series = simulate_scenario_with::<f64>(&sc, s.n, cfg.seed, opts)?;
    let lags = s.lagged_columns;
    if lags >= s.n {
        return Err(CliError::Config(format!("{lags} lagged columns need more than {} observations", s.n)));
    }
    let mut header = vec!["index".to_string(), "t".into(), "X".into()];
    header.extend((1..=lags).map(|k| format!("X_lag{k}")));
    let rows = (lags..s.n).map(|i| {
        let mut row = vec![(i + 1).to_string(), fmt_float(series.times[i]), fmt_float(series.values[i])];
        row.extend((1..=lags).map(|k| fmt_float(series.values[i - k])));
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let path = out_path(cfg, "simulated.csv")?;
    write_csv(&path, &header, rows)?;

    let config = json!({ "scenario": s, "seed": cfg.seed });
    let mut m = manifest("simulate", cfg, config);
    m["scenario_digest"] = json!(digest(&sc));
    m["output"] = json!(path);
    write_json(&out_path(cfg, "simulate.json")?, &m)?;
    info!("wrote {} rows to {}", s.n - lags, path.display());
    Ok(())
}

struct Fitted {
    data_digest: serde_json::Value,
    sieve: SieveConfig<f64>,
    fit: SieveFit<f64>,
}

fn fit_model(cfg: &RunConfig) -> CliResult<Fitted> {
    let data = load_data(&cfg.data)?;
    let sieve = cfg.sieve.build(data.r())?;
    let fit = SieveFit::fit(data, &sieve)?;
    let data_digest = json!({
        "input": cfg.data.input,
        "ar_lags": cfg.data.ar_lags,
        "rows": fit.data().rows(),
        "values": digest(&(&fit.data().y, &fit.data().x)),
    });
    Ok(Fitted {
        data_digest,
        sieve,
        fit,
    })
}

fn grid_config(cfg: &RunConfig, data: &RegressionData<f64>) -> BootstrapConfig {
    cfg.bootstrap.build(data.rows(), cfg.seed)
}

pub fn fit(cfg: &RunConfig) -> CliResult<()> {
    let Fitted {
        data_digest,
        sieve,
        fit,
    } = fit_model(cfg)?;
    let boot = grid_config(cfg, fit.data());
    let (t_axis, x_axis) = scr_grid_axes(&fit, &boot)?;

    let mut rows = Vec::new();
    for j in 1..=fit.r() {
        for &t in &t_axis {
            for &x in &x_axis {
                rows.push(vec![
                    j.to_string(),
                    fmt_float(t),
                    fmt_float(x),
                    fmt_float(fit.eval_corrected(j, t, x)?),
                ]);
            }
        }
    }
    write_csv(&out_path(cfg, "fit_grid.csv")?, &["component", "t", "x", "m_hat"], rows)?;
    let trend = t_axis
        .iter()
        .map(|&t| Ok(vec![fmt_float(t), fmt_float(fit.eval_corrected(0, t, 0.0)?)]))
        .collect::<CliResult<Vec<_>>>()?;
    write_csv(&out_path(cfg, "fit_trend.csv")?, &["t", "m0_hat"], trend)?;

    let bases = fit.bases();
    let mut time_sets = Vec::new();
    time_sets.push(match &bases.intercept {
        Some(b) => b.clone(),
        None => bases.blocks[0].time().clone(),
    });
    time_sets.extend(bases.blocks.iter().map(|b| b.time().clone()));
    let state_sets: Vec<_> = bases.blocks.iter().map(|b| b.state().clone()).collect();
    let diagnostics = compute_basis_norms(&time_sets, &state_sets, &t_axis, &x_axis)?;
    let res = fit.residuals();
    let residual_variance = res.iter().map(|e| e * e).sum::<f64>() / res.len() as f64;

    let mut m = manifest("fit", cfg, json!({ "data": data_digest, "sieve": sieve }));
    m["rows"] = json!(fit.data().rows());
    m["param_count"] = json!(fit.param_count());
    m["block_ranges"] = json!((0..=fit.r()).map(|j| fit.block_range(j).map(|r| [r.start, r.end])).collect::<Result<Vec<_>, _>>()?);
    m["beta"] = json!(fit.beta().as_slice());
    m["residual_variance"] = json!(residual_variance);
    m["diagnostics"] = json!(diagnostics);
    write_json(&out_path(cfg, "fit.json")?, &m)?;
    Ok(())
}

struct Region {
    fitted: Fitted,
    boot: BootstrapConfig,
    scr: ScrGrid<f64>,
    m_selection: Option<MSelection>,
}

fn region(cfg: &RunConfig) -> CliResult<Region> {
    let fitted = fit_model(cfg)?;
    let fit = &fitted.fit;
    let mut boot = grid_config(cfg, fit.data());
    let m_selection = if cfg.inference.tune_m {
        let grid = cfg.tune.build(fit.data().rows())?;
        let sel = select_m(fit, &grid.m, grid.h0)?;
        boot.block_length = sel.m;
        Some(sel)
    } else {
        None
    };
    boot.validate(fit.data().rows())?;
    let scr = build_scr(fit, &boot, cfg.inference.component)?;
    Ok(Region {
        fitted,
        boot,
        scr,
        m_selection,
    })
}

fn region_manifest(command: &str, cfg: &RunConfig, r: &Region) -> serde_json::Value {
    let config = json!({
        "data": r.fitted.data_digest,
        "sieve": r.fitted.sieve,
        "bootstrap": r.boot,
        "component": cfg.inference.component,
        "tune_m": cfg.inference.tune_m,
    });
    let mut m = manifest(command, cfg, config);
    m["component"] = json!(r.scr.component);
    m["c_alpha"] = json!(r.scr.c_alpha);
    m["alpha"] = json!(r.scr.alpha);
    m["n"] = json!(r.scr.n);
    m["block_length"] = json!(r.boot.block_length);
    m["bootstrap_seed"] = json!(r.boot.seed);
    m["degenerate"] = json!(r.scr.degenerate);
    if let Some(sel) = &r.m_selection {
        m["block_length_selection"] = json!(sel);
    }
    m
}

pub fn scr(cfg: &RunConfig) -> CliResult<()> {
    let r = region(cfg)?;
    let s = &r.scr;
    let rows = (0..s.len()).map(|k| {
        let (t, x) = s.point(k);
        vec![
            fmt_float(t),
            fmt_float(x),
            fmt_float(s.m_hat[k]),
            fmt_float(s.h_hat[k]),
            fmt_float(s.lower[k]),
            fmt_float(s.upper[k]),
        ]
    });
    write_csv(&out_path(cfg, "scr.csv")?, &["t", "x", "m_hat", "h_hat", "lower", "upper"], rows)?;
    write_json(&out_path(cfg, "scr.json")?, &region_manifest("scr", cfg, &r))?;
    Ok(())
}

/// Exact-form target evaluated on the region's grid.
fn exact_target(cfg: &RunConfig, spec: &str, scr: &ScrGrid<f64>) -> CliResult<Vec<f64>> {
    let points = scr.points();
    if spec == "fitted" {
        return Ok(scr.m_hat.clone());
    }
    if spec == "zero" {
        return Ok(vec![0.0; points.len()]);
    }
    if spec == "scenario" {
        let sc = cfg.scenario.scenario()?;
        if scr.component > sc.lags() {
            return Err(CliError::Config(format!("scenario has no component {}", scr.component)));
        }
        let truth = CenteredTruth::new(sc, scr.component, cfg.study.centering_samples, derive(cfg.seed, u64::MAX));
        return Ok(points.iter().map(|&(t, x)| truth.eval(t, x)).collect());
    }
    if let Some(expr) = spec.strip_prefix("expr:") {
        let tree = build_operator_tree::<DefaultNumericTypes>(expr)
            .map_err(|e| CliError::Config(format!("m0 expression `{expr}`: {e}")))?;
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI))
            .expect("fresh context accepts values");
        return points
            .iter()
            .map(|&(t, x)| {
                ctx.set_value("t".into(), Value::Float(t)).expect("context accepts floats");
                ctx.set_value("x".into(), Value::Float(x)).expect("context accepts floats");
                tree.eval_number_with_context(&ctx)
                    .map_err(|e| CliError::Config(format!("m0 expression `{expr}` at (t, x) = ({t}, {x}): {e}")))
            })
            .collect();
    }
    if let Some(path) = spec.strip_prefix("csv:") {
        let table = Table::read(Path::new(path))?;
        let (ts, xs, vs) = (table.floats("t")?, table.floats("x")?, table.floats("m0")?);
        if ts.len() != points.len() {
            return Err(CliError::ingest(
                path,
                None,
                None,
                format!("{} rows for a grid of {} points", ts.len(), points.len()),
            ));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        for (k, &(t, x)) in points.iter().enumerate() {
            if !close(ts[k], t) || !close(xs[k], x) {
                return Err(CliError::ingest(
                    path,
                    Some(k + 1),
                    None,
                    format!("point ({}, {}) does not match grid point ({t}, {x})", ts[k], xs[k]),
                ));
            }
        }
        return Ok(vs);
    }
    Err(CliError::Config(format!(
        "unknown m0 spec `{spec}` (fitted, zero, scenario, expr:<f(t, x)>, csv:<path>)"
    )))
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    kind: HypothesisKind,
    component: usize,
    statistic: f64,
    p_value: f64,
    reject: bool,
    alpha: f64,
    c_alpha: f64,
    violations: usize,
    grid_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    m0: Option<&'a str>,
}

pub fn test(cfg: &RunConfig) -> CliResult<()> {
    let r = region(cfg)?;
    let kind = cfg.inference.kind;
    let spec = cfg.inference.m0.as_deref();
    let report: TestReport<f64> = match kind {
        HypothesisKind::Exact => {
            let spec = spec.ok_or_else(|| CliError::Config("exact-form test needs --m0-spec".into()))?;
            let target = exact_target(cfg, spec, &r.scr)?;
            let next = Cell::new(0);
            test_exact_form(&r.scr, |_, _| {
                let k = next.get();
                next.set(k + 1);
                target[k]
            })?
        }
        HypothesisKind::Homogeneity => test_homogeneity(&r.fitted.fit, &r.scr)?,
        HypothesisKind::Separability => test_separability(&r.fitted.fit, &r.scr)?,
    };
    let s = &r.scr;
    let rows = (0..s.len()).map(|k| {
        let (t, x) = s.point(k);
        vec![
            fmt_float(t),
            fmt_float(x),
            fmt_float(s.m_hat[k]),
            fmt_float(report.restricted[k]),
            fmt_float(s.lower[k]),
            fmt_float(s.upper[k]),
        ]
    });
    write_csv(
        &out_path(cfg, "test_surface.csv")?,
        &["t", "x", "m_hat", "restricted", "lower", "upper"],
        rows,
    )?;
    let mut m = region_manifest("test", cfg, &r);
    m["report"] = json!(ReportRecord {
        kind,
        component: report.component,
        statistic: report.statistic,
        p_value: report.p_value,
        reject: report.reject,
        alpha: report.alpha,
        c_alpha: report.c_alpha,
        violations: report.violations,
        grid_points: s.len(),
        m0: if kind == HypothesisKind::Exact { spec } else { None },
    });
    write_json(&out_path(cfg, "test.json")?, &m)?;
    println!(
        "{} test, component {}: statistic {:.4}, c_alpha {:.4}, p = {:.4}, {}",
        kind.label(),
        report.component,
        report.statistic,
        report.c_alpha,
        report.p_value,
        if report.reject { "reject" } else { "accept" }
    );
    Ok(())
}

pub fn tune(cfg: &RunConfig) -> CliResult<()> {
    let data = load_data(&cfg.data)?;
    let base = cfg.sieve.build(data.r())?;
    let grid = cfg.tune.build(data.rows())?;
    let sel = select_cd(&data, &base, &grid.cd, grid.validation)?;
    let rows = sel
        .scores
        .iter()
        .map(|s| vec![s.c.to_string(), s.d.to_string(), fmt_opt(s.mse)]);
    write_csv(&out_path(cfg, "tune_cd.csv")?, &["c", "d", "score"], rows)?;

    let chosen = with_sizes(&base, sel.c, sel.d);
    let fit = SieveFit::fit(data.clone(), &chosen)?;
    let msel = select_m(&fit, &grid.m, grid.h0)?;
    let interior: BTreeMap<usize, f64> = msel.se.iter().copied().collect();
    let rows = grid
        .m
        .iter()
        .map(|m| vec![m.to_string(), fmt_opt(interior.get(m).copied())]);
    write_csv(&out_path(cfg, "tune_m.csv")?, &["m", "se"], rows)?;

    let config = json!({
        "data": { "input": cfg.data.input, "ar_lags": cfg.data.ar_lags, "values": digest(&(&data.y, &data.x)) },
        "sieve": base,
        "grid": grid,
    });
    let mut m = manifest("tune", cfg, config);
    m["selection"] = json!({ "c": sel.c, "d": sel.d, "m": msel.m });
    m["sieve"] = json!(chosen);
    write_json(&out_path(cfg, "tune.json")?, &m)?;
    println!("selected c = {}, d = {}, m = {}", sel.c, sel.d, msel.m);
    Ok(())
}

fn study_config(cfg: &RunConfig) -> CliResult<StudyConfig> {
    let scenario = cfg.scenario.scenario()?;
    let rows = cfg.scenario.n.saturating_sub(scenario.lags());
    let study = StudyConfig {
        scenario,
        n: cfg.scenario.n,
        replicates: cfg.study.replicates,
        sieve: cfg.sieve.build(scenario.lags())?,
        bootstrap: cfg.bootstrap.build(rows, cfg.seed),
        mode: cfg.study.mode()?,
        seed: cfg.seed,
        centering_samples: cfg.study.centering_samples,
        tune: if cfg.study.tune { Some(cfg.tune.build(rows)?) } else { None },
    };
    study.validate()?;
    Ok(study)
}

const STUDY_HEADER: [&str; 11] = [
    "record",
    "id",
    "outcome",
    "statistic",
    "c_alpha",
    "rate",
    "se",
    "replicates",
    "failures",
    "error",
    "digest",
];

fn write_study(path: &Path, outcomes: &[ReplicateOutcome], summary: &StudySummary, digest: &str) -> CliResult<()> {
    let mut rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            vec![
                "replicate".into(),
                o.id.to_string(),
                o.outcome.map(|b| u8::from(b).to_string()).unwrap_or_default(),
                fmt_opt(o.statistic),
                fmt_opt(o.c_alpha),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                o.error.clone().unwrap_or_default(),
                digest.into(),
            ]
        })
        .collect();
    rows.push(vec![
        "summary".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        fmt_float(summary.rate),
        fmt_float(summary.se),
        summary.replicates.to_string(),
        summary.failures.to_string(),
        String::new(),
        digest.into(),
    ]);
    write_csv(path, &STUDY_HEADER, rows)
}

/// Replicate rows and their common digest from a study table.
fn read_study(path: &Path) -> CliResult<(Vec<ReplicateOutcome>, String)> {
    let table = Table::read(path)?;
    let records = table.strings("record")?;
    let ids = table.strings("id")?;
    let outcome = table.strings("outcome")?;
    let statistic = table.strings("statistic")?;
    let c_alpha = table.strings("c_alpha")?;
    let error = table.strings("error")?;
    let digests = table.strings("digest")?;
    let opt_float = |k: usize, col: &str, s: &str| -> CliResult<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| CliError::ingest(path, Some(k + 1), Some(col), format!("cannot parse `{s}` as a number")))
    };
    let mut out = Vec::new();
    let mut common: Option<String> = None;
    for k in 0..table.rows.len() {
        match common.as_deref() {
            None => common = Some(digests[k].clone()),
            Some(d) if d != digests[k] => {
                return Err(CliError::ingest(path, Some(k + 1), Some("digest"), "mixed config digests within one file"));
            }
            _ => {}
        }
        if records[k] != "replicate" {
            continue;
        }
        let id = ids[k]
            .parse()
            .map_err(|_| CliError::ingest(path, Some(k + 1), Some("id"), format!("cannot parse `{}` as an id", ids[k])))?;
        let outcome = match outcome[k].as_str() {
            "" => None,
            "1" => Some(true),
            "0" => Some(false),
            other => {
                return Err(CliError::ingest(path, Some(k + 1), Some("outcome"), format!("expected 0, 1 or empty, got `{other}`")));
            }
        };
        out.push(ReplicateOutcome {
            id,
            outcome,
            statistic: opt_float(k, "statistic", &statistic[k])?,
            c_alpha: opt_float(k, "c_alpha", &c_alpha[k])?,
            error: if error[k].is_empty() { None } else { Some(error[k].clone()) },
        });
    }
    let digest = common.ok_or_else(|| CliError::ingest(path, None, None, "no rows"))?;
    Ok((out, digest))
}

pub fn study(cfg: &RunConfig, merge: &[PathBuf]) -> CliResult<()> {
    if !merge.is_empty() {
        return merge_studies(cfg, merge);
    }
    let study = study_config(cfg)?;
    let ids = cfg.study.ids()?;
    let full = ids == (0..study.replicates);
    let d = study_digest(&study);
    let outcomes = run_replicates(&study, ids, cfg.workers)?;
    let summary = StudySummary::from_outcomes(&outcomes);
    write_study(&out_path(cfg, "study.csv")?, &outcomes, &summary, &d)?;
    let mut m = manifest("study", cfg, json!(study_identity(&study)));
    m["digest"] = json!(d);
    m["summary"] = json!(summary);
    m["shard"] = json!({ "first": cfg.study.first, "count": outcomes.len(), "complete": full });
    write_json(&out_path(cfg, "study.json")?, &m)?;
    check_budget(&summary)?;
    println!(
        "rate {:.4} (se {:.4}) over {} replicates, {} failed",
        summary.rate,
        summary.se,
        summary.replicates - summary.failures,
        summary.failures
    );
    Ok(())
}

/// The study configuration without its replicate count, so shards of one
/// study share a digest.
fn study_identity(study: &StudyConfig) -> StudyConfig {
    StudyConfig {
        replicates: 0,
        ..study.clone()
    }
}

fn study_digest(study: &StudyConfig) -> String {
    digest(&study_identity(study))
}

fn merge_studies(cfg: &RunConfig, files: &[PathBuf]) -> CliResult<()> {
    let mut all: Vec<ReplicateOutcome> = Vec::new();
    let mut common: Option<String> = None;
    for path in files {
        let (outcomes, d) = read_study(path)?;
        match &common {
            None => common = Some(d),
            Some(c) if *c != d => {
                return Err(CliError::Config(format!(
                    "{} was produced by a different configuration (digest {d}, expected {c})",
                    path.display()
                )));
            }
            _ => {}
        }
        all.extend(outcomes);
    }
    all.sort_by_key(|o| o.id);
    if let Some(w) = all.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(CliError::Config(format!("replicate {} appears in more than one file", w[0].id)));
    }
    let d = common.unwrap_or_default();
    let summary = StudySummary::from_outcomes(&all);
    write_study(&out_path(cfg, "study.csv")?, &all, &summary, &d)?;
    let mut m = json!({
        "command": "study-merge",
        "version": VERSION,
        "digest": d,
        "inputs": files,
        "summary": summary,
    });
    m["ids"] = json!([all.first().map(|o| o.id), all.last().map(|o| o.id)]);
    write_json(&out_path(cfg, "study.json")?, &m)?;
    check_budget(&summary)?;
    println!("merged {} replicates: rate {:.4} (se {:.4})", summary.replicates, summary.rate, summary.se);
    Ok(())
}
