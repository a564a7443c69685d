use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use trough::controllers::{bound_report, ossi_solve, Bes, Controller, Ossi, Qtf, Sstf};
use trough::sim::{conservation_error, replay_check, run_with, write_metrics_csv, MetricsSeries, RunOptions, Scenario};
use trough::traces::{build_trace_scenario, gen_synthetic, read_packet_log, read_prices, Packet, PriceRow};

use crate::config::{ControllerSpec, LambdaSpec, RunConfig, ScenarioSpec, SweepPoint};
use crate::output::{
    slug, write_atomic, write_entries_csv, write_json, IndexSummary, RunEntry, RunSummary, ToolInfo, SCHEMA_VERSION,
};
use crate::AppError;

const OSSI_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Per-run outputs; a comparison table only when there are several runs.
    Run,
    /// Always a comparison table, with QTF bounds on ergodic scenarios.
    Compare,
}

/// What an experiment produced, in sweep-point then controller order.
pub struct Report {
    pub entries: Vec<RunEntry>,
    pub failed: usize,
}

struct Task {
    point: usize,
    controller: usize,
}

struct Finished {
    summary: RunSummary,
    series: Option<MetricsSeries>,
}

fn scenario_for(spec: &ScenarioSpec, trace: Option<&(Vec<Packet>, Vec<PriceRow>)>) -> Result<Scenario> {
    Ok(match spec {
        ScenarioSpec::Synthetic(c) => gen_synthetic(c)?,
        ScenarioSpec::Trace(t) => {
            let (packets, prices) = trace.expect("trace inputs are loaded for trace scenarios");
            build_trace_scenario(packets, prices, &t.config)?
        }
    })
}

fn build_controller(spec: &ControllerSpec, scenario: &Scenario) -> Result<(Box<dyn Controller>, Option<f64>)> {
    Ok(match spec {
        ControllerSpec::Qtf { v } => (Box::new(Qtf::new(*v)), None),
        ControllerSpec::Bes => (Box::new(Bes), None),
        ControllerSpec::Sstf { beta0, lambda } => {
            let rates = match lambda {
                LambdaSpec::Scenario => {
                    if scenario.distribution().is_none() {
                        log::warn!("sstf: estimating lambda from the empirical mean of the recorded arrivals");
                    }
                    scenario.mean_arrivals()
                }
                LambdaSpec::Values(v) => v.clone(),
            };
            (Box::new(Sstf::new(rates, *beta0)?), None)
        }
        ControllerSpec::Ossi => {
            let dist = scenario
                .distribution()
                .context("ossi needs an ergodic scenario")?;
            let policy = ossi_solve(dist, &scenario.topo, &scenario.mean_arrivals(), OSSI_TOL)?;
            let g = policy.optimal_cost;
            (Box::new(Ossi { policy }), Some(g))
        }
    })
}

fn execute_one(cfg: &RunConfig, mode: Mode, hash: &str, spec: &ControllerSpec, point: &SweepPoint, scenario: &Scenario) -> Finished {
    let lambda = scenario.mean_arrivals();
    let mut summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo::current(),
        config_hash: hash.to_string(),
        controller: String::new(),
        sweep_point: point.as_map(),
        seed: scenario.seed,
        horizon: scenario.horizon,
        lambda: lambda.clone(),
        aggregates: None,
        conservation_error: None,
        bounds: None,
        g_star: None,
        error: None,
        config: None,
    };
    let (mut controller, g_star) = match build_controller(spec, scenario) {
        Ok(c) => c,
        Err(e) => {
            summary.controller = format!("{spec:?}");
            summary.error = Some(format!("{e:#}"));
            return Finished { summary, series: None };
        }
    };
    summary.controller = controller.name();
    summary.g_star = g_star;
    if let (Mode::Compare, ControllerSpec::Qtf { v }, Some(dist)) = (mode, spec, scenario.distribution()) {
        match bound_report(dist, &scenario.topo, &lambda, *v, cfg.bound_epsilon, OSSI_TOL) {
            Ok(b) => summary.bounds = Some(b),
            Err(e) => log::warn!("{}: bounds unavailable: {e}", summary.controller),
        }
    }
    let opts = RunOptions {
        run_index: 0,
        stability_threshold: cfg.stability_threshold,
    };
    log::info!("running {} at [{point}]", summary.controller);
    match run_with(scenario, controller.as_mut(), &opts) {
        Ok(series) => {
            if let Err(e) = replay_check(&series) {
                summary.error = Some(format!("queue replay mismatch: {e}"));
            }
            summary.conservation_error = Some(conservation_error(&series));
            summary.aggregates = Some(series.aggregates.clone());
            Finished {
                summary,
                series: Some(series),
            }
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            Finished { summary, series: None }
        }
    }
}

fn write_run(dir: &Path, f: &Finished) -> Result<()> {
    if let Some(series) = &f.series {
        write_atomic(&dir.join("metrics.csv"), |w| Ok(write_metrics_csv(series, w)?))?;
    }
    write_json(&dir.join("summary.json"), &f.summary)
}

/// Runs every controller at every sweep point (in parallel, `jobs` workers)
/// and writes the results under `out`.
pub fn execute(cfg: &RunConfig, mode: Mode, out: &Path, jobs: Option<usize>) -> Result<Report, AppError> {
    let trace = match &cfg.scenario {
        ScenarioSpec::Trace(t) => Some((
            read_packet_log(&t.packets).map_err(|e| AppError::Config(e.into()))?,
            read_prices(&t.prices).map_err(|e| AppError::Config(e.into()))?,
        )),
        ScenarioSpec::Synthetic(_) => None,
    };
    let points = cfg.sweep_points();
    let scenarios: Vec<Scenario> = points
        .iter()
        .map(|p| scenario_for(&cfg.scenario_at(p), trace.as_ref()).with_context(|| format!("building the scenario at [{p}]")))
        .collect::<Result<_>>()
        .map_err(AppError::Config)?;
    let tasks: Vec<Task> = (0..points.len())
        .flat_map(|point| (0..cfg.controllers.len()).map(move |controller| Task { point, controller }))
        .collect();

    let hash = cfg.hash();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Runtime(e.into()))?;
    let finished: Vec<Finished> = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let spec = cfg.controller_at(t.controller, &points[t.point]);
                execute_one(cfg, mode, &hash, &spec, &points[t.point], &scenarios[t.point])
            })
            .collect()
    });

    let config_json = serde_json::to_value(cfg).map_err(|e| AppError::Runtime(e.into()))?;
    let failed = finished.iter().filter(|f| f.summary.error.is_some()).count();
    let mut entries = Vec::with_capacity(finished.len());
    let io = |e: anyhow::Error| AppError::Runtime(e);
    if mode == Mode::Run && finished.len() == 1 {
        let mut f = finished.into_iter().next().expect("one run");
        f.summary.config = Some(config_json);
        write_run(out, &f).map_err(io)?;
        entries.push(RunEntry::from_summary(".".into(), &f.summary));
    } else {
        for (k, f) in finished.iter().enumerate() {
            let name = format!("run-{k:03}-{}", slug(&f.summary.controller));
            write_run(&out.join(&name), f).map_err(io)?;
            entries.push(RunEntry::from_summary(name, &f.summary));
        }
        write_entries_csv(&out.join("comparison.csv"), &entries).map_err(io)?;
        let index = IndexSummary {
            schema_version: SCHEMA_VERSION,
            tool: ToolInfo::current(),
            config_hash: hash,
            config: config_json,
            runs: entries.clone(),
        };
        write_json(&out.join("summary.json"), &index).map_err(io)?;
    }
    Ok(Report { entries, failed })
}

/// Default output directory: `results/<first 12 hex digits of the hash>`.
pub fn default_out(cfg: &RunConfig) -> PathBuf {
    cfg.out
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(&cfg.hash()[..12]))
}

/// Plain-text table of the entries for the terminal.
pub fn render_table(entries: &[RunEntry]) -> String {
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    let mut out = format!(
        "{:<22} {:<20} {:>14} {:>10} {:>9} {:>14} {:>14}\n",
        "run", "sweep", "avg_cost", "delay", "unstable", "queue_bound", "cost_bound"
    );
    for e in entries {
        let status = match (&e.error, e.unstable) {
            (Some(_), _) => "error".to_string(),
            (None, Some(u)) => u.to_string(),
            (None, None) => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<22} {:<20} {:>14} {:>10} {:>9} {:>14} {:>14}\n",
            format!("{} {}", e.run, e.controller).chars().take(22).collect::<String>(),
            e.sweep_point,
            fmt(e.avg_cost),
            fmt(e.delay),
            status,
            fmt(e.queue_bound),
            fmt(e.cost_bound)
        ));
        if let Some(err) = &e.error {
            out.push_str(&format!("    error: {err}\n"));
        }
    }
    out
}
