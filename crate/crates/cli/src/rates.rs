use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use trough::sim::{coefficient_of_variation, windowed_rates, zero_fraction};

use crate::output::{write_atomic, IndexSummary, RunSummary};

pub const DEFAULT_WINDOWS: [usize; 2] = [1, 1000];

/// Burstiness statistics of one run at one window length.
#[derive(Debug, Clone, PartialEq)]
pub struct RateStats {
    pub run: PathBuf,
    pub controller: String,
    pub window: usize,
    pub windows: usize,
    pub zero_fraction: f64,
    pub cv: f64,
}

/// Run directories below `dir`: the directory itself for a single run,
/// or every run listed by an experiment index.
pub fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("runs").is_some() {
        let index: IndexSummary = serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))?;
        Ok(index.runs.iter().filter(|r| r.error.is_none()).map(|r| dir.join(&r.run)).collect())
    } else {
        Ok(vec![dir.to_path_buf()])
    }
}

/// The `served_j` columns of a metrics file, `[slot][job]`.
pub fn read_served(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let cols: Vec<usize> = rdr
        .headers()?
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("served_"))
        .map(|(k, _)| k)
        .collect();
    if cols.is_empty() {
        bail!("{} has no served_ columns", path.display());
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = cols
            .iter()
            .map(|&k| rec[k].parse::<f64>().with_context(|| format!("{}: bad value {:?}", path.display(), &rec[k])))
            .collect::<Result<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

/// Writes `rates_w{N}.csv` in each run directory and returns the
/// statistics. Default windows longer than a run are skipped with a
/// warning; explicitly requested ones are an error.
pub fn analyze(dir: &Path, windows: &[usize], explicit: bool) -> Result<Vec<RateStats>> {
    let mut stats = Vec::new();
    for run in run_dirs(dir)? {
        let summary_path = run.join("summary.json");
        let text = std::fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?;
        let summary: RunSummary =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", summary_path.display()))?;
        let served = read_served(&run.join("metrics.csv"))?;
        if served.first().map(|r| r.len()) != Some(summary.lambda.len()) {
            bail!("{}: metrics and summary disagree on the number of classes", run.display());
        }
        for &w in windows {
            if w > served.len() && !explicit {
                log::warn!("{}: skipping window {w}, longer than the {} recorded slots", run.display(), served.len());
                continue;
            }
            let rates = windowed_rates(&served, &summary.lambda, w).map_err(anyhow::Error::msg)?;
            write_atomic(&run.join(format!("rates_w{w}.csv")), |out| {
                let mut csv = csv::Writer::from_writer(out);
                let mut header = vec!["window".to_string(), "start_slot".to_string()];
                header.extend((1..=summary.lambda.len()).map(|j| format!("rate_{j}")));
                csv.write_record(&header)?;
                for (k, row) in rates.iter().enumerate() {
                    let mut rec = vec![k.to_string(), (k * w + 1).to_string()];
                    rec.extend(row.iter().map(|x| x.to_string()));
                    csv.write_record(&rec)?;
                }
                csv.flush()?;
                Ok(())
            })?;
            stats.push(RateStats {
                run: run.clone(),
                controller: summary.controller.clone(),
                window: w,
                windows: rates.len(),
                zero_fraction: zero_fraction(&rates),
                cv: coefficient_of_variation(&rates),
            });
        }
    }
    Ok(stats)
}
