use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use trough::controllers::BoundReport;
use trough::sim::Aggregates;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub cli_version: String,
    pub core_version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        Self {
            name: "trough".into(),
            cli_version: env!("CARGO_PKG_VERSION").into(),
            core_version: trough::VERSION.into(),
        }
    }
}

/// `summary.json` of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub config_hash: String,
    pub controller: String,
    pub sweep_point: BTreeMap<String, f64>,
    pub seed: u64,
    pub horizon: usize,
    /// Mean arrival rate of each class used for rate normalization.
    pub lambda: Vec<f64>,
    pub aggregates: Option<Aggregates>,
    pub conservation_error: Option<f64>,
    pub bounds: Option<BoundReport>,
    /// Optimal ergodic cost, when the controller computed it.
    pub g_star: Option<f64>,
    pub error: Option<String>,
    /// Effective configuration; present only when the run is the whole
    /// experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// One row of `comparison.csv` and of the index's run list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run: String,
    pub sweep_point: String,
    pub controller: String,
    pub avg_cost: Option<f64>,
    pub avg_energy: Option<f64>,
    pub avg_shift: Option<f64>,
    pub delay: Option<f64>,
    pub avg_total_queue: Option<f64>,
    pub unstable: Option<bool>,
    pub queue_bound: Option<f64>,
    pub cost_bound: Option<f64>,
    pub g_star: Option<f64>,
    pub error: Option<String>,
}

impl RunEntry {
    pub fn from_summary(run: String, s: &RunSummary) -> Self {
        let a = s.aggregates.as_ref();
        let point: Vec<String> = s.sweep_point.iter().map(|(k, v)| format!("{k}={v}")).collect();
        Self {
            run,
            sweep_point: point.join(";"),
            controller: s.controller.clone(),
            avg_cost: a.map(|a| a.avg_cost),
            avg_energy: a.map(|a| a.avg_energy),
            avg_shift: a.map(|a| a.avg_shift),
            delay: a.and_then(|a| a.overall_delay),
            avg_total_queue: a.map(|a| a.avg_total_queue),
            unstable: a.map(|a| a.unstable),
            queue_bound: s.bounds.map(|b| b.queue_bound),
            cost_bound: s.bounds.map(|b| b.cost_bound),
            g_star: s.g_star,
            error: s.error.clone(),
        }
    }
}

/// `summary.json` of a multi-run experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub runs: Vec<RunEntry>,
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        f(&mut w)?;
        w.flush()?;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn write_entries_csv(path: &Path, entries: &[RunEntry]) -> Result<()> {
    write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for e in entries {
            csv.serialize(e)?;
        }
        csv.flush()?;
        Ok(())
    })
}

/// Lowercase alphanumerics with single dashes, for directory names.
pub fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() || c == '.' {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_path_safe() {
        assert_eq!(slug("qtf(v=1000)"), "qtf-v-1000");
        assert_eq!(slug("sstf"), "sstf");
        assert_eq!(slug("qtf(v=0.5)"), "qtf-v-0.5");
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.txt");
        write_atomic(&p, |w| Ok(w.write_all(b"one")?)).unwrap();
        write_atomic(&p, |w| Ok(w.write_all(b"two")?)).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
        let failed = write_atomic(&p, |_| anyhow::bail!("boom"));
        assert!(failed.is_err());
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
    }
}
