//! Cross-seed summary of a directory of runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::protocol::EvalReport;
use crate::error::{Error, Result};
use crate::trainer::{RunMetrics, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    /// `env/policy/noise_mode/T`.
    pub group: String,
    pub seeds: Vec<u64>,
    pub report: EvalReport,
}

fn group_key(c: &TrainConfig) -> String {
    let policy = match c.policy {
        crate::trainer::PolicyKind::Diffusion => "diffusion",
        crate::trainer::PolicyKind::Gaussian => "gaussian",
    };
    format!("{}/{policy}/{}/T{}", c.env, c.noise_mode.as_str(), c.diffusion_steps)
}

/// Every subdirectory holding `config.txt` and `metrics.csv` counts as a
/// run. Runs are grouped by configuration; each group is scored with the
/// final-window protocol.
pub fn report_runs(dir: &Path) -> Result<Vec<RunSummary>> {
    let mut groups: BTreeMap<String, (Vec<u64>, Vec<Vec<(u64, f64)>>, u64)> = BTreeMap::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("config.txt").is_file() && p.join("metrics.csv").is_file())
        .collect();
    entries.sort();
    for run in entries {
        let config = TrainConfig::from_file(&run.join("config.txt"))?;
        let series: Vec<(u64, f64)> = RunMetrics::read_csv(&run.join("metrics.csv"))?
            .into_iter()
            .filter(|r| r.metric == "eval_return")
            .map(|r| (r.iteration, r.value))
            .collect();
        let g = groups.entry(group_key(&config)).or_insert((Vec::new(), Vec::new(), config.total_steps));
        if g.2 != config.total_steps {
            return Err(Error::config(format!("{}: run length differs within its group", run.display())));
        }
        g.0.push(config.seed);
        g.1.push(series);
    }
    groups
        .into_iter()
        .map(|(group, (seeds, series, total))| {
            Ok(RunSummary {
                group,
                seeds,
                report: EvalReport::from_series(series, total)?,
            })
        })
        .collect()
}

pub fn format_table(rows: &[RunSummary]) -> String {
    let mut out = String::from("group\tseeds\tmean\tstd\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.3}\t{:.3}",
            r.group,
            r.seeds.len(),
            r.report.mean,
            r.report.std
        );
    }
    out
}
