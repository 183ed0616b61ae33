//! One simulation plus its metrics, and the files written for it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{summarize, MetricsOptions, MetricsReport};
use crate::netsim::{run_scenario, Scenario, SessionLog};

pub const SESSIONS_FILE: &str = "sessions.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub name: String,
    pub seed: u64,
    pub log: SessionLog,
    pub report: MetricsReport,
}

pub fn simulate(name: &str, scenario: &Scenario, options: MetricsOptions) -> Result<RunOutput> {
    let log = run_scenario(scenario)?;
    let report = summarize(&log, options)?;
    Ok(RunOutput {
        name: name.to_string(),
        seed: scenario.seed,
        log,
        report,
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

impl RunOutput {
    pub fn sessions_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.log
            .write_sessions_csv(&mut buf)
            .expect("writing to memory cannot fail");
        buf
    }

    pub fn metrics_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.report
            .write_epochs_csv(&mut buf)
            .expect("writing to memory cannot fail");
        buf
    }

    pub fn summary_pairs(&self) -> Vec<(String, String)> {
        let log = &self.log;
        let mut kv = vec![
            ("scenario".to_string(), self.name.clone()),
            ("seed".to_string(), self.seed.to_string()),
            ("horizon_s".to_string(), log.horizon.to_string()),
            ("end_time_s".to_string(), log.end_time.to_string()),
            ("clients".to_string(), log.clients.len().to_string()),
            ("segments".to_string(), log.records().count().to_string()),
            ("delivered_kb".to_string(), log.delivered_kb.to_string()),
            ("conservation_error".to_string(), log.conservation_error().to_string()),
        ];
        kv.extend(self.report.summary_pairs());
        kv
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.summary_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Human-readable per-client table.
    pub fn table(&self) -> String {
        let r = &self.report;
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        let mut s = String::new();
        let _ = writeln!(s, "{} (seed {})", self.name, self.seed);
        let _ = writeln!(
            s,
            "{:>6}  {:<13} {:>8} {:>12} {:>8} {:>11} {:>7} {:>8}",
            "client", "policy", "segments", "mean_kbps", "switches", "instability", "stalls", "overflow"
        );
        for c in &r.clients {
            let policy = if c.policy.is_approximation() {
                format!("{}*", c.policy)
            } else {
                c.policy.to_string()
            };
            let _ = writeln!(
                s,
                "{:>6}  {:<13} {:>8} {:>12} {:>8} {:>11} {:>7} {:>8}",
                c.client_id,
                policy,
                c.segments,
                c.mean_bitrate_kbps.map_or("-".to_string(), |v| format!("{v:.1}")),
                c.switches,
                f(c.mean_instability),
                c.underflow_events,
                c.overflow_events,
            );
        }
        let _ = writeln!(
            s,
            "inefficiency {}  instability {}  unfairness {}",
            f(r.mean_inefficiency),
            f(r.mean_instability),
            f(r.mean_unfairness)
        );
        if r.clients.iter().any(|c| c.policy.is_approximation()) {
            let _ = writeln!(s, "* simplified baseline (approximation)");
        }
        s
    }

    /// Writes sessions.csv, metrics.csv and summary.txt into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let sessions = dir.join(SESSIONS_FILE);
        let file = fs::File::create(&sessions).map_err(|e| Error::io(&sessions, e))?;
        self.log
            .write_sessions_csv(file)
            .map_err(|e| csv_error(&sessions, e))?;
        let metrics = dir.join(METRICS_FILE);
        let file = fs::File::create(&metrics).map_err(|e| Error::io(&metrics, e))?;
        self.report
            .write_epochs_csv(file)
            .map_err(|e| csv_error(&metrics, e))?;
        let summary = dir.join(SUMMARY_FILE);
        fs::write(&summary, self.summary_text()).map_err(|e| Error::io(&summary, e))?;
        Ok(())
    }
}
