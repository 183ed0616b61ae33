//! Scenario grids: policy x client count x capacity, averaged over seeds.
//!
//! A spec is a `;`-separated list of `key=value` pairs:
//!
//! * `clients=2..15` or `clients=2,4,8` (clients join `stagger` seconds apart)
//! * `capacity=2000..10000:1000`, `capacity=3000,6000` or `capacity=per-client:1000`
//! * `policies=tfdash,rate,aimd,festive-like`
//! * `seeds=0..9`
//! * `stagger=5`, `horizon=300`
//!
//! Keys that are left out keep the base scenario's value.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::adapter::PolicyKind;
use crate::config::{CapacityConfig, ClientConfig, ParamOverrides, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics::MetricsOptions;
use crate::runner::{simulate, RunOutput};

pub const DEFAULT_STAGGER_SECS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub enum CapacityAxis {
    Fixed(Vec<f64>),
    /// Capacity scales with the client count.
    PerClient(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub clients: Option<Vec<u32>>,
    pub capacity: Option<CapacityAxis>,
    pub policies: Option<Vec<PolicyKind>>,
    pub seeds: Option<Vec<u64>>,
    pub stagger_secs: f64,
    pub horizon: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            clients: None,
            capacity: None,
            policies: None,
            seeds: None,
            stagger_secs: DEFAULT_STAGGER_SECS,
            horizon: None,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::SweepSpec(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| bad(format!("{key}: cannot parse {s:?}")))
}

/// `a..b` (inclusive), or single values, comma separated.
fn parse_int_list<T>(key: &str, value: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr + Copy + PartialOrd + Into<u64> + TryFrom<u64>,
{
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = item.split_once("..") {
            let (a, b): (T, T) = (parse_num(key, a)?, parse_num(key, b)?);
            if a > b {
                return Err(bad(format!("{key}: empty range {item:?}")));
            }
            for x in a.into()..=b.into() {
                out.push(T::try_from(x).map_err(|_| bad(format!("{key}: {x} out of range")))?);
            }
        } else {
            out.push(parse_num(key, item)?);
        }
    }
    if out.is_empty() {
        return Err(bad(format!("{key}: no values")));
    }
    Ok(out)
}

fn parse_capacity(value: &str) -> Result<CapacityAxis> {
    let positive = |x: f64| {
        if x.is_finite() && x > 0.0 {
            Ok(x)
        } else {
            Err(bad(format!("capacity: {x} is not positive")))
        }
    };
    if let Some(per) = value.trim().strip_prefix("per-client:") {
        return Ok(CapacityAxis::PerClient(positive(parse_num("capacity", per)?)?));
    }
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, rest)) = item.split_once("..") {
            let (b, step) = rest
                .split_once(':')
                .ok_or_else(|| bad(format!("capacity: range {item:?} needs a step, as in 2000..10000:1000")))?;
            let a = positive(parse_num("capacity", a)?)?;
            let b = positive(parse_num("capacity", b)?)?;
            let step = positive(parse_num("capacity", step)?)?;
            let n = ((b - a) / step + 1e-9).floor();
            if n < 0.0 {
                return Err(bad(format!("capacity: empty range {item:?}")));
            }
            for i in 0..=(n as u64) {
                out.push(a + i as f64 * step);
            }
        } else {
            out.push(positive(parse_num("capacity", item)?)?);
        }
    }
    if out.is_empty() {
        return Err(bad("capacity: no values"));
    }
    Ok(CapacityAxis::Fixed(out))
}

impl SweepSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let mut out = SweepSpec::default();
        for pair in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, found {pair:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "clients" => {
                    let v: Vec<u32> = parse_int_list(key, value)?;
                    if v.contains(&0) {
                        return Err(bad("clients: counts must be >= 1"));
                    }
                    out.clients = Some(v);
                }
                "capacity" => out.capacity = Some(parse_capacity(value)?),
                "policies" => {
                    let v = value
                        .split(',')
                        .map(|p| p.trim().parse::<PolicyKind>().map_err(bad))
                        .collect::<Result<Vec<_>>>()?;
                    out.policies = Some(v);
                }
                "seeds" => out.seeds = Some(parse_int_list(key, value)?),
                "stagger" => {
                    let s: f64 = parse_num(key, value)?;
                    if !(s.is_finite() && s >= 0.0) {
                        return Err(bad("stagger: must be >= 0"));
                    }
                    out.stagger_secs = s;
                }
                "horizon" => {
                    let h: f64 = parse_num(key, value)?;
                    if !(h.is_finite() && h > 0.0) {
                        return Err(bad("horizon: must be > 0"));
                    }
                    out.horizon = Some(h);
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(out)
    }

    /// A spec with no keys runs the base scenario unchanged.
    pub fn is_empty(&self) -> bool {
        self.clients.is_none()
            && self.capacity.is_none()
            && self.policies.is_none()
            && self.seeds.is_none()
            && self.horizon.is_none()
    }
}

/// One grid point before seeds are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub policy: Option<PolicyKind>,
    pub clients: Option<u32>,
    pub capacity_kbps: Option<f64>,
}

impl SweepSpec {
    pub fn cells(&self) -> Vec<SweepCell> {
        let policies: Vec<Option<PolicyKind>> = match &self.policies {
            Some(p) => p.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let counts: Vec<Option<u32>> = match &self.clients {
            Some(c) => c.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut cells = Vec::new();
        for &policy in &policies {
            for &clients in &counts {
                let caps: Vec<Option<f64>> = match &self.capacity {
                    None => vec![None],
                    Some(CapacityAxis::Fixed(v)) => v.iter().copied().map(Some).collect(),
                    Some(CapacityAxis::PerClient(x)) => vec![clients.map(|n| x * n as f64)],
                };
                for capacity_kbps in caps {
                    cells.push(SweepCell {
                        policy,
                        clients,
                        capacity_kbps,
                    });
                }
            }
        }
        cells
    }

    /// The base configuration specialised to one cell and seed.
    pub fn cell_config(&self, base: &ScenarioConfig, cell: &SweepCell, seed: u64) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.seed = seed;
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        let base_policy = base.clients.first().map_or(PolicyKind::Tfdash, |c| c.policy);
        if let Some(n) = cell.clients {
            cfg.clients = (0..n)
                .map(|i| ClientConfig {
                    id: i + 1,
                    join: f64::from(i) * self.stagger_secs,
                    policy: cell.policy.unwrap_or(base_policy),
                    segments: None,
                    seed: None,
                    params: ParamOverrides::default(),
                })
                .collect();
        } else if let Some(p) = cell.policy {
            for c in &mut cfg.clients {
                c.policy = p;
            }
        }
        let capacity = cell.capacity_kbps.or(match &self.capacity {
            Some(CapacityAxis::PerClient(x)) => Some(x * cfg.clients.len() as f64),
            _ => None,
        });
        if let Some(c) = capacity {
            cfg.capacity = CapacityConfig {
                breakpoints: Some(vec![[0.0, c]]),
                trace: None,
                end: None,
            };
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub policy: String,
    pub approximation: bool,
    pub clients: usize,
    /// Empty when the capacity varies over time.
    pub capacity_kbps: Option<f64>,
    pub runs: usize,
    pub mean_inefficiency: Option<f64>,
    pub mean_instability: Option<f64>,
    pub mean_unfairness: Option<f64>,
    pub mean_bitrate_kbps: Option<f64>,
    pub underflow_events: u64,
    pub overflow_events: u64,
}

pub const COMPARISON_HEADER: [&str; 11] = [
    "policy",
    "approximation",
    "clients",
    "capacity_kbps",
    "runs",
    "mean_inefficiency",
    "mean_instability",
    "mean_unfairness",
    "mean_bitrate_kbps",
    "underflow_events",
    "overflow_events",
];

fn mean_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn policy_label(cfg: &ScenarioConfig) -> (String, bool) {
    let mut kinds: Vec<PolicyKind> = cfg.clients.iter().map(|c| c.policy).collect();
    kinds.sort();
    kinds.dedup();
    let name = kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join("+");
    (name, kinds.iter().any(|k| k.is_approximation()))
}

fn aggregate(cfg: &ScenarioConfig, cell: &SweepCell, runs: &[RunOutput]) -> ComparisonRow {
    let (policy, approximation) = policy_label(cfg);
    ComparisonRow {
        policy,
        approximation,
        clients: cfg.clients.len(),
        capacity_kbps: cell.capacity_kbps.or(match &cfg.capacity.breakpoints {
            Some(p) if p.len() == 1 && cfg.capacity.trace.is_none() => Some(p[0][1]),
            _ => None,
        }),
        runs: runs.len(),
        mean_inefficiency: mean_of(runs.iter().map(|r| r.report.mean_inefficiency)),
        mean_instability: mean_of(runs.iter().map(|r| r.report.mean_instability)),
        mean_unfairness: mean_of(runs.iter().map(|r| r.report.mean_unfairness)),
        mean_bitrate_kbps: mean_of(
            runs.iter()
                .map(|r| mean_of(r.report.clients.iter().map(|c| c.mean_bitrate_kbps))),
        ),
        underflow_events: runs.iter().map(|r| u64::from(r.report.underflow_events)).sum(),
        overflow_events: runs.iter().map(|r| r.report.overflow_events as u64).sum(),
    }
}

/// Runs every cell for every seed, at most `jobs` at a time (0 = one per
/// core). Rows come out in grid order regardless of scheduling.
pub fn run_sweep(
    base: &ScenarioConfig,
    base_dir: &Path,
    spec: &SweepSpec,
    options: MetricsOptions,
    jobs: usize,
) -> Result<Vec<ComparisonRow>> {
    let seeds = spec.seeds.clone().unwrap_or_else(|| vec![base.seed]);
    let cells = spec.cells();
    let mut work = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        for &seed in &seeds {
            let cfg = spec.cell_config(base, cell, seed);
            let scenario = cfg.to_scenario(base_dir)?;
            work.push((ci, cfg, scenario));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::validation("jobs", e.to_string()))?;
    let outputs: Vec<RunOutput> = pool.install(|| {
        work.par_iter()
            .map(|(_, cfg, scenario)| simulate(cfg.display_name(), scenario, options))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        let idx: Vec<usize> = (0..work.len()).filter(|&i| work[i].0 == ci).collect();
        let runs: Vec<RunOutput> = idx.iter().map(|&i| outputs[i].clone()).collect();
        rows.push(aggregate(&work[idx[0]].1, cell, &runs));
    }
    Ok(rows)
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> csv::Result<()> {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARISON_HEADER)?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            u8::from(r.approximation).to_string(),
            r.clients.to_string(),
            opt(r.capacity_kbps),
            r.runs.to_string(),
            opt(r.mean_inefficiency),
            opt(r.mean_instability),
            opt(r.mean_unfairness),
            opt(r.mean_bitrate_kbps),
            r.underflow_events.to_string(),
            r.overflow_events.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
