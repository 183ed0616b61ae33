//! Efficiency, stability and fairness of a finished session.
//!
//! All three are sampled at segment-completion epochs, where every active
//! client contributes its most recent bitrate. Scalar figures are
//! time-weighted means: an epoch counts for the time until the next one.

use std::io::Write;

use crate::adapter::PolicyKind;
use crate::error::{Error, Result};
use crate::netsim::SessionLog;

/// Default switch-history depth of [`instability`].
pub const DEFAULT_D0: usize = 10;

/// `|1 - sum(v) / b|`: zero when the clients together request exactly the
/// capacity.
pub fn inefficiency(bitrates: &[f64], capacity_kbps: f64) -> Result<f64> {
    Ok((1.0 - aggregate_ratio(bitrates, capacity_kbps)?).abs())
}

/// `|sum(v) / b|`, the variant without the offset.
pub fn inefficiency_strict(bitrates: &[f64], capacity_kbps: f64) -> Result<f64> {
    Ok(aggregate_ratio(bitrates, capacity_kbps)?.abs())
}

fn aggregate_ratio(bitrates: &[f64], capacity_kbps: f64) -> Result<f64> {
    if !(capacity_kbps > 0.0) {
        return Err(Error::UndefinedMetric("inefficiency needs positive capacity"));
    }
    Ok(bitrates.iter().sum::<f64>() / capacity_kbps)
}

/// Weighted recent switching of one client, `history` oldest first.
///
/// Only the last `d0 + 1` samples matter; shorter histories are evaluated
/// over what exists. Switch `d` steps back weighs `d0 - d`.
pub fn instability(history: &[f64], d0: usize) -> Result<f64> {
    instability_weighted(history, d0, |d| (d0 - d) as f64)
}

/// Same sum with weight `k - d`, `k` being the index of the newest sample
/// in `history` (which must then start at segment 0).
pub fn instability_strict(history: &[f64], d0: usize) -> Result<f64> {
    let k = history.len().saturating_sub(1);
    instability_weighted(history, d0, |d| k as f64 - d as f64)
}

fn instability_weighted(history: &[f64], d0: usize, w: impl Fn(usize) -> f64) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::UndefinedMetric("instability needs at least two samples"));
    }
    if d0 == 0 {
        return Err(Error::UndefinedMetric("instability needs d0 >= 1"));
    }
    let k = history.len() - 1;
    let depth = d0.min(k);
    let v = |back: usize| history[k - back];
    let mut num = 0.0;
    for d in 0..depth {
        num += (v(d) - v(d + 1)).abs() * w(d);
    }
    let mut den = 0.0;
    for d in 1..=depth {
        den += v(d) * w(d);
    }
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric("instability weights vanish over the window"));
    }
    Ok(num / den)
}

/// `(sum x)^2 / (n * sum x^2)`, in `[1/n, 1]`.
pub fn jain_index(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("jain index of an empty set"));
    }
    if values.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::validation("values", "jain index needs finite nonnegative values"));
    }
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return Err(Error::UndefinedMetric("jain index of all-zero values"));
    }
    // exact for equal shares; the quotient can round just below 1
    if values.iter().all(|x| *x == values[0]) {
        return Ok(1.0);
    }
    Ok((sum * sum / (values.len() as f64 * sq)).min(1.0))
}

/// `sqrt(1 - jain)`.
pub fn unfairness(values: &[f64]) -> Result<f64> {
    Ok((1.0 - jain_index(values)?).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    pub d0: usize,
    /// Use the offset-free inefficiency and the `k - d` instability weight.
    pub strict_formulas: bool,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            d0: DEFAULT_D0,
            strict_formulas: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSample {
    pub time: f64,
    pub capacity_kbps: f64,
    pub active_clients: usize,
    pub aggregate_kbps: f64,
    pub inefficiency: Option<f64>,
    /// Mean over active clients with at least two segments.
    pub instability: Option<f64>,
    /// Defined once two or more clients are active.
    pub unfairness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientMetrics {
    pub client_id: u32,
    pub policy: PolicyKind,
    pub segments: usize,
    pub mean_bitrate_kbps: Option<f64>,
    pub switches: usize,
    pub mean_instability: Option<f64>,
    pub underflow_events: u32,
    pub stall_secs: f64,
    pub overflow_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub options: MetricsOptions,
    pub epochs: Vec<EpochSample>,
    pub clients: Vec<ClientMetrics>,
    pub mean_inefficiency: Option<f64>,
    pub mean_instability: Option<f64>,
    pub mean_unfairness: Option<f64>,
    pub underflow_events: u32,
    pub overflow_events: usize,
}

pub const EPOCHS_HEADER: [&str; 7] = [
    "time_s",
    "capacity_kbps",
    "active_clients",
    "aggregate_kbps",
    "inefficiency",
    "instability",
    "unfairness",
];

#[derive(Default)]
struct WeightedMean {
    sum: f64,
    weight: f64,
}

impl WeightedMean {
    fn add(&mut self, x: Option<f64>, w: f64) {
        if let Some(x) = x {
            self.sum += x * w;
            self.weight += w;
        }
    }

    fn get(&self) -> Option<f64> {
        (self.weight > 0.0).then(|| self.sum / self.weight)
    }
}

pub fn summarize(log: &SessionLog, options: MetricsOptions) -> Result<MetricsReport> {
    let mut epochs: Vec<f64> = log.records().map(|r| r.t_end).collect();
    if epochs.is_empty() {
        return Err(Error::UndefinedMetric("session log has no completed segments"));
    }
    epochs.sort_by(f64::total_cmp);
    epochs.dedup();

    let histories: Vec<Vec<f64>> = log
        .clients
        .iter()
        .map(|c| c.records.iter().map(|r| r.bitrate_kbps).collect())
        .collect();
    let client_instability = |ci: usize, upto: usize| -> Option<f64> {
        let h = &histories[ci][..upto];
        if options.strict_formulas {
            instability_strict(h, options.d0).ok()
        } else {
            instability(h, options.d0).ok()
        }
    };

    let mut samples = Vec::with_capacity(epochs.len());
    let mut ineff = WeightedMean::default();
    let mut instab = WeightedMean::default();
    let mut unfair = WeightedMean::default();
    let mut per_client: Vec<WeightedMean> = log.clients.iter().map(|_| WeightedMean::default()).collect();
    // number of records of each client completed by the current epoch
    let mut done = vec![0usize; log.clients.len()];

    for (i, &t) in epochs.iter().enumerate() {
        let weight = epochs.get(i + 1).copied().unwrap_or(log.end_time) - t;
        let capacity = log.schedule.capacity_at(t);
        let mut rates = Vec::new();
        let mut instabilities = Vec::new();
        for (ci, c) in log.clients.iter().enumerate() {
            while done[ci] < c.records.len() && c.records[done[ci]].t_end <= t {
                done[ci] += 1;
            }
            if done[ci] == 0 || c.finish_time.is_some_and(|f| f <= t) {
                continue;
            }
            rates.push(c.records[done[ci] - 1].bitrate_kbps);
            let s = client_instability(ci, done[ci]);
            per_client[ci].add(s, weight);
            if let Some(s) = s {
                instabilities.push(s);
            }
        }
        let inefficiency_t = if rates.is_empty() {
            None
        } else if options.strict_formulas {
            inefficiency_strict(&rates, capacity).ok()
        } else {
            inefficiency(&rates, capacity).ok()
        };
        let instability_t = (!instabilities.is_empty())
            .then(|| instabilities.iter().sum::<f64>() / instabilities.len() as f64);
        let unfairness_t = if rates.len() >= 2 { unfairness(&rates).ok() } else { None };
        ineff.add(inefficiency_t, weight);
        instab.add(instability_t, weight);
        unfair.add(unfairness_t, weight);
        samples.push(EpochSample {
            time: t,
            capacity_kbps: capacity,
            active_clients: rates.len(),
            aggregate_kbps: rates.iter().sum(),
            inefficiency: inefficiency_t,
            instability: instability_t,
            unfairness: unfairness_t,
        });
    }

    let clients = log
        .clients
        .iter()
        .zip(&per_client)
        .zip(&histories)
        .map(|((c, inst), h)| ClientMetrics {
            client_id: c.client_id,
            policy: c.policy,
            segments: h.len(),
            mean_bitrate_kbps: (!h.is_empty()).then(|| h.iter().sum::<f64>() / h.len() as f64),
            switches: h.windows(2).filter(|w| w[0] != w[1]).count(),
            mean_instability: inst.get(),
            underflow_events: c.stall_events,
            stall_secs: c.stall_secs,
            overflow_events: c.overflow_events(),
        })
        .collect();

    Ok(MetricsReport {
        options,
        epochs: samples,
        clients,
        mean_inefficiency: ineff.get(),
        mean_instability: instab.get(),
        mean_unfairness: unfair.get(),
        underflow_events: log.underflow_events(),
        overflow_events: log.overflow_events(),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl MetricsReport {
    pub fn write_epochs_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(EPOCHS_HEADER)?;
        for e in &self.epochs {
            w.write_record([
                e.time.to_string(),
                e.capacity_kbps.to_string(),
                e.active_clients.to_string(),
                e.aggregate_kbps.to_string(),
                opt(e.inefficiency),
                opt(e.instability),
                opt(e.unfairness),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Stable `key = value` pairs; undefined figures are left empty.
    pub fn summary_pairs(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("strict_formulas".to_string(), self.options.strict_formulas.to_string()),
            ("d0".to_string(), self.options.d0.to_string()),
            ("epochs".to_string(), self.epochs.len().to_string()),
            ("mean_inefficiency".to_string(), opt(self.mean_inefficiency)),
            ("mean_instability".to_string(), opt(self.mean_instability)),
            ("mean_unfairness".to_string(), opt(self.mean_unfairness)),
            ("underflow_events".to_string(), self.underflow_events.to_string()),
            ("overflow_events".to_string(), self.overflow_events.to_string()),
        ];
        for c in &self.clients {
            let p = format!("client.{}", c.client_id);
            kv.push((format!("{p}.policy"), c.policy.name().to_string()));
            kv.push((format!("{p}.approximation"), c.policy.is_approximation().to_string()));
            kv.push((format!("{p}.segments"), c.segments.to_string()));
            kv.push((format!("{p}.mean_bitrate_kbps"), opt(c.mean_bitrate_kbps)));
            kv.push((format!("{p}.switches"), c.switches.to_string()));
            kv.push((format!("{p}.mean_instability"), opt(c.mean_instability)));
            kv.push((format!("{p}.underflow_events"), c.underflow_events.to_string()));
            kv.push((format!("{p}.stall_s"), c.stall_secs.to_string()));
            kv.push((format!("{p}.overflow_events"), c.overflow_events.to_string()));
        }
        kv
    }
}
