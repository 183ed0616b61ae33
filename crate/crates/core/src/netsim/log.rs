use std::io::Write;

use super::schedule::CapacitySchedule;
use crate::adapter::PolicyKind;

/// One downloaded segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub client_id: u32,
    pub index: u64,
    pub bitrate_kbps: f64,
    /// Idle time inserted before the request, seconds.
    pub sleep_secs: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub buffer_after_secs: f64,
    pub measured_kbps: f64,
    pub amended_kbps: f64,
    pub probed_kbps: f64,
    /// Playback froze at some point since the previous completion.
    pub underflow: bool,
    /// The buffer had to be clamped at its cap on arrival.
    pub overflow: bool,
}

/// A policy decision as issued, whether or not its segment finished
/// before the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionRecord {
    pub time: f64,
    pub bitrate_kbps: f64,
    pub sleep_secs: f64,
    pub buffer_secs: f64,
}

/// A download still in progress when the run stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InFlight {
    pub index: u64,
    pub bitrate_kbps: f64,
    pub t_start: f64,
    pub delivered_kb: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientLog {
    pub client_id: u32,
    pub policy: PolicyKind,
    pub join_time: f64,
    pub finish_time: Option<f64>,
    pub records: Vec<SegmentRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub in_flight: Option<InFlight>,
    pub stall_events: u32,
    pub stall_secs: f64,
}

impl ClientLog {
    pub fn overflow_events(&self) -> usize {
        self.records.iter().filter(|r| r.overflow).count()
    }

    /// Last instant the client was in the system.
    pub fn active_until(&self, run_end: f64) -> f64 {
        self.finish_time.unwrap_or(run_end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub segment_secs: f64,
    pub horizon: f64,
    /// Time the event loop stopped: the horizon, or earlier if every client
    /// finished.
    pub end_time: f64,
    pub schedule: CapacitySchedule,
    pub clients: Vec<ClientLog>,
    /// Kilobits delivered to all flows.
    pub delivered_kb: f64,
    /// `∫ c(t) dt` over the instants with at least one active flow.
    pub busy_capacity_kb: f64,
}

pub const SESSIONS_HEADER: [&str; 14] = [
    "client_id",
    "policy",
    "segment",
    "bitrate_kbps",
    "sleep_s",
    "t_start_s",
    "t_end_s",
    "buffer_after_s",
    "measured_kbps",
    "amended_kbps",
    "probed_kbps",
    "underflow",
    "overflow",
    "approximation",
];

impl SessionLog {
    pub fn client(&self, id: u32) -> Option<&ClientLog> {
        self.clients.iter().find(|c| c.client_id == id)
    }

    pub fn records(&self) -> impl Iterator<Item = &SegmentRecord> {
        self.clients.iter().flat_map(|c| c.records.iter())
    }

    pub fn underflow_events(&self) -> u32 {
        self.clients.iter().map(|c| c.stall_events).sum()
    }

    pub fn overflow_events(&self) -> usize {
        self.clients.iter().map(|c| c.overflow_events()).sum()
    }

    /// `|delivered - busy capacity| / busy capacity`.
    pub fn conservation_error(&self) -> f64 {
        if self.busy_capacity_kb == 0.0 {
            return 0.0;
        }
        (self.delivered_kb - self.busy_capacity_kb).abs() / self.busy_capacity_kb
    }

    /// One row per segment, clients in id order, see [`SESSIONS_HEADER`].
    pub fn write_sessions_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SESSIONS_HEADER)?;
        for c in &self.clients {
            for r in &c.records {
                w.write_record([
                    r.client_id.to_string(),
                    c.policy.name().to_string(),
                    r.index.to_string(),
                    r.bitrate_kbps.to_string(),
                    r.sleep_secs.to_string(),
                    r.t_start.to_string(),
                    r.t_end.to_string(),
                    r.buffer_after_secs.to_string(),
                    r.measured_kbps.to_string(),
                    r.amended_kbps.to_string(),
                    r.probed_kbps.to_string(),
                    u8::from(r.underflow).to_string(),
                    u8::from(r.overflow).to_string(),
                    u8::from(c.policy.is_approximation()).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
