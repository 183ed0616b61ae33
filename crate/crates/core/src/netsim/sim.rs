//! Event loop of the fluid multi-client simulation.
//!
//! Between events every downloading client receives an equal share of the
//! instantaneous capacity, and every playing client drains one second of
//! buffered video per second. The loop always jumps to the earliest of the
//! next scheduled event (capacity change, join, sleep end) and the next
//! download completion under the current split, so capacity and membership
//! changes re-split the link instantly.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use super::log::{ClientLog, DecisionRecord, InFlight, SegmentRecord, SessionLog};
use super::schedule::CapacitySchedule;
use crate::adapter::{BaselineParams, PolicyKind, RatePolicy};
use crate::error::{Error, Result};
use crate::model::{segment_size_kb, BitrateLadder, PolicyParams};
use crate::state::ClientState;

/// Events closer than this are treated as simultaneous.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ClientSpec {
    pub id: u32,
    pub join_time: f64,
    pub policy: PolicyKind,
    /// Segments to fetch before leaving; `None` means `floor(horizon / tau)`.
    pub segments: Option<u64>,
    pub params: PolicyParams,
    /// Overrides the scenario seed for this client's random stream.
    pub seed: Option<u64>,
}

impl ClientSpec {
    pub fn new(id: u32, join_time: f64, policy: PolicyKind) -> Self {
        Self {
            id,
            join_time,
            policy,
            segments: None,
            params: PolicyParams::default(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub ladder: BitrateLadder,
    pub segment_secs: f64,
    pub horizon: f64,
    pub seed: u64,
    pub schedule: CapacitySchedule,
    pub clients: Vec<ClientSpec>,
    pub baseline: BaselineParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.segment_secs.is_finite() && self.segment_secs > 0.0) {
            return Err(Error::validation("segment_secs", "must be > 0"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::validation("horizon", "must be > 0"));
        }
        if self.clients.is_empty() {
            return Err(Error::validation("clients", "at least one client is required"));
        }
        let mut ids = HashSet::new();
        for c in &self.clients {
            let field = |name: &str| format!("clients[{}].{name}", c.id);
            if !ids.insert(c.id) {
                return Err(Error::validation(field("id"), "duplicate client id"));
            }
            if !(c.join_time >= 0.0 && c.join_time < self.horizon) {
                return Err(Error::validation(field("join"), "must lie in [0, horizon)"));
            }
            if c.segments == Some(0) {
                return Err(Error::validation(field("segments"), "must be >= 1"));
            }
            c.params.validate().map_err(|e| match e {
                Error::Validation { field: f, reason } => Error::Validation {
                    field: field(&format!("params.{f}")),
                    reason,
                },
                other => other,
            })?;
        }
        self.baseline.validate()?;
        if let Some(end) = self.schedule.end() {
            if end < self.horizon {
                return Err(Error::Horizon(format!(
                    "capacity schedule ends at {end} s, before the {} s horizon",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    fn default_segments(&self) -> u64 {
        ((self.horizon / self.segment_secs).floor() as u64).max(1)
    }
}

/// Simultaneous events are processed in this order, then by client id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    CapacityChange,
    ClientJoin,
    SegmentComplete,
    SleepEnd,
    ClientFinish,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub client: u32,
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.client.cmp(&other.client))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy)]
struct Download {
    index: u64,
    bitrate: f64,
    size_kb: f64,
    residual_kb: f64,
    t_start: f64,
    sleep_before: f64,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Waiting,
    Downloading(Download),
    Sleeping { bitrate: f64, sleep: f64 },
    Done,
}

struct Client {
    id: u32,
    params: PolicyParams,
    segments: u64,
    state: ClientState,
    policy: Box<dyn RatePolicy>,
    phase: Phase,
    playing: bool,
    stalled_since: Option<f64>,
    stalled_in_window: bool,
    log: ClientLog,
}

impl Client {
    fn download(&self) -> Option<&Download> {
        match &self.phase {
            Phase::Downloading(d) => Some(d),
            _ => None,
        }
    }

    fn drain(&mut self, t: f64, dt: f64) {
        if !self.playing || self.stalled_since.is_some() || matches!(self.phase, Phase::Done) {
            return;
        }
        let q = self.state.buffer_secs;
        if q >= dt - TIME_EPS {
            self.state.buffer_secs = (q - dt).max(0.0);
        } else {
            self.stalled_since = Some(t + q);
            self.state.buffer_secs = 0.0;
            self.stalled_in_window = true;
            self.log.stall_events += 1;
        }
    }

    fn start_download(&mut self, t: f64, bitrate: f64, sleep_before: f64) {
        let size = segment_size_kb(bitrate, self.state.segment_secs());
        self.phase = Phase::Downloading(Download {
            index: self.state.next_index(),
            bitrate,
            size_kb: size,
            residual_kb: size,
            t_start: t,
            sleep_before,
        });
    }

    fn decide_and_request(
        &mut self,
        t: f64,
        ladder: &BitrateLadder,
        events: &mut BinaryHeap<Reverse<SimEvent>>,
    ) {
        let d = self.policy.decide(&mut self.state, &self.params, ladder);
        debug_assert!(ladder.contains(d.bitrate_kbps), "policy chose {}", d.bitrate_kbps);
        let sleep = if d.sleep_secs.is_finite() { d.sleep_secs.max(0.0) } else { 0.0 };
        self.log.decisions.push(DecisionRecord {
            time: t,
            bitrate_kbps: d.bitrate_kbps,
            sleep_secs: sleep,
            buffer_secs: self.state.buffer_secs,
        });
        if sleep > 0.0 {
            self.phase = Phase::Sleeping {
                bitrate: d.bitrate_kbps,
                sleep,
            };
            events.push(Reverse(SimEvent {
                time: t + sleep,
                kind: EventKind::SleepEnd,
                client: self.id,
            }));
        } else {
            self.start_download(t, d.bitrate_kbps, 0.0);
        }
    }
}

/// Runs the scenario to its horizon (or until every client has left) and
/// returns the per-segment log. Identical scenarios produce identical logs.
pub fn run_scenario(scenario: &Scenario) -> Result<SessionLog> {
    scenario.validate()?;
    let ladder = &scenario.ladder;
    let tau = scenario.segment_secs;
    let horizon = scenario.horizon;
    let schedule = &scenario.schedule;

    let mut specs: Vec<&ClientSpec> = scenario.clients.iter().collect();
    specs.sort_by_key(|c| c.id);
    let mut clients: Vec<Client> = specs
        .iter()
        .map(|s| Client {
            id: s.id,
            params: s.params,
            segments: s.segments.unwrap_or_else(|| scenario.default_segments()),
            state: ClientState::new(tau, s.seed.unwrap_or(scenario.seed), s.id),
            policy: s.policy.build(&scenario.baseline),
            phase: Phase::Waiting,
            playing: false,
            stalled_since: None,
            stalled_in_window: false,
            log: ClientLog {
                client_id: s.id,
                policy: s.policy,
                join_time: s.join_time,
                finish_time: None,
                records: Vec::new(),
                decisions: Vec::new(),
                in_flight: None,
                stall_events: 0,
                stall_secs: 0.0,
            },
        })
        .collect();
    let slot = |id: u32, clients: &[Client]| clients.iter().position(|c| c.id == id).unwrap();

    let mut events = BinaryHeap::new();
    for &(t, _) in schedule.points().iter().skip(1) {
        if t < horizon {
            events.push(Reverse(SimEvent {
                time: t,
                kind: EventKind::CapacityChange,
                client: 0,
            }));
        }
    }
    for s in &specs {
        events.push(Reverse(SimEvent {
            time: s.join_time,
            kind: EventKind::ClientJoin,
            client: s.id,
        }));
    }

    let mut t = 0.0_f64;
    let mut delivered_kb = 0.0;
    let mut busy_capacity_kb = 0.0;
    let mut completions: Vec<(usize, f64)> = Vec::new();

    let end_time = loop {
        let capacity = schedule.capacity_at(t);
        let active = clients.iter().filter(|c| c.download().is_some()).count();
        let share = if active > 0 { capacity / active as f64 } else { 0.0 };

        completions.clear();
        for (i, c) in clients.iter().enumerate() {
            if let Some(d) = c.download() {
                completions.push((i, t + d.residual_kb / share));
            }
        }
        let t_done = completions
            .iter()
            .map(|(_, tc)| *tc)
            .fold(f64::INFINITY, f64::min);
        let t_sched = events.peek().map_or(f64::INFINITY, |e| e.0.time);
        if t_done.is_infinite() && t_sched.is_infinite() {
            // nobody left downloading, sleeping or waiting to join
            break t;
        }
        let t_next = t_done.min(t_sched).min(horizon);

        let dt = t_next - t;
        if dt > 0.0 {
            if active > 0 {
                busy_capacity_kb += capacity * dt;
            }
            for c in &mut clients {
                if let Phase::Downloading(d) = &mut c.phase {
                    d.residual_kb -= share * dt;
                }
                c.drain(t, dt);
            }
        }
        t = t_next;
        if t >= horizon {
            break horizon;
        }

        let mut due: Vec<SimEvent> = Vec::new();
        if t_done <= t + TIME_EPS {
            for &(i, tc) in &completions {
                if tc <= t + TIME_EPS {
                    due.push(SimEvent {
                        time: t,
                        kind: EventKind::SegmentComplete,
                        client: clients[i].id,
                    });
                }
            }
        }
        while events.peek().is_some_and(|e| e.0.time <= t + TIME_EPS) {
            due.push(events.pop().unwrap().0);
        }
        due.sort_by(|a, b| a.kind.cmp(&b.kind).then(a.client.cmp(&b.client)));

        for ev in due {
            match ev.kind {
                EventKind::CapacityChange => {}
                EventKind::ClientJoin => {
                    let i = slot(ev.client, &clients);
                    clients[i].decide_and_request(t, ladder, &mut events);
                }
                EventKind::SleepEnd => {
                    let i = slot(ev.client, &clients);
                    let c = &mut clients[i];
                    if let Phase::Sleeping { bitrate, sleep } = c.phase {
                        c.start_download(t, bitrate, sleep);
                    }
                }
                EventKind::SegmentComplete => {
                    let i = slot(ev.client, &clients);
                    let c = &mut clients[i];
                    let Phase::Downloading(d) = c.phase else {
                        continue;
                    };
                    delivered_kb += d.size_kb;
                    let upd = c.state.on_segment_complete(d.bitrate, d.t_start, t, &c.params)?;
                    c.playing = true;
                    if let Some(since) = c.stalled_since.take() {
                        c.log.stall_secs += t - since;
                    }
                    let cap = c.params.q_max_buffer;
                    let raw = c.state.buffer_secs + tau;
                    let overflow = raw > cap + TIME_EPS;
                    c.state.buffer_secs = raw.min(cap);
                    c.log.records.push(SegmentRecord {
                        client_id: c.id,
                        index: d.index,
                        bitrate_kbps: d.bitrate,
                        sleep_secs: d.sleep_before,
                        t_start: d.t_start,
                        t_end: t,
                        buffer_after_secs: c.state.buffer_secs,
                        measured_kbps: upd.measured_kbps,
                        amended_kbps: upd.amended_kbps,
                        probed_kbps: upd.probed_kbps,
                        underflow: c.stalled_in_window,
                        overflow,
                    });
                    c.stalled_in_window = false;
                    if d.index + 1 >= c.segments {
                        c.phase = Phase::Done;
                        events.push(Reverse(SimEvent {
                            time: t,
                            kind: EventKind::ClientFinish,
                            client: c.id,
                        }));
                    } else {
                        c.decide_and_request(t, ladder, &mut events);
                    }
                }
                EventKind::ClientFinish => {
                    let i = slot(ev.client, &clients);
                    let c = &mut clients[i];
                    c.log.finish_time = Some(t);
                }
            }
        }
    };

    for c in &mut clients {
        if let Phase::Downloading(d) = c.phase {
            let got = (d.size_kb - d.residual_kb).max(0.0);
            delivered_kb += got;
            c.log.in_flight = Some(InFlight {
                index: d.index,
                bitrate_kbps: d.bitrate,
                t_start: d.t_start,
                delivered_kb: got,
            });
        }
        if let Some(since) = c.stalled_since {
            c.log.stall_secs += end_time - since;
        }
    }

    Ok(SessionLog {
        segment_secs: tau,
        horizon,
        end_time,
        schedule: schedule.clone(),
        clients: clients.into_iter().map(|c| c.log).collect(),
        delivered_kb,
        busy_capacity_kb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(capacity: f64, clients: Vec<ClientSpec>, horizon: f64) -> Scenario {
        Scenario {
            ladder: BitrateLadder::default(),
            segment_secs: 2.0,
            horizon,
            seed: 1,
            schedule: CapacitySchedule::constant(capacity).unwrap(),
            clients,
            baseline: BaselineParams::default(),
        }
    }

    #[test]
    fn first_segment_is_lowest_rate_and_solo_throughput_is_capacity() {
        let s = scenario(3000.0, vec![ClientSpec::new(1, 0.0, PolicyKind::Tfdash)], 20.0);
        let log = run_scenario(&s).unwrap();
        let r0 = &log.clients[0].records[0];
        assert_eq!(r0.bitrate_kbps, 235.0);
        assert!((r0.t_end - 235.0 * 2.0 / 3000.0).abs() < 1e-12);
        for r in &log.clients[0].records {
            assert!((r.measured_kbps - 3000.0).abs() < 1e-6);
        }
    }

    #[test]
    fn records_are_contiguous_and_ordered() {
        let s = scenario(
            3000.0,
            vec![
                ClientSpec::new(1, 0.0, PolicyKind::Tfdash),
                ClientSpec::new(2, 3.3, PolicyKind::Rate),
            ],
            120.0,
        );
        let log = run_scenario(&s).unwrap();
        for c in &log.clients {
            for (k, r) in c.records.iter().enumerate() {
                assert_eq!(r.index, k as u64);
                assert!(r.t_end > r.t_start);
                if k > 0 {
                    assert!(r.t_start >= c.records[k - 1].t_end - 1e-12);
                }
            }
        }
        assert!(log.conservation_error() < 1e-9);
    }

    #[test]
    fn client_leaves_after_its_segments() {
        let mut c = ClientSpec::new(4, 0.0, PolicyKind::Tfdash);
        c.segments = Some(5);
        let log = run_scenario(&scenario(5000.0, vec![c], 100.0)).unwrap();
        let cl = &log.clients[0];
        assert_eq!(cl.records.len(), 5);
        assert_eq!(cl.finish_time, Some(cl.records[4].t_end));
        assert!(log.end_time < 100.0);
    }

    #[test]
    fn starved_client_stalls_and_logs_it() {
        // a single 200 kbps link cannot sustain the 235 kbps floor
        let log = run_scenario(&scenario(200.0, vec![ClientSpec::new(1, 0.0, PolicyKind::Tfdash)], 60.0))
            .unwrap();
        let c = &log.clients[0];
        assert!(c.stall_events > 0);
        assert!(c.stall_secs > 0.0);
        assert!(c.records.iter().any(|r| r.underflow));
    }

    #[test]
    fn validation_errors() {
        let mut s = scenario(3000.0, vec![ClientSpec::new(1, 0.0, PolicyKind::Tfdash)], 10.0);
        s.clients.push(ClientSpec::new(1, 1.0, PolicyKind::Rate));
        assert!(matches!(run_scenario(&s), Err(Error::Validation { .. })));

        let mut s = scenario(3000.0, vec![ClientSpec::new(1, 0.0, PolicyKind::Tfdash)], 10.0);
        s.clients[0].params.alpha = 3.0;
        match run_scenario(&s) {
            Err(Error::Validation { field, .. }) => assert!(field.ends_with("alpha"), "{field}"),
            other => panic!("unexpected {other:?}"),
        }

        let mut s = scenario(3000.0, vec![ClientSpec::new(1, 0.0, PolicyKind::Tfdash)], 10.0);
        s.schedule = s.schedule.with_end(Some(5.0)).unwrap();
        assert!(matches!(run_scenario(&s), Err(Error::Horizon(_))));
    }

    #[test]
    fn event_order_breaks_ties_by_kind_then_client() {
        let mut v = [
            SimEvent { time: 1.0, kind: EventKind::SleepEnd, client: 0 },
            SimEvent { time: 1.0, kind: EventKind::SegmentComplete, client: 2 },
            SimEvent { time: 1.0, kind: EventKind::SegmentComplete, client: 1 },
            SimEvent { time: 1.0, kind: EventKind::CapacityChange, client: 9 },
            SimEvent { time: 0.5, kind: EventKind::ClientFinish, client: 3 },
            SimEvent { time: 1.0, kind: EventKind::ClientJoin, client: 5 },
        ];
        v.sort();
        let order: Vec<(EventKind, u32)> = v.iter().map(|e| (e.kind, e.client)).collect();
        assert_eq!(
            order,
            vec![
                (EventKind::ClientFinish, 3),
                (EventKind::CapacityChange, 9),
                (EventKind::ClientJoin, 5),
                (EventKind::SegmentComplete, 1),
                (EventKind::SegmentComplete, 2),
                (EventKind::SleepEnd, 0),
            ]
        );
    }
}
