//! Simplified comparison policies. None of these is a faithful
//! reimplementation of a published client; they reproduce the qualitative
//! behavior (rate-following with ON-OFF idling, additive probing) that the
//! full controller is compared against.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AdaptationDecision, PolicyKind, RatePolicy};
use crate::model::{BitrateLadder, PolicyParams};
use crate::state::ClientState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    /// Buffer target of the rate-based baseline, seconds.
    pub rate_target_secs: f64,
    /// Additive probe increase, kbps per second of content.
    pub aimd_kappa_kbps_per_s: f64,
    /// Multiplicative probe cut.
    pub aimd_mu: f64,
    /// Fraction of the probe used to pick a rate.
    pub aimd_margin: f64,
    pub aimd_target_secs: f64,
    pub festive_target_secs: f64,
    /// Half-width of the uniform jitter on the festive-like target.
    pub festive_jitter_secs: f64,
    /// Throughput samples in the festive-like harmonic mean.
    pub festive_window: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            rate_target_secs: 15.0,
            aimd_kappa_kbps_per_s: 70.0,
            aimd_mu: 0.85,
            aimd_margin: 0.9,
            aimd_target_secs: 20.0,
            festive_target_secs: 15.0,
            festive_jitter_secs: 2.0,
            festive_window: 20,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        let positive = [
            ("rate_target_secs", self.rate_target_secs),
            ("aimd_kappa_kbps_per_s", self.aimd_kappa_kbps_per_s),
            ("aimd_target_secs", self.aimd_target_secs),
            ("festive_target_secs", self.festive_target_secs),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, "must be > 0"));
            }
        }
        if !(self.aimd_mu > 0.0 && self.aimd_mu < 1.0) {
            return Err(Error::validation("aimd_mu", "must be in (0, 1)"));
        }
        if !(self.aimd_margin > 0.0 && self.aimd_margin <= 1.0) {
            return Err(Error::validation("aimd_margin", "must be in (0, 1]"));
        }
        if !(self.festive_jitter_secs >= 0.0 && self.festive_jitter_secs < self.festive_target_secs) {
            return Err(Error::validation(
                "festive_jitter_secs",
                "must be in [0, festive_target_secs)",
            ));
        }
        if self.festive_window == 0 {
            return Err(Error::validation("festive_window", "must be >= 1"));
        }
        Ok(())
    }
}

/// Sleep that trims the predicted post-download buffer back to `target`.
fn target_sleep(buffer: f64, bitrate: f64, bw: f64, segment_secs: f64, target: f64) -> f64 {
    if !(bw > 0.0) {
        return 0.0;
    }
    let predicted = buffer + segment_secs - bitrate * segment_secs / bw;
    (predicted - target).max(0.0)
}

fn startup(ladder: &BitrateLadder) -> AdaptationDecision {
    AdaptationDecision {
        bitrate_kbps: ladder.min(),
        sleep_secs: 0.0,
    }
}

/// Follows the smoothed throughput and idles to hold a fixed buffer target.
#[derive(Debug, Clone)]
pub struct RateBaseline {
    cfg: BaselineParams,
}

impl RateBaseline {
    pub fn new(cfg: BaselineParams) -> Self {
        Self { cfg }
    }
}

impl RatePolicy for RateBaseline {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Rate
    }

    fn decide(
        &mut self,
        state: &mut ClientState,
        _params: &PolicyParams,
        ladder: &BitrateLadder,
    ) -> AdaptationDecision {
        if state.last_bitrate().is_none() {
            return startup(ladder);
        }
        let bw = state.estimator.amended();
        let v = ladder.floor(bw).unwrap_or(ladder.min());
        AdaptationDecision {
            bitrate_kbps: v,
            sleep_secs: target_sleep(
                state.buffer_secs,
                v,
                bw,
                state.segment_secs(),
                self.cfg.rate_target_secs,
            ),
        }
    }
}

/// Additive-increase multiplicative-decrease probing against the raw
/// segment throughput.
#[derive(Debug, Clone)]
pub struct AimdBaseline {
    cfg: BaselineParams,
    probe_kbps: f64,
}

impl AimdBaseline {
    pub fn new(cfg: BaselineParams) -> Self {
        Self {
            cfg,
            probe_kbps: 0.0,
        }
    }

    pub fn probe(&self) -> f64 {
        self.probe_kbps
    }

    /// `x + kappa * tau` while below the measurement, `measured * mu` otherwise.
    pub fn step_probe(&mut self, measured_kbps: f64, segment_secs: f64) -> f64 {
        self.probe_kbps = if self.probe_kbps < measured_kbps {
            self.probe_kbps + self.cfg.aimd_kappa_kbps_per_s * segment_secs
        } else {
            measured_kbps * self.cfg.aimd_mu
        };
        self.probe_kbps
    }
}

impl RatePolicy for AimdBaseline {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Aimd
    }

    fn decide(
        &mut self,
        state: &mut ClientState,
        _params: &PolicyParams,
        ladder: &BitrateLadder,
    ) -> AdaptationDecision {
        if state.last_bitrate().is_none() {
            return startup(ladder);
        }
        let tau = state.segment_secs();
        let measured = state.estimator.measured();
        let x = self.step_probe(measured, tau);
        let v = ladder
            .floor(x * self.cfg.aimd_margin)
            .unwrap_or(ladder.min());
        AdaptationDecision {
            bitrate_kbps: v,
            sleep_secs: target_sleep(state.buffer_secs, v, measured, tau, self.cfg.aimd_target_secs),
        }
    }
}

/// Harmonic-mean throughput follower whose buffer target is re-drawn
/// uniformly around a nominal value before every request.
#[derive(Debug, Clone)]
pub struct FestiveLikeBaseline {
    cfg: BaselineParams,
    samples: VecDeque<f64>,
}

impl FestiveLikeBaseline {
    pub fn new(cfg: BaselineParams) -> Self {
        Self {
            cfg,
            samples: VecDeque::with_capacity(cfg.festive_window),
        }
    }

    fn harmonic_mean(&self) -> f64 {
        let inv: f64 = self.samples.iter().map(|s| 1.0 / s).sum();
        self.samples.len() as f64 / inv
    }
}

impl RatePolicy for FestiveLikeBaseline {
    fn kind(&self) -> PolicyKind {
        PolicyKind::FestiveLike
    }

    fn decide(
        &mut self,
        state: &mut ClientState,
        _params: &PolicyParams,
        ladder: &BitrateLadder,
    ) -> AdaptationDecision {
        if state.last_bitrate().is_none() {
            return startup(ladder);
        }
        if self.samples.len() == self.cfg.festive_window {
            self.samples.pop_front();
        }
        self.samples.push_back(state.estimator.measured());
        let bw = self.harmonic_mean();
        let v = ladder.floor(bw).unwrap_or(ladder.min());
        let j = self.cfg.festive_jitter_secs;
        let target = if j > 0.0 {
            self.cfg.festive_target_secs + state.rng().gen_range(-j..=j)
        } else {
            self.cfg.festive_target_secs
        };
        AdaptationDecision {
            bitrate_kbps: v,
            sleep_secs: target_sleep(state.buffer_secs, v, bw, state.segment_secs(), target),
        }
    }
}
