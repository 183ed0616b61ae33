//! Rate-adaptation policies.
//!
//! [`Tfdash`] is the full controller: guard-zone threshold selection outside
//! `[q_low, q_high]`, probability-driven selection inside it, and a sleep
//! only when the top rate is already being fetched and the next segment
//! would overflow the buffer. The remaining policies are simplified
//! comparison baselines and are marked as approximations in every output.

mod baseline;
mod buffer;
mod probability;
mod threshold;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{AimdBaseline, BaselineParams, FestiveLikeBaseline, RateBaseline};
pub use buffer::{advance_buffer, BufferStep};
pub use probability::{
    candidate_distribution, candidate_score, candidate_set, probabilistic_select, sample_weighted,
    score_factors, sgn, sigmoid, CandidateProbability, ScoreFactors,
};
pub use threshold::{threshold_select, BufferZone};

use crate::model::{BitrateLadder, PolicyParams};
use crate::state::ClientState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptationDecision {
    pub bitrate_kbps: f64,
    /// Idle time before issuing the request, seconds.
    pub sleep_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "tfdash")]
    Tfdash,
    #[serde(rename = "rate")]
    Rate,
    #[serde(rename = "aimd")]
    Aimd,
    #[serde(rename = "festive-like")]
    FestiveLike,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Tfdash,
        PolicyKind::Rate,
        PolicyKind::Aimd,
        PolicyKind::FestiveLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Tfdash => "tfdash",
            PolicyKind::Rate => "rate",
            PolicyKind::Aimd => "aimd",
            PolicyKind::FestiveLike => "festive-like",
        }
    }

    /// Baselines are simplified stand-ins, not faithful reimplementations.
    pub fn is_approximation(self) -> bool {
        self != PolicyKind::Tfdash
    }

    pub fn build(self, baseline: &BaselineParams) -> Box<dyn RatePolicy> {
        match self {
            PolicyKind::Tfdash => Box::new(Tfdash),
            PolicyKind::Rate => Box::new(RateBaseline::new(*baseline)),
            PolicyKind::Aimd => Box::new(AimdBaseline::new(*baseline)),
            PolicyKind::FestiveLike => Box::new(FestiveLikeBaseline::new(*baseline)),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown policy {s:?} (expected tfdash, rate, aimd or festive-like)"))
    }
}

/// A per-client adaptation policy, invoked after every completed segment.
///
/// The estimator and prober inside `state` have already absorbed the
/// just-completed segment when `decide` runs.
pub trait RatePolicy: Send {
    fn kind(&self) -> PolicyKind;

    fn decide(
        &mut self,
        state: &mut ClientState,
        params: &PolicyParams,
        ladder: &BitrateLadder,
    ) -> AdaptationDecision;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Tfdash;

impl RatePolicy for Tfdash {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Tfdash
    }

    fn decide(
        &mut self,
        state: &mut ClientState,
        params: &PolicyParams,
        ladder: &BitrateLadder,
    ) -> AdaptationDecision {
        decide_next(state, params, ladder)
    }
}

/// Sleep that lands the predicted post-download buffer exactly at the cap,
/// applied only when the top rate is selected.
pub fn overflow_sleep(
    buffer_secs: f64,
    bitrate_kbps: f64,
    amended_kbps: f64,
    segment_secs: f64,
    params: &PolicyParams,
    ladder: &BitrateLadder,
) -> f64 {
    if bitrate_kbps != ladder.max() || !(amended_kbps > 0.0) {
        return 0.0;
    }
    let predicted = buffer_secs + segment_secs * (1.0 - bitrate_kbps / amended_kbps);
    (predicted - params.q_max_buffer).max(0.0)
}

/// The full controller decision for the next segment.
pub fn decide_next(
    state: &mut ClientState,
    params: &PolicyParams,
    ladder: &BitrateLadder,
) -> AdaptationDecision {
    let Some(previous) = state.last_bitrate() else {
        return AdaptationDecision {
            bitrate_kbps: ladder.min(),
            sleep_secs: 0.0,
        };
    };
    let q = state.buffer_secs;
    let amended = state.estimator.amended();
    let bitrate = match threshold_select(q, state.estimator.measured(), params, ladder) {
        Some(v) => v,
        None => {
            let probed = state.prober.probed();
            let run = state.run_length();
            probabilistic_select(previous, q, run, probed, params, ladder, state.rng())
                .unwrap_or(previous)
        }
    };
    let sleep = overflow_sleep(q, bitrate, amended, state.segment_secs(), params, ladder);
    AdaptationDecision {
        bitrate_kbps: bitrate,
        sleep_secs: sleep,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn primed(buffer: f64, bitrate: f64, bw: f64) -> ClientState {
        let p = PolicyParams::default();
        let mut s = ClientState::new(2.0, 42, 1);
        let dl = bitrate * 2.0 / bw;
        s.on_segment_complete(bitrate, 0.0, dl, &p).unwrap();
        s.buffer_secs = buffer;
        s
    }

    #[test]
    fn first_request_is_lowest_rate() {
        let (p, l) = (PolicyParams::default(), BitrateLadder::default());
        let mut s = ClientState::new(2.0, 0, 0);
        let d = decide_next(&mut s, &p, &l);
        assert_eq!(d.bitrate_kbps, 235.0);
        assert_eq!(d.sleep_secs, 0.0);
    }

    #[test]
    fn low_zone_uses_threshold_branch() {
        let (p, l) = (PolicyParams::default(), BitrateLadder::default());
        let mut s = primed(3.0, 1050.0, 2000.0);
        assert_eq!(decide_next(&mut s, &p, &l).bitrate_kbps, 1750.0);
    }

    #[test]
    fn comfort_zone_uses_probe_bounded_candidates() {
        let (p, l) = (PolicyParams::default(), BitrateLadder::default());
        // probe after one update at 2000 kbps is 1000: candidates up to 1050
        for seed in 0..50 {
            let mut s = primed(15.0, 1050.0, 2000.0);
            *s.rng() = {
                use rand::SeedableRng;
                rand_chacha::ChaCha8Rng::seed_from_u64(seed)
            };
            let v = decide_next(&mut s, &p, &l).bitrate_kbps;
            assert!(v <= 1050.0 && l.contains(v));
        }
    }

    #[test]
    fn predictive_sleep_lands_on_cap() {
        let (p, l) = (PolicyParams::default(), BitrateLadder::default());
        let s = overflow_sleep(29.5, 5800.0, 8000.0, 2.0, &p, &l);
        assert_relative_eq!(s, 0.05, max_relative = 1e-9);
        assert_eq!(overflow_sleep(29.5, 4300.0, 8000.0, 2.0, &p, &l), 0.0);
        assert_eq!(overflow_sleep(10.0, 5800.0, 8000.0, 2.0, &p, &l), 0.0);
    }

    #[test]
    fn high_zone_top_rate_sleeps() {
        let (p, l) = (PolicyParams::default(), BitrateLadder::default());
        let mut s = primed(29.5, 5800.0, 8000.0);
        let d = decide_next(&mut s, &p, &l);
        assert_eq!(d.bitrate_kbps, 5800.0);
        assert_relative_eq!(d.sleep_secs, 0.05, max_relative = 1e-9);
    }

    #[test]
    fn policy_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("panda".parse::<PolicyKind>().is_err());
        assert!(!PolicyKind::Tfdash.is_approximation());
        assert!(PolicyKind::Aimd.is_approximation());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decisions_are_total_and_respect_no_off(
                q in 0.0f64..30.0,
                prev in 0usize..11,
                bw in 50.0f64..20_000.0,
                seed in any::<u64>(),
            ) {
                let (p, l) = (PolicyParams::default(), BitrateLadder::default());
                let mut s = ClientState::new(2.0, seed, 3);
                let v0 = l.rates()[prev];
                s.on_segment_complete(v0, 0.0, v0 * 2.0 / bw, &p).unwrap();
                s.buffer_secs = q;
                let d = decide_next(&mut s, &p, &l);
                prop_assert!(l.contains(d.bitrate_kbps));
                prop_assert!(d.sleep_secs >= 0.0);
                if d.sleep_secs > 0.0 {
                    prop_assert_eq!(d.bitrate_kbps, l.max());
                }
            }
        }
    }
}
