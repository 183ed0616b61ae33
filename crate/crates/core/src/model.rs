//! Domain types shared by the estimator, prober, policies and simulator.
//!
//! Bitrates are carried as `f64` kbps throughout, segment durations and
//! buffer levels as `f64` seconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack under which a throughput measurement equals a ladder
/// rate; absorbs rounding in size / duration.
pub const RATE_REL_TOL: f64 = 1e-9;

/// Default encoding ladder, kbps.
pub const DEFAULT_LADDER_KBPS: [f64; 11] = [
    235.0, 375.0, 560.0, 750.0, 1050.0, 1750.0, 2350.0, 3000.0, 3850.0, 4300.0, 5800.0,
];

/// Default segment playback duration, seconds.
pub const DEFAULT_SEGMENT_SECS: f64 = 2.0;

/// Ordered set of available video bitrates `V_1 < ... < V_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BitrateLadder {
    rates: Vec<f64>,
}

impl BitrateLadder {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::validation("ladder", "must contain at least one rate"));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::validation("ladder", format!("rate {r} is not positive")));
        }
        if rates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("ladder", "rates must be strictly increasing"));
        }
        Ok(Self { rates })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.rates[0]
    }

    pub fn max(&self) -> f64 {
        self.rates[self.rates.len() - 1]
    }

    pub fn contains(&self, rate: f64) -> bool {
        self.index_of(rate).is_some()
    }

    /// Position of an exact ladder member.
    pub fn index_of(&self, rate: f64) -> Option<usize> {
        self.rates.iter().position(|r| *r == rate)
    }

    /// Largest rate `<= bw`, if any.
    pub fn floor(&self, bw: f64) -> Option<f64> {
        let n = self.rates.partition_point(|r| *r <= bw);
        n.checked_sub(1).map(|i| self.rates[i])
    }

    /// Smallest rate `>= bw`, if any.
    pub fn ceiling(&self, bw: f64) -> Option<f64> {
        let n = self.rates.partition_point(|r| *r < bw);
        self.rates.get(n).copied()
    }

    /// Largest rate strictly below `bw`, if any. Rates within
    /// [`RATE_REL_TOL`] of `bw` count as equal to it.
    pub fn below(&self, bw: f64) -> Option<f64> {
        let n = self.rates.partition_point(|r| *r < bw * (1.0 - RATE_REL_TOL));
        n.checked_sub(1).map(|i| self.rates[i])
    }

    /// Smallest rate strictly above `bw`, if any, with the same tolerance.
    pub fn above(&self, bw: f64) -> Option<f64> {
        let n = self.rates.partition_point(|r| *r <= bw * (1.0 + RATE_REL_TOL));
        self.rates.get(n).copied()
    }
}

impl Default for BitrateLadder {
    fn default() -> Self {
        Self {
            rates: DEFAULT_LADDER_KBPS.to_vec(),
        }
    }
}

impl TryFrom<Vec<f64>> for BitrateLadder {
    type Error = Error;

    fn try_from(rates: Vec<f64>) -> Result<Self> {
        Self::new(rates)
    }
}

impl From<BitrateLadder> for Vec<f64> {
    fn from(ladder: BitrateLadder) -> Self {
        ladder.rates
    }
}

/// Largest ladder rate not above `bw`.
pub fn ladder_floor(ladder: &BitrateLadder, bw: f64) -> Option<f64> {
    ladder.floor(bw)
}

/// Smallest ladder rate not below `bw`.
pub fn ladder_ceiling(ladder: &BitrateLadder, bw: f64) -> Option<f64> {
    ladder.ceiling(bw)
}

/// Size in kilobits of one segment at `bitrate_kbps` (fluid model, no
/// container overhead).
pub fn segment_size_kb(bitrate_kbps: f64, segment_secs: f64) -> f64 {
    bitrate_kbps * segment_secs
}

/// How comfort-zone scores become a choice.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Each other candidate is taken with probability equal to its score;
    /// the previous bitrate keeps the remaining mass. Scores summing past 1
    /// are normalized over the switch candidates.
    #[default]
    Gated,
    /// Draw from the scores normalized over the whole candidate set.
    Normalized,
}

/// Tunables of the rate-control stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    /// Underflow guard threshold, seconds.
    pub q_low: f64,
    /// Overflow guard threshold, seconds.
    pub q_high: f64,
    /// Buffer capacity, seconds.
    pub q_max_buffer: f64,
    /// Buffer level at which switch-up and switch-down are equally likely.
    pub q_ref: f64,
    /// Back-off factor of the prober's decrease branch.
    pub alpha: f64,
    /// Additive floor of the prober's increase branch, kbps.
    pub delta_kbps: f64,
    /// Offset of the estimator's smoothing-weight sigmoid.
    pub u0: f64,
    pub epsilon: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub n0: u32,
    pub selection: Selection,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            q_low: 5.0,
            q_high: 25.0,
            q_max_buffer: 30.0,
            q_ref: 15.0,
            alpha: 1.25,
            delta_kbps: 32.0,
            u0: 0.5,
            epsilon: 1.0,
            n_min: 1,
            n_max: 15,
            n0: 10,
            selection: Selection::Gated,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("q_low", self.q_low),
            ("q_high", self.q_high),
            ("q_max_buffer", self.q_max_buffer),
            ("q_ref", self.q_ref),
            ("alpha", self.alpha),
            ("delta_kbps", self.delta_kbps),
            ("u0", self.u0),
            ("epsilon", self.epsilon),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::validation(field, "must be finite"));
            }
        }
        if self.q_low <= 0.0 {
            return Err(Error::validation("q_low", "must be > 0"));
        }
        if self.q_ref <= self.q_low {
            return Err(Error::validation("q_ref", "must exceed q_low"));
        }
        if self.q_high <= self.q_ref {
            return Err(Error::validation("q_high", "must exceed q_ref"));
        }
        if self.q_max_buffer < self.q_high {
            return Err(Error::validation("q_max_buffer", "must be >= q_high"));
        }
        // The decrease branch of the prober oscillates divergently for alpha > 2.
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(Error::validation(
                "alpha",
                format!("{} is outside (1, 2]", self.alpha),
            ));
        }
        if self.delta_kbps <= 0.0 {
            return Err(Error::validation("delta_kbps", "must be > 0"));
        }
        if self.epsilon < 1.0 {
            return Err(Error::validation("epsilon", "must be >= 1"));
        }
        if self.n_min < 1 {
            return Err(Error::validation("n_min", "must be >= 1"));
        }
        if self.n0 <= self.n_min {
            return Err(Error::validation("n0", "must exceed n_min"));
        }
        if self.n_max <= self.n0 {
            return Err(Error::validation("n_max", "must exceed n0"));
        }
        Ok(())
    }
}
