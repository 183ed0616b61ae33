use crate::model::{BitrateLadder, PolicyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferZone {
    /// Below `q_low`: refill.
    Low,
    /// Between the thresholds, inclusive.
    Comfort,
    /// Above `q_high`: drain.
    High,
}

impl BufferZone {
    pub fn classify(buffer_secs: f64, params: &PolicyParams) -> Self {
        if buffer_secs < params.q_low {
            BufferZone::Low
        } else if buffer_secs > params.q_high {
            BufferZone::High
        } else {
            BufferZone::Comfort
        }
    }
}

/// Guard-zone selection. Below `q_low` the largest rate strictly under the
/// estimate (else the lowest rate); above `q_high` the smallest rate
/// strictly over it (else the highest rate). `None` inside the comfort zone.
///
/// Strictness matters when the estimate sits exactly on a ladder rate: a
/// client downloading at exactly its playback rate would otherwise never
/// leave the zone it is in.
pub fn threshold_select(
    buffer_secs: f64,
    amended_kbps: f64,
    params: &PolicyParams,
    ladder: &BitrateLadder,
) -> Option<f64> {
    match BufferZone::classify(buffer_secs, params) {
        BufferZone::Low => Some(ladder.below(amended_kbps).unwrap_or(ladder.min())),
        BufferZone::High => Some(ladder.above(amended_kbps).unwrap_or(ladder.max())),
        BufferZone::Comfort => None,
    }
}
