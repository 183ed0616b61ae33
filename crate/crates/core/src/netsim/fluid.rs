//! Fluid fair sharing: every active flow gets `c(t) / n` at every instant.

use super::schedule::CapacitySchedule;
use crate::error::{Error, Result};

/// Kilobits delivered to each of `active_flows` flows over `duration_secs`
/// at constant `capacity_kbps`.
pub fn fair_share_progress(active_flows: usize, capacity_kbps: f64, duration_secs: f64) -> f64 {
    if active_flows == 0 {
        return 0.0;
    }
    capacity_kbps * duration_secs / active_flows as f64
}

/// Earliest time at which a flow with `residual_kb` left, sharing the link
/// with a fixed set of `active_flows` flows from `t_now` on, finishes.
///
/// Fails when the schedule ends first.
pub fn next_completion_time(
    residual_kb: f64,
    t_now: f64,
    active_flows: usize,
    schedule: &CapacitySchedule,
) -> Result<f64> {
    if !(residual_kb > 0.0) {
        return Ok(t_now);
    }
    if active_flows == 0 {
        return Err(Error::Horizon("flow has no share of the link".into()));
    }
    let n = active_flows as f64;
    let mut t = t_now;
    let mut left = residual_kb;
    loop {
        let share = schedule.capacity_at(t) / n;
        let piece_end = schedule.next_change_after(t).or(schedule.end());
        let finish = t + left / share;
        match piece_end {
            Some(e) if finish > e => {
                if schedule.next_change_after(t).is_none() {
                    return Err(Error::Horizon(format!(
                        "capacity schedule ends at {e} s with {} kb outstanding",
                        left - share * (e - t)
                    )));
                }
                left -= share * (e - t);
                t = e;
            }
            _ => return Ok(finish),
        }
    }
}
