//! Per-segment throughput measurement and adaptive exponential smoothing.
//!
//! The smoothing weight shrinks as the latest measurement disagrees with the
//! running estimate, so a single outlier moves the estimate less than a
//! measurement that confirms it.

use crate::error::{Error, Result};

/// Throughput seen while downloading one segment: `v * tau / (t_end - t_start)`.
pub fn measure_segment_bandwidth(
    bitrate_kbps: f64,
    segment_secs: f64,
    t_start: f64,
    t_end: f64,
) -> Result<f64> {
    let duration = t_end - t_start;
    if !(duration > 0.0) {
        return Err(Error::InvalidMeasurement(format!(
            "non-positive download duration {duration} s"
        )));
    }
    if !(bitrate_kbps > 0.0) || !(segment_secs > 0.0) {
        return Err(Error::InvalidMeasurement(format!(
            "segment of {bitrate_kbps} kbps x {segment_secs} s"
        )));
    }
    Ok(bitrate_kbps * segment_secs / duration)
}

/// Weight given to the fresh measurement: `1 / (1 + e^(u - u0))` with
/// `u = |measured - amended| / measured`.
pub fn smoothing_weight(measured: f64, amended: f64, u0: f64) -> Result<f64> {
    if !(measured > 0.0) {
        return Err(Error::InvalidMeasurement(format!(
            "measured bandwidth {measured} kbps"
        )));
    }
    let u = (measured - amended).abs() / measured;
    Ok(1.0 / (1.0 + (u - u0).exp()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EstimatorState {
    last_measured: f64,
    last_amended: f64,
    initialized: bool,
}

impl EstimatorState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    /// Latest raw segment measurement, kbps (0 before the first segment).
    pub fn measured(&self) -> f64 {
        self.last_measured
    }

    /// Current amended (smoothed) estimate, kbps (0 before the first segment).
    pub fn amended(&self) -> f64 {
        self.last_amended
    }

    /// Folds in the measurement of the segment that just completed and
    /// returns the amended estimate that will drive the next request.
    ///
    /// The first measurement seeds the estimate directly.
    pub fn update(&mut self, measurement: f64, u0: f64) -> Result<f64> {
        if !(measurement > 0.0) || !measurement.is_finite() {
            return Err(Error::InvalidMeasurement(format!(
                "measured bandwidth {measurement} kbps"
            )));
        }
        let amended = if self.initialized {
            let w = smoothing_weight(measurement, self.last_amended, u0)?;
            w * measurement + (1.0 - w) * self.last_amended
        } else {
            self.initialized = true;
            measurement
        };
        self.last_measured = measurement;
        self.last_amended = amended;
        Ok(amended)
    }
}
