use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::estimator::{measure_segment_bandwidth, EstimatorState};
use crate::model::PolicyParams;
use crate::prober::ProberState;

/// Per-client controller state, advanced once per completed segment.
#[derive(Debug, Clone)]
pub struct ClientState {
    segment_secs: f64,
    pub estimator: EstimatorState,
    pub prober: ProberState,
    /// Buffered video time, seconds.
    pub buffer_secs: f64,
    last_bitrate: Option<f64>,
    run_length: u32,
    next_index: u64,
    rng: ChaCha8Rng,
}

/// Bandwidth figures produced by one segment completion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentUpdate {
    pub measured_kbps: f64,
    pub amended_kbps: f64,
    pub probed_kbps: f64,
}

impl ClientState {
    /// Each client draws from its own ChaCha stream keyed by
    /// `(global_seed, client_id)`.
    pub fn new(segment_secs: f64, global_seed: u64, client_id: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(global_seed);
        rng.set_stream(u64::from(client_id));
        Self {
            segment_secs,
            estimator: EstimatorState::new(),
            prober: ProberState::new(),
            buffer_secs: 0.0,
            last_bitrate: None,
            run_length: 0,
            next_index: 0,
            rng,
        }
    }

    pub fn segment_secs(&self) -> f64 {
        self.segment_secs
    }

    pub fn last_bitrate(&self) -> Option<f64> {
        self.last_bitrate
    }

    /// Consecutive trailing segments fetched at `last_bitrate`.
    pub fn run_length(&self) -> u32 {
        self.run_length
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Measures the finished download, then updates the estimator and the
    /// prober in that order.
    pub fn on_segment_complete(
        &mut self,
        bitrate_kbps: f64,
        t_start: f64,
        t_end: f64,
        params: &PolicyParams,
    ) -> Result<SegmentUpdate> {
        let measured = measure_segment_bandwidth(bitrate_kbps, self.segment_secs, t_start, t_end)?;
        let amended = self.estimator.update(measured, params.u0)?;
        let probed = self
            .prober
            .update(amended, params.alpha, params.delta_kbps);
        if self.last_bitrate == Some(bitrate_kbps) {
            self.run_length += 1;
        } else {
            self.run_length = 1;
        }
        self.last_bitrate = Some(bitrate_kbps);
        self.next_index += 1;
        Ok(SegmentUpdate {
            measured_kbps: measured,
            amended_kbps: amended,
            probed_kbps: probed,
        })
    }
}
