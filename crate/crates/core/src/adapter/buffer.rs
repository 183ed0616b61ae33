use crate::error::{Error, Result};

/// Outcome of one segment's worth of buffer evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferStep {
    pub level_secs: f64,
    /// The unclamped level fell to or below zero (playback freeze).
    pub underflow: bool,
    /// The unclamped level exceeded the cap.
    pub overflow: bool,
}

/// Buffered video time after sleeping `sleep_secs`, then downloading one
/// `segment_secs` segment at `bitrate_kbps` with throughput `bw_kbps`:
/// `q + tau - (v / b) * tau - sleep`, clamped to `[0, cap]`.
pub fn advance_buffer(
    q_start: f64,
    segment_secs: f64,
    bitrate_kbps: f64,
    bw_kbps: f64,
    sleep_secs: f64,
    cap_secs: f64,
) -> Result<BufferStep> {
    if !(bw_kbps > 0.0) {
        return Err(Error::StalledDownload);
    }
    let raw = q_start + segment_secs - bitrate_kbps / bw_kbps * segment_secs - sleep_secs;
    Ok(BufferStep {
        level_secs: raw.clamp(0.0, cap_secs),
        underflow: raw <= 0.0,
        overflow: raw > cap_secs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = advance_buffer(12.0, 2.0, 1500.0, 1500.0, 0.0, 30.0).unwrap();
        assert_eq!(s.level_secs, 12.0);
        assert!(!s.underflow && !s.overflow);

        let s = advance_buffer(10.0, 2.0, 1500.0, 3000.0, 0.0, 30.0).unwrap();
        assert_eq!(s.level_secs, 11.0);

        let s = advance_buffer(1.0, 2.0, 4000.0, 1000.0, 0.0, 30.0).unwrap();
        assert_eq!(s.level_secs, 0.0);
        assert!(s.underflow);
    }

    #[test]
    fn overflow_flagged() {
        let s = advance_buffer(29.5, 2.0, 235.0, 10_000.0, 0.0, 30.0).unwrap();
        assert_eq!(s.level_secs, 30.0);
        assert!(s.overflow);
        let s = advance_buffer(29.5, 2.0, 235.0, 10_000.0, 2.0, 30.0).unwrap();
        assert!(!s.overflow);
    }

    #[test]
    fn zero_share_is_an_error() {
        assert!(matches!(
            advance_buffer(5.0, 2.0, 1000.0, 0.0, 0.0, 30.0),
            Err(Error::StalledDownload)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn stays_in_bounds(
                q in 0.0f64..30.0,
                v in 1.0f64..6000.0,
                b in 1.0f64..20_000.0,
                sleep in 0.0f64..10.0,
            ) {
                let s = advance_buffer(q, 2.0, v, b, sleep, 30.0).unwrap();
                prop_assert!((0.0..=30.0).contains(&s.level_secs));
                prop_assert!(!(s.underflow && s.overflow));
            }
        }
    }
}
