//! Logarithmic-increase / multiplicative-decrease bandwidth probing.
//!
//! Below the amended estimate the probe closes half the gap per segment,
//! never less than `delta`; at or above it the probe backs off to
//! `estimate - (alpha - 1) * overshoot`.

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProberState {
    probed_kbps: f64,
}

impl ProberState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn probed(&self) -> f64 {
        self.probed_kbps
    }

    /// One update per completed segment. Returns the new probed bandwidth.
    pub fn update(&mut self, amended_kbps: f64, alpha: f64, delta_kbps: f64) -> f64 {
        self.probed_kbps = probe_update(self.probed_kbps, amended_kbps, alpha, delta_kbps);
        self.probed_kbps
    }
}

pub fn probe_update(probed: f64, amended: f64, alpha: f64, delta: f64) -> f64 {
    let next = if probed < amended {
        probed + ((amended - probed) / 2.0).max(delta)
    } else {
        probed + alpha * (amended - probed)
    };
    next.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(probe_update(0.0, 3000.0, 1.25, 32.0), 1500.0);
        assert_eq!(probe_update(2990.0, 3000.0, 1.25, 32.0), 3022.0);
        assert_eq!(probe_update(3022.0, 3000.0, 1.25, 32.0), 2994.5);
        assert_eq!(probe_update(1000.0, 1000.0, 1.25, 32.0), 1000.0);
    }

    #[test]
    fn starts_at_zero_and_clamps() {
        let mut p = ProberState::new();
        assert_eq!(p.probed(), 0.0);
        assert_eq!(p.update(10.0, 1.25, 32.0), 32.0);
        // decrease branch against a zero estimate would go negative
        assert_eq!(p.update(0.0, 2.0, 32.0), 0.0);
    }

    fn increase_bound(c: f64, delta: f64) -> usize {
        (c / (2.0 * delta)).log2().ceil() as usize + 1
    }

    #[test]
    fn converges_under_constant_estimate() {
        for c in [500.0, 1500.0, 3000.0, 8000.0] {
            let mut p = ProberState::new();
            let mut steps = 0;
            while (c - p.probed()).abs() > 64.0 {
                p.update(c, 1.25, 32.0);
                steps += 1;
                assert!(steps <= increase_bound(c, 32.0), "c={c}");
            }
            for _ in 0..200 {
                p.update(c, 1.25, 32.0);
                assert!((p.probed() - c).abs() <= 2.0 * 32.0 * 1.25);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decrease_branch_never_exceeds_estimate(
                probed in 0.0f64..1e5,
                amended in 0.0f64..1e5,
                alpha in 1.0001f64..=2.0,
            ) {
                prop_assume!(probed >= amended);
                let next = probe_update(probed, amended, alpha, 32.0);
                prop_assert!(next <= amended + 1e-9 * amended.max(1.0));
                prop_assert!(next >= amended - (alpha - 1.0) * (probed - amended) - 1e-9 * probed.max(1.0));
            }

            #[test]
            fn increase_branch_overshoots_by_at_most_delta(
                probed in 0.0f64..1e5,
                amended in 0.0f64..1e5,
                delta in 1.0f64..200.0,
            ) {
                prop_assume!(probed < amended);
                let next = probe_update(probed, amended, 1.25, delta);
                prop_assert!(next > probed);
                prop_assert!(next <= amended + delta);
            }
        }
    }
}
