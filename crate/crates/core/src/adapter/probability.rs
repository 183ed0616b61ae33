//! Probability-driven selection inside the buffer comfort zone.
//!
//! Each candidate bitrate gets a nonnegative score from four factors:
//! buffer pressure toward switching up or down, logarithmic quality of the
//! candidate, a penalty on switch amplitude, and the smoothness of the
//! recent bitrate run. By default a score is the probability of switching
//! to that candidate and the previous bitrate keeps what is left; the
//! alternative normalizes scores over the whole candidate set.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{BitrateLadder, PolicyParams, Selection};

/// Clipped logistic: 0 below `x_min`, 1 above `x_max`, `1 / (1 + e^(x0 - x))`
/// in between.
pub fn sigmoid(x: f64, x_min: f64, x_max: f64, x0: f64) -> f64 {
    if x < x_min {
        0.0
    } else if x > x_max {
        1.0
    } else {
        1.0 / (1.0 + (x0 - x).exp())
    }
}

pub fn sgn(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// The four factors of a candidate's score, kept apart for inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreFactors {
    pub buffer: f64,
    pub quality: f64,
    pub amplitude: f64,
    pub smoothness: f64,
}

impl ScoreFactors {
    pub fn product(&self) -> f64 {
        self.buffer * self.quality * self.amplitude * self.smoothness
    }
}

pub fn score_factors(
    candidate: f64,
    previous: f64,
    buffer_secs: f64,
    run_length: u32,
    params: &PolicyParams,
    ladder: &BitrateLadder,
) -> Result<ScoreFactors> {
    for v in [candidate, previous] {
        if !ladder.contains(v) {
            return Err(Error::NotInLadder(v));
        }
    }
    let eps = params.epsilon;
    let f_q = sigmoid(buffer_secs, params.q_low, params.q_high, params.q_ref);
    let s = f64::from(sgn(candidate - previous));
    let buffer = (1.0 + s) / 2.0 * f_q + (1.0 - s) / 2.0 * (1.0 - f_q);

    let norm = (ladder.max() - ladder.min() + eps).ln();
    let (quality, amplitude) = if norm > 0.0 {
        (
            (candidate - ladder.min() + eps).ln() / norm,
            1.0 - ((candidate - previous).abs() + eps).ln() / norm,
        )
    } else {
        // single-rate ladder with epsilon = 1: nothing to normalize against
        (1.0, 1.0)
    };
    let smoothness = sigmoid(
        f64::from(run_length),
        f64::from(params.n_min),
        f64::from(params.n_max),
        f64::from(params.n0),
    );
    Ok(ScoreFactors {
        buffer,
        quality,
        amplitude,
        smoothness,
    })
}

/// Unnormalized selection score of `candidate` given the previous bitrate,
/// the buffer level and the run length of the previous bitrate.
pub fn candidate_score(
    candidate: f64,
    previous: f64,
    buffer_secs: f64,
    run_length: u32,
    params: &PolicyParams,
    ladder: &BitrateLadder,
) -> Result<f64> {
    score_factors(candidate, previous, buffer_secs, run_length, params, ladder).map(|f| f.product())
}

/// Every rate up to the first rate at or above the probed bandwidth, plus
/// the previous bitrate.
pub fn candidate_set(ladder: &BitrateLadder, probed_kbps: f64, previous: f64) -> Vec<f64> {
    let bound = ladder.ceiling(probed_kbps).unwrap_or(ladder.max());
    let mut set: Vec<f64> = ladder.rates().iter().copied().filter(|r| *r <= bound).collect();
    if previous > bound && ladder.contains(previous) {
        set.push(previous);
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateProbability {
    pub bitrate_kbps: f64,
    pub raw_score: f64,
    pub probability: f64,
}

/// Scores the candidate set and turns the scores into selection
/// probabilities under `params.selection`. Only positive scores get mass;
/// when every score is zero the previous bitrate gets probability 1.
pub fn candidate_distribution(
    previous: f64,
    buffer_secs: f64,
    run_length: u32,
    probed_kbps: f64,
    params: &PolicyParams,
    ladder: &BitrateLadder,
) -> Result<Vec<CandidateProbability>> {
    let set = candidate_set(ladder, probed_kbps, previous);
    let mut out = Vec::with_capacity(set.len());
    for v in set {
        let raw = candidate_score(v, previous, buffer_secs, run_length, params, ladder)?;
        out.push(CandidateProbability {
            bitrate_kbps: v,
            raw_score: raw,
            probability: 0.0,
        });
    }
    let is_switch = |c: &CandidateProbability| c.bitrate_kbps != previous;
    let total: f64 = match params.selection {
        Selection::Normalized => out.iter().map(|c| c.raw_score).sum(),
        Selection::Gated => out.iter().filter(|c| is_switch(c)).map(|c| c.raw_score).sum(),
    };
    // a zero-score previous rate keeps no mass, so switches share all of it
    let stay_scores = out.iter().any(|c| !is_switch(c) && c.raw_score > 0.0);
    let scale = match params.selection {
        Selection::Normalized if total > 0.0 => 1.0 / total,
        Selection::Gated if total > 1.0 || (!stay_scores && total > 0.0) => 1.0 / total,
        Selection::Gated => 1.0,
        Selection::Normalized => 0.0,
    };
    let mut switching = 0.0;
    for c in &mut out {
        if params.selection == Selection::Normalized || is_switch(c) {
            c.probability = c.raw_score * scale;
            if is_switch(c) {
                switching += c.probability;
            }
        }
    }
    if params.selection == Selection::Gated || total <= 0.0 {
        if let Some(stay) = out.iter_mut().find(|c| !is_switch(c)) {
            stay.probability = (1.0 - switching).max(0.0);
        }
    }
    Ok(out)
}

/// Draws an index with probability proportional to `weights`. Zero-weight
/// entries are never returned; `None` if all weights are zero.
pub fn sample_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    // rounding left `target` just past the accumulated sum
    last_positive
}

/// Picks the next bitrate by sampling [`candidate_distribution`].
pub fn probabilistic_select<R: Rng + ?Sized>(
    previous: f64,
    buffer_secs: f64,
    run_length: u32,
    probed_kbps: f64,
    params: &PolicyParams,
    ladder: &BitrateLadder,
    rng: &mut R,
) -> Result<f64> {
    let dist = candidate_distribution(previous, buffer_secs, run_length, probed_kbps, params, ladder)?;
    debug_assert!(dist.iter().any(|c| c.bitrate_kbps == previous));
    if dist.len() == 1 {
        return Ok(dist[0].bitrate_kbps);
    }
    let weights: Vec<f64> = dist.iter().map(|c| c.probability).collect();
    Ok(sample_weighted(&weights, rng)
        .map(|i| dist[i].bitrate_kbps)
        .unwrap_or(previous))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn defaults() -> (PolicyParams, BitrateLadder) {
        (PolicyParams::default(), BitrateLadder::default())
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(15.0, 5.0, 25.0, 15.0), 0.5);
        assert_eq!(sigmoid(4.9, 5.0, 25.0, 15.0), 0.0);
        assert_eq!(sigmoid(25.1, 5.0, 25.0, 15.0), 1.0);
        assert_relative_eq!(
            sigmoid(17.0, 5.0, 25.0, 15.0),
            0.880_797_077_977_882_3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sgn_examples() {
        assert_eq!(sgn(5.0), 1);
        assert_eq!(sgn(0.0), 0);
        assert_eq!(sgn(-3.0), -1);
    }

    #[test]
    fn score_at_all_midpoints() {
        let (p, l) = defaults();
        let f = score_factors(1750.0, 1750.0, 15.0, 10, &p, &l).unwrap();
        assert_eq!(f.buffer, 0.5);
        assert_eq!(f.amplitude, 1.0);
        assert_eq!(f.smoothness, 0.5);
        assert_relative_eq!(f.product(), 0.25 * f.quality, max_relative = 1e-15);
        assert_relative_eq!(f.product(), 0.212_298_926_334_591_55, max_relative = 1e-12);
    }

    #[test]
    fn top_rate_has_unit_quality() {
        let (p, l) = defaults();
        let f = score_factors(5800.0, 4300.0, 20.0, 3, &p, &l).unwrap();
        assert_eq!(f.quality, 1.0);
    }

    #[test]
    fn frozen_oracle_value() {
        // independent transcription evaluated offline
        let (p, l) = defaults();
        let s = candidate_score(2350.0, 1750.0, 20.0, 12, &p, &l).unwrap();
        assert_relative_eq!(s, 0.200_477_885_445_226_6, max_relative = 1e-12);
    }

    #[test]
    fn off_ladder_candidate_rejected() {
        let (p, l) = defaults();
        assert!(matches!(
            candidate_score(2000.0, 1750.0, 20.0, 3, &p, &l),
            Err(Error::NotInLadder(_))
        ));
    }

    #[test]
    fn candidate_set_bounded_by_probe_ceiling() {
        let l = BitrateLadder::default();
        assert_eq!(
            candidate_set(&l, 1600.0, 1050.0),
            vec![235.0, 375.0, 560.0, 750.0, 1050.0, 1750.0]
        );
        // previous rate stays selectable even above the bound
        assert_eq!(candidate_set(&l, 300.0, 1050.0), vec![235.0, 375.0, 1050.0]);
        assert_eq!(candidate_set(&l, 9000.0, 1050.0).len(), 11);
    }

    #[test]
    fn single_candidate_selected_with_certainty() {
        let (p, _) = defaults();
        let l = BitrateLadder::new(vec![500.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let v = probabilistic_select(500.0, 15.0, 4, 800.0, &p, &l, &mut rng).unwrap();
            assert_eq!(v, 500.0);
        }
    }

    #[test]
    fn all_zero_scores_keep_previous() {
        // run length 0 zeroes the smoothness factor for every candidate
        let (p, l) = defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = probabilistic_select(1050.0, 15.0, 0, 3000.0, &p, &l, &mut rng).unwrap();
        assert_eq!(v, 1050.0);
    }

    #[test]
    fn distribution_sums_to_one() {
        let (p, l) = defaults();
        let d = candidate_distribution(1750.0, 18.0, 4, 2400.0, &p, &l).unwrap();
        let total: f64 = d.iter().map(|c| c.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gated_switch_probability_is_the_raw_score() {
        let (p, l) = defaults();
        let d = candidate_distribution(1750.0, 15.0, 4, 2400.0, &p, &l).unwrap();
        let switching: f64 = d.iter().filter(|c| c.bitrate_kbps != 1750.0).map(|c| c.raw_score).sum();
        assert!(switching < 1.0);
        for c in &d {
            if c.bitrate_kbps == 1750.0 {
                assert!((c.probability - (1.0 - switching)).abs() < 1e-12);
            } else {
                assert_eq!(c.probability, c.raw_score);
            }
        }
    }

    #[test]
    fn gated_scores_past_one_are_normalized_over_switches() {
        let (mut p, l) = defaults();
        // a flat smoothness and buffer term leave only quality and amplitude
        p.q_ref = 6.0;
        let d = candidate_distribution(235.0, 25.0, 20, 9000.0, &p, &l).unwrap();
        let switching: f64 = d.iter().filter(|c| c.bitrate_kbps != 235.0).map(|c| c.raw_score).sum();
        assert!(switching > 1.0, "{switching}");
        for c in &d {
            if c.bitrate_kbps == 235.0 {
                assert_eq!(c.probability, 0.0);
            } else {
                assert!((c.probability - c.raw_score / switching).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_probability_is_share_of_total() {
        let (mut p, l) = defaults();
        p.selection = Selection::Normalized;
        let d = candidate_distribution(1750.0, 18.0, 4, 2400.0, &p, &l).unwrap();
        let total: f64 = d.iter().map(|c| c.raw_score).sum();
        for c in &d {
            assert!((c.probability - c.raw_score / total).abs() < 1e-12);
        }
    }

    #[test]
    fn short_runs_rarely_switch_under_gating() {
        let (p, l) = defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let switches = |n: u32, rng: &mut ChaCha8Rng| {
            (0..2000)
                .filter(|_| probabilistic_select(3000.0, 15.0, n, 3100.0, &p, &l, rng).unwrap() != 3000.0)
                .count()
        };
        let short = switches(2, &mut rng);
        let long = switches(14, &mut rng);
        assert!(short * 5 < long, "short {short} long {long}");
    }

    #[test]
    fn uniform_weights_sample_uniformly() {
        let m = 5;
        let n = 100_000;
        let weights = vec![0.37; m];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = vec![0usize; m];
        for _ in 0..n {
            counts[sample_weighted(&weights, &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / m as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "count {c}");
        }
    }

    #[test]
    fn zero_weights_never_drawn() {
        let weights = [0.0, 1.0, 0.0, 2.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let i = sample_weighted(&weights, &mut rng).unwrap();
            assert!(i == 1 || i == 3);
        }
        assert_eq!(sample_weighted(&[0.0, 0.0], &mut rng), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scores_in_unit_interval(
                i in 0usize..11,
                j in 0usize..11,
                q in 5.0f64..=25.0,
                n in 0u32..40,
            ) {
                let (p, l) = defaults();
                let s = candidate_score(l.rates()[i], l.rates()[j], q, n, &p, &l).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
            }

            #[test]
            fn buffer_factor_monotone_in_q(
                i in 0usize..11,
                j in 0usize..11,
                q1 in 5.0f64..=25.0,
                q2 in 5.0f64..=25.0,
            ) {
                let (p, l) = defaults();
                let (v, prev) = (l.rates()[i], l.rates()[j]);
                let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
                let a = score_factors(v, prev, lo, 5, &p, &l).unwrap().buffer;
                let b = score_factors(v, prev, hi, 5, &p, &l).unwrap().buffer;
                if v > prev {
                    prop_assert!(a <= b);
                } else if v < prev {
                    prop_assert!(a >= b);
                }
            }

            #[test]
            fn amplitude_factor_nonincreasing_in_gap(
                i in 0usize..11,
                j in 0usize..11,
                k in 0usize..11,
            ) {
                let (p, l) = defaults();
                let r = l.rates();
                let (a, b, prev) = (r[i], r[j], r[k]);
                let fa = score_factors(a, prev, 12.0, 3, &p, &l).unwrap().amplitude;
                let fb = score_factors(b, prev, 12.0, 3, &p, &l).unwrap().amplitude;
                if (a - prev).abs() <= (b - prev).abs() {
                    prop_assert!(fa >= fb);
                }
            }

            #[test]
            fn selection_has_positive_probability(
                j in 0usize..11,
                q in 5.0f64..=25.0,
                n in 0u32..30,
                probed in 0.0f64..8000.0,
                seed in any::<u64>(),
                normalized in any::<bool>(),
            ) {
                let (mut p, l) = defaults();
                if normalized {
                    p.selection = Selection::Normalized;
                }
                let prev = l.rates()[j];
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let v = probabilistic_select(prev, q, n, probed, &p, &l, &mut rng).unwrap();
                let d = candidate_distribution(prev, q, n, probed, &p, &l).unwrap();
                let chosen = d.iter().find(|c| c.bitrate_kbps == v).unwrap();
                prop_assert!(chosen.probability > 0.0);
                prop_assert!(chosen.raw_score > 0.0 || d.iter().all(|c| c.raw_score == 0.0));
                let total: f64 = d.iter().map(|c| c.probability).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }

            #[test]
            fn gated_stay_mass_shrinks_with_run_length(
                j in 0usize..11,
                q in 5.0f64..=25.0,
                n1 in 0u32..30,
                n2 in 0u32..30,
            ) {
                let (p, l) = defaults();
                let prev = l.rates()[j];
                let stay = |n| {
                    candidate_distribution(prev, q, n, 9000.0, &p, &l)
                        .unwrap()
                        .iter()
                        .find(|c| c.bitrate_kbps == prev)
                        .unwrap()
                        .probability
                };
                let (lo, hi) = if n1 <= n2 { (n1, n2) } else { (n2, n1) };
                prop_assert!(stay(hi) <= stay(lo) + 1e-12);
            }
        }
    }
}
