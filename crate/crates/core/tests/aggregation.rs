//! Segment -> file -> individual score aggregation.

use cac_core::inference::{file_score_from_probs, score_file, score_individual, windows, Aggregator, FileScore, SegmentScorer};
use cac_core::{AudioClip, Result};
use proptest::prelude::*;

fn files(probs: &[&[f64]]) -> Vec<FileScore> {
    probs.iter().map(|p| file_score_from_probs(p.to_vec()).unwrap()).collect()
}

#[test]
fn aggregators_follow_their_definitions() {
    // File medians: 0.2, 0.6 (odd count) and 0.9 (even count, midpoint).
    let f = files(&[&[0.1, 0.2, 0.7], &[0.6], &[0.8, 1.0]]);
    let want = [("min", 0.2), ("mean", (0.2 + 0.6 + 0.9) / 3.0), ("median", 0.6), ("max", 0.9)];
    for (name, v) in want {
        let agg: Aggregator = name.parse().unwrap();
        assert_eq!(agg.to_string(), name);
        let s = score_individual("a", &f, agg).unwrap();
        assert_eq!(s.file_probs, vec![0.2, 0.6, 0.9]);
        assert!((s.indiv_prob - v).abs() < 1e-12, "{name}");
    }
    assert_eq!("MAX".parse::<Aggregator>().unwrap(), Aggregator::Max);
    assert!("mode".parse::<Aggregator>().is_err());
    assert!(score_individual("a", &f[..2], Aggregator::Max).is_err());
}

/// Scores a segment by its first sample so windows can be told apart.
struct FirstSample;

impl SegmentScorer for FirstSample {
    fn score_segment(&self, samples: &[f32]) -> Result<f64> {
        Ok(samples[0] as f64)
    }
}

#[test]
fn file_score_is_median_over_windows() {
    // 5 s: windows start every 0.5 s, the last full one at 3 s.
    let n = 80_000;
    assert_eq!(windows(n).len(), 7);
    let samples: Vec<f32> = (0..n).map(|i| (i / 8000) as f32 / 10.0).collect();
    let fs = score_file(&FirstSample, &AudioClip::new(samples, 16_000, "c")).unwrap();
    assert_eq!(fs.segment_probs.len(), 7);
    assert!((fs.file_prob - 0.3).abs() < 1e-6);
    // Shorter than one segment: a single padded window.
    assert_eq!(windows(12_000).len(), 1);
}

proptest! {
    #[test]
    fn raising_a_segment_never_lowers_scores(
        segs in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..8), 3),
        file in 0usize..3,
        bump in 0.0f64..1.0,
    ) {
        let seg = segs[file].len() / 2;
        let mut raised = segs.clone();
        raised[file][seg] = (raised[file][seg] + bump).min(1.0);
        let before: Vec<FileScore> = segs.iter().map(|s| file_score_from_probs(s.clone()).unwrap()).collect();
        let after: Vec<FileScore> = raised.iter().map(|s| file_score_from_probs(s.clone()).unwrap()).collect();
        prop_assert!(after[file].file_prob >= before[file].file_prob);
        for agg in Aggregator::ALL {
            let a = score_individual("x", &before, agg).unwrap().indiv_prob;
            let b = score_individual("x", &after, agg).unwrap().indiv_prob;
            prop_assert!(b >= a - 1e-15, "{agg}: {a} -> {b}");
        }
    }

    #[test]
    fn aggregators_are_ordered(p in prop::collection::vec(0.0f64..1.0, 3)) {
        let f: Vec<FileScore> = p.iter().map(|&v| file_score_from_probs(vec![v]).unwrap()).collect();
        let s = |a| score_individual("x", &f, a).unwrap().indiv_prob;
        prop_assert!(s(Aggregator::Min) <= s(Aggregator::Median));
        prop_assert!(s(Aggregator::Median) <= s(Aggregator::Max));
        prop_assert!(s(Aggregator::Min) <= s(Aggregator::Mean) + 1e-15 && s(Aggregator::Mean) <= s(Aggregator::Max) + 1e-15);
    }
}
