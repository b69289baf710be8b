use proptest::prelude::*;

use twinbeam::detector::{DetectorParams, FrameEvents, Geometry, Region, Rois};
use twinbeam::io::{FrameRecord, RunConfig};
use twinbeam::spatial::CorrelationAccumulator;
use twinbeam::stats::{classicality_bound, JointHistogram};

fn histogram(cutoff: usize, counts: &[(usize, usize)]) -> JointHistogram {
    let mut h = JointHistogram::new(cutoff);
    for &(s, i) in counts {
        h.accumulate(s, i);
    }
    h
}

fn frame_strategy() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let event = (-100.0..100.0f64, -100.0..100.0f64);
    (
        prop::collection::vec(event.clone(), 0..4),
        prop::collection::vec(event, 0..4),
    )
}

fn frame(geometry: &Geometry, signal: &[(f64, f64)], idler: &[(f64, f64)]) -> FrameEvents {
    let mut f = FrameEvents::new(0);
    for (region, list) in [(Region::Signal, signal), (Region::Idler, idler)] {
        for &(theta, phi) in list {
            let (x, y) = geometry.to_camera(region, theta, phi);
            f.push(geometry.event(region, x, y));
        }
    }
    f
}

fn accumulator(
    geometry: &Geometry,
    frames: &[(Vec<(f64, f64)>, Vec<(f64, f64)>)],
) -> CorrelationAccumulator {
    let mut acc = CorrelationAccumulator::new(1.0, 130.0).unwrap();
    for (s, i) in frames {
        acc.accumulate_events(&frame(geometry, s, i));
    }
    acc
}

fn close(a: &CorrelationAccumulator, b: &CorrelationAccumulator) -> bool {
    let eq = |x: &f64, y: &f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
    a.frames == b.frames
        && a.contributing_frames == b.contributing_frames
        && a.phi
            .weights
            .iter()
            .zip(&b.phi.weights)
            .all(|(x, y)| eq(x, y))
        && a.theta
            .weights
            .iter()
            .zip(&b.theta.weights)
            .all(|(x, y)| eq(x, y))
}

proptest! {
    #[test]
    fn histogram_merge_is_associative_and_commutative(
        a in prop::collection::vec((0usize..30, 0usize..30), 0..50),
        b in prop::collection::vec((0usize..30, 0usize..30), 0..50),
        c in prop::collection::vec((0usize..30, 0usize..30), 0..50),
    ) {
        let (ha, hb, hc) = (histogram(20, &a), histogram(20, &b), histogram(20, &c));
        let mut left = ha.clone();
        left.merge(&hb).unwrap();
        left.merge(&hc).unwrap();
        let mut bc = hb.clone();
        bc.merge(&hc).unwrap();
        let mut right = ha.clone();
        right.merge(&bc).unwrap();
        prop_assert_eq!(&left, &right);
        let mut ba = hb.clone();
        ba.merge(&ha).unwrap();
        let mut ab = ha.clone();
        ab.merge(&hb).unwrap();
        prop_assert_eq!(&ab, &ba);
        // merging equals accumulating everything in one pass
        let all: Vec<_> = a.iter().chain(&b).chain(&c).copied().collect();
        prop_assert_eq!(&left, &histogram(20, &all));
    }

    #[test]
    fn accumulator_merge_laws(frames in prop::collection::vec(frame_strategy(), 3..30), cut1 in 0usize..100, cut2 in 0usize..100) {
        let g = Geometry::new(&DetectorParams::default(), &Rois::default());
        let n = frames.len();
        let (i, j) = {
            let (x, y) = (cut1 % n, cut2 % n);
            (x.min(y), x.max(y))
        };
        let (a, b, c) = (
            accumulator(&g, &frames[..i]),
            accumulator(&g, &frames[i..j]),
            accumulator(&g, &frames[j..]),
        );
        let mut left = a.clone();
        left.merge(&b).unwrap();
        left.merge(&c).unwrap();
        let mut bc = b.clone();
        bc.merge(&c).unwrap();
        let mut right = a.clone();
        right.merge(&bc).unwrap();
        prop_assert!(close(&left, &right));
        let mut ab = a.clone();
        ab.merge(&b).unwrap();
        let mut ba = b.clone();
        ba.merge(&a).unwrap();
        prop_assert_eq!(&ab, &ba);
        prop_assert!(close(&left, &accumulator(&g, &frames)));
        // one unit of weight per frame with both strips populated
        let both = frames.iter().filter(|(s, i)| !s.is_empty() && !i.is_empty()).count();
        prop_assert!((left.theta.total() - both as f64).abs() < 1e-9);
        prop_assert_eq!(left.contributing_frames, both as u64);
    }

    #[test]
    fn frame_record_round_trip((s, i) in frame_strategy()) {
        let g = Geometry::new(&DetectorParams::default(), &Rois::default());
        let f = frame(&g, &s, &i);
        let line = serde_json::to_string(&FrameRecord::from_events(&f)).unwrap();
        let back: FrameRecord = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(back.to_events(&g), f);
    }

    #[test]
    fn config_round_trip(mu in 0.0..50.0f64, eta in 0.0..=1.0f64, dark in 0.0..3.0f64, seed in any::<u64>(), frames in 0u64..10_000_000) {
        let mut cfg = RunConfig::default();
        cfg.source.mu_pairs = mu;
        cfg.detector.eta_s = eta;
        cfg.detector.eta_i = 1.0 - eta;
        cfg.detector.dark_mean_noise = dark;
        cfg.run.seed = seed;
        cfg.run.n_frames = frames;
        let (back, warnings) = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        prop_assert!(warnings.is_empty());
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn bound_is_a_probability(n_s in 0u64..20_000, n_i in 0u64..20_000) {
        let b = classicality_bound(n_s, n_i);
        prop_assert!(b.is_finite() && b > 0.0 && b <= 1.0);
        // each factor is the peak of a Poisson distribution, so it shrinks with n
        prop_assert!(classicality_bound(n_s + 1, n_i) < b);
    }
}
