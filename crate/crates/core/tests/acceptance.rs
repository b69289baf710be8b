//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary so the lines are always visible.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use twinbeam::commands::{self, JointOptions, SpatialOptions};
use twinbeam::detector::{process_frame, Region};
use twinbeam::io::{read_config, RunConfig};
use twinbeam::pipeline::{fold_frames, histogram_in_process, run_in_process, Simulator};
use twinbeam::spatial::CorrelationAccumulator;
use twinbeam::stats::{
    classicality_bound, correlation_coefficient, criterion_exact, criterion_test, JointHistogram,
    PhotodetectionModel,
};

/// Worker threads; 0 uses every core.
const PARALLELISM: usize = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

fn base_config(mu: f64, eta_s: f64, eta_i: f64, dark: f64, frames: u64, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.source.mu_pairs = mu;
    cfg.detector.eta_s = eta_s;
    cfg.detector.eta_i = eta_i;
    cfg.detector.dark_mean_s = dark;
    cfg.detector.dark_mean_i = dark;
    cfg.detector.dark_mean_noise = dark;
    cfg.run.n_frames = frames;
    cfg.run.seed = seed;
    cfg
}

fn model_of(cfg: &RunConfig) -> PhotodetectionModel {
    PhotodetectionModel {
        mu: cfg.source.mu_pairs,
        eta_s: cfg.detector.eta_s,
        eta_i: cfg.detector.eta_i,
        dark_s: cfg.detector.dark_mean_s,
        dark_i: cfg.detector.dark_mean_i,
    }
}

/// Monte Carlo histogram against the exact distribution.
fn oracle_equivalence() -> Outcome {
    const FRAMES: u64 = 1_000_000;
    const MAX_TV: f64 = 0.01;
    const MAX_SECONDS: f64 = 120.0;
    const DARK: f64 = 0.2;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut seed = 100;
    for mu in [0.5, 2.0, 5.0] {
        for eta in [0.07, 0.5] {
            seed += 1;
            let mut cfg = base_config(mu, eta, eta, DARK, FRAMES, seed);
            // keep every photon inside its strip so no detections are lost
            cfg.source.layer_sigma_theta = 10.0;
            let start = Instant::now();
            let hist = histogram_in_process(&cfg, PARALLELISM).expect("simulation");
            let seconds = start.elapsed().as_secs_f64();
            let pmf = model_of(&cfg).joint(hist.cutoff()).expect("oracle");
            let n = hist.n_frames() as f64;
            let mut tv = 0.5 * pmf.tail_mass;
            for s in 0..hist.side() {
                for i in 0..hist.side() {
                    tv += 0.5 * (hist.get(s, i) as f64 / n - pmf.get(s, i)).abs();
                }
            }
            let ok = tv < MAX_TV && seconds < MAX_SECONDS;
            pass &= ok;
            parts.push(format!("mu={mu} eta={eta}: tv={tv:.4} {seconds:.1}s"));
        }
    }
    Outcome {
        pass,
        detail: format!("tv < {MAX_TV}, < {MAX_SECONDS}s each; {}", parts.join("; ")),
    }
}

/// Correlation coefficient against its closed form and the reference profile.
fn correlation_coefficient_check() -> Outcome {
    const FRAMES: u64 = 240_000;
    const RESAMPLES: usize = 200;
    const SIGMAS: f64 = 3.0;
    const PROFILE_RANGE: (f64, f64) = (0.04, 0.08);
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (mu, eta_s, eta_i)) in [(20.0, 0.07, 0.07), (2.0, 0.5, 0.2), (8.0, 0.3, 0.3)]
        .into_iter()
        .enumerate()
    {
        let cfg = base_config(mu, eta_s, eta_i, 0.0, FRAMES, 200 + k as u64);
        let hist = histogram_in_process(&cfg, PARALLELISM).expect("simulation");
        let r = correlation_coefficient(&hist, RESAMPLES, 7).expect("correlation");
        let expected = (eta_s * eta_i).sqrt();
        let z = (r.c_p - expected) / r.std_err;
        let ok = z.abs() <= SIGMAS;
        pass &= ok;
        parts.push(format!(
            "eta=({eta_s},{eta_i}): C_p={:.4}+-{:.4} vs {expected:.4} ({z:+.2} se)",
            r.c_p, r.std_err
        ));
    }
    let cfg = read_config(config_path("reference_profile.toml")).expect("reference profile");
    let hist = histogram_in_process(&cfg, PARALLELISM).expect("simulation");
    let r = correlation_coefficient(&hist, cfg.run.resamples, cfg.run.seed).expect("correlation");
    let ok = r.c_p >= PROFILE_RANGE.0 && r.c_p <= PROFILE_RANGE.1;
    pass &= ok;
    parts.push(format!(
        "reference profile C_p={:.4}+-{:.4} in [{}, {}]",
        r.c_p, r.std_err, PROFILE_RANGE.0, PROFILE_RANGE.1
    ));
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

/// Histogram pairing the signal arm of one run with the idler arm of an
/// independent run: a product-form distribution with realistic marginals.
fn crossed_histogram(a: &RunConfig, b: &RunConfig) -> JointHistogram {
    let (sa, sb) = (Simulator::new(a).unwrap(), Simulator::new(b).unwrap());
    fold_frames(
        a.run.n_frames,
        PARALLELISM,
        || JointHistogram::new(a.run.cutoff),
        |h, k| {
            h.accumulate(
                sa.frame(k).counts.signal as usize,
                sb.frame(k).counts.idler as usize,
            );
            Ok(())
        },
        |h, part| h.merge(&part),
    )
    .expect("crossed run")
}

/// Near-diagonal classicality violation over a pair-rate sweep, plus the
/// product-form null control.
fn criterion_violation() -> Outcome {
    const FRAMES: u64 = 240_000;
    const ETA: f64 = 0.07;
    const MIN_SIGNIFICANCE: f64 = 2.0;
    const BAND: usize = 1;
    const NULL_RUNS: u64 = 50;
    const NULL_CLEAN_FRACTION: f64 = 0.9;

    let mut best: Option<(f64, f64, usize, usize)> = None;
    let mut expected_best = f64::NEG_INFINITY;
    for mu in 5..=30u64 {
        let cfg = base_config(mu as f64, ETA, ETA, 0.0, FRAMES, 3000 + mu);
        let hist = histogram_in_process(&cfg, PARALLELISM).expect("simulation");
        let report = criterion_test(&hist).expect("criterion");
        if let Some((z, s, i)) = report.max_significance_near_diagonal(BAND) {
            if best.is_none_or(|b| z > b.0) {
                best = Some((z, mu as f64, s, i));
            }
        }
        let exact = criterion_exact(&model_of(&cfg).joint(cfg.run.cutoff).unwrap(), Some(FRAMES));
        if let Some((z, _, _)) = exact.max_significance_near_diagonal(BAND) {
            expected_best = expected_best.max(z);
        }
    }
    let (z, mu, s, i) = best.expect("populated bins");
    let violation = z >= MIN_SIGNIFICANCE;

    // most favourable rate for a spurious violation
    let null_mu = 1.0 / ETA;
    let mut clean = 0;
    for k in 0..NULL_RUNS {
        let a = base_config(null_mu, ETA, ETA, 0.0, FRAMES, 5000 + 2 * k);
        let b = base_config(null_mu, ETA, ETA, 0.0, FRAMES, 5001 + 2 * k);
        let report = criterion_test(&crossed_histogram(&a, &b)).expect("criterion");
        if report
            .max_significance
            .is_none_or(|(z, _, _)| z <= MIN_SIGNIFICANCE)
        {
            clean += 1;
        }
    }
    let null_ok = clean as f64 > NULL_CLEAN_FRACTION * NULL_RUNS as f64;
    Outcome {
        pass: violation && null_ok,
        detail: format!(
            "sweep mu=5..30: best near-diagonal {z:+.2} sigma at ({s},{i}), mu={mu} (need >= {MIN_SIGNIFICANCE}; \
             exact model expects at most {expected_best:+.2}); null control clean in {clean}/{NULL_RUNS} (need > {:.0}%)",
            NULL_CLEAN_FRACTION * 100.0
        ),
    }
}

/// Injected correlation widths recovered by simulate + spatial analysis.
fn spatial_round_trip() -> Outcome {
    const THETA_FWHM: (f64, f64) = (7.3, 0.5);
    const PHI_FWHM: (f64, f64) = (10.1, 0.4);
    const MAX_SECONDS: f64 = 300.0;
    let cfg = read_config(config_path("spatial_roundtrip.toml")).expect("config");
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames.ndjson.gz");
    let start = Instant::now();
    commands::simulate(&cfg, &frames, PARALLELISM, None).expect("simulate");
    let opts = SpatialOptions {
        bin_width: cfg.run.bin_width_mrad,
        fit_half_range: cfg.run.fit_half_range_mrad,
    };
    let result = commands::spatial(&frames, &dir.path().join("spatial"), &opts);
    let seconds = start.elapsed().as_secs_f64();
    let summary = match result {
        Ok(o) => o.summary,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("spatial analysis failed: {e}"),
            }
        }
    };
    let get = |axis: &str, key: &str| summary[axis][key].as_f64().unwrap();
    let (theta, phi) = (get("theta", "fwhm"), get("phi", "fwhm"));
    let ok = (theta - THETA_FWHM.0).abs() <= THETA_FWHM.1
        && (phi - PHI_FWHM.0).abs() <= PHI_FWHM.1
        && seconds < MAX_SECONDS;
    Outcome {
        pass: ok,
        detail: format!(
            "radial {theta:.3}+-{:.3} (target {}+-{}), angular {phi:.3}+-{:.3} (target {}+-{}), {seconds:.1}s (< {MAX_SECONDS}s)",
            get("theta", "fwhm_err"),
            THETA_FWHM.0,
            THETA_FWHM.1,
            get("phi", "fwhm_err"),
            PHI_FWHM.0,
            PHI_FWHM.1
        ),
    }
}

/// Raster pipeline against ground truth at low event density.
fn frame_processing() -> Outcome {
    const FRAMES: u64 = 1000;
    const MAX_DENSITY: f64 = 0.001;
    const MIN_SNR: f64 = 10.0;
    const MIN_COUNT_ACCURACY: f64 = 0.99;
    const MAX_CENTROID_ERR: f64 = 1.0;
    const MATCH_RADIUS: f64 = 3.0;

    let mut cfg = base_config(20.0, 0.5, 0.5, 0.5, FRAMES, 11);
    cfg.source.layer_sigma_theta = 60.0;
    let sim = Simulator::new(&cfg).unwrap();
    let d = &cfg.detector;
    // expected peak pixel of a mean-gain photon over the readout noise
    let peak_fraction = statrs::function::erf::erf(0.5 / (d.psf_sigma * 2f64.sqrt())).powi(2);
    let snr = d.gain_mean * peak_fraction / d.readout_sigma;

    let (mut truth_total, mut count_err, mut matched) = (0usize, 0usize, 0usize);
    let mut sq_err = 0.0;
    let mut max_err: f64 = 0.0;
    for k in 0..FRAMES {
        let (truth, raster) = sim.raster_frame(k).unwrap();
        let found = process_frame(&raster, d, &cfg.regions).unwrap();
        truth_total += truth.events.len();
        count_err += truth.events.len().abs_diff(found.events.len());
        for region in Region::ALL {
            let mut pool: Vec<_> = found.in_region(region).collect();
            for t in truth.in_region(region) {
                let nearest = pool
                    .iter()
                    .enumerate()
                    .map(|(j, f)| (j, (f.x - t.x).hypot(f.y - t.y)))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((j, dist)) = nearest.filter(|(_, dist)| *dist <= MATCH_RADIUS) {
                    pool.swap_remove(j);
                    matched += 1;
                    sq_err += dist * dist;
                    max_err = max_err.max(dist);
                }
            }
        }
    }
    let pixels = (d.frame_width * d.frame_height) as f64 * FRAMES as f64;
    let density = truth_total as f64 / pixels;
    let accuracy = 1.0 - count_err as f64 / truth_total as f64;
    let rms = (sq_err / matched.max(1) as f64).sqrt();
    let ok = density <= MAX_DENSITY
        && snr >= MIN_SNR
        && accuracy >= MIN_COUNT_ACCURACY
        && rms <= MAX_CENTROID_ERR;
    Outcome {
        pass: ok,
        detail: format!(
            "density {density:.2e}/px, peak SNR {snr:.1}; count accuracy {:.2}% (>= {:.0}%), centroid rms {rms:.3} px \
             (<= {MAX_CENTROID_ERR}), largest {max_err:.3} px; {matched}/{truth_total} matched",
            accuracy * 100.0,
            MIN_COUNT_ACCURACY * 100.0
        ),
    }
}

/// Diagonal enhancement and off-diagonal depletion in the difference map.
fn difference_map_structure() -> Outcome {
    const FAR: usize = 3;
    const MIN_CELL_FRAMES: u64 = 1000;
    let cfg = read_config(config_path("reference_profile.toml")).expect("reference profile");
    let hist = histogram_in_process(&cfg, PARALLELISM).expect("simulation");
    let diff = hist.difference_map().expect("difference map");
    let side = hist.side();
    let diagonal: Vec<(usize, f64)> = (0..side)
        .filter(|&k| hist.get(k, k) >= MIN_CELL_FRAMES)
        .map(|k| (k, diff[k][k]))
        .collect();
    let (mut near, mut far, mut far_cells) = (0.0, 0.0, 0usize);
    for s in 0..side {
        for i in 0..side {
            let gap = s.abs_diff(i);
            if gap <= 1 {
                near += diff[s][i];
            } else if gap >= FAR {
                far += diff[s][i];
                far_cells += 1;
            }
        }
    }
    let far_mean = far / far_cells as f64;
    let ok = !diagonal.is_empty()
        && diagonal.iter().all(|(_, d)| *d > 0.0)
        && near > 0.0
        && far_mean <= 0.0;
    let diag: Vec<String> = diagonal
        .iter()
        .map(|(k, d)| format!("({k},{k})={d:+.2e}"))
        .collect();
    Outcome {
        pass: ok,
        detail: format!(
            "diagonal {}; band |ds-di|<=1 sum {near:+.3e}; mean at |ds-di|>={FAR} {far_mean:+.3e}",
            diag.join(" ")
        ),
    }
}

fn shuffled_merge<T: Clone>(parts: &[T], rng: &mut ChaCha8Rng, merge: impl Fn(&mut T, &T)) -> T {
    // random order, then a random bracketing: repeatedly merge two random
    // neighbours until one value is left
    let mut items = parts.to_vec();
    items.shuffle(rng);
    while items.len() > 1 {
        let k = rand::Rng::random_range(rng, 0..items.len() - 1);
        let right = items.remove(k + 1);
        merge(&mut items[k], &right);
    }
    items.pop().unwrap()
}

fn accumulators_close(a: &CorrelationAccumulator, b: &CorrelationAccumulator, rel: f64) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= rel * x.abs().max(y.abs()).max(1.0);
    a.frames == b.frames
        && a.contributing_frames == b.contributing_frames
        && close(a.total_weight, b.total_weight)
        && [(&a.phi, &b.phi), (&a.theta, &b.theta)]
            .iter()
            .all(|(g, h)| g.weights.iter().zip(&h.weights).all(|(x, y)| close(*x, *y)))
}

/// Bitwise determinism across parallelism and order-free merges.
fn determinism_and_merges() -> Outcome {
    const ORDERS: usize = 20;
    const PARTS: u64 = 12;
    const FLOAT_REL: f64 = 1e-12;
    let cfg = base_config(5.0, 0.3, 0.3, 0.2, 50_000, 77);
    let mut problems = Vec::new();

    let runs: Vec<_> = [1, 2, 4]
        .iter()
        .map(|&p| run_in_process(&cfg, p).unwrap())
        .collect();
    if runs
        .iter()
        .any(|r| r.histogram != runs[0].histogram || r.accumulator != runs[0].accumulator)
    {
        problems.push("in-process products differ across parallelism".to_string());
    }
    let dir = tempfile::tempdir().unwrap();
    let bytes: Vec<Vec<u8>> = [1, 3]
        .iter()
        .map(|&p| {
            let path = dir.path().join(format!("frames_{p}.ndjson"));
            commands::simulate(&cfg, &path, p, None).unwrap();
            let out = dir.path().join(format!("joint_{p}"));
            let opts = JointOptions {
                cutoff: cfg.run.cutoff,
                resamples: 50,
                seed: cfg.run.seed,
            };
            commands::joint(&path, &out, &opts).unwrap();
            let mut all = std::fs::read(&path).unwrap();
            for name in [
                "joint_histogram.tsv",
                "criterion.tsv",
                "correlation.tsv",
                "summary.json",
            ] {
                all.extend(std::fs::read(out.join(name)).unwrap());
            }
            all
        })
        .collect();
    if bytes[0] != bytes[1] {
        problems.push("written artifacts differ across parallelism".to_string());
    }

    // per-shard products of the same run
    let sim = Simulator::new(&cfg).unwrap();
    let per = cfg.run.n_frames / PARTS;
    let mut hists = Vec::new();
    let mut accs = Vec::new();
    for p in 0..PARTS {
        let mut h = JointHistogram::new(cfg.run.cutoff);
        let mut a = sim.new_accumulator().unwrap();
        for k in p * per..(p + 1) * per {
            let f = sim.frame(k);
            h.accumulate(f.counts.signal as usize, f.counts.idler as usize);
            a.accumulate_events(&f);
        }
        hists.push(h);
        accs.push(a);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let hist_ref = shuffled_merge(&hists, &mut rng, |a, b| a.merge(b).unwrap());
    let acc_ref = shuffled_merge(&accs, &mut rng, |a, b| a.merge(b).unwrap());
    for _ in 0..ORDERS {
        if shuffled_merge(&hists, &mut rng, |a, b| a.merge(b).unwrap()) != hist_ref {
            problems.push("histogram merge depends on order".to_string());
            break;
        }
        if !accumulators_close(
            &shuffled_merge(&accs, &mut rng, |a, b| a.merge(b).unwrap()),
            &acc_ref,
            FLOAT_REL,
        ) {
            problems.push("accumulator merge depends on order".to_string());
            break;
        }
    }
    // pairwise commutativity is exact even in floating point
    let (mut ab, mut ba) = (accs[0].clone(), accs[1].clone());
    ab.merge(&accs[1]).unwrap();
    ba.merge(&accs[0]).unwrap();
    if ab != ba {
        problems.push("accumulator merge is not commutative".to_string());
    }
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("parallelism 1/2/4 identical, files byte-identical, {ORDERS} random merge orders agree")
        } else {
            problems.join("; ")
        },
    }
}

/// Exact rational evaluation of `n^n e^-n / n!` for both arms.
fn exact_bound(n_s: u64, n_i: u64) -> f64 {
    let term = |n: u64| {
        let pow = BigUint::from(n).pow(n as u32);
        let fact = (1..=n).fold(BigUint::one(), |acc, k| acc * k);
        pow.to_f64().unwrap() / fact.to_f64().unwrap() * (-(n as f64)).exp()
    };
    term(n_s) * term(n_i)
}

fn bound_function() -> Outcome {
    const MAX_EXACT: u64 = 30;
    const REL_TOL: f64 = 1e-12;
    const MAX_N: u64 = 10_000;
    let mut worst: f64 = 0.0;
    for s in 0..=MAX_EXACT {
        for i in 0..=MAX_EXACT {
            let exact = exact_bound(s, i);
            worst = worst.max((classicality_bound(s, i) - exact).abs() / exact);
        }
    }
    let mut finite = true;
    for n in (0..=MAX_N).step_by(7).chain([MAX_N]) {
        let b = classicality_bound(n, MAX_N - n.min(MAX_N));
        let d = classicality_bound(n, n);
        finite &= b.is_finite() && b > 0.0 && b <= 1.0 && d.is_finite() && d > 0.0;
    }
    Outcome {
        pass: worst <= REL_TOL && finite,
        detail: format!(
            "max relative error {worst:.2e} for n <= {MAX_EXACT} (<= {REL_TOL:e}); finite and positive up to n = {MAX_N}: {finite}"
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("correlation coefficient", correlation_coefficient_check),
        ("criterion violation", criterion_violation),
        ("spatial round trip", spatial_round_trip),
        ("frame processing", frame_processing),
        ("difference map", difference_map_structure),
        ("determinism and merges", determinism_and_merges),
        ("bound function", bound_function),
    ];
    let only: Option<usize> = std::env::var("TWINBEAM_CRITERION")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} [{name}]: {verdict} ({:.1}s) {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        failed += usize::from(!outcome.pass);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
