use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{moments_of, JointHistogram};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub c_p: f64,
    /// Bootstrap standard error of `c_p`.
    pub std_err: f64,
    pub n_frames: u64,
    /// Resamples that produced a defined coefficient.
    pub bootstrap_resamples: usize,
}

/// Normalised signal-idler covariance with a bootstrap standard error.
///
/// Frames are resampled with replacement; since a frame is fully described
/// by its bin, a resample is one multinomial draw over the occupied bins.
pub fn correlation_coefficient(
    hist: &JointHistogram,
    resamples: usize,
    seed: u64,
) -> Result<CorrelationResult> {
    if hist.n_frames() < 2 {
        return Err(Error::invalid(
            "histogram",
            "at least two frames are required",
        ));
    }
    let side = hist.side();
    let c_p = moments_of(side, |s, i| hist.get(s, i) as f64).correlation()?;

    let mut rng = stream_rng(seed, Purpose::Bootstrap, 0);
    let mut replicates = Vec::with_capacity(resamples);
    let mut resampled = vec![0u64; side * side];
    for _ in 0..resamples {
        resample_into(hist, &mut rng, &mut resampled);
        let m = moments_of(side, |s, i| resampled[s * side + i] as f64);
        if let Ok(r) = m.correlation() {
            replicates.push(r);
        }
    }
    let std_err = if replicates.len() >= 2 {
        let n = replicates.len() as f64;
        let mean = replicates.iter().sum::<f64>() / n;
        (replicates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(CorrelationResult {
        c_p,
        std_err,
        n_frames: hist.n_frames(),
        bootstrap_resamples: replicates.len(),
    })
}

/// Draw `n_frames` frames with replacement, written as bin tallies into `out`.
pub(crate) fn resample_into<R: Rng + ?Sized>(hist: &JointHistogram, rng: &mut R, out: &mut [u64]) {
    let counts = hist.counts();
    let mut remaining_frames = hist.n_frames();
    let mut remaining_mass = hist.n_frames();
    for (slot, &c) in out.iter_mut().zip(counts) {
        *slot = 0;
        if c == 0 || remaining_frames == 0 {
            remaining_mass -= c;
            continue;
        }
        let draw = if c == remaining_mass {
            remaining_frames
        } else {
            let p = (c as f64 / remaining_mass as f64).min(1.0);
            Binomial::new(remaining_frames, p)
                .expect("valid binomial")
                .sample(rng)
        };
        *slot = draw;
        remaining_frames -= draw;
        remaining_mass -= c;
    }
}
