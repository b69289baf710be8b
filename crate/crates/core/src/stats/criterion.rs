use serde::{Deserialize, Serialize};

use super::bound::classicality_bound;
use super::correlation::resample_into;
use super::{JointHistogram, JointPmf};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Purpose};

/// Classicality test of one `(n_S, n_I)` bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub n_s: usize,
    pub n_i: usize,
    /// Observed (or exact) probability.
    pub f: f64,
    pub bound: f64,
    /// `f - bound`; positive values violate the classical inequality.
    pub excess: f64,
    /// Binomial-proportion standard error of `f`.
    pub std_err: f64,
    /// `excess / std_err`; `None` where the standard error vanishes
    /// (`f` is 0 or 1, or there is no sampling error).
    pub significance: Option<f64>,
    /// Same, using a bootstrap standard error, when requested.
    pub bootstrap_significance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub n_frames: Option<u64>,
    pub cutoff: usize,
    /// Row-major over `(n_S, n_I)`.
    pub bins: Vec<BinRecord>,
    /// Bins with positive excess.
    pub violations: Vec<(usize, usize)>,
    /// Largest defined significance and its bin.
    pub max_significance: Option<(f64, usize, usize)>,
}

impl CriterionReport {
    pub fn get(&self, n_s: usize, n_i: usize) -> &BinRecord {
        &self.bins[n_s * (self.cutoff + 1) + n_i]
    }

    /// Largest significance among bins with `|n_S - n_I| <= band`.
    pub fn max_significance_near_diagonal(&self, band: usize) -> Option<(f64, usize, usize)> {
        best(self.bins.iter().filter(|b| b.n_s.abs_diff(b.n_i) <= band))
    }

    /// Fill in bootstrap significances from `resamples` frame resamples.
    pub fn with_bootstrap(mut self, hist: &JointHistogram, resamples: usize, seed: u64) -> Self {
        if resamples < 2 || hist.n_frames() == 0 {
            return self;
        }
        let bins = hist.counts().len();
        let n = hist.n_frames() as f64;
        let (mut sum, mut sum_sq) = (vec![0.0; bins], vec![0.0; bins]);
        let mut rng = stream_rng(seed, Purpose::Bootstrap, 1);
        let mut resampled = vec![0u64; bins];
        for _ in 0..resamples {
            resample_into(hist, &mut rng, &mut resampled);
            for k in 0..bins {
                let f = resampled[k] as f64 / n;
                sum[k] += f;
                sum_sq[k] += f * f;
            }
        }
        let r = resamples as f64;
        for (k, rec) in self.bins.iter_mut().enumerate() {
            let var = ((sum_sq[k] - sum[k] * sum[k] / r) / (r - 1.0)).max(0.0);
            rec.bootstrap_significance = (var > 0.0).then(|| rec.excess / var.sqrt());
        }
        self
    }
}

fn best<'a>(bins: impl Iterator<Item = &'a BinRecord>) -> Option<(f64, usize, usize)> {
    bins.filter_map(|b| b.significance.map(|s| (s, b.n_s, b.n_i)))
        .fold(None, |acc, cur| match acc {
            Some(a) if a.0 >= cur.0 => Some(a),
            _ => Some(cur),
        })
}

fn build(pmf: &JointPmf, n_frames: Option<u64>) -> CriterionReport {
    let side = pmf.side();
    let mut bins = Vec::with_capacity(side * side);
    for n_s in 0..side {
        for n_i in 0..side {
            let f = pmf.get(n_s, n_i);
            let bound = classicality_bound(n_s as u64, n_i as u64);
            let excess = f - bound;
            let std_err = n_frames.map_or(0.0, |n| (f * (1.0 - f) / n as f64).max(0.0).sqrt());
            let significance = (std_err > 0.0).then(|| excess / std_err);
            bins.push(BinRecord {
                n_s,
                n_i,
                f,
                bound,
                excess,
                std_err,
                significance,
                bootstrap_significance: None,
            });
        }
    }
    let violations = bins
        .iter()
        .filter(|b| b.excess > 0.0)
        .map(|b| (b.n_s, b.n_i))
        .collect();
    let max_significance = best(bins.iter());
    CriterionReport {
        n_frames,
        cutoff: pmf.cutoff,
        bins,
        violations,
        max_significance,
    }
}

/// Test every bin of a measured histogram against the classical bound.
pub fn criterion_test(hist: &JointHistogram) -> Result<CriterionReport> {
    if hist.n_frames() == 0 {
        return Err(Error::EmptyHistogram);
    }
    Ok(build(&hist.to_pmf()?, Some(hist.n_frames())))
}

/// Test an exact distribution. With `frames`, significances are those a
/// measurement of that many frames would expect.
pub fn criterion_exact(pmf: &JointPmf, frames: Option<u64>) -> CriterionReport {
    build(pmf, frames)
}
