//! Joint signal-idler photocount statistics.

mod analytic;
mod bound;
mod correlation;
mod criterion;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use analytic::{analytic_joint, PhotodetectionModel};
pub use bound::{classicality_bound, ln_factorial, ln_poisson_peak, ln_poisson_pmf};
pub use correlation::{correlation_coefficient, CorrelationResult};
pub use criterion::{criterion_exact, criterion_test, BinRecord, CriterionReport};

pub const DEFAULT_CUTOFF: usize = 20;

/// Empirical joint photocount distribution `f(c_S, c_I)` as frame tallies.
///
/// Bins run over `0..=cutoff` on both axes. Counts beyond the cutoff are
/// clamped into the last bin and tallied in `overflow`, so the bin total
/// always equals `n_frames`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointHistogram {
    cutoff: usize,
    n_frames: u64,
    overflow: u64,
    truncated: bool,
    counts: Vec<u64>,
}

impl JointHistogram {
    pub fn new(cutoff: usize) -> Self {
        let side = cutoff + 1;
        Self {
            cutoff,
            n_frames: 0,
            overflow: 0,
            truncated: false,
            counts: vec![0; side * side],
        }
    }

    /// Rebuild from stored parts; checks that bins sum to `n_frames`.
    pub fn from_parts(
        cutoff: usize,
        counts: Vec<u64>,
        n_frames: u64,
        overflow: u64,
        truncated: bool,
    ) -> Result<Self> {
        let side = cutoff + 1;
        if counts.len() != side * side {
            return Err(Error::invalid(
                "histogram",
                format!("expected {} bins, got {}", side * side, counts.len()),
            ));
        }
        let total: u64 = counts.iter().sum();
        if total != n_frames {
            return Err(Error::invalid(
                "histogram",
                format!("bins sum to {total} but n_frames is {n_frames}"),
            ));
        }
        Ok(Self {
            cutoff,
            n_frames,
            overflow,
            truncated: truncated || overflow > 0,
            counts,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn side(&self) -> usize {
        self.cutoff + 1
    }

    pub fn n_frames(&self) -> u64 {
        self.n_frames
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, c_s: usize, c_i: usize) -> u64 {
        self.counts[c_s * self.side() + c_i]
    }

    pub fn accumulate(&mut self, c_s: usize, c_i: usize) {
        let clamped_s = c_s.min(self.cutoff);
        let clamped_i = c_i.min(self.cutoff);
        if clamped_s != c_s || clamped_i != c_i {
            self.overflow += 1;
            self.truncated = true;
        }
        let side = self.side();
        self.counts[clamped_s * side + clamped_i] += 1;
        self.n_frames += 1;
    }

    /// Bin-wise sum. Commutative and associative.
    pub fn merge(&mut self, other: &JointHistogram) -> Result<()> {
        if self.cutoff != other.cutoff {
            return Err(Error::CutoffMismatch(self.cutoff, other.cutoff));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_frames += other.n_frames;
        self.overflow += other.overflow;
        self.truncated |= other.truncated;
        Ok(())
    }

    pub fn to_pmf(&self) -> Result<JointPmf> {
        if self.n_frames == 0 {
            return Err(Error::EmptyHistogram);
        }
        let n = self.n_frames as f64;
        Ok(JointPmf {
            cutoff: self.cutoff,
            probs: self.counts.iter().map(|&c| c as f64 / n).collect(),
            tail_mass: 0.0,
        })
    }

    pub fn marginals(&self) -> Result<Marginals> {
        Ok(self.to_pmf()?.marginals())
    }

    pub fn difference_map(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.to_pmf()?.difference_map())
    }
}

/// Signal and idler marginal distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
}

/// First and second moments of a joint distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_s: f64,
    pub mean_i: f64,
    pub var_s: f64,
    pub var_i: f64,
    pub cov: f64,
}

impl Moments {
    pub fn correlation(&self) -> Result<f64> {
        if self.var_s.is_nan() || self.var_s <= 0.0 {
            return Err(Error::UndefinedCorrelation("signal"));
        }
        if self.var_i.is_nan() || self.var_i <= 0.0 {
            return Err(Error::UndefinedCorrelation("idler"));
        }
        Ok((self.cov / (self.var_s * self.var_i).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Normalised joint distribution over `0..=cutoff` squared, row = signal.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    pub cutoff: usize,
    pub probs: Vec<f64>,
    /// Probability mass beyond the cutoff that was discarded.
    pub tail_mass: f64,
}

impl JointPmf {
    pub fn side(&self) -> usize {
        self.cutoff + 1
    }

    pub fn get(&self, c_s: usize, c_i: usize) -> f64 {
        self.probs[c_s * self.side() + c_i]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn marginals(&self) -> Marginals {
        let side = self.side();
        let mut signal = vec![0.0; side];
        let mut idler = vec![0.0; side];
        for s in 0..side {
            for i in 0..side {
                let p = self.probs[s * side + i];
                signal[s] += p;
                idler[i] += p;
            }
        }
        Marginals { signal, idler }
    }

    /// `f(c_S, c_I) - f_S(c_S) f_I(c_I)` per bin.
    pub fn difference_map(&self) -> Vec<Vec<f64>> {
        let m = self.marginals();
        (0..self.side())
            .map(|s| {
                (0..self.side())
                    .map(|i| self.get(s, i) - m.signal[s] * m.idler[i])
                    .collect()
            })
            .collect()
    }

    pub fn moments(&self) -> Moments {
        moments_of(self.side(), |s, i| self.get(s, i))
    }

    pub fn correlation(&self) -> Result<f64> {
        self.moments().correlation()
    }
}

/// Moments of a (possibly unnormalised) weight table; weights are normalised
/// by their total.
pub(crate) fn moments_of(side: usize, weight: impl Fn(usize, usize) -> f64) -> Moments {
    let (mut w, mut ms, mut mi) = (0.0, 0.0, 0.0);
    for s in 0..side {
        for i in 0..side {
            let p = weight(s, i);
            w += p;
            ms += p * s as f64;
            mi += p * i as f64;
        }
    }
    ms /= w;
    mi /= w;
    let (mut vs, mut vi, mut cov) = (0.0, 0.0, 0.0);
    for s in 0..side {
        for i in 0..side {
            let p = weight(s, i) / w;
            let (ds, di) = (s as f64 - ms, i as f64 - mi);
            vs += p * ds * ds;
            vi += p * di * di;
            cov += p * ds * di;
        }
    }
    Moments {
        mean_s: ms,
        mean_i: mi,
        var_s: vs,
        var_i: vi,
        cov,
    }
}
