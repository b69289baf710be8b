//! Photodetection-equation model of the joint photocount distribution.
//!
//! Pairs are Poisson with mean `mu`; each photon of a pair is detected
//! independently with the efficiency of its arm; each arm adds independent
//! Poisson noise counts. The resulting distribution is summed exactly over
//! the pair number and serves as the reference for every Monte Carlo check.

use super::bound::{ln_factorial, ln_poisson_pmf};
use super::JointPmf;
use crate::error::{check_nonneg, check_probability, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotodetectionModel {
    pub mu: f64,
    pub eta_s: f64,
    pub eta_i: f64,
    pub dark_s: f64,
    pub dark_i: f64,
}

impl PhotodetectionModel {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("mu", self.mu)?;
        check_probability("eta_s", self.eta_s)?;
        check_probability("eta_i", self.eta_i)?;
        check_nonneg("dark_s", self.dark_s)?;
        check_nonneg("dark_i", self.dark_i)?;
        Ok(())
    }

    /// Smallest cutoff whose discarded tail mass is below `1e-9`.
    pub fn suggested_cutoff(&self) -> usize {
        let mean = (self.eta_s.max(self.eta_i) * self.mu + self.dark_s.max(self.dark_i)).max(0.0);
        let mut cutoff = 4usize;
        // each arm is Poisson with this mean; a 1e-10 one-sided tail per arm
        loop {
            let tail: f64 = 1.0
                - (0..=cutoff as u64)
                    .map(|k| ln_poisson_pmf(k, mean).exp())
                    .sum::<f64>();
            if tail < 5e-11 {
                return cutoff;
            }
            cutoff += 1;
        }
    }

    pub fn joint(&self, cutoff: usize) -> Result<JointPmf> {
        self.validate()?;
        let side = cutoff + 1;
        let noise_s = poisson_row(self.dark_s, side);
        let noise_i = poisson_row(self.dark_i, side);
        let mut probs = vec![0.0; side * side];

        let n_max = pair_cutoff(self.mu);
        for n in 0..=n_max {
            let pn = ln_poisson_pmf(n, self.mu).exp();
            if pn == 0.0 {
                continue;
            }
            let arm_s = convolve(&binomial_row(n, self.eta_s, side), &noise_s);
            let arm_i = convolve(&binomial_row(n, self.eta_i, side), &noise_i);
            for (s, ps) in arm_s.iter().enumerate() {
                if *ps == 0.0 {
                    continue;
                }
                let row = &mut probs[s * side..(s + 1) * side];
                for (cell, pi) in row.iter_mut().zip(&arm_i) {
                    *cell += pn * ps * pi;
                }
            }
        }
        let total: f64 = probs.iter().sum();
        Ok(JointPmf {
            cutoff,
            probs,
            tail_mass: (1.0 - total).max(0.0),
        })
    }
}

/// Exact joint photocount distribution truncated to `0..=cutoff`.
pub fn analytic_joint(
    mu: f64,
    eta_s: f64,
    eta_i: f64,
    dark_s: f64,
    dark_i: f64,
    cutoff: usize,
) -> Result<JointPmf> {
    PhotodetectionModel {
        mu,
        eta_s,
        eta_i,
        dark_s,
        dark_i,
    }
    .joint(cutoff)
}

/// Pair number beyond which the Poisson tail is negligible in f64.
fn pair_cutoff(mu: f64) -> u64 {
    (mu + 15.0 * mu.sqrt() + 40.0).ceil() as u64
}

fn poisson_row(mean: f64, len: usize) -> Vec<f64> {
    (0..len as u64)
        .map(|k| ln_poisson_pmf(k, mean).exp())
        .collect()
}

fn binomial_row(n: u64, p: f64, len: usize) -> Vec<f64> {
    let mut row = vec![0.0; len];
    if p == 0.0 {
        row[0] = 1.0;
        return row;
    }
    if p == 1.0 {
        if (n as usize) < len {
            row[n as usize] = 1.0;
        }
        return row;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let ln_n = ln_factorial(n);
    for k in 0..=n.min(len as u64 - 1) {
        row[k as usize] =
            (ln_n - ln_factorial(k) - ln_factorial(n - k) + k as f64 * lp + (n - k) as f64 * lq)
                .exp();
    }
    row
}

/// Truncated discrete convolution.
fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len();
    let mut out = vec![0.0; len];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum() {
        let f = analytic_joint(0.0, 0.3, 0.6, 0.0, 0.0, 10).unwrap();
        assert_eq!(f.get(0, 0), 1.0);
        assert!((f.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lossless_pairs_are_diagonal_poisson() {
        let mu = 2.5;
        let f = analytic_joint(mu, 1.0, 1.0, 0.0, 0.0, 20).unwrap();
        for s in 0..=20 {
            for i in 0..=20 {
                let expected = if s == i {
                    ln_poisson_pmf(s as u64, mu).exp()
                } else {
                    0.0
                };
                assert!((f.get(s, i) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn half_efficiency_vacuum_term() {
        // direct series: sum_n e^-1 (1/4)^n / n! up to n = 60
        let mut term = (-1.0f64).exp();
        let mut oracle = 0.0;
        for n in 0..=60 {
            if n > 0 {
                term *= 0.25 / n as f64;
            }
            oracle += term;
        }
        let f = analytic_joint(1.0, 0.5, 0.5, 0.0, 0.0, 20).unwrap();
        assert!((f.get(0, 0) - oracle).abs() < 1e-14);
        assert!((oracle - (-0.75f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn marginals_are_thinned_poisson() {
        let f = analytic_joint(1.0, 0.5, 0.5, 0.0, 0.0, 20).unwrap();
        let m = f.marginals();
        for k in 0..=20u64 {
            let p = ln_poisson_pmf(k, 0.5).exp();
            assert!((m.signal[k as usize] - p).abs() < 1e-14);
            assert!((m.idler[k as usize] - p).abs() < 1e-14);
        }
    }

    #[test]
    fn normalised_for_suggested_cutoff() {
        for (mu, eta, dark) in [
            (0.5, 0.07, 0.2),
            (5.0, 0.5, 0.2),
            (30.0, 0.07, 0.5),
            (120.0, 0.07, 0.0),
        ] {
            let model = PhotodetectionModel {
                mu,
                eta_s: eta,
                eta_i: eta,
                dark_s: dark,
                dark_i: dark,
            };
            let f = model.joint(model.suggested_cutoff()).unwrap();
            assert!(f.tail_mass < 1e-9, "{mu} {eta}: tail {}", f.tail_mass);
            assert!((f.total() + f.tail_mass - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(analytic_joint(-1.0, 0.5, 0.5, 0.0, 0.0, 5).is_err());
        assert!(analytic_joint(1.0, 1.5, 0.5, 0.0, 0.0, 5).is_err());
        assert!(analytic_joint(1.0, 0.5, 0.5, f64::NAN, 0.0, 5).is_err());
    }
}
