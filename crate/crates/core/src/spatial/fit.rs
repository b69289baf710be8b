//! Gaussian-plus-constant fit of a cross-section profile by damped
//! Gauss-Newton iteration (Levenberg-Marquardt with multiplicative damping).

use serde::{Deserialize, Serialize};

use super::CrossSectionProfile;
use crate::error::{Error, Result};

/// `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

const MAX_ITER: usize = 200;
const REL_TOL: f64 = 1e-10;
const MIN_BINS: usize = 8;
/// A fitted amplitude must exceed this many standard errors.
const MIN_AMPLITUDE_SIGNIFICANCE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub offset: f64,
    /// `FWHM_PER_SIGMA * sigma`, or the bin width when resolution limited.
    pub fwhm: f64,
    pub amplitude_err: f64,
    pub center_err: f64,
    pub sigma_err: f64,
    pub offset_err: f64,
    pub fwhm_err: f64,
    /// Root of the residual sum of squares.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// The peak is narrower than one bin; `fwhm` is an upper bound.
    pub resolution_limited: bool,
}

impl GaussianFit {
    pub fn eval(&self, s: f64) -> f64 {
        model(&[self.amplitude, self.center, self.sigma, self.offset], s)
    }
}

fn model(p: &[f64; 4], s: f64) -> f64 {
    let d = s - p[1];
    p[0] * (-d * d / (2.0 * p[2] * p[2])).exp() + p[3]
}

fn gradient(p: &[f64; 4], s: f64) -> [f64; 4] {
    let (a, c, sigma) = (p[0], p[1], p[2]);
    let d = s - c;
    let e = (-d * d / (2.0 * sigma * sigma)).exp();
    let s2 = sigma * sigma;
    [e, a * e * d / s2, a * e * d * d / (s2 * sigma), 1.0]
}

fn cost(p: &[f64; 4], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (y - model(p, *x)).powi(2))
        .sum()
}

/// Solve `m x = rhs` by Gaussian elimination with partial pivoting.
fn solve4(mut m: [[f64; 4]; 4], mut rhs: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn normal_equations(p: &[f64; 4], xs: &[f64], ys: &[f64]) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut jtj = [[0.0; 4]; 4];
    let mut jtr = [0.0; 4];
    for (x, y) in xs.iter().zip(ys) {
        let g = gradient(p, *x);
        let r = y - model(p, *x);
        for a in 0..4 {
            jtr[a] += g[a] * r;
            for b in 0..4 {
                jtj[a][b] += g[a] * g[b];
            }
        }
    }
    (jtj, jtr)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Moment-based starting point `[a, c, sigma, b]`.
fn initial_guess(xs: &[f64], ys: &[f64], bin_width: f64) -> Result<[f64; 4]> {
    let b = median(ys);
    let (peak, &max) = ys
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .expect("non-empty profile");
    let a = max - b;
    if a.is_nan() || a <= 0.0 {
        return Err(Error::NoPeak(format!(
            "maximum {max} does not exceed the median {b}"
        )));
    }
    // contiguous run around the peak where the excess stays above a e^-2,
    // i.e. roughly within two standard deviations
    let level = a * (-2.0f64).exp();
    let mut lo = peak;
    while lo > 0 && ys[lo - 1] - b > level {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < ys.len() && ys[hi + 1] - b > level {
        hi += 1;
    }
    let (mut w, mut m1) = (0.0, 0.0);
    for k in lo..=hi {
        let e = ys[k] - b;
        w += e;
        m1 += e * xs[k];
    }
    let c = m1 / w;
    let m2: f64 = (lo..=hi)
        .map(|k| (ys[k] - b) * (xs[k] - c).powi(2))
        .sum::<f64>()
        / w;
    // a Gaussian cut at +-2 sigma keeps 77% of its variance
    let sigma = (m2 / 0.774).sqrt().max(0.5 * bin_width);
    Ok([a, c, sigma, b])
}

/// Least-squares fit of `a exp(-(s - c)^2 / (2 sigma^2)) + b`.
pub fn fit_gaussian(profile: &CrossSectionProfile) -> Result<GaussianFit> {
    let xs = &profile.s;
    let ys = &profile.weight;
    let populated = ys.iter().filter(|w| **w > 0.0).count();
    if populated < MIN_BINS {
        return Err(Error::InsufficientData {
            populated,
            required: MIN_BINS,
        });
    }
    let bin_width = profile.bin_width;
    let span = xs.last().unwrap() - xs.first().unwrap();

    let mut p = initial_guess(xs, ys, bin_width)?;
    let scale: f64 = ys.iter().map(|y| y * y).sum();
    let mut current = cost(&p, xs, ys);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    let mut resolution_limited = false;

    while iterations < MAX_ITER {
        iterations += 1;
        if current <= 1e-28 * scale {
            converged = true;
            break;
        }
        let (jtj, jtr) = normal_equations(&p, xs, ys);
        let floor = 1e-12 * (0..4).map(|k| jtj[k][k]).fold(0.0, f64::max);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for (k, row) in damped.iter_mut().enumerate() {
                row[k] += lambda * jtj[k][k].max(floor);
            }
            if let Some(step) = solve4(damped, jtr) {
                let mut trial = [
                    p[0] + step[0],
                    p[1] + step[1],
                    (p[2] + step[2]).abs(),
                    p[3] + step[3],
                ];
                if trial[2] == 0.0 {
                    trial[2] = p[2] * 0.5;
                }
                let trial_cost = cost(&trial, xs, ys);
                if trial_cost.is_finite() && trial_cost <= current {
                    last_change = (current - trial_cost) / current.max(f64::MIN_POSITIVE);
                    p = trial;
                    current = trial_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: at the minimum
            converged = true;
            break;
        }
        // neighbouring bins see less than e^-8 of the peak: a one-bin spike
        if p[2] < 0.25 * bin_width {
            resolution_limited = true;
            converged = true;
            break;
        }
        if last_change < REL_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            last_change,
            damping: lambda,
        });
    }

    let (a, c, sigma, b) = (p[0], p[1], p[2], p[3]);
    if a.is_nan() || a <= 0.0 {
        return Err(Error::NoPeak(format!(
            "fitted amplitude {a:.4e} is not positive"
        )));
    }
    if sigma > 0.5 * span {
        return Err(Error::NoPeak(format!(
            "fitted width sigma = {sigma:.3} mrad exceeds half the fitted window ({:.3} mrad)",
            0.5 * span
        )));
    }

    let dof = xs.len().saturating_sub(4).max(1) as f64;
    let (jtj, _) = normal_equations(&p, xs, ys);
    let mut errs = [0.0; 4];
    let residual_variance = current / dof;
    for (k, err) in errs.iter_mut().enumerate() {
        let mut unit = [0.0; 4];
        unit[k] = 1.0;
        *err = match solve4(jtj, unit) {
            Some(col) => (col[k].max(0.0) * residual_variance).sqrt(),
            None => f64::INFINITY,
        };
    }
    let mut fwhm = FWHM_PER_SIGMA * sigma;
    let mut fwhm_err = FWHM_PER_SIGMA * errs[2];
    if fwhm < bin_width {
        resolution_limited = true;
    }
    // A sub-bin peak leaves the width and hence the amplitude covariance
    // degenerate; judge it against the residual scatter instead.
    let amplitude_scale = if resolution_limited {
        residual_variance.sqrt()
    } else {
        errs[0]
    };
    if amplitude_scale > 0.0 && a < MIN_AMPLITUDE_SIGNIFICANCE * amplitude_scale {
        return Err(Error::NoPeak(format!(
            "fitted amplitude {a:.4e} is below {MIN_AMPLITUDE_SIGNIFICANCE} times its uncertainty ({amplitude_scale:.4e})"
        )));
    }
    if resolution_limited {
        fwhm = bin_width;
        fwhm_err = 0.0;
    }
    Ok(GaussianFit {
        amplitude: a,
        center: c,
        sigma,
        offset: b,
        fwhm,
        amplitude_err: errs[0],
        center_err: errs[1],
        sigma_err: errs[2],
        offset_err: errs[3],
        fwhm_err,
        residual_norm: current.sqrt(),
        converged,
        iterations,
        resolution_limited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::Coordinate;

    fn profile(xs: Vec<f64>, f: impl Fn(f64) -> f64, width: f64) -> CrossSectionProfile {
        CrossSectionProfile {
            coordinate: Coordinate::Phi,
            bin_width: width,
            weight: xs.iter().map(|x| f(*x)).collect(),
            s: xs,
        }
    }

    fn grid(half: i32, width: f64) -> Vec<f64> {
        (-half..=half).map(|k| k as f64 * width).collect()
    }

    #[test]
    fn fwhm_identity() {
        assert!((FWHM_PER_SIGMA * 3.0 - 7.0644).abs() < 1e-4);
        assert!((FWHM_PER_SIGMA - 2.0 * (2.0 * 2f64.ln()).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn recovers_noiseless_gaussian() {
        let p = profile(grid(15, 0.5), |s| (-s * s / 8.0).exp(), 0.5);
        let fit = fit_gaussian(&p).unwrap();
        assert!(fit.converged);
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
        assert!(fit.center.abs() < 1e-6);
        assert!((fit.sigma - 2.0).abs() < 1e-6);
        assert!(fit.offset.abs() < 1e-6);
        assert!((fit.fwhm - FWHM_PER_SIGMA * fit.sigma).abs() < 1e-12);
    }

    #[test]
    fn recovers_offset_and_shift() {
        let p = profile(
            grid(25, 1.0),
            |s| 40.0 * (-(s - 1.3).powi(2) / (2.0 * 4.2 * 4.2)).exp() + 7.5,
            1.0,
        );
        let fit = fit_gaussian(&p).unwrap();
        assert!((fit.center - 1.3).abs() < 1e-6);
        assert!((fit.sigma - 4.2).abs() < 1e-6);
        assert!((fit.offset - 7.5).abs() < 1e-6);
    }

    #[test]
    fn single_bin_spike_is_resolution_limited() {
        let p = profile(grid(10, 1.0), |s| if s == 0.0 { 100.0 } else { 5.0 }, 1.0);
        let fit = fit_gaussian(&p).unwrap();
        assert!(fit.resolution_limited);
        assert_eq!(fit.fwhm, 1.0);
    }

    #[test]
    fn noisy_spike_is_resolution_limited() {
        // spike on a noisy floor, as produced by exactly conjugate positions
        let p = profile(
            grid(20, 1.0),
            |s| {
                if s == 0.0 {
                    5000.0
                } else {
                    1200.0 + 40.0 * (s * 1.7).sin()
                }
            },
            1.0,
        );
        let fit = fit_gaussian(&p).unwrap();
        assert!(fit.resolution_limited);
        assert_eq!(fit.fwhm, 1.0);
        assert!(fit.center.abs() < 0.5);
    }

    #[test]
    fn flat_profile_has_no_peak() {
        let p = profile(grid(10, 1.0), |_| 3.0, 1.0);
        assert!(matches!(fit_gaussian(&p), Err(Error::NoPeak(_))));
        // a broad bump wider than the window is not a peak either
        let p = profile(
            grid(10, 1.0),
            |s| 100.0 * (-s * s / (2.0 * 40.0 * 40.0)).exp(),
            1.0,
        );
        assert!(matches!(fit_gaussian(&p), Err(Error::NoPeak(_))));
    }

    #[test]
    fn too_few_bins() {
        let p = profile(grid(3, 1.0), |s| (-s * s).exp(), 1.0);
        assert!(matches!(
            fit_gaussian(&p),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn noisy_peak_uncertainty_covers_truth() {
        // deterministic pseudo-noise
        let mut state = 12345u64;
        let mut noise = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0
        };
        let xs = grid(20, 1.0);
        let ys: Vec<f64> = xs
            .iter()
            .map(|s| 200.0 * (-s * s / (2.0 * 3.1 * 3.1)).exp() + 50.0 + 5.0 * noise())
            .collect();
        let p = CrossSectionProfile {
            coordinate: Coordinate::Theta,
            bin_width: 1.0,
            s: xs,
            weight: ys,
        };
        let fit = fit_gaussian(&p).unwrap();
        assert!(fit.sigma_err > 0.0);
        assert!((fit.sigma - 3.1).abs() < 4.0 * fit.sigma_err, "{fit:?}");
    }
}
