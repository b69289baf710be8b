//! Signal-vs-idler position correlations.
//!
//! For every frame with `n_s` signal and `n_i` idler detections, all
//! `n_s * n_i` combinations are entered into two 2D histograms (angular and
//! radial strip-local offsets) with weight `1 / (n_s n_i)`. Correlated pairs
//! pile up along the anti-diagonal `u_signal + u_idler = 0`; its
//! perpendicular profile is the distribution of the sum coordinate.

mod fit;

use serde::{Deserialize, Serialize};

use crate::detector::{DetectionEvent, FrameEvents, Region};
use crate::error::{Error, Result};

pub use fit::{fit_gaussian, GaussianFit, FWHM_PER_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinate {
    /// Angular offset along the strip.
    Phi,
    /// Radial offset across the cone layer.
    Theta,
}

impl Coordinate {
    pub fn name(self) -> &'static str {
        match self {
            Coordinate::Phi => "phi",
            Coordinate::Theta => "theta",
        }
    }

    /// Camera-frame offset from the strip centre. The idler strip is imaged
    /// mirrored across the pump, so its radial offset changes sign and the
    /// conjugate of a signal event sits at `u_s + u_i = 0` on both axes.
    fn of(self, e: &DetectionEvent) -> f64 {
        match (self, e.region) {
            (Coordinate::Phi, _) => e.phi,
            (Coordinate::Theta, Region::Idler) => -e.theta,
            (Coordinate::Theta, _) => e.theta,
        }
    }
}

/// Square weighted histogram over `[-half_range, half_range)` on both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGrid {
    pub bins: usize,
    pub bin_width: f64,
    /// Row-major, row = signal coordinate.
    pub weights: Vec<f64>,
    /// Weight of points that fell outside the grid.
    pub outside: f64,
}

impl WeightedGrid {
    fn new(bins: usize, bin_width: f64) -> Self {
        Self {
            bins,
            bin_width,
            weights: vec![0.0; bins * bins],
            outside: 0.0,
        }
    }

    pub fn half_range(&self) -> f64 {
        0.5 * self.bins as f64 * self.bin_width
    }

    /// Centre of bin `k` (mrad).
    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.bin_width - self.half_range()
    }

    fn index(&self, u: f64) -> Option<usize> {
        let k = ((u + self.half_range()) / self.bin_width).floor();
        (k >= 0.0 && k < self.bins as f64).then_some(k as usize)
    }

    fn add(&mut self, u_s: f64, u_i: f64, w: f64) {
        match (self.index(u_s), self.index(u_i)) {
            (Some(a), Some(b)) => self.weights[a * self.bins + b] += w,
            _ => self.outside += w,
        }
    }

    pub fn get(&self, k_s: usize, k_i: usize) -> f64 {
        self.weights[k_s * self.bins + k_i]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum::<f64>() + self.outside
    }

    fn merge(&mut self, other: &WeightedGrid) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.outside += other.outside;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationAccumulator {
    pub phi: WeightedGrid,
    pub theta: WeightedGrid,
    /// Frames offered to the accumulator.
    pub frames: u64,
    /// Frames with at least one signal and one idler detection.
    pub contributing_frames: u64,
    pub total_weight: f64,
}

impl CorrelationAccumulator {
    /// Grid covering `[-half_range, half_range)` mrad with the given bin width;
    /// the half range is rounded up to a whole number of bins.
    pub fn new(bin_width: f64, half_range: f64) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::invalid(
                "bin_width",
                format!("must be > 0, got {bin_width}"),
            ));
        }
        if !(half_range.is_finite() && half_range > 0.0) {
            return Err(Error::invalid(
                "half_range",
                format!("must be > 0, got {half_range}"),
            ));
        }
        let bins = 2 * (half_range / bin_width).ceil() as usize;
        Ok(Self {
            phi: WeightedGrid::new(bins, bin_width),
            theta: WeightedGrid::new(bins, bin_width),
            frames: 0,
            contributing_frames: 0,
            total_weight: 0.0,
        })
    }

    pub fn grid(&self, coordinate: Coordinate) -> &WeightedGrid {
        match coordinate {
            Coordinate::Phi => &self.phi,
            Coordinate::Theta => &self.theta,
        }
    }

    pub fn accumulate_frame(&mut self, signal: &[DetectionEvent], idler: &[DetectionEvent]) {
        self.frames += 1;
        if signal.is_empty() || idler.is_empty() {
            return;
        }
        let w = 1.0 / (signal.len() * idler.len()) as f64;
        for s in signal {
            for i in idler {
                self.phi
                    .add(Coordinate::Phi.of(s), Coordinate::Phi.of(i), w);
                self.theta
                    .add(Coordinate::Theta.of(s), Coordinate::Theta.of(i), w);
            }
        }
        self.contributing_frames += 1;
        self.total_weight += 1.0;
    }

    pub fn accumulate_events(&mut self, frame: &FrameEvents) {
        let signal: Vec<DetectionEvent> = frame.in_region(Region::Signal).copied().collect();
        let idler: Vec<DetectionEvent> = frame.in_region(Region::Idler).copied().collect();
        self.accumulate_frame(&signal, &idler);
    }

    /// Bin-wise weight sum.
    pub fn merge(&mut self, other: &CorrelationAccumulator) -> Result<()> {
        if self.phi.bins != other.phi.bins || self.phi.bin_width != other.phi.bin_width {
            return Err(Error::LayoutMismatch);
        }
        self.phi.merge(&other.phi);
        self.theta.merge(&other.theta);
        self.frames += other.frames;
        self.contributing_frames += other.contributing_frames;
        self.total_weight += other.total_weight;
        Ok(())
    }
}

/// Distribution of the sum coordinate `s = u_signal + u_idler`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionProfile {
    pub coordinate: Coordinate,
    pub bin_width: f64,
    /// Bin centres (mrad).
    pub s: Vec<f64>,
    pub weight: Vec<f64>,
}

impl CrossSectionProfile {
    pub fn total(&self) -> f64 {
        self.weight.iter().sum()
    }

    /// Bins with `|s - center| <= half_width`.
    pub fn window(&self, center: f64, half_width: f64) -> CrossSectionProfile {
        let (s, weight) = self
            .s
            .iter()
            .zip(&self.weight)
            .filter(|(s, _)| (**s - center).abs() <= half_width + 1e-9 * self.bin_width)
            .map(|(s, w)| (*s, *w))
            .unzip();
        CrossSectionProfile {
            coordinate: self.coordinate,
            bin_width: self.bin_width,
            s,
            weight,
        }
    }
}

/// Collapse a 2D histogram onto its anti-diagonal sum coordinate.
///
/// Bin `(a, b)` has centre sum `(a + b + 1 - bins) * width`, so the profile has
/// `2 bins - 1` bins of the same width and `s = 0` is a bin centre.
pub fn cross_section(
    acc: &CorrelationAccumulator,
    coordinate: Coordinate,
) -> Result<CrossSectionProfile> {
    if acc.total_weight <= 0.0 {
        return Err(Error::EmptyAccumulator);
    }
    let grid = acc.grid(coordinate);
    let n = grid.bins;
    let mut weight = vec![0.0; 2 * n - 1];
    for a in 0..n {
        for b in 0..n {
            weight[a + b] += grid.get(a, b);
        }
    }
    let s = (0..2 * n - 1)
        .map(|m| (m as f64 + 1.0 - n as f64) * grid.bin_width)
        .collect();
    Ok(CrossSectionProfile {
        coordinate,
        bin_width: grid.bin_width,
        s,
        weight,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisResult {
    /// Profile over the fitted window.
    pub profile: CrossSectionProfile,
    pub fit: GaussianFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationAreaReport {
    pub phi: AxisResult,
    pub theta: AxisResult,
    pub contributing_frames: u64,
}

/// Fit both cross-sections within `|s| <= fit_half_range` mrad.
pub fn correlation_area_report(
    acc: &CorrelationAccumulator,
    fit_half_range: f64,
) -> Result<CorrelationAreaReport> {
    let axis = |coordinate| -> Result<AxisResult> {
        let profile = cross_section(acc, coordinate)?.window(0.0, fit_half_range);
        let fit = fit_gaussian(&profile)?;
        Ok(AxisResult { profile, fit })
    };
    Ok(CorrelationAreaReport {
        phi: axis(Coordinate::Phi)?,
        theta: axis(Coordinate::Theta)?,
        contributing_frames: acc.contributing_frames,
    })
}
