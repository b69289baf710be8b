//! Intensified-CCD model.
//!
//! Two fidelity levels share one geometry:
//!
//! * the event-level path ([`detect_events`]) thins pairs, maps them straight
//!   to centroid coordinates and adds dark counts;
//! * the raster path renders those events into a frame ([`rasterize`]) and
//!   recovers them by double thresholding and centroiding
//!   ([`process_frame`]).
//!
//! Camera coordinates are in macropixels. The signal strip maps strip-local
//! `(theta, phi)` to `(cx + theta/scale, cy + phi/scale)` around the centre of
//! its region; the idler strip is seen through a mirror, so its horizontal
//! axis is reversed: `(cx - theta/scale, cy + phi/scale)`.

mod raster;
mod segment;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_positive, check_probability, Error, Result};
use crate::rng::{poisson, FrameSeed, Purpose};
use crate::source::PairEvent;

pub use raster::{rasterize, rasterize_traced, RasterFrame};
pub use segment::process_frame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Total detection efficiency of the signal arm.
    pub eta_s: f64,
    /// Total detection efficiency of the idler arm.
    pub eta_i: f64,
    #[serde(default)]
    pub dark_mean_s: f64,
    #[serde(default)]
    pub dark_mean_i: f64,
    #[serde(default)]
    pub dark_mean_noise: f64,
    /// Angle subtended by one physical camera pixel (mrad).
    #[serde(default = "default_mrad_per_pixel")]
    pub mrad_per_pixel: f64,
    /// Hardware binning factor: physical pixels per macropixel side.
    #[serde(default = "default_macropixel")]
    pub macropixel: u32,
    /// Point-spread width for rasterisation, in macropixels.
    #[serde(default = "default_psf_sigma")]
    pub psf_sigma: f64,
    #[serde(default = "default_gain_mean")]
    pub gain_mean: f64,
    #[serde(default = "default_gain_sigma")]
    pub gain_sigma: f64,
    /// Per-pixel additive readout noise (std).
    #[serde(default = "default_readout_sigma")]
    pub readout_sigma: f64,
    #[serde(default = "default_threshold_low")]
    pub threshold_low: f64,
    #[serde(default = "default_threshold_high")]
    pub threshold_high: f64,
    /// Position jitter of the event-level path (mrad, per axis).
    #[serde(default)]
    pub blur_sigma: f64,
    /// Raster frame size in macropixels.
    #[serde(default = "default_frame_width")]
    pub frame_width: u32,
    #[serde(default = "default_frame_height")]
    pub frame_height: u32,
}

fn default_mrad_per_pixel() -> f64 {
    0.25
}
fn default_macropixel() -> u32 {
    4
}
fn default_psf_sigma() -> f64 {
    // phosphor spot of about two native pixels under 4x4 binning
    0.5
}
fn default_gain_mean() -> f64 {
    100.0
}
fn default_gain_sigma() -> f64 {
    20.0
}
fn default_readout_sigma() -> f64 {
    1.0
}
fn default_threshold_low() -> f64 {
    2.5 * default_readout_sigma()
}
fn default_threshold_high() -> f64 {
    5.0 * default_readout_sigma()
}
fn default_frame_width() -> u32 {
    560
}
fn default_frame_height() -> u32 {
    250
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            eta_s: 0.07,
            eta_i: 0.07,
            dark_mean_s: 0.0,
            dark_mean_i: 0.0,
            dark_mean_noise: 0.0,
            mrad_per_pixel: default_mrad_per_pixel(),
            macropixel: default_macropixel(),
            psf_sigma: default_psf_sigma(),
            gain_mean: default_gain_mean(),
            gain_sigma: default_gain_sigma(),
            readout_sigma: default_readout_sigma(),
            threshold_low: default_threshold_low(),
            threshold_high: default_threshold_high(),
            blur_sigma: 0.0,
            frame_width: default_frame_width(),
            frame_height: default_frame_height(),
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        check_probability("detector.eta_s", self.eta_s)?;
        check_probability("detector.eta_i", self.eta_i)?;
        check_nonneg("detector.dark_mean_s", self.dark_mean_s)?;
        check_nonneg("detector.dark_mean_i", self.dark_mean_i)?;
        check_nonneg("detector.dark_mean_noise", self.dark_mean_noise)?;
        check_positive("detector.mrad_per_pixel", self.mrad_per_pixel)?;
        if self.macropixel == 0 {
            return Err(Error::invalid("detector.macropixel", "must be >= 1"));
        }
        check_nonneg("detector.psf_sigma", self.psf_sigma)?;
        check_positive("detector.gain_mean", self.gain_mean)?;
        check_nonneg("detector.gain_sigma", self.gain_sigma)?;
        check_nonneg("detector.readout_sigma", self.readout_sigma)?;
        check_nonneg("detector.threshold_low", self.threshold_low)?;
        check_nonneg("detector.threshold_high", self.threshold_high)?;
        if self.threshold_high < self.threshold_low {
            return Err(Error::invalid(
                "detector.threshold_high",
                format!(
                    "must be >= threshold_low ({} < {})",
                    self.threshold_high, self.threshold_low
                ),
            ));
        }
        check_nonneg("detector.blur_sigma", self.blur_sigma)?;
        if self.frame_width == 0 || self.frame_height == 0 {
            return Err(Error::invalid(
                "detector.frame_width",
                "frame must be non-empty",
            ));
        }
        Ok(())
    }

    /// Angle subtended by one macropixel (mrad).
    pub fn mrad_per_macropixel(&self) -> f64 {
        self.mrad_per_pixel * f64::from(self.macropixel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Signal,
    Idler,
    Noise,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Signal, Region::Idler, Region::Noise];

    pub fn name(self) -> &'static str {
        match self {
            Region::Signal => "signal",
            Region::Idler => "idler",
            Region::Noise => "noise",
        }
    }
}

/// Half-open rectangle `[x0, x1) x [y0, y1)` in macropixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

/// The three regions of interest read out from each frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rois {
    pub signal: Rect,
    pub idler: Rect,
    pub noise: Rect,
}

impl Default for Rois {
    fn default() -> Self {
        Self {
            signal: Rect::new(0.0, 0.0, 240.0, 250.0),
            idler: Rect::new(260.0, 0.0, 500.0, 250.0),
            noise: Rect::new(520.0, 0.0, 560.0, 250.0),
        }
    }
}

impl Rois {
    pub fn get(&self, region: Region) -> &Rect {
        match region {
            Region::Signal => &self.signal,
            Region::Idler => &self.idler,
            Region::Noise => &self.noise,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for region in Region::ALL {
            let r = self.get(region);
            let finite = [r.x0, r.y0, r.x1, r.y1].iter().all(|v| v.is_finite());
            if !finite || r.x1 <= r.x0 || r.y1 <= r.y0 {
                return Err(Error::invalid(
                    format!("regions.{}", region.name()),
                    "rectangle must be finite with x1 > x0 and y1 > y0",
                ));
            }
        }
        let pairs = [
            (Region::Signal, Region::Idler),
            (Region::Signal, Region::Noise),
            (Region::Idler, Region::Noise),
        ];
        for (a, b) in pairs {
            if self.get(a).overlaps(self.get(b)) {
                return Err(Error::invalid(
                    format!("regions.{}", b.name()),
                    format!("overlaps regions.{}", a.name()),
                ));
            }
        }
        Ok(())
    }

    /// Region containing a point, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<Region> {
        Region::ALL
            .into_iter()
            .find(|&r| self.get(r).contains(x, y))
    }
}

/// Mapping between strip-local angles and camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub mrad_per_pixel: f64,
    pub macropixel: u32,
    pub regions: Rois,
}

impl Geometry {
    pub fn new(params: &DetectorParams, regions: &Rois) -> Self {
        Self {
            mrad_per_pixel: params.mrad_per_pixel,
            macropixel: params.macropixel,
            regions: *regions,
        }
    }

    pub fn scale(&self) -> f64 {
        self.mrad_per_pixel * f64::from(self.macropixel)
    }

    /// Strip-local angles (mrad) to camera position (macropixels).
    pub fn to_camera(&self, region: Region, theta: f64, phi: f64) -> (f64, f64) {
        let (cx, cy) = self.regions.get(region).center();
        let s = self.scale();
        match region {
            Region::Idler => (cx - theta / s, cy + phi / s),
            Region::Signal | Region::Noise => (cx + theta / s, cy + phi / s),
        }
    }

    /// Camera position to strip-local angles; inverse of [`Geometry::to_camera`].
    pub fn to_angles(&self, region: Region, x: f64, y: f64) -> (f64, f64) {
        let (cx, cy) = self.regions.get(region).center();
        let s = self.scale();
        match region {
            Region::Idler => ((cx - x) * s, (y - cy) * s),
            Region::Signal | Region::Noise => ((x - cx) * s, (y - cy) * s),
        }
    }

    /// Largest strip-local offset (mrad) reachable inside any region.
    pub fn max_offset(&self) -> f64 {
        Region::ALL
            .iter()
            .map(|&r| {
                let rect = self.regions.get(r);
                0.5 * rect.width().max(rect.height()) * self.scale()
            })
            .fold(0.0, f64::max)
    }

    pub fn event(&self, region: Region, x: f64, y: f64) -> DetectionEvent {
        let (theta, phi) = self.to_angles(region, x, y);
        DetectionEvent {
            region,
            x,
            y,
            theta,
            phi,
        }
    }
}

/// A detection (centroid) with its strip-local angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub region: Region,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub signal: u32,
    pub idler: u32,
    pub noise: u32,
}

impl Counts {
    pub fn get(&self, region: Region) -> u32 {
        match region {
            Region::Signal => self.signal,
            Region::Idler => self.idler,
            Region::Noise => self.noise,
        }
    }

    fn bump(&mut self, region: Region) {
        match region {
            Region::Signal => self.signal += 1,
            Region::Idler => self.idler += 1,
            Region::Noise => self.noise += 1,
        }
    }
}

/// Diagnostics of the raster pipeline. Event-level frames are always clean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameQuality {
    /// More than a quarter of the pixels passed the low threshold.
    pub crowded: bool,
    /// Components whose centroid fell outside every region.
    pub unassigned: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameEvents {
    pub frame_index: u64,
    pub events: Vec<DetectionEvent>,
    pub counts: Counts,
    pub quality: FrameQuality,
}

impl FrameEvents {
    pub fn new(frame_index: u64) -> Self {
        Self {
            frame_index,
            ..Self::default()
        }
    }

    pub fn push(&mut self, event: DetectionEvent) {
        self.counts.bump(event.region);
        self.events.push(event);
    }

    pub fn in_region(&self, region: Region) -> impl Iterator<Item = &DetectionEvent> + '_ {
        self.events.iter().filter(move |e| e.region == region)
    }
}

/// Event-level detection of one frame's pairs.
pub fn detect_events(
    pairs: &[PairEvent],
    params: &DetectorParams,
    rois: &Rois,
    seed: FrameSeed,
) -> Result<FrameEvents> {
    params.validate()?;
    rois.validate()?;
    Ok(detect_events_unchecked(
        pairs,
        params,
        &Geometry::new(params, rois),
        seed,
    ))
}

pub(crate) fn detect_events_unchecked(
    pairs: &[PairEvent],
    params: &DetectorParams,
    geometry: &Geometry,
    seed: FrameSeed,
) -> FrameEvents {
    let mut rng = seed.rng(Purpose::Detector);
    let mut frame = FrameEvents::new(seed.frame);
    let blur = params.blur_sigma;

    let place = |rng: &mut rand_chacha::ChaCha8Rng, region: Region, theta: f64, phi: f64| {
        let (theta, phi) = if blur > 0.0 {
            (
                theta + blur * rng.sample::<f64, _>(StandardNormal),
                phi + blur * rng.sample::<f64, _>(StandardNormal),
            )
        } else {
            (theta, phi)
        };
        let (x, y) = geometry.to_camera(region, theta, phi);
        if geometry.regions.get(region).contains(x, y) {
            Some(geometry.event(region, x, y))
        } else {
            None
        }
    };

    // Signal survivors first, then idler, so the per-arm order is stable.
    let mut idlers = Vec::new();
    for pair in pairs {
        let signal_hit = params.eta_s > 0.0 && rng.random_bool(params.eta_s);
        let idler_hit = params.eta_i > 0.0 && rng.random_bool(params.eta_i);
        if signal_hit {
            if let Some(e) = place(&mut rng, Region::Signal, pair.theta_s, pair.phi_s) {
                frame.push(e);
            }
        }
        if idler_hit {
            idlers.push((pair.theta_i, pair.phi_i));
        }
    }
    for (theta, phi) in idlers {
        if let Some(e) = place(&mut rng, Region::Idler, theta, phi) {
            frame.push(e);
        }
    }

    let darks = [
        (Region::Signal, params.dark_mean_s),
        (Region::Idler, params.dark_mean_i),
        (Region::Noise, params.dark_mean_noise),
    ];
    for (region, mean) in darks {
        let rect = geometry.regions.get(region);
        for _ in 0..poisson(&mut rng, mean) {
            let x = rng.random_range(rect.x0..rect.x1);
            let y = rng.random_range(rect.y0..rect.y1);
            frame.push(geometry.event(region, x, y));
        }
    }
    frame
}
