use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erf;

use super::{DetectorParams, FrameEvents};
use crate::error::{Error, Result};
use crate::rng::{FrameSeed, Purpose};

/// Simulated camera frame: row-major intensities over macropixels.
///
/// Pixel `(ix, iy)` covers `[ix, ix+1) x [iy, iy+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterFrame {
    pub frame_index: u64,
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl RasterFrame {
    pub fn zeros(frame_index: u64, width: usize, height: usize) -> Self {
        Self {
            frame_index,
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(
        frame_index: u64,
        width: usize,
        height: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(
                "raster",
                format!("{} values for a {width}x{height} frame", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(
                "raster",
                format!("pixel value {v} is not finite and >= 0"),
            ));
        }
        Ok(Self {
            frame_index,
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.data[iy * self.width + ix]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    fn add(&mut self, ix: i64, iy: i64, value: f64) {
        if ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height {
            self.data[iy as usize * self.width + ix as usize] += value;
        }
    }
}

/// Render events as Gaussian splats with random gain plus readout noise.
pub fn rasterize(
    events: &FrameEvents,
    params: &DetectorParams,
    seed: FrameSeed,
) -> Result<RasterFrame> {
    rasterize_traced(events, params, seed).map(|(frame, _)| frame)
}

/// Like [`rasterize`], also returning the gain drawn for each event.
pub fn rasterize_traced(
    events: &FrameEvents,
    params: &DetectorParams,
    seed: FrameSeed,
) -> Result<(RasterFrame, Vec<f64>)> {
    params.validate()?;
    let mut rng = seed.rng(Purpose::Raster);
    let mut frame = RasterFrame::zeros(
        events.frame_index,
        params.frame_width as usize,
        params.frame_height as usize,
    );
    let mut gains = Vec::with_capacity(events.events.len());
    for event in &events.events {
        let gain =
            (params.gain_mean + params.gain_sigma * rng.sample::<f64, _>(StandardNormal)).max(0.0);
        gains.push(gain);
        splat(&mut frame, event.x, event.y, gain, params.psf_sigma);
    }
    if params.readout_sigma > 0.0 {
        for v in &mut frame.data {
            *v = (*v + params.readout_sigma * rng.sample::<f64, _>(StandardNormal)).max(0.0);
        }
    }
    Ok((frame, gains))
}

/// Pixel-integrated Gaussian weights along one axis, starting at pixel `lo`.
fn axis_weights(center: f64, sigma: f64, lo: i64, hi: i64) -> Vec<f64> {
    let cdf = |t: f64| 0.5 * (1.0 + erf((t - center) / (sigma * std::f64::consts::SQRT_2)));
    (lo..=hi)
        .map(|k| cdf(k as f64 + 1.0) - cdf(k as f64))
        .collect()
}

fn splat(frame: &mut RasterFrame, x: f64, y: f64, amplitude: f64, sigma: f64) {
    let px = x.floor() as i64;
    let py = y.floor() as i64;
    if sigma == 0.0 {
        frame.add(px, py, amplitude);
        return;
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let wx = axis_weights(x, sigma, px - radius, px + radius);
    let wy = axis_weights(y, sigma, py - radius, py + radius);
    for (j, wyj) in wy.iter().enumerate() {
        for (i, wxi) in wx.iter().enumerate() {
            frame.add(
                px - radius + i as i64,
                py - radius + j as i64,
                amplitude * wxi * wyj,
            );
        }
    }
}
