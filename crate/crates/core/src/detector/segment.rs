use std::collections::VecDeque;

use super::{DetectorParams, FrameEvents, Geometry, RasterFrame, Rois};
use crate::error::Result;

const CROWDED_FRACTION: f64 = 0.25;

/// Recover detection events from a raster frame.
///
/// Pixels at or above `threshold_high` seed components, which grow over
/// 8-connected pixels at or above `threshold_low`. Each component becomes one
/// event at its intensity-weighted centroid and is attributed to the region
/// containing that centroid.
pub fn process_frame(
    raster: &RasterFrame,
    params: &DetectorParams,
    rois: &Rois,
) -> Result<FrameEvents> {
    params.validate()?;
    rois.validate()?;
    let geometry = Geometry::new(params, rois);
    let (w, h) = (raster.width, raster.height);
    let low = params.threshold_low;
    let high = params.threshold_high;

    let mut visited = vec![false; w * h];
    let mut frame = FrameEvents::new(raster.frame_index);
    let mut queue = VecDeque::new();
    let mut above_low = 0usize;

    for idx in 0..w * h {
        let v = raster.data[idx];
        if v >= low {
            above_low += 1;
        }
        if visited[idx] || v < high {
            continue;
        }
        visited[idx] = true;
        queue.push_back(idx);
        let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
        while let Some(p) = queue.pop_front() {
            let (px, py) = (p % w, p / w);
            let value = raster.data[p];
            sw += value;
            sx += value * (px as f64 + 0.5);
            sy += value * (py as f64 + 0.5);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (px as i64 + dx, py as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if !visited[n] && raster.data[n] >= low {
                        visited[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        if sw <= 0.0 {
            // zero thresholds on an empty patch
            continue;
        }
        let (cx, cy) = (sx / sw, sy / sw);
        match rois.locate(cx, cy) {
            Some(region) => frame.push(geometry.event(region, cx, cy)),
            None => frame.quality.unassigned += 1,
        }
    }
    frame.quality.crowded = above_low as f64 > CROWDED_FRACTION * (w * h) as f64;
    Ok(frame)
}
