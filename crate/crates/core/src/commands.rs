//! End-to-end commands behind the `twinbeam` binary.
//!
//! Each command writes its artifacts and returns a [`CommandOutcome`] holding
//! the written paths and a machine-readable summary (also stored as
//! `summary.json` next to directory outputs).

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::detector::{process_frame, Region};
use crate::error::{Error, Result};
use crate::io::{self, FrameFileHeader, FrameWriter, RunConfig};
use crate::pipeline::{for_each_frame_batch, Simulator};
use crate::spatial::{correlation_area_report, cross_section, Coordinate, CorrelationAccumulator};
use crate::stats::{
    correlation_coefficient, criterion_exact, criterion_test, CorrelationResult, JointHistogram,
    PhotodetectionModel,
};

#[derive(Debug, Clone, Serialize)]
pub struct CommandOutcome {
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
}

impl CommandOutcome {
    fn new() -> Self {
        Self {
            artifacts: Vec::new(),
            summary: Value::Null,
        }
    }

    /// Record an artifact path and hand it back for writing.
    fn add(&mut self, path: PathBuf) -> PathBuf {
        self.artifacts.push(path.clone());
        path
    }

    fn write_summary(&mut self, dir: &Path, summary: Value) -> Result<()> {
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
        std::fs::write(&path, text + "\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.add(path);
        self.summary = summary;
        Ok(())
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

/// Simulate `n_frames` frames into a frame-event file. With `rasters`, each
/// frame is also rendered to `<rasters>/frame_XXXXXXXX.raster` and the event
/// file holds the ground truth.
pub fn simulate(
    config: &RunConfig,
    out: &Path,
    parallelism: usize,
    rasters: Option<&Path>,
) -> Result<CommandOutcome> {
    let sim = Simulator::new(config)?;
    if let Some(dir) = rasters {
        ensure_dir(dir)?;
    }
    let header = FrameFileHeader::new(*sim.geometry(), Some(config.run.seed));
    let mut writer = FrameWriter::create(out, &header)?;
    let mut outcome = CommandOutcome::new();
    let mut totals = [0u64; 3];
    for_each_frame_batch(
        config.run.n_frames,
        parallelism,
        |k| {
            if rasters.is_some() {
                sim.raster_frame(k)
                    .map(|(truth, raster)| (truth, Some(raster)))
            } else {
                Ok((sim.frame(k), None))
            }
        },
        |batch| {
            for (events, raster) in batch {
                for (t, r) in totals.iter_mut().zip(Region::ALL) {
                    *t += u64::from(events.counts.get(r));
                }
                writer.write_events(&events)?;
                if let (Some(dir), Some(raster)) = (rasters, raster) {
                    io::write_raster(
                        dir.join(format!("frame_{:08}.raster", events.frame_index)),
                        &raster,
                    )?;
                }
            }
            Ok(())
        },
    )?;
    writer.finish()?;
    outcome.add(out.to_path_buf());
    let n = config.run.n_frames.max(1) as f64;
    outcome.summary = json!({
        "command": "simulate",
        "n_frames": config.run.n_frames,
        "seed": config.run.seed,
        "mean_counts": {
            "signal": totals[0] as f64 / n,
            "idler": totals[1] as f64 / n,
            "noise": totals[2] as f64 / n,
        },
        "rasters": rasters.map(|d| d.display().to_string()),
    });
    Ok(outcome)
}

#[derive(Debug, Clone, Copy)]
pub struct JointOptions {
    pub cutoff: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for JointOptions {
    fn default() -> Self {
        let run = io::RunControls::default();
        Self {
            cutoff: run.cutoff,
            resamples: run.resamples,
            seed: run.seed,
        }
    }
}

/// Joint photocount histogram of a frame file.
pub fn histogram_from_frames(frames: &Path, cutoff: usize) -> Result<JointHistogram> {
    let mut hist = JointHistogram::new(cutoff);
    for record in io::stream_frames(frames)? {
        let r = record?;
        hist.accumulate(r.counts[0] as usize, r.counts[1] as usize);
    }
    Ok(hist)
}

fn correlation_json(r: &CorrelationResult) -> Value {
    json!({"c_p": r.c_p, "std_err": r.std_err, "n_frames": r.n_frames, "resamples": r.bootstrap_resamples})
}

/// Photon-number analysis: histogram, marginals, difference map, correlation
/// coefficient and classicality criterion.
pub fn joint(frames: &Path, out_dir: &Path, opts: &JointOptions) -> Result<CommandOutcome> {
    let hist = histogram_from_frames(frames, opts.cutoff)?;
    if hist.n_frames() == 0 {
        return Err(Error::EmptyHistogram);
    }
    ensure_dir(out_dir)?;
    let mut outcome = CommandOutcome::new();
    io::write_histogram(outcome.add(out_dir.join("joint_histogram.tsv")), &hist)?;
    io::write_marginals(
        outcome.add(out_dir.join("marginals.tsv")),
        &hist.marginals()?,
    )?;
    io::write_count_matrix(
        outcome.add(out_dir.join("difference_map.tsv")),
        "difference-map",
        &hist.difference_map()?,
    )?;
    let report = criterion_test(&hist)?.with_bootstrap(&hist, opts.resamples, opts.seed);
    io::write_criterion(outcome.add(out_dir.join("criterion.tsv")), &report)?;
    io::write_excess_grid(outcome.add(out_dir.join("criterion_excess.tsv")), &report)?;
    let corr = correlation_coefficient(&hist, opts.resamples, opts.seed)?;
    io::write_correlation(outcome.add(out_dir.join("correlation.tsv")), &corr)?;

    let near = report.max_significance_near_diagonal(1);
    outcome.write_summary(
        out_dir,
        json!({
            "command": "joint",
            "n_frames": hist.n_frames(),
            "truncated": hist.is_truncated(),
            "correlation": correlation_json(&corr),
            "violating_bins": report.violations.len(),
            "max_significance": report.max_significance.map(|(z, s, i)| json!({"value": z, "n_s": s, "n_i": i})),
            "max_significance_near_diagonal": near.map(|(z, s, i)| json!({"value": z, "n_s": s, "n_i": i})),
        }),
    )?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy)]
pub struct SpatialOptions {
    /// Defaults to one macropixel.
    pub bin_width: Option<f64>,
    pub fit_half_range: f64,
}

impl Default for SpatialOptions {
    fn default() -> Self {
        Self {
            bin_width: None,
            fit_half_range: io::RunControls::default().fit_half_range_mrad,
        }
    }
}

/// Accumulate position correlations from a frame file.
pub fn accumulate_from_frames(
    frames: &Path,
    bin_width: Option<f64>,
) -> Result<CorrelationAccumulator> {
    let reader = io::stream_frames(frames)?;
    let Some(header) = reader.header().cloned() else {
        return Err(Error::EmptyAccumulator);
    };
    let geometry = header.geometry;
    let width = bin_width.unwrap_or_else(|| geometry.scale());
    let mut acc = CorrelationAccumulator::new(width, geometry.max_offset() + width)?;
    for record in reader {
        acc.accumulate_events(&record?.to_events(&geometry));
    }
    Ok(acc)
}

/// Correlation-area analysis: position histograms, cross-sections and fits.
pub fn spatial(frames: &Path, out_dir: &Path, opts: &SpatialOptions) -> Result<CommandOutcome> {
    let acc = accumulate_from_frames(frames, opts.bin_width)?;
    ensure_dir(out_dir)?;
    let mut outcome = CommandOutcome::new();
    for coordinate in [Coordinate::Phi, Coordinate::Theta] {
        let name = coordinate.name();
        io::write_grid(
            outcome.add(out_dir.join(format!("positions_{name}.tsv"))),
            acc.grid(coordinate),
            coordinate,
        )?;
        let profile = cross_section(&acc, coordinate)?;
        io::write_profile(
            outcome.add(out_dir.join(format!("cross_section_{name}.tsv"))),
            &profile,
            None,
        )?;
    }
    let report = correlation_area_report(&acc, opts.fit_half_range)?;
    for (name, axis) in [("phi", &report.phi), ("theta", &report.theta)] {
        io::write_profile(
            outcome.add(out_dir.join(format!("fit_{name}.tsv"))),
            &axis.profile,
            Some(&axis.fit),
        )?;
    }
    io::write_fit_report(outcome.add(out_dir.join("correlation_area.tsv")), &report)?;
    let fit_json = |f: &crate::spatial::GaussianFit| json!({"fwhm": f.fwhm, "fwhm_err": f.fwhm_err, "center": f.center, "resolution_limited": f.resolution_limited});
    outcome.write_summary(
        out_dir,
        json!({
            "command": "spatial",
            "frames": acc.frames,
            "contributing_frames": acc.contributing_frames,
            "theta": fit_json(&report.theta.fit),
            "phi": fit_json(&report.phi.fit),
        }),
    )?;
    Ok(outcome)
}

/// Exact joint distribution of the photodetection model. With `frames`, the
/// criterion table lists the significances such a measurement would expect.
pub fn oracle(
    model: &PhotodetectionModel,
    cutoff: Option<usize>,
    frames: Option<u64>,
    out_dir: &Path,
) -> Result<CommandOutcome> {
    model.validate()?;
    let cutoff = cutoff.unwrap_or_else(|| model.suggested_cutoff());
    let pmf = model.joint(cutoff)?;
    ensure_dir(out_dir)?;
    let mut outcome = CommandOutcome::new();
    io::write_pmf(outcome.add(out_dir.join("joint_pmf.tsv")), &pmf)?;
    io::write_marginals(outcome.add(out_dir.join("marginals.tsv")), &pmf.marginals())?;
    io::write_count_matrix(
        outcome.add(out_dir.join("difference_map.tsv")),
        "difference-map",
        &pmf.difference_map(),
    )?;
    let report = criterion_exact(&pmf, frames);
    io::write_criterion(outcome.add(out_dir.join("criterion.tsv")), &report)?;
    io::write_excess_grid(outcome.add(out_dir.join("criterion_excess.tsv")), &report)?;
    let c_p = pmf.correlation().ok();
    outcome.write_summary(
        out_dir,
        json!({
            "command": "oracle",
            "model": {"mu": model.mu, "eta_s": model.eta_s, "eta_i": model.eta_i, "dark_s": model.dark_s, "dark_i": model.dark_i},
            "cutoff": cutoff,
            "tail_mass": pmf.tail_mass,
            "f00": pmf.get(0, 0),
            "c_p": c_p,
            "violating_bins": report.violations.len(),
            "max_significance": report.max_significance.map(|(z, s, i)| json!({"value": z, "n_s": s, "n_i": i})),
        }),
    )?;
    Ok(outcome)
}

/// Run the frame-processing pipeline over every `*.raster` file in a
/// directory (sorted by name) and write the recovered events.
pub fn process(raster_dir: &Path, config: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    config.validate()?;
    let entries = std::fs::read_dir(raster_dir)
        .map_err(|e| Error::io(format!("reading {}", raster_dir.display()), e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "raster"))
        .collect();
    files.sort();
    let sim = Simulator::new(config)?;
    let header = FrameFileHeader::new(*sim.geometry(), None);
    let mut writer = FrameWriter::create(out, &header)?;
    let (mut crowded, mut unassigned, mut events) = (0u64, 0u64, 0u64);
    for file in &files {
        let raster = io::read_raster(file)?;
        let frame = process_frame(&raster, &config.detector, &config.regions)?;
        crowded += u64::from(frame.quality.crowded);
        unassigned += u64::from(frame.quality.unassigned);
        events += frame.events.len() as u64;
        writer.write_events(&frame)?;
    }
    writer.finish()?;
    let mut outcome = CommandOutcome::new();
    outcome.add(out.to_path_buf());
    outcome.summary = json!({
        "command": "process",
        "frames": files.len(),
        "events": events,
        "crowded_frames": crowded,
        "unassigned_components": unassigned,
    });
    Ok(outcome)
}
