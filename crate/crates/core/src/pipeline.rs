//! Frame generation and accumulation over many frames.
//!
//! Frames are processed in fixed-size chunks. Each chunk is folded into its
//! own partial accumulator on a worker thread, and partials are merged in
//! chunk order, so results do not depend on the number of threads.

use rayon::prelude::*;

use crate::detector::{
    detect_events_unchecked, process_frame, rasterize, FrameEvents, Geometry, RasterFrame,
};
use crate::error::{Error, Result};
use crate::io::RunConfig;
use crate::rng::FrameSeed;
use crate::source::sample_frame_unchecked;
use crate::spatial::CorrelationAccumulator;
use crate::stats::JointHistogram;

pub const CHUNK_FRAMES: u64 = 2048;
/// Chunks held in memory at once before merging.
const CHUNKS_PER_BATCH: u64 = 64;

/// Event generator for a validated configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: RunConfig,
    geometry: Geometry,
}

impl Simulator {
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            geometry: Geometry::new(&config.detector, &config.regions),
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn seed(&self, index: u64) -> FrameSeed {
        FrameSeed::new(self.config.run.seed, index)
    }

    /// Event-level frame.
    pub fn frame(&self, index: u64) -> FrameEvents {
        let seed = self.seed(index);
        let pairs = sample_frame_unchecked(&self.config.source, seed);
        detect_events_unchecked(&pairs, &self.config.detector, &self.geometry, seed)
    }

    /// Ground-truth events and their rendered raster.
    pub fn raster_frame(&self, index: u64) -> Result<(FrameEvents, RasterFrame)> {
        let truth = self.frame(index);
        let raster = rasterize(&truth, &self.config.detector, self.seed(index))?;
        Ok((truth, raster))
    }

    /// Frame recovered through the raster pipeline.
    pub fn processed_frame(&self, index: u64) -> Result<FrameEvents> {
        let (_, raster) = self.raster_frame(index)?;
        process_frame(&raster, &self.config.detector, &self.config.regions)
    }

    /// Position accumulator whose grid covers every region.
    pub fn new_accumulator(&self) -> Result<CorrelationAccumulator> {
        let width = self.config.bin_width();
        CorrelationAccumulator::new(width, self.geometry.max_offset() + width)
    }
}

pub(crate) fn pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::invalid("parallelism", e.to_string()))
}

/// Fold frames `0..n_frames` into one accumulator.
///
/// `fold` adds one frame to a partial accumulator; `merge` appends a later
/// partial to an earlier one. `parallelism == 0` uses all cores.
pub fn fold_frames<A, I, F, M>(
    n_frames: u64,
    parallelism: usize,
    init: I,
    fold: F,
    merge: M,
) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) -> Result<()> + Sync,
    M: Fn(&mut A, A) -> Result<()>,
{
    let pool = pool(parallelism)?;
    let n_chunks = n_frames.div_ceil(CHUNK_FRAMES);
    let mut total = init();
    let mut first = 0;
    while first < n_chunks {
        let last = (first + CHUNKS_PER_BATCH).min(n_chunks);
        let partials: Vec<Result<A>> = pool.install(|| {
            (first..last)
                .into_par_iter()
                .map(|chunk| {
                    let mut acc = init();
                    let start = chunk * CHUNK_FRAMES;
                    for index in start..(start + CHUNK_FRAMES).min(n_frames) {
                        fold(&mut acc, index)?;
                    }
                    Ok(acc)
                })
                .collect()
        });
        for partial in partials {
            merge(&mut total, partial?)?;
        }
        first = last;
    }
    Ok(total)
}

/// Generate frames in order, handing each batch to `sink` sequentially.
pub fn for_each_frame_batch<T, G, S>(
    n_frames: u64,
    parallelism: usize,
    generate: G,
    mut sink: S,
) -> Result<()>
where
    T: Send,
    G: Fn(u64) -> Result<T> + Sync,
    S: FnMut(Vec<T>) -> Result<()>,
{
    let pool = pool(parallelism)?;
    let batch = CHUNK_FRAMES * CHUNKS_PER_BATCH / 4;
    let mut start = 0;
    while start < n_frames {
        let end = (start + batch).min(n_frames);
        let items: Result<Vec<T>> =
            pool.install(|| (start..end).into_par_iter().map(&generate).collect());
        sink(items?)?;
        start = end;
    }
    Ok(())
}

/// Everything accumulated from one in-process run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunProducts {
    pub histogram: JointHistogram,
    pub accumulator: CorrelationAccumulator,
}

/// Simulate `config.run.n_frames` event-level frames and accumulate both the
/// joint photocount histogram and the position correlations.
pub fn run_in_process(config: &RunConfig, parallelism: usize) -> Result<RunProducts> {
    let sim = Simulator::new(config)?;
    let template = RunProducts {
        histogram: JointHistogram::new(config.run.cutoff),
        accumulator: sim.new_accumulator()?,
    };
    fold_frames(
        config.run.n_frames,
        parallelism,
        || template.clone(),
        |acc, index| {
            let frame = sim.frame(index);
            acc.histogram
                .accumulate(frame.counts.signal as usize, frame.counts.idler as usize);
            acc.accumulator.accumulate_events(&frame);
            Ok(())
        },
        |acc, part| {
            acc.histogram.merge(&part.histogram)?;
            acc.accumulator.merge(&part.accumulator)
        },
    )
}

/// Joint photocount histogram only (cheaper than [`run_in_process`]).
pub fn histogram_in_process(config: &RunConfig, parallelism: usize) -> Result<JointHistogram> {
    let sim = Simulator::new(config)?;
    fold_frames(
        config.run.n_frames,
        parallelism,
        || JointHistogram::new(config.run.cutoff),
        |h, index| {
            let c = sim.frame(index).counts;
            h.accumulate(c.signal as usize, c.idler as usize);
            Ok(())
        },
        |h, part| h.merge(&part),
    )
}
