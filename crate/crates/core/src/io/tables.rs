//! Plot-ready text tables: tab-separated, with a schema header line and
//! `#`-prefixed metadata.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{check_header, create, finish, header_line, read_to_string, write_err};
use crate::error::{Error, Result};
use crate::spatial::{
    Coordinate, CorrelationAreaReport, CrossSectionProfile, GaussianFit, WeightedGrid,
};
use crate::stats::{CorrelationResult, CriterionReport, JointHistogram, JointPmf, Marginals};

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn with_file(
    path: &Path,
    kind: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header_line(kind)).map_err(write_err(path))?;
    body(&mut w).map_err(write_err(path))?;
    finish(w, path)
}

/// Joint histogram: metadata line, then one row per `c_S` with `cutoff + 1`
/// integer columns over `c_I`.
pub fn write_histogram(path: impl AsRef<Path>, hist: &JointHistogram) -> Result<()> {
    with_file(path.as_ref(), "joint-histogram", |w| {
        writeln!(
            w,
            "# n_frames={} cutoff={} truncated={} overflow={}",
            hist.n_frames(),
            hist.cutoff(),
            hist.is_truncated(),
            hist.overflow()
        )?;
        for row in hist.counts().chunks(hist.side()) {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(w, "{}", cells.join("\t"))?;
        }
        Ok(())
    })
}

pub fn read_histogram(path: impl AsRef<Path>) -> Result<JointHistogram> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    check_header(path, lines.next(), "joint-histogram")?;
    let bad = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| bad(2, "missing metadata line".into()))?;
    let (mut n_frames, mut cutoff, mut truncated, mut overflow) = (None, None, None, None);
    for field in meta.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| bad(2, format!("bad field `{field}`")))?;
        let int = || {
            v.parse::<u64>()
                .map_err(|_| bad(2, format!("bad value for `{k}`")))
        };
        match k {
            "n_frames" => n_frames = Some(int()?),
            "cutoff" => cutoff = Some(int()? as usize),
            "overflow" => overflow = Some(int()?),
            "truncated" => {
                truncated = Some(
                    v.parse::<bool>()
                        .map_err(|_| bad(2, format!("bad value for `{k}`")))?,
                )
            }
            _ => return Err(bad(2, format!("unknown field `{k}`"))),
        }
    }
    let (Some(n_frames), Some(cutoff)) = (n_frames, cutoff) else {
        return Err(bad(2, "metadata needs n_frames and cutoff".into()));
    };
    let mut counts = Vec::with_capacity((cutoff + 1) * (cutoff + 1));
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let before = counts.len();
        for tok in line.split_whitespace() {
            counts.push(
                tok.parse::<u64>()
                    .map_err(|_| bad(k + 3, format!("bad count `{tok}`")))?,
            );
        }
        if counts.len() - before != cutoff + 1 {
            return Err(bad(k + 3, format!("expected {} columns", cutoff + 1)));
        }
    }
    JointHistogram::from_parts(
        cutoff,
        counts,
        n_frames,
        overflow.unwrap_or(0),
        truncated.unwrap_or(false),
    )
    .map_err(|e| bad(1, e.to_string()))
}

pub fn write_marginals(path: impl AsRef<Path>, m: &Marginals) -> Result<()> {
    with_file(path.as_ref(), "marginals", |w| {
        writeln!(w, "n\tsignal\tidler")?;
        for (n, (s, i)) in m.signal.iter().zip(&m.idler).enumerate() {
            writeln!(w, "{n}\t{s}\t{i}")?;
        }
        Ok(())
    })
}

/// Square matrix over `(c_S, c_I)`; rows are `c_S`.
pub fn write_count_matrix(path: impl AsRef<Path>, kind: &str, values: &[Vec<f64>]) -> Result<()> {
    with_file(path.as_ref(), kind, |w| {
        let cols: Vec<String> = (0..values.first().map_or(0, Vec::len))
            .map(|k| k.to_string())
            .collect();
        writeln!(w, "c_S\\c_I\t{}", cols.join("\t"))?;
        for (s, row) in values.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(w, "{s}\t{}", cells.join("\t"))?;
        }
        Ok(())
    })
}

pub fn write_pmf(path: impl AsRef<Path>, pmf: &JointPmf) -> Result<()> {
    let side = pmf.side();
    let rows: Vec<Vec<f64>> = pmf.probs.chunks(side).map(<[f64]>::to_vec).collect();
    write_count_matrix(path, "joint-pmf", &rows)
}

/// Criterion excess as a grid, for contour plots.
pub fn write_excess_grid(path: impl AsRef<Path>, report: &CriterionReport) -> Result<()> {
    let side = report.cutoff + 1;
    let rows: Vec<Vec<f64>> = report
        .bins
        .chunks(side)
        .map(|r| r.iter().map(|b| b.excess).collect())
        .collect();
    write_count_matrix(path, "criterion-excess", &rows)
}

pub fn write_criterion(path: impl AsRef<Path>, report: &CriterionReport) -> Result<()> {
    with_file(path.as_ref(), "criterion", |w| {
        match report.n_frames {
            Some(n) => writeln!(w, "# n_frames={n} cutoff={}", report.cutoff)?,
            None => writeln!(w, "# n_frames=NA cutoff={}", report.cutoff)?,
        }
        match report.max_significance {
            Some((z, s, i)) => writeln!(w, "# max_significance={z} at=({s},{i})")?,
            None => writeln!(w, "# max_significance=NA")?,
        }
        writeln!(
            w,
            "n_s\tn_i\tf\tbound\texcess\tstd_err\tsignificance\tbootstrap_significance\tviolates"
        )?;
        for b in &report.bins {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                b.n_s,
                b.n_i,
                b.f,
                b.bound,
                b.excess,
                b.std_err,
                opt(b.significance),
                opt(b.bootstrap_significance),
                u8::from(b.excess > 0.0)
            )?;
        }
        Ok(())
    })
}

pub fn write_correlation(path: impl AsRef<Path>, r: &CorrelationResult) -> Result<()> {
    with_file(path.as_ref(), "correlation", |w| {
        writeln!(w, "c_p\tstd_err\tn_frames\tbootstrap_resamples")?;
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            r.c_p, r.std_err, r.n_frames, r.bootstrap_resamples
        )
    })
}

/// 2D position histogram with bin-centre axis headers (mrad).
pub fn write_grid(
    path: impl AsRef<Path>,
    grid: &WeightedGrid,
    coordinate: Coordinate,
) -> Result<()> {
    with_file(path.as_ref(), "position-histogram", |w| {
        writeln!(
            w,
            "# coordinate={} bins={} bin_width={} outside={}",
            coordinate.name(),
            grid.bins,
            grid.bin_width,
            grid.outside
        )?;
        let centers: Vec<String> = (0..grid.bins).map(|k| grid.center(k).to_string()).collect();
        writeln!(w, "signal\\idler\t{}", centers.join("\t"))?;
        for a in 0..grid.bins {
            let cells: Vec<String> = (0..grid.bins).map(|b| grid.get(a, b).to_string()).collect();
            writeln!(w, "{}\t{}", grid.center(a), cells.join("\t"))?;
        }
        Ok(())
    })
}

/// Read back a position histogram written by [`write_grid`].
pub fn read_grid(path: impl AsRef<Path>) -> Result<WeightedGrid> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    check_header(path, lines.next(), "position-histogram")?;
    let bad = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| bad(2, "missing metadata".into()))?;
    let (mut bins, mut width, mut outside) = (None, None, 0.0);
    for field in meta.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| bad(2, format!("bad field `{field}`")))?;
        let num = || {
            v.parse::<f64>()
                .map_err(|_| bad(2, format!("bad value for `{k}`")))
        };
        match k {
            "bins" => bins = Some(num()? as usize),
            "bin_width" => width = Some(num()?),
            "outside" => outside = num()?,
            _ => {}
        }
    }
    let (Some(bins), Some(bin_width)) = (bins, width) else {
        return Err(bad(2, "metadata needs bins and bin_width".into()));
    };
    lines.next();
    let mut weights = Vec::with_capacity(bins * bins);
    for (k, line) in lines.enumerate() {
        let vals: Vec<&str> = line.split('\t').skip(1).collect();
        if vals.len() != bins {
            return Err(bad(k + 4, format!("expected {bins} columns")));
        }
        for v in vals {
            weights.push(
                v.parse::<f64>()
                    .map_err(|_| bad(k + 4, format!("bad weight `{v}`")))?,
            );
        }
    }
    if weights.len() != bins * bins {
        return Err(bad(0, "wrong number of rows".into()));
    }
    Ok(WeightedGrid {
        bins,
        bin_width,
        weights,
        outside,
    })
}

pub fn write_profile(
    path: impl AsRef<Path>,
    profile: &CrossSectionProfile,
    fit: Option<&GaussianFit>,
) -> Result<()> {
    with_file(path.as_ref(), "cross-section", |w| {
        writeln!(
            w,
            "# coordinate={} bin_width={}",
            profile.coordinate.name(),
            profile.bin_width
        )?;
        writeln!(w, "s\tweight\tfit")?;
        for (s, y) in profile.s.iter().zip(&profile.weight) {
            writeln!(w, "{s}\t{y}\t{}", opt(fit.map(|f| f.eval(*s))))?;
        }
        Ok(())
    })
}

pub fn write_fit_report(path: impl AsRef<Path>, report: &CorrelationAreaReport) -> Result<()> {
    with_file(path.as_ref(), "correlation-area", |w| {
        writeln!(w, "# contributing_frames={}", report.contributing_frames)?;
        writeln!(
            w,
            "coordinate\tfwhm\tfwhm_err\tamplitude\tamplitude_err\tcenter\tcenter_err\tsigma\tsigma_err\toffset\toffset_err\tresidual_norm\titerations\tconverged\tresolution_limited"
        )?;
        for (name, f) in [("theta", &report.theta.fit), ("phi", &report.phi.fit)] {
            writeln!(
                w,
                "{name}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.fwhm,
                f.fwhm_err,
                f.amplitude,
                f.amplitude_err,
                f.center,
                f.center_err,
                f.sigma,
                f.sigma_err,
                f.offset,
                f.offset_err,
                f.residual_norm,
                f.iterations,
                f.converged,
                f.resolution_limited
            )?;
        }
        Ok(())
    })
}
