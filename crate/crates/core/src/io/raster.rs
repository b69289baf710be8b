//! Raster frame files: a header, a `frame= width= height=` line, then one
//! whitespace-separated row of pixel values per line.

use std::io::Write;
use std::path::Path;

use super::{check_header, create, finish, header_line, read_to_string, write_err};
use crate::detector::RasterFrame;
use crate::error::{Error, Result};

const KIND: &str = "raster";

pub fn write_raster(path: impl AsRef<Path>, frame: &RasterFrame) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let err = write_err(path);
    writeln!(w, "{}", header_line(KIND)).map_err(&err)?;
    writeln!(
        w,
        "frame={} width={} height={}",
        frame.frame_index, frame.width, frame.height
    )
    .map_err(&err)?;
    let mut row = String::new();
    for chunk in frame.data.chunks(frame.width) {
        row.clear();
        for (k, v) in chunk.iter().enumerate() {
            if k > 0 {
                row.push(' ');
            }
            if *v == 0.0 {
                row.push('0');
            } else {
                row.push_str(&v.to_string());
            }
        }
        writeln!(w, "{row}").map_err(&err)?;
    }
    finish(w, path)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterFrame> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    check_header(path, lines.next(), KIND)?;
    let bad = |line: usize, message: String| Error::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let dims = lines
        .next()
        .ok_or_else(|| bad(2, "missing dimensions line".into()))?;
    let (mut frame, mut width, mut height) = (None, None, None);
    for field in dims.split_whitespace() {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| bad(2, format!("expected key=value, found `{field}`")))?;
        let parsed: u64 = v
            .parse()
            .map_err(|_| bad(2, format!("bad value for `{k}`: `{v}`")))?;
        match k {
            "frame" => frame = Some(parsed),
            "width" => width = Some(parsed as usize),
            "height" => height = Some(parsed as usize),
            _ => return Err(bad(2, format!("unknown field `{k}`"))),
        }
    }
    let (frame, width, height) = match (frame, width, height) {
        (Some(f), Some(w), Some(h)) => (f, w, h),
        _ => {
            return Err(bad(
                2,
                "dimensions line needs frame, width and height".into(),
            ))
        }
    };
    let mut data = Vec::with_capacity(width * height);
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let line_no = k + 3;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| bad(line_no, format!("bad pixel value `{tok}`")))?,
            );
        }
        if data.len() - before != width {
            return Err(bad(
                line_no,
                format!("row has {} values, expected {width}", data.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != height {
        return Err(bad(rows + 2, format!("{rows} rows, expected {height}")));
    }
    RasterFrame::from_data(frame, width, height, data).map_err(|e| bad(1, e.to_string()))
}
