//! On-disk formats. Every file starts with a `# twinbeam <kind> v<N>` line
//! (the frame stream carries the same information in its JSON header).

mod config;
mod frames;
mod raster;
mod tables;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub use config::{
    read_config, read_config_with_warnings, write_config, RunConfig, RunControls, CONFIG_SCHEMA,
};
pub use frames::{
    append_frame, stream_frames, FrameFileHeader, FrameReader, FrameRecord, FrameWriter,
    FRAME_SCHEMA,
};
pub use raster::{read_raster, write_raster};
pub use tables::*;

pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

pub(crate) fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(format!("writing {}", path.display()), e)
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub(crate) fn header_line(kind: &str) -> String {
    format!("# twinbeam {kind} v{FORMAT_VERSION}")
}

pub(crate) fn check_header(path: &Path, line: Option<&str>, kind: &str) -> Result<()> {
    let expected = header_line(kind);
    match line {
        Some(l) if l.trim_end() == expected => Ok(()),
        Some(l) => Err(Error::Format {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{expected}`, found `{}`", l.trim_end()),
        }),
        None => Err(Error::Format {
            path: path.to_path_buf(),
            line: 1,
            message: format!("empty file, expected header `{expected}`"),
        }),
    }
}

pub(crate) fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(write_err(path))
}
