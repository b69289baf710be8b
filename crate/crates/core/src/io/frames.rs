//! Frame-event stream: newline-delimited JSON, optionally gzip-compressed.
//!
//! The first line is a [`FrameFileHeader`]; every following line is one
//! [`FrameRecord`]. Positions are macropixel coordinates; the header carries
//! the geometry needed to convert them back to angles. Floats are written in
//! shortest round-trip form, so a write/read cycle is bit-exact.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::FORMAT_VERSION;
use crate::detector::{FrameEvents, FrameQuality, Geometry, Region};
use crate::error::{Error, Result};

pub const FRAME_SCHEMA: &str = "twinbeam.frames";
const FLOAT_FORMAT: &str = "f64-shortest-roundtrip";
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFileHeader {
    pub schema: String,
    pub version: u32,
    pub float_format: String,
    pub geometry: Geometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
}

impl FrameFileHeader {
    pub fn new(geometry: Geometry, master_seed: Option<u64>) -> Self {
        Self {
            schema: FRAME_SCHEMA.to_string(),
            version: FORMAT_VERSION,
            float_format: FLOAT_FORMAT.to_string(),
            geometry,
            master_seed,
        }
    }
}

fn is_clean(q: &FrameQuality) -> bool {
    *q == FrameQuality::default()
}

/// One frame as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    pub signal: Vec<[f64; 2]>,
    pub idler: Vec<[f64; 2]>,
    pub noise: Vec<[f64; 2]>,
    /// `(c_S, c_I, c_N)`.
    pub counts: [u32; 3],
    #[serde(default, skip_serializing_if = "is_clean")]
    pub quality: FrameQuality,
}

impl FrameRecord {
    pub fn from_events(events: &FrameEvents) -> Self {
        let list = |r| events.in_region(r).map(|e| [e.x, e.y]).collect();
        Self {
            frame: events.frame_index,
            signal: list(Region::Signal),
            idler: list(Region::Idler),
            noise: list(Region::Noise),
            counts: [
                events.counts.signal,
                events.counts.idler,
                events.counts.noise,
            ],
            quality: events.quality,
        }
    }

    pub fn to_events(&self, geometry: &Geometry) -> FrameEvents {
        let mut events = FrameEvents::new(self.frame);
        for (region, list) in [
            (Region::Signal, &self.signal),
            (Region::Idler, &self.idler),
            (Region::Noise, &self.noise),
        ] {
            for &[x, y] in list {
                events.push(geometry.event(region, x, y));
            }
        }
        events.quality = self.quality;
        events
    }

    fn check_counts(&self) -> std::result::Result<(), String> {
        let lens = [self.signal.len(), self.idler.len(), self.noise.len()];
        if lens
            .iter()
            .zip(&self.counts)
            .any(|(l, c)| *l != *c as usize)
        {
            return Err(format!(
                "counts {:?} do not match list lengths {:?}",
                self.counts, lens
            ));
        }
        Ok(())
    }
}

/// Streaming writer; gzip-compressed when the path ends in `.gz`.
pub struct FrameWriter {
    inner: Box<dyn Write>,
    path: PathBuf,
    line: String,
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

impl FrameWriter {
    pub fn create(path: impl AsRef<Path>, header: &FrameFileHeader) -> Result<Self> {
        let path = path.as_ref();
        let file = super::create(path)?;
        let mut writer = Self::wrap(file, path);
        writer.write_json(header)?;
        Ok(writer)
    }

    fn wrap(file: BufWriter<File>, path: &Path) -> Self {
        let inner: Box<dyn Write> = if is_gz(path) {
            Box::new(GzEncoder::new(file, Compression::default()))
        } else {
            Box::new(file)
        };
        Self {
            inner,
            path: path.to_path_buf(),
            line: String::new(),
        }
    }

    fn write_json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        self.line.clear();
        self.line
            .push_str(&serde_json::to_string(value).expect("frame data serialises"));
        self.line.push('\n');
        self.inner
            .write_all(self.line.as_bytes())
            .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))
    }

    pub fn write(&mut self, record: &FrameRecord) -> Result<()> {
        self.write_json(record)
    }

    pub fn write_events(&mut self, events: &FrameEvents) -> Result<()> {
        self.write(&FrameRecord::from_events(events))
    }

    /// Flush and close; required to complete a gzip stream.
    pub fn finish(mut self) -> Result<()> {
        self.inner
            .flush()
            .map_err(|e| Error::io(format!("writing {}", self.path.display()), e))?;
        drop(self.inner);
        Ok(())
    }
}

/// Append one record, writing `header` first if the file is new or empty.
pub fn append_frame(
    path: impl AsRef<Path>,
    header: &FrameFileHeader,
    record: &FrameRecord,
) -> Result<()> {
    let path = path.as_ref();
    let empty = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut writer = FrameWriter::wrap(BufWriter::new(file), path);
    if empty {
        writer.write_json(header)?;
    }
    writer.write(record)?;
    writer.finish()
}

/// Streaming reader over a frame file, plain or gzip.
pub struct FrameReader {
    lines: Box<dyn BufRead>,
    path: PathBuf,
    header: Option<FrameFileHeader>,
    line_no: usize,
    buf: String,
    done: bool,
    /// Set when the last line was cut short and skipped.
    pub truncated_tail: bool,
}

impl FrameReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let open_err = |e| Error::io(format!("opening {}", path.display()), e);
        let mut file = File::open(&path).map_err(open_err)?;
        let mut magic = [0u8; 2];
        let n = read_prefix(&mut file, &mut magic).map_err(open_err)?;
        let file = File::open(&path).map_err(open_err)?;
        let lines: Box<dyn BufRead> = if n == 2 && magic == GZIP_MAGIC {
            Box::new(BufReader::new(MultiGzDecoder::new(BufReader::new(file))))
        } else {
            Box::new(BufReader::new(file))
        };
        let mut reader = Self {
            lines,
            path,
            header: None,
            line_no: 0,
            buf: String::new(),
            done: false,
            truncated_tail: false,
        };
        reader.read_header()?;
        Ok(reader)
    }

    pub fn header(&self) -> Option<&FrameFileHeader> {
        self.header.as_ref()
    }

    fn format_err(&self, message: String) -> Error {
        Error::Format {
            path: self.path.clone(),
            line: self.line_no,
            message,
        }
    }

    /// Next raw line; `Ok(None)` at end of input. The bool tells whether the
    /// line was newline-terminated.
    fn next_line(&mut self) -> Result<Option<bool>> {
        self.buf.clear();
        let n = self
            .lines
            .read_line(&mut self.buf)
            .map_err(|e| Error::io(format!("reading {}", self.path.display()), e))?;
        if n == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        Ok(Some(self.buf.ends_with('\n')))
    }

    fn read_header(&mut self) -> Result<()> {
        if self.next_line()?.is_none() {
            self.done = true;
            return Ok(());
        }
        let header: FrameFileHeader = serde_json::from_str(self.buf.trim_end())
            .map_err(|e| self.format_err(format!("invalid header: {e}")))?;
        if header.schema != FRAME_SCHEMA || header.version != FORMAT_VERSION {
            return Err(self.format_err(format!(
                "schema mismatch: found {} v{}, expected {FRAME_SCHEMA} v{FORMAT_VERSION}",
                header.schema, header.version
            )));
        }
        self.header = Some(header);
        Ok(())
    }
}

fn read_prefix(file: &mut File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match file.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

impl Iterator for FrameReader {
    type Item = Result<FrameRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let terminated = match self.next_line() {
                Ok(Some(t)) => t,
                Ok(None) => {
                    self.done = true;
                    return None;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            };
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<FrameRecord>(text)
                .map_err(|e| e.to_string())
                .and_then(|r| r.check_counts().map(|_| r));
            return match parsed {
                Ok(record) => Some(Ok(record)),
                Err(_) if !terminated => {
                    log::warn!(
                        "{}:{}: truncated final record skipped",
                        self.path.display(),
                        self.line_no
                    );
                    self.truncated_tail = true;
                    self.done = true;
                    None
                }
                Err(message) => {
                    self.done = true;
                    Some(Err(self.format_err(message)))
                }
            };
        }
    }
}

/// Open a frame file for streaming.
pub fn stream_frames(path: impl AsRef<Path>) -> Result<FrameReader> {
    FrameReader::open(path)
}
