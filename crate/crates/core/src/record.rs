//! `.mmr` multimodal record container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "MMR1"  u16 version=1  u32 meta_len  meta (UTF-8 JSON)  u32 frame_count
//! frame_count × { 6×f32 q, 6×f32 qd, w·h×u8 image, spf×f32 audio, 128×f32 spec, u8 contacts }
//! u32 CRC32 of every preceding byte
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{SpectrogramExtractor, SPEC_BINS};

pub const MAGIC: &[u8; 4] = b"MMR1";
pub const VERSION: u16 = 1;
pub const JOINT_COUNT: usize = 6;
pub const STRICT_SPEC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub frame_rate: u32,
    pub sample_rate: u32,
    pub image_width: u32,
    pub image_height: u32,
    pub joint_count: u32,
    pub drums: Vec<String>,
    pub tab: String,
    pub seed: u64,
    pub noise_sigma: f64,
}

impl RecordMeta {
    pub fn samples_per_frame(&self) -> usize {
        if self.frame_rate == 0 {
            0
        } else {
            (self.sample_rate / self.frame_rate) as usize
        }
    }

    pub fn pixels(&self) -> usize {
        self.image_width as usize * self.image_height as usize
    }

    /// Encoded size of one frame in bytes.
    pub fn frame_bytes(&self) -> usize {
        4 * JOINT_COUNT * 2 + self.pixels() + 4 * self.samples_per_frame() + 4 * SPEC_BINS + 1
    }

    fn validate(&self) -> Result<(), RecordError> {
        if self.frame_rate == 0 || self.sample_rate % self.frame_rate != 0 {
            return Err(RecordError::Shape(format!(
                "sample rate {} is not a multiple of frame rate {}",
                self.sample_rate, self.frame_rate
            )));
        }
        if self.joint_count as usize != JOINT_COUNT {
            return Err(RecordError::Shape(format!("joint count {} != {JOINT_COUNT}", self.joint_count)));
        }
        if self.drums.len() > 8 {
            return Err(RecordError::Shape(format!("{} drums do not fit a u8 contact mask", self.drums.len())));
        }
        if self.pixels() == 0 {
            return Err(RecordError::Shape("empty image".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MMFrame {
    pub q: [f32; JOINT_COUNT],
    pub qd: [f32; JOINT_COUNT],
    pub image: Vec<u8>,
    pub audio: Vec<f32>,
    pub spec: Vec<f32>,
    /// Bit `i` set when drum `i` of `meta.drums` was struck during the frame.
    pub contacts: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalRecord {
    pub meta: RecordMeta,
    pub frames: Vec<MMFrame>,
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),
    #[error("CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error("stream truncated: needed {needed} bytes, have {have}")]
    Truncated { needed: u64, have: u64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed metadata: {0}")]
    Meta(String),
    #[error("stored spectrum of frame {frame} differs from its audio by {diff:e}")]
    SpecMismatch { frame: usize, diff: f64 },
}

impl MultimodalRecord {
    pub fn validate(&self) -> Result<(), RecordError> {
        self.meta.validate()?;
        if self.frames.is_empty() {
            return Err(RecordError::Shape("a record needs at least one frame".into()));
        }
        let spf = self.meta.samples_per_frame();
        for (i, f) in self.frames.iter().enumerate() {
            if f.image.len() != self.meta.pixels() || f.audio.len() != spf || f.spec.len() != SPEC_BINS {
                return Err(RecordError::Shape(format!("frame {i} does not match the metadata")));
            }
        }
        Ok(())
    }

    /// Exact encoded size.
    pub fn encoded_len(&self) -> usize {
        let meta = serde_json::to_vec(&self.meta).map(|v| v.len()).unwrap_or(0);
        4 + 2 + 4 + meta + 4 + self.frames.len() * self.meta.frame_bytes() + 4
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, RecordError> {
        self.validate()?;
        let meta = serde_json::to_vec(&self.meta).map_err(|e| RecordError::Meta(e.to_string()))?;
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        buf.extend_from_slice(&meta);
        buf.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for f in &self.frames {
            for v in f.q.iter().chain(&f.qd) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.extend_from_slice(&f.image);
            for v in f.audio.iter().chain(&f.spec) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.push(f.contacts);
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        Ok(buf)
    }

    /// Recomputes every frame's spectrum from its stored audio and compares.
    pub fn check_spectra(&self) -> Result<(), RecordError> {
        let ex = SpectrogramExtractor::new(self.meta.samples_per_frame());
        for (i, f) in self.frames.iter().enumerate() {
            let audio: Vec<f64> = f.audio.iter().map(|v| f64::from(*v)).collect();
            let spec = ex.frame(&audio).map_err(|e| RecordError::Shape(e.to_string()))?;
            let diff = spec
                .iter()
                .zip(&f.spec)
                .map(|(a, b)| (a - f64::from(*b)).abs())
                .fold(0.0, f64::max);
            if diff > STRICT_SPEC_TOLERANCE {
                return Err(RecordError::SpecMismatch { frame: i, diff });
            }
        }
        Ok(())
    }
}

pub fn write_record<W: Write>(rec: &MultimodalRecord, sink: &mut W) -> Result<usize, RecordError> {
    let bytes = rec.to_bytes()?;
    sink.write_all(&bytes)?;
    Ok(bytes.len())
}

pub fn save_record(rec: &MultimodalRecord, path: &Path) -> Result<usize, RecordError> {
    let bytes = rec.to_bytes()?;
    fs::write(path, &bytes)?;
    Ok(bytes.len())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RecordError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or(RecordError::Truncated {
            needed: self.pos as u64 + n as u64,
            have: self.buf.len() as u64,
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, RecordError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, RecordError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, out: &mut [f32]) -> Result<(), RecordError> {
        let raw = self.take(4 * out.len())?;
        for (o, c) in out.iter_mut().zip(raw.chunks_exact(4)) {
            *o = f32::from_le_bytes(c.try_into().expect("4 bytes"));
        }
        Ok(())
    }
}

fn stored_crc_matches(buf: &[u8]) -> Option<(u32, u32)> {
    if buf.len() < 4 {
        return None;
    }
    let (body, tail) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    (stored != computed).then_some((stored, computed))
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<RecordMeta, RecordError> {
    let magic: [u8; 4] = cur.take(4)?.try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(RecordError::BadMagic(magic));
    }
    let version = cur.u16()?;
    if version != VERSION {
        return Err(RecordError::UnsupportedVersion(version));
    }
    let len = cur.u32()? as usize;
    let raw = cur.take(len)?;
    serde_json::from_slice(raw).map_err(|e| RecordError::Meta(e.to_string()))
}

/// Parses and validates a complete record held in memory.
pub fn decode_record(buf: &[u8]) -> Result<MultimodalRecord, RecordError> {
    let mut cur = Cursor { buf, pos: 0 };
    let meta = match parse_header(&mut cur) {
        Ok(m) => m,
        // A damaged header usually shows up as bad JSON; report the CRC
        // failure instead when the checksum disagrees.
        Err(RecordError::Meta(msg)) => {
            if let Some((stored, computed)) = stored_crc_matches(buf) {
                return Err(RecordError::Crc { stored, computed });
            }
            return Err(RecordError::Meta(msg));
        }
        Err(e) => return Err(e),
    };
    meta.validate()?;
    let frame_count = cur.u32()? as u64;
    let needed = cur.pos as u64 + frame_count * meta.frame_bytes() as u64 + 4;
    if (buf.len() as u64) < needed {
        return Err(RecordError::Truncated {
            needed,
            have: buf.len() as u64,
        });
    }
    if buf.len() as u64 > needed {
        return Err(RecordError::Shape(format!("{} trailing bytes", buf.len() as u64 - needed)));
    }
    if let Some((stored, computed)) = stored_crc_matches(buf) {
        return Err(RecordError::Crc { stored, computed });
    }
    if frame_count == 0 {
        return Err(RecordError::Shape("record has no frames".into()));
    }

    let spf = meta.samples_per_frame();
    let pixels = meta.pixels();
    let mut frames = Vec::with_capacity(frame_count as usize);
    for _ in 0..frame_count {
        let mut q = [0.0f32; JOINT_COUNT];
        let mut qd = [0.0f32; JOINT_COUNT];
        cur.f32s(&mut q)?;
        cur.f32s(&mut qd)?;
        let image = cur.take(pixels)?.to_vec();
        let mut audio = vec![0.0f32; spf];
        cur.f32s(&mut audio)?;
        let mut spec = vec![0.0f32; SPEC_BINS];
        cur.f32s(&mut spec)?;
        let contacts = cur.take(1)?[0];
        if meta.drums.len() < 8 && contacts >> meta.drums.len() != 0 {
            return Err(RecordError::Shape(format!("contact mask {contacts:#04x} names unknown drums")));
        }
        frames.push(MMFrame {
            q,
            qd,
            image,
            audio,
            spec,
            contacts,
        });
    }
    Ok(MultimodalRecord { meta, frames })
}

pub fn read_record<R: Read>(source: &mut R) -> Result<MultimodalRecord, RecordError> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    decode_record(&buf)
}

/// Like [`read_record`], then checks every stored spectrum against its audio.
pub fn read_record_strict<R: Read>(source: &mut R) -> Result<MultimodalRecord, RecordError> {
    let rec = read_record(source)?;
    rec.check_spectra()?;
    Ok(rec)
}

pub fn load_record(path: &Path) -> Result<MultimodalRecord, RecordError> {
    decode_record(&fs::read(path)?)
}

/// Reads only the magic, version and metadata of a record file.
pub fn read_meta(path: &Path) -> Result<(RecordMeta, u32), RecordError> {
    let mut file = fs::File::open(path)?;
    let mut head = [0u8; 10];
    file.read_exact(&mut head).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => RecordError::Truncated { needed: 10, have: 0 },
        _ => RecordError::Io(e),
    })?;
    let len = u32::from_le_bytes(head[6..10].try_into().expect("4 bytes")) as u64;
    let file_len = file.metadata()?.len();
    // Never allocate more than the file can hold.
    let take = len.saturating_add(4).min(file_len.saturating_sub(10));
    let mut rest = Vec::with_capacity(take as usize);
    file.take(take).read_to_end(&mut rest)?;
    let mut buf = head.to_vec();
    buf.extend_from_slice(&rest);
    let mut cur = Cursor { buf: &buf, pos: 0 };
    let meta = parse_header(&mut cur)?;
    meta.validate()?;
    let frames = cur.u32()?;
    Ok((meta, frames))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetaSummary {
    pub frames: u32,
    pub frame_rate: u32,
    pub sample_rate: u32,
    pub drums: Vec<String>,
    pub seed: u64,
    pub noise_sigma: f64,
}

#[derive(Debug, Default)]
pub struct DatasetIndex {
    pub entries: Vec<(PathBuf, MetaSummary)>,
    pub skipped: Vec<(PathBuf, String)>,
}

/// Lists the `.mmr` files of a directory, sorted by path, reading only
/// their headers. Unreadable files are reported in `skipped`.
pub fn dataset_index(dir: &Path) -> io::Result<DatasetIndex> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mmr"))
        .collect();
    paths.sort();
    let mut index = DatasetIndex::default();
    for path in paths {
        match read_meta(&path) {
            Ok((meta, frames)) => index.entries.push((
                path,
                MetaSummary {
                    frames,
                    frame_rate: meta.frame_rate,
                    sample_rate: meta.sample_rate,
                    drums: meta.drums,
                    seed: meta.seed,
                    noise_sigma: meta.noise_sigma,
                },
            )),
            Err(e) => index.skipped.push((path, e.to_string())),
        }
    }
    Ok(index)
}
