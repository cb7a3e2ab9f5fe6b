//! On-disk dataset format.
//!
//! Little-endian binary layout:
//!
//! ```text
//! magic    b"SKDS"
//! version  u16 (= 1)
//! dim      u16 (= 36)
//! classes  u32, then per class: string
//! clips    u32, then per clip:
//!   clip_id     string
//!   label       u32
//!   provenance  u8 (0 = original, 1 = augmented, followed by source string)
//!   n_frame     u32
//!   values      n_frame * 36 f64, row-major
//!   mask        ceil(n_frame * 36 / 8) bytes, LSB-first bit packing
//! string   u32 byte length + UTF-8 bytes
//! ```
//!
//! A CSV rendering (`clip_id,label,frame,x0,y0,...,mask`) is available for
//! inspection; it is write-only.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pose_ingest::{PoseSequence, PoseVector, POSE_DIM};
use crate::sequence_ops::{Dataset, Provenance};

pub const MAGIC: &[u8; 4] = b"SKDS";
pub const VERSION: u16 = 1;

pub fn encode_dataset(data: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + data.total_frames() * (POSE_DIM * 8 + 5));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(POSE_DIM as u16).to_le_bytes());
    put_u32(&mut out, data.class_names.len() as u32);
    for name in &data.class_names {
        put_str(&mut out, name);
    }
    put_u32(&mut out, data.sequences.len() as u32);
    for (seq, prov) in data.sequences.iter().zip(&data.provenance) {
        put_str(&mut out, &seq.clip_id);
        put_u32(&mut out, seq.label as u32);
        match prov {
            Provenance::Original => out.push(0),
            Provenance::Augmented { source } => {
                out.push(1);
                put_str(&mut out, source);
            }
        }
        put_u32(&mut out, seq.frames.len() as u32);
        for f in &seq.frames {
            for v in &f.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut bits = vec![0u8; (seq.frames.len() * POSE_DIM).div_ceil(8)];
        for (j, m) in seq.frames.iter().flat_map(|f| f.mask.iter()).enumerate() {
            if *m {
                bits[j / 8] |= 1 << (j % 8);
            }
        }
        out.extend_from_slice(&bits);
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::parse("dataset header", "bad magic"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::parse(
            "dataset header",
            format_args!("unsupported version {version}"),
        ));
    }
    let dim = r.u16("dim")?;
    if dim as usize != POSE_DIM {
        return Err(Error::parse(
            "dataset header",
            format_args!("pose dimension {dim}, expected {POSE_DIM}"),
        ));
    }
    let n_classes = r.count("class count", 4)?;
    let class_names = (0..n_classes)
        .map(|_| r.string("class name"))
        .collect::<Result<Vec<_>>>()?;

    let n_clips = r.count("clip count", 13)?;
    let mut sequences = Vec::with_capacity(n_clips);
    let mut provenance = Vec::with_capacity(n_clips);
    for c in 0..n_clips {
        let clip_id = r.string("clip id")?;
        let ctx = |what: &str| format!("clip {c} (`{clip_id}`) {what}");
        let label = r.u32(&ctx("label"))? as usize;
        let prov = match r.take(1, &ctx("provenance"))?[0] {
            0 => Provenance::Original,
            1 => Provenance::Augmented {
                source: r.string(&ctx("source id"))?,
            },
            t => {
                return Err(Error::parse(
                    ctx("provenance"),
                    format_args!("unknown tag {t}"),
                ))
            }
        };
        let n_frame = r.count(&ctx("frame count"), POSE_DIM * 8)?;
        let raw = r.take(n_frame * POSE_DIM * 8, &ctx("values"))?;
        let bits = r.take((n_frame * POSE_DIM).div_ceil(8), &ctx("mask"))?;
        let mut frames = Vec::with_capacity(n_frame);
        for t in 0..n_frame {
            let mut f = PoseVector::zeros();
            for j in 0..POSE_DIM {
                let k = t * POSE_DIM + j;
                let chunk: [u8; 8] = raw[8 * k..8 * k + 8].try_into().unwrap();
                f.values[j] = f64::from_le_bytes(chunk);
                f.mask[j] = bits[k / 8] >> (k % 8) & 1 == 1;
            }
            f.check_invariants()
                .map_err(|e| Error::parse(ctx(&format!("frame {t}")), e))?;
            frames.push(f);
        }
        sequences.push(PoseSequence {
            frames,
            label,
            clip_id,
        });
        provenance.push(prov);
    }
    if r.pos != bytes.len() {
        return Err(Error::parse(
            "dataset",
            format_args!("{} trailing bytes", bytes.len() - r.pos),
        ));
    }
    let data = Dataset {
        class_names,
        sequences,
        provenance,
    };
    data.validate().map_err(|e| Error::parse("dataset", e))?;
    Ok(data)
}

/// One row per frame: `clip_id,label,frame,x0,y0,...,x17,y17,mask` where
/// `mask` is a 36-character string of `0`/`1`.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut s = String::from("clip_id,label,frame");
    for k in 0..POSE_DIM / 2 {
        let _ = write!(s, ",x{k},y{k}");
    }
    s.push_str(",mask\n");
    for seq in &data.sequences {
        for (t, f) in seq.frames.iter().enumerate() {
            let _ = write!(s, "{},{},{}", seq.clip_id, seq.label, t);
            for v in &f.values {
                let _ = write!(s, ",{v}");
            }
            s.push(',');
            s.extend(f.mask.iter().map(|&m| if m { '1' } else { '0' }));
            s.push('\n');
        }
    }
    s
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::parse(
                    what,
                    format_args!("truncated at byte {} (need {n} more)", self.pos),
                )
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    /// A length prefix, rejected early if the remaining input cannot hold
    /// `count * min_item_bytes`.
    fn count(&mut self, what: &str, min_item_bytes: usize) -> Result<usize> {
        let n = self.u32(what)? as usize;
        let remaining = self.bytes.len() - self.pos;
        if n.saturating_mul(min_item_bytes) > remaining {
            return Err(Error::parse(
                what,
                format_args!("{n} items cannot fit in {remaining} remaining bytes"),
            ));
        }
        Ok(n)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.count(what, 1)?;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec()).map_err(|e| Error::parse(what, e))
    }
}
