//! Trace containers, the two compression schemes (per-cycle mean and
//! mean-of-squares) and the bit-exact HTRC file format.
//!
//! HTRC layout: 4 magic bytes "HTRC", u16 LE version (= 1), u8 source tag,
//! then five u64 LE counts (cycles or samples, samples_per_cycle or 0,
//! slot_offset, num_slots, slot_len), then the payload as IEEE-754 f64 LE.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::power::{PowerTrace, RawTrace};

pub const HTRC_MAGIC: [u8; 4] = *b"HTRC";
pub const HTRC_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O failed: {0}")]
    Io(#[from] io::Error),
    #[error("not an HTRC file (bad magic)")]
    BadMagic,
    #[error("unsupported HTRC version {0}")]
    BadVersion(u16),
    #[error("unknown source tag {0}")]
    BadTag(u8),
    #[error("truncated HTRC payload")]
    Truncated,
    #[error("non-finite payload value at index {0}")]
    NonFinite(usize),
}

/// Where the per-cycle values of a compressed trace came from.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
#[repr(u8)]
pub enum SourceTag {
    /// Simulated per-cycle power (noiseless simulator output).
    Simulated = 0,
    /// Mean-of-squares compression of raw samples.
    RawMsq = 1,
    /// Arithmetic-mean compression of raw samples.
    RawMean = 2,
}

impl SourceTag {
    fn from_u8(v: u8) -> Result<Self, TraceError> {
        match v {
            0 => Ok(SourceTag::Simulated),
            1 => Ok(SourceTag::RawMsq),
            2 => Ok(SourceTag::RawMean),
            other => Err(TraceError::BadTag(other)),
        }
    }
}

const RAW_TAG: u8 = 255;

/// One power value per clock cycle: the attack's input grid before
/// fragmentation into slots.
#[derive(Clone, PartialEq, Debug)]
pub struct CompressedTrace {
    pub values: Vec<f64>,
    pub slot_offset: usize,
    pub num_slots: usize,
    pub slot_len: usize,
    pub source: SourceTag,
}

impl CompressedTrace {
    /// A simulator power trace is already one value per cycle.
    pub fn from_power(trace: &PowerTrace) -> Self {
        Self {
            values: trace.values.clone(),
            slot_offset: trace.slot_offset,
            num_slots: trace.num_slots,
            slot_len: trace.slot_len,
            source: SourceTag::Simulated,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "cycle_index,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", i, v)?;
        }
        Ok(())
    }
}

/// Per cycle: arithmetic mean of that cycle's samples.
pub fn compress_mean(raw: &RawTrace) -> CompressedTrace {
    let s = raw.samples_per_cycle;
    let values = raw
        .samples
        .chunks_exact(s)
        .map(|c| c.iter().sum::<f64>() / s as f64)
        .collect();
    CompressedTrace {
        values,
        slot_offset: raw.slot_offset,
        num_slots: raw.num_slots,
        slot_len: raw.slot_len,
        source: SourceTag::RawMean,
    }
}

/// Per cycle: mean of the squared samples. Squaring makes the compression
/// insensitive to the sign of the waveform and suppresses zero-mean noise
/// down to a constant offset.
pub fn compress_msq(raw: &RawTrace) -> CompressedTrace {
    let s = raw.samples_per_cycle;
    let values = raw
        .samples
        .chunks_exact(s)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / s as f64)
        .collect();
    CompressedTrace {
        values,
        slot_offset: raw.slot_offset,
        num_slots: raw.num_slots,
        slot_len: raw.slot_len,
        source: SourceTag::RawMsq,
    }
}

/// Either kind of trace, as stored in an HTRC file.
#[derive(Clone, PartialEq, Debug)]
pub enum TraceFile {
    Compressed(CompressedTrace),
    Raw(RawTrace),
}

impl TraceFile {
    pub fn as_compressed(&self) -> Option<&CompressedTrace> {
        match self {
            TraceFile::Compressed(t) => Some(t),
            TraceFile::Raw(_) => None,
        }
    }

    /// Compressed view of the file: raw traces are compressed with the
    /// mean-of-squares scheme on the fly.
    pub fn into_compressed(self) -> CompressedTrace {
        match self {
            TraceFile::Compressed(t) => t,
            TraceFile::Raw(r) => compress_msq(&r),
        }
    }
}

fn write_header<W: Write>(
    w: &mut W,
    tag: u8,
    count: usize,
    samples_per_cycle: usize,
    slot_offset: usize,
    num_slots: usize,
    slot_len: usize,
) -> io::Result<()> {
    w.write_all(&HTRC_MAGIC)?;
    w.write_all(&HTRC_VERSION.to_le_bytes())?;
    w.write_all(&[tag])?;
    for v in [count, samples_per_cycle, slot_offset, num_slots, slot_len] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    Ok(())
}

fn write_payload<W: Write>(w: &mut W, values: &[f64]) -> Result<(), TraceError> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(TraceError::NonFinite(i));
        }
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Serializes a trace into HTRC bytes.
pub fn encode_trace(trace: &TraceFile) -> Result<Vec<u8>, TraceError> {
    let mut buf = Vec::new();
    match trace {
        TraceFile::Compressed(t) => {
            write_header(
                &mut buf,
                t.source as u8,
                t.values.len(),
                0,
                t.slot_offset,
                t.num_slots,
                t.slot_len,
            )?;
            write_payload(&mut buf, &t.values)?;
        }
        TraceFile::Raw(r) => {
            write_header(
                &mut buf,
                RAW_TAG,
                r.samples.len(),
                r.samples_per_cycle,
                r.slot_offset,
                r.num_slots,
                r.slot_len,
            )?;
            write_payload(&mut buf, &r.samples)?;
        }
    }
    Ok(buf)
}

/// Writes a trace file atomically (temp file + rename).
pub fn write_trace(path: &Path, trace: &TraceFile) -> Result<(), TraceError> {
    let bytes = encode_trace(trace)?;
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(&bytes)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Parses HTRC bytes back into a trace; round-trips bit-exactly.
pub fn decode_trace(bytes: &[u8]) -> Result<TraceFile, TraceError> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if magic != HTRC_MAGIC {
        return Err(TraceError::BadMagic);
    }
    let mut v16 = [0u8; 2];
    read_exact(&mut r, &mut v16)?;
    let version = u16::from_le_bytes(v16);
    if version != HTRC_VERSION {
        return Err(TraceError::BadVersion(version));
    }
    let mut tag = [0u8; 1];
    read_exact(&mut r, &mut tag)?;
    let mut counts = [0usize; 5];
    for c in counts.iter_mut() {
        let mut v64 = [0u8; 8];
        read_exact(&mut r, &mut v64)?;
        *c = u64::from_le_bytes(v64) as usize;
    }
    let [count, samples_per_cycle, slot_offset, num_slots, slot_len] = counts;
    if r.len() < count * 8 {
        return Err(TraceError::Truncated);
    }
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let v = f64::from_le_bytes(r[i * 8..i * 8 + 8].try_into().unwrap());
        if !v.is_finite() {
            return Err(TraceError::NonFinite(i));
        }
        values.push(v);
    }
    if tag[0] == RAW_TAG {
        if samples_per_cycle == 0 {
            return Err(TraceError::BadTag(RAW_TAG));
        }
        Ok(TraceFile::Raw(RawTrace {
            samples: values,
            samples_per_cycle,
            slot_offset,
            num_slots,
            slot_len,
        }))
    } else {
        Ok(TraceFile::Compressed(CompressedTrace {
            values,
            slot_offset,
            num_slots,
            slot_len,
            source: SourceTag::from_u8(tag[0])?,
        }))
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<(), TraceError> {
    if r.len() < buf.len() {
        return Err(TraceError::Truncated);
    }
    buf.copy_from_slice(&r[..buf.len()]);
    *r = &r[buf.len()..];
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<TraceFile, TraceError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_trace(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn raw(samples: Vec<f64>, s: usize) -> RawTrace {
        RawTrace {
            samples,
            samples_per_cycle: s,
            slot_offset: 0,
            num_slots: 1,
            slot_len: 1,
        }
    }

    #[test]
    fn compress_mean_examples() {
        let t = compress_mean(&raw(vec![3.0, 3.0, 3.0, 3.0], 2));
        assert_eq!(t.values, vec![3.0, 3.0]);
        let t = compress_mean(&raw(vec![1.0, 3.0], 2));
        assert_eq!(t.values, vec![2.0]);
        assert_eq!(t.source, SourceTag::RawMean);
    }

    #[test]
    fn compress_mean_matches_resummation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = 17;
        let samples: Vec<f64> = (0..s * 40).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let t = compress_mean(&raw(samples.clone(), s));
        for (c, v) in t.values.iter().enumerate() {
            // independent summation in reverse order
            let mut sum = 0.0;
            for i in (0..s).rev() {
                sum += samples[c * s + i];
            }
            let expect = sum / s as f64;
            assert!((v - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn compress_msq_examples() {
        let t = compress_msq(&raw(vec![3.0, 3.0], 2));
        assert_eq!(t.values, vec![9.0]);
        let t = compress_msq(&raw(vec![3.0, 4.0], 2));
        assert_eq!(t.values, vec![12.5]);
        assert_eq!(t.source, SourceTag::RawMsq);
    }

    #[test]
    fn compress_msq_homogeneous_and_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = 8;
        let samples: Vec<f64> = (0..s * 20).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let base = compress_msq(&raw(samples.clone(), s));
        let scaled = compress_msq(&raw(samples.iter().map(|v| v * 3.0).collect(), s));
        for (b, sc) in base.values.iter().zip(scaled.values.iter()) {
            assert!(*b >= 0.0);
            assert!((sc - 9.0 * b).abs() <= 1e-9 * b.max(1.0));
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = TraceFile::Compressed(CompressedTrace {
            values: (0..500).map(|_| rng.gen_range(-1e6..1e6)).collect(),
            slot_offset: 61,
            num_slots: 8,
            slot_len: 54,
            source: SourceTag::Simulated,
        });
        let bytes = encode_trace(&t).unwrap();
        assert_eq!(decode_trace(&bytes).unwrap(), t);
        // files too
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.htrc");
        write_trace(&path, &t).unwrap();
        assert_eq!(read_trace(&path).unwrap(), t);
    }

    #[test]
    fn empty_trace_round_trips() {
        let t = TraceFile::Compressed(CompressedTrace {
            values: vec![],
            slot_offset: 0,
            num_slots: 0,
            slot_len: 54,
            source: SourceTag::RawMsq,
        });
        let bytes = encode_trace(&t).unwrap();
        assert_eq!(decode_trace(&bytes).unwrap(), t);
    }

    #[test]
    fn raw_trace_round_trips() {
        let t = TraceFile::Raw(raw(vec![0.5, -0.5, 1.5, 2.5], 2));
        let bytes = encode_trace(&t).unwrap();
        assert_eq!(decode_trace(&bytes).unwrap(), t);
    }

    #[test]
    fn error_kinds_are_distinct() {
        let t = TraceFile::Compressed(CompressedTrace {
            values: vec![1.0, 2.0],
            slot_offset: 0,
            num_slots: 1,
            slot_len: 2,
            source: SourceTag::Simulated,
        });
        let mut bytes = encode_trace(&t).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_trace(&bad_magic), Err(TraceError::BadMagic)));

        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(
            decode_trace(&bad_version),
            Err(TraceError::BadVersion(9))
        ));

        let mut bad_tag = bytes.clone();
        bad_tag[6] = 77;
        assert!(matches!(decode_trace(&bad_tag), Err(TraceError::BadTag(77))));

        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode_trace(&bytes), Err(TraceError::Truncated)));
    }

    #[test]
    fn nan_payload_is_rejected() {
        let t = TraceFile::Compressed(CompressedTrace {
            values: vec![1.0, f64::NAN],
            slot_offset: 0,
            num_slots: 1,
            slot_len: 2,
            source: SourceTag::Simulated,
        });
        assert!(matches!(encode_trace(&t), Err(TraceError::NonFinite(1))));
    }
}
