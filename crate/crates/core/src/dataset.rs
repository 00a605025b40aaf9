//! The MTP1 pair-dataset file format and split utilities.
//!
//! Layout, all integers little-endian:
//!   bytes 0..4   magic "MTP1"
//!   bytes 4..8   format version (u32, currently 1)
//!   byte  8      transform type tag (u8)
//!   bytes 9..13  P, bits per item (u32)
//!   bytes 13..21 sample count (u64)
//! then per sample: label (u16), x bits packed LSB-first into ceil(P/8)
//! bytes, y bits likewise.

use crate::error::{Error, Result};
use crate::pianoroll::BitVec;
use crate::rng::Rng;
use crate::transforms::{PairDataset, PairSample, TransformType};

pub const MTP1_MAGIC: &[u8; 4] = b"MTP1";
pub const MTP1_VERSION: u32 = 1;

pub fn write_mtp1(ds: &PairDataset) -> Vec<u8> {
    let p = ds.samples.first().map(|s| s.x.len()).unwrap_or(520);
    let mut out = Vec::new();
    out.extend_from_slice(MTP1_MAGIC);
    out.extend_from_slice(&MTP1_VERSION.to_le_bytes());
    out.push(ds.transform.tag());
    out.extend_from_slice(&(p as u32).to_le_bytes());
    out.extend_from_slice(&(ds.samples.len() as u64).to_le_bytes());
    for s in &ds.samples {
        out.extend_from_slice(&s.label.to_le_bytes());
        out.extend_from_slice(s.x.bytes());
        out.extend_from_slice(s.y.bytes());
    }
    out
}

pub fn read_mtp1(bytes: &[u8]) -> Result<PairDataset> {
    let need = |n: usize, at: usize| -> Result<()> {
        if at + n > bytes.len() {
            Err(Error::MalformedData("truncated MTP1 file".into()))
        } else {
            Ok(())
        }
    };
    need(21, 0)?;
    if &bytes[0..4] != MTP1_MAGIC {
        return Err(Error::MalformedData("not an MTP1 file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != MTP1_VERSION {
        return Err(Error::MalformedData(format!("unsupported MTP1 version {version}")));
    }
    let transform = TransformType::from_tag(bytes[8])?;
    let p = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[13..21].try_into().unwrap()) as usize;
    let item_bytes = p.div_ceil(8);
    let sample_bytes = 2 + 2 * item_bytes;
    need(count * sample_bytes, 21)?;
    if bytes.len() != 21 + count * sample_bytes {
        return Err(Error::MalformedData("trailing bytes after MTP1 samples".into()));
    }
    let mut samples = Vec::with_capacity(count);
    let mut at = 21;
    for _ in 0..count {
        let label = u16::from_le_bytes(bytes[at..at + 2].try_into().unwrap());
        at += 2;
        if label as usize >= transform.class_count() {
            return Err(Error::MalformedData(format!(
                "label {label} out of range for {}",
                transform.name()
            )));
        }
        let x = BitVec::from_bytes(p, bytes[at..at + item_bytes].to_vec())?;
        at += item_bytes;
        let y = BitVec::from_bytes(p, bytes[at..at + item_bytes].to_vec())?;
        at += item_bytes;
        samples.push(PairSample { x, y, label });
    }
    Ok(PairDataset { transform, samples })
}

/// Deterministic shuffled split into train / validation / test.
pub fn split_dataset(
    ds: &PairDataset,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    rng: &mut Rng,
) -> Result<(PairDataset, PairDataset, PairDataset)> {
    let total = n_train + n_val + n_test;
    if ds.samples.len() < total {
        return Err(Error::InsufficientData(format!(
            "split needs {total} samples, dataset has {}",
            ds.samples.len()
        )));
    }
    let mut idx: Vec<usize> = (0..ds.samples.len()).collect();
    rng.shuffle(&mut idx);
    let take = |range: std::ops::Range<usize>| PairDataset {
        transform: ds.transform,
        samples: idx[range].iter().map(|&i| ds.samples[i].clone()).collect(),
    };
    Ok((
        take(0..n_train),
        take(n_train..n_train + n_val),
        take(n_train + n_val..total),
    ))
}
