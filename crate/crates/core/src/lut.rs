//! Calibration lookup tables: the optimal assembly of every interior code,
//! persisted so a controller can drive the array without solving the
//! selection problem online.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size   field
//! 0       4      magic "SRL1"
//! 4       2      version (1)
//! 6       1      n0
//! 7       1      nk
//! 8       8      delta (f64)
//! 16      2      n, component count
//! 18      1      grouping tag
//! 19      1      grouping parameters (s << 4 | n0' for the redundant family, else 0)
//! 20      4n     nominal weights (u32)
//! 20+4n   8n     actual weights (f64)
//! 20+12n  ...    mask bitstream: codes 1..2^nk-1 ascending, n bits each,
//!                LSB-first, no per-code alignment, zero padded to a byte
//! end-4   4      CRC-32 (IEEE) of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ComponentArray, Grouping};
use crate::reference::{decode_assembly, Mask, SelectedQuantizer, TargetGrid};

pub const MAGIC: [u8; 4] = *b"SRL1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;
pub const CRC_LEN: usize = 4;

/// Bits in the mask stream: `(2^nk - 1) * n`.
pub fn mask_stream_bits(nk: u32, n: usize) -> u64 {
    ((1u64 << nk) - 1) * n as u64
}

/// Total file size: header, weights, packed masks and checksum.
pub fn lut_size(nk: u32, n: usize) -> usize {
    HEADER_LEN + 12 * n + mask_stream_bits(nk, n).div_ceil(8) as usize + CRC_LEN
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LutHeader {
    pub version: u16,
    pub n0: u8,
    pub nk: u8,
    pub delta: f64,
    pub n: u16,
    pub grouping: Grouping,
}

struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
}

impl BitWriter {
    fn new(capacity: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(capacity),
            acc: 0,
            filled: 0,
        }
    }

    fn push(&mut self, value: u64, bits: u32) {
        for b in 0..bits {
            self.acc |= (value >> b & 1) << self.filled;
            self.filled += 1;
            if self.filled == 64 {
                self.bytes.extend_from_slice(&self.acc.to_le_bytes());
                self.acc = 0;
                self.filled = 0;
            }
        }
    }

    fn finish(mut self) -> Vec<u8> {
        let tail = self.filled.div_ceil(8) as usize;
        self.bytes.extend_from_slice(&self.acc.to_le_bytes()[..tail]);
        self.bytes
    }
}

fn read_bits(stream: &[u8], start: u64, bits: u32) -> Mask {
    let mut v: Mask = 0;
    for b in 0..u64::from(bits) {
        let pos = start + b;
        let bit = stream[(pos / 8) as usize] >> (pos % 8) & 1;
        v |= Mask::from(bit) << b;
    }
    v
}

fn check_consistent(q: &SelectedQuantizer, array: &ComponentArray) -> Result<()> {
    let n = array.len();
    if n > 64 || n > usize::from(u16::MAX) {
        return Err(Error::Inconsistent(format!("{n} components do not fit the format")));
    }
    if q.grouping() != array.grouping() {
        return Err(Error::Inconsistent(format!(
            "quantizer grouping {} vs array grouping {}",
            q.grouping(),
            array.grouping()
        )));
    }
    if q.nk() > u32::from(u8::MAX) || array.n0() > u32::from(u8::MAX) {
        return Err(Error::Inconsistent("resolution does not fit one byte".into()));
    }
    for (i, &m) in q.masks().iter().enumerate() {
        let v = decode_assembly(m, array).map_err(|e| Error::Inconsistent(e.to_string()))?;
        if v.to_bits() != q.boundaries()[i + 1].to_bits() {
            return Err(Error::Inconsistent(format!(
                "boundary {} is not generated by its mask under these weights",
                i + 1
            )));
        }
    }
    Ok(())
}

pub fn encode_lut(q: &SelectedQuantizer, array: &ComponentArray) -> Result<Vec<u8>> {
    check_consistent(q, array)?;
    if let Grouping::Redundant { s, n0_prime } = array.grouping() {
        if s > 15 || n0_prime > 15 {
            return Err(Error::InvalidParameter(format!(
                "LUT header holds redundant-family parameters up to 15, got s={s} n0'={n0_prime}"
            )));
        }
    }
    let n = array.len();
    let mut out = Vec::with_capacity(lut_size(q.nk(), n));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(array.n0() as u8);
    out.push(q.nk() as u8);
    out.extend_from_slice(&q.delta().to_le_bytes());
    out.extend_from_slice(&(n as u16).to_le_bytes());
    out.push(array.grouping().tag());
    out.push(array.grouping().param_byte());
    for &w in array.nominal() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    for &w in array.actual() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    let mut bits = BitWriter::new(mask_stream_bits(q.nk(), n).div_ceil(8) as usize);
    for &m in q.masks() {
        bits.push(m, n as u32);
    }
    out.extend_from_slice(&bits.finish());
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn parse_header(bytes: &[u8]) -> Result<LutHeader> {
    if bytes.len() < MAGIC.len() {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let header = LutHeader {
        version,
        n0: bytes[6],
        nk: bytes[7],
        delta: f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")),
        n: u16::from_le_bytes([bytes[16], bytes[17]]),
        grouping: Grouping::from_tag(bytes[18], bytes[19])?,
    };
    if header.n == 0 || header.n > 64 {
        return Err(Error::Format(format!("component count {} out of range", header.n)));
    }
    if header.nk == 0 || u32::from(header.nk) > crate::reference::MAX_NK {
        return Err(Error::Format(format!("nk {} out of range", header.nk)));
    }
    Ok(header)
}

/// Parses only the fixed header.
pub fn read_header(bytes: &[u8]) -> Result<LutHeader> {
    parse_header(bytes)
}

pub fn decode_lut(bytes: &[u8]) -> Result<(SelectedQuantizer, ComponentArray)> {
    let header = parse_header(bytes)?;
    let n = usize::from(header.n);
    let nk = u32::from(header.nk);
    let expected = lut_size(nk, n);
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let body = &bytes[..expected - CRC_LEN];
    let stored = u32::from_le_bytes(bytes[expected - CRC_LEN..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut at = HEADER_LEN;
    let nominal: Vec<u32> = (0..n)
        .map(|i| u32::from_le_bytes(body[at + 4 * i..at + 4 * i + 4].try_into().expect("4 bytes")))
        .collect();
    at += 4 * n;
    let actual: Vec<f64> = (0..n)
        .map(|i| f64::from_le_bytes(body[at + 8 * i..at + 8 * i + 8].try_into().expect("8 bytes")))
        .collect();
    at += 8 * n;
    let stream = &body[at..];

    let array = ComponentArray::from_nominal(u32::from(header.n0), header.grouping, nominal)
        .and_then(|a| a.with_actual(actual))
        .map_err(|e| Error::Format(e.to_string()))?;
    let grid = TargetGrid::new(nk, header.delta).map_err(|e| Error::Format(e.to_string()))?;
    let masks: Vec<Mask> = (0..(1u64 << nk) - 1)
        .map(|j| read_bits(stream, j * n as u64, n as u32))
        .collect();
    let q = SelectedQuantizer::from_masks(&array, grid, masks)?;
    Ok((q, array))
}

/// Writes the LUT to `path` and returns the byte count.
pub fn export_lut(q: &SelectedQuantizer, array: &ComponentArray, path: impl AsRef<Path>) -> Result<u64> {
    let bytes = encode_lut(q, array)?;
    fs::write(path, &bytes)?;
    Ok(bytes.len() as u64)
}

pub fn import_lut(path: impl AsRef<Path>) -> Result<(SelectedQuantizer, ComponentArray)> {
    decode_lut(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::{build_half_split, build_uniform};
    use crate::model::MismatchModel;
    use crate::reference::{enumerate_references, select_quantizer_exhaustive, select_quantizer_greedy};
    use proptest::prelude::*;

    fn sample_lut(n0: u32, nk: u32, seed: u64) -> (SelectedQuantizer, ComponentArray) {
        let arr = build_half_split(n0)
            .unwrap()
            .sample(&MismatchModel::new(0.1, seed).unwrap(), 0);
        let refs = enumerate_references(&arr).unwrap();
        let q = select_quantizer_exhaustive(&refs, TargetGrid::new(nk, 0.95).unwrap()).unwrap();
        (q, arr)
    }

    #[test]
    fn sizes() {
        assert_eq!(mask_stream_bits(16, 20), 1_310_700);
        assert_eq!(mask_stream_bits(16, 20).div_ceil(8), 163_838);
        assert_eq!(lut_size(16, 20), 20 + 240 + 163_838 + 4);
        // Single interior boundary of a 3-component array packs into one byte.
        assert_eq!(mask_stream_bits(1, 3).div_ceil(8), 1);
    }

    #[test]
    fn tiny_lut_bytes() {
        let arr = build_half_split(2).unwrap();
        let refs = enumerate_references(&arr).unwrap();
        let q = select_quantizer_exhaustive(&refs, TargetGrid::full(1).unwrap()).unwrap();
        let bytes = encode_lut(&q, &arr).unwrap();
        assert_eq!(bytes.len(), lut_size(1, 3));
        assert_eq!(&bytes[..4], b"SRL1");
        // Nominal weights {1, 1, 1}: 1/2 is generated exactly, first by mask 0b011.
        assert_eq!(q.boundaries()[1], 0.5);
        assert_eq!(q.masks(), &[0b011]);
        let stream_byte = bytes[HEADER_LEN + 36];
        assert_eq!(u64::from(stream_byte), q.masks()[0]);
        assert_eq!(decode_lut(&bytes).unwrap(), (q, arr));
    }

    #[test]
    fn rs_parameters_must_fit_header() {
        let arr = crate::grouping::build_rs_family(18, 1, 16).unwrap();
        let q = select_quantizer_greedy(&arr, TargetGrid::full(4).unwrap()).unwrap();
        assert!(matches!(encode_lut(&q, &arr), Err(Error::InvalidParameter(_))));

        let arr = crate::grouping::build_rs_family(8, 2, 5).unwrap();
        let q = select_quantizer_greedy(&arr, TargetGrid::full(8).unwrap()).unwrap();
        let (_, back) = decode_lut(&encode_lut(&q, &arr).unwrap()).unwrap();
        assert_eq!(back.grouping(), Grouping::Redundant { s: 2, n0_prime: 5 });
    }

    #[test]
    fn deterministic_bytes() {
        let (q, arr) = sample_lut(5, 8, 3);
        assert_eq!(encode_lut(&q, &arr).unwrap(), encode_lut(&q, &arr).unwrap());
    }

    #[test]
    fn errors_are_distinct() {
        let (q, arr) = sample_lut(4, 6, 1);
        let bytes = encode_lut(&q, &arr).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_lut(&bad_magic), Err(Error::Format(_))));

        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(decode_lut(&bad_version), Err(Error::Version(9))));

        assert!(matches!(
            decode_lut(&bytes[..bytes.len() - 10]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(decode_lut(&bytes[..10]), Err(Error::Truncated { .. })));

        let mut flipped = bytes.clone();
        let mid = bytes.len() - 8;
        flipped[mid] ^= 0x40;
        assert!(matches!(decode_lut(&flipped), Err(Error::Checksum { .. })));

        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_lut(&long), Err(Error::Format(_))));
    }

    #[test]
    fn swapped_masks_fail_monotonicity() {
        let arr = build_uniform(4).unwrap();
        let refs = enumerate_references(&arr).unwrap();
        let q = select_quantizer_exhaustive(&refs, TargetGrid::full(4).unwrap()).unwrap();
        let mut bytes = encode_lut(&q, &arr).unwrap();
        // Rewrite the stream with codes 1 and 15 swapped, then fix the CRC.
        let n = arr.len();
        let mut masks = q.masks().to_vec();
        masks.swap(0, 14);
        let mut w = BitWriter::new(0);
        for m in masks {
            w.push(m, n as u32);
        }
        let stream = w.finish();
        let start = HEADER_LEN + 12 * n;
        bytes[start..start + stream.len()].copy_from_slice(&stream);
        let body = bytes.len() - CRC_LEN;
        let crc = crc32fast::hash(&bytes[..body]);
        bytes[body..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode_lut(&bytes), Err(Error::NonMonotone(_))));
    }

    #[test]
    fn rejects_inconsistent_inputs() {
        let (q, arr) = sample_lut(4, 6, 1);
        let other = arr.sample(&MismatchModel::new(0.1, 99).unwrap(), 1);
        assert!(matches!(encode_lut(&q, &other), Err(Error::Inconsistent(_))));
        let un = build_uniform(4).unwrap();
        assert!(matches!(encode_lut(&q, &un), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cal.srl");
        let (q, arr) = sample_lut(5, 9, 11);
        let written = export_lut(&q, &arr, &path).unwrap();
        assert_eq!(written as usize, lut_size(9, arr.len()));
        assert_eq!(import_lut(&path).unwrap(), (q, arr));
        let h = read_header(&fs::read(&path).unwrap()).unwrap();
        assert_eq!(h.grouping, Grouping::HalfSplit);
        assert_eq!((h.n0, h.nk, h.n), (5, 9, 9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip(seed in any::<u64>(), sigma in 0.0f64..0.4, nk in 1u32..11, greedy in any::<bool>()) {
            let arr = build_uniform(6).unwrap().sample(&MismatchModel::new(sigma, seed).unwrap(), seed % 7);
            let grid = TargetGrid::full(nk).unwrap();
            let q = if greedy {
                select_quantizer_greedy(&arr, grid).unwrap()
            } else {
                select_quantizer_exhaustive(&enumerate_references(&arr).unwrap(), grid).unwrap()
            };
            let bytes = encode_lut(&q, &arr).unwrap();
            prop_assert_eq!(bytes.len(), lut_size(nk, arr.len()));
            let (q2, arr2) = decode_lut(&bytes).unwrap();
            prop_assert_eq!(&q2, &q);
            prop_assert_eq!(&arr2, &arr);
        }
    }
}
