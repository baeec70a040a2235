//! Byte-level codecs for the binary formats. All integers are
//! little-endian `u32`; all reals are little-endian `f32`.
//!
//! | format | layout |
//! |--------|--------|
//! | CTF    | `"CTFv1"`, frame_count, height, width, channels, dtype (0 byte, 1 f32), pixels |
//! | MSK    | `"MSKv1"`, n, n² bytes of 0/1 (row = query) |
//! | ATN    | `"ATNv1"`, layers, heads, n_tokens, probabilities layer/head/row-major |
//! | EMB    | `"EMBv1"`, count, dim, row-major vectors |

use alloc::vec::Vec;

use crate::analysis::AttnMaps;
use crate::error::{bail, Error, Result};
use crate::frame::{Dtype, FrameSequence, Pixels};
use crate::shotmask::AttnMask;

pub const CTF_MAGIC: &[u8; 5] = b"CTFv1";
pub const MSK_MAGIC: &[u8; 5] = b"MSKv1";
pub const ATN_MAGIC: &[u8; 5] = b"ATNv1";
pub const EMB_MAGIC: &[u8; 5] = b"EMBv1";

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8], magic: &[u8; 5], header_fields: usize) -> Result<Self> {
        if buf.len() < magic.len() || &buf[..magic.len()] != magic {
            bail!(Format, "bad magic, expected {:?}", core::str::from_utf8(magic).unwrap());
        }
        let header = magic.len() + 4 * header_fields;
        if buf.len() < header {
            return Err(Error::SizeMismatch {
                expected: header,
                actual: buf.len(),
            });
        }
        Ok(Self { buf, pos: magic.len() })
    }

    fn u32(&mut self) -> usize {
        let v = u32::from_le_bytes(self.buf[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        v as usize
    }

    fn payload(&self, expected: usize) -> Result<&'a [u8]> {
        let rest = &self.buf[self.pos..];
        if rest.len() != expected {
            return Err(Error::SizeMismatch {
                expected: self.pos + expected,
                actual: self.buf.len(),
            });
        }
        Ok(rest)
    }
}

fn header(magic: &[u8; 5], fields: &[usize], payload: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(5 + 4 * fields.len() + payload);
    out.extend_from_slice(magic);
    for &f in fields {
        let v = u32::try_from(f).map_err(|_| Error::Validation(alloc::format!("{f} does not fit in u32")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn product(dims: &[usize], elem: usize) -> Result<usize> {
    dims.iter()
        .try_fold(elem, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))
}

fn f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn push_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_ctf(seq: &FrameSequence) -> Result<Vec<u8>> {
    let payload = seq.pixels().len() * seq.dtype().size();
    let mut out = header(
        CTF_MAGIC,
        &[
            seq.frame_count(),
            seq.height(),
            seq.width(),
            seq.channels(),
            seq.dtype().tag() as usize,
        ],
        payload,
    )?;
    match seq.pixels() {
        Pixels::Byte(v) => out.extend_from_slice(v),
        Pixels::Float32(v) => push_f32s(&mut out, v),
    }
    Ok(out)
}

pub fn decode_ctf(buf: &[u8]) -> Result<FrameSequence> {
    let mut r = Reader::open(buf, CTF_MAGIC, 5)?;
    let (n, h, w, c) = (r.u32(), r.u32(), r.u32(), r.u32());
    let dtype = Dtype::from_tag(r.u32() as u32)?;
    let payload = r.payload(product(&[n, h, w, c], dtype.size())?)?;
    let pixels = match dtype {
        Dtype::Byte => Pixels::Byte(payload.to_vec()),
        Dtype::Float32 => Pixels::Float32(f32s(payload)),
    };
    FrameSequence::new(n, h, w, c, pixels).map_err(|e| Error::Format(alloc::format!("{e}")))
}

pub fn encode_mask(mask: &AttnMask) -> Result<Vec<u8>> {
    let mut out = header(MSK_MAGIC, &[mask.n()], mask.n() * mask.n())?;
    out.extend(mask.as_slice().iter().map(|&a| a as u8));
    Ok(out)
}

pub fn decode_mask(buf: &[u8]) -> Result<AttnMask> {
    let mut r = Reader::open(buf, MSK_MAGIC, 1)?;
    let n = r.u32();
    let payload = r.payload(product(&[n, n], 1)?)?;
    let allowed = payload
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(alloc::format!("mask byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    AttnMask::from_allowed(n, allowed).map_err(|e| Error::Format(alloc::format!("{e}")))
}

pub fn encode_attn(maps: &AttnMaps) -> Result<Vec<u8>> {
    let mut out = header(
        ATN_MAGIC,
        &[maps.layers(), maps.heads(), maps.n_tokens()],
        maps.values().len() * 4,
    )?;
    push_f32s(&mut out, maps.values());
    Ok(out)
}

pub fn decode_attn(buf: &[u8]) -> Result<AttnMaps> {
    let mut r = Reader::open(buf, ATN_MAGIC, 3)?;
    let (layers, heads, n) = (r.u32(), r.u32(), r.u32());
    let payload = r.payload(product(&[layers, heads, n, n], 4)?)?;
    AttnMaps::new(layers, heads, n, f32s(payload)).map_err(|e| Error::Format(alloc::format!("{e}")))
}

/// Raw embedding rows as stored in an EMB file (not necessarily unit norm).
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub count: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl Embeddings {
    pub fn new(count: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || data.len() != count * dim {
            bail!(Shape, "{} values do not form {count} rows of dim {dim}", data.len());
        }
        if data.iter().any(|v| !v.is_finite()) {
            bail!(Validation, "non-finite embedding value");
        }
        Ok(Self { count, dim, data })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }
}

pub fn encode_emb(emb: &Embeddings) -> Result<Vec<u8>> {
    let mut out = header(EMB_MAGIC, &[emb.count, emb.dim], emb.data.len() * 4)?;
    push_f32s(&mut out, &emb.data);
    Ok(out)
}

pub fn decode_emb(buf: &[u8]) -> Result<Embeddings> {
    let mut r = Reader::open(buf, EMB_MAGIC, 2)?;
    let (count, dim) = (r.u32(), r.u32());
    let payload = r.payload(product(&[count, dim], 4)?)?;
    Embeddings::new(count, dim, f32s(payload)).map_err(|e| Error::Format(alloc::format!("{e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ctf_minimal_layout() {
        let seq = FrameSequence::from_bytes(1, 1, 1, 1, vec![0]).unwrap();
        let bytes = encode_ctf(&seq).unwrap();
        assert_eq!(bytes.len(), 26);
        assert_eq!(&bytes[..5], b"CTFv1");
        assert_eq!(&bytes[5..25], &[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(decode_ctf(&bytes).unwrap(), seq);
    }

    #[test]
    fn ctf_payload_size() {
        let seq = FrameSequence::from_bytes(2, 2, 2, 3, (0..24).collect()).unwrap();
        let bytes = encode_ctf(&seq).unwrap();
        assert_eq!(bytes.len() - 25, 24);
    }

    #[test]
    fn ctf_float_round_trip() {
        let px = Pixels::Float32(vec![0.25, -1.5, 3.0e-8, 1.0]);
        let seq = FrameSequence::new(2, 1, 2, 1, px).unwrap();
        let bytes = encode_ctf(&seq).unwrap();
        assert_eq!(bytes.len(), 25 + 16);
        assert_eq!(decode_ctf(&bytes).unwrap(), seq);
    }

    #[test]
    fn ctf_errors() {
        let seq = FrameSequence::from_bytes(10, 1, 1, 1, vec![7; 10]).unwrap();
        let mut bytes = encode_ctf(&seq).unwrap();
        let mut bad = bytes.clone();
        bad[..5].copy_from_slice(b"XXXX1");
        assert!(matches!(decode_ctf(&bad), Err(Error::Format(_))));
        bytes.pop();
        assert!(matches!(decode_ctf(&bytes), Err(Error::SizeMismatch { .. })));
        assert!(matches!(decode_ctf(b"CTFv1\x01"), Err(Error::SizeMismatch { .. })));
        let mut tag = encode_ctf(&seq).unwrap();
        tag[21] = 7;
        assert!(matches!(decode_ctf(&tag), Err(Error::Format(_))));
    }

    #[test]
    fn mask_layout() {
        let m = AttnMask::from_allowed(2, vec![true, false, false, true]).unwrap();
        let bytes = encode_mask(&m).unwrap();
        assert_eq!(bytes, b"MSKv1\x02\x00\x00\x00\x01\x00\x00\x01");
        assert_eq!(decode_mask(&bytes).unwrap(), m);
        let mut bad = bytes.clone();
        bad[10] = 2;
        assert!(decode_mask(&bad).is_err());
    }

    #[test]
    fn emb_and_attn_round_trip() {
        let e = Embeddings::new(2, 3, vec![1.0, 0.0, 0.0, 0.5, 0.5, -0.25]).unwrap();
        let bytes = encode_emb(&e).unwrap();
        assert_eq!(bytes.len(), 5 + 8 + 24);
        assert_eq!(decode_emb(&bytes).unwrap(), e);

        let maps = AttnMaps::new(1, 2, 2, vec![0.5, 0.5, 1.0, 0.0, 0.25, 0.75, 0.0, 1.0]).unwrap();
        let bytes = encode_attn(&maps).unwrap();
        assert_eq!(bytes.len(), 5 + 12 + 32);
        assert_eq!(decode_attn(&bytes).unwrap(), maps);
        assert!(decode_attn(&bytes[..bytes.len() - 1]).is_err());
    }
}
