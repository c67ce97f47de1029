//! File formats: the `BVST` tensor container, 8-bit binary PGM and
//! line-delimited JSON.

use ndarray::{Array2, ArrayD, IxDyn};
use serde::Serialize;
use serde::de::DeserializeOwned;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const BVST_MAGIC: &[u8; 4] = b"BVST";
pub const BVST_VERSION: u32 = 1;

/// `BVST` layout: magic, u32 LE version, u32 LE ndim, u32 LE dims, then f32 LE
/// row-major data.
pub fn write_bvst<W: Write>(mut w: W, tensor: &ArrayD<f32>) -> Result<()> {
    w.write_all(BVST_MAGIC)?;
    w.write_all(&BVST_VERSION.to_le_bytes())?;
    w.write_all(&(tensor.ndim() as u32).to_le_bytes())?;
    for &d in tensor.shape() {
        let d = u32::try_from(d).map_err(|_| Error::Shape(format!("dimension {d} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    for v in tensor.as_standard_layout().iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_bvst<R: Read>(mut r: R) -> Result<ArrayD<f32>> {
    let bad = |reason: String| Error::Format { format: "BVST", reason };
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BVST_MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != BVST_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let ndim = read_u32(&mut r)? as usize;
    if ndim > 16 {
        return Err(bad(format!("implausible rank {ndim}")));
    }
    let dims = (0..ndim).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let len: usize = dims.iter().product();
    let mut raw = vec![0u8; len * 4];
    r.read_exact(&mut raw)?;
    let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| bad(e.to_string()))
}

pub fn save_bvst(path: impl AsRef<Path>, tensor: &ArrayD<f32>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bvst(&mut w, tensor)?;
    w.flush()?;
    Ok(())
}

pub fn load_bvst(path: impl AsRef<Path>) -> Result<ArrayD<f32>> {
    read_bvst(BufReader::new(File::open(path)?))
}

pub fn image_to_tensor(img: &Array2<f64>) -> ArrayD<f32> {
    img.mapv(|v| v as f32).into_dyn()
}

pub fn tensor_to_image(t: &ArrayD<f32>) -> Result<Array2<f64>> {
    let t2 = t
        .clone()
        .into_dimensionality::<ndarray::Ix2>()
        .map_err(|_| Error::Shape(format!("expected a 2-D tensor, got shape {:?}", t.shape())))?;
    Ok(t2.mapv(|v| v as f64))
}

/// Binary `P5` greymap, maxval 255; values are clamped to [0, 1] and rounded.
pub fn write_pgm<W: Write>(mut w: W, img: &Array2<f64>) -> Result<()> {
    let (rows, cols) = img.dim();
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    let bytes: Vec<u8> = img.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn save_pgm(path: impl AsRef<Path>, img: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm(&mut w, img)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> Result<()> {
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl(&mut w, items)?;
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    read_jsonl(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bvst_header_layout() {
        let t = ArrayD::from_shape_vec(IxDyn(&[2, 3]), vec![0.0f32, 1.0, 2.0, 3.0, 4.0, 5.5]).unwrap();
        let mut buf = Vec::new();
        write_bvst(&mut buf, &t).unwrap();
        assert_eq!(&buf[0..4], b"BVST");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(&buf[12..16], &2u32.to_le_bytes());
        assert_eq!(&buf[16..20], &3u32.to_le_bytes());
        assert_eq!(&buf[40..44], &5.5f32.to_le_bytes());
        assert_eq!(buf.len(), 20 + 6 * 4);
    }

    #[test]
    fn bvst_rejects_bad_magic_and_truncation() {
        assert!(read_bvst(&b"NOPE\x01\x00\x00\x00"[..]).is_err());
        let t = ArrayD::<f32>::zeros(IxDyn(&[4]));
        let mut buf = Vec::new();
        write_bvst(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(read_bvst(&buf[..]).is_err());
    }

    #[test]
    fn pgm_header_and_scaling() {
        let img = Array2::from_shape_vec((1, 3), vec![0.0, 0.5, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &img).unwrap();
        assert_eq!(&buf[..11], b"P5\n3 1\n255\n");
        assert_eq!(&buf[11..], &[0u8, 128, 255]);
    }

    proptest! {
        #[test]
        fn bvst_roundtrip_is_bit_exact(dims in proptest::collection::vec(1usize..5, 0..4), seed in any::<u32>()) {
            let len: usize = dims.iter().product();
            let data: Vec<f32> = (0..len).map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32) & 0x7f7f_ffff)).collect();
            let t = ArrayD::from_shape_vec(IxDyn(&dims), data).unwrap();
            let mut buf = Vec::new();
            write_bvst(&mut buf, &t).unwrap();
            let back = read_bvst(&buf[..]).unwrap();
            prop_assert_eq!(back.shape(), t.shape());
            for (a, b) in back.iter().zip(t.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
