//! Mask and depth image files.
//!
//! Masks are binary 8-bit PGM (`P5`, 0 = background, 255 = visible). Depth
//! is a 16-byte header (`VDPH`, u32 width, u32 height, u32 reserved, all
//! little-endian) followed by row-major little-endian f32 meters.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

use super::{DepthImage, MaskImage};

const DEPTH_MAGIC: &[u8; 4] = b"VDPH";

pub fn encode_pgm(mask: &MaskImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<MaskImage> {
    // header: magic, width, height, maxval separated by whitespace (comments allowed)
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| Error::Parse(e.to_string()))?);
    }
    if fields[0] != "P5" {
        return Err(Error::Parse(format!("expected P5 PGM, got {:?}", fields[0])));
    }
    let parse = |s: &str| s.parse::<u32>().map_err(|_| Error::Parse(format!("bad PGM field {s:?}")));
    let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse("only 8-bit PGM masks are supported".into()));
    }
    pos += 1;
    let n = width as usize * height as usize;
    let data = bytes.get(pos..pos + n).ok_or_else(|| Error::Parse("PGM pixel data truncated".into()))?;
    Ok(MaskImage { width, height, bits: data.iter().map(|&b| b > 0).collect() })
}

pub fn write_pgm(mask: &MaskImage, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm(mask))?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<MaskImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn encode_depth(depth: &DepthImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * depth.depths.len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&depth.width.to_le_bytes());
    out.extend_from_slice(&depth.height.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for d in &depth.depths {
        out.extend_from_slice(&(*d as f32).to_le_bytes());
    }
    out
}

pub fn decode_depth(bytes: &[u8]) -> Result<DepthImage> {
    if bytes.len() < 16 || &bytes[..4] != DEPTH_MAGIC {
        return Err(Error::Parse("missing VDPH depth header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (width, height) = (word(4), word(8));
    let n = width as usize * height as usize;
    if bytes.len() != 16 + 4 * n {
        return Err(Error::Parse("depth payload size does not match header".into()));
    }
    let depths = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Ok(DepthImage { width, height, depths })
}

pub fn write_depth(depth: &DepthImage, path: &Path) -> Result<()> {
    fs::write(path, encode_depth(depth))?;
    Ok(())
}

pub fn read_depth(path: &Path) -> Result<DepthImage> {
    decode_depth(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pgm_round_trip(w in 1u32..20, h in 1u32..20, seed in any::<u64>()) {
            let bits = (0..w * h).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let mask = MaskImage { width: w, height: h, bits };
            prop_assert_eq!(decode_pgm(&encode_pgm(&mask)).unwrap(), mask);
        }
    }

    #[test]
    fn pgm_header_is_exact() {
        let mask = MaskImage { width: 2, height: 1, bits: vec![true, false] };
        assert_eq!(encode_pgm(&mask), b"P5\n2 1\n255\n\xff\x00".to_vec());
    }

    #[test]
    fn depth_layout() {
        let d = DepthImage { width: 2, height: 1, depths: vec![0.0, 1.5] };
        let bytes = encode_depth(&d);
        assert_eq!(&bytes[..4], b"VDPH");
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &1.5f32.to_le_bytes());
        assert_eq!(decode_depth(&bytes).unwrap(), d);
        assert!(decode_depth(&bytes[..20]).is_err());
    }
}
