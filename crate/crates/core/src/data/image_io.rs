//! Binary PGM (P5) and PPM (P6) images, 8 or 16 bits per sample.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::pipeline::rgb_to_luminance;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Parses a P5/P6 image into a `(C, H, W)` tensor with values in `[0, 1]`.
pub fn decode_pnm(bytes: &[u8]) -> Result<Tensor> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PNM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Format(format!("unsupported PNM magic {other:?}"))),
    };
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PNM header field {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("bad PNM geometry {w}x{h} maxval {maxval}")));
    }
    let bps = if maxval < 256 { 1 } else { 2 };
    let n = w * h * channels;
    let raster = bytes
        .get(pos..pos + n * bps)
        .ok_or_else(|| Error::Format("truncated PNM raster".into()))?;
    let scale = maxval as f64;
    let interleaved: Vec<f64> = if bps == 1 {
        raster.iter().map(|&b| b as f64 / scale).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / scale)
            .collect()
    };
    let mut planar = vec![0.0; n];
    for (i, v) in interleaved.into_iter().enumerate() {
        let (px, c) = (i / channels, i % channels);
        planar[c * w * h + px] = v.min(1.0);
    }
    Tensor::new(&[channels, h, w], planar)
}

/// Encodes a `(1, H, W)` or `(3, H, W)` tensor, clamping values to `[0, 1]`.
pub fn encode_pnm(image: &Tensor, bits: u8) -> Result<Vec<u8>> {
    let (c, h, w) = match *image.shape() {
        [c @ (1 | 3), h, w] => (c, h, w),
        _ => return Err(Error::shape(format!("cannot encode image of shape {:?}", image.shape()))),
    };
    let maxval: u32 = match bits {
        8 => 255,
        16 => 65535,
        _ => return Err(Error::config(format!("bit depth must be 8 or 16, got {bits}"))),
    };
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    let d = image.data();
    for px in 0..h * w {
        for ch in 0..c {
            let v = d[ch * h * w + px];
            let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            let q = (v * maxval as f64).round() as u32;
            if bits == 8 {
                out.push(q as u8);
            } else {
                out.extend_from_slice(&(q as u16).to_be_bytes());
            }
        }
    }
    Ok(out)
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    decode_pnm(&fs::read(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_pnm(path: impl AsRef<Path>, image: &Tensor, bits: u8) -> Result<()> {
    fs::write(path, encode_pnm(image, bits)?)?;
    Ok(())
}

/// Reads an image as a `(1, H, W)` luminance frame.
pub fn read_luminance(path: impl AsRef<Path>) -> Result<Tensor> {
    let img = read_pnm(path)?;
    if img.shape()[0] == 3 {
        rgb_to_luminance(&img)
    } else {
        Ok(img)
    }
}

/// `.pgm`/`.ppm` files in a directory, sorted by file name.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && matches!(
                    p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref(),
                    Some("pgm" | "ppm")
                )
        })
        .collect();
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_round_trip_8_and_16_bit() {
        let img = Tensor::from_fn(&[1, 3, 5], |i| i as f64 / 14.0);
        for bits in [8u8, 16] {
            let back = decode_pnm(&encode_pnm(&img, bits).unwrap()).unwrap();
            let q = if bits == 8 { 255.0 } else { 65535.0 };
            assert!(back.max_abs_diff(&img) <= 0.5 / q + 1e-15);
        }
    }

    #[test]
    fn color_is_planar_after_decode() {
        let bytes = b"P6\n# comment\n2 1\n255\n\xff\x00\x00\x00\xff\x00".to_vec();
        let img = decode_pnm(&bytes).unwrap();
        assert_eq!(img.shape(), &[3, 1, 2]);
        assert_eq!(img.data(), &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn sixteen_bit_is_big_endian() {
        let bytes = b"P5 1 1 65535\n\x80\x00".to_vec();
        let v = decode_pnm(&bytes).unwrap().data()[0];
        assert!((v - 32768.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_input_rejected() {
        assert!(decode_pnm(b"P5\n4 4\n255\n\x00\x00").is_err());
        assert!(decode_pnm(b"P3\n1 1\n255\n0").is_err());
    }
}
