//! PFM float rasters: "PF" (3-channel) / "Pf" (1-channel), negative scale
//! header meaning little-endian, rows stored bottom-up.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

pub fn encode_pfm(img: &Image) -> Result<Vec<u8>> {
    let magic = match img.channels {
        1 => "Pf",
        3 => "PF",
        n => {
            return Err(Error::invalid(
                "pfm",
                format!("channels must be 1 or 3, got {n}"),
            ))
        }
    };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    for r in (0..img.height).rev() {
        for c in 0..img.width {
            for ch in 0..img.channels {
                out.extend_from_slice(&(img.get(r, c, ch) as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Image> {
    let err = |msg: &str| Error::Parse {
        path: "<pfm>".into(),
        line: 0,
        msg: msg.into(),
    };
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        _ => return Err(err("bad magic")),
    };
    let width: usize = token()?.parse().map_err(|_| err("bad width"))?;
    let height: usize = token()?.parse().map_err(|_| err("bad height"))?;
    let scale: f64 = token()?.parse().map_err(|_| err("bad scale"))?;
    let little_endian = scale < 0.0;
    // One whitespace byte then raster.
    if pos >= bytes.len() {
        return Err(err("missing raster"));
    }
    pos += 1;
    let need = width * height * channels * 4;
    if bytes.len() < pos + need {
        return Err(err("raster shorter than declared size"));
    }
    let mut img = Image::zeros(width, height, channels);
    let mut off = pos;
    for r in (0..height).rev() {
        for c in 0..width {
            for ch in 0..channels {
                let raw: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
                let v = if little_endian {
                    f32::from_le_bytes(raw)
                } else {
                    f32::from_be_bytes(raw)
                };
                img.set(r, c, ch, v as f64);
                off += 4;
            }
        }
    }
    Ok(img)
}

pub fn write_pfm(path: &Path, img: &Image) -> Result<()> {
    std::fs::write(path, encode_pfm(img)?)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_pfm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode_pfm(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn round_trip_gray_and_color() {
        let mut rng = SplitMix64::new(1);
        for ch in [1usize, 3] {
            let mut img = Image::zeros(7, 5, ch);
            for v in img.data.iter_mut() {
                *v = rng.next_range(-10.0, 10.0);
            }
            let back = decode_pfm(&encode_pfm(&img).unwrap()).unwrap();
            assert_eq!(back.width, 7);
            assert_eq!(back.channels, ch);
            for (a, b) in img.data.iter().zip(&back.data) {
                // f32 storage precision.
                assert_eq!(*a as f32, *b as f32);
            }
        }
    }

    #[test]
    fn rejects_two_channel() {
        assert!(encode_pfm(&Image::zeros(4, 4, 2)).is_err());
    }
}
