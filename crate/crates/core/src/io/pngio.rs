//! PNG encode/decode: 8-bit RGB for color rasters, 1-bit grayscale for
//! masks (white = set).

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image};

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::invalid("png", e.to_string())
}

/// Encode an image as 8-bit PNG (RGB for 3 channels, grayscale for 1).
/// Values are clamped to [0, 1] and rounded.
pub fn encode_image_png(img: &Image) -> Result<Vec<u8>> {
    let color = match img.channels {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        n => {
            return Err(Error::invalid(
                "png",
                format!("channels must be 1 or 3, got {n}"),
            ))
        }
    };
    let mut bytes: Vec<u8> = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, img.width as u32, img.height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        let data: Vec<u8> = img
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        writer.write_image_data(&data).map_err(png_err)?;
    }
    Ok(bytes)
}

/// Encode a mask as 1-bit grayscale PNG.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let mut bytes: Vec<u8> = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, mask.width as u32, mask.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::One);
        let mut writer = enc.write_header().map_err(png_err)?;
        let row_bytes = mask.width.div_ceil(8);
        let mut data = vec![0u8; row_bytes * mask.height];
        for r in 0..mask.height {
            for c in 0..mask.width {
                if mask.get(r, c) {
                    data[r * row_bytes + c / 8] |= 0x80 >> (c % 8);
                }
            }
        }
        writer.write_image_data(&data).map_err(png_err)?;
    }
    Ok(bytes)
}

/// Decode a PNG into a mask: any pixel at or above half intensity is set.
pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| png_err("image too large"))?];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let mut mask = BinaryMask::new_false(w, h);
    match (info.color_type, info.bit_depth) {
        (png::ColorType::Grayscale, png::BitDepth::One) => {
            let row_bytes = w.div_ceil(8);
            for r in 0..h {
                for c in 0..w {
                    let bit = buf[r * row_bytes + c / 8] & (0x80 >> (c % 8));
                    mask.set(r, c, bit != 0);
                }
            }
        }
        (png::ColorType::Grayscale, png::BitDepth::Eight) => {
            for r in 0..h {
                for c in 0..w {
                    mask.set(r, c, buf[r * w + c] >= 128);
                }
            }
        }
        (png::ColorType::Rgb, png::BitDepth::Eight) => {
            for r in 0..h {
                for c in 0..w {
                    mask.set(r, c, buf[(r * w + c) * 3] >= 128);
                }
            }
        }
        (ct, bd) => {
            return Err(Error::invalid(
                "png mask",
                format!("unsupported layout {ct:?}/{bd:?}"),
            ))
        }
    }
    Ok(mask)
}

/// Decode an 8-bit RGB or grayscale PNG into a unit-range image.
pub fn read_image_png(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let decoder = png::Decoder::new(std::io::Cursor::new(&bytes[..]));
    let mut reader = decoder.read_info().map_err(png_err)?;
    let mut buf = vec![0u8; reader.output_buffer_size().ok_or_else(|| png_err("image too large"))?];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        ct => return Err(Error::invalid("png", format!("unsupported color {ct:?}"))),
    };
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::invalid("png", "only 8-bit images supported"));
    }
    let mut img = Image::zeros(w, h, channels);
    for (i, v) in buf[..w * h * channels].iter().enumerate() {
        img.data[i] = *v as f64 / 255.0;
    }
    Ok(img)
}

pub fn write_image_png(path: &Path, img: &Image) -> Result<()> {
    std::fs::write(path, encode_image_png(img)?)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_mask_png(path: &Path, mask: &BinaryMask) -> Result<()> {
    std::fs::write(path, encode_mask_png(mask)?)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip_one_bit() {
        let mask = BinaryMask::from_fn(13, 7, |r, c| (r * 13 + c) % 3 == 0);
        let bytes = encode_mask_png(&mask).unwrap();
        assert_eq!(decode_mask_png(&bytes).unwrap(), mask);
    }

    #[test]
    fn image_png_quantizes_to_8_bit() {
        let img = Image::from_fn::<3>(4, 4, |r, c| {
            [r as f64 / 4.0, c as f64 / 4.0, 0.5]
        });
        let bytes = encode_image_png(&img).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        std::fs::write(&path, &bytes).unwrap();
        let back = read_image_png(&path).unwrap();
        for (a, b) in img.data.iter().zip(&back.data) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-9);
        }
    }
}
