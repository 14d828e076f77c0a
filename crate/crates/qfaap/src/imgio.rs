//! PNG and file IO helpers: 8-bit RGB frames, binary masks, 16-bit
//! millimeter depth maps, and atomic writes. All artifacts may carry text
//! chunks with provenance (config hash, seed).

use std::io::BufWriter;
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::types::{Frame, HandMask};

impl From<png::EncodingError> for Error {
    fn from(e: png::EncodingError) -> Self {
        Error::Png(e.to_string())
    }
}

impl From<png::DecodingError> for Error {
    fn from(e: png::DecodingError) -> Self {
        Error::Png(e.to_string())
    }
}

/// Writes bytes to `path` via a temp file in the same directory plus rename,
/// so readers never observe partial artifacts.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
        None => std::path::PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().unwrap_or_default().to_string_lossy()
        )),
    };
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn encode_png(
    width: u32,
    height: u32,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
    text: &[(String, String)],
) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(BufWriter::new(&mut out), width, height);
        enc.set_color(color);
        enc.set_depth(depth);
        for (k, v) in text {
            enc.add_text_chunk(k.clone(), v.clone())?;
        }
        let mut writer = enc.write_header()?;
        writer.write_image_data(data)?;
    }
    Ok(out)
}

struct Decoded {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: Vec<u8>,
    text: Vec<(String, String)>,
}

fn decode_png(path: &Path) -> Result<Decoded> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png(format!("{}: image too large", path.display())))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf)?;
    let mut text = Vec::new();
    for chunk in &reader.info().uncompressed_latin1_text {
        text.push((chunk.keyword.clone(), chunk.text.clone()));
    }
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        data: buf[..info.buffer_size()].to_vec(),
        text,
    })
}

/// Saves an RGB frame as an 8-bit PNG (values rounded from [0,1]).
pub fn save_frame_png(path: &Path, frame: &Frame, text: &[(String, String)]) -> Result<()> {
    let (h, w) = (frame.height(), frame.width());
    let mut data = Vec::with_capacity(h * w * 3);
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                data.push((frame.data()[[ch, r, c]] * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let bytes = encode_png(
        w as u32,
        h as u32,
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        &data,
        text,
    )?;
    write_atomic(path, &bytes)
}

pub fn load_frame_png(path: &Path) -> Result<Frame> {
    let d = decode_png(path)?;
    if d.depth != png::BitDepth::Eight {
        return Err(Error::Png(format!("{}: expected 8-bit image", path.display())));
    }
    let (h, w) = (d.height, d.width);
    let mut arr = Array3::<f64>::zeros((3, h, w));
    match d.color {
        png::ColorType::Rgb => {
            for r in 0..h {
                for c in 0..w {
                    for ch in 0..3 {
                        arr[[ch, r, c]] = d.data[(r * w + c) * 3 + ch] as f64 / 255.0;
                    }
                }
            }
        }
        png::ColorType::Rgba => {
            for r in 0..h {
                for c in 0..w {
                    for ch in 0..3 {
                        arr[[ch, r, c]] = d.data[(r * w + c) * 4 + ch] as f64 / 255.0;
                    }
                }
            }
        }
        png::ColorType::Grayscale => {
            for r in 0..h {
                for c in 0..w {
                    let v = d.data[r * w + c] as f64 / 255.0;
                    for ch in 0..3 {
                        arr[[ch, r, c]] = v;
                    }
                }
            }
        }
        other => {
            return Err(Error::Png(format!(
                "{}: unsupported color type {other:?}",
                path.display()
            )))
        }
    }
    Frame::new(arr)
}

/// Saves a binary mask as 8-bit grayscale: 0 background, 255 hand.
pub fn save_mask_png(path: &Path, mask: &HandMask, text: &[(String, String)]) -> Result<()> {
    let (h, w) = (mask.height(), mask.width());
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            data.push(if mask.is_set(r, c) { 255u8 } else { 0u8 });
        }
    }
    let bytes = encode_png(
        w as u32,
        h as u32,
        png::ColorType::Grayscale,
        png::BitDepth::Eight,
        &data,
        text,
    )?;
    write_atomic(path, &bytes)
}

/// Loads an 8-bit grayscale mask; values >= 128 count as hand pixels.
pub fn load_mask_png(path: &Path) -> Result<HandMask> {
    let d = decode_png(path)?;
    if d.color != png::ColorType::Grayscale || d.depth != png::BitDepth::Eight {
        return Err(Error::Png(format!(
            "{}: masks must be 8-bit grayscale",
            path.display()
        )));
    }
    let mut mask = HandMask::zeros(d.height, d.width);
    for r in 0..d.height {
        for c in 0..d.width {
            mask.set(r, c, d.data[r * d.width + c] >= 128);
        }
    }
    Ok(mask)
}

/// Saves a depth map in meters as a 16-bit grayscale PNG in millimeters.
/// Non-finite or negative depths are stored as 0 (invalid).
pub fn save_depth_png(path: &Path, depth_m: &Array2<f64>, text: &[(String, String)]) -> Result<()> {
    let (h, w) = depth_m.dim();
    let mut data = Vec::with_capacity(h * w * 2);
    for r in 0..h {
        for c in 0..w {
            let v = depth_m[[r, c]];
            let mm = if v.is_finite() && v > 0.0 {
                (v * 1000.0).round().clamp(0.0, 65535.0) as u16
            } else {
                0
            };
            data.extend_from_slice(&mm.to_be_bytes());
        }
    }
    let bytes = encode_png(
        w as u32,
        h as u32,
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &data,
        text,
    )?;
    write_atomic(path, &bytes)
}

/// Loads a 16-bit millimeter depth PNG into meters; 0 decodes to NaN
/// (invalid).
pub fn load_depth_png(path: &Path) -> Result<Array2<f64>> {
    let d = decode_png(path)?;
    if d.color != png::ColorType::Grayscale || d.depth != png::BitDepth::Sixteen {
        return Err(Error::Png(format!(
            "{}: depth must be 16-bit grayscale",
            path.display()
        )));
    }
    let mut out = Array2::<f64>::zeros((d.height, d.width));
    for r in 0..d.height {
        for c in 0..d.width {
            let i = (r * d.width + c) * 2;
            let mm = u16::from_be_bytes([d.data[i], d.data[i + 1]]);
            out[[r, c]] = if mm == 0 { f64::NAN } else { mm as f64 / 1000.0 };
        }
    }
    Ok(out)
}

/// Saves raw interleaved RGB bytes (row-major) as an 8-bit PNG.
pub fn save_rgb_bytes_png(
    path: &Path,
    height: usize,
    width: usize,
    data: &[u8],
    text: &[(String, String)],
) -> Result<()> {
    if data.len() != height * width * 3 {
        return Err(Error::ShapeMismatch(format!(
            "rgb byte buffer {} does not match {height}x{width}x3",
            data.len()
        )));
    }
    let bytes = encode_png(
        width as u32,
        height as u32,
        png::ColorType::Rgb,
        png::BitDepth::Eight,
        data,
        text,
    )?;
    write_atomic(path, &bytes)
}

/// Reads the text chunks of a PNG (keyword, value pairs).
pub fn read_png_text(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(decode_png(path)?.text)
}
