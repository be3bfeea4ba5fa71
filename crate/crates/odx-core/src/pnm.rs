//! Binary PPM (P6) and PGM (P5) image files, maxval 255.
//!
//! Images convert between (channels, height, width) float tensors in [0, 1]
//! and interleaved 8-bit pixel data: byte v maps to v/255 on read, and floats
//! quantize with round-to-nearest on write.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Writes a 1-channel tensor as PGM or a 3-channel tensor as PPM.
pub fn write_image(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if image.shape().len() != 3 {
        return Err(Error::dimension(format!(
            "image tensor must be (channels, height, width), got {:?}",
            image.shape()
        )));
    }
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let magic = match c {
        1 => "P5",
        3 => "P6",
        other => {
            return Err(Error::dimension(format!(
                "only 1- or 3-channel images can be written, got {other} channels"
            )))
        }
    };

    let mut bytes = Vec::with_capacity(32 + c * h * w);
    bytes.extend_from_slice(format!("{magic}\n{w} {h}\n255\n").as_bytes());
    let data = image.data();
    let plane = h * w;
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let v = data[ch * plane + i * w + j];
                bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }

    let tmp = path.with_extension("pnm.partial");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(tmp.display().to_string(), e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Reads a binary PPM/PGM file into a (channels, height, width) tensor.
pub fn read_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_image(&bytes).map_err(|e| match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

fn parse_image(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 2 {
        return Err(Error::format(0, "file too short for a PNM header"));
    }
    let channels = match &bytes[0..2] {
        b"P5" => 1usize,
        b"P6" => 3usize,
        other => {
            return Err(Error::format(
                0,
                format!(
                    "unsupported magic {:?}: only binary P5/P6 are accepted",
                    String::from_utf8_lossy(other)
                ),
            ))
        }
    };

    let mut pos = 2usize;
    let mut fields = [0usize; 3]; // width, height, maxval
    for field in fields.iter_mut() {
        pos = skip_whitespace_and_comments(bytes, pos)?;
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::format(start as u64, "expected an ASCII integer"));
        }
        let text = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::format(start as u64, "header is not ASCII"))?;
        *field = text
            .parse()
            .map_err(|_| Error::format(start as u64, format!("bad integer {text:?}")))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(
            pos as u64,
            format!("maxval must be 255, got {maxval}"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(pos as u64, "image dimensions must be positive"));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(
            pos as u64,
            "missing whitespace before pixel data",
        ));
    }
    pos += 1;

    let expected = width * height * channels;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::format(
            pos as u64,
            format!(
                "raster holds {} bytes, {width}x{height}x{channels} needs {expected}",
                raster.len()
            ),
        ));
    }

    let plane = width * height;
    let mut data = vec![0.0f64; channels * plane];
    for i in 0..height {
        for j in 0..width {
            for ch in 0..channels {
                let v = raster[(i * width + j) * channels + ch];
                data[ch * plane + i * width + j] = v as f64 / 255.0;
            }
        }
    }
    Tensor::new(vec![channels, height, width], data)
}

fn skip_whitespace_and_comments(bytes: &[u8], mut pos: usize) -> Result<usize> {
    loop {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        if pos >= bytes.len() {
            return Err(Error::format(pos as u64, "header ended early"));
        }
        return Ok(pos);
    }
}

/// Reads every `.ppm`/`.pgm` file in a directory, sorted by file name so the
/// target order is deterministic.
pub fn read_image_dir(dir: impl AsRef<Path>) -> Result<Vec<(PathBuf, Tensor)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("ppm") | Some("pgm")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::parameter(format!(
            "no .ppm or .pgm files found in {}",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|p| read_image(&p).map(|t| (p, t)))
        .collect()
}
