//! Latent vectors as CSV: one row per vector, plain decimal floats, no
//! header. Values are written in Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces every f64 bit-exactly; readers also accept
//! scientific notation.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn latents_to_string(vectors: &[Tensor]) -> Result<String> {
    if vectors.is_empty() {
        return Err(Error::parameter("no latent vectors to write".to_string()));
    }
    let width = vectors[0].len();
    let mut out = String::new();
    for (idx, v) in vectors.iter().enumerate() {
        if v.len() != width {
            return Err(Error::dimension(format!(
                "vector {idx} has length {}, expected {width}",
                v.len()
            )));
        }
        let row: Vec<String> = v.data().iter().map(|x| format!("{x}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Writes vectors to CSV atomically.
pub fn write_latents(vectors: &[Tensor], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = latents_to_string(vectors)?;
    let tmp = path.with_extension("csv.partial");
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(tmp.display().to_string(), e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(tmp.display().to_string(), e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn parse_latents(text: &str) -> Result<Vec<Tensor>> {
    let mut vectors = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let values: Result<Vec<f64>> = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|_| {
                    Error::format(
                        0,
                        format!("line {}: {field:?} is not a number", lineno + 1),
                    )
                })
            })
            .collect();
        let values = values?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::format(
                    0,
                    format!(
                        "line {}: row has {} columns, previous rows had {w}",
                        lineno + 1,
                        values.len()
                    ),
                ))
            }
            _ => {}
        }
        vectors.push(Tensor::from_flat(values)?);
    }
    if vectors.is_empty() {
        return Err(Error::parameter("latent CSV holds no rows".to_string()));
    }
    Ok(vectors)
}

pub fn read_latents(path: impl AsRef<Path>) -> Result<Vec<Tensor>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_latents(&text).map_err(|e| match e {
        Error::Format { offset, message } => Error::Format {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}
