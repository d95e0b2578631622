//! Point-cloud CSV files (`x,y` header, one point per row).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const POINTS_HEADER: &str = "x,y";

/// Renders `n x 2` points with 17 significant digits, enough to round-trip
/// every `f64` exactly.
pub fn points_to_csv(x: &Tensor) -> Result<String> {
    if x.cols() != 2 {
        return Err(Error::InvalidInput(format!(
            "points must have 2 columns, got {}",
            x.cols()
        )));
    }
    let mut s = String::with_capacity(48 * (x.rows() + 1));
    s.push_str(POINTS_HEADER);
    s.push('\n');
    for r in x.row_iter() {
        s.push_str(&format!("{:.16e},{:.16e}\n", r[0], r[1]));
    }
    Ok(s)
}

pub fn points_from_csv(text: &str) -> Result<Tensor> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == POINTS_HEADER => {}
        Some((_, h)) => {
            return Err(Error::InvalidInput(format!(
                "expected header `x,y`, got `{}`",
                h.trim()
            )))
        }
        None => return Err(Error::InvalidInput("empty points file".into())),
    }
    let mut data = Vec::new();
    for (i, line) in lines {
        let mut fields = line.split(',');
        let mut next = || -> Result<f64> {
            let f = fields
                .next()
                .ok_or_else(|| Error::InvalidInput(format!("line {}: expected 2 fields", i + 1)))?;
            f.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("line {}: `{}`: {e}", i + 1, f.trim())))
        };
        let (a, b) = (next()?, next()?);
        if fields.next().is_some() {
            return Err(Error::InvalidInput(format!(
                "line {}: expected 2 fields",
                i + 1
            )));
        }
        data.push(a);
        data.push(b);
    }
    let n = data.len() / 2;
    Tensor::new(n, 2, data)
}

pub fn write_points(path: &Path, x: &Tensor) -> Result<()> {
    write_text(path, &points_to_csv(x)?)
}

pub fn read_points(path: &Path) -> Result<Tensor> {
    points_from_csv(&read_text(path)?)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
