use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{PitaError, Result};
use crate::StateVector;

/// Shortest string that parses back to the same `f64`, with a `.`
/// separator and no locale dependence. Very small or large magnitudes
/// switch to exponent form.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub(crate) fn state_header(d: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=d).map(|i| format!("x{i}")))
        .collect()
}

pub(crate) fn state_row(t: f64, y: &StateVector) -> Vec<String> {
    std::iter::once(fmt_f64(t))
        .chain(y.iter().map(|&v| fmt_f64(v)))
        .collect()
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| PitaError::io(dir, e))
}

pub(crate) fn write_csv<I>(path: PathBuf, header: &[String], rows: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| PitaError::io(&path, e.into());
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| PitaError::io(&path, e))?;
    Ok(path)
}

pub(crate) fn write_text(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| PitaError::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for x in [
            0.0,
            1.0,
            -0.1,
            1.0 / 3.0,
            1.923076923076923,
            4.877e-4,
            1e-12,
            6.02e23,
            -2.5e-300,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            assert!(!s.contains(','));
        }
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(1e-12), "1e-12");
    }
}
