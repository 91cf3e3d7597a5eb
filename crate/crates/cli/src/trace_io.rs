//! Reading and writing time traces as CSV.
//!
//! Format: a `time_ps,intensity` header, one sample per line, `#`-prefixed
//! comment lines ignored. The writer emits shortest round-trip decimals, so
//! loading a written file reproduces the values bit for bit. Acquisition
//! metadata travels in comments the reader understands.

use std::fmt;
use std::io::Write;
use std::path::Path;

use pclaser_core::dynamics::{TimeTrace, TraceMeta};
use pclaser_core::units;

#[derive(Debug)]
pub enum TraceIoError {
    Io {
        path: String,
        message: String,
    },
    MissingHeader {
        path: String,
    },
    BadCell {
        path: String,
        row: usize,
        message: String,
    },
    NonMonotone {
        path: String,
        row: usize,
    },
    TooShort {
        path: String,
    },
}

impl fmt::Display for TraceIoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceIoError::Io { path, message } => write!(f, "{path}: {message}"),
            TraceIoError::MissingHeader { path } => {
                write!(f, "{path}: expected header `time_ps,intensity`")
            }
            TraceIoError::BadCell { path, row, message } => {
                write!(f, "{path}: row {row}: {message}")
            }
            TraceIoError::NonMonotone { path, row } => {
                write!(f, "{path}: row {row}: time not strictly increasing")
            }
            TraceIoError::TooShort { path } => write!(f, "{path}: fewer than 2 samples"),
        }
    }
}

impl std::error::Error for TraceIoError {}

pub fn write_trace(path: &Path, trace: &TimeTrace) -> Result<(), TraceIoError> {
    let mut out = String::new();
    if let Some(sigma) = trace.meta.noise_sigma {
        out.push_str(&format!("# noise_sigma = {sigma}\n"));
    }
    if let Some(irf) = trace.meta.irf_fwhm {
        out.push_str(&format!(
            "# irf_fwhm_ps = {}\n",
            units::ps_from_seconds(irf)
        ));
    }
    out.push_str("time_ps,intensity\n");
    for i in 0..trace.len() {
        out.push_str(&format!(
            "{},{}\n",
            units::ps_from_seconds(trace.t[i]),
            trace.y[i]
        ));
    }
    write_file(path, &out)
}

pub fn load_trace(path: &Path) -> Result<TimeTrace, TraceIoError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| TraceIoError::Io {
        path: name.clone(),
        message: e.to_string(),
    })?;

    let mut meta = TraceMeta::default();
    let mut header_seen = false;
    let mut t: Vec<f64> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let row = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "noise_sigma" => meta.noise_sigma = value.trim().parse().ok(),
                    "irf_fwhm_ps" => {
                        meta.irf_fwhm = value.trim().parse().ok().map(units::seconds_from_ps)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line.replace(' ', "") != "time_ps,intensity" {
                return Err(TraceIoError::MissingHeader { path: name });
            }
            header_seen = true;
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| TraceIoError::BadCell {
            path: name.clone(),
            row,
            message: "expected two comma-separated cells".into(),
        })?;
        let time: f64 = a.trim().parse().map_err(|_| TraceIoError::BadCell {
            path: name.clone(),
            row,
            message: format!("`{}` is not a number", a.trim()),
        })?;
        let value: f64 = b.trim().parse().map_err(|_| TraceIoError::BadCell {
            path: name.clone(),
            row,
            message: format!("`{}` is not a number", b.trim()),
        })?;
        if !time.is_finite() || !value.is_finite() {
            return Err(TraceIoError::BadCell {
                path: name.clone(),
                row,
                message: "non-finite entry".into(),
            });
        }
        let time = units::seconds_from_ps(time);
        if let Some(last) = t.last() {
            if time <= *last {
                return Err(TraceIoError::NonMonotone { path: name, row });
            }
        }
        t.push(time);
        y.push(value);
    }
    if !header_seen {
        return Err(TraceIoError::MissingHeader { path: name });
    }
    if t.len() < 2 {
        return Err(TraceIoError::TooShort { path: name });
    }
    Ok(TimeTrace { t, y, meta })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), TraceIoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| TraceIoError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| TraceIoError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    file.write_all(contents.as_bytes())
        .map_err(|e| TraceIoError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_bit_equal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let t: Vec<f64> = (0..50).map(|i| -7.5e-12 + i as f64 * 0.7301e-12).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|t| (t * 1e11).sin() * 1.234e-7 + 2.0e-7)
            .collect();
        let trace = TimeTrace::new(t, y).unwrap().with_meta(TraceMeta {
            noise_sigma: Some(0.013),
            irf_fwhm: Some(3e-12),
        });
        write_trace(&path, &trace).unwrap();
        let loaded = load_trace(&path).unwrap();
        assert_eq!(loaded.y, trace.y);
        assert_eq!(loaded.meta.noise_sigma, trace.meta.noise_sigma);
        // writing the loaded trace again reproduces the file byte for byte
        let path2 = dir.path().join("trace2.csv");
        write_trace(&path2, &loaded).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn minimal_two_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.csv");
        std::fs::write(&path, "time_ps,intensity\n0,1.0\n1,0.5\n").unwrap();
        let trace = load_trace(&path).unwrap();
        assert_eq!(trace.len(), 2);
    }

    #[test]
    fn duplicate_timestamp_reports_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.csv");
        std::fs::write(&path, "time_ps,intensity\n0,1\n1,2\n1,3\n").unwrap();
        match load_trace(&path).unwrap_err() {
            TraceIoError::NonMonotone { row, .. } => assert_eq!(row, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_cells_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "time_ps,intensity\n0,abc\n").unwrap();
        assert!(matches!(
            load_trace(&path).unwrap_err(),
            TraceIoError::BadCell { row: 2, .. }
        ));
        std::fs::write(&path, "t,y\n0,1\n").unwrap();
        assert!(matches!(
            load_trace(&path).unwrap_err(),
            TraceIoError::MissingHeader { .. }
        ));
    }
}
