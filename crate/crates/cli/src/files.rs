use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use qbeat_core::{Curve, Error};

use crate::error::CliError;

/// Read a sampled curve from a histogram CSV (`tau_ns,counts,g2_normalized`)
/// or a g² CSV (`tau_ns,g2,…`). Samples must be evenly spaced.
pub fn read_curve(path: &Path) -> Result<Curve, CliError> {
    let key = path.display().to_string();
    let file = File::open(path).map_err(|e| CliError::at(&key)(Error::Io(e)))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| CliError::at(&key)(Error::Io(e)))?,
        None => return Err(CliError::usage(&key, "empty file")),
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let tau_col = columns.iter().position(|c| *c == "tau_ns");
    let value_col =
        columns.iter().position(|c| *c == "g2_normalized").or_else(|| columns.iter().position(|c| *c == "g2"));
    let (Some(tau_col), Some(value_col)) = (tau_col, value_col) else {
        return Err(CliError::usage(&key, "expected a tau_ns column and a g2 or g2_normalized column"));
    };

    let mut tau = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::at(&key)(Error::Io(e)))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |col: usize| fields.get(col).and_then(|f| f.parse::<f64>().ok());
        match (parse(tau_col), parse(value_col)) {
            (Some(t), Some(v)) => {
                tau.push(t * 1e-9);
                values.push(v);
            }
            _ => return Err(CliError::usage(&key, format!("line {}: malformed record {line:?}", i + 2))),
        }
    }
    if tau.len() < 2 {
        return Err(CliError::usage(&key, "need at least two samples"));
    }
    // The last histogram bin may be narrower after rebinning; drop it if so.
    let dt = tau[1] - tau[0];
    let uneven = |tau: &[f64], k: usize| ((tau[k] - tau[k - 1]) / dt - 1.0).abs() > 1e-3;
    if tau.len() > 2 && uneven(&tau, tau.len() - 1) {
        tau.pop();
        values.pop();
    }
    if let Some(k) = (1..tau.len()).find(|&k| uneven(&tau, k)) {
        return Err(CliError::usage(&key, format!("samples are not evenly spaced at row {}", k + 1)));
    }
    Curve::new(tau[0], dt, values).map_err(CliError::at(&key))
}

pub fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::at("--out")(Error::Io(e)))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::at("--out")(Error::Io(e)))?;
    Ok((path, BufWriter::new(file)))
}

/// Write `name` in `dir` through `body` and flush.
pub fn write_with(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), Error>,
) -> Result<PathBuf, CliError> {
    let (path, mut w) = create(dir, name)?;
    body(&mut w).map_err(CliError::at("--out"))?;
    w.flush().map_err(|e| CliError::at("--out")(Error::Io(e)))?;
    Ok(path)
}

/// File stem for derived outputs, e.g. `clicks` for `runs/clicks.bin`.
pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned())
}
