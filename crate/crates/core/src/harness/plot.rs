//! Curve extraction from metrics CSVs for external plotting tools.

use std::path::{Path, PathBuf};

use super::metrics::column;
use crate::error::{Error, Result};

/// `(x, y)` pairs from two columns of a metrics CSV. Rows whose `y` is NaN
/// (updates without finished episodes) are skipped.
pub fn read_series(text: &str, x_col: &str, y_col: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().enumerate();
    let Some((_, head)) = lines.next() else {
        return Ok(Vec::new());
    };
    let missing = |c: &str| Error::Parse {
        line: 1,
        msg: format!("no '{}' column", c),
    };
    let xi = column(head, x_col).ok_or_else(|| missing(x_col))?;
    let yi = column(head, y_col).ok_or_else(|| missing(y_col))?;
    let width = head.split(',').count();
    let mut out = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let err = |msg: String| Error::Parse { line: idx + 1, msg };
        if fields.len() != width {
            return Err(err(format!("{} fields, header has {}", fields.len(), width)));
        }
        let num = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|_| err(format!("'{}' is not a number", fields[i])))
        };
        let (x, y) = (num(xi)?, num(yi)?);
        if !y.is_nan() {
            out.push((x, y));
        }
    }
    Ok(out)
}

/// Averages consecutive points in bins of `factor`.
pub fn downsample(series: &[(f64, f64)], factor: usize) -> Vec<(f64, f64)> {
    let factor = factor.max(1);
    series
        .chunks(factor)
        .map(|c| {
            let n = c.len() as f64;
            (c.iter().map(|p| p.0).sum::<f64>() / n, c.iter().map(|p| p.1).sum::<f64>() / n)
        })
        .collect()
}

/// Writes `return.dat` and `length.dat` (env steps against the episode
/// return and length means) into `out_dir`, at most `max_points` each.
pub fn plot_data(metrics: &Path, out_dir: &Path, max_points: usize) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(metrics).map_err(|e| Error::io(metrics, e))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (file, col) in [("return.dat", "return_mean"), ("length.dat", "length_mean")] {
        let series = read_series(&text, "env_steps", col)?;
        let factor = series.len().div_ceil(max_points.max(1));
        let mut body = format!("# env_steps {}\n", col);
        for (x, y) in downsample(&series, factor) {
            body.push_str(&format!("{} {}\n", x, y));
        }
        let path = out_dir.join(file);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
