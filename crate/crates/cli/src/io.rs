//! Artifact readers/writers. Floats are written with Rust's shortest
//! round-trip formatting, so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use sdex_core::inference::{ObservationMode, ObservationSet};
use sdex_core::DensityGrid;

pub fn write_text(path: &Path, text: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    write_text(path, &text)
}

/// Grid as "x,y,value" rows, x sweeping outermost.
pub fn grid_to_csv(grid: &DensityGrid) -> String {
    let mut out = String::with_capacity(grid.values.len() * 24);
    out.push_str("x,y,value\n");
    for (ix, &x) in grid.x_nodes.iter().enumerate() {
        for (iy, &y) in grid.y_nodes.iter().enumerate() {
            let _ = writeln!(out, "{x:?},{y:?},{:?}", grid.value(ix, iy));
        }
    }
    out
}

/// Observations as "t,y1[,y2,..]" with a header row.
pub fn observations_to_csv(times: &[f64], rows: &[Vec<f64>]) -> String {
    let width = rows.first().map_or(0, |r| r.len());
    let mut out = String::new();
    out.push_str("t");
    for i in 1..=width {
        let _ = write!(out, ",y{i}");
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        let _ = write!(out, "{t:?}");
        for v in row {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn read_observations(path: &Path, mode: ObservationMode) -> Result<ObservationSet, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read observations {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty observations file")?;
    if !header.starts_with("t,") {
        return Err("observations header must start with `t,`".into());
    }
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let t: f64 = fields
            .next()
            .ok_or_else(|| format!("line {}: missing time", lineno + 2))?
            .trim()
            .parse()
            .map_err(|e| format!("line {}: bad time: {e}", lineno + 2))?;
        let row: Result<Vec<f64>, String> = fields
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("line {}: bad value: {e}", lineno + 2))
            })
            .collect();
        times.push(t);
        rows.push(row?);
    }
    ObservationSet::new(times, rows, mode).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_round_trip() {
        let times = vec![0.0, 0.1, 0.2, 0.3];
        let rows = vec![vec![0.5, -0.25], vec![0.1, 0.0], vec![-0.125, 1.0], vec![0.0, 2.0]];
        let csv = observations_to_csv(&times, &rows);
        let dir = std::env::temp_dir().join("sdex-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("obs.csv");
        std::fs::write(&path, &csv).unwrap();
        let obs = read_observations(&path, ObservationMode::FullState).unwrap();
        assert_eq!(obs.times(), times.as_slice());
        assert_eq!(obs.rows(), rows.as_slice());
    }
}
