use std::io::Write;

use super::sim::TrajectoryRecord;
use crate::error::{Error, Result};

/// Per-load columns are written by default only up to this many loads.
pub const PER_LOAD_COLUMN_LIMIT: usize = 32;

pub const COLUMNS: [&str; 10] =
    ["k", "t", "freq_deviation", "u", "mean_u_hat", "total_disutility", "y", "z", "generation", "total_load_deviation"];

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("output: {e}"))
}

/// Writes the trajectory as CSV. Per-load `x_i` columns (1-based) follow
/// the fixed columns when `include_loads` is set and the rows carry them.
pub fn write_csv<W: Write>(out: W, trajectory: &[TrajectoryRecord], include_loads: bool) -> Result<()> {
    let n_loads = match trajectory.first().and_then(|r| r.x.as_ref()) {
        Some(x) if include_loads => x.len(),
        _ => 0,
    };
    let mut w = csv::Writer::from_writer(out);
    let header = COLUMNS.iter().map(|c| c.to_string()).chain((1..=n_loads).map(|i| format!("x_{i}")));
    w.write_record(header).map_err(io_err)?;
    for r in trajectory {
        let fixed = [
            r.k.to_string(),
            r.t.to_string(),
            r.freq_deviation.to_string(),
            r.u.to_string(),
            r.mean_u_hat.to_string(),
            r.total_disutility.to_string(),
            r.y.to_string(),
            r.z.to_string(),
            r.generation.to_string(),
            r.total_load_deviation.to_string(),
        ];
        let loads = r.x.iter().flatten().take(n_loads).map(f64::to_string);
        w.write_record(fixed.into_iter().chain(loads)).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn csv_string(trajectory: &[TrajectoryRecord], include_loads: bool) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, trajectory, include_loads)?;
    String::from_utf8(buf).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(k: u64, x: Option<Vec<f64>>) -> TrajectoryRecord {
        TrajectoryRecord {
            k,
            t: k as f64 * 0.1,
            freq_deviation: -0.25,
            u: 1.5,
            mean_u_hat: 1.25,
            total_disutility: 0.0,
            y: f64::NAN,
            z: f64::NAN,
            generation: 190.0,
            total_load_deviation: -8.5,
            x,
            u_hat: None,
        }
    }

    #[test]
    fn header_and_rows() {
        let text = csv_string(&[row(0, None), row(1, None)], true).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "0,0,-0.25,1.5,1.25,0,NaN,NaN,190,-8.5");
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn per_load_columns() {
        let rows = [row(0, Some(vec![0.5, -1.0]))];
        let with = csv_string(&rows, true).unwrap();
        assert!(with.lines().next().unwrap().ends_with("total_load_deviation,x_1,x_2"));
        assert!(with.lines().nth(1).unwrap().ends_with(",-8.5,0.5,-1"));
        let without = csv_string(&rows, false).unwrap();
        assert!(without.lines().next().unwrap().ends_with("total_load_deviation"));
    }
}
