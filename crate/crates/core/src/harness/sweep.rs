//! Sampling-density sweeps.

use super::config::RunConfig;
use super::run::{run_example, HarnessError};
use crate::sampling::SamplingSpec;
use serde::Serialize;
use std::path::Path;

/// The twelve rows of the sampling-density tables: three interior grids,
/// each with four boundary/interface/initial densities.
pub fn table1_rows() -> Vec<SamplingSpec> {
    let mut rows = Vec::with_capacity(12);
    for (n, nt) in [(10, 5), (20, 10), (40, 20)] {
        for b in [4, 8, 16, 32] {
            rows.push(SamplingSpec {
                interior: [n, n, nt],
                boundary: [b, 4, nt],
                interface: [b, nt],
                initial: [b, b],
                ..SamplingSpec::default()
            });
        }
    }
    rows
}

/// One row per non-empty line: interior, boundary, interface and initial
/// grids separated by whitespace or commas. `#` starts a comment.
pub fn parse_rows(text: &str) -> Result<Vec<SamplingSpec>, HarnessError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        let bad = |msg: String| super::config::ConfigError::Invalid {
            key: "rows",
            msg: format!("line {}: {msg}", i + 1),
        };
        if parts.len() != 4 {
            return Err(bad(format!("expected 4 grids, found {}", parts.len())).into());
        }
        rows.push(SamplingSpec::parse(parts[0], parts[1], parts[2], parts[3]).map_err(|e| bad(e.to_string()))?);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "M_L")]
    pub m_l: String,
    #[serde(rename = "M_B")]
    pub m_b: String,
    #[serde(rename = "M_Gamma")]
    pub m_gamma: String,
    #[serde(rename = "M_I")]
    pub m_i: String,
    pub gen_error: f64,
    pub loss_error: f64,
    pub gen_error_pressure: f64,
}

/// Runs `base` once per row, each in its own output subdirectory.
pub fn sweep(rows: &[SamplingSpec], base: &RunConfig) -> Result<Vec<SweepRow>, HarnessError> {
    let mut out = Vec::with_capacity(rows.len());
    for (i, spec) in rows.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.sampling = *spec;
        cfg.output = base.output.join(format!("row_{i:02}"));
        let run = run_example(&cfg)?;
        let [m_l, m_b, m_gamma, m_i] = spec.labels();
        out.push(SweepRow {
            m_l,
            m_b,
            m_gamma,
            m_i,
            gen_error: run.report.gen_error_velocity,
            loss_error: run.report.loss_error,
            gen_error_pressure: run.report.gen_error_pressure,
        });
    }
    Ok(out)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows_counts() {
        let rows = table1_rows();
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0].counts(), [500, 80, 20, 16]);
        assert_eq!(rows[3].counts(), [500, 640, 160, 1024]);
        assert_eq!(rows[4].counts(), [4000, 160, 40, 16]);
        assert_eq!(rows[11].counts(), [32000, 2560, 640, 1024]);
        let interior: Vec<usize> = rows.iter().map(|r| r.counts()[0]).collect();
        assert_eq!(interior, [500, 500, 500, 500, 4000, 4000, 4000, 4000, 32000, 32000, 32000, 32000]);
    }

    #[test]
    fn parse_row_file() {
        let text = "# M_L M_B M_Gamma M_I\n10x10x5 4x4x5 4x5 4x4\n\n20×20×10, 8×4×10, 8×10, 8×8  # second\n";
        let rows = parse_rows(text).unwrap();
        assert_eq!(rows, vec![table1_rows()[0], table1_rows()[5]]);
        assert!(parse_rows("10x10x5 4x4x5 4x5").is_err());
        assert!(parse_rows("10x10 4x4x5 4x5 4x4").is_err());
    }

    #[test]
    fn single_row_sweep_matches_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut base = RunConfig::preset(1).unwrap();
        base.train.pretrain_epochs = 2;
        base.train.main_epochs = 1;
        base.train.shape = vec![3, 6, 3];
        base.eval_grid = [8, 8, 2];
        base.output = dir.path().to_path_buf();
        let rows = sweep(&table1_rows()[..1], &base).unwrap();
        assert_eq!(rows.len(), 1);
        let mut single = base.clone();
        single.output = dir.path().join("single");
        let run = run_example(&single).unwrap();
        assert_eq!(rows[0].gen_error, run.report.gen_error_velocity);
        assert_eq!(rows[0].loss_error, run.report.loss_error);
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("M_L,M_B,M_Gamma,M_I,gen_error,loss_error,gen_error_pressure\n10x10x5,4x4x5,4x5,4x4,"));
    }
}
