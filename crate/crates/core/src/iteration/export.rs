//! Trace export: a CSV of per-step diagnostics and an optional JSON sidecar
//! with full vectors.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::trace::IterationTrace;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const TRACE_CSV_HEADER: [&str; 5] = ["n", "lambda", "residual", "dist_to_limit", "min_fejer_margin"];

/// One parsed CSV row. Optional columns are empty in the file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub n: usize,
    pub lambda: Option<f64>,
    pub residual: f64,
    pub dist_to_limit: f64,
    pub min_fejer_margin: Option<f64>,
}

// 17 significant digits: exact round trip for f64.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn write_trace_csv<S: Scalar, W: Write>(trace: &IterationTrace<S>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_CSV_HEADER)?;
    for s in &trace.steps {
        w.write_record([
            s.n.to_string(),
            fmt_opt(s.lambda.map(|l| l.to_f64_lossy())),
            fmt_float(s.residual.to_f64_lossy()),
            fmt_float(s.dist_to_limit.to_f64_lossy()),
            fmt_opt(s.min_fejer_margin().map(|m| m.to_f64_lossy())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(TRACE_CSV_HEADER) {
        return Err(Error::Parse(format!("unexpected trace header {header:?}")));
    }
    let float = |field: &str| -> Result<f64> {
        field.parse::<f64>().map_err(|e| Error::Parse(format!("bad float {field:?}: {e}")))
    };
    let opt = |field: &str| -> Result<Option<f64>> {
        if field.is_empty() {
            Ok(None)
        } else {
            float(field).map(Some)
        }
    };
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        rows.push(CsvRow {
            n: record[0].parse().map_err(|e| Error::Parse(format!("bad step index {:?}: {e}", &record[0])))?,
            lambda: opt(&record[1])?,
            residual: float(&record[2])?,
            dist_to_limit: float(&record[3])?,
            min_fejer_margin: opt(&record[4])?,
        });
    }
    Ok(rows)
}

#[derive(Serialize, Deserialize)]
struct VectorsSidecar {
    limit: Vec<f64>,
    final_n: usize,
    final_x: Vec<f64>,
    steps: Vec<SidecarStep>,
}

#[derive(Serialize, Deserialize)]
struct SidecarStep {
    n: usize,
    x: Vec<f64>,
}

/// Writes `P_F x₀`, the final iterate and every recorded iterate that kept
/// its vector.
pub fn write_vectors_json<S: Scalar, W: Write>(trace: &IterationTrace<S>, out: W) -> Result<()> {
    let sidecar = VectorsSidecar {
        limit: trace.limit.to_f64_vec(),
        final_n: trace.summary.final_n,
        final_x: trace.final_x.to_f64_vec(),
        steps: trace
            .steps
            .iter()
            .filter_map(|s| s.x.as_ref().map(|x| SidecarStep { n: s.n, x: x.to_f64_vec() }))
            .collect(),
    };
    serde_json::to_writer(out, &sidecar)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iteration::{run, RunOptions, StopRule};
    use crate::linalg::Vector;
    use crate::operators::LinearOperator;
    use crate::schedules::Schedule;

    #[test]
    fn csv_round_trip_is_exact() {
        let t = LinearOperator::rotation(2.1).unwrap();
        let opts = RunOptions::default().with_max_iters(300).with_stop(StopRule::MaxIters);
        let trace = run(&t, &Schedule::harmonic(), &Vector::new(vec![0.3, -1.7]).unwrap(), &opts).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,lambda,residual,dist_to_limit,min_fejer_margin\n0,,"));
        let rows = read_trace_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), trace.steps.len());
        for (row, step) in rows.iter().zip(&trace.steps) {
            assert_eq!(row.n, step.n);
            assert_eq!(row.lambda, step.lambda);
            assert_eq!(row.residual.to_bits(), step.residual.to_bits());
            assert_eq!(row.dist_to_limit.to_bits(), step.dist_to_limit.to_bits());
            assert_eq!(row.min_fejer_margin, step.min_fejer_margin());
        }
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(read_trace_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn sidecar_contains_vectors() {
        let t = LinearOperator::scaled_identity(2, -1.0);
        let opts = RunOptions::default().with_vectors();
        let trace = run(&t, &Schedule::constant(0.5).unwrap(), &Vector::new(vec![1.0, 2.0]).unwrap(), &opts).unwrap();
        let mut buf = Vec::new();
        write_vectors_json(&trace, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["steps"][0]["x"], serde_json::json!([1.0, 2.0]));
        assert_eq!(v["final_x"], serde_json::json!([0.0, 0.0]));
    }
}
