//! Trace CSV files and JSON run summaries.
//!
//! Traces use the header below, LF line endings and 17 significant digits
//! for reals, so they parse back bit-exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::config::format_real;
use crate::problem::Problem;
use crate::solvers::{Algorithm, DiagnosticsReport, IterationRecord, SolverRun, Status};

pub const TRACE_HEADER: [&str; 8] = [
    "t",
    "F_x",
    "F_xbar",
    "max_violation_xbar",
    "queue_norm",
    "alpha_t",
    "drift",
    "wall_time_ns",
];

pub fn write_trace<W: Write>(out: W, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            format_real(r.f_x),
            format_real(r.f_xbar),
            format_real(r.max_violation_xbar),
            format_real(r.queue_norm),
            format_real(r.alpha_t),
            format_real(r.drift),
            r.wall_time_ns.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, records: &[IterationRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    write_trace(std::io::BufWriter::new(file), records)
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<IterationRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(Error::Config(format!("unexpected trace header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let real = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| {
                Error::Config(format!(
                    "bad number '{}' in trace column {}",
                    &rec[i], TRACE_HEADER[i]
                ))
            })
        };
        let int = |i: usize| -> Result<u64> {
            rec[i].parse().map_err(|_| {
                Error::Config(format!(
                    "bad integer '{}' in trace column {}",
                    &rec[i], TRACE_HEADER[i]
                ))
            })
        };
        out.push(IterationRecord {
            t: int(0)?,
            f_x: real(1)?,
            f_xbar: real(2)?,
            max_violation_xbar: real(3)?,
            queue_norm: real(4)?,
            alpha_t: real(5)?,
            drift: real(6)?,
            wall_time_ns: int(7)?,
        });
    }
    Ok(out)
}

pub fn read_trace_file(path: &Path) -> Result<Vec<IterationRecord>> {
    read_trace(std::fs::File::open(path)?)
}

/// End-of-run figures written next to a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub instance: String,
    pub algorithm: Algorithm,
    pub status: Status,
    pub iterations: u64,
    pub final_objective: f64,
    pub final_max_violation: f64,
    pub final_alpha: f64,
    pub mean_iteration_ns: f64,
    pub median_iteration_ns: f64,
    pub total_ns: u64,
    pub inner_iterations: u64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsReport>,
}

impl RunSummary {
    pub fn from_run(problem: &Problem, run: &SolverRun) -> Self {
        Self {
            instance: problem.name.clone(),
            algorithm: run.algorithm,
            status: run.status,
            iterations: run.iterations,
            final_objective: problem.objective_value(&run.x_bar),
            final_max_violation: problem.max_violation(&run.x_bar),
            final_alpha: run.alpha.current,
            mean_iteration_ns: run.mean_iteration_ns(),
            median_iteration_ns: median(&run.iteration_ns),
            total_ns: run.iteration_ns.iter().sum(),
            inner_iterations: run.inner_iterations,
            warnings: run.warnings.clone(),
            diagnostics: run.diagnostics.clone(),
        }
    }

    /// `final objective, final max violation, iterations, mean ns/iter` on
    /// one line.
    pub fn line(&self) -> String {
        format!(
            "{} {}: F(xbar)={} max_violation={} iterations={} mean_iter_ns={:.0}",
            self.instance,
            self.algorithm,
            format_real(self.final_objective),
            format_real(self.final_max_violation),
            self.iterations,
            self.mean_iteration_ns
        )
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

pub fn median(values: &[u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2] as f64
    } else {
        (v[k / 2 - 1] as f64 + v[k / 2] as f64) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(t: u64, v: f64) -> IterationRecord {
        IterationRecord {
            t,
            f_x: v,
            f_xbar: -v / 3.0,
            max_violation_xbar: v.abs() * 1e-17,
            queue_norm: 0.1,
            alpha_t: 1.5015,
            drift: -v * 1e300,
            wall_time_ns: t * 7,
        }
    }

    #[test]
    fn header_and_line_endings() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &[record(0, 1.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "t,F_x,F_xbar,max_violation_xbar,queue_norm,alpha_t,drift,wall_time_ns\n"
        ));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn bad_header_is_rejected() {
        assert!(read_trace("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3, 1, 2]), 2.0);
        assert_eq!(median(&[4, 1, 2, 3]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }

    proptest! {
        #[test]
        fn traces_round_trip_bit_exactly(vals in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let recs: Vec<_> = vals.iter().enumerate().map(|(i, &v)| record(i as u64, v)).collect();
            let mut buf = Vec::new();
            write_trace(&mut buf, &recs).unwrap();
            let back = read_trace(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), recs.len());
            for (a, b) in back.iter().zip(&recs) {
                prop_assert_eq!(a.f_x.to_bits(), b.f_x.to_bits());
                prop_assert_eq!(a.f_xbar.to_bits(), b.f_xbar.to_bits());
                prop_assert_eq!(a.max_violation_xbar.to_bits(), b.max_violation_xbar.to_bits());
                prop_assert_eq!(a.drift.to_bits(), b.drift.to_bits());
                prop_assert_eq!(a, b);
            }
        }
    }
}
