use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use vqpd::problem::config::format_real;
use vqpd::solvers::{Algorithm, IterationRecord};

/// One finished run inside a comparison.
pub struct Compared {
    pub label: String,
    pub algorithm: Algorithm,
    pub trace: Vec<IterationRecord>,
    pub iteration_ns: Vec<u64>,
    pub final_objective: f64,
    pub final_max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTiming {
    pub label: String,
    pub algorithm: Algorithm,
    pub final_objective: f64,
    pub final_max_violation: f64,
    pub mean_iteration_ns: f64,
    pub median_iteration_ns: f64,
    /// Baseline mean time over this run's mean time.
    pub mean_ratio: f64,
    /// Same for the medians.
    pub p50_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    pub instance: String,
    pub baseline: String,
    pub runs: Vec<RunTiming>,
}

/// Writes `t` plus `F_xbar` and `max_violation_xbar` for every run, one row
/// per iteration that appears in any trace. Cells of runs without that row
/// are left empty.
pub fn write_aligned<W: Write>(out: W, runs: &[Compared]) -> csv::Result<()> {
    let mut rows: BTreeMap<u64, Vec<Option<&IterationRecord>>> = BTreeMap::new();
    for (i, run) in runs.iter().enumerate() {
        for rec in &run.trace {
            rows.entry(rec.t).or_insert_with(|| vec![None; runs.len()])[i] = Some(rec);
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["t".to_string()];
    for run in runs {
        header.push(format!("F_xbar:{}", run.label));
        header.push(format!("max_violation_xbar:{}", run.label));
    }
    w.write_record(&header)?;
    for (t, cells) in rows {
        let mut record = vec![t.to_string()];
        for cell in cells {
            match cell {
                Some(r) => {
                    record.push(format_real(r.f_xbar));
                    record.push(format_real(r.max_violation_xbar));
                }
                None => record.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// The first `yu-neely` run is the timing baseline, or the first run when
/// there is none.
pub fn summarize(instance: &str, runs: &[Compared]) -> ComparisonSummary {
    let base = runs
        .iter()
        .position(|r| r.algorithm == Algorithm::YuNeely)
        .unwrap_or(0);
    let timing = |r: &Compared| (mean(&r.iteration_ns), vqpd::trace::median(&r.iteration_ns));
    let (base_mean, base_p50) = timing(&runs[base]);
    ComparisonSummary {
        instance: instance.to_string(),
        baseline: runs[base].label.clone(),
        runs: runs
            .iter()
            .map(|r| {
                let (m, p) = timing(r);
                RunTiming {
                    label: r.label.clone(),
                    algorithm: r.algorithm,
                    final_objective: r.final_objective,
                    final_max_violation: r.final_max_violation,
                    mean_iteration_ns: m,
                    median_iteration_ns: p,
                    mean_ratio: base_mean / m,
                    p50_ratio: base_p50 / p,
                }
            })
            .collect(),
    }
}

fn mean(v: &[u64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64
    }
}

/// Labels by algorithm name, with the run's stem appended when two runs
/// share an algorithm.
pub fn labels(runs: &[(Algorithm, String)]) -> Vec<String> {
    runs.iter()
        .map(|(alg, stem)| {
            if runs.iter().filter(|(a, _)| a == alg).count() > 1 {
                format!("{alg}@{stem}")
            } else {
                alg.to_string()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, f: f64) -> IterationRecord {
        IterationRecord {
            t,
            f_x: f,
            f_xbar: f,
            max_violation_xbar: 0.5 * f,
            queue_norm: 0.0,
            alpha_t: 1.0,
            drift: 0.0,
            wall_time_ns: 0,
        }
    }

    fn compared(label: &str, algorithm: Algorithm, ts: &[u64], ns: Vec<u64>) -> Compared {
        Compared {
            label: label.into(),
            algorithm,
            trace: ts.iter().map(|&t| rec(t, t as f64)).collect(),
            iteration_ns: ns,
            final_objective: 1.0,
            final_max_violation: 0.0,
        }
    }

    #[test]
    fn rows_are_aligned_on_iteration() {
        let runs = [
            compared("a", Algorithm::NewConstant, &[0, 2, 4], vec![1]),
            compared("b", Algorithm::YuNeely, &[0, 4], vec![1]),
        ];
        let mut buf = Vec::new();
        write_aligned(&mut buf, &runs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let f = |v: f64| format_real(v);
        let expected = format!(
            "t,F_xbar:a,max_violation_xbar:a,F_xbar:b,max_violation_xbar:b\n\
             0,{z},{z},{z},{z}\n\
             2,{two},{one},,\n\
             4,{four},{two},{four},{two}\n",
            z = f(0.0),
            one = f(1.0),
            two = f(2.0),
            four = f(4.0)
        );
        assert_eq!(text, expected);
    }

    #[test]
    fn ratios_are_relative_to_yu_neely() {
        let runs = [
            compared("fast", Algorithm::NewConstant, &[0], vec![10, 10, 40]),
            compared("slow", Algorithm::YuNeely, &[0], vec![100, 200, 300]),
        ];
        let s = summarize("x", &runs);
        assert_eq!(s.baseline, "slow");
        assert_eq!(s.runs[0].mean_ratio, 200.0 / 20.0);
        assert_eq!(s.runs[0].p50_ratio, 200.0 / 10.0);
        assert_eq!(s.runs[1].mean_ratio, 1.0);
    }

    #[test]
    fn duplicate_algorithms_get_stems() {
        let l = labels(&[
            (Algorithm::NewConstant, "a".into()),
            (Algorithm::NewConstant, "b".into()),
            (Algorithm::YuNeely, "c".into()),
        ]);
        assert_eq!(l, ["new-constant@a", "new-constant@b", "yu-neely"]);
    }
}
