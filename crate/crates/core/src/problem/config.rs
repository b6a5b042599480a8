//! TOML problem files.
//!
//! ```toml
//! name = "demo"
//! n = 2
//!
//! [box]
//! lower = 0.0            # scalar or per-coordinate array; inf / -inf allowed
//! upper = [1.0, 2.0]
//!
//! [objective]
//! kind = "quadratic-form"
//! matrix = { csv = "M.csv" }   # or an inline array of rows
//! l1 = 0.0                     # weight of the separable l1 term
//!
//! [[constraints]]
//! kind = "linear"              # linear | quadratic-form | l1 | l2-ball
//! coeffs = [-1.0, -1.0]
//! constant = 1.0
//!
//! [constants]
//! beta = 2.0
//! c = 3.0                      # optional
//! r = 1.5                      # optional
//! ```
//!
//! CSV matrices are row-major, no header, paths relative to the TOML file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BoxSet, Constants, Constraint, Problem, SeparableTerm, SmoothKind, SmoothOracle};
use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Bound {
    fn expand(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            Bound::Scalar(v) => Ok(vec![*v; n]),
            Bound::Vector(v) => {
                check_len("box bound", n, v.len())?;
                Ok(v.clone())
            }
        }
    }

    fn compress(v: &[f64]) -> Self {
        match v.first() {
            Some(&first) if v.iter().all(|x| x.to_bits() == first.to_bits()) => {
                Bound::Scalar(first)
            }
            _ => Bound::Vector(v.to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixPayload {
    Inline(Vec<Vec<f64>>),
    File { csv: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxConfig {
    pub lower: Bound,
    pub upper: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SmoothConfig {
    Constant {
        value: f64,
    },
    Linear {
        coeffs: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    QuadraticForm {
        matrix: MatrixPayload,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        constant: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smoothness: Option<f64>,
    },
    SquaredNorm {
        #[serde(default = "one")]
        weight: f64,
        #[serde(default)]
        constant: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    #[serde(flatten)]
    pub smooth: SmoothConfig,
    #[serde(default)]
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstraintConfig {
    /// `aᵀx + c ≤ 0` (or `= 0`).
    Linear {
        coeffs: Vec<f64>,
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        equality: bool,
    },
    /// `xᵀQx + aᵀx + c ≤ 0`
    QuadraticForm {
        matrix: MatrixPayload,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        constant: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        smoothness: Option<f64>,
    },
    /// `weight·‖x‖₁ − bound ≤ 0`
    L1 {
        #[serde(default = "one")]
        weight: f64,
        bound: f64,
    },
    /// `‖x‖² − bound ≤ 0`
    L2Ball { bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsConfig {
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: String,
    pub n: usize,
    #[serde(rename = "box")]
    pub bounds: BoxConfig,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub constraints: Vec<ConstraintConfig>,
    pub constants: ConstantsConfig,
}

fn one() -> f64 {
    1.0
}

/// How matrices are stored when exporting a problem.
#[derive(Debug, Clone)]
pub enum MatrixStorage {
    Inline,
    /// Write each matrix as `<stem>_<label>.csv` next to the TOML file.
    Csv {
        stem: String,
    },
}

impl ProblemConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds the problem; CSV references resolve against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Problem> {
        let n = self.n;
        let bounds = BoxSet::new(self.bounds.lower.expand(n)?, self.bounds.upper.expand(n)?)?;
        let objective = build_smooth(&self.objective.smooth, n, base_dir)?;
        let objective_separable = l1_term(self.objective.l1);
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            constraints.push(match c {
                ConstraintConfig::Linear {
                    coeffs,
                    constant,
                    equality,
                } => {
                    check_len("linear constraint", n, coeffs.len())?;
                    Constraint {
                        smooth: SmoothOracle::linear(coeffs.clone(), *constant),
                        separable: SeparableTerm::Zero,
                        equality: *equality,
                    }
                }
                ConstraintConfig::QuadraticForm {
                    matrix,
                    linear,
                    constant,
                    smoothness,
                } => Constraint::smooth(build_quadratic(
                    matrix,
                    linear,
                    *constant,
                    *smoothness,
                    n,
                    base_dir,
                )?),
                ConstraintConfig::L1 { weight, bound } => Constraint::new(
                    SmoothOracle::constant(n, -bound),
                    SeparableTerm::WeightedL1(*weight),
                ),
                ConstraintConfig::L2Ball { bound } => {
                    Constraint::smooth(SmoothOracle::squared_norm(n, 1.0, -bound))
                }
            });
        }
        let constants = Constants {
            beta: self.constants.beta,
            c_bound: self.constants.c,
            radius: self.constants.r,
        };
        let name = if self.name.is_empty() {
            "problem".to_string()
        } else {
            self.name.clone()
        };
        Problem::new(
            name,
            objective,
            objective_separable,
            constraints,
            bounds,
            constants,
        )
    }

    /// Describes `problem` in config form. Returns the config and the
    /// matrices that must be written to CSV (file name, matrix).
    pub fn from_problem(
        problem: &Problem,
        storage: &MatrixStorage,
    ) -> Result<(Self, Vec<(String, DenseMatrix)>)> {
        let mut files = Vec::new();
        let mut payload = |label: &str, m: &DenseMatrix| -> MatrixPayload {
            match storage {
                MatrixStorage::Inline => MatrixPayload::Inline(m.to_rows()),
                MatrixStorage::Csv { stem } => {
                    let file = format!("{stem}_{label}.csv");
                    files.push((file.clone(), m.clone()));
                    MatrixPayload::File { csv: file }
                }
            }
        };
        let objective = ObjectiveConfig {
            smooth: export_smooth(problem.objective(), "objective", &mut payload)?,
            l1: match problem.objective_separable().l1_weight() {
                Some(w) => w,
                None => return Err(unrepresentable("custom separable objective term")),
            },
        };
        let mut constraints = Vec::new();
        for (k, c) in problem.constraints().iter().enumerate() {
            let l1 = c
                .separable
                .l1_weight()
                .ok_or_else(|| unrepresentable("custom separable constraint term"))?;
            let cfg = match (c.smooth.kind(), l1 != 0.0) {
                (SmoothKind::Constant(v), true) => ConstraintConfig::L1 {
                    weight: l1,
                    bound: -v,
                },
                (_, true) => {
                    return Err(unrepresentable(
                        "l1 constraint with a non-constant smooth part",
                    ))
                }
                (SmoothKind::SquaredNorm { weight, constant }, false)
                    if *weight == 1.0 && c.smooth.smoothness() == 2.0 =>
                {
                    ConstraintConfig::L2Ball { bound: -constant }
                }
                (SmoothKind::Constant(v), false) => ConstraintConfig::Linear {
                    coeffs: vec![0.0; problem.dim()],
                    constant: *v,
                    equality: c.equality,
                },
                (SmoothKind::Linear { coeffs, constant }, false) => ConstraintConfig::Linear {
                    coeffs: coeffs.clone(),
                    constant: *constant,
                    equality: c.equality,
                },
                (
                    SmoothKind::Quadratic {
                        matrix,
                        linear,
                        constant,
                    },
                    false,
                ) => ConstraintConfig::QuadraticForm {
                    matrix: payload(&format!("g{}", k + 1), matrix),
                    linear: Some(linear.clone()),
                    constant: *constant,
                    smoothness: Some(c.smooth.smoothness()),
                },
                _ => return Err(unrepresentable("constraint kind")),
            };
            constraints.push(cfg);
        }
        let consts = problem.constants();
        let cfg = ProblemConfig {
            name: problem.name.clone(),
            n: problem.dim(),
            bounds: BoxConfig {
                lower: Bound::compress(problem.bounds().lower()),
                upper: Bound::compress(problem.bounds().upper()),
            },
            objective,
            constraints,
            constants: ConstantsConfig {
                beta: consts.beta,
                c: consts.c_bound,
                r: consts.radius,
            },
        };
        Ok((cfg, files))
    }
}

fn unrepresentable(what: &str) -> Error {
    Error::Config(format!(
        "{what} cannot be expressed in the problem file format"
    ))
}

fn l1_term(w: f64) -> SeparableTerm {
    if w == 0.0 {
        SeparableTerm::Zero
    } else {
        SeparableTerm::WeightedL1(w)
    }
}

fn load_payload(p: &MatrixPayload, base_dir: &Path) -> Result<DenseMatrix> {
    match p {
        MatrixPayload::Inline(rows) => DenseMatrix::from_rows(rows),
        MatrixPayload::File { csv } => read_matrix_csv(&base_dir.join(csv)),
    }
}

fn build_quadratic(
    matrix: &MatrixPayload,
    linear: &Option<Vec<f64>>,
    constant: f64,
    smoothness: Option<f64>,
    n: usize,
    base_dir: &Path,
) -> Result<SmoothOracle> {
    let m = load_payload(matrix, base_dir)?;
    check_len("quadratic matrix", n, m.rows())?;
    let lin = linear.clone().unwrap_or_else(|| vec![0.0; n]);
    let o = SmoothOracle::quadratic(m, lin, constant)?;
    Ok(match smoothness {
        Some(l) => o.with_smoothness(l),
        None => o,
    })
}

fn build_smooth(cfg: &SmoothConfig, n: usize, base_dir: &Path) -> Result<SmoothOracle> {
    Ok(match cfg {
        SmoothConfig::Constant { value } => SmoothOracle::constant(n, *value),
        SmoothConfig::Linear { coeffs, constant } => {
            check_len("linear objective", n, coeffs.len())?;
            SmoothOracle::linear(coeffs.clone(), *constant)
        }
        SmoothConfig::QuadraticForm {
            matrix,
            linear,
            constant,
            smoothness,
        } => build_quadratic(matrix, linear, *constant, *smoothness, n, base_dir)?,
        SmoothConfig::SquaredNorm { weight, constant } => {
            SmoothOracle::squared_norm(n, *weight, *constant)
        }
    })
}

fn export_smooth(
    o: &SmoothOracle,
    label: &str,
    payload: &mut impl FnMut(&str, &DenseMatrix) -> MatrixPayload,
) -> Result<SmoothConfig> {
    Ok(match o.kind() {
        SmoothKind::Constant(v) => SmoothConfig::Constant { value: *v },
        SmoothKind::Linear { coeffs, constant } => SmoothConfig::Linear {
            coeffs: coeffs.clone(),
            constant: *constant,
        },
        SmoothKind::Quadratic {
            matrix,
            linear,
            constant,
        } => SmoothConfig::QuadraticForm {
            matrix: payload(label, matrix),
            linear: Some(linear.clone()),
            constant: *constant,
            smoothness: Some(o.smoothness()),
        },
        SmoothKind::SquaredNorm { weight, constant } => SmoothConfig::SquaredNorm {
            weight: *weight,
            constant: *constant,
        },
        SmoothKind::Custom(_) => return Err(unrepresentable("custom smooth oracle")),
    })
}

/// Loads a problem from a TOML file.
pub fn load_problem(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path)?;
    let cfg = ProblemConfig::from_toml_str(&text)?;
    cfg.build(path.parent().unwrap_or(Path::new(".")))
}

/// Writes `problem` to `path` (TOML) plus any CSV matrices beside it.
/// Returns every file written.
pub fn save_problem(
    problem: &Problem,
    path: &Path,
    storage: &MatrixStorage,
) -> Result<Vec<PathBuf>> {
    let (cfg, matrices) = ProblemConfig::from_problem(problem, storage)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut written = Vec::new();
    for (file, m) in &matrices {
        let p = dir.join(file);
        write_matrix_csv(&p, m)?;
        written.push(p);
    }
    fs::write(path, cfg.to_toml_string()?)?;
    written.push(path.to_path_buf());
    Ok(written)
}

/// Format used for every real number written to CSV: 17 significant digits.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_real(*v));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "sample"
n = 2

[box]
lower = [0.0, -inf]
upper = 1.0

[objective]
kind = "quadratic-form"
matrix = [[2.0, 0.5], [0.5, 1.0]]
l1 = 0.25

[[constraints]]
kind = "linear"
coeffs = [-1.0, -1.0]
constant = 1.0

[[constraints]]
kind = "l1"
bound = 0.75

[[constraints]]
kind = "l2-ball"
bound = 2.0

[constants]
beta = 3.0
c = 4.0
"#;

    #[test]
    fn parses_and_evaluates() {
        let p = ProblemConfig::from_toml_str(SAMPLE)
            .unwrap()
            .build(Path::new("."))
            .unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.bounds().lower()[1], f64::NEG_INFINITY);
        let x = [0.5, -0.25];
        let g = p.eval_g(&x).unwrap();
        assert_eq!(g, vec![1.0 - 0.25, 0.75 - 0.75, 0.3125 - 2.0]);
        // 2(.25) + 2(.5)(.5)(-.25) + 1(.0625) + .25(.75)
        let f = 0.5 - 0.125 + 0.0625 + 0.1875;
        assert!((p.objective_value(&x) - f).abs() < 1e-15);
        assert_eq!(p.constants().radius, None);
    }

    #[test]
    fn export_round_trips_through_toml_and_csv() {
        let p = ProblemConfig::from_toml_str(SAMPLE)
            .unwrap()
            .build(Path::new("."))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.toml");
        save_problem(&p, &path, &MatrixStorage::Csv { stem: "p".into() }).unwrap();
        let q = load_problem(&path).unwrap();
        let x = [0.123_456_789_012_345_68, -0.987654321];
        assert_eq!(
            p.objective_value(&x).to_bits(),
            q.objective_value(&x).to_bits()
        );
        assert_eq!(p.eval_g(&x).unwrap(), q.eval_g(&x).unwrap());
        assert_eq!(p.l_f(), q.l_f());

        let (a, _) = ProblemConfig::from_problem(&p, &MatrixStorage::Inline).unwrap();
        let b = ProblemConfig::from_toml_str(&a.to_toml_string().unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matrix_csv_is_lossless() {
        let m = DenseMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 6.02214076e23]])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_matrix_csv(&path, &m).unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("1.0000000000000001e-1,"));
    }

    #[test]
    fn bad_documents_are_config_errors() {
        assert!(matches!(
            ProblemConfig::from_toml_str("n = 2"),
            Err(Error::Config(_))
        ));
        let wrong_len = SAMPLE.replace("coeffs = [-1.0, -1.0]", "coeffs = [-1.0]");
        let cfg = ProblemConfig::from_toml_str(&wrong_len).unwrap();
        assert!(cfg.build(Path::new(".")).is_err());
    }
}
