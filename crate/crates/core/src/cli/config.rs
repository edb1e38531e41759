//! Experiment configuration files (TOML).
//!
//! ```toml
//! seed = 7
//! mode = "approximate"            # exact | approximate | oscillator
//! output_dir = "out/sbm"
//!
//! [model]
//! n = 1
//! la = 2.0                        # scalar (times identity) or nested rows
//! # da, lb, db, lq, dq, lqt, dqt likewise
//! horizon = 1.0
//! steps = 200
//! grid_size = 120                 # needed when no coupling fixes it
//!
//! [coupling.a]
//! kind = "sbm"                    # dictionary | sbm | sbm-limit | csv | same | zero
//! probs = [[0.25, 0.05], [0.05, 0.35]]
//! size = 120
//!
//! [coupling.q]
//! kind = "same"
//! of = "a"
//!
//! [subspace]
//! kind = "eigen"                  # eigen | dictionary | csv
//! of = "a"
//! d = 3
//!
//! [initial]
//! low = -5.0
//! high = 5.0
//! ```

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Approximate,
    Oscillator,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Approximate => "approximate",
            Mode::Oscillator => "oscillator",
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub mode: Mode,
    pub output_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub coupling: CouplingSection,
    pub subspace: SubspaceSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub oscillator: Option<OscillatorSection>,
    #[serde(default)]
    pub oracle: OracleSection,
}

/// A scalar (meaning `v·I`) or an explicit matrix given as rows.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum MatrixValue {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixValue {
    pub fn to_matrix(&self, n: usize, name: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixValue::Scalar(v) => Ok(DMatrix::identity(n, n) * *v),
            MatrixValue::Rows(rows) => rows_to_matrix(rows, name).and_then(|m| {
                if m.shape() != (n, n) {
                    Err(Error::Config(format!("{name} must be {n}x{n}")))
                } else {
                    Ok(m)
                }
            }),
        }
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Config(format!("{name} must be a non-empty rectangular matrix")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "one")]
    pub n: usize,
    pub la: Option<MatrixValue>,
    pub da: Option<MatrixValue>,
    pub lb: Option<MatrixValue>,
    pub db: Option<MatrixValue>,
    pub lq: Option<MatrixValue>,
    pub dq: Option<MatrixValue>,
    pub lqt: Option<MatrixValue>,
    pub dqt: Option<MatrixValue>,
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    pub grid_size: Option<usize>,
}

fn one() -> usize {
    1
}

fn default_steps() -> usize {
    crate::riccati::DEFAULT_STEPS
}

impl ModelSection {
    pub fn locals(&self) -> [(&'static str, &Option<MatrixValue>); 8] {
        [
            ("la", &self.la),
            ("da", &self.da),
            ("lb", &self.lb),
            ("db", &self.db),
            ("lq", &self.lq),
            ("dq", &self.dq),
            ("lqt", &self.lqt),
            ("dqt", &self.dqt),
        ]
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub a: CouplingSource,
    pub b: Option<CouplingSource>,
    pub q: Option<CouplingSource>,
    pub qt: Option<CouplingSource>,
}

impl CouplingSection {
    pub fn get(&self, name: &str) -> Option<&CouplingSource> {
        match name {
            "a" => Some(&self.a),
            "b" => self.b.as_ref(),
            "q" => self.q.as_ref(),
            "qt" => self.qt.as_ref(),
            _ => None,
        }
    }
}

pub const COUPLING_NAMES: [&str; 4] = ["a", "b", "q", "qt"];

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CouplingSource {
    /// Symmetric kernel over trigonometric functions (`one`, `sinK`, `cosK`).
    Dictionary {
        functions: Vec<String>,
        coeffs: Vec<Vec<f64>>,
    },
    /// A network sampled from a stochastic block model.
    Sbm {
        probs: Vec<Vec<f64>>,
        size: Option<usize>,
        sizes: Option<Vec<usize>>,
    },
    /// The block-probability step graphon of a stochastic block model.
    SbmLimit {
        probs: Vec<Vec<f64>>,
        size: Option<usize>,
        sizes: Option<Vec<usize>>,
    },
    /// A weight matrix stored as header-less CSV.
    Csv { path: PathBuf, bound: Option<f64> },
    /// The same graphon as another coupling.
    Same { of: String },
    Zero,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SubspaceSection {
    /// Leading `d` eigenfunctions of a coupling.
    Eigen {
        #[serde(default = "coupling_a")]
        of: String,
        d: usize,
    },
    /// Trigonometric dictionary functions.
    Dictionary { functions: Vec<String> },
    /// Grid values, one column per basis function, orthonormalized on load.
    Csv { path: PathBuf },
}

fn coupling_a() -> String {
    "a".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub low: f64,
    pub high: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { low: -5.0, high: 5.0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSection {
    pub alpha: f64,
    pub beta: f64,
    pub q: MatrixValue,
    pub qt: MatrixValue,
    pub eta: f64,
    #[serde(default = "unit")]
    pub r: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn yes() -> bool {
    true
}

fn default_cap() -> usize {
    crate::sim::ORACLE_CAP
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            enabled: true,
            cap: crate::sim::ORACLE_CAP,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    /// Reads a config; relative paths inside it are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok((config, text))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for source in [
            Some(&mut self.coupling.a),
            self.coupling.b.as_mut(),
            self.coupling.q.as_mut(),
            self.coupling.qt.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            if let CouplingSource::Csv { path, .. } = source {
                fix(path);
            }
        }
        if let SubspaceSection::Csv { path } = &mut self.subspace {
            fix(path);
        }
    }

    fn check(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.model.n == 0 {
            return err("model.n must be positive".into());
        }
        if self.model.steps == 0 {
            return err("model.steps must be positive".into());
        }
        if self.initial.low > self.initial.high {
            return err("initial.low exceeds initial.high".into());
        }
        let oscillator = self.mode == Mode::Oscillator;
        if oscillator {
            if self.oscillator.is_none() {
                return err("oscillator mode requires an [oscillator] section".into());
            }
            if self.model.n != 2 {
                return err("oscillator mode has n = 2".into());
            }
            if let Some((name, _)) = self.model.locals().iter().find(|(_, v)| v.is_some()) {
                return err(format!(
                    "model.{name} is fixed by the [oscillator] section in oscillator mode"
                ));
            }
            if [&self.coupling.b, &self.coupling.q, &self.coupling.qt]
                .iter()
                .any(|c| c.is_some())
            {
                return err("oscillator mode takes only coupling.a".into());
            }
            if !matches!(&self.subspace, SubspaceSection::Eigen { of, .. } if of == "a") {
                return err("oscillator mode uses an eigen subspace of coupling a".into());
            }
        } else {
            if self.oscillator.is_some() {
                return err("[oscillator] section given outside oscillator mode".into());
            }
            if let Some((name, _)) = self.model.locals().iter().find(|(_, v)| v.is_none()) {
                return err(format!("model.{name} is required"));
            }
            for name in COUPLING_NAMES {
                if self.coupling.get(name).is_none() {
                    return err(format!("coupling.{name} is required"));
                }
            }
        }
        for name in COUPLING_NAMES {
            if let Some(CouplingSource::Same { of }) = self.coupling.get(name) {
                match self.coupling.get(of) {
                    None => return err(format!("coupling.{name} refers to unknown coupling '{of}'")),
                    Some(CouplingSource::Same { .. }) => {
                        return err(format!("coupling.{name}: chained 'same' references"))
                    }
                    Some(_) => {}
                }
            }
        }
        if let SubspaceSection::Eigen { of, d } = &self.subspace {
            if self.coupling.get(of).is_none() {
                return err(format!("subspace refers to unknown coupling '{of}'"));
            }
            if *d == 0 {
                return err("subspace.d must be positive".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 3
mode = "exact"

[model]
la = 2.0
da = 1.0
lb = 1.2
db = 1.0
lq = 1.0
dq = 1.0
lqt = 2.0
dqt = 1.0
horizon = 1.0
grid_size = 40

[coupling.a]
kind = "dictionary"
functions = ["sin1", "cos1"]
coeffs = [[1.0, 0.5], [0.5, 1.0]]

[coupling.b]
kind = "zero"

[coupling.q]
kind = "same"
of = "a"

[coupling.qt]
kind = "same"
of = "a"

[subspace]
kind = "dictionary"
functions = ["sin1", "cos1"]
"#;

    #[test]
    fn parses_sample() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.mode, Mode::Exact);
        assert_eq!(c.model.steps, 200);
        assert!(c.oracle.enabled);
        assert!(matches!(c.coupling.b, Some(CouplingSource::Zero)));
        let la = c.model.la.as_ref().unwrap().to_matrix(1, "la").unwrap();
        assert_eq!(la[(0, 0)], 2.0);
    }

    #[test]
    fn rejects_missing_and_unknown_fields() {
        let missing = SAMPLE.replace("lb = 1.2\n", "");
        assert!(matches!(ExperimentConfig::parse(&missing), Err(Error::Config(_))));
        let unknown = SAMPLE.replace("horizon = 1.0", "horizon = 1.0\nfoo = 1");
        assert!(ExperimentConfig::parse(&unknown).is_err());
        let bad_ref = SAMPLE.replace("of = \"a\"", "of = \"z\"");
        assert!(ExperimentConfig::parse(&bad_ref).is_err());
    }

    #[test]
    fn matrix_values() {
        let m = MatrixValue::Rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.to_matrix(2, "m").unwrap()[(1, 0)], 3.0);
        assert!(m.to_matrix(3, "m").is_err());
        assert_eq!(MatrixValue::Scalar(2.0).to_matrix(2, "m").unwrap(), DMatrix::identity(2, 2) * 2.0);
    }
}
