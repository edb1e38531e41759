use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{
    rows_to_matrix, CouplingSource, ExperimentConfig, Mode, SubspaceSection, COUPLING_NAMES,
};
use crate::control::{
    expand_oscillator, oscillator_approximate_law, oscillator_law, synthesize_approximate,
    synthesize_exact, ControlLaw, OscillatorModel,
};
use crate::error::{Error, OperatorResidual, Result};
use crate::graphon::{
    sample_sbm, step_from_matrix, DictionaryGraphon, Graphon, GridFunction, SbmSpec, TrigFunction,
};
use crate::io::{create, fmt_f64, read_matrix_csv, write_matrix_csv};
use crate::riccati::{CouplingModel, ResidualNorms};
use crate::sim::{
    compare, evaluate_cost, oracle_synthesize, simulate, uniform_initial_state, ComparisonReport,
    Trajectory,
};
use crate::subspace::{certify, SubspaceBasis, CERTIFICATE_TOL, ORTHONORMAL_TOL, RANK_TOL};

/// Command-line overrides of config values.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
}

/// A sampled network and the seed it was drawn with.
#[derive(Clone, Debug)]
pub struct SampledCoupling {
    pub name: &'static str,
    pub seed: u64,
    pub adjacency: DMatrix<f64>,
}

/// Oscillator models on the sampled network and, when known, on its limit.
#[derive(Clone, Debug)]
pub struct OscillatorSetup {
    pub sampled: OscillatorModel,
    pub limit: Option<OscillatorModel>,
}

/// A fully resolved experiment: model, basis and initial state.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub config_path: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub steps: usize,
    pub grid_size: usize,
    pub model: CouplingModel,
    pub oscillator: Option<OscillatorSetup>,
    pub basis: SubspaceBasis,
    pub basis_source: String,
    pub x0: GridFunction,
    pub samples: Vec<SampledCoupling>,
    pub output_dir: PathBuf,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn config_err(context: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config(m) => Error::Config(format!("{context}: {m}")),
        other => Error::Config(format!("{context}: {other}")),
    }
}

fn parse_functions(names: &[String]) -> Result<Vec<TrigFunction>> {
    names
        .iter()
        .map(|s| s.parse::<TrigFunction>())
        .collect::<Result<Vec<_>>>()
}

fn sbm_spec(probs: &[Vec<f64>], size: Option<usize>, sizes: &Option<Vec<usize>>, seed: u64) -> Result<SbmSpec> {
    let probs = rows_to_matrix(probs, "probs")?;
    match (size, sizes) {
        (Some(size), None) => SbmSpec::equal_blocks(probs, size, seed),
        (None, Some(sizes)) => SbmSpec::new(probs, sizes.clone(), seed),
        _ => Err(Error::Config("give exactly one of 'size' and 'sizes'".into())),
    }
}

/// Loads and resolves a config file. SBM seeds are drawn from the master
/// generator in the order a, b, q, qt, followed by the initial state.
pub fn load_experiment(path: &Path, opts: &RunOptions) -> Result<Experiment> {
    let (config, text) = ExperimentConfig::load(path)?;
    build_experiment(config, path, &text, opts)
}

pub fn build_experiment(
    config: ExperimentConfig,
    path: &Path,
    text: &str,
    opts: &RunOptions,
) -> Result<Experiment> {
    let seed = opts.seed.unwrap_or(config.seed);
    let steps = opts.steps.unwrap_or(config.model.steps);
    if steps == 0 {
        return Err(Error::Config("steps must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut graphons: Vec<Option<Graphon>> = vec![None; 4];
    let mut limits: Vec<Option<Graphon>> = vec![None; 4];
    let mut samples = Vec::new();
    for (slot, name) in COUPLING_NAMES.iter().enumerate() {
        let Some(source) = config.coupling.get(name) else { continue };
        let context = format!("coupling.{name}");
        let built: Result<Option<Graphon>> = (|| match source {
            CouplingSource::Dictionary { functions, coeffs } => {
                let g = DictionaryGraphon::new(parse_functions(functions)?, rows_to_matrix(coeffs, "coeffs")?)?;
                Ok(Some(g.into()))
            }
            CouplingSource::Sbm { probs, size, sizes } => {
                let spec = sbm_spec(probs, *size, sizes, rng.next_u64())?;
                let adjacency = sample_sbm(&spec);
                limits[slot] = Some(step_from_matrix(spec.expected_weights(), 1.0)?);
                samples.push(SampledCoupling {
                    name,
                    seed: spec.seed(),
                    adjacency: adjacency.clone(),
                });
                Ok(Some(step_from_matrix(adjacency, 1.0)?))
            }
            CouplingSource::SbmLimit { probs, size, sizes } => {
                let spec = sbm_spec(probs, *size, sizes, 0)?;
                let g = step_from_matrix(spec.expected_weights(), 1.0)?;
                limits[slot] = Some(g.clone());
                Ok(Some(g))
            }
            CouplingSource::Csv { path, bound } => {
                let w = read_matrix_csv(path)?;
                let bound = bound.unwrap_or_else(|| crate::linalg::max_abs(&w));
                Ok(Some(step_from_matrix(w, bound)?))
            }
            CouplingSource::Same { .. } => Ok(None),
            CouplingSource::Zero => Ok(Some(Graphon::zero())),
        })();
        graphons[slot] = built.map_err(config_err(&context))?;
    }
    for (slot, name) in COUPLING_NAMES.iter().enumerate() {
        if let Some(CouplingSource::Same { of }) = config.coupling.get(name) {
            let target = COUPLING_NAMES.iter().position(|n| n == of).expect("checked on parse");
            graphons[slot] = graphons[target].clone();
            limits[slot] = limits[target].clone();
        }
    }

    let mut grid_size = config.model.grid_size;
    for (g, name) in graphons.iter().zip(COUPLING_NAMES) {
        if let Some(s) = g.as_ref().and_then(|g| g.grid_size()) {
            match grid_size {
                Some(prev) if prev != s => {
                    return Err(Error::Config(format!(
                        "coupling.{name} has {s} nodes but the grid has {prev}"
                    )))
                }
                _ => grid_size = Some(s),
            }
        }
    }
    let grid_size = grid_size
        .ok_or_else(|| Error::Config("model.grid_size is required when no coupling is a network".into()))?;

    let model_section = &config.model;
    let n = model_section.n;
    let basis_graphon = |of: &str| {
        let slot = COUPLING_NAMES.iter().position(|c| *c == of).expect("checked on parse");
        graphons[slot].clone().expect("resolved")
    };
    let (basis, basis_source) = match &config.subspace {
        SubspaceSection::Eigen { of, d } => (
            SubspaceBasis::eigenbasis(&basis_graphon(of), *d).map_err(config_err("subspace"))?,
            format!("eigen({of}, d = {d})"),
        ),
        SubspaceSection::Dictionary { functions } => (
            parse_functions(functions)
                .and_then(SubspaceBasis::from_dictionary)
                .map_err(config_err("subspace"))?,
            format!("dictionary({})", functions.join(", ")),
        ),
        SubspaceSection::Csv { path } => {
            let values = read_matrix_csv(path)?;
            if values.nrows() != grid_size {
                return Err(Error::Config(format!(
                    "subspace CSV has {} rows, grid has {grid_size}",
                    values.nrows()
                )));
            }
            (
                SubspaceBasis::from_grid(values).map_err(config_err("subspace"))?,
                format!("csv({})", path.display()),
            )
        }
    };

    let horizon = model_section.horizon;
    let (model, oscillator) = if config.mode == Mode::Oscillator {
        let osc = config.oscillator.as_ref().expect("checked on parse");
        let d = basis.dim();
        let sampled = OscillatorModel::new(
            osc.alpha,
            osc.beta,
            osc.q.to_matrix(2, "oscillator.q")?,
            osc.qt.to_matrix(2, "oscillator.qt")?,
            osc.eta,
            osc.r,
            graphons[0].clone().expect("coupling a"),
            d,
            horizon,
        )
        .map_err(config_err("oscillator"))?;
        let limit = limits[0].clone().map(|g| sampled.with_graphon(g));
        (
            expand_oscillator(&sampled)?,
            Some(OscillatorSetup { sampled, limit }),
        )
    } else {
        let local = |v: &Option<super::config::MatrixValue>, name: &str| {
            v.as_ref().expect("checked on parse").to_matrix(n, name)
        };
        let take = |slot: usize| graphons[slot].clone().expect("checked on parse");
        let model = CouplingModel {
            la: local(&model_section.la, "la")?,
            da: local(&model_section.da, "da")?,
            lb: local(&model_section.lb, "lb")?,
            db: local(&model_section.db, "db")?,
            lq: local(&model_section.lq, "lq")?,
            dq: local(&model_section.dq, "dq")?,
            lqt: local(&model_section.lqt, "lqt")?,
            dqt: local(&model_section.dqt, "dqt")?,
            a: take(0),
            b: take(1),
            q: take(2),
            qt: take(3),
            horizon,
        };
        model.validate().map_err(config_err("model"))?;
        (model, None)
    };

    let x0 = uniform_initial_state(&mut rng, grid_size, n, config.initial.low, config.initial.high)?;
    let output_dir = opts
        .output_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| {
            let stem = path.file_stem().map_or("experiment".into(), |s| s.to_string_lossy().into_owned());
            PathBuf::from("out").join(stem)
        });

    Ok(Experiment {
        config_hash: sha256_hex(text),
        config,
        config_path: path.to_path_buf(),
        seed,
        steps,
        grid_size,
        model,
        oscillator,
        basis,
        basis_source,
        x0,
        samples,
        output_dir,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodReport {
    pub name: String,
    pub law_mode: String,
    pub cost: f64,
    pub synthesis_seconds: f64,
    pub simulation_seconds: f64,
    pub residual_norms: ResidualNorms,
    pub comparison: Option<ComparisonReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub cost: f64,
    pub synthesis_seconds: f64,
    pub simulation_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub mode: String,
    pub seed: u64,
    pub grid_size: usize,
    pub dim: usize,
    pub modes: usize,
    pub steps: usize,
    pub horizon: f64,
    pub methods: Vec<MethodReport>,
    pub oracle: Option<OracleReport>,
}

impl RunReport {
    /// `key = value` lines.
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("mode = {}", self.mode),
            format!("seed = {}", self.seed),
            format!("grid_size = {}", self.grid_size),
            format!("dim = {}", self.dim),
            format!("modes = {}", self.modes),
            format!("steps = {}", self.steps),
            format!("horizon = {}", fmt_f64(self.horizon)),
        ];
        if let Some(o) = &self.oracle {
            out.push(format!("oracle.cost = {}", fmt_f64(o.cost)));
            out.push(format!("oracle.synthesis_seconds = {}", fmt_f64(o.synthesis_seconds)));
        }
        for m in &self.methods {
            let p = format!("{}.", m.name);
            out.push(format!("{p}law = {}", m.law_mode));
            out.push(format!("{p}cost = {}", fmt_f64(m.cost)));
            out.push(format!("{p}synthesis_seconds = {}", fmt_f64(m.synthesis_seconds)));
            let r = &m.residual_norms;
            for (k, v) in [("a", r.a), ("b", r.b), ("q", r.q), ("qt", r.qt)] {
                out.push(format!("{p}residual_norm.{k} = {}", fmt_f64(v)));
            }
            if let Some(c) = &m.comparison {
                out.extend(c.lines(&format!("{p}vs_oracle.")));
            }
        }
        out
    }
}

/// Everything a `run` produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub laws: Vec<(String, ControlLaw)>,
    pub trajectories: Vec<(String, Trajectory)>,
    pub files: Vec<PathBuf>,
}

struct Timed<T> {
    value: T,
    seconds: f64,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<Timed<T>> {
    let start = Instant::now();
    let value = f()?;
    Ok(Timed {
        value,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn synthesize(exp: &Experiment) -> Result<Vec<(String, Timed<ControlLaw>)>> {
    let steps = exp.steps;
    Ok(match (&exp.config.mode, &exp.oscillator) {
        (Mode::Exact, _) => vec![(
            "exact".into(),
            timed(|| synthesize_exact(&exp.model, &exp.basis, steps))?,
        )],
        (Mode::Approximate, _) => vec![(
            "approximate".into(),
            timed(|| synthesize_approximate(&exp.model, &exp.basis, steps))?,
        )],
        (Mode::Oscillator, Some(setup)) => {
            let graphon_model = setup.limit.as_ref().unwrap_or(&setup.sampled);
            if setup.limit.is_none() {
                log::warn!("coupling a has no known limit; the graphon law uses the network itself");
            }
            vec![
                ("graphon".into(), timed(|| oscillator_law(graphon_model, steps))?),
                (
                    "approximate".into(),
                    timed(|| oscillator_approximate_law(&setup.sampled, steps))?,
                ),
            ]
        }
        (Mode::Oscillator, None) => unreachable!("oscillator setup is built with the experiment"),
    })
}

fn oracle_size_ok(exp: &Experiment) -> bool {
    let size = exp.model.dim() * exp.grid_size;
    let cfg = &exp.config.oracle;
    if !cfg.enabled {
        return false;
    }
    if size > cfg.cap {
        log::warn!("skipping centralized reference: nN = {size} exceeds cap {}", cfg.cap);
        return false;
    }
    true
}

fn write_with<F>(dir: &Path, name: &str, files: &mut Vec<PathBuf>, f: F) -> Result<()>
where
    F: FnOnce(std::io::BufWriter<fs::File>) -> Result<()>,
{
    let path = dir.join(name);
    f(create(&path)?)?;
    files.push(path);
    Ok(())
}

fn write_common(exp: &Experiment, files: &mut Vec<PathBuf>) -> Result<()> {
    let dir = &exp.output_dir;
    fs::create_dir_all(dir)?;
    for s in &exp.samples {
        let path = dir.join(format!("adjacency_{}.csv", s.name));
        write_matrix_csv(&path, &s.adjacency)?;
        files.push(path);
    }
    let path = dir.join("basis.csv");
    write_matrix_csv(&path, &exp.basis.values_on_grid(exp.grid_size)?)?;
    files.push(path);
    let path = dir.join("initial_state.csv");
    write_matrix_csv(&path, exp.x0.values())?;
    files.push(path);
    Ok(())
}

/// Synthesizes the configured laws, simulates them and (when the system is
/// small enough) the centralized reference, and writes all artifacts.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutcome> {
    let mut files = Vec::new();
    write_common(exp, &mut files)?;
    let dir = exp.output_dir.clone();

    let laws = synthesize(exp)?;
    let mut methods = Vec::new();
    let mut trajectories = Vec::new();
    for (name, law) in &laws {
        let sim = timed(|| simulate(&exp.model, &law.value, &exp.x0, exp.steps))?;
        let cost = evaluate_cost(&exp.model, &sim.value)?;
        write_with(&dir, &format!("{name}_trajectory.csv"), &mut files, |w| sim.value.write_csv(w))?;
        write_with(&dir, &format!("{name}_projected_riccati.csv"), &mut files, |w| {
            law.value.projected_riccati().write_csv(w)
        })?;
        write_with(&dir, &format!("{name}_auxiliary_riccati.csv"), &mut files, |w| {
            law.value.auxiliary_riccati().write_csv(w)
        })?;
        write_with(&dir, &format!("{name}_projected_gain.csv"), &mut files, |w| {
            law.value.write_projected_gain_csv(w)
        })?;
        write_with(&dir, &format!("{name}_auxiliary_gain.csv"), &mut files, |w| {
            law.value.write_auxiliary_gain_csv(w)
        })?;
        methods.push(MethodReport {
            name: name.clone(),
            law_mode: law.value.mode().to_string(),
            cost,
            synthesis_seconds: law.seconds,
            simulation_seconds: sim.seconds,
            residual_norms: *law.value.residual_norms(),
            comparison: None,
        });
        trajectories.push((name.clone(), sim.value));
    }

    let oracle = if oracle_size_ok(exp) {
        let (law, traj) = run_oracle(exp)?;
        write_with(&dir, "oracle_trajectory.csv", &mut files, |w| traj.value.write_csv(w))?;
        let cost = evaluate_cost(&exp.model, &traj.value)?;
        for (m, (_, t)) in methods.iter_mut().zip(&trajectories) {
            m.comparison = Some(
                compare(t, &traj.value)?
                    .with_costs(m.cost, cost)
                    .with_wall_times(m.synthesis_seconds, law.seconds),
            );
        }
        trajectories.push(("oracle".into(), traj.value));
        Some(OracleReport {
            cost,
            synthesis_seconds: law.seconds,
            simulation_seconds: traj.seconds,
        })
    } else {
        None
    };

    let report = RunReport {
        mode: exp.config.mode.to_string(),
        seed: exp.seed,
        grid_size: exp.grid_size,
        dim: exp.model.dim(),
        modes: exp.basis.dim(),
        steps: exp.steps,
        horizon: exp.model.horizon,
        methods,
        oracle,
    };
    let path = dir.join("report.txt");
    fs::write(&path, report.lines().join("\n") + "\n")?;
    files.push(path);
    let path = dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))? + "\n")?;
    files.push(path);

    let laws: Vec<(String, ControlLaw)> = laws.into_iter().map(|(n, l)| (n, l.value)).collect();
    let path = dir.join("manifest.txt");
    files.push(path.clone());
    fs::write(&path, manifest(exp, &report, &laws, &files))?;
    Ok(RunOutcome {
        report,
        laws,
        trajectories,
        files,
    })
}

fn run_oracle(exp: &Experiment) -> Result<(Timed<crate::sim::CentralizedLaw>, Timed<Trajectory>)> {
    let law = timed(|| oracle_synthesize(&exp.model, exp.grid_size, exp.steps, exp.config.oracle.cap))?;
    let traj = timed(|| simulate(&exp.model, &law.value, &exp.x0, exp.steps))?;
    Ok((law, traj))
}

fn manifest(exp: &Experiment, report: &RunReport, laws: &[(String, ControlLaw)], files: &[PathBuf]) -> String {
    let mut lines = vec![
        format!("tool = {}", env!("CARGO_PKG_NAME")),
        format!("version = {}", env!("CARGO_PKG_VERSION")),
        format!("config = {}", exp.config_path.display()),
        format!("config_sha256 = {}", exp.config_hash),
        format!("seed = {}", exp.seed),
        format!("mode = {}", exp.config.mode),
        format!("grid_size = {}", exp.grid_size),
        format!("dim = {}", exp.model.dim()),
        format!("steps = {}", exp.steps),
        format!("horizon = {}", fmt_f64(exp.model.horizon)),
        format!("basis = {}", exp.basis_source),
        format!("tolerance.certificate = {}", fmt_f64(CERTIFICATE_TOL)),
        format!("tolerance.orthonormal = {}", fmt_f64(ORTHONORMAL_TOL)),
        format!("tolerance.rank = {}", fmt_f64(RANK_TOL)),
    ];
    for s in &exp.samples {
        lines.push(format!("sbm_seed.{} = {}", s.name, s.seed));
    }
    for (name, law) in laws {
        let r = law.residual_norms();
        for (k, v) in [("a", r.a), ("b", r.b), ("q", r.q), ("qt", r.qt)] {
            lines.push(format!("{name}.residual_norm.{k} = {}", fmt_f64(v)));
        }
        for c in law.certificate() {
            lines.push(format!("{name}.certificate.{}.invariance = {}", c.operator, fmt_f64(c.invariance)));
            lines.push(format!("{name}.certificate.{}.low_rank = {}", c.operator, fmt_f64(c.low_rank)));
        }
    }
    for m in &report.methods {
        lines.push(format!("wall_time.{}.synthesis = {}", m.name, fmt_f64(m.synthesis_seconds)));
        lines.push(format!("wall_time.{}.simulation = {}", m.name, fmt_f64(m.simulation_seconds)));
    }
    if let Some(o) = &report.oracle {
        lines.push(format!("wall_time.oracle.synthesis = {}", fmt_f64(o.synthesis_seconds)));
        lines.push(format!("wall_time.oracle.simulation = {}", fmt_f64(o.simulation_seconds)));
    }
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    lines.push(format!("files = {}", names.join(", ")));
    lines.join("\n") + "\n"
}

/// Runs only the centralized reference and writes its trajectory.
pub fn run_oracle_only(exp: &Experiment) -> Result<OracleReport> {
    let mut files = Vec::new();
    write_common(exp, &mut files)?;
    let (law, traj) = run_oracle(exp)?;
    let cost = evaluate_cost(&exp.model, &traj.value)?;
    traj.value.write_csv(create(&exp.output_dir.join("oracle_trajectory.csv"))?)?;
    let report = OracleReport {
        cost,
        synthesis_seconds: law.seconds,
        simulation_seconds: traj.seconds,
    };
    let text = format!(
        "oracle.cost = {}\noracle.synthesis_seconds = {}\noracle.simulation_seconds = {}\n",
        fmt_f64(report.cost),
        fmt_f64(report.synthesis_seconds),
        fmt_f64(report.simulation_seconds)
    );
    fs::write(exp.output_dir.join("oracle_report.txt"), text)?;
    Ok(report)
}

/// Certificate residuals of the configured basis.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub residuals: Vec<OperatorResidual>,
    pub invariant: bool,
    pub low_rank: bool,
}

impl CheckOutcome {
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.residuals {
            out.push(format!(
                "{}: invariance = {}, low_rank = {}, threshold = {}",
                r.operator,
                fmt_f64(r.invariance),
                fmt_f64(r.low_rank),
                fmt_f64(r.threshold)
            ));
        }
        out.push(format!(
            "verdict = {}",
            match (self.invariant, self.low_rank) {
                (true, true) => "exact",
                (true, false) => "approximate-only",
                _ => "not-invariant",
            }
        ));
        out
    }
}

pub fn check_experiment(exp: &Experiment) -> Result<CheckOutcome> {
    let residuals = certify(&exp.model.operators(), &exp.basis, CERTIFICATE_TOL)?;
    let invariant = residuals.iter().all(|r| r.invariance <= r.threshold);
    let low_rank = residuals.iter().all(|r| r.low_rank <= r.threshold);
    Ok(CheckOutcome {
        residuals,
        invariant,
        low_rank,
    })
}

/// The sampled network of coupling `a`.
pub fn sbm_adjacency(exp: &Experiment) -> Result<&DMatrix<f64>> {
    exp.samples
        .iter()
        .find(|s| s.name == "a")
        .map(|s| &s.adjacency)
        .ok_or_else(|| Error::Config("coupling.a is not a sampled stochastic block model".into()))
}

/// Compares two trajectory files, `a` against reference `b`.
pub fn compare_files(a: &Path, b: &Path, costs: Option<(f64, f64)>) -> Result<ComparisonReport> {
    let ta = Trajectory::read_csv(fs::File::open(a)?)?;
    let tb = Trajectory::read_csv(fs::File::open(b)?)?;
    let report = compare(&ta, &tb)?;
    Ok(match costs {
        Some((ca, cb)) => report.with_costs(ca, cb),
        None => report,
    })
}
