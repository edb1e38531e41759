//! Closed-loop simulation on a finite grid, quadratic cost evaluation and
//! the centralized `nN × nN` reference solution.
//!
//! A state on an `N`-grid is an `N × n` [`GridFunction`]; the graphon
//! dynamics act on it as
//!
//! ```text
//! ẋ = X L_aᵀ + (K_a X) D_aᵀ + U L_bᵀ + (K_b U) D_bᵀ,    K = W/N
//! ```
//!
//! and the cost is `∫ ⟨x, ℚx⟩ + ⟨u, u⟩ dt + ⟨x_T, ℚ_T x_T⟩` with the
//! averaged inner product `⟨x, y⟩ = (1/N) Σᵢ xᵢᵀyᵢ`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphon::GridFunction;
use crate::io::{fmt_f64, write_rows};
use crate::riccati::{solve_riccati, uniform_grid, CouplingModel, RiccatiTrajectory};

/// Largest `nN` the centralized reference solves by default.
pub const ORACLE_CAP: usize = 512;

/// A state-feedback law evaluated on whole grid states.
pub trait Feedback {
    fn horizon(&self) -> f64;
    fn control(&self, t: f64, x: &GridFunction) -> Result<GridFunction>;
}

/// The model's coupling kernels sampled on one grid.
struct GridDynamics<'a> {
    model: &'a CouplingModel,
    ka: DMatrix<f64>,
    kb: DMatrix<f64>,
    kq: DMatrix<f64>,
    kqt: DMatrix<f64>,
}

impl<'a> GridDynamics<'a> {
    fn new(model: &'a CouplingModel, grid_size: usize) -> Result<Self> {
        model.validate()?;
        if let Some(n) = model.grid_size()? {
            if n != grid_size {
                return Err(Error::Dimension(format!(
                    "couplings have {n} intervals, state has {grid_size}"
                )));
            }
        }
        Ok(Self {
            model,
            ka: model.a.kernel_on_grid(grid_size)?,
            kb: model.b.kernel_on_grid(grid_size)?,
            kq: model.q.kernel_on_grid(grid_size)?,
            kqt: model.qt.kernel_on_grid(grid_size)?,
        })
    }

    fn drift(&self, x: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.model;
        x * m.la.transpose()
            + (&self.ka * x) * m.da.transpose()
            + u * m.lb.transpose()
            + (&self.kb * u) * m.db.transpose()
    }

    fn quadratic(x: &DMatrix<f64>, l: &DMatrix<f64>, k: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
        let qx = x * l.transpose() + (k * x) * d.transpose();
        x.dot(&qx) / x.nrows() as f64
    }

    fn running_cost(&self, x: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
        Self::quadratic(x, &self.model.lq, &self.kq, &self.model.dq) + u.norm_squared() / u.nrows() as f64
    }

    fn terminal_cost(&self, x: &DMatrix<f64>) -> f64 {
        Self::quadratic(x, &self.model.lqt, &self.kqt, &self.model.dqt)
    }
}

/// States and controls on the uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    time_grid: Vec<f64>,
    states: Vec<GridFunction>,
    controls: Vec<GridFunction>,
}

impl Trajectory {
    pub fn new(time_grid: Vec<f64>, states: Vec<GridFunction>, controls: Vec<GridFunction>) -> Result<Self> {
        if time_grid.len() < 2 || states.len() != time_grid.len() || controls.len() != time_grid.len() {
            return Err(Error::Dimension(format!(
                "{} times, {} states, {} controls",
                time_grid.len(),
                states.len(),
                controls.len()
            )));
        }
        for s in states.iter().skip(1) {
            states[0].check_shape(s)?;
        }
        for c in controls.iter().skip(1) {
            controls[0].check_shape(c)?;
        }
        Ok(Self {
            time_grid,
            states,
            controls,
        })
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn states(&self) -> &[GridFunction] {
        &self.states
    }

    pub fn controls(&self) -> &[GridFunction] {
        &self.controls
    }

    pub fn grid_size(&self) -> usize {
        self.states[0].grid_size()
    }

    pub fn steps(&self) -> usize {
        self.time_grid.len() - 1
    }

    pub fn terminal_state(&self) -> &GridFunction {
        self.states.last().expect("non-empty trajectory")
    }

    /// Columns `t, x_i_c…, u_i_c…` for agent `i` and component `c`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let size = self.grid_size();
        let (n, m) = (self.states[0].dim(), self.controls[0].dim());
        let mut header = vec!["t".to_string()];
        for (prefix, dim) in [("x", n), ("u", m)] {
            for i in 0..size {
                for c in 0..dim {
                    header.push(format!("{prefix}_{i}_{c}"));
                }
            }
        }
        let rows = (0..self.time_grid.len()).map(|k| {
            std::iter::once(self.time_grid[k])
                .chain(self.states[k].stacked().iter().copied())
                .chain(self.controls[k].stacked().iter().copied())
                .map(fmt_f64)
                .collect::<Vec<_>>()
        });
        write_rows(out, &header, rows)
    }

    /// Reads the format written by [`Trajectory::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        let parse_col = |name: &str, prefix: char| -> Option<(usize, usize)> {
            let rest = name.strip_prefix(prefix)?.strip_prefix('_')?;
            let (i, c) = rest.split_once('_')?;
            Some((i.parse().ok()?, c.parse().ok()?))
        };
        if header.get(0) != Some("t") {
            return Err(Error::Config("trajectory CSV must start with a 't' column".into()));
        }
        let mut nx = (0, 0);
        let mut nu = (0, 0);
        let (mut count_x, mut count_u) = (0, 0);
        for name in header.iter().skip(1) {
            if let Some((i, c)) = parse_col(name, 'x') {
                nx = (nx.0.max(i + 1), nx.1.max(c + 1));
                count_x += 1;
            } else if let Some((i, c)) = parse_col(name, 'u') {
                nu = (nu.0.max(i + 1), nu.1.max(c + 1));
                count_u += 1;
            } else {
                return Err(Error::Config(format!("unexpected trajectory column '{name}'")));
            }
        }
        if count_x != nx.0 * nx.1 || count_u != nu.0 * nu.1 || nx.0 != nu.0 || count_x == 0 {
            return Err(Error::Config("trajectory CSV columns are inconsistent".into()));
        }
        let (mut times, mut states, mut controls) = (Vec::new(), Vec::new(), Vec::new());
        for (row, record) in reader.records().enumerate() {
            let values = record?
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("row {}: '{s}' is not a number", row + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != 1 + count_x + count_u {
                return Err(Error::Config(format!("row {} has {} fields", row + 1, values.len())));
            }
            times.push(values[0]);
            states.push(GridFunction::from_stacked(
                &DVector::from_column_slice(&values[1..1 + count_x]),
                nx.1,
            )?);
            controls.push(GridFunction::from_stacked(
                &DVector::from_column_slice(&values[1 + count_x..]),
                nu.1,
            )?);
        }
        Trajectory::new(times, states, controls)
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::Precondition("at least one time step is required".into()));
    }
    Ok(())
}

fn blow_up(time: f64) -> Error {
    Error::Integration {
        time,
        detail: "closed-loop state became non-finite".into(),
    }
}

/// Integrates the closed loop `ẋ = 𝔸x + 𝔹u(t, x)` with classical RK4,
/// evaluating the feedback at every stage.
pub fn simulate(
    model: &CouplingModel,
    law: &dyn Feedback,
    x0: &GridFunction,
    steps: usize,
) -> Result<Trajectory> {
    check_steps(steps)?;
    if x0.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "initial state has {} components, model has {}",
            x0.dim(),
            model.dim()
        )));
    }
    let horizon = model.horizon;
    if (law.horizon() - horizon).abs() > 1e-12 * horizon {
        return Err(Error::Precondition(format!(
            "law horizon {} differs from model horizon {horizon}",
            law.horizon()
        )));
    }
    let dynamics = GridDynamics::new(model, x0.grid_size())?;
    let dim = x0.dim();
    let time_grid = uniform_grid(horizon, steps);
    let field = |t: f64, x: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let u = law.control(t, &GridFunction::new(x.clone())?)?;
        Ok(dynamics.drift(x, u.values()))
    };
    let mut states = vec![x0.clone()];
    let mut controls = Vec::with_capacity(steps + 1);
    let mut x = x0.values().clone();
    for k in 0..steps {
        let (t, h) = (time_grid[k], time_grid[k + 1] - time_grid[k]);
        let u = law.control(t, &states[k])?;
        let k1 = dynamics.drift(&x, u.values());
        controls.push(u);
        let k2 = field(t + h / 2.0, &(&x + &k1 * (h / 2.0)))?;
        let k3 = field(t + h / 2.0, &(&x + &k2 * (h / 2.0)))?;
        let k4 = field(time_grid[k + 1], &(&x + &k3 * h))?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(blow_up(time_grid[k + 1]));
        }
        states.push(GridFunction::new(x.clone())?);
    }
    controls.push(law.control(horizon, &states[steps])?);
    debug_assert_eq!(states[0].dim(), dim);
    Trajectory::new(time_grid, states, controls)
}

/// Integrates the dynamics under a fixed control schedule given on the time
/// grid; stage values between grid points are linearly interpolated.
pub fn simulate_open_loop(
    model: &CouplingModel,
    x0: &GridFunction,
    controls: &[GridFunction],
    steps: usize,
) -> Result<Trajectory> {
    check_steps(steps)?;
    if controls.len() != steps + 1 {
        return Err(Error::Dimension(format!(
            "{} controls for {} time steps",
            controls.len(),
            steps
        )));
    }
    let dynamics = GridDynamics::new(model, x0.grid_size())?;
    let time_grid = uniform_grid(model.horizon, steps);
    let mut states = vec![x0.clone()];
    let mut x = x0.values().clone();
    for k in 0..steps {
        let h = time_grid[k + 1] - time_grid[k];
        let (u0, u1) = (controls[k].values(), controls[k + 1].values());
        let um = (u0 + u1) * 0.5;
        let k1 = dynamics.drift(&x, u0);
        let k2 = dynamics.drift(&(&x + &k1 * (h / 2.0)), &um);
        let k3 = dynamics.drift(&(&x + &k2 * (h / 2.0)), &um);
        let k4 = dynamics.drift(&(&x + &k3 * h), u1);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(blow_up(time_grid[k + 1]));
        }
        states.push(GridFunction::new(x.clone())?);
    }
    Trajectory::new(time_grid, states, controls.to_vec())
}

/// `∫₀ᵀ ⟨x, ℚx⟩ + ⟨u, u⟩ dt + ⟨x_T, ℚ_T x_T⟩`, trapezoidal in time.
pub fn evaluate_cost(model: &CouplingModel, trajectory: &Trajectory) -> Result<f64> {
    let dynamics = GridDynamics::new(model, trajectory.grid_size())?;
    let running: Vec<f64> = trajectory
        .states
        .iter()
        .zip(&trajectory.controls)
        .map(|(x, u)| dynamics.running_cost(x.values(), u.values()))
        .collect();
    let integral = trapezoid(&trajectory.time_grid, &running);
    Ok(integral + dynamics.terminal_cost(trajectory.terminal_state().values()))
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// The `nN × nN` matrices of the network system in agent-major order:
/// `I_N ⊗ L + K ⊗ D` for each of `A`, `B`, `Q`, `Q_T`.
pub fn full_matrices(model: &CouplingModel, grid_size: usize) -> Result<[DMatrix<f64>; 4]> {
    let d = GridDynamics::new(model, grid_size)?;
    let eye = DMatrix::<f64>::identity(grid_size, grid_size);
    let lift = |l: &DMatrix<f64>, k: &DMatrix<f64>, dm: &DMatrix<f64>| eye.kronecker(l) + k.kronecker(dm);
    Ok([
        lift(&model.la, &d.ka, &model.da),
        lift(&model.lb, &d.kb, &model.db),
        lift(&model.lq, &d.kq, &model.dq),
        lift(&model.lqt, &d.kqt, &model.dqt),
    ])
}

/// Optimal feedback from the full `nN × nN` Riccati equation.
#[derive(Clone, Debug)]
pub struct CentralizedLaw {
    riccati: RiccatiTrajectory,
    input: DMatrix<f64>,
    dim: usize,
}

impl CentralizedLaw {
    pub fn riccati(&self) -> &RiccatiTrajectory {
        &self.riccati
    }

    /// Optimal cost from `x0`: `⟨x0, Π(0)x0⟩ = (1/N) x0ᵀ P(0) x0`.
    pub fn value(&self, x0: &GridFunction) -> f64 {
        let v = x0.stacked();
        v.dot(&(self.riccati.initial() * &v)) / x0.grid_size() as f64
    }
}

impl Feedback for CentralizedLaw {
    fn horizon(&self) -> f64 {
        self.riccati.horizon()
    }

    fn control(&self, t: f64, x: &GridFunction) -> Result<GridFunction> {
        let p = self.riccati.at(t)?;
        let u = -(self.input.transpose() * (p * x.stacked()));
        GridFunction::from_stacked(&u, self.dim)
    }
}

/// Solves the centralized Riccati equation on an `N`-grid, refusing systems
/// with `nN > cap`.
pub fn oracle_synthesize(
    model: &CouplingModel,
    grid_size: usize,
    steps: usize,
    cap: usize,
) -> Result<CentralizedLaw> {
    let size = model.dim() * grid_size;
    if size > cap {
        return Err(Error::Precondition(format!(
            "centralized reference needs nN = {size} > {cap}"
        )));
    }
    let [a, b, q, qt] = full_matrices(model, grid_size)?;
    let riccati = solve_riccati(&a, &b, &q, &qt, model.horizon, steps)?;
    Ok(CentralizedLaw {
        riccati,
        input: b,
        dim: model.lb.ncols(),
    })
}

/// Centralized optimal closed loop from `x0` and its cost.
pub fn oracle_solve(model: &CouplingModel, x0: &GridFunction, steps: usize) -> Result<(Trajectory, f64)> {
    let law = oracle_synthesize(model, x0.grid_size(), steps, ORACLE_CAP)?;
    let trajectory = simulate(model, &law, x0, steps)?;
    let cost = evaluate_cost(model, &trajectory)?;
    Ok((trajectory, cost))
}

/// `n`-dimensional agent states drawn independently and uniformly from
/// `[low, high]`, agent by agent.
pub fn uniform_initial_state<R: Rng>(
    rng: &mut R,
    grid_size: usize,
    dim: usize,
    low: f64,
    high: f64,
) -> Result<GridFunction> {
    if !(low <= high && low.is_finite() && high.is_finite()) {
        return Err(Error::Config(format!("invalid initial range [{low}, {high}]")));
    }
    let values: Vec<f64> = (0..grid_size * dim).map(|_| rng.random_range(low..=high)).collect();
    GridFunction::new(DMatrix::from_row_slice(grid_size, dim, &values))
}

/// Differences between a trajectory and a reference.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `‖x_a − x_b‖ / ‖x_b‖` in `L²([0,T]; ℝⁿᴺ)`.
    pub state_l2_relative: f64,
    /// Largest pointwise state difference over the peak reference magnitude.
    pub state_max_relative: f64,
    /// As `state_l2_relative`, for the controls.
    pub control_l2_relative: f64,
    pub cost_a: Option<f64>,
    pub cost_b: Option<f64>,
    /// `100 (J_a − J_b) / J_b`.
    pub cost_gap_percent: Option<f64>,
    pub wall_time_a: Option<f64>,
    pub wall_time_b: Option<f64>,
}

impl ComparisonReport {
    pub fn with_costs(mut self, cost_a: f64, cost_b: f64) -> Self {
        self.cost_a = Some(cost_a);
        self.cost_b = Some(cost_b);
        self.cost_gap_percent = Some(100.0 * (cost_a - cost_b) / cost_b);
        self
    }

    pub fn with_wall_times(mut self, a: f64, b: f64) -> Self {
        self.wall_time_a = Some(a);
        self.wall_time_b = Some(b);
        self
    }

    /// `key = value` lines, each key prefixed with `prefix`.
    pub fn lines(&self, prefix: &str) -> Vec<String> {
        let mut out = vec![
            format!("{prefix}state_l2_relative = {}", fmt_f64(self.state_l2_relative)),
            format!("{prefix}state_max_relative = {}", fmt_f64(self.state_max_relative)),
            format!("{prefix}control_l2_relative = {}", fmt_f64(self.control_l2_relative)),
        ];
        let optional = [
            ("cost_a", self.cost_a),
            ("cost_b", self.cost_b),
            ("cost_gap_percent", self.cost_gap_percent),
            ("wall_time_a", self.wall_time_a),
            ("wall_time_b", self.wall_time_b),
        ];
        for (key, value) in optional {
            if let Some(v) = value {
                out.push(format!("{prefix}{key} = {}", fmt_f64(v)));
            }
        }
        out
    }
}

fn relative_l2(times: &[f64], a: &[GridFunction], b: &[GridFunction]) -> Result<f64> {
    let mut diff = Vec::with_capacity(a.len());
    let mut reference = Vec::with_capacity(a.len());
    for (x, y) in a.iter().zip(b) {
        diff.push((x - y).values().norm_squared());
        reference.push(y.values().norm_squared());
        x.check_shape(y)?;
    }
    let num = trapezoid(times, &diff).sqrt();
    let den = trapezoid(times, &reference).sqrt();
    Ok(if den == 0.0 {
        if num == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        num / den
    })
}

/// Compares trajectory `a` against reference `b` on the same time grid.
pub fn compare(a: &Trajectory, b: &Trajectory) -> Result<ComparisonReport> {
    if a.time_grid.len() != b.time_grid.len()
        || a.time_grid.iter().zip(&b.time_grid).any(|(s, t)| (s - t).abs() > 1e-12 * t.abs().max(1.0))
    {
        return Err(Error::Dimension("trajectories are on different time grids".into()));
    }
    let state_l2_relative = relative_l2(&a.time_grid, &a.states, &b.states)?;
    let control_l2_relative = relative_l2(&a.time_grid, &a.controls, &b.controls)?;
    let peak = b.states.iter().map(|x| x.values().amax()).fold(0.0, f64::max);
    let worst = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (x - y).values().amax())
        .fold(0.0, f64::max);
    let state_max_relative = if peak == 0.0 { worst } else { worst / peak };
    Ok(ComparisonReport {
        state_l2_relative,
        state_max_relative,
        control_l2_relative,
        cost_a: None,
        cost_b: None,
        cost_gap_percent: None,
        wall_time_a: None,
        wall_time_b: None,
    })
}
