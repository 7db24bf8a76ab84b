//! Evaluable task families.
//!
//! * Cartpole: tune the state weight and control penalty of an LQR
//!   controller, then score it by simulating the nonlinear plant.
//! * Synthetic: a base function whose optimum is shifted per task.
//! * Grid: a table of pre-evaluated configurations queried by nearest
//!   neighbour under the Gower distance.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::ObservationDataset;
use crate::error::{Error, Result};
use crate::search_space::{Configuration, SearchSpace, Value, Variable};
use crate::seed;

type Mat4 = SMatrix<f64, 4, 4>;
type Vec4 = SVector<f64, 4>;

pub const GRAVITY: f64 = 9.81;

/// Physical parameters of one cartpole task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartpoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_length: f64,
    pub cart_friction: f64,
    pub pole_friction: f64,
}

impl CartpoleParams {
    pub const CART_MASS: (f64, f64) = (0.1, 0.5);
    pub const POLE_MASS: (f64, f64) = (0.01, 0.25);
    pub const POLE_LENGTH: (f64, f64) = (0.25, 0.75);
    pub const CART_FRICTION: (f64, f64) = (1e-4, 1e-3);
    pub const POLE_FRICTION: (f64, f64) = (1e-3, 1e-2);

    /// Midpoint of every parameter range.
    pub fn nominal() -> Self {
        let mid = |(a, b): (f64, f64)| 0.5 * (a + b);
        CartpoleParams {
            cart_mass: mid(Self::CART_MASS),
            pole_mass: mid(Self::POLE_MASS),
            pole_length: mid(Self::POLE_LENGTH),
            cart_friction: mid(Self::CART_FRICTION),
            pole_friction: mid(Self::POLE_FRICTION),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("cart_mass", self.cart_mass, Self::CART_MASS),
            ("pole_mass", self.pole_mass, Self::POLE_MASS),
            ("pole_length", self.pole_length, Self::POLE_LENGTH),
            ("cart_friction", self.cart_friction, Self::CART_FRICTION),
            ("pole_friction", self.pole_friction, Self::POLE_FRICTION),
        ];
        for (name, v, (lo, hi)) in checks {
            if !(lo..=hi).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Uniform draws of every parameter within its range.
pub fn sample_cartpole_family(n_tasks: usize, seed: u64) -> Result<Vec<CartpoleParams>> {
    if n_tasks == 0 {
        return Err(Error::Config("cartpole family needs at least one task".into()));
    }
    let mut rng = seed::stream(seed, "cartpole_family");
    let mut draw = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi);
    Ok((0..n_tasks)
        .map(|_| CartpoleParams {
            cart_mass: draw(CartpoleParams::CART_MASS),
            pole_mass: draw(CartpoleParams::POLE_MASS),
            pole_length: draw(CartpoleParams::POLE_LENGTH),
            cart_friction: draw(CartpoleParams::CART_FRICTION),
            pole_friction: draw(CartpoleParams::POLE_FRICTION),
        })
        .collect())
}

pub fn save_cartpole_family(path: &Path, family: &[CartpoleParams]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in family {
        w.serialize(p).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    crate::io::write_atomic(path, &bytes)
}

pub fn load_cartpole_family(path: &Path) -> Result<Vec<CartpoleParams>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(std::io::Error::other(format!("{}: {e}", path.display()))))?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize().enumerate() {
        let p: CartpoleParams = row.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        p.validate().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "no parameter rows".into(),
        });
    }
    Ok(out)
}

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartpoleSim {
    pub dt: f64,
    pub steps: usize,
    /// `(s, ψ, ṡ, ψ̇)` with `ψ` the pole angle from upright.
    pub initial_state: [f64; 4],
    pub blow_up: f64,
    pub penalty: f64,
}

impl Default for CartpoleSim {
    fn default() -> Self {
        CartpoleSim {
            dt: 0.01,
            steps: 1000,
            initial_state: [0.0, 0.1, 0.0, 0.0],
            blow_up: 1e3,
            penalty: 1e6,
        }
    }
}

/// Tuning space: `Q = diag(10^θ₁, 1, 1, 0.1)`, `R = 10^−θ₂`.
pub fn cartpole_space() -> SearchSpace {
    SearchSpace::new(vec![
        Variable::continuous("theta1", -3.0, 2.0),
        Variable::continuous("theta2", 1.0, 5.0),
    ])
    .expect("static space is valid")
}

pub fn lqr_weights(theta1: f64, theta2: f64) -> (Mat4, f64) {
    (
        Mat4::from_diagonal(&Vec4::new(10f64.powf(theta1), 1.0, 1.0, 0.1)),
        10f64.powf(-theta2),
    )
}

/// Nonlinear state derivative under horizontal cart force `u`.
///
/// Point-mass pole on a massless rod, viscous friction on the cart velocity
/// and on the pole's angular velocity. With `θ = ψ + π` measured from the
/// hanging position:
/// `[mc+mp, mp·l·cosθ; mp·l·cosθ, mp·l²]·[s̈; θ̈] =
///  [u − bc·ṡ + mp·l·θ̇²·sinθ; −mp·g·l·sinθ − bp·θ̇]`.
pub fn cartpole_dynamics(p: &CartpoleParams, x: &Vec4, u: f64) -> Vec4 {
    let (mc, mp, l) = (p.cart_mass, p.pole_mass, p.pole_length);
    // sin(ψ + π) = −sin ψ, cos(ψ + π) = −cos ψ, kept exact at ψ = 0.
    let (sin, cos) = x[1].sin_cos();
    let (sin, cos) = (-sin, -cos);
    let sd = x[2];
    let td = x[3];
    let a11 = mc + mp;
    let a12 = mp * l * cos;
    let a22 = mp * l * l;
    let b1 = u - p.cart_friction * sd + mp * l * td * td * sin;
    let b2 = -mp * GRAVITY * l * sin - p.pole_friction * td;
    let det = a11 * a22 - a12 * a12;
    let sdd = (a22 * b1 - a12 * b2) / det;
    let tdd = (a11 * b2 - a12 * b1) / det;
    Vec4::new(sd, td, sdd, tdd)
}

/// Linearisation `ẋ ≈ A x + B u` about the upright equilibrium.
pub fn linearize(p: &CartpoleParams) -> (Mat4, Vec4) {
    let (mc, mp, l) = (p.cart_mass, p.pole_mass, p.pole_length);
    // Mass matrix at θ = π and its inverse.
    let det = mc * mp * l * l;
    let inv = [[mp * l * l / det, mp * l / det], [mp * l / det, (mc + mp) / det]];
    // Right-hand side: [u − bc·ṡ; mp·g·l·ψ − bp·ψ̇].
    let mut a = Mat4::zeros();
    a[(0, 2)] = 1.0;
    a[(1, 3)] = 1.0;
    for r in 0..2 {
        a[(2 + r, 1)] = inv[r][1] * mp * GRAVITY * l;
        a[(2 + r, 2)] = -inv[r][0] * p.cart_friction;
        a[(2 + r, 3)] = -inv[r][1] * p.pole_friction;
    }
    let b = Vec4::new(0.0, 0.0, inv[0][0], inv[1][0]);
    (a, b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    pub p: Mat4,
    pub gain: SMatrix<f64, 1, 4>,
    pub closed_loop_eigenvalues: Vec<nalgebra::Complex<f64>>,
}

impl LqrSolution {
    pub fn is_stable(&self) -> bool {
        self.closed_loop_eigenvalues.iter().all(|e| e.re < 0.0)
    }
}

/// Solves the continuous algebraic Riccati equation
/// `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` by the matrix sign function of the
/// Hamiltonian, then polishes with Newton-Kleinman steps. Fails if the
/// iteration does not converge or the closed loop is not stable.
pub fn solve_lqr(a: &Mat4, b: &Vec4, q: &Mat4, r: f64) -> Result<LqrSolution> {
    let n = 4;
    let g = b * b.transpose() / r;
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let fail = |what: &str| Error::Evaluation(format!("Riccati solve failed: {what}"));
    let mut z = h;
    let mut converged = false;
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let zinv = lu.try_inverse().ok_or_else(|| fail("singular Hamiltonian iterate"))?;
        let c = det.abs().powf(1.0 / (2 * n) as f64);
        if !(c.is_finite() && c > 0.0) {
            return Err(fail("degenerate scaling"));
        }
        let next = (&z / c + zinv * c) * 0.5;
        let delta = (&next - &z).norm();
        let size = next.norm();
        z = next;
        if !size.is_finite() {
            return Err(fail("non-finite iterate"));
        }
        if delta <= 1e-12 * size {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(fail("sign iteration did not converge"));
    }
    // Stable subspace: (W + I)[I; P] = 0.
    let w11 = z.view((0, 0), (n, n)).into_owned();
    let w12 = z.view((0, n), (n, n)).into_owned();
    let w21 = z.view((n, 0), (n, n)).into_owned();
    let w22 = z.view((n, n), (n, n)).into_owned();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let sol = lhs.svd(true, true).solve(&rhs, 1e-14).map_err(|e| fail(e))?;
    let mut p = Mat4::from_fn(|i, j| 0.5 * (sol[(i, j)] + sol[(j, i)]));

    let residual = |p: &Mat4| (a.transpose() * p + p * a - p * g * p + q).norm();
    for _ in 0..3 {
        let k = b.transpose() * p / r;
        let ac = a - b * k;
        let m = q + k.transpose() * k * r;
        let Some(next) = solve_lyapunov(&ac, &m) else { break };
        if residual(&next) < residual(&p) {
            p = next;
        } else {
            break;
        }
    }
    if !p.iter().all(|v| v.is_finite()) {
        return Err(fail("non-finite solution"));
    }
    let gain = b.transpose() * p / r;
    let eig = (a - b * gain).complex_eigenvalues();
    let sol = LqrSolution {
        p,
        gain,
        closed_loop_eigenvalues: eig.iter().copied().collect(),
    };
    if !sol.is_stable() {
        return Err(fail("closed loop is not stable"));
    }
    Ok(sol)
}

/// Solves `AcᵀP + P·Ac + M = 0` via its Kronecker form.
fn solve_lyapunov(ac: &Mat4, m: &Mat4) -> Option<Mat4> {
    let at = DMatrix::from_column_slice(4, 4, ac.transpose().as_slice());
    let eye = DMatrix::<f64>::identity(4, 4);
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DVector::from_column_slice(m.as_slice());
    let v = op.lu().solve(&rhs)?;
    let p = Mat4::from_column_slice(v.as_slice());
    Some((p + p.transpose()) * 0.5)
}

fn rk4_step(p: &CartpoleParams, x: &Vec4, u: f64, dt: f64) -> Vec4 {
    let k1 = cartpole_dynamics(p, x, u);
    let k2 = cartpole_dynamics(p, &(x + k1 * (dt / 2.0)), u);
    let k3 = cartpole_dynamics(p, &(x + k2 * (dt / 2.0)), u);
    let k4 = cartpole_dynamics(p, &(x + k3 * dt), u);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

pub fn stage_cost(x: &Vec4, u: f64) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + 0.1 * x[3] * x[3] + 1e-5 * u * u
}

/// Average stage cost of the nonlinear plant under `u = −K x`, held
/// constant over each step. Divergence returns `sim.penalty`.
pub fn simulate(params: &CartpoleParams, gain: &SMatrix<f64, 1, 4>, sim: &CartpoleSim) -> f64 {
    let mut x = Vec4::from_column_slice(&sim.initial_state);
    let mut total = 0.0;
    for _ in 0..sim.steps {
        let u = -(gain * x)[0];
        total += stage_cost(&x, u);
        x = rk4_step(params, &x, u, sim.dt);
        if !x.iter().all(|v| v.is_finite() && v.abs() <= sim.blow_up) {
            return sim.penalty;
        }
    }
    (total / sim.steps as f64).min(sim.penalty)
}

pub fn cartpole_cost(params: &CartpoleParams, theta: &Configuration, sim: &CartpoleSim) -> Result<f64> {
    let space = cartpole_space();
    let u = space.encode(theta)?;
    let theta1 = -3.0 + 5.0 * u[0];
    let theta2 = 1.0 + 4.0 * u[1];
    let (q, r) = lqr_weights(theta1, theta2);
    let (a, b) = linearize(params);
    match solve_lqr(&a, &b, &q, r) {
        Ok(sol) => Ok(simulate(params, &sol.gain, sim)),
        Err(e) => {
            log::debug!("cartpole penalty at θ = ({theta1}, {theta2}): {e}");
            Ok(sim.penalty)
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic families

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    ShiftedQuadratic,
    ShiftedBranin,
}

pub fn quadratic_space() -> SearchSpace {
    SearchSpace::new(vec![
        Variable::continuous("x0", -5.0, 5.0),
        Variable::continuous("x1", -5.0, 5.0),
    ])
    .expect("static space is valid")
}

pub fn branin_space() -> SearchSpace {
    SearchSpace::new(vec![
        Variable::continuous("x0", -5.0, 10.0),
        Variable::continuous("x1", 0.0, 15.0),
    ])
    .expect("static space is valid")
}

pub const BRANIN_MINIMUM: f64 = 0.397_887_357_729_738;
pub const BRANIN_MINIMIZERS: [[f64; 2]; 3] = [[-PI, 12.275], [PI, 2.275], [9.424_78, 2.475]];

pub fn branin(x0: f64, x1: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x1 - b * x0 * x0 + c * x0 - 6.0).powi(2) + 10.0 * (1.0 - t) * x0.cos() + 10.0
}

fn reals(space: &SearchSpace, x: &Configuration) -> Result<Vec<f64>> {
    space
        .normalize(x)?
        .0
        .into_iter()
        .map(|v| match v {
            Value::Real(r) => Ok(r),
            other => Err(Error::Domain {
                variable: String::new(),
                detail: format!("expected a real value, got {other}"),
            }),
        })
        .collect()
}

/// Tasks sharing a base function, each with its optimum moved by a uniform
/// offset in `[−shift_range, shift_range]` per coordinate.
pub fn synthetic_family(kind: SyntheticKind, n_tasks: usize, shift_range: f64, seed: u64) -> Result<Vec<BenchmarkTask>> {
    if n_tasks == 0 {
        return Err(Error::Config("synthetic family needs at least one task".into()));
    }
    if !(shift_range >= 0.0 && shift_range.is_finite()) {
        return Err(Error::Config("shift_range must be finite and >= 0".into()));
    }
    let mut rng = seed::stream(seed, "synthetic_family");
    (0..n_tasks)
        .map(|i| {
            let shift = [
                shift_range * (2.0 * rng.random::<f64>() - 1.0),
                shift_range * (2.0 * rng.random::<f64>() - 1.0),
            ];
            let objective = match kind {
                SyntheticKind::ShiftedQuadratic => Objective::Quadratic { center: shift.to_vec() },
                SyntheticKind::ShiftedBranin => Objective::Branin { shift },
            };
            BenchmarkTask::new(format!("{}_{i}", kind_name(kind)), objective)
        })
        .collect()
}

fn kind_name(kind: SyntheticKind) -> &'static str {
    match kind {
        SyntheticKind::ShiftedQuadratic => "quadratic",
        SyntheticKind::ShiftedBranin => "branin",
    }
}

// ---------------------------------------------------------------------------
// Grid tasks

/// Pre-evaluated configurations answered by Gower-nearest lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub data: ObservationDataset,
    encoded: Vec<Vec<f64>>,
}

impl GridTable {
    pub fn new(space: &SearchSpace, data: ObservationDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Config(format!("grid task `{}` has no rows", data.task_id)));
        }
        let encoded = data.encoded(space)?;
        Ok(GridTable { data, encoded })
    }

    /// Index of the nearest row; ties go to the earliest row.
    pub fn nearest(&self, space: &SearchSpace, u: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, row) in self.encoded.iter().enumerate() {
            let d = space.gower_encoded(u, row);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

pub fn load_grid_task(space: &SearchSpace, task_id: &str, path: &Path) -> Result<BenchmarkTask> {
    let (data, _) = ObservationDataset::load_csv(space, task_id, path)?;
    if data.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "grid file has no rows".into(),
        });
    }
    grid_task(space, data)
}

pub fn grid_task(space: &SearchSpace, data: ObservationDataset) -> Result<BenchmarkTask> {
    let range = (data.min_output().unwrap_or(0.0), data.max_output().unwrap_or(0.0));
    let id = data.task_id.clone();
    let table = GridTable::new(space, data)?;
    let mut task = BenchmarkTask::with_space(id, space.clone(), Objective::Grid(Arc::new(table)));
    task.known_range = Some(range);
    Ok(task)
}

/// Loads each file as a task named after its file stem.
pub fn load_grid_tasks(space: &SearchSpace, paths: &[impl AsRef<Path>]) -> Result<Vec<BenchmarkTask>> {
    paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let id = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            load_grid_task(space, &id, p)
        })
        .collect()
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Cartpole { params: CartpoleParams, sim: CartpoleSim },
    Quadratic { center: Vec<f64> },
    Branin { shift: [f64; 2] },
    Grid(Arc<GridTable>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTask {
    pub id: String,
    pub space: SearchSpace,
    pub objective: Objective,
    /// Standard deviation of additive Gaussian observation noise.
    pub noise_std: f64,
    pub known_range: Option<(f64, f64)>,
}

impl BenchmarkTask {
    /// Task on the objective's standard space with its analytic range.
    pub fn new(id: impl Into<String>, objective: Objective) -> Result<Self> {
        let space = match &objective {
            Objective::Cartpole { .. } => cartpole_space(),
            Objective::Quadratic { .. } => quadratic_space(),
            Objective::Branin { .. } => branin_space(),
            Objective::Grid(_) => return Err(Error::Config("grid tasks need an explicit space".into())),
        };
        let mut task = Self::with_space(id.into(), space, objective);
        task.known_range = task.analytic_range();
        Ok(task)
    }

    pub fn with_space(id: impl Into<String>, space: SearchSpace, objective: Objective) -> Self {
        BenchmarkTask {
            id: id.into(),
            space,
            objective,
            noise_std: 0.0,
            known_range: None,
        }
    }

    pub fn cartpole(id: impl Into<String>, params: CartpoleParams, sim: CartpoleSim) -> Self {
        Self::with_space(id, cartpole_space(), Objective::Cartpole { params, sim })
    }

    fn analytic_range(&self) -> Option<(f64, f64)> {
        match &self.objective {
            Objective::Quadratic { center } => {
                let mut min = 0.0;
                let mut max = 0.0;
                for (var, c) in self.space.variables().iter().zip(center) {
                    if let crate::search_space::Domain::Continuous { lower, upper } = var.domain {
                        let nearest = c.clamp(lower, upper);
                        min += (nearest - c).powi(2);
                        max += ((lower - c).powi(2)).max((upper - c).powi(2));
                    }
                }
                Some((min, max))
            }
            Objective::Branin { shift } => {
                const N: usize = 301;
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for i in 0..N {
                    for j in 0..N {
                        let x0 = -5.0 + 15.0 * i as f64 / (N - 1) as f64;
                        let x1 = 15.0 * j as f64 / (N - 1) as f64;
                        let v = branin(x0 - shift[0], x1 - shift[1]);
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
                let inside = BRANIN_MINIMIZERS.iter().any(|m| {
                    let x0 = m[0] + shift[0];
                    let x1 = m[1] + shift[1];
                    (-5.0..=10.0).contains(&x0) && (0.0..=15.0).contains(&x1)
                });
                if inside {
                    min = BRANIN_MINIMUM;
                }
                Some((min, max))
            }
            Objective::Grid(t) => Some((t.data.min_output()?, t.data.max_output()?)),
            Objective::Cartpole { .. } => None,
        }
    }

    /// Finite candidate set, for tabulated tasks.
    pub fn candidate_pool(&self) -> Option<&[Configuration]> {
        match &self.objective {
            Objective::Grid(t) => Some(&t.data.inputs),
            _ => None,
        }
    }

    /// Noise-free objective value.
    pub fn evaluate(&self, x: &Configuration) -> Result<f64> {
        let value = match &self.objective {
            Objective::Cartpole { params, sim } => cartpole_cost(params, x, sim)?,
            Objective::Quadratic { center } => reals(&self.space, x)?
                .iter()
                .zip(center)
                .map(|(v, c)| (v - c).powi(2))
                .sum(),
            Objective::Branin { shift } => {
                let v = reals(&self.space, x)?;
                branin(v[0] - shift[0], v[1] - shift[1])
            }
            Objective::Grid(t) => {
                let u = self.space.encode(x)?;
                t.data.outputs[t.nearest(&self.space, &u)]
            }
        };
        if !value.is_finite() {
            return Err(Error::Evaluation(format!("task `{}` returned {value}", self.id)));
        }
        Ok(value)
    }

    /// Objective plus Gaussian noise drawn from `noise_seed`.
    pub fn evaluate_noisy(&self, x: &Configuration, noise_seed: u64) -> Result<f64> {
        let y = self.evaluate(x)?;
        if self.noise_std != 0.0 {
            let normal = Normal::new(0.0, self.noise_std).map_err(|e| Error::Config(e.to_string()))?;
            Ok(y + normal.sample(&mut seed::rng(noise_seed)))
        } else {
            Ok(y)
        }
    }
}
