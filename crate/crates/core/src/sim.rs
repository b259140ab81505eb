//! Fixed-step trajectories and exact sensitivity of linear systems.
//!
//! Continuous and hybrid systems are integrated with classical RK4. For
//! hybrid systems the mode is chosen once per step, at the step's start
//! state, and held for all four stages. Discrete systems iterate their map.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{SystemKind, SystemSpec};
use crate::linalg::{expm, norm, sub, Matrix};
use crate::net::SensitivityModel;
use crate::{Error, Result};

/// States whose norm exceeds this abort the simulation.
pub const DIVERGENCE_NORM: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// `ξ(x0, 0), ξ(x0, h), …, ξ(x0, k·h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    step: f64,
    states: Vec<Vec<f64>>,
    direction: Direction,
}

impl Trajectory {
    /// Panics on an empty state list.
    pub fn from_states(step: f64, states: Vec<Vec<f64>>, direction: Direction) -> Self {
        assert!(!states.is_empty(), "trajectory needs at least its initial state");
        Self {
            step,
            states,
            direction,
        }
    }

    pub fn initial(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    pub fn last(&self) -> &[f64] {
        &self.states[self.states.len() - 1]
    }

    /// Number of steps `k`; there are `k + 1` states.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    /// CSV with header `step,time,x1..xn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        writeln!(w, "step,time,{}", header.join(","))?;
        for (i, s) in self.states.iter().enumerate() {
            let cells: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{i},{},{}", self.time(i), cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Parses the output of [`Trajectory::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trajectory csv".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let cols = header.split(',').count();
        if cols < 3 || !header.starts_with("step,time,") {
            return Err(Error::Parse(format!("bad trajectory header `{header}`")));
        }
        let mut states = Vec::new();
        let mut times = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols {
                return Err(Error::Parse(format!("row {}: expected {cols} columns", lineno + 2)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))
            };
            times.push(parse(cells[1])?);
            states.push(cells[2..].iter().map(|c| parse(c)).collect::<Result<Vec<_>>>()?);
        }
        if states.is_empty() {
            return Err(Error::Parse("trajectory csv has no rows".into()));
        }
        let step = if times.len() > 1 { times[1] - times[0] } else { 1.0 };
        Ok(Self::from_states(step, states, Direction::Forward))
    }
}

fn check_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite()) && norm(x) <= DIVERGENCE_NORM
}

fn validate(sys: &SystemSpec, x0: &[f64], h: f64) -> Result<()> {
    if x0.len() != sys.dim() {
        return Err(Error::dim("initial state", sys.dim(), x0.len()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Config(format!("step size must be > 0, got {h}")));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::Config("initial state is not finite".into()));
    }
    Ok(())
}

/// One RK4 step of `sign · f` with the mode frozen at `x`.
fn rk4_step(sys: &SystemSpec, x: &[f64], h: f64, sign: f64) -> Result<Vec<f64>> {
    let n = x.len();
    let mode = sys.select_mode(x)?;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    sys.eval_mode_into(mode, x, &mut k1)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * sign * k1[i];
    }
    sys.eval_mode_into(mode, &tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * sign * k2[i];
    }
    sys.eval_mode_into(mode, &tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = x[i] + h * sign * k3[i];
    }
    sys.eval_mode_into(mode, &tmp, &mut k4)?;
    Ok((0..n)
        .map(|i| x[i] + sign * h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn integrate(
    sys: &SystemSpec,
    x0: &[f64],
    steps: usize,
    h: f64,
    direction: Direction,
) -> Result<Trajectory> {
    validate(sys, x0, h)?;
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    for step in 1..=steps {
        let x = &states[step - 1];
        let next = match sys.kind() {
            SystemKind::Discrete => sys.eval_field(x)?,
            SystemKind::Continuous | SystemKind::Hybrid => rk4_step(sys, x, h, sign)?,
        };
        if !check_finite(&next) {
            return Err(Error::Divergence {
                step,
                prefix: Box::new(Trajectory::from_states(h, states, direction)),
            });
        }
        states.push(next);
    }
    Ok(Trajectory::from_states(h, states, direction))
}

/// Forward trajectory of `steps` steps of size `h` (the step is nominal for
/// discrete systems).
pub fn simulate(sys: &SystemSpec, x0: &[f64], steps: usize, h: f64) -> Result<Trajectory> {
    integrate(sys, x0, steps, h, Direction::Forward)
}

/// Integrates `−f`, so that `simulate(last, k, h)` returns close to `x0`.
/// Discrete systems are rejected.
pub fn simulate_backward(sys: &SystemSpec, x0: &[f64], steps: usize, h: f64) -> Result<Trajectory> {
    if sys.kind() == SystemKind::Discrete {
        return Err(Error::Unsupported(format!(
            "backward simulation of discrete system `{}`",
            sys.name()
        )));
    }
    integrate(sys, x0, steps, h, Direction::Backward)
}

/// `ξ(x0 + v, i·h) − ξ(x0, i·h)` from two simulations.
pub fn empirical_sensitivity(
    sys: &SystemSpec,
    x0: &[f64],
    v: &[f64],
    steps: usize,
    h: f64,
) -> Result<Vec<f64>> {
    if v.len() != x0.len() {
        return Err(Error::dim("perturbation", x0.len(), v.len()));
    }
    let base = simulate(sys, x0, steps, h)?;
    let moved: Vec<f64> = x0.iter().zip(v).map(|(a, b)| a + b).collect();
    let other = simulate(sys, &moved, steps, h)?;
    Ok(sub(other.last(), base.last()))
}

/// Exact sensitivity of `ẋ = A x`: `Φ(x0, v, t) = e^{At} v`,
/// `Φ⁻¹(x0, v, t) = e^{−At} v`, independent of `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensOracle {
    matrix: Matrix,
}

impl SensOracle {
    pub fn new(matrix: Matrix) -> Self {
        Self { matrix }
    }

    pub fn from_system(sys: &SystemSpec) -> Result<Self> {
        sys.linear_matrix()
            .cloned()
            .map(Self::new)
            .ok_or_else(|| Error::Unsupported(format!("`{}` is not a linear system", sys.name())))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Model adapter: the forward map if `inverse` is false, else the inverse.
    pub fn model(&self, inverse: bool) -> LinearSensitivity {
        LinearSensitivity {
            oracle: self.clone(),
            inverse,
        }
    }
}

pub fn linear_sensitivity(oracle: &SensOracle, v: &[f64], t: f64, inverse: bool) -> Result<Vec<f64>> {
    if v.len() != oracle.dim() {
        return Err(Error::dim("perturbation", oracle.dim(), v.len()));
    }
    if t < 0.0 {
        return Err(Error::Range(format!("time must be ≥ 0, got {t}")));
    }
    let s = if inverse { -t } else { t };
    Ok(expm(&oracle.matrix.scaled(s)).mul_vec(v))
}

/// [`SensOracle`] viewed as a [`SensitivityModel`], for substituting the
/// exact map where a trained network would go.
#[derive(Debug, Clone)]
pub struct LinearSensitivity {
    oracle: SensOracle,
    inverse: bool,
}

impl SensitivityModel for LinearSensitivity {
    fn dim(&self) -> usize {
        self.oracle.dim()
    }

    fn eval(&self, x0: &[f64], v: &[f64], t: f64) -> Result<Vec<f64>> {
        if x0.len() != self.dim() {
            return Err(Error::dim("model state", self.dim(), x0.len()));
        }
        linear_sensitivity(&self.oracle, v, t, self.inverse)
    }
}

const TRAJ_MAGIC: &[u8; 8] = b"NSTRAJ01";

/// Writes trajectories in a compact little-endian binary format.
pub fn write_trajectories<W: Write>(mut w: W, trajs: &[Trajectory]) -> std::io::Result<()> {
    w.write_all(TRAJ_MAGIC)?;
    w.write_all(&(trajs.len() as u64).to_le_bytes())?;
    for t in trajs {
        w.write_all(&(t.dim() as u32).to_le_bytes())?;
        w.write_all(&[match t.direction {
            Direction::Forward => 0u8,
            Direction::Backward => 1u8,
        }])?;
        w.write_all(&t.step.to_le_bytes())?;
        w.write_all(&(t.states.len() as u64).to_le_bytes())?;
        for s in &t.states {
            for v in s {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Parse(format!("truncated trajectory file: {e}")))?;
    Ok(buf)
}

pub fn read_trajectories<R: Read>(mut r: R) -> Result<Vec<Trajectory>> {
    let magic: [u8; 8] = read_exact(&mut r)?;
    if &magic != TRAJ_MAGIC {
        return Err(Error::Parse("not a trajectory file".into()));
    }
    let count = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let dim = u32::from_le_bytes(read_exact(&mut r)?) as usize;
        let direction = match read_exact::<_, 1>(&mut r)?[0] {
            0 => Direction::Forward,
            1 => Direction::Backward,
            d => return Err(Error::Parse(format!("bad direction tag {d}"))),
        };
        let step = f64::from_le_bytes(read_exact(&mut r)?);
        let len = u64::from_le_bytes(read_exact(&mut r)?) as usize;
        if dim == 0 || len == 0 {
            return Err(Error::Parse("empty trajectory record".into()));
        }
        let mut states = Vec::with_capacity(len.min(1 << 20));
        for _ in 0..len {
            let mut s = Vec::with_capacity(dim);
            for _ in 0..dim {
                s.push(f64::from_le_bytes(read_exact(&mut r)?));
            }
            states.push(s);
        }
        out.push(Trajectory::from_states(step, states, direction));
    }
    Ok(out)
}
