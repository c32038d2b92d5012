//! Method-of-lines discretization of the controlled problem, its backward
//! adjoint, and the elliptic problems behind the `H⁻¹` pairing.

mod export;
mod operator;
mod solve;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

pub use export::{read_control_csv, write_control_csv, write_state_json, write_trajectory_csv};
pub use operator::{BoundaryClosure, DiscreteOperator};
pub use solve::{inner_h, norm_h, Model};

/// Uniform grid `x_j = j/n_x`, `j = 0..=n_x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub n_x: usize,
}

impl Grid {
    pub const MIN_INTERVALS: usize = 4;

    pub fn new(n_x: usize) -> Result<Self> {
        if n_x < Self::MIN_INTERVALS {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least {} intervals, got {n_x}",
                Self::MIN_INTERVALS
            )));
        }
        Ok(Self { n_x })
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n_x as f64
    }

    pub fn len(&self) -> usize {
        self.n_x + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 / self.n_x as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_x).map(|j| self.x(j)).collect()
    }
}

/// Grid samples of `u` on `[0, 1]`; the boundary component `u₁ = u(1)` is the last node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl State {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "state has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "state contains non-finite values".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        Self {
            grid,
            values: (0..grid.len()).map(|j| f(grid.x(j))).collect(),
        }
    }

    /// The boundary component `u₁`.
    pub fn boundary(&self) -> f64 {
        self.values[self.grid.n_x]
    }

    pub fn scaled(&self, c: f64) -> State {
        State {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &State) -> State {
        State {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Uniformly sampled boundary control `f(t_i)`, `t_i = i T / n_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub horizon: f64,
    pub samples: Vec<f64>,
}

impl Control {
    pub fn new(horizon: f64, samples: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::ShapeMismatch(
                "a control needs at least two samples".into(),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "control contains non-finite samples".into(),
            ));
        }
        Ok(Self { horizon, samples })
    }

    pub fn zeros(horizon: f64, n_t: usize) -> Self {
        Self {
            horizon,
            samples: vec![0.0; n_t + 1],
        }
    }

    pub fn from_fn<F: Fn(f64) -> f64>(horizon: f64, n_t: usize, f: F) -> Self {
        let dt = horizon / n_t as f64;
        Self {
            horizon,
            samples: (0..=n_t).map(|i| f(i as f64 * dt)).collect(),
        }
    }

    pub fn n_t(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_t() as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.samples.len()).map(|i| i as f64 * dt).collect()
    }

    /// Composite-trapezoid `L²(0,T)` inner product.
    pub fn inner(&self, other: &Control) -> f64 {
        let w = quadrature::trapezoid_weights(self.n_t(), self.dt());
        quadrature::weighted_dot(&w, &self.samples, &other.samples)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Control {
        Control {
            horizon: self.horizon,
            samples: self.samples.iter().map(|v| c * v).collect(),
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &Control) -> Control {
        Control {
            horizon: self.horizon,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn same_sampling(&self, other: &Control) -> bool {
        self.samples.len() == other.samples.len()
            && (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon
    }
}

/// Time stepping scheme of the method of lines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeScheme {
    #[default]
    CrankNicolson,
    ImplicitEuler,
}

impl TimeScheme {
    /// Implicitness parameter `θ` of the θ-scheme.
    pub fn theta(&self) -> f64 {
        match self {
            TimeScheme::CrankNicolson => 0.5,
            TimeScheme::ImplicitEuler => 1.0,
        }
    }
}

/// Formula for the diagnostic flux trace `φ_x(0, t)` stored in adjoint trajectories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluxTrace {
    /// `(−3φ₀ + 4φ₁ − φ₂) / (2Δx)`
    #[default]
    ThreePoint,
    /// `(φ₁ − φ₀) / Δx`
    TwoPoint,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeOptions {
    #[serde(default)]
    pub time: TimeScheme,
    #[serde(default)]
    pub closure: BoundaryClosure,
    #[serde(default)]
    pub flux: FluxTrace,
}

/// Time history of a forward or adjoint run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    /// Diagnostic trace `φ_x(0, t_k)` (adjoint runs only; empty for forward runs).
    pub flux0: Vec<f64>,
    /// Per-step flux `χ₁/Δx` of the implicit stage, the exact discrete dual of
    /// the control input (adjoint runs only).
    pub step_flux: Vec<f64>,
    pub theta: f64,
}

impl Trajectory {
    pub fn initial(&self) -> &State {
        &self.states[0]
    }

    pub fn terminal(&self) -> &State {
        self.states
            .last()
            .expect("trajectory has at least one state")
    }

    pub fn n_t(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// `∫₀ᵀ φ_x(0,t) f(t) dt` in the exact discrete form matching the θ-scheme.
    pub fn control_pairing(&self, f: &Control) -> Result<f64> {
        if self.step_flux.len() != self.n_t() || f.n_t() != self.n_t() {
            return Err(Error::ShapeMismatch(
                "control and adjoint trajectory sampling differ".into(),
            ));
        }
        let dt = f.dt();
        let th = self.theta;
        Ok(self
            .step_flux
            .iter()
            .enumerate()
            .map(|(k, s)| dt * (th * f.samples[k + 1] + (1.0 - th) * f.samples[k]) * s)
            .sum())
    }

    /// `L²`-representer of [`Trajectory::control_pairing`] on the trapezoid-weighted grid:
    /// the sampled flux `p_x(0, ·)` used for gradients and HUM controls.
    pub fn gradient_flux(&self) -> Control {
        gradient_flux(&self.step_flux, self.theta, self.horizon())
    }

    /// Trapezoid quadrature of `flux0 · f`.
    pub fn trapezoid_pairing(&self, f: &Control) -> Result<f64> {
        if self.flux0.len() != f.samples.len() {
            return Err(Error::ShapeMismatch(
                "control and adjoint trajectory sampling differ".into(),
            ));
        }
        let w = quadrature::trapezoid_weights(f.n_t(), f.dt());
        Ok(quadrature::weighted_dot(&w, &self.flux0, &f.samples))
    }
}

pub(crate) fn gradient_flux(step_flux: &[f64], theta: f64, horizon: f64) -> Control {
    let n_t = step_flux.len();
    let mut samples = vec![0.0; n_t + 1];
    for (k, s) in step_flux.iter().enumerate() {
        samples[k] += (1.0 - theta) * s;
        samples[k + 1] += theta * s;
    }
    samples[0] *= 2.0;
    samples[n_t] *= 2.0;
    Control { horizon, samples }
}
