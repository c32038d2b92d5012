use crate::error::{Error, Result};
use crate::quadrature;
use crate::spectral::WentzellParams;

use super::operator::DiscreteOperator;
use super::{gradient_flux, Control, FluxTrace, Grid, SchemeOptions, State, Trajectory};

/// Discretized Wentzell heat problem on a fixed grid.
///
/// Forward runs integrate `u̇ = L u + e₁ f/Δx²` with the θ-scheme; node 0 holds
/// the Dirichlet control. Adjoint runs integrate the same operator backward in
/// time with `φ(0, t) = 0`. With the default closure `L` is self-adjoint in the
/// discrete `H` product, so the adjoint run is the exact discrete dual of the
/// forward run.
#[derive(Clone, Debug)]
pub struct Model {
    pub params: WentzellParams,
    pub grid: Grid,
    pub options: SchemeOptions,
    op: DiscreteOperator,
}

impl Model {
    pub fn new(params: WentzellParams, grid: Grid) -> Self {
        Self::with_options(params, grid, SchemeOptions::default())
    }

    pub fn with_options(params: WentzellParams, grid: Grid, options: SchemeOptions) -> Self {
        let op = DiscreteOperator::new(&params, grid, options.closure);
        Self {
            params,
            grid,
            options,
            op,
        }
    }

    pub fn operator(&self) -> &DiscreteOperator {
        &self.op
    }

    fn check_grid(&self, s: &State, what: &str) -> Result<()> {
        if s.grid != self.grid {
            return Err(Error::ShapeMismatch(format!(
                "{what} lives on {} intervals, model on {}",
                s.grid.n_x, self.grid.n_x
            )));
        }
        Ok(())
    }

    fn theta(&self) -> f64 {
        self.options.time.theta()
    }

    fn full_state(&self, node0: f64, inner: &[f64]) -> State {
        let mut values = Vec::with_capacity(inner.len() + 1);
        values.push(node0);
        values.extend_from_slice(inner);
        State {
            grid: self.grid,
            values,
        }
    }

    fn forward_loop<R: FnMut(usize, f64, &[f64])>(
        &self,
        u0: &State,
        f: &Control,
        mut record: R,
    ) -> Result<Vec<f64>> {
        self.check_grid(u0, "initial state")?;
        let n_t = f.n_t();
        let dt = f.dt();
        let th = self.theta();
        let implicit = self.op.factor(1.0, -th * dt)?;
        let mut u: Vec<f64> = u0.values[1..].to_vec();
        record(0, f.samples[0], &u);
        for k in 0..n_t {
            let lu = self.op.apply(f.samples[k], &u);
            let mut rhs: Vec<f64> = u
                .iter()
                .zip(&lu)
                .map(|(v, l)| v + (1.0 - th) * dt * l)
                .collect();
            rhs[0] += th * dt * self.op.control_coeff * f.samples[k + 1];
            implicit.solve(&mut rhs);
            u = rhs;
            record(k + 1, f.samples[k + 1], &u);
        }
        Ok(u)
    }

    /// Controlled forward problem from `u0` driven by the Dirichlet control `f`.
    pub fn solve_forward(&self, u0: &State, f: &Control) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(f.samples.len());
        self.forward_loop(u0, f, |_, node0, u| states.push(self.full_state(node0, u)))?;
        Ok(Trajectory {
            times: f.times(),
            states,
            flux0: Vec::new(),
            step_flux: Vec::new(),
            theta: self.theta(),
        })
    }

    /// Terminal state of [`Model::solve_forward`] without storing the history.
    pub fn terminal_state(&self, u0: &State, f: &Control) -> Result<State> {
        let u = self.forward_loop(u0, f, |_, _, _| {})?;
        Ok(self.full_state(*f.samples.last().expect("non-empty"), &u))
    }

    fn flux_trace(&self, phi: &[f64]) -> f64 {
        let dx = self.grid.dx();
        match self.options.flux {
            FluxTrace::ThreePoint => (4.0 * phi[0] - phi[1]) / (2.0 * dx),
            FluxTrace::TwoPoint => phi[0] / dx,
        }
    }

    /// Backward loop; returns per-step fluxes `χ₁/Δx` and calls `record(k, φᵏ)` from `k = n_t` down to 0.
    fn adjoint_loop<R: FnMut(usize, &[f64])>(
        &self,
        vt: &State,
        horizon: f64,
        n_t: usize,
        mut record: R,
    ) -> Result<Vec<f64>> {
        self.check_grid(vt, "terminal datum")?;
        if n_t == 0 || !(horizon > 0.0) {
            return Err(Error::ShapeMismatch(format!(
                "invalid time sampling: T = {horizon}, n_t = {n_t}"
            )));
        }
        let dt = horizon / n_t as f64;
        let th = self.theta();
        let dx = self.grid.dx();
        let implicit = self.op.factor(1.0, -th * dt)?;
        let mut phi: Vec<f64> = vt.values[1..].to_vec();
        record(n_t, &phi);
        let mut step_flux = vec![0.0; n_t];
        for k in (0..n_t).rev() {
            let mut chi = phi;
            implicit.solve(&mut chi);
            step_flux[k] = chi[0] / dx;
            let lchi = self.op.apply(0.0, &chi);
            phi = chi
                .iter()
                .zip(&lchi)
                .map(|(c, l)| c + (1.0 - th) * dt * l)
                .collect();
            record(k, &phi);
        }
        Ok(step_flux)
    }

    /// Backward adjoint problem with terminal datum `vt` at `t = T`.
    pub fn solve_adjoint(&self, vt: &State, horizon: f64, n_t: usize) -> Result<Trajectory> {
        let mut states = vec![State::zeros(self.grid); n_t + 1];
        let mut flux0 = vec![0.0; n_t + 1];
        let step_flux = self.adjoint_loop(vt, horizon, n_t, |k, phi| {
            flux0[k] = self.flux_trace(phi);
            states[k] = self.full_state(0.0, phi);
        })?;
        let dt = horizon / n_t as f64;
        Ok(Trajectory {
            times: (0..=n_t).map(|k| k as f64 * dt).collect(),
            states,
            flux0,
            step_flux,
            theta: self.theta(),
        })
    }

    /// Sampled `p_x(0, ·)` of the adjoint run from `vt`, in the form that
    /// represents the exact discrete pairing with controls.
    pub fn adjoint_gradient_flux(&self, vt: &State, horizon: f64, n_t: usize) -> Result<Control> {
        let step_flux = self.adjoint_loop(vt, horizon, n_t, |_, _| {})?;
        Ok(gradient_flux(&step_flux, self.theta(), horizon))
    }

    /// Solve `g_xx − α g = −rhs` on `(0,1)` with `g(0) = 0` and the Wentzell
    /// condition reduced to `(aα − b) g(1) + d g_x(1) = a·rhs(1)`; that is,
    /// `(α − L) g = rhs`.
    pub fn solve_elliptic(&self, rhs: &State, alpha: f64) -> Result<State> {
        self.check_grid(rhs, "right-hand side")?;
        let fac = self.op.factor(alpha, -1.0)?;
        let mut g = rhs.values[1..].to_vec();
        fac.solve(&mut g);
        Ok(self.full_state(0.0, &g))
    }

    /// Discrete `(α − L) g` for a state with `g(0)` taken from node 0.
    pub fn apply_shifted(&self, g: &State, alpha: f64) -> Result<State> {
        self.check_grid(g, "state")?;
        let lg = self.op.apply(g.values[0], &g.values[1..]);
        let inner: Vec<f64> = g.values[1..]
            .iter()
            .zip(&lg)
            .map(|(v, l)| alpha * v - l)
            .collect();
        Ok(self.full_state(0.0, &inner))
    }

    /// `((u, u₁), (v, v₁))_H = ∫₀¹ u v dx + (a/d) u₁ v₁`, trapezoid in space.
    pub fn inner_h(&self, p: &State, q: &State) -> Result<f64> {
        inner_h(p, q, &self.params)
    }

    pub fn norm_h(&self, p: &State) -> f64 {
        norm_h(p, &self.params)
    }

    /// `((α − A)⁻¹ U, U)_H`, the squared `H⁻¹` norm when positive.
    pub fn hminus1_pairing(&self, u: &State, alpha: f64) -> Result<f64> {
        let g = self.solve_elliptic(u, alpha)?;
        self.inner_h(&g, u)
    }

    pub fn norm_hminus1(&self, u: &State, alpha: f64) -> Result<f64> {
        let pairing = self.hminus1_pairing(u, alpha)?;
        if pairing < -1e-14 * self.inner_h(u, u)?.max(f64::MIN_POSITIVE) {
            return Err(Error::IndefiniteNorm(pairing));
        }
        Ok(pairing.max(0.0).sqrt())
    }

    /// Defect `|(U(T), Φ_T)_H − (U(0), Φ(0))_H − ∫₀ᵀ φ_x(0,t) f(t) dt|` with
    /// the flux integral by trapezoid quadrature of the stored trace.
    pub fn duality_check(&self, u0: &State, f: &Control, vt: &State) -> Result<f64> {
        let fwd = self.solve_forward(u0, f)?;
        let adj = self.solve_adjoint(vt, f.horizon, f.n_t())?;
        let lhs = self.inner_h(fwd.terminal(), vt)? - self.inner_h(fwd.initial(), adj.initial())?;
        let rhs = adj.trapezoid_pairing(f)?;
        Ok((lhs - rhs).abs())
    }
}

/// `H` inner product of two grid states.
pub fn inner_h(p: &State, q: &State, params: &WentzellParams) -> Result<f64> {
    if p.grid != q.grid {
        return Err(Error::ShapeMismatch(format!(
            "states on {} and {} intervals",
            p.grid.n_x, q.grid.n_x
        )));
    }
    let w = quadrature::trapezoid_weights(p.grid.n_x, p.grid.dx());
    Ok(quadrature::weighted_dot(&w, &p.values, &q.values)
        + params.weight() * p.boundary() * q.boundary())
}

pub fn norm_h(p: &State, params: &WentzellParams) -> f64 {
    inner_h(p, p, params).expect("same grid").sqrt()
}
