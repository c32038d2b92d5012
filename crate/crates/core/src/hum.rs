//! Penalized HUM.
//!
//! For `ε > 0` the approximate control minimizes
//!
//! ```text
//! J_ε(f) = ½ ∫₀ᵀ |f|² dt + (1/2ε) ((α − A)⁻¹ U(T), U(T))_H
//! ```
//!
//! and is recovered as `f = −p_x(0, ·)` from the adjoint run with terminal
//! datum `V`, where `V` solves the dual problem `ε(α − A)V + ΓV = S(T)U₀`
//! (`Γ` maps `V` to the terminal state driven by `p_x(0, ·)` from rest).
//! [`hum_cg`] solves the dual problem by conjugate gradients preconditioned
//! with the elliptic solve `(α − A)⁻¹`.
//!
//! `J_ε` is convex only when `α − A` is positive. For shifts below the
//! bottom of the spectrum the iteration still converges to the stationary
//! point of `J_ε`, and the `H⁻¹` term is reported as a signed pairing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{Control, Grid, Model, SchemeOptions, State};
use crate::quadrature;
use crate::spectral::{self, WentzellParams};

/// Inner product on elliptic iterates used for `ρₖ`, `γₖ` and the stopping test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CgInnerProduct {
    /// `α (g, w)_H + ∫ g_x w_x dx − (b/d) g(1) w(1)`, i.e. `(g, (α − A) w)_H`.
    ///
    /// The dual operator is self-adjoint in this product, so the iteration is a
    /// genuine conjugate gradient method. When `α − A` is not positive the
    /// residual is measured in `(·, (β − A)⁻¹ ·)` with `β = 1 − λ₀` instead.
    #[default]
    Energy,
    /// `∫ g_x w_x dx + (a/d) g_x(1) w_x(1)`.
    DerivativeH,
    /// `∫ g_x w_x dx`.
    DerivativeL2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumConfig {
    pub eps: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_x: usize,
    pub n_t: usize,
    pub horizon: f64,
    #[serde(default)]
    pub inner: CgInnerProduct,
    #[serde(default)]
    pub scheme: SchemeOptions,
    /// Initial dual iterate `V⁰`; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<State>,
}

impl HumConfig {
    pub fn new(
        eps: f64,
        alpha: f64,
        tol: f64,
        max_iter: usize,
        n_x: usize,
        n_t: usize,
        horizon: f64,
    ) -> Self {
        Self {
            eps,
            alpha,
            tol,
            max_iter,
            n_x,
            n_t,
            horizon,
            inner: CgInnerProduct::default(),
            scheme: SchemeOptions::default(),
            v0: None,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_x)
    }

    /// Checks ranges and that `α` is not minus an eigenvalue.
    pub fn validate(&self, params: &WentzellParams) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must lie in (0, 1), got {}",
                self.tol
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.n_t == 0 {
            return Err(Error::InvalidConfig("n_t must be positive".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite, got {}",
                self.alpha
            )));
        }
        let grid = self.grid()?;
        if let Some(v0) = &self.v0 {
            if v0.grid != grid {
                return Err(Error::ShapeMismatch(format!(
                    "initial guess on {} intervals, config on {}",
                    v0.grid.n_x, self.n_x
                )));
            }
        }
        if let Some(lambda) = resonant_eigenvalue(params, self.alpha)? {
            return Err(Error::InvalidConfig(format!(
                "alpha = {} is minus the eigenvalue {lambda}; the elliptic problem is singular",
                self.alpha
            )));
        }
        Ok(())
    }

    fn model(&self, params: &WentzellParams) -> Result<Model> {
        Ok(Model::with_options(*params, self.grid()?, self.scheme))
    }

    fn check_control(&self, f: &Control) -> Result<()> {
        if !f.same_sampling(&Control::zeros(self.horizon, self.n_t)) {
            return Err(Error::ShapeMismatch(format!(
                "control sampled with n_t = {} on [0, {}], config expects n_t = {} on [0, {}]",
                f.n_t(),
                f.horizon,
                self.n_t,
                self.horizon
            )));
        }
        Ok(())
    }
}

/// The eigenvalue `λₙ` with `|α + λₙ| ≤ 1e−10`, if any.
fn resonant_eigenvalue(params: &WentzellParams, alpha: f64) -> Result<Option<f64>> {
    let mut pairs = spectral::nonpositive_eigenvalue(params)?
        .into_iter()
        .collect::<Vec<_>>();
    let mut n_max = 4;
    loop {
        pairs.extend(spectral::positive_eigenvalues(params, n_max)?);
        if let Some(p) = pairs.iter().find(|p| (alpha + p.lambda).abs() <= 1e-10) {
            return Ok(Some(p.lambda));
        }
        if pairs.last().is_none_or(|p| p.lambda > -alpha + 1.0) {
            return Ok(None);
        }
        pairs.retain(|p| p.lambda <= 0.0);
        n_max *= 2;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxIterReached,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HumResult {
    pub control: Control,
    /// Terminal adjoint datum `V` producing [`HumResult::control`].
    pub v_final: State,
    /// `‖gᵏ‖/‖g⁰‖` for `k = 0..=iterations`.
    pub residuals: Vec<f64>,
    pub terminal_norm_h: f64,
    /// `None` when `α − A` is indefinite and the pairing comes out negative.
    pub terminal_norm_hminus1: Option<f64>,
    pub j_eps: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// `(ḡᵏ, wᵏ⁻¹)` per iteration.
    pub denominators: Vec<f64>,
}

impl HumResult {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

/// Solver state shared by the public entry points.
struct Dual<'a> {
    model: Model,
    cfg: &'a HumConfig,
    /// Shift `β` of the metric `(x, (β − A) y)_H` preconditioning the energy variant.
    metric_shift: f64,
}

/// One CG residual: the elliptic iterate `g`, `r = (α − A) g` and the preconditioned `z`.
struct Residual {
    g: State,
    r: State,
    z: State,
}

impl<'a> Dual<'a> {
    fn new(cfg: &'a HumConfig, params: &WentzellParams) -> Result<Self> {
        let lambda_min = spectral::spectrum(params, 1)?[0].lambda;
        let metric_shift = if cfg.alpha + lambda_min > 0.0 {
            cfg.alpha
        } else {
            1.0 - lambda_min
        };
        Ok(Self {
            model: cfg.model(params)?,
            cfg,
            metric_shift,
        })
    }

    /// `−p_x(0, ·)` for the adjoint run from `v`.
    fn control_of(&self, v: &State) -> Result<Control> {
        Ok(self
            .model
            .adjoint_gradient_flux(v, self.cfg.horizon, self.cfg.n_t)?
            .scaled(-1.0))
    }

    /// Elliptic update `g` with `g_xx − α g = ε(w_xx − α w) + y`.
    fn elliptic_update(&self, w: &State, y: &State) -> Result<State> {
        let rhs = self
            .model
            .apply_shifted(w, self.cfg.alpha)?
            .scaled(self.cfg.eps)
            .axpy(-1.0, y);
        self.model.solve_elliptic(&rhs, self.cfg.alpha)
    }

    fn residual(&self, g: State) -> Result<Residual> {
        let r = self.model.apply_shifted(&g, self.cfg.alpha)?;
        let z = if self.cfg.inner == CgInnerProduct::Energy && self.metric_shift != self.cfg.alpha {
            self.model.solve_elliptic(&r, self.metric_shift)?
        } else {
            g.clone()
        };
        Ok(Residual { g, r, z })
    }

    /// Squared residual norm entering `ρₖ`, `γₖ` and the stopping test.
    fn norm_sq(&self, res: &Residual) -> f64 {
        match self.cfg.inner {
            CgInnerProduct::Energy => self.mass_dot(&res.r, &res.z),
            _ => self.derivative_inner(&res.g, &res.g),
        }
    }

    /// Denominator of `ρₖ` for the update `ḡ` with `q = (α − A) ḡ` along `w`.
    fn curvature(&self, g_bar: &State, q: &State, w: &State) -> f64 {
        match self.cfg.inner {
            CgInnerProduct::Energy => self.mass_dot(q, w),
            _ => self.derivative_inner(g_bar, w),
        }
    }

    /// Discrete `H` product over the unknown nodes `1..=n_x`.
    fn mass_dot(&self, x: &State, y: &State) -> f64 {
        let mass = &self.model.operator().mass;
        mass.iter()
            .zip(&x.values[1..])
            .zip(&y.values[1..])
            .map(|((m, a), b)| m * a * b)
            .sum()
    }

    fn derivative_inner(&self, g: &State, w: &State) -> f64 {
        let grid = self.model.grid;
        let gx = derivative(g);
        let wx = derivative(w);
        let weights = quadrature::trapezoid_weights(grid.n_x, grid.dx());
        let mut s = quadrature::weighted_dot(&weights, &gx, &wx);
        if self.cfg.inner == CgInnerProduct::DerivativeH {
            s += self.model.params.weight() * gx[grid.n_x] * wx[grid.n_x];
        }
        s
    }
}

/// Nodal `g_x`: centered differences inside, second-order one-sided at the ends.
fn derivative(g: &State) -> Vec<f64> {
    let n = g.grid.n_x;
    let h = g.grid.dx();
    let v = &g.values;
    let mut out = vec![0.0; n + 1];
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    for j in 1..n {
        out[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
    }
    out[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
    out
}

fn check_initial(u0: &State, cfg: &HumConfig) -> Result<()> {
    if u0.grid.n_x != cfg.n_x {
        return Err(Error::ShapeMismatch(format!(
            "initial state on {} intervals, config on {}",
            u0.grid.n_x, cfg.n_x
        )));
    }
    Ok(())
}

/// `J_ε(f)`, with the `H⁻¹` term taken as the signed pairing `((α − A)⁻¹U, U)_H`.
pub fn j_eps(f: &Control, u0: &State, cfg: &HumConfig, params: &WentzellParams) -> Result<f64> {
    cfg.check_control(f)?;
    check_initial(u0, cfg)?;
    let model = cfg.model(params)?;
    let terminal = model.terminal_state(u0, f)?;
    let pairing = model.hminus1_pairing(&terminal, cfg.alpha)?;
    Ok(0.5 * f.inner(f) + pairing / (2.0 * cfg.eps))
}

/// `L²` gradient of [`j_eps`]: `f + p_x(0, ·)` where `p` runs backward from
/// `h = (α − A)⁻¹ U(T) / ε`.
pub fn gradient_residual(
    f: &Control,
    u0: &State,
    cfg: &HumConfig,
    params: &WentzellParams,
) -> Result<Control> {
    cfg.check_control(f)?;
    check_initial(u0, cfg)?;
    let dual = Dual::new(cfg, params)?;
    let terminal = dual.model.terminal_state(u0, f)?;
    let h = dual
        .model
        .solve_elliptic(&terminal.scaled(1.0 / cfg.eps), cfg.alpha)?;
    let px = dual.model.adjoint_gradient_flux(&h, cfg.horizon, cfg.n_t)?;
    Ok(f.axpy(1.0, &px))
}

const PROGRESS_EVERY: usize = 50;
const BREAKDOWN: f64 = 1e-300;

/// Conjugate gradient iteration on the dual problem.
///
/// Stops once `‖gᵏ‖/‖g⁰‖ ≤ tol` or after `max_iter` iterations; in the latter
/// case the last iterate is returned with [`StopReason::MaxIterReached`].
pub fn hum_cg(u0: &State, cfg: &HumConfig, params: &WentzellParams) -> Result<HumResult> {
    cfg.validate(params)?;
    check_initial(u0, cfg)?;
    let dual = Dual::new(cfg, params)?;
    let model = &dual.model;
    let grid = model.grid;

    let mut v = cfg.v0.clone().unwrap_or_else(|| State::zeros(grid));
    v.values[0] = 0.0;
    let f0 = dual.control_of(&v)?;
    let y0 = model.terminal_state(u0, &f0)?;
    let mut res = dual.residual(dual.elliptic_update(&v, &y0)?)?;
    let mut w = res.z.clone();
    let norm0_sq = dual.norm_sq(&res);
    let mut norm_sq = norm0_sq;
    let mut residuals = vec![1.0];
    let mut denominators = Vec::new();
    let mut stop = StopReason::MaxIterReached;
    let mut iterations = 0;

    if norm0_sq == 0.0 {
        stop = StopReason::Converged;
    } else if !(norm0_sq > 0.0) {
        return Err(Error::IndefiniteNorm(norm0_sq));
    }
    let rest = State::zeros(grid);
    if stop != StopReason::Converged {
        for k in 1..=cfg.max_iter {
            let fk = dual.control_of(&w)?;
            let yk = model.terminal_state(&rest, &fk)?;
            let g_bar = dual.elliptic_update(&w, &yk)?;
            let q = model.apply_shifted(&g_bar, cfg.alpha)?;
            let den = dual.curvature(&g_bar, &q, &w);
            denominators.push(den);
            if den.abs() < BREAKDOWN || !den.is_finite() {
                return Err(Error::Breakdown {
                    iteration: k,
                    denominator: den,
                });
            }
            let rho = norm_sq / den;
            v = v.axpy(-rho, &w);
            res = dual.residual(res.g.axpy(-rho, &g_bar))?;
            let new_sq = dual.norm_sq(&res);
            iterations = k;
            let ratio = (new_sq.abs() / norm0_sq).sqrt();
            residuals.push(ratio);
            if k % PROGRESS_EVERY == 0 {
                log::info!("hum iteration {k}: relative residual {ratio:.3e}");
            }
            if ratio <= cfg.tol {
                stop = StopReason::Converged;
                break;
            }
            let gamma = new_sq / norm_sq;
            norm_sq = new_sq;
            w = res.z.axpy(gamma, &w);
        }
    }
    log::debug!("hum stopped after {iterations} iterations ({stop:?})");

    let control = dual.control_of(&v)?;
    let terminal = model.terminal_state(u0, &control)?;
    let pairing = model.hminus1_pairing(&terminal, cfg.alpha)?;
    Ok(HumResult {
        j_eps: 0.5 * control.inner(&control) + pairing / (2.0 * cfg.eps),
        terminal_norm_h: model.norm_h(&terminal),
        terminal_norm_hminus1: (pairing >= 0.0).then(|| pairing.sqrt()),
        control,
        v_final: v,
        residuals,
        iterations,
        stop,
        denominators,
    })
}
