//! Moment method.
//!
//! A control `f` steers `U₀ = Σ ηₙ Zₙ` so that the first `N` coefficients of
//! `U(T)` vanish iff `θ(t) = f(T − t)` solves the moment problem
//!
//! ```text
//! ∫₀ᵀ θ(t) e^{−λₙ t} dt = −ηₙ e^{−λₙ T} / zₙ'(0),   n < N,
//! ```
//!
//! with `zₙ'(0)` the boundary flux of the normalized eigenfunction. Here
//! `θ` is built from the finite biorthogonal family of `{e^{−λₙ t}}_{n<N}`
//! obtained by solving Gram systems. Non-positive exponents are first
//! shifted: `θ(t) = e^{−λ t} θ̃(t)` with `λ = 1 − λ₀`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::compensated::dot2;
use crate::error::{Error, Result};
use crate::pde::{self, Control, Grid, Model, State};
use crate::quadrature;
use crate::spectral::{self, Eigenpair, SpectralCoeffs, WentzellParams};

/// Condition number beyond which Gram solves are refused.
pub const CONDITION_LIMIT: f64 = 1e14;

const REFINEMENT_STEPS: usize = 2;
const BIORTHOGONALITY_TOL: f64 = 1e-10;

/// Truncated exponential family `{e^{−(λₙ + shift) t}}` on `(0, T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFamily {
    /// Unshifted eigenvalues, strictly increasing.
    pub lambdas: Vec<f64>,
    pub horizon: f64,
    /// `0` unless some `λₙ ≤ 0`.
    pub shift: f64,
}

impl ExpFamily {
    pub fn new(lambdas: Vec<f64>, horizon: f64, shift: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidParams("empty exponential family".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "shift must be non-negative, got {shift}"
            )));
        }
        if lambdas.iter().any(|l| !l.is_finite()) || lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams(
                "exponents must be finite and strictly increasing".into(),
            ));
        }
        if lambdas[0] + shift <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "effective exponent λ₀ + shift = {} is not positive",
                lambdas[0] + shift
            )));
        }
        Ok(Self {
            lambdas,
            horizon,
            shift,
        })
    }

    /// Family of `pairs`, shifted by `1 − λ₀` when `λ₀ ≤ 0`.
    pub fn from_pairs(pairs: &[Eigenpair], horizon: f64) -> Result<Self> {
        let lambdas: Vec<f64> = pairs.iter().map(|p| p.lambda).collect();
        let shift = match lambdas.first() {
            Some(&l0) if l0 <= 0.0 => 1.0 - l0,
            _ => 0.0,
        };
        Self::new(lambdas, horizon, shift)
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn is_shifted(&self) -> bool {
        self.shift > 0.0
    }

    /// `λₙ + shift`.
    pub fn exponents(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l + self.shift).collect()
    }
}

/// `G_mn = ∫₀ᵀ e^{−(κ_m + κ_n) t} dt` over the effective exponents `κ`.
pub fn gram_matrix(fam: &ExpFamily) -> DMatrix<f64> {
    let k = fam.exponents();
    let n = k.len();
    DMatrix::from_fn(n, n, |i, j| {
        let s = k[i] + k[j];
        -(-s * fam.horizon).exp_m1() / s
    })
}

/// Factored Gram system of a family.
#[derive(Clone, Debug)]
pub struct GramSystem {
    gram: DMatrix<f64>,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    pub condition: f64,
}

impl GramSystem {
    pub fn new(fam: &ExpFamily) -> Result<Self> {
        let gram = gram_matrix(fam);
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let max = eig.max();
        let min = eig.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                condition,
                limit: CONDITION_LIMIT,
            });
        }
        let factor = gram.clone().cholesky().ok_or(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        })?;
        Ok(Self {
            gram,
            factor,
            condition,
        })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `rhs − G c` with each entry accumulated in twice the working precision.
    pub fn residual(&self, c: &DVector<f64>, rhs: &DVector<f64>) -> DVector<f64> {
        let n = rhs.len();
        DVector::from_fn(n, |i, _| {
            let mut terms: Vec<f64> = self.gram.row(i).iter().copied().collect();
            let mut coeffs: Vec<f64> = c.iter().map(|v| -v).collect();
            terms.push(rhs[i]);
            coeffs.push(1.0);
            dot2(&terms, &coeffs)
        })
    }

    /// Cholesky solve followed by iterative refinement.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut c = self.factor.solve(rhs);
        for _ in 0..REFINEMENT_STEPS {
            let r = self.residual(&c, rhs);
            c += self.factor.solve(&r);
        }
        c
    }
}

/// `Θₙ(t) = Σ_m c_m e^{−κ_m t}` with `∫₀ᵀ e^{−κ_m t} Θₙ dt = δ_{nm}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiorthogonalElement {
    pub n: usize,
    pub coeffs: Vec<f64>,
    /// Effective exponents `κ_m`.
    pub exponents: Vec<f64>,
    pub l2_norm: f64,
    /// `‖G c − eₙ‖_∞`.
    pub residual: f64,
    pub condition: f64,
}

impl BiorthogonalElement {
    pub fn eval(&self, t: f64) -> f64 {
        exp_sum(&self.coeffs, &self.exponents, t)
    }
}

fn exp_sum(coeffs: &[f64], exponents: &[f64], t: f64) -> f64 {
    coeffs
        .iter()
        .zip(exponents)
        .map(|(c, k)| c * (-k * t).exp())
        .sum()
}

/// The `n`-th biorthogonal element of `fam`.
pub fn biorthogonal(fam: &ExpFamily, n: usize) -> Result<BiorthogonalElement> {
    let sys = GramSystem::new(fam)?;
    biorthogonal_from(&sys, fam, n)
}

/// All `N` biorthogonal elements sharing one factorization.
pub fn biorthogonal_family(fam: &ExpFamily) -> Result<Vec<BiorthogonalElement>> {
    let sys = GramSystem::new(fam)?;
    (0..fam.len())
        .map(|n| biorthogonal_from(&sys, fam, n))
        .collect()
}

fn biorthogonal_from(sys: &GramSystem, fam: &ExpFamily, n: usize) -> Result<BiorthogonalElement> {
    if n >= fam.len() {
        return Err(Error::IndexMismatch(format!(
            "index {n} outside a family of {}",
            fam.len()
        )));
    }
    let mut e = DVector::zeros(fam.len());
    e[n] = 1.0;
    let c = sys.solve(&e);
    let residual = sys.residual(&c, &e).amax();
    if !(residual <= BIORTHOGONALITY_TOL) {
        return Err(Error::IllConditioned {
            condition: sys.condition,
            limit: CONDITION_LIMIT,
        });
    }
    // ∫ Θₙ² = cᵀ G c = c_n when G c = eₙ.
    Ok(BiorthogonalElement {
        n,
        l2_norm: c[n].max(0.0).sqrt(),
        coeffs: c.iter().copied().collect(),
        exponents: fam.exponents(),
        residual,
        condition: sys.condition,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentResult {
    /// `f(t) = θ(T − t)`.
    pub control: Control,
    /// `|∫₀ᵀ θ e^{−λₙ t} dt − rhsₙ|` per mode by adaptive quadrature.
    pub residuals: Vec<f64>,
    pub n_modes: usize,
    pub gram_condition: f64,
    pub shift: f64,
    /// Moment right-hand sides `−ηₙ e^{−λₙ T}/zₙ'(0)`.
    pub rhs: Vec<f64>,
    /// `θ(t) = Σ_m coeffs_m e^{−exponents_m t}`.
    pub coeffs: Vec<f64>,
    pub exponents: Vec<f64>,
    /// Coefficients `ηₙ` of the initial datum.
    pub eta: Vec<f64>,
}

impl MomentResult {
    /// `θ(t)`.
    pub fn theta(&self, t: f64) -> f64 {
        exp_sum(&self.coeffs, &self.exponents, t)
    }

    /// `f(t) = θ(T − t)` at any time.
    pub fn control_at(&self, t: f64) -> f64 {
        self.theta(self.control.horizon - t)
    }
}

fn check_alignment(fam: &ExpFamily, pairs: &[Eigenpair]) -> Result<()> {
    if fam.len() != pairs.len() {
        return Err(Error::IndexMismatch(format!(
            "family has {} exponents, {} eigenpairs given",
            fam.len(),
            pairs.len()
        )));
    }
    for (i, (l, p)) in fam.lambdas.iter().zip(pairs).enumerate() {
        if (l - p.lambda).abs() > 1e-12 * p.lambda.abs().max(1.0) {
            return Err(Error::IndexMismatch(format!(
                "position {i}: family exponent {l} but eigenvalue {}",
                p.lambda
            )));
        }
    }
    Ok(())
}

/// Moment control for the grid datum `u0`, sampled at `n_samples + 1` points.
pub fn moment_control(
    u0: &State,
    fam: &ExpFamily,
    pairs: &[Eigenpair],
    params: &WentzellParams,
    n_samples: usize,
) -> Result<MomentResult> {
    check_alignment(fam, pairs)?;
    let eta = spectral::expand(u0, pairs, params, fam.horizon)?;
    moment_control_from_coeffs(&eta, fam, n_samples)
}

/// Moment control for a datum given by its coefficients `ηₙ`.
pub fn moment_control_from_coeffs(
    eta: &SpectralCoeffs,
    fam: &ExpFamily,
    n_samples: usize,
) -> Result<MomentResult> {
    check_alignment(fam, &eta.pairs)?;
    if n_samples == 0 {
        return Err(Error::InvalidConfig(
            "a control needs at least one time step".into(),
        ));
    }
    let horizon = fam.horizon;
    let rhs: Vec<f64> = eta
        .pairs
        .iter()
        .zip(&eta.coeffs)
        .map(|(p, c)| -c * (-p.lambda * horizon).exp() / p.normalized_flux_at_zero())
        .collect();
    let sys = GramSystem::new(fam)?;
    let b = DVector::from_column_slice(&rhs);
    let c = sys.solve(&b);
    let check = sys.residual(&c, &b).amax();
    let scale = b.amax().max(f64::MIN_POSITIVE);
    if !(check <= BIORTHOGONALITY_TOL * scale.max(1.0)) {
        return Err(Error::IllConditioned {
            condition: sys.condition,
            limit: CONDITION_LIMIT,
        });
    }
    let exponents: Vec<f64> = fam.exponents().iter().map(|k| k + fam.shift).collect();
    let coeffs: Vec<f64> = c.iter().copied().collect();
    let theta = |t: f64| exp_sum(&coeffs, &exponents, t);
    let residuals = fam
        .lambdas
        .iter()
        .zip(&rhs)
        .map(|(l, r)| {
            (quadrature::integrate_tight(|t| theta(t) * (-l * t).exp(), 0.0, horizon) - r).abs()
        })
        .collect();
    let control = Control::from_fn(horizon, n_samples, |t| theta(horizon - t));
    Ok(MomentResult {
        control,
        residuals,
        n_modes: fam.len(),
        gram_condition: sys.condition,
        shift: fam.shift,
        rhs,
        coeffs,
        exponents,
        eta: eta.coeffs.clone(),
    })
}

/// `|(U(T), Zₙ)_H|` for each of `pairs` after the discrete forward run driven by `f`.
pub fn verify_null_modes(
    f: &Control,
    u0: &State,
    pairs: &[Eigenpair],
    params: &WentzellParams,
    n_x: usize,
    n_t: usize,
) -> Result<Vec<f64>> {
    let grid = Grid::new(n_x)?;
    if u0.grid != grid {
        return Err(Error::ShapeMismatch(format!(
            "initial state on {} intervals, expected {n_x}",
            u0.grid.n_x
        )));
    }
    if f.n_t() != n_t {
        return Err(Error::ShapeMismatch(format!(
            "control has {} steps, expected {n_t}",
            f.n_t()
        )));
    }
    let terminal = Model::new(*params, grid).terminal_state(u0, f)?;
    pairs
        .iter()
        .map(|p| Ok(pde::inner_h(&terminal, &p.sample_normalized(grid), params)?.abs()))
        .collect()
}

/// Coefficient `(U(T), Zₙ)_H` of the exact solution driven by `f`:
/// `ηₙ e^{−λₙ T} + zₙ'(0) ∫₀ᵀ f(t) e^{−λₙ (T−t)} dt`, with `f` given pointwise.
pub fn predicted_mode_coefficient<F: Fn(f64) -> f64>(
    eta: f64,
    pair: &Eigenpair,
    horizon: f64,
    f: F,
) -> f64 {
    let forced = quadrature::integrate_tight(
        |t| f(t) * (-pair.lambda * (horizon - t)).exp(),
        0.0,
        horizon,
    );
    eta * (-pair.lambda * horizon).exp() + pair.normalized_flux_at_zero() * forced
}
