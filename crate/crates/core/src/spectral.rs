//! Eigenparameter Sturm–Liouville problem
//!
//! ```text
//! y'' + λ y = 0,   y(0) = 0,   (a λ + b) y(1) = d y'(1)
//! ```
//!
//! Positive eigenvalues are `λ = μ²` with `μ` a positive root of
//! `h(μ) = (a/d μ² + b/d) sin μ − μ cos μ`. Depending on `b/d` there is in
//! addition one non-positive eigenvalue: a hyperbolic mode when `b/d > 1`
//! and the linear mode `y = x` (`λ = 0`) when `b/d = 1`.
//!
//! Eigenpairs are indexed globally from the smallest eigenvalue, so index 0 is
//! the hyperbolic/linear mode whenever it exists.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::compensated::two_sum;
use crate::error::{Error, Result};
use crate::pde::{Grid, State};
use crate::quadrature;

/// Coefficients `(a, b, d)` of the Wentzell condition `a u_xx(1) + d u_x(1) − b u(1) = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WentzellParams {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

/// Position of the spectrum relative to zero, a function of `b/d` only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `b/d < 1`: all eigenvalues positive.
    SubCritical,
    /// `b/d = 1`: `λ₀ = 0` with eigenfunction `x`.
    Critical,
    /// `b/d > 1`: `λ₀ < 0` with a hyperbolic eigenfunction.
    SuperCritical,
}

const CRITICAL_TOL: f64 = 1e-14;

impl WentzellParams {
    pub fn new(a: f64, b: f64, d: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && d.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "non-finite coefficients ({a}, {b}, {d})"
            )));
        }
        if a * d <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "a·d must be positive, got a = {a}, d = {d}"
            )));
        }
        Ok(Self { a, b, d })
    }

    /// `b/d`, the quantity that selects the regime.
    pub fn ratio(&self) -> f64 {
        self.b / self.d
    }

    /// Boundary weight `a/d` of the inner product on `L²(0,1) ⊕ ℝ`.
    pub fn weight(&self) -> f64 {
        self.a / self.d
    }

    pub fn regime(&self) -> Regime {
        // Integer-valued inputs compare exactly; otherwise allow rounding in the ratio.
        if self.b == self.d || (self.ratio() - 1.0).abs() <= CRITICAL_TOL {
            Regime::Critical
        } else if self.ratio() < 1.0 {
            Regime::SubCritical
        } else {
            Regime::SuperCritical
        }
    }
}

/// Shape of an eigenfunction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenKind {
    /// `sin(μ x)`, `λ = μ²`.
    Trig,
    /// `e^{μx} − e^{−μx}`, `λ = −μ²`.
    Hyperbolic,
    /// `x`, `λ = 0`.
    Linear,
}

/// One eigenvalue with its (unnormalized) eigenfunction `yₙ` and `‖Yₙ‖_H`.
///
/// The root parameter is carried as the unevaluated sum `mu + mu_lo`; for large
/// indices a single `f64` cannot place `μₙ` closely enough to make `h(μₙ)` small.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub n: usize,
    pub mu: f64,
    #[serde(default)]
    pub mu_lo: f64,
    pub lambda: f64,
    pub kind: EigenKind,
    pub norm_h: f64,
}

impl Eigenpair {
    fn new(n: usize, mu: f64, mu_lo: f64, kind: EigenKind, params: &WentzellParams) -> Self {
        let lambda = match kind {
            EigenKind::Trig => mu * mu + 2.0 * mu * mu_lo,
            EigenKind::Hyperbolic => -(mu * mu + 2.0 * mu * mu_lo),
            EigenKind::Linear => 0.0,
        };
        let mut pair = Self {
            n,
            mu,
            mu_lo,
            lambda,
            kind,
            norm_h: 1.0,
        };
        pair.norm_h = norm_h(&pair, params);
        pair
    }

    /// `yₙ(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        eigenfunction_eval(self, x)
    }

    /// `zₙ(x) = yₙ(x) / ‖Yₙ‖_H`.
    pub fn eval_normalized(&self, x: f64) -> f64 {
        self.eval(x) / self.norm_h
    }

    /// `yₙ'(0)`: `μ`, `2μ` or `1` depending on the branch.
    pub fn flux_at_zero(&self) -> f64 {
        match self.kind {
            EigenKind::Trig => self.mu,
            EigenKind::Hyperbolic => 2.0 * self.mu,
            EigenKind::Linear => 1.0,
        }
    }

    /// `zₙ'(0)`.
    pub fn normalized_flux_at_zero(&self) -> f64 {
        self.flux_at_zero() / self.norm_h
    }

    /// Residual of the defining scalar equation at the carried root.
    ///
    /// Trig modes use `h(μ)`, the hyperbolic mode uses
    /// `(b − aμ²) sinh μ − dμ cosh μ`; the linear mode is exact.
    pub fn residual(&self, params: &WentzellParams) -> f64 {
        match self.kind {
            EigenKind::Trig => {
                characteristic_residual(self.mu, params)
                    + self.mu_lo * characteristic_derivative(self.mu, params)
            }
            EigenKind::Hyperbolic => {
                let mu = self.mu + self.mu_lo;
                (params.b - params.a * mu * mu) * mu.sinh() - params.d * mu * mu.cosh()
            }
            EigenKind::Linear => 0.0,
        }
    }

    /// `zₙ` sampled on `grid`, boundary component included as the last node.
    pub fn sample_normalized(&self, grid: Grid) -> State {
        State::from_fn(grid, |x| self.eval_normalized(x))
    }
}

/// `h(μ) = (a/d μ² + b/d) sin μ − μ cos μ`.
pub fn characteristic_residual(mu: f64, params: &WentzellParams) -> f64 {
    (params.weight() * mu * mu + params.ratio()) * mu.sin() - mu * mu.cos()
}

/// `h'(μ)`.
pub fn characteristic_derivative(mu: f64, params: &WentzellParams) -> f64 {
    let (s, c) = mu.sin_cos();
    let w = params.weight();
    2.0 * w * mu * s + (w * mu * mu + params.ratio()) * c - c + mu * s
}

/// `h(μ)/μ`, which removes the trivial root at zero; its limit at 0 is `b/d − 1`.
fn characteristic_over_mu(mu: f64, params: &WentzellParams) -> f64 {
    let sinc = if mu.abs() < 1e-8 {
        1.0 - mu * mu / 6.0
    } else {
        mu.sin() / mu
    };
    (params.weight() * mu * mu + params.ratio()) * sinc - mu.cos()
}

/// `[(b − aμ²) sinh μ − dμ cosh μ] / (d μ)`; its limit at 0 is `b/d − 1`.
fn hyperbolic_over_mu(mu: f64, params: &WentzellParams) -> f64 {
    let sinhc = if mu.abs() < 1e-8 {
        1.0 + mu * mu / 6.0
    } else {
        mu.sinh() / mu
    };
    (params.ratio() - params.weight() * mu * mu) * sinhc - mu.cosh()
}

fn hyperbolic_scaled(mu: f64, params: &WentzellParams) -> f64 {
    (params.ratio() - params.weight() * mu * mu) * mu.sinh() - mu * mu.cosh()
}

fn hyperbolic_scaled_derivative(mu: f64, params: &WentzellParams) -> f64 {
    let (sh, ch) = (mu.sinh(), mu.cosh());
    let w = params.weight();
    -2.0 * w * mu * sh + (params.ratio() - w * mu * mu) * ch - ch - mu * sh
}

/// Interval known to contain exactly one root `μₙ` of the characteristic equation.
pub fn trig_bracket(params: &WentzellParams, n: usize) -> (f64, f64) {
    let lo = PI * n as f64;
    let width = if params.ratio() >= 0.0 { FRAC_PI_2 } else { PI };
    (lo, lo + width)
}

const BISECTION_WIDTH: f64 = 1e-10;
const NEWTON_STEPS: usize = 5;

fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    f_lo: f64,
    index: usize,
) -> Result<f64> {
    let f_hi = f(hi);
    if !(f_lo.signum() * f_hi.signum() < 0.0) {
        return Err(Error::BracketFailure { index, lo, hi });
    }
    let lo_sign = f_lo.signum();
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton polishing of a bracketed root, accumulating the correction in a
/// second word so the root is resolved below the `f64` spacing.
fn newton_polish<F, D>(f: F, df: D, start: f64, bracket: (f64, f64)) -> (f64, f64)
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut hi, mut lo) = (start, 0.0_f64);
    for _ in 0..NEWTON_STEPS {
        let slope = df(hi);
        let residual = f(hi) + lo * slope;
        let step = residual / slope;
        if !step.is_finite() {
            break;
        }
        let (s, e) = two_sum(hi, lo - step);
        if !(s > bracket.0 && s < bracket.1) {
            break;
        }
        hi = s;
        lo = e;
        if step.abs() <= 1e-3 * f64::EPSILON * hi.abs() {
            break;
        }
    }
    (hi, lo)
}

fn trig_root(params: &WentzellParams, n: usize) -> Result<(f64, f64)> {
    let (lo, hi) = trig_bracket(params, n);
    let start = if n == 0 {
        bisect(
            |m| characteristic_over_mu(m, params),
            lo,
            hi,
            params.ratio() - 1.0,
            n,
        )?
    } else {
        bisect(
            |m| characteristic_residual(m, params),
            lo,
            hi,
            characteristic_residual(lo, params),
            n,
        )?
    };
    Ok(newton_polish(
        |m| characteristic_residual(m, params),
        |m| characteristic_derivative(m, params),
        start,
        (lo, hi),
    ))
}

/// Trig eigenpairs with global index `≤ n_max`.
///
/// In the sub-critical regime the trig branch starts at index 0, otherwise at 1.
pub fn positive_eigenvalues(params: &WentzellParams, n_max: usize) -> Result<Vec<Eigenpair>> {
    let first = match params.regime() {
        Regime::SubCritical => 0,
        Regime::Critical | Regime::SuperCritical => 1,
    };
    (first..=n_max)
        .map(|n| {
            let (mu, mu_lo) = trig_root(params, n)?;
            Ok(Eigenpair::new(n, mu, mu_lo, EigenKind::Trig, params))
        })
        .collect()
}

const HYPERBOLIC_SEARCH_CAP: f64 = 512.0;

/// The eigenpair with `λ₀ ≤ 0`, when the regime has one.
pub fn nonpositive_eigenvalue(params: &WentzellParams) -> Result<Option<Eigenpair>> {
    match params.regime() {
        Regime::SubCritical => Ok(None),
        Regime::Critical => Ok(Some(Eigenpair::new(0, 0.0, 0.0, EigenKind::Linear, params))),
        Regime::SuperCritical => {
            let at_zero = params.ratio() - 1.0;
            let mut hi = 1.0;
            while hyperbolic_over_mu(hi, params).signum() == at_zero.signum() {
                hi *= 2.0;
                if hi > HYPERBOLIC_SEARCH_CAP {
                    return Err(Error::BracketFailure {
                        index: 0,
                        lo: 0.0,
                        hi,
                    });
                }
            }
            let start = bisect(|m| hyperbolic_over_mu(m, params), 0.0, hi, at_zero, 0)?;
            let (mu, mu_lo) = newton_polish(
                |m| hyperbolic_scaled(m, params),
                |m| hyperbolic_scaled_derivative(m, params),
                start,
                (0.0, hi),
            );
            Ok(Some(Eigenpair::new(
                0,
                mu,
                mu_lo,
                EigenKind::Hyperbolic,
                params,
            )))
        }
    }
}

/// The first `count` eigenpairs, indices `0..count`, in increasing eigenvalue order.
pub fn spectrum(params: &WentzellParams, count: usize) -> Result<Vec<Eigenpair>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut pairs: Vec<Eigenpair> = nonpositive_eigenvalue(params)?.into_iter().collect();
    pairs.extend(positive_eigenvalues(params, count - 1)?);
    Ok(pairs)
}

/// `yₙ(x)` for the pair's branch.
pub fn eigenfunction_eval(pair: &Eigenpair, x: f64) -> f64 {
    match pair.kind {
        EigenKind::Trig => (pair.mu * x).sin(),
        EigenKind::Hyperbolic => 2.0 * (pair.mu * x).sinh(),
        EigenKind::Linear => x,
    }
}

/// `‖Yₙ‖_H = sqrt(∫₀¹ yₙ² dx + (a/d) yₙ(1)²)`, in closed form.
pub fn norm_h(pair: &Eigenpair, params: &WentzellParams) -> f64 {
    let mu = pair.mu;
    let interior = match pair.kind {
        EigenKind::Trig => 0.5 - (2.0 * mu).sin() / (4.0 * mu),
        EigenKind::Hyperbolic => (2.0 * mu).sinh() / mu - 2.0,
        EigenKind::Linear => 1.0 / 3.0,
    };
    let y1 = eigenfunction_eval(pair, 1.0);
    (interior + params.weight() * y1 * y1).sqrt()
}

/// Orientation of a spectral series in time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// `Σ ηₙ e^{−λₙ t} Zₙ`: free evolution of the forward problem.
    Forward,
    /// `Σ βₙ e^{−λₙ (T−t)} Zₙ`: the backward adjoint problem with terminal datum at `T`.
    AdjointBackward,
}

/// Coefficients of a datum in the orthonormal basis `{Zₙ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoeffs {
    pub params: WentzellParams,
    pub horizon: f64,
    pub pairs: Vec<Eigenpair>,
    pub coeffs: Vec<f64>,
}

impl SpectralCoeffs {
    pub fn new(
        params: WentzellParams,
        horizon: f64,
        pairs: Vec<Eigenpair>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        if pairs.len() != coeffs.len() {
            return Err(Error::IndexMismatch(format!(
                "{} eigenpairs but {} coefficients",
                pairs.len(),
                coeffs.len()
            )));
        }
        if pairs.windows(2).any(|w| w[0].n >= w[1].n) {
            return Err(Error::IndexMismatch(
                "eigenpair indices must be distinct and sorted".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(
                "non-finite spectral coefficient".into(),
            ));
        }
        Ok(Self {
            params,
            horizon,
            pairs,
            coeffs,
        })
    }

    /// Single-mode series `coeff · Z_k`.
    pub fn single(params: WentzellParams, horizon: f64, pair: Eigenpair, coeff: f64) -> Self {
        Self {
            params,
            horizon,
            pairs: vec![pair],
            coeffs: vec![coeff],
        }
    }

    fn decay(&self, t: f64, direction: Direction) -> impl Iterator<Item = f64> + '_ {
        let elapsed = match direction {
            Direction::Forward => t,
            Direction::AdjointBackward => self.horizon - t,
        };
        self.pairs
            .iter()
            .zip(&self.coeffs)
            .map(move |(p, c)| c * (-p.lambda * elapsed).exp())
    }

    /// Pointwise value of the series at `(x, t)`.
    pub fn eval(&self, x: f64, t: f64, direction: Direction) -> f64 {
        self.decay(t, direction)
            .zip(&self.pairs)
            .map(|(c, p)| c * p.eval_normalized(x))
            .sum()
    }

    /// Coefficients after free evolution by `t`.
    pub fn evolve(&self, t: f64) -> SpectralCoeffs {
        SpectralCoeffs {
            coeffs: self.decay(t, Direction::Forward).collect(),
            ..self.clone()
        }
    }

    /// `‖Σ cₙ Zₙ‖_H` by Parseval.
    pub fn norm_h(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;

/// Project a grid state onto `pairs`: `ηₙ = (U, Zₙ)_H`.
///
/// The integral uses composite Simpson on the state grid; the boundary term
/// `(a/d) u(1) zₙ(1)` is added exactly.
pub fn expand(
    u0: &State,
    pairs: &[Eigenpair],
    params: &WentzellParams,
    horizon: f64,
) -> Result<SpectralCoeffs> {
    let grid = u0.grid;
    let dx = grid.dx();
    for p in pairs.iter().filter(|p| p.kind == EigenKind::Trig) {
        let ppw = 2.0 * PI / (p.mu * dx);
        if ppw < MIN_POINTS_PER_WAVELENGTH {
            return Err(Error::GridTooCoarse {
                n_x: grid.n_x,
                index: p.n,
                points_per_wavelength: ppw,
            });
        }
    }
    let w = quadrature::simpson_weights(grid.n_x, dx);
    let xs = grid.nodes();
    let u1 = u0.boundary();
    let coeffs = pairs
        .iter()
        .map(|p| {
            let z: Vec<f64> = xs.iter().map(|&x| p.eval_normalized(x)).collect();
            quadrature::weighted_dot(&w, &u0.values, &z)
                + params.weight() * u1 * p.eval_normalized(1.0)
        })
        .collect();
    SpectralCoeffs::new(*params, horizon, pairs.to_vec(), coeffs)
}

/// Project a datum given as a function `u` on `[0,1]` plus boundary value `u1`,
/// integrating with adaptive Gauss–Kronrod.
pub fn expand_function<F: Fn(f64) -> f64>(
    u: F,
    u1: f64,
    pairs: &[Eigenpair],
    params: &WentzellParams,
    horizon: f64,
) -> Result<SpectralCoeffs> {
    let coeffs = pairs
        .iter()
        .map(|p| {
            quadrature::integrate_tight(|x| u(x) * p.eval_normalized(x), 0.0, 1.0)
                + params.weight() * u1 * p.eval_normalized(1.0)
        })
        .collect();
    SpectralCoeffs::new(*params, horizon, pairs.to_vec(), coeffs)
}

/// The series sampled on `grid` at time `t`.
pub fn spectral_solution(
    coeffs: &SpectralCoeffs,
    t: f64,
    direction: Direction,
    grid: Grid,
) -> State {
    let amplitudes: Vec<f64> = coeffs.decay(t, direction).collect();
    State::from_fn(grid, |x| {
        amplitudes
            .iter()
            .zip(&coeffs.pairs)
            .map(|(c, p)| c * p.eval_normalized(x))
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_i() -> WentzellParams {
        WentzellParams::new(1.0, 1.0, 3.0).unwrap()
    }

    fn case_ii() -> WentzellParams {
        WentzellParams::new(1.0, 1.0, 1.0).unwrap()
    }

    fn case_iii() -> WentzellParams {
        WentzellParams::new(1.0, 3.0, 1.0).unwrap()
    }

    #[test]
    fn params_reject_nonpositive_ad() {
        assert!(WentzellParams::new(1.0, 1.0, -1.0).is_err());
        assert!(WentzellParams::new(0.0, 1.0, 1.0).is_err());
        assert!(WentzellParams::new(-1.0, 2.0, -3.0).is_ok());
    }

    #[test]
    fn regimes() {
        assert_eq!(case_i().regime(), Regime::SubCritical);
        assert_eq!(case_ii().regime(), Regime::Critical);
        assert_eq!(case_iii().regime(), Regime::SuperCritical);
        assert_eq!(
            WentzellParams::new(1.0, 0.1 * 3.0, 0.3).unwrap().regime(),
            Regime::Critical
        );
    }

    #[test]
    fn residual_trivial_values() {
        assert_eq!(characteristic_residual(0.0, &case_i()), 0.0);
        let r = characteristic_residual(PI, &case_i());
        assert!((r - PI).abs() < 1e-14);
    }

    #[test]
    fn first_root_case_i() {
        let p = case_i();
        let pairs = positive_eigenvalues(&p, 1).unwrap();
        assert_eq!(pairs.len(), 2);
        let mu0 = pairs[0];
        assert!(mu0.mu > 0.0 && mu0.mu < FRAC_PI_2);
        assert!(characteristic_residual(mu0.mu, &p).abs() <= 1e-12);
        let mu1 = pairs[1];
        assert!(mu1.mu > PI && mu1.mu < 1.5 * PI);
        assert!(characteristic_residual(mu1.mu, &p).abs() < 1e-12);
    }

    #[test]
    fn brackets_case_ii() {
        let pairs = positive_eigenvalues(&case_ii(), 3).unwrap();
        assert_eq!(pairs.iter().map(|p| p.n).collect::<Vec<_>>(), vec![1, 2, 3]);
        for p in &pairs {
            let n = p.n as f64;
            assert!(PI * n < p.mu && p.mu < PI * n + FRAC_PI_2);
        }
    }

    #[test]
    fn negative_ratio_uses_full_bracket() {
        let p = WentzellParams::new(1.0, -2.0, 1.0).unwrap();
        for pair in positive_eigenvalues(&p, 6).unwrap() {
            let (lo, hi) = trig_bracket(&p, pair.n);
            assert!((hi - lo - PI).abs() < 1e-15);
            assert!(lo < pair.mu && pair.mu < hi);
            assert!(pair.residual(&p).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotic_root_at_index_100() {
        let p = case_i();
        let pairs = positive_eigenvalues(&p, 100).unwrap();
        let mu = pairs[100].mu;
        let n = 100.0;
        assert!((mu - (PI * n + 3.0 / (PI * n))).abs() <= 1e-4);
    }

    #[test]
    fn nonpositive_modes() {
        assert!(nonpositive_eigenvalue(&case_i()).unwrap().is_none());
        let lin = nonpositive_eigenvalue(&case_ii()).unwrap().unwrap();
        assert_eq!(lin.kind, EigenKind::Linear);
        assert_eq!(lin.lambda, 0.0);
        let hyp = nonpositive_eigenvalue(&case_iii()).unwrap().unwrap();
        assert_eq!(hyp.kind, EigenKind::Hyperbolic);
        let mu = hyp.mu;
        assert!(mu > 0.0);
        assert!(((3.0 - mu * mu) * mu.sinh() - mu * mu.cosh()).abs() <= 1e-12);
        assert!(hyp.lambda < 0.0);
    }

    #[test]
    fn eigenfunction_values() {
        let hypothetical = Eigenpair {
            n: 0,
            mu: FRAC_PI_2,
            mu_lo: 0.0,
            lambda: FRAC_PI_2 * FRAC_PI_2,
            kind: EigenKind::Trig,
            norm_h: 1.0,
        };
        assert!((eigenfunction_eval(&hypothetical, 1.0) - 1.0).abs() < 1e-15);
        for p in [case_i(), case_ii(), case_iii()] {
            for pair in spectrum(&p, 5).unwrap() {
                assert_eq!(pair.eval(0.0), 0.0);
            }
        }
        let lin = nonpositive_eigenvalue(&case_ii()).unwrap().unwrap();
        assert!((lin.eval(0.7) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn norm_closed_forms() {
        let lin = nonpositive_eigenvalue(&case_ii()).unwrap().unwrap();
        assert!((lin.norm_h - (4.0_f64 / 3.0).sqrt()).abs() < 1e-15);

        let hypothetical = Eigenpair {
            n: 1,
            mu: 2.0 * PI,
            mu_lo: 0.0,
            lambda: 4.0 * PI * PI,
            kind: EigenKind::Trig,
            norm_h: 1.0,
        };
        assert!((norm_h(&hypothetical, &case_i()) - 0.5_f64.sqrt()).abs() < 1e-15);

        let p = case_i();
        let mu1 = positive_eigenvalues(&p, 1).unwrap()[1];
        let quad = quadrature::integrate_tight(|x| mu1.eval(x).powi(2), 0.0, 1.0)
            + p.weight() * mu1.eval(1.0).powi(2);
        assert!((quad.sqrt() - mu1.norm_h).abs() < 1e-10);
    }

    #[test]
    fn spectrum_counts_per_regime() {
        for (p, nonpos) in [(case_i(), 0), (case_ii(), 1), (case_iii(), 1)] {
            let pairs = spectrum(&p, 8).unwrap();
            assert_eq!(pairs.len(), 8);
            assert_eq!(pairs.iter().filter(|e| e.lambda <= 0.0).count(), nonpos);
            assert!(pairs.windows(2).all(|w| w[0].lambda < w[1].lambda));
            assert!(pairs.iter().enumerate().all(|(i, e)| e.n == i));
        }
    }

    #[test]
    fn expand_zero_and_single_mode() {
        let p = case_i();
        let pairs = spectrum(&p, 6).unwrap();
        let grid = Grid::new(400).unwrap();
        let zero = State::zeros(grid);
        let c = expand(&zero, &pairs, &p, 1.0).unwrap();
        assert!(c.coeffs.iter().all(|&v| v == 0.0));

        let k = 2;
        let zk = pairs[k].sample_normalized(grid);
        let c = expand(&zk, &pairs, &p, 1.0).unwrap();
        for (i, v) in c.coeffs.iter().enumerate() {
            let target = if i == k { 1.0 } else { 0.0 };
            assert!((v - target).abs() < 1e-8, "mode {i}: {v}");
        }
    }

    #[test]
    fn expand_rejects_coarse_grid() {
        let p = case_i();
        let pairs = spectrum(&p, 10).unwrap();
        let grid = Grid::new(20).unwrap();
        let err = expand(&State::zeros(grid), &pairs, &p, 1.0).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
    }

    #[test]
    fn spectral_solution_endpoints() {
        let p = case_i();
        let pairs = spectrum(&p, 4).unwrap();
        let grid = Grid::new(50).unwrap();
        let coeffs =
            SpectralCoeffs::new(p, 1.0, pairs.clone(), vec![0.3, -0.2, 0.1, 0.05]).unwrap();
        let at0 = spectral_solution(&coeffs, 0.0, Direction::Forward, grid);
        let at_end = spectral_solution(&coeffs, 1.0, Direction::AdjointBackward, grid);
        for (j, &x) in grid.nodes().iter().enumerate() {
            let direct: f64 = pairs
                .iter()
                .zip(&coeffs.coeffs)
                .map(|(e, c)| c * e.eval_normalized(x))
                .sum();
            assert!((at0.values[j] - direct).abs() < 1e-14);
            assert!((at_end.values[j] - direct).abs() < 1e-14);
        }
        let single = SpectralCoeffs::single(p, 1.0, pairs[1], 0.7);
        let end = spectral_solution(&single, 1.0, Direction::Forward, grid);
        let scale = 0.7 * (-pairs[1].lambda).exp();
        for (j, &x) in grid.nodes().iter().enumerate() {
            assert!((end.values[j] - scale * pairs[1].eval_normalized(x)).abs() < 1e-15);
        }
    }
}
