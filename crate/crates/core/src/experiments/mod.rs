//! Experiment harness: case presets, end-to-end runs of both control
//! methods, cross-validation, and discretization studies.

mod convergence;
mod run;

use std::f64::consts::{PI, SQRT_2};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hum::{CgInnerProduct, HumConfig};
use crate::pde::{Grid, SchemeOptions, State};
use crate::spectral::{self, Regime, SpectralCoeffs, WentzellParams};

pub use convergence::{convergence_study, mode_drift, ConvergenceRow, ConvergenceTable};
pub use run::{
    compare_controls, compare_controls_from, run_case, run_cases, Comparison, ControlStats,
    HumSummary, ModeRow, MomentSummary, RunReport, Timings, UncontrolledSummary, SCHEMA_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseId {
    /// `a = b = 1, d = 3`, `α = 0`.
    SubCritical,
    /// `a = b = d = 1`, `α = −1`.
    Critical,
    /// `a = 1, b = 3, d = 1`, `α = 0`.
    SuperCritical,
    Custom,
}

impl CaseId {
    pub fn slug(&self) -> &'static str {
        match self {
            CaseId::SubCritical => "sub",
            CaseId::Critical => "crit",
            CaseId::SuperCritical => "super",
            CaseId::Custom => "custom",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        match s {
            "sub" => Some(CaseId::SubCritical),
            "crit" => Some(CaseId::Critical),
            "super" => Some(CaseId::SuperCritical),
            "custom" => Some(CaseId::Custom),
            _ => None,
        }
    }

    /// `(a, b, d)` of the preset; `None` for [`CaseId::Custom`].
    pub fn preset_params(&self) -> Option<WentzellParams> {
        let (a, b, d) = match self {
            CaseId::SubCritical => (1.0, 1.0, 3.0),
            CaseId::Critical => (1.0, 1.0, 1.0),
            CaseId::SuperCritical => (1.0, 3.0, 1.0),
            CaseId::Custom => return None,
        };
        Some(WentzellParams { a, b, d })
    }
}

/// Shift of the elliptic problems: `−1` when `b/d = 1` (zero is then an
/// eigenvalue), `0` otherwise.
pub fn default_alpha(params: &WentzellParams) -> f64 {
    if params.regime() == Regime::Critical {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hum,
    Moment,
    #[default]
    Both,
}

impl Method {
    pub fn runs_hum(&self) -> bool {
        matches!(self, Method::Hum | Method::Both)
    }

    pub fn runs_moment(&self) -> bool {
        matches!(self, Method::Moment | Method::Both)
    }
}

/// Grid label carried into reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    /// `N_x = 25` with seven CG iterations, as in the published figures.
    Reproduction,
    /// `N_x = 200`.
    #[default]
    Accuracy,
    Custom,
}

pub const ACCURACY_NX: usize = 200;
pub const REPRODUCTION_NX: usize = 25;
pub const REPRODUCTION_ITERATIONS: usize = 7;
/// Time steps per spatial interval when `n_t` is not given.
pub const STEPS_PER_INTERVAL: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub case_id: CaseId,
    pub params: WentzellParams,
    pub n_x: usize,
    pub n_t: usize,
    pub horizon: f64,
    pub eps: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_modes: usize,
    pub out_dir: PathBuf,
    pub method: Method,
    pub resolution: Resolution,
    pub inner: CgInnerProduct,
    pub scheme: SchemeOptions,
}

impl CaseConfig {
    /// Preset at the accuracy resolution. [`CaseId::Custom`] starts from the
    /// sub-critical coefficients and expects them to be overwritten.
    pub fn preset(case_id: CaseId) -> Self {
        let params = case_id
            .preset_params()
            .unwrap_or_else(|| CaseId::SubCritical.preset_params().expect("preset"));
        Self {
            case_id,
            params,
            n_x: ACCURACY_NX,
            n_t: STEPS_PER_INTERVAL * ACCURACY_NX,
            horizon: 1.0,
            eps: 1e-3,
            alpha: default_alpha(&params),
            tol: 1e-3,
            max_iter: 5000,
            n_modes: 6,
            out_dir: PathBuf::from("out").join(case_id.slug()),
            method: Method::Both,
            resolution: Resolution::Accuracy,
            inner: CgInnerProduct::default(),
            scheme: SchemeOptions::default(),
        }
    }

    pub fn custom(params: WentzellParams) -> Self {
        Self {
            params,
            alpha: default_alpha(&params),
            ..Self::preset(CaseId::Custom)
        }
    }

    /// Pins `N_x = 25`, `T = 1`, `ε = 1e−3` and exactly seven CG iterations from `V⁰ = 0`.
    pub fn reproduce_paper(mut self) -> Self {
        self.n_x = REPRODUCTION_NX;
        self.n_t = STEPS_PER_INTERVAL * REPRODUCTION_NX;
        self.horizon = 1.0;
        self.eps = 1e-3;
        self.max_iter = REPRODUCTION_ITERATIONS;
        self.tol = 1e-12;
        self.resolution = Resolution::Reproduction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.case_id.preset_params() {
            if p != self.params {
                return Err(Error::InvalidConfig(format!(
                    "preset {} pins (a, b, d) = ({}, {}, {}); use the custom case for other values",
                    self.case_id.slug(),
                    p.a,
                    p.b,
                    p.d
                )));
            }
            if self.alpha != default_alpha(&p) {
                return Err(Error::InvalidConfig(format!(
                    "preset {} pins alpha = {}",
                    self.case_id.slug(),
                    default_alpha(&p)
                )));
            }
        }
        WentzellParams::new(self.params.a, self.params.b, self.params.d)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Grid::new(self.n_x)?;
        if self.n_t == 0 {
            return Err(Error::InvalidConfig("n_t must be positive".into()));
        }
        if self.n_modes == 0 {
            return Err(Error::InvalidConfig("at least one mode is required".into()));
        }
        self.hum_config()
            .validate(&self.params)
            .map_err(|e| match e {
                Error::InvalidConfig(_) => e,
                other => Error::InvalidConfig(other.to_string()),
            })
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_x)
    }

    pub fn hum_config(&self) -> HumConfig {
        let mut cfg = HumConfig::new(
            self.eps,
            self.alpha,
            self.tol,
            self.max_iter,
            self.n_x,
            self.n_t,
            self.horizon,
        );
        cfg.inner = self.inner;
        cfg.scheme = self.scheme;
        cfg
    }

    pub fn initial_state(&self) -> Result<State> {
        Ok(default_initial_state(self.grid()?))
    }
}

/// `u₀(x) = √2 sin(πx)`, `u₀,₁ = 0`.
pub fn default_initial_state(grid: Grid) -> State {
    let mut s = State::from_fn(grid, |x| SQRT_2 * (PI * x).sin());
    let n = grid.n_x;
    s.values[n] = 0.0;
    s
}

/// Spectral series of [`default_initial_state`] over the first `modes` eigenpairs.
pub fn default_initial_series(
    params: &WentzellParams,
    horizon: f64,
    modes: usize,
) -> Result<SpectralCoeffs> {
    let pairs = spectral::spectrum(params, modes)?;
    spectral::expand_function(|x| SQRT_2 * (PI * x).sin(), 0.0, &pairs, params, horizon)
}

/// Every field optional, for layering a JSON file and command-line flags over a preset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub case: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub d: Option<f64>,
    pub n_x: Option<usize>,
    pub n_t: Option<usize>,
    pub horizon: Option<f64>,
    pub eps: Option<f64>,
    pub alpha: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub n_modes: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub method: Option<Method>,
    pub inner: Option<CgInnerProduct>,
    pub scheme: Option<SchemeOptions>,
    #[serde(default)]
    pub reproduce_paper: bool,
}

impl ConfigOverrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// `self` with every field set in `other` replaced.
    pub fn merged(self, other: ConfigOverrides) -> Self {
        Self {
            case: other.case.or(self.case),
            a: other.a.or(self.a),
            b: other.b.or(self.b),
            d: other.d.or(self.d),
            n_x: other.n_x.or(self.n_x),
            n_t: other.n_t.or(self.n_t),
            horizon: other.horizon.or(self.horizon),
            eps: other.eps.or(self.eps),
            alpha: other.alpha.or(self.alpha),
            tol: other.tol.or(self.tol),
            max_iter: other.max_iter.or(self.max_iter),
            n_modes: other.n_modes.or(self.n_modes),
            out_dir: other.out_dir.or(self.out_dir),
            method: other.method.or(self.method),
            inner: other.inner.or(self.inner),
            scheme: other.scheme.or(self.scheme),
            reproduce_paper: other.reproduce_paper || self.reproduce_paper,
        }
    }

    /// Resolve against the preset named by `case` (default `sub`).
    ///
    /// Coefficients on a preset case switch it to custom; `n_t` defaults to
    /// ten steps per spatial interval.
    pub fn resolve(&self) -> Result<CaseConfig> {
        let slug = self.case.as_deref().unwrap_or("sub");
        let mut case_id = CaseId::from_slug(slug)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown case {slug:?}")))?;
        let coeffs_given = self.a.is_some() || self.b.is_some() || self.d.is_some();
        if case_id == CaseId::Custom && !(self.a.is_some() && self.b.is_some() && self.d.is_some())
        {
            return Err(Error::InvalidConfig(
                "the custom case needs a, b and d".into(),
            ));
        }
        let base = case_id.preset_params().unwrap_or(WentzellParams {
            a: 1.0,
            b: 1.0,
            d: 3.0,
        });
        let params = WentzellParams::new(
            self.a.unwrap_or(base.a),
            self.b.unwrap_or(base.b),
            self.d.unwrap_or(base.d),
        )
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if coeffs_given && case_id.preset_params() != Some(params) {
            case_id = CaseId::Custom;
        }
        let mut cfg = if case_id == CaseId::Custom {
            CaseConfig::custom(params)
        } else {
            CaseConfig::preset(case_id)
        };
        if self.reproduce_paper {
            cfg = cfg.reproduce_paper();
        }
        let mut resized = false;
        if let Some(n) = self.n_x {
            resized = n != cfg.n_x;
            cfg.n_x = n;
            cfg.n_t = STEPS_PER_INTERVAL * n;
        }
        if let Some(v) = self.n_t {
            resized |= v != cfg.n_t;
            cfg.n_t = v;
        }
        if resized && !self.reproduce_paper {
            cfg.resolution = Resolution::Custom;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.alpha {
            if case_id != CaseId::Custom && v != cfg.alpha {
                cfg.case_id = CaseId::Custom;
            }
            cfg.alpha = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.n_modes {
            cfg.n_modes = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.inner {
            cfg.inner = v;
        }
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
