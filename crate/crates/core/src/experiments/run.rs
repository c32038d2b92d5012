use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hum::{self, HumResult, StopReason};
use crate::moment::{self, ExpFamily, MomentResult};
use crate::pde::{self, Control, Model, State, Trajectory};
use crate::spectral::{self, Eigenpair};

use super::{default_initial_series, CaseConfig};

pub const SCHEMA_VERSION: &str = "1";

/// Modes beyond the controlled ones listed in per-mode tables.
const EXTRA_MODES: usize = 2;
/// Modes in the series used as the free-decay oracle.
const ORACLE_MODES: usize = 40;
/// Time levels written per trajectory file.
const TRAJECTORY_LEVELS: usize = 100;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControlStats {
    pub l2_norm: f64,
    pub min: f64,
    pub max: f64,
    /// Length of `{t : f(t) < 0}` on the sampling grid.
    pub negative_measure: f64,
}

impl ControlStats {
    pub fn of(f: &Control) -> Self {
        let dt = f.dt();
        let negative_steps = f
            .samples
            .windows(2)
            .filter(|w| w[0] < 0.0 && w[1] < 0.0)
            .count();
        Self {
            l2_norm: f.l2_norm(),
            min: f.min(),
            max: f.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            negative_measure: negative_steps as f64 * dt,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UncontrolledSummary {
    pub terminal_norm_h: f64,
    /// `None` when the shift makes the pairing negative.
    pub terminal_norm_hminus1: Option<f64>,
    /// Free decay of the spectral series of `U₀`.
    pub oracle_norm_h: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HumSummary {
    pub iterations: usize,
    pub stop: StopReason,
    pub final_residual: f64,
    pub terminal_norm_h: f64,
    pub terminal_norm_hminus1: Option<f64>,
    pub j_eps: f64,
    pub control: ControlStats,
    pub residuals: Vec<f64>,
}

impl HumSummary {
    fn of(r: &HumResult) -> Self {
        Self {
            iterations: r.iterations,
            stop: r.stop,
            final_residual: *r.residuals.last().expect("non-empty"),
            terminal_norm_h: r.terminal_norm_h,
            terminal_norm_hminus1: r.terminal_norm_hminus1,
            j_eps: r.j_eps,
            control: ControlStats::of(&r.control),
            residuals: r.residuals.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentSummary {
    pub n_modes: usize,
    pub gram_condition: f64,
    pub shift: f64,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub terminal_norm_h: f64,
    /// `|(U(T), Zₙ)_H|` of the discrete run for the controlled modes.
    pub null_modes: Vec<f64>,
    pub control: ControlStats,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeRow {
    pub n: usize,
    pub lambda: f64,
    pub uncontrolled: f64,
    pub hum: Option<f64>,
    pub moment: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub l2_distance: f64,
    pub hum_terminal_norm_h: f64,
    pub moment_terminal_norm_h: f64,
    pub uncontrolled_terminal_norm_h: f64,
    pub hum_control_l2: f64,
    pub moment_control_l2: f64,
    pub modes: Vec<ModeRow>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timings {
    pub uncontrolled_s: f64,
    pub hum_s: Option<f64>,
    pub moment_s: Option<f64>,
    pub total_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: String,
    pub config: CaseConfig,
    pub uncontrolled: UncontrolledSummary,
    pub hum: Option<HumSummary>,
    pub moment: Option<MomentSummary>,
    pub comparison: Option<Comparison>,
    pub modes: Vec<ModeRow>,
    /// Output files relative to `config.out_dir`.
    pub files: Vec<PathBuf>,
    /// Solver failures; the corresponding sections are absent.
    pub errors: Vec<String>,
    pub timings: Timings,
}

impl RunReport {
    pub fn has_errors(&self) -> bool {
        !self.errors.is_empty()
    }
}

struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(PathBuf::from(name));
        self.dir.join(name)
    }

    fn trajectory(&mut self, name: &str, traj: &Trajectory) -> Result<()> {
        let stride = (traj.n_t() / TRAJECTORY_LEVELS).max(1);
        pde::write_trajectory_csv(&self.path(name), traj, stride)
    }

    fn control(&mut self, name: &str, f: &Control) -> Result<()> {
        pde::write_control_csv(&self.path(name), f)
    }

    fn residuals(&mut self, name: &str, residuals: &[f64]) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "iteration,residual")?;
            for (k, r) in residuals.iter().enumerate() {
                writeln!(w, "{k},{r:.16e}")?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(&path, e))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), value)?;
        Ok(())
    }
}

fn mode_coefficients(terminal: &State, pairs: &[Eigenpair], cfg: &CaseConfig) -> Result<Vec<f64>> {
    let grid = terminal.grid;
    pairs
        .iter()
        .map(|p| pde::inner_h(terminal, &p.sample_normalized(grid), &cfg.params))
        .collect()
}

fn oracle_norm(cfg: &CaseConfig) -> Result<f64> {
    Ok(
        default_initial_series(&cfg.params, cfg.horizon, ORACLE_MODES)?
            .evolve(cfg.horizon)
            .norm_h(),
    )
}

fn run_moment(cfg: &CaseConfig, u0: &State, pairs: &[Eigenpair]) -> Result<MomentResult> {
    let controlled = &pairs[..cfg.n_modes];
    let fam = ExpFamily::from_pairs(controlled, cfg.horizon)?;
    moment::moment_control(u0, &fam, controlled, &cfg.params, cfg.n_t)
}

/// Uncontrolled, HUM-controlled and moment-controlled runs of one case, with
/// all plot data and `report.json` written to `cfg.out_dir`.
///
/// Solver failures are recorded in [`RunReport::errors`]; filesystem and
/// configuration errors abort.
pub fn run_case(cfg: &CaseConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = Outputs::new(&cfg.out_dir)?;
    let grid = cfg.grid()?;
    let model = Model::with_options(cfg.params, grid, cfg.scheme);
    let u0 = cfg.initial_state()?;
    let mut errors = Vec::new();
    let mut timings = Timings::default();

    let t = Instant::now();
    let free = model.solve_forward(&u0, &Control::zeros(cfg.horizon, cfg.n_t))?;
    let uncontrolled = UncontrolledSummary {
        terminal_norm_h: model.norm_h(free.terminal()),
        terminal_norm_hminus1: model.norm_hminus1(free.terminal(), cfg.alpha).ok(),
        oracle_norm_h: oracle_norm(cfg)?,
    };
    out.trajectory("uncontrolled_trajectory.csv", &free)?;
    timings.uncontrolled_s = t.elapsed().as_secs_f64();

    let pairs = spectral::spectrum(&cfg.params, cfg.n_modes + EXTRA_MODES)?;
    let mut modes: Vec<ModeRow> = pairs
        .iter()
        .zip(mode_coefficients(free.terminal(), &pairs, cfg)?)
        .map(|(p, c)| ModeRow {
            n: p.n,
            lambda: p.lambda,
            uncontrolled: c.abs(),
            hum: None,
            moment: None,
        })
        .collect();

    let mut hum_run = None;
    if cfg.method.runs_hum() {
        let t = Instant::now();
        match hum::hum_cg(&u0, &cfg.hum_config(), &cfg.params) {
            Ok(res) => {
                let traj = model.solve_forward(&u0, &res.control)?;
                for (row, c) in
                    modes
                        .iter_mut()
                        .zip(mode_coefficients(traj.terminal(), &pairs, cfg)?)
                {
                    row.hum = Some(c.abs());
                }
                out.control("hum_control.csv", &res.control)?;
                out.residuals("hum_residuals.csv", &res.residuals)?;
                out.trajectory("hum_trajectory.csv", &traj)?;
                hum_run = Some(res);
            }
            Err(e) => errors.push(format!("hum: {e}")),
        }
        timings.hum_s = Some(t.elapsed().as_secs_f64());
    }

    let mut moment_run = None;
    if cfg.method.runs_moment() {
        let t = Instant::now();
        match run_moment(cfg, &u0, &pairs) {
            Ok(res) => {
                let traj = model.solve_forward(&u0, &res.control)?;
                let coeffs = mode_coefficients(traj.terminal(), &pairs, cfg)?;
                for (row, c) in modes.iter_mut().zip(&coeffs) {
                    row.moment = Some(c.abs());
                }
                out.control("moment_control.csv", &res.control)?;
                out.trajectory("moment_trajectory.csv", &traj)?;
                let summary = MomentSummary {
                    n_modes: res.n_modes,
                    gram_condition: res.gram_condition,
                    shift: res.shift,
                    max_residual: res.residuals.iter().copied().fold(0.0, f64::max),
                    residuals: res.residuals.clone(),
                    terminal_norm_h: model.norm_h(traj.terminal()),
                    null_modes: coeffs[..cfg.n_modes].iter().map(|c| c.abs()).collect(),
                    control: ControlStats::of(&res.control),
                };
                moment_run = Some((res, summary));
            }
            Err(e) => errors.push(format!("moment: {e}")),
        }
        timings.moment_s = Some(t.elapsed().as_secs_f64());
    }

    let comparison = match (&hum_run, &moment_run) {
        (Some(h), Some((m, ms))) => Some(Comparison {
            l2_distance: h.control.axpy(-1.0, &m.control).l2_norm(),
            hum_terminal_norm_h: h.terminal_norm_h,
            moment_terminal_norm_h: ms.terminal_norm_h,
            uncontrolled_terminal_norm_h: uncontrolled.terminal_norm_h,
            hum_control_l2: h.control.l2_norm(),
            moment_control_l2: m.control.l2_norm(),
            modes: modes.clone(),
        }),
        _ => None,
    };

    timings.total_s = start.elapsed().as_secs_f64();
    let mut files = out.files.clone();
    files.push(PathBuf::from("report.json"));
    let report = RunReport {
        schema_version: SCHEMA_VERSION.into(),
        config: cfg.clone(),
        uncontrolled,
        hum: hum_run.as_ref().map(HumSummary::of),
        moment: moment_run.map(|(_, s)| s),
        comparison,
        modes,
        files,
        errors,
        timings,
    };
    out.json("report.json", &report)?;
    Ok(report)
}

/// [`run_case`] for each configuration, one worker thread per case, results
/// in input order.
pub fn run_cases(cfgs: &[CaseConfig]) -> Vec<Result<RunReport>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|cfg| scope.spawn(move || run_case(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("case worker panicked"))
            .collect()
    })
}

/// Both controls on the same grid, compared in `L²(0,T)` and mode by mode.
pub fn compare_controls(cfg: &CaseConfig) -> Result<Comparison> {
    compare_controls_from(cfg, &cfg.initial_state()?)
}

/// [`compare_controls`] from an arbitrary initial state on the case grid.
pub fn compare_controls_from(cfg: &CaseConfig, u0: &State) -> Result<Comparison> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    if u0.grid != grid {
        return Err(Error::ShapeMismatch(format!(
            "initial state on {} intervals, case grid on {}",
            u0.grid.n_x, grid.n_x
        )));
    }
    let model = Model::with_options(cfg.params, grid, cfg.scheme);
    let pairs = spectral::spectrum(&cfg.params, cfg.n_modes + EXTRA_MODES)?;

    let free = model.terminal_state(u0, &Control::zeros(cfg.horizon, cfg.n_t))?;
    let h = hum::hum_cg(u0, &cfg.hum_config(), &cfg.params)?;
    let m = run_moment(cfg, u0, &pairs)?;
    let m_terminal = model.terminal_state(u0, &m.control)?;
    let h_terminal = model.terminal_state(u0, &h.control)?;

    let free_c = mode_coefficients(&free, &pairs, cfg)?;
    let hum_c = mode_coefficients(&h_terminal, &pairs, cfg)?;
    let mom_c = mode_coefficients(&m_terminal, &pairs, cfg)?;
    let modes = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| ModeRow {
            n: p.n,
            lambda: p.lambda,
            uncontrolled: free_c[i].abs(),
            hum: Some(hum_c[i].abs()),
            moment: Some(mom_c[i].abs()),
        })
        .collect();
    Ok(Comparison {
        l2_distance: h.control.axpy(-1.0, &m.control).l2_norm(),
        hum_terminal_norm_h: model.norm_h(&h_terminal),
        moment_terminal_norm_h: model.norm_h(&m_terminal),
        uncontrolled_terminal_norm_h: model.norm_h(&free),
        hum_control_l2: h.control.l2_norm(),
        moment_control_l2: m.control.l2_norm(),
        modes,
    })
}
