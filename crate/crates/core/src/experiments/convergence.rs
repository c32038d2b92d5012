use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{self, Control, Grid, Model};
use crate::spectral::{self, Direction};

use super::{default_initial_series, default_initial_state, CaseConfig, STEPS_PER_INTERVAL};

/// Modes in the spectral oracle; terms beyond these are below `e^{−λ T}` at any tested `T`.
const ORACLE_MODES: usize = 40;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_x: usize,
    pub n_t: usize,
    pub error_h: f64,
    /// `error_h / ‖U_oracle(T)‖_H`.
    pub relative_error_h: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `−log(error)` against `log(n_x)`; needs two levels.
    pub order: Option<f64>,
    pub csv: PathBuf,
}

fn fitted_order(rows: &[ConvergenceRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n_x as f64).ln(), r.relative_error_h.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(-sxy / sxx)
}

/// Uncontrolled terminal error against the spectral series at each grid level,
/// with `n_t = 10 n_x`, written to `convergence.csv` in `cfg.out_dir`.
pub fn convergence_study(cfg: &CaseConfig, levels: &[usize]) -> Result<ConvergenceTable> {
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "levels must be non-empty and increasing, got {levels:?}"
        )));
    }
    let series = default_initial_series(&cfg.params, cfg.horizon, ORACLE_MODES)?;
    let oracle_norm = series.evolve(cfg.horizon).norm_h();
    let mut rows = Vec::with_capacity(levels.len());
    for &n_x in levels {
        let grid = Grid::new(n_x)?;
        let n_t = STEPS_PER_INTERVAL * n_x;
        let model = Model::with_options(cfg.params, grid, cfg.scheme);
        let terminal = model.terminal_state(
            &default_initial_state(grid),
            &Control::zeros(cfg.horizon, n_t),
        )?;
        let exact = spectral::spectral_solution(&series, cfg.horizon, Direction::Forward, grid);
        let error_h = pde::norm_h(&terminal.axpy(-1.0, &exact), &cfg.params);
        log::info!("convergence level n_x = {n_x}: H error {error_h:.3e}");
        rows.push(ConvergenceRow {
            n_x,
            n_t,
            error_h,
            relative_error_h: error_h / oracle_norm,
        });
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let csv = cfg.out_dir.join("convergence.csv");
    let file = File::create(&csv).map_err(|e| Error::io(&csv, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "n_x,n_t,error_h,relative_error_h")?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{:.16e},{:.16e}",
                r.n_x, r.n_t, r.error_h, r.relative_error_h
            )?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(&csv, e))?;
    Ok(ConvergenceTable {
        order: fitted_order(&rows),
        rows,
        csv,
    })
}

/// Largest change of the lowest-mode coefficient `(U(t), Z₀)_H` along the
/// uncontrolled run, relative to its initial value, divided by `e^{−λ₀ t}`.
///
/// Zero for the exact solution; in the critical regime `λ₀ = 0`, so this is
/// the drift of a conserved quantity.
pub fn mode_drift(cfg: &CaseConfig) -> Result<f64> {
    let grid = cfg.grid()?;
    let model = Model::with_options(cfg.params, grid, cfg.scheme);
    let pair = spectral::spectrum(&cfg.params, 1)?[0];
    let z0 = pair.sample_normalized(grid);
    let traj = model.solve_forward(
        &default_initial_state(grid),
        &Control::zeros(cfg.horizon, cfg.n_t),
    )?;
    let c0 = pde::inner_h(traj.initial(), &z0, &cfg.params)?;
    let mut drift = 0.0_f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let c = pde::inner_h(s, &z0, &cfg.params)? * (pair.lambda * t).exp();
        drift = drift.max((c - c0).abs() / c0.abs());
    }
    Ok(drift)
}
