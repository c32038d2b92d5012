use wentzell::experiments::{self, default_initial_state, CaseConfig, CaseId};
use wentzell::hum::{self, HumConfig};
use wentzell::moment::{self, predicted_mode_coefficient, ExpFamily};
use wentzell::pde::norm_h;
use wentzell::spectral::{self, expand};
use wentzell::{Grid, Model, WentzellParams};

fn case_i() -> WentzellParams {
    WentzellParams::new(1.0, 1.0, 3.0).unwrap()
}

#[test]
fn penalization_sweep_is_monotone() {
    let p = case_i();
    let mut last: Option<(f64, f64, f64)> = None;
    for eps in [1e-2, 1e-3, 1e-4] {
        let cfg = HumConfig::new(eps, 0.0, 1e-6, 2000, 100, 1000, 1.0);
        let u0 = default_initial_state(cfg.grid().unwrap());
        let res = hum::hum_cg(&u0, &cfg, &p).unwrap();
        assert!(res.converged());
        let hm1 = res.terminal_norm_hminus1.unwrap();
        let now = (res.terminal_norm_h, hm1, res.control.l2_norm());
        if let Some((h, m, c)) = last {
            assert!(now.0 < h, "eps = {eps}: H norm {} after {h}", now.0);
            assert!(
                now.1 <= m + 1e-10,
                "eps = {eps}: H^-1 norm {} after {m}",
                now.1
            );
            assert!(now.2 > c, "eps = {eps}: control norm {} after {c}", now.2);
        }
        last = Some(now);
    }
}

#[test]
fn converged_control_is_stationary() {
    let p = case_i();
    let tol = 1e-3;
    let cfg = HumConfig::new(1e-3, 0.0, tol, 5000, 100, 1000, 1.0);
    let u0 = default_initial_state(cfg.grid().unwrap());
    let res = hum::hum_cg(&u0, &cfg, &p).unwrap();
    assert!(res.converged());
    let zero = wentzell::Control::zeros(1.0, 1000);
    let g0 = hum::gradient_residual(&zero, &u0, &cfg, &p)
        .unwrap()
        .l2_norm();
    let g = hum::gradient_residual(&res.control, &u0, &cfg, &p)
        .unwrap()
        .l2_norm();
    assert!(g <= 10.0 * tol * g0, "{g} vs {g0}");
}

fn tail_gaps(params: WentzellParams, n_x: usize) -> Vec<(f64, f64, f64)> {
    let grid = Grid::new(n_x).unwrap();
    let n_t = 10 * n_x;
    let u0 = default_initial_state(grid);
    let pairs = spectral::spectrum(&params, 8).unwrap();
    let fam = ExpFamily::from_pairs(&pairs[..6], 1.0).unwrap();
    let res = moment::moment_control(&u0, &fam, &pairs[..6], &params, n_t).unwrap();
    let eta = expand(&u0, &pairs, &params, 1.0).unwrap();
    let got = moment::verify_null_modes(&res.control, &u0, &pairs, &params, n_x, n_t).unwrap();
    (6..8)
        .map(|k| {
            let want =
                predicted_mode_coefficient(eta.coeffs[k], &pairs[k], 1.0, |t| res.control_at(t))
                    .abs();
            let free = (eta.coeffs[k] * (-pairs[k].lambda).exp()).abs();
            (got[k], want, free)
        })
        .collect()
}

// The tail is driven by the control, so the oracle is the forced response
// rather than free decay.
#[test]
fn tail_modes_follow_the_forced_response() {
    for params in [case_i(), WentzellParams::new(1.0, 3.0, 1.0).unwrap()] {
        let coarse = tail_gaps(params, 200);
        let fine = tail_gaps(params, 400);
        for ((got, want, free), (got_c, _, _)) in fine.iter().zip(&coarse) {
            assert!((got / want - 1.0).abs() < 5e-2, "{got} vs {want}");
            assert!((got - want).abs() < 0.5 * (got_c - want).abs());
            assert!(*got > 1e3 * free);
        }
    }
}

#[test]
fn both_controls_reduce_the_terminal_state() {
    let mut cfg = CaseConfig::preset(CaseId::SubCritical);
    cfg.tol = 1e-6;
    let six = experiments::compare_controls(&cfg).unwrap();
    let free = six.uncontrolled_terminal_norm_h;
    assert!(six.hum_terminal_norm_h <= 0.2 * free);
    // Six modes leave the forced tail above one fifth of the free norm.
    let ratio6 = six.moment_terminal_norm_h / free;
    assert!(ratio6 < 0.25, "{ratio6}");
    cfg.n_modes = 10;
    let ten = experiments::compare_controls(&cfg).unwrap();
    let ratio10 = ten.moment_terminal_norm_h / free;
    assert!(ratio10 <= 0.2 && ratio10 < ratio6, "{ratio10}");
}

#[test]
fn moment_control_moves_with_resolution_only_through_sampling() {
    let p = case_i();
    let pairs = spectral::spectrum(&p, 6).unwrap();
    let fam = ExpFamily::from_pairs(&pairs, 1.0).unwrap();
    let series = experiments::default_initial_series(&p, 1.0, 6).unwrap();
    let coarse = moment::moment_control_from_coeffs(&series, &fam, 100).unwrap();
    let fine = moment::moment_control_from_coeffs(&series, &fam, 1000).unwrap();
    for (k, v) in coarse.control.samples.iter().enumerate() {
        assert!((v - fine.control.samples[10 * k]).abs() < 1e-12 * (1.0 + v.abs()));
    }
}

#[test]
fn critical_zero_mode_is_conserved() {
    let cfg = CaseConfig::preset(CaseId::Critical);
    assert!(experiments::mode_drift(&cfg).unwrap() < 1e-3);
    let model = Model::new(cfg.params, cfg.grid().unwrap());
    let y0 = spectral::spectrum(&cfg.params, 1).unwrap()[0].sample_normalized(model.grid);
    let end = model
        .terminal_state(&y0, &wentzell::Control::zeros(1.0, cfg.n_t))
        .unwrap();
    assert!((norm_h(&end, &cfg.params) - 1.0).abs() < 1e-3);
}

#[test]
fn convergence_single_level_has_no_fit() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = CaseConfig::preset(CaseId::SubCritical);
    cfg.out_dir = dir.path().to_path_buf();
    let table = experiments::convergence_study(&cfg, &[50]).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert!(table.order.is_none());
    assert!(dir.path().join("convergence.csv").is_file());
    assert!(experiments::convergence_study(&cfg, &[100, 50]).is_err());
}
