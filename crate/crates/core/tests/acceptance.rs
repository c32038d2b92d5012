//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wentzell::experiments::{
    self, default_initial_series, default_initial_state, CaseConfig, CaseId, ControlStats,
};
use wentzell::hum::{self, HumResult};
use wentzell::moment::{self, ExpFamily};
use wentzell::quadrature::integrate_tight;
use wentzell::spectral::{self, expand_function, spectral_solution, Direction, Eigenpair};
use wentzell::{Control, EigenKind, Grid, Model, State, WentzellParams};

const PRESETS: [CaseId; 3] = [CaseId::SubCritical, CaseId::Critical, CaseId::SuperCritical];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }
}

fn params(case: CaseId) -> WentzellParams {
    case.preset_params().unwrap()
}

// Characteristic functions written out independently of the library.
fn trig_h(mu: f64, p: &WentzellParams) -> f64 {
    (p.a / p.d * mu * mu + p.b / p.d) * mu.sin() - mu * mu.cos()
}

fn trig_dh(mu: f64, p: &WentzellParams) -> f64 {
    2.0 * p.a / p.d * mu * mu.sin() + (p.a / p.d * mu * mu + p.b / p.d) * mu.cos() - mu.cos()
        + mu * mu.sin()
}

fn hyp_h(mu: f64, p: &WentzellParams) -> f64 {
    (p.b / p.d - p.a / p.d * mu * mu) * mu.sinh() - mu * mu.cosh()
}

fn root_residual(pair: &Eigenpair, p: &WentzellParams) -> f64 {
    match pair.kind {
        EigenKind::Trig => trig_h(pair.mu, p) + pair.mu_lo * trig_dh(pair.mu, p),
        EigenKind::Hyperbolic => hyp_h(pair.mu + pair.mu_lo, p),
        EigenKind::Linear => pair.lambda,
    }
}

/// Unnormalized eigenfunction from its closed form.
fn y(pair: &Eigenpair, x: f64) -> f64 {
    match pair.kind {
        EigenKind::Trig => (pair.mu * x).sin(),
        EigenKind::Hyperbolic => (pair.mu * x).exp() - (-pair.mu * x).exp(),
        EigenKind::Linear => x,
    }
}

fn y_slope_at_zero(pair: &Eigenpair) -> f64 {
    match pair.kind {
        EigenKind::Trig => pair.mu,
        EigenKind::Hyperbolic => 2.0 * pair.mu,
        EigenKind::Linear => 1.0,
    }
}

fn quad_inner(p: &Eigenpair, q: &Eigenpair, params: &WentzellParams) -> f64 {
    integrate_tight(|x| y(p, x) * y(q, x), 0.0, 1.0) + params.a / params.d * y(p, 1.0) * y(q, 1.0)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn criterion_1() -> Outcome {
    let mut worst_residual: f64 = 0.0;
    let mut bracket_ok = true;
    let mut slopes = Vec::new();
    for case in PRESETS {
        let p = params(case);
        let pairs = spectral::spectrum(&p, 201).unwrap();
        for pair in pairs.iter().take(50) {
            worst_residual = worst_residual.max(root_residual(pair, &p).abs());
            bracket_ok &= match pair.kind {
                EigenKind::Trig if pair.n == 0 => pair.mu > 0.0 && pair.mu < PI / 2.0,
                EigenKind::Trig => {
                    pair.mu > PI * pair.n as f64 && pair.mu < PI * pair.n as f64 + PI / 2.0
                }
                EigenKind::Hyperbolic => pair.mu > 0.0 && pair.lambda < 0.0,
                EigenKind::Linear => pair.lambda == 0.0,
            };
        }
        let (mut ns, mut ds) = (Vec::new(), Vec::new());
        for pair in pairs
            .iter()
            .filter(|q| q.kind == EigenKind::Trig && (50..=200).contains(&q.n))
        {
            let n = pair.n as f64;
            let defect = n.powi(3) * ((pair.mu - PI * n) + pair.mu_lo - p.d / (p.a * PI * n)).abs();
            ns.push(n.ln());
            ds.push(defect.ln());
        }
        slopes.push(slope(&ns, &ds));
    }
    let trend_ok = slopes.iter().all(|s| s.abs() < 0.1);
    Outcome::new(
        bracket_ok && worst_residual <= 1e-12 && trend_ok,
        format!(
            "brackets {}, max |h(mu)| = {worst_residual:.2e}, log-log slope of n^3 defect {:?}",
            if bracket_ok { "ok" } else { "violated" },
            slopes
                .iter()
                .map(|s| format!("{s:.1e}"))
                .collect::<Vec<_>>()
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for case in PRESETS {
        let p = params(case);
        let pairs = spectral::spectrum(&p, 21).unwrap();
        let norms: Vec<f64> = pairs.iter().map(|q| quad_inner(q, q, &p).sqrt()).collect();
        for i in 0..pairs.len() {
            worst = worst.max((pairs[i].norm_h / norms[i] - 1.0).abs());
            for j in 0..=i {
                let v = quad_inner(&pairs[i], &pairs[j], &p) / (norms[i] * norms[j]);
                let via_lib =
                    integrate_tight(
                        |x| pairs[i].eval_normalized(x) * pairs[j].eval_normalized(x),
                        0.0,
                        1.0,
                    ) + p.weight() * pairs[i].eval_normalized(1.0) * pairs[j].eval_normalized(1.0);
                let delta = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - delta).abs()).max((via_lib - delta).abs());
            }
        }
    }
    Outcome::new(
        worst <= 1e-8,
        format!("max |(Z_n, Z_m)_H - delta| = {worst:.2e} over n, m <= 20"),
    )
}

fn criterion_3() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut errors = Vec::new();
    let mut orders = Vec::new();
    for case in PRESETS {
        let mut cfg = CaseConfig::preset(case);
        cfg.out_dir = dir.path().join(case.slug());
        let model = Model::new(cfg.params, cfg.grid().unwrap());
        let u0 = default_initial_state(model.grid);
        let got = model
            .terminal_state(&u0, &Control::zeros(cfg.horizon, cfg.n_t))
            .unwrap();
        let pairs = spectral::spectrum(&cfg.params, 60).unwrap();
        let series = expand_function(
            |x| 2f64.sqrt() * (PI * x).sin(),
            0.0,
            &pairs,
            &cfg.params,
            cfg.horizon,
        )
        .unwrap();
        let want = spectral_solution(&series, cfg.horizon, Direction::Forward, model.grid);
        errors.push(model.norm_h(&got.axpy(-1.0, &want)) / model.norm_h(&want));
        let table = experiments::convergence_study(&cfg, &[50, 100, 200, 400]).unwrap();
        orders.push(table.order.unwrap());
    }
    let pass = errors.iter().all(|e| *e <= 1e-2) && orders.iter().all(|o| (o - 2.0).abs() <= 0.3);
    Outcome::new(
        pass,
        format!(
            "relative H error at 200/2000 {:?}, fitted order {:?}",
            errors
                .iter()
                .map(|e| format!("{e:.2e}"))
                .collect::<Vec<_>>(),
            orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()
        ),
    )
}

fn sine_datum(grid: Grid) -> State {
    default_initial_state(grid)
}

fn criterion_4() -> Outcome {
    type Builder = fn(&WentzellParams, Grid) -> (State, Box<dyn Fn(f64) -> f64>, State);
    let triples: [Builder; 3] = [
        |p, g| {
            let z = spectral::spectrum(p, 2).unwrap()[1].sample_normalized(g);
            (z.clone(), Box::new(|_| 0.0), z)
        },
        |p, g| {
            let z1 = spectral::spectrum(p, 2).unwrap()[1].sample_normalized(g);
            (sine_datum(g), Box::new(|t| t), z1)
        },
        |_, g| {
            let phi = State::from_fn(g, |x| x * (-x).exp() + 0.3 * (2.5 * PI * x).sin());
            (
                State::zeros(g),
                Box::new(|t: f64| (3.0 * PI * t).sin() * (1.0 - t) + t * t),
                phi,
            )
        },
    ];
    let defect = |case: CaseId, build: &Builder, n_x: usize| {
        let p = params(case);
        let grid = Grid::new(n_x).unwrap();
        let (u0, f, vt) = build(&p, grid);
        let f = Control::from_fn(1.0, 10 * n_x, f);
        let forced = f.l2_norm() > 0.0;
        (
            Model::new(p, grid).duality_check(&u0, &f, &vt).unwrap(),
            forced,
        )
    };
    let mut worst: f64 = 0.0;
    let mut shrink_ok = true;
    let mut count = 0;
    for case in PRESETS {
        for build in &triples {
            let (coarse, _) = defect(case, build, 100);
            let (fine, forced) = defect(case, build, 200);
            worst = worst.max(fine);
            // Unforced triples satisfy the discrete identity to roundoff.
            if forced {
                shrink_ok &= fine < 0.5 * coarse;
            } else {
                shrink_ok &= fine < 1e-12;
            }
            count += 1;
        }
    }
    Outcome::new(
        worst <= 1e-3 && shrink_ok && count >= 9,
        format!(
            "{count} triples, max defect {worst:.2e} at 200/2000, refinement {}",
            if shrink_ok {
                "shrinks"
            } else {
                "does not shrink"
            }
        ),
    )
}

fn random_control(rng: &mut ChaCha8Rng, n_t: usize) -> Control {
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Control::from_fn(1.0, n_t, |t| {
        c.iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 * PI * t).cos())
            .sum()
    })
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for case in PRESETS {
        let cfg = CaseConfig::preset(case).hum_config();
        let p = params(case);
        let u0 = sine_datum(cfg.grid().unwrap());
        let f = random_control(&mut rng, cfg.n_t);
        let grad = hum::gradient_residual(&f, &u0, &cfg, &p).unwrap();
        for _ in 0..5 {
            let g = random_control(&mut rng, cfg.n_t);
            let s = 1e-5;
            let jp = hum::j_eps(&f.axpy(s, &g), &u0, &cfg, &p).unwrap();
            let jm = hum::j_eps(&f.axpy(-s, &g), &u0, &cfg, &p).unwrap();
            let fd = (jp - jm) / (2.0 * s);
            let an = grad.inner(&g);
            worst = worst.max((fd - an).abs() / an.abs().max(1e-300));
        }
    }
    Outcome::new(
        worst <= 1e-4,
        format!("max relative gap {worst:.2e} over 15 directions"),
    )
}

fn hum_run(case: CaseId) -> (HumResult, CaseConfig) {
    let cfg = CaseConfig::preset(case);
    let u0 = cfg.initial_state().unwrap();
    (
        hum::hum_cg(&u0, &cfg.hum_config(), &cfg.params).unwrap(),
        cfg,
    )
}

fn criterion_6(runs: &[(HumResult, CaseConfig)]) -> Outcome {
    let (res, cfg) = &runs[0];
    let monotone = res.residuals.windows(2).all(|w| w[1] <= w[0]);
    let free = default_initial_series(&cfg.params, cfg.horizon, 60)
        .unwrap()
        .evolve(cfg.horizon)
        .norm_h();
    let ratio = res.terminal_norm_h / free;
    Outcome::new(
        res.converged() && monotone && ratio <= 0.2,
        format!(
            "{} iterations, residuals {}, terminal H ratio {ratio:.3e} (free decay {free:.4e})",
            res.iterations,
            if monotone {
                "nonincreasing"
            } else {
                "not monotone"
            }
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst_bio: f64 = 0.0;
    let mut worst_moment: f64 = 0.0;
    let mut worst_null: f64 = 0.0;
    let mut shifted = Vec::new();
    for case in [CaseId::SubCritical, CaseId::SuperCritical] {
        let p = params(case);
        let pairs = spectral::spectrum(&p, 6).unwrap();
        let fam = ExpFamily::from_pairs(&pairs, 1.0).unwrap();
        shifted.push(fam.is_shifted());
        let kappa = fam.exponents();
        for elem in moment::biorthogonal_family(&fam).unwrap() {
            for (m, k) in kappa.iter().enumerate() {
                let v = integrate_tight(|t| (-k * t).exp() * elem.eval(t), 0.0, 1.0);
                let delta = if m == elem.n { 1.0 } else { 0.0 };
                worst_bio = worst_bio.max((v - delta).abs());
            }
        }
        let (n_x, n_t) = (400, 4000);
        let u0 = sine_datum(Grid::new(n_x).unwrap());
        let res = moment::moment_control(&u0, &fam, &pairs, &p, n_t).unwrap();
        for (k, pair) in pairs.iter().enumerate() {
            let slope = y_slope_at_zero(pair) / quad_inner(pair, pair, &p).sqrt();
            let target = -res.eta[k] * (-pair.lambda).exp() / slope;
            let got = integrate_tight(|t| res.theta(t) * (-pair.lambda * t).exp(), 0.0, 1.0);
            worst_moment = worst_moment.max((got - target).abs());
        }
        let norm_u0 = wentzell::pde::norm_h(&u0, &p);
        let null = moment::verify_null_modes(&res.control, &u0, &pairs, &p, n_x, n_t).unwrap();
        worst_null = worst_null.max(null.iter().copied().fold(0.0, f64::max) / norm_u0);
    }
    let pass =
        worst_bio <= 1e-8 && worst_moment <= 1e-8 && worst_null <= 1e-3 && shifted == [false, true];
    Outcome::new(
        pass,
        format!(
            "biorthogonality {worst_bio:.2e}, moments {worst_moment:.2e}, null modes {worst_null:.2e} x ||U0||_H, shift branch {shifted:?}"
        ),
    )
}

fn criterion_8(runs: &[(HumResult, CaseConfig)]) -> Outcome {
    let mut hum_min = Vec::new();
    let mut moment_min = Vec::new();
    let mut negative_ok = true;
    for (res, cfg) in runs {
        let u0 = cfg.initial_state().unwrap();
        let pairs = spectral::spectrum(&cfg.params, cfg.n_modes).unwrap();
        let fam = ExpFamily::from_pairs(&pairs, cfg.horizon).unwrap();
        let m = moment::moment_control(&u0, &fam, &pairs, &cfg.params, cfg.n_t).unwrap();
        for (f, mins) in [(&res.control, &mut hum_min), (&m.control, &mut moment_min)] {
            let stats = ControlStats::of(f);
            negative_ok &= stats.min < 0.0 && stats.negative_measure >= 0.05 * cfg.horizon;
            mins.push(stats.min);
        }
    }
    let lowest = |v: &[f64]| v[2] < v[0] && v[2] < v[1];
    Outcome::new(
        negative_ok && lowest(&hum_min) && lowest(&moment_min),
        format!("minima (sub, crit, super): HUM {hum_min:.3?}, moment {moment_min:.3?}"),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = run();
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n} {name}: {verdict} ({}; {:.1} s)",
            out.detail,
            start.elapsed().as_secs_f64()
        );
        all &= out.pass;
    };
    report(1, "spectral correctness", &mut criterion_1);
    report(2, "orthonormality", &mut criterion_2);
    report(3, "solver against series", &mut criterion_3);
    report(4, "duality identity", &mut criterion_4);
    report(5, "gradient check", &mut criterion_5);
    let runs: Vec<_> = PRESETS.iter().map(|c| hum_run(*c)).collect();
    report(6, "HUM efficacy", &mut || criterion_6(&runs));
    report(7, "moment method", &mut criterion_7);
    report(8, "negative controls", &mut || criterion_8(&runs));
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
