use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wentzell::experiments::{self, CaseConfig, ConfigOverrides, Method};
use wentzell::hum::CgInnerProduct;
use wentzell::{spectral, Error};

#[derive(Parser)]
#[command(
    name = "wentzell",
    version,
    about = "Boundary null controls for the heat equation with a Wentzell condition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the leading eigenpairs of the spectral problem.
    Spectrum(CaseArgs),
    /// Uncontrolled, HUM and moment runs with CSV plot data and a JSON report.
    Run(CaseArgs),
    /// Cross-validate the HUM and moment controls.
    Compare(CaseArgs),
    /// Spatial convergence of the uncontrolled solver against the spectral series.
    Converge {
        #[command(flatten)]
        case: CaseArgs,
        /// Grid levels, increasing.
        #[arg(long, value_delimiter = ',', default_values_t = [50usize, 100, 200, 400])]
        levels: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Sub,
    Crit,
    Super,
    Custom,
    /// The three presets in parallel (run only).
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Hum,
    Moment,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerArg {
    Energy,
    DerivativeH,
    DerivativeL2,
}

#[derive(Args)]
struct CaseArgs {
    /// JSON file with any configuration fields; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    /// Coefficient of u_t(1) in the boundary condition.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Coefficient of u(1).
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Coefficient of u_x(1).
    #[arg(long, allow_hyphen_values = true)]
    d: Option<f64>,
    /// Spatial intervals; sets nt = 10·nx unless nt is given.
    #[arg(long)]
    nx: Option<usize>,
    /// Time steps.
    #[arg(long)]
    nt: Option<usize>,
    /// Final time.
    #[arg(long = "T")]
    horizon: Option<f64>,
    /// Penalization parameter of the HUM functional.
    #[arg(long)]
    eps: Option<f64>,
    /// Shift of the elliptic step; must not be minus an eigenvalue.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Relative residual tolerance of the CG iteration.
    #[arg(long)]
    tol: Option<f64>,
    /// CG iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Modes controlled by the moment method (and listed by spectrum).
    #[arg(long)]
    modes: Option<usize>,
    /// Which controls to compute.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Inner product of the CG iteration.
    #[arg(long, value_enum)]
    inner: Option<InnerArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// N_x = 25, T = 1, eps = 1e-3, seven CG iterations from V0 = 0.
    #[arg(long)]
    reproduce_paper: bool,
}

impl CaseArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            case: self.case.map(|c| {
                match c {
                    CaseArg::Sub => "sub",
                    CaseArg::Crit => "crit",
                    CaseArg::Super => "super",
                    CaseArg::Custom => "custom",
                    CaseArg::All => "all",
                }
                .to_string()
            }),
            a: self.a,
            b: self.b,
            d: self.d,
            n_x: self.nx,
            n_t: self.nt,
            horizon: self.horizon,
            eps: self.eps,
            alpha: self.alpha,
            tol: self.tol,
            max_iter: self.max_iter,
            n_modes: self.modes,
            out_dir: self.out.clone(),
            method: self.method.map(|m| match m {
                MethodArg::Hum => Method::Hum,
                MethodArg::Moment => Method::Moment,
                MethodArg::Both => Method::Both,
            }),
            inner: self.inner.map(|i| match i {
                InnerArg::Energy => CgInnerProduct::Energy,
                InnerArg::DerivativeH => CgInnerProduct::DerivativeH,
                InnerArg::DerivativeL2 => CgInnerProduct::DerivativeL2,
            }),
            scheme: None,
            reproduce_paper: self.reproduce_paper,
        }
    }

    fn merged(&self) -> Result<ConfigOverrides, Error> {
        let file = match &self.config {
            Some(path) => ConfigOverrides::from_file(path)?,
            None => ConfigOverrides::default(),
        };
        Ok(file.merged(self.overrides()))
    }

    fn resolve(&self) -> Result<CaseConfig, Error> {
        self.merged()?.resolve()
    }

    /// One configuration per preset; an explicit output directory gets a
    /// subdirectory per case.
    fn resolve_all(&self) -> Result<Vec<CaseConfig>, Error> {
        let base = self.merged()?;
        ["sub", "crit", "super"]
            .iter()
            .map(|slug| {
                let mut o = base.clone();
                o.case = Some(slug.to_string());
                o.out_dir = base.out_dir.as_ref().map(|d| d.join(slug));
                o.resolve()
            })
            .collect()
    }

    fn is_all(&self) -> bool {
        matches!(self.case, Some(CaseArg::All))
    }
}

// A closed downstream pipe ends output quietly instead of panicking.
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

const EXIT_SOLVER: u8 = 2;
const EXIT_CONFIG: u8 = 3;

enum Failure {
    Config(Error),
    Solver(Error),
    Reported(Vec<String>),
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (args, levels) = match &cli.command {
        Command::Spectrum(a) | Command::Run(a) | Command::Compare(a) => (a, None),
        Command::Converge { case, levels } => (case, Some(levels.clone())),
    };
    if args.is_all() {
        return match cli.command {
            Command::Run(_) => run_all(args),
            _ => Err(Failure::Config(Error::InvalidConfig(
                "--case all is only supported by run".into(),
            ))),
        };
    }
    let cfg = args.resolve().map_err(Failure::Config)?;
    match cli.command {
        Command::Spectrum(_) => {
            let pairs = spectral::spectrum(&cfg.params, cfg.n_modes).map_err(Failure::Solver)?;
            outln!(
                "{:>4} {:>10} {:>22} {:>22} {:>12}",
                "n",
                "kind",
                "mu",
                "lambda",
                "residual"
            );
            for p in &pairs {
                outln!(
                    "{:>4} {:>10} {:>22.15e} {:>22.15e} {:>12.3e}",
                    p.n,
                    format!("{:?}", p.kind),
                    p.mu,
                    p.lambda,
                    p.residual(&cfg.params)
                );
            }
        }
        Command::Run(_) => {
            let report = experiments::run_case(&cfg).map_err(classify)?;
            outln!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(|e| Failure::Solver(e.into()))?
            );
            if report.has_errors() {
                return Err(Failure::Reported(report.errors));
            }
        }
        Command::Compare(_) => {
            let cmp = experiments::compare_controls(&cfg).map_err(classify)?;
            outln!(
                "{}",
                serde_json::to_string_pretty(&cmp).map_err(|e| Failure::Solver(e.into()))?
            );
        }
        Command::Converge { .. } => {
            let table = experiments::convergence_study(&cfg, &levels.unwrap_or_default())
                .map_err(classify)?;
            outln!("{:>6} {:>8} {:>14}", "n_x", "n_t", "rel. H error");
            for r in &table.rows {
                outln!("{:>6} {:>8} {:>14.6e}", r.n_x, r.n_t, r.relative_error_h);
            }
            if let Some(order) = table.order {
                outln!("fitted order {order:.3}");
            }
        }
    }
    Ok(())
}

fn run_all(args: &CaseArgs) -> Result<(), Failure> {
    let cfgs = args.resolve_all().map_err(Failure::Config)?;
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    for (cfg, result) in cfgs.iter().zip(experiments::run_cases(&cfgs)) {
        match result {
            Ok(report) => {
                errors.extend(
                    report
                        .errors
                        .iter()
                        .map(|e| format!("{}: {e}", cfg.case_id.slug())),
                );
                reports.push(report);
            }
            Err(e) => return Err(classify(e)),
        }
    }
    outln!(
        "{}",
        serde_json::to_string_pretty(&reports).map_err(|e| Failure::Solver(e.into()))?
    );
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Reported(errors))
    }
}

fn classify(e: Error) -> Failure {
    match e {
        Error::InvalidConfig(_) | Error::InvalidParams(_) => Failure::Config(e),
        other => Failure::Solver(other),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SOLVER)
        }
        Err(Failure::Reported(errors)) => {
            for e in errors {
                eprintln!("error: {e}");
            }
            ExitCode::from(EXIT_SOLVER)
        }
    }
}
