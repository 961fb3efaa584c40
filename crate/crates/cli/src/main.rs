//! `kgnr`: runs the solvers and limit experiments from flags or a config file.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use kgnr_core::harness::experiments::{
    decay_experiment, growth_experiment, residual_scaling, run_limit_experiment, self_convergence, DecayOptions,
    SolverKind,
};
use kgnr_core::harness::report::{
    write_decay_csv, write_growth_csv, write_limit_csv, write_rows, KG_HEADER, PROFILE_HEADER,
};
use kgnr_core::harness::{fit_rate, ExperimentSpec};
use kgnr_core::kg::{kg_init, kg_solve, manifest_row};
use kgnr_core::nls::{solve_profiles, ProfileOptions};
use kgnr_core::snapshot::Snapshot;
use kgnr_core::{Error, KgParams, NlsParams, WkbOrder};

#[derive(Parser, Debug)]
#[command(name = "kgnr", version, about = "Non-relativistic limit experiments for the cubic Klein-Gordon equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the profile equations for g0 (and g2 with --k 2).
    SolveNls {
        #[command(flatten)]
        common: Common,
        /// Profile time step.
        #[arg(long, default_value_t = 2.5e-3)]
        dt: f64,
    },
    /// Solve Klein-Gordon at a single eps.
    SolveKg {
        #[command(flatten)]
        common: Common,
        /// Step size; defaults to dt.safety * eps^2.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Error of the WKB approximation against Klein-Gordon over an eps ladder.
    LimitRate {
        #[command(flatten)]
        common: Common,
    },
    /// Residual of the WKB approximation over an eps ladder.
    ResidualScaling {
        #[command(flatten)]
        common: Common,
    },
    /// Decay of max|g0| on a large box.
    Decay {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0)]
        t_final: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 0.25)]
        sample_every: f64,
        /// Boundary-strip mass fraction that ends the fit window.
        #[arg(long, default_value_t = 1e-4)]
        wrap_threshold: f64,
    },
    /// Time growth of the scaled error at the first eps.
    Growth {
        #[command(flatten)]
        common: Common,
    },
    /// Observed order of one integrator against a dt/16 reference.
    SelfConvergence {
        #[command(flatten)]
        common: Common,
        /// nls, g2 or kg.
        #[arg(long)]
        solver: SolverKind,
        /// Coarse step; defaults to 0.1 for the profiles and 0.005 for kg.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        t_final: f64,
    },
}

/// Settings shared by every subcommand. Each flag overrides the config key
/// of the same meaning.
#[derive(Args, Debug)]
struct Common {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated, strictly decreasing eps ladder.
    #[arg(long)]
    eps: Option<String>,
    /// Comma-separated measurement times.
    #[arg(long = "t")]
    times: Option<String>,
    /// WKB order, 0 or 2.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    norm_s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// gaussian or rough.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    amp: Option<String>,
    #[arg(long)]
    width: Option<String>,
    /// x,y
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    s_target: Option<String>,
    /// Grid points per dimension.
    #[arg(long)]
    n: Option<String>,
    /// Side length of the periodic box; accepts e.g. 16pi.
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    dt_safety: Option<String>,
    /// Directory for CSV files and snapshots.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let flags = [
            ("data.kind", &self.data),
            ("data.amp", &self.amp),
            ("data.width", &self.width),
            ("data.center", &self.center),
            ("data.seed", &self.seed),
            ("data.s_target", &self.s_target),
            ("lambda", &self.lambda),
            ("eps", &self.eps),
            ("times", &self.times),
            ("order_k", &self.k),
            ("norm_s", &self.norm_s),
            ("grid.n", &self.n),
            ("grid.l", &self.l),
            ("dt.safety", &self.dt_safety),
        ];
        let mut out: Vec<_> = flags.iter().filter_map(|(k, v)| v.as_ref().map(|v| (*k, v.clone()))).collect();
        if let Some(dir) = &self.out {
            out.push(("out.dir", dir.display().to_string()));
        }
        out
    }

    /// Builds the spec from `base`, then the config file, then the flags.
    /// With `needs_eps` the ladder starts empty so it must be given.
    fn spec(&self, mut base: ExperimentSpec, needs_eps: bool) -> Result<ExperimentSpec, Failure> {
        if needs_eps {
            base.eps.clear();
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            base.apply_config(&text)?;
        }
        for (key, value) in self.overrides() {
            base.apply(key, &value)?;
        }
        if needs_eps && base.eps.is_empty() {
            return Err(Failure::Usage("--eps is required (or eps= in the config file)"));
        }
        Ok(base)
    }
}

enum Failure {
    Usage(&'static str),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::BlowUp { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = subcommand_name(&cli.command);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            let mut cmd = Cli::command();
            let sub = cmd.find_subcommand_mut(name).expect("known subcommand").clone();
            let _ = sub
                .bin_name(format!("kgnr {name}"))
                .error(ErrorKind::MissingRequiredArgument, msg)
                .print();
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::SolveNls { .. } => "solve-nls",
        Command::SolveKg { .. } => "solve-kg",
        Command::LimitRate { .. } => "limit-rate",
        Command::ResidualScaling { .. } => "residual-scaling",
        Command::Decay { .. } => "decay",
        Command::Growth { .. } => "growth",
        Command::SelfConvergence { .. } => "self-convergence",
    }
}

/// Prints `csv` and, when an output directory is set, also writes it there.
fn emit(spec: &ExperimentSpec, file: &str, csv: &[u8]) -> Result<(), Failure> {
    io::stdout().write_all(csv)?;
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(file), csv)?;
    }
    Ok(())
}

fn snapshot(spec: &ExperimentSpec, name: &str, snap: &Snapshot) -> Result<(), Failure> {
    if let Some(dir) = &spec.out_dir {
        fs::create_dir_all(dir)?;
        snap.write_file(dir.join(format!("{name}_t{}.kgnr", snap.time)))?;
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::SolveNls { common, dt } => solve_nls(&common.spec(ExperimentSpec::default(), false)?, dt),
        Command::SolveKg { common, dt } => solve_kg(&common.spec(ExperimentSpec::default(), true)?, dt),
        Command::LimitRate { common } => {
            let spec = common.spec(ExperimentSpec::default(), true)?;
            let report = run_limit_experiment(&spec)?;
            let mut csv = Vec::new();
            write_limit_csv(&report, &mut csv)?;
            emit(&spec, "limit.csv", &csv)?;
            if let Some(t) = report.truncated_at {
                eprintln!("note: profile solve truncated by the focusing monitor at t = {t}");
            }
            Ok(())
        }
        Command::ResidualScaling { common } => {
            let spec = common.spec(ExperimentSpec::default(), true)?;
            let rows = residual_scaling(&spec)?;
            emit(&spec, "residual.csv", &residual_csv(&spec, &rows)?)
        }
        Command::Decay {
            common,
            t_final,
            dt,
            sample_every,
            wrap_threshold,
        } => {
            let base = ExperimentSpec {
                grid_n: 256,
                grid_l: 48.0 * std::f64::consts::PI,
                ..ExperimentSpec::default()
            };
            let spec = common.spec(base, false)?;
            let opts = DecayOptions {
                t_final,
                dt,
                sample_every,
                wrap_threshold,
            };
            let report = decay_experiment(&spec, &opts)?;
            let mut csv = Vec::new();
            write_decay_csv(&report, &mut csv)?;
            emit(&spec, "decay.csv", &csv)
        }
        Command::Growth { common } => {
            let base = ExperimentSpec {
                times: vec![1.0, 2.0, 4.0, 8.0],
                ..ExperimentSpec::default()
            };
            let spec = common.spec(base, true)?;
            spec.validate()?;
            let report = growth_experiment(&spec)?;
            let mut csv = Vec::new();
            write_growth_csv(&report, &mut csv)?;
            emit(&spec, "growth.csv", &csv)
        }
        Command::SelfConvergence {
            common,
            solver,
            dt,
            t_final,
        } => {
            let spec = common.spec(ExperimentSpec::default(), solver == SolverKind::Kg)?;
            let dt = dt.unwrap_or(if solver == SolverKind::Kg { 0.005 } else { 0.1 });
            let eps = spec.eps.first().copied().unwrap_or(0.2);
            let sc = self_convergence(solver, &spec, eps, dt, t_final)?;
            eprintln!("observed order {:.4}", sc.order);
            let name = match solver {
                SolverKind::Nls => "nls",
                SolverKind::G2 => "g2",
                SolverKind::Kg => "kg",
            };
            let csv = format!(
                "solver,dt,t_final,error_dt,error_half_dt,order\n{name},{},{},{:.12e},{:.12e},{:.6}\n",
                sc.dt, sc.t_final, sc.errors[0], sc.errors[1], sc.order
            );
            emit(&spec, "self_convergence.csv", csv.as_bytes())
        }
    }
}

fn solve_nls(spec: &ExperimentSpec, dt: f64) -> Result<(), Failure> {
    validate_without_eps(spec)?;
    let grid = spec.grid()?;
    let (phi, psi) = spec.initial_data()?;
    let params = NlsParams::new(spec.lambda, &grid, dt, spec.t_max())?;
    let opts = ProfileOptions {
        with_g2: spec.order == WkbOrder::K2,
        monitor: true,
    };
    let set = solve_profiles(&phi, &psi, &params, opts, &spec.times)?;
    let mut csv = Vec::new();
    write_rows(PROFILE_HEADER, &set.manifest_rows(), &mut csv)?;
    emit(spec, "profile.csv", &csv)?;
    for &t in &spec.times {
        let Ok(g0) = set.g0(t) else { continue };
        snapshot(spec, "g0", &Snapshot::complex(g0.clone(), t, 0.0))?;
        if set.has_g2() {
            snapshot(spec, "g2", &Snapshot::complex(set.g2(t)?.clone(), t, 0.0))?;
        }
    }
    match set.truncated_at() {
        Some(t) => Err(Failure::Run(Error::BlowUp {
            time: t,
            what: "focusing monitor tripped; profiles stored up to this time".into(),
        })),
        None => Ok(()),
    }
}

fn solve_kg(spec: &ExperimentSpec, dt: Option<f64>) -> Result<(), Failure> {
    spec.validate()?;
    let &[eps] = spec.eps.as_slice() else {
        return Err(Error::Config("solve-kg takes a single eps".into()).into());
    };
    let grid = spec.grid()?;
    let (phi, psi) = spec.initial_data()?;
    let mut params = KgParams::new(eps, spec.lambda, &grid, spec.t_max())?;
    params.safety = spec.dt_safety;
    let params = params.with_dt(dt.unwrap_or(spec.dt_safety * eps * eps))?;
    let s0 = kg_init(&phi, &psi, eps)?;
    let states = kg_solve(&s0, &params, &spec.times)?;
    let rows: Vec<[f64; 5]> = std::iter::once(&s0)
        .chain(&states)
        .map(|s| manifest_row(s, spec.lambda))
        .collect();
    let mut csv = Vec::new();
    write_rows(KG_HEADER, &rows, &mut csv)?;
    emit(spec, "kg.csv", &csv)?;
    for s in &states {
        snapshot(spec, "u", &Snapshot::real(s.u.clone(), s.t, eps))?;
    }
    Ok(())
}

/// Residual rows, then one least-squares fit row per time when the ladder
/// has at least three points.
fn residual_csv(spec: &ExperimentSpec, rows: &[(f64, f64, f64)]) -> Result<Vec<u8>, Failure> {
    let k = spec.order.k();
    let mut out = Vec::new();
    writeln!(out, "eps,time,order_k,norm_s,residual")?;
    for (eps, t, r) in rows {
        writeln!(out, "{eps},{t},{k},{},{r:.12e}", spec.norm_s)?;
    }
    for &t in &spec.times {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.1 == t).map(|r| (r.0, r.2)).collect();
        if let Ok(fit) = fit_rate(&pts) {
            writeln!(out, "fit,{t},{k},{},{:.12e},r2={:.6}", spec.norm_s, fit.slope, fit.r_squared)?;
        }
    }
    Ok(out)
}

/// `validate` for solves that do not use the eps ladder.
fn validate_without_eps(spec: &ExperimentSpec) -> Result<(), Error> {
    let mut probe = spec.clone();
    if probe.eps.is_empty() {
        probe.eps = vec![0.5];
    }
    probe.validate()
}
