mod config;

use clap::{ColorChoice, Parser, Subcommand};
use config::{ClaimSection, ModelSection, RunConfig, RunSection, VerifySection};
use qhedge_core::measure::{read_space_columns, Measure};
use qhedge_core::numeric::fmt17;
use qhedge_core::profile::{default_range, profile_rows, write_profile_csv, DEFAULT_POINTS};
use qhedge_core::report::{crosscheck_report, model_lines, solution_report, to_json, verify_report};
use qhedge_core::{conditional_np, crosscheck_discrete, mc_report, solve, HedgeError, Model};
use serde_json::json;
use std::io::{IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "qhedge", version, about = "Quantile and shortfall hedging of calls under a shortfall cap")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Call prices and the feasible capital range.
    Price(Common),
    /// Solve for the optimal payoff.
    Solve(Common),
    /// Solve, then check by Monte Carlo and against the discrete optimum.
    Verify(Common),
    /// Conditional Neyman-Pearson test on a finite space (CSV: state,p,q[,floor]).
    Np(NpArgs),
    /// CSV sweep of the optimal payoff over terminal prices.
    Profile(ProfileArgs),
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bs or ep.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "gamma-drift")]
    gamma_drift: Option<f64>,
    /// Horizon in years.
    #[arg(short = 'T')]
    horizon: Option<f64>,
    /// Strike.
    #[arg(short = 'K')]
    strike: Option<f64>,
    /// Shortfall cap.
    #[arg(short = 'c')]
    cap: Option<f64>,
    /// Initial capital.
    #[arg(short = 'x')]
    capital: Option<f64>,
    /// qh, gqh or wes.
    #[arg(long)]
    criterion: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "mc-samples")]
    mc_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "grid-points")]
    grid_points: Option<usize>,
    /// Emit JSON instead of the text report.
    #[arg(long)]
    json: bool,
    /// Write the effective configuration (config file plus flags) as TOML.
    #[arg(long = "emit-config")]
    emit_config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct NpArgs {
    /// CSV with columns state,p,q and an optional floor column.
    #[arg(long)]
    space: PathBuf,
    /// Q-budget for the test.
    #[arg(long, allow_hyphen_values = true)]
    budget: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, clap::Args)]
struct ProfileArgs {
    #[command(flatten)]
    common: Common,
    /// Number of sweep points.
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    /// Lower end of the sweep (default: P-quantile 0.001).
    #[arg(long)]
    lo: Option<f64>,
    /// Upper end of the sweep (default: P-quantile 0.999).
    #[arg(long)]
    hi: Option<f64>,
}

impl Common {
    fn flags(&self) -> RunConfig {
        RunConfig {
            model: ModelSection {
                kind: self.model.clone(),
                s0: self.s0,
                alpha: self.alpha,
                sigma: self.sigma,
                lambda: self.lambda,
                gamma_drift: self.gamma_drift,
                horizon: self.horizon,
            },
            claim: ClaimSection { strike: self.strike, cap: self.cap },
            run: RunSection { capital: self.capital, criterion: self.criterion.clone(), out: self.out.clone() },
            verify: VerifySection { mc_samples: self.mc_samples, seed: self.seed, grid_n: self.grid_points },
        }
    }

    fn config(&self) -> Result<RunConfig, HedgeError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.overlay(&self.flags());
        if let Some(path) = &self.emit_config {
            std::fs::write(path, cfg.to_toml())?;
        }
        Ok(cfg)
    }
}

fn styled() -> bool {
    std::env::var_os("HEDGE_NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn section(name: &str, to_terminal: bool) -> String {
    if to_terminal {
        format!("\x1b[1m[{name}]\x1b[0m\n")
    } else {
        format!("[{name}]\n")
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), HedgeError> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn price(args: &Common) -> Result<(), HedgeError> {
    let cfg = args.config()?;
    let model = cfg.model()?;
    let strike = cfg.strike()?;
    let call_k = model.call_price(strike)?;
    let cap = cfg.claim.cap;
    let shifted = cap.map(|c| model.call_price(strike + c)).transpose()?;
    let text = if args.json {
        to_json(&json!({ "model": model, "strike": strike, "cap": cap, "call_k": call_k, "call_k_plus_c": shifted }))?
            + "\n"
    } else {
        let mut out = String::new();
        model_lines(&mut out, &model);
        out += &format!("strike: {}\ncall_k: {}\n", fmt17(strike), fmt17(call_k));
        if let (Some(c), Some(p)) = (cap, shifted) {
            out += &format!("cap: {}\ncall_k_plus_c: {}\n", fmt17(c), fmt17(p));
            out += &format!("capital_range: [{}, {})\n", fmt17(p), fmt17(call_k));
        }
        out
    };
    emit(cfg.run.out.as_ref(), &text)
}

fn solve_cmd(args: &Common) -> Result<(), HedgeError> {
    let cfg = args.config()?;
    let sol = solve(&cfg.problem()?)?;
    let text = if args.json { to_json(&sol)? + "\n" } else { solution_report(&sol) };
    emit(cfg.run.out.as_ref(), &text)
}

fn verify_cmd(args: &Common) -> Result<(), HedgeError> {
    let cfg = args.config()?;
    let problem = cfg.problem()?;
    let sol = solve(&problem)?;
    let mc = mc_report(&sol, &problem, cfg.mc_samples(), cfg.seed())?;
    let cross = match problem.model {
        Model::Bs(_) => Some(crosscheck_discrete(&problem, cfg.grid_n())?),
        Model::Ep(_) => None,
    };
    let text = if args.json {
        to_json(&json!({ "solution": sol, "monte_carlo": mc, "crosscheck": cross }))? + "\n"
    } else {
        let color = cfg.run.out.is_none() && styled();
        let mut out = section("solution", color) + &solution_report(&sol);
        out += &section("monte_carlo", color);
        out += &verify_report(&mc);
        out += &section("crosscheck", color);
        match &cross {
            Some(r) => out += &crosscheck_report(r),
            None => out += "unsupported: the exponential Poisson solver is checked against its atom ladder\n",
        }
        out
    };
    emit(cfg.run.out.as_ref(), &text)
}

fn np_cmd(args: &NpArgs) -> Result<(), HedgeError> {
    let file = std::fs::File::open(&args.space)?;
    let (space, floor) = read_space_columns(file)?;
    let floor = floor.unwrap_or_else(|| vec![0.0; space.len()]);
    let sol = conditional_np(&space, &floor, args.budget)?;
    let text = if args.json {
        to_json(&sol)? + "\n"
    } else {
        let mut out = format!(
            "k: {}\ngamma: {}\nobjective: {}\ncost: {}\nslack: {}\nprobability_q: {}\ntest:\n",
            fmt17(sol.k),
            fmt17(sol.gamma),
            fmt17(sol.objective),
            fmt17(sol.cost),
            fmt17(sol.slack),
            fmt17(space.total_mass(Measure::Q)),
        );
        for ((atom, f), v) in space.atoms().iter().zip(&floor).zip(sol.test.values()) {
            out += &format!("  {} {} {}\n", fmt17(atom.state), fmt17(*f), fmt17(*v));
        }
        out
    };
    emit(args.out.as_ref(), &text)
}

fn profile_cmd(args: &ProfileArgs) -> Result<(), HedgeError> {
    let cfg = args.common.config()?;
    let problem = cfg.problem()?;
    let sol = solve(&problem)?;
    let (dlo, dhi) = default_range(&problem.model)?;
    let range = (args.lo.unwrap_or(dlo), args.hi.unwrap_or(dhi));
    let rows = profile_rows(&sol, &problem, range, args.points)?;
    let mut buf = Vec::new();
    write_profile_csv(&rows, &mut buf)?;
    emit(cfg.run.out.as_ref(), &String::from_utf8(buf).expect("csv is utf-8"))
}

fn main() -> ExitCode {
    let color = if std::env::var_os("HEDGE_NO_COLOR").is_some() { ColorChoice::Never } else { ColorChoice::Auto };
    let matches = <Cli as clap::CommandFactory>::command().color(color).get_matches();
    let cli = match <Cli as clap::FromArgMatches>::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match &cli.command {
        Command::Price(a) => price(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Np(a) => np_cmd(a),
        Command::Profile(a) => profile_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
