//! `sced`: batch dispatch studies with inertia and PFR services.

mod report;
mod sweep;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sced_core::settlement::{settle, FrequencyTrace};
use sced_core::solver::DEFAULT_TOL;
use sced_core::verifier::security_check_with_step;
use sced_core::{build, load_scenario, prices, security_check, solve, Direction, Error, Scenario, SolveStatus};

use report::{RunReport, SecuritySummary};

const EXIT_IO: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "sced", version, about = "Security-constrained dispatch with inertia and PFR services")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clear a scenario and write a run directory (report.json, CSV tables, scenario copy).
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        solve: SolveOpts,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Re-solve a scenario for each value of one parameter.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        param: sweep::Param,
        /// Comma-separated values, e.g. `5,1`.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        solve: SolveOpts,
        #[command(flatten)]
        out: OutOpts,
    },
    /// Replay the cleared dispatch of a run through the swing equation.
    Verify {
        run_dir: PathBuf,
        /// Power loss in MW (defaults to the cleared contingency size).
        #[arg(long)]
        loss: Option<f64>,
        /// Sampling step in seconds (defaults to t_pfr / 1000).
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Settle a run against a frequency trace (t,df,dfdot CSV).
    Settle {
        run_dir: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Real-time energy price, $/MWh.
        #[arg(long)]
        rtp: f64,
        /// Price for absorbed energy, $/MWh (defaults to --rtp).
        #[arg(long)]
        rtp_neg: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Args)]
struct SolveOpts {
    /// positive-only / bidirectional set the service scope; up / down / updown set the event direction.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct OutOpts {
    #[arg(long, env = "SCED_OUT_DIR", default_value = "sced-out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    PositiveOnly,
    Bidirectional,
    Up,
    Down,
    Updown,
}

impl Mode {
    fn apply(self, sc: &mut Scenario) {
        match self {
            Mode::PositiveOnly => sc.positive_only = true,
            Mode::Bidirectional => sc.positive_only = false,
            Mode::Up => sc.params.direction = Direction::Up,
            Mode::Down => sc.params.direction = Direction::Down,
            Mode::Updown => sc.params.direction = Direction::UpDown,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
}

fn mode_label(sc: &Scenario) -> String {
    let scope = if sc.positive_only { "positive-only" } else { "bidirectional" };
    format!("{scope}/{}", sc.params.direction)
}

fn read_scenario(path: &Path, mode: Option<Mode>) -> Result<(Scenario, String)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut sc = load_scenario(&text).with_context(|| format!("loading {}", path.display()))?;
    if let Some(m) = mode {
        m.apply(&mut sc);
        sc.validate().with_context(|| format!("{} under the selected mode", path.display()))?;
    }
    Ok((sc, text))
}

fn status_code(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::Optimal => ExitCode::SUCCESS,
        SolveStatus::Infeasible => ExitCode::from(EXIT_INFEASIBLE),
        _ => ExitCode::from(EXIT_NUMERICAL),
    }
}

fn cmd_run(path: &Path, opts: &SolveOpts, out: &OutOpts) -> Result<ExitCode> {
    let (sc, input) = read_scenario(path, opts.mode)?;
    let problem = match build(&sc) {
        Ok(p) => p,
        Err(Error::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            return Ok(ExitCode::from(EXIT_INFEASIBLE));
        }
        Err(e) => return Err(e).context("building the dispatch problem"),
    };
    let sol = solve(&problem, opts.tol)?;
    let price_set = if sol.is_optimal() { Some(prices(&sol.duals, &sc.params)?) } else { None };

    let scenario_text = sc.to_toml();
    let mut rep = RunReport::new(&scenario_text, &input, mode_label(&sc), &sol, price_set);
    if sol.is_optimal() && sol.dispatch.contingency > 0.0 {
        let sec = security_check(&sol.dispatch, &sc.params, None)?;
        rep.security = Some(SecuritySummary::from(&sec));
    }

    fs::create_dir_all(&out.out_dir).with_context(|| format!("creating {}", out.out_dir.display()))?;
    let dir = &out.out_dir;
    fs::write(dir.join(report::SCENARIO_FILE), &scenario_text)?;
    report::write_json(&dir.join(report::REPORT_FILE), &rep)?;
    let ids = sc.resource_ids();
    if let (Some(d), Some(p), Some(du)) = (&rep.dispatch, &rep.prices, &rep.duals) {
        report::dispatch_csv(d, fs::File::create(dir.join(report::DISPATCH_FILE))?)?;
        report::prices_csv(p, &ids, fs::File::create(dir.join(report::PRICES_FILE))?)?;
        report::duals_csv(du, &ids, fs::File::create(dir.join(report::DUALS_FILE))?)?;
    }

    let stdout = io::stdout();
    match out.format {
        Format::Table => print!("{}", report::render_run(&rep)),
        Format::Csv => match &rep.dispatch {
            Some(d) => report::dispatch_csv(d, stdout.lock())?,
            None => println!("status\n{:?}", rep.status),
        },
    }
    if !sol.is_optimal() {
        eprintln!("solver status: {:?}", sol.report.status);
    }
    Ok(status_code(sol.report.status))
}

fn cmd_verify(dir: &Path, loss: Option<f64>, step: Option<f64>, format: Format) -> Result<ExitCode> {
    let run = report::load_run(dir)?;
    let p = &run.scenario.params;
    let sec = security_check_with_step(&run.dispatch, p, loss, step.unwrap_or(p.t_pfr / 1000.0))
        .context("replaying the event")?;
    let mut trace_bytes = Vec::new();
    sec.trace.write_csv(&mut trace_bytes)?;
    fs::write(dir.join(report::TRACE_FILE), &trace_bytes)?;

    #[derive(serde::Serialize)]
    struct VerifyReport<'a> {
        scenario_digest: &'a str,
        trace_digest: String,
        security: SecuritySummary,
    }
    let summary = SecuritySummary::from(&sec);
    report::write_json(
        &dir.join(report::SECURITY_FILE),
        &VerifyReport {
            scenario_digest: &run.report.scenario_digest,
            trace_digest: report::digest(&trace_bytes),
            security: summary.clone(),
        },
    )?;
    match format {
        Format::Table => print!("{}", report::render_security(&summary)),
        Format::Csv => io::stdout().write_all(&trace_bytes)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_settle(dir: &Path, trace_path: &Path, rtp: f64, rtp_neg: Option<f64>, format: Format) -> Result<ExitCode> {
    let run = report::load_run(dir)?;
    let file = fs::File::open(trace_path).with_context(|| format!("opening {}", trace_path.display()))?;
    let trace = FrequencyTrace::read_csv(file).with_context(|| format!("reading {}", trace_path.display()))?;
    let st = settle(&run.scenario, &run.prices, &run.dispatch, &trace, rtp, rtp_neg)?;
    let mut bytes = Vec::new();
    st.write_csv(&mut bytes)?;
    fs::write(dir.join(report::SETTLEMENT_FILE), &bytes)?;
    match format {
        Format::Csv => io::stdout().write_all(&bytes)?,
        Format::Table => {
            println!("{:<10} {:<20} {:>14}", "resource", "component", "amount $");
            for l in &st.lines {
                println!("{:<10} {:<20} {:>14.6}", l.resource, l.component, l.amount);
            }
            println!("integration tolerance {:.3e} $", st.tolerance);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_IO) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run { scenario, solve, out } => cmd_run(scenario, solve, out),
        Command::Sweep {
            scenario,
            param,
            values,
            solve,
            out,
        } => sweep::cmd_sweep(scenario, *param, values, solve, out),
        Command::Verify {
            run_dir,
            loss,
            step,
            format,
        } => cmd_verify(run_dir, *loss, *step, *format),
        Command::Settle {
            run_dir,
            trace,
            rtp,
            rtp_neg,
            format,
        } => cmd_settle(run_dir, trace, *rtp, *rtp_neg, *format),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_IO)
    })
}
