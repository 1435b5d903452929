//! One-parameter sweeps, solved concurrently.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::Serialize;

use sced_core::{build, prices, solve, Error, Scenario, SolveStatus};

use crate::{read_scenario, Format, OutOpts, SolveOpts};

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
pub enum Param {
    /// Inertia constant of every synchronous generator, s.
    H,
    Demand,
    RocofMax,
    DfnadMax,
    /// Round-trip efficiency of every inverter resource.
    Eta,
    /// Inertia capability cap of every inverter resource, MW/(Hz/s).
    DMax,
}

impl Param {
    fn name(self) -> &'static str {
        match self {
            Param::H => "h",
            Param::Demand => "demand",
            Param::RocofMax => "rocof_max",
            Param::DfnadMax => "dfnad_max",
            Param::Eta => "eta",
            Param::DMax => "d_max",
        }
    }

    fn set(self, sc: &mut Scenario, v: f64) -> Result<()> {
        match self {
            Param::H => sc.sgs.iter_mut().for_each(|g| g.h = v),
            Param::Demand => sc.params.demand = v,
            Param::RocofMax => sc.params.rocof_max = v,
            Param::DfnadMax => sc.params.dfnad_max = v,
            Param::Eta => sc.ibrs.iter_mut().for_each(|j| j.eta = v),
            Param::DMax => sc.ibrs.iter_mut().for_each(|j| j.d_max = v),
        }
        let empty = match self {
            Param::H => sc.sgs.is_empty(),
            Param::Eta | Param::DMax => sc.ibrs.is_empty(),
            _ => false,
        };
        if empty {
            bail!("the scenario has no resources carrying {}", self.name());
        }
        sc.validate().with_context(|| format!("{} = {v}", self.name()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub status: &'static str,
    pub objective: Option<f64>,
    pub lambda_e: Option<f64>,
    pub pi_inertia: Option<f64>,
    pub pi_pfr_r: Option<f64>,
    pub pi_pfr_d: Option<f64>,
    pub contingency: Option<f64>,
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        _ => "numerical-failure",
    }
}

fn solve_point(param: Param, value: f64, sc: &Scenario, tol: f64) -> Result<SweepRow> {
    let mut row = SweepRow {
        param: param.name(),
        value,
        status: "infeasible",
        objective: None,
        lambda_e: None,
        pi_inertia: None,
        pi_pfr_r: None,
        pi_pfr_d: None,
        contingency: None,
    };
    let problem = match build(sc) {
        Ok(p) => p,
        Err(Error::Infeasible(_)) => return Ok(row),
        Err(e) => return Err(e.into()),
    };
    let sol = solve(&problem, tol)?;
    row.status = status_name(sol.report.status);
    if sol.is_optimal() {
        let p = prices(&sol.duals, &sc.params)?;
        row.objective = Some(sol.dispatch.objective);
        row.lambda_e = Some(p.system_lambda);
        row.pi_inertia = Some(p.pi_inertia);
        row.pi_pfr_r = Some(p.pi_pfr_r);
        row.pi_pfr_d = Some(p.pi_pfr_d);
        row.contingency = Some(sol.dispatch.contingency);
    }
    Ok(row)
}

pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().with_context(|| format!("bad sweep value {s:?}")))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        bail!("empty value list");
    }
    Ok(values)
}

/// Direction of a column as the parameter increases, over optimal points only.
pub fn trend(rows: &[SweepRow], col: impl Fn(&SweepRow) -> Option<f64>) -> &'static str {
    let mut pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| col(r).map(|c| (r.value, c))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.len() < 2 {
        return "n/a";
    }
    let eps = |a: f64, b: f64| 1e-6 * a.abs().max(b.abs()).max(1.0);
    let up = pts.windows(2).all(|w| w[1].1 >= w[0].1 - eps(w[0].1, w[1].1));
    let down = pts.windows(2).all(|w| w[1].1 <= w[0].1 + eps(w[0].1, w[1].1));
    match (up, down) {
        (true, true) => "constant",
        (true, false) => "non-decreasing",
        (false, true) => "non-increasing",
        (false, false) => "mixed",
    }
}

pub fn cmd_sweep(path: &Path, param: Param, values: &str, opts: &SolveOpts, out: &OutOpts) -> Result<ExitCode> {
    let values = parse_values(values)?;
    let (base, _) = read_scenario(path, opts.mode)?;
    let points: Vec<Scenario> = values
        .iter()
        .map(|&v| {
            let mut sc = base.clone();
            param.set(&mut sc, v).map(|_| sc)
        })
        .collect::<Result<_>>()?;

    let rows: Vec<SweepRow> = std::thread::scope(|s| {
        let handles: Vec<_> = values
            .iter()
            .zip(&points)
            .map(|(&v, sc)| s.spawn(move || solve_point(param, v, sc, opts.tol)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect::<Result<_>>()
    })?;

    fs::create_dir_all(&out.out_dir).with_context(|| format!("creating {}", out.out_dir.display()))?;
    let csv_path = out.out_dir.join(SWEEP_FILE);
    let mut bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    fs::write(&csv_path, &bytes).with_context(|| format!("writing {}", csv_path.display()))?;

    match out.format {
        Format::Csv => print!("{}", String::from_utf8_lossy(&bytes)),
        Format::Table => {
            let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
            println!(
                "{:>10} {:>18} {:>12} {:>10} {:>10} {:>10} {:>10}",
                param.name(),
                "status",
                "objective",
                "lambda_e",
                "pi_in",
                "pi_pfr_r",
                "pi_pfr_d"
            );
            for r in &rows {
                println!(
                    "{:>10} {:>18} {:>12} {:>10} {:>10} {:>10} {:>10}",
                    r.value,
                    r.status,
                    f(r.objective),
                    f(r.lambda_e),
                    f(r.pi_inertia),
                    f(r.pi_pfr_r),
                    f(r.pi_pfr_d)
                );
            }
        }
    }
    let name = param.name();
    eprintln!("as {name} increases:");
    eprintln!("  objective   {}", trend(&rows, |r| r.objective));
    eprintln!("  lambda_e    {}", trend(&rows, |r| r.lambda_e));
    eprintln!("  pi_inertia  {}", trend(&rows, |r| r.pi_inertia));
    eprintln!("  pi_pfr_r    {}", trend(&rows, |r| r.pi_pfr_r));
    eprintln!("  pi_pfr_d    {}", trend(&rows, |r| r.pi_pfr_d));
    Ok(ExitCode::SUCCESS)
}
