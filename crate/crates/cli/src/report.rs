//! Run artifacts: the JSON report, CSV tables and their human-readable forms.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sced_core::solver::Solution;
use sced_core::{DispatchSolution, PriceSet, Scenario, SecurityReport, SolveReport, SolveStatus};

pub const REPORT_FILE: &str = "report.json";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const DISPATCH_FILE: &str = "dispatch.csv";
pub const PRICES_FILE: &str = "prices.csv";
pub const DUALS_FILE: &str = "duals.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const SECURITY_FILE: &str = "security.json";
pub const SETTLEMENT_FILE: &str = "settlement.csv";

pub fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Contingency-related multipliers, in the order μ, γ1, γ2, γ3, δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualTable {
    pub mu: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub delta: f64,
    pub lambda_e: f64,
    pub lambda_k: Vec<f64>,
}

/// Security report without the sampled trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecuritySummary {
    pub loss: f64,
    pub d_total: f64,
    pub max_abs_rocof: f64,
    pub max_recovery_rocof: f64,
    pub nadir_deviation: f64,
    pub nadir_time: f64,
    pub arrested: bool,
    pub qss_margin: f64,
    pub pass_rocof: bool,
    pub pass_nadir: bool,
    pub pass_qss: bool,
    pub passed: bool,
    pub recovery_model: String,
}

impl From<&SecurityReport> for SecuritySummary {
    fn from(r: &SecurityReport) -> Self {
        SecuritySummary {
            loss: r.loss,
            d_total: r.d_total,
            max_abs_rocof: r.max_abs_rocof,
            max_recovery_rocof: r.max_recovery_rocof,
            nadir_deviation: r.nadir_deviation,
            nadir_time: r.nadir_time,
            arrested: r.arrested,
            qss_margin: r.qss_margin,
            pass_rocof: r.pass_rocof,
            pass_nadir: r.pass_nadir,
            pass_qss: r.pass_qss,
            passed: r.passed(),
            recovery_model: r.recovery_model.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    /// SHA-256 of the `scenario.toml` written next to the report.
    pub scenario_digest: String,
    /// SHA-256 of the scenario file as given on the command line.
    pub input_digest: String,
    pub mode: String,
    pub status: SolveStatus,
    pub solve: SolveReport,
    pub dispatch: Option<DispatchSolution>,
    pub prices: Option<PriceSet>,
    pub duals: Option<DualTable>,
    pub security: Option<SecuritySummary>,
}

impl RunReport {
    pub fn new(scenario_text: &str, input_text: &str, mode: String, sol: &Solution, prices: Option<PriceSet>) -> Self {
        let optimal = sol.is_optimal();
        let d = &sol.duals;
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_digest: digest(scenario_text.as_bytes()),
            input_digest: digest(input_text.as_bytes()),
            mode,
            status: sol.report.status,
            solve: sol.report.clone(),
            dispatch: optimal.then(|| sol.dispatch.clone()),
            duals: optimal.then(|| DualTable {
                mu: d.mu,
                gamma1: d.gamma1,
                gamma2: d.gamma2,
                gamma3: d.gamma3,
                delta: d.delta,
                lambda_e: d.lambda_e,
                lambda_k: d.lambda_k.clone(),
            }),
            prices: if optimal { prices } else { None },
            security: None,
        }
    }
}

/// A run directory read back for `verify` and `settle`, digest-checked.
pub struct RunArtifacts {
    pub scenario: Scenario,
    pub report: RunReport,
    pub dispatch: DispatchSolution,
    pub prices: PriceSet,
}

pub fn load_run(dir: &Path) -> Result<RunArtifacts> {
    let report_path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&report_path).with_context(|| format!("reading {}", report_path.display()))?;
    let report: RunReport =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", report_path.display()))?;
    let sc_path = dir.join(SCENARIO_FILE);
    let sc_text = fs::read_to_string(&sc_path).with_context(|| format!("reading {}", sc_path.display()))?;
    let found = digest(sc_text.as_bytes());
    if found != report.scenario_digest {
        bail!(
            "{} does not match the report (digest {found}, report expects {})",
            sc_path.display(),
            report.scenario_digest
        );
    }
    let scenario = sced_core::load_scenario(&sc_text).with_context(|| format!("loading {}", sc_path.display()))?;
    let (Some(dispatch), Some(prices)) = (report.dispatch.clone(), report.prices.clone()) else {
        bail!("run in {} has status {:?}; nothing to verify or settle", dir.display(), report.status);
    };
    Ok(RunArtifacts {
        scenario,
        report,
        dispatch,
        prices,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

// --- CSV tables -------------------------------------------------------------

#[derive(Serialize)]
struct DispatchRow<'a> {
    id: &'a str,
    kind: &'static str,
    p_e: f64,
    pfr_r: f64,
    pfr_d: f64,
    p_in: f64,
    d: f64,
    e_end: Option<f64>,
    loss: Option<f64>,
}

#[derive(Serialize)]
struct NamedValue<'a> {
    name: &'a str,
    resource: &'a str,
    value: f64,
}

pub fn dispatch_csv<W: Write>(dispatch: &DispatchSolution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &dispatch.resources {
        w.serialize(DispatchRow {
            id: &r.id,
            kind: match r.kind {
                sced_core::solver::ResourceKind::Sg => "sg",
                sced_core::solver::ResourceKind::Ibr => "ibr",
            },
            p_e: r.p_e,
            pfr_r: r.pfr_r,
            pfr_d: r.pfr_d,
            p_in: r.p_in,
            d: r.d,
            e_end: r.e_end,
            loss: r.loss,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn named_csv<W: Write>(rows: &[(String, String, f64)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (name, resource, value) in rows {
        w.serialize(NamedValue {
            name,
            resource,
            value: *value,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn price_rows(prices: &PriceSet, ids: &[String]) -> Vec<(String, String, f64)> {
    let mut rows = vec![
        ("lambda_e".to_string(), String::new(), prices.system_lambda),
        ("pi_inertia".into(), String::new(), prices.pi_inertia),
        ("pi_pfr_r".into(), String::new(), prices.pi_pfr_r),
        ("pi_pfr_d".into(), String::new(), prices.pi_pfr_d),
    ];
    rows.extend(ids.iter().zip(&prices.pi_energy).map(|(id, p)| ("pi_energy".into(), id.clone(), *p)));
    rows
}

fn dual_rows(duals: &DualTable, ids: &[String]) -> Vec<(String, String, f64)> {
    let mut rows: Vec<(String, String, f64)> = [
        ("mu", duals.mu),
        ("gamma1", duals.gamma1),
        ("gamma2", duals.gamma2),
        ("gamma3", duals.gamma3),
        ("delta", duals.delta),
        ("lambda_e", duals.lambda_e),
    ]
    .into_iter()
    .map(|(n, v)| (n.to_string(), String::new(), v))
    .collect();
    rows.extend(ids.iter().zip(&duals.lambda_k).map(|(id, v)| ("lambda_k".into(), id.clone(), *v)));
    rows
}

pub fn prices_csv<W: Write>(prices: &PriceSet, ids: &[String], out: W) -> Result<()> {
    named_csv(&price_rows(prices, ids), out)
}

pub fn duals_csv<W: Write>(duals: &DualTable, ids: &[String], out: W) -> Result<()> {
    named_csv(&dual_rows(duals, ids), out)
}

// --- human-readable tables --------------------------------------------------

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

pub fn render_run(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "sced {}  scenario {}", report.tool_version, &report.scenario_digest[..16]);
    let _ = writeln!(
        s,
        "mode {}  status {:?}  iterations {}  gap {:.2e}",
        report.mode, report.status, report.solve.iterations, report.solve.relative_gap
    );
    let Some(d) = &report.dispatch else {
        return s;
    };
    let _ = writeln!(s, "objective {:.4} $\n", d.objective);
    let _ = writeln!(
        s,
        "{:<10} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12}",
        "resource", "kind", "P_E", "P_PFR_r", "P_PFR_d", "P_In", "D", "E_end"
    );
    for r in &d.resources {
        let kind = match r.kind {
            sced_core::solver::ResourceKind::Sg => "sg",
            sced_core::solver::ResourceKind::Ibr => "ibr",
        };
        let _ = writeln!(
            s,
            "{:<10} {:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>12}",
            r.id,
            kind,
            r.p_e,
            r.pfr_r,
            r.pfr_d,
            r.p_in,
            r.d,
            fmt_opt(r.e_end)
        );
    }
    let _ = writeln!(
        s,
        "{:<10} {:>4} {:>10} {:>10.4} {:>10.4} {:>10.4}   contingency {:.4} MW\n",
        "total", "", "", d.total_pfr_r, d.total_pfr_d, d.total_inertia, d.contingency
    );
    let ids: Vec<String> = d.resources.iter().map(|r| r.id.clone()).collect();
    if let Some(p) = &report.prices {
        let _ = writeln!(s, "prices");
        for (name, res, v) in price_rows(p, &ids) {
            let _ = writeln!(s, "  {:<12} {:<8} {v:>12.6}", name, res);
        }
    }
    if let Some(du) = &report.duals {
        let _ = writeln!(s, "duals");
        for (name, res, v) in dual_rows(du, &ids) {
            let _ = writeln!(s, "  {:<12} {:<8} {v:>12.6}", name, res);
        }
    }
    if let Some(sec) = &report.security {
        s.push_str(&render_security(sec));
    }
    s
}

pub fn render_security(sec: &SecuritySummary) -> String {
    let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
    let mut s = String::new();
    let _ = writeln!(s, "security (loss {:.4} MW, D {:.4} MW/(Hz/s))", sec.loss, sec.d_total);
    let _ = writeln!(s, "  rocof  {:>10.6} Hz/s  {}", sec.max_abs_rocof, mark(sec.pass_rocof));
    let _ = writeln!(
        s,
        "  nadir  {:>10.6} Hz at {:.4} s  {}{}",
        sec.nadir_deviation,
        sec.nadir_time,
        mark(sec.pass_nadir),
        if sec.arrested { "" } else { " (not arrested)" }
    );
    let _ = writeln!(s, "  qss    {:>10.6} MW margin  {}", sec.qss_margin, mark(sec.pass_qss));
    let _ = writeln!(s, "  recovery model: {}", sec.recovery_model);
    s
}
