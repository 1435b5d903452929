//! Primal-dual solution of the dispatch program.
//!
//! The interior-point iterations are delegated to Clarabel. This module owns
//! the translation to Clarabel's standard form `Ax + s = b, s ∈ K`, the mapping
//! of its dual vector back to the market multipliers, and the KKT audit that
//! certifies every returned solution independently of the backend.

mod kkt;
mod oracle;

use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SecondOrderConeT, SolverStatus, SupportedConeT,
    ZeroConeT,
};
use serde::{Deserialize, Serialize};

pub use kkt::{kkt_residuals, KktReport};
pub use oracle::{brute_force_oracle, OracleResult};

use crate::builder::{ConicProblem, RowKind, RowTag, VarTag};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-9;
const MAX_ITER: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceKind {
    Sg,
    Ibr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceDispatch {
    pub id: String,
    pub kind: ResourceKind,
    pub p_e: f64,
    pub pfr_r: f64,
    pub pfr_d: f64,
    pub p_in: f64,
    /// Inertia proportionality factor, MW/(Hz/s).
    pub d: f64,
    pub e_end: Option<f64>,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub resources: Vec<ResourceDispatch>,
    pub total_inertia: f64,
    pub total_pfr_r: f64,
    pub total_pfr_d: f64,
    pub contingency: f64,
    pub objective: f64,
    /// Raw primal vector in registry order.
    pub x: Vec<f64>,
}

impl DispatchSolution {
    pub fn resource(&self, id: &str) -> Option<&ResourceDispatch> {
        self.resources.iter().find(|r| r.id == id)
    }

    pub fn max_dispatch(&self) -> f64 {
        self.resources.iter().map(|r| r.p_e).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Multiplier of one row, in the convention `L = f + y·(aᵀx − b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowDual {
    pub kind: RowKind,
    pub resource: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    /// Power-balance price.
    pub lambda_e: f64,
    /// Contingency-row multipliers, one per resource.
    pub lambda_k: Vec<f64>,
    pub mu: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub delta: f64,
    pub lambda_inertia: f64,
    pub lambda_pfr_r: f64,
    pub lambda_pfr_d: f64,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    /// Cone dual in standard orientation `(z0; z1, z2)`.
    pub cone_multiplier: [f64; 3],
    pub rows: Vec<RowDual>,
    pub max_stationarity_residual: f64,
    pub complementarity_residual: f64,
}

impl DualSolution {
    pub fn row(&self, kind: RowKind, resource: Option<usize>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.resource == resource)
            .map(|r| r.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: u32,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub solve_seconds: f64,
    pub kkt: KktReport,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub dispatch: DispatchSolution,
    pub duals: DualSolution,
    pub report: SolveReport,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.report.status == SolveStatus::Optimal
    }
}

fn csc_from_columns(m: usize, cols: Vec<Vec<(usize, f64)>>) -> CscMatrix<f64> {
    let n = cols.len();
    let mut colptr = Vec::with_capacity(n + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for mut col in cols {
        col.sort_by_key(|&(r, _)| r);
        for (r, v) in col {
            if let Some(last) = rowval.last() {
                if *last == r && rowval.len() > colptr[colptr.len() - 1] {
                    *nzval.last_mut().unwrap() += v;
                    continue;
                }
            }
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

/// Standard-form data `(A, b)` with rows ordered eqs, ineqs, cone.
fn standard_form(problem: &ConicProblem) -> (CscMatrix<f64>, Vec<f64>) {
    let n = problem.n_vars();
    let m = problem.eqs.len() + problem.ineqs.len() + 3;
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut b = Vec::with_capacity(m);
    for (r, row) in problem.rows().enumerate() {
        for &(i, a) in &row.coeffs {
            cols[i].push((r, a));
        }
        b.push(row.rhs);
    }
    let base = problem.eqs.len() + problem.ineqs.len();
    let c = &problem.cone;
    // s = (u+v, u−v, 2w) = −A_c·x
    for &(i, a) in &c.u.0 {
        cols[i].push((base, -a));
        cols[i].push((base + 1, -a));
    }
    for &(i, a) in &c.v.0 {
        cols[i].push((base, -a));
        cols[i].push((base + 1, a));
    }
    for &(i, a) in &c.w.0 {
        cols[i].push((base + 2, -2.0 * a));
    }
    b.extend([0.0; 3]);
    (csc_from_columns(m, cols), b)
}

/// Solve the program to tolerance `tol` (1e-10 ..= 1e-4).
pub fn solve(problem: &ConicProblem, tol: f64) -> Result<Solution> {
    if !(1e-10..=1e-4).contains(&tol) {
        return Err(Error::Precondition(format!("tol {tol} outside [1e-10, 1e-4]")));
    }
    let n = problem.n_vars();
    if problem.quad.len() != n || problem.linear.len() != n {
        return Err(Error::Dimension("cost vectors do not match variable count".into()));
    }

    let p_cols = problem
        .quad
        .iter()
        .enumerate()
        .map(|(i, &q)| if q != 0.0 { vec![(i, q)] } else { Vec::new() })
        .collect();
    let p_mat = csc_from_columns(n, p_cols);
    let (a_mat, b) = standard_form(problem);
    let cones: Vec<SupportedConeT<f64>> = vec![
        ZeroConeT(problem.eqs.len()),
        NonnegativeConeT(problem.ineqs.len()),
        SecondOrderConeT(3),
    ];
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(MAX_ITER)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .tol_ktratio(tol.max(1e-8))
        .build()
        .expect("static solver settings are valid");

    let started = Instant::now();
    let mut backend = DefaultSolver::new(&p_mat, &problem.linear, &a_mat, &b, &cones, settings)
        .map_err(|e| Error::Dimension(format!("{e:?}")))?;
    backend.solve();
    let elapsed = started.elapsed().as_secs_f64();
    let sol = &backend.solution;

    let primal_objective = sol.obj_val + problem.constant;
    let dual_objective = sol.obj_val_dual + problem.constant;
    let relative_gap = (primal_objective - dual_objective).abs() / primal_objective.abs().max(1.0);
    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::AlmostSolved if relative_gap <= 1e-6 => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };

    let x = sol.x.clone();
    let z = sol.z.clone();
    let dispatch = extract_dispatch(problem, &x);
    let mut duals = extract_duals(problem, &z);
    let kkt = kkt_residuals(problem, &dispatch, &duals)?;
    duals.max_stationarity_residual = kkt.dual_infeasibility;
    duals.complementarity_residual = kkt.complementarity;

    let report = SolveReport {
        status,
        iterations: sol.iterations,
        primal_objective,
        dual_objective,
        relative_gap,
        solve_seconds: elapsed,
        kkt,
    };
    Ok(Solution {
        dispatch,
        duals,
        report,
    })
}

fn extract_dispatch(problem: &ConicProblem, x: &[f64]) -> DispatchSolution {
    let v = &problem.vars;
    let meta = &problem.meta;
    let resources = meta
        .resource_ids
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let is_sg = k < meta.n_sgs;
            let p_in = x[v.idx(VarTag::Inertia(k))];
            let (d, e_end, loss) = if is_sg {
                (p_in / meta.rocof_max, None, None)
            } else {
                let j = k - meta.n_sgs;
                (
                    x[v.idx(VarTag::InertiaFactor(j))],
                    Some(x[v.idx(VarTag::SocEnd(j))]),
                    Some(x[v.idx(VarTag::Loss(j))]),
                )
            };
            ResourceDispatch {
                id: id.clone(),
                kind: if is_sg { ResourceKind::Sg } else { ResourceKind::Ibr },
                p_e: x[v.idx(VarTag::Dispatch(k))],
                pfr_r: x[v.idx(VarTag::PfrRamp(k))],
                pfr_d: x[v.idx(VarTag::PfrDroop(k))],
                p_in,
                d,
                e_end,
                loss,
            }
        })
        .collect();
    DispatchSolution {
        resources,
        total_inertia: x[v.idx(VarTag::TotalInertia)],
        total_pfr_r: x[v.idx(VarTag::TotalPfrRamp)],
        total_pfr_d: x[v.idx(VarTag::TotalPfrDroop)],
        contingency: x[v.idx(VarTag::Contingency)],
        objective: problem.objective(x),
        x: x.to_vec(),
    }
}

fn extract_duals(problem: &ConicProblem, z: &[f64]) -> DualSolution {
    let n_eq = problem.eqs.len();
    let n_in = problem.ineqs.len();
    let eq_multipliers = z[..n_eq].to_vec();
    let ineq_multipliers = z[n_eq..n_eq + n_in].to_vec();
    let cone_multiplier = [z[n_eq + n_in], z[n_eq + n_in + 1], z[n_eq + n_in + 2]];

    let tags: Vec<RowTag> = problem.rows().map(|r| r.tag).collect();
    let rows: Vec<RowDual> = tags
        .iter()
        .zip(z)
        .map(|(t, &value)| RowDual {
            kind: t.kind,
            resource: t.resource,
            value,
        })
        .collect();

    let first = |kind: RowKind| rows.iter().find(|r| r.kind == kind).map_or(0.0, |r| r.value);
    let n_res = problem.meta.resource_ids.len();
    let lambda_k = (0..n_res)
        .map(|k| {
            rows.iter()
                .find(|r| r.kind == RowKind::Contingency && r.resource == Some(k))
                .map_or(0.0, |r| r.value)
        })
        .collect();

    DualSolution {
        // balance row is written ΣP = D; the market price is the negated multiplier
        lambda_e: -first(RowKind::PowerBalance),
        lambda_k,
        mu: first(RowKind::Rocof),
        gamma1: -cone_multiplier[1],
        gamma2: -cone_multiplier[2],
        gamma3: cone_multiplier[0],
        delta: first(RowKind::Qss),
        lambda_inertia: first(RowKind::InertiaTotal),
        lambda_pfr_r: first(RowKind::PfrRampTotal),
        lambda_pfr_d: first(RowKind::PfrDroopTotal),
        eq_multipliers,
        ineq_multipliers,
        cone_multiplier,
        rows,
        max_stationarity_residual: f64::NAN,
        complementarity_residual: f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build, build_unchecked};
    use crate::model::{Direction, Scenario, SyncGenerator, SystemParams};

    /// One energy-producing generator plus a reserve-only unit priced out of
    /// the energy market (a lone unit cannot cover its own loss under the QSS
    /// row); security limits loose enough to never bind.
    pub(crate) fn single_sg(demand: f64) -> Scenario {
        Scenario {
            params: SystemParams {
                f0: 50.0,
                rocof_max: 1.0,
                dfnad_max: 1.0,
                dfqss_max: 1.0,
                t_pfr: 10.0,
                dt: 300.0,
                demand,
                direction: Direction::Up,
            },
            conservative_mode: true,
            positive_only: false,
            sgs: vec![SyncGenerator {
                id: "G1".into(),
                pmin: 24.0,
                pmax: 80.0,
                pgov_max: Some(200.0),
                cost_a: 0.02,
                cost_b: 2.0,
                cost_c: 0.0,
                h: 100.0,
                s_mva: 500.0,
                droop_gain: 100.0,
            },
            SyncGenerator {
                id: "R".into(),
                pmin: 0.0,
                pmax: 100.0,
                pgov_max: None,
                cost_a: 0.0,
                cost_b: 100.0,
                cost_c: 0.0,
                h: 0.0,
                s_mva: 100.0,
                droop_gain: 100.0,
            }],
            ibrs: vec![],
        }
    }

    #[test]
    fn single_generator_interior_optimum() {
        let p = build(&single_sg(50.0)).unwrap();
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.report.status, SolveStatus::Optimal);
        let g = &s.dispatch.resources[0];
        assert!((g.p_e - 50.0).abs() < 1e-6);
        // λ_E = b + 2·a·P = 2 + 2·0.02·50 = 4.0
        assert!((s.duals.lambda_e - 4.0).abs() < 1e-5, "λE = {}", s.duals.lambda_e);
        assert!((s.dispatch.objective - (0.02 * 2500.0 + 100.0)).abs() < 1e-5);
    }

    #[test]
    fn capacity_shortfall_is_infeasible() {
        let mut sc = single_sg(50.0);
        sc.params.demand = 200.0;
        let p = build_unchecked(&sc).unwrap();
        let s = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.report.status, SolveStatus::Infeasible);
    }

    #[test]
    fn tolerance_range_enforced() {
        let p = build(&single_sg(50.0)).unwrap();
        assert!(solve(&p, 1e-3).is_err());
        assert!(solve(&p, 1e-12).is_err());
    }

    #[test]
    fn dual_cone_membership_and_determinism() {
        let p = build(&crate::builder::tests::one_sg_one_ibr()).unwrap();
        let a = solve(&p, DEFAULT_TOL).unwrap();
        let b = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(a.report.status, SolveStatus::Optimal);
        let d = &a.duals;
        assert!(d.gamma1.powi(2) + d.gamma2.powi(2) <= d.gamma3.powi(2) + DEFAULT_TOL);
        assert_eq!(a.dispatch.x, b.dispatch.x);
        assert_eq!(a.duals.eq_multipliers, b.duals.eq_multipliers);
        assert_eq!(a.duals.ineq_multipliers, b.duals.ineq_multipliers);
    }
}
