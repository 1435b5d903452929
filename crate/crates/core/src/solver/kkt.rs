use serde::{Deserialize, Serialize};

use super::{DispatchSolution, DualSolution};
use crate::builder::ConicProblem;
use crate::error::{Error, Result};

/// First-order optimality audit of a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// Largest equality / inequality / cone violation of the primal point.
    pub primal_infeasibility: f64,
    /// Largest stationarity residual or dual-cone violation.
    pub dual_infeasibility: f64,
    /// Largest |multiplier × slack| over rows and the cone.
    pub complementarity: f64,
    /// |Σ_k λ_k − μ − δ − γ₂/√dfnad_max|, the stationarity of ΔP_L.
    pub contingency_identity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.primal_infeasibility
            .max(self.dual_infeasibility)
            .max(self.complementarity)
            .max(self.contingency_identity)
    }
}

pub fn kkt_residuals(problem: &ConicProblem, primal: &DispatchSolution, dual: &DualSolution) -> Result<KktReport> {
    let n = problem.n_vars();
    let x = &primal.x;
    if x.len() != n {
        return Err(Error::Dimension(format!("primal has {} entries, problem has {n} variables", x.len())));
    }
    if dual.eq_multipliers.len() != problem.eqs.len() || dual.ineq_multipliers.len() != problem.ineqs.len() {
        return Err(Error::Dimension(format!(
            "dual has {}+{} row multipliers, problem has {}+{} rows",
            dual.eq_multipliers.len(),
            dual.ineq_multipliers.len(),
            problem.eqs.len(),
            problem.ineqs.len()
        )));
    }

    let mut primal_inf: f64 = 0.0;
    let mut dual_inf: f64 = 0.0;
    let mut compl: f64 = 0.0;

    // ∇f + Σ y_i a_i − Mᵀ z_c, with s_c = M x the standard cone image.
    let mut grad: Vec<f64> = (0..n).map(|i| problem.quad[i] * x[i] + problem.linear[i]).collect();

    for (row, &y) in problem.eqs.iter().zip(&dual.eq_multipliers) {
        primal_inf = primal_inf.max((row.eval(x) - row.rhs).abs());
        for &(i, a) in &row.coeffs {
            grad[i] += y * a;
        }
    }
    for (row, &z) in problem.ineqs.iter().zip(&dual.ineq_multipliers) {
        let slack = row.rhs - row.eval(x);
        primal_inf = primal_inf.max(-slack);
        dual_inf = dual_inf.max(-z);
        compl = compl.max((z * slack).abs());
        for &(i, a) in &row.coeffs {
            grad[i] += z * a;
        }
    }

    let cone = &problem.cone;
    let s = cone.standard(x);
    primal_inf = primal_inf.max(s[1].hypot(s[2]) - s[0]);
    let zc = dual.cone_multiplier;
    dual_inf = dual_inf.max(zc[1].hypot(zc[2]) - zc[0]);
    compl = compl.max((zc[0] * s[0] + zc[1] * s[1] + zc[2] * s[2]).abs());
    for &(i, a) in &cone.u.0 {
        grad[i] -= (zc[0] + zc[1]) * a;
    }
    for &(i, a) in &cone.v.0 {
        grad[i] -= (zc[0] - zc[1]) * a;
    }
    for &(i, a) in &cone.w.0 {
        grad[i] -= zc[2] * 2.0 * a;
    }
    for g in &grad {
        dual_inf = dual_inf.max(g.abs());
    }

    let sum_lambda_k: f64 = dual.lambda_k.iter().sum();
    let identity =
        (sum_lambda_k - dual.mu - dual.delta - dual.gamma2 / problem.meta.dfnad_max.sqrt()).abs();

    Ok(KktReport {
        primal_infeasibility: primal_inf.max(0.0),
        dual_infeasibility: dual_inf.max(0.0),
        complementarity: compl,
        contingency_identity: identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build, RowKind, VarTag};
    use crate::solver::{solve, DEFAULT_TOL};

    #[test]
    fn optimal_solution_has_small_residuals() {
        let p = build(&crate::builder::tests::one_sg_one_ibr()).unwrap();
        let s = solve(&p, DEFAULT_TOL).unwrap();
        let r = kkt_residuals(&p, &s.dispatch, &s.duals).unwrap();
        assert!(r.max() <= 1e-6, "{r:?}");
    }

    #[test]
    fn perturbation_shows_up_in_primal_residual() {
        let p = build(&crate::builder::tests::one_sg_one_ibr()).unwrap();
        let s = solve(&p, DEFAULT_TOL).unwrap();
        let mut moved = s.dispatch.clone();
        let pe = p.vars.idx(VarTag::Dispatch(0));
        moved.x[pe] += 1.0;
        let r = kkt_residuals(&p, &moved, &s.duals).unwrap();
        // power balance has unit coefficient on every dispatch
        let coeff = p.rows_of(RowKind::PowerBalance).next().unwrap().coeffs[0].1;
        assert!(r.primal_infeasibility >= 1.0 * coeff - 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let p = build(&crate::builder::tests::one_sg_one_ibr()).unwrap();
        let s = solve(&p, DEFAULT_TOL).unwrap();
        let mut short = s.dispatch.clone();
        short.x.pop();
        assert!(matches!(kkt_residuals(&p, &short, &s.duals), Err(Error::Dimension(_))));
        let mut dual = s.duals.clone();
        dual.ineq_multipliers.push(0.0);
        assert!(matches!(kkt_residuals(&p, &s.dispatch, &dual), Err(Error::Dimension(_))));
    }
}
