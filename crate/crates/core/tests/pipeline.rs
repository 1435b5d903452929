mod common;

use approx::assert_abs_diff_eq;
use sced_core::settlement::{settle, FrequencyTrace};
use sced_core::solver::{brute_force_oracle, DEFAULT_TOL};
use sced_core::{build, contingency_setter, prices, security_check, solve, SolveStatus};

#[test]
fn six_gen_clears_verifies_and_settles() {
    let sc = common::six_gen(5.0, false);
    let sol = solve(&build(&sc).unwrap(), DEFAULT_TOL).unwrap();
    assert_eq!(sol.report.status, SolveStatus::Optimal);
    let p = prices(&sol.duals, &sc.params).unwrap();
    assert!(p.pi_inertia > 0.0 && p.pi_pfr_r > 0.0);

    let setters = contingency_setter(&sol.dispatch, &sol.duals, 1e-6);
    assert!(!setters.is_empty());
    for id in &setters {
        assert_abs_diff_eq!(sol.dispatch.resource(id).unwrap().p_e, sol.dispatch.contingency, epsilon = 1e-5);
    }

    let sec = security_check(&sol.dispatch, &sc.params, None).unwrap();
    assert!(sec.passed(), "{sec:?}");

    // round-trip the trace through CSV the way the CLI hands it to settlement
    let mut bytes = Vec::new();
    sec.trace.write_csv(&mut bytes).unwrap();
    let trace = FrequencyTrace::read_csv(bytes.as_slice()).unwrap();
    assert_eq!(trace.df.len(), sec.trace.df.len());

    let st = settle(&sc, &p, &sol.dispatch, &trace, 40.0, None).unwrap();
    for id in sc.resource_ids() {
        let parts: f64 = [
            "capacity-inertia",
            "capacity-pfr-r",
            "capacity-pfr-d",
            "deploy-inertia-pos",
            "deploy-inertia-neg",
            "deploy-pfr",
        ]
        .iter()
        .map(|c| st.amount(&id, c).unwrap())
        .sum();
        assert_abs_diff_eq!(st.amount(&id, "net").unwrap(), parts, epsilon = 1e-9);
    }
    // synchronous units carry no storage loss, so their deployment legs cancel
    for g in &sc.sgs {
        let net = st.amount(&g.id, "deploy-inertia-pos").unwrap() + st.amount(&g.id, "deploy-inertia-neg").unwrap();
        assert!(net.abs() <= st.tolerance + 1e-12, "{}: {net}", g.id);
    }
}

#[test]
fn oracle_bounds_solver_on_a_few_random_instances() {
    let mut rng = common::rng(11);
    let mut checked = 0;
    while checked < 3 {
        let sc = common::random_small_scenario(&mut rng);
        let sol = solve(&build(&sc).unwrap(), DEFAULT_TOL).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        let o = brute_force_oracle(&sc, 0.05).unwrap();
        let obj = sol.dispatch.objective;
        assert!(o.objective >= obj - 1e-6 * obj.abs().max(1.0), "{} < {obj}", o.objective);
        assert!((o.objective - obj) / obj.abs().max(1.0) < 5e-3);
        checked += 1;
    }
}
