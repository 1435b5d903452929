//! Post-contingency replay of a cleared dispatch.
//!
//! The aggregate swing equation `D·Δf′(t) = PFR(t) − loss` is integrated in
//! closed form: PFR ramps linearly to its ramp quantity over `t_pfr`, then
//! holds at the droop quantity. Frequency recovering to nominal is held there
//! (PFR is scheduled, not frequency-coupled, so the model has no overshoot).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::settlement::FrequencyTrace;
use crate::solver::DispatchSolution;

const ROCOF_TOL: f64 = 1e-9;
const NADIR_TOL: f64 = 1e-6;
const QSS_TOL: f64 = 1e-6;

/// Describes how the trajectory is continued past the PFR ramp.
pub const RECOVERY_MODEL: &str = "fixed-schedule PFR after ramp, recovery capped at nominal";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub loss: f64,
    pub d_total: f64,
    /// Largest |Δf′| while frequency is falling (attained at t = 0⁺).
    pub max_abs_rocof: f64,
    /// Largest Δf′ while frequency recovers.
    pub max_recovery_rocof: f64,
    pub nadir_deviation: f64,
    pub nadir_time: f64,
    /// Whether net power turns positive before the end of the trace.
    pub arrested: bool,
    /// Droop PFR minus loss, MW.
    pub qss_margin: f64,
    pub pass_rocof: bool,
    pub pass_nadir: bool,
    pub pass_qss: bool,
    pub recovery_model: String,
    pub trace: FrequencyTrace,
}

impl SecurityReport {
    pub fn passed(&self) -> bool {
        self.pass_rocof && self.pass_nadir && self.pass_qss
    }
}

/// Time and depth of the nadir when it falls inside the ramp (`pr >= loss`).
pub fn nadir_closed_form(d_total: f64, pr: f64, t_pfr: f64, loss: f64) -> Result<(f64, f64)> {
    if !(d_total > 0.0) {
        return Err(Error::Precondition(format!("total inertia factor {d_total} must be positive")));
    }
    if loss == 0.0 {
        return Ok((0.0, 0.0));
    }
    if !(pr >= loss) {
        return Err(Error::Precondition(format!(
            "ramp PFR {pr} MW does not arrest a {loss} MW loss within the ramp"
        )));
    }
    Ok((loss * t_pfr / pr, loss * loss * t_pfr / (2.0 * d_total * pr)))
}

/// Exact trajectory of one event.
struct Event {
    d: f64,
    loss: f64,
    pr: f64,
    pd: f64,
    t_pfr: f64,
    /// Time Δf returns to zero, if it does.
    t_rec: Option<f64>,
}

impl Event {
    fn new(d: f64, loss: f64, pr: f64, pd: f64, t_pfr: f64) -> Self {
        let mut ev = Event {
            d,
            loss,
            pr,
            pd,
            t_pfr,
            t_rec: None,
        };
        // during the ramp Δf = t·(pr·t/(2T) − loss)/D vanishes again at 2·loss·T/pr
        ev.t_rec = if pr > 0.0 && 2.0 * loss * t_pfr / pr <= t_pfr {
            Some(2.0 * loss * t_pfr / pr)
        } else if pd > loss {
            Some(t_pfr - ev.raw_df(t_pfr) * d / (pd - loss))
        } else {
            None
        };
        ev
    }

    fn raw_df(&self, t: f64) -> f64 {
        if t <= self.t_pfr {
            (self.pr * t * t / (2.0 * self.t_pfr) - self.loss * t) / self.d
        } else {
            self.raw_df(self.t_pfr) + (self.pd - self.loss) * (t - self.t_pfr) / self.d
        }
    }

    fn df(&self, t: f64) -> f64 {
        match self.t_rec {
            Some(tr) if t >= tr => 0.0,
            _ => self.raw_df(t).min(0.0),
        }
    }

    fn slope_left(&self, t: f64) -> f64 {
        if matches!(self.t_rec, Some(tr) if t > tr) {
            return 0.0;
        }
        if t <= self.t_pfr {
            (self.pr * t / self.t_pfr - self.loss) / self.d
        } else {
            (self.pd - self.loss) / self.d
        }
    }

    fn slope_right(&self, t: f64) -> f64 {
        if matches!(self.t_rec, Some(tr) if t >= tr) {
            return 0.0;
        }
        if t < self.t_pfr {
            (self.pr * t / self.t_pfr - self.loss) / self.d
        } else {
            (self.pd - self.loss) / self.d
        }
    }

    /// Sampled derivative: the mean of the one-sided values, which keeps the
    /// trapezoidal rule exact at jumps that land on a sample.
    fn dfdot(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.slope_right(0.0);
        }
        0.5 * (self.slope_left(t) + self.slope_right(t))
    }
}

/// Sample the event caused by `loss` MW at `step` seconds from t = 0 until
/// recovery or the end of the dispatch interval.
pub fn simulate_event(dispatch: &DispatchSolution, params: &SystemParams, loss: f64, step: f64) -> Result<FrequencyTrace> {
    if !(loss > 0.0) {
        return Err(Error::Precondition(format!("loss {loss} MW must be positive")));
    }
    if !(step > 0.0) || step > params.t_pfr / 20.0 * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "step {step} s must be positive and at most t_pfr/20 = {} s",
            params.t_pfr / 20.0
        )));
    }
    let d = dispatch.total_inertia / params.rocof_max;
    if !(d > 0.0) {
        return Err(Error::Precondition("no inertia is scheduled; the event is an instantaneous collapse".into()));
    }
    let ev = Event::new(d, loss, dispatch.total_pfr_r, dispatch.total_pfr_d, params.t_pfr);
    let horizon = ev.t_rec.map_or(params.dt, |tr| tr.min(params.dt));
    let n = (horizon / step).ceil() as usize;
    let times = (0..=n.max(1)).map(|i| i as f64 * step);
    let (df, dfdot) = times.map(|t| (ev.df(t), ev.dfdot(t))).unzip();
    FrequencyTrace::new(0.0, step, df, dfdot)
}

/// Replay the dispatch against `loss` (default: the cleared largest
/// contingency) at step `t_pfr/1000` and check the three security limits.
pub fn security_check(dispatch: &DispatchSolution, params: &SystemParams, loss: Option<f64>) -> Result<SecurityReport> {
    security_check_with_step(dispatch, params, loss, params.t_pfr / 1000.0)
}

pub fn security_check_with_step(
    dispatch: &DispatchSolution,
    params: &SystemParams,
    loss: Option<f64>,
    step: f64,
) -> Result<SecurityReport> {
    let loss = loss.unwrap_or(dispatch.contingency);
    let trace = simulate_event(dispatch, params, loss, step)?;
    let d_total = dispatch.total_inertia / params.rocof_max;
    let ev = Event::new(d_total, loss, dispatch.total_pfr_r, dispatch.total_pfr_d, params.t_pfr);

    let (i_min, &df_min) = trace
        .df
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("trace is non-empty");
    let (nadir_time, nadir_deviation, arrested) = match nadir_closed_form(d_total, ev.pr, ev.t_pfr, loss) {
        Ok((t, dev)) => (t, dev, true),
        // ramp smaller than the loss: only reachable with droop above ramp,
        // which the dispatch rows exclude; the decline then stops at t_pfr
        Err(_) if ev.pd >= loss - QSS_TOL => (ev.t_pfr, -ev.raw_df(ev.t_pfr), true),
        Err(_) => (trace.time(i_min), -df_min, false),
    };
    let max_abs_rocof = loss / d_total;
    let max_recovery_rocof = trace.dfdot.iter().fold(0.0_f64, |m, &v| m.max(v));
    let qss_margin = dispatch.total_pfr_d - loss;
    Ok(SecurityReport {
        loss,
        d_total,
        max_abs_rocof,
        max_recovery_rocof,
        nadir_deviation,
        nadir_time,
        arrested,
        qss_margin,
        pass_rocof: max_abs_rocof <= params.rocof_max + ROCOF_TOL,
        pass_nadir: arrested && nadir_deviation <= params.dfnad_max + NADIR_TOL,
        pass_qss: qss_margin >= -QSS_TOL,
        recovery_model: RECOVERY_MODEL.to_string(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::settlement::split_inertia_provision;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> SystemParams {
        let mut p = crate::builder::tests::one_sg_one_ibr().params;
        p.rocof_max = 1.0;
        p.t_pfr = 10.0;
        p.dt = 300.0;
        p.dfnad_max = 0.5;
        p
    }

    fn dispatch(total_inertia: f64, pr: f64, pd: f64, contingency: f64) -> DispatchSolution {
        DispatchSolution {
            resources: vec![],
            total_inertia,
            total_pfr_r: pr,
            total_pfr_d: pd,
            contingency,
            objective: 0.0,
            x: vec![],
        }
    }

    #[test]
    fn initial_rocof_is_loss_over_d() {
        let tr = simulate_event(&dispatch(100.0, 60.0, 60.0, 50.0), &params(), 50.0, 0.5).unwrap();
        assert_eq!(tr.dfdot[0], -0.5);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(nadir_closed_form(1000.0, 50.0, 10.0, 50.0).unwrap(), (10.0, 0.25));
        assert_eq!(nadir_closed_form(1000.0, 50.0, 10.0, 0.0).unwrap(), (0.0, 0.0));
        assert!(matches!(nadir_closed_form(1000.0, 40.0, 10.0, 50.0), Err(Error::Precondition(_))));
        assert!(matches!(nadir_closed_form(0.0, 40.0, 10.0, 5.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn simulated_nadir_matches_closed_form() {
        let tr = simulate_event(&dispatch(1000.0, 50.0, 50.0, 50.0), &params(), 50.0, 0.01).unwrap();
        let min = tr.df.iter().copied().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(min, -0.25, epsilon = 1e-3);
    }

    #[test]
    fn binding_cone_puts_nadir_on_the_limit() {
        // P_In·P_r = L²·rocof·T/(2·dfnad) with rocof = 1, T = 10, dfnad = 0.5
        let p = params();
        let (loss, p_in) = (40.0, 80.0);
        let pr = loss * loss * p.rocof_max * p.t_pfr / (2.0 * p.dfnad_max * p_in);
        let rep = security_check(&dispatch(p_in, pr, loss, loss), &p, None).unwrap();
        assert_abs_diff_eq!(rep.nadir_deviation, p.dfnad_max, epsilon = 1e-12);
        assert!(rep.passed());
    }

    #[test]
    fn unarrested_event_fails_nadir() {
        let rep = security_check(&dispatch(200.0, 30.0, 30.0, 50.0), &params(), None).unwrap();
        assert!(!rep.arrested && !rep.pass_nadir && !rep.pass_qss);
        assert_abs_diff_eq!(rep.qss_margin, -20.0);
    }

    #[test]
    fn rocof_binding_and_preconditions() {
        let rep = security_check(&dispatch(50.0, 500.0, 50.0, 50.0), &params(), None).unwrap();
        assert_abs_diff_eq!(rep.max_abs_rocof, 1.0, epsilon = 1e-15);
        assert!(rep.pass_rocof);
        let p = params();
        assert!(simulate_event(&dispatch(0.0, 50.0, 50.0, 50.0), &p, 50.0, 0.1).is_err());
        assert!(simulate_event(&dispatch(50.0, 50.0, 50.0, 50.0), &p, 50.0, 1.0).is_err());
        assert!(simulate_event(&dispatch(50.0, 50.0, 50.0, 50.0), &p, 0.0, 0.1).is_err());
    }

    #[test]
    fn early_recovery_inside_ramp_is_capped() {
        let tr = simulate_event(&dispatch(100.0, 200.0, 60.0, 20.0), &params(), 20.0, 0.01).unwrap();
        assert!(tr.df.iter().all(|&v| v <= 0.0));
        assert_eq!(*tr.df.last().unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn security_passes_when_model_rows_hold(loss in 1.0..100.0f64, extra_in in 0.0..3.0f64,
                                                 extra_r in 0.0..3.0f64, extra_d in 0.0..1.0f64) {
            let p = params();
            let p_in = loss * (1.0 + extra_in);
            let pr_min = loss * loss * p.rocof_max * p.t_pfr / (2.0 * p.dfnad_max * p_in);
            let pd = loss * (1.0 + extra_d);
            let pr = pr_min.max(pd) * (1.0 + extra_r);
            let rep = security_check(&dispatch(p_in, pr, pd, loss), &p, None).unwrap();
            prop_assert!(rep.passed(), "{:?}", (rep.max_abs_rocof, rep.nadir_deviation, rep.qss_margin));
            let sim_min = rep.trace.df.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!((sim_min + rep.nadir_deviation).abs() <= 1e-3);
        }

        #[test]
        fn nadir_monotone(d in 10.0..1000.0f64, pr in 50.0..200.0f64, loss in 1.0..50.0f64, t in 1.0..20.0f64) {
            let base = nadir_closed_form(d, pr, t, loss).unwrap().1;
            prop_assert!(nadir_closed_form(d * 1.1, pr, t, loss).unwrap().1 < base);
            prop_assert!(nadir_closed_form(d, pr * 1.1, t, loss).unwrap().1 < base);
            prop_assert!(nadir_closed_form(d, pr, t, loss * 1.01).unwrap().1 > base);
            prop_assert!(nadir_closed_form(d, pr, t * 1.1, loss).unwrap().1 > base);
        }

        #[test]
        fn inertial_energy_to_nadir(loss in 5.0..60.0f64, p_in in 60.0..200.0f64, ramp in 1.0..3.0f64) {
            let p = params();
            let disp = dispatch(p_in, loss * ramp, loss, loss);
            let rep = security_check(&disp, &p, None).unwrap();
            // cut at the first sample at or past the nadir
            let k = (rep.nadir_time / rep.trace.step).ceil() as usize;
            let mut head = rep.trace.clone();
            head.df.truncate(k + 1);
            head.dfdot.truncate(k + 1);
            let (e_pos, _) = split_inertia_provision(&head, rep.d_total).unwrap();
            prop_assert!((e_pos - rep.d_total * rep.nadir_deviation).abs() <= 1e-6 * (1.0 + e_pos));
        }
    }
}
