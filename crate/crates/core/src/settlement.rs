//! Capacity and deployment settlement of the cleared services.
//!
//! Capacity payments are price × scheduled quantity. Deployment payments price
//! the energy actually exchanged during an event, measured from a sampled
//! frequency trace, at the real-time price. Resource `k` is attributed the
//! provision `−D_k·Δf′(t)`; positive parts are delivered energy, negative
//! parts absorbed energy.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::pricing::PriceSet;
use crate::solver::{DispatchSolution, ResourceKind};

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Uniformly sampled frequency deviation and its derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub t0: f64,
    pub step: f64,
    pub df: Vec<f64>,
    pub dfdot: Vec<f64>,
}

impl FrequencyTrace {
    pub fn new(t0: f64, step: f64, df: Vec<f64>, dfdot: Vec<f64>) -> Result<Self> {
        let tr = FrequencyTrace { t0, step, df, dfdot };
        tr.validate()?;
        Ok(tr)
    }

    pub fn len(&self) -> usize {
        self.df.len()
    }

    pub fn is_empty(&self) -> bool {
        self.df.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    pub fn duration(&self) -> f64 {
        self.step * self.len().saturating_sub(1) as f64
    }

    /// Slack allowed between a central difference of `df` and the range of
    /// `dfdot` over the same two steps.
    pub fn consistency_tolerance(&self) -> f64 {
        let peak = self.dfdot.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        0.05 * peak + 1e-9
    }

    /// Checks sampling and that `dfdot` is a derivative of `df`: every
    /// central difference must lie in the envelope of the neighbouring
    /// `dfdot` samples (exact for piecewise-linear `dfdot`, kinks included).
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Trace(format!("step {} must be positive", self.step)));
        }
        if self.df.len() != self.dfdot.len() {
            return Err(Error::Trace(format!(
                "df has {} samples, dfdot has {}",
                self.df.len(),
                self.dfdot.len()
            )));
        }
        if self.df.len() < 2 {
            return Err(Error::Trace("a trace needs at least two samples".into()));
        }
        if self.df.iter().chain(&self.dfdot).any(|v| !v.is_finite()) || !self.t0.is_finite() {
            return Err(Error::Trace("non-finite sample".into()));
        }
        let tol = self.consistency_tolerance();
        for i in 1..self.len() - 1 {
            let cd = (self.df[i + 1] - self.df[i - 1]) / (2.0 * self.step);
            let w = &self.dfdot[i - 1..=i + 1];
            let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if cd < lo - tol || cd > hi + tol {
                return Err(Error::Trace(format!(
                    "dfdot inconsistent with df at t = {}: central difference {cd}, samples in [{lo}, {hi}]",
                    self.time(i)
                )));
            }
        }
        Ok(())
    }

    /// Trapezoidal integral of `dfdot`.
    pub fn integral_dfdot(&self) -> f64 {
        self.dfdot.windows(2).map(|w| 0.5 * (w[0] + w[1]) * self.step).sum()
    }

    /// Columnar text with header `t,df,dfdot`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Trace(e.to_string());
        w.write_record(["t", "df", "dfdot"]).map_err(csv_err)?;
        for i in 0..self.len() {
            w.write_record([self.time(i).to_string(), self.df[i].to_string(), self.dfdot[i].to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rd.headers().map_err(|e| Error::Trace(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "df", "dfdot"] {
            return Err(Error::Trace(format!("expected header t,df,dfdot, found {:?}", headers)));
        }
        let (mut t, mut df, mut dfdot) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::Trace(e.to_string()))?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Trace(format!("row {}: missing column {i}", line + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Trace(format!("row {}: {e}", line + 2)))
            };
            t.push(field(0)?);
            df.push(field(1)?);
            dfdot.push(field(2)?);
        }
        if t.len() < 2 {
            return Err(Error::Trace("a trace needs at least two samples".into()));
        }
        let t0 = t[0];
        let step = (t[t.len() - 1] - t0) / (t.len() - 1) as f64;
        for (i, &ti) in t.iter().enumerate() {
            if (ti - (t0 + i as f64 * step)).abs() > 1e-6 * step {
                return Err(Error::Trace(format!("non-uniform sampling at row {}", i + 2)));
            }
        }
        FrequencyTrace::new(t0, step, df, dfdot)
    }
}

/// `∫ max(y, 0)` of the linear interpolant through `a`, `b` over width `h`.
fn positive_part(a: f64, b: f64, h: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        0.5 * (a + b) * h
    } else if a <= 0.0 && b <= 0.0 {
        0.0
    } else {
        let top = a.max(b);
        0.5 * top * top / (a - b).abs() * h
    }
}

/// `(e_pos, e_neg)` in MW·s: energy delivered while frequency falls and
/// absorbed while it rises, for an inertia factor `d` in MW/(Hz/s).
pub fn split_inertia_provision(trace: &FrequencyTrace, d: f64) -> Result<(f64, f64)> {
    trace.validate()?;
    if !(d >= 0.0) {
        return Err(Error::Precondition(format!("inertia factor {d} must be non-negative")));
    }
    let (mut pos, mut neg) = (0.0, 0.0);
    for w in trace.dfdot.windows(2) {
        pos += positive_part(-d * w[0], -d * w[1], trace.step);
        neg += positive_part(d * w[0], d * w[1], trace.step);
    }
    Ok((pos, neg))
}

/// Same split with absorption drawn at the slope `1/η`, as for a storage
/// resource with round-trip efficiency `η`.
pub fn split_inertia_provision_lossy(trace: &FrequencyTrace, d: f64, eta: f64) -> Result<(f64, f64)> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Precondition(format!("efficiency {eta} must lie in (0, 1]")));
    }
    let (pos, neg) = split_inertia_provision(trace, d)?;
    Ok((pos, neg / eta))
}

/// Inertial deployment of one resource over an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertiaDeployment {
    /// MW·s delivered.
    pub e_pos: f64,
    /// MW·s absorbed (already divided by η when lossy).
    pub e_neg: f64,
    /// Credit for delivered energy, $.
    pub pay_pos: f64,
    /// Charge for absorbed energy, $ (non-positive for non-negative prices).
    pub pay_neg: f64,
    /// Bound on the integration error of `pay_pos + pay_neg`, $.
    pub tolerance: f64,
}

impl InertiaDeployment {
    pub fn net(&self) -> f64 {
        self.pay_pos + self.pay_neg
    }
}

/// Deployment payments at `rtp` ($/MWh). `rtp_neg` prices the absorption leg
/// separately when the price is rerun after the event; `eta` enables lossy
/// absorption.
pub fn deployment_payments(
    trace: &FrequencyTrace,
    d: f64,
    rtp: f64,
    rtp_neg: Option<f64>,
    eta: Option<f64>,
) -> Result<InertiaDeployment> {
    let rtp_neg = rtp_neg.unwrap_or(rtp);
    if !rtp.is_finite() || !rtp_neg.is_finite() {
        return Err(Error::Precondition("real-time price must be finite".into()));
    }
    let (e_pos, e_neg) = match eta {
        Some(eta) => split_inertia_provision_lossy(trace, d, eta)?,
        None => split_inertia_provision(trace, d)?,
    };
    let df_change = trace.df[trace.len() - 1] - trace.df[0];
    let err = d * (trace.integral_dfdot() - df_change).abs();
    Ok(InertiaDeployment {
        e_pos,
        e_neg,
        pay_pos: rtp * e_pos / SECONDS_PER_HOUR,
        pay_neg: -rtp_neg * e_neg / SECONDS_PER_HOUR,
        tolerance: rtp.abs().max(rtp_neg.abs()) * err / SECONDS_PER_HOUR,
    })
}

/// Two-stage PFR energy (MW·s) delivered within `duration` seconds of the event.
pub fn pfr_energy_delivered(pfr_r: f64, pfr_d: f64, t_pfr: f64, duration: f64) -> f64 {
    if duration <= t_pfr {
        pfr_r * duration * duration / (2.0 * t_pfr)
    } else {
        0.5 * t_pfr * pfr_r + pfr_d * (duration - t_pfr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityPayment {
    pub inertia: f64,
    pub pfr_r: f64,
    pub pfr_d: f64,
}

pub fn capacity_payments(prices: &PriceSet, dispatch: &DispatchSolution) -> Result<Vec<(String, CapacityPayment)>> {
    if prices.pi_energy.len() != dispatch.resources.len() {
        return Err(Error::ResourceMismatch(format!(
            "price set covers {} resources, dispatch has {}",
            prices.pi_energy.len(),
            dispatch.resources.len()
        )));
    }
    Ok(dispatch
        .resources
        .iter()
        .map(|r| {
            (
                r.id.clone(),
                CapacityPayment {
                    inertia: prices.pi_inertia * r.p_in,
                    pfr_r: prices.pi_pfr_r * r.pfr_r,
                    pfr_d: prices.pi_pfr_d * r.pfr_d,
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementLine {
    pub resource: String,
    pub component: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SettlementStatement {
    pub lines: Vec<StatementLine>,
    /// Largest per-resource integration tolerance of the deployment legs, $.
    pub tolerance: f64,
}

impl SettlementStatement {
    pub fn amount(&self, resource: &str, component: &str) -> Option<f64> {
        self.lines
            .iter()
            .find(|l| l.resource == resource && l.component == component)
            .map(|l| l.amount)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for l in &self.lines {
            w.serialize(l).map_err(|e| Error::Trace(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let lines = rd
            .deserialize()
            .collect::<std::result::Result<Vec<StatementLine>, _>>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        Ok(SettlementStatement { lines, tolerance: 0.0 })
    }
}

/// Full statement for a cleared interval and one measured event. Storage
/// resources absorb at the `1/η` slope; generators are lossless.
pub fn settle(
    scenario: &Scenario,
    prices: &PriceSet,
    dispatch: &DispatchSolution,
    trace: &FrequencyTrace,
    rtp: f64,
    rtp_neg: Option<f64>,
) -> Result<SettlementStatement> {
    let ids = scenario.resource_ids();
    if ids.len() != dispatch.resources.len() || ids.iter().zip(&dispatch.resources).any(|(a, r)| *a != r.id) {
        return Err(Error::ResourceMismatch("dispatch resources do not match the scenario".into()));
    }
    let capacity = capacity_payments(prices, dispatch)?;
    let mut st = SettlementStatement::default();
    let duration = trace.duration();
    for (r, (_, cap)) in dispatch.resources.iter().zip(capacity) {
        let eta = match r.kind {
            ResourceKind::Sg => None,
            ResourceKind::Ibr => scenario.ibrs.iter().find(|j| j.id == r.id).map(|j| j.eta),
        };
        let dep = deployment_payments(trace, r.d, rtp, rtp_neg, eta)?;
        let pfr = rtp * pfr_energy_delivered(r.pfr_r, r.pfr_d, scenario.params.t_pfr, duration) / SECONDS_PER_HOUR;
        let parts = [
            ("capacity-inertia", cap.inertia),
            ("capacity-pfr-r", cap.pfr_r),
            ("capacity-pfr-d", cap.pfr_d),
            ("deploy-inertia-pos", dep.pay_pos),
            ("deploy-inertia-neg", dep.pay_neg),
            ("deploy-pfr", pfr),
        ];
        let net: f64 = parts.iter().map(|p| p.1).sum();
        for (component, amount) in parts.into_iter().chain([("net", net)]) {
            st.lines.push(StatementLine {
                resource: r.id.clone(),
                component: component.to_string(),
                amount,
            });
        }
        st.tolerance = st.tolerance.max(dep.tolerance);
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Piecewise-linear Δf through `(t, value)` knots (on the sample grid),
    /// with `dfdot` at a kink taken as the mean of the one-sided slopes.
    pub(crate) fn piecewise(knots: &[(f64, f64)], step: f64) -> FrequencyTrace {
        let end = knots.last().unwrap().0;
        let n = (end / step).round() as usize;
        let slope = |s: usize| (knots[s + 1].1 - knots[s].1) / (knots[s + 1].0 - knots[s].0);
        let mut df = Vec::new();
        let mut dfdot = Vec::new();
        for i in 0..=n {
            let t = i as f64 * step;
            let s = knots.windows(2).position(|w| t <= w[1].0 + 1e-9).unwrap_or(knots.len() - 2);
            df.push(knots[s].1 + slope(s) * (t - knots[s].0));
            let at_kink = (t - knots[s + 1].0).abs() < 1e-9 && s + 2 < knots.len();
            dfdot.push(if at_kink { 0.5 * (slope(s) + slope(s + 1)) } else { slope(s) });
        }
        FrequencyTrace::new(0.0, step, df, dfdot).unwrap()
    }

    #[test]
    fn symmetric_v_has_equal_legs() {
        let tr = piecewise(&[(0.0, 0.0), (5.0, -0.3), (10.0, 0.0)], 0.01);
        let (p, n) = split_inertia_provision(&tr, 40.0).unwrap();
        assert_abs_diff_eq!(p, n, epsilon = 1e-9);
        // the kink is smeared over one step
        assert_abs_diff_eq!(p, 12.0, epsilon = 40.0 * 0.06 * 0.01);
    }

    #[test]
    fn monotone_decline() {
        let tr = piecewise(&[(0.0, 0.0), (4.0, -0.4)], 0.05);
        let (p, n) = split_inertia_provision(&tr, 20.0).unwrap();
        assert_abs_diff_eq!(p, 8.0, epsilon = 1e-9);
        assert_eq!(n, 0.0);
        assert_eq!(split_inertia_provision(&tr, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_traces() {
        assert!(matches!(FrequencyTrace::new(0.0, 0.0, vec![0.0; 3], vec![0.0; 3]), Err(Error::Trace(_))));
        assert!(matches!(FrequencyTrace::new(0.0, 0.1, vec![0.0; 3], vec![0.0; 2]), Err(Error::Trace(_))));
        // dfdot claims a steady decline while df is flat
        assert!(matches!(FrequencyTrace::new(0.0, 0.1, vec![0.0; 5], vec![-1.0; 5]), Err(Error::Trace(_))));
    }

    #[test]
    fn capacity_payment_example() {
        let mut sol = crate::solver::solve(
            &crate::builder::build(&crate::builder::tests::one_sg_one_ibr()).unwrap(),
            crate::solver::DEFAULT_TOL,
        )
        .unwrap()
        .dispatch;
        sol.resources[0].p_in = 33.43;
        let prices = PriceSet {
            pi_energy: vec![3.71, 3.71],
            system_lambda: 3.71,
            pi_inertia: 0.96,
            pi_pfr_r: 0.0,
            pi_pfr_d: 0.0,
            setters: vec![],
        };
        let pay = capacity_payments(&prices, &sol).unwrap();
        assert_abs_diff_eq!(pay[0].1.inertia, 32.0928, epsilon = 1e-9);
        let mut wrong = prices.clone();
        wrong.pi_energy.pop();
        assert!(matches!(capacity_payments(&wrong, &sol), Err(Error::ResourceMismatch(_))));
    }

    #[test]
    fn lossless_full_recovery_nets_zero_and_lossy_is_a_charge() {
        let tr = piecewise(&[(0.0, 0.0), (3.0, -0.45), (12.0, 0.0)], 0.01);
        let rtp = 40.0;
        let lossless = deployment_payments(&tr, 25.0, rtp, None, None).unwrap();
        assert!(lossless.net().abs() <= lossless.tolerance + 1e-9);
        let lossy = deployment_payments(&tr, 25.0, rtp, None, Some(0.9)).unwrap();
        // measured absorption (the kink is smeared, so not exactly 25·0.45)
        let absorbed = lossy.e_neg * 0.9;
        let expected = -rtp * (1.0 / 0.9 - 1.0) * absorbed / 3600.0;
        assert!((lossy.net() - expected).abs() <= lossy.tolerance + 1e-9);
        let free = deployment_payments(&tr, 25.0, 0.0, None, Some(0.9)).unwrap();
        assert_eq!((free.pay_pos, free.pay_neg), (0.0, 0.0));
    }

    #[test]
    fn trace_csv_round_trip() {
        let tr = piecewise(&[(0.0, 0.0), (2.0, -0.1), (3.0, 0.0)], 0.1);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,df,dfdot\n"));
        let back = FrequencyTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.df, tr.df);
        assert_eq!(back.dfdot, tr.dfdot);
        assert_abs_diff_eq!(back.step, tr.step, epsilon = 1e-15);
    }

    #[test]
    fn pfr_energy_profile() {
        assert_abs_diff_eq!(pfr_energy_delivered(40.0, 30.0, 10.0, 5.0), 50.0);
        assert_abs_diff_eq!(pfr_energy_delivered(40.0, 30.0, 10.0, 300.0), 200.0 + 30.0 * 290.0);
    }

    proptest! {
        #[test]
        fn payments_linear_in_d_and_price(d in 0.0..100.0f64, k in 0.0..5.0f64, rtp in 0.0..200.0f64,
                                          depth in 0.01..1.0f64, tn in 50..500u32) {
            let tn = tn as f64 * 0.01;
            let tr = piecewise(&[(0.0, 0.0), (tn, -depth), (tn + 6.0, -0.2 * depth)], 0.01);
            let a = deployment_payments(&tr, d, rtp, None, None).unwrap();
            let b = deployment_payments(&tr, k * d, rtp, None, None).unwrap();
            let c = deployment_payments(&tr, d, k * rtp, None, None).unwrap();
            prop_assert!((b.pay_pos - k * a.pay_pos).abs() <= 1e-9 * (1.0 + b.pay_pos.abs()));
            prop_assert!((c.pay_neg - k * a.pay_neg).abs() <= 1e-9 * (1.0 + c.pay_neg.abs()));
        }

        #[test]
        fn closed_loop_traces_balance(d in 0.0..100.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64,
                                      t1 in 50..400u32, t2 in 50..400u32) {
            let (t1, t2) = (t1 as f64 * 0.01, t2 as f64 * 0.01);
            let tr = piecewise(&[(0.0, 0.0), (t1, a), (t1 + t2, b), (t1 + t2 + 2.0, 0.0)], 0.01);
            let (p, n) = split_inertia_provision(&tr, d).unwrap();
            prop_assert!((p - n).abs() <= 1e-9 * (1.0 + p));
        }
    }
}
