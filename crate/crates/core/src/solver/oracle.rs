//! Exhaustive grid search over energy dispatch for tiny instances.
//!
//! Each resource in turn balances demand while the others walk the grid.
//! Every grid point is a feasible dispatch of the original problem, so the
//! best cost found is an upper bound on the optimum. Only the energy dispatch
//! is discretized; the remaining variables are fixed by dominance:
//!
//! - ΔP_L is the largest dispatch (raising it only tightens security rows);
//! - generator PFR is free, so each unit offers its full ramp and droop room;
//! - inverter loss sits on its epigraph and droop PFR covers exactly the QSS gap;
//! - the inverter's inertia quantity solves a one-dimensional convex problem
//!   whose minimizer lies at an interval end, the kink of the ramp requirement,
//!   or the stationary point of `c_in·x + c_r·K/(S + x)`.

use super::super::model::{pfr_capability, sg_inertia_params, Direction, InverterResource, Scenario};
use crate::error::{Error, Result};

const MAX_RESOURCES: usize = 3;
const MAX_POINTS: f64 = 2e8;
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    /// Dispatch of the best point, in scenario resource order.
    pub dispatch: Vec<f64>,
    pub contingency: f64,
    /// Inertia committed by the inverter at the best point, if any.
    pub ibr_inertia: Option<f64>,
    pub points_evaluated: u64,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    fn all() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    fn empty() -> Self {
        Interval {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    fn meet(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo.max(o.lo),
            hi: self.hi.min(o.hi),
        }
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi + FEAS_EPS
    }
}

/// Ramp requirement `pr(x) = max(p0, K/(S+x) − B)` of the inverter given its
/// inertia `x`, where `S`/`B` are the generators' inertia and ramp totals.
#[derive(Debug, Clone, Copy)]
struct RampNeed {
    p0: f64,
    k: f64,
    s: f64,
    b: f64,
}

impl RampNeed {
    fn at(&self, x: f64) -> f64 {
        if self.k <= 0.0 {
            return self.p0;
        }
        let y = self.s + x;
        if y <= 0.0 {
            return f64::INFINITY;
        }
        self.p0.max(self.k / y - self.b)
    }

    /// `{x : c1·x + c2·pr(x) <= c0}` for `c1, c2 >= 0` (a convex sublevel set).
    fn sublevel(&self, c1: f64, c2: f64, c0: f64) -> Interval {
        let mut out = if c1 > 0.0 {
            Interval {
                lo: f64::NEG_INFINITY,
                hi: (c0 - c2 * self.p0) / c1,
            }
        } else if c2 * self.p0 <= c0 + FEAS_EPS {
            Interval::all()
        } else {
            return Interval::empty();
        };
        if self.k <= 0.0 || c2 == 0.0 {
            return out;
        }
        // c1·(y − S) + c2·(K/y − B) <= c0 over y = S + x > 0
        let branch = if c1 == 0.0 {
            let rhs = c0 + c2 * self.b;
            if rhs <= 0.0 {
                return Interval::empty();
            }
            Interval {
                lo: c2 * self.k / rhs,
                hi: f64::INFINITY,
            }
        } else {
            let qb = -(c0 + c2 * self.b + c1 * self.s);
            let disc = qb * qb - 4.0 * c1 * c2 * self.k;
            if disc < 0.0 {
                return Interval::empty();
            }
            let root = disc.sqrt();
            let y2 = (-qb + root) / (2.0 * c1);
            if y2 <= 0.0 {
                return Interval::empty();
            }
            // product of roots is positive, so y1 > 0 as well
            let y1 = c2 * self.k / (c1 * y2);
            Interval { lo: y1, hi: y2 }
        };
        out = out.meet(Interval {
            lo: branch.lo - self.s,
            hi: branch.hi - self.s,
        });
        out
    }
}

struct Fleet<'a> {
    scenario: &'a Scenario,
    sg_in: Vec<f64>,
    sg_caps: Vec<(f64, f64)>,
    ibr_caps: Option<(f64, f64)>,
    k_per_l2: f64,
}

struct Point {
    cost: f64,
    contingency: f64,
    ibr_inertia: Option<f64>,
}

impl<'a> Fleet<'a> {
    fn new(scenario: &'a Scenario) -> Self {
        let p = &scenario.params;
        let sg_in = scenario
            .sgs
            .iter()
            .map(|g| sg_inertia_params(g.h, g.s_mva, p.f0, p.rocof_max).1)
            .collect();
        let cap = |gain: f64, pmax: f64| pfr_capability(gain, pmax.max(0.0), p.f0, p.dfnad_max, p.dfqss_max);
        Fleet {
            scenario,
            sg_in,
            sg_caps: scenario.sgs.iter().map(|g| cap(g.droop_gain, g.pmax)).collect(),
            ibr_caps: scenario.ibrs.first().map(|j| cap(j.droop_gain, j.pmax)),
            // nadir: P_In·P_r >= L²·rocof_max·t_pfr / (2·dfnad_max)
            k_per_l2: p.rocof_max * p.t_pfr / (2.0 * p.dfnad_max),
        }
    }

    /// Cheapest completion of a dispatch, or `None` if no completion is feasible.
    fn evaluate(&self, sg_dispatch: &[f64], ibr_dispatch: Option<f64>) -> Option<Point> {
        let sc = self.scenario;
        let l = sg_dispatch
            .iter()
            .copied()
            .chain(ibr_dispatch)
            .fold(0.0_f64, f64::max);

        let mut cost = 0.0;
        let (mut in_sg, mut pr_sg, mut pd_sg) = (0.0, 0.0, 0.0);
        for (i, (g, &pe)) in sc.sgs.iter().zip(sg_dispatch).enumerate() {
            cost += g.cost(pe);
            let (r_cap, d_cap) = self.sg_caps[i];
            let pr = r_cap.min((g.pgov() - pe).max(0.0));
            let pd = d_cap.min((g.pmax - pe).max(0.0)).min(pr);
            in_sg += self.sg_in[i];
            pr_sg += pr;
            pd_sg += pd;
        }
        let k = self.k_per_l2 * l * l;

        let Some(pe) = ibr_dispatch else {
            let ok = in_sg >= l - FEAS_EPS && pd_sg >= l - FEAS_EPS && in_sg * pr_sg >= k - FEAS_EPS;
            return ok.then_some(Point {
                cost,
                contingency: l,
                ibr_inertia: None,
            });
        };
        let ibr = &sc.ibrs[0];
        let (extra, x) = self.inverter_completion(ibr, pe, l, in_sg, pr_sg, pd_sg, k)?;
        Some(Point {
            cost: cost + extra,
            contingency: l,
            ibr_inertia: Some(x),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn inverter_completion(
        &self,
        ibr: &InverterResource,
        pe: f64,
        l: f64,
        in_sg: f64,
        pr_sg: f64,
        pd_sg: f64,
        k: f64,
    ) -> Option<(f64, f64)> {
        let sc = self.scenario;
        let p = &sc.params;
        let (r_cap, d_cap) = self.ibr_caps.expect("inverter present");
        let sqrt_eta = ibr.eta.sqrt();

        let loss = ((1.0 / sqrt_eta - 1.0) * pe).max((sqrt_eta - 1.0) * pe);
        let e_end = ibr.e0 - (pe + loss) * p.dt;
        if e_end < ibr.emin - FEAS_EPS || e_end > ibr.emax + FEAS_EPS {
            return None;
        }

        let pd = (l - pd_sg).max(0.0);
        if pd > d_cap + FEAS_EPS {
            return None;
        }
        let (alpha, _beta) = sc.relaxation(ibr);
        let room = ibr.pmax - pe;
        if !sc.conservative_mode && pd > room + FEAS_EPS {
            return None;
        }

        let need = RampNeed {
            p0: pd,
            k,
            s: in_sg,
            b: pr_sg,
        };
        let mut feasible = Interval {
            lo: 0.0_f64.max(l - in_sg),
            hi: ibr.d_max * p.rocof_max,
        };
        if !sc.positive_only {
            feasible = feasible.meet(Interval {
                lo: f64::NEG_INFINITY,
                hi: ibr.eta * (pe - ibr.pmin),
            });
            if !sc.conservative_mode {
                feasible = feasible.meet(Interval {
                    lo: ibr.eta * (pe - ibr.pmax),
                    hi: f64::INFINITY,
                });
            }
        }
        feasible = feasible.meet(need.sublevel(0.0, 1.0, r_cap));
        if sc.conservative_mode {
            feasible = feasible.meet(need.sublevel(1.0, 1.0, room));
        } else {
            feasible = feasible.meet(Interval {
                lo: f64::NEG_INFINITY,
                hi: room,
            });
            feasible = feasible.meet(need.sublevel(alpha, alpha, room));
        }
        let budget = sqrt_eta * ((ibr.e0 - ibr.emin).min(e_end - ibr.emin)) - pd * (p.dt - p.t_pfr);
        feasible = feasible.meet(need.sublevel(p.dfnad_max / p.rocof_max, 0.5 * p.t_pfr, budget));
        if feasible.is_empty() {
            return None;
        }
        let hi = feasible.hi.max(feasible.lo);

        let objective = |x: f64| ibr.cost_inertia * x + ibr.cost_pfr_r * need.at(x);
        let mut candidates = vec![feasible.lo, hi];
        if k > 0.0 {
            candidates.push(k / (pd + pr_sg) - in_sg);
            if ibr.cost_inertia > 0.0 && ibr.cost_pfr_r > 0.0 {
                candidates.push((ibr.cost_pfr_r * k / ibr.cost_inertia).sqrt() - in_sg);
            }
        }
        let (best_x, best) = candidates
            .into_iter()
            .filter(|c| c.is_finite())
            .map(|c| c.clamp(feasible.lo, hi))
            .map(|c| (c, objective(c)))
            .fold((f64::NAN, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        if !best.is_finite() {
            return None;
        }
        let extra = ibr.cost_energy * (pe.abs() + loss) + best + ibr.cost_pfr_d * pd;
        Some((extra, best_x))
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    if hi - g[n] > 1e-12 {
        g.push(hi);
    }
    g
}

/// Best objective over a `grid_step` MW grid of energy dispatches (≤ 3
/// resources, at most one inverter, up-direction events, β = 0).
pub fn brute_force_oracle(scenario: &Scenario, grid_step: f64) -> Result<OracleResult> {
    if !(grid_step > 0.0) {
        return Err(Error::Precondition(format!("grid_step {grid_step} must be positive")));
    }
    if scenario.resource_count() > MAX_RESOURCES {
        return Err(Error::Unsupported(format!(
            "instance too large: {} resources (oracle handles at most {MAX_RESOURCES})",
            scenario.resource_count()
        )));
    }
    if scenario.ibrs.len() > 1 {
        return Err(Error::Unsupported("oracle handles at most one inverter".into()));
    }
    if scenario.params.direction != Direction::Up {
        return Err(Error::Unsupported("oracle handles up-direction events only".into()));
    }
    if let Some(j) = scenario.ibrs.first() {
        if !scenario.conservative_mode && j.beta != 0.0 {
            return Err(Error::Unsupported("oracle requires beta = 0".into()));
        }
    }
    scenario.validate()?;

    let fleet = Fleet::new(scenario);
    let demand = scenario.params.demand;
    let n_sg = scenario.sgs.len();
    let has_ibr = !scenario.ibrs.is_empty();

    // Each resource takes the balancing role in turn; the others walk the grid.
    let ranges: Vec<(f64, f64)> = scenario
        .sgs
        .iter()
        .map(|g| (g.pmin, g.pmax))
        .chain(scenario.ibrs.iter().map(|j| (j.pmin, j.pmax)))
        .collect();
    let n = ranges.len();
    let axes: Vec<Vec<f64>> = ranges.iter().map(|&(lo, hi)| grid(lo, hi, grid_step)).collect();
    let points: f64 = (0..n)
        .map(|skip| (0..n).filter(|&k| k != skip).map(|k| axes[k].len() as f64).product::<f64>())
        .sum();
    if points > MAX_POINTS {
        return Err(Error::Unsupported(format!("instance too large: {points:.3e} grid points")));
    }

    let mut best: Option<(Point, Vec<f64>)> = None;
    let mut evaluated = 0u64;
    for slack_k in 0..n {
        let free_k: Vec<usize> = (0..n).filter(|&k| k != slack_k).collect();
        let (slack_lo, slack_hi) = ranges[slack_k];
        let mut idx = vec![0usize; free_k.len()];
        let mut dispatch = vec![0.0; n];
        'walk: loop {
            let mut used = 0.0;
            for (&k, &i) in free_k.iter().zip(&idx) {
                dispatch[k] = axes[k][i];
                used += axes[k][i];
            }
            let slack = demand - used;
            if slack >= slack_lo - FEAS_EPS && slack <= slack_hi + FEAS_EPS {
                dispatch[slack_k] = slack.clamp(slack_lo, slack_hi);
                evaluated += 1;
                let ibr = has_ibr.then(|| dispatch[n_sg]);
                if let Some(pt) = fleet.evaluate(&dispatch[..n_sg], ibr) {
                    if best.as_ref().map_or(true, |(b, _)| pt.cost < b.cost) {
                        best = Some((pt, dispatch.clone()));
                    }
                }
            }
            // odometer increment
            let mut d = 0;
            loop {
                if d == idx.len() {
                    break 'walk;
                }
                idx[d] += 1;
                if idx[d] < axes[free_k[d]].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
    best.map(|(pt, dispatch)| OracleResult {
        objective: pt.cost,
        dispatch,
        contingency: pt.contingency,
        ibr_inertia: pt.ibr_inertia,
        points_evaluated: evaluated,
    })
    .ok_or_else(|| Error::Infeasible("no feasible grid point".into()))
}
