//! Assembly of the dispatch problem as a convex program.
//!
//! The program is
//!
//! ```text
//! minimize    ½·xᵀ·diag(q)·x + cᵀx + c0
//! subject to  eq rows      aᵀx  = b
//!             ineq rows    aᵀx <= b
//!             nadir cone   u·v >= w²,  u, v >= 0
//! ```
//!
//! where the cone operands are linear in x: `u = P_in/(2·rocof_max)`,
//! `v = P_pfr_r/t_pfr`, `w = ΔP_L/(2·sqrt(dfnad_max))`. Every row carries a
//! [`RowTag`] so multipliers can be mapped back to the constraint they price.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use crate::model::Direction;
use crate::error::{Error, Result};
use crate::model::{pfr_capability, sg_inertia_params, Scenario};

/// Semantic tag of a decision variable. Resource indices follow
/// [`Scenario::resource_ids`] (generators first); inverter-only variables are
/// indexed by position in `scenario.ibrs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VarTag {
    Dispatch(usize),
    PfrRamp(usize),
    PfrDroop(usize),
    Inertia(usize),
    InertiaFactor(usize),
    SocEnd(usize),
    Loss(usize),
    AbsDispatch(usize),
    PfrEnergy(usize),
    InertiaEnergy(usize),
    Contingency,
    TotalInertia,
    TotalPfrRamp,
    TotalPfrDroop,
}

#[derive(Debug, Clone, Serialize)]
pub struct Variable {
    pub name: String,
    pub tag: VarTag,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VarRegistry {
    vars: Vec<Variable>,
    #[serde(skip)]
    index: BTreeMap<VarTag, usize>,
}

impl VarRegistry {
    fn add(&mut self, tag: VarTag, name: String) -> usize {
        let idx = self.vars.len();
        self.vars.push(Variable { name, tag });
        self.index.insert(tag, idx);
        idx
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn get(&self, tag: VarTag) -> Option<usize> {
        self.index.get(&tag).copied()
    }

    pub fn idx(&self, tag: VarTag) -> usize {
        self.index[&tag]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Variable> {
        self.vars.iter()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.vars[idx].name
    }
}

/// Constraint family of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    PowerBalance,
    InertiaTotal,
    PfrRampTotal,
    PfrDroopTotal,
    Contingency,
    ContingencyFloor,
    Rocof,
    Qss,
    InertiaQuantity,
    InertiaFactorMax,
    InertiaFactorMin,
    InertiaEnergy,
    PfrRampCap,
    PfrDroopCap,
    PfrDroopWithinRamp,
    PfrRampFloor,
    PfrDroopFloor,
    PfrEnergy,
    SgDispatchMin,
    SgDispatchMax,
    SgGovernorHeadroom,
    SgDroopHeadroom,
    IbrDispatchMin,
    IbrDispatchMax,
    IbrInstantHeadroom,
    IbrNadirHeadroom,
    IbrRecoveryUpper,
    IbrRecoveryLower,
    IbrDroopHeadroom,
    IbrCombinedHeadroom,
    IbrFootroom,
    ReserveAtStart,
    ReserveAtEnd,
    SocDynamics,
    SocMin,
    SocMax,
    LossDischarge,
    LossCharge,
    AbsPositive,
    AbsNegative,
}

impl RowKind {
    /// Short stable label naming the constraint.
    pub fn label(self) -> &'static str {
        use RowKind::*;
        match self {
            PowerBalance => "power-balance",
            InertiaTotal => "inertia-total",
            PfrRampTotal => "pfr-ramp-total",
            PfrDroopTotal => "pfr-droop-total",
            Contingency => "largest-contingency",
            ContingencyFloor => "contingency-floor",
            Rocof => "rocof-limit",
            Qss => "qss-limit",
            InertiaQuantity => "inertia-quantity",
            InertiaFactorMax => "inertia-factor-max",
            InertiaFactorMin => "inertia-factor-min",
            InertiaEnergy => "inertia-energy",
            PfrRampCap => "pfr-ramp-cap",
            PfrDroopCap => "pfr-droop-cap",
            PfrDroopWithinRamp => "pfr-droop-within-ramp",
            PfrRampFloor => "pfr-ramp-floor",
            PfrDroopFloor => "pfr-droop-floor",
            PfrEnergy => "pfr-energy",
            SgDispatchMin => "sg-dispatch-min",
            SgDispatchMax => "sg-dispatch-max",
            SgGovernorHeadroom => "sg-governor-headroom",
            SgDroopHeadroom => "sg-droop-headroom",
            IbrDispatchMin => "ibr-dispatch-min",
            IbrDispatchMax => "ibr-dispatch-max",
            IbrInstantHeadroom => "ibr-instant-headroom",
            IbrNadirHeadroom => "ibr-nadir-headroom",
            IbrRecoveryUpper => "ibr-recovery-upper",
            IbrRecoveryLower => "ibr-recovery-lower",
            IbrDroopHeadroom => "ibr-droop-headroom",
            IbrCombinedHeadroom => "ibr-combined-headroom",
            IbrFootroom => "ibr-footroom",
            ReserveAtStart => "energy-reserve-start",
            ReserveAtEnd => "energy-reserve-end",
            SocDynamics => "soc-dynamics",
            SocMin => "soc-min",
            SocMax => "soc-max",
            LossDischarge => "loss-discharge",
            LossCharge => "loss-charge",
            AbsPositive => "abs-dispatch-pos",
            AbsNegative => "abs-dispatch-neg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowTag {
    pub kind: RowKind,
    /// Resource index (solver order) for per-resource rows.
    pub resource: Option<usize>,
    /// Event direction the row protects, `None` for direction-neutral rows.
    pub direction: Option<Direction>,
}

/// How to reflect a direction-sensitive row for the opposite event sign:
/// the pivot coefficient (dispatch or end-of-interval SoC) is negated and the
/// right-hand side replaced by `rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mirror {
    pub pivot: Option<usize>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub tag: RowTag,
    pub mirror: Option<Mirror>,
}

impl Row {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(i, a)| a * x[i]).sum()
    }

    fn mirrored(&self) -> Row {
        let m = self.mirror.expect("row has no mirror");
        let coeffs = self
            .coeffs
            .iter()
            .map(|&(i, a)| if Some(i) == m.pivot { (i, -a) } else { (i, a) })
            .collect();
        let direction = self.tag.direction.map(|d| match d {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::UpDown => Direction::UpDown,
        });
        Row {
            coeffs,
            rhs: m.rhs,
            tag: RowTag { direction, ..self.tag },
            mirror: Some(Mirror {
                pivot: m.pivot,
                rhs: self.rhs,
            }),
        }
    }
}

/// Linear expression `Σ a_i·x_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinExpr(pub Vec<(usize, f64)>);

impl LinExpr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|&(i, a)| a * x[i]).sum()
    }
}

/// Rotated cone `u·v >= w²`, `u, v >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotatedCone {
    pub u: LinExpr,
    pub v: LinExpr,
    pub w: LinExpr,
}

impl RotatedCone {
    /// Standard-cone image `(u+v, u−v, 2w)`; membership ⇔ `‖(u−v, 2w)‖ <= u+v`.
    pub fn standard(&self, x: &[f64]) -> [f64; 3] {
        let (u, v, w) = (self.u.eval(x), self.v.eval(x), self.w.eval(x));
        [u + v, u - v, 2.0 * w]
    }
}

/// Constants needed downstream to interpret a solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemMeta {
    pub resource_ids: Vec<String>,
    pub n_sgs: usize,
    pub rocof_max: f64,
    pub dfnad_max: f64,
    pub t_pfr: f64,
    pub dt: f64,
    pub demand: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConicProblem {
    pub vars: VarRegistry,
    /// Diagonal of the quadratic cost matrix (objective uses ½·xᵀQx).
    pub quad: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub eqs: Vec<Row>,
    pub ineqs: Vec<Row>,
    pub cone: RotatedCone,
    pub meta: ProblemMeta,
}

impl ConicProblem {
    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let quad: f64 = self.quad.iter().zip(x).map(|(q, xi)| 0.5 * q * xi * xi).sum();
        let lin: f64 = self.linear.iter().zip(x).map(|(c, xi)| c * xi).sum();
        quad + lin + self.constant
    }

    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.eqs.iter().chain(self.ineqs.iter())
    }

    pub fn rows_of(&self, kind: RowKind) -> impl Iterator<Item = &Row> {
        self.rows().filter(move |r| r.tag.kind == kind)
    }

    /// Variables that appear in no row, no cone operand and not in the objective.
    pub fn orphan_variables(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_vars()];
        for r in self.rows() {
            for &(i, a) in &r.coeffs {
                if a != 0.0 {
                    used[i] = true;
                }
            }
        }
        for e in [&self.cone.u, &self.cone.v, &self.cone.w] {
            for &(i, _) in &e.0 {
                used[i] = true;
            }
        }
        for i in 0..self.n_vars() {
            if self.quad[i] != 0.0 || self.linear[i] != 0.0 {
                used[i] = true;
            }
        }
        (0..self.n_vars()).filter(|&i| !used[i]).collect()
    }
}

/// Index bookkeeping while assembling.
struct Layout {
    dispatch: Vec<usize>,
    pfr_r: Vec<usize>,
    pfr_d: Vec<usize>,
    inertia: Vec<usize>,
    contingency: usize,
    total_in: usize,
    total_r: usize,
    total_d: usize,
}

struct Assembler {
    vars: VarRegistry,
    eqs: Vec<Row>,
    ineqs: Vec<Row>,
}

impl Assembler {
    fn eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, kind: RowKind, resource: Option<usize>) {
        self.eqs.push(Row {
            coeffs,
            rhs,
            tag: RowTag {
                kind,
                resource,
                direction: None,
            },
            mirror: None,
        });
    }

    fn le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, kind: RowKind, resource: Option<usize>) {
        self.ineqs.push(Row {
            coeffs,
            rhs,
            tag: RowTag {
                kind,
                resource,
                direction: None,
            },
            mirror: None,
        });
    }

    /// Up-direction row with its down-event reflection.
    fn le_up(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64, kind: RowKind, resource: usize, mirror: Mirror) {
        self.ineqs.push(Row {
            coeffs,
            rhs,
            tag: RowTag {
                kind,
                resource: Some(resource),
                direction: Some(Direction::Up),
            },
            mirror: Some(mirror),
        });
    }
}

/// Build the dispatch program for `scenario` in the scenario's direction.
///
/// Fails before any solve when the fleet cannot meet demand.
pub fn build(scenario: &Scenario) -> Result<ConicProblem> {
    let total_max = scenario.total_pmax();
    if total_max < scenario.params.demand {
        return Err(Error::Infeasible(format!(
            "demand {} MW exceeds total capacity {} MW",
            scenario.params.demand, total_max
        )));
    }
    let total_min = scenario.total_pmin();
    if total_min > scenario.params.demand {
        return Err(Error::Infeasible(format!(
            "demand {} MW below total minimum output {} MW",
            scenario.params.demand, total_min
        )));
    }
    build_unchecked(scenario)
}

/// [`build`] without the capacity pre-check; the solver then reports the
/// infeasibility itself.
pub fn build_unchecked(scenario: &Scenario) -> Result<ConicProblem> {
    let up = build_up(scenario);
    apply_direction(up, scenario.params.direction)
}

fn build_up(scenario: &Scenario) -> ConicProblem {
    let p = &scenario.params;
    let ids = scenario.resource_ids();
    let n_sg = scenario.sgs.len();
    let n = ids.len();

    let mut asm = Assembler {
        vars: VarRegistry::default(),
        eqs: Vec::new(),
        ineqs: Vec::new(),
    };

    let mut lay = Layout {
        dispatch: Vec::with_capacity(n),
        pfr_r: Vec::with_capacity(n),
        pfr_d: Vec::with_capacity(n),
        inertia: Vec::with_capacity(n),
        contingency: 0,
        total_in: 0,
        total_r: 0,
        total_d: 0,
    };
    for (k, id) in ids.iter().enumerate() {
        lay.dispatch.push(asm.vars.add(VarTag::Dispatch(k), format!("P_E[{id}]")));
        lay.pfr_r.push(asm.vars.add(VarTag::PfrRamp(k), format!("P_PFR_r[{id}]")));
        lay.pfr_d.push(asm.vars.add(VarTag::PfrDroop(k), format!("P_PFR_d[{id}]")));
        lay.inertia.push(asm.vars.add(VarTag::Inertia(k), format!("P_In[{id}]")));
    }
    let mut ibr_vars = Vec::with_capacity(scenario.ibrs.len());
    for (j, ibr) in scenario.ibrs.iter().enumerate() {
        let id = &ibr.id;
        ibr_vars.push([
            asm.vars.add(VarTag::InertiaFactor(j), format!("D[{id}]")),
            asm.vars.add(VarTag::SocEnd(j), format!("E_end[{id}]")),
            asm.vars.add(VarTag::Loss(j), format!("Loss[{id}]")),
            asm.vars.add(VarTag::AbsDispatch(j), format!("AbsP_E[{id}]")),
            asm.vars.add(VarTag::PfrEnergy(j), format!("E_PFR[{id}]")),
            asm.vars.add(VarTag::InertiaEnergy(j), format!("E_In[{id}]")),
        ]);
    }
    lay.contingency = asm.vars.add(VarTag::Contingency, "dP_L".into());
    lay.total_in = asm.vars.add(VarTag::TotalInertia, "P_In".into());
    lay.total_r = asm.vars.add(VarTag::TotalPfrRamp, "P_PFR_r".into());
    lay.total_d = asm.vars.add(VarTag::TotalPfrDroop, "P_PFR_d".into());

    let nv = asm.vars.len();
    let mut quad = vec![0.0; nv];
    let mut linear = vec![0.0; nv];
    let mut constant = 0.0;

    // System rows.
    asm.eq(lay.dispatch.iter().map(|&i| (i, 1.0)).collect(), p.demand, RowKind::PowerBalance, None);
    for (total, parts, kind) in [
        (lay.total_in, &lay.inertia, RowKind::InertiaTotal),
        (lay.total_r, &lay.pfr_r, RowKind::PfrRampTotal),
        (lay.total_d, &lay.pfr_d, RowKind::PfrDroopTotal),
    ] {
        let mut c = vec![(total, 1.0)];
        c.extend(parts.iter().map(|&i| (i, -1.0)));
        asm.eq(c, 0.0, kind, None);
    }
    for k in 0..n {
        asm.le(vec![(lay.dispatch[k], 1.0), (lay.contingency, -1.0)], 0.0, RowKind::Contingency, Some(k));
    }
    asm.le(vec![(lay.contingency, -1.0)], 0.0, RowKind::ContingencyFloor, None);
    asm.le(vec![(lay.contingency, 1.0), (lay.total_in, -1.0)], 0.0, RowKind::Rocof, None);
    asm.le(vec![(lay.contingency, 1.0), (lay.total_d, -1.0)], 0.0, RowKind::Qss, None);

    // Shared per-resource PFR rows.
    let pmax_of = |k: usize| {
        if k < n_sg {
            scenario.sgs[k].pmax
        } else {
            scenario.ibrs[k - n_sg].pmax
        }
    };
    let gain_of = |k: usize| {
        if k < n_sg {
            scenario.sgs[k].droop_gain
        } else {
            scenario.ibrs[k - n_sg].droop_gain
        }
    };
    for k in 0..n {
        let (r_cap, d_cap) = pfr_capability(gain_of(k), pmax_of(k).max(0.0), p.f0, p.dfnad_max, p.dfqss_max);
        asm.le(vec![(lay.pfr_r[k], 1.0)], r_cap, RowKind::PfrRampCap, Some(k));
        asm.le(vec![(lay.pfr_d[k], 1.0)], d_cap, RowKind::PfrDroopCap, Some(k));
        asm.le(vec![(lay.pfr_d[k], 1.0), (lay.pfr_r[k], -1.0)], 0.0, RowKind::PfrDroopWithinRamp, Some(k));
        asm.le(vec![(lay.pfr_r[k], -1.0)], 0.0, RowKind::PfrRampFloor, Some(k));
        asm.le(vec![(lay.pfr_d[k], -1.0)], 0.0, RowKind::PfrDroopFloor, Some(k));
    }

    // Synchronous generators.
    for (i, g) in scenario.sgs.iter().enumerate() {
        let (pe, pr, pd, pin) = (lay.dispatch[i], lay.pfr_r[i], lay.pfr_d[i], lay.inertia[i]);
        let (_, p_in) = sg_inertia_params(g.h, g.s_mva, p.f0, p.rocof_max);
        asm.eq(vec![(pin, 1.0)], p_in, RowKind::InertiaQuantity, Some(i));
        asm.le(vec![(pe, -1.0)], -g.pmin, RowKind::SgDispatchMin, Some(i));
        asm.le(vec![(pe, 1.0)], g.pmax, RowKind::SgDispatchMax, Some(i));
        asm.le(vec![(pe, 1.0), (pr, 1.0)], g.pgov(), RowKind::SgGovernorHeadroom, Some(i));
        asm.le(vec![(pe, 1.0), (pd, 1.0)], g.pmax, RowKind::SgDroopHeadroom, Some(i));
        quad[pe] += 2.0 * g.cost_a;
        linear[pe] += g.cost_b;
        constant += g.cost_c;
    }

    // Inverter-based resources.
    for (j, ibr) in scenario.ibrs.iter().enumerate() {
        let k = n_sg + j;
        let (pe, pr, pd, pin) = (lay.dispatch[k], lay.pfr_r[k], lay.pfr_d[k], lay.inertia[k]);
        let [d, e_end, loss, abs, e_pfr, e_in] = ibr_vars[j];
        let (alpha, beta) = scenario.relaxation(ibr);
        let sqrt_eta = ibr.eta.sqrt();

        // Inertia quantity, factor bounds and energy requirement.
        asm.eq(vec![(pin, 1.0), (d, -p.rocof_max)], 0.0, RowKind::InertiaQuantity, Some(k));
        asm.le(vec![(d, 1.0)], ibr.d_max, RowKind::InertiaFactorMax, Some(k));
        asm.le(vec![(d, -1.0)], 0.0, RowKind::InertiaFactorMin, Some(k));
        asm.eq(vec![(e_in, 1.0), (d, -p.dfnad_max)], 0.0, RowKind::InertiaEnergy, Some(k));
        asm.eq(
            vec![
                (e_pfr, 1.0),
                (pr, -0.5 * p.t_pfr),
                (pd, -(p.dt - p.t_pfr)),
            ],
            0.0,
            RowKind::PfrEnergy,
            Some(k),
        );

        // Power limits.
        asm.le(vec![(pe, -1.0)], -ibr.pmin, RowKind::IbrDispatchMin, Some(k));
        asm.le(vec![(pe, 1.0)], ibr.pmax, RowKind::IbrDispatchMax, Some(k));
        let head = Mirror {
            pivot: Some(pe),
            rhs: -ibr.pmin,
        };
        let foot = Mirror {
            pivot: Some(pe),
            rhs: ibr.pmax,
        };
        if scenario.conservative_mode {
            asm.le_up(
                vec![(pe, 1.0), (pr, 1.0), (pin, 1.0)],
                ibr.pmax,
                RowKind::IbrCombinedHeadroom,
                k,
                head,
            );
            if !scenario.positive_only {
                asm.le_up(vec![(pe, -1.0), (pin, 1.0 / ibr.eta)], -ibr.pmin, RowKind::IbrFootroom, k, foot);
            }
        } else {
            asm.le_up(vec![(pe, 1.0), (pin, 1.0)], ibr.pmax, RowKind::IbrInstantHeadroom, k, head);
            asm.le_up(
                vec![(pe, 1.0), (pr, alpha), (pin, alpha)],
                ibr.pmax,
                RowKind::IbrNadirHeadroom,
                k,
                head,
            );
            if !scenario.positive_only {
                asm.le_up(
                    vec![(pe, 1.0), (pr, beta), (pin, -1.0 / ibr.eta)],
                    ibr.pmax,
                    RowKind::IbrRecoveryUpper,
                    k,
                    head,
                );
                asm.le_up(
                    vec![(pe, -1.0), (pr, -beta), (pin, 1.0 / ibr.eta)],
                    -ibr.pmin,
                    RowKind::IbrRecoveryLower,
                    k,
                    foot,
                );
            }
            asm.le_up(vec![(pe, 1.0), (pd, 1.0)], ibr.pmax, RowKind::IbrDroopHeadroom, k, head);
        }

        // Energy reservation and state of charge.
        let res = 1.0 / sqrt_eta;
        asm.le_up(
            vec![(e_pfr, res), (e_in, res)],
            ibr.e0 - ibr.emin,
            RowKind::ReserveAtStart,
            k,
            Mirror {
                pivot: None,
                rhs: ibr.emax - ibr.e0,
            },
        );
        asm.le_up(
            vec![(e_pfr, res), (e_in, res), (e_end, -1.0)],
            -ibr.emin,
            RowKind::ReserveAtEnd,
            k,
            Mirror {
                pivot: Some(e_end),
                rhs: ibr.emax,
            },
        );
        asm.eq(
            vec![(e_end, 1.0), (pe, p.dt), (loss, p.dt)],
            ibr.e0,
            RowKind::SocDynamics,
            Some(k),
        );
        asm.le(vec![(e_end, -1.0)], -ibr.emin, RowKind::SocMin, Some(k));
        asm.le(vec![(e_end, 1.0)], ibr.emax, RowKind::SocMax, Some(k));
        asm.le(vec![(pe, 1.0 / sqrt_eta - 1.0), (loss, -1.0)], 0.0, RowKind::LossDischarge, Some(k));
        asm.le(vec![(pe, sqrt_eta - 1.0), (loss, -1.0)], 0.0, RowKind::LossCharge, Some(k));
        asm.le(vec![(pe, 1.0), (abs, -1.0)], 0.0, RowKind::AbsPositive, Some(k));
        asm.le(vec![(pe, -1.0), (abs, -1.0)], 0.0, RowKind::AbsNegative, Some(k));

        linear[abs] += ibr.cost_energy;
        linear[loss] += ibr.cost_energy;
        linear[pin] += ibr.cost_inertia;
        linear[pr] += ibr.cost_pfr_r;
        linear[pd] += ibr.cost_pfr_d;
    }

    let cone = RotatedCone {
        u: LinExpr(vec![(lay.total_in, 0.5 / p.rocof_max)]),
        v: LinExpr(vec![(lay.total_r, 1.0 / p.t_pfr)]),
        w: LinExpr(vec![(lay.contingency, 0.5 / p.dfnad_max.sqrt())]),
    };

    ConicProblem {
        vars: asm.vars,
        quad,
        linear,
        constant,
        eqs: asm.eqs,
        ineqs: asm.ineqs,
        cone,
        meta: ProblemMeta {
            resource_ids: ids,
            n_sgs: n_sg,
            rocof_max: p.rocof_max,
            dfnad_max: p.dfnad_max,
            t_pfr: p.t_pfr,
            dt: p.dt,
            demand: p.demand,
            direction: Direction::Up,
        },
    }
}

/// Re-orient a problem built for frequency-drop events.
///
/// `Down` replaces every direction-sensitive row with its reflection (headroom
/// and footroom swap roles, energy reserves move to the upper SoC limit);
/// `UpDown` keeps the up rows and adds the reflections, so each direction's
/// reservation is the larger of the two requirements.
pub fn apply_direction(mut problem: ConicProblem, mode: Direction) -> Result<ConicProblem> {
    if problem.meta.direction != Direction::Up {
        return Err(Error::Precondition(format!(
            "apply_direction expects an up-form problem, got {}",
            problem.meta.direction
        )));
    }
    match mode {
        Direction::Up => {}
        Direction::Down => {
            for row in problem.ineqs.iter_mut() {
                if row.tag.direction == Some(Direction::Up) {
                    *row = row.mirrored();
                }
            }
        }
        Direction::UpDown => {
            let extra: Vec<Row> = problem
                .ineqs
                .iter()
                .filter(|r| r.tag.direction == Some(Direction::Up))
                .map(Row::mirrored)
                .collect();
            problem.ineqs.extend(extra);
        }
    }
    problem.meta.direction = mode;
    Ok(problem)
}

/// Energy (MW·s) an IBR must hold to sustain its PFR commitment over the
/// interval, assuming the event strikes at the start.
pub fn pfr_energy_requirement(pr: f64, pd: f64, t_pfr: f64, dt: f64) -> Result<f64> {
    if !(pr >= 0.0 && pd >= 0.0 && pd <= pr) {
        return Err(Error::Precondition(format!("need 0 <= pd <= pr, got pr={pr}, pd={pd}")));
    }
    if !(t_pfr >= 0.0 && t_pfr <= dt) {
        return Err(Error::Precondition(format!("need 0 <= t_pfr <= dt, got {t_pfr} > {dt}")));
    }
    Ok(0.5 * t_pfr * pr + pd * (dt - t_pfr))
}

/// Largest inertial energy contribution (MW·s) at the permitted nadir.
pub fn inertia_energy_requirement(d: f64, dfnad: f64) -> f64 {
    d * dfnad
}
