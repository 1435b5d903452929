//! Market-clearing prices from the dual solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::solver::{DispatchSolution, DualSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSet {
    /// Energy price per resource: λ_E less the resource's contingency multiplier.
    pub pi_energy: Vec<f64>,
    /// System marginal energy price λ_E.
    pub system_lambda: f64,
    /// $/MW of committed inertia service.
    pub pi_inertia: f64,
    /// $/MW of ramp PFR.
    pub pi_pfr_r: f64,
    /// $/MW of droop PFR.
    pub pi_pfr_d: f64,
    /// Positions (resource order) of the contingency-setting resources.
    pub setters: Vec<usize>,
}

/// Tolerance below which a contingency multiplier counts as zero.
pub fn setter_tolerance(lambda_e: f64) -> f64 {
    1e-6 * lambda_e.abs().max(1.0)
}

pub fn inertia_price(mu: f64, gamma1: f64, gamma3: f64, rocof_max: f64) -> f64 {
    mu + (gamma3 - gamma1) / (2.0 * rocof_max)
}

pub fn pfr_ramp_price(gamma1: f64, gamma3: f64, t_pfr: f64) -> f64 {
    (gamma1 + gamma3) / t_pfr
}

pub fn prices(duals: &DualSolution, params: &SystemParams) -> Result<PriceSet> {
    let named = [
        ("lambda_e", duals.lambda_e),
        ("mu", duals.mu),
        ("gamma1", duals.gamma1),
        ("gamma3", duals.gamma3),
        ("delta", duals.delta),
    ];
    for (name, v) in named {
        if !v.is_finite() {
            return Err(Error::Precondition(format!("dual field {name} is missing or not finite")));
        }
    }
    if duals.lambda_k.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("contingency multipliers are not finite".into()));
    }
    let tol = setter_tolerance(duals.lambda_e);
    Ok(PriceSet {
        pi_energy: duals.lambda_k.iter().map(|lk| duals.lambda_e - lk).collect(),
        system_lambda: duals.lambda_e,
        pi_inertia: inertia_price(duals.mu, duals.gamma1, duals.gamma3, params.rocof_max),
        pi_pfr_r: pfr_ramp_price(duals.gamma1, duals.gamma3, params.t_pfr),
        pi_pfr_d: duals.delta,
        setters: (0..duals.lambda_k.len()).filter(|&k| duals.lambda_k[k] > tol).collect(),
    })
}

/// Ids of resources whose contingency row carries a multiplier above `tol`.
pub fn contingency_setter(primal: &DispatchSolution, duals: &DualSolution, tol: f64) -> Vec<String> {
    primal
        .resources
        .iter()
        .zip(&duals.lambda_k)
        .filter(|(_, &lk)| lk > tol)
        .map(|(r, _)| r.id.clone())
        .collect()
}
