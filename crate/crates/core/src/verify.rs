//! Residual checks for candidate eigenpairs and optimality checks for
//! candidate policies.

use serde::{Deserialize, Serialize};

use crate::dirichlet::{DirichletDomain, EigenOptions, EigenPair};
use crate::error::{Error, Result};
use crate::model::{Model, Policy, TimeKind};
use crate::pia;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    /// `max_i |min-op(ψ)(i) − rhs(i)| / max(1, |rhs(i)|)` over the evaluated states.
    pub max_residual: f64,
    /// States whose residual (or, for policy checks, selector gap) exceeds `tol`.
    pub failing_states: Vec<usize>,
    pub worst_state: Option<usize>,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal: Option<bool>,
    /// `ρ_v − λ*` for a refuted policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Selector failed but `ρ_v` matches `λ*`: the failure comes from ties.
    #[serde(default)]
    pub inconclusive: bool,
}

/// `e^ρ ψ(i)` in discrete time, `ρ ψ(i)` in continuous time.
fn rhs(kind: TimeKind, rho: f64, psi_i: f64) -> f64 {
    match kind {
        TimeKind::Discrete => rho.exp() * psi_i,
        TimeKind::Continuous => rho * psi_i,
    }
}

fn residuals(model: &Model, rho: f64, psi: &[f64], states: &[usize]) -> Vec<f64> {
    states
        .iter()
        .map(|&i| {
            let lhs = model.min_action_value(i, psi).1;
            let r = rhs(model.kind(), rho, psi[i]);
            (lhs - r).abs() / r.abs().max(1.0)
        })
        .collect()
}

fn worst(states: &[usize], values: &[f64]) -> (f64, Option<usize>) {
    values.iter().zip(states).fold(
        (0.0, None),
        |(m, s), (&v, &i)| if v > m { (v, Some(i)) } else { (m, s) },
    )
}

pub fn eigen_residual(
    model: &Model,
    pair: &EigenPair,
    eval_states: &[usize],
    tol: f64,
) -> VerificationResult {
    let r = residuals(model, pair.rho, &pair.psi, eval_states);
    let (max_residual, worst_state) = worst(eval_states, &r);
    VerificationResult {
        max_residual,
        failing_states: eval_states
            .iter()
            .zip(&r)
            .filter(|(_, &v)| v > tol)
            .map(|(&i, _)| i)
            .collect(),
        worst_state,
        tol,
        optimal: None,
        gap: None,
        inconclusive: false,
    }
}

/// Checks that `v` attains the minimum of the eigen-operator at `psi_star` on
/// every state of `domain` (relative slack `tol`) and that `(λ*, ψ*)` solves
/// the eigen-equation there. On failure the policy's own eigenvalue on
/// `domain` gives the refutation gap.
pub fn verify_optimal_policy(
    model: &Model,
    v: &Policy,
    lambda_star: f64,
    psi_star: &[f64],
    domain: &DirichletDomain,
    tol: f64,
) -> Result<VerificationResult> {
    v.validate(model)?;
    if psi_star.len() != model.size() {
        return Err(Error::DimensionMismatch {
            expected: model.size(),
            got: psi_star.len(),
        });
    }
    let states = domain.states();
    if let Some(&i) = states.iter().find(|&&i| !(psi_star[i] > 0.0)) {
        return Err(Error::ZeroPsi(i));
    }
    let res = residuals(model, lambda_star, psi_star, states);
    let (max_residual, _) = worst(states, &res);
    let gaps: Vec<f64> = states
        .iter()
        .map(|&i| {
            let (_, best) = model.min_action_value(i, psi_star);
            (model.action_value(i, v.get(i), psi_star) - best) / best.abs().max(1.0)
        })
        .collect();
    let (_, worst_state) = worst(states, &gaps);
    let failing_states: Vec<usize> = states
        .iter()
        .zip(&gaps)
        .filter(|(_, &g)| g > tol)
        .map(|(&i, _)| i)
        .collect();
    let selects = failing_states.is_empty() && max_residual <= tol;
    let (gap, inconclusive) = if selects {
        (None, false)
    } else {
        let opts = EigenOptions::default().with_tol(1e-13);
        let rho_v = pia::policy_eigenpair(model, v, domain, &opts)?.rho;
        let gap = rho_v - lambda_star;
        (Some(gap), gap <= tol * lambda_star.abs().max(1.0))
    };
    Ok(VerificationResult {
        max_residual,
        failing_states,
        worst_state,
        tol,
        optimal: Some(selects),
        gap,
        inconclusive,
    })
}
