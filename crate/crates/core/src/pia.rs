//! Policy iteration on the multiplicative cost: value determination by the
//! policy's Perron eigenpair, improvement by the argmin selector, and the
//! per-state improvement gaps `θ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dirichlet::{self, assemble, DirichletDomain, EigenOptions, EigenPair, Normalization};
use crate::error::{Error, Result};
use crate::model::{Action, Model, Policy, StateSpace, TimeKind};
use crate::operator::{power_iterate, LocalOp, Rule};

/// Incumbent action is kept when within this relative slack of the minimum.
pub const STABILITY_SLACK: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct PiaConfig {
    /// Defaults to action 0 everywhere.
    pub initial_policy: Option<Policy>,
    /// Defaults to the whole truncation.
    pub domain: Option<DirichletDomain>,
    pub tol_lambda: f64,
    pub tol_theta: f64,
    pub max_iters: usize,
    pub eigen: EigenOptions,
}

impl Default for PiaConfig {
    fn default() -> Self {
        Self {
            initial_policy: None,
            domain: None,
            tol_lambda: 1e-10,
            tol_theta: 1e-10,
            max_iters: 200,
            eigen: EigenOptions::default().with_tol(1e-13),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergedBy {
    /// Improvement returned the incumbent policy.
    PolicyStable,
    /// Eigenvalue decrease and every `θ` below tolerance.
    LambdaStall,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiaIterate {
    pub k: usize,
    pub lambda: f64,
    pub policy: Policy,
    /// Gaps of the improvement that produced this iterate; zero for `k = 0`.
    pub theta_max: f64,
    pub theta_mean: f64,
    pub policy_changes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiaTrace {
    pub iterates: Vec<PiaIterate>,
    pub final_pair: EigenPair,
    pub converged_by: ConvergedBy,
    pub warnings: Vec<String>,
}

impl PiaTrace {
    pub fn lambda(&self) -> f64 {
        self.final_pair.rho
    }

    pub fn policy(&self) -> &Policy {
        &self.iterates.last().expect("trace is never empty").policy
    }
}

/// Principal eigenpair of the linear operator of a fixed policy on `domain`.
pub fn policy_eigenpair(
    model: &Model,
    policy: &Policy,
    domain: &DirichletDomain,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    policy.validate(model)?;
    let op = LocalOp::new(model, domain.states(), opts.ct_step_scale);
    let local_policy: Vec<usize> = domain.states().iter().map(|&i| policy.get(i)).collect();
    let init = dirichlet::local_initial(model, domain, opts.initial.as_deref())?;
    let out = power_iterate(
        &op,
        Rule::Fixed(&local_policy),
        init,
        opts.tol,
        opts.max_iter,
        &opts.exec,
    )?;
    if !out.converged {
        return Err(Error::NoConvergence {
            what: "policy eigen-iteration",
            iterations: out.iterations,
            gap: out.gap(),
        });
    }
    Ok(assemble(
        model,
        domain,
        &out.psi,
        out.rho(),
        out.iterations,
        out.gap(),
    ))
}

/// Collatz–Wielandt upper bound on the policy eigenvalue after at most
/// `opts.max_iter` iterations; exact to `opts.tol` when the iteration converges.
pub(crate) fn policy_rho_upper(
    model: &Model,
    policy: &Policy,
    domain: &DirichletDomain,
    opts: &EigenOptions,
) -> Result<f64> {
    policy.validate(model)?;
    let op = LocalOp::new(model, domain.states(), opts.ct_step_scale);
    let local_policy: Vec<usize> = domain.states().iter().map(|&i| policy.get(i)).collect();
    let init = dirichlet::local_initial(model, domain, opts.initial.as_deref())?;
    let out = power_iterate(
        &op,
        Rule::Fixed(&local_policy),
        init,
        opts.tol,
        opts.max_iter,
        &opts.exec,
    )?;
    Ok(out.rho_hi)
}

/// Argmin selector of the eigen-operator at `pair.psi` on the pair's domain,
/// keeping the incumbent's action on near-ties. States off the domain keep
/// the incumbent's action.
pub fn improve_policy(model: &Model, pair: &EigenPair, incumbent: &Policy) -> Result<Policy> {
    incumbent.validate(model)?;
    let psi = &pair.psi;
    let mut next = incumbent.action_index.clone();
    for &i in pair.domain.states() {
        if !(psi[i] > 0.0) {
            return Err(Error::ZeroPsi(i));
        }
        let (a, best) = model.min_action_value(i, psi);
        let inc = model.action_value(i, incumbent.get(i), psi);
        if inc - best > STABILITY_SLACK * best.abs().max(f64::MIN_POSITIVE) {
            next[i] = a;
        }
    }
    Ok(Policy::new(next))
}

/// Improvement gaps of `next` against the pair of the previous policy, one
/// entry per state of `pair.domain` in its order.
///
/// Discrete time: `θ(i) = 1 − e^{c(i,v') − λ} Σ_j V(j) P(j|i,v') / V(i)`.
/// Continuous time: `θ(i) = λ − c(i,v') − Σ_j V(j) q(j|i,v') / V(i)`.
pub fn compute_theta(model: &Model, pair: &EigenPair, next: &Policy) -> Result<Vec<f64>> {
    next.validate(model)?;
    let v = &pair.psi;
    pair.domain
        .states()
        .iter()
        .map(|&i| {
            if !(v[i] > 0.0) {
                return Err(Error::ZeroPsi(i));
            }
            let value = model.action_value(i, next.get(i), v) / v[i];
            Ok(match model.kind() {
                TimeKind::Discrete => 1.0 - (-pair.rho).exp() * value,
                TimeKind::Continuous => pair.rho - value,
            })
        })
        .collect()
}

/// Previous eigenfunction raised to at least `1e-6` of its max. A start that
/// is negligible where the next policy's Perron mass sits lets the bracket,
/// which ignores near-zero entries, certify a subdominant mode.
fn warm_start(psi: &[f64]) -> Vec<f64> {
    let floor = 1e-6 * psi.iter().fold(0.0_f64, |m, &x| m.max(x));
    psi.iter().map(|&x| x.max(floor)).collect()
}

pub fn run_pia(model: &Model, config: &PiaConfig) -> Result<PiaTrace> {
    let domain = config
        .domain
        .clone()
        .unwrap_or_else(|| DirichletDomain::full(model));
    let mut policy = config
        .initial_policy
        .clone()
        .unwrap_or_else(|| Policy::uniform(model));
    let mut warnings = Vec::new();
    let mut opts = config.eigen.clone();
    let mut pair = policy_eigenpair(model, &policy, &domain, &opts)?;
    if pair.normalization != Normalization::ReferenceOne {
        warnings.push("initial policy: V(i₀) = 0, max-norm used".into());
    }
    let mut iterates = vec![PiaIterate {
        k: 0,
        lambda: pair.rho,
        policy: policy.clone(),
        theta_max: 0.0,
        theta_mean: 0.0,
        policy_changes: 0,
    }];
    let mut converged_by = ConvergedBy::MaxIters;
    for k in 1..=config.max_iters {
        let next = improve_policy(model, &pair, &policy)?;
        if next == policy {
            converged_by = ConvergedBy::PolicyStable;
            break;
        }
        let theta = compute_theta(model, &pair, &next)?;
        let theta_max = theta.iter().fold(f64::NEG_INFINITY, |m, &t| m.max(t));
        let theta_mean = theta.iter().sum::<f64>() / theta.len() as f64;
        let policy_changes = next
            .action_index
            .iter()
            .zip(&policy.action_index)
            .filter(|(a, b)| a != b)
            .count();
        opts.initial = Some(warm_start(&pair.psi));
        let next_pair = policy_eigenpair(model, &next, &domain, &opts)?;
        let drop = pair.rho - next_pair.rho;
        if drop < -1e3 * config.eigen.tol.max(f64::EPSILON) {
            warnings.push(format!("iteration {k}: eigenvalue increased by {}", -drop));
        }
        iterates.push(PiaIterate {
            k,
            lambda: next_pair.rho,
            policy: next.clone(),
            theta_max,
            theta_mean,
            policy_changes,
        });
        policy = next;
        pair = next_pair;
        if drop < config.tol_lambda && theta_max < config.tol_theta {
            converged_by = ConvergedBy::LambdaStall;
            break;
        }
    }
    Ok(PiaTrace {
        iterates,
        final_pair: pair,
        converged_by,
        warnings,
    })
}

/// Single-action model on the pair's domain (relabelled `0..|D|`) whose
/// kernel is the eigenfunction twist of the policy.
///
/// Discrete time: `P̃(j|i) = V(j) P(j|i,v(i)) / Σ_l V(l) P(l|i,v(i))`.
/// Continuous time: `q̃(j|i) = V(j)/V(i) q(j|i,v(i))` off the diagonal.
pub fn twisted_kernel(model: &Model, pair: &EigenPair, policy: &Policy) -> Result<Model> {
    policy.validate(model)?;
    let states = pair.domain.states();
    let v = &pair.psi;
    let mut local = vec![usize::MAX; model.size()];
    for (k, &s) in states.iter().enumerate() {
        local[s] = k;
    }
    let mut rows = Vec::with_capacity(states.len());
    for &i in states {
        if !(v[i] > 0.0) {
            return Err(Error::ZeroPsi(i));
        }
        let action = model.action(i, policy.get(i));
        let keep_diag = model.kind() == TimeKind::Discrete;
        let mut row: Vec<(usize, f64)> = action
            .transitions
            .iter()
            .filter(|&&(j, _)| local[j] != usize::MAX && (keep_diag || j != i))
            .map(|&(j, w)| (local[j], v[j] * w))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        match model.kind() {
            TimeKind::Discrete => {
                let total: f64 = row.iter().map(|e| e.1).sum();
                if !(total > 0.0) {
                    return Err(Error::ZeroPsi(i));
                }
                row.iter_mut().for_each(|e| e.1 /= total);
            }
            TimeKind::Continuous => {
                row.iter_mut().for_each(|e| e.1 /= v[i]);
                let out: f64 = row.iter().map(|e| e.1).sum();
                row.push((local[i], -out));
            }
        }
        rows.push(vec![Action::new(action.label.clone(), action.cost, row)]);
    }
    let i0 = model.reference_state();
    let reference = if pair.domain.contains(i0) {
        local[i0]
    } else {
        0
    };
    Model::new(
        model.kind(),
        StateSpace::new(states.len(), reference)?,
        true,
        rows,
    )
}

/// Stationary law of a closed single-action model: `π P = π` (discrete) or
/// `π Q = 0` (continuous), `Σ π = 1`.
pub fn stationary_distribution(model: &Model) -> Result<Vec<f64>> {
    let n = model.size();
    if (0..n).any(|i| model.num_actions(i) != 1) {
        return Err(Error::InvalidParams(
            "stationary distribution needs a single-action model".into(),
        ));
    }
    // rows of A are the balance equations; the last one is replaced by Σπ = 1
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for &(j, w) in &model.action(i, 0).transitions {
            a[(j, i)] += w;
        }
        if model.kind() == TimeKind::Discrete {
            a[(i, i)] -= 1.0;
        }
    }
    for i in 0..n {
        a[(n - 1, i)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or_else(|| {
        Error::InvalidParams("singular balance system (chain not irreducible)".into())
    })?;
    Ok(pi.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_dt() -> Model {
        // state 0: stay cheaply-ish or jump; state 1: one action
        let space = StateSpace::new(2, 0).unwrap();
        Model::dt(
            space,
            true,
            vec![
                vec![
                    Action::new("stay", 0.5, vec![(0, 1.0)]),
                    Action::new("move", 0.1, vec![(0, 0.3), (1, 0.7)]),
                ],
                vec![Action::new("back", 0.2, vec![(0, 0.6), (1, 0.4)])],
            ],
        )
        .unwrap()
    }

    #[test]
    fn pia_is_monotone_and_stops() {
        let m = two_state_dt();
        let trace = run_pia(&m, &PiaConfig::default()).unwrap();
        assert_eq!(trace.converged_by, ConvergedBy::PolicyStable);
        for w in trace.iterates.windows(2) {
            assert!(w[1].lambda <= w[0].lambda + 1e-12);
        }
        assert_eq!(trace.policy().get(0), 1);
    }

    #[test]
    fn theta_in_unit_interval() {
        let m = two_state_dt();
        let d = DirichletDomain::full(&m);
        let p0 = Policy::uniform(&m);
        let pair = policy_eigenpair(&m, &p0, &d, &EigenOptions::default().with_tol(1e-13)).unwrap();
        let next = improve_policy(&m, &pair, &p0).unwrap();
        let theta = compute_theta(&m, &pair, &next).unwrap();
        for t in theta {
            assert!((-1e-12..=1.0).contains(&t));
        }
    }

    #[test]
    fn twisted_kernel_is_stochastic() {
        let m = two_state_dt();
        let d = DirichletDomain::full(&m);
        let p = Policy::new(vec![1, 0]);
        let pair = policy_eigenpair(&m, &p, &d, &EigenOptions::default().with_tol(1e-13)).unwrap();
        let t = twisted_kernel(&m, &pair, &p).unwrap();
        for i in 0..2 {
            assert!((t.action(i, 0).row_sum() - 1.0).abs() < 1e-14);
        }
        let pi = stationary_distribution(&t).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(pi.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn ct_stationary_two_state() {
        let space = StateSpace::new(2, 0).unwrap();
        let m = Model::ct(
            space,
            true,
            vec![
                vec![Action::new("a", 0.0, vec![(0, -1.0), (1, 1.0)])],
                vec![Action::new("a", 0.0, vec![(0, 3.0), (1, -3.0)])],
            ],
        )
        .unwrap();
        let pi = stationary_distribution(&m).unwrap();
        assert!((pi[0] - 0.75).abs() < 1e-14);
        assert!((pi[1] - 0.25).abs() < 1e-14);
    }
}
