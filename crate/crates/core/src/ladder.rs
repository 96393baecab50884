//! Increasing truncation ladder `D₁ ⊂ D₂ ⊂ …` of prefix domains. Each rung
//! solves the Dirichlet eigenproblem warm-started from the previous rung's
//! eigenfunction (padded with zeros); the last rung gives the candidate
//! `(λ*, ψ*)` with `ψ*(i₀) = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dirichlet::{self, DirichletDomain, EigenOptions, EigenPair, Normalization};
use crate::error::{Error, Result};
use crate::model::{check_lyapunov, validate_model, LyapunovCert, Model, Policy, TimeKind};
use crate::par::Exec;
use crate::pia;
use crate::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    Stable,
    NearMonotone,
}

#[derive(Debug, Clone)]
pub struct LadderConfig {
    /// Strictly increasing prefix sizes; `None` uses [`default_rungs`].
    pub rung_sizes: Option<Vec<usize>>,
    /// Stopping threshold on consecutive-rung changes of `ρ` and of `ψ` on the watch set.
    pub tol_rho: f64,
    /// Defaults to the first `min(32, N)` states.
    pub watch_set: Option<Vec<usize>>,
    pub mode: SolveMode,
    /// Per-rung eigen-solver options; `initial` seeds the first rung only.
    pub eigen: EigenOptions,
    pub certificate: Option<LyapunovCert>,
    /// Near-monotone mode: user estimate of `λ_m`. Without it a sampled proxy is used.
    pub lambda_m_estimate: Option<f64>,
    pub proxy_policies: usize,
    pub seed: u64,
    /// Width of the boundary zone excluded from residual evaluation.
    pub boundary_width: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            rung_sizes: None,
            tol_rho: 1e-6,
            watch_set: None,
            mode: SolveMode::Stable,
            eigen: EigenOptions::default(),
            certificate: None,
            lambda_m_estimate: None,
            proxy_policies: 64,
            seed: 0,
            boundary_width: 1,
        }
    }
}

/// `16, 32, 64, …` below `n`, then `n` itself.
pub fn default_rungs(n: usize) -> Vec<usize> {
    let mut rungs = Vec::new();
    let mut k = 16;
    while k < n {
        rungs.push(k);
        k *= 2;
    }
    rungs.push(n);
    rungs
}

pub fn default_watch_set(n: usize) -> Vec<usize> {
    (0..n.min(32)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub n: usize,
    pub rho: f64,
    pub iterations: usize,
    pub cw_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearMonotoneDiagnostics {
    /// `λ_m` used for the condition: user estimate or sampled upper proxy.
    pub lambda_m: f64,
    pub lambda_m_is_proxy: bool,
    /// `min_{i ≥ N/2} min_a c(i,a)`, the truncation's stand-in for `liminf c`.
    pub tail_cost_inf: f64,
    pub condition_holds: bool,
    /// `max_i [min-operator(ψ*)(i) − e^{λ*} ψ*(i)]`, relative; must be ≤ tolerance.
    pub supersolution_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: SolveMode,
    pub rungs: Vec<Rung>,
    pub final_pair: EigenPair,
    pub converged: bool,
    /// Minimizing selector of the final pair (action 0 off the final domain).
    pub policy: Policy,
    /// Max relative residual of the eigen-equation on interior watch states.
    pub residual: f64,
    pub eval_states: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov_passed: Option<bool>,
    /// `max_i ψ*(i) / V(i)` when a certificate was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_over_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_monotone: Option<NearMonotoneDiagnostics>,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn lambda_star(&self) -> f64 {
        self.final_pair.rho
    }

    pub fn psi_star(&self) -> &[f64] {
        &self.final_pair.psi
    }
}

fn check_rungs(model: &Model, rungs: &[usize]) -> Result<()> {
    if rungs.is_empty() {
        return Err(Error::InvalidConfig("no rungs".into()));
    }
    if rungs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "rung sizes must be strictly increasing".into(),
        ));
    }
    if rungs[0] == 0 || *rungs.last().unwrap() > model.size() {
        return Err(Error::InvalidConfig(format!(
            "rung sizes must lie in 1..={}",
            model.size()
        )));
    }
    Ok(())
}

/// Argmin selector of the eigen-operator at `psi`, on the given states.
pub(crate) fn selector(model: &Model, psi: &[f64], states: &[usize]) -> Policy {
    let mut idx = vec![0; model.size()];
    for &i in states {
        idx[i] = model.min_action_value(i, psi).0;
    }
    Policy::new(idx)
}

/// Minimizing selector of a pair. Requires `ψ > 0` on the pair's domain.
pub fn extract_policy(model: &Model, pair: &EigenPair) -> Result<Policy> {
    if let Some(&i) = pair.domain.states().iter().find(|&&i| !(pair.psi[i] > 0.0)) {
        return Err(Error::ZeroPsi(i));
    }
    Ok(selector(model, &pair.psi, pair.domain.states()))
}

/// Previous eigenfunction with its zero entries on `0..n` filled by its last
/// positive value (at least `1e-6` of the max), so the new rung starts from
/// an iterate that covers the whole domain.
fn pad_warm_start(prev: &[f64], n: usize) -> Vec<f64> {
    let top = prev.iter().fold(0.0_f64, |m, &x| m.max(x));
    if !(top > 0.0) {
        return vec![1.0; prev.len()];
    }
    let edge = prev.iter().rev().copied().find(|&x| x > 0.0).unwrap_or(top);
    let fill = edge.max(1e-6 * top);
    let mut out = prev.to_vec();
    for x in out.iter_mut().take(n) {
        if *x <= 0.0 {
            *x = fill;
        }
    }
    out
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn solve_ladder(model: &Model, config: &LadderConfig) -> Result<SolveReport> {
    let n_total = model.size();
    let rungs_cfg = config
        .rung_sizes
        .clone()
        .unwrap_or_else(|| default_rungs(n_total));
    check_rungs(model, &rungs_cfg)?;
    let watch = config
        .watch_set
        .clone()
        .unwrap_or_else(|| default_watch_set(n_total));
    if let Some(&w) = watch.iter().find(|&&w| w >= n_total) {
        return Err(Error::DimensionMismatch {
            expected: n_total,
            got: w + 1,
        });
    }
    let i0 = model.reference_state();
    let mut warnings = Vec::new();

    let validation = validate_model(model);
    if !validation.passed {
        warnings.push(format!(
            "model validation reported {} violations",
            validation.violations.len()
        ));
    }
    let mut lyapunov_passed = None;
    match &config.certificate {
        Some(cert) => {
            let r = check_lyapunov(model, cert)?;
            if !r.passed {
                warnings.push(format!(
                    "Lyapunov certificate failed at {} places",
                    r.violations.len()
                ));
            }
            lyapunov_passed = Some(r.passed);
        }
        None if config.mode == SolveMode::Stable => {
            warnings.push("no Lyapunov certificate supplied; stability not checked".into())
        }
        None => {}
    }

    let mut rungs = Vec::new();
    let mut pairs: Vec<EigenPair> = Vec::new();
    let mut carry: Option<Vec<f64>> = config.eigen.initial.clone();
    for &n in &rungs_cfg {
        let domain = DirichletDomain::prefix(model, n)?;
        let mut opts = config.eigen.clone();
        opts.initial = carry.as_deref().map(|c| pad_warm_start(c, n));
        let pair = match dirichlet::dirichlet_eigenpair(model, &domain, &opts) {
            Ok(p) => p,
            Err(Error::DegenerateEigenvector) => {
                warnings.push(format!("rung {n}: eigen-iterate collapsed, skipped"));
                continue;
            }
            Err(Error::InvalidConfig(msg)) if carry.is_some() => {
                // warm start vanished on the new domain; restart from ones
                warnings.push(format!("rung {n}: {msg}; cold start"));
                opts.initial = None;
                dirichlet::dirichlet_eigenpair(model, &domain, &opts)?
            }
            Err(e) => return Err(e),
        };
        if pair.normalization != Normalization::ReferenceOne {
            if config.mode == SolveMode::NearMonotone {
                warnings.push(format!("rung {n}: ψ(i₀) = 0, rung skipped"));
                continue;
            }
            warnings.push(format!(
                "rung {n}: ψ(i₀) = 0, max-norm used (reference likely unreachable)"
            ));
        }
        rungs.push(Rung {
            n,
            rho: pair.rho,
            iterations: pair.iterations,
            cw_gap: pair.cw_gap,
        });
        carry = Some(pair.psi.clone());
        pairs.push(pair);
    }
    if !pairs
        .iter()
        .any(|p| p.normalization == Normalization::ReferenceOne)
    {
        return Err(Error::ReferenceUnreachable(i0));
    }
    let final_pair = pairs.last().cloned().expect("at least one rung solved");
    let n_final = final_pair.domain.len();
    let exact = n_final == n_total && model.closed();

    let stable_pair = pairs.len() >= 2 && {
        let prev = &pairs[pairs.len() - 2];
        let drho = (final_pair.rho - prev.rho).abs();
        let dpsi = watch
            .iter()
            .map(|&i| relative_change(final_pair.psi[i], prev.psi[i]))
            .fold(0.0_f64, f64::max);
        drho < config.tol_rho && dpsi < config.tol_rho
    };
    let converged = exact || stable_pair;

    let interior_limit = if exact {
        n_total
    } else {
        n_final.saturating_sub(config.boundary_width)
    };
    let eval_states: Vec<usize> = watch
        .iter()
        .copied()
        .filter(|&i| i < interior_limit && final_pair.domain.contains(i))
        .collect();
    let residual =
        verify::eigen_residual(model, &final_pair, &eval_states, 10.0 * config.eigen.tol)
            .max_residual;

    let support = final_pair.support();
    if support.len() < final_pair.domain.len() {
        warnings.push(format!(
            "ψ* vanishes on {} states of the final domain",
            final_pair.domain.len() - support.len()
        ));
    }
    let policy = selector(model, &final_pair.psi, final_pair.domain.states());

    let psi_over_v = config.certificate.as_ref().map(|cert| {
        final_pair
            .psi
            .iter()
            .zip(cert.v())
            .map(|(p, v)| p / v)
            .fold(0.0_f64, f64::max)
    });

    let near_monotone = match config.mode {
        SolveMode::Stable => None,
        SolveMode::NearMonotone => Some(near_monotone_diagnostics(
            model,
            config,
            &final_pair,
            &eval_states,
            &mut warnings,
        )?),
    };

    let report = SolveReport {
        mode: config.mode,
        rungs,
        final_pair,
        converged,
        policy,
        residual,
        eval_states,
        lyapunov_passed,
        psi_over_v,
        near_monotone,
        warnings,
    };
    if converged {
        Ok(report)
    } else {
        Err(Error::LadderNotConverged(Box::new(report)))
    }
}

/// Same ladder, normalization always at the reference state, plus the
/// near-monotone diagnostics (condition check and supersolution residual).
pub fn solve_near_monotone(model: &Model, config: &LadderConfig) -> Result<SolveReport> {
    let mut cfg = config.clone();
    cfg.mode = SolveMode::NearMonotone;
    solve_ladder(model, &cfg)
}

fn near_monotone_diagnostics(
    model: &Model,
    config: &LadderConfig,
    pair: &EigenPair,
    eval_states: &[usize],
    warnings: &mut Vec<String>,
) -> Result<NearMonotoneDiagnostics> {
    let n = model.size();
    let (lambda_m, is_proxy) = match config.lambda_m_estimate {
        Some(v) => (v, false),
        None => (
            lambda_m_proxy(model, config, &pair.domain, &pair.psi, warnings)?,
            true,
        ),
    };
    let tail_cost_inf = (n / 2..n)
        .flat_map(|i| model.actions(i).iter().map(|a| a.cost))
        .fold(f64::INFINITY, f64::min);
    let condition_holds = tail_cost_inf > lambda_m;
    if !condition_holds {
        warnings.push(format!(
            "near-monotone condition not met on the truncation: tail cost {tail_cost_inf} ≤ λ_m {lambda_m}"
        ));
    }
    let scale = match pair.kind {
        TimeKind::Discrete => pair.rho.exp(),
        TimeKind::Continuous => pair.rho,
    };
    let supersolution_residual = eval_states
        .iter()
        .map(|&i| {
            let lhs = model.min_action_value(i, &pair.psi).1;
            let rhs = scale * pair.psi[i];
            (lhs - rhs) / rhs.abs().max(1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(NearMonotoneDiagnostics {
        lambda_m,
        lambda_m_is_proxy: is_proxy,
        tail_cost_inf,
        condition_holds,
        supersolution_residual,
    })
}

const PROXY_TOL: f64 = 1e-8;
const PROXY_MAX_ITER: usize = 20_000;

/// Upper proxy for `λ_m`: minimum policy eigenvalue over uniformly sampled
/// policies, the greedy policy from `ψ ≡ 1` and the selector of `ψ`.
fn lambda_m_proxy(
    model: &Model,
    config: &LadderConfig,
    domain: &DirichletDomain,
    psi: &[f64],
    warnings: &mut Vec<String>,
) -> Result<f64> {
    let ones = vec![1.0; model.size()];
    let mut candidates = vec![
        selector(model, &ones, domain.states()),
        selector(model, psi, domain.states()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.proxy_policies {
        let idx = (0..model.size())
            .map(|i| rng.random_range(0..model.num_actions(i)))
            .collect();
        candidates.push(Policy::new(idx));
    }
    let opts = EigenOptions {
        initial: None,
        tol: PROXY_TOL,
        max_iter: PROXY_MAX_ITER,
        exec: Exec::serial(),
        ..config.eigen.clone()
    };
    let results = config.eigen.exec.map(candidates.len(), |k| {
        pia::policy_rho_upper(model, &candidates[k], domain, &opts)
    });
    let mut best = f64::INFINITY;
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(rho) => best = best.min(rho),
            Err(Error::DegenerateEigenvector) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 {
        warnings.push(format!(
            "λ_m proxy: {skipped} sampled policies have no positive eigenvector"
        ));
    }
    Ok(best)
}
