//! Nonnegative action rows restricted to a finite domain, and the
//! Collatz–Wielandt power iteration shared by the Dirichlet eigen-solver and
//! per-policy value determination.
//!
//! Discrete time: row `(i, a)` has weights `e^{c(i,a)} P(j|i,a)` for `j ∈ D`,
//! and the discrete eigenvalue `μ` maps to `ρ = log μ`.
//!
//! Continuous time: row `(i, a)` has weights `δ_ij + h (q(j|i,a) + c(i,a) δ_ij)`,
//! which is nonnegative for `h (q(i) + c) < 1`, and `ρ = (μ - 1) / h`.

use crate::error::{Error, Result};
use crate::model::{Model, TimeKind};
use crate::par::Exec;

/// Support threshold relative to the max-norm of the iterate.
pub(crate) const SUPPORT_EPS: f64 = 1e-14;

const STALL_WINDOW: usize = 1000;
const STALL_RATIO: f64 = 1e-3;
const MAX_PI_ROUNDS: usize = 1000;

#[derive(Debug, Clone)]
pub(crate) struct LocalOp {
    pub kind: TimeKind,
    /// Global state ids of the domain, sorted.
    pub states: Vec<usize>,
    /// `rows[row_start[i]..row_start[i + 1]]` are the actions of local state `i`.
    row_start: Vec<usize>,
    /// Entry ranges into `entries`, one per (state, action).
    rows: Vec<(usize, usize)>,
    entries: Vec<(usize, f64)>,
    pub step: f64,
}

impl LocalOp {
    /// `step_scale` only matters in continuous time: `h = scale / (1 + max(q(i) + c))`.
    pub fn new(model: &Model, states: &[usize], step_scale: f64) -> Self {
        let n = model.size();
        let mut local = vec![usize::MAX; n];
        for (k, &s) in states.iter().enumerate() {
            local[s] = k;
        }
        let step = match model.kind() {
            TimeKind::Discrete => 1.0,
            TimeKind::Continuous => {
                let mut worst: f64 = 0.0;
                for &i in states {
                    for a in 0..model.num_actions(i) {
                        worst = worst.max(model.exit_rate(i, a) + model.cost(i, a));
                    }
                }
                step_scale / (1.0 + worst)
            }
        };
        let mut row_start = Vec::with_capacity(states.len() + 1);
        let mut rows = Vec::new();
        let mut entries = Vec::new();
        for &i in states {
            row_start.push(rows.len());
            for action in model.actions(i) {
                let begin = entries.len();
                match model.kind() {
                    TimeKind::Discrete => {
                        let scale = action.cost.exp();
                        for &(j, p) in &action.transitions {
                            if local[j] != usize::MAX && p != 0.0 {
                                entries.push((local[j], scale * p));
                            }
                        }
                    }
                    TimeKind::Continuous => {
                        for &(j, q) in &action.transitions {
                            if local[j] == usize::MAX {
                                continue;
                            }
                            let w = if j == i {
                                1.0 + step * (q + action.cost)
                            } else {
                                step * q
                            };
                            if w != 0.0 {
                                entries.push((local[j], w));
                            }
                        }
                    }
                }
                rows.push((begin, entries.len()));
            }
        }
        row_start.push(rows.len());
        Self {
            kind: model.kind(),
            states: states.to_vec(),
            row_start,
            rows,
            entries,
            step,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self, i: usize) -> usize {
        self.row_start[i + 1] - self.row_start[i]
    }

    #[inline]
    pub fn row_value(&self, i: usize, a: usize, psi: &[f64]) -> f64 {
        let (b, e) = self.rows[self.row_start[i] + a];
        self.entries[b..e].iter().map(|&(j, w)| w * psi[j]).sum()
    }

    /// Minimum over actions with lowest-index tie-break.
    #[inline]
    pub fn min_value(&self, i: usize, psi: &[f64]) -> (usize, f64) {
        let mut best = (0, self.row_value(i, 0, psi));
        for a in 1..self.num_actions(i) {
            let v = self.row_value(i, a, psi);
            if v < best.1 {
                best = (a, v);
            }
        }
        best
    }

    pub fn apply(&self, rule: Rule<'_>, psi: &[f64], out: &mut [f64], exec: &Exec) {
        match rule {
            Rule::Min => exec.fill(out, |i| self.min_value(i, psi).1),
            Rule::Fixed(policy) => exec.fill(out, |i| self.row_value(i, policy[i], psi)),
        }
    }

    pub fn argmin(&self, psi: &[f64]) -> Vec<usize> {
        (0..self.len()).map(|i| self.min_value(i, psi).0).collect()
    }

    /// Argmin that keeps `incumbent[i]` when it is within `slack` (relative) of the minimum.
    pub fn improve(&self, psi: &[f64], incumbent: &[usize], slack: f64) -> Vec<usize> {
        (0..self.len())
            .map(|i| {
                let (a, best) = self.min_value(i, psi);
                let inc = self.row_value(i, incumbent[i], psi);
                if inc - best <= slack * best.abs().max(f64::MIN_POSITIVE) {
                    incumbent[i]
                } else {
                    a
                }
            })
            .collect()
    }

    pub fn to_rho(&self, mu: f64) -> f64 {
        match self.kind {
            TimeKind::Discrete => mu.ln(),
            TimeKind::Continuous => (mu - 1.0) / self.step,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Rule<'a> {
    Min,
    Fixed(&'a [usize]),
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    /// Eigenvector estimate on the domain, max-norm one.
    pub psi: Vec<f64>,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Outcome {
    pub fn rho(&self) -> f64 {
        0.5 * (self.rho_lo + self.rho_hi)
    }

    pub fn gap(&self) -> f64 {
        self.rho_hi - self.rho_lo
    }
}

fn normalize_max(v: &mut [f64]) -> f64 {
    let m = v.iter().fold(0.0_f64, |m, &x| m.max(x));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
    m
}

/// Collatz–Wielandt bracket of `y = T psi` over the support of `psi`, in
/// discrete-eigenvalue units.
pub(crate) fn cw_bracket(psi: &[f64], y: &[f64]) -> (f64, f64) {
    let top = psi.iter().fold(0.0_f64, |m, &x| m.max(x));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (p, q) in psi.iter().zip(y) {
        if *p == 0.0 && *q > 0.0 {
            // mass flows into a state the iterate does not cover yet
            hi = f64::INFINITY;
        } else if *p > SUPPORT_EPS * top {
            let r = q / p;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Power iteration on the restricted operator. In discrete time the update is
/// damped as `psi <- T psi + σ psi` with `σ` the current upper bracket, which
/// has the same eigenvectors and removes periodic oscillation; in continuous
/// time the operator already has a positive diagonal.
pub(crate) fn power_iterate(
    op: &LocalOp,
    rule: Rule<'_>,
    initial: Vec<f64>,
    tol: f64,
    max_iter: usize,
    exec: &Exec,
) -> Result<Outcome> {
    let n = op.len();
    let mut psi = initial;
    if normalize_max(&mut psi) <= 0.0 {
        return Err(Error::DegenerateEigenvector);
    }
    let mut y = vec![0.0; n];
    let mut gap_history: Option<(usize, f64)> = None;
    let mut last = (f64::NEG_INFINITY, f64::INFINITY);
    for it in 1..=max_iter {
        op.apply(rule, &psi, &mut y, exec);
        if y.iter().all(|&v| v <= 0.0) {
            return Err(Error::DegenerateEigenvector);
        }
        let (lo_mu, hi_mu) = cw_bracket(&psi, &y);
        let (lo, hi) = (op.to_rho(lo_mu), op.to_rho(hi_mu));
        last = (lo, hi);
        let gap = hi - lo;
        if gap < tol {
            return Ok(Outcome {
                psi,
                rho_lo: lo,
                rho_hi: hi,
                iterations: it,
                converged: true,
            });
        }
        if matches!(rule, Rule::Min) {
            match gap_history {
                Some((at, g)) if it - at >= STALL_WINDOW => {
                    if gap.is_finite() && gap > (1.0 - STALL_RATIO) * g {
                        return Ok(Outcome {
                            psi,
                            rho_lo: lo,
                            rho_hi: hi,
                            iterations: it,
                            converged: false,
                        });
                    }
                    gap_history = Some((it, gap));
                }
                None if gap.is_finite() => gap_history = Some((it, gap)),
                _ => {}
            }
        }
        match op.kind {
            TimeKind::Discrete => {
                let sigma = if hi_mu.is_finite() { hi_mu } else { 0.0 };
                for (p, q) in psi.iter_mut().zip(&y) {
                    *p = q + sigma * *p;
                }
            }
            TimeKind::Continuous => psi.copy_from_slice(&y),
        }
        if normalize_max(&mut psi) <= 0.0 {
            return Err(Error::DegenerateEigenvector);
        }
    }
    Ok(Outcome {
        psi,
        rho_lo: last.0,
        rho_hi: last.1,
        iterations: max_iter,
        converged: false,
    })
}

/// Nonlinear eigenproblem with a policy-iteration fallback when the plain
/// iteration stalls: freeze the argmin policy, solve its linear Perron
/// problem, re-improve, until the policy is stable.
pub(crate) fn solve_min_eigen(
    op: &LocalOp,
    initial: Vec<f64>,
    tol: f64,
    max_iter: usize,
    exec: &Exec,
) -> Result<Outcome> {
    let first = power_iterate(op, Rule::Min, initial, tol, max_iter, exec)?;
    if first.converged || first.iterations >= max_iter {
        return finish(first, tol, max_iter);
    }
    let mut total = first.iterations;
    let mut psi = first.psi;
    let mut policy = op.argmin(&psi);
    for _ in 0..MAX_PI_ROUNDS {
        let budget = max_iter.saturating_sub(total).max(1);
        let out = power_iterate(op, Rule::Fixed(&policy), psi, 0.1 * tol, budget, exec)?;
        total += out.iterations;
        psi = out.psi;
        let next = op.improve(&psi, &policy, 1e-14);
        if next == policy || total >= max_iter {
            break;
        }
        policy = next;
    }
    let mut y = vec![0.0; op.len()];
    op.apply(Rule::Min, &psi, &mut y, exec);
    let (lo, hi) = cw_bracket(&psi, &y);
    let out = Outcome {
        psi,
        rho_lo: op.to_rho(lo),
        rho_hi: op.to_rho(hi),
        iterations: total,
        converged: op.to_rho(hi) - op.to_rho(lo) < tol,
    };
    finish(out, tol, max_iter)
}

fn finish(out: Outcome, _tol: f64, max_iter: usize) -> Result<Outcome> {
    if out.converged {
        Ok(out)
    } else {
        Err(Error::NoConvergence {
            what: "Dirichlet eigen-iteration",
            iterations: out.iterations.min(max_iter),
            gap: out.gap(),
        })
    }
}
