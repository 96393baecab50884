//! Brute-force ground truth for finite instances: enumerate every
//! deterministic stationary policy and take the smallest Perron root.
//!
//! This path never touches the nonlinear solvers. Each policy matrix is
//! handled by its own dense power iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, Policy, TimeKind};
use crate::par::Exec;

pub const DEFAULT_POLICY_CAP: u128 = 1_000_000;

/// Square nonnegative matrix stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        for row in &rows {
            for &(j, w) in row {
                if j >= n || !(w >= 0.0) || !w.is_finite() {
                    return Err(Error::InvalidParams(format!(
                        "entry ({j}, {w}) is not a finite nonnegative entry of an {n}x{n} matrix"
                    )));
                }
            }
        }
        Ok(Self { n, rows })
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let n = dense.len();
        let rows = dense
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &w)| w != 0.0)
                    .map(|(j, &w)| (j, w))
                    .collect()
            })
            .collect();
        Self::new(n, rows)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in self.rows.iter().zip(y.iter_mut()) {
            *out = row.iter().map(|&(j, w)| w * x[j]).sum();
        }
    }

    fn is_irreducible(&self) -> bool {
        let reach = |adj: &Vec<Vec<usize>>| {
            let mut seen = vec![false; self.n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for &j in &adj[i] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        let mut fwd = vec![Vec::new(); self.n];
        let mut bwd = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                if w > 0.0 {
                    fwd[i].push(j);
                    bwd[j].push(i);
                }
            }
        }
        reach(&fwd) && reach(&bwd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronResult {
    pub log_root: f64,
    pub right_vector: Vec<f64>,
    pub cw_lower: f64,
    pub cw_upper: f64,
    pub iterations: usize,
    pub irreducible: bool,
}

impl PerronResult {
    pub fn root(&self) -> f64 {
        self.log_root.exp()
    }
}

/// Dominant eigenvalue of a nonnegative matrix by power iteration from the
/// all-ones vector. When a period-two pattern shows up (or progress is slow)
/// the iteration switches to averaging successive iterates,
/// `x <- (x + M x / r) / 2`, which keeps the Perron vector and breaks
/// periodicity. The bracket is reported in log units.
pub fn perron_root(m: &SparseMatrix, reference: usize, tol: f64) -> Result<PerronResult> {
    const MAX_ITER: usize = 1_000_000;
    let n = m.n;
    if m.rows.iter().all(|r| r.iter().all(|&(_, w)| w == 0.0)) {
        return Err(Error::ZeroMatrix);
    }
    let mut x = vec![1.0; n];
    let mut prev = x.clone();
    let mut y = vec![0.0; n];
    let mut averaging = false;
    let mut bracket = (f64::NEG_INFINITY, f64::INFINITY);
    let mut iterations = 0;
    for it in 1..=MAX_ITER {
        iterations = it;
        m.mul(&x, &mut y);
        let top = x.iter().fold(0.0_f64, |a, &b| a.max(b));
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for (xi, yi) in x.iter().zip(&y) {
            if *xi > 1e-14 * top {
                lo = lo.min(yi / xi);
                hi = hi.max(yi / xi);
            }
        }
        bracket = (lo.ln(), hi.ln());
        if bracket.1 - bracket.0 < tol {
            break;
        }
        if hi == 0.0 {
            // nilpotent on the current support
            return Err(Error::ZeroMatrix);
        }
        let mut next: Vec<f64> = if averaging {
            x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b / hi)).collect()
        } else {
            y.clone()
        };
        let nt = next.iter().fold(0.0_f64, |a, &b| a.max(b));
        next.iter_mut().for_each(|v| *v /= nt);
        if !averaging {
            let d1 = dist(&next, &x);
            let d2 = dist(&next, &prev);
            if (d1 > 1e-8 && d2 < 0.5 * d1) || it > 1000 {
                averaging = true;
            }
        }
        prev = std::mem::replace(&mut x, next);
    }
    let s = if x[reference] > 1e-14 {
        x[reference]
    } else {
        x.iter().fold(0.0_f64, |a, &b| a.max(b))
    };
    x.iter_mut().for_each(|v| *v /= s);
    let log_root = 0.5 * (bracket.0 + bracket.1);
    Ok(PerronResult {
        log_root,
        right_vector: x,
        cw_lower: bracket.0,
        cw_upper: bracket.1,
        iterations,
        irreducible: m.is_irreducible(),
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Lexicographic enumeration of deterministic stationary policies (the last
/// state varies fastest).
pub fn enumerate_policies(model: &Model, cap: u128) -> Result<impl Iterator<Item = Policy> + '_> {
    let count = model.policy_count();
    if count > cap {
        return Err(Error::TooManyPolicies { count, cap });
    }
    Ok((0..count as usize).map(move |k| policy_at(model, k)))
}

/// The `k`-th policy in lexicographic order.
pub fn policy_at(model: &Model, mut k: usize) -> Policy {
    let n = model.size();
    let mut idx = vec![0; n];
    for i in (0..n).rev() {
        let m = model.num_actions(i);
        idx[i] = k % m;
        k /= m;
    }
    Policy::new(idx)
}

/// Matrix whose Perron root gives the policy value: `e^{c} P` (discrete
/// time), or `Q + diag(c) + s I` with the returned shift `s` (continuous time).
pub fn policy_matrix(model: &Model, policy: &Policy) -> (SparseMatrix, f64) {
    let n = model.size();
    let shift = match model.kind() {
        TimeKind::Discrete => 0.0,
        TimeKind::Continuous => (0..n)
            .map(|i| model.exit_rate(i, policy.get(i)) - model.cost(i, policy.get(i)))
            .fold(0.0, f64::max),
    };
    let rows = (0..n)
        .map(|i| {
            let a = policy.get(i);
            let action = model.action(i, a);
            match model.kind() {
                TimeKind::Discrete => {
                    let e = action.cost.exp();
                    action
                        .transitions
                        .iter()
                        .map(|&(j, p)| (j, e * p))
                        .collect()
                }
                TimeKind::Continuous => action
                    .transitions
                    .iter()
                    .map(|&(j, q)| {
                        if j == i {
                            (j, (q + action.cost + shift).max(0.0))
                        } else {
                            (j, q)
                        }
                    })
                    .collect(),
            }
        })
        .collect();
    (SparseMatrix { n, rows }, shift)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValue {
    pub policy: Policy,
    /// Log Perron root (discrete time) or dominant eigenvalue (continuous time).
    pub value: f64,
    /// Policy matrix is reducible: the value may not equal the policy's ergodic cost.
    pub reducible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub lambda_star: f64,
    pub argmin_policy: Policy,
    /// Perron vector of the minimizing policy.
    pub argmin_vector: Vec<f64>,
    pub table: Vec<PolicyValue>,
}

/// Value of a single policy through its dense Perron problem.
pub fn policy_value(model: &Model, policy: &Policy, tol: f64) -> Result<(f64, PerronResult)> {
    policy.validate(model)?;
    let (m, shift) = policy_matrix(model, policy);
    let r = perron_root(&m, model.reference_state(), tol)?;
    let value = match model.kind() {
        TimeKind::Discrete => r.log_root,
        TimeKind::Continuous => r.root() - shift,
    };
    Ok((value, r))
}

/// `λ* = min_v value(v)` over all deterministic stationary policies.
pub fn brute_force_lambda_star(model: &Model, cap: u128, exec: &Exec) -> Result<OracleResult> {
    let count = model.policy_count();
    if count > cap {
        return Err(Error::TooManyPolicies { count, cap });
    }
    let results = exec.map(count as usize, |k| {
        let policy = policy_at(model, k);
        policy_value(model, &policy, 1e-13).map(|(v, r)| (policy, v, r))
    });
    let mut table = Vec::with_capacity(results.len());
    let mut best: Option<(usize, Vec<f64>)> = None;
    for (k, res) in results.into_iter().enumerate() {
        let (policy, value, perron) = res?;
        let better = match &best {
            None => true,
            Some((b, _)) => {
                value
                    < table
                        .get(*b)
                        .map(|p: &PolicyValue| p.value)
                        .unwrap_or(f64::INFINITY)
            }
        };
        if better {
            best = Some((k, perron.right_vector.clone()));
        }
        table.push(PolicyValue {
            policy,
            value,
            reducible: !perron.irreducible,
        });
    }
    let (k, vector) = best.ok_or(Error::ZeroMatrix)?;
    Ok(OracleResult {
        lambda_star: table[k].value,
        argmin_policy: table[k].policy.clone(),
        argmin_vector: vector,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, StateSpace};

    #[test]
    fn swap_matrix_root_one() {
        let m = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = perron_root(&m, 0, 1e-13).unwrap();
        assert!(r.log_root.abs() < 1e-12);
        assert!((r.right_vector[1] - 1.0).abs() < 1e-12);
        assert!(r.cw_lower <= r.log_root && r.log_root <= r.cw_upper);
    }

    #[test]
    fn scalar_and_zero() {
        let m = SparseMatrix::from_dense(&[vec![2.0]]).unwrap();
        assert!((perron_root(&m, 0, 1e-13).unwrap().root() - 2.0).abs() < 1e-12);
        let z = SparseMatrix::from_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(perron_root(&z, 0, 1e-13), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn policy_counts() {
        let space = |n| StateSpace::new(n, 0).unwrap();
        let mk = |counts: &[usize]| {
            let n = counts.len();
            let actions = counts
                .iter()
                .map(|&k| {
                    (0..k)
                        .map(|a| Action::new(format!("{a}"), 0.0, vec![(0, 1.0)]))
                        .collect()
                })
                .collect();
            Model::dt(space(n), true, actions).unwrap()
        };
        let m = mk(&[2, 2]);
        let all: Vec<_> = enumerate_policies(&m, 100)
            .unwrap()
            .map(|p| p.action_index)
            .collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(enumerate_policies(&mk(&[3]), 100).unwrap().count(), 3);
        assert_eq!(
            enumerate_policies(&mk(&[2, 1, 3, 2, 1]), 100)
                .unwrap()
                .count(),
            12
        );
        assert!(matches!(
            enumerate_policies(&mk(&[2, 1, 3, 2, 1]), 11),
            Err(Error::TooManyPolicies { count: 12, cap: 11 })
        ));
    }

    #[test]
    fn stay_or_move_tie() {
        let space = StateSpace::new(2, 0).unwrap();
        let m = Model::dt(
            space,
            true,
            vec![
                vec![
                    Action::new("stay", 0.5, vec![(0, 1.0)]),
                    Action::new("move", 0.0, vec![(1, 1.0)]),
                ],
                vec![Action::new("back", 1.0, vec![(0, 1.0)])],
            ],
        )
        .unwrap();
        let r = brute_force_lambda_star(&m, DEFAULT_POLICY_CAP, &Exec::serial()).unwrap();
        assert!((r.table[0].value - 0.5).abs() < 1e-12);
        assert!((r.table[1].value - 0.5).abs() < 1e-12);
        assert!((r.lambda_star - 0.5).abs() < 1e-12);
        assert!(r.table[0].reducible);
    }

    #[test]
    fn ct_two_state_closed_form() {
        let space = StateSpace::new(2, 0).unwrap();
        let m = Model::ct(
            space,
            true,
            vec![
                vec![
                    Action::new("slow", 0.2, vec![(0, -1.0), (1, 1.0)]),
                    Action::new("fast", 0.9, vec![(0, -3.0), (1, 3.0)]),
                ],
                vec![Action::new("back", 0.5, vec![(0, 2.0), (1, -2.0)])],
            ],
        )
        .unwrap();
        let r = brute_force_lambda_star(&m, DEFAULT_POLICY_CAP, &Exec::serial()).unwrap();
        let closed = |d0: f64, q01: f64, d1: f64, q10: f64| {
            let t = d0 + d1;
            let d = d0 - d1;
            t / 2.0 + ((d / 2.0).powi(2) + q01 * q10).sqrt()
        };
        let slow = closed(-1.0 + 0.2, 1.0, -2.0 + 0.5, 2.0);
        let fast = closed(-3.0 + 0.9, 3.0, -2.0 + 0.5, 2.0);
        assert!((r.table[0].value - slow).abs() < 1e-11);
        assert!((r.table[1].value - fast).abs() < 1e-11);
        assert!((r.lambda_star - slow.min(fast)).abs() < 1e-11);
    }
}
