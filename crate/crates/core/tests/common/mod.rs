//! Independent dense oracles and instance generators shared by the
//! integration tests. Nothing here calls the crate's solvers.

#![allow(dead_code)]

use nalgebra::DMatrix;
use riskeig::model::{Model, Policy, TimeKind};
use riskeig::presets::{random_ct, random_dt, RandomParams};

/// Closed DT instance with `3..=6` states and `1..=3` actions per state.
pub fn dt_instance(k: u64) -> Model {
    random_dt(&RandomParams {
        states: 3 + (k % 4) as usize,
        min_actions: 1,
        max_actions: 3,
        seed: 1000 + k,
    })
    .unwrap()
}

pub fn ct_instance(k: u64) -> Model {
    random_ct(&RandomParams {
        states: 3 + (k % 4) as usize,
        min_actions: 1,
        max_actions: 3,
        seed: 5000 + k,
    })
    .unwrap()
}

/// Every deterministic policy, last state varying fastest.
pub fn all_policies(model: &Model) -> Vec<Policy> {
    let n = model.size();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(Policy::new(idx.clone()));
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < model.num_actions(i) {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// `e^{c} P` (DT) or `Q + diag(c)` (CT) of a policy, restricted to `states`.
pub fn dense_policy_matrix(model: &Model, policy: &Policy, states: &[usize]) -> DMatrix<f64> {
    let n = states.len();
    let mut m = DMatrix::zeros(n, n);
    for (r, &i) in states.iter().enumerate() {
        let a = model.action(i, policy.get(i));
        for (c, &j) in states.iter().enumerate() {
            let w = a.weight(j);
            m[(r, c)] = match model.kind() {
                TimeKind::Discrete => a.cost.exp() * w,
                TimeKind::Continuous => w + if i == j { a.cost } else { 0.0 },
            };
        }
    }
    m
}

/// Log spectral radius (DT) or largest real part of the spectrum (CT).
pub fn dense_policy_value(model: &Model, policy: &Policy, states: &[usize]) -> f64 {
    let eig = dense_policy_matrix(model, policy, states).complex_eigenvalues();
    match model.kind() {
        TimeKind::Discrete => eig.iter().map(|z| z.norm()).fold(0.0, f64::max).ln(),
        TimeKind::Continuous => eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
    }
}

pub struct DenseOracle {
    pub lambda_star: f64,
    pub values: Vec<(Policy, f64)>,
}

impl DenseOracle {
    pub fn new(model: &Model, states: &[usize]) -> Self {
        let values: Vec<(Policy, f64)> = all_policies(model)
            .into_iter()
            .map(|p| {
                let v = dense_policy_value(model, &p, states);
                (p, v)
            })
            .collect();
        let lambda_star = values.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        Self {
            lambda_star,
            values,
        }
    }

    pub fn full(model: &Model) -> Self {
        let states: Vec<usize> = (0..model.size()).collect();
        Self::new(model, &states)
    }

    pub fn value_of(&self, p: &Policy) -> f64 {
        self.values.iter().find(|e| &e.0 == p).unwrap().1
    }

    pub fn argmins(&self, tol: f64) -> Vec<&Policy> {
        self.values
            .iter()
            .filter(|e| e.1 <= self.lambda_star + tol)
            .map(|e| &e.0)
            .collect()
    }

    /// Distance from the minimum to the runner-up value.
    pub fn separation(&self) -> f64 {
        let mut v: Vec<f64> = self.values.iter().map(|e| e.1).collect();
        v.sort_by(f64::total_cmp);
        if v.len() < 2 {
            f64::INFINITY
        } else {
            v[1] - v[0]
        }
    }
}

/// Largest real root of `x³ + b x² + c x + d`, trigonometric or Cardano form.
pub fn largest_cubic_root(b: f64, c: f64, d: f64) -> f64 {
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let t = if disc < 0.0 {
        let r = (-p / 3.0).sqrt();
        let phi = (3.0 * q / (2.0 * p) / r).clamp(-1.0, 1.0).acos();
        2.0 * r * (phi / 3.0).cos()
    } else {
        let s = disc.sqrt();
        (-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()
    };
    t - b / 3.0
}

/// Perron root of a 3×3 matrix through its characteristic polynomial.
pub fn cubic_perron_root(m: &[[f64; 3]; 3]) -> f64 {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    largest_cubic_root(-tr, minors, -det)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
