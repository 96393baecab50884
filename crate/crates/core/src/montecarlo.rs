//! Finite-horizon Monte Carlo estimate of the risk-sensitive cost of a
//! stationary policy: `λ̂ = (1/T) log( (1/N) Σ_p e^{S_p} )`, where `S_p` is
//! the cost accumulated along path `p`.
//!
//! Path `p` draws from ChaCha8 stream `p` of `seed`, so the estimate does not
//! depend on how paths are scheduled over threads. Per-path costs are reduced
//! with a fixed pairwise log-sum-exp tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, Policy, TimeKind};
use crate::par::Exec;

/// Rows under the policy may lose at most this much mass.
pub const LEAK_TOL: f64 = 1e-9;
/// Weight share of the heaviest path above which the estimate is flagged.
pub const DEGENERACY_SHARE: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Steps in discrete time (must be a positive integer), time in continuous time.
    pub horizon: f64,
    pub paths: usize,
    pub seed: u64,
    pub start_state: usize,
    #[serde(default = "default_batches")]
    pub batch_count: usize,
    #[serde(skip)]
    pub exec: Exec,
}

fn default_batches() -> usize {
    32
}

impl SimConfig {
    pub fn new(horizon: f64, paths: usize, seed: u64) -> Self {
        Self {
            horizon,
            paths,
            seed,
            start_state: 0,
            batch_count: default_batches(),
            exec: Exec::serial(),
        }
    }

    fn check(&self, model: &Model) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidConfig("horizon must be positive".into()));
        }
        if model.kind() == TimeKind::Discrete && self.horizon.fract() != 0.0 {
            return Err(Error::InvalidConfig(
                "discrete-time horizon must be an integer".into(),
            ));
        }
        if self.batch_count < 2 || self.paths < self.batch_count {
            return Err(Error::InvalidConfig(
                "need at least two batches and paths ≥ batch_count".into(),
            ));
        }
        if self.start_state >= model.size() {
            return Err(Error::DimensionMismatch {
                expected: model.size(),
                got: self.start_state + 1,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub paths: usize,
    pub horizon: f64,
    pub seed: u64,
    /// One path carries more than half of the exponential weight.
    pub degenerate: bool,
    /// `mean_p S_p / T`; never above `point`.
    pub mean_path_cost: f64,
}

/// Jump law of the policy at each state: cumulative probabilities, targets,
/// cost, and (continuous time) exit rate.
struct Chain {
    targets: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
    cost: Vec<f64>,
    rate: Vec<f64>,
}

impl Chain {
    fn new(model: &Model, v: &Policy) -> Result<Self> {
        v.validate(model)?;
        let n = model.size();
        let mut chain = Chain {
            targets: Vec::with_capacity(n),
            cumulative: Vec::with_capacity(n),
            cost: Vec::with_capacity(n),
            rate: Vec::with_capacity(n),
        };
        for i in 0..n {
            let a = v.get(i);
            let action = model.action(i, a);
            let (leak, rate) = match model.kind() {
                TimeKind::Discrete => (1.0 - action.row_sum(), 1.0),
                TimeKind::Continuous => (action.row_sum(), model.exit_rate(i, a)),
            };
            if leak.abs() > LEAK_TOL {
                return Err(Error::LeakyKernel {
                    state: i,
                    action: a,
                    leak,
                });
            }
            let mut targets = Vec::new();
            let mut cumulative = Vec::new();
            let mut acc = 0.0;
            for &(j, w) in &action.transitions {
                if (model.kind() == TimeKind::Continuous && j == i) || w <= 0.0 {
                    continue;
                }
                acc += w / rate;
                targets.push(j);
                cumulative.push(acc);
            }
            chain.targets.push(targets);
            chain.cumulative.push(cumulative);
            chain.cost.push(action.cost);
            chain.rate.push(rate);
        }
        Ok(chain)
    }

    fn jump(&self, i: usize, rng: &mut ChaCha8Rng) -> usize {
        let cum = &self.cumulative[i];
        let u = rng.random::<f64>() * cum.last().copied().unwrap_or(1.0);
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.targets[i][k]
    }

    fn path_dt(&self, start: usize, steps: u64, rng: &mut ChaCha8Rng) -> f64 {
        let mut x = start;
        let mut s = 0.0;
        for _ in 0..steps {
            s += self.cost[x];
            x = self.jump(x, rng);
        }
        s
    }

    fn path_ct(&self, start: usize, horizon: f64, rng: &mut ChaCha8Rng) -> f64 {
        let mut x = start;
        let mut t = 0.0;
        let mut s = 0.0;
        while t < horizon {
            let remaining = horizon - t;
            let rate = self.rate[x];
            if rate <= 0.0 || self.targets[x].is_empty() {
                return s + remaining * self.cost[x];
            }
            let u: f64 = rng.random();
            let sojourn = -(1.0 - u).ln() / rate;
            if sojourn >= remaining {
                return s + remaining * self.cost[x];
            }
            s += sojourn * self.cost[x];
            t += sojourn;
            x = self.jump(x, rng);
        }
        s
    }
}

fn path_rng(seed: u64, p: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(p as u64);
    rng
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `log Σ e^{x_k}` by a balanced binary tree over the slice order.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => f64::NEG_INFINITY,
        1 => xs[0],
        n => log_add(log_sum_exp(&xs[..n / 2]), log_sum_exp(&xs[n / 2..])),
    }
}

/// Two-sided 97.5% Student-t quantile (Cornish–Fisher expansion).
fn t_quantile(df: f64) -> f64 {
    let z: f64 = 1.959_963_984_540_054;
    let z3 = z.powi(3);
    let z5 = z.powi(5);
    z + (z3 + z) / (4.0 * df) + (5.0 * z5 + 16.0 * z3 + 3.0 * z) / (96.0 * df * df)
}

fn estimate(costs: &[f64], config: &SimConfig) -> SimEstimate {
    let n = costs.len();
    let t = config.horizon;
    let lse = log_sum_exp(costs);
    let point = (lse - (n as f64).ln()) / t;
    let top = costs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let degenerate = (top - lse).exp() > DEGENERACY_SHARE;
    let mean_path_cost = costs.iter().sum::<f64>() / n as f64 / t;

    // batch means of the weights e^{S_p − top}, mapped back through log
    let b = config.batch_count;
    let means: Vec<f64> = (0..b)
        .map(|k| {
            let chunk = &costs[k * n / b..(k + 1) * n / b];
            (log_sum_exp(chunk) - top).exp() / chunk.len() as f64
        })
        .collect();
    let mean = ((lse - top).exp()) / n as f64;
    let bm = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (b - 1) as f64;
    let half = t_quantile((b - 1) as f64) * (var / b as f64).sqrt();
    let to_rate = |w: f64| (top + w.ln()) / t;
    let ci_high = to_rate(mean + half).max(point);
    let ci_low = if mean - half > 0.0 {
        to_rate(mean - half).min(point)
    } else {
        // the interval reaches zero weight; fall back to the smallest path rate
        (costs.iter().fold(f64::INFINITY, |m, &x| m.min(x)) / t).min(point)
    };
    SimEstimate {
        point,
        ci_low,
        ci_high,
        paths: n,
        horizon: t,
        seed: config.seed,
        degenerate,
        mean_path_cost,
    }
}

/// Per-path accumulated costs, in path order.
pub fn path_costs(model: &Model, v: &Policy, config: &SimConfig) -> Result<Vec<f64>> {
    config.check(model)?;
    let chain = Chain::new(model, v)?;
    let start = config.start_state;
    let seed = config.seed;
    Ok(match model.kind() {
        TimeKind::Discrete => {
            let steps = config.horizon as u64;
            config.exec.map(config.paths, |p| {
                chain.path_dt(start, steps, &mut path_rng(seed, p))
            })
        }
        TimeKind::Continuous => {
            let horizon = config.horizon;
            config.exec.map(config.paths, |p| {
                chain.path_ct(start, horizon, &mut path_rng(seed, p))
            })
        }
    })
}

pub fn simulate(model: &Model, v: &Policy, config: &SimConfig) -> Result<SimEstimate> {
    let costs = path_costs(model, v, config)?;
    Ok(estimate(&costs, config))
}

pub fn simulate_dt(model: &Model, v: &Policy, config: &SimConfig) -> Result<SimEstimate> {
    crate::dirichlet::expect_kind(model, TimeKind::Discrete)?;
    simulate(model, v, config)
}

pub fn simulate_ct(model: &Model, v: &Policy, config: &SimConfig) -> Result<SimEstimate> {
    crate::dirichlet::expect_kind(model, TimeKind::Continuous)?;
    simulate(model, v, config)
}
