//! Parametric model builders: a controlled reneging queue, discrete- and
//! continuous-time birth–death chains, and random dense instances. The
//! structured builders also return a drift certificate for the truncation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Action, CtDrift, DtDrift, ExplosionCert, LyapunovCert, LyapunovCertCt, LyapunovCertDt, Model,
    ParametricSpec, StateSpace,
};

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

/// Largest exponent used for exponential Lyapunov functions.
const MAX_EXPONENT: f64 = 700.0;

/// First index from which `ℓ(i) − max_a c(i,a)` increases strictly to the
/// end of the truncation, and no earlier than `floor`.
fn growth_start(model: &Model, ell: &[f64], floor: usize) -> usize {
    let g = |i: usize| {
        ell[i]
            - model
                .actions(i)
                .iter()
                .map(|a| a.cost)
                .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut t = ell.len().saturating_sub(1);
    while t > floor && g(t - 1) < g(t) {
        t -= 1;
    }
    t.max(floor)
}

// ---------------------------------------------------------------------------
// queueing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Arrival {
    /// `P(A = k) = p (1 − p)^k`, `k ≥ 0`.
    Geometric { p: f64 },
    /// `P(A = k) = probs[k]`.
    Table { probs: Vec<f64> },
}

impl Arrival {
    fn pmf(&self, k: usize) -> f64 {
        match self {
            Arrival::Geometric { p } => p * (1.0 - p).powi(k as i32),
            Arrival::Table { probs } => probs.get(k).copied().unwrap_or(0.0),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Arrival::Geometric { p } => (1.0 - p) / p,
            Arrival::Table { probs } => probs.iter().enumerate().map(|(k, q)| k as f64 * q).sum(),
        }
    }

    /// `log E[e^{γA}]`, or `None` when infinite.
    fn log_mgf(&self, gamma: f64) -> Option<f64> {
        match self {
            Arrival::Geometric { p } => {
                let r = (1.0 - p) * gamma.exp();
                (r < 1.0).then(|| (p / (1.0 - r)).ln())
            }
            Arrival::Table { probs } => Some(
                probs
                    .iter()
                    .enumerate()
                    .map(|(k, q)| q * (gamma * k as f64).exp())
                    .sum::<f64>()
                    .ln(),
            ),
        }
    }

    fn check(&self) -> Result<()> {
        match self {
            Arrival::Geometric { p } if !(*p > 0.0 && *p <= 1.0) => {
                Err(invalid(format!("geometric parameter {p} outside (0, 1]")))
            }
            Arrival::Table { probs } => {
                if probs.iter().any(|&q| !(q >= 0.0)) {
                    return Err(invalid("negative arrival probability"));
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(invalid(format!("arrival table sums to {s}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum QueueCost {
    /// `c(i,u) = scale (min(i, m)/m + κ_u)`. Without `scale`, it is chosen so
    /// that `‖c‖∞ = 0.9 γ` for the geometric certificate.
    Bounded {
        m: usize,
        kappa: Vec<f64>,
        #[serde(default)]
        scale: Option<f64>,
    },
    /// `c(i,u) = a i + κ_u`; needs the exponential certificate.
    Linear { a: f64, kappa: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum QueueCertificate {
    /// `V(i) = i + 1`, `Σ V P ≤ (1 − β) V + Ĉ 1_K`.
    Geometric,
    /// `V(i) = e^{γ i}`, `Σ V P ≤ Ĉ 1_K + e^{−ℓ} V`.
    Exponential {
        #[serde(default)]
        gamma: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QueueingParams {
    /// Reneging rate, in `(0, 1)`.
    pub theta: f64,
    pub arrival: Arrival,
    /// Service amounts `ζ`, one action each.
    pub controls: Vec<u32>,
    pub truncation: usize,
    pub cost: QueueCost,
    /// Defaults to `θ / 2`.
    pub beta: Option<f64>,
    pub certificate: QueueCertificate,
}

impl Default for QueueingParams {
    fn default() -> Self {
        Self {
            theta: 0.5,
            arrival: Arrival::Geometric { p: 0.5 },
            controls: vec![0, 1],
            truncation: 100,
            cost: QueueCost::Bounded {
                m: 10,
                kappa: vec![0.0, 0.1],
                scale: None,
            },
            beta: None,
            certificate: QueueCertificate::Geometric,
        }
    }
}

/// `sup_{f ∈ [0,1]} log(1 − f + f e^γ) − γ f`: the extra exponential moment
/// of mean-preserving randomized rounding.
fn rounding_excess(gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let e = gamma.exp_m1();
    let f = ((e - gamma) / (gamma * e)).clamp(0.0, 1.0);
    (1.0 + f * e).ln() - gamma * f
}

fn dt_drift(model: &Model, v: &[f64], i: usize) -> f64 {
    model
        .actions(i)
        .iter()
        .map(|a| a.transitions.iter().map(|&(j, w)| w * v[j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Positive `Ĉ` covering the largest excess over `K`, with slack for rounding.
fn cover(excess: f64) -> f64 {
    let e = excess.max(0.0);
    e * (1.0 + 1e-9) + 1e-9
}

/// Queue `Q' = [R − ζ + A]₊`, where `R` rounds `(1 − θ) Q` to a neighbouring
/// integer with mean `(1 − θ) Q`. Queue lengths `≥ N` are killed.
pub fn build_queueing_dt(params: &QueueingParams) -> Result<(Model, LyapunovCertDt)> {
    let QueueingParams {
        theta,
        ref arrival,
        ref controls,
        truncation: n,
        ..
    } = *params;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("θ = {theta} outside (0, 1)")));
    }
    if n == 0 || controls.is_empty() {
        return Err(invalid("empty truncation or control set"));
    }
    arrival.check()?;
    let beta = params.beta.unwrap_or(theta / 2.0);
    if !(beta > 0.0 && beta < theta) {
        return Err(invalid(format!("β = {beta} must lie in (0, θ)")));
    }
    let gamma_cost = (1.0 / (1.0 - beta)).ln();

    let cost: Box<dyn Fn(usize, usize) -> f64> = match (&params.cost, &params.certificate) {
        (QueueCost::Bounded { m, kappa, scale }, cert) => {
            if *m == 0 || kappa.len() != controls.len() {
                return Err(invalid("bounded cost needs m > 0 and one κ per control"));
            }
            let kmax = kappa.iter().cloned().fold(0.0_f64, f64::max);
            let s = match (scale, cert) {
                (Some(s), _) => *s,
                (None, QueueCertificate::Geometric) => 0.9 * gamma_cost / (1.0 + kmax),
                (None, QueueCertificate::Exponential { .. }) => 1.0,
            };
            let (m, kappa) = (*m, kappa.clone());
            Box::new(move |i, u| s * (i.min(m) as f64 / m as f64 + kappa[u]))
        }
        (QueueCost::Linear { .. }, QueueCertificate::Geometric) => {
            return Err(invalid("linear cost needs the exponential certificate"))
        }
        (QueueCost::Linear { a, kappa }, _) => {
            if kappa.len() != controls.len() {
                return Err(invalid("one κ per control"));
            }
            let (a, kappa) = (*a, kappa.clone());
            Box::new(move |i, u| a * i as f64 + kappa[u])
        }
    };

    let pmf: Vec<f64> = (0..=n).map(|k| arrival.pmf(k)).collect();
    let mut actions = Vec::with_capacity(n);
    for i in 0..n {
        let x = (1.0 - theta) * i as f64;
        let lo = x.floor();
        let frac = x - lo;
        let rounds = [(lo as i64, 1.0 - frac), (lo as i64 + 1, frac)];
        let row: Vec<Action> = controls
            .iter()
            .enumerate()
            .map(|(u, &zeta)| {
                let mut t = Vec::new();
                for &(r, pr) in &rounds {
                    if pr <= 0.0 {
                        continue;
                    }
                    let base = r - zeta as i64;
                    for (k, &pk) in pmf.iter().enumerate() {
                        let j = (base + k as i64).max(0) as usize;
                        if j >= n {
                            break;
                        }
                        if pk > 0.0 {
                            t.push((j, pr * pk));
                        }
                    }
                }
                Action::new(format!("serve{zeta}"), cost(i, u), t)
            })
            .collect();
        actions.push(row);
    }
    let model = Model::dt(StateSpace::new(n, 0)?, false, actions)?;

    let cert = match params.certificate {
        QueueCertificate::Geometric => {
            let v: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
            let a = arrival.mean();
            let k_set: Vec<usize> = (0..n)
                .filter(|&i| (theta - beta) * (i as f64) < a + beta)
                .collect();
            let excess = k_set
                .iter()
                .map(|&i| dt_drift(&model, &v, i) - (1.0 - beta) * v[i])
                .fold(0.0, f64::max);
            LyapunovCertDt {
                v,
                drift: DtDrift::Geometric { beta },
                k_set,
                c_hat: cover(excess),
                tail_index: 0,
            }
        }
        QueueCertificate::Exponential { gamma } => {
            let gamma = match (gamma, arrival) {
                (Some(g), _) => g,
                (None, Arrival::Geometric { p }) => 0.5 * (1.0 / (1.0 - p)).ln().min(2.0),
                (None, Arrival::Table { .. }) => 0.5,
            };
            if !(gamma > 0.0) {
                return Err(invalid("γ must be positive"));
            }
            if gamma * (n as f64 - 1.0) > MAX_EXPONENT {
                return Err(invalid("e^{γ i} overflows on this truncation"));
            }
            let a1 = arrival
                .log_mgf(gamma)
                .ok_or_else(|| invalid(format!("E[e^(γA)] infinite for γ = {gamma}")))?;
            let shift = a1 + rounding_excess(gamma);
            let v: Vec<f64> = (0..n).map(|i| (gamma * i as f64).exp()).collect();
            let ell: Vec<f64> = (0..n)
                .map(|i| (gamma * theta * i as f64 - shift).max(0.0))
                .collect();
            let k_set: Vec<usize> = (0..n)
                .filter(|&i| gamma * theta * (i as f64) < shift)
                .collect();
            let excess = k_set
                .iter()
                .map(|&i| dt_drift(&model, &v, i) - (-ell[i]).exp() * v[i])
                .fold(0.0, f64::max);
            let tail_index = growth_start(&model, &ell, k_set.last().map_or(0, |&k| k + 1));
            LyapunovCertDt {
                v,
                drift: DtDrift::NormLike { ell },
                k_set,
                c_hat: cover(excess),
                tail_index,
            }
        }
    };
    Ok((model, cert))
}

// ---------------------------------------------------------------------------
// birth–death, discrete time

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BirthDeathDtPreset {
    /// `λ(i) = (i+1)² / (i² + (i+1)²)`, `μ(i) = i² / (i² + (i+1)²)`.
    Transient,
    /// `λ = μ = 1/2`.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum BirthDeathCost {
    /// `c(i) = log(1 + i)`.
    Log,
    /// `c(i) = cap · min(i, m)/m`.
    Capped { cap: f64, m: usize },
}

impl BirthDeathCost {
    fn eval(&self, i: usize) -> f64 {
        match *self {
            BirthDeathCost::Log => (i as f64).ln_1p(),
            BirthDeathCost::Capped { cap, m } => cap * i.min(m) as f64 / m as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirthDeathDtParams {
    pub preset: BirthDeathDtPreset,
    /// Upward jump law `p_k`, `k = 1, 2, …` (entry 0 is `p_1`).
    pub p_table: Vec<f64>,
    pub truncation: usize,
    pub cost: BirthDeathCost,
    /// Optional second action with fixed death probability `brake` and extra cost.
    pub brake: Option<f64>,
    pub brake_cost: f64,
}

impl Default for BirthDeathDtParams {
    fn default() -> Self {
        Self {
            preset: BirthDeathDtPreset::Transient,
            p_table: vec![1.0],
            truncation: 100,
            cost: BirthDeathCost::Log,
            brake: None,
            brake_cost: 0.05,
        }
    }
}

impl BirthDeathDtParams {
    /// Birth and death probabilities of the preset action at `i ≥ 1`.
    pub fn rates(&self, i: usize) -> (f64, f64) {
        let x = i as f64;
        match self.preset {
            BirthDeathDtPreset::Transient => {
                let d = x * x + (x + 1.0) * (x + 1.0);
                ((x + 1.0) * (x + 1.0) / d, x * x / d)
            }
            BirthDeathDtPreset::Symmetric => (0.5, 0.5),
        }
    }

    /// `sup_u |λ(i,u) Σ_k k p_k − μ(i,u)|`, the drift of `W(i) = i + 1`.
    pub fn drift_bound(&self, i: usize) -> f64 {
        let mean_jump: f64 = self
            .p_table
            .iter()
            .enumerate()
            .map(|(k, p)| (k + 1) as f64 * p)
            .sum();
        let mut pairs = vec![self.rates(i)];
        if let Some(b) = self.brake {
            pairs.push((1.0 - b, b));
        }
        pairs
            .iter()
            .map(|(l, m)| (l * mean_jump - m).abs())
            .fold(0.0, f64::max)
    }
}

/// Index `i` is state `i`; state 0 moves to 1, state `i ≥ 1` jumps up by `k`
/// with probability `λ p_k` and down by one with probability `μ`.
pub fn build_birth_death_dt(params: &BirthDeathDtParams) -> Result<Model> {
    let n = params.truncation;
    if n < 2 {
        return Err(invalid("truncation must be at least 2"));
    }
    if params.p_table.iter().any(|&p| !(p >= 0.0))
        || (params.p_table.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(invalid("p_table must be a probability vector"));
    }
    if let Some(b) = params.brake {
        if !(b > 0.0 && b < 1.0) {
            return Err(invalid("brake probability outside (0, 1)"));
        }
    }
    if matches!(params.cost, BirthDeathCost::Capped { m: 0, .. }) {
        return Err(invalid("capped cost needs m > 0"));
    }
    let cost = |i: usize| params.cost.eval(i);
    let row = |i: usize, lam: f64, mu: f64| {
        let mut t = vec![(i - 1, mu)];
        for (k, &p) in params.p_table.iter().enumerate() {
            let j = i + k + 1;
            if j < n && p > 0.0 {
                t.push((j, lam * p));
            }
        }
        t
    };
    let mut actions = vec![vec![Action::new("go", cost(0), vec![(1, 1.0)])]];
    for i in 1..n {
        let (lam, mu) = params.rates(i);
        let mut acts = vec![Action::new("drift", cost(i), row(i, lam, mu))];
        if let Some(b) = params.brake {
            acts.push(Action::new(
                "brake",
                cost(i) + params.brake_cost,
                row(i, 1.0 - b, b),
            ));
        }
        actions.push(acts);
    }
    Model::dt(StateSpace::new(n, 0)?, false, actions)
}

// ---------------------------------------------------------------------------
// birth–death, continuous time

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirthDeathCtParams {
    pub lam: f64,
    pub mu: f64,
    pub controls: Vec<f64>,
    /// Total exit rate of the boundary state; `q(j|1) = rate · 2^{1−j}`.
    pub boundary_rate: f64,
    pub truncation: usize,
    /// Cost `scale · min(i, m)/m + κ_u`.
    pub cost_scale: f64,
    pub cost_m: usize,
    pub kappa: Vec<f64>,
    /// Exponent of `V(i) = e^{θ i}`.
    pub theta: f64,
}

impl Default for BirthDeathCtParams {
    fn default() -> Self {
        Self {
            lam: 1.0,
            mu: 2.0,
            controls: vec![0.0, 1.0],
            boundary_rate: 1.0,
            truncation: 64,
            cost_scale: 0.3,
            cost_m: 10,
            kappa: vec![0.0, 0.1],
            theta: 0.1,
        }
    }
}

impl BirthDeathCtParams {
    /// `α = −(λ(e^θ − 1) + μ(e^{−θ} − 1)) / 2`.
    pub fn alpha(&self) -> f64 {
        -(self.lam * self.theta.exp_m1() + self.mu * (-self.theta).exp_m1()) / 2.0
    }
}

/// Index `k` is state `k + 1`. For states `i ≥ 2` births at rate `λ i + u`
/// and deaths at rate `μ i + u`; state 1 jumps to `j ≥ 2` at rate
/// `boundary_rate · 2^{1−j}`. Jumps past the truncation are killed.
pub fn build_birth_death_ct(params: &BirthDeathCtParams) -> Result<(Model, LyapunovCertCt)> {
    let p = params;
    let n = p.truncation;
    if !(p.lam > 0.0 && p.mu > p.lam) {
        return Err(invalid(format!(
            "need μ > λ > 0, got λ = {}, μ = {}",
            p.lam, p.mu
        )));
    }
    if n < 2 || p.controls.is_empty() || p.kappa.len() != p.controls.len() {
        return Err(invalid("truncation ≥ 2 and one κ per control required"));
    }
    if p.controls.iter().any(|&u| !(u >= 0.0)) || !(p.boundary_rate > 0.0) || p.cost_m == 0 {
        return Err(invalid(
            "controls, boundary rate and cost_m must be nonnegative/positive",
        ));
    }
    let alpha = p.alpha();
    if !(alpha > 0.0) {
        return Err(invalid(format!(
            "θ = {} too large: α = {alpha} ≤ 0",
            p.theta
        )));
    }
    if p.theta >= std::f64::consts::LN_2 {
        return Err(invalid("θ ≥ log 2 makes the boundary drift infinite"));
    }
    if p.theta * n as f64 > MAX_EXPONENT {
        return Err(invalid("e^{θ i} overflows on this truncation"));
    }
    let state = |k: usize| (k + 1) as f64;
    let cost = |k: usize, u: usize| {
        p.cost_scale * (k + 1).min(p.cost_m) as f64 / p.cost_m as f64 + p.kappa[u]
    };
    let mut actions = Vec::with_capacity(n);
    // boundary state: rate-`r` jump law, same for every control
    let boundary: Vec<(usize, f64)> = (1..n)
        .map(|k| (k, p.boundary_rate * 2f64.powi(-(k as i32))))
        .collect();
    actions.push(
        (0..p.controls.len())
            .map(|u| {
                let mut t = boundary.clone();
                t.push((0, -p.boundary_rate));
                Action::new(format!("u{u}"), cost(0, u), t)
            })
            .collect(),
    );
    for k in 1..n {
        let i = state(k);
        let row: Vec<Action> = p
            .controls
            .iter()
            .enumerate()
            .map(|(u, &ctrl)| {
                let up = p.lam * i + ctrl;
                let down = p.mu * i + ctrl;
                let mut t = vec![(k - 1, down), (k, -(up + down))];
                if k + 1 < n {
                    t.push((k + 1, up));
                }
                Action::new(format!("u{u}"), cost(k, u), t)
            })
            .collect();
        actions.push(row);
    }
    let model = Model::ct(StateSpace::new(n, 0)?, false, actions)?;

    let v: Vec<f64> = (0..n).map(|k| (p.theta * state(k)).exp()).collect();
    let ell: Vec<f64> = (0..n).map(|k| alpha * state(k)).collect();
    let ct_drift = |w: &[f64], k: usize| {
        model
            .actions(k)
            .iter()
            .map(|a| a.transitions.iter().map(|&(j, q)| q * w[j]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let umax = p.controls.iter().cloned().fold(0.0, f64::max);
    let curvature = p.theta.exp() + (-p.theta).exp() - 2.0;
    // K: the boundary state and states where the control term beats α
    let k_set: Vec<usize> = (0..n)
        .filter(|&k| k == 0 || alpha * state(k) <= umax * curvature)
        .collect();
    let excess = k_set
        .iter()
        .map(|&k| ct_drift(&v, k) + ell[k] * v[k])
        .fold(0.0, f64::max);
    let tail_index = growth_start(&model, &ell, k_set.last().map_or(0, |&k| k + 1));

    let v_tilde: Vec<f64> = (0..n).map(state).collect();
    let c1 = (0..n)
        .flat_map(|k| (0..model.num_actions(k)).map(move |a| (k, a)))
        .map(|(k, a)| model.exit_rate(k, a) / v_tilde[k])
        .fold(0.0, f64::max);
    let c2 = (0..n).map(|k| ct_drift(&v_tilde, k)).fold(0.0, f64::max);
    let cert = LyapunovCertCt {
        v,
        drift: CtDrift::NormLike { ell },
        k_set,
        c_hat: cover(excess),
        tail_index,
        explosion: Some(ExplosionCert {
            v_tilde,
            c0: 0.0,
            c1: c1 * (1.0 + 1e-12),
            c2: cover(c2),
        }),
    };
    Ok((model, cert))
}

// ---------------------------------------------------------------------------
// random instances

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomParams {
    pub states: usize,
    pub min_actions: usize,
    pub max_actions: usize,
    pub seed: u64,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            states: 4,
            min_actions: 1,
            max_actions: 3,
            seed: 0,
        }
    }
}

impl RandomParams {
    fn check(&self) -> Result<()> {
        if self.states == 0 || self.min_actions == 0 || self.max_actions < self.min_actions {
            return Err(invalid("need states ≥ 1 and 1 ≤ min_actions ≤ max_actions"));
        }
        Ok(())
    }
}

/// Closed model with strictly positive rows and costs `U[0, 1)`.
pub fn random_dt(params: &RandomParams) -> Result<Model> {
    params.check()?;
    let n = params.states;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let actions = (0..n)
        .map(|_| {
            let m = rng.random_range(params.min_actions..=params.max_actions);
            (0..m)
                .map(|a| {
                    let w: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
                    let s: f64 = w.iter().sum();
                    let t = w.iter().enumerate().map(|(j, x)| (j, x / s)).collect();
                    Action::new(format!("a{a}"), rng.random::<f64>(), t)
                })
                .collect()
        })
        .collect();
    Model::dt(StateSpace::new(n, 0)?, true, actions)
}

/// Conservative model with off-diagonal rates `U(0, 1]` and costs `U[0, 1)`.
pub fn random_ct(params: &RandomParams) -> Result<Model> {
    params.check()?;
    let n = params.states;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let actions = (0..n)
        .map(|i| {
            let m = rng.random_range(params.min_actions..=params.max_actions);
            (0..m)
                .map(|a| {
                    let mut t: Vec<(usize, f64)> = (0..n)
                        .filter(|&j| j != i)
                        .map(|j| (j, 1.0 - rng.random::<f64>()))
                        .collect();
                    let out: f64 = t.iter().map(|e| e.1).sum();
                    t.push((i, -out));
                    Action::new(format!("a{a}"), rng.random::<f64>(), t)
                })
                .collect()
        })
        .collect();
    Model::ct(StateSpace::new(n, 0)?, true, actions)
}

// ---------------------------------------------------------------------------
// registry

pub const PARAMETRIC_NAMES: [&str; 5] = [
    "queueing_dt",
    "birth_death_dt",
    "birth_death_ct",
    "random_dt",
    "random_ct",
];

fn params_from<T: serde::de::DeserializeOwned + Default>(value: &serde_json::Value) -> Result<T> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value.clone()).map_err(|e| invalid(e.to_string()))
}

/// Builds a registered parametric model; `spec.truncation` overrides the
/// size field of the parameters.
pub fn build_parametric(spec: &ParametricSpec) -> Result<(Model, Option<LyapunovCert>)> {
    match spec.name.as_str() {
        "queueing_dt" => {
            let mut p: QueueingParams = params_from(&spec.params)?;
            p.truncation = spec.truncation;
            let (m, c) = build_queueing_dt(&p)?;
            Ok((m, Some(LyapunovCert::Dt(c))))
        }
        "birth_death_dt" => {
            let mut p: BirthDeathDtParams = params_from(&spec.params)?;
            p.truncation = spec.truncation;
            Ok((build_birth_death_dt(&p)?, None))
        }
        "birth_death_ct" => {
            let mut p: BirthDeathCtParams = params_from(&spec.params)?;
            p.truncation = spec.truncation;
            let (m, c) = build_birth_death_ct(&p)?;
            Ok((m, Some(LyapunovCert::Ct(c))))
        }
        "random_dt" => {
            let mut p: RandomParams = params_from(&spec.params)?;
            p.states = spec.truncation;
            Ok((random_dt(&p)?, None))
        }
        "random_ct" => {
            let mut p: RandomParams = params_from(&spec.params)?;
            p.states = spec.truncation;
            Ok((random_ct(&p)?, None))
        }
        other => Err(invalid(format!(
            "unknown parametric model {other:?}; known: {}",
            PARAMETRIC_NAMES.join(", ")
        ))),
    }
}
