//! Foster–Lyapunov certificates checked state by state on the truncation.

use serde::{Deserialize, Serialize};

use super::validate::{Quantity, ValidationReport, Violation};
use super::{Model, TimeKind};
use crate::error::{Error, Result};

const DRIFT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DtDrift {
    /// `sup_a Σ V P ≤ (1-β) V + Ĉ 1_K`, with costs bounded by `γ = log(1/(1-β))`.
    Geometric { beta: f64 },
    /// `sup_a Σ V P ≤ Ĉ 1_K + e^{-ℓ} V` with `ℓ` norm-like.
    NormLike { ell: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertDt {
    pub v: Vec<f64>,
    pub drift: DtDrift,
    pub k_set: Vec<usize>,
    pub c_hat: f64,
    /// First index of the tail on which the norm-like proxy is checked.
    pub tail_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CtDrift {
    /// `sup_a Σ V q ≤ Ĉ 1_K - γ V`, with costs bounded by `γ`.
    Geometric { gamma: f64 },
    /// `sup_a Σ V q ≤ Ĉ 1_K - ℓ V` with `ℓ` norm-like.
    NormLike { ell: Vec<f64> },
}

/// Non-explosion certificate: `Σ Ṽ q ≤ C0 Ṽ + C2` and `q(i) ≤ C1 Ṽ(i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplosionCert {
    pub v_tilde: Vec<f64>,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCertCt {
    pub v: Vec<f64>,
    pub drift: CtDrift,
    pub k_set: Vec<usize>,
    pub c_hat: f64,
    pub tail_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explosion: Option<ExplosionCert>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LyapunovCert {
    Dt(LyapunovCertDt),
    Ct(LyapunovCertCt),
}

impl LyapunovCert {
    pub fn v(&self) -> &[f64] {
        match self {
            LyapunovCert::Dt(c) => &c.v,
            LyapunovCert::Ct(c) => &c.v,
        }
    }
}

/// Largest drift `sup_a Σ_j V(j) w(j|i,a)` over actions. Leaked mass is
/// dropped (V is read as zero outside the truncation).
fn drift(model: &Model, v: &[f64], i: usize) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (a, action) in model.actions(i).iter().enumerate() {
        let s: f64 = action.transitions.iter().map(|&(j, w)| w * v[j]).sum();
        if s > best.1 {
            best = (a, s);
        }
    }
    best
}

fn check_len(n: usize, got: usize) -> Result<()> {
    if n != got {
        return Err(Error::DimensionMismatch { expected: n, got });
    }
    Ok(())
}

/// Verifies a drift certificate at every truncated state. Mode (a) also
/// checks `‖c‖∞ < γ`; mode (b) checks that `ℓ - max_a c` is strictly
/// increasing from the declared tail index on, as a finite proxy for
/// norm-likeness.
pub fn check_lyapunov(model: &Model, cert: &LyapunovCert) -> Result<ValidationReport> {
    let n = model.size();
    let mut violations = Vec::new();
    let mut caveats = vec![
        "drift evaluated on the truncated kernel; mass leaving the truncation is not counted"
            .to_string(),
    ];

    let (v, k_set, c_hat, tail_index) = match (cert, model.kind()) {
        (LyapunovCert::Dt(c), TimeKind::Discrete) => (&c.v, &c.k_set, c.c_hat, c.tail_index),
        (LyapunovCert::Ct(c), TimeKind::Continuous) => (&c.v, &c.k_set, c.c_hat, c.tail_index),
        _ => {
            return Err(Error::KindMismatch(
                "certificate time kind differs from the model".into(),
            ))
        }
    };
    check_len(n, v.len())?;
    if !(c_hat > 0.0) {
        return Err(Error::InvalidConfig("Ĉ must be positive".into()));
    }
    let mut in_k = vec![false; n];
    for &k in k_set {
        if k >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: k + 1,
            });
        }
        in_k[k] = true;
    }

    for (i, &vi) in v.iter().enumerate() {
        if !(vi >= 1.0) {
            violations.push(Violation {
                state: i,
                action: None,
                quantity: Quantity::LyapunovBelowOne,
                margin: 1.0 - vi,
            });
        }
    }

    let indicator = |i: usize| if in_k[i] { c_hat } else { 0.0 };
    let bound_at: Box<dyn Fn(usize) -> f64 + '_>;
    let mut ell_for_proxy: Option<&Vec<f64>> = None;
    let mut gamma_for_cost: Option<f64> = None;

    match cert {
        LyapunovCert::Dt(c) => match &c.drift {
            DtDrift::Geometric { beta } => {
                let beta = *beta;
                if !(beta > 0.0 && beta < 1.0) {
                    return Err(Error::InvalidConfig(format!("β = {beta} outside (0, 1)")));
                }
                gamma_for_cost = Some((1.0 / (1.0 - beta)).ln());
                bound_at = Box::new(move |i| (1.0 - beta) * v[i] + indicator(i));
            }
            DtDrift::NormLike { ell } => {
                check_len(n, ell.len())?;
                ell_for_proxy = Some(ell);
                bound_at = Box::new(move |i| indicator(i) + (-ell[i]).exp() * v[i]);
            }
        },
        LyapunovCert::Ct(c) => {
            match &c.drift {
                CtDrift::Geometric { gamma } => {
                    let gamma = *gamma;
                    if !(gamma > 0.0) {
                        return Err(Error::InvalidConfig(format!(
                            "γ = {gamma} must be positive"
                        )));
                    }
                    gamma_for_cost = Some(gamma);
                    bound_at = Box::new(move |i| indicator(i) - gamma * v[i]);
                }
                CtDrift::NormLike { ell } => {
                    check_len(n, ell.len())?;
                    ell_for_proxy = Some(ell);
                    bound_at = Box::new(move |i| indicator(i) - ell[i] * v[i]);
                }
            }
            if let Some(ex) = &c.explosion {
                check_explosion(model, ex, &mut violations)?;
            }
        }
    }

    for i in 0..n {
        let (a, d) = drift(model, v, i);
        let bound = bound_at(i);
        let excess = d - bound;
        if excess > DRIFT_TOL * bound.abs().max(1.0) {
            violations.push(Violation {
                state: i,
                action: Some(a),
                quantity: Quantity::Drift,
                margin: excess,
            });
        }
    }

    if let Some(gamma) = gamma_for_cost {
        for i in 0..n {
            for (a, action) in model.actions(i).iter().enumerate() {
                if action.cost >= gamma {
                    violations.push(Violation {
                        state: i,
                        action: Some(a),
                        quantity: Quantity::CostBound,
                        margin: action.cost - gamma,
                    });
                }
            }
        }
    }

    if let Some(ell) = ell_for_proxy {
        caveats.push(format!(
            "norm-like growth checked only as strict monotonicity of ℓ - max c from state {tail_index} to the truncation end"
        ));
        for (i, &e) in ell.iter().enumerate() {
            if e < 0.0 {
                violations.push(Violation {
                    state: i,
                    action: None,
                    quantity: Quantity::NormLike,
                    margin: -e,
                });
            }
        }
        let g = |i: usize| {
            ell[i]
                - model
                    .actions(i)
                    .iter()
                    .map(|a| a.cost)
                    .fold(f64::NEG_INFINITY, f64::max)
        };
        for i in tail_index..n.saturating_sub(1) {
            let (gi, gn) = (g(i), g(i + 1));
            if gn <= gi {
                violations.push(Violation {
                    state: i + 1,
                    action: None,
                    quantity: Quantity::NormLike,
                    margin: gi - gn,
                });
            }
        }
    }

    Ok(ValidationReport::from_violations(violations, caveats))
}

fn check_explosion(model: &Model, ex: &ExplosionCert, out: &mut Vec<Violation>) -> Result<()> {
    check_len(model.size(), ex.v_tilde.len())?;
    let vt = &ex.v_tilde;
    for i in 0..model.size() {
        for (a, action) in model.actions(i).iter().enumerate() {
            let s: f64 = action.transitions.iter().map(|&(j, q)| q * vt[j]).sum();
            let bound = ex.c0 * vt[i] + ex.c2;
            if s - bound > DRIFT_TOL * bound.abs().max(1.0) {
                out.push(Violation {
                    state: i,
                    action: Some(a),
                    quantity: Quantity::Explosion,
                    margin: s - bound,
                });
            }
            let rate = model.exit_rate(i, a);
            if rate > ex.c1 * vt[i] * (1.0 + DRIFT_TOL) {
                out.push(Violation {
                    state: i,
                    action: Some(a),
                    quantity: Quantity::Explosion,
                    margin: rate - ex.c1 * vt[i],
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, StateSpace};

    fn closed_dt() -> Model {
        let space = StateSpace::new(3, 0).unwrap();
        let row = |c| Action::new("a", c, vec![(0, 0.2), (1, 0.3), (2, 0.5)]);
        Model::dt(
            space,
            true,
            vec![vec![row(0.1)], vec![row(0.1)], vec![row(0.1)]],
        )
        .unwrap()
    }

    #[test]
    fn constant_v_fails_everywhere() {
        let m = closed_dt();
        let cert = LyapunovCert::Dt(LyapunovCertDt {
            v: vec![1.0; 3],
            drift: DtDrift::Geometric { beta: 0.5 },
            k_set: vec![],
            c_hat: 1.0,
            tail_index: 0,
        });
        let r = check_lyapunov(&m, &cert).unwrap();
        let drift_states: Vec<_> = r
            .violations
            .iter()
            .filter(|v| v.quantity == Quantity::Drift)
            .map(|v| v.state)
            .collect();
        assert_eq!(drift_states, vec![0, 1, 2]);
        for v in &r.violations {
            assert!((v.margin - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn doubling_c_hat_never_grows_violation_set() {
        let m = closed_dt();
        let base = LyapunovCertDt {
            v: vec![1.0, 2.0, 3.0],
            drift: DtDrift::Geometric { beta: 0.3 },
            k_set: vec![0, 1],
            c_hat: 0.4,
            tail_index: 0,
        };
        let mut doubled = base.clone();
        doubled.c_hat *= 2.0;
        let r1 = check_lyapunov(&m, &LyapunovCert::Dt(base)).unwrap();
        let r2 = check_lyapunov(&m, &LyapunovCert::Dt(doubled)).unwrap();
        for v in &r2.violations {
            assert!(r1
                .violations
                .iter()
                .any(|w| w.state == v.state && w.quantity == v.quantity));
        }
        assert!(r2.violations.len() <= r1.violations.len());
    }

    #[test]
    fn dimension_and_kind_mismatch() {
        let m = closed_dt();
        let short = LyapunovCert::Dt(LyapunovCertDt {
            v: vec![1.0; 2],
            drift: DtDrift::Geometric { beta: 0.5 },
            k_set: vec![],
            c_hat: 1.0,
            tail_index: 0,
        });
        assert!(matches!(
            check_lyapunov(&m, &short),
            Err(Error::DimensionMismatch {
                expected: 3,
                got: 2
            })
        ));
        let ct = LyapunovCert::Ct(LyapunovCertCt {
            v: vec![1.0; 3],
            drift: CtDrift::Geometric { gamma: 1.0 },
            k_set: vec![],
            c_hat: 1.0,
            tail_index: 0,
            explosion: None,
        });
        assert!(matches!(
            check_lyapunov(&m, &ct),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn cost_bound_in_geometric_mode() {
        let m = closed_dt().with_cost_shift(1.0);
        let cert = LyapunovCert::Dt(LyapunovCertDt {
            v: vec![1.0; 3],
            drift: DtDrift::Geometric { beta: 0.5 },
            k_set: vec![0, 1, 2],
            c_hat: 1.0,
            tail_index: 0,
        });
        let r = check_lyapunov(&m, &cert).unwrap();
        assert!(r
            .violations
            .iter()
            .all(|v| v.quantity == Quantity::CostBound));
        assert_eq!(r.violations.len(), 3);
    }
}
