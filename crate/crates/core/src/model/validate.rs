use serde::{Deserialize, Serialize};

use super::{Model, TimeKind, ROW_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Discrete-time row sum exceeds one, or differs from one on a closed model.
    RowSum,
    NegativeProbability,
    /// Continuous-time row sum differs from zero on a closed model, or is positive.
    NotConservative,
    NegativeRate,
    PositiveDiagonal,
    NegativeCost,
    /// Foster–Lyapunov drift bound violated.
    Drift,
    /// Running cost not below the geometric drift rate.
    CostBound,
    /// Norm-like proxy (monotone growth beyond the tail index) violated.
    NormLike,
    LyapunovBelowOne,
    /// Explosion certificate bound violated.
    Explosion,
    /// Required transition absent.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub state: usize,
    pub action: Option<usize>,
    pub quantity: Quantity,
    /// Amount by which the constraint is violated (positive).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Limitations of a finite-truncation check that the caller should know about.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub caveats: Vec<String>,
}

impl ValidationReport {
    pub(crate) fn from_violations(violations: Vec<Violation>, caveats: Vec<String>) -> Self {
        Self {
            passed: violations.is_empty(),
            violations,
            caveats,
        }
    }
}

/// Checks stochasticity (discrete time) or conservativeness and sign
/// constraints (continuous time), plus cost nonnegativity. Pure.
pub fn validate_model(model: &Model) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |state, action, quantity, margin| {
        violations.push(Violation {
            state,
            action: Some(action),
            quantity,
            margin,
        })
    };
    for i in 0..model.size() {
        for (a, action) in model.actions(i).iter().enumerate() {
            if action.cost < 0.0 {
                push(i, a, Quantity::NegativeCost, -action.cost);
            }
            let sum = action.row_sum();
            match model.kind() {
                TimeKind::Discrete => {
                    for &(_, p) in &action.transitions {
                        if p < 0.0 {
                            push(i, a, Quantity::NegativeProbability, -p);
                        }
                    }
                    if sum > 1.0 + ROW_TOL {
                        push(i, a, Quantity::RowSum, sum - 1.0);
                    } else if model.closed() && (sum - 1.0).abs() > ROW_TOL {
                        push(i, a, Quantity::RowSum, (1.0 - sum).abs());
                    }
                }
                TimeKind::Continuous => {
                    for &(j, q) in &action.transitions {
                        if j == i {
                            if q > 0.0 {
                                push(i, a, Quantity::PositiveDiagonal, q);
                            }
                        } else if q < 0.0 {
                            push(i, a, Quantity::NegativeRate, -q);
                        }
                    }
                    if sum > ROW_TOL || (model.closed() && sum.abs() > ROW_TOL) {
                        push(i, a, Quantity::NotConservative, sum.abs());
                    }
                }
            }
        }
    }
    ValidationReport::from_violations(violations, Vec::new())
}
