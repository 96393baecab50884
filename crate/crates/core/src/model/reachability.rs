use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::validate::{Quantity, ValidationReport, Violation};
use super::{Model, TimeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum Reachability {
    /// Every state is a one-step successor of the reference state under every action.
    FullSupportFromReference,
    /// Every state is reachable from the reference state along edges present
    /// under all actions. Sufficient for the path condition under every
    /// deterministic policy.
    PathCondition,
    /// `inf_a P(z|i,a) > 0` (or `q(z|i,a) > 0`) for every state `i`.
    PiaSmallSet { z: usize },
}

fn positive_for(model: &Model, i: usize, a: usize, j: usize) -> bool {
    model.action(i, a).weight(j) > 0.0
}

pub fn check_reachability(model: &Model, variant: Reachability) -> ValidationReport {
    let n = model.size();
    let i0 = model.reference_state();
    let mut violations = Vec::new();
    let mut caveats = Vec::new();
    match variant {
        Reachability::FullSupportFromReference => {
            for a in 0..model.num_actions(i0) {
                for j in (0..n).filter(|&j| j != i0) {
                    if !positive_for(model, i0, a, j) {
                        violations.push(Violation {
                            state: j,
                            action: Some(a),
                            quantity: Quantity::Unreachable,
                            margin: 0.0,
                        });
                    }
                }
            }
        }
        Reachability::PathCondition => {
            caveats.push(
                "edges kept only when present under every action; a pass is sufficient, a failure is inconclusive"
                    .to_string(),
            );
            let mut seen = vec![false; n];
            seen[i0] = true;
            let mut queue = VecDeque::from([i0]);
            while let Some(i) = queue.pop_front() {
                for &(j, w) in &model.action(i, 0).transitions {
                    if j == i || w <= 0.0 || seen[j] {
                        continue;
                    }
                    if (1..model.num_actions(i)).all(|a| positive_for(model, i, a, j)) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            for (j, _) in seen.iter().enumerate().filter(|(_, s)| !**s) {
                violations.push(Violation {
                    state: j,
                    action: None,
                    quantity: Quantity::Unreachable,
                    margin: 0.0,
                });
            }
        }
        Reachability::PiaSmallSet { z } => {
            if z >= n {
                violations.push(Violation {
                    state: z,
                    action: None,
                    quantity: Quantity::Unreachable,
                    margin: 0.0,
                });
            } else {
                for i in 0..n {
                    if model.kind() == TimeKind::Continuous && i == z {
                        continue;
                    }
                    for a in 0..model.num_actions(i) {
                        if !positive_for(model, i, a, z) {
                            violations.push(Violation {
                                state: i,
                                action: Some(a),
                                quantity: Quantity::Unreachable,
                                margin: 0.0,
                            });
                        }
                    }
                }
            }
        }
    }
    ValidationReport::from_violations(violations, caveats)
}
