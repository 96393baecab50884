//! Controlled Markov chains on a finite truncation `0..N` of a countable
//! state space, in discrete time (transition probabilities) or continuous
//! time (transition rates).
//!
//! Mass that a discrete-time row sends outside the truncation, and the part
//! of a continuous-time exit rate not matched by in-truncation jumps, is
//! treated as killed. Every eigen-solver in the crate reads the eigenfunction
//! as zero outside the truncation, so leaked mass contributes nothing.

mod json;
mod lyapunov;
mod reachability;
mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use json::{ModelFile, ModelSource, ParametricSpec};
pub use lyapunov::{
    check_lyapunov, CtDrift, DtDrift, ExplosionCert, LyapunovCert, LyapunovCertCt, LyapunovCertDt,
};
pub use reachability::{check_reachability, Reachability};
pub use validate::{validate_model, Quantity, ValidationReport, Violation};

/// Absolute tolerance for equality constraints on row sums.
pub const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    #[serde(rename = "dt")]
    Discrete,
    #[serde(rename = "ct")]
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    size: usize,
    reference_state: usize,
}

impl StateSpace {
    pub fn new(size: usize, reference_state: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::MalformedModel("state space must be nonempty".into()));
        }
        if reference_state >= size {
            return Err(Error::MalformedModel(format!(
                "reference state {reference_state} outside 0..{size}"
            )));
        }
        Ok(Self {
            size,
            reference_state,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn reference_state(&self) -> usize {
        self.reference_state
    }
}

/// One feasible action at a state: its running cost and its sparse row of
/// transition probabilities (discrete time) or rates (continuous time, with
/// the diagonal entry included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub label: String,
    pub cost: f64,
    pub transitions: Vec<(usize, f64)>,
}

impl Action {
    pub fn new(label: impl Into<String>, cost: f64, transitions: Vec<(usize, f64)>) -> Self {
        Self {
            label: label.into(),
            cost,
            transitions,
        }
    }

    /// Sum of the row entries.
    pub fn row_sum(&self) -> f64 {
        self.transitions.iter().map(|&(_, w)| w).sum()
    }

    /// Weight on target `j`, zero if absent.
    pub fn weight(&self, j: usize) -> f64 {
        match self.transitions.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) => self.transitions[pos].1,
            Err(_) => 0.0,
        }
    }
}

/// A controlled chain. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: TimeKind,
    space: StateSpace,
    closed: bool,
    actions: Vec<Vec<Action>>,
}

impl Model {
    /// Builds a model, checking structural well-formedness: one nonempty
    /// action list per state, targets inside the truncation, finite numbers.
    /// Duplicate targets within a row are merged and rows are sorted by target.
    /// Continuous-time rows always carry an explicit diagonal entry.
    pub fn new(
        kind: TimeKind,
        space: StateSpace,
        closed: bool,
        mut actions: Vec<Vec<Action>>,
    ) -> Result<Self> {
        let n = space.size();
        if actions.len() != n {
            return Err(Error::MalformedModel(format!(
                "{} action lists for {n} states",
                actions.len()
            )));
        }
        for (i, list) in actions.iter_mut().enumerate() {
            if list.is_empty() {
                return Err(Error::MalformedModel(format!("state {i} has no actions")));
            }
            for (a, action) in list.iter_mut().enumerate() {
                if !action.cost.is_finite() {
                    return Err(Error::MalformedModel(format!(
                        "cost at ({i}, {a}) is not finite"
                    )));
                }
                for &(j, w) in &action.transitions {
                    if j >= n {
                        return Err(Error::MalformedModel(format!(
                            "transition ({i}, {a}) -> {j} outside 0..{n}"
                        )));
                    }
                    if !w.is_finite() {
                        return Err(Error::MalformedModel(format!(
                            "transition ({i}, {a}) -> {j} has non-finite weight"
                        )));
                    }
                }
                action.transitions = merge_row(std::mem::take(&mut action.transitions));
                if kind == TimeKind::Continuous && action.weight(i) == 0.0 {
                    let pos = action.transitions.partition_point(|&(k, _)| k < i);
                    if action.transitions.get(pos).map(|&(k, _)| k) != Some(i) {
                        action.transitions.insert(pos, (i, 0.0));
                    }
                }
            }
        }
        Ok(Self {
            kind,
            space,
            closed,
            actions,
        })
    }

    pub fn dt(space: StateSpace, closed: bool, actions: Vec<Vec<Action>>) -> Result<Self> {
        Self::new(TimeKind::Discrete, space, closed, actions)
    }

    pub fn ct(space: StateSpace, closed: bool, actions: Vec<Vec<Action>>) -> Result<Self> {
        Self::new(TimeKind::Continuous, space, closed, actions)
    }

    pub fn kind(&self) -> TimeKind {
        self.kind
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn size(&self) -> usize {
        self.space.size()
    }

    pub fn reference_state(&self) -> usize {
        self.space.reference_state()
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn actions(&self, i: usize) -> &[Action] {
        &self.actions[i]
    }

    pub fn all_actions(&self) -> &[Vec<Action>] {
        &self.actions
    }

    pub fn num_actions(&self, i: usize) -> usize {
        self.actions[i].len()
    }

    pub fn action(&self, i: usize, a: usize) -> &Action {
        &self.actions[i][a]
    }

    pub fn cost(&self, i: usize, a: usize) -> f64 {
        self.actions[i][a].cost
    }

    /// Total jump rate `-q(i|i,a)` of a continuous-time row.
    pub fn exit_rate(&self, i: usize, a: usize) -> f64 {
        -self.actions[i][a].weight(i)
    }

    /// Maximal exit rate over actions, `q(i)`.
    pub fn max_exit_rate(&self, i: usize) -> f64 {
        (0..self.num_actions(i))
            .map(|a| self.exit_rate(i, a))
            .fold(0.0, f64::max)
    }

    /// Value of action `a` at `i` in the eigen-operator applied to `psi`:
    /// `e^{c(i,a)} Σ_j psi(j) P(j|i,a)` in discrete time and
    /// `Σ_j psi(j) q(j|i,a) + c(i,a) psi(i)` in continuous time.
    pub fn action_value(&self, i: usize, a: usize, psi: &[f64]) -> f64 {
        let action = &self.actions[i][a];
        let dot: f64 = action.transitions.iter().map(|&(j, w)| w * psi[j]).sum();
        match self.kind {
            TimeKind::Discrete => action.cost.exp() * dot,
            TimeKind::Continuous => dot + action.cost * psi[i],
        }
    }

    /// Minimum of [`Model::action_value`] over actions, with the lowest
    /// minimizing index.
    pub fn min_action_value(&self, i: usize, psi: &[f64]) -> (usize, f64) {
        let mut best = (0, self.action_value(i, 0, psi));
        for a in 1..self.num_actions(i) {
            let v = self.action_value(i, a, psi);
            if v < best.1 {
                best = (a, v);
            }
        }
        best
    }

    /// Largest absolute cost over all feasible pairs.
    pub fn cost_sup(&self) -> f64 {
        self.actions
            .iter()
            .flatten()
            .map(|a| a.cost.abs())
            .fold(0.0, f64::max)
    }

    /// Copy of the model with every cost replaced by `f(i, a, cost)`.
    pub fn map_costs(&self, f: impl Fn(usize, usize, f64) -> f64) -> Model {
        let mut out = self.clone();
        for (i, list) in out.actions.iter_mut().enumerate() {
            for (a, action) in list.iter_mut().enumerate() {
                action.cost = f(i, a, action.cost);
            }
        }
        out
    }

    /// Copy with `shift` added to every cost.
    pub fn with_cost_shift(&self, shift: f64) -> Model {
        self.map_costs(|_, _, c| c + shift)
    }

    /// Number of deterministic stationary policies, saturating.
    pub fn policy_count(&self) -> u128 {
        self.actions
            .iter()
            .fold(1u128, |acc, list| acc.saturating_mul(list.len() as u128))
    }
}

fn merge_row(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|&(j, _)| j);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (j, w) in row {
        match out.last_mut() {
            Some(last) if last.0 == j => last.1 += w,
            _ => out.push((j, w)),
        }
    }
    out
}

/// Stationary Markov control: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    pub action_index: Vec<usize>,
}

impl Policy {
    pub fn new(action_index: Vec<usize>) -> Self {
        Self { action_index }
    }

    /// Action 0 everywhere.
    pub fn uniform(model: &Model) -> Self {
        Self::new(vec![0; model.size()])
    }

    pub fn validate(&self, model: &Model) -> Result<()> {
        if self.action_index.len() != model.size() {
            return Err(Error::DimensionMismatch {
                expected: model.size(),
                got: self.action_index.len(),
            });
        }
        for (i, &a) in self.action_index.iter().enumerate() {
            if a >= model.num_actions(i) {
                return Err(Error::InvalidPolicy {
                    state: i,
                    action: a,
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, i: usize) -> usize {
        self.action_index[i]
    }

    /// Compact encoding as a string of action indices, `"0.2.1"`.
    pub fn encode(&self) -> String {
        self.action_index
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_duplicates_and_inserts_ct_diagonal() {
        let space = StateSpace::new(2, 0).unwrap();
        let m = Model::ct(
            space,
            true,
            vec![
                vec![Action::new("a", 0.0, vec![(1, 0.5), (1, 0.5)])],
                vec![Action::new("a", 0.0, vec![(0, 1.0), (1, -1.0)])],
            ],
        )
        .unwrap();
        assert_eq!(m.action(0, 0).transitions, vec![(0, 0.0), (1, 1.0)]);
        assert_eq!(m.exit_rate(1, 0), 1.0);
    }

    #[test]
    fn rejects_out_of_range_targets_and_empty_lists() {
        let space = StateSpace::new(2, 0).unwrap();
        let bad = Model::dt(
            space,
            true,
            vec![vec![Action::new("a", 0.0, vec![(2, 1.0)])], vec![]],
        );
        assert!(matches!(bad, Err(Error::MalformedModel(_))));
        let empty = Model::dt(
            space,
            true,
            vec![vec![Action::new("a", 0.0, vec![(1, 1.0)])], vec![]],
        );
        assert!(matches!(empty, Err(Error::MalformedModel(_))));
        assert!(StateSpace::new(3, 3).is_err());
    }

    #[test]
    fn policy_validation() {
        let space = StateSpace::new(1, 0).unwrap();
        let m = Model::dt(
            space,
            true,
            vec![vec![
                Action::new("a", 0.0, vec![(0, 1.0)]),
                Action::new("b", 1.0, vec![(0, 1.0)]),
            ]],
        )
        .unwrap();
        assert!(Policy::new(vec![1]).validate(&m).is_ok());
        assert!(matches!(
            Policy::new(vec![2]).validate(&m),
            Err(Error::InvalidPolicy {
                state: 0,
                action: 2
            })
        ));
        assert_eq!(m.policy_count(), 2);
    }
}
