//! JSON model files, either explicit sparse tables or a reference to a
//! registered parametric builder.

use serde::{Deserialize, Serialize};

use super::{Action, LyapunovCert, Model, StateSpace, TimeKind};
use crate::error::{Error, Result};

/// Explicit model: `kernel` rows are `[i, a, j, value]`, `cost` rows `[i, a, value]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: TimeKind,
    pub states: usize,
    pub reference_state: usize,
    pub closed: bool,
    pub actions: Vec<Vec<String>>,
    pub kernel: Vec<(usize, usize, usize, f64)>,
    #[serde(default)]
    pub cost: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricSpec {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
    pub truncation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Parametric { parametric: ParametricSpec },
    Explicit(ModelFile),
}

impl ModelSource {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds the model, plus the builder's Lyapunov certificate for parametric sources.
    pub fn resolve(&self) -> Result<(Model, Option<LyapunovCert>)> {
        match self {
            ModelSource::Explicit(file) => Ok((file.to_model()?, None)),
            ModelSource::Parametric { parametric } => crate::presets::build_parametric(parametric),
        }
    }
}

impl ModelFile {
    pub fn to_model(&self) -> Result<Model> {
        let space = StateSpace::new(self.states, self.reference_state)?;
        if self.actions.len() != self.states {
            return Err(Error::MalformedModel(format!(
                "{} action lists for {} states",
                self.actions.len(),
                self.states
            )));
        }
        let mut actions: Vec<Vec<Action>> = self
            .actions
            .iter()
            .map(|labels| {
                labels
                    .iter()
                    .map(|l| Action::new(l.clone(), 0.0, Vec::new()))
                    .collect()
            })
            .collect();
        for &(i, a, j, w) in &self.kernel {
            slot(&mut actions, i, a)?.transitions.push((j, w));
        }
        for &(i, a, c) in &self.cost {
            slot(&mut actions, i, a)?.cost = c;
        }
        Model::new(self.kind, space, self.closed, actions)
    }

    pub fn from_model(model: &Model) -> Self {
        let mut kernel = Vec::new();
        let mut cost = Vec::new();
        for i in 0..model.size() {
            for (a, action) in model.actions(i).iter().enumerate() {
                cost.push((i, a, action.cost));
                for &(j, w) in &action.transitions {
                    if model.kind() == TimeKind::Continuous && j == i && w == 0.0 {
                        continue;
                    }
                    kernel.push((i, a, j, w));
                }
            }
        }
        Self {
            kind: model.kind(),
            states: model.size(),
            reference_state: model.reference_state(),
            closed: model.closed(),
            actions: (0..model.size())
                .map(|i| model.actions(i).iter().map(|a| a.label.clone()).collect())
                .collect(),
            kernel,
            cost,
        }
    }
}

fn slot(actions: &mut [Vec<Action>], i: usize, a: usize) -> Result<&mut Action> {
    actions
        .get_mut(i)
        .and_then(|l| l.get_mut(a))
        .ok_or_else(|| Error::MalformedModel(format!("pair ({i}, {a}) is not feasible")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_explicit_file() {
        let text = r#"{"kind":"dt","states":2,"reference_state":0,"closed":true,
            "actions":[["stay","move"],["back"]],
            "kernel":[[0,0,0,1.0],[0,1,1,1.0],[1,0,0,1.0]],
            "cost":[[0,0,0.5],[0,1,0.0],[1,0,1.0]]}"#;
        let src = ModelSource::from_json(text).unwrap();
        let (m, cert) = src.resolve().unwrap();
        assert!(cert.is_none());
        assert_eq!(m.num_actions(0), 2);
        assert_eq!(m.cost(0, 0), 0.5);
        assert_eq!(m.action(0, 1).transitions, vec![(1, 1.0)]);
        let back = ModelFile::from_model(&m);
        assert_eq!(back.to_model().unwrap(), m);
    }

    #[test]
    fn infeasible_pair_is_malformed() {
        let text = r#"{"kind":"dt","states":1,"reference_state":0,"closed":true,
            "actions":[["a"]], "kernel":[[0,1,0,1.0]]}"#;
        let src = ModelSource::from_json(text).unwrap();
        assert!(matches!(src.resolve(), Err(Error::MalformedModel(_))));
    }

    #[test]
    fn parses_parametric_reference() {
        let text =
            r#"{"parametric":{"name":"queueing_dt","params":{"theta":0.5},"truncation":40}}"#;
        let src = ModelSource::from_json(text).unwrap();
        let (m, cert) = src.resolve().unwrap();
        assert_eq!(m.size(), 40);
        assert!(cert.is_some());
    }
}
