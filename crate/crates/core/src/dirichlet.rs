//! Dirichlet (killed-process) eigenpairs and the multiplicative Poisson
//! fixed point on a finite domain `D`, for both time kinds.
//!
//! The eigenfunction is read as zero outside `D`. In discrete time the pair
//! solves
//!
//! ```text
//! min_a [ e^{c(i,a)} Σ_{j∈D} ψ(j) P(j|i,a) ] = e^ρ ψ(i),   i ∈ D,
//! ```
//!
//! and in continuous time
//!
//! ```text
//! min_a [ Σ_{j∈D} ψ(j) q(j|i,a) + c(i,a) ψ(i) ] = ρ ψ(i),   i ∈ D.
//! ```
//!
//! Both are solved by min-type power iteration on a nonnegative,
//! order-preserving, 1-homogeneous map, stopping on the Collatz–Wielandt gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, TimeKind};
use crate::operator::{self, LocalOp, SUPPORT_EPS};
use crate::par::Exec;

/// Finite domain `D` inside the truncation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirichletDomain {
    states: Vec<usize>,
    contains_reference: bool,
}

impl DirichletDomain {
    pub fn new(model: &Model, mut states: Vec<usize>) -> Result<Self> {
        states.sort_unstable();
        states.dedup();
        if states.is_empty() {
            return Err(Error::InvalidConfig(
                "Dirichlet domain must be nonempty".into(),
            ));
        }
        if let Some(&last) = states.last() {
            if last >= model.size() {
                return Err(Error::DimensionMismatch {
                    expected: model.size(),
                    got: last + 1,
                });
            }
        }
        let contains_reference = states.binary_search(&model.reference_state()).is_ok();
        Ok(Self {
            states,
            contains_reference,
        })
    }

    /// `{0, 1, ..., n-1}`.
    pub fn prefix(model: &Model, n: usize) -> Result<Self> {
        Self::new(model, (0..n).collect())
    }

    /// The whole truncation.
    pub fn full(model: &Model) -> Self {
        Self::prefix(model, model.size()).expect("models are nonempty")
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn contains_reference(&self) -> bool {
        self.contains_reference
    }

    pub fn contains(&self, i: usize) -> bool {
        self.states.binary_search(&i).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `ψ(i₀) = 1`.
    ReferenceOne,
    /// `max ψ = 1`; used when the reference state is outside `D` or carries no mass.
    MaxNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub kind: TimeKind,
    /// `log` of the Perron root in discrete time, the eigenvalue itself in continuous time.
    pub rho: f64,
    /// Eigenfunction over the whole truncation, zero off the domain.
    pub psi: Vec<f64>,
    pub normalization: Normalization,
    pub iterations: usize,
    pub cw_gap: f64,
    pub domain: DirichletDomain,
}

impl EigenPair {
    /// States of the domain where `ψ` is above the support threshold.
    pub fn support(&self) -> Vec<usize> {
        let top = self.psi.iter().fold(0.0_f64, |m, &x| m.max(x));
        self.domain
            .states()
            .iter()
            .copied()
            .filter(|&i| self.psi[i] > SUPPORT_EPS * top)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Tolerance on the Collatz–Wielandt gap, in `ρ` units.
    pub tol: f64,
    pub max_iter: usize,
    /// Continuous-time step factor: `h = scale / (1 + max(q(i) + c))`.
    pub ct_step_scale: f64,
    /// Starting iterate over the truncation (only entries in `D` are read).
    /// Defaults to one on `D`.
    pub initial: Option<Vec<f64>>,
    pub exec: Exec,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
            ct_step_scale: 0.95,
            initial: None,
            exec: Exec::serial(),
        }
    }
}

impl EigenOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Self {
        self.initial = Some(initial);
        self
    }
}

pub(crate) fn local_initial(
    model: &Model,
    domain: &DirichletDomain,
    initial: Option<&[f64]>,
) -> Result<Vec<f64>> {
    match initial {
        None => Ok(vec![1.0; domain.len()]),
        Some(v) => {
            if v.len() != model.size() {
                return Err(Error::DimensionMismatch {
                    expected: model.size(),
                    got: v.len(),
                });
            }
            let local: Vec<f64> = domain.states().iter().map(|&i| v[i].max(0.0)).collect();
            if local.iter().all(|&x| x <= 0.0) {
                return Err(Error::InvalidConfig(
                    "initial iterate vanishes on the domain".into(),
                ));
            }
            Ok(local)
        }
    }
}

/// Lifts a local eigenvector to the truncation and normalizes it at the
/// reference state when that state carries mass.
pub(crate) fn assemble(
    model: &Model,
    domain: &DirichletDomain,
    local: &[f64],
    rho: f64,
    iterations: usize,
    cw_gap: f64,
) -> EigenPair {
    let mut psi = vec![0.0; model.size()];
    for (&i, &v) in domain.states().iter().zip(local) {
        psi[i] = v;
    }
    let top = psi.iter().fold(0.0_f64, |m, &x| m.max(x));
    let i0 = model.reference_state();
    let normalization = if domain.contains_reference()
        && psi[i0] >= f64::MIN_POSITIVE
        && (top / psi[i0]).is_finite()
    {
        let s = psi[i0];
        psi.iter_mut().for_each(|x| *x /= s);
        Normalization::ReferenceOne
    } else {
        psi.iter_mut().for_each(|x| *x /= top);
        Normalization::MaxNorm
    };
    EigenPair {
        kind: model.kind(),
        rho,
        psi,
        normalization,
        iterations,
        cw_gap,
        domain: domain.clone(),
    }
}

/// Principal Dirichlet eigenpair for either time kind.
pub fn dirichlet_eigenpair(
    model: &Model,
    domain: &DirichletDomain,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    let op = LocalOp::new(model, domain.states(), opts.ct_step_scale);
    let init = local_initial(model, domain, opts.initial.as_deref())?;
    let out = operator::solve_min_eigen(&op, init, opts.tol, opts.max_iter, &opts.exec)?;
    Ok(assemble(
        model,
        domain,
        &out.psi,
        out.rho(),
        out.iterations,
        out.gap(),
    ))
}

pub fn dt_dirichlet_eigenpair(
    model: &Model,
    domain: &DirichletDomain,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    expect_kind(model, TimeKind::Discrete)?;
    dirichlet_eigenpair(model, domain, opts)
}

pub fn ct_dirichlet_eigenpair(
    model: &Model,
    domain: &DirichletDomain,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    expect_kind(model, TimeKind::Continuous)?;
    dirichlet_eigenpair(model, domain, opts)
}

pub(crate) fn expect_kind(model: &Model, kind: TimeKind) -> Result<()> {
    if model.kind() != kind {
        return Err(Error::KindMismatch(format!(
            "operation needs a {kind:?} model, got {:?}",
            model.kind()
        )));
    }
    Ok(())
}

/// The eigen-operator `min_a [action value]` evaluated at every state of the
/// truncation, with `psi` read as given (zero entries act as killed states).
pub fn min_operator(model: &Model, psi: &[f64]) -> Vec<f64> {
    (0..model.size())
        .map(|i| model.min_action_value(i, psi).1)
        .collect()
}

/// Unique fixed point of
/// `φ(i) = min_a [ e^{c(i,a)+shift} Σ_{j∈D} φ(j) P(j|i,a) + f(i) ]` on `D`,
/// `φ = 0` off `D`. The shifted cost must be strictly negative on `D`, which
/// makes the map a sup-norm contraction.
pub fn dt_dirichlet_poisson(
    model: &Model,
    domain: &DirichletDomain,
    f: &[f64],
    shift: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    expect_kind(model, TimeKind::Discrete)?;
    if f.len() != model.size() {
        return Err(Error::DimensionMismatch {
            expected: model.size(),
            got: f.len(),
        });
    }
    for &i in domain.states() {
        for a in 0..model.num_actions(i) {
            let value = model.cost(i, a) + shift;
            if !(value < 0.0) {
                return Err(Error::ShiftInsufficient {
                    state: i,
                    action: a,
                    value,
                });
            }
        }
    }
    let shifted = model.with_cost_shift(shift);
    let op = LocalOp::new(&shifted, domain.states(), 1.0);
    let f_local: Vec<f64> = domain.states().iter().map(|&i| f[i]).collect();
    let mut phi = vec![0.0; domain.len()];
    let mut next = vec![0.0; domain.len()];
    for _ in 0..max_iter {
        for (i, slot) in next.iter_mut().enumerate() {
            *slot = op.min_value(i, &phi).1 + f_local[i];
        }
        let change = phi
            .iter()
            .zip(&next)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        std::mem::swap(&mut phi, &mut next);
        if change <= tol {
            let mut out = vec![0.0; model.size()];
            for (&i, &v) in domain.states().iter().zip(&phi) {
                out[i] = v;
            }
            return Ok(out);
        }
    }
    Err(Error::NoConvergence {
        what: "Dirichlet Poisson iteration",
        iterations: max_iter,
        gap: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, StateSpace};

    fn single_state(p: f64, costs: &[f64]) -> Model {
        let space = StateSpace::new(1, 0).unwrap();
        let acts = costs
            .iter()
            .enumerate()
            .map(|(a, &c)| Action::new(format!("a{a}"), c, vec![(0, p)]))
            .collect();
        Model::dt(space, false, vec![acts]).unwrap()
    }

    fn swap(c1: f64, c2: f64) -> Model {
        let space = StateSpace::new(2, 0).unwrap();
        Model::dt(
            space,
            true,
            vec![
                vec![Action::new("a", c1, vec![(1, 1.0)])],
                vec![Action::new("a", c2, vec![(0, 1.0)])],
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_state_closed_form() {
        let p = 0.7;
        let m = single_state(p, &[0.3, 0.5]);
        let pair = dt_dirichlet_eigenpair(&m, &DirichletDomain::full(&m), &EigenOptions::default())
            .unwrap();
        assert!((pair.rho - (0.3 + p.ln())).abs() < 1e-12);
        assert_eq!(pair.psi, vec![1.0]);
        assert_eq!(pair.normalization, Normalization::ReferenceOne);
    }

    #[test]
    fn swap_chain_geometric_mean() {
        let m = swap(0.3, 1.1);
        let pair = dt_dirichlet_eigenpair(&m, &DirichletDomain::full(&m), &EigenOptions::default())
            .unwrap();
        assert!((pair.rho - 0.7).abs() < 1e-10);
        assert!((pair.psi[1] - (0.4_f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn ct_single_state() {
        let space = StateSpace::new(1, 0).unwrap();
        let m = Model::ct(
            space,
            false,
            vec![vec![Action::new("a", 0.4, vec![(0, -1.5)])]],
        )
        .unwrap();
        let pair = ct_dirichlet_eigenpair(&m, &DirichletDomain::full(&m), &EigenOptions::default())
            .unwrap();
        assert!((pair.rho - (0.4 - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn ct_two_state_sqrt_two() {
        let space = StateSpace::new(2, 0).unwrap();
        let m = Model::ct(
            space,
            true,
            vec![
                vec![Action::new("a", 0.0, vec![(0, -1.0), (1, 1.0)])],
                vec![Action::new("a", 2.0, vec![(0, 1.0), (1, -1.0)])],
            ],
        )
        .unwrap();
        let pair = ct_dirichlet_eigenpair(&m, &DirichletDomain::full(&m), &EigenOptions::default())
            .unwrap();
        // dominant eigenvalue of [[-1,1],[1,1]]
        assert!((pair.rho - 2.0_f64.sqrt()).abs() < 1e-9, "{}", pair.rho);
    }

    #[test]
    fn kind_mismatch() {
        let m = swap(0.1, 0.2);
        assert!(matches!(
            ct_dirichlet_eigenpair(&m, &DirichletDomain::full(&m), &EigenOptions::default()),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn poisson_geometric_series() {
        let p = 0.6;
        let delta = 0.25;
        let m = single_state(p, &[0.0]);
        let phi = dt_dirichlet_poisson(
            &m,
            &DirichletDomain::full(&m),
            &[1.0],
            -delta,
            1e-14,
            100_000,
        )
        .unwrap();
        let expected = 1.0 / (1.0 - p * (-delta).exp());
        assert!((phi[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn poisson_zero_source_and_shift_check() {
        let m = swap(0.2, 0.4);
        let d = DirichletDomain::full(&m);
        let phi = dt_dirichlet_poisson(&m, &d, &[0.0, 0.0], -1.0, 1e-14, 1000).unwrap();
        assert_eq!(phi, vec![0.0, 0.0]);
        assert!(matches!(
            dt_dirichlet_poisson(&m, &d, &[1.0, 1.0], -0.3, 1e-14, 1000),
            Err(Error::ShiftInsufficient { state: 1, .. })
        ));
    }

    #[test]
    fn degenerate_when_all_mass_leaks() {
        let m = single_state(0.0, &[0.1]);
        let r = dt_dirichlet_eigenpair(&m, &DirichletDomain::full(&m), &EigenOptions::default());
        assert!(matches!(r, Err(Error::DegenerateEigenvector)));
    }

    #[test]
    fn reference_outside_domain_uses_max_norm() {
        let space = StateSpace::new(3, 2).unwrap();
        let row = || Action::new("a", 0.1, vec![(0, 0.5), (1, 0.25), (2, 0.25)]);
        let m = Model::dt(space, true, vec![vec![row()], vec![row()], vec![row()]]).unwrap();
        let d = DirichletDomain::prefix(&m, 2).unwrap();
        assert!(!d.contains_reference());
        let pair = dt_dirichlet_eigenpair(&m, &d, &EigenOptions::default()).unwrap();
        assert_eq!(pair.normalization, Normalization::MaxNorm);
        assert_eq!(pair.psi[2], 0.0);
        assert!((pair.rho - (0.1 + 0.75_f64.ln())).abs() < 1e-10);
    }
}
