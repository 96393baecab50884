//! Principal eigenpairs of risk-sensitive controlled Markov chains on
//! countable state spaces, in discrete and continuous time.
//!
//! The optimal ergodic cost `λ*` and eigenfunction `ψ*` are approximated by
//! Dirichlet eigenpairs on growing finite domains ([`ladder`]), or by policy
//! iteration ([`pia`]). Small instances can be checked against exhaustive
//! policy enumeration ([`oracle`]) and Monte Carlo ([`montecarlo`]).

pub mod dirichlet;
pub mod error;
pub mod ladder;
pub mod model;
pub mod montecarlo;
mod operator;
pub mod oracle;
pub mod par;
pub mod pia;
pub mod presets;
pub mod verify;

pub use dirichlet::{DirichletDomain, EigenOptions, EigenPair, Normalization};
pub use error::{Error, Result};
pub use ladder::{solve_ladder, solve_near_monotone, LadderConfig, SolveMode, SolveReport};
pub use model::{Action, Model, ModelSource, Policy, StateSpace, TimeKind};
pub use montecarlo::{SimConfig, SimEstimate};
pub use par::Exec;
pub use pia::{run_pia, PiaConfig, PiaTrace};
