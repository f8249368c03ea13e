//! Strategy synthesis for partially observable MDPs from human
//! demonstrations: behavioural cloning over feature classes, explicit-state
//! verification of the induced Markov chain, and counterexample-guided
//! refinement.

pub mod cloning;
pub mod error;
pub mod features;
pub mod fixtures;
pub mod format;
pub mod gridworld;
pub mod model;
pub mod refine;
pub mod training;
pub mod verify;

pub use error::{CheckError, FormatError, ModelError, RefineError, ScenarioError, TrainingError};
pub use model::{Distribution, Mc, Mdp, ObservationStrategy, Pomdp, Spec, SpecKind};
