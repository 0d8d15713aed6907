//! Synthesis of sparse (ℓ1-optimal) feedback controllers for discrete-time
//! LTI systems.
//!
//! The library turns an open-loop ℓ1-optimal control program into a dynamic
//! linear compensator:
//!
//! 1. [`synthesis`] solves a constrained ℓ1 matrix program for trajectory
//!    matrices `(X, U)` covering every basis initial state at once,
//! 2. [`realization`] recovers the unique compensator gains `(K, H, G, F)`
//!    from `(X, U)` by a structured linear solve, yielding a nilpotent
//!    (deadbeat) closed loop,
//! 3. [`tracking`] extends the compensator with feedforward gains `(M, L)`
//!    so a step reference is tracked with zero steady-state error,
//! 4. [`simulate`] generates closed-loop trajectories, audits output
//!    constraints and cross-checks the open-loop/closed-loop equivalence.
//!
//! The ℓ1 programs are solved by a self-contained homogeneous self-dual
//! Mehrotra predictor-corrector interior-point method in [`l1lp`]; no
//! external solver is required.

pub mod config;
pub mod error;
pub mod io;
pub mod l1lp;
pub mod model;
pub mod realization;
pub mod simulate;
pub mod synthesis;
pub mod tracking;

pub use error::Error;
pub use model::{
    AugmentedSystem, Compensator, LtiSystem, OutputBounds, SolutionPair, SynthesisSpec,
    TrackingCompensator, Variant,
};

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
