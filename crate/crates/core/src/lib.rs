//! Gradient dynamics of n-player differentiable games.
//!
//! A [`Game`] bundles per-player losses with the simultaneous gradient `ξ`.
//! From there the crate computes the game Jacobian and its split into
//! symmetric and antisymmetric parts, runs gradient descent, symplectic
//! gradient adjustment (SGA), consensus optimization and optimistic mirror
//! descent, classifies fixed points, and drives learning-rate sweeps.
//!
//! ```
//! use diffgame::{bundle, cycle_xy};
//!
//! let game = cycle_xy();
//! let b = bundle(&game, &game.point(&[1.0, 1.0]).unwrap()).unwrap();
//! assert_eq!(b.xi.as_slice(), &[1.0, -1.0]);
//! assert_eq!(b.adjustment.as_slice(), &[1.0, 1.0]);
//! ```

pub mod analysis;
pub mod calculus;
pub mod catalog;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod harness;
pub mod typed;

pub use analysis::{
    additive_condition_number, classify, classify_game, classify_game_default, desiderata_report,
    find_fixed_point, sample_points, DesiderataReport, FixedPointReport, GameClass, GameClassReport,
};
pub use calculus::{
    bundle, fd_grad_hamiltonian, fd_jacobian, fd_simultaneous_gradient, helmholtz, jacobian,
    simultaneous_gradient, DecompositionBundle,
};
pub use catalog::*;
pub use dynamics::{
    alignment_sign, simulate, step, step_omd, update_direction, AlgorithmKind, AlgorithmSpec, StepState,
    StoppingRule, Trajectory, TrajectoryState, Verdict,
};
pub use error::{GameError, Result};
pub use game::{eval_losses, quadratic_game, Game, JointPoint, PlayerPartition, QuadraticGame};
pub use typed::{typed_adjustment, typed_two_form, TypedDecomposition};
