//! Invariant suite over the builtin catalog, run by the `check` subcommand.

use serde::Serialize;

use crate::analysis::{classify, classify_game_default, sample_points, GameClass};
use crate::calculus::{bundle, fd_grad_hamiltonian, fd_jacobian, fd_simultaneous_gradient, CENTRAL_STEP};
use crate::catalog::{
    four_player, nash_not_stable, representative_games, stable_not_nash, typed_example, weak_repellor,
};
use crate::error::Result;
use crate::game::Game;
use crate::typed::typed_adjustment;

pub const CHECK_POINTS: usize = 20;
pub const CHECK_SEED: u64 = 1;
pub const DECOMPOSITION_TOL: f64 = 1e-12;
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
pub const FD_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Worst relative errors of the decomposition identities on one game.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DecompositionErrors {
    pub split: f64,
    pub symmetry_exact: bool,
    pub orthogonality: f64,
    pub grad_h_fd: f64,
    pub xi_fd: f64,
    pub jacobian_fd: f64,
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}

pub fn decomposition_errors(game: &Game, points: usize, seed: u64) -> Result<DecompositionErrors> {
    let mut e = DecompositionErrors {
        symmetry_exact: true,
        ..Default::default()
    };
    for w in sample_points(game, points, seed) {
        let b = bundle(game, &w)?;
        let j = &b.jacobian;
        e.split = e.split.max(rel((&b.symmetric + &b.antisymmetric - j).norm(), j.norm()));
        e.symmetry_exact &= b.symmetric == b.symmetric.transpose()
            && b.antisymmetric == -b.antisymmetric.transpose();
        let quad = b.xi.dot(&b.adjustment).abs();
        e.orthogonality = e
            .orthogonality
            .max(rel(quad, b.xi.norm_squared() * b.antisymmetric.norm()));
        let gh = fd_grad_hamiltonian(game, &w, CENTRAL_STEP)?;
        e.grad_h_fd = e
            .grad_h_fd
            .max(rel((gh - &b.grad_hamiltonian).norm(), b.grad_hamiltonian.norm()));
        let xi = fd_simultaneous_gradient(game, &w)?;
        e.xi_fd = e.xi_fd.max(rel((xi - &b.xi).norm(), b.xi.norm()));
        let jf = fd_jacobian(game, &w)?;
        e.jacobian_fd = e.jacobian_fd.max(rel((jf - j).norm(), j.norm()));
    }
    Ok(e)
}

/// Worst scaled `|⟨ξ, ∇H⟩|` over seeded points.
pub fn conservation_error(game: &Game, points: usize, seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for w in sample_points(game, points, seed) {
        let b = bundle(game, &w)?;
        let scale = b.xi.norm() * b.grad_hamiltonian.norm();
        worst = worst.max(rel(b.xi_dot_grad_h().abs(), scale));
    }
    Ok(worst)
}

pub fn run_checks() -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    for g in representative_games() {
        let e = decomposition_errors(&g, CHECK_POINTS, CHECK_SEED)?;
        let name = format!("decomposition[{}]", g.name());
        let ok = e.split <= DECOMPOSITION_TOL
            && e.symmetry_exact
            && e.orthogonality <= ORTHOGONALITY_TOL
            && e.grad_h_fd <= FD_TOL
            && e.xi_fd <= FD_TOL
            && e.jacobian_fd <= FD_TOL;
        out.push(CheckOutcome::new(name, ok, format!("{e:?}")));

        if classify_game_default(&g)?.class == GameClass::Hamiltonian {
            let c = conservation_error(&g, 100, CHECK_SEED)?;
            out.push(CheckOutcome::new(
                format!("conservation[{}]", g.name()),
                c <= ORTHOGONALITY_TOL,
                format!("max scaled |<xi, grad H>| = {c:e}"),
            ));
        }
    }

    let origin = |g: &Game| g.point(&vec![0.0; g.dim()]);
    let r = classify(&stable_not_nash(), &origin(&stable_not_nash())?, None)?;
    out.push(CheckOutcome::new("classify[stable_not_nash]", r.is_stable, "expect stable"));
    let r = classify(&nash_not_stable(), &origin(&nash_not_stable())?, None)?;
    out.push(CheckOutcome::new("classify[nash_not_stable]", !r.is_stable, "expect not stable"));
    let g = weak_repellor(0.1);
    let r = classify(&g, &origin(&g)?, None)?;
    out.push(CheckOutcome::new(
        "classify[weak_repellor]",
        r.is_unstable && r.is_strict_saddle,
        "expect unstable and strict saddle",
    ));
    let g = four_player(0.01);
    let r = classify(&g, &origin(&g)?, None)?;
    out.push(CheckOutcome::new("classify[four_player]", r.is_stable, "expect stable"));

    let g = typed_example();
    let mut worst = 0.0f64;
    for w in sample_points(&g, 10, CHECK_SEED) {
        worst = worst.max(typed_adjustment(&g, &w)?.amax());
    }
    out.push(CheckOutcome::new(
        "typed[typed_example]",
        worst <= 1e-12,
        format!("max |typed adjustment| = {worst:e}"),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_suite_passes() {
        for c in run_checks().unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
