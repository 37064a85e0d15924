//! Simultaneous gradient, game Jacobian and its symmetric/antisymmetric
//! split, the Hamiltonian `H = ½‖ξ‖²` and the symplectic adjustment `Aᵀξ`.
//!
//! Jacobians are dense. The finite-difference routines at the bottom of the
//! module serve as oracles in tests and as the fallback Jacobian for games
//! that do not supply an analytic one.

use nalgebra::{DMatrix, DVector};

use crate::error::{GameError, Result};
use crate::game::{Game, JointPoint};

/// Relative step for central differences of losses and `H`.
pub const CENTRAL_STEP: f64 = 1e-5;
/// Relative step for forward differences of `ξ` when assembling a Jacobian.
pub const FORWARD_STEP: f64 = 1e-6;

/// Everything downstream consumers need at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionBundle {
    pub w: JointPoint,
    /// Simultaneous gradient ξ.
    pub xi: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// S = ½(J + Jᵀ).
    pub symmetric: DMatrix<f64>,
    /// A = ½(J − Jᵀ).
    pub antisymmetric: DMatrix<f64>,
    /// H = ½‖ξ‖².
    pub hamiltonian: f64,
    /// ∇H = Jᵀξ.
    pub grad_hamiltonian: DVector<f64>,
    /// Aᵀξ.
    pub adjustment: DVector<f64>,
}

impl DecompositionBundle {
    /// Assembles a bundle from a point, its simultaneous gradient and its
    /// Jacobian. Shapes must agree with the point's partition.
    pub fn from_parts(w: JointPoint, xi: DVector<f64>, jacobian: DMatrix<f64>) -> Result<Self> {
        let d = w.len();
        if xi.len() != d {
            return Err(GameError::dim("bundle ξ", d, xi.len()));
        }
        if jacobian.nrows() != d || jacobian.ncols() != d {
            return Err(GameError::dim("bundle Jacobian", d * d, jacobian.len()));
        }
        let (symmetric, antisymmetric) = helmholtz(&jacobian)?;
        let hamiltonian = 0.5 * xi.norm_squared();
        let grad_hamiltonian = jacobian.tr_mul(&xi);
        let adjustment = antisymmetric.tr_mul(&xi);
        Ok(DecompositionBundle {
            w,
            xi,
            jacobian,
            symmetric,
            antisymmetric,
            hamiltonian,
            grad_hamiltonian,
            adjustment,
        })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi.norm()
    }

    /// ⟨ξ, ∇H⟩ (equals ξᵀSξ).
    pub fn xi_dot_grad_h(&self) -> f64 {
        self.xi.dot(&self.grad_hamiltonian)
    }

    /// ⟨Aᵀξ, ∇H⟩.
    pub fn adj_dot_grad_h(&self) -> f64 {
        self.adjustment.dot(&self.grad_hamiltonian)
    }
}

/// ξ(w) = (∇_{w₁}ℓ₁, …, ∇_{wₙ}ℓₙ).
pub fn simultaneous_gradient(game: &Game, w: &JointPoint) -> Result<DVector<f64>> {
    game.check_point(w)?;
    let xi = game.gradient_raw(w.values())?;
    if let Some(k) = xi.iter().position(|v| !v.is_finite()) {
        return Err(GameError::Evaluation {
            what: "gradient",
            player: w.partition().player_of(k),
        });
    }
    Ok(xi)
}

/// Game Jacobian; analytic when the game provides one, otherwise forward
/// differences of ξ.
pub fn jacobian(game: &Game, w: &JointPoint) -> Result<DMatrix<f64>> {
    game.check_point(w)?;
    let j = match game.jacobian_raw(w.values())? {
        Some(j) => j,
        None => fd_jacobian(game, w)?,
    };
    check_finite_matrix(&j)?;
    Ok(j)
}

fn check_finite_matrix(m: &DMatrix<f64>) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(GameError::JacobianEntry { row: r, col: c });
            }
        }
    }
    Ok(())
}

/// Splits a square matrix into its symmetric and antisymmetric parts.
///
/// Only the upper triangle is computed; the lower triangle is mirrored, so
/// `S == Sᵀ` and `A == −Aᵀ` hold bit for bit.
pub fn helmholtz(j: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = j.nrows();
    if j.ncols() != d {
        return Err(GameError::dim("helmholtz input columns", d, j.ncols()));
    }
    let mut s = DMatrix::zeros(d, d);
    let mut a = DMatrix::zeros(d, d);
    for r in 0..d {
        s[(r, r)] = j[(r, r)];
        for c in r + 1..d {
            let sym = 0.5 * (j[(r, c)] + j[(c, r)]);
            let anti = 0.5 * (j[(r, c)] - j[(c, r)]);
            s[(r, c)] = sym;
            s[(c, r)] = sym;
            a[(r, c)] = anti;
            a[(c, r)] = -anti;
        }
    }
    Ok((s, a))
}

pub fn bundle(game: &Game, w: &JointPoint) -> Result<DecompositionBundle> {
    let xi = simultaneous_gradient(game, w)?;
    let j = jacobian(game, w)?;
    DecompositionBundle::from_parts(w.clone(), xi, j)
}

/// Same as [`bundle`] but tolerates non-finite values; simulations use it
/// so a blow-up surfaces as a divergence verdict.
pub(crate) fn bundle_unchecked(game: &Game, w: &JointPoint) -> Result<DecompositionBundle> {
    let xi = game.gradient_raw(w.values())?;
    let j = match game.jacobian_raw(w.values())? {
        Some(j) => j,
        None => fd_jacobian_raw(game, w.values())?,
    };
    DecompositionBundle::from_parts(w.clone(), xi, j)
}

fn step_for(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Forward-difference Jacobian of ξ with step `1e-6·max(1, |w_β|)` per
/// column β.
pub fn fd_jacobian(game: &Game, w: &JointPoint) -> Result<DMatrix<f64>> {
    game.check_point(w)?;
    let j = fd_jacobian_raw(game, w.values())?;
    check_finite_matrix(&j)?;
    Ok(j)
}

fn fd_jacobian_raw(game: &Game, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    let d = w.len();
    let base = game.gradient_raw(w)?;
    let mut j = DMatrix::zeros(d, d);
    let mut probe = w.clone();
    for col in 0..d {
        let h = step_for(w[col], FORWARD_STEP);
        probe[col] = w[col] + h;
        // Use the representable step to cut rounding error.
        let h_eff = probe[col] - w[col];
        let shifted = game.gradient_raw(&probe)?;
        j.set_column(col, &((shifted - &base) / h_eff));
        probe[col] = w[col];
    }
    Ok(j)
}

/// Central differences of each player's own loss with respect to its own
/// block, step `1e-5·max(1, |w_k|)`. Test oracle for the analytic ξ.
pub fn fd_simultaneous_gradient(game: &Game, w: &JointPoint) -> Result<DVector<f64>> {
    game.check_point(w)?;
    let d = w.len();
    let mut out = DVector::zeros(d);
    let mut probe = w.values().clone();
    for k in 0..d {
        let player = w.partition().player_of(k);
        let x = w.values()[k];
        let h = step_for(x, CENTRAL_STEP);
        probe[k] = x + h;
        let up = game.losses_raw(&probe)?[player];
        probe[k] = x - h;
        let down = game.losses_raw(&probe)?[player];
        probe[k] = x;
        out[k] = (up - down) / (2.0 * h);
        if !out[k].is_finite() {
            return Err(GameError::Evaluation {
                what: "finite-difference gradient",
                player,
            });
        }
    }
    Ok(out)
}

/// Central differences of `H(w) = ½‖ξ(w)‖²`, step `h·max(1, |w_k|)` in
/// coordinate `k`.
pub fn fd_grad_hamiltonian(game: &Game, w: &JointPoint, h: f64) -> Result<DVector<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(GameError::param("h", format!("step must be positive, got {h}")));
    }
    game.check_point(w)?;
    let ham = |v: &DVector<f64>| -> Result<f64> { Ok(0.5 * game.gradient_raw(v)?.norm_squared()) };
    let d = w.len();
    let mut out = DVector::zeros(d);
    let mut probe = w.values().clone();
    for k in 0..d {
        let x = w.values()[k];
        let step = step_for(x, h);
        probe[k] = x + step;
        let up = ham(&probe)?;
        probe[k] = x - step;
        let down = ham(&probe)?;
        probe[k] = x;
        out[k] = (up - down) / (2.0 * step);
        if !out[k].is_finite() {
            return Err(GameError::Evaluation {
                what: "finite-difference ∇H",
                player: w.partition().player_of(k),
            });
        }
    }
    Ok(out)
}
