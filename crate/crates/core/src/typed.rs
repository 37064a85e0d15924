//! Type-consistent two-form and adjustment for two-player quadratic games.
//!
//! The cross-coupling blocks `A₁₂ = ∇²_{x,y}ℓ₁` and `C₂₁ = ∇²_{y,x}ℓ₂` are
//! factored as `A₁₂ = U_Aᵀ D_A V_A` and `C₁₂ = C₂₁ᵀ = U_Cᵀ D_C V_C` with
//! thin SVDs. Singular values are non-negative and signs live in the
//! orthogonal factors. The two-form coefficient is
//! `ω_τ = U_AᵀV_A − U_CᵀV_C`, each term summed only over singular triplets
//! with non-negligible singular value, so it is the difference of the polar
//! factors of the two couplings. A zero block contributes nothing.

use nalgebra::{DMatrix, DVector};

use crate::calculus::simultaneous_gradient;
use crate::error::{GameError, Result};
use crate::game::{Game, JointPoint};

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITERS: usize = 10_000;

/// Thin SVD `M = Uᵀ·diag(d)·V` with `U: k×m`, `V: k×n`, `k = min(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFactors {
    pub u: DMatrix<f64>,
    pub d: DVector<f64>,
    pub v: DMatrix<f64>,
    /// Number of singular values treated as nonzero.
    pub rank: usize,
}

impl BlockFactors {
    fn of(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        let k = rows.min(cols);
        let svd = m
            .clone()
            .try_svd(true, true, SVD_EPS, SVD_MAX_ITERS)
            .ok_or_else(|| GameError::Numeric("SVD of a cross block did not converge".into()))?;
        let sigma_max = svd.singular_values.max();
        if sigma_max == 0.0 {
            return Ok(BlockFactors {
                u: DMatrix::identity(k, rows),
                d: DVector::zeros(k),
                v: DMatrix::identity(k, cols),
                rank: 0,
            });
        }
        let threshold = sigma_max * rows.max(cols) as f64 * f64::EPSILON;
        let rank = svd.singular_values.iter().filter(|s| **s > threshold).count();
        Ok(BlockFactors {
            u: svd.u.expect("requested").transpose(),
            d: svd.singular_values,
            v: svd.v_t.expect("requested"),
            rank,
        })
    }

    /// `Uᵀ·diag(d)·V`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.u.tr_mul(&DMatrix::from_diagonal(&self.d)) * &self.v
    }

    /// `Uᵀ V` restricted to the nonzero singular triplets.
    pub fn polar(&self) -> DMatrix<f64> {
        let r = self.rank;
        self.u.rows(0, r).tr_mul(&self.v.rows(0, r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypedDecomposition {
    /// `∇²_{x,y}ℓ₁`, d₁×d₂.
    pub a12: DMatrix<f64>,
    /// `∇²_{y,x}ℓ₂`, d₂×d₁.
    pub c21: DMatrix<f64>,
    pub a: BlockFactors,
    /// Factors of `C₁₂ = C₂₁ᵀ`.
    pub c: BlockFactors,
    /// `U_AᵀV_A − U_CᵀV_C`, d₁×d₂.
    pub omega_tau: DMatrix<f64>,
}

impl TypedDecomposition {
    pub fn from_blocks(a12: DMatrix<f64>, c21: DMatrix<f64>) -> Result<Self> {
        if c21.shape() != (a12.ncols(), a12.nrows()) {
            return Err(GameError::dim(
                "C₂₁ shape",
                a12.ncols() * a12.nrows(),
                c21.nrows() * c21.ncols(),
            ));
        }
        if a12.iter().chain(c21.iter()).any(|v| !v.is_finite()) {
            return Err(GameError::param("cross block", "entries must be finite"));
        }
        let a = BlockFactors::of(&a12)?;
        let c = BlockFactors::of(&c21.transpose())?;
        let omega_tau = a.polar() - c.polar();
        Ok(TypedDecomposition {
            a12,
            c21,
            a,
            c,
            omega_tau,
        })
    }

    /// Antisymmetric `Ω` with upper-right block `½ω_τ` and lower-left block
    /// `−½ω_τᵀ`.
    pub fn omega_matrix(&self) -> DMatrix<f64> {
        let (d1, d2) = self.omega_tau.shape();
        let mut m = DMatrix::zeros(d1 + d2, d1 + d2);
        m.view_mut((0, d1), (d1, d2)).copy_from(&(&self.omega_tau * 0.5));
        m.view_mut((d1, 0), (d2, d1)).copy_from(&(self.omega_tau.transpose() * -0.5));
        m
    }

    /// `Ωᵀξ`.
    pub fn adjust(&self, xi: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.omega_matrix();
        if xi.len() != m.nrows() {
            return Err(GameError::dim("typed adjustment ξ", m.nrows(), xi.len()));
        }
        Ok(m.tr_mul(xi))
    }
}

fn two_player_quadratic(game: &Game) -> Result<&crate::game::QuadraticGame> {
    if game.n_players() != 2 {
        return Err(GameError::Usage(format!(
            "the typed adjustment needs exactly 2 players; `{}` has {}",
            game.name(),
            game.n_players()
        )));
    }
    game.quadratic().ok_or_else(|| {
        GameError::Usage(format!(
            "the typed adjustment needs a quadratic game; `{}` is not quadratic",
            game.name()
        ))
    })
}

pub fn typed_two_form(game: &Game) -> Result<TypedDecomposition> {
    let q = two_player_quadratic(game)?;
    TypedDecomposition::from_blocks(q.cross_block(0, 1), q.cross_block(1, 0))
}

pub fn typed_adjustment(game: &Game, w: &JointPoint) -> Result<DVector<f64>> {
    let t = typed_two_form(game)?;
    let xi = simultaneous_gradient(game, w)?;
    t.adjust(&xi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn typed_example_vanishes() {
        let g = typed_example();
        let t = typed_two_form(&g).unwrap();
        assert_eq!(t.omega_tau, scalar(0.0));
        let adj = typed_adjustment(&g, &g.point(&[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(adj.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn cycle_keeps_its_two_form() {
        let g = cycle_xy();
        let t = typed_two_form(&g).unwrap();
        assert_eq!(t.a12, scalar(1.0));
        assert_eq!(t.c21, scalar(-1.0));
        assert!((t.omega_tau[(0, 0)] - 2.0).abs() < 1e-15);
        let adj = typed_adjustment(&g, &g.point(&[1.0, 1.0]).unwrap()).unwrap();
        assert!((adj - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn identical_couplings_cancel() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.3, 4.0, -1.0]);
        let t = TypedDecomposition::from_blocks(a.clone(), a.transpose()).unwrap();
        assert!(t.omega_tau.norm() < 1e-15);
    }

    #[test]
    fn zero_block_uses_identity_factors() {
        let t = TypedDecomposition::from_blocks(DMatrix::zeros(2, 3), DMatrix::from_element(3, 2, 1.0)).unwrap();
        assert_eq!(t.a.rank, 0);
        assert_eq!(t.a.u, DMatrix::identity(2, 2));
        assert_eq!(t.a.v, DMatrix::identity(2, 3));
        assert_eq!(t.a.reconstruct(), DMatrix::zeros(2, 3));
        assert!((t.omega_tau + t.c.polar()).norm() < 1e-15);
    }

    #[test]
    fn zero_gradient_gives_zero_adjustment() {
        let g = cycle_xy();
        let adj = typed_adjustment(&g, &g.point(&[0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(adj.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_non_quadratic_and_many_players() {
        assert!(matches!(typed_two_form(&stable_not_nash()), Err(GameError::Usage(_))));
        assert!(matches!(typed_two_form(&four_player(0.01)), Err(GameError::Usage(_))));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(TypedDecomposition::from_blocks(DMatrix::zeros(2, 3), DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn omega_matrix_is_antisymmetric() {
        let t = typed_two_form(&bimatrix_zerosum(3)).unwrap();
        let m = t.omega_matrix();
        assert_eq!(m.transpose(), -m);
    }
}
