//! The differentiable-game abstraction.
//!
//! A game has `n` players; player `i` controls the block `w_i` of a joint
//! parameter vector `w` and wants to minimise its own loss `ℓ_i(w)`.
//! Evaluators are pure functions of `w`, so a [`Game`] is cheap to clone and
//! safe to share between threads.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GameError, Result};

/// Per-player parameter dimensions `(d_1, …, d_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlayerPartition {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl PlayerPartition {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(GameError::param("dims", "a game needs at least one player"));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(GameError::param(
                "dims",
                format!("player {i} has zero parameters"),
            ));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in &dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(PlayerPartition { dims, offsets })
    }

    /// One scalar parameter per player.
    pub fn scalars(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_players(&self) -> usize {
        self.dims.len()
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Coordinates owned by `player`.
    pub fn range(&self, player: usize) -> Range<usize> {
        self.offsets[player]..self.offsets[player + 1]
    }

    /// Player owning coordinate `index`.
    pub fn player_of(&self, index: usize) -> usize {
        debug_assert!(index < self.total());
        self.offsets.partition_point(|&o| o <= index) - 1
    }
}

impl fmt::Display for PlayerPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// A point `w ∈ ℝ^d` tagged with the partition it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPoint {
    partition: PlayerPartition,
    values: DVector<f64>,
}

impl JointPoint {
    pub fn new(partition: PlayerPartition, values: DVector<f64>) -> Result<Self> {
        if values.len() != partition.total() {
            return Err(GameError::dim(
                "joint point",
                partition.total(),
                values.len(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GameError::InvalidPoint(format!(
                "coordinate {i} is not finite"
            )));
        }
        Ok(JointPoint { partition, values })
    }

    pub fn from_slice(partition: PlayerPartition, values: &[f64]) -> Result<Self> {
        Self::new(partition, DVector::from_column_slice(values))
    }

    pub fn origin(partition: PlayerPartition) -> Self {
        let d = partition.total();
        JointPoint {
            partition,
            values: DVector::zeros(d),
        }
    }

    /// Skips the finiteness check; used inside simulations where a blow-up is
    /// a verdict rather than an error.
    pub(crate) fn unchecked(partition: PlayerPartition, values: DVector<f64>) -> Self {
        debug_assert_eq!(values.len(), partition.total());
        JointPoint { partition, values }
    }

    pub fn partition(&self) -> &PlayerPartition {
        &self.partition
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, player: usize) -> &[f64] {
        &self.values.as_slice()[self.partition.range(player)]
    }

    pub fn norm(&self) -> f64 {
        self.values.norm()
    }
}

pub type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
pub type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// An n-player differentiable game.
///
/// `losses` returns `(ℓ_1(w), …, ℓ_n(w))`; `gradient` returns the
/// concatenation of each player's gradient of its own loss with respect to
/// its own block. The optional `jacobian` is the analytic `d × d` matrix
/// whose row block `i` is `∇_w ∇_{w_i} ℓ_i`.
#[derive(Clone)]
pub struct Game {
    name: String,
    partition: PlayerPartition,
    losses: Arc<VectorFn>,
    gradient: Arc<VectorFn>,
    jacobian: Option<Arc<MatrixFn>>,
    quadratic: Option<Arc<QuadraticGame>>,
}

impl fmt::Debug for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Game")
            .field("name", &self.name)
            .field("partition", &self.partition)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("quadratic", &self.quadratic.is_some())
            .finish()
    }
}

impl Game {
    pub fn new<L, G>(name: impl Into<String>, partition: PlayerPartition, losses: L, gradient: G) -> Self
    where
        L: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Game {
            name: name.into(),
            partition,
            losses: Arc::new(losses),
            gradient: Arc::new(gradient),
            jacobian: None,
            quadratic: None,
        }
    }

    pub fn with_jacobian<F>(mut self, jacobian: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Attaches the equivalent quadratic form. The caller guarantees that the
    /// evaluators implement exactly this quadratic game.
    pub(crate) fn with_quadratic(mut self, quadratic: QuadraticGame) -> Self {
        self.quadratic = Some(Arc::new(quadratic));
        self
    }

    pub fn from_quadratic(name: impl Into<String>, quadratic: QuadraticGame) -> Self {
        let q = Arc::new(quadratic);
        let (ql, qg, qj) = (q.clone(), q.clone(), q.clone());
        Game {
            name: name.into(),
            partition: q.partition.clone(),
            losses: Arc::new(move |w| ql.losses(w)),
            gradient: Arc::new(move |w| qg.simultaneous_gradient(w)),
            jacobian: Some(Arc::new(move |_| qj.jacobian().clone())),
            quadratic: Some(q),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn partition(&self) -> &PlayerPartition {
        &self.partition
    }

    pub fn n_players(&self) -> usize {
        self.partition.n_players()
    }

    pub fn dim(&self) -> usize {
        self.partition.total()
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn quadratic(&self) -> Option<&QuadraticGame> {
        self.quadratic.as_deref()
    }

    pub fn point(&self, values: &[f64]) -> Result<JointPoint> {
        JointPoint::from_slice(self.partition.clone(), values)
    }

    pub(crate) fn check_point(&self, w: &JointPoint) -> Result<()> {
        if w.partition() != &self.partition {
            return Err(GameError::Dimension {
                context: format!(
                    "partition of point {} vs game `{}` {}",
                    w.partition(),
                    self.name,
                    self.partition
                ),
                expected: self.partition.total(),
                found: w.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn losses_raw(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let out = (self.losses)(w);
        if out.len() != self.n_players() {
            return Err(GameError::dim("loss evaluator output", self.n_players(), out.len()));
        }
        Ok(out)
    }

    pub(crate) fn gradient_raw(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        let out = (self.gradient)(w);
        if out.len() != self.dim() {
            return Err(GameError::dim("gradient evaluator output", self.dim(), out.len()));
        }
        Ok(out)
    }

    pub(crate) fn jacobian_raw(&self, w: &DVector<f64>) -> Result<Option<DMatrix<f64>>> {
        match &self.jacobian {
            None => Ok(None),
            Some(f) => {
                let m = f(w);
                let d = self.dim();
                if m.nrows() != d || m.ncols() != d {
                    return Err(GameError::dim(
                        "jacobian evaluator output",
                        d * d,
                        m.nrows() * m.ncols(),
                    ));
                }
                Ok(Some(m))
            }
        }
    }
}

/// `(ℓ_1(w), …, ℓ_n(w))`.
pub fn eval_losses(game: &Game, w: &JointPoint) -> Result<DVector<f64>> {
    game.check_point(w)?;
    let losses = game.losses_raw(w.values())?;
    if let Some(player) = losses.iter().position(|l| !l.is_finite()) {
        return Err(GameError::Evaluation {
            what: "loss",
            player,
        });
    }
    Ok(losses)
}

/// A game with losses `ℓ_i(w) = ½ wᵀ Q_i w + b_iᵀ w + c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGame {
    partition: PlayerPartition,
    q: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    c: Vec<f64>,
    jacobian: DMatrix<f64>,
}

impl QuadraticGame {
    /// Each `Q_i` is stored as its symmetric part (mirrored from the upper
    /// triangle), which leaves the loss unchanged.
    pub fn new(
        q: Vec<DMatrix<f64>>,
        b: Vec<DVector<f64>>,
        c: Vec<f64>,
        partition: PlayerPartition,
    ) -> Result<Self> {
        let n = partition.n_players();
        let d = partition.total();
        if q.len() != n {
            return Err(GameError::dim("number of Q matrices", n, q.len()));
        }
        if b.len() != n {
            return Err(GameError::dim("number of b vectors", n, b.len()));
        }
        if c.len() != n {
            return Err(GameError::dim("number of c scalars", n, c.len()));
        }
        let mut sym = Vec::with_capacity(n);
        for (i, m) in q.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(GameError::dim(format!("Q[{i}] size"), d * d, m.nrows() * m.ncols()));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(GameError::param(format!("Q[{i}]"), "entries must be finite"));
            }
            let mut s = DMatrix::zeros(d, d);
            for r in 0..d {
                s[(r, r)] = m[(r, r)];
                for col in r + 1..d {
                    let v = 0.5 * (m[(r, col)] + m[(col, r)]);
                    s[(r, col)] = v;
                    s[(col, r)] = v;
                }
            }
            sym.push(s);
        }
        for (i, v) in b.iter().enumerate() {
            if v.len() != d {
                return Err(GameError::dim(format!("b[{i}] length"), d, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(GameError::param(format!("b[{i}]"), "entries must be finite"));
            }
        }
        if let Some(i) = c.iter().position(|x| !x.is_finite()) {
            return Err(GameError::param(format!("c[{i}]"), "must be finite"));
        }

        let mut jacobian = DMatrix::zeros(d, d);
        for (i, qi) in sym.iter().enumerate() {
            let rows = partition.range(i);
            jacobian
                .rows_mut(rows.start, rows.len())
                .copy_from(&qi.rows(rows.start, rows.len()));
        }
        Ok(QuadraticGame {
            partition,
            q: sym,
            b,
            c,
            jacobian,
        })
    }

    /// Two players with bilinear losses `ℓ_1 = xᵀ P y`, `ℓ_2 = xᵀ R y`.
    pub fn bilinear(p: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<Self> {
        let (d1, d2) = p.shape();
        if r.shape() != (d1, d2) {
            return Err(GameError::dim("second coupling matrix", d1 * d2, r.nrows() * r.ncols()));
        }
        let partition = PlayerPartition::new(vec![d1, d2])?;
        let d = d1 + d2;
        let embed = |m: &DMatrix<f64>| {
            let mut q = DMatrix::zeros(d, d);
            q.view_mut((0, d1), (d1, d2)).copy_from(m);
            q.view_mut((d1, 0), (d2, d1)).copy_from(&m.transpose());
            q
        };
        Self::new(
            vec![embed(p), embed(r)],
            vec![DVector::zeros(d), DVector::zeros(d)],
            vec![0.0, 0.0],
            partition,
        )
    }

    pub fn partition(&self) -> &PlayerPartition {
        &self.partition
    }

    pub fn q(&self) -> &[DMatrix<f64>] {
        &self.q
    }

    pub fn b(&self) -> &[DVector<f64>] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Constant game Jacobian.
    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn losses(&self, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.q.len(),
            self.q
                .iter()
                .zip(&self.b)
                .zip(&self.c)
                .map(|((q, b), c)| 0.5 * w.dot(&(q * w)) + b.dot(w) + c),
        )
    }

    pub fn simultaneous_gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut xi = DVector::zeros(w.len());
        for (i, (q, b)) in self.q.iter().zip(&self.b).enumerate() {
            let r = self.partition.range(i);
            let g = q.rows(r.start, r.len()) * w + b.rows(r.start, r.len());
            xi.rows_mut(r.start, r.len()).copy_from(&g);
        }
        xi
    }

    /// Cross-coupling block `∇²_{w_i, w_j} ℓ_i`.
    pub fn cross_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let ri = self.partition.range(i);
        let rj = self.partition.range(j);
        self.q[i]
            .view((ri.start, rj.start), (ri.len(), rj.len()))
            .into_owned()
    }
}

/// Builds a [`Game`] from quadratic data.
pub fn quadratic_game(
    q: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    c: Vec<f64>,
    partition: PlayerPartition,
) -> Result<Game> {
    Ok(Game::from_quadratic("quadratic", QuadraticGame::new(q, b, c, partition)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_offsets_tile_the_range() {
        let p = PlayerPartition::new(vec![2, 1, 3]).unwrap();
        assert_eq!(p.total(), 6);
        assert_eq!(p.range(0), 0..2);
        assert_eq!(p.range(1), 2..3);
        assert_eq!(p.range(2), 3..6);
        let owners: Vec<_> = (0..6).map(|k| p.player_of(k)).collect();
        assert_eq!(owners, vec![0, 0, 1, 2, 2, 2]);
    }

    #[test]
    fn partition_rejects_empty_and_zero_dims() {
        assert!(PlayerPartition::new(vec![]).is_err());
        assert!(matches!(
            PlayerPartition::new(vec![1, 0]),
            Err(GameError::Parameter { .. })
        ));
    }

    #[test]
    fn joint_point_validates() {
        let p = PlayerPartition::scalars(2).unwrap();
        assert!(JointPoint::from_slice(p.clone(), &[1.0]).is_err());
        assert!(JointPoint::from_slice(p.clone(), &[1.0, f64::NAN]).is_err());
        assert!(JointPoint::from_slice(p.clone(), &[f64::INFINITY, 0.0]).is_err());
        let w = JointPoint::from_slice(p, &[1.0, 2.0]).unwrap();
        assert_eq!(w.block(1), &[2.0]);
    }

    #[test]
    fn quadratic_game_row_block_convention() {
        // ℓ₁ = ½x² + 10xy, ℓ₂ = ½y² − 10xy
        let q1 = DMatrix::from_row_slice(2, 2, &[1.0, 10.0, 10.0, 0.0]);
        let q2 = DMatrix::from_row_slice(2, 2, &[0.0, -10.0, -10.0, 1.0]);
        let g = quadratic_game(
            vec![q1, q2],
            vec![DVector::zeros(2), DVector::zeros(2)],
            vec![0.0, 0.0],
            PlayerPartition::scalars(2).unwrap(),
        )
        .unwrap();
        let w = g.point(&[1.0, 1.0]).unwrap();
        let xi = g.gradient_raw(w.values()).unwrap();
        assert_eq!(xi[0], 11.0);
        assert_eq!(xi[1], -9.0);
        assert_eq!(eval_losses(&g, &w).unwrap()[0], 10.5);
    }

    #[test]
    fn quadratic_game_zero_data_has_zero_field() {
        let p = PlayerPartition::new(vec![2, 1]).unwrap();
        let g = quadratic_game(
            vec![DMatrix::zeros(3, 3); 2],
            vec![DVector::zeros(3); 2],
            vec![0.0; 2],
            p,
        )
        .unwrap();
        let w = g.point(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(g.gradient_raw(w.values()).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn quadratic_game_symmetrises_and_checks_shapes() {
        let p = PlayerPartition::scalars(2).unwrap();
        let lopsided = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        let q = QuadraticGame::new(
            vec![lopsided.clone(), lopsided],
            vec![DVector::zeros(2); 2],
            vec![0.0; 2],
            p.clone(),
        )
        .unwrap();
        assert_eq!(q.q()[0], q.q()[0].transpose());
        assert_eq!(q.q()[0][(0, 1)], 1.0);

        let err = QuadraticGame::new(
            vec![DMatrix::zeros(3, 3); 2],
            vec![DVector::zeros(2); 2],
            vec![0.0; 2],
            p.clone(),
        );
        assert!(matches!(err, Err(GameError::Dimension { .. })));
        let err = QuadraticGame::new(vec![DMatrix::zeros(2, 2)], vec![], vec![], p);
        assert!(matches!(err, Err(GameError::Dimension { .. })));
    }

    #[test]
    fn eval_losses_rejects_foreign_partition() {
        let g = quadratic_game(
            vec![DMatrix::zeros(2, 2); 2],
            vec![DVector::zeros(2); 2],
            vec![0.0; 2],
            PlayerPartition::scalars(2).unwrap(),
        )
        .unwrap();
        let w = JointPoint::from_slice(PlayerPartition::new(vec![2]).unwrap(), &[0.0, 0.0]).unwrap();
        assert!(matches!(eval_losses(&g, &w), Err(GameError::Dimension { .. })));
    }

    #[test]
    fn eval_losses_reports_nonfinite_player() {
        let p = PlayerPartition::scalars(2).unwrap();
        let g = Game::new(
            "bad",
            p,
            |w| DVector::from_vec(vec![w[0], (w[1] - 1.0).ln()]),
            |w| w.clone(),
        );
        let w = g.point(&[0.0, 0.0]).unwrap();
        match eval_losses(&g, &w) {
            Err(GameError::Evaluation { player, .. }) => assert_eq!(player, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
