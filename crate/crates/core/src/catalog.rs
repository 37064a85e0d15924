//! Builtin games.
//!
//! Every entry carries hand-written analytic losses, simultaneous gradient
//! and Jacobian. Entries that are quadratic also carry their
//! [`QuadraticGame`] form so the typed adjustment can be applied to them;
//! the two representations are cross-checked in the tests.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::game::{Game, PlayerPartition, QuadraticGame};

pub const BUILTIN_NAMES: [&str; 11] = [
    "cycle_xy",
    "stable_not_nash",
    "nash_not_stable",
    "ham_not_zerosum",
    "zerosum_not_ham",
    "consensus_trap",
    "weak_repellor",
    "weak_attractor_strong_rotation",
    "bimatrix_zerosum",
    "four_player",
    "typed_example",
];

/// Named scalar parameters for a catalog entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GameParams(pub BTreeMap<String, f64>);

impl GameParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    /// Parses `k=v,k=v`. An empty string yields no parameters.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut out = BTreeMap::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| GameError::param(item, "expected key=value"))?;
            let k = k.trim();
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| GameError::param(k, format!("`{}` is not a number", v.trim())))?;
            out.insert(k.to_string(), v);
        }
        Ok(GameParams(out))
    }

    fn check_known(&self, allowed: &[&str]) -> Result<()> {
        for key in self.0.keys() {
            if !allowed.contains(&key.as_str()) {
                let reason = if allowed.is_empty() {
                    "this game takes no parameters".to_string()
                } else {
                    format!("unknown parameter; expected one of {}", allowed.join(", "))
                };
                return Err(GameError::param(key, reason));
            }
        }
        Ok(())
    }

    fn finite(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) if v.is_finite() => Ok(Some(*v)),
            Some(v) => Err(GameError::param(key, format!("must be finite, got {v}"))),
        }
    }

    fn or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.finite(key)?.unwrap_or(default))
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.finite(key)?
            .ok_or_else(|| GameError::param(key, "required parameter is missing"))
    }
}

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, b, c, d])
}

fn two_scalars() -> PlayerPartition {
    PlayerPartition::scalars(2).expect("two players")
}

fn quad2(q1: DMatrix<f64>, q2: DMatrix<f64>, b1: DVector<f64>, b2: DVector<f64>) -> QuadraticGame {
    QuadraticGame::new(vec![q1, q2], vec![b1, b2], vec![0.0, 0.0], two_scalars())
        .expect("catalog quadratic data is well formed")
}

/// Looks up a builtin game by name.
pub fn builtin_game(name: &str, params: &GameParams) -> Result<Game> {
    match name {
        "cycle_xy" => {
            params.check_known(&[])?;
            Ok(cycle_xy())
        }
        "stable_not_nash" => {
            params.check_known(&[])?;
            Ok(stable_not_nash())
        }
        "nash_not_stable" => {
            params.check_known(&[])?;
            Ok(nash_not_stable())
        }
        "ham_not_zerosum" => {
            params.check_known(&["a", "b"])?;
            Ok(ham_not_zerosum(params.or("a", 1.0)?, params.or("b", 1.0)?))
        }
        "zerosum_not_ham" => {
            params.check_known(&[])?;
            Ok(zerosum_not_ham())
        }
        "consensus_trap" => {
            params.check_known(&["kappa"])?;
            Ok(consensus_trap(params.or("kappa", 10.0)?))
        }
        "weak_repellor" => {
            params.check_known(&["epsilon"])?;
            Ok(weak_repellor(params.or("epsilon", 0.1)?))
        }
        "weak_attractor_strong_rotation" => {
            params.check_known(&[])?;
            Ok(weak_attractor_strong_rotation())
        }
        "bimatrix_zerosum" => {
            params.check_known(&["d1"])?;
            let d1 = params.or("d1", 1.0)?;
            if d1 < 1.0 || d1.fract() != 0.0 || d1 > 1e6 {
                return Err(GameError::param("d1", format!("must be a positive integer, got {d1}")));
            }
            Ok(bimatrix_zerosum(d1 as usize))
        }
        "four_player" => {
            params.check_known(&["epsilon"])?;
            Ok(four_player(params.required("epsilon")?))
        }
        "typed_example" => {
            params.check_known(&[])?;
            Ok(typed_example())
        }
        other => Err(GameError::UnknownGame {
            name: other.to_string(),
            valid: BUILTIN_NAMES.to_vec(),
        }),
    }
}

/// ℓ₁ = xy, ℓ₂ = −xy.
pub fn cycle_xy() -> Game {
    let c = m2(0.0, 1.0, 1.0, 0.0);
    Game::new(
        "cycle_xy",
        two_scalars(),
        |w| v2(w[0] * w[1], -w[0] * w[1]),
        |w| v2(w[1], -w[0]),
    )
    .with_jacobian(|_| m2(0.0, 1.0, -1.0, 0.0))
    .with_quadratic(quad2(c.clone(), -c, DVector::zeros(2), DVector::zeros(2)))
}

/// ℓ₁ = x³ + xy, ℓ₂ = −xy. The origin is stable but not a local Nash
/// equilibrium.
pub fn stable_not_nash() -> Game {
    Game::new(
        "stable_not_nash",
        two_scalars(),
        |w| v2(w[0].powi(3) + w[0] * w[1], -w[0] * w[1]),
        |w| v2(3.0 * w[0] * w[0] + w[1], -w[0]),
    )
    .with_jacobian(|w| m2(6.0 * w[0], 1.0, -1.0, 0.0))
}

/// ℓ₁ = ℓ₂ = xy. The origin is a Nash equilibrium but not stable.
pub fn nash_not_stable() -> Game {
    let c = m2(0.0, 1.0, 1.0, 0.0);
    Game::new(
        "nash_not_stable",
        two_scalars(),
        |w| v2(w[0] * w[1], w[0] * w[1]),
        |w| v2(w[1], w[0]),
    )
    .with_jacobian(|_| m2(0.0, 1.0, 1.0, 0.0))
    .with_quadratic(quad2(c.clone(), c, DVector::zeros(2), DVector::zeros(2)))
}

/// ℓ₁ = x(y − b), ℓ₂ = −(x − a)y: Hamiltonian, not zero-sum.
pub fn ham_not_zerosum(a: f64, b: f64) -> Game {
    let c = m2(0.0, 1.0, 1.0, 0.0);
    Game::new(
        "ham_not_zerosum",
        two_scalars(),
        move |w| v2(w[0] * (w[1] - b), -(w[0] - a) * w[1]),
        move |w| v2(w[1] - b, a - w[0]),
    )
    .with_jacobian(|_| m2(0.0, 1.0, -1.0, 0.0))
    .with_quadratic(quad2(c.clone(), -c, v2(-b, 0.0), v2(0.0, a)))
}

/// ℓ₁ = x² + y², ℓ₂ = −(x² + y²): zero-sum with potential x² − y².
pub fn zerosum_not_ham() -> Game {
    let i2 = DMatrix::identity(2, 2);
    Game::new(
        "zerosum_not_ham",
        two_scalars(),
        |w| {
            let r = w[0] * w[0] + w[1] * w[1];
            v2(r, -r)
        },
        |w| v2(2.0 * w[0], -2.0 * w[1]),
    )
    .with_jacobian(|_| m2(2.0, 0.0, 0.0, -2.0))
    .with_quadratic(quad2(&i2 * 2.0, &i2 * -2.0, DVector::zeros(2), DVector::zeros(2)))
}

/// ℓ₁ = ℓ₂ = −κ/2 (x² + y²): the origin is a global maximum.
pub fn consensus_trap(kappa: f64) -> Game {
    let q = DMatrix::identity(2, 2) * -kappa;
    Game::new(
        "consensus_trap",
        two_scalars(),
        move |w| {
            let l = -0.5 * kappa * (w[0] * w[0] + w[1] * w[1]);
            v2(l, l)
        },
        move |w| v2(-kappa * w[0], -kappa * w[1]),
    )
    .with_jacobian(move |_| m2(-kappa, 0.0, 0.0, -kappa))
    .with_quadratic(quad2(q.clone(), q, DVector::zeros(2), DVector::zeros(2)))
}

/// ℓ₁ = −ε/2 x² − xy, ℓ₂ = −ε/2 y² + xy: a weak repellor under a strong
/// rotation.
pub fn weak_repellor(epsilon: f64) -> Game {
    let e = epsilon;
    Game::new(
        "weak_repellor",
        two_scalars(),
        move |w| {
            let (x, y) = (w[0], w[1]);
            v2(-0.5 * e * x * x - x * y, -0.5 * e * y * y + x * y)
        },
        move |w| v2(-e * w[0] - w[1], -e * w[1] + w[0]),
    )
    .with_jacobian(move |_| m2(-e, -1.0, 1.0, -e))
    .with_quadratic(quad2(
        m2(-e, -1.0, -1.0, 0.0),
        m2(0.0, 1.0, 1.0, -e),
        DVector::zeros(2),
        DVector::zeros(2),
    ))
}

/// ℓ₁ = ½x² + 10xy, ℓ₂ = ½y² − 10xy.
pub fn weak_attractor_strong_rotation() -> Game {
    Game::new(
        "weak_attractor_strong_rotation",
        two_scalars(),
        |w| {
            let (x, y) = (w[0], w[1]);
            v2(0.5 * x * x + 10.0 * x * y, 0.5 * y * y - 10.0 * x * y)
        },
        |w| v2(w[0] + 10.0 * w[1], w[1] - 10.0 * w[0]),
    )
    .with_jacobian(|_| m2(1.0, 10.0, -10.0, 1.0))
    .with_quadratic(quad2(
        m2(1.0, 10.0, 10.0, 0.0),
        m2(0.0, -10.0, -10.0, 1.0),
        DVector::zeros(2),
        DVector::zeros(2),
    ))
}

/// ℓ₁ = w₁ᵀw₂, ℓ₂ = −w₁ᵀw₂ with `w₁, w₂ ∈ ℝ^{d1}`.
pub fn bimatrix_zerosum(d1: usize) -> Game {
    let partition = PlayerPartition::new(vec![d1, d1]).expect("d1 >= 1");
    let eye = DMatrix::identity(d1, d1);
    let quadratic = QuadraticGame::bilinear(&eye, &(-&eye)).expect("square coupling");
    Game::new(
        "bimatrix_zerosum",
        partition,
        move |w| {
            let p = w.rows(0, d1).dot(&w.rows(d1, d1));
            v2(p, -p)
        },
        move |w| {
            let mut xi = DVector::zeros(2 * d1);
            xi.rows_mut(0, d1).copy_from(&w.rows(d1, d1));
            xi.rows_mut(d1, d1).copy_from(&(-w.rows(0, d1)));
            xi
        },
    )
    .with_jacobian(move |_| {
        let mut j = DMatrix::zeros(2 * d1, 2 * d1);
        for k in 0..d1 {
            j[(k, d1 + k)] = 1.0;
            j[(d1 + k, k)] = -1.0;
        }
        j
    })
    .with_quadratic(quadratic)
}

/// Antisymmetric part of the four-player game Jacobian.
pub fn four_player_antisymmetric() -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |r, c| match r.cmp(&c) {
        std::cmp::Ordering::Less => 1.0,
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => -1.0,
    })
}

/// Four players, one scalar each:
///
/// ```text
/// ℓ₁ =  ε/2 w² + wx + wy + wz
/// ℓ₂ = −wx + ε/2 x² + xy + xz
/// ℓ₃ = −wy − xy + ε/2 y² + yz
/// ℓ₄ = −wz − xz − yz + ε/2 z²
/// ```
pub fn four_player(epsilon: f64) -> Game {
    let e = epsilon;
    let partition = PlayerPartition::scalars(4).expect("four players");
    // Player i: +w_i w_j for j > i, −w_i w_j for j < i, plus ε/2 w_i².
    let qs: Vec<DMatrix<f64>> = (0..4)
        .map(|i| {
            let mut q = DMatrix::zeros(4, 4);
            q[(i, i)] = e;
            for j in 0..4 {
                if j != i {
                    let s = if j > i { 1.0 } else { -1.0 };
                    q[(i, j)] = s;
                    q[(j, i)] = s;
                }
            }
            q
        })
        .collect();
    let quadratic = QuadraticGame::new(qs, vec![DVector::zeros(4); 4], vec![0.0; 4], partition.clone())
        .expect("four-player quadratic data");
    Game::new(
        "four_player",
        partition,
        move |v| {
            let (w, x, y, z) = (v[0], v[1], v[2], v[3]);
            DVector::from_vec(vec![
                0.5 * e * w * w + w * x + w * y + w * z,
                -w * x + 0.5 * e * x * x + x * y + x * z,
                -w * y - x * y + 0.5 * e * y * y + y * z,
                -w * z - x * z - y * z + 0.5 * e * z * z,
            ])
        },
        move |v| {
            let (w, x, y, z) = (v[0], v[1], v[2], v[3]);
            DVector::from_vec(vec![
                e * w + x + y + z,
                -w + e * x + y + z,
                -w - x + e * y + z,
                -w - x - y + e * z,
            ])
        },
    )
    .with_jacobian(move |_| DMatrix::identity(4, 4) * e + four_player_antisymmetric())
    .with_quadratic(quadratic)
}

/// ℓ₁ = xy, ℓ₂ = 2xy: not a potential game, but a positively rescaled one.
pub fn typed_example() -> Game {
    let c = m2(0.0, 1.0, 1.0, 0.0);
    Game::new(
        "typed_example",
        two_scalars(),
        |w| v2(w[0] * w[1], 2.0 * w[0] * w[1]),
        |w| v2(w[1], 2.0 * w[0]),
    )
    .with_jacobian(|_| m2(0.0, 1.0, 2.0, 0.0))
    .with_quadratic(quad2(c.clone(), c * 2.0, DVector::zeros(2), DVector::zeros(2)))
}

/// One representative instance of every catalog entry, with the parameter
/// values used throughout the test suites.
pub fn representative_games() -> Vec<Game> {
    vec![
        cycle_xy(),
        stable_not_nash(),
        nash_not_stable(),
        ham_not_zerosum(1.0, 1.0),
        ham_not_zerosum(-0.5, 2.0),
        zerosum_not_ham(),
        consensus_trap(10.0),
        weak_repellor(0.1),
        weak_attractor_strong_rotation(),
        bimatrix_zerosum(1),
        bimatrix_zerosum(3),
        four_player(0.01),
        four_player(0.0),
        typed_example(),
    ]
}
