//! Fixed-point search and classification, game classification, the
//! additive condition number and the desiderata report.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calculus::{bundle, helmholtz, jacobian, simultaneous_gradient};
use crate::error::{GameError, Result};
use crate::game::{Game, JointPoint};

/// Relative factor applied to the spectral scale for semidefiniteness tests.
pub const EIG_REL_TOL: f64 = 1e-8;
/// `J` counts as invertible when `σ_min > SVD_REL_TOL · σ_max`.
pub const SVD_REL_TOL: f64 = 1e-8;
/// Smallest step the fixed-point line search tries before giving up.
pub const MIN_LINE_STEP: f64 = 1e-12;
pub const DEFAULT_CLASS_TOL: f64 = 1e-9;
pub const DEFAULT_SAMPLE_COUNT: usize = 20;
pub const DEFAULT_SAMPLE_SEED: u64 = 0;

const EIG_EPS: f64 = 1e-14;
const EIG_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub w_star: Vec<f64>,
    /// ‖ξ(w*)‖.
    pub residual: f64,
    pub is_stable: bool,
    pub is_unstable: bool,
    pub is_strict_saddle: bool,
    /// Eigenvalues of S(w*), ascending.
    pub s_eigs: Vec<f64>,
    /// Eigenvalues of J(w*) as `[re, im]`, sorted by real then imaginary part.
    pub j_eigs: Vec<[f64; 2]>,
    pub kappa: f64,
    pub j_invertible: bool,
    pub tol_eig: f64,
    /// Whether the search that produced `w_star` met its residual target.
    /// Always true for a direct classification.
    pub converged: bool,
    pub iterations: usize,
}

/// `σ_max(S) − σ_min(S)`.
pub fn additive_condition_number(s: &DMatrix<f64>) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let eigs = s.clone().symmetric_eigenvalues();
    (eigs.max() - eigs.min()).max(0.0)
}

fn symmetric_spectrum(s: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(s.clone(), EIG_EPS, EIG_MAX_ITERS)
        .ok_or_else(|| GameError::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn complex_spectrum(j: &DMatrix<f64>) -> Result<Vec<[f64; 2]>> {
    let schur = Schur::try_new(j.clone(), EIG_EPS, EIG_MAX_ITERS)
        .ok_or_else(|| GameError::Numeric("Schur decomposition did not converge".into()))?;
    let mut v: Vec<[f64; 2]> = schur.complex_eigenvalues().iter().map(|z| [z.re, z.im]).collect();
    v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(v)
}

fn singular_extremes(j: &DMatrix<f64>) -> Result<(f64, f64)> {
    let svd = j
        .clone()
        .try_svd(false, false, EIG_EPS, EIG_MAX_ITERS)
        .ok_or_else(|| GameError::Numeric("SVD did not converge".into()))?;
    Ok((svd.singular_values.min(), svd.singular_values.max()))
}

/// Classifies a point from its simultaneous gradient and Jacobian.
///
/// With `tol_eig = None` the tolerance is `1e-8·max(1, scale)`, where the
/// scale is the largest eigenvalue magnitude of `S` or singular value of `J`.
pub fn classify_jacobian(
    w: &DVector<f64>,
    xi: &DVector<f64>,
    j: &DMatrix<f64>,
    tol_eig: Option<f64>,
) -> Result<FixedPointReport> {
    let (s, _) = helmholtz(j)?;
    let s_eigs = symmetric_spectrum(&s)?;
    let j_eigs = complex_spectrum(j)?;
    let (sigma_min, sigma_max) = singular_extremes(j)?;

    let s_scale = s_eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = match tol_eig {
        Some(t) if t >= 0.0 && t.is_finite() => t,
        Some(t) => return Err(GameError::param("tol_eig", format!("must be finite and non-negative, got {t}"))),
        None => EIG_REL_TOL * s_scale.max(sigma_max).max(1.0),
    };
    let s_min = s_eigs.first().copied().unwrap_or(0.0);
    let s_max = s_eigs.last().copied().unwrap_or(0.0);
    let j_invertible = sigma_max > 0.0 && sigma_min > SVD_REL_TOL * sigma_max;

    Ok(FixedPointReport {
        w_star: w.iter().copied().collect(),
        residual: xi.norm(),
        is_stable: s_min >= -tol && j_invertible,
        is_unstable: s_max < -tol,
        is_strict_saddle: j_eigs.iter().any(|z| z[0] < -tol),
        kappa: (s_max - s_min).max(0.0),
        s_eigs,
        j_eigs,
        j_invertible,
        tol_eig: tol,
        converged: true,
        iterations: 0,
    })
}

/// Spectral classification of `w_star`. The residual is reported but not
/// required to be small.
pub fn classify(game: &Game, w_star: &JointPoint, tol_eig: Option<f64>) -> Result<FixedPointReport> {
    let xi = simultaneous_gradient(game, w_star)?;
    let j = jacobian(game, w_star)?;
    classify_jacobian(w_star.values(), &xi, &j, tol_eig)
}

/// Gradient descent on `H = ½‖ξ‖²` with a halving line search from `η = 1`.
///
/// Stops once `‖ξ‖ < tol` or after `max_iters` accepted steps; the endpoint
/// is always classified. Descent on `H` finds fixed points of any kind, not
/// only stable ones.
pub fn find_fixed_point(game: &Game, w0: &JointPoint, max_iters: usize, tol: f64) -> Result<FixedPointReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(GameError::param("tol", format!("must be positive and finite, got {tol}")));
    }
    let partition = w0.partition().clone();
    let mut w = w0.clone();
    let mut b = bundle(game, &w)?;
    let mut iterations = 0;

    while b.xi_norm() >= tol && iterations < max_iters {
        let g = &b.grad_hamiltonian;
        let mut eta = 1.0;
        let next = loop {
            let cand = w.values() - g * eta;
            if cand.iter().all(|v| v.is_finite()) {
                let p = JointPoint::new(partition.clone(), cand)?;
                if let Ok(xi) = simultaneous_gradient(game, &p) {
                    if 0.5 * xi.norm_squared() < b.hamiltonian {
                        break p;
                    }
                }
            }
            eta *= 0.5;
            if eta < MIN_LINE_STEP {
                return Err(GameError::Stagnation {
                    iteration: iterations,
                    min_step: MIN_LINE_STEP,
                });
            }
        };
        w = next;
        b = bundle(game, &w)?;
        iterations += 1;
    }

    let mut report = classify_jacobian(w.values(), &b.xi, &b.jacobian, None)?;
    report.converged = b.xi_norm() < tol;
    report.iterations = iterations;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameClass {
    Potential,
    Hamiltonian,
    General,
}

impl GameClass {
    pub fn as_str(self) -> &'static str {
        match self {
            GameClass::Potential => "potential",
            GameClass::Hamiltonian => "hamiltonian",
            GameClass::General => "general",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameClassReport {
    pub class: GameClass,
    /// Largest ‖S‖_F over the samples.
    pub s_norm: f64,
    /// Largest ‖A‖_F over the samples.
    pub a_norm: f64,
    pub sample_points: usize,
}

/// Classifies a game by Jacobian symmetry at the given points.
///
/// A game is potential when `‖A‖_F ≤ tol·max(1, ‖J‖_F)` at every point and
/// Hamiltonian when the same holds for `S`. A zero Jacobian counts as
/// potential.
pub fn classify_game(game: &Game, points: &[JointPoint], tol: f64) -> Result<GameClassReport> {
    if points.is_empty() {
        return Err(GameError::Usage("classify_game needs at least one sample point".into()));
    }
    let mut potential = true;
    let mut hamiltonian = true;
    let mut s_norm = 0.0f64;
    let mut a_norm = 0.0f64;
    for p in points {
        let j = jacobian(game, p)?;
        let (s, a) = helmholtz(&j)?;
        let scale = tol * j.norm().max(1.0);
        let (sn, an) = (s.norm(), a.norm());
        potential &= an <= scale;
        hamiltonian &= sn <= scale;
        s_norm = s_norm.max(sn);
        a_norm = a_norm.max(an);
    }
    let class = if potential {
        GameClass::Potential
    } else if hamiltonian {
        GameClass::Hamiltonian
    } else {
        GameClass::General
    };
    Ok(GameClassReport {
        class,
        s_norm,
        a_norm,
        sample_points: points.len(),
    })
}

/// Seeded standard-normal points in the game's parameter space.
pub fn sample_points(game: &Game, count: usize, seed: u64) -> Vec<JointPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = game.dim();
    (0..count)
        .map(|_| {
            let v = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            JointPoint::new(game.partition().clone(), v).expect("normal samples are finite")
        })
        .collect()
}

/// [`classify_game`] on the default 20 seeded samples.
pub fn classify_game_default(game: &Game) -> Result<GameClassReport> {
    classify_game(
        game,
        &sample_points(game, DEFAULT_SAMPLE_COUNT, DEFAULT_SAMPLE_SEED),
        DEFAULT_CLASS_TOL,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesiderataReport {
    pub lambda: f64,
    pub class: GameClass,
    /// `|⟨ξ_λ, ξ⟩ − ‖ξ‖²|`.
    pub d1_residual: f64,
    /// `‖ξ_λ − ξ‖`, for potential games only.
    pub d2_residual: Option<f64>,
    /// `|⟨ξ_λ, ∇H⟩ − λ‖∇H‖²|`, for Hamiltonian games only.
    pub d3_residual: Option<f64>,
    pub xi_dot_grad_h: f64,
    pub adj_dot_grad_h: f64,
    /// `λ·⟨ξ,∇H⟩·⟨Aᵀξ,∇H⟩ ≥ 0`.
    pub alignment_satisfied: bool,
}

/// Evaluates the desiderata for `ξ_λ = ξ + λAᵀξ` at `w`.
pub fn desiderata_report(game: &Game, w: &JointPoint, lambda: f64) -> Result<DesiderataReport> {
    if !lambda.is_finite() {
        return Err(GameError::param("lambda", "must be finite"));
    }
    let b = bundle(game, w)?;
    let class = classify_game_default(game)?.class;
    let xi_lambda = &b.xi + &b.adjustment * lambda;
    let grad_h_sq = b.grad_hamiltonian.norm_squared();
    let p = b.xi_dot_grad_h();
    let q = b.adj_dot_grad_h();
    Ok(DesiderataReport {
        lambda,
        class,
        d1_residual: (xi_lambda.dot(&b.xi) - b.xi.norm_squared()).abs(),
        d2_residual: (class == GameClass::Potential).then(|| (&xi_lambda - &b.xi).norm()),
        d3_residual: (class == GameClass::Hamiltonian)
            .then(|| (xi_lambda.dot(&b.grad_hamiltonian) - lambda * grad_h_sq).abs()),
        xi_dot_grad_h: p,
        adj_dot_grad_h: q,
        alignment_satisfied: lambda * p * q >= 0.0,
    })
}
