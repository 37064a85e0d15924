//! Optimizer steps and trajectory simulation.
//!
//! Every algorithm except OMD is a pure function of the decomposition bundle
//! at the current point: it yields a direction `v` and the update is
//! `w ← w − η·v`. OMD needs the previous simultaneous gradient and is
//! handled by [`step_omd`].

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::calculus::{bundle, bundle_unchecked, simultaneous_gradient, DecompositionBundle};
use crate::error::{GameError, Result};
use crate::game::{Game, JointPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Gd,
    Sga,
    Consensus,
    AlignedConsensus,
    Omd,
}

impl AlgorithmKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmKind::Gd => "gd",
            AlgorithmKind::Sga => "sga",
            AlgorithmKind::Consensus => "consensus",
            AlgorithmKind::AlignedConsensus => "aligned_consensus",
            AlgorithmKind::Omd => "omd",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AlgorithmKind {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(AlgorithmKind::Gd),
            "sga" => Ok(AlgorithmKind::Sga),
            "consensus" => Ok(AlgorithmKind::Consensus),
            "aligned_consensus" => Ok(AlgorithmKind::AlignedConsensus),
            "omd" => Ok(AlgorithmKind::Omd),
            other => Err(GameError::param(
                "algo",
                format!("unknown algorithm `{other}`; expected gd, sga, consensus, aligned_consensus or omd"),
            )),
        }
    }
}

pub const DEFAULT_EPSILON_ALIGN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    /// Adjustment magnitude.
    pub lambda: f64,
    /// Sign selection; only honoured for SGA.
    pub align: bool,
    pub epsilon_align: f64,
    pub eta: f64,
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind, eta: f64) -> Self {
        AlgorithmSpec {
            kind,
            lambda: 1.0,
            align: false,
            epsilon_align: DEFAULT_EPSILON_ALIGN,
            eta,
        }
    }

    pub fn gd(eta: f64) -> Self {
        Self::new(AlgorithmKind::Gd, eta)
    }

    pub fn sga(eta: f64, lambda: f64) -> Self {
        AlgorithmSpec {
            lambda,
            ..Self::new(AlgorithmKind::Sga, eta)
        }
    }

    pub fn aligned_sga(eta: f64, lambda: f64) -> Self {
        AlgorithmSpec {
            align: true,
            ..Self::sga(eta, lambda)
        }
    }

    pub fn consensus(eta: f64, lambda: f64) -> Self {
        AlgorithmSpec {
            lambda,
            ..Self::new(AlgorithmKind::Consensus, eta)
        }
    }

    pub fn aligned_consensus(eta: f64, lambda: f64) -> Self {
        AlgorithmSpec {
            lambda,
            ..Self::new(AlgorithmKind::AlignedConsensus, eta)
        }
    }

    pub fn omd(eta: f64) -> Self {
        Self::new(AlgorithmKind::Omd, eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(GameError::param("eta", format!("must be positive and finite, got {}", self.eta)));
        }
        if !self.lambda.is_finite() {
            return Err(GameError::param("lambda", "must be finite"));
        }
        if !(self.epsilon_align >= 0.0 && self.epsilon_align.is_finite()) {
            return Err(GameError::param("epsilon_align", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingRule {
    pub max_steps: usize,
    pub loss_window: usize,
    pub loss_threshold: f64,
    pub divergence_norm: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            max_steps: 250,
            loss_window: 10,
            loss_threshold: 0.01,
            divergence_norm: 1e6,
        }
    }
}

impl StoppingRule {
    pub fn with_max_steps(max_steps: usize) -> Self {
        StoppingRule {
            max_steps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(GameError::param("max_steps", "must be positive"));
        }
        if self.loss_window == 0 || self.loss_window > self.max_steps {
            return Err(GameError::param(
                "loss_window",
                format!("must lie in 1..={}, got {}", self.max_steps, self.loss_window),
            ));
        }
        if !(self.loss_threshold > 0.0) {
            return Err(GameError::param("loss_threshold", "must be positive"));
        }
        if !(self.divergence_norm > 0.0) {
            return Err(GameError::param("divergence_norm", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "step", rename_all = "snake_case")]
pub enum Verdict {
    Converged(usize),
    Diverged(usize),
    Exhausted,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Converged(_) => "converged",
            Verdict::Diverged(_) => "diverged",
            Verdict::Exhausted => "exhausted",
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, Verdict::Converged(_))
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self, Verdict::Diverged(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub step: usize,
    pub w: DVector<f64>,
    pub losses: DVector<f64>,
    pub hamiltonian: f64,
    pub xi_norm: f64,
}

impl TrajectoryState {
    pub fn mean_abs_loss(&self) -> f64 {
        self.losses.iter().map(|l| l.abs()).sum::<f64>() / self.losses.len() as f64
    }

    fn is_finite(&self) -> bool {
        self.w.iter().chain(self.losses.iter()).all(|v| v.is_finite()) && self.xi_norm.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<TrajectoryState>,
    pub verdict: Verdict,
    pub spec: AlgorithmSpec,
    pub stopping: StoppingRule,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryState {
        self.states.last().expect("trajectory is never empty")
    }

    /// Step index at which the run stopped.
    pub fn final_step(&self) -> usize {
        self.last().step
    }

    /// Mean over the last `loss_window` updates (fewer if the run was
    /// shorter) of the player-averaged absolute loss.
    pub fn final_avg_abs_loss(&self) -> f64 {
        let updates = &self.states[1.min(self.states.len() - 1)..];
        let k = self.stopping.loss_window.min(updates.len()).max(1);
        let tail = &updates[updates.len() - k..];
        tail.iter().map(TrajectoryState::mean_abs_loss).sum::<f64>() / k as f64
    }

    pub fn norms(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.w.norm())
    }
}

/// `sign((1/d)·⟨ξ,∇H⟩·⟨Aᵀξ,∇H⟩ + ε)`, with a zero argument mapped to +1.
pub fn alignment_sign(bundle: &DecompositionBundle, epsilon: f64) -> f64 {
    let d = bundle.dim().max(1) as f64;
    let arg = bundle.xi_dot_grad_h() * bundle.adj_dot_grad_h() / d + epsilon;
    if arg < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Descent direction `v` for the update `w ← w − η·v`.
pub fn update_direction(bundle: &DecompositionBundle, spec: &AlgorithmSpec) -> Result<DVector<f64>> {
    let xi = &bundle.xi;
    match spec.kind {
        AlgorithmKind::Gd => Ok(xi.clone()),
        AlgorithmKind::Sga => {
            let lambda = if spec.align {
                spec.lambda.abs() * alignment_sign(bundle, spec.epsilon_align)
            } else {
                spec.lambda
            };
            Ok(xi + &bundle.adjustment * lambda)
        }
        AlgorithmKind::Consensus => Ok(xi + &bundle.grad_hamiltonian * spec.lambda),
        AlgorithmKind::AlignedConsensus => {
            let sign = if bundle.xi_dot_grad_h() < 0.0 { -1.0 } else { 1.0 };
            Ok(xi + &bundle.grad_hamiltonian * (spec.lambda.abs() * sign))
        }
        AlgorithmKind::Omd => Err(GameError::Usage(
            "OMD needs the previous gradient; use step_omd instead of update_direction".into(),
        )),
    }
}

/// `2ξ_t − ξ_{t−1}`, with `ξ_{−1} := ξ_0`.
fn omd_direction(xi: &DVector<f64>, prev: Option<&DVector<f64>>) -> DVector<f64> {
    match prev {
        Some(p) => xi * 2.0 - p,
        None => xi.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub w: JointPoint,
    /// OMD memory; present only after the first OMD step.
    pub prev_xi: Option<DVector<f64>>,
    pub step_index: usize,
}

impl StepState {
    pub fn start(w: JointPoint) -> Self {
        StepState {
            w,
            prev_xi: None,
            step_index: 0,
        }
    }
}

fn advance(w: &JointPoint, direction: &DVector<f64>, eta: f64) -> Result<JointPoint> {
    let next = w.values() - direction * eta;
    JointPoint::new(w.partition().clone(), next)
        .map_err(|_| GameError::Numeric("update produced a non-finite point".into()))
}

/// One optimistic gradient step
/// `w_{t+1} = w_t − η·ξ_t − η·(ξ_t − ξ_{t−1})`.
pub fn step_omd(state: &StepState, game: &Game, eta: f64) -> Result<StepState> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(GameError::param("eta", format!("must be positive and finite, got {eta}")));
    }
    let xi = simultaneous_gradient(game, &state.w)?;
    let dir = omd_direction(&xi, state.prev_xi.as_ref());
    Ok(StepState {
        w: advance(&state.w, &dir, eta)?,
        prev_xi: Some(xi),
        step_index: state.step_index + 1,
    })
}

/// One step of any algorithm.
pub fn step(state: &StepState, game: &Game, spec: &AlgorithmSpec) -> Result<StepState> {
    spec.validate()?;
    if spec.kind == AlgorithmKind::Omd {
        return step_omd(state, game, spec.eta);
    }
    let b = bundle(game, &state.w)?;
    let dir = update_direction(&b, spec)?;
    Ok(StepState {
        w: advance(&state.w, &dir, spec.eta)?,
        prev_xi: None,
        step_index: state.step_index + 1,
    })
}

/// Iterates the algorithm from `w0` until convergence, divergence or the
/// step cap.
///
/// State `k` is recorded before the `k`-th check. Convergence at step `k`
/// requires `k ≥ loss_window` and looks at the last `loss_window` post-update
/// states. Divergence fires on `‖w‖ > divergence_norm` or any non-finite
/// value. Reaching `max_steps` always yields [`Verdict::Exhausted`].
pub fn simulate(
    game: &Game,
    w0: &JointPoint,
    spec: &AlgorithmSpec,
    stopping: &StoppingRule,
) -> Result<Trajectory> {
    game.check_point(w0)?;
    spec.validate()?;
    stopping.validate()?;

    let needs_bundle = matches!(
        spec.kind,
        AlgorithmKind::Sga | AlgorithmKind::Consensus | AlgorithmKind::AlignedConsensus
    );
    let partition = w0.partition().clone();
    let mut w = w0.values().clone();
    let mut prev_xi: Option<DVector<f64>> = None;
    let mut states: Vec<TrajectoryState> = Vec::with_capacity(stopping.max_steps.min(100_000) + 1);

    let fail = |step: usize, source: GameError, states: Vec<TrajectoryState>| GameError::Simulation {
        step,
        source: Box::new(source),
        partial: Box::new(Trajectory {
            states,
            verdict: Verdict::Exhausted,
            spec: *spec,
            stopping: *stopping,
        }),
    };

    let mut k = 0usize;
    let verdict = loop {
        let point = JointPoint::unchecked(partition.clone(), w.clone());
        let losses = match game.losses_raw(&w) {
            Ok(l) => l,
            Err(e) => return Err(fail(k, e, states)),
        };
        let (xi, b) = if needs_bundle {
            match bundle_unchecked(game, &point) {
                Ok(b) => (b.xi.clone(), Some(b)),
                Err(e) => return Err(fail(k, e, states)),
            }
        } else {
            match game.gradient_raw(&w) {
                Ok(xi) => (xi, None),
                Err(e) => return Err(fail(k, e, states)),
            }
        };
        let state = TrajectoryState {
            step: k,
            w: w.clone(),
            losses,
            hamiltonian: 0.5 * xi.norm_squared(),
            xi_norm: xi.norm(),
        };
        let finite = state.is_finite();
        states.push(state);

        if k == stopping.max_steps {
            break Verdict::Exhausted;
        }
        if !finite || w.norm() > stopping.divergence_norm {
            break Verdict::Diverged(k);
        }
        if k >= stopping.loss_window {
            let tail = &states[k + 1 - stopping.loss_window..];
            let mean = tail.iter().map(TrajectoryState::mean_abs_loss).sum::<f64>()
                / stopping.loss_window as f64;
            if mean < stopping.loss_threshold {
                break Verdict::Converged(k);
            }
        }

        let dir = match spec.kind {
            AlgorithmKind::Omd => {
                let d = omd_direction(&xi, prev_xi.as_ref());
                prev_xi = Some(xi);
                d
            }
            AlgorithmKind::Gd => xi,
            _ => {
                let b = b.as_ref().expect("bundle computed for adjusted algorithms");
                match update_direction(b, spec) {
                    Ok(d) => d,
                    Err(e) => return Err(fail(k, e, states)),
                }
            }
        };
        w -= dir * spec.eta;
        k += 1;
    };

    Ok(Trajectory {
        states,
        verdict,
        spec: *spec,
        stopping: *stopping,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::*;

    fn b_at(g: &Game, w: &[f64]) -> DecompositionBundle {
        bundle(g, &g.point(w).unwrap()).unwrap()
    }

    #[test]
    fn sga_on_cycle() {
        let g = cycle_xy();
        let d = update_direction(&b_at(&g, &[1.0, 1.0]), &AlgorithmSpec::sga(0.1, 1.0)).unwrap();
        assert_eq!(d.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn consensus_on_trap() {
        let g = consensus_trap(10.0);
        for w in [[1.0, 1.0], [0.5, -2.0]] {
            let d = update_direction(&b_at(&g, &w), &AlgorithmSpec::consensus(0.1, 1.0)).unwrap();
            assert_eq!(d.as_slice(), &[90.0 * w[0], 90.0 * w[1]]);
        }
    }

    #[test]
    fn sga_is_identity_on_potential_games() {
        for g in [consensus_trap(10.0), zerosum_not_ham(), nash_not_stable()] {
            for lambda in [-3.0, 0.5, 7.0] {
                let b = b_at(&g, &[0.3, -1.7]);
                let d = update_direction(&b, &AlgorithmSpec::sga(0.1, lambda)).unwrap();
                assert_eq!(d, b.xi);
            }
        }
    }

    #[test]
    fn omd_rejected_by_update_direction() {
        let g = cycle_xy();
        let r = update_direction(&b_at(&g, &[1.0, 1.0]), &AlgorithmSpec::omd(0.1));
        assert!(matches!(r, Err(GameError::Usage(_))));
    }

    #[test]
    fn alignment_sign_examples() {
        let g = cycle_xy();
        assert_eq!(alignment_sign(&b_at(&g, &[1.0, 1.0]), 0.1), 1.0);
        assert_eq!(alignment_sign(&b_at(&g, &[0.0, 0.0]), 0.1), 1.0);
        assert_eq!(alignment_sign(&b_at(&g, &[0.0, 0.0]), 0.0), 1.0);
        let g = weak_repellor(0.1);
        for w in [[1.0, 1.0], [1.1, 0.9], [0.9, 1.2]] {
            assert_eq!(alignment_sign(&b_at(&g, &w), 0.1), -1.0);
        }
    }

    #[test]
    fn omd_first_step_is_gd() {
        let g = stable_not_nash();
        let w0 = g.point(&[0.3, -0.4]).unwrap();
        let s1 = step_omd(&StepState::start(w0.clone()), &g, 0.2).unwrap();
        let gd = step(&StepState::start(w0), &g, &AlgorithmSpec::gd(0.2)).unwrap();
        assert_eq!(s1.w, gd.w);
        assert_eq!(s1.step_index, 1);
        assert!(s1.prev_xi.is_some());
    }

    #[test]
    fn omd_two_steps_on_bimatrix() {
        let g = bimatrix_zerosum(1);
        let s0 = StepState::start(g.point(&[1.0, 1.0]).unwrap());
        let s1 = step_omd(&s0, &g, 0.5).unwrap();
        assert_eq!(s1.w.values().as_slice(), &[0.5, 1.5]);
        let s2 = step_omd(&s1, &g, 0.5).unwrap();
        assert_eq!(s2.w.values().as_slice(), &[-0.5, 1.5]);
    }

    #[test]
    fn omd_matches_gd_for_constant_field() {
        // Linear losses: ℓ₁ = 2x, ℓ₂ = −y.
        let g = Game::new(
            "linear",
            crate::game::PlayerPartition::scalars(2).unwrap(),
            |w| DVector::from_vec(vec![2.0 * w[0], -w[1]]),
            |_| DVector::from_vec(vec![2.0, -1.0]),
        );
        let mut omd = StepState::start(g.point(&[0.0, 0.0]).unwrap());
        let mut gd = omd.clone();
        for _ in 0..20 {
            omd = step_omd(&omd, &g, 0.3).unwrap();
            gd = step(&gd, &g, &AlgorithmSpec::gd(0.3)).unwrap();
            assert_eq!(omd.w, gd.w);
        }
    }

    #[test]
    fn step_omd_rejects_bad_eta() {
        let g = cycle_xy();
        let s = StepState::start(g.point(&[1.0, 1.0]).unwrap());
        assert!(step_omd(&s, &g, 0.0).is_err());
        assert!(step_omd(&s, &g, -1.0).is_err());
    }

    #[test]
    fn sga_converges_on_cycle() {
        let g = cycle_xy();
        let t = simulate(
            &g,
            &g.point(&[1.0, 1.0]).unwrap(),
            &AlgorithmSpec::sga(0.1, 1.0),
            &StoppingRule::with_max_steps(500),
        )
        .unwrap();
        assert!(t.verdict.is_converged(), "{:?}", t.verdict);
        assert!(t.last().w.norm() < 0.2);
    }

    #[test]
    fn gd_spirals_out_on_cycle() {
        let g = cycle_xy();
        let t = simulate(
            &g,
            &g.point(&[1.0, 1.0]).unwrap(),
            &AlgorithmSpec::gd(0.1),
            &StoppingRule::with_max_steps(500),
        )
        .unwrap();
        assert!(!t.verdict.is_converged());
        // radius grows by √(1+η²) per step
        let r: Vec<f64> = t.norms().collect();
        for (k, pair) in r.windows(2).enumerate().take(50) {
            let ratio = pair[1] / pair[0];
            assert!((ratio - 1.01f64.sqrt()).abs() < 1e-12, "step {k}: {ratio}");
        }
    }

    #[test]
    fn consensus_converges_to_the_maximum() {
        let g = consensus_trap(10.0);
        let t = simulate(
            &g,
            &g.point(&[1.0, 1.0]).unwrap(),
            &AlgorithmSpec::consensus(0.01, 1.0),
            &StoppingRule::with_max_steps(250),
        )
        .unwrap();
        assert!(t.verdict.is_converged());
        assert!(t.last().w.norm() < 0.1);
    }

    #[test]
    fn verdict_and_state_bookkeeping() {
        let g = cycle_xy();
        let stop = StoppingRule::with_max_steps(30);
        let t = simulate(&g, &g.point(&[1.0, 1.0]).unwrap(), &AlgorithmSpec::gd(0.01), &stop).unwrap();
        assert_eq!(t.verdict, Verdict::Exhausted);
        assert_eq!(t.states.len(), 31);
        for (i, s) in t.states.iter().enumerate() {
            assert_eq!(s.step, i);
            assert!((s.hamiltonian - 0.5 * s.xi_norm * s.xi_norm).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_guard_fires() {
        let g = weak_attractor_strong_rotation();
        let t = simulate(
            &g,
            &g.point(&[4.0, 3.0]).unwrap(),
            &AlgorithmSpec::gd(0.1),
            &StoppingRule::default(),
        )
        .unwrap();
        assert!(t.verdict.is_diverged());
        let last = t.last();
        assert!(last.w.norm() > 1e6);
        assert!(t.states[..t.states.len() - 1].iter().all(|s| s.w.norm() <= 1e6));
    }

    #[test]
    fn nonfinite_state_is_divergence() {
        let g = Game::new(
            "blowup",
            crate::game::PlayerPartition::scalars(1).unwrap(),
            |w| DVector::from_vec(vec![w[0]]),
            |w| DVector::from_vec(vec![if w[0] < 0.0 { f64::NAN } else { 1.0 }]),
        );
        let t = simulate(&g, &g.point(&[0.5]).unwrap(), &AlgorithmSpec::gd(1.0), &StoppingRule::default()).unwrap();
        assert_eq!(t.verdict, Verdict::Diverged(1));
    }

    #[test]
    fn evaluator_failure_carries_partial_trajectory() {
        let g = Game::new(
            "shrinks",
            crate::game::PlayerPartition::scalars(2).unwrap(),
            |w| DVector::from_vec(vec![w[0], w[1]]),
            |w| {
                if w[0] < 0.5 {
                    DVector::from_vec(vec![1.0])
                } else {
                    DVector::from_vec(vec![0.2, 0.0])
                }
            },
        );
        let err = simulate(&g, &g.point(&[1.0, 0.0]).unwrap(), &AlgorithmSpec::gd(1.0), &StoppingRule::default())
            .unwrap_err();
        match err {
            GameError::Simulation { step, partial, .. } => {
                assert_eq!(step, 3);
                assert_eq!(partial.states.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(AlgorithmSpec::gd(0.0).validate().is_err());
        assert!(AlgorithmSpec::sga(0.1, f64::NAN).validate().is_err());
        let mut s = AlgorithmSpec::aligned_sga(0.1, 1.0);
        s.epsilon_align = -1.0;
        assert!(s.validate().is_err());
        let bad = StoppingRule {
            loss_window: 20,
            ..StoppingRule::with_max_steps(10)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn kind_round_trips_through_str() {
        for k in [
            AlgorithmKind::Gd,
            AlgorithmKind::Sga,
            AlgorithmKind::Consensus,
            AlgorithmKind::AlignedConsensus,
            AlgorithmKind::Omd,
        ] {
            assert_eq!(k.as_str().parse::<AlgorithmKind>().unwrap(), k);
        }
        assert!("adam".parse::<AlgorithmKind>().is_err());
    }
}
