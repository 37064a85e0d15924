//! JSON sweep configuration.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::catalog::{builtin_game, GameParams};
use crate::dynamics::{AlgorithmKind, AlgorithmSpec, StoppingRule, DEFAULT_EPSILON_ALIGN};
use crate::error::{GameError, Result};
use crate::game::{Game, JointPoint};

pub const DEFAULT_GRID_COUNT: usize = 40;

/// Starting point used when none is given: `(4, 3)` for
/// `weak_attractor_strong_rotation`, all ones otherwise.
pub fn default_w0(game: &Game) -> Vec<f64> {
    if game.name() == "weak_attractor_strong_rotation" {
        vec![4.0, 3.0]
    } else {
        vec![1.0; game.dim()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub name: String,
    #[serde(default)]
    pub params: GameParams,
}

impl GameSpec {
    pub fn build(&self) -> Result<Game> {
        builtin_game(&self.name, &self.params)
    }
}

/// An algorithm with everything but the learning rate fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmTemplate {
    #[serde(alias = "algorithm")]
    pub kind: AlgorithmKind,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub align: bool,
    #[serde(default = "default_epsilon_align")]
    pub epsilon_align: f64,
}

fn one() -> f64 {
    1.0
}

fn default_epsilon_align() -> f64 {
    DEFAULT_EPSILON_ALIGN
}

impl AlgorithmTemplate {
    pub fn new(kind: AlgorithmKind) -> Self {
        AlgorithmTemplate {
            kind,
            lambda: 1.0,
            align: false,
            epsilon_align: DEFAULT_EPSILON_ALIGN,
        }
    }

    pub fn with_eta(&self, eta: f64) -> AlgorithmSpec {
        AlgorithmSpec {
            kind: self.kind,
            lambda: self.lambda,
            align: self.align,
            epsilon_align: self.epsilon_align,
            eta,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_grid_count")]
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
    /// Extra learning rates appended after the grid points.
    #[serde(default)]
    pub include: Vec<f64>,
}

fn default_grid_count() -> usize {
    DEFAULT_GRID_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    List(Vec<f64>),
    Grid(GridSpec),
}

impl EtaSpec {
    pub fn log_grid(min: f64, max: f64, count: usize) -> Self {
        EtaSpec::Grid(GridSpec {
            min,
            max,
            count,
            spacing: Spacing::Log,
            include: Vec::new(),
        })
    }

    /// Learning rates in sweep order. Grid end points are exact.
    pub fn values(&self) -> Result<Vec<f64>> {
        let etas = match self {
            EtaSpec::List(v) => v.clone(),
            EtaSpec::Grid(g) => {
                if g.count == 0 {
                    return Err(GameError::Config("eta grid count must be at least 1".into()));
                }
                if !(g.min > 0.0 && g.max >= g.min && g.max.is_finite()) {
                    return Err(GameError::Config(format!(
                        "eta grid needs 0 < min <= max, got [{}, {}]",
                        g.min, g.max
                    )));
                }
                let n = g.count;
                let mut v: Vec<f64> = (0..n)
                    .map(|i| {
                        if n == 1 {
                            return g.min;
                        }
                        let t = i as f64 / (n - 1) as f64;
                        match g.spacing {
                            Spacing::Log => (g.min.ln() + t * (g.max.ln() - g.min.ln())).exp(),
                            Spacing::Linear => g.min + t * (g.max - g.min),
                        }
                    })
                    .collect();
                if n > 1 {
                    v[0] = g.min;
                    v[n - 1] = g.max;
                }
                v.extend_from_slice(&g.include);
                v
            }
        };
        if etas.is_empty() {
            return Err(GameError::Config("no learning rates given".into()));
        }
        if let Some(e) = etas.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(GameError::Config(format!("learning rates must be positive and finite, got {e}")));
        }
        Ok(etas)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_trial")]
    pub trials: usize,
}

fn one_trial() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Point(Vec<f64>),
    Ball(BallSpec),
}

impl InitSpec {
    /// Starting points, one per trial, generated sequentially from the seed.
    pub fn points(&self, game: &Game) -> Result<Vec<JointPoint>> {
        match self {
            InitSpec::Point(v) => Ok(vec![game.point(v)?]),
            InitSpec::Ball(b) => {
                if b.trials == 0 {
                    return Err(GameError::Config("w0.trials must be at least 1".into()));
                }
                if !(b.radius >= 0.0 && b.radius.is_finite()) {
                    return Err(GameError::Config("w0.radius must be finite and non-negative".into()));
                }
                let center = game.point(&b.center)?;
                Ok(uniform_ball(center.values(), b.radius, b.trials, b.seed)
                    .into_iter()
                    .map(|v| JointPoint::new(center.partition().clone(), v))
                    .collect::<Result<_>>()?)
            }
        }
    }
}

/// `count` points drawn uniformly from the closed ball.
pub fn uniform_ball(center: &DVector<f64>, radius: f64, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = center.len();
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    (0..count)
        .map(|_| loop {
            let dir: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let n: f64 = dir.norm();
            if n > 0.0 {
                let r = radius * unit.sample(&mut rng).powf(1.0 / d as f64);
                break center + dir * (r / n);
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub game: GameSpec,
    pub algorithms: Vec<AlgorithmTemplate>,
    pub etas: EtaSpec,
    pub w0: InitSpec,
    #[serde(default)]
    pub stopping: StoppingRule,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(GameError::Config("at least one algorithm is required".into()));
        }
        self.etas.values()?;
        self.stopping.validate()?;
        for a in &self.algorithms {
            a.with_eta(1.0).validate()?;
        }
        if let InitSpec::Ball(b) = &self.w0 {
            if b.trials == 0 {
                return Err(GameError::Config("w0.trials must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_end_points_are_exact() {
        let v = EtaSpec::log_grid(0.01, 1.75, 40).values().unwrap();
        assert_eq!(v.len(), 40);
        assert_eq!(v[0], 0.01);
        assert_eq!(v[39], 1.75);
        assert!(v.windows(2).all(|p| p[1] > p[0]));
        let ratio = v[1] / v[0];
        assert!(v.windows(2).all(|p| (p[1] / p[0] - ratio).abs() < 1e-12));
    }

    #[test]
    fn single_point_grid() {
        assert_eq!(EtaSpec::log_grid(0.3, 0.3, 1).values().unwrap(), vec![0.3]);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(EtaSpec::log_grid(0.1, 0.2, 0).values().is_err());
        assert!(EtaSpec::log_grid(0.0, 0.2, 4).values().is_err());
        assert!(EtaSpec::List(vec![0.1, -0.1]).values().is_err());
        assert!(EtaSpec::List(vec![]).values().is_err());
    }

    #[test]
    fn parses_full_config() {
        let text = r#"{
            "game": {"name": "bimatrix_zerosum", "params": {"d1": 1}},
            "algorithms": [{"kind": "omd"}, {"algorithm": "sga", "lambda": 1.0, "align": true}],
            "etas": {"min": 0.01, "max": 1.75, "count": 40, "spacing": "log", "include": [0.05, 1.5]},
            "w0": [1.0, 1.0],
            "stopping": {"max_steps": 250},
            "output": {"path": "out.csv"}
        }"#;
        let s = SweepSpec::from_json(text).unwrap();
        assert_eq!(s.algorithms[1].kind, AlgorithmKind::Sga);
        assert!(s.algorithms[1].align);
        assert_eq!(s.etas.values().unwrap().len(), 42);
        assert_eq!(s.stopping.loss_window, 10);
        assert_eq!(s.output.unwrap().format, OutputFormat::Csv);
    }

    #[test]
    fn parses_ball_and_list() {
        let text = r#"{
            "game": {"name": "cycle_xy"},
            "algorithms": [{"kind": "gd"}],
            "etas": [0.1, 0.2],
            "w0": {"center": [0, 0], "radius": 0.5, "seed": 3, "trials": 4}
        }"#;
        let s = SweepSpec::from_json(text).unwrap();
        let g = s.game.build().unwrap();
        let pts = s.w0.points(&g).unwrap();
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.norm() <= 0.5));
        assert_eq!(pts, s.w0.points(&g).unwrap());
    }

    #[test]
    fn unknown_fields_and_bad_values_fail() {
        let bad_field = r#"{"game": {"name": "cycle_xy"}, "algorithms": [{"kind": "gd"}],
            "etas": [0.1], "w0": [1, 1], "colour": 3}"#;
        assert!(matches!(SweepSpec::from_json(bad_field), Err(GameError::Json(_))));
        let no_algos = r#"{"game": {"name": "cycle_xy"}, "algorithms": [], "etas": [0.1], "w0": [1, 1]}"#;
        assert!(matches!(SweepSpec::from_json(no_algos), Err(GameError::Config(_))));
    }
}
