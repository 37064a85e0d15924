//! Learning-rate sweeps over a worker pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, AlgorithmKind, Verdict};
use crate::error::{GameError, Result};
use crate::harness::config::SweepSpec;

/// Ceiling applied to reported average losses.
pub const LOSS_REPORT_CAP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: AlgorithmKind,
    pub lambda: f64,
    pub align: bool,
    pub eta: f64,
    pub trial: usize,
    pub verdict: Verdict,
    /// Step at which the run stopped; `max_steps` when exhausted.
    pub steps: usize,
    pub final_avg_abs_loss: f64,
    pub final_w_norm: f64,
    pub final_hamiltonian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn rows_for(&self, kind: AlgorithmKind) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.algorithm == kind)
    }
}

/// Runs every (algorithm, eta, trial) cell. Rows come back in that nesting
/// order whatever the worker count.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let game = spec.game.build()?;
    let etas = spec.etas.values()?;
    let starts = spec.w0.points(&game)?;

    let mut cells = Vec::with_capacity(spec.algorithms.len() * etas.len() * starts.len());
    for template in &spec.algorithms {
        for &eta in &etas {
            for trial in 0..starts.len() {
                cells.push((template.with_eta(eta), trial));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| GameError::Config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|(alg, trial)| {
                let t = simulate(&game, &starts[*trial], alg, &spec.stopping)?;
                let last = t.last();
                Ok(SweepRow {
                    algorithm: alg.kind,
                    lambda: alg.lambda,
                    align: alg.align,
                    eta: alg.eta,
                    trial: *trial,
                    verdict: t.verdict,
                    steps: t.final_step(),
                    final_avg_abs_loss: t.final_avg_abs_loss().min(LOSS_REPORT_CAP),
                    final_w_norm: last.w.norm(),
                    final_hamiltonian: last.hamiltonian,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StoppingRule;
    use crate::harness::config::*;

    fn spec(algorithms: Vec<AlgorithmTemplate>, etas: EtaSpec, w0: InitSpec) -> SweepSpec {
        SweepSpec {
            game: GameSpec {
                name: "cycle_xy".into(),
                params: Default::default(),
            },
            algorithms,
            etas,
            w0,
            stopping: StoppingRule::default(),
            output: None,
        }
    }

    #[test]
    fn single_cell() {
        let s = spec(
            vec![AlgorithmTemplate::new(AlgorithmKind::Sga)],
            EtaSpec::List(vec![0.1]),
            InitSpec::Point(vec![1.0, 1.0]),
        );
        let r = run_sweep(&s, 1).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert!(r.rows[0].verdict.is_converged());
    }

    #[test]
    fn complete_and_ordered() {
        let s = spec(
            vec![
                AlgorithmTemplate::new(AlgorithmKind::Gd),
                AlgorithmTemplate::new(AlgorithmKind::Omd),
            ],
            EtaSpec::log_grid(0.01, 1.0, 5),
            InitSpec::Ball(BallSpec {
                center: vec![0.0, 0.0],
                radius: 1.0,
                seed: 7,
                trials: 3,
            }),
        );
        let r = run_sweep(&s, 4).unwrap();
        assert_eq!(r.rows.len(), 2 * 5 * 3);
        let mut i = 0;
        for kind in [AlgorithmKind::Gd, AlgorithmKind::Omd] {
            for eta in s.etas.values().unwrap() {
                for trial in 0..3 {
                    let row = &r.rows[i];
                    assert_eq!((row.algorithm, row.eta, row.trial), (kind, eta, trial));
                    assert!(row.steps <= s.stopping.max_steps);
                    assert_eq!(row.steps < s.stopping.max_steps, row.verdict != Verdict::Exhausted);
                    assert!(row.final_avg_abs_loss <= LOSS_REPORT_CAP);
                    i += 1;
                }
            }
        }
        assert_eq!(r, run_sweep(&s, 1).unwrap());
    }
}
