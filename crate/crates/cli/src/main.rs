//! `diffgame`: command-line driver for decompositions, simulations, sweeps,
//! fixed-point classification and the typed adjustment.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 on
//! numeric or I/O failures.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use diffgame::harness::config::{default_w0, InitSpec, OutputFormat};
use diffgame::harness::report::{
    render_decomposition, render_typed, write_sweep_csv, write_sweep_json, write_trajectory_csv,
};
use diffgame::harness::{run_checks, run_sweep, SweepSpec};
use diffgame::{
    builtin_game, bundle, classify, classify_game_default, find_fixed_point, simulate, typed_two_form,
    AlgorithmKind, AlgorithmSpec, Game, GameError, GameParams, JointPoint, Result, StoppingRule,
};

#[derive(Debug, Parser)]
#[command(name = "diffgame", version, about = "Gradient dynamics of differentiable games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print ξ, J, S, A, H, ∇H and Aᵀξ at a point, plus the game class.
    Decompose {
        #[command(flatten)]
        game: GameArgs,
        /// Point as comma-separated values.
        #[arg(long, alias = "w0", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        at: Vec<f64>,
    },
    /// Run one optimizer and write the trajectory as CSV.
    Simulate(SimulateArgs),
    /// Run a learning-rate sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; output does not depend on this.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Overrides the seed of a random-ball start.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output path of the config; stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Descend on H from a start point and classify the fixed point found.
    Classify {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, alias = "at", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        w0: Option<Vec<f64>>,
        /// Classify the start point as is, without searching.
        #[arg(long)]
        no_search: bool,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// Residual target ‖ξ‖ for the search.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Absolute eigenvalue tolerance; scale-relative when omitted.
        #[arg(long)]
        tol_eig: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Type-consistent two-form and adjustment for a two-player quadratic game.
    Typed {
        #[command(flatten)]
        game: GameArgs,
        #[arg(long, alias = "w0", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        at: Vec<f64>,
    },
    /// Run the invariant suite on the builtin games.
    Check,
}

#[derive(Debug, Args)]
struct GameArgs {
    #[arg(long)]
    game: String,
    /// Game parameters as `k=v,k=v`.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    params: String,
}

impl GameArgs {
    fn build(&self) -> Result<Game> {
        builtin_game(&self.game, &GameParams::parse(&self.params)?)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Start point; defaults to (4,3) for the rotation game and all ones otherwise.
    #[arg(long, alias = "at", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    w0: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_algo)]
    algo: AlgorithmKind,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    lambda: f64,
    /// Choose the sign of λ by alignment (SGA only).
    #[arg(long)]
    align: bool,
    #[arg(long, default_value_t = 250)]
    max_steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_algo(s: &str) -> std::result::Result<AlgorithmKind, String> {
    s.parse().map_err(|e: GameError| e.to_string())
}

fn point(game: &Game, values: &[f64]) -> Result<JointPoint> {
    game.point(values)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    match cli.command {
        Command::Decompose { game, at } => {
            let g = game.build()?;
            let b = bundle(&g, &point(&g, &at)?)?;
            let class = classify_game_default(&g)?;
            print!("{}", render_decomposition(&b, &class));
        }
        Command::Simulate(a) => {
            let g = a.game.build()?;
            let w0 = point(&g, &a.w0.unwrap_or_else(|| default_w0(&g)))?;
            let spec = AlgorithmSpec {
                lambda: a.lambda,
                align: a.align,
                ..AlgorithmSpec::new(a.algo, a.eta)
            };
            let stopping = StoppingRule::with_max_steps(a.max_steps);
            let t = match simulate(&g, &w0, &spec, &stopping) {
                Ok(t) => t,
                Err(GameError::Simulation { step, source, partial }) => {
                    if let Some(path) = &a.out {
                        if !partial.states.is_empty() {
                            write_trajectory_csv(create(path)?, &partial)?;
                        }
                    }
                    return Err(GameError::Simulation { step, source, partial });
                }
                Err(e) => return Err(e),
            };
            if let Some(path) = &a.out {
                write_trajectory_csv(create(path)?, &t)?;
            }
            writeln!(stdout.lock(), "verdict={} step={}", t.verdict.name(), t.final_step())?;
        }
        Command::Sweep {
            config,
            workers,
            seed,
            out,
        } => {
            let mut spec = SweepSpec::from_path(&config)?;
            if let (Some(seed), InitSpec::Ball(b)) = (seed, &mut spec.w0) {
                b.seed = seed;
            }
            let result = run_sweep(&spec, workers)?;
            let format = spec.output.as_ref().map(|o| o.format).unwrap_or_default();
            let path = out.or_else(|| spec.output.as_ref().map(|o| o.path.clone()));
            let mut sink: Box<dyn Write> = match &path {
                Some(p) => Box::new(create(p)?),
                None => Box::new(stdout.lock()),
            };
            match format {
                OutputFormat::Csv => write_sweep_csv(&mut sink, &result)?,
                OutputFormat::Json => write_sweep_json(&mut sink, &result)?,
            }
            sink.flush()?;
        }
        Command::Classify {
            game,
            w0,
            no_search,
            max_iters,
            tol,
            tol_eig,
            out,
        } => {
            let g = game.build()?;
            let start = point(&g, &w0.unwrap_or_else(|| default_w0(&g)))?;
            let report = if no_search {
                classify(&g, &start, tol_eig)?
            } else {
                let found = find_fixed_point(&g, &start, max_iters, tol)?;
                if tol_eig.is_some() {
                    let mut r = classify(&g, &point(&g, &found.w_star)?, tol_eig)?;
                    r.converged = found.converged;
                    r.iterations = found.iterations;
                    r
                } else {
                    found
                }
            };
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => writeln!(create(&p)?, "{text}")?,
                None => writeln!(stdout.lock(), "{text}")?,
            }
        }
        Command::Typed { game, at } => {
            let g = game.build()?;
            let w = point(&g, &at)?;
            let t = typed_two_form(&g)?;
            let b = bundle(&g, &w)?;
            let typed = t.adjust(&b.xi)?;
            print!("{}", render_typed(&t, &typed, &b.adjustment));
        }
        Command::Check => {
            let outcomes = run_checks()?;
            let failed = outcomes.iter().filter(|c| !c.passed).count();
            let mut o = stdout.lock();
            for c in &outcomes {
                writeln!(o, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
            }
            writeln!(o, "{} checks, {} failed", outcomes.len(), failed)?;
            if failed > 0 {
                return Err(GameError::Numeric(format!("{failed} invariant checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
