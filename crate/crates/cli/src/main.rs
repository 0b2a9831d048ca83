use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use psro_cli::{asymmetric_case, counterexample_report, symmetric_case};
use psro_core::diversity::{blend_with_uniform, psd_distance_exact, psd_distance_sampled, DistanceConfig, DistanceMode};
use psro_core::error::RunError;
use psro_core::game::{FunctionalGame2D, Player};
use psro_core::oracle::{functional_distance, functional_reference, OracleMode};
use psro_core::policy::BehavioralPolicy;
use psro_core::psro::{eval_csv, evaluate_run, run, Game, GameSpec, InitialPolicy, RunConfig, Variant};

const USAGE: u8 = 1;
const RUNTIME: u8 = 2;
const REPRODUCTION: u8 = 3;

/// Population-based equilibrium finding with policy-space diversity.
#[derive(Parser)]
#[command(name = "psro", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run PSRO and write a run directory.
    Run(RunArgs),
    /// Recompute exploitability and PE for every iteration of a run.
    Eval(EvalArgs),
    /// Check the gamescape-versus-PE counterexamples.
    Counterexample(CounterexampleArgs),
    /// List the available games.
    Games,
    /// Policy-space distance between two serialized policies.
    Distance(DistanceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    game: Option<GameSpec>,
    /// psro, psro-rn or psd-psro
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// best-response, exact-gradient or reinforce
    #[arg(long, value_parser = parse_mode)]
    oracle: Option<OracleMode>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Hull points per iteration; 0 picks max(|population|, 10).
    #[arg(long)]
    hull_samples: Option<usize>,
    /// PE every N iterations; 0 disables.
    #[arg(long)]
    pe_every: Option<usize>,
    #[arg(long)]
    pe_eps: Option<f64>,
    /// uniform or random
    #[arg(long, value_parser = parse_initial)]
    initial: Option<InitialPolicy>,
    #[arg(long)]
    reference_floor: Option<f64>,
    #[arg(long)]
    weighting_eps: Option<f64>,
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long)]
    no_baseline: bool,
    #[arg(long)]
    allow_zero_lambda: bool,
    /// Single-threaded; leaves the time column empty so reruns are byte-identical.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory written by `psro run`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    pe_eps: f64,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long, default_value_t = 1e-9)]
    pe_eps: f64,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    game: GameSpec,
    /// Policy file (or `x y` point for functional games).
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    /// Weighting opponent policy; defaults to uniform.
    #[arg(long)]
    weighting: Option<PathBuf>,
    /// Estimate from this many sampled trajectories instead of exactly.
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    reference_floor: f64,
}

fn parse_mode(s: &str) -> Result<OracleMode, String> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| format!("unknown oracle `{s}` (expected best-response, exact-gradient or reinforce)"))
}

fn parse_initial(s: &str) -> Result<InitialPolicy, String> {
    serde_json::from_value(Value::String(s.to_string()))
        .map_err(|_| format!("unknown initial policy `{s}` (expected uniform or random)"))
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn has_key(raw: &Value, path: &[&str]) -> bool {
    let mut v = raw;
    for key in path {
        match v.get(key) {
            Some(next) => v = next,
            None => return false,
        }
    }
    true
}

fn build_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let (mut cfg, raw) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let raw: Value =
                serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let cfg: RunConfig = serde_json::from_value(raw.clone())
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            (cfg, raw)
        }
        None => (RunConfig::default(), Value::Null),
    };
    if let Some(g) = &args.game {
        cfg.game = g.clone();
    }
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if let Some(n) = args.iters {
        cfg.iterations = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    if let Some(x) = args.lr {
        cfg.oracle.learning_rate = x;
    }
    if let Some(n) = args.steps {
        cfg.oracle.steps = n;
    }
    if let Some(n) = args.episodes {
        cfg.oracle.episodes = n;
    }
    if let Some(k) = args.hull_samples {
        cfg.oracle.hull_samples = k;
    }
    if let Some(x) = args.pe_eps {
        cfg.pe_epsilon = x;
    }
    if let Some(i) = args.initial {
        cfg.initial = i;
    }
    if let Some(x) = args.reference_floor {
        cfg.oracle.reference_floor = x;
    }
    if let Some(x) = args.weighting_eps {
        cfg.oracle.weighting_epsilon = x;
    }
    if let Some(x) = args.discount {
        cfg.oracle.discount = x;
    }
    if args.no_baseline {
        cfg.oracle.baseline = false;
    }
    if args.allow_zero_lambda {
        cfg.allow_zero_lambda = true;
    }
    if args.deterministic {
        cfg.deterministic = true;
    }
    let regularized = cfg.variant == Variant::PsdPsro;
    cfg.oracle.lambda = match args.lambda {
        Some(x) => x,
        None if has_key(&raw, &["oracle", "lambda"]) => cfg.oracle.lambda,
        None if regularized => cfg.game.default_lambda(),
        None => 0.0,
    };
    cfg.oracle.mode = match args.oracle {
        Some(m) => m,
        None if has_key(&raw, &["oracle", "mode"]) => cfg.oracle.mode,
        None if regularized => OracleMode::ExactGradient,
        None => OracleMode::BestResponse,
    };
    cfg.metrics.pe_every = match args.pe_every {
        Some(n) => n,
        None if has_key(&raw, &["metrics", "pe_every"]) => cfg.metrics.pe_every,
        None => cfg.game.default_pe_every(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = build_config(args)?;
    let summary = run(&cfg)?;
    let show = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    println!(
        "{} {} iterations {} populations {}x{}",
        cfg.game,
        cfg.variant,
        summary.logs.len(),
        summary.population_sizes[0],
        summary.population_sizes[1]
    );
    println!("final exploitability {}", show(summary.final_exploitability));
    println!("final pe {}", show(summary.final_pe));
    if let Some(dir) = &cfg.out {
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    if !args.run.is_dir() {
        return Err(Failure::Runtime(format!("{}: not a run directory", args.run.display())));
    }
    let rows = evaluate_run(&args.run, args.pe_eps)?;
    let path = args.run.join("eval.csv");
    fs::write(&path, eval_csv(&rows)).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    if let Some(last) = rows.last() {
        println!(
            "{} rows, last exploitability {:.6} pe {:.6}",
            rows.len(),
            last.exploitability,
            last.pe
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_counterexample(args: &CounterexampleArgs) -> Result<bool, Failure> {
    let cases = [asymmetric_case(args.pe_eps), symmetric_case(args.pe_eps)];
    let cases: Vec<_> = cases
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    print!("{}", counterexample_report(&cases));
    Ok(cases.iter().all(|c| c.reproduced()))
}

fn cmd_games() {
    let specs = ["rps", "kuhn", "leduc", "goofspiel-4", "goofspiel-5", "mixture7", "disc"];
    for s in specs {
        let spec: GameSpec = s.parse().expect("known game");
        match spec.build() {
            Ok(Game::Tree(g)) => println!(
                "{s:<12} tree, {} nodes, {}/{} information states, default lambda {}",
                g.nodes().len(),
                g.infostates(Player::One).len(),
                g.infostates(Player::Two).len(),
                spec.default_lambda()
            ),
            Ok(Game::Functional(_)) => {
                println!("{s:<12} functional game on the plane, default lambda {}", spec.default_lambda())
            }
            Err(e) => println!("{s:<12} unavailable: {e}"),
        }
    }
    println!("{:<12} payoff matrix from a text file, default lambda 0.85", "matrix:PATH");
    println!("{:<12} goofspiel with N cards, optional -shuffled and -score suffixes", "goofspiel-N");
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn parse_point(path: &Path) -> Result<[f64; 2], Failure> {
    let text = read(path)?;
    let v: Vec<f64> = text.split_whitespace().filter_map(|t| t.parse().ok()).collect();
    match v[..] {
        [x, y] => Ok([x, y]),
        _ => Err(Failure::Runtime(format!("{}: expected two coordinates", path.display()))),
    }
}

fn cmd_distance(args: &DistanceArgs) -> Result<(), Failure> {
    match args.game.build()? {
        Game::Functional(game) => {
            let p = parse_point(&args.policy)?;
            let q = parse_point(&args.reference)?;
            let reference = functional_reference(&game, &[q], &[1.0]);
            let label = match game {
                FunctionalGame2D::Mixture7(_) => "kl",
                FunctionalGame2D::Disc => "squared euclidean",
            };
            println!("{label} distance {:.12}", functional_distance(&game, p, &reference));
        }
        Game::Tree(game) => {
            let parse = |path: &Path| {
                BehavioralPolicy::parse(&game, &read(path)?).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
            };
            let policy = parse(&args.policy)?;
            let reference = parse(&args.reference)?;
            let weighting = match &args.weighting {
                Some(path) => parse(path)?,
                None => blend_with_uniform(&BehavioralPolicy::uniform(&game, policy.owner().opponent()), 1.0),
            };
            let cfg = DistanceConfig {
                mode: match args.trajectories {
                    Some(n) => DistanceMode::Sampled { trajectories: n },
                    None => DistanceMode::Exact,
                },
                reference_floor: args.reference_floor,
                ..DistanceConfig::exact(weighting)
            };
            let fail = |e: psro_core::error::DistanceError| Failure::Runtime(e.to_string());
            match cfg.mode {
                DistanceMode::Exact => {
                    println!("distance {:.12}", psd_distance_exact(&game, &policy, &reference, &cfg).map_err(fail)?)
                }
                DistanceMode::Sampled { .. } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
                    let s = psd_distance_sampled(&game, &policy, &reference, &cfg, &mut rng).map_err(fail)?;
                    println!("distance {:.12} +- {:.12} ({} trajectories)", s.mean, s.std_error(), s.trajectories);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Counterexample(a) => match cmd_counterexample(a) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: counterexample not reproduced");
                return ExitCode::from(REPRODUCTION);
            }
            Err(e) => Err(e),
        },
        Command::Games => {
            cmd_games();
            Ok(())
        }
        Command::Distance(a) => cmd_distance(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(USAGE)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(RUNTIME)
        }
    }
}
