//! The PSRO loop: plain, rectified and diversity-regularized variants over
//! tree games and functional games on the plane, with per-iteration metrics
//! and run directories.
//!
//! Every iteration solves the restricted meta-game first, records metrics for
//! the populations as they stand, then trains one new policy per player (or
//! one per supported member for the rectified variant) against the opponent
//! meta-strategy and appends it.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diversity::{blend_with_uniform, effective_diversity, expected_cardinality, single_state_hull_distance};
use crate::error::{OracleError, RunError};
use crate::eval::{best_response, exploitability, hull_projection, restricted_double_oracle};
use crate::game::{
    build_goofspiel, build_kuhn, build_leduc, expected_utility, load_matrix_game, rock_paper_scissors,
    FunctionalGame2D, GameTree, GoofspielPayoff, MixtureConfig, Player, Point, PrizeOrder,
};
use crate::meta::{rectified_weights, MetaGame};
use crate::oracle::{
    functional_distance, functional_reference, point_oracle, psd_oracle_exact, psd_oracle_reinforce,
    HullReference, OracleConfig, OracleMode, OracleProblem, StepLog,
};
use crate::policy::{mix_members, sample_hull_weights, BehavioralPolicy};

/// Which game a run plays, written as `kuhn`, `leduc`, `rps`,
/// `goofspiel-N[-shuffled][-score]`, `matrix:PATH`, `mixture7` or `disc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GameSpec {
    Kuhn,
    Leduc,
    Rps,
    Goofspiel {
        cards: usize,
        order: PrizeOrder,
        payoff: GoofspielPayoff,
    },
    Matrix(PathBuf),
    Mixture7,
    Disc,
}

impl FromStr for GameSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kuhn" => return Ok(GameSpec::Kuhn),
            "leduc" => return Ok(GameSpec::Leduc),
            "rps" => return Ok(GameSpec::Rps),
            "mixture7" => return Ok(GameSpec::Mixture7),
            "disc" => return Ok(GameSpec::Disc),
            _ => {}
        }
        if let Some(path) = s.strip_prefix("matrix:") {
            if path.is_empty() {
                return Err("matrix game needs a file path, as in matrix:games/rps.txt".into());
            }
            return Ok(GameSpec::Matrix(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("goofspiel-") {
            let mut parts = rest.split('-');
            let cards = parts
                .next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| format!("bad card count in `{s}`"))?;
            let mut order = PrizeOrder::FixedAscending;
            let mut payoff = GoofspielPayoff::WinLoss;
            for part in parts {
                match part {
                    "shuffled" => order = PrizeOrder::ChanceShuffled,
                    "score" => payoff = GoofspielPayoff::ScoreDifference,
                    other => return Err(format!("unknown goofspiel option `{other}`")),
                }
            }
            return Ok(GameSpec::Goofspiel { cards, order, payoff });
        }
        Err(format!(
            "unknown game `{s}` (expected kuhn, leduc, rps, goofspiel-N, matrix:PATH, mixture7 or disc)"
        ))
    }
}

impl fmt::Display for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GameSpec::Kuhn => write!(f, "kuhn"),
            GameSpec::Leduc => write!(f, "leduc"),
            GameSpec::Rps => write!(f, "rps"),
            GameSpec::Goofspiel { cards, order, payoff } => {
                write!(f, "goofspiel-{cards}")?;
                if *order == PrizeOrder::ChanceShuffled {
                    write!(f, "-shuffled")?;
                }
                if *payoff == GoofspielPayoff::ScoreDifference {
                    write!(f, "-score")?;
                }
                Ok(())
            }
            GameSpec::Matrix(path) => write!(f, "matrix:{}", path.display()),
            GameSpec::Mixture7 => write!(f, "mixture7"),
            GameSpec::Disc => write!(f, "disc"),
        }
    }
}

impl TryFrom<String> for GameSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<GameSpec> for String {
    fn from(spec: GameSpec) -> String {
        spec.to_string()
    }
}

impl GameSpec {
    pub fn is_functional(&self) -> bool {
        matches!(self, GameSpec::Mixture7 | GameSpec::Disc)
    }

    /// Default diversity weight for the regularized variant.
    pub fn default_lambda(&self) -> f64 {
        match self {
            GameSpec::Mixture7 => 1.9,
            GameSpec::Rps | GameSpec::Matrix(_) => 0.85,
            _ => 0.1,
        }
    }

    /// Default spacing of population-exploitability evaluations.
    pub fn default_pe_every(&self) -> usize {
        match self {
            GameSpec::Goofspiel { .. } => 5,
            GameSpec::Mixture7 | GameSpec::Disc => 0,
            _ => 1,
        }
    }

    pub fn build(&self) -> Result<Game, RunError> {
        Ok(match self {
            GameSpec::Kuhn => Game::Tree(build_kuhn()),
            GameSpec::Leduc => Game::Tree(build_leduc()),
            GameSpec::Rps => Game::Tree(rock_paper_scissors().to_tree()),
            GameSpec::Goofspiel { cards, order, payoff } => Game::Tree(build_goofspiel(*cards, *order, *payoff)?),
            GameSpec::Matrix(path) => Game::Tree(load_matrix_game(path)?.to_tree()),
            GameSpec::Mixture7 => Game::Functional(FunctionalGame2D::mixture7(MixtureConfig::default())),
            GameSpec::Disc => Game::Functional(FunctionalGame2D::disc()),
        })
    }
}

pub enum Game {
    Tree(GameTree),
    Functional(FunctionalGame2D),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Psro,
    PsroRn,
    PsdPsro,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "psro" => Ok(Variant::Psro),
            "psro-rn" => Ok(Variant::PsroRn),
            "psd-psro" => Ok(Variant::PsdPsro),
            _ => Err(format!("unknown variant `{s}` (expected psro, psro-rn or psd-psro)")),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Psro => "psro",
            Variant::PsroRn => "psro-rn",
            Variant::PsdPsro => "psd-psro",
        })
    }
}

/// Starting population member of each player.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPolicy {
    /// Uniform behavioral policy; for functional games a point next to the
    /// first hump (mixture game) or the origin (disc game), jittered by the seed.
    #[default]
    Uniform,
    /// Random behavioral policy, or a random point of the game's domain.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub exploitability: bool,
    /// Population exploitability every this many iterations; 0 disables it.
    pub pe_every: usize,
    /// Effective diversity and expected cardinality of the row meta-game.
    pub diversity: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            exploitability: true,
            pe_every: 1,
            diversity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameSpec,
    pub variant: Variant,
    pub iterations: usize,
    pub oracle: OracleConfig,
    pub metrics: MetricsConfig,
    pub pe_epsilon: f64,
    pub seed: u64,
    pub initial: InitialPolicy,
    /// Lets the regularized variant run with λ = 0.
    pub allow_zero_lambda: bool,
    /// Single-threaded execution; the time column of metrics.csv is left empty.
    pub deterministic: bool,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            game: GameSpec::Kuhn,
            variant: Variant::Psro,
            iterations: 20,
            oracle: OracleConfig::default(),
            metrics: MetricsConfig::default(),
            pe_epsilon: 1e-6,
            seed: 0,
            initial: InitialPolicy::Uniform,
            allow_zero_lambda: false,
            deterministic: false,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::Config(m));
        if self.iterations == 0 {
            return bad("iteration count must be at least 1".into());
        }
        if !(self.pe_epsilon > 0.0 && self.pe_epsilon.is_finite()) {
            return bad(format!("pe epsilon must be positive, got {}", self.pe_epsilon));
        }
        self.oracle
            .validate()
            .or_else(|e| bad(e.to_string()))?;
        let lambda = self.oracle.lambda;
        match self.variant {
            Variant::PsdPsro => {
                if lambda == 0.0 && !self.allow_zero_lambda {
                    return bad("psd-psro needs lambda > 0 (set allow_zero_lambda to override)".into());
                }
                if self.oracle.mode == OracleMode::BestResponse {
                    return bad("psd-psro needs a gradient oracle (exact-gradient or reinforce)".into());
                }
            }
            Variant::Psro | Variant::PsroRn => {
                if lambda != 0.0 {
                    return bad(format!("variant {} trains without the diversity term; lambda must be 0", self.variant));
                }
            }
        }
        if self.game.is_functional() && self.oracle.mode == OracleMode::Reinforce {
            return bad("functional games take best-response or exact-gradient oracles".into());
        }
        Ok(())
    }
}

/// Metrics of one iteration, measured on the populations at its start.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub exploitability: Option<f64>,
    pub pe: Option<f64>,
    pub oracle_objective: [Option<f64>; 2],
    pub population_sizes: [usize; 2],
    pub effective_diversity: Option<f64>,
    pub expected_cardinality: Option<f64>,
    /// Smallest distance of each new policy to its pre-addition population hull.
    pub hull_distance: [Option<f64>; 2],
    pub time_ms: Option<f64>,
}

pub const METRICS_HEADER: &str =
    "iter,exploitability,pe,oracle_obj_p1,oracle_obj_p2,pop_size_p1,pop_size_p2,eff_div,exp_card,time_ms";

fn field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl IterationLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            field(self.exploitability),
            field(self.pe),
            field(self.oracle_objective[0]),
            field(self.oracle_objective[1]),
            self.population_sizes[0],
            self.population_sizes[1],
            field(self.effective_diversity),
            field(self.expected_cardinality),
            field(self.time_ms),
        )
    }
}

pub fn metrics_csv(logs: &[IterationLog]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for log in logs {
        out.push_str(&log.csv_row());
        out.push('\n');
    }
    out
}

/// One oracle step of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub player: Player,
    /// Index of the new policy among those trained this iteration.
    pub run: usize,
    pub step: StepLog,
}

/// What an oracle sees when training one new policy.
pub struct TrainTask<'a, P> {
    pub player: Player,
    pub own: &'a [P],
    pub opponents: &'a [P],
    pub opponent_weights: &'a [f64],
    pub start: &'a P,
    /// Hull sample weights over `own`, fixed for the iteration.
    pub hull_weights: &'a [Vec<f64>],
}

pub struct Trained<P> {
    pub policy: P,
    pub objective: f64,
    pub hull_distance: Option<f64>,
    pub trace: Vec<StepLog>,
}

/// A game family PSRO can run on.
pub trait Domain: Sync {
    type Policy: Clone + PartialEq + Send + Sync;

    fn initial(&self, player: Player, kind: InitialPolicy, rng: &mut ChaCha8Rng) -> Self::Policy;

    /// Payoff to player one.
    fn payoff(&self, first: &Self::Policy, second: &Self::Policy) -> Result<f64, RunError>;

    /// Best response of `player` to the mixture of `members`, with its value
    /// in the player's own payoff.
    fn best_response(
        &self,
        player: Player,
        members: &[Self::Policy],
        weights: &[f64],
    ) -> Result<(Self::Policy, f64), RunError>;

    fn exploitability(&self, populations: [&[Self::Policy]; 2], weights: [&[f64]; 2]) -> Result<f64, RunError>;

    fn train(
        &self,
        task: &TrainTask<'_, Self::Policy>,
        cfg: &OracleConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Trained<Self::Policy>, OracleError>;

    fn policy_text(&self, policy: &Self::Policy) -> String;

    fn parse_policy(&self, player: Player, text: &str) -> Result<Self::Policy, String>;
}

/// Population exploitability through two restricted double-oracle solves.
pub fn domain_population_exploitability<D: Domain>(
    domain: &D,
    populations: [&[D::Policy]; 2],
    eps: f64,
) -> Result<f64, RunError> {
    let [first, second] = populations;
    let one = restricted_double_oracle(
        second.len(),
        |p: &D::Policy, k| domain.payoff(p, &second[k]),
        |w| domain.best_response(Player::One, second, w),
        eps,
    )?;
    let two = restricted_double_oracle(
        first.len(),
        |p: &D::Policy, k| domain.payoff(&first[k], p).map(|u| -u),
        |w| domain.best_response(Player::Two, first, w),
        eps,
    )?;
    Ok(0.5 * (one.value + two.value))
}

pub struct TreeDomain {
    pub game: GameTree,
}

impl Domain for TreeDomain {
    type Policy = BehavioralPolicy;

    fn initial(&self, player: Player, kind: InitialPolicy, rng: &mut ChaCha8Rng) -> BehavioralPolicy {
        match kind {
            InitialPolicy::Uniform => BehavioralPolicy::uniform(&self.game, player),
            InitialPolicy::Random => BehavioralPolicy::random(&self.game, player, rng),
        }
    }

    fn payoff(&self, first: &BehavioralPolicy, second: &BehavioralPolicy) -> Result<f64, RunError> {
        Ok(expected_utility(&self.game, first, second)?)
    }

    fn best_response(
        &self,
        player: Player,
        members: &[BehavioralPolicy],
        weights: &[f64],
    ) -> Result<(BehavioralPolicy, f64), RunError> {
        let mix = mix_members(&self.game, members, weights);
        Ok(best_response(&self.game, &mix, player)?)
    }

    fn exploitability(&self, populations: [&[BehavioralPolicy]; 2], weights: [&[f64]; 2]) -> Result<f64, RunError> {
        let first = mix_members(&self.game, populations[0], weights[0]);
        let second = mix_members(&self.game, populations[1], weights[1]);
        Ok(exploitability(&self.game, &first, &second)?)
    }

    fn train(
        &self,
        task: &TrainTask<'_, BehavioralPolicy>,
        cfg: &OracleConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Trained<BehavioralPolicy>, OracleError> {
        let game = &self.game;
        let opponent = mix_members(game, task.opponents, task.opponent_weights);
        if cfg.mode == OracleMode::BestResponse {
            let (policy, value) = best_response(game, &opponent, task.player)?;
            return Ok(Trained {
                policy,
                objective: value,
                hull_distance: None,
                trace: Vec::new(),
            });
        }
        let hull: Vec<BehavioralPolicy> = if cfg.lambda > 0.0 {
            task.hull_weights
                .iter()
                .map(|w| mix_members(game, task.own, w))
                .collect()
        } else {
            vec![task.start.clone()]
        };
        let weighting = blend_with_uniform(&opponent, cfg.weighting_epsilon);
        let problem = OracleProblem {
            game,
            player: task.player,
            opponent: &opponent,
            weighting: &weighting,
            hull: &hull,
        };
        let outcome = match cfg.mode {
            OracleMode::ExactGradient => psd_oracle_exact(&problem, task.start, cfg)?,
            _ => psd_oracle_reinforce(&problem, task.start, cfg, rng)?,
        };
        let hull_distance = if cfg.lambda == 0.0 {
            None
        } else if game.infostates(task.player).len() == 1 {
            let members: Vec<Vec<f64>> = task.own.iter().map(|m| m.probs(0).to_vec()).collect();
            Some(single_state_hull_distance(outcome.policy.probs(0), &members).0)
        } else {
            Some(outcome.objective.distance)
        };
        Ok(Trained {
            policy: outcome.policy,
            objective: outcome.objective.value,
            hull_distance,
            trace: outcome.trace,
        })
    }

    fn policy_text(&self, policy: &BehavioralPolicy) -> String {
        policy.to_text(&self.game)
    }

    fn parse_policy(&self, player: Player, text: &str) -> Result<BehavioralPolicy, String> {
        let policy = BehavioralPolicy::parse(&self.game, text).map_err(|e| e.to_string())?;
        if policy.owner() != player {
            return Err(format!("policy belongs to {}, expected {player}", policy.owner()));
        }
        Ok(policy)
    }
}

pub struct FunctionalDomain {
    pub game: FunctionalGame2D,
}

impl Domain for FunctionalDomain {
    type Policy = Point;

    fn initial(&self, _player: Player, kind: InitialPolicy, rng: &mut ChaCha8Rng) -> Point {
        match kind {
            InitialPolicy::Random => loop {
                let b = self.game.bound();
                let p = [rng.random_range(-b..b), rng.random_range(-b..b)];
                if p[0].hypot(p[1]) <= b {
                    return self.game.project(p);
                }
            },
            InitialPolicy::Uniform => {
                let (base, scale) = match &self.game {
                    FunctionalGame2D::Mixture7(m) => (m.centers()[0], 0.1 * m.sigma()),
                    FunctionalGame2D::Disc => ([0.0, 0.0], 0.01),
                };
                let noise = Normal::new(0.0, scale).expect("positive scale");
                self.game
                    .project([base[0] + noise.sample(rng), base[1] + noise.sample(rng)])
            }
        }
    }

    fn payoff(&self, first: &Point, second: &Point) -> Result<f64, RunError> {
        Ok(self.game.payoff(*first, *second)?)
    }

    fn best_response(&self, _player: Player, members: &[Point], weights: &[f64]) -> Result<(Point, f64), RunError> {
        // payoffs are antisymmetric, so both seats share one response problem
        Ok(self.game.best_response(&self.game.summarize(members, weights)))
    }

    fn exploitability(&self, populations: [&[Point]; 2], weights: [&[f64]; 2]) -> Result<f64, RunError> {
        let (_, v1) = self.best_response(Player::One, populations[1], weights[1])?;
        let (_, v2) = self.best_response(Player::Two, populations[0], weights[0])?;
        Ok(0.5 * (v1 + v2))
    }

    fn train(
        &self,
        task: &TrainTask<'_, Point>,
        cfg: &OracleConfig,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Trained<Point>, OracleError> {
        let summary = self.game.summarize(task.opponents, task.opponent_weights);
        if cfg.mode == OracleMode::BestResponse {
            let (policy, value) = self.game.best_response(&summary);
            return Ok(Trained {
                policy,
                objective: value,
                hull_distance: None,
                trace: Vec::new(),
            });
        }
        let hull: Vec<HullReference> = if cfg.lambda > 0.0 {
            task.hull_weights
                .iter()
                .map(|w| functional_reference(&self.game, task.own, w))
                .collect()
        } else {
            Vec::new()
        };
        let (policy, objective) = point_oracle(&self.game, *task.start, &summary, &hull, cfg)?;
        let hull_distance = (cfg.lambda > 0.0).then(|| self.dense_hull_distance(policy, task.own));
        Ok(Trained {
            policy,
            objective,
            hull_distance,
            trace: Vec::new(),
        })
    }

    fn policy_text(&self, p: &Point) -> String {
        format!("{:?} {:?}\n", p[0], p[1])
    }

    fn parse_policy(&self, _player: Player, text: &str) -> Result<Point, String> {
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<Result<_, _>>()?;
        match values[..] {
            [x, y] if x.is_finite() && y.is_finite() => Ok([x, y]),
            _ => Err(format!("expected two finite coordinates, got {} values", values.len())),
        }
    }
}

impl FunctionalDomain {
    /// Distance from `p` to the full hull of `members`, solved densely.
    pub fn dense_hull_distance(&self, p: Point, members: &[Point]) -> f64 {
        match &self.game {
            FunctionalGame2D::Mixture7(m) => {
                let rows: Vec<Vec<f64>> = members.iter().map(|q| m.hump_distribution(*q).to_vec()).collect();
                single_state_hull_distance(&m.hump_distribution(p), &rows).0
            }
            FunctionalGame2D::Disc => {
                let rows: Vec<Vec<f64>> = members.iter().map(|q| q.to_vec()).collect();
                let projection = hull_projection(&rows, &p).expect("matching dimensions");
                let reference = functional_reference(&self.game, members, &projection.weights);
                functional_distance(&self.game, p, &reference)
            }
        }
    }
}

/// Independent random stream for each `(seed, stream)` pair.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn iteration_rng(seed: u64, iteration: usize, player: Player) -> ChaCha8Rng {
    stream_rng(seed, 2 + 2 * iteration as u64 + player.index() as u64)
}

/// Result of a run with the populations and final meta-game.
pub struct RunOutcome<P> {
    pub populations: [Vec<P>; 2],
    pub meta: MetaGame,
    /// Meta-strategies of the final populations.
    pub meta_strategies: [Vec<f64>; 2],
    pub logs: Vec<IterationLog>,
    pub trace: Vec<TraceRow>,
    pub final_exploitability: Option<f64>,
    pub final_pe: Option<f64>,
}

/// A run aborted by an oracle failure, with everything logged before it.
pub struct Aborted<P> {
    pub error: RunError,
    pub partial: RunOutcome<P>,
}

struct Planned<P> {
    start: P,
    opponent_weights: Vec<f64>,
}

/// Policies to train this iteration for one player.
fn plan<P: Clone>(
    variant: Variant,
    player: Player,
    own: &[P],
    meta: &MetaGame,
    strategies: [&[f64]; 2],
) -> Vec<Planned<P>> {
    let me = player.index();
    let (mine, theirs) = (strategies[me], strategies[1 - me]);
    match variant {
        Variant::Psro | Variant::PsdPsro => vec![Planned {
            start: own[own.len() - 1].clone(),
            opponent_weights: theirs.to_vec(),
        }],
        Variant::PsroRn => {
            let m: Vec<Vec<f64>> = match player {
                Player::One => meta.payoffs().to_vec(),
                Player::Two => (0..meta.num_cols())
                    .map(|j| meta.payoffs().iter().map(|row| -row[j]).collect())
                    .collect(),
            };
            (0..own.len())
                .filter(|&k| mine[k] > 0.0)
                .map(|k| Planned {
                    start: own[k].clone(),
                    opponent_weights: rectified_weights(&m, mine, theirs, k).expect("supported member"),
                })
                .collect()
        }
    }
}

/// Runs PSRO on `domain` under `cfg`.
pub fn run_domain<D: Domain>(domain: &D, cfg: &RunConfig) -> Result<RunOutcome<D::Policy>, Box<Aborted<D::Policy>>> {
    let populations = [
        vec![domain.initial(Player::One, cfg.initial, &mut stream_rng(cfg.seed, 0))],
        vec![domain.initial(Player::Two, cfg.initial, &mut stream_rng(cfg.seed, 1))],
    ];
    let mut outcome = RunOutcome {
        populations,
        meta: MetaGame::from_matrix(Vec::new()),
        meta_strategies: [Vec::new(), Vec::new()],
        logs: Vec::new(),
        trace: Vec::new(),
        final_exploitability: None,
        final_pe: None,
    };
    match drive(domain, cfg, &mut outcome) {
        Ok(()) => Ok(outcome),
        Err(error) => Err(Box::new(Aborted { error, partial: outcome })),
    }
}

fn extend_meta<D: Domain>(domain: &D, meta: &mut MetaGame, populations: &[Vec<D::Policy>; 2]) -> Result<(), RunError> {
    meta.extend_with(populations[0].len(), populations[1].len(), |j, k| {
        domain.payoff(&populations[0][j], &populations[1][k])
    })?;
    Ok(())
}

fn drive<D: Domain>(domain: &D, cfg: &RunConfig, out: &mut RunOutcome<D::Policy>) -> Result<(), RunError> {
    cfg.validate()?;
    extend_meta(domain, &mut out.meta, &out.populations)?;
    for t in 0..cfg.iterations {
        let clock = Instant::now();
        let ne = out.meta.solve().clone();
        let pops = [&out.populations[0][..], &out.populations[1][..]];
        let weights = [&ne.row[..], &ne.col[..]];
        let exploitability = if cfg.metrics.exploitability {
            Some(domain.exploitability(pops, weights)?)
        } else {
            None
        };
        let pe = if cfg.metrics.pe_every > 0 && t % cfg.metrics.pe_every == 0 {
            Some(domain_population_exploitability(domain, pops, cfg.pe_epsilon)?)
        } else {
            None
        };
        let (eff_div, exp_card) = if cfg.metrics.diversity {
            (Some(effective_diversity(&mut out.meta)), Some(expected_cardinality(&out.meta)))
        } else {
            (None, None)
        };

        let train_player = |player: Player| -> Result<Vec<Trained<D::Policy>>, OracleError> {
            let me = player.index();
            let own = pops[me];
            let mut rng = iteration_rng(cfg.seed, t, player);
            let hull_weights = if cfg.oracle.lambda > 0.0 {
                sample_hull_weights(own.len(), cfg.oracle.hull_count(own.len()), &mut rng)
            } else {
                Vec::new()
            };
            plan(cfg.variant, player, own, &out.meta, weights)
                .iter()
                .map(|p| {
                    let task = TrainTask {
                        player,
                        own,
                        opponents: pops[1 - me],
                        opponent_weights: &p.opponent_weights,
                        start: &p.start,
                        hull_weights: &hull_weights,
                    };
                    domain.train(&task, &cfg.oracle, &mut rng)
                })
                .collect()
        };
        let results = if cfg.deterministic {
            [train_player(Player::One), train_player(Player::Two)]
        } else {
            std::thread::scope(|scope| {
                let second = scope.spawn(|| train_player(Player::Two));
                let first = train_player(Player::One);
                [first, second.join().expect("oracle thread panicked")]
            })
        };

        let mut log = IterationLog {
            iteration: t,
            exploitability,
            pe,
            oracle_objective: [None, None],
            population_sizes: [pops[0].len(), pops[1].len()],
            effective_diversity: eff_div,
            expected_cardinality: exp_card,
            hull_distance: [None, None],
            time_ms: None,
        };
        let mut new_policies: [Vec<D::Policy>; 2] = [Vec::new(), Vec::new()];
        for (i, result) in results.into_iter().enumerate() {
            let trained = result.map_err(|source| RunError::Oracle { iteration: t, source })?;
            let n = trained.len() as f64;
            log.oracle_objective[i] = Some(trained.iter().map(|r| r.objective).sum::<f64>() / n);
            log.hull_distance[i] = trained
                .iter()
                .filter_map(|r| r.hull_distance)
                .reduce(f64::min);
            for (run, r) in trained.into_iter().enumerate() {
                for step in r.trace {
                    out.trace.push(TraceRow {
                        iteration: t,
                        player: Player::BOTH[i],
                        run,
                        step,
                    });
                }
                new_policies[i].push(r.policy);
            }
        }
        for (i, added) in new_policies.into_iter().enumerate() {
            out.populations[i].extend(added);
        }
        extend_meta(domain, &mut out.meta, &out.populations)?;
        if !cfg.deterministic {
            log.time_ms = Some(clock.elapsed().as_secs_f64() * 1e3);
        }
        out.logs.push(log);
    }
    let ne = out.meta.solve().clone();
    let pops = [&out.populations[0][..], &out.populations[1][..]];
    if cfg.metrics.exploitability {
        out.final_exploitability = Some(domain.exploitability(pops, [&ne.row, &ne.col])?);
    }
    if cfg.metrics.pe_every > 0 {
        out.final_pe = Some(domain_population_exploitability(domain, pops, cfg.pe_epsilon)?);
    }
    out.meta_strategies = [ne.row, ne.col];
    Ok(())
}

/// Game-independent view of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub logs: Vec<IterationLog>,
    pub population_sizes: [usize; 2],
    pub meta_strategies: [Vec<f64>; 2],
    pub final_exploitability: Option<f64>,
    pub final_pe: Option<f64>,
}

impl<P> RunOutcome<P> {
    fn summary(&self) -> RunSummary {
        RunSummary {
            logs: self.logs.clone(),
            population_sizes: [self.populations[0].len(), self.populations[1].len()],
            meta_strategies: self.meta_strategies.clone(),
            final_exploitability: self.final_exploitability,
            final_pe: self.final_pe,
        }
    }
}

fn run_and_persist<D: Domain>(domain: &D, cfg: &RunConfig) -> Result<RunSummary, RunError> {
    match run_domain(domain, cfg) {
        Ok(mut outcome) => {
            if let Some(dir) = &cfg.out {
                write_run_dir(dir, cfg, domain, &mut outcome)?;
            }
            Ok(outcome.summary())
        }
        Err(aborted) => {
            let Aborted { error, mut partial } = *aborted;
            if let Some(dir) = &cfg.out {
                write_run_dir(dir, cfg, domain, &mut partial)?;
            }
            Err(error)
        }
    }
}

/// Builds the configured game, runs the configured variant and writes the
/// run directory when `cfg.out` is set. An aborted run still persists its
/// partial log.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    match cfg.game.build()? {
        Game::Tree(game) => run_and_persist(&TreeDomain { game }, cfg),
        Game::Functional(game) => run_and_persist(&FunctionalDomain { game }, cfg),
    }
}

/// [`run`] restricted to the rectified variant.
pub fn run_rectified(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    if cfg.variant != Variant::PsroRn {
        return Err(RunError::Config("run_rectified needs variant psro-rn".into()));
    }
    run(cfg)
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|e| RunError::io(path, e))
}

fn policy_path(dir: &Path, player: Player, index: usize) -> PathBuf {
    dir.join("policies").join(format!("{player}_{index:04}.txt"))
}

fn member_ids(player: Player, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{player}_{k:04}")).collect()
}

/// Writes `config.json`, `metrics.csv`, `oracle.csv`, `hull.csv`,
/// `policies/`, `meta.txt` (payoff table) and `meta_ne.txt` (meta-strategies
/// by member id and the game value).
pub fn write_run_dir<D: Domain>(
    dir: &Path,
    cfg: &RunConfig,
    domain: &D,
    outcome: &mut RunOutcome<D::Policy>,
) -> Result<(), RunError> {
    let policies = dir.join("policies");
    fs::create_dir_all(&policies).map_err(|e| RunError::io(&policies, e))?;
    let config = serde_json::to_string_pretty(cfg).expect("config serializes");
    write_file(&dir.join("config.json"), &(config + "\n"))?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(&outcome.logs))?;

    let mut oracle = String::from("iter,player,run,step,objective,distance,grad_norm\n");
    for row in &outcome.trace {
        let _ = writeln!(
            oracle,
            "{},{},{},{},{},{},{}",
            row.iteration, row.player, row.run, row.step.step, row.step.objective, row.step.distance, row.step.grad_norm
        );
    }
    write_file(&dir.join("oracle.csv"), &oracle)?;
    let mut hull = String::from("iter,hull_dist_p1,hull_dist_p2\n");
    for log in &outcome.logs {
        let _ = writeln!(hull, "{},{},{}", log.iteration, field(log.hull_distance[0]), field(log.hull_distance[1]));
    }
    write_file(&dir.join("hull.csv"), &hull)?;

    for player in Player::BOTH {
        for (k, p) in outcome.populations[player.index()].iter().enumerate() {
            write_file(&policy_path(dir, player, k), &domain.policy_text(p))?;
        }
    }
    if outcome.meta.num_rows() > 0 {
        write_file(&dir.join("meta.txt"), &outcome.meta.to_text())?;
        let rows = member_ids(Player::One, outcome.populations[0].len());
        let cols = member_ids(Player::Two, outcome.populations[1].len());
        write_file(&dir.join("meta_ne.txt"), &outcome.meta.sidecar_text(&rows, &cols))?;
    }
    Ok(())
}

/// Metrics recomputed from a persisted run, one per metrics row.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub iteration: usize,
    pub population_sizes: [usize; 2],
    pub exploitability: f64,
    pub pe: f64,
}

pub const EVAL_HEADER: &str = "iter,pop_size_p1,pop_size_p2,exploitability,pe";

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration, r.population_sizes[0], r.population_sizes[1], r.exploitability, r.pe
        );
    }
    out
}

fn corrupt(path: &Path, message: impl Into<String>) -> RunError {
    RunError::Corrupt {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(|e| RunError::io(path, e))
}

/// Population sizes listed in a metrics file, one pair per row.
fn read_population_sizes(path: &Path) -> Result<Vec<[usize; 2]>, RunError> {
    let text = read_file(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(corrupt(path, "unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            let parse = |c: usize| {
                cols.get(c)
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(|| corrupt(path, format!("line {}: bad population size", i + 2)))
            };
            if cols.len() != 10 {
                return Err(corrupt(path, format!("line {}: expected 10 fields", i + 2)));
            }
            Ok([parse(5)?, parse(6)?])
        })
        .collect()
}

fn load_populations<D: Domain>(dir: &Path, domain: &D, sizes: [usize; 2]) -> Result<[Vec<D::Policy>; 2], RunError> {
    let mut pops: [Vec<D::Policy>; 2] = [Vec::new(), Vec::new()];
    for player in Player::BOTH {
        for k in 0..sizes[player.index()] {
            let path = policy_path(dir, player, k);
            let text = read_file(&path)?;
            let policy = domain
                .parse_policy(player, &text)
                .map_err(|message| corrupt(&path, message))?;
            pops[player.index()].push(policy);
        }
    }
    Ok(pops)
}

fn evaluate_with<D: Domain>(dir: &Path, domain: &D, sizes: &[[usize; 2]], eps: f64) -> Result<Vec<EvalRow>, RunError> {
    let largest = sizes
        .iter()
        .fold([0, 0], |acc, s| [acc[0].max(s[0]), acc[1].max(s[1])]);
    let pops = load_populations(dir, domain, largest)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for (t, &[n1, n2]) in sizes.iter().enumerate() {
        let prefix = [&pops[0][..n1], &pops[1][..n2]];
        let mut meta = MetaGame::fill_with(n1, n2, |j, k| domain.payoff(&prefix[0][j], &prefix[1][k]))?;
        let ne = meta.solve().clone();
        rows.push(EvalRow {
            iteration: t,
            population_sizes: [n1, n2],
            exploitability: domain.exploitability(prefix, [&ne.row, &ne.col])?,
            pe: domain_population_exploitability(domain, prefix, eps)?,
        });
    }
    Ok(rows)
}

/// Recomputes meta-NE exploitability and population exploitability for
/// every population prefix listed in a run directory's metrics.
pub fn evaluate_run(dir: &Path, eps: f64) -> Result<Vec<EvalRow>, RunError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(RunError::Config(format!("pe epsilon must be positive, got {eps}")));
    }
    let config_path = dir.join("config.json");
    let cfg: RunConfig =
        serde_json::from_str(&read_file(&config_path)?).map_err(|e| corrupt(&config_path, e.to_string()))?;
    let sizes = read_population_sizes(&dir.join("metrics.csv"))?;
    match cfg.game.build()? {
        Game::Tree(game) => evaluate_with(dir, &TreeDomain { game }, &sizes, eps),
        Game::Functional(game) => evaluate_with(dir, &FunctionalDomain { game }, &sizes, eps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn game_spec_round_trips() {
        for s in ["kuhn", "leduc", "rps", "goofspiel-5", "goofspiel-4-shuffled-score", "matrix:a/b.txt", "mixture7", "disc"] {
            let spec: GameSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("goofspiel-x".parse::<GameSpec>().is_err());
        assert!("chess".parse::<GameSpec>().is_err());
    }

    #[test]
    fn config_json_round_trips() {
        let cfg = RunConfig {
            game: "goofspiel-4".parse().unwrap(),
            variant: Variant::PsdPsro,
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rps_from_rock_spans_all_actions() {
        let game = rock_paper_scissors().to_tree();
        let domain = TreeDomain { game };
        let rock = |p| BehavioralPolicy::pure(&domain.game, p, &[0]);
        let cfg = RunConfig {
            game: GameSpec::Rps,
            iterations: 3,
            deterministic: true,
            ..RunConfig::default()
        };
        // seed the populations with Rock by running from a pure start
        let mut outcome = RunOutcome {
            populations: [vec![rock(Player::One)], vec![rock(Player::Two)]],
            meta: MetaGame::from_matrix(Vec::new()),
            meta_strategies: [Vec::new(), Vec::new()],
            logs: Vec::new(),
            trace: Vec::new(),
            final_exploitability: None,
            final_pe: None,
        };
        drive(&domain, &cfg, &mut outcome).map_err(|e| e.to_string()).unwrap();
        assert!(outcome.final_exploitability.unwrap().abs() < 1e-8);
        let mut played: Vec<usize> = outcome.populations[0]
            .iter()
            .map(|p| p.probs(0).iter().position(|&x| x == 1.0).unwrap())
            .collect();
        played.sort();
        played.dedup();
        assert_eq!(played, vec![0, 1, 2]);
    }

    #[test]
    fn rectified_support_of_one_adds_one_policy() {
        let meta = MetaGame::from_matrix(vec![vec![1.0, 2.0], vec![0.0, 1.0]]);
        let planned = plan(Variant::PsroRn, Player::One, &[0, 1], &meta, [&[1.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(planned.len(), 1);
        assert_eq!(planned[0].start, 0);
    }
}
