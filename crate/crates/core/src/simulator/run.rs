use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::config::{checkpoints, AgentMode, RunConfig};
use super::ledger::RegretLedger;
use super::trace::{TraceRow, TRACE_SCHEMA};
use crate::agents::{
    run_lockstep_round, AgentMemory, Algorithm, Arena, Blackboard, LockstepRound, ProposalKind,
    RankingSource,
};
use crate::change_detection::{run_cd_lockstep_round, CdConfig, CusumState};
use crate::error::{Error, Result};
use crate::gale_shapley::agent_optimal_matching;
use crate::market::{
    generate_features, order_by_mean, resolve_collisions, true_mean, true_top_n, validate_scenario,
    ArmPreferences, EnvSchedule, FeatureSet, MarketInstance, MatchOutcome, Matching, NoiseModel,
    RoundContext,
};
use crate::ranking::TopNRanking;

const STREAM_NOISE: u64 = 1;
const STREAM_PERTURBATION: u64 = 2;
const STREAM_SCHEDULE: u64 = 3;

/// Independent stream `stream` of replication `replication` under root `seed`.
pub fn stream_rng(seed: u64, replication: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replication.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundClass {
    Explore,
    GsConvergence,
    Violation,
    Optimal,
}

impl RoundClass {
    pub fn name(self) -> &'static str {
        match self {
            RoundClass::Explore => "explore",
            RoundClass::GsConvergence => "gs-convergence",
            RoundClass::Violation => "violation",
            RoundClass::Optimal => "optimal",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub explore: u64,
    pub gs_convergence: u64,
    pub violation: u64,
    pub optimal: u64,
}

impl ClassCounts {
    fn add(&mut self, c: RoundClass) {
        match c {
            RoundClass::Explore => self.explore += 1,
            RoundClass::GsConvergence => self.gs_convergence += 1,
            RoundClass::Violation => self.violation += 1,
            RoundClass::Optimal => self.optimal += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.explore + self.gs_convergence + self.violation + self.optimal
    }
}

#[derive(Clone, Debug)]
pub struct ReplicationResult {
    pub replication: usize,
    pub checkpoints: Vec<u64>,
    /// `[checkpoint][agent]` cumulative clipped regret.
    pub curve: Vec<Vec<f64>>,
    pub ledger: RegretLedger,
    pub classes: ClassCounts,
    /// Per agent: exploration rounds, forced rounds included.
    pub explore_rounds: Vec<u64>,
    pub forced_rounds: u64,
    /// Per agent: GS / exploit / idle rounds.
    pub gs_rounds: Vec<u64>,
    pub confidence_violations: u64,
    pub spectral_violations: u64,
    /// min over rounds and agents of λ_min(V) − κ⌊𝒯/d⌋.
    pub min_spectral_margin: f64,
    pub pointer_overflows: Vec<u64>,
    /// (start, length) of each triggered exploration phase.
    pub phases: Vec<(u64, u64)>,
    /// Global rounds at which every agent restarted.
    pub restarts: Vec<u64>,
    pub restarts_synchronized: bool,
    pub trace: Vec<TraceRow>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub scenario: String,
    pub config: RunConfig,
    pub cd: Option<CdConfig>,
    pub replications: Vec<ReplicationResult>,
}

impl RunResult {
    pub fn trace_rows(&self) -> impl Iterator<Item = &TraceRow> {
        self.replications.iter().flat_map(|r| r.trace.iter())
    }
}

struct RoundArena<'a> {
    fs: FeatureSet,
    prefs: &'a ArmPreferences,
    means: &'a [Vec<f64>],
    noise: &'a [f64],
}

impl Arena for RoundArena<'_> {
    fn features(&self) -> &FeatureSet {
        &self.fs
    }

    fn resolve(&mut self, proposals: &[Option<usize>]) -> MatchOutcome {
        resolve_collisions(proposals, self.prefs, self.means, self.noise)
    }
}

/// Ground truth derived once per run: per (window, env) optimal matchings and rankings.
struct Oracle {
    optimal: Vec<Vec<Matching>>,
    tops: Vec<Vec<Vec<TopNRanking>>>,
}

impl Oracle {
    fn new(inst: &MarketInstance, prefs: &[ArmPreferences]) -> Self {
        let mut optimal = Vec::new();
        let mut tops = Vec::new();
        for w in 0..inst.n_windows() {
            let theta = inst.theta_for_window(w);
            let mut opt_w = Vec::new();
            let mut tops_w = Vec::new();
            for (e, env) in inst.environments.iter().enumerate() {
                let rankings: Vec<Vec<usize>> = (0..inst.n_agents)
                    .map(|i| {
                        let means: Vec<f64> = env.base_features[i]
                            .iter()
                            .map(|x| true_mean(&theta[i], x))
                            .collect();
                        order_by_mean(&means)
                    })
                    .collect();
                opt_w.push(agent_optimal_matching(&rankings, &prefs[e]));
                tops_w.push(
                    (0..inst.n_agents)
                        .map(|i| true_top_n(inst, e, w, i))
                        .collect(),
                );
            }
            optimal.push(opt_w);
            tops.push(tops_w);
        }
        Self { optimal, tops }
    }
}

/// Agent-optimal matching per stationary window and environment, `[window][env]`.
pub fn optimal_matchings(inst: &MarketInstance) -> Result<Vec<Vec<Matching>>> {
    let prefs = inst.arm_preferences()?;
    Ok(Oracle::new(inst, &prefs).optimal)
}

fn draw_noise(model: &NoiseModel, rng: &mut ChaCha8Rng) -> f64 {
    match *model {
        NoiseModel::Gaussian { std_dev } => {
            let z: f64 = StandardNormal.sample(rng);
            std_dev * z
        }
        NoiseModel::Uniform { half_width } => rng.random_range(-1.0..=1.0) * half_width,
    }
}

/// Simulates one replication.
pub fn run_replication(
    inst: &MarketInstance,
    cfg: &RunConfig,
    cd: Option<&CdConfig>,
    replication: usize,
) -> Result<ReplicationResult> {
    let n = inst.n_agents;
    let d = inst.dim;
    let prefs = inst.arm_preferences()?;
    let oracle = Oracle::new(inst, &prefs);
    let rep = replication as u64;
    let mut noise_rng = stream_rng(cfg.seed, rep, STREAM_NOISE);
    let mut pert_rng = stream_rng(cfg.seed, rep, STREAM_PERTURBATION);
    let mut sched_rng = stream_rng(cfg.seed, rep, STREAM_SCHEDULE);

    let variant = cfg.algorithm;
    let mut agents: Vec<AgentMemory> = (0..n)
        .map(|i| AgentMemory::new(i, variant, n, inst.n_arms, d, inst.n_envs()))
        .collect();
    let mut cusums: Vec<CusumState> = match cd {
        Some(c) => (0..n).map(|_| CusumState::new(c, d)).collect(),
        None => Vec::new(),
    };
    let mut board = Blackboard::new();
    if cfg.mode == AgentMode::ExploreOnly {
        board.tau_end = u64::MAX;
    }

    let cps = checkpoints(cfg.horizon);
    let mut next_cp = 0;
    let mut res = ReplicationResult {
        replication,
        checkpoints: cps.clone(),
        curve: Vec::with_capacity(cps.len()),
        ledger: RegretLedger::new(n),
        classes: ClassCounts::default(),
        explore_rounds: vec![0; n],
        forced_rounds: 0,
        gs_rounds: vec![0; n],
        confidence_violations: 0,
        spectral_violations: 0,
        min_spectral_margin: f64::INFINITY,
        pointer_overflows: vec![0; n],
        phases: Vec::new(),
        restarts: Vec::new(),
        restarts_synchronized: true,
        trace: Vec::new(),
    };
    let mut occurrences = vec![0u64; inst.n_envs()];
    let mut noise = vec![0.0; n];

    for t in 1..=cfg.horizon {
        let env = match &inst.schedule {
            EnvSchedule::RoundRobin => ((t - 1) % inst.n_envs() as u64) as usize,
            EnvSchedule::Iid => sched_rng.random_range(0..inst.n_envs()),
            EnvSchedule::Sequence { envs } => envs[((t - 1) % envs.len() as u64) as usize],
        };
        occurrences[env] += 1;
        let window = inst.window_at(t);
        let ctx = RoundContext {
            t,
            env,
            occurrence: occurrences[env],
            window,
        };
        let theta = inst.theta_for_window(window);
        let fs = generate_features(inst, &ctx, &mut pert_rng);
        let means = fs.means(theta);
        for z in noise.iter_mut() {
            *z = draw_noise(&inst.noise, &mut noise_rng);
        }
        let optimal = &oracle.optimal[window][env];
        let truth = &oracle.tops[window][env];
        let mut arena = RoundArena {
            fs,
            prefs: &prefs[env],
            means: &means,
            noise: &noise,
        };

        let source = match cfg.mode {
            AgentMode::KnownRankings => RankingSource::Known(truth),
            _ => RankingSource::Learned,
        };
        let (round, forced, restart, stats): (Option<LockstepRound>, bool, bool, Vec<(f64, f64)>) =
            match (cfg.mode, cd) {
                (AgentMode::Oracle, _) => (None, false, false, Vec::new()),
                (_, Some(c)) => {
                    let r = run_cd_lockstep_round(
                        &mut agents,
                        &mut cusums,
                        &mut board,
                        &mut arena,
                        c,
                        source,
                        t,
                    )?;
                    (Some(r.round), r.forced, r.restart, r.statistics)
                }
                (_, None) => {
                    let r = run_lockstep_round(&mut agents, &mut board, &mut arena, source, t)?;
                    (Some(r), false, false, Vec::new())
                }
            };
        let (outcome, kinds, proposed, exploring) = match &round {
            Some(r) => (
                r.outcome.clone(),
                r.proposals.iter().map(|p| p.kind).collect::<Vec<_>>(),
                r.proposals.iter().map(|p| p.arm).collect::<Vec<_>>(),
                r.exploring || forced,
            ),
            None => {
                let arms = optimal.0.clone();
                let out = arena.resolve(&arms);
                (out, vec![ProposalKind::Gs; n], arms, false)
            }
        };
        if let Some(r) = &round {
            if r.triggered {
                res.phases.push((t, board.tau_end - r.t + 1));
            }
        }
        if restart {
            res.restarts.push(t);
            let fresh = agents
                .iter()
                .all(|a| a.entries().is_empty() && a.design.observations() == 0)
                && cusums
                    .iter()
                    .all(|c| c.statistic() == 0.0 && c.reference().observations() == 0)
                && board.tau_end == 0
                && board.phase_index == 0
                && board.explore_count == 0
                && board.tau_hat == t;
            res.restarts_synchronized &= fresh;
        }

        let class = if exploring {
            RoundClass::Explore
        } else if outcome.matching == *optimal {
            RoundClass::Optimal
        } else if agents
            .iter()
            .all(|a| a.current_entry().map(|e| &e.ranking) == Some(&truth[a.agent]))
        {
            RoundClass::GsConvergence
        } else {
            RoundClass::Violation
        };
        res.classes.add(class);
        let increments = res.ledger.record(optimal, &outcome.matching, &means);

        // Estimates only describe θ once all of their data postdate the last change.
        let window_start = if window == 0 {
            1
        } else {
            inst.change_points[window - 1].round
        };
        let learning = round.is_some()
            && matches!(source, RankingSource::Learned)
            && board.tau_hat + 1 >= window_start;
        let local_t = t - board.tau_hat.min(t - 1);
        for i in 0..n {
            let kind = kinds[i];
            match kind {
                ProposalKind::Explore => res.explore_rounds[i] += 1,
                ProposalKind::Forced => {
                    res.explore_rounds[i] += 1;
                    if i == 0 {
                        res.forced_rounds += 1;
                    }
                }
                ProposalKind::Gs | ProposalKind::Idle => res.gs_rounds[i] += 1,
            }
            let a = &agents[i];
            let violations = if learning && !forced {
                a.last_estimate()
                    .map_or(0, |e| e.violations(&theta[i], local_t))
            } else {
                0
            };
            res.confidence_violations += violations as u64;
            let lam = a.design.lambda_min();
            let floor = inst.kappa * (a.design.exploration_count() / d as u64) as f64;
            if lam < floor * (1.0 - 1e-9) - 1e-12 {
                res.spectral_violations += 1;
            }
            res.min_spectral_margin = res.min_spectral_margin.min(lam - floor);
            if cfg.trace {
                let phase = match kind {
                    ProposalKind::Explore => "explore",
                    ProposalKind::Forced => "forced",
                    ProposalKind::Idle => "idle",
                    ProposalKind::Gs if class == RoundClass::Optimal => "exploit",
                    ProposalKind::Gs => "gs",
                };
                let (sp, sm) = stats.get(i).copied().unwrap_or((0.0, 0.0));
                res.trace.push(TraceRow {
                    schema: TRACE_SCHEMA.to_string(),
                    replication,
                    t,
                    env,
                    window,
                    agent: i,
                    phase: phase.to_string(),
                    round_class: class.name().to_string(),
                    proposed_arm: proposed[i],
                    matched_arm: outcome.matching.arm_of(i),
                    reward: outcome.rewards[i],
                    regret: increments[i].0,
                    signed_regret: increments[i].1,
                    explore_count: a.design.exploration_count(),
                    board_flag: board.env_flag,
                    cd_flag: board.cd_flag,
                    lambda_min: lam,
                    lambda_floor: floor,
                    violations,
                    is_forced: forced,
                    cusum_plus: sp,
                    cusum_minus: sm,
                    restart,
                    tau_hat: board.tau_hat,
                });
            }
        }
        if next_cp < cps.len() && cps[next_cp] == t {
            res.curve.push(res.ledger.cumulative.clone());
            next_cp += 1;
        }
    }
    for (i, a) in agents.iter().enumerate() {
        res.pointer_overflows[i] = a.pointer_overflows();
    }
    Ok(res)
}

/// Validates (unless skipped) and runs every replication, in parallel, merged in order.
pub fn run(inst: &MarketInstance, cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    if !cfg.skip_validation {
        let report = validate_scenario(inst);
        if !report.passed {
            return Err(Error::ValidationFailed(report.to_string()));
        }
    } else {
        // Structural soundness is still required to simulate at all.
        let report = validate_scenario(inst);
        if report.violates(crate::market::Clause::Structure) {
            return Err(Error::InvalidScenario(report.to_string()));
        }
    }
    let cd = match cfg.algorithm {
        Algorithm::Cdetpgs => Some(cfg.cd_config(inst)?),
        _ => None,
    };
    let replications = (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(inst, cfg, cd.as_ref(), r))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        scenario: inst.name.clone(),
        config: cfg.clone(),
        cd,
        replications,
    })
}
