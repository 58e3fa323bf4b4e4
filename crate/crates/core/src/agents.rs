//! Per-agent ETPGS / IETP-GS state machines and the shared blackboard.
//!
//! A round runs in barriers: every agent recovers the environment and ANDs its
//! verdict into the board, the board decides once whether a new exploration phase
//! starts, agents propose, the market resolves, and agents observe.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{DesignState, Estimate};
use crate::market::{FeatureSet, MatchOutcome};
use crate::ranking::{
    build_partial_rank, match_environment, top_by_ucb, try_separate_top_n, TopNRanking,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Etpgs,
    Ietpgs,
    Cdetpgs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Etpgs => "etpgs",
            Algorithm::Ietpgs => "ietpgs",
            Algorithm::Cdetpgs => "cdetpgs",
        }
    }

    /// IETP-GS and its change-detection wrapper also accept partial-rank matches.
    pub fn uses_partial_rank(self) -> bool {
        !matches!(self, Algorithm::Etpgs)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "etpgs" => Ok(Algorithm::Etpgs),
            "ietpgs" => Ok(Algorithm::Ietpgs),
            "cdetpgs" => Ok(Algorithm::Cdetpgs),
            _ => Err(Error::UnknownAlgorithm(s.to_string())),
        }
    }
}

/// 0-based arm played in exploration step `s` (1-based) by `agent` (0-based).
pub fn round_robin_arm(agent: usize, s: u64, n_arms: usize) -> usize {
    ((agent as u64 + 1 + s) % n_arms as u64) as usize
}

/// Shared per-round flags and exploration-phase bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Blackboard {
    /// ℬ: AND of all agents' recovery verdicts this round.
    pub env_flag: bool,
    /// 𝒞𝒟: AND of all agents' "no change detected" verdicts this round.
    pub cd_flag: bool,
    pub tau_end: u64,
    pub phase_index: u32,
    /// Exploration rounds played since the last (re)start; indexes the round-robin.
    pub explore_count: u64,
    /// Global round of the last restart (0 before any).
    pub tau_hat: u64,
}

impl Default for Blackboard {
    fn default() -> Self {
        Self::new()
    }
}

impl Blackboard {
    pub fn new() -> Self {
        Self {
            env_flag: true,
            cd_flag: true,
            tau_end: 0,
            phase_index: 0,
            explore_count: 0,
            tau_hat: 0,
        }
    }

    pub fn reset_round(&mut self) {
        self.env_flag = true;
        self.cd_flag = true;
    }

    pub fn report_recovery(&mut self, ok: bool) {
        self.env_flag &= ok;
    }

    pub fn report_detection(&mut self, quiet: bool) {
        self.cd_flag &= quiet;
    }

    /// Starts a phase of length 2^l if some agent failed and no phase is running.
    pub fn trigger(&mut self, t: u64) -> bool {
        if !self.env_flag && t > self.tau_end {
            self.tau_end = t + (1u64 << self.phase_index) - 1;
            self.phase_index += 1;
            true
        } else {
            false
        }
    }

    pub fn is_exploring(&self, t: u64) -> bool {
        t <= self.tau_end
    }

    /// Index of the next exploration step (1-based).
    pub fn next_explore_step(&self) -> u64 {
        self.explore_count + 1
    }

    pub fn finish_round(&mut self, explored: bool) {
        if explored {
            self.explore_count += 1;
        }
    }

    /// Wipes phase state at a restart taking effect at global round `tau_hat`.
    pub fn restart(&mut self, tau_hat: u64) {
        *self = Self {
            tau_hat,
            ..Self::new()
        };
    }
}

/// One stored environment: its GS pointer (0-based) and top-N ranking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvEntry {
    pub key: usize,
    pub pointer: usize,
    pub ranking: TopNRanking,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoveryKind {
    /// Full top-N separation.
    Separated,
    /// Partial-rank match against a unique stored ranking.
    PartialMatch,
    Failed,
}

impl RecoveryKind {
    pub fn ok(self) -> bool {
        !matches!(self, RecoveryKind::Failed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalKind {
    Explore,
    Gs,
    /// Change-detection forced exploration (does not count toward 𝒯).
    Forced,
    /// No arm to propose (no identified environment outside a phase).
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub arm: Option<usize>,
    pub kind: ProposalKind,
    pub key: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct AgentMemory {
    pub agent: usize,
    pub variant: Algorithm,
    n_agents: usize,
    n_arms: usize,
    n_envs: usize,
    entries: Vec<EnvEntry>,
    pub design: DesignState,
    current: Option<usize>,
    last_estimate: Option<Estimate>,
    pointer_overflows: u64,
}

impl AgentMemory {
    pub fn new(
        agent: usize,
        variant: Algorithm,
        n_agents: usize,
        n_arms: usize,
        dim: usize,
        n_envs: usize,
    ) -> Self {
        Self {
            agent,
            variant,
            n_agents,
            n_arms,
            n_envs,
            entries: Vec::new(),
            design: DesignState::new(dim),
            current: None,
            last_estimate: None,
            pointer_overflows: 0,
        }
    }

    pub fn entries(&self) -> &[EnvEntry] {
        &self.entries
    }

    pub fn current_key(&self) -> Option<usize> {
        self.current
    }

    pub fn current_entry(&self) -> Option<&EnvEntry> {
        self.current.map(|k| &self.entries[k])
    }

    /// The estimate computed during the latest recovery, if the design was invertible.
    pub fn last_estimate(&self) -> Option<&Estimate> {
        self.last_estimate.as_ref()
    }

    pub fn pointer_overflows(&self) -> u64 {
        self.pointer_overflows
    }

    /// Forgets everything learned; used on change-detection restarts.
    pub fn reset(&mut self) {
        self.entries.clear();
        self.design = DesignState::new(self.design.dim());
        self.current = None;
        self.last_estimate = None;
    }

    fn lookup_or_insert(&mut self, sigma: TopNRanking) -> usize {
        if let Some(e) = self.entries.iter().find(|e| e.ranking == sigma) {
            return e.key;
        }
        let key = self.entries.len();
        self.entries.push(EnvEntry {
            key,
            pointer: 0,
            ranking: sigma,
        });
        key
    }

    /// Environment recovery from the agent's own estimates.
    pub fn recover(&mut self, features: &[&[f64]], t: u64) -> RecoveryKind {
        self.current = None;
        self.last_estimate = self.design.estimate().ok();
        let Some(est) = &self.last_estimate else {
            return RecoveryKind::Failed;
        };
        let bands = est.bands(features, t);
        if let Some(sigma) = try_separate_top_n(&bands, self.n_agents) {
            self.current = Some(self.lookup_or_insert(sigma));
            return RecoveryKind::Separated;
        }
        if self.variant.uses_partial_rank() && self.entries.len() == self.n_envs {
            let pr = build_partial_rank(&bands, &top_by_ucb(&bands, self.n_agents));
            let stored: Vec<(usize, &TopNRanking)> =
                self.entries.iter().map(|e| (e.key, &e.ranking)).collect();
            if let Some(key) = match_environment(&pr, &stored, self.n_envs) {
                self.current = Some(key);
                return RecoveryKind::PartialMatch;
            }
        }
        RecoveryKind::Failed
    }

    /// Recovery with the true top-N ranking handed in (rankings assumed learned).
    pub fn recover_known(&mut self, truth: &TopNRanking) -> RecoveryKind {
        self.current = Some(self.lookup_or_insert(truth.clone()));
        RecoveryKind::Separated
    }

    pub fn propose(&self, board: &Blackboard, t: u64) -> Proposal {
        if board.is_exploring(t) {
            return Proposal {
                arm: Some(round_robin_arm(
                    self.agent,
                    board.next_explore_step(),
                    self.n_arms,
                )),
                kind: ProposalKind::Explore,
                key: self.current,
            };
        }
        match self.current_entry() {
            Some(e) => Proposal {
                arm: e.ranking.get(e.pointer),
                kind: ProposalKind::Gs,
                key: Some(e.key),
            },
            None => Proposal {
                arm: None,
                kind: ProposalKind::Idle,
                key: None,
            },
        }
    }

    /// Folds the round's feedback in: matched rounds update the estimator, GS
    /// rejections advance the pointer (wrapping to the top after N rejections).
    pub fn observe(
        &mut self,
        proposal: &Proposal,
        matched: Option<usize>,
        reward: f64,
        x: Option<&[f64]>,
    ) {
        if let (Some(_), Some(x)) = (matched, x) {
            self.design
                .update(x, reward, proposal.kind == ProposalKind::Explore);
        }
        if proposal.kind == ProposalKind::Gs && matched.is_none() {
            if let Some(key) = proposal.key {
                let e = &mut self.entries[key];
                e.pointer += 1;
                if e.pointer >= e.ranking.len() {
                    e.pointer = 0;
                    self.pointer_overflows += 1;
                }
            }
        }
    }
}

/// Something that shows features and resolves proposals for one round.
pub trait Arena {
    fn features(&self) -> &FeatureSet;
    fn resolve(&mut self, proposals: &[Option<usize>]) -> MatchOutcome;
}

/// Where recovery gets its rankings from.
#[derive(Clone, Copy, Debug)]
pub enum RankingSource<'a> {
    Learned,
    /// Per-agent true top-N ranking of the active environment.
    Known(&'a [TopNRanking]),
}

#[derive(Clone, Debug)]
pub struct LockstepRound {
    pub t: u64,
    pub triggered: bool,
    pub exploring: bool,
    pub recoveries: Vec<RecoveryKind>,
    pub proposals: Vec<Proposal>,
    pub outcome: MatchOutcome,
}

fn check_variant(agents: &[AgentMemory]) -> Result<()> {
    match agents.first() {
        Some(a) if agents.iter().any(|b| b.variant != a.variant) => Err(Error::InconsistentVariant),
        _ => Ok(()),
    }
}

/// Runs one synchronized round at (local) time `t`.
pub fn run_lockstep_round<A: Arena>(
    agents: &mut [AgentMemory],
    board: &mut Blackboard,
    arena: &mut A,
    source: RankingSource<'_>,
    t: u64,
) -> Result<LockstepRound> {
    check_variant(agents)?;
    board.reset_round();
    let recoveries: Vec<RecoveryKind> = {
        let fs = arena.features();
        agents
            .iter_mut()
            .map(|a| match source {
                RankingSource::Learned => a.recover(&fs.row(a.agent), t),
                RankingSource::Known(truth) => a.recover_known(&truth[a.agent]),
            })
            .collect()
    };
    for r in &recoveries {
        board.report_recovery(r.ok());
    }
    let triggered = board.trigger(t);
    let exploring = board.is_exploring(t);
    let proposals: Vec<Proposal> = agents.iter().map(|a| a.propose(board, t)).collect();
    let arms: Vec<Option<usize>> = proposals.iter().map(|p| p.arm).collect();
    let outcome = arena.resolve(&arms);
    {
        let fs = arena.features();
        for (a, p) in agents.iter_mut().zip(&proposals) {
            let m = outcome.matching.arm_of(a.agent);
            a.observe(
                p,
                m,
                outcome.rewards[a.agent],
                m.map(|j| fs.get(a.agent, j)),
            );
        }
    }
    board.finish_round(exploring);
    Ok(LockstepRound {
        t,
        triggered,
        exploring,
        recoveries,
        proposals,
        outcome,
    })
}

/// Result of a single-agent step.
#[derive(Clone, Debug)]
pub struct AgentStep {
    pub recovery: RecoveryKind,
    pub proposal: Proposal,
    pub matched: Option<usize>,
    pub reward: f64,
}

fn single_round(
    mem: &mut AgentMemory,
    board: &mut Blackboard,
    features: &[&[f64]],
    t: u64,
    feedback: impl FnOnce(Option<usize>) -> (Option<usize>, f64),
) -> AgentStep {
    board.reset_round();
    let recovery = mem.recover(features, t);
    board.report_recovery(recovery.ok());
    board.trigger(t);
    let exploring = board.is_exploring(t);
    let proposal = mem.propose(board, t);
    let (matched, reward) = feedback(proposal.arm);
    mem.observe(&proposal, matched, reward, matched.map(|j| features[j]));
    board.finish_round(exploring);
    AgentStep {
        recovery,
        proposal,
        matched,
        reward,
    }
}

/// One ETPGS round for an agent that owns its board; `feedback` maps the proposed
/// arm to (matched arm, reward).
pub fn etpgs_round(
    mem: &mut AgentMemory,
    board: &mut Blackboard,
    features: &[&[f64]],
    t: u64,
    feedback: impl FnOnce(Option<usize>) -> (Option<usize>, f64),
) -> Result<AgentStep> {
    if mem.variant != Algorithm::Etpgs {
        return Err(Error::InconsistentVariant);
    }
    Ok(single_round(mem, board, features, t, feedback))
}

/// One IETP-GS round; see [`etpgs_round`].
pub fn ietpgs_round(
    mem: &mut AgentMemory,
    board: &mut Blackboard,
    features: &[&[f64]],
    t: u64,
    feedback: impl FnOnce(Option<usize>) -> (Option<usize>, f64),
) -> Result<AgentStep> {
    if !mem.variant.uses_partial_rank() {
        return Err(Error::InconsistentVariant);
    }
    Ok(single_round(mem, board, features, t, feedback))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{presets, resolve_collisions, ArmPreferences, Matching};

    struct Fixed {
        fs: FeatureSet,
        prefs: ArmPreferences,
        means: Vec<Vec<f64>>,
    }

    impl Arena for Fixed {
        fn features(&self) -> &FeatureSet {
            &self.fs
        }
        fn resolve(&mut self, proposals: &[Option<usize>]) -> MatchOutcome {
            let zeros = vec![0.0; proposals.len()];
            resolve_collisions(proposals, &self.prefs, &self.means, &zeros)
        }
    }

    fn arena(env: usize) -> Fixed {
        let inst = presets::uniform_gap_basic();
        let fs = FeatureSet::from_nested(&inst.environments[env].base_features);
        let means = fs.means(&inst.theta);
        Fixed {
            fs,
            prefs: inst.environments[env].arm_preferences(2).unwrap(),
            means,
        }
    }

    fn agents(variant: Algorithm) -> Vec<AgentMemory> {
        (0..2)
            .map(|i| AgentMemory::new(i, variant, 2, 3, 2, 2))
            .collect()
    }

    #[test]
    fn parse_algorithms() {
        assert_eq!("ETPGS".parse::<Algorithm>().unwrap(), Algorithm::Etpgs);
        assert_eq!("ietp-gs".parse::<Algorithm>().unwrap(), Algorithm::Ietpgs);
        assert_eq!(
            "cd-etp-gs".parse::<Algorithm>().unwrap(),
            Algorithm::Cdetpgs
        );
        assert!(matches!(
            "ucb".parse::<Algorithm>(),
            Err(Error::UnknownAlgorithm(_))
        ));
    }

    #[test]
    fn round_robin_is_collision_free() {
        for k in 1..7 {
            for n in 1..=k {
                for s in 0..20 {
                    let mut arms: Vec<usize> = (0..n).map(|i| round_robin_arm(i, s, k)).collect();
                    arms.sort();
                    arms.dedup();
                    assert_eq!(arms.len(), n);
                }
            }
        }
    }

    #[test]
    fn first_round_starts_unit_phase() {
        let mut board = Blackboard::new();
        let mut ag = agents(Algorithm::Etpgs);
        let mut a = arena(0);
        let r = run_lockstep_round(&mut ag, &mut board, &mut a, RankingSource::Learned, 1).unwrap();
        assert!(r.triggered && r.exploring);
        assert_eq!(board.tau_end, 1);
        assert_eq!(board.phase_index, 1);
        // ((i + t) mod K) + 1 in 1-based terms.
        assert_eq!(r.proposals[0].arm, Some(2));
        assert_eq!(r.proposals[1].arm, Some(0));
    }

    fn run(
        ag: &mut [AgentMemory],
        board: &mut Blackboard,
        a: &mut Fixed,
        from: u64,
        to: u64,
    ) -> Vec<LockstepRound> {
        (from..=to)
            .map(|t| run_lockstep_round(ag, board, a, RankingSource::Learned, t).unwrap())
            .collect()
    }

    #[test]
    fn phases_double_and_match_time_indexed_round_robin() {
        let mut board = Blackboard::new();
        let mut ag = agents(Algorithm::Etpgs);
        let mut a = arena(0);
        let rounds = run(&mut ag, &mut board, &mut a, 1, 16383);
        let mut contiguous = true;
        let mut phase_lengths = Vec::new();
        let mut prev_end = 0;
        for r in &rounds {
            if r.triggered {
                phase_lengths.push(board_len(r.t, &rounds));
                prev_end = r.t;
            }
            if !r.exploring {
                contiguous = false;
            }
            if r.exploring && contiguous {
                // Before any exploit round, the step index equals t.
                for (i, p) in r.proposals.iter().enumerate() {
                    assert_eq!(p.arm, Some(((i as u64 + 1 + r.t) % 3) as usize));
                }
            }
            assert!(r.outcome.matching.0.iter().all(|m| m.is_some()));
        }
        assert!(prev_end > 0);
        for (l, len) in phase_lengths.iter().enumerate() {
            assert_eq!(*len, 1u64 << l);
        }
        assert_eq!(board.explore_count, (1u64 << phase_lengths.len()) - 1);
        assert_eq!(ag[0].design.exploration_count(), board.explore_count);
    }

    /// Length of the phase triggered at `start`, measured from the trace.
    fn board_len(start: u64, rounds: &[LockstepRound]) -> u64 {
        rounds[(start - 1) as usize..]
            .iter()
            .take_while(|r| r.exploring && (r.t == start || !r.triggered))
            .count() as u64
    }

    #[test]
    fn noise_free_run_converges_to_stable_matching() {
        let mut board = Blackboard::new();
        let mut ag = agents(Algorithm::Etpgs);
        let mut a = arena(0);
        let rounds = run(&mut ag, &mut board, &mut a, 1, 16383);
        let r = rounds.last().unwrap();
        assert!(!r.exploring);
        assert_eq!(r.outcome.matching, Matching(vec![Some(0), Some(1)]));
        assert_eq!(ag[0].current_entry().unwrap().ranking.arms(), &[0, 1]);
        assert_eq!(ag[1].current_entry().unwrap().ranking.arms(), &[1, 0]);
    }

    #[test]
    fn one_failure_makes_everyone_explore() {
        let mut board = Blackboard::new();
        let mut ag = agents(Algorithm::Etpgs);
        let mut a = arena(0);
        run(&mut ag, &mut board, &mut a, 1, 16383);
        // Wipe agent 1 only: its recovery fails and the whole market explores.
        ag[1].reset();
        let r =
            run_lockstep_round(&mut ag, &mut board, &mut a, RankingSource::Learned, 16384).unwrap();
        assert!(r.triggered);
        assert!(r.proposals.iter().all(|p| p.kind == ProposalKind::Explore));
    }

    #[test]
    fn mixed_variants_rejected() {
        let mut ag = agents(Algorithm::Etpgs);
        ag[1].variant = Algorithm::Ietpgs;
        let mut board = Blackboard::new();
        let err = run_lockstep_round(
            &mut ag,
            &mut board,
            &mut arena(0),
            RankingSource::Learned,
            1,
        );
        assert!(matches!(err, Err(Error::InconsistentVariant)));
    }

    #[test]
    fn pointer_wraps_on_overflow() {
        let mut m = AgentMemory::new(0, Algorithm::Etpgs, 2, 2, 1, 2);
        m.recover_known(&TopNRanking::new(vec![0, 1], 2).unwrap());
        let board = Blackboard::new();
        for expect in [1, 0, 1] {
            let p = m.propose(&board, 5);
            assert_eq!(p.kind, ProposalKind::Gs);
            m.observe(&p, None, 0.0, None);
            assert_eq!(m.current_entry().unwrap().pointer, expect);
        }
        assert_eq!(m.pointer_overflows(), 1);
    }

    #[test]
    fn single_agent_step() {
        let mut m = AgentMemory::new(0, Algorithm::Etpgs, 1, 2, 1, 1);
        let mut board = Blackboard::new();
        let feats: [&[f64]; 2] = [&[1.0], &[0.5]];
        for t in 1..=1000 {
            let step = etpgs_round(&mut m, &mut board, &feats, t, |arm| {
                let j = arm.unwrap();
                (Some(j), feats[j][0])
            })
            .unwrap();
            if t > 600 {
                assert_eq!(step.proposal.kind, ProposalKind::Gs);
                assert_eq!(step.matched, Some(0));
            }
        }
        assert!(ietpgs_round(&mut m, &mut board, &feats, 1001, |_| (None, 0.0)).is_err());
    }
}
