//! CD-ETP-GS: forced round-robin exploration, per-agent two-sided CUSUM and
//! synchronized restarts of the IETP-GS learners.

use serde::{Deserialize, Serialize};

use crate::agents::{
    round_robin_arm, run_lockstep_round, AgentMemory, Arena, Blackboard, LockstepRound, Proposal,
    ProposalKind, RankingSource,
};
use crate::error::{Error, Result};
use crate::estimation::DesignState;

pub const DEFAULT_C1: f64 = 4.0;
pub const DEFAULT_C2: f64 = 1.0;
pub const DEFAULT_DRIFT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdConfig {
    pub h: f64,
    pub alpha: f64,
    pub drift: f64,
    /// Forced observations folded into the reference before residuals are scored.
    pub warmup: u64,
}

impl CdConfig {
    /// h = c1·log(N·T/γ̂), α = c2·sqrt(γ̂/T · log(N·T/γ̂)), with γ̂ clamped to at least 1.
    pub fn tuned(n_agents: usize, horizon: u64, gamma_hat: f64, c1: f64, c2: f64) -> Self {
        let g = gamma_hat.max(1.0);
        let l = (n_agents as f64 * horizon as f64 / g).ln().max(1.0);
        Self {
            h: c1 * l,
            alpha: (c2 * (g / horizon as f64 * l).sqrt()).min(1.0),
            drift: DEFAULT_DRIFT,
            warmup: 0,
        }
    }

    pub fn defaults(n_agents: usize, horizon: u64, gamma_hat: f64, dim: usize) -> Self {
        Self {
            warmup: dim as u64,
            ..Self::tuned(n_agents, horizon, gamma_hat, DEFAULT_C1, DEFAULT_C2)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.h > 0.0) || !(self.drift >= 0.0) {
            return Err(Error::InvalidConfig(
                "h must be positive and drift non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// True iff ⌊αt⌋ > ⌊α(t−1)⌋; local time `t` starts at 1 after each restart.
pub fn is_forced_exploration(t: u64, alpha: f64) -> bool {
    t >= 1 && (alpha * t as f64).floor() > (alpha * (t - 1) as f64).floor()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CusumUpdate {
    /// The reference was still warming up; the observation only trained it.
    WarmUp,
    Scored {
        z: f64,
    },
}

/// Two-sided CUSUM on standardized one-step-ahead residuals of a least-squares
/// reference fitted to this window's forced observations.
#[derive(Clone, Debug)]
pub struct CusumState {
    pub s_plus: f64,
    pub s_minus: f64,
    pub h: f64,
    pub drift: f64,
    warmup: u64,
    reference: DesignState,
}

impl CusumState {
    pub fn new(cfg: &CdConfig, dim: usize) -> Self {
        Self {
            s_plus: 0.0,
            s_minus: 0.0,
            h: cfg.h,
            drift: cfg.drift,
            warmup: cfg.warmup,
            reference: DesignState::new(dim),
        }
    }

    pub fn reference(&self) -> &DesignState {
        &self.reference
    }

    /// Applies one residual to both statistics.
    pub fn push_residual(&mut self, z: f64) {
        self.s_plus = (self.s_plus + z - self.drift).max(0.0);
        self.s_minus = (self.s_minus - z - self.drift).max(0.0);
    }

    /// Scores (r, x) against the reference, then folds it in.
    pub fn update(&mut self, r: f64, x: &[f64]) -> CusumUpdate {
        let scored = if self.reference.observations() < self.warmup {
            None
        } else {
            match (self.reference.estimate(), self.reference.quadratic_form(x)) {
                (Ok(est), Ok(q)) => Some((r - est.mean(x)) / (1.0 + q).sqrt()),
                _ => None,
            }
        };
        self.reference.update(x, r, false);
        match scored {
            Some(z) => {
                self.push_residual(z);
                CusumUpdate::Scored { z }
            }
            None => CusumUpdate::WarmUp,
        }
    }

    pub fn statistic(&self) -> f64 {
        self.s_plus.max(self.s_minus)
    }

    pub fn detected(&self) -> bool {
        self.statistic() > self.h
    }

    pub fn reset(&mut self) {
        self.s_plus = 0.0;
        self.s_minus = 0.0;
        self.reference = DesignState::new(self.reference.dim());
    }
}

#[derive(Clone, Debug)]
pub struct CdRound {
    pub round: LockstepRound,
    pub forced: bool,
    /// Every agent was re-initialized at the end of this round.
    pub restart: bool,
    /// Per-agent (s+, s−) after the round, before any restart.
    pub statistics: Vec<(f64, f64)>,
}

/// One CD-ETP-GS round at global time `t_global`.
pub fn run_cd_lockstep_round<A: Arena>(
    agents: &mut [AgentMemory],
    cusums: &mut [CusumState],
    board: &mut Blackboard,
    arena: &mut A,
    cfg: &CdConfig,
    source: RankingSource<'_>,
    t_global: u64,
) -> Result<CdRound> {
    let t = t_global - board.tau_hat;
    if !is_forced_exploration(t, cfg.alpha) {
        let round = run_lockstep_round(agents, board, arena, source, t)?;
        let statistics = cusums.iter().map(|c| (c.s_plus, c.s_minus)).collect();
        return Ok(CdRound {
            round,
            forced: false,
            restart: false,
            statistics,
        });
    }
    if let Some(a) = agents.first() {
        if agents.iter().any(|b| b.variant != a.variant) {
            return Err(Error::InconsistentVariant);
        }
    }
    board.reset_round();
    let n_arms = arena.features().n_arms();
    let proposals: Vec<Proposal> = agents
        .iter()
        .map(|a| Proposal {
            arm: Some(round_robin_arm(a.agent, t, n_arms)),
            kind: ProposalKind::Forced,
            key: None,
        })
        .collect();
    let arms: Vec<Option<usize>> = proposals.iter().map(|p| p.arm).collect();
    let outcome = arena.resolve(&arms);
    {
        let fs = arena.features();
        for ((a, p), c) in agents.iter_mut().zip(&proposals).zip(cusums.iter_mut()) {
            let m = outcome.matching.arm_of(a.agent);
            let r = outcome.rewards[a.agent];
            let x = m.map(|j| fs.get(a.agent, j));
            a.observe(p, m, r, x);
            if let Some(x) = x {
                c.update(r, x);
            }
            board.report_detection(!c.detected());
        }
    }
    let statistics = cusums.iter().map(|c| (c.s_plus, c.s_minus)).collect();
    let restart = !board.cd_flag;
    if restart {
        for a in agents.iter_mut() {
            a.reset();
        }
        for c in cusums.iter_mut() {
            c.reset();
        }
        board.restart(t_global);
    }
    Ok(CdRound {
        round: LockstepRound {
            t,
            triggered: false,
            exploring: false,
            recoveries: Vec::new(),
            proposals,
            outcome,
        },
        forced: true,
        restart,
        statistics,
    })
}
