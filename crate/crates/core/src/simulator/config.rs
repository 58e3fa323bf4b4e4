use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::Algorithm;
use crate::change_detection::{CdConfig, DEFAULT_C1, DEFAULT_C2, DEFAULT_DRIFT};
use crate::error::{Error, Result};
use crate::market::MarketInstance;

/// How agents obtain their rankings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentMode {
    /// The algorithm as specified: rankings come from the agents' own estimates.
    #[default]
    Learning,
    /// Agents play the agent-optimal stable matching of e(t) directly.
    Oracle,
    /// Recovery returns the true top-N ranking of e(t); GS replay is unchanged.
    KnownRankings,
    /// Every round is a round-robin exploration round.
    ExploreOnly,
}

impl AgentMode {
    pub fn name(self) -> &'static str {
        match self {
            AgentMode::Learning => "learning",
            AgentMode::Oracle => "oracle",
            AgentMode::KnownRankings => "known-rankings",
            AgentMode::ExploreOnly => "explore-only",
        }
    }
}

impl fmt::Display for AgentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learning" => Ok(AgentMode::Learning),
            "oracle" => Ok(AgentMode::Oracle),
            "known-rankings" => Ok(AgentMode::KnownRankings),
            "explore-only" => Ok(AgentMode::ExploreOnly),
            _ => Err(Error::InvalidConfig(format!(
                "unknown agent mode `{s}` (expected learning, oracle, known-rankings or explore-only)"
            ))),
        }
    }
}

/// Optional overrides of the tuned change-detection parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CdOverrides {
    pub h: Option<f64>,
    pub alpha: Option<f64>,
    /// Anticipated number of changes γ̂.
    pub gamma: Option<f64>,
    pub drift: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub horizon: u64,
    pub seed: u64,
    pub replications: usize,
    pub mode: AgentMode,
    /// Keep one trace row per (replication, round, agent).
    pub trace: bool,
    pub cd: CdOverrides,
    /// Run scenarios that fail validation (negative controls).
    pub skip_validation: bool,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, horizon: u64, seed: u64) -> Self {
        Self {
            algorithm,
            horizon,
            seed,
            replications: 1,
            mode: AgentMode::Learning,
            trace: false,
            cd: CdOverrides::default(),
            skip_validation: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        Ok(())
    }

    /// Detector parameters: tuned defaults with any overrides applied.
    pub fn cd_config(&self, inst: &MarketInstance) -> Result<CdConfig> {
        let gamma = self
            .cd
            .gamma
            .or(inst.anticipated_changes)
            .unwrap_or(inst.change_points.len().max(1) as f64);
        let mut cfg = CdConfig::tuned(inst.n_agents, self.horizon, gamma, DEFAULT_C1, DEFAULT_C2);
        cfg.warmup = inst.dim as u64;
        cfg.drift = self.cd.drift.unwrap_or(DEFAULT_DRIFT);
        if let Some(h) = self.cd.h {
            cfg.h = h;
        }
        if let Some(a) = self.cd.alpha {
            cfg.alpha = a;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Regret checkpoints: 20 per decade, every horizon/20, and the horizon itself.
pub fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut cps = Vec::new();
    let mut k = 0;
    loop {
        let t = 10f64.powf(k as f64 / 20.0).round() as u64;
        if t > horizon {
            break;
        }
        cps.push(t);
        k += 1;
    }
    let step = horizon / 20;
    if step > 0 {
        cps.extend((1..=20).map(|m| m * step));
    }
    cps.push(horizon);
    cps.sort_unstable();
    cps.dedup();
    cps
}
