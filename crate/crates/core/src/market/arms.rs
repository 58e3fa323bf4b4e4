//! Arm-side preferences and one-round collision resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Each arm's strict order over agents, best first, plus the inverse lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArmPreferences {
    order: Vec<Vec<usize>>,
    rank: Vec<Vec<usize>>,
}

impl ArmPreferences {
    pub fn new(order: Vec<Vec<usize>>, n_agents: usize) -> Result<Self> {
        let mut rank = Vec::with_capacity(order.len());
        for (arm, prefs) in order.iter().enumerate() {
            if prefs.len() != n_agents {
                return Err(Error::InvalidScenario(format!(
                    "arm {arm} ranks {} agents, expected {n_agents}",
                    prefs.len()
                )));
            }
            let mut r = vec![usize::MAX; n_agents];
            for (pos, &agent) in prefs.iter().enumerate() {
                if agent >= n_agents || r[agent] != usize::MAX {
                    return Err(Error::InvalidScenario(format!(
                        "arm {arm} preference list is not a permutation of agents"
                    )));
                }
                r[agent] = pos;
            }
            rank.push(r);
        }
        Ok(Self { order, rank })
    }

    /// Every arm ranks agents 0, 1, …, N−1 in that order.
    pub fn serial_dictatorship(n_agents: usize, n_arms: usize) -> Self {
        let order = vec![(0..n_agents).collect::<Vec<_>>(); n_arms];
        Self::new(order, n_agents).expect("identity order is a permutation")
    }

    pub fn n_arms(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self, arm: usize) -> &[usize] {
        &self.order[arm]
    }

    /// Position of `agent` in `arm`'s list; lower is better.
    pub fn rank(&self, arm: usize, agent: usize) -> usize {
        self.rank[arm][agent]
    }

    pub fn prefers(&self, arm: usize, a: usize, b: usize) -> bool {
        self.rank[arm][a] < self.rank[arm][b]
    }
}

/// Agent → arm assignment; `None` is the unmatched sentinel.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matching(pub Vec<Option<usize>>);

impl Matching {
    pub fn empty(n_agents: usize) -> Self {
        Self(vec![None; n_agents])
    }

    pub fn arm_of(&self, agent: usize) -> Option<usize> {
        self.0[agent]
    }

    pub fn agent_of(&self, arm: usize) -> Option<usize> {
        self.0.iter().position(|&m| m == Some(arm))
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = Vec::new();
        for arm in self.0.iter().flatten() {
            if seen.contains(arm) {
                return false;
            }
            seen.push(*arm);
        }
        true
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-agent result of one market round.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchOutcome {
    pub matching: Matching,
    pub rewards: Vec<f64>,
}

/// Each arm accepts its most preferred current proposer; everyone else is rejected.
pub fn accept_proposals(proposals: &[Option<usize>], prefs: &ArmPreferences) -> Matching {
    let mut holder: Vec<Option<usize>> = vec![None; prefs.n_arms()];
    for (agent, arm) in proposals.iter().enumerate() {
        let Some(arm) = *arm else { continue };
        match holder[arm] {
            Some(cur) if prefs.prefers(arm, cur, agent) => {}
            _ => holder[arm] = Some(agent),
        }
    }
    let mut m = Matching::empty(proposals.len());
    for (arm, agent) in holder.iter().enumerate() {
        if let Some(a) = agent {
            m.0[*a] = Some(arm);
        }
    }
    m
}

/// Resolves collisions and pays matched agents `mean + noise`; unmatched agents get exactly 0.
///
/// `means[i][j]` is agent i's true mean for arm j this round and `noise[i]` is the
/// pre-drawn noise for agent i (drawn whether or not it ends up matched).
pub fn resolve_collisions(
    proposals: &[Option<usize>],
    prefs: &ArmPreferences,
    means: &[Vec<f64>],
    noise: &[f64],
) -> MatchOutcome {
    let matching = accept_proposals(proposals, prefs);
    let rewards = matching
        .0
        .iter()
        .enumerate()
        .map(|(i, m)| match m {
            Some(j) => means[i][*j] + noise[i],
            None => 0.0,
        })
        .collect();
    MatchOutcome { matching, rewards }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_proposer_per_arm_all_matched() {
        let prefs = ArmPreferences::serial_dictatorship(3, 3);
        let m = accept_proposals(&[Some(2), Some(0), Some(1)], &prefs);
        assert_eq!(m.0, vec![Some(2), Some(0), Some(1)]);
    }

    #[test]
    fn contested_arm_goes_to_preferred_agent() {
        let prefs = ArmPreferences::new(vec![vec![1, 0], vec![0, 1]], 2).unwrap();
        let means = vec![vec![0.9, 0.5], vec![0.6, 0.9]];
        let out = resolve_collisions(&[Some(0), Some(0)], &prefs, &means, &[0.1, 0.2]);
        assert_eq!(out.matching.0, vec![None, Some(0)]);
        assert_eq!(out.rewards, vec![0.0, 0.6 + 0.2]);
    }

    #[test]
    fn all_propose_same_arm() {
        let prefs = ArmPreferences::new(vec![vec![2, 0, 3, 1]; 4], 4).unwrap();
        let m = accept_proposals(&[Some(3); 4], &prefs);
        assert_eq!(m.0.iter().flatten().count(), 1);
        assert_eq!(m.arm_of(2), Some(3));
    }

    #[test]
    fn rejects_non_permutation() {
        assert!(ArmPreferences::new(vec![vec![0, 0]], 2).is_err());
        assert!(ArmPreferences::new(vec![vec![0]], 2).is_err());
    }
}
