//! Repeated-proposal Gale-Shapley dynamics and stable-matching oracles.

use crate::error::{Error, Result};
use crate::market::{accept_proposals, ArmPreferences, Matching};
use crate::ranking::TopNRanking;

/// 0-based proposal pointers, one per agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProposalState {
    pub pointers: Vec<usize>,
}

impl ProposalState {
    pub fn fresh(n_agents: usize) -> Self {
        Self {
            pointers: vec![0; n_agents],
        }
    }
}

/// Upper bound on replay rounds before the agent-optimal matching is reached.
pub fn gs_step_bound(n: usize) -> usize {
    (n * n + 2).saturating_sub(2 * n)
}

/// One replay round: each agent proposes σ_i[s_i], every arm keeps its best current
/// proposer, and rejected agents advance their pointer.
pub fn gs_round(
    state: &ProposalState,
    rankings: &[&TopNRanking],
    prefs: &ArmPreferences,
) -> Result<(Matching, ProposalState)> {
    let proposals: Vec<Option<usize>> = rankings
        .iter()
        .zip(&state.pointers)
        .map(|(r, &s)| r.get(s))
        .collect();
    let m = accept_proposals(&proposals, prefs);
    let mut next = state.clone();
    for (i, r) in rankings.iter().enumerate() {
        if m.arm_of(i).is_none() {
            next.pointers[i] += 1;
            if next.pointers[i] >= r.len() {
                return Err(Error::PointerOverflow {
                    agent: i,
                    n: r.len(),
                });
            }
        }
    }
    Ok((m, next))
}

/// Agent-proposing deferred acceptance with tentative holds.
pub fn agent_optimal_matching(agent_rankings: &[Vec<usize>], prefs: &ArmPreferences) -> Matching {
    let n = agent_rankings.len();
    let mut next = vec![0usize; n];
    let mut holder: Vec<Option<usize>> = vec![None; prefs.n_arms()];
    let mut free: Vec<usize> = (0..n).rev().collect();
    while let Some(i) = free.pop() {
        let Some(&arm) = agent_rankings[i].get(next[i]) else {
            continue;
        };
        next[i] += 1;
        match holder[arm] {
            None => holder[arm] = Some(i),
            Some(h) if prefs.prefers(arm, i, h) => {
                holder[arm] = Some(i);
                free.push(h);
            }
            Some(_) => free.push(i),
        }
    }
    let mut m = Matching::empty(n);
    for (arm, h) in holder.iter().enumerate() {
        if let Some(i) = h {
            m.0[*i] = Some(arm);
        }
    }
    m
}

fn position(list: &[usize], arm: usize) -> Option<usize> {
    list.iter().position(|&a| a == arm)
}

/// True iff no agent and arm would both rather be with each other.
pub fn is_stable(m: &Matching, agent_rankings: &[Vec<usize>], prefs: &ArmPreferences) -> bool {
    for (i, list) in agent_rankings.iter().enumerate() {
        let limit = m
            .arm_of(i)
            .and_then(|a| position(list, a))
            .unwrap_or(list.len());
        for &arm in &list[..limit] {
            match m.agent_of(arm) {
                None => return false,
                Some(h) if prefs.prefers(arm, i, h) => return false,
                _ => {}
            }
        }
    }
    true
}

/// Enumerates every injective partial assignment, keeps the stable ones and returns
/// the one every agent weakly prefers. Intended for small test instances.
pub fn brute_force_agent_optimal(
    agent_rankings: &[Vec<usize>],
    prefs: &ArmPreferences,
) -> Matching {
    let n = agent_rankings.len();
    let k = prefs.n_arms();
    let rank_of = |i: usize, m: Option<usize>| -> usize {
        m.and_then(|a| position(&agent_rankings[i], a))
            .unwrap_or(usize::MAX)
    };
    let mut stable = Vec::new();
    let mut cur = Matching::empty(n);
    fn rec(
        i: usize,
        k: usize,
        cur: &mut Matching,
        used: &mut Vec<bool>,
        out: &mut Vec<Matching>,
        rankings: &[Vec<usize>],
        prefs: &ArmPreferences,
    ) {
        if i == cur.len() {
            if is_stable(cur, rankings, prefs) {
                out.push(cur.clone());
            }
            return;
        }
        cur.0[i] = None;
        rec(i + 1, k, cur, used, out, rankings, prefs);
        for a in 0..k {
            if !used[a] {
                used[a] = true;
                cur.0[i] = Some(a);
                rec(i + 1, k, cur, used, out, rankings, prefs);
                used[a] = false;
            }
        }
        cur.0[i] = None;
    }
    rec(
        0,
        k,
        &mut cur,
        &mut vec![false; k],
        &mut stable,
        agent_rankings,
        prefs,
    );
    stable
        .iter()
        .find(|m| {
            stable
                .iter()
                .all(|o| (0..n).all(|i| rank_of(i, m.0[i]) <= rank_of(i, o.0[i])))
        })
        .cloned()
        .expect("strict preferences admit an agent-optimal stable matching")
}
