//! Per-round feature realizations, true means and gap quantities.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::instance::MarketInstance;
use crate::error::{Error, Result};
use crate::ranking::{inversion_set, TopNRanking};

/// Identifies what the market looks like at round `t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundContext {
    pub t: u64,
    pub env: usize,
    /// 1-based count of how many times `env` has been active up to and including `t`.
    pub occurrence: u64,
    pub window: usize,
}

/// Dense `[agent][arm][dim]` storage.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    n_agents: usize,
    n_arms: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureSet {
    pub fn from_nested(x: &[Vec<Vec<f64>>]) -> Self {
        let n_agents = x.len();
        let n_arms = x.first().map_or(0, Vec::len);
        let dim = x.first().and_then(|a| a.first()).map_or(0, Vec::len);
        let data = x.iter().flatten().flatten().copied().collect();
        Self {
            n_agents,
            n_arms,
            dim,
            data,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, agent: usize, arm: usize) -> &[f64] {
        let off = (agent * self.n_arms + arm) * self.dim;
        &self.data[off..off + self.dim]
    }

    fn get_mut(&mut self, agent: usize, arm: usize) -> &mut [f64] {
        let off = (agent * self.n_arms + arm) * self.dim;
        &mut self.data[off..off + self.dim]
    }

    /// One agent's view: a feature vector per arm.
    pub fn row(&self, agent: usize) -> Vec<&[f64]> {
        (0..self.n_arms).map(|j| self.get(agent, j)).collect()
    }

    /// `means[i][j] = <θ_i, x_ij>`.
    pub fn means(&self, theta: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.n_agents)
            .map(|i| {
                (0..self.n_arms)
                    .map(|j| true_mean(&theta[i], self.get(i, j)))
                    .collect()
            })
            .collect()
    }
}

pub fn true_mean(theta: &[f64], x: &[f64]) -> f64 {
    theta.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Realizes x_ij(t) = x̄_ij + u with u uniform in the ε-ball. Draws nothing when ε = 0.
pub fn generate_features<R: Rng + ?Sized>(
    inst: &MarketInstance,
    ctx: &RoundContext,
    rng: &mut R,
) -> FeatureSet {
    let env = &inst.environments[ctx.env];
    let mut fs = FeatureSet::from_nested(env.features_for(ctx.occurrence));
    let eps = env.perturbation_radius;
    if eps > 0.0 {
        let d = fs.dim;
        let mut dir = vec![0.0; d];
        for i in 0..fs.n_agents {
            for j in 0..fs.n_arms {
                let mut norm2 = 0.0_f64;
                for v in dir.iter_mut() {
                    *v = StandardNormal.sample(rng);
                    norm2 += *v * *v;
                }
                let u: f64 = rng.random();
                let scale = eps * u.powf(1.0 / d as f64) / norm2.sqrt().max(f64::MIN_POSITIVE);
                for (x, v) in fs.get_mut(i, j).iter_mut().zip(&dir) {
                    *x += scale * v;
                }
            }
        }
    }
    fs
}

/// Arms sorted by mean, best first (ties by arm id).
pub fn order_by_mean(means: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..means.len()).collect();
    idx.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    idx
}

/// Smallest gap between any two of the top-(N+1) arms (top-K when N + 1 > K).
pub fn min_gap(means: &[f64], n: usize) -> f64 {
    let order = order_by_mean(means);
    let top = &order[..(n + 1).min(order.len())];
    top.windows(2)
        .map(|w| means[w[0]] - means[w[1]])
        .fold(f64::INFINITY, f64::min)
}

/// Agent `agent`'s true top-N ranking in `env` under the parameters of `window`.
pub fn true_top_n(inst: &MarketInstance, env: usize, window: usize, agent: usize) -> TopNRanking {
    let theta = &inst.theta_for_window(window)[agent];
    let means: Vec<f64> = inst.environments[env].base_features[agent]
        .iter()
        .map(|x| true_mean(theta, x))
        .collect();
    let order = order_by_mean(&means);
    TopNRanking::new_unchecked(order[..inst.n_agents].to_vec())
}

/// min over e ≠ e(t) of the largest |μ_j − μ_j'| across pairs inverted between
/// ρ^e[1:N] and ρ^{e(t)}[1:N]; +∞ when there is a single environment.
pub fn min_rank_gap(
    inst: &MarketInstance,
    agent: usize,
    ctx: &RoundContext,
    means: &[f64],
) -> Result<f64> {
    let k = inst.n_arms;
    let active = true_top_n(inst, ctx.env, ctx.window, agent).to_partial(k);
    let mut best = f64::INFINITY;
    for e in (0..inst.n_envs()).filter(|&e| e != ctx.env) {
        let other = true_top_n(inst, e, ctx.window, agent).to_partial(k);
        let inv = inversion_set(&other, &active)?;
        let gap = inv
            .pairs()
            .iter()
            .map(|&(a, b)| (means[a] - means[b]).abs())
            .fold(f64::NEG_INFINITY, f64::max);
        if inv.is_empty() {
            return Err(Error::InvalidScenario(format!(
                "agent {agent}: environments {e} and {} have no inverted top-N pair",
                ctx.env
            )));
        }
        best = best.min(gap);
    }
    Ok(best)
}
