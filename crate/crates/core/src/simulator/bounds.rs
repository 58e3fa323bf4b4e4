//! Closed-form regret budgets used for empirical comparisons.

use std::f64::consts::PI;

/// τ(Δ) = 64 d² L² log T / (κ Δ²): explorations after which gaps of size Δ resolve.
pub fn tau(dim: usize, feature_bound: f64, kappa: f64, horizon: u64, delta: f64) -> f64 {
    64.0 * (dim * dim) as f64 * feature_bound.powi(2) * (horizon.max(2) as f64).ln()
        / (kappa * delta * delta)
}

/// g(x) = 2x + log(2x): rounds lost to doubling phases before x explorations accrue.
pub fn g(x: f64) -> f64 {
    2.0 * x + (2.0 * x).ln()
}

/// Expected number of rounds with a per-direction confidence violation.
pub fn bad_round_budget(n_agents: usize, dim: usize) -> f64 {
    (n_agents * dim) as f64 * PI * PI / 3.0
}

#[derive(Clone, Copy, Debug)]
pub struct BoundInputs {
    pub dim: usize,
    pub feature_bound: f64,
    pub kappa: f64,
    pub horizon: u64,
    pub n_agents: usize,
    pub n_envs: usize,
}

impl BoundInputs {
    fn constant_terms(&self) -> f64 {
        (self.n_envs * self.n_agents * self.n_agents) as f64
            + bad_round_budget(self.n_agents, self.dim)
    }

    /// (τ(Δ_min) + E N² + N d π²/3) · multiplier, for ETPGS under a uniform gap.
    pub fn etpgs_bound(&self, delta_min: f64, multiplier: f64) -> f64 {
        (tau(
            self.dim,
            self.feature_bound,
            self.kappa,
            self.horizon,
            delta_min,
        ) + self.constant_terms())
            * multiplier
    }

    /// IETP-GS bound; `candidates` lists (Δ, Σ_e P_e(Δ)) pairs to minimize over.
    pub fn ietpgs_bound(
        &self,
        candidates: &[(f64, f64)],
        delta_minrank: f64,
        multiplier: f64,
    ) -> f64 {
        let t = |d: f64| tau(self.dim, self.feature_bound, self.kappa, self.horizon, d);
        let head = candidates
            .iter()
            .map(|&(d, p)| t(d) + p)
            .fold(f64::INFINITY, f64::min);
        (head + g(t(delta_minrank)) + self.constant_terms()) * multiplier
    }

    /// Exploration rounds ETPGS may spend: twice τ(Δ_min) to cover phase doubling.
    pub fn exploration_budget(&self, delta_min: f64) -> f64 {
        2.0 * tau(
            self.dim,
            self.feature_bound,
            self.kappa,
            self.horizon,
            delta_min,
        )
    }
}
