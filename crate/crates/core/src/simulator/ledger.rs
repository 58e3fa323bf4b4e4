use crate::market::Matching;

/// Per-agent regret against the agent-optimal stable matching of the active environment.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretLedger {
    /// Σ max(0, μ_{i,m*}(t) − μ_{i,m(t)}(t)).
    pub cumulative: Vec<f64>,
    /// Σ (μ_{i,m*}(t) − μ_{i,m(t)}(t)) without clipping.
    pub signed: Vec<f64>,
    /// Σ μ_{i,m*}(t).
    pub optimal_total: Vec<f64>,
    /// max over rounds and arms of μ_ij(t).
    pub mu_max: Vec<f64>,
    /// max over rounds of μ_{i,m*}(t) − min(0, min_j μ_ij(t)).
    pub delta_max: Vec<f64>,
}

impl RegretLedger {
    pub fn new(n_agents: usize) -> Self {
        Self {
            cumulative: vec![0.0; n_agents],
            signed: vec![0.0; n_agents],
            optimal_total: vec![0.0; n_agents],
            mu_max: vec![f64::NEG_INFINITY; n_agents],
            delta_max: vec![f64::NEG_INFINITY; n_agents],
        }
    }

    /// Books one round; unmatched agents earn mean 0. Returns (clipped, signed) increments.
    pub fn record(
        &mut self,
        optimal: &Matching,
        played: &Matching,
        means: &[Vec<f64>],
    ) -> Vec<(f64, f64)> {
        let mean_of = |i: usize, m: Option<usize>| m.map_or(0.0, |j| means[i][j]);
        (0..self.cumulative.len())
            .map(|i| {
                let best = mean_of(i, optimal.arm_of(i));
                let got = mean_of(i, played.arm_of(i));
                let signed = best - got;
                let clipped = signed.max(0.0);
                self.cumulative[i] += clipped;
                self.signed[i] += signed;
                self.optimal_total[i] += best;
                let hi = means[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = means[i].iter().copied().fold(f64::INFINITY, f64::min);
                self.mu_max[i] = self.mu_max[i].max(hi);
                self.delta_max[i] = self.delta_max[i].max(best - lo.min(0.0));
                (clipped, signed)
            })
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.cumulative.iter().sum()
    }
}
