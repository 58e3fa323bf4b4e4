//! Scenario validation: structure, ranking identifiability and the spectral floor.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::arms::ArmPreferences;
use super::features::{order_by_mean, true_mean};
use super::instance::{EnvSchedule, MarketInstance, NoiseModel};

/// Above this many (env, variant) assignments per arm group, the spectral check samples.
const MAX_EXHAUSTIVE_COMBOS: usize = 4096;
const TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    Structure,
    ThetaNorm,
    FeatureBound,
    DistinctMeans,
    RankingStability,
    DistinctEnvironments,
    SpectralFloor,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Clause::Structure => "structure",
            Clause::ThetaNorm => "theta-norm",
            Clause::FeatureBound => "feature-bound",
            Clause::DistinctMeans => "distinct-means",
            Clause::RankingStability => "ranking-stability",
            Clause::DistinctEnvironments => "distinct-environments",
            Clause::SpectralFloor => "spectral-floor",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationFailure {
    pub clause: Clause,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub passed: bool,
    pub failures: Vec<ValidationFailure>,
    /// Smallest guaranteed λ_min over every group of d consecutive round-robin arms.
    pub spectral_floor: Option<f64>,
    /// Smallest top-(N+1) gap over agents, environments, variants and windows.
    pub min_gap: Option<f64>,
}

impl ValidationReport {
    pub fn violates(&self, clause: Clause) -> bool {
        self.failures.iter().any(|f| f.clause == clause)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "scenario {}: {}",
            self.scenario,
            if self.passed { "valid" } else { "INVALID" }
        )?;
        if let Some(s) = self.spectral_floor {
            writeln!(f, "  spectral floor: {s:.6}")?;
        }
        if let Some(g) = self.min_gap {
            writeln!(f, "  min gap: {g:.6}")?;
        }
        for fail in &self.failures {
            writeln!(f, "  [{}] {}", fail.clause, fail.detail)?;
        }
        Ok(())
    }
}

struct Collector(Vec<ValidationFailure>);

impl Collector {
    fn fail(&mut self, clause: Clause, detail: String) {
        self.0.push(ValidationFailure { clause, detail });
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_structure(inst: &MarketInstance, c: &mut Collector) {
    let (n, k, d) = (inst.n_agents, inst.n_arms, inst.dim);
    if n == 0 || d == 0 {
        c.fail(Clause::Structure, "need N >= 1 and d >= 1".into());
    }
    if k < n {
        c.fail(Clause::Structure, format!("K = {k} < N = {n}"));
    }
    if inst.environments.is_empty() {
        c.fail(Clause::Structure, "need at least one environment".into());
    }
    if inst.horizon == 0 {
        c.fail(Clause::Structure, "horizon must be positive".into());
    }
    if !(inst.kappa > 0.0) {
        c.fail(Clause::Structure, "kappa must be positive".into());
    }
    if !(inst.feature_bound > 0.0) {
        c.fail(Clause::Structure, "feature_bound must be positive".into());
    }
    match inst.noise {
        NoiseModel::Gaussian { std_dev } if !(std_dev >= 0.0) => {
            c.fail(Clause::Structure, "noise std_dev must be >= 0".into())
        }
        NoiseModel::Uniform { half_width } if !(half_width >= 0.0) => {
            c.fail(Clause::Structure, "noise half_width must be >= 0".into())
        }
        _ => {}
    }
    let theta_ok = |th: &[Vec<f64>]| th.len() == n && th.iter().all(|v| v.len() == d);
    if !theta_ok(&inst.theta) {
        c.fail(Clause::Structure, format!("theta must be {n} x {d}"));
    }
    let mut prev = 1;
    for cp in &inst.change_points {
        if !theta_ok(&cp.theta) {
            c.fail(
                Clause::Structure,
                format!("change point {} theta must be {n} x {d}", cp.round),
            );
        }
        if cp.round <= prev || cp.round > inst.horizon {
            c.fail(
                Clause::Structure,
                format!(
                    "change points must be strictly increasing in (1, horizon]; got {}",
                    cp.round
                ),
            );
        }
        prev = cp.round;
    }
    if let EnvSchedule::Sequence { envs } = &inst.schedule {
        if envs.is_empty() || envs.iter().any(|&e| e >= inst.n_envs()) {
            c.fail(
                Clause::Structure,
                "schedule sequence must be non-empty and reference existing environments".into(),
            );
        }
    }
    let shape_ok = |x: &Vec<Vec<Vec<f64>>>| {
        x.len() == n
            && x.iter()
                .all(|row| row.len() == k && row.iter().all(|v| v.len() == d))
    };
    for (e, env) in inst.environments.iter().enumerate() {
        if env.arm_prefs.len() != k {
            c.fail(
                Clause::Structure,
                format!("env {e}: arm_prefs must list {k} arms"),
            );
        } else if let Err(err) = ArmPreferences::new(env.arm_prefs.clone(), n) {
            c.fail(Clause::Structure, format!("env {e}: {err}"));
        }
        if !(env.perturbation_radius >= 0.0) {
            c.fail(
                Clause::Structure,
                format!("env {e}: perturbation radius must be >= 0"),
            );
        }
        for (v, feats) in env.variants().into_iter().enumerate() {
            if !shape_ok(feats) {
                c.fail(
                    Clause::Structure,
                    format!("env {e} variant {v}: features must be {n} x {k} x {d}"),
                );
            }
        }
        if let Some(sw) = &env.switch {
            if sw.period == 0 {
                c.fail(
                    Clause::Structure,
                    format!("env {e}: switch period must be >= 1"),
                );
            }
        }
    }
}

/// λ_min(XᵀX) for the rows in `rows`.
fn gram_lambda_min(rows: &[&[f64]], d: usize) -> f64 {
    let mut g = DMatrix::<f64>::zeros(d, d);
    for x in rows {
        for a in 0..d {
            for b in 0..d {
                g[(a, b)] += x[a] * x[b];
            }
        }
    }
    SymmetricEigen::new(g).eigenvalues.min().max(0.0)
}

/// Guaranteed λ_min of one group after any perturbation of radius `eps` per row.
fn robust_floor(rows: &[&[f64]], d: usize, eps: f64) -> f64 {
    let smin = gram_lambda_min(rows, d).sqrt();
    let r = (smin - eps * (rows.len() as f64).sqrt()).max(0.0);
    r * r
}

fn check_spectral(inst: &MarketInstance, c: &mut Collector) -> f64 {
    let (k, d) = (inst.n_arms, inst.dim);
    // (env, variant) pairs an arm's row can come from.
    let sources: Vec<(usize, usize)> = inst
        .environments
        .iter()
        .enumerate()
        .flat_map(|(e, env)| (0..env.variants().len()).map(move |v| (e, v)))
        .collect();
    let s = sources.len();
    let total = (s as f64).powi(d as i32);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut worst = f64::INFINITY;
    for i in 0..inst.n_agents {
        for start in 0..k {
            let arms: Vec<usize> = (0..d).map(|q| (start + q) % k).collect();
            let mut group_min = f64::INFINITY;
            let eval = |assign: &[usize]| {
                let mut eps: f64 = 0.0;
                let rows: Vec<&[f64]> = arms
                    .iter()
                    .zip(assign)
                    .map(|(&j, &src)| {
                        let (e, v) = sources[src];
                        let env = &inst.environments[e];
                        eps = eps.max(env.perturbation_radius);
                        env.variants()[v][i][j].as_slice()
                    })
                    .collect();
                robust_floor(&rows, d, eps)
            };
            if total <= MAX_EXHAUSTIVE_COMBOS as f64 {
                let mut assign = vec![0usize; d];
                loop {
                    group_min = group_min.min(eval(&assign));
                    let mut p = 0;
                    while p < d {
                        assign[p] += 1;
                        if assign[p] < s {
                            break;
                        }
                        assign[p] = 0;
                        p += 1;
                    }
                    if p == d {
                        break;
                    }
                }
            } else {
                for _ in 0..MAX_EXHAUSTIVE_COMBOS {
                    let assign: Vec<usize> = (0..d).map(|_| rng.random_range(0..s)).collect();
                    group_min = group_min.min(eval(&assign));
                }
            }
            if group_min < inst.kappa * (1.0 - 1e-9) {
                c.fail(
                    Clause::SpectralFloor,
                    format!(
                        "agent {i}, arms {arms:?}: guaranteed lambda_min {group_min:.6e} < kappa {:.6e}",
                        inst.kappa
                    ),
                );
            }
            worst = worst.min(group_min);
        }
    }
    worst
}

/// Runs every clause and reports all violations found.
pub fn validate_scenario(inst: &MarketInstance) -> ValidationReport {
    let mut c = Collector(Vec::new());
    check_structure(inst, &mut c);
    if !c.0.is_empty() {
        return ValidationReport {
            scenario: inst.name.clone(),
            passed: false,
            failures: c.0,
            spectral_floor: None,
            min_gap: None,
        };
    }
    let n = inst.n_agents;
    let mut min_gap = f64::INFINITY;
    for w in 0..inst.n_windows() {
        let theta = inst.theta_for_window(w);
        for (i, th) in theta.iter().enumerate() {
            if norm(th) > 1.0 + TOL {
                c.fail(
                    Clause::ThetaNorm,
                    format!("window {w}, agent {i}: |theta| = {:.6} > 1", norm(th)),
                );
            }
        }
        // Top-N ranking of each agent in each environment under the steady features.
        let mut top: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n];
        for (e, env) in inst.environments.iter().enumerate() {
            let eps = env.perturbation_radius;
            let mut steady_order: Vec<Vec<usize>> = Vec::new();
            for (v, feats) in env.variants().into_iter().enumerate() {
                for i in 0..n {
                    if w == 0 {
                        for (j, x) in feats[i].iter().enumerate() {
                            if norm(x) + eps > inst.feature_bound * (1.0 + TOL) {
                                c.fail(
                                    Clause::FeatureBound,
                                    format!("env {e} variant {v} agent {i} arm {j}: |x| + eps = {:.6} > L", norm(x) + eps),
                                );
                            }
                        }
                    }
                    let means: Vec<f64> =
                        feats[i].iter().map(|x| true_mean(&theta[i], x)).collect();
                    let order = order_by_mean(&means);
                    let gap = order
                        .windows(2)
                        .map(|p| means[p[0]] - means[p[1]])
                        .fold(f64::INFINITY, f64::min);
                    if gap <= TOL {
                        c.fail(
                            Clause::DistinctMeans,
                            format!("window {w} env {e} variant {v} agent {i}: tied means"),
                        );
                    } else if gap <= 2.0 * eps * norm(&theta[i]) {
                        c.fail(
                            Clause::RankingStability,
                            format!("window {w} env {e} variant {v} agent {i}: gap {gap:.3e} not above 2*eps*|theta|"),
                        );
                    }
                    min_gap = min_gap.min(super::features::min_gap(&means, n));
                    if v == 0 {
                        steady_order.push(order);
                    } else if order != steady_order[i] {
                        c.fail(
                            Clause::RankingStability,
                            format!("window {w} env {e} agent {i}: switch features reorder arms"),
                        );
                    }
                }
            }
            for i in 0..n {
                top[i].push(steady_order[i][..n].to_vec());
            }
        }
        for (i, per_env) in top.iter().enumerate() {
            for a in 0..per_env.len() {
                for b in a + 1..per_env.len() {
                    if per_env[a] == per_env[b] {
                        c.fail(
                            Clause::DistinctEnvironments,
                            format!("window {w}, agent {i}: environments {a} and {b} share the top-{n} ranking {:?}", per_env[a]),
                        );
                    }
                }
            }
        }
    }
    let floor = check_spectral(inst, &mut c);
    ValidationReport {
        scenario: inst.name.clone(),
        passed: c.0.is_empty(),
        failures: c.0,
        spectral_floor: Some(floor),
        min_gap: Some(min_gap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::presets;

    #[test]
    fn table1_fails_distinct_environments() {
        let r = validate_scenario(&presets::table1_counterexample());
        assert!(!r.passed);
        assert!(r.violates(Clause::DistinctEnvironments));
        assert!(r
            .failures
            .iter()
            .all(|f| f.clause == Clause::DistinctEnvironments));
    }

    #[test]
    fn presets_pass() {
        for inst in [
            presets::uniform_gap_basic(),
            presets::piecewise_stationary(),
            presets::delta_example(0.05, 10),
        ] {
            let r = validate_scenario(&inst);
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn delta_example_passes_across_delta() {
        for k in 1..33 {
            let delta = k as f64 / 100.0;
            let r = validate_scenario(&presets::delta_example(delta, 7));
            assert!(r.passed, "delta {delta}: {r}");
        }
    }

    fn orthonormal() -> MarketInstance {
        let mut inst = presets::uniform_gap_basic();
        inst.n_agents = 1;
        inst.n_arms = 2;
        inst.theta = vec![vec![0.8, 0.6]];
        inst.kappa = 1.0;
        inst.environments.truncate(1);
        let env = &mut inst.environments[0];
        env.arm_prefs = vec![vec![0], vec![0]];
        env.base_features = vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]];
        inst
    }

    #[test]
    fn orthonormal_basis_has_unit_floor() {
        let r = validate_scenario(&orthonormal());
        assert!(r.passed, "{r}");
        assert!((r.spectral_floor.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_features_fail_spectral() {
        let mut inst = orthonormal();
        inst.kappa = 0.01;
        inst.environments[0].base_features = vec![vec![vec![0.4, 0.2], vec![0.8, 0.4]]];
        let r = validate_scenario(&inst);
        assert!(r.violates(Clause::SpectralFloor));
        assert!(r.spectral_floor.unwrap() < 1e-12);
    }

    #[test]
    fn structure_errors_short_circuit() {
        let mut inst = presets::uniform_gap_basic();
        inst.theta.pop();
        let r = validate_scenario(&inst);
        assert!(!r.passed);
        assert!(r.violates(Clause::Structure));
        assert!(r.spectral_floor.is_none());
    }

    #[test]
    fn large_perturbation_breaks_stability() {
        let mut inst = presets::uniform_gap_basic();
        inst.environments[0].perturbation_radius = 0.2;
        let r = validate_scenario(&inst);
        assert!(r.violates(Clause::RankingStability));
    }
}
