use serde::{Deserialize, Serialize};

use super::bounds::BoundInputs;
use super::run::RunResult;
use crate::market::{min_gap, true_mean, MarketInstance};

pub const SUMMARY_SCHEMA: &str = "ctxmatch-summary/1";

/// Fraction of the horizon excluded from the log fit.
pub const BURN_IN_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStat {
    pub t: u64,
    /// Seed-mean of the market's total cumulative regret.
    pub mean: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    /// Seed-mean cumulative regret per agent.
    pub per_agent: Vec<f64>,
}

/// Least-squares fit of y ≈ a + b·ln t.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub a: f64,
    pub b: f64,
    /// Coefficient of determination 1 − SS_res/SS_tot (1 for a perfect fit of a flat curve).
    pub r2: f64,
    pub points: usize,
}

/// Fits y ≈ a + b·ln t; `None` with fewer than two points or a single distinct t.
pub fn fit_log(ts: &[f64], ys: &[f64]) -> Option<LogFit> {
    let n = ts.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let xs: Vec<f64> = ts[..n].iter().map(|t| t.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    let ss_tot: f64 = ys[..n].iter().map(|y| (y - my).powi(2)).sum();
    // Rounding noise on a constant curve is not variance.
    let noise_floor = n as f64 * (1e-12 * my.abs().max(1.0)).powi(2);
    let r2 = if ss_tot > noise_floor {
        1.0 - ss_res / ss_tot
    } else if ss_res <= noise_floor {
        1.0
    } else {
        0.0
    };
    Some(LogFit {
        a,
        b,
        r2,
        points: n,
    })
}

/// Linearly interpolated quantile of `values` (q in [0, 1]).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn mean(v: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = v
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub h: f64,
    pub alpha: f64,
    pub change_rounds: Vec<u64>,
    /// Per replication, per change: restart round − change round, if detected in that window.
    pub delays: Vec<Vec<Option<u64>>>,
    pub false_alarms: Vec<usize>,
    pub mean_delay: Option<f64>,
    pub all_detected_fraction: f64,
    pub false_alarm_free_fraction: f64,
    pub synchronized: bool,
}

/// Matches restarts against change rounds: the first restart inside a change's
/// window is its detection, every other restart is a false alarm.
pub fn evaluate_detection(restarts: &[u64], change_rounds: &[u64]) -> (Vec<Option<u64>>, usize) {
    let mut delays = vec![None; change_rounds.len()];
    let mut false_alarms = 0;
    for &r in restarts {
        let window = change_rounds.iter().take_while(|&&c| c <= r).count();
        if window == 0 {
            false_alarms += 1;
            continue;
        }
        let slot = &mut delays[window - 1];
        if slot.is_none() {
            *slot = Some(r - change_rounds[window - 1]);
        } else {
            false_alarms += 1;
        }
    }
    (delays, false_alarms)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundStats {
    /// Smallest top-(N+1) gap of the unperturbed features over agents, environments and windows.
    pub base_min_gap: f64,
    pub exploration_budget: f64,
    pub etpgs_bound_mu_max: Vec<f64>,
    pub etpgs_bound_delta_max: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub scenario: String,
    pub algorithm: String,
    pub mode: String,
    pub horizon: u64,
    pub seed: u64,
    pub replications: usize,
    pub checkpoints: Vec<CheckpointStat>,
    pub final_regret_mean: f64,
    pub final_signed_regret_mean: f64,
    pub burn_in: u64,
    pub log_fit: Option<LogFit>,
    pub explore_rounds_mean: Vec<f64>,
    pub gs_rounds_mean: Vec<f64>,
    pub forced_rounds_mean: f64,
    pub class_explore_mean: f64,
    pub class_gs_convergence_mean: f64,
    pub class_gs_convergence_max: u64,
    pub class_violation_mean: f64,
    pub class_optimal_mean: f64,
    pub confidence_violations_mean: f64,
    pub spectral_violations_total: u64,
    pub min_spectral_margin: f64,
    pub pointer_overflows_total: u64,
    pub phases_mean: f64,
    pub mu_max: Vec<f64>,
    pub delta_max: Vec<f64>,
    pub detection: Option<DetectionStats>,
    pub bounds: BoundStats,
}

fn base_min_gap(inst: &MarketInstance) -> f64 {
    let mut gap = f64::INFINITY;
    for w in 0..inst.n_windows() {
        let theta = inst.theta_for_window(w);
        for env in &inst.environments {
            for (i, row) in env.base_features.iter().enumerate() {
                let means: Vec<f64> = row.iter().map(|x| true_mean(&theta[i], x)).collect();
                gap = gap.min(min_gap(&means, inst.n_agents));
            }
        }
    }
    gap
}

/// Aggregates replications into seed-mean curves, counts and fits.
pub fn summarize(inst: &MarketInstance, result: &RunResult) -> Summary {
    let reps = &result.replications;
    let n = inst.n_agents;
    let r = reps.len() as f64;
    let cps = reps
        .first()
        .map(|x| x.checkpoints.clone())
        .unwrap_or_default();

    let checkpoints: Vec<CheckpointStat> = cps
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let totals: Vec<f64> = reps.iter().map(|x| x.curve[k].iter().sum()).collect();
            CheckpointStat {
                t,
                mean: mean(totals.iter().copied()),
                p10: quantile(&totals, 0.1),
                p50: quantile(&totals, 0.5),
                p90: quantile(&totals, 0.9),
                per_agent: (0..n)
                    .map(|i| mean(reps.iter().map(|x| x.curve[k][i])))
                    .collect(),
            }
        })
        .collect();

    let burn_in = (result.config.horizon as f64 * BURN_IN_FRACTION).ceil() as u64;
    let (ts, ys): (Vec<f64>, Vec<f64>) = checkpoints
        .iter()
        .filter(|c| c.t >= burn_in)
        .map(|c| (c.t as f64, c.mean))
        .unzip();

    let per_agent = |f: &dyn Fn(&super::run::ReplicationResult, usize) -> f64| -> Vec<f64> {
        (0..n)
            .map(|i| reps.iter().map(|x| f(x, i)).sum::<f64>() / r)
            .collect()
    };
    let max_over = |f: &dyn Fn(&super::run::ReplicationResult, usize) -> f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                reps.iter()
                    .map(|x| f(x, i))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    };

    let detection = result.cd.map(|cd| {
        let changes = inst.change_rounds();
        let evals: Vec<(Vec<Option<u64>>, usize)> = reps
            .iter()
            .map(|x| evaluate_detection(&x.restarts, &changes))
            .collect();
        let observed: Vec<f64> = evals
            .iter()
            .flat_map(|(d, _)| d.iter().flatten().map(|&v| v as f64))
            .collect();
        DetectionStats {
            h: cd.h,
            alpha: cd.alpha,
            change_rounds: changes,
            mean_delay: (!observed.is_empty()).then(|| mean(observed.iter().copied())),
            all_detected_fraction: evals
                .iter()
                .filter(|(d, _)| d.iter().all(Option::is_some))
                .count() as f64
                / r,
            false_alarm_free_fraction: evals.iter().filter(|(_, f)| *f == 0).count() as f64 / r,
            false_alarms: evals.iter().map(|(_, f)| *f).collect(),
            delays: evals.into_iter().map(|(d, _)| d).collect(),
            synchronized: reps.iter().all(|x| x.restarts_synchronized),
        }
    });

    let mu_max = max_over(&|x, i| x.ledger.mu_max[i]);
    let delta_max = max_over(&|x, i| x.ledger.delta_max[i]);
    let gap = base_min_gap(inst);
    let bi = BoundInputs {
        dim: inst.dim,
        feature_bound: inst.feature_bound,
        kappa: inst.kappa,
        horizon: result.config.horizon,
        n_agents: n,
        n_envs: inst.n_envs(),
    };

    Summary {
        schema: SUMMARY_SCHEMA.to_string(),
        scenario: result.scenario.clone(),
        algorithm: result.config.algorithm.name().to_string(),
        mode: result.config.mode.name().to_string(),
        horizon: result.config.horizon,
        seed: result.config.seed,
        replications: reps.len(),
        final_regret_mean: checkpoints.last().map_or(0.0, |c| c.mean),
        final_signed_regret_mean: mean(reps.iter().map(|x| x.ledger.signed.iter().sum())),
        checkpoints,
        burn_in,
        log_fit: fit_log(&ts, &ys),
        explore_rounds_mean: per_agent(&|x, i| x.explore_rounds[i] as f64),
        gs_rounds_mean: per_agent(&|x, i| x.gs_rounds[i] as f64),
        forced_rounds_mean: mean(reps.iter().map(|x| x.forced_rounds as f64)),
        class_explore_mean: mean(reps.iter().map(|x| x.classes.explore as f64)),
        class_gs_convergence_mean: mean(reps.iter().map(|x| x.classes.gs_convergence as f64)),
        class_gs_convergence_max: reps
            .iter()
            .map(|x| x.classes.gs_convergence)
            .max()
            .unwrap_or(0),
        class_violation_mean: mean(reps.iter().map(|x| x.classes.violation as f64)),
        class_optimal_mean: mean(reps.iter().map(|x| x.classes.optimal as f64)),
        confidence_violations_mean: mean(reps.iter().map(|x| x.confidence_violations as f64)),
        spectral_violations_total: reps.iter().map(|x| x.spectral_violations).sum(),
        min_spectral_margin: reps
            .iter()
            .map(|x| x.min_spectral_margin)
            .fold(f64::INFINITY, f64::min),
        pointer_overflows_total: reps.iter().flat_map(|x| x.pointer_overflows.iter()).sum(),
        phases_mean: mean(reps.iter().map(|x| x.phases.len() as f64)),
        bounds: BoundStats {
            base_min_gap: gap,
            exploration_budget: bi.exploration_budget(gap),
            etpgs_bound_mu_max: mu_max.iter().map(|&m| bi.etpgs_bound(gap, m)).collect(),
            etpgs_bound_delta_max: delta_max.iter().map(|&m| bi.etpgs_bound(gap, m)).collect(),
        },
        mu_max,
        delta_max,
        detection,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_fit_recovers_slope() {
        let ts: Vec<f64> = (1..=50).map(|k| (k * 1000) as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 + 7.5 * t.ln()).collect();
        let f = fit_log(&ts, &ys).unwrap();
        assert!((f.b - 7.5).abs() < 0.05 * 7.5);
        assert!(f.r2 > 0.999_999);
    }

    #[test]
    fn flat_curve_has_zero_slope() {
        let ts: Vec<f64> = (1..=20).map(|k| (k * 10) as f64).collect();
        let f = fit_log(&ts, &[4.0; 20]).unwrap();
        assert!(f.b.abs() < 1e-12);
        assert_eq!(f.r2, 1.0);
        let f = fit_log(&ts, &[1584.824; 20]).unwrap();
        assert!(f.b.abs() < 1e-12);
        assert_eq!(f.r2, 1.0);
        assert!(fit_log(&[5.0], &[1.0]).is_none());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&v, 0.1) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn detection_matching() {
        let (d, fa) = evaluate_detection(&[50, 120, 130, 260], &[100, 200, 300]);
        assert_eq!(d, vec![Some(20), Some(60), None]);
        assert_eq!(fa, 2);
    }
}
