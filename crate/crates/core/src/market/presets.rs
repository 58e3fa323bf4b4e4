//! Built-in scenarios.

use super::instance::{
    ChangePoint, EnvSchedule, EnvironmentSpec, MarketInstance, NoiseModel, SwitchSpec,
    SCENARIO_SCHEMA,
};
use crate::error::{Error, Result};

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_PERIOD_C: u64 = 10;

/// Name and one-line description of every preset.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "uniform-gap-basic",
        "N=2, K=3, d=2, E=2, round-robin environments, top-(N+1) gaps of about 0.2",
    ),
    (
        "sec4-delta-example",
        "N=2, K=3, d=1, E=2; every C-th occurrence of an environment shrinks the gap to delta (--delta, --period-c)",
    ),
    (
        "table1-counterexample",
        "N=2, K=2, d=1, E=2; agent 2 ranks arms identically in both environments (fails validation)",
    ),
    (
        "piecewise-stationary",
        "uniform-gap-basic features with theta rescaled at rounds 37500, 75000 and 112500",
    ),
];

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PresetParams {
    pub delta: Option<f64>,
    pub period_c: Option<u64>,
}

pub fn by_name(name: &str, params: PresetParams) -> Result<MarketInstance> {
    match name {
        "uniform-gap-basic" => Ok(uniform_gap_basic()),
        "sec4-delta-example" | "delta-example" => {
            let delta = params.delta.unwrap_or(DEFAULT_DELTA);
            let c = params.period_c.unwrap_or(DEFAULT_PERIOD_C);
            if !(delta > 0.0 && delta < 1.0 / 3.0) {
                return Err(Error::InvalidScenario(format!(
                    "delta must lie in (0, 1/3), got {delta}"
                )));
            }
            if c == 0 {
                return Err(Error::InvalidScenario("period C must be >= 1".into()));
            }
            Ok(delta_example(delta, c))
        }
        "table1-counterexample" => Ok(table1_counterexample()),
        "piecewise-stationary" => Ok(piecewise_stationary()),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

fn v2(a: f64, b: f64) -> Vec<f64> {
    vec![a, b]
}

/// Scalar features, one list of means per agent.
fn scalar(rows: &[&[f64]]) -> Vec<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| r.iter().map(|&m| vec![m]).collect())
        .collect()
}

pub fn uniform_gap_basic() -> MarketInstance {
    // Arms A, B, C. Each agent has one strong arm per environment; the remaining
    // pair is 0.2 apart along theta and small, so it costs the most exploration.
    let e1 = EnvironmentSpec {
        name: Some("e1".into()),
        arm_prefs: vec![vec![0, 1]; 3],
        base_features: vec![
            vec![v2(3.0, 0.0), v2(0.47, 0.355), v2(0.13, 0.36)],
            vec![v2(0.6, 0.16), v2(0.0, 3.0), v2(0.25, 0.28)],
        ],
        perturbation_radius: 0.0,
        switch: None,
    };
    let e2 = EnvironmentSpec {
        name: Some("e2".into()),
        arm_prefs: vec![vec![1, 0], vec![0, 1], vec![0, 1]],
        base_features: vec![
            vec![v2(0.0, 3.0), v2(0.39, 0.21), v2(0.3, 0.5275)],
            vec![v2(3.0, 0.0), v2(0.4, 0.17), v2(0.52, 0.35)],
        ],
        perturbation_radius: 0.0,
        switch: None,
    };
    MarketInstance {
        schema: SCENARIO_SCHEMA.into(),
        name: "uniform-gap-basic".into(),
        n_agents: 2,
        n_arms: 3,
        dim: 2,
        horizon: 200_000,
        theta: vec![v2(0.6, 0.8), v2(0.8, 0.6)],
        feature_bound: 3.0,
        kappa: 0.0025,
        noise: NoiseModel::default(),
        schedule: EnvSchedule::RoundRobin,
        environments: vec![e1, e2],
        change_points: Vec::new(),
        anticipated_changes: None,
    }
}

/// Two environments over three arms in one dimension (θ = 1, so features are means).
/// Steady rounds keep the environment-distinguishing pair 1 − 2δ apart while every
/// `period_c`-th occurrence of an environment shrinks the top-(N+1) gap to δ.
pub fn delta_example(delta: f64, period_c: u64) -> MarketInstance {
    let d = delta;
    let e1 = EnvironmentSpec {
        name: Some("e1".into()),
        arm_prefs: vec![vec![0, 1]; 3],
        base_features: scalar(&[&[1.0, 1.0 - d, d], &[1.0 - d, 1.0, d]]),
        perturbation_radius: 0.0,
        switch: Some(SwitchSpec {
            period: period_c,
            features: scalar(&[&[1.0, 2.0 * d, d], &[2.0 * d, 1.0, d]]),
        }),
    };
    let e2 = EnvironmentSpec {
        name: Some("e2".into()),
        arm_prefs: vec![vec![0, 1]; 3],
        base_features: scalar(&[&[1.0, d, 1.0 - d], &[d, 1.0, 1.0 - d]]),
        perturbation_radius: 0.0,
        switch: Some(SwitchSpec {
            period: period_c,
            features: scalar(&[&[1.0, d, 2.0 * d], &[d, 1.0, 2.0 * d]]),
        }),
    };
    MarketInstance {
        schema: SCENARIO_SCHEMA.into(),
        name: "sec4-delta-example".into(),
        n_agents: 2,
        n_arms: 3,
        dim: 1,
        horizon: 100_000,
        theta: vec![vec![1.0], vec![1.0]],
        feature_bound: 1.0,
        kappa: d * d,
        noise: NoiseModel::default(),
        schedule: EnvSchedule::RoundRobin,
        environments: vec![e1, e2],
        change_points: Vec::new(),
        anticipated_changes: None,
    }
}

/// Agent 2 ranks the arms the same way in both environments, so it cannot tell
/// them apart and its GS pointer keeps cycling.
pub fn table1_counterexample() -> MarketInstance {
    let env = |p1: &[f64]| EnvironmentSpec {
        name: None,
        arm_prefs: vec![vec![0, 1]; 2],
        base_features: scalar(&[p1, &[0.9, 0.6]]),
        perturbation_radius: 0.0,
        switch: None,
    };
    let mut e1 = env(&[0.9, 0.5]);
    let mut e2 = env(&[0.5, 0.9]);
    e1.name = Some("e1".into());
    e2.name = Some("e2".into());
    MarketInstance {
        schema: SCENARIO_SCHEMA.into(),
        name: "table1-counterexample".into(),
        n_agents: 2,
        n_arms: 2,
        dim: 1,
        horizon: 10_000,
        theta: vec![vec![1.0], vec![1.0]],
        feature_bound: 1.0,
        kappa: 0.25,
        noise: NoiseModel::default(),
        schedule: EnvSchedule::RoundRobin,
        environments: vec![e1, e2],
        change_points: Vec::new(),
        anticipated_changes: None,
    }
}

pub fn piecewise_stationary() -> MarketInstance {
    let mut inst = uniform_gap_basic();
    inst.name = "piecewise-stationary".into();
    inst.horizon = 150_000;
    let scaled = |s: f64| -> Vec<Vec<f64>> {
        inst.theta
            .iter()
            .map(|th| th.iter().map(|v| v * s).collect())
            .collect()
    };
    inst.change_points = vec![
        ChangePoint {
            round: 37_500,
            theta: scaled(0.4),
        },
        ChangePoint {
            round: 75_000,
            theta: scaled(1.0),
        },
        ChangePoint {
            round: 112_500,
            theta: scaled(0.4),
        },
    ];
    inst.anticipated_changes = Some(3.0);
    inst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_all() {
        for (name, _) in PRESETS {
            let inst = by_name(name, PresetParams::default()).unwrap();
            assert_eq!(&inst.name, name);
        }
        assert!(matches!(
            by_name("nope", PresetParams::default()),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn delta_out_of_range() {
        let p = PresetParams {
            delta: Some(0.4),
            period_c: None,
        };
        assert!(by_name("sec4-delta-example", p).is_err());
    }

    #[test]
    fn uniform_gap_means() {
        let inst = uniform_gap_basic();
        let fs = crate::market::FeatureSet::from_nested(&inst.environments[0].base_features);
        let m = fs.means(&inst.theta);
        let expect = [[1.8, 0.566, 0.366], [0.576, 1.8, 0.368]];
        for i in 0..2 {
            for j in 0..3 {
                assert!((m[i][j] - expect[i][j]).abs() < 1e-12);
            }
        }
    }
}
