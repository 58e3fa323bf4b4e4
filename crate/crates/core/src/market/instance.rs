//! Ground-truth market description and its JSON encoding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arms::ArmPreferences;
use crate::error::{Error, Result};

pub const SCENARIO_SCHEMA: &str = "ctxmatch-scenario/1";

fn default_schema() -> String {
    SCENARIO_SCHEMA.to_string()
}

fn default_std() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian {
        #[serde(default = "default_std")]
        std_dev: f64,
    },
    /// Uniform on `[-half_width, half_width]`; 1-subgaussian when `half_width <= 1`.
    Uniform { half_width: f64 },
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::Gaussian { std_dev: 1.0 }
    }
}

/// How the active environment e(t) is chosen.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSchedule {
    /// e(t) = (t − 1) mod E.
    #[default]
    RoundRobin,
    /// Independent uniform draw each round from the schedule stream.
    Iid,
    /// e(t) = envs[(t − 1) mod len], repeating.
    Sequence { envs: Vec<usize> },
}

/// Alternative features used on every `period`-th occurrence of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchSpec {
    pub period: u64,
    /// `[agent][arm][dim]`.
    pub features: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// For each arm, its order over agents (best first).
    pub arm_prefs: Vec<Vec<usize>>,
    /// `[agent][arm][dim]`.
    pub base_features: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub perturbation_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch: Option<SwitchSpec>,
}

impl EnvironmentSpec {
    pub fn arm_preferences(&self, n_agents: usize) -> Result<ArmPreferences> {
        ArmPreferences::new(self.arm_prefs.clone(), n_agents)
    }

    /// Base features for the given 1-based occurrence count of this environment.
    pub fn features_for(&self, occurrence: u64) -> &Vec<Vec<Vec<f64>>> {
        match &self.switch {
            Some(sw) if sw.period > 0 && occurrence > 0 && occurrence % sw.period == 0 => {
                &sw.features
            }
            _ => &self.base_features,
        }
    }

    /// Number of feature variants (steady plus optional switch).
    pub fn variants(&self) -> Vec<&Vec<Vec<Vec<f64>>>> {
        let mut v = vec![&self.base_features];
        if let Some(sw) = &self.switch {
            v.push(&sw.features);
        }
        v
    }
}

/// From round `round` on (inclusive) the agents' parameters are `theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangePoint {
    pub round: u64,
    pub theta: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketInstance {
    #[serde(default = "default_schema")]
    pub schema: String,
    pub name: String,
    pub n_agents: usize,
    pub n_arms: usize,
    pub dim: usize,
    pub horizon: u64,
    /// `[agent][dim]`, the parameters of the first stationary window.
    pub theta: Vec<Vec<f64>>,
    pub feature_bound: f64,
    pub kappa: f64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub schedule: EnvSchedule,
    pub environments: Vec<EnvironmentSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub change_points: Vec<ChangePoint>,
    /// Anticipated number of changes used to tune the detector when none is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anticipated_changes: Option<f64>,
}

impl MarketInstance {
    pub fn n_envs(&self) -> usize {
        self.environments.len()
    }

    pub fn n_windows(&self) -> usize {
        self.change_points.len() + 1
    }

    /// Index of the stationary window containing round `t`.
    pub fn window_at(&self, t: u64) -> usize {
        self.change_points
            .iter()
            .take_while(|c| c.round <= t)
            .count()
    }

    pub fn theta_for_window(&self, window: usize) -> &[Vec<f64>] {
        if window == 0 {
            &self.theta
        } else {
            &self.change_points[window - 1].theta
        }
    }

    pub fn change_rounds(&self) -> Vec<u64> {
        self.change_points.iter().map(|c| c.round).collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: MarketInstance = serde_json::from_str(s)?;
        if inst.schema != SCENARIO_SCHEMA {
            return Err(Error::InvalidScenario(format!(
                "unsupported schema `{}` (expected `{SCENARIO_SCHEMA}`)",
                inst.schema
            )));
        }
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn arm_preferences(&self) -> Result<Vec<ArmPreferences>> {
        self.environments
            .iter()
            .map(|e| e.arm_preferences(self.n_agents))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MarketInstance {
        MarketInstance {
            schema: SCENARIO_SCHEMA.into(),
            name: "tiny".into(),
            n_agents: 1,
            n_arms: 2,
            dim: 1,
            horizon: 10,
            theta: vec![vec![1.0]],
            feature_bound: 1.0,
            kappa: 0.25,
            noise: NoiseModel::default(),
            schedule: EnvSchedule::RoundRobin,
            environments: vec![EnvironmentSpec {
                name: None,
                arm_prefs: vec![vec![0], vec![0]],
                base_features: vec![vec![vec![1.0], vec![0.5]]],
                perturbation_radius: 0.0,
                switch: None,
            }],
            change_points: vec![ChangePoint {
                round: 5,
                theta: vec![vec![0.5]],
            }],
            anticipated_changes: None,
        }
    }

    #[test]
    fn json_round_trip() {
        let inst = tiny();
        let back = MarketInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn wrong_schema_rejected() {
        let mut inst = tiny();
        inst.schema = "other/2".into();
        let s = serde_json::to_string(&inst).unwrap();
        assert!(matches!(
            MarketInstance::from_json(&s),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn windows() {
        let inst = tiny();
        assert_eq!(inst.window_at(1), 0);
        assert_eq!(inst.window_at(4), 0);
        assert_eq!(inst.window_at(5), 1);
        assert_eq!(inst.theta_for_window(1), &[vec![0.5]]);
    }

    #[test]
    fn switch_every_period() {
        let mut env = tiny().environments.remove(0);
        env.switch = Some(SwitchSpec {
            period: 3,
            features: vec![vec![vec![0.0], vec![0.0]]],
        });
        assert_eq!(env.features_for(1), &env.base_features);
        assert_eq!(env.features_for(3)[0][0], vec![0.0]);
        assert_eq!(env.features_for(4), &env.base_features);
    }
}
