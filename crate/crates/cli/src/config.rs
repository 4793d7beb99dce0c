//! JSON experiment configuration. Every level rejects unknown keys.

use prethermal::correlations::QuadConfig;
use prethermal::dynamics::BlochState;
use prethermal::ode::OdeOptions;
use prethermal::pretherm::{ScanAxis, DEFAULT_D_PR};
use prethermal::{CompositeEnvSpec, SystemSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    /// Label of the figure this run regenerates, if any.
    #[serde(default)]
    pub figure: Option<String>,
    #[serde(default)]
    pub system: SystemSpec,
    pub environments: Vec<EnvEntry>,
    #[serde(default)]
    pub simulation: Simulation,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideLabel {
    Single,
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvEntry {
    pub side: SideLabel,
    pub spec: CompositeEnvSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    /// End of the output grid; defaults to `30/J_II(omega0)`.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
    /// First nonzero time of a log grid.
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    /// Explicit output times; overrides the generated grid.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub ode: OdeTolerances,
    #[serde(default)]
    pub quad: QuadConfig,
}

fn default_points() -> usize {
    400
}

fn default_t_min() -> f64 {
    0.1
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            t_max: None,
            points: default_points(),
            spacing: Spacing::Linear,
            t_min: default_t_min(),
            times: None,
            ode: OdeTolerances::default(),
            quad: QuadConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeTolerances {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for OdeTolerances {
    fn default() -> Self {
        let o = OdeOptions::default();
        Self { abs_tol: o.abs_tol, rel_tol: o.rel_tol }
    }
}

impl OdeTolerances {
    pub fn options(&self) -> OdeOptions {
        OdeOptions { abs_tol: self.abs_tol, rel_tol: self.rel_tol, ..OdeOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Bloch([f64; 3]),
    Thermal(f64),
    Population(f64),
}

impl InitialState {
    pub fn resolve(&self, omega0: f64) -> prethermal::Result<BlochState> {
        match *self {
            Self::Bloch([x, y, z]) => BlochState::new(x, y, z),
            Self::Thermal(beta) => Ok(BlochState::thermal(beta, omega0)),
            Self::Population(p) => BlochState::from_population(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    #[default]
    Approx,
    Exact,
}

fn default_true() -> bool {
    true
}

fn default_d_pr() -> f64 {
    DEFAULT_D_PR
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Rates {
        #[serde(default)]
        exact: bool,
    },
    Trajectory {
        initial_states: Vec<InitialState>,
        #[serde(default)]
        rates: RateSource,
        #[serde(default = "default_true")]
        lamb_shift: bool,
    },
    Ball {
        snapshot_times: Vec<f64>,
        #[serde(default)]
        initial_states: Vec<InitialState>,
    },
    PrethermScan {
        axis: ScanAxis,
        values: Vec<f64>,
        #[serde(default = "default_d_pr")]
        d_pr: f64,
        /// Fixed horizon for every point; default is each point's `30/J_II`.
        #[serde(default)]
        t_max: Option<f64>,
    },
    Heatflux {
        #[serde(default)]
        initial_populations: Vec<f64>,
        /// Also start from the quasi-stationary state of the two RI baths.
        #[serde(default)]
        include_quasi_stationary: bool,
    },
    OracleCheck {
        n: usize,
        m: usize,
        omega_max: f64,
        #[serde(default)]
        pairs: Option<Vec<[f64; 2]>>,
        #[serde(default)]
        t_values: Option<Vec<f64>>,
        #[serde(default)]
        tau_fractions: Option<Vec<f64>>,
        #[serde(default)]
        force: bool,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Rates { .. } => "rates",
            Self::Trajectory { .. } => "trajectory",
            Self::Ball { .. } => "ball",
            Self::PrethermScan { .. } => "pretherm_scan",
            Self::Heatflux { .. } => "heatflux",
            Self::OracleCheck { .. } => "oracle_check",
        }
    }
}

pub const EXPERIMENT_KINDS: [(&str, &str); 6] = [
    ("rates", "decay rates and frequency shift on the output grid"),
    ("trajectory", "Bloch-vector trajectories from chosen initial states"),
    ("ball", "radius and center of the ball of accessible states at snapshot times"),
    ("pretherm_scan", "prethermalization time along one parameter axis"),
    ("heatflux", "populations and heat fluxes between two composite environments"),
    ("oracle_check", "bath correlations from quadrature against a finite-mode bath"),
];

/// A config could not be read or is inconsistent.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    cfg.check()?;
    Ok(cfg)
}

impl ExperimentConfig {
    /// Structural checks that do not need any numerics.
    pub fn check(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        if self.environments.is_empty() {
            return err("environments: at least one environment is required".into());
        }
        for e in &self.environments {
            e.spec.validate().map_err(|x| ConfigError(format!("environments: {x}")))?;
        }
        self.system.validate().map_err(|x| ConfigError(format!("system: {x}")))?;
        self.simulation.quad.validate().map_err(|x| ConfigError(format!("simulation.quad: {x}")))?;
        let s = &self.simulation;
        if let Some(t) = s.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return err(format!("simulation.t_max must be positive, got {t}"));
            }
        }
        if let Some(times) = &s.times {
            if times.is_empty() || times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
                return err("simulation.times must be nonempty, increasing and nonnegative".into());
            }
        } else if s.points < 2 {
            return err("simulation.points must be at least 2".into());
        }
        if !(s.t_min > 0.0) {
            return err("simulation.t_min must be positive".into());
        }
        if !(s.ode.abs_tol > 0.0 && s.ode.rel_tol > 0.0) {
            return err("simulation.ode tolerances must be positive".into());
        }
        let two_sided = matches!(self.experiment, Experiment::Heatflux { .. });
        let sides: Vec<SideLabel> = self.environments.iter().map(|e| e.side).collect();
        if two_sided {
            let l = sides.iter().filter(|&&s| s == SideLabel::Left).count();
            let r = sides.iter().filter(|&&s| s == SideLabel::Right).count();
            if l != 1 || r != 1 || sides.len() != 2 {
                return err("heatflux needs exactly one left and one right environment".into());
            }
        } else if sides.len() != 1 {
            return err(format!("{} needs exactly one environment", self.experiment.kind()));
        }
        match &self.experiment {
            Experiment::Trajectory { initial_states, .. } if initial_states.is_empty() => {
                err("trajectory needs at least one initial state".into())
            }
            Experiment::Ball { snapshot_times, .. }
                if snapshot_times.is_empty() || snapshot_times.iter().any(|t| !(*t >= 0.0)) =>
            {
                err("ball needs nonnegative snapshot times".into())
            }
            Experiment::PrethermScan { values, d_pr, .. } if values.is_empty() || !(*d_pr > 0.0) => {
                err("pretherm_scan needs values and a positive d_pr".into())
            }
            Experiment::Heatflux { initial_populations, include_quasi_stationary }
                if initial_populations.is_empty() && !include_quasi_stationary =>
            {
                err("heatflux needs at least one initial population".into())
            }
            Experiment::OracleCheck { pairs, t_values, tau_fractions, .. } => {
                match (pairs, t_values, tau_fractions) {
                    (Some(p), None, None) if !p.is_empty() => Ok(()),
                    (None, Some(t), Some(f)) if !t.is_empty() && !f.is_empty() => Ok(()),
                    _ => err("oracle_check needs either pairs or both t_values and tau_fractions".into()),
                }
            }
            _ => Ok(()),
        }
    }

    pub fn single_env(&self) -> &CompositeEnvSpec {
        &self.environments[0].spec
    }

    pub fn side(&self, side: SideLabel) -> Option<&CompositeEnvSpec> {
        self.environments.iter().find(|e| e.side == side).map(|e| &e.spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "t",
        "environments": [{"side": "single", "spec": {
            "r1": {"spectral": {"g": 0.01, "s": 1, "omega_c": 10}, "beta": 1},
            "r2": {"spectral": {"g": 1e-5, "s": 1, "omega_c": 10}, "beta": 0.1}}}],
        "experiment": {"kind": "rates"}
    }"#;

    #[test]
    fn minimal_config_parses() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.experiment.kind(), "rates");
        assert_eq!(c.system.omega0, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"name\": \"t\",", "\"name\": \"t\", \"colour\": 3,");
        assert!(parse(&bad).is_err());
        let bad = MINIMAL.replace("{\"kind\": \"rates\"}", "{\"kind\": \"rates\", \"fast\": true}");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn empty_environment_list_is_rejected() {
        let v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        let mut v = v;
        v["environments"] = serde_json::json!([]);
        let e = parse(&v.to_string()).unwrap_err();
        assert!(e.0.contains("environments"));
    }
}
