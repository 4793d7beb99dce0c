//! Prethermal plateau detection and parameter scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    accumulated_decay, integrate_population, ApproxRates, BlochState, PopulationOptions,
};
use crate::env_model::{CompositeEnvSpec, SystemSpec};
use crate::error::{Error, Result};
use crate::ode::{bisect, find_crossings};

/// Radius below which the image of the Bloch ball counts as contracted.
pub const CONTRACTED_RADIUS: f64 = 0.1;

/// Default distinguishability threshold.
pub const DEFAULT_D_PR: f64 = 1e-2;

/// Relative accuracy for event times.
const EVENT_REL: f64 = 1e-10;

/// Trace distance of two qubit states, `|p1 - p2|/2`.
pub fn trace_distance(a: &BlochState, b: &BlochState) -> f64 {
    let d: f64 = a.p.iter().zip(&b.p).map(|(x, y)| (x - y) * (x - y)).sum();
    0.5 * d.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrethermReason {
    Ok,
    NoPretherm,
    Indistinguishable,
}

impl PrethermReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::NoPretherm => "no_pretherm",
            Self::Indistinguishable => "indistinguishable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrethermResult {
    /// First time the ball radius drops to [`CONTRACTED_RADIUS`].
    pub t_contract: Option<f64>,
    /// First time the state is `d_pr` away from the RI thermal state.
    pub t_depart: Option<f64>,
    pub t_pr: Option<f64>,
    pub reason: PrethermReason,
    /// First time the state is within `d_pr` of the RII thermal state.
    pub t_ii: Option<f64>,
    /// Trace distance between the two thermal states.
    pub thermal_distance: f64,
}

/// Horizon long enough for the slow bath to take over: `30/J_II(omega0)`.
pub fn default_horizon(spec: &CompositeEnvSpec, sys: &SystemSpec) -> Option<f64> {
    let j2 = spec.r2.j(sys.omega0);
    (j2 > 0.0).then(|| 30.0 / j2)
}

fn contraction_time(spec: &CompositeEnvSpec, sys: &SystemSpec, t_max: f64) -> Option<f64> {
    let target = (1.0 / CONTRACTED_RADIUS).ln();
    let g = |t: f64| accumulated_decay(spec, sys, t) - target;
    if g(t_max) < 0.0 {
        return None;
    }
    Some(bisect(g, 0.0, t_max, EVENT_REL))
}

/// Follow the RI thermal state under the approximate rates and time its
/// departure relative to the contraction of the ball.
pub fn detect_pretherm(spec: &CompositeEnvSpec, sys: &SystemSpec, d_pr: f64, t_max: f64) -> Result<PrethermResult> {
    spec.validate()?;
    sys.validate()?;
    if !(d_pr > 0.0) {
        return Err(Error::InvalidParams(format!("d_pr must be positive, got {d_pr}")));
    }
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParams(format!("t_max must be finite and positive, got {t_max}")));
    }
    let th1 = BlochState::thermal(spec.r1.beta, sys.omega0);
    let th2 = BlochState::thermal(spec.r2.beta, sys.omega0);
    let thermal_distance = trace_distance(&th1, &th2);
    let t_contract = contraction_time(spec, sys, t_max);
    if thermal_distance < d_pr {
        return Ok(PrethermResult {
            t_contract,
            t_depart: None,
            t_pr: None,
            reason: PrethermReason::Indistinguishable,
            t_ii: None,
            thermal_distance,
        });
    }

    let rates = ApproxRates::new(spec, sys);
    let traj = integrate_population(&rates, sys, &th1, &[0.0, t_max], &PopulationOptions::default())?;
    let mesh = traj.dense.mesh();
    let z1 = th1.p[2];
    let z2 = th2.p[2];
    let pz = |t: f64| 2.0 * traj.rho_pp_at(t) - 1.0;
    let t_depart = find_crossings(&mesh, |t| 0.5 * (pz(t) - z1).abs() - d_pr, 4, EVENT_REL).first().copied();
    let t_ii = find_crossings(&mesh, |t| 0.5 * (pz(t) - z2).abs() - d_pr, 4, EVENT_REL).first().copied();

    let (t_contract, t_depart) = match (t_contract, t_depart) {
        (Some(c), Some(d)) => (c, d),
        (c, d) => {
            let missing = match (c, d) {
                (None, None) => "contraction and departure",
                (None, _) => "contraction",
                _ => "departure",
            };
            return Err(Error::Horizon { t_max, missing: missing.into() });
        }
    };
    let (t_pr, reason) = if t_depart > t_contract {
        (Some(t_depart - t_contract), PrethermReason::Ok)
    } else {
        (None, PrethermReason::NoPretherm)
    };
    Ok(PrethermResult {
        t_contract: Some(t_contract),
        t_depart: Some(t_depart),
        t_pr,
        reason,
        t_ii,
        thermal_distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanAxis {
    #[serde(rename = "beta_ii")]
    BetaII,
    #[serde(rename = "beta_i")]
    BetaI,
    #[serde(rename = "g_ii")]
    GII,
}

impl ScanAxis {
    pub fn apply(&self, template: &CompositeEnvSpec, value: f64) -> CompositeEnvSpec {
        let mut s = *template;
        match self {
            Self::BetaII => s.r2.beta = value,
            Self::BetaI => s.r1.beta = value,
            Self::GII => s.r2.spectral.g = value,
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub value: f64,
    pub thermal_distance: f64,
    pub outcome: std::result::Result<PrethermResult, String>,
}

impl ScanRow {
    pub fn t_pr(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|r| r.t_pr)
    }
}

/// How the horizon for each scan point is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// `30/J_II(omega0)` of each point.
    Auto,
    Fixed(f64),
}

/// Run [`detect_pretherm`] for every value along `axis`. Failures are kept
/// per row; output order follows `values`.
pub fn scan_tpr(
    template: &CompositeEnvSpec,
    sys: &SystemSpec,
    axis: ScanAxis,
    values: &[f64],
    d_pr: f64,
    horizon: Horizon,
) -> Result<Vec<ScanRow>> {
    if values.is_empty() {
        return Err(Error::InvalidParams("scan needs at least one value".into()));
    }
    Ok(values
        .par_iter()
        .map(|&value| {
            let spec = axis.apply(template, value);
            let thermal_distance = trace_distance(
                &BlochState::thermal(spec.r1.beta, sys.omega0),
                &BlochState::thermal(spec.r2.beta, sys.omega0),
            );
            let outcome = (|| {
                spec.validate()?;
                let t_max = match horizon {
                    Horizon::Fixed(t) => t,
                    Horizon::Auto => default_horizon(&spec, sys).ok_or_else(|| {
                        Error::InvalidParams("automatic horizon needs J_II(omega0) > 0".into())
                    })?,
                };
                detect_pretherm(&spec, sys, d_pr, t_max)
            })()
            .map_err(|e| e.to_string());
            ScanRow { value, thermal_distance, outcome }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_distance_examples() {
        let a = BlochState::thermal(1.0, 1.0);
        let b = BlochState::thermal(0.1, 1.0);
        assert_eq!(trace_distance(&a, &a), 0.0);
        assert!((trace_distance(&a, &b) - 0.20608).abs() < 1e-5);
        let up = BlochState::new(0.0, 0.0, 1.0).unwrap();
        let down = BlochState::new(0.0, 0.0, -1.0).unwrap();
        assert_eq!(trace_distance(&up, &down), 1.0);
    }

    #[test]
    fn fig2_has_a_plateau() {
        let s = CompositeEnvSpec::ohmic(1e-2, 1e-5, 10.0, 1.0, 0.1).unwrap();
        let sys = SystemSpec::default();
        let r = detect_pretherm(&s, &sys, 1e-2, default_horizon(&s, &sys).unwrap()).unwrap();
        assert_eq!(r.reason, PrethermReason::Ok);
        assert!(r.t_pr.unwrap() > 0.0);
        assert!(r.t_ii.unwrap() > r.t_depart.unwrap());
    }

    #[test]
    fn fig3_has_none() {
        let s = CompositeEnvSpec::ohmic(1e-2, 1e-2, 10.0, 1.0, 0.1).unwrap();
        let sys = SystemSpec::default();
        let r = detect_pretherm(&s, &sys, 1e-2, default_horizon(&s, &sys).unwrap()).unwrap();
        assert_eq!(r.reason, PrethermReason::NoPretherm);
        assert!(r.t_pr.is_none());
    }

    #[test]
    fn equal_temperatures_are_indistinguishable() {
        let s = CompositeEnvSpec::ohmic(1e-2, 1e-5, 10.0, 0.7, 0.7).unwrap();
        let r = detect_pretherm(&s, &SystemSpec::default(), 1e-2, 1e3).unwrap();
        assert_eq!(r.reason, PrethermReason::Indistinguishable);
    }

    #[test]
    fn short_horizon_is_an_error() {
        let s = CompositeEnvSpec::ohmic(1e-2, 1e-5, 10.0, 1.0, 0.1).unwrap();
        let e = detect_pretherm(&s, &SystemSpec::default(), 1e-2, 10.0).unwrap_err();
        assert!(matches!(e, Error::Horizon { .. }));
    }

    #[test]
    fn scan_keeps_failed_points() {
        let s = CompositeEnvSpec::ohmic(1e-2, 1e-5, 10.0, 1.0, 0.1).unwrap();
        let rows = scan_tpr(&s, &SystemSpec::default(), ScanAxis::GII, &[1e-5, -1.0, 2e-5], 1e-2, Horizon::Auto)
            .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].t_pr().is_some() && rows[2].t_pr().is_some());
        assert!(rows[1].outcome.is_err());
        assert!(rows[0].t_pr() > rows[2].t_pr());
    }
}
