//! A qubit between two composite environments: heat fluxes, quasi-stationary
//! populations and sign changes of the current.
//!
//! Fluxes are stored in the into-system convention, `J^nu > 0` when
//! environment `nu` feeds energy into the qubit.

use serde::{Deserialize, Serialize};

use crate::correlations::approx_from_resonant;
use crate::dynamics::stable_step;
use crate::env_model::{CompositeEnvSpec, Resonant, SystemSpec};
use crate::error::{Error, Result};
use crate::ode::{find_crossings, integrate as ode_integrate, DenseSolution, OdeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoEnvSpec {
    pub left: CompositeEnvSpec,
    pub right: CompositeEnvSpec,
    #[serde(default)]
    pub sys: SystemSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Which reservoir temperature a side currently presents to the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    I,
    II,
}

impl TwoEnvSpec {
    pub fn new(left: CompositeEnvSpec, right: CompositeEnvSpec, sys: SystemSpec) -> Result<Self> {
        let s = Self { left, right, sys };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        self.sys.validate()
    }

    pub fn side(&self, side: Side) -> &CompositeEnvSpec {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Swap the two environments.
    pub fn mirrored(&self) -> Self {
        Self { left: self.right, right: self.left, sys: self.sys }
    }

    /// `30/min(J_II^L, J_II^R)` at the system frequency, ignoring sides
    /// without a second reservoir.
    pub fn default_horizon(&self) -> Option<f64> {
        let w = self.sys.omega0;
        let j = [self.left.r2.j(w), self.right.r2.j(w)].into_iter().filter(|&j| j > 0.0).fold(f64::INFINITY, f64::min);
        j.is_finite().then(|| 30.0 / j)
    }
}

/// Sampled fluxes and energy along one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxRecord {
    pub times: Vec<f64>,
    pub flux_left: Vec<f64>,
    pub flux_right: Vec<f64>,
    pub energy: Vec<f64>,
}

impl FluxRecord {
    /// Right-positive, left-negative presentation: `J^R - J^L`.
    pub fn plotted(&self) -> Vec<f64> {
        self.flux_right.iter().zip(&self.flux_left).map(|(r, l)| r - l).collect()
    }
}

/// One two-environment trajectory.
#[derive(Debug, Clone)]
pub struct TwoEnvRun {
    pub record: FluxRecord,
    pub rho_pp: Vec<f64>,
    pub dense: DenseSolution,
    left: Resonant,
    right: Resonant,
    omega0: f64,
}

fn into_system(r: &Resonant, omega0: f64, t: f64, rho: f64) -> f64 {
    let (gp, gm) = approx_from_resonant(r, t);
    omega0 * (gp - rho * (gp + gm))
}

impl TwoEnvRun {
    pub fn rho_pp_at(&self, t: f64) -> f64 {
        self.dense.eval(t)[0]
    }

    /// `(J^L, J^R)` at any time of the integration interval.
    pub fn fluxes_at(&self, t: f64) -> (f64, f64) {
        let rho = self.rho_pp_at(t);
        (into_system(&self.left, self.omega0, t, rho), into_system(&self.right, self.omega0, t, rho))
    }

    pub fn quantity_at(&self, q: FluxQuantity, t: f64) -> f64 {
        let (l, r) = self.fluxes_at(t);
        match q {
            FluxQuantity::RightIntoSystem => r,
            FluxQuantity::LeftIntoSystem => l,
            FluxQuantity::Plotted => r - l,
            FluxQuantity::Transport => 0.5 * (r - l),
        }
    }
}

/// Integrate the upper population under both environments' approximate
/// rates, starting from a diagonal state.
pub fn integrate_two_env(spec: &TwoEnvSpec, rho0: f64, t_grid: &[f64], opts: &OdeOptions) -> Result<TwoEnvRun> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&rho0) {
        return Err(Error::InvalidParams(format!("initial population {rho0} outside [0, 1]")));
    }
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be nonempty, increasing and start at t >= 0".into()));
    }
    let w0 = spec.sys.omega0;
    let left = spec.left.resonant(w0);
    let right = spec.right.resonant(w0);
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (lp, lm) = approx_from_resonant(&left, t);
        let (rp, rm) = approx_from_resonant(&right, t);
        dy[0] = lp + rp - y[0] * (lp + lm + rp + rm);
    };
    let ode = stable_step(opts, Some(left.total_rate_bound() + right.total_rate_bound()));
    let dense = ode_integrate(&(1usize, rhs), 0.0, &[rho0], *t_grid.last().unwrap(), &ode)?;
    let rho_pp: Vec<f64> = t_grid.iter().map(|&t| dense.eval(t)[0]).collect();
    let mut record = FluxRecord {
        times: t_grid.to_vec(),
        flux_left: Vec::with_capacity(t_grid.len()),
        flux_right: Vec::with_capacity(t_grid.len()),
        energy: Vec::with_capacity(t_grid.len()),
    };
    for (&t, &rho) in t_grid.iter().zip(&rho_pp) {
        record.flux_left.push(into_system(&left, w0, t, rho));
        record.flux_right.push(into_system(&right, w0, t, rho));
        record.energy.push(w0 * (rho - 0.5));
    }
    Ok(TwoEnvRun { record, rho_pp, dense, left, right, omega0: w0 })
}

fn stage_occupation(r: &Resonant, stage: Stage) -> f64 {
    match stage {
        Stage::I => r.n1,
        Stage::II => r.n2,
    }
}

/// Fixed point of the population equation with each side frozen at the
/// given stage.
pub fn quasi_stationary_population(spec: &TwoEnvSpec, left: Stage, right: Stage) -> f64 {
    let w0 = spec.sys.omega0;
    let l = spec.left.resonant(w0);
    let r = spec.right.resonant(w0);
    let nl = stage_occupation(&l, left);
    let nr = stage_occupation(&r, right);
    (l.j1 * nl + r.j1 * nr) / (l.j1 * (2.0 * nl + 1.0) + r.j1 * (2.0 * nr + 1.0))
}

/// Into-system flux from `side` in the quasi-stationary state of the given
/// stages.
pub fn quasi_stationary_flux(spec: &TwoEnvSpec, side: Side, left: Stage, right: Stage) -> f64 {
    let rho = quasi_stationary_population(spec, left, right);
    let w0 = spec.sys.omega0;
    let (r, stage) = match side {
        Side::Left => (spec.left.resonant(w0), left),
        Side::Right => (spec.right.resonant(w0), right),
    };
    let n = stage_occupation(&r, stage);
    w0 * r.j1 * (n - rho * (2.0 * n + 1.0))
}

fn final_stage(env: &CompositeEnvSpec, omega0: f64) -> Stage {
    if env.r2.j(omega0) > 0.0 {
        Stage::II
    } else {
        Stage::I
    }
}

/// Long-time into-system flux from `side`. A side without a second
/// reservoir keeps its first-stage temperature forever.
pub fn steady_flux(spec: &TwoEnvSpec, side: Side) -> f64 {
    let w0 = spec.sys.omega0;
    quasi_stationary_flux(spec, side, final_stage(&spec.left, w0), final_stage(&spec.right, w0))
}

/// Long-time population, the counterpart of [`steady_flux`].
pub fn steady_population(spec: &TwoEnvSpec) -> f64 {
    let w0 = spec.sys.omega0;
    quasi_stationary_population(spec, final_stage(&spec.left, w0), final_stage(&spec.right, w0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTemperature {
    pub beta: f64,
    /// Set when the upper level holds at least half the population.
    pub inverted: bool,
}

/// `beta_eff = ln((1 - rho)/rho)/omega0`.
pub fn effective_temperature(rho_pp: f64, omega0: f64) -> Result<EffectiveTemperature> {
    if !(omega0 > 0.0) {
        return Err(Error::InvalidParams(format!("omega0 must be positive, got {omega0}")));
    }
    if !(0.0..=1.0).contains(&rho_pp) {
        return Err(Error::Domain(format!("population {rho_pp} outside [0, 1]")));
    }
    if rho_pp == 0.0 || rho_pp == 1.0 {
        return Err(Error::InfiniteTemperature(format!("population {rho_pp} has no finite effective temperature")));
    }
    let beta = ((1.0 - rho_pp) / rho_pp).ln() / omega0;
    Ok(EffectiveTemperature { beta, inverted: rho_pp >= 0.5 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxQuantity {
    RightIntoSystem,
    LeftIntoSystem,
    /// `J^R - J^L`.
    Plotted,
    /// `(J^R - J^L)/2`.
    Transport,
}

/// Zero crossings of a flux quantity, located on the continuous solution.
pub fn detect_sign_flips(run: &TwoEnvRun, quantity: FluxQuantity) -> Vec<f64> {
    let t0 = run.record.times[0];
    let mesh: Vec<f64> = run.dense.mesh().into_iter().filter(|&t| t >= t0).collect();
    let mut pts = vec![t0];
    pts.extend(mesh.into_iter().filter(|&t| t > t0));
    // The quantity is identically zero for mirror-symmetric settings; treat
    // values at roundoff level as zero so they never register as flips.
    let scale = run.omega0 * (run.left.total_rate_bound() + run.right.total_rate_bound());
    let floor = 1e-12 * scale;
    find_crossings(
        &pts,
        |t| {
            let v = run.quantity_at(quantity, t);
            if v.abs() <= floor {
                0.0
            } else {
                v
            }
        },
        4,
        1e-10,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig7c() -> TwoEnvSpec {
        TwoEnvSpec::new(
            CompositeEnvSpec::ohmic(1e-2, 0.0, 10.0, 1.0, 1.0).unwrap(),
            CompositeEnvSpec::ohmic(1e-2, 0.0, 10.0, 0.1, 0.1).unwrap(),
            SystemSpec::default(),
        )
        .unwrap()
    }

    #[test]
    fn quasi_stationary_examples() {
        let s = fig7c();
        assert!((quasi_stationary_population(&s, Stage::I, Stage::I) - 0.45492).abs() < 1e-5);
        let flux = steady_flux(&s, Side::Right);
        assert!((flux - 3.64e-3).abs() < 0.01 * 3.64e-3, "{flux}");
        assert!((steady_flux(&s, Side::Left) + flux).abs() < 1e-15);
        assert!((steady_flux(&s.mirrored(), Side::Left) - flux).abs() < 1e-15);
        let eq = TwoEnvSpec::new(s.left, s.left, s.sys).unwrap();
        let th = 1.0 / (1.0 + 1f64.exp());
        assert!((quasi_stationary_population(&eq, Stage::II, Stage::II) - th).abs() < 1e-14);
        assert_eq!(steady_flux(&eq, Side::Right), 0.0);
    }

    #[test]
    fn fig7d_stage_swap_symmetry() {
        let l = CompositeEnvSpec::ohmic(1e-2, 1e-3, 10.0, 1.0, 0.1).unwrap();
        let r = CompositeEnvSpec::ohmic(1e-2, 1e-3, 10.0, 0.1, 1.0).unwrap();
        let s = TwoEnvSpec::new(l, r, SystemSpec::default()).unwrap();
        let a = quasi_stationary_population(&s, Stage::I, Stage::I);
        let b = quasi_stationary_population(&s, Stage::II, Stage::II);
        assert!((a - 0.45492).abs() < 1e-5 && (a - b).abs() < 1e-14);
    }

    #[test]
    fn effective_temperature_examples() {
        let t = effective_temperature(1.0 / (1.0 + 1f64.exp()), 1.0).unwrap();
        assert!((t.beta - 1.0).abs() < 1e-14 && !t.inverted);
        let half = effective_temperature(0.5, 1.0).unwrap();
        assert!(half.beta == 0.0 && half.inverted);
        assert!((effective_temperature(0.45492, 1.0).unwrap().beta - 0.18086).abs() < 1e-4);
        assert!(effective_temperature(0.7, 1.0).unwrap().inverted);
        assert!(matches!(effective_temperature(0.0, 1.0), Err(Error::InfiniteTemperature(_))));
        assert!(effective_temperature(1.2, 1.0).is_err());
    }

    #[test]
    fn equilibrium_has_no_flux() {
        let e = CompositeEnvSpec::ohmic(1e-2, 1e-3, 10.0, 0.5, 0.5).unwrap();
        let s = TwoEnvSpec::new(e, e, SystemSpec::default()).unwrap();
        let rho = 1.0 / (1.0 + 0.5f64.exp());
        let grid: Vec<f64> = (0..=100).map(|i| 100.0 * i as f64).collect();
        let run = integrate_two_env(&s, rho, &grid, &OdeOptions::default()).unwrap();
        assert!(run.record.flux_left.iter().chain(&run.record.flux_right).all(|f| f.abs() < 1e-15));
        assert!(detect_sign_flips(&run, FluxQuantity::Plotted).is_empty());
        assert!(detect_sign_flips(&run, FluxQuantity::RightIntoSystem).is_empty());
    }

    #[test]
    fn all_initial_states_reach_the_same_flux() {
        let s = fig7c();
        let grid = [0.0, 2000.0];
        let target = steady_flux(&s, Side::Right);
        for rho0 in [0.0, 0.3, 0.7, 1.0] {
            let run = integrate_two_env(&s, rho0, &grid, &OdeOptions::default()).unwrap();
            assert!((run.record.flux_right[1] - target).abs() < 1e-9);
        }
    }
}
