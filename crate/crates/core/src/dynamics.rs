//! Bloch-form integration of the time-local master equation, and the closed
//! expressions for the ball of accessible states.
//!
//! With rates `gamma_+-(t)` the upper population obeys
//! `rho' = gamma_+ - rho (gamma_+ + gamma_-)` and the coherence
//! `c' = (-i Omega - (gamma_+ + gamma_-)) c` with `Omega = omega0 + delta_omega`.
//! The coherence is integrated in the frame rotating at `omega0`, which keeps
//! the step size tied to the rates rather than to the level splitting.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::correlations::{approx_from_resonant, RateTrace};
use crate::env_model::{CompositeEnvSpec, Resonant, SystemSpec};
use crate::error::{Error, Result};
use crate::ode::{integrate as ode_integrate, DenseSolution, OdeOptions};
use crate::quad::{integrate, Breaks, Tolerance};
use crate::special::{one_minus_exp_over, poisson_gamma_sum, scaled_upper_gamma};

/// Polarization vector of a qubit, `rho = (1 + p . sigma)/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub p: [f64; 3],
}

impl BlochState {
    pub fn new(px: f64, py: f64, pz: f64) -> Result<Self> {
        let s = Self { p: [px, py, pz] };
        if !(s.norm() <= 1.0 + 1e-9) {
            return Err(Error::InvalidParams(format!("Bloch vector {:?} lies outside the unit ball", s.p)));
        }
        Ok(s)
    }

    /// Diagonal state with upper population `rho_pp`.
    pub fn from_population(rho_pp: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_pp) {
            return Err(Error::InvalidParams(format!("population {rho_pp} outside [0, 1]")));
        }
        Self::new(0.0, 0.0, 2.0 * rho_pp - 1.0)
    }

    /// Gibbs state of `omega0 sigma_z / 2` at inverse temperature `beta`.
    pub fn thermal(beta: f64, omega0: f64) -> Self {
        Self { p: [0.0, 0.0, -(0.5 * beta * omega0).tanh()] }
    }

    pub fn norm(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn rho_pp(&self) -> f64 {
        0.5 * (1.0 + self.p[2])
    }

    /// `rho_{+-} = (p_x - i p_y)/2`.
    pub fn coherence(&self) -> C64 {
        C64::new(0.5 * self.p[0], -0.5 * self.p[1])
    }

    pub fn from_parts(rho_pp: f64, coherence: C64) -> Self {
        Self { p: [2.0 * coherence.re, -2.0 * coherence.im, 2.0 * rho_pp - 1.0] }
    }
}

/// Radius, center and accumulated phase of the image of the Bloch ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSnapshot {
    pub time: f64,
    pub radius: f64,
    pub center: f64,
    pub phase: f64,
}

/// Rates at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub delta_omega: f64,
}

/// Anything that supplies `gamma_+-(t)` and the Lamb shift.
pub trait RateModel: Sync {
    fn at(&self, t: f64) -> Rates;

    /// Upper bound on `gamma_+ + gamma_-`, if known. Used to keep the
    /// explicit integrator inside its stability region.
    fn total_rate_bound(&self) -> Option<f64> {
        None
    }
}

/// Step cap for an explicit Runge-Kutta step against decay at `rate`.
pub(crate) fn stable_step(opts: &OdeOptions, rate: Option<f64>) -> OdeOptions {
    let mut o = *opts;
    if let Some(r) = rate.filter(|r| *r > 0.0) {
        o.h_max = o.h_max.min(2.5 / r);
    }
    o
}

/// Closed-form short/long-time rates; no Lamb shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxRates {
    pub resonant: Resonant,
}

impl ApproxRates {
    pub fn new(spec: &CompositeEnvSpec, sys: &SystemSpec) -> Self {
        Self { resonant: spec.resonant(sys.omega0) }
    }
}

impl RateModel for ApproxRates {
    #[inline]
    fn at(&self, t: f64) -> Rates {
        let (gp, gm) = approx_from_resonant(&self.resonant, t);
        Rates { gamma_plus: gp, gamma_minus: gm, delta_omega: 0.0 }
    }

    fn total_rate_bound(&self) -> Option<f64> {
        Some(self.resonant.total_rate_bound())
    }
}

/// Rates from a closure `t -> (gamma_+, gamma_-, delta_omega)`.
pub struct FnRates<F>(pub F);

impl<F> RateModel for FnRates<F>
where
    F: Fn(f64) -> (f64, f64, f64) + Sync,
{
    fn at(&self, t: f64) -> Rates {
        let (gamma_plus, gamma_minus, delta_omega) = (self.0)(t);
        Rates { gamma_plus, gamma_minus, delta_omega }
    }
}

/// Cubic Hermite interpolation of a sampled rate trace, with slopes from
/// centered differences. Outside the sampled range the end values are held.
#[derive(Debug, Clone)]
pub struct InterpolatedRates {
    trace: RateTrace,
    slopes: [Vec<f64>; 3],
}

fn fd_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                0.0
            } else if i == 0 {
                (y[1] - y[0]) / (t[1] - t[0])
            } else if i == n - 1 {
                (y[n - 1] - y[n - 2]) / (t[n - 1] - t[n - 2])
            } else {
                (y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1])
            }
        })
        .collect()
}

impl InterpolatedRates {
    pub fn new(trace: RateTrace) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::Domain("rate trace is empty".into()));
        }
        if trace.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("rate trace times must be strictly increasing".into()));
        }
        let n = trace.len();
        if trace.gamma_plus.len() != n || trace.gamma_minus.len() != n || trace.delta_omega.len() != n {
            return Err(Error::Domain("rate trace columns have different lengths".into()));
        }
        let slopes = [
            fd_slopes(&trace.times, &trace.gamma_plus),
            fd_slopes(&trace.times, &trace.gamma_minus),
            fd_slopes(&trace.times, &trace.delta_omega),
        ];
        Ok(Self { trace, slopes })
    }

    fn interp(&self, col: usize, t: f64) -> f64 {
        let ts = &self.trace.times;
        let ys = match col {
            0 => &self.trace.gamma_plus,
            1 => &self.trace.gamma_minus,
            _ => &self.trace.delta_omega,
        };
        if t <= ts[0] {
            return ys[0];
        }
        let n = ts.len();
        if t >= ts[n - 1] {
            return ys[n - 1];
        }
        let i = ts.partition_point(|&x| x <= t) - 1;
        let h = ts[i + 1] - ts[i];
        let s = (t - ts[i]) / h;
        let m = &self.slopes[col];
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * ys[i] + h10 * h * m[i] + h01 * ys[i + 1] + h11 * h * m[i + 1]
    }
}

impl RateModel for InterpolatedRates {
    fn at(&self, t: f64) -> Rates {
        Rates { gamma_plus: self.interp(0, t), gamma_minus: self.interp(1, t), delta_omega: self.interp(2, t) }
    }

    fn total_rate_bound(&self) -> Option<f64> {
        let m = self.trace.gamma_plus.iter().zip(&self.trace.gamma_minus).map(|(p, m)| p + m).fold(0.0, f64::max);
        Some(1.5 * m)
    }
}

/// Options for [`integrate_population`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationOptions {
    pub ode: OdeOptions,
    /// Let the frequency shift act on the coherence phase.
    pub lamb_shift: bool,
}

impl Default for PopulationOptions {
    fn default() -> Self {
        Self { ode: OdeOptions::default(), lamb_shift: true }
    }
}

/// Sampled trajectory plus the continuous solution it came from.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho_pp: Vec<f64>,
    pub coherence: Vec<C64>,
    omega0: f64,
    pub dense: DenseSolution,
}

impl Trajectory {
    /// Upper population anywhere in the integration interval.
    pub fn rho_pp_at(&self, t: f64) -> f64 {
        self.dense.eval(t)[0]
    }

    /// Bloch vector anywhere in the integration interval.
    pub fn state_at(&self, t: f64) -> BlochState {
        let y = self.dense.eval(t);
        let c = C64::new(y[1], y[2]) * C64::from_polar(1.0, -self.omega0 * t);
        BlochState::from_parts(y[0], c)
    }

    pub fn states(&self) -> Vec<BlochState> {
        self.rho_pp.iter().zip(&self.coherence).map(|(&r, &c)| BlochState::from_parts(r, c)).collect()
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    if t_grid[0] < 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be increasing and start at t >= 0".into()));
    }
    Ok(())
}

/// Integrate population and coherence from `t = 0` over `t_grid`.
pub fn integrate_population(
    rates: &dyn RateModel,
    sys: &SystemSpec,
    p0: &BlochState,
    t_grid: &[f64],
    opts: &PopulationOptions,
) -> Result<Trajectory> {
    sys.validate()?;
    check_grid(t_grid)?;
    let rho0 = p0.rho_pp();
    if !(-1e-12..=1.0 + 1e-12).contains(&rho0) {
        return Err(Error::InvalidParams(format!("initial population {rho0} outside [0, 1]")));
    }
    let lamb = opts.lamb_shift;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let r = rates.at(t);
        let g = r.gamma_plus + r.gamma_minus;
        dy[0] = r.gamma_plus - y[0] * g;
        // rotating frame: c~' = (-i dw - g) c~
        let dw = if lamb { r.delta_omega } else { 0.0 };
        dy[1] = -g * y[1] + dw * y[2];
        dy[2] = -g * y[2] - dw * y[1];
    };
    let c0 = p0.coherence();
    let t_end = *t_grid.last().unwrap();
    let ode = stable_step(&opts.ode, rates.total_rate_bound());
    let dense = ode_integrate(&(3usize, rhs), 0.0, &[rho0, c0.re, c0.im], t_end, &ode)?;
    let mut rho_pp = Vec::with_capacity(t_grid.len());
    let mut coherence = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let y = dense.eval(t);
        rho_pp.push(y[0]);
        coherence.push(C64::new(y[1], y[2]) * C64::from_polar(1.0, -sys.omega0 * t));
    }
    Ok(Trajectory { times: t_grid.to_vec(), rho_pp, coherence, omega0: sys.omega0, dense })
}

/// `Gamma~(t) = int_0^t (gamma_+ + gamma_-)` for the approximate rates.
pub fn accumulated_decay(spec: &CompositeEnvSpec, sys: &SystemSpec, t: f64) -> f64 {
    let r = spec.resonant(sys.omega0);
    gamma_tilde(&r, t)
}

fn gamma_tilde(r: &Resonant, t: f64) -> f64 {
    r.j1 * ((2.0 * r.n2 + 1.0) * t - 2.0 * (r.n2 - r.n1) * t * one_minus_exp_over(r.j2 * t))
}

/// Radius of the ball of accessible states under the approximate rates.
pub fn ball_radius(spec: &CompositeEnvSpec, sys: &SystemSpec, t: f64) -> f64 {
    (-accumulated_decay(spec, sys, t)).exp()
}

/// How [`ball_center`] evaluates the center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMethod {
    Quadrature,
    ShortTime,
    Asymptotic,
    IncompleteGamma,
}

/// Center `c(t)` of the ball on the z-axis.
pub fn ball_center(spec: &CompositeEnvSpec, sys: &SystemSpec, t: f64, method: CenterMethod) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("ball center needs finite t >= 0, got {t}")));
    }
    let r = spec.resonant(sys.omega0);
    match method {
        CenterMethod::ShortTime => Ok(center_short_time(&r, t)),
        CenterMethod::Asymptotic => Ok(-1.0 / (2.0 * r.n2 + 1.0)),
        CenterMethod::Quadrature => center_quadrature(&r, t),
        CenterMethod::IncompleteGamma => center_incomplete_gamma(&r, t),
    }
}

fn center_short_time(r: &Resonant, t: f64) -> f64 {
    let k = 2.0 * r.n1 + 1.0;
    (-r.j1 * k * t).exp_m1() / k
}

/// `c(t) = -J_I int_0^t exp(-(Gamma~(t) - Gamma~(t - s))) ds` on the lag `s`.
fn center_quadrature(r: &Resonant, t: f64) -> Result<f64> {
    if t == 0.0 || r.j1 == 0.0 {
        return Ok(0.0);
    }
    let exponent = |s: f64| {
        // Gamma~(t) - Gamma~(t-s), written without cancellation
        let tail = (-r.j2 * (t - s)).exp() * s * one_minus_exp_over(r.j2 * s);
        r.j1 * ((2.0 * r.n2 + 1.0) * s + 2.0 * (r.n1 - r.n2) * tail)
    };
    // The exponent is increasing in s; cut where the integrand underflows.
    let mut hi = t;
    if exponent(t) > 745.0 {
        let (mut lo, mut up) = (0.0, t);
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if exponent(mid) > 745.0 {
                up = mid;
            } else {
                lo = mid;
            }
        }
        hi = up;
    }
    let k_max = r.j1 * (2.0 * r.n1.max(r.n2) + 1.0);
    let bk = Breaks::new(0.0, hi).graded(0.0, 0.05 / k_max, 2.0, hi).build();
    let tol = Tolerance::new(0.0, 1e-12, 100_000);
    let (v, _) = integrate(|s| (-exponent(s)).exp(), &bk, &tol)?;
    Ok(-r.j1 * v)
}

/// Closed form as a difference of incomplete gamma functions.
///
/// With `A = 2(n_I - n_II) J_I/J_II`, `B = (2 n_II + 1) J_I/J_II` and
/// `eps = exp(-J_II t)`, `c = -(J_I/J_II) e^{A eps} (A eps)^B [G(-B, A eps) - G(-B, A)]`.
/// For `A > 0` the upper gammas are evaluated in scaled form. For `A <= 0`
/// the gammas have negative argument; their difference is taken from the
/// power series of the lower incomplete gamma, which pairs into a sum of
/// positive terms weighted by a Poisson distribution.
fn center_incomplete_gamma(r: &Resonant, t: f64) -> Result<f64> {
    if t == 0.0 || r.j1 == 0.0 {
        return Ok(0.0);
    }
    if r.j2 == 0.0 {
        return Ok(center_short_time(r, t));
    }
    let ratio = r.j1 / r.j2;
    let a = 2.0 * (r.n1 - r.n2) * ratio;
    let b = (2.0 * r.n2 + 1.0) * ratio;
    let l = r.j2 * t;
    let eps = (-l).exp();
    let value = if a > 0.0 {
        let near = scaled_upper_gamma(b, a * eps)?;
        let far = scaled_upper_gamma(b, a)?;
        near - (-b * l + a * (eps - 1.0)).exp() * far
    } else {
        poisson_gamma_sum(-a * eps, b, l)?
    };
    if !value.is_finite() {
        return Err(Error::Special(format!("incomplete gamma difference not finite at t = {t}")));
    }
    Ok(-ratio * value)
}

/// Ball parameters at one time, with the phase `omega0 t` of the
/// approximate (shift-free) dynamics.
pub fn ball_snapshot(spec: &CompositeEnvSpec, sys: &SystemSpec, t: f64) -> Result<BallSnapshot> {
    Ok(BallSnapshot {
        time: t,
        radius: ball_radius(spec, sys, t),
        center: ball_center(spec, sys, t, CenterMethod::IncompleteGamma)?,
        phase: sys.omega0 * t,
    })
}

/// `p(t) = r(t) R_z(Omega~(t)) p0 + (0, 0, c(t))`.
pub fn bloch_map(spec: &CompositeEnvSpec, sys: &SystemSpec, p0: &BlochState, t: f64) -> Result<BlochState> {
    if !(p0.norm() <= 1.0 + 1e-9) {
        return Err(Error::InvalidParams(format!("Bloch vector {:?} lies outside the unit ball", p0.p)));
    }
    let b = ball_snapshot(spec, sys, t)?;
    Ok(apply_ball(&b, p0))
}

pub fn apply_ball(b: &BallSnapshot, p0: &BlochState) -> BlochState {
    let (s, c) = b.phase.sin_cos();
    let [x, y, z] = p0.p;
    BlochState { p: [b.radius * (c * x - s * y), b.radius * (s * x + c * y), b.radius * z + b.center] }
}

/// Ratio `J_I(2 n_I + 1)/J_II` at the system frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrethermCondition {
    pub ratio: f64,
    pub holds: bool,
}

/// Threshold on the ratio above which the separation of scales counts as
/// strong enough for a prethermal plateau.
pub const PRETHERM_RATIO_THRESHOLD: f64 = 1e2;

pub fn pretherm_condition(spec: &CompositeEnvSpec, sys: &SystemSpec) -> PrethermCondition {
    let r = spec.resonant(sys.omega0);
    let num = r.j1 * (2.0 * r.n1 + 1.0);
    let ratio = if r.j2 == 0.0 { f64::INFINITY } else { num / r.j2 };
    PrethermCondition { ratio, holds: ratio >= PRETHERM_RATIO_THRESHOLD }
}
