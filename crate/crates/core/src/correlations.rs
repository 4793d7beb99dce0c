//! Two-time correlation functions of the composite environment, the exact
//! time-dependent rates and Lamb shift obtained from them, and the closed
//! form short/long-time approximation of the rates.
//!
//! Conventions: `alpha_plus(t, tau)` takes two absolute times with
//! `0 <= tau <= t`. The term carried by RI alone is
//!
//! ```text
//! (1/2pi) int dw J_I n_I exp(i w (t - tau)) exp(-gamma(w) (t + tau))
//! ```
//!
//! with `gamma(w) = J_II(w)/2`, and the term mediated by RII is
//!
//! ```text
//! (1/4pi^2) int dw J_I(w) int dw' n_II(w') K(w, w') C(w, w', t, tau).
//! ```
//!
//! The product `K C` has its Lorentzian poles at `w' - w = +-i gamma`
//! cancelled by zeros of `C`, so it is evaluated in the entire form
//! `J_II(w') e^{i w (t-tau)} e^{-gamma (t+tau)} E(gamma + i x, t) E(gamma - i x, tau)`
//! with `x = w' - w` and `E(z, t) = (e^{z t} - 1)/z`.

use std::cell::Cell;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env_model::{CompositeEnvSpec, SystemSpec};
use crate::error::{Error, Result};
use crate::quad::{integrate_vec, Breaks, Estimate, JacobiPair, Tolerance};
use crate::special::{exp_integral, one_minus_exp_over};

/// Tolerances and truncation of the frequency quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    /// Frequencies are integrated up to this multiple of the largest cutoff.
    pub omega_max_factor: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Panel budget of each one-dimensional adaptive run.
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { omega_max_factor: 40.0, abs_tol: 1e-10, rel_tol: 1e-6, max_panels: 200_000 }
    }
}

impl QuadConfig {
    pub fn omega_max(&self, spec: &CompositeEnvSpec) -> f64 {
        self.omega_max_factor * spec.r1.spectral.omega_c.max(spec.r2.spectral.omega_c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_max_factor > 0.0) || !(self.abs_tol >= 0.0) || !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidParams(format!("invalid quadrature settings {self:?}")));
        }
        if self.abs_tol == 0.0 && self.rel_tol == 0.0 {
            return Err(Error::InvalidParams("quadrature needs a nonzero tolerance".into()));
        }
        if self.max_panels < 8 {
            return Err(Error::InvalidParams("max_panels must be at least 8".into()));
        }
        Ok(())
    }

    fn tol(&self, abs: f64) -> Tolerance {
        Tolerance::new(abs, self.rel_tol, self.max_panels)
    }
}

/// One evaluation of the Lorentzian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEval {
    pub omega: f64,
    pub omega_prime: f64,
    pub value: f64,
}

/// `K(w, w') = J_II(w') / ((J_II(w)/2)^2 + (w - w')^2)`.
pub fn lorentzian_kernel(spec: &CompositeEnvSpec, omega: f64, omega_prime: f64) -> Result<f64> {
    if !(omega >= 0.0) || !(omega_prime >= 0.0) {
        return Err(Error::Domain(format!("kernel needs nonnegative frequencies, got ({omega}, {omega_prime})")));
    }
    let g = spec.damping(omega);
    let d = omega - omega_prime;
    let den = g * g + d * d;
    let num = spec.r2.j(omega_prime);
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

impl KernelEval {
    pub fn new(spec: &CompositeEnvSpec, omega: f64, omega_prime: f64) -> Result<Self> {
        Ok(Self { omega, omega_prime, value: lorentzian_kernel(spec, omega, omega_prime)? })
    }
}

/// Both correlation functions at one `(t, tau)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaValue {
    pub t: f64,
    pub tau: f64,
    pub plus: C64,
    pub minus: C64,
}

/// Sampled rates and frequency shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTrace {
    pub times: Vec<f64>,
    pub gamma_plus: Vec<f64>,
    pub gamma_minus: Vec<f64>,
    pub delta_omega: Vec<f64>,
}

impl RateTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `P(t)` and its `n -> n+1` partner split into the RI-only part and the
/// part mediated by RII. `M(t)` is the conjugate of the partner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParts {
    pub t: f64,
    pub p_direct: C64,
    pub p_mediated: C64,
    pub q_direct: C64,
    pub q_mediated: C64,
}

impl RateParts {
    pub fn p(&self) -> C64 {
        self.p_direct + self.p_mediated
    }

    pub fn m(&self) -> C64 {
        (self.q_direct + self.q_mediated).conj()
    }

    pub fn gamma_plus(&self) -> f64 {
        2.0 * self.p().re
    }

    pub fn gamma_minus(&self) -> f64 {
        2.0 * self.m().re
    }

    pub fn delta_omega(&self) -> f64 {
        -self.p().im + self.m().im
    }

    /// Contribution of the RII-mediated term to `gamma_plus`.
    pub fn gamma_plus_mediated(&self) -> f64 {
        2.0 * self.p_mediated.re
    }

    pub fn gamma_minus_mediated(&self) -> f64 {
        2.0 * self.q_mediated.re
    }
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

/// Gauss-Jacobi rule for the `w^(s-1)` behaviour of `J n` near the origin.
fn endpoint_rule(s: f64) -> Option<JacobiPair> {
    if is_integer(s) {
        None
    } else {
        Some(JacobiPair::new(s - 1.0))
    }
}

/// Initial partition: panels of width `w` on the core `[a, b]`, panels
/// growing geometrically away from it, plus graded points around each
/// `(center, w0)`.
fn layout(lo: f64, hi: f64, w: f64, core: (f64, f64), specials: &[(f64, f64)], reach: f64) -> Vec<f64> {
    let mut b = Breaks::new(lo, hi);
    let a = core.0.clamp(lo, hi);
    let c = core.1.clamp(a, hi);
    b.uniform_between(a, c, w);
    b.point(a).point(c);
    let mut step = w;
    let mut x = c;
    while x < hi {
        step *= 1.25;
        x += step;
        b.point(x);
    }
    step = w;
    x = a;
    while x > lo {
        step *= 1.25;
        x -= step;
        b.point(x);
    }
    for &(c, w0) in specials {
        b.graded(c, w0, 4.0, reach);
    }
    b.build()
}

/// Half-width of the uniformly resolved window around the features of
/// integrands that decay away from them.
const CORE: f64 = 8.0;

fn accuracy_gate(est: Estimate) -> Result<Vec<f64>> {
    Ok(est.into_result()?.value)
}

struct InnerFailure {
    worst: Cell<Option<(f64, f64)>>,
}

impl InnerFailure {
    fn new() -> Self {
        Self { worst: Cell::new(None) }
    }

    fn record(&self, est: &Estimate) {
        if !est.converged {
            let prev = self.worst.get();
            if prev.map(|(a, r)| est.error / est.requested.max(f64::MIN_POSITIVE) > a / r.max(f64::MIN_POSITIVE)).unwrap_or(true) {
                self.worst.set(Some((est.error, est.requested)));
            }
        }
    }

    fn check(&self) -> Result<()> {
        match self.worst.get() {
            Some((achieved, requested)) => Err(Error::Accuracy { achieved, requested }),
            None => Ok(()),
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn check_pairs(pairs: &[(f64, f64)]) -> Result<()> {
    for &(t, tau) in pairs {
        if !(tau >= 0.0) || !(t >= tau) || !t.is_finite() {
            return Err(Error::Domain(format!("correlations need 0 <= tau <= t, got t = {t}, tau = {tau}")));
        }
    }
    Ok(())
}

/// Distinct values of a list, with an index map back into them.
fn distinct(values: impl Iterator<Item = f64>) -> (Vec<f64>, Vec<usize>) {
    let mut uniq: Vec<f64> = Vec::new();
    let mut idx = Vec::new();
    for v in values {
        match uniq.iter().position(|&u| u == v) {
            Some(i) => idx.push(i),
            None => {
                uniq.push(v);
                idx.push(uniq.len() - 1);
            }
        }
    }
    (uniq, idx)
}

/// Evaluate `alpha_+` and `alpha_-` at every pair in one adaptive run.
pub fn alpha_batch(spec: &CompositeEnvSpec, pairs: &[(f64, f64)], cfg: &QuadConfig) -> Result<Vec<AlphaValue>> {
    spec.validate()?;
    cfg.validate()?;
    check_pairs(pairs)?;
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let np = pairs.len();
    let dim = 4 * np;
    let wmax = cfg.omega_max(spec);
    let c1 = spec.r1.spectral.omega_c;
    let c2 = spec.r2.spectral.omega_c;
    let lag_max = pairs.iter().map(|(t, s)| t - s).fold(0.0, f64::max);
    let t_max = pairs.iter().map(|p| p.0).fold(0.0, f64::max);
    let rule1 = endpoint_rule(spec.r1.spectral.s);
    let rule2 = endpoint_rule(spec.r2.spectral.s);
    let r1 = spec.r1;
    let r2 = spec.r2;

    // RI-only term: oscillates in w only with the lag.
    let w_outer = (4.0 * PI / lag_max.max(1e-300)).min(0.5 * c1.min(1.0));
    let outer_breaks = layout(0.0, wmax, w_outer, (0.0, 30.0 * c1), &[], 0.0);
    let direct = integrate_vec(
        |w, out: &mut [f64]| {
            let g = spec.damping(w);
            let a = r1.jn(w) / (2.0 * PI);
            let b = r1.jn1(w) / (2.0 * PI);
            for (p, &(t, tau)) in pairs.iter().enumerate() {
                let damp = (-g * (t + tau)).exp();
                let ph = C64::from_polar(damp, w * (t - tau));
                out[4 * p] = a * ph.re;
                out[4 * p + 1] = a * ph.im;
                out[4 * p + 2] = b * ph.re;
                out[4 * p + 3] = -b * ph.im;
            }
        },
        dim,
        &outer_breaks,
        rule1.as_ref(),
        &cfg.tol(cfg.abs_tol),
    );
    let direct = accuracy_gate(direct)?;

    let mut total = direct.clone();
    if r2.spectral.g > 0.0 && r1.spectral.g > 0.0 {
        let scale = norm(&direct);
        let target = 0.5 * cfg.abs_tol.max(cfg.rel_tol * scale);
        let (times, ti) = distinct(pairs.iter().map(|p| p.0));
        let (taus, si) = distinct(pairs.iter().map(|p| p.1));
        let w_inner = (4.0 * PI / t_max.max(1e-300)).min(0.5 * c2.min(1.0));
        let failure = InnerFailure::new();
        let mut et = vec![C64::new(0.0, 0.0); times.len()];
        let mut es = vec![C64::new(0.0, 0.0); taus.len()];
        let norm4 = 1.0 / (4.0 * PI * PI);
        let mediated = integrate_vec(
            |w, out: &mut [f64]| {
                let g = spec.damping(w);
                let j1 = r1.j(w);
                if j1 == 0.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    return;
                }
                let ib = layout(-w, wmax - w, w_inner, (-CORE, CORE), &[(0.0, g)], w_inner);
                let inner_abs = target / (wmax * j1 * norm4);
                let inner = integrate_vec(
                    |x, o: &mut [f64]| {
                        let u = w + x;
                        let np_ = r2.jn(u);
                        let nm_ = r2.jn1(u);
                        for (k, &tk) in times.iter().enumerate() {
                            et[k] = exp_integral(C64::new(g, x), tk);
                        }
                        for (k, &sk) in taus.iter().enumerate() {
                            es[k] = exp_integral(C64::new(g, -x), sk);
                        }
                        for p in 0..np {
                            let q = et[ti[p]] * es[si[p]];
                            o[4 * p] = np_ * q.re;
                            o[4 * p + 1] = np_ * q.im;
                            o[4 * p + 2] = nm_ * q.re;
                            o[4 * p + 3] = -nm_ * q.im;
                        }
                    },
                    dim,
                    &ib,
                    rule2.as_ref(),
                    &cfg.tol(inner_abs),
                );
                failure.record(&inner);
                for (p, &(t, tau)) in pairs.iter().enumerate() {
                    let damp = (-g * (t + tau)).exp() * j1 * norm4;
                    let ph = C64::from_polar(damp, w * (t - tau));
                    let sp = C64::new(inner.value[4 * p], inner.value[4 * p + 1]);
                    let sm = C64::new(inner.value[4 * p + 2], inner.value[4 * p + 3]);
                    let vp = ph * sp;
                    let vm = ph.conj() * sm;
                    out[4 * p] = vp.re;
                    out[4 * p + 1] = vp.im;
                    out[4 * p + 2] = vm.re;
                    out[4 * p + 3] = vm.im;
                }
            },
            dim,
            &outer_breaks,
            rule1.as_ref(),
            &cfg.tol(target),
        );
        failure.check()?;
        let mediated = accuracy_gate(mediated)?;
        for (a, b) in total.iter_mut().zip(&mediated) {
            *a += b;
        }
    }

    Ok(pairs
        .iter()
        .enumerate()
        .map(|(p, &(t, tau))| AlphaValue {
            t,
            tau,
            plus: C64::new(total[4 * p], total[4 * p + 1]),
            minus: C64::new(total[4 * p + 2], total[4 * p + 3]),
        })
        .collect())
}

pub fn alpha_plus(spec: &CompositeEnvSpec, t: f64, tau: f64, cfg: &QuadConfig) -> Result<C64> {
    Ok(alpha_batch(spec, &[(t, tau)], cfg)?[0].plus)
}

pub fn alpha_minus(spec: &CompositeEnvSpec, t: f64, tau: f64, cfg: &QuadConfig) -> Result<C64> {
    Ok(alpha_batch(spec, &[(t, tau)], cfg)?[0].minus)
}

/// `P(t)` and its partner with the lag integral done in closed form.
pub fn exact_rate_parts(spec: &CompositeEnvSpec, sys: &SystemSpec, t: f64, cfg: &QuadConfig) -> Result<RateParts> {
    spec.validate()?;
    sys.validate()?;
    cfg.validate()?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("rates need t >= 0, got {t}")));
    }
    let zero = C64::new(0.0, 0.0);
    if t == 0.0 {
        return Ok(RateParts { t, p_direct: zero, p_mediated: zero, q_direct: zero, q_mediated: zero });
    }
    let w0 = sys.omega0;
    let wmax = cfg.omega_max(spec);
    let c1 = spec.r1.spectral.omega_c;
    let c2 = spec.r2.spectral.omega_c;
    let rule1 = endpoint_rule(spec.r1.spectral.s);
    let rule2 = endpoint_rule(spec.r2.spectral.s);
    let r1 = spec.r1;
    let r2 = spec.r2;
    let width = (4.0 * PI / t).min(0.5 * c1.min(1.0));
    let outer_breaks = layout(0.0, wmax, width, (w0 - CORE, w0 + CORE), &[(w0, 0.25 / t)], 8.0 * width);

    let direct = integrate_vec(
        |w, out: &mut [f64]| {
            let g = spec.damping(w);
            let e = (-2.0 * g * t).exp() * exp_integral(C64::new(g, w - w0), t) / (2.0 * PI);
            let a = r1.jn(w);
            let b = r1.jn1(w);
            out[0] = a * e.re;
            out[1] = a * e.im;
            out[2] = b * e.re;
            out[3] = b * e.im;
        },
        4,
        &outer_breaks,
        rule1.as_ref(),
        &cfg.tol(cfg.abs_tol),
    );
    let direct = accuracy_gate(direct)?;
    let mut mediated = vec![0.0; 4];
    if r2.spectral.g > 0.0 && r1.spectral.g > 0.0 {
        let target = 0.5 * cfg.abs_tol.max(cfg.rel_tol * norm(&direct));
        let norm4 = 1.0 / (4.0 * PI * PI);
        let w_inner = (4.0 * PI / t).min(0.5 * c2.min(1.0));
        let failure = InnerFailure::new();
        let est = integrate_vec(
            |w, out: &mut [f64]| {
                let g = spec.damping(w);
                let j1 = r1.j(w);
                if j1 == 0.0 {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    return;
                }
                let nu = w0 - w;
                let e_res = exp_integral(C64::new(-g, nu), t);
                let ib = layout(
                    -w,
                    wmax - w,
                    w_inner,
                    (nu.min(0.0) - CORE, nu.max(0.0) + CORE),
                    &[(0.0, g), (nu, 0.25 / t)],
                    8.0 * w_inner,
                );
                let inner_abs = target / (wmax * j1 * norm4);
                let decay = (-g * t).exp();
                let inner = integrate_vec(
                    |x, o: &mut [f64]| {
                        let u = w + x;
                        let a = decay * exp_integral(C64::new(g, x), t);
                        let d = exp_integral(C64::new(0.0, nu - x), t) - e_res;
                        let v = a * C64::new(0.0, 1.0) * d / C64::new(x, g);
                        let np_ = r2.jn(u);
                        let nm_ = r2.jn1(u);
                        o[0] = np_ * v.re;
                        o[1] = np_ * v.im;
                        o[2] = nm_ * v.re;
                        o[3] = nm_ * v.im;
                    },
                    4,
                    &ib,
                    rule2.as_ref(),
                    &cfg.tol(inner_abs),
                );
                failure.record(&inner);
                let ph = C64::from_polar(j1 * norm4, (w - w0) * t);
                let sp = ph * C64::new(inner.value[0], inner.value[1]);
                let sm = ph * C64::new(inner.value[2], inner.value[3]);
                out[0] = sp.re;
                out[1] = sp.im;
                out[2] = sm.re;
                out[3] = sm.im;
            },
            4,
            &outer_breaks,
            rule1.as_ref(),
            &cfg.tol(target),
        );
        failure.check()?;
        mediated = accuracy_gate(est)?;
    }
    Ok(RateParts {
        t,
        p_direct: C64::new(direct[0], direct[1]),
        p_mediated: C64::new(mediated[0], mediated[1]),
        q_direct: C64::new(direct[2], direct[3]),
        q_mediated: C64::new(mediated[2], mediated[3]),
    })
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Domain("time grid must start at t >= 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Exact rates on a time grid; grid points are evaluated in parallel.
pub fn decay_rates_exact(
    spec: &CompositeEnvSpec,
    sys: &SystemSpec,
    t_grid: &[f64],
    cfg: &QuadConfig,
) -> Result<RateTrace> {
    check_grid(t_grid)?;
    let parts: Vec<RateParts> =
        t_grid.par_iter().map(|&t| exact_rate_parts(spec, sys, t, cfg)).collect::<Result<_>>()?;
    Ok(RateTrace {
        times: t_grid.to_vec(),
        gamma_plus: parts.iter().map(RateParts::gamma_plus).collect(),
        gamma_minus: parts.iter().map(RateParts::gamma_minus).collect(),
        delta_omega: parts.iter().map(RateParts::delta_omega).collect(),
    })
}

/// Lamb shift `-Im P + Im M` on a time grid.
pub fn lamb_shift(spec: &CompositeEnvSpec, sys: &SystemSpec, t_grid: &[f64], cfg: &QuadConfig) -> Result<Vec<f64>> {
    Ok(decay_rates_exact(spec, sys, t_grid, cfg)?.delta_omega)
}

/// Closed-form rates `(gamma_+, gamma_-)` interpolating between the RI
/// temperature at short times and the RII temperature at long times.
pub fn decay_rates_approx(spec: &CompositeEnvSpec, sys: &SystemSpec, t: f64) -> (f64, f64) {
    let r = spec.resonant(sys.omega0);
    approx_from_resonant(&r, t)
}

#[inline]
pub(crate) fn approx_from_resonant(r: &crate::env_model::Resonant, t: f64) -> (f64, f64) {
    let x = r.j2 * t;
    // 1 - e^{-x} via the guarded series when x is tiny.
    let grow = x * one_minus_exp_over(x);
    let keep = 1.0 - grow;
    let gp = r.j1 * (r.n1 * keep + r.n2 * grow);
    let gm = r.j1 * ((r.n1 + 1.0) * keep + (r.n2 + 1.0) * grow);
    (gp, gm)
}

/// Approximate long-time part of `gamma_+`: `J_I n_II (1 - e^{-J_II t})`.
pub fn approx_mediated_gamma_plus(spec: &CompositeEnvSpec, sys: &SystemSpec, t: f64) -> f64 {
    let r = spec.resonant(sys.omega0);
    let x = r.j2 * t;
    r.j1 * r.n2 * x * one_minus_exp_over(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2() -> CompositeEnvSpec {
        CompositeEnvSpec::ohmic(1e-2, 1e-5, 10.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let s = fig2();
        let a = s.r2.j(1.0);
        let k = lorentzian_kernel(&s, 1.0, 1.0).unwrap();
        assert!((k - 4.0 / a).abs() < 1e-9 * k);
        assert!((k - 4.42e5).abs() < 1e-3 * k);
        assert!(lorentzian_kernel(&s, -1.0, 1.0).is_err());
    }

    #[test]
    fn approx_rate_examples() {
        let s = fig2();
        let sys = SystemSpec::default();
        let (gp, gm) = decay_rates_approx(&s, &sys, 0.0);
        let r = s.resonant(1.0);
        assert!((gp - r.j1 * r.n1).abs() < 1e-16);
        assert!((gm - r.j1 * (r.n1 + 1.0)).abs() < 1e-16);
        assert!((gp - 5.266e-3).abs() < 1e-6);
        let (gp_inf, _) = decay_rates_approx(&s, &sys, 1e9);
        assert!((gp_inf - r.j1 * r.n2).abs() < 1e-14);
    }

    #[test]
    fn alpha_at_origin_is_the_mean_occupation_weight() {
        let s = fig2();
        let cfg = QuadConfig::default();
        let a = alpha_batch(&s, &[(0.0, 0.0)], &cfg).unwrap()[0];
        // (1/2pi) int J/(e^{bw}-1) for s=1, b=1, wc=10: g/(2pi) int w e^{-w/10}/(e^w - 1)
        assert!(a.plus.im.abs() < 1e-12);
        assert!((a.minus - a.plus).re > 0.0);
        // alpha_- - alpha_+ at t = tau = 0 is (1/2pi) int J = g wc^2/(2 pi) for s=1
        let sum_rule = 1e-2 * 100.0 / (2.0 * PI);
        assert!(((a.minus - a.plus).re - sum_rule).abs() < 1e-6 * sum_rule);
    }

    #[test]
    fn decoupled_rii_is_stationary() {
        let s = CompositeEnvSpec::ohmic(1e-2, 0.0, 10.0, 1.0, 0.1).unwrap();
        let cfg = QuadConfig::default();
        let v = alpha_batch(&s, &[(3.0, 1.0), (7.0, 5.0)], &cfg).unwrap();
        assert!((v[0].plus - v[1].plus).norm() < 1e-9);
        assert!((v[0].minus - v[1].minus).norm() < 1e-9);
    }

    #[test]
    fn markov_limit_of_the_direct_rate() {
        let s = CompositeEnvSpec::ohmic(1e-2, 0.0, 10.0, 1.0, 0.1).unwrap();
        let sys = SystemSpec::default();
        let r = s.resonant(1.0);
        let p = exact_rate_parts(&s, &sys, 60.0, &QuadConfig::default()).unwrap();
        let target = r.j1 * r.n1;
        assert!((p.gamma_plus() - target).abs() < 2e-2 * target, "{} vs {target}", p.gamma_plus());
    }

    #[test]
    fn zero_time_rates_vanish() {
        let p = exact_rate_parts(&fig2(), &SystemSpec::default(), 0.0, &QuadConfig::default()).unwrap();
        assert_eq!(p.gamma_plus(), 0.0);
        assert_eq!(p.gamma_minus(), 0.0);
        assert_eq!(p.delta_omega(), 0.0);
    }

    #[test]
    fn rejects_bad_pairs() {
        let cfg = QuadConfig::default();
        assert!(alpha_batch(&fig2(), &[(1.0, 2.0)], &cfg).is_err());
        assert!(alpha_batch(&fig2(), &[(1.0, -0.5)], &cfg).is_err());
    }
}
