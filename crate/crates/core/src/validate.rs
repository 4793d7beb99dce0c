//! Fast self-checks used by the `validate` subcommand.

use serde::Serialize;

use crate::correlations::{alpha_batch, decay_rates_approx, QuadConfig};
use crate::dynamics::{
    accumulated_decay, ball_center, ball_radius, bloch_map, integrate_population, ApproxRates, BlochState,
    CenterMethod, PopulationOptions,
};
use crate::env_model::{CompositeEnvSpec, SystemSpec};
use crate::heatflux::{integrate_two_env, steady_flux, steady_population, Side, TwoEnvSpec};
use crate::ode::OdeOptions;
use crate::oracle::{discretize, Betas};
use crate::quad::{integrate, Breaks, Tolerance};

/// Deliberate corruption of an input, to confirm the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Negate `gamma_+` before the positivity check.
    FlipRateSign,
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    /// Include a quadrature-vs-oracle comparison with `(N, M)` modes.
    pub oracle: Option<(usize, usize)>,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn fig2() -> CompositeEnvSpec {
    CompositeEnvSpec::ohmic(1e-2, 1e-5, 10.0, 1.0, 0.1).expect("valid reference parameters")
}

fn positivity(fault: Option<Fault>) -> CheckResult {
    let spec = fig2();
    let sys = SystemSpec::default();
    let mut worst = f64::INFINITY;
    for k in 0..=120 {
        let t = 10f64.powf(-2.0 + 0.075 * k as f64);
        let (mut gp, gm) = decay_rates_approx(&spec, &sys, t);
        if fault == Some(Fault::FlipRateSign) {
            gp = -gp;
        }
        worst = worst.min(gp).min(gm);
    }
    check("rate_positivity", worst >= 0.0, format!("min rate {worst:.3e}"))
}

fn detailed_balance() -> CheckResult {
    let spec = fig2();
    let sys = SystemSpec::default();
    let (p0, m0) = decay_rates_approx(&spec, &sys, 0.0);
    let (p1, m1) = decay_rates_approx(&spec, &sys, 1e9);
    let e0 = (m0 / p0).ln() - spec.r1.beta;
    let e1 = (m1 / p1).ln() - spec.r2.beta;
    check("detailed_balance", e0.abs() < 1e-12 && e1.abs() < 1e-12, format!("log-ratio errors {e0:.2e}, {e1:.2e}"))
}

fn asymptotic_state() -> CheckResult {
    let spec = fig2();
    let sys = SystemSpec::default();
    let t = 30.0 / spec.r2.j(1.0);
    let p0 = BlochState::from_population(1.0).expect("pure state");
    let traj = integrate_population(&ApproxRates::new(&spec, &sys), &sys, &p0, &[0.0, t], &PopulationOptions::default());
    match traj {
        Ok(tr) => {
            let want = 1.0 / (1.0 + spec.r2.beta.exp());
            let err = (tr.rho_pp[1] - want).abs();
            check("asymptotic_state", err < 1e-6, format!("|rho - rho_th(beta_II)| = {err:.2e}"))
        }
        Err(e) => check("asymptotic_state", false, e.to_string()),
    }
}

fn closed_forms() -> CheckResult {
    let spec = fig2();
    let sys = SystemSpec::default();
    let j2 = spec.r2.j(1.0);
    let mut worst_c = 0.0f64;
    for lt in [0.01, 0.3, 2.0, 20.0] {
        let t = lt / j2;
        let a = ball_center(&spec, &sys, t, CenterMethod::IncompleteGamma);
        let b = ball_center(&spec, &sys, t, CenterMethod::Quadrature);
        match (a, b) {
            (Ok(a), Ok(b)) => worst_c = worst_c.max(((a - b) / b).abs()),
            (Err(e), _) | (_, Err(e)) => return check("closed_forms", false, e.to_string()),
        }
    }
    let t = 200.0;
    let (v, _) = match integrate(
        |s| {
            let (p, m) = decay_rates_approx(&spec, &sys, s);
            p + m
        },
        &Breaks::new(0.0, t).uniform(10.0).build(),
        &Tolerance::new(0.0, 1e-13, 10_000),
    ) {
        Ok(v) => v,
        Err(e) => return check("closed_forms", false, e.to_string()),
    };
    let err_r = ((-v).exp() - ball_radius(&spec, &sys, t)).abs();
    let err_g = (v - accumulated_decay(&spec, &sys, t)).abs();
    check(
        "closed_forms",
        worst_c < 1e-6 && err_r < 1e-8,
        format!("center rel err {worst_c:.2e}, radius err {err_r:.2e}, decay integral err {err_g:.2e}"),
    )
}

fn bloch_consistency() -> CheckResult {
    let spec = fig2();
    let sys = SystemSpec::default();
    let p0 = BlochState::new(0.3, -0.4, 0.6).expect("inside the ball");
    let t = 5e3;
    let map = bloch_map(&spec, &sys, &p0, t);
    let ode = integrate_population(&ApproxRates::new(&spec, &sys), &sys, &p0, &[0.0, t], &PopulationOptions::default());
    match (map, ode) {
        (Ok(m), Ok(o)) => {
            let s = o.states()[1];
            let err = m.p.iter().zip(&s.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            check("bloch_map_vs_ode", err < 1e-6, format!("max component error {err:.2e}"))
        }
        (Err(e), _) | (_, Err(e)) => check("bloch_map_vs_ode", false, e.to_string()),
    }
}

fn two_env_balance() -> CheckResult {
    let l = CompositeEnvSpec::ohmic(1e-2, 1e-3, 10.0, 1.0, 0.1).expect("valid");
    let r = CompositeEnvSpec::ohmic(1e-2, 1e-3, 10.0, 0.1, 1.0).expect("valid");
    let spec = TwoEnvSpec { left: l, right: r, sys: SystemSpec::default() };
    let t = spec.default_horizon().expect("both sides have RII");
    match integrate_two_env(&spec, 0.5, &[0.0, t], &OdeOptions::default()) {
        Ok(run) => {
            let dp = (run.rho_pp[1] - steady_population(&spec)).abs();
            let sum = run.record.flux_left[1] + run.record.flux_right[1];
            let df = (run.record.flux_right[1] - steady_flux(&spec, Side::Right)).abs();
            check(
                "two_env_steady_state",
                dp < 1e-6 && sum.abs() < 1e-8 * l.r1.j(1.0) && df < 1e-8,
                format!("population err {dp:.2e}, flux sum {sum:.2e}, flux err {df:.2e}"),
            )
        }
        Err(e) => check("two_env_steady_state", false, e.to_string()),
    }
}

fn oracle_check(n: usize, m: usize) -> CheckResult {
    let spec = fig2();
    let cfg = QuadConfig { omega_max_factor: 4.0, ..QuadConfig::default() };
    let pairs = [(3.0, 2.0)];
    let run = || -> crate::Result<f64> {
        let q = alpha_batch(&spec, &pairs, &cfg)?;
        let bath = discretize(&spec, n, m, 40.0)?;
        let o = bath.alpha_batch(&Betas::of(&spec), &pairs, false)?;
        Ok((q[0].plus - o[0].plus).norm() / o[0].plus.norm())
    };
    match run() {
        Ok(err) => check("oracle_alpha_plus", err <= 1e-2, format!("N={n} M={m}, (t,tau)=(3,2) rel err {err:.2e}")),
        Err(e) => check("oracle_alpha_plus", false, e.to_string()),
    }
}

/// Run every fast check. Order is fixed.
pub fn run_checks(opts: &ValidateOptions) -> Vec<CheckResult> {
    let mut out = vec![
        positivity(opts.fault),
        detailed_balance(),
        asymptotic_state(),
        closed_forms(),
        bloch_consistency(),
        two_env_balance(),
    ];
    if let Some((n, m)) = opts.oracle {
        out.push(oracle_check(n, m));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let res = run_checks(&ValidateOptions::default());
        for r in &res {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn injected_fault_is_caught() {
        let res = run_checks(&ValidateOptions { oracle: None, fault: Some(Fault::FlipRateSign) });
        let pos = res.iter().find(|r| r.name == "rate_positivity").unwrap();
        assert!(!pos.passed);
    }
}
