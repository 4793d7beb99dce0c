//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any of them fails.

use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use prethermal::correlations::{
    alpha_batch, decay_rates_approx, exact_rate_parts, QuadConfig,
};
use prethermal::dynamics::{
    ball_center, ball_radius, bloch_map, integrate_population, ApproxRates, BlochState, CenterMethod,
    PopulationOptions, Trajectory,
};
use prethermal::heatflux::{
    detect_sign_flips, integrate_two_env, quasi_stationary_population, steady_flux, FluxQuantity, Side, Stage,
    TwoEnvSpec,
};
use prethermal::ode::{find_crossings, OdeOptions};
use prethermal::oracle::{discretize, Betas};
use prethermal::pretherm::{detect_pretherm, scan_tpr, Horizon, PrethermReason, ScanAxis};
use prethermal::quad::{integrate, Breaks, Tolerance};
use prethermal::{BathSpec, CompositeEnvSpec, SpectralParams, SystemSpec};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn ohmic(g1: f64, g2: f64, b1: f64, b2: f64) -> CompositeEnvSpec {
    CompositeEnvSpec::ohmic(g1, g2, 10.0, b1, b2).unwrap()
}

fn rho_thermal(beta: f64) -> f64 {
    1.0 / (1.0 + beta.exp())
}

fn pure_states() -> Vec<BlochState> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [h, 0.0, h], [0.0, h, -h]]
        .iter()
        .map(|p| BlochState::new(p[0], p[1], p[2]).unwrap())
        .collect()
}

/// Maximal intervals on which `dist(t) <= tol`, located on the dense output.
fn windows_within(traj: &Trajectory, target: f64, tol: f64) -> Vec<(f64, f64)> {
    let mesh = traj.dense.mesh();
    let g = |t: f64| (traj.rho_pp_at(t) - target).abs() - tol;
    let crossings = find_crossings(&mesh, g, 4, 1e-10);
    let (t0, t1) = (mesh[0], *mesh.last().unwrap());
    let mut inside = g(t0) <= 0.0;
    let mut start = t0;
    let mut out = Vec::new();
    for c in crossings {
        if inside {
            out.push((start, c));
        } else {
            start = c;
        }
        inside = !inside;
    }
    if inside {
        out.push((start, t1));
    }
    out
}

fn longest(w: &[(f64, f64)]) -> f64 {
    w.iter().map(|(a, b)| b - a).fold(0.0, f64::max)
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn weak_env() -> impl Strategy<Value = CompositeEnvSpec> {
    (log_uniform(1e-3, 2e-2), log_uniform(1e-5, 1e-3), 0.5f64..1.5, 2.0f64..20.0, 0.1f64..5.0, 0.1f64..5.0)
        .prop_map(|(g1, g2, s, wc, b1, b2)| {
            CompositeEnvSpec::new(
                BathSpec::new(SpectralParams::new(g1, s, wc).unwrap(), b1).unwrap(),
                BathSpec::new(SpectralParams::new(g2, s, wc).unwrap(), b2).unwrap(),
            )
            .unwrap()
        })
}

fn plateau_reproduction() -> Verdict {
    let spec = ohmic(1e-2, 1e-5, 1.0, 0.1);
    let sys = SystemSpec::default();
    let t_end = 30.0 / spec.r2.j(1.0);
    let rates = ApproxRates::new(&spec, &sys);
    let (rho1, rho2) = (rho_thermal(1.0), rho_thermal(0.1));
    let mut min_window = f64::INFINITY;
    let mut max_final = 0.0f64;
    for p in pure_states() {
        let tr = integrate_population(&rates, &sys, &p, &[0.0, t_end], &PopulationOptions::default()).unwrap();
        min_window = min_window.min(longest(&windows_within(&tr, rho1, 1e-2)));
        max_final = max_final.max((tr.rho_pp[1] - rho2).abs());
    }
    verdict(
        min_window >= 1e3 && max_final <= 1e-3,
        format!(
            "8 pure states; shortest plateau window {min_window:.1} (need >= 1000); \
             max |rho - {rho2:.5}| at t = {t_end:.4e} is {max_final:.2e} (need <= 1e-3)"
        ),
    )
}

fn no_plateau_control() -> Verdict {
    let spec = ohmic(1e-2, 1e-2, 1.0, 0.1);
    let sys = SystemSpec::default();
    let t_end = 30.0 / spec.r2.j(1.0);
    let res = detect_pretherm(&spec, &sys, 1e-2, t_end).unwrap();
    let rates = ApproxRates::new(&spec, &sys);
    let mut max_window = 0.0f64;
    for p in pure_states() {
        let tr = integrate_population(&rates, &sys, &p, &[0.0, t_end], &PopulationOptions::default()).unwrap();
        max_window = max_window.max(longest(&windows_within(&tr, rho_thermal(1.0), 1e-2)));
    }
    verdict(
        res.reason == PrethermReason::NoPretherm && max_window <= 10.0,
        format!("reason {}; longest stay within d_pr of the RI thermal state {max_window:.2} (need <= 10)", res.reason.as_str()),
    )
}

fn inverse_coupling_scaling() -> Verdict {
    let spec = ohmic(1e-2, 1e-5, 1.1, 0.5);
    let g = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3];
    let rows = scan_tpr(&spec, &SystemSpec::default(), ScanAxis::GII, &g, 1e-2, Horizon::Auto).unwrap();
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.t_pr().map(|t| (r.value.ln(), t.ln()))).collect();
    let slope = |p: &[(f64, f64)]| {
        let n = p.len() as f64;
        let mx = p.iter().map(|q| q.0).sum::<f64>() / n;
        let my = p.iter().map(|q| q.1).sum::<f64>() / n;
        let sxy: f64 = p.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
        let sxx: f64 = p.iter().map(|q| (q.0 - mx) * (q.0 - mx)).sum();
        sxy / sxx
    };
    let reasons: Vec<String> = rows
        .iter()
        .map(|r| match &r.outcome {
            Ok(p) => p.reason.as_str().to_string(),
            Err(e) => e.clone(),
        })
        .collect();
    let all = pts.len() == g.len();
    let s = if pts.len() >= 2 { slope(&pts) } else { f64::NAN };
    verdict(
        all && (s + 1.0).abs() <= 0.1,
        format!(
            "t_pr defined at {}/{} couplings ({}); log-log slope over defined points {s:.3} (need all five and -1 +- 0.1)",
            pts.len(),
            g.len(),
            reasons.join(", ")
        ),
    )
}

fn asymptotic_thermal_state() -> Verdict {
    let worst = Cell::new(0.0f64);
    let res = runner(20).run(&(weak_env(), 0.0f64..=1.0), |(spec, rho0)| {
        let sys = SystemSpec::default();
        let t = 30.0 / spec.r2.j(1.0);
        let p0 = BlochState::from_population(rho0).unwrap();
        let tr = integrate_population(&ApproxRates::new(&spec, &sys), &sys, &p0, &[0.0, t], &PopulationOptions::default())
            .unwrap();
        let err = (tr.rho_pp[1] - rho_thermal(spec.r2.beta)).abs();
        worst.set(worst.get().max(err));
        prop_assert!(err <= 1e-6, "error {err:.2e} for {spec:?}");
        Ok(())
    });
    verdict(res.is_ok(), format!("20 random weak-coupling sets; worst |rho - rho_th(beta_II)| {:.2e}{}", worst.get(), res.err().map(|e| format!("; {e}")).unwrap_or_default()))
}

fn two_env_steady_state() -> Verdict {
    let sys = SystemSpec::default();
    let cases = [
        TwoEnvSpec::new(ohmic(1e-2, 1e-3, 1.0, 0.1), ohmic(1e-2, 1e-3, 0.1, 1.0), sys).unwrap(),
        TwoEnvSpec::new(ohmic(1e-2, 1e-5, 0.5, 10.0), ohmic(1e-2, 1e-2, 0.1, 1.0), sys).unwrap(),
        TwoEnvSpec::new(ohmic(5e-3, 2e-4, 2.0, 0.3), ohmic(1.5e-2, 1e-3, 0.7, 1.5), sys).unwrap(),
    ];
    let mut worst_pop = 0.0f64;
    let mut worst_sum = 0.0f64;
    for spec in &cases {
        let t = spec.default_horizon().unwrap();
        let run = integrate_two_env(spec, 0.9, &[0.0, t], &OdeOptions::default()).unwrap();
        worst_pop = worst_pop.max((run.rho_pp[1] - quasi_stationary_population(spec, Stage::II, Stage::II)).abs());
        let scale = spec.sys.omega0 * spec.left.r1.j(1.0).max(spec.right.r1.j(1.0));
        worst_sum = worst_sum.max((run.record.flux_left[1] + run.record.flux_right[1]).abs() / scale);
    }
    let fig7c = TwoEnvSpec::new(ohmic(1e-2, 0.0, 1.0, 1.0), ohmic(1e-2, 0.0, 0.1, 0.1), sys).unwrap();
    let closed = steady_flux(&fig7c, Side::Right);
    let run = integrate_two_env(&fig7c, 0.0, &[0.0, 3000.0], &OdeOptions::default()).unwrap();
    let integrated = run.record.flux_right[1];
    let rel = ((closed - 3.64e-3) / 3.64e-3).abs().max(((integrated - 3.64e-3) / 3.64e-3).abs());
    verdict(
        worst_pop <= 1e-6 && worst_sum <= 1e-8 && rel <= 1e-2,
        format!(
            "population vs closed form {worst_pop:.2e} (<= 1e-6); |J_L + J_R|/(omega0 J_I) {worst_sum:.2e} (<= 1e-8); \
             equilibrium-bath right flux {closed:.5e} closed, {integrated:.5e} integrated, rel dev from 3.64e-3 {rel:.2e} (<= 1e-2)"
        ),
    )
}

fn flux_sign_flips() -> Verdict {
    let sys = SystemSpec::default();
    let d = TwoEnvSpec::new(ohmic(1e-2, 1e-3, 1.0, 0.1), ohmic(1e-2, 1e-3, 0.1, 1.0), sys).unwrap();
    let e = TwoEnvSpec::new(ohmic(1e-2, 1e-5, 0.5, 10.0), ohmic(1e-2, 1e-2, 0.1, 1.0), sys).unwrap();
    let count = |s: &TwoEnvSpec| {
        let rho0 = quasi_stationary_population(s, Stage::I, Stage::I);
        let run = integrate_two_env(s, rho0, &[0.0, s.default_horizon().unwrap()], &OdeOptions::default()).unwrap();
        detect_sign_flips(&run, FluxQuantity::Plotted)
    };
    let (cd, ce) = (count(&d), count(&e));
    verdict(
        cd.len() == 1 && ce.len() == 2,
        format!("reversed-ordering setup: {} crossing(s) at {cd:.4?} (need 1); staggered setup: {} at {ce:.4?} (need 2)", cd.len(), ce.len()),
    )
}

fn closed_form_cross_checks() -> Verdict {
    let sys = SystemSpec::default();
    let mut worst_c = 0.0f64;
    let mut sets = vec![ohmic(1e-2, 1e-5, 1.0, 0.1), ohmic(1e-2, 1e-3, 1.1, 0.5), ohmic(1e-2, 1e-4, 0.2, 3.0)];
    let mut rng = runner(1);
    for _ in 0..5 {
        sets.push(weak_env().new_tree(&mut rng).unwrap().current());
    }
    for spec in &sets {
        let j2 = spec.r2.j(1.0);
        for k in 0..=30 {
            let lt = 0.01 * (2000f64).powf(k as f64 / 30.0);
            let t = lt / j2;
            let a = ball_center(spec, &sys, t, CenterMethod::IncompleteGamma).unwrap();
            let b = ball_center(spec, &sys, t, CenterMethod::Quadrature).unwrap();
            worst_c = worst_c.max(((a - b) / b).abs());
        }
    }

    let mut worst_r = 0.0f64;
    for spec in &sets {
        for t in [1.0, 50.0, 200.0, 1e3] {
            let (v, _) = integrate(
                |s| {
                    let (p, m) = decay_rates_approx(spec, &sys, s);
                    p + m
                },
                &Breaks::new(0.0, t).uniform(t / 20.0).build(),
                &Tolerance::new(0.0, 1e-12, 10_000),
            )
            .unwrap();
            worst_r = worst_r.max(((-v).exp() - ball_radius(spec, &sys, t)).abs());
        }
    }

    let worst_m = Cell::new(0.0f64);
    let env = (log_uniform(1e-3, 2e-2), log_uniform(1e-4, 1e-2), 0.1f64..5.0, 0.1f64..5.0);
    let res = runner(200).run(&(env, (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 0.0f64..5.0), |((g1, g2, b1, b2), (x, y, z), lt)| {
        let spec = ohmic(g1, g2, b1, b2);
        let n = (x * x + y * y + z * z).sqrt().max(1.0);
        let p0 = BlochState::new(x / n, y / n, z / n).unwrap();
        let t = lt / spec.r2.j(1.0);
        let map = bloch_map(&spec, &sys, &p0, t).unwrap();
        let tr = integrate_population(&ApproxRates::new(&spec, &sys), &sys, &p0, &[0.0, t.max(1e-9)], &PopulationOptions::default())
            .unwrap();
        let s = tr.states()[1];
        let err = map.p.iter().zip(&s.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_m.set(worst_m.get().max(err));
        prop_assert!(err <= 1e-6);
        Ok(())
    });
    verdict(
        worst_c <= 1e-6 && worst_r <= 1e-8 && res.is_ok(),
        format!(
            "center closed form vs quadrature {worst_c:.2e} rel (<= 1e-6, {} sets); radius vs exp(-int rates) {worst_r:.2e} (<= 1e-8); \
             bloch map vs ODE {wm:.2e} over 200 cases (<= 1e-6)",
            sets.len(),
            wm = worst_m.get()
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let spec = ohmic(1e-2, 1e-5, 1.0, 0.1);
    let sys = SystemSpec::default();
    let mut pairs = Vec::new();
    for i in 1..=10 {
        let t = 5.0 * i as f64;
        for j in 0..10 {
            pairs.push((t, t * j as f64 / 10.0));
        }
    }
    let cfg = QuadConfig { omega_max_factor: 4.0, ..QuadConfig::default() };
    let t0 = Instant::now();
    let q = alpha_batch(&spec, &pairs, &cfg).unwrap();
    let t_quad = t0.elapsed().as_secs_f64();
    let bath = discretize(&spec, 400, 400, 40.0).unwrap();
    let o = bath.alpha_batch(&Betas::of(&spec), &pairs, false).unwrap();
    let mut worst = 0.0f64;
    let mut worst_at = (0.0, 0.0);
    let mut within = 0;
    let scale_p = o.iter().map(|a| a.plus.norm()).fold(0.0, f64::max);
    let scale_m = o.iter().map(|a| a.minus.norm()).fold(0.0, f64::max);
    let mut worst_norm = 0.0f64;
    for (a, b) in q.iter().zip(&o) {
        let rp = (a.plus - b.plus).norm() / b.plus.norm();
        let rm = (a.minus - b.minus).norm() / b.minus.norm();
        let r = rp.max(rm);
        if r <= 1e-2 {
            within += 1;
        }
        if r > worst {
            worst = r;
            worst_at = (a.t, a.tau);
        }
        worst_norm = worst_norm.max((a.plus - b.plus).norm() / scale_p).max((a.minus - b.minus).norm() / scale_m);
    }
    let part_a = worst <= 1e-2;

    let mut worst_lt = 0.0f64;
    let mut lt_detail = Vec::new();
    for t in [10.0, 20.0, 50.0, 100.0] {
        let p = exact_rate_parts(&spec, &sys, t, &QuadConfig::default()).unwrap();
        let r = spec.resonant(1.0);
        let grow = 1.0 - (-r.j2 * t).exp();
        let ap = r.j1 * r.n2 * grow;
        let am = r.j1 * (r.n2 + 1.0) * grow;
        let ep = (p.gamma_plus_mediated() - ap) / ap;
        let em = (p.gamma_minus_mediated() - am) / am;
        worst_lt = worst_lt.max(ep.abs()).max(em.abs());
        lt_detail.push(format!("t={t}: {:+.2}%/{:+.2}%", 100.0 * ep, 100.0 * em));
    }
    let part_b = worst_lt <= 5e-2;
    verdict(
        part_a && part_b,
        format!(
            "[a] {} of 100 pairs within 1e-2 pointwise relative, worst {worst:.2e} at (t, tau) = {worst_at:?}, \
             worst error relative to grid max {worst_norm:.2e}, quadrature {t_quad:.0}s: {}; \
             [b] long-time rate parts exact vs closed form (gamma+/gamma-) {}: {}",
            within,
            if part_a { "PASS" } else { "FAIL" },
            lt_detail.join(", "),
            if part_b { "PASS" } else { "FAIL" },
        ),
    )
}

fn invariant_suite() -> Verdict {
    let sys = SystemSpec::default();
    let env = || {
        (log_uniform(1e-3, 2e-2), log_uniform(1e-5, 1e-2), 0.5f64..1.5, 2.0f64..20.0, 0.1f64..5.0, 0.1f64..5.0).prop_map(
            |(g1, g2, s, wc, b1, b2)| {
                CompositeEnvSpec::new(
                    BathSpec::new(SpectralParams::new(g1, s, wc).unwrap(), b1).unwrap(),
                    BathSpec::new(SpectralParams::new(g2, s, wc).unwrap(), b2).unwrap(),
                )
                .unwrap()
            },
        )
    };
    let mut failures = Vec::new();

    let r = runner(1000).run(&(env(), 0.0f64..60.0), |(spec, lt)| {
        let t = lt / spec.r2.j(1.0);
        let (gp, gm) = decay_rates_approx(&spec, &sys, t);
        prop_assert!(gp >= 0.0 && gm >= 0.0);
        let (p0, m0) = decay_rates_approx(&spec, &sys, 0.0);
        prop_assert!(((m0 / p0).ln() - spec.r1.beta).abs() <= 1e-10);
        let (p1, m1) = decay_rates_approx(&spec, &sys, 1e3 / spec.r2.j(1.0));
        prop_assert!(((m1 / p1).ln() - spec.r2.beta).abs() <= 1e-10);
        let c = ball_center(&spec, &sys, t, CenterMethod::IncompleteGamma).unwrap();
        prop_assert!(ball_radius(&spec, &sys, t) + c.abs() <= 1.0 + 1e-6);
        Ok(())
    });
    if let Err(e) = r {
        failures.push(format!("rates/ball: {e}"));
    }

    let opts = OdeOptions::default();
    let worst_e = Cell::new(0.0f64);
    let r = runner(1000).run(&(env(), env(), 0.0f64..=1.0, 1.0f64..30.0), |(l, rr, rho0, k)| {
        let spec = TwoEnvSpec::new(l, rr, sys).unwrap();
        let lam = l.resonant(1.0).total_rate_bound() + rr.resonant(1.0).total_rate_bound();
        let t_end = (k / lam).min(spec.default_horizon().unwrap());
        let run = integrate_two_env(&spec, rho0, &[0.0, t_end], &opts).unwrap();
        let (v, _) = integrate(
            |t| {
                let (a, b) = run.fluxes_at(t);
                a + b
            },
            &run.dense.mesh(),
            &Tolerance::new(1e-14, 1e-11, 100_000),
        )
        .unwrap();
        let de = run.record.energy[1] - run.record.energy[0];
        let err = (de - v).abs();
        worst_e.set(worst_e.get().max(err));
        prop_assert!(err <= 10.0 * (opts.abs_tol + opts.rel_tol) * spec.sys.omega0, "{err:.2e}");
        Ok(())
    });
    if let Err(e) = r {
        failures.push(format!("energy bookkeeping: {e}"));
    }
    verdict(
        failures.is_empty(),
        format!(
            "1000 cases of positivity, detailed balance at t = 0 and t -> inf, r + |c| <= 1; \
             1000 two-environment trajectories, worst |dE - int J| {we:.2e}{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) },
            we = worst_e.get()
        ),
    )
}

fn main() {
    let list: [(&str, fn() -> Verdict); 9] = [
        ("plateau_reproduction", plateau_reproduction),
        ("no_plateau_control", no_plateau_control),
        ("inverse_coupling_scaling", inverse_coupling_scaling),
        ("asymptotic_thermal_state", asymptotic_thermal_state),
        ("two_env_steady_state", two_env_steady_state),
        ("flux_sign_flips", flux_sign_flips),
        ("closed_form_cross_checks", closed_form_cross_checks),
        ("oracle_equivalence", oracle_equivalence),
        ("invariant_suite", invariant_suite),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in list.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.passed {
            failed += 1;
        }
        println!(
            "{} {} {name} ({:.1}s): {}",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
