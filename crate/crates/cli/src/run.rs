use std::path::{Path, PathBuf};

use anyhow::Context;
use prethermal::correlations::{alpha_batch, decay_rates_approx, decay_rates_exact};
use prethermal::dynamics::{
    apply_ball, ball_center, ball_snapshot, integrate_population, ApproxRates, BlochState, CenterMethod,
    InterpolatedRates, PopulationOptions, RateModel,
};
use prethermal::heatflux::{
    detect_sign_flips, effective_temperature, integrate_two_env, quasi_stationary_population, steady_flux,
    steady_population, FluxQuantity, Side, Stage, TwoEnvSpec,
};
use prethermal::oracle::{discretize, Betas};
use prethermal::pretherm::{scan_tpr, trace_distance, Horizon};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, RateSource, SideLabel, Spacing};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numerical(prethermal::Error),
    Io(anyhow::Error),
}

impl From<prethermal::Error> for RunError {
    fn from(e: prethermal::Error) -> Self {
        Self::Numerical(e)
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        Self::Io(e)
    }
}

type RunResult<T> = Result<T, RunError>;

/// 17 significant digits, round-trip exact.
pub fn fmt(x: f64) -> String {
    if x == 0.0 {
        format!("{:.16e}", 0.0)
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_else(|| "undefined".into())
}

struct Table {
    file: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(file: &'static str, header: &[&'static str]) -> Self {
        Self { file, header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(self.file);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(path)
    }
}

fn output_grid(cfg: &ExperimentConfig, default_t_max: Option<f64>) -> RunResult<Vec<f64>> {
    let s = &cfg.simulation;
    if let Some(t) = &s.times {
        return Ok(t.clone());
    }
    let t_max = s.t_max.or(default_t_max).ok_or_else(|| {
        RunError::Config("simulation.t_max is required when no environment has a second reservoir".into())
    })?;
    let n = s.points;
    Ok(match s.spacing {
        Spacing::Linear => (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect(),
        Spacing::Log => {
            if s.t_min >= t_max {
                return Err(RunError::Config("simulation.t_min must be below t_max".into()));
            }
            let r = (t_max / s.t_min).ln();
            std::iter::once(0.0)
                .chain((0..n - 1).map(|i| s.t_min * (r * i as f64 / (n - 2).max(1) as f64).exp()))
                .collect()
        }
    })
}

fn single_horizon(cfg: &ExperimentConfig) -> Option<f64> {
    prethermal::pretherm::default_horizon(cfg.single_env(), &cfg.system)
}

pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> RunResult<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (tables, summary) = match &cfg.experiment {
        Experiment::Rates { exact } => rates(cfg, *exact)?,
        Experiment::Trajectory { initial_states, rates, lamb_shift } => {
            trajectory(cfg, initial_states, *rates, *lamb_shift)?
        }
        Experiment::Ball { snapshot_times, initial_states } => ball(cfg, snapshot_times, initial_states)?,
        Experiment::PrethermScan { axis, values, d_pr, t_max } => {
            let horizon = t_max.map(Horizon::Fixed).unwrap_or(Horizon::Auto);
            let rows = scan_tpr(cfg.single_env(), &cfg.system, *axis, values, *d_pr, horizon)?;
            let mut t = Table::new(
                "pretherm_scan.csv",
                &["axis_value", "thermal_trace_distance", "t_contract", "t_depart", "t_pr", "reason", "t_ii"],
            );
            let mut failures = Vec::new();
            for r in &rows {
                match &r.outcome {
                    Ok(p) => t.push(vec![
                        fmt(r.value),
                        fmt(r.thermal_distance),
                        fmt_opt(p.t_contract),
                        fmt_opt(p.t_depart),
                        fmt_opt(p.t_pr),
                        p.reason.as_str().into(),
                        fmt_opt(p.t_ii),
                    ]),
                    Err(e) => {
                        failures.push(json!({"value": r.value, "error": e}));
                        t.push(vec![
                            fmt(r.value),
                            fmt(r.thermal_distance),
                            "undefined".into(),
                            "undefined".into(),
                            "undefined".into(),
                            "error".into(),
                            "undefined".into(),
                        ])
                    }
                }
            }
            (vec![t], json!({"points": rows.len(), "failed_points": failures}))
        }
        Experiment::Heatflux { initial_populations, include_quasi_stationary } => {
            heatflux(cfg, initial_populations, *include_quasi_stationary)?
        }
        Experiment::OracleCheck { n, m, omega_max, pairs, t_values, tau_fractions, force } => {
            let pairs: Vec<(f64, f64)> = match (pairs, t_values, tau_fractions) {
                (Some(p), _, _) => p.iter().map(|&[t, s]| (t, s)).collect(),
                (None, Some(ts), Some(fs)) => {
                    ts.iter().flat_map(|&t| fs.iter().map(move |&f| (t, t * f))).collect()
                }
                _ => unreachable!("checked when parsing"),
            };
            oracle(cfg, *n, *m, *omega_max, &pairs, *force)?
        }
    };
    let mut files = Vec::new();
    for t in &tables {
        files.push(t.write(out)?);
    }
    Ok(Outcome { files, summary })
}

fn rates(cfg: &ExperimentConfig, exact: bool) -> RunResult<(Vec<Table>, Value)> {
    let spec = cfg.single_env();
    let grid = output_grid(cfg, single_horizon(cfg))?;
    let mut t = Table::new(
        "rates.csv",
        &["t", "gamma_plus", "gamma_minus", "delta_omega", "gamma_plus_approx", "gamma_minus_approx"],
    );
    let ex = if exact { Some(decay_rates_exact(spec, &cfg.system, &grid, &cfg.simulation.quad)?) } else { None };
    for (i, &time) in grid.iter().enumerate() {
        let (ap, am) = decay_rates_approx(spec, &cfg.system, time);
        let (gp, gm, dw) = match &ex {
            Some(e) => (e.gamma_plus[i], e.gamma_minus[i], e.delta_omega[i]),
            None => (ap, am, 0.0),
        };
        t.push(vec![fmt(time), fmt(gp), fmt(gm), fmt(dw), fmt(ap), fmt(am)]);
    }
    Ok((vec![t], json!({"exact": exact, "points": grid.len()})))
}

fn trajectory(
    cfg: &ExperimentConfig,
    states: &[crate::config::InitialState],
    source: RateSource,
    lamb_shift: bool,
) -> RunResult<(Vec<Table>, Value)> {
    let spec = cfg.single_env();
    let sys = &cfg.system;
    let grid = output_grid(cfg, single_horizon(cfg))?;
    let p0: Vec<BlochState> = states.iter().map(|s| s.resolve(sys.omega0)).collect::<Result<_, _>>()?;
    let model: Box<dyn RateModel> = match source {
        RateSource::Approx => Box::new(ApproxRates::new(spec, sys)),
        RateSource::Exact => {
            let trace = decay_rates_exact(spec, sys, &grid, &cfg.simulation.quad)?;
            Box::new(InterpolatedRates::new(trace)?)
        }
    };
    let opts = PopulationOptions { ode: cfg.simulation.ode.options(), lamb_shift };
    let runs: Vec<_> = p0
        .par_iter()
        .map(|p| integrate_population(model.as_ref(), sys, p, &grid, &opts))
        .collect::<Result<_, _>>()?;
    let th1 = BlochState::thermal(spec.r1.beta, sys.omega0);
    let th2 = BlochState::thermal(spec.r2.beta, sys.omega0);
    let mut t = Table::new(
        "trajectory.csv",
        &["state", "t", "rho_pp", "p_x", "p_y", "p_z", "trace_distance_thermal_i", "trace_distance_thermal_ii"],
    );
    let mut finals = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        let states = run.states();
        for (time, s) in grid.iter().zip(&states) {
            t.push(vec![
                k.to_string(),
                fmt(*time),
                fmt(s.rho_pp()),
                fmt(s.p[0]),
                fmt(s.p[1]),
                fmt(s.p[2]),
                fmt(trace_distance(s, &th1)),
                fmt(trace_distance(s, &th2)),
            ]);
        }
        finals.push(states.last().map(|s| s.rho_pp()));
    }
    let cond = prethermal::dynamics::pretherm_condition(spec, sys);
    Ok((
        vec![t],
        json!({
            "states": runs.len(),
            "final_rho_pp": finals,
            "rho_thermal_i": th1.rho_pp(),
            "rho_thermal_ii": th2.rho_pp(),
            "pretherm_ratio": cond.ratio,
            "pretherm_regime": cond.holds,
        }),
    ))
}

fn ball(
    cfg: &ExperimentConfig,
    times: &[f64],
    states: &[crate::config::InitialState],
) -> RunResult<(Vec<Table>, Value)> {
    let spec = cfg.single_env();
    let sys = &cfg.system;
    let snaps: Vec<_> = times.par_iter().map(|&t| ball_snapshot(spec, sys, t)).collect::<Result<_, _>>()?;
    let mut t = Table::new("ball.csv", &["t", "radius", "center", "center_short_time", "center_asymptotic", "phase"]);
    for s in &snaps {
        t.push(vec![
            fmt(s.time),
            fmt(s.radius),
            fmt(s.center),
            fmt(ball_center(spec, sys, s.time, CenterMethod::ShortTime)?),
            fmt(ball_center(spec, sys, s.time, CenterMethod::Asymptotic)?),
            fmt(s.phase),
        ]);
    }
    let mut tables = vec![t];
    if !states.is_empty() {
        let p0: Vec<BlochState> = states.iter().map(|s| s.resolve(sys.omega0)).collect::<Result<_, _>>()?;
        let mut m = Table::new("ball_states.csv", &["state", "t", "p_x", "p_y", "p_z"]);
        for (k, p) in p0.iter().enumerate() {
            for s in &snaps {
                let q = apply_ball(s, p);
                m.push(vec![k.to_string(), fmt(s.time), fmt(q.p[0]), fmt(q.p[1]), fmt(q.p[2])]);
            }
        }
        tables.push(m);
    }
    Ok((tables, json!({"snapshots": snaps.len()})))
}

fn heatflux(cfg: &ExperimentConfig, pops: &[f64], include_qs: bool) -> RunResult<(Vec<Table>, Value)> {
    let spec = TwoEnvSpec::new(
        *cfg.side(SideLabel::Left).expect("checked when parsing"),
        *cfg.side(SideLabel::Right).expect("checked when parsing"),
        cfg.system,
    )?;
    let grid = output_grid(cfg, spec.default_horizon())?;
    let mut starts = Vec::new();
    if include_qs {
        starts.push(quasi_stationary_population(&spec, Stage::I, Stage::I));
    }
    starts.extend_from_slice(pops);
    let opts = cfg.simulation.ode.options();
    let runs: Vec<_> =
        starts.par_iter().map(|&r| integrate_two_env(&spec, r, &grid, &opts)).collect::<Result<_, _>>()?;
    let mut t = Table::new(
        "heatflux.csv",
        &["run", "t", "rho_pp", "flux_L_into", "flux_R_into", "flux_plotted", "energy"],
    );
    let mut f = Table::new("heatflux_sign_flips.csv", &["run", "quantity", "t"]);
    let mut flips_summary = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        let rec = &run.record;
        let plotted = rec.plotted();
        for i in 0..grid.len() {
            t.push(vec![
                k.to_string(),
                fmt(grid[i]),
                fmt(run.rho_pp[i]),
                fmt(rec.flux_left[i]),
                fmt(rec.flux_right[i]),
                fmt(plotted[i]),
                fmt(rec.energy[i]),
            ]);
        }
        let mut per_run = serde_json::Map::new();
        for (q, name) in [
            (FluxQuantity::Plotted, "plotted"),
            (FluxQuantity::RightIntoSystem, "right_into_system"),
            (FluxQuantity::Transport, "transport"),
        ] {
            let c = detect_sign_flips(run, q);
            for &tc in &c {
                f.push(vec![k.to_string(), name.into(), fmt(tc)]);
            }
            per_run.insert(name.into(), json!(c));
        }
        flips_summary.push(Value::Object(per_run));
    }
    let rho_ss = steady_population(&spec);
    let beff = effective_temperature(rho_ss, spec.sys.omega0).ok();
    let mut qs = serde_json::Map::new();
    for (l, r, name) in [
        (Stage::I, Stage::I, "I_I"),
        (Stage::I, Stage::II, "I_II"),
        (Stage::II, Stage::I, "II_I"),
        (Stage::II, Stage::II, "II_II"),
    ] {
        qs.insert(name.into(), json!(quasi_stationary_population(&spec, l, r)));
    }
    Ok((
        vec![t, f],
        json!({
            "initial_populations": starts,
            "steady_population": rho_ss,
            "steady_flux_left_into": steady_flux(&spec, Side::Left),
            "steady_flux_right_into": steady_flux(&spec, Side::Right),
            "effective_beta": beff.map(|b| b.beta),
            "population_inversion": beff.map(|b| b.inverted),
            "quasi_stationary_populations": qs,
            "sign_flips": flips_summary,
        }),
    ))
}

fn oracle(
    cfg: &ExperimentConfig,
    n: usize,
    m: usize,
    omega_max: f64,
    pairs: &[(f64, f64)],
    force: bool,
) -> RunResult<(Vec<Table>, Value)> {
    let spec = cfg.single_env();
    let bath = discretize(spec, n, m, omega_max)?;
    let o = bath.alpha_batch(&Betas::of(spec), pairs, force)?;
    let q = alpha_batch(spec, pairs, &cfg.simulation.quad)?;
    let mut t = Table::new(
        "oracle.csv",
        &[
            "t",
            "tau",
            "re_alpha_plus_quad",
            "im_alpha_plus_quad",
            "re_alpha_minus_quad",
            "im_alpha_minus_quad",
            "re_alpha_plus_oracle",
            "im_alpha_plus_oracle",
            "re_alpha_minus_oracle",
            "im_alpha_minus_oracle",
            "abs_err_plus",
            "abs_err_minus",
        ],
    );
    let mut worst = 0.0f64;
    for (a, b) in q.iter().zip(&o) {
        let ep = (a.plus - b.plus).norm();
        let em = (a.minus - b.minus).norm();
        worst = worst.max(ep / b.plus.norm()).max(em / b.minus.norm());
        t.push(vec![
            fmt(a.t),
            fmt(a.tau),
            fmt(a.plus.re),
            fmt(a.plus.im),
            fmt(a.minus.re),
            fmt(a.minus.im),
            fmt(b.plus.re),
            fmt(b.plus.im),
            fmt(b.minus.re),
            fmt(b.minus.im),
            fmt(ep),
            fmt(em),
        ]);
    }
    Ok((
        vec![t],
        json!({
            "pairs": pairs.len(),
            "max_relative_error": worst,
            "recurrence_time": bath.recurrence_time(),
            "quad_omega_max": cfg.simulation.quad.omega_max(spec),
        }),
    ))
}
