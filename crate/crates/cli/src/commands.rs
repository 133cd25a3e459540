//! One function per subcommand; each returns an [`Outcome`] and never writes files itself.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde_json::{json, Value};

use qsl_core::analytic::{self, Branch};
use qsl_core::grape::{self, GradientMethod, GrapeProblem, OptimizeOptions, ScanRow};
use qsl_core::pmp::RootChoice;
use qsl_core::Complex64;
use qsl_core::shooting::{
    convergence_sweep_with, default_seeds, select_best, solve, Mode, ShootingError, ShootingProblem, ShootingResult, SweepRow,
};

use crate::config::{CommandKind, FamilyArg, MethodArg, ModeArg, Params, RootArg, RunConfig};
use crate::error::ConfigError;
use crate::fit::{fit_convergence, FitModel, FitRow};
use crate::output::{Cell, Outcome, Table};

pub fn execute(cfg: &RunConfig) -> Result<Outcome, ConfigError> {
    let p = &cfg.params;
    match cfg.command {
        CommandKind::TwoControl | CommandKind::OneControl | CommandKind::LandauZener => shoot(cfg.command, p),
        CommandKind::Linear => linear(p),
        CommandKind::Grape => grape_scan(p),
        CommandKind::Sweep => sweep(p),
        CommandKind::AdjointMap => adjoint_map(p),
        CommandKind::Nmr => nmr(p),
    }
}

fn root(arg: Option<RootArg>) -> RootChoice {
    match arg.unwrap_or(RootArg::Maximizing) {
        RootArg::Maximizing => RootChoice::Maximizing,
        RootArg::Positive => RootChoice::Positive,
        RootArg::Negative => RootChoice::Negative,
    }
}

/// Multistart seeding: continuous seeds plus Gaussian perturbations from a seeded stream.
#[derive(Clone, Copy, Debug)]
pub struct SeedPlan {
    pub perturbations: usize,
    pub sigma: f64,
    pub stream: u64,
}

impl SeedPlan {
    pub fn from(p: &Params) -> Self {
        Self { perturbations: p.perturbations.unwrap_or(20), sigma: p.sigma.unwrap_or(0.1), stream: p.stream.unwrap_or(42) }
    }
}

/// Seeds solved concurrently, merged in seed order.
pub fn parallel_multistart(problem: &ShootingProblem, plan: SeedPlan) -> Result<ShootingResult, ShootingError> {
    let seeds = default_seeds(problem, plan.perturbations, plan.sigma, plan.stream)?;
    let results: Vec<_> = seeds.par_iter().map(|s| solve(problem, s)).collect();
    let fallback = results
        .iter()
        .filter_map(|r| match r {
            Err(ShootingError::NoConvergence { best }) => Some(best.clone()),
            _ => None,
        })
        .min_by(|a, b| a.residual_norm.total_cmp(&b.residual_norm));
    match select_best(results) {
        Ok(r) => Ok(r),
        Err(e) => match fallback {
            Some(best) => Err(ShootingError::NoConvergence { best }),
            None => Err(e),
        },
    }
}

fn family_problem(kind: CommandKind, p: &Params, mode: Mode) -> ShootingProblem {
    match kind {
        CommandKind::OneControl => ShootingProblem::one_control(p.detuning.unwrap_or(0.5), mode),
        CommandKind::LandauZener => ShootingProblem::landau_zener(p.omega.unwrap_or(0.5), p.bound.unwrap_or(2.0), mode),
        _ => ShootingProblem::two_control_with_root(mode, root(p.root)),
    }
}

fn default_n(kind: CommandKind) -> usize {
    match kind {
        CommandKind::OneControl => 20,
        CommandKind::LandauZener => 5,
        _ => 3,
    }
}

fn vec_json(v: qsl_core::Vec3) -> Value {
    json!([v.x, v.y, v.z])
}

fn result_summary(problem: &ShootingProblem, r: &ShootingResult) -> Value {
    let t_c = problem.continuous_time().unwrap_or(f64::NAN);
    let max_control = r.controls.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    json!({
        "converged": r.converged,
        "t_f": r.t_f,
        "t_f_continuous": t_c,
        "gap": r.t_f - t_c,
        "ratio": r.t_f / t_c,
        "n": r.n,
        "period": r.period,
        "tail": r.tail,
        "costate": vec_json(r.costate),
        "residual_norm": r.residual_norm,
        "final_state": vec_json(r.trajectory.final_state),
        "iterations": r.iterations,
        "seed_id": r.seed_id,
        "controls": r.controls.values,
        "max_abs_control": max_control,
    })
}

fn interval_table(r: &ShootingResult) -> Table {
    let mut t = Table::new(&["k", "start", "duration", "control", "hamiltonian", "converged"]);
    let mut start = 0.0;
    for (k, rec) in r.trajectory.intervals.iter().enumerate() {
        t.push(vec![k.into(), start.into(), rec.duration.into(), rec.control.into(), rec.hamiltonian.into(), r.converged.into()]);
        start += rec.duration;
    }
    t
}

fn shooting_mode(p: &Params, fallback_n: usize) -> Mode {
    match p.mode {
        Some(ModeArg::FreeTail) => Mode::FreeTail { period: p.period.unwrap_or(f64::NAN) },
        _ => Mode::LockedGrid { n: p.n.unwrap_or(fallback_n) },
    }
}

fn shoot(kind: CommandKind, p: &Params) -> Result<Outcome, ConfigError> {
    let problem = family_problem(kind, p, shooting_mode(p, default_n(kind)));
    Ok(shooting_outcome(&problem, parallel_multistart(&problem, SeedPlan::from(p))))
}

fn shooting_outcome(problem: &ShootingProblem, result: Result<ShootingResult, ShootingError>) -> Outcome {
    match result {
        Ok(r) => Outcome {
            primary: interval_table(&r),
            extra: Vec::new(),
            summary: result_summary(problem, &r),
            row_status: vec![true; r.n],
            failures: Vec::new(),
        },
        Err(ShootingError::NoConvergence { best }) => Outcome {
            primary: interval_table(&best),
            extra: Vec::new(),
            summary: result_summary(problem, &best),
            row_status: vec![false; best.n],
            failures: vec![format!("no seed converged; best residual {:e} from seed {}", best.residual_norm, best.seed_id)],
        },
        Err(e) => Outcome {
            primary: interval_table_empty(),
            extra: Vec::new(),
            summary: json!({ "converged": false }),
            row_status: Vec::new(),
            failures: vec![e.to_string()],
        },
    }
}

fn interval_table_empty() -> Table {
    Table::new(&["k", "start", "duration", "control", "hamiltonian", "converged"])
}

fn linear(p: &Params) -> Result<Outcome, ConfigError> {
    let omega = p.omega.unwrap_or(0.5);
    let n = p.n.unwrap_or(4);
    let d = analytic::linear_discrete(omega, n).map_err(|_| ConfigError::Field {
        field: "omega".into(),
        message: format!("need ω < 2N, got ω = {omega}, N = {n}"),
    })?;
    let mut t = Table::new(&["k", "phase", "re_z", "im_z"]);
    let mut z = Complex64::new(0.0, 0.0);
    for (k, &phase) in d.phases.iter().enumerate() {
        z = analytic::linear_step(z, omega, phase, d.period);
        t.push(vec![k.into(), phase.into(), z.re.into(), z.im.into()]);
    }
    let error = (d.final_z - 1.0).norm();
    let t_c = analytic::linear_continuous(omega).map(|c| c.t_f).unwrap_or(f64::NAN);
    let rel = d.t_f / t_c - 1.0;
    let summary = json!({
        "omega": omega,
        "n": n,
        "period": d.period,
        "t_f": d.t_f,
        "t_f_continuous": t_c,
        "final_error": error,
        "relative_gap": rel,
        "asymptotic_ratio": rel * 24.0 * (n * n) as f64 / (omega * omega),
    });
    let ok = error <= 1e-9;
    Ok(Outcome {
        row_status: vec![ok; n],
        failures: if ok { Vec::new() } else { vec![format!("|Z_N - 1| = {error:e}")] },
        primary: t,
        extra: Vec::new(),
        summary,
    })
}

/// Evenly spaced grid from `lo` to `hi` inclusive; the step is rounded to land on `hi`.
pub fn time_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize;
    (0..=count).map(|i| lo + i as f64 * step).collect()
}

fn grape_scan(p: &Params) -> Result<Outcome, ConfigError> {
    let n = p.n.unwrap_or(3);
    let method = match p.method.unwrap_or(MethodArg::Pmp) {
        MethodArg::Split => GradientMethod::SplitOperator,
        MethodArg::Aux => GradientMethod::AuxiliaryMatrix,
        MethodArg::Pmp => GradientMethod::PmpExact,
    };
    let threshold = p.threshold.unwrap_or(1e-6);
    let times = time_grid(p.t_min.unwrap_or(2.72), p.t_max.unwrap_or(2.77), p.t_step.unwrap_or(1e-3));
    let starts = grape::random_phases(n, p.starts.unwrap_or(50), p.stream.unwrap_or(42));
    let opts = OptimizeOptions::default();
    let template = GrapeProblem::equator_transfer(n, 1.0, method);
    let rows: Vec<ScanRow> = times
        .par_iter()
        .map(|&t_f| {
            let problem = GrapeProblem { t_f, ..template };
            ScanRow { t_f, d: grape::best_infidelity(&problem, &starts, &opts).0 }
        })
        .collect();
    let estimate = grape::scan_estimate(&rows, threshold);
    let monotone = match estimate {
        Some(e) => rows.iter().filter(|r| r.t_f >= e).all(|r| r.d <= threshold),
        None => true,
    };
    let mut t = Table::new(&["t_f", "d", "reached"]);
    for r in &rows {
        t.push(vec![r.t_f.into(), r.d.into(), (r.d <= threshold).into()]);
    }
    Ok(Outcome {
        primary: t,
        extra: Vec::new(),
        summary: json!({ "n": n, "threshold": threshold, "estimate": estimate, "monotone_feasibility": monotone, "starts": starts.len() }),
        row_status: rows.iter().map(|r| r.d.is_finite()).collect(),
        failures: if estimate.is_some() { Vec::new() } else { vec![format!("no grid time reached d <= {threshold:e}")] },
    })
}

fn sweep(p: &Params) -> Result<Outcome, ConfigError> {
    let family = p.family.unwrap_or(FamilyArg::TwoControl);
    let modes: Vec<Mode> = match p.mode.unwrap_or(ModeArg::Locked) {
        ModeArg::Locked => {
            let (lo, hi, step) = (p.n_min.unwrap_or(5), p.n_max.unwrap_or(50), p.n_step.unwrap_or(1));
            (lo..=hi).step_by(step).map(|n| Mode::LockedGrid { n }).collect()
        }
        ModeArg::FreeTail => {
            let lo = p.period_min.ok_or_else(|| ConfigError::Field { field: "period_min".into(), message: "required for a free-tail sweep".into() })?;
            let hi = p.period_max.ok_or_else(|| ConfigError::Field { field: "period_max".into(), message: "required for a free-tail sweep".into() })?;
            let count = p.period_count.unwrap_or(20);
            // Coarse to fine, so each warm start comes from a neighbouring period.
            (0..count)
                .map(|i| {
                    let s = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                    Mode::FreeTail { period: hi - s * (hi - lo) }
                })
                .collect()
        }
    };
    let (rows, t_c) = match family {
        FamilyArg::Linear => linear_rows(p.omega.unwrap_or(0.5), &modes)?,
        _ => {
            let kind = match family {
                FamilyArg::OneControl => CommandKind::OneControl,
                FamilyArg::LandauZener => CommandKind::LandauZener,
                _ => CommandKind::TwoControl,
            };
            let template = family_problem(kind, p, modes[0]);
            let plan = SeedPlan::from(p);
            let t_c = template.continuous_time().unwrap_or(f64::NAN);
            let rows = convergence_sweep_with(&template, &modes, |problem| parallel_multistart(problem, plan))
                .map_err(|e| ConfigError::Field { field: "family".into(), message: e.to_string() })?;
            (rows, t_c)
        }
    };
    let mut t = Table::new(&["N", "T", "delta_T", "t_f", "gap", "converged"]);
    for r in &rows {
        t.push(vec![r.n.into(), r.period.into(), r.tail.into(), r.t_f.into(), r.gap.into(), r.converged.into()]);
    }
    let fit_rows: Vec<FitRow> = rows.iter().map(|r| FitRow { n: r.n as f64, t_f: r.t_f, converged: r.converged }).collect();
    let fit = |m| match fit_convergence(&fit_rows, t_c, m) {
        Ok(f) => serde_json::to_value(f).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let failures: Vec<String> = rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("N = {}, T = {}: not converged (residual {:e})", r.n, r.period, r.residual_norm))
        .collect();
    Ok(Outcome {
        primary: t,
        extra: Vec::new(),
        summary: json!({
            "t_f_continuous": t_c,
            "rows": rows.len(),
            "fit_exponential": fit(FitModel::Exponential),
            "fit_polynomial": fit(FitModel::Polynomial),
        }),
        row_status: rows.iter().map(|r| r.converged).collect(),
        failures,
    })
}

fn linear_rows(omega: f64, modes: &[Mode]) -> Result<(Vec<SweepRow>, f64), ConfigError> {
    let t_c = analytic::linear_continuous(omega).map(|c| c.t_f).unwrap_or(f64::NAN);
    let mut rows = Vec::with_capacity(modes.len());
    for m in modes {
        let Mode::LockedGrid { n } = *m else { unreachable!("rejected during validation") };
        let d = analytic::linear_discrete(omega, n)
            .map_err(|_| ConfigError::Field { field: "omega".into(), message: format!("need ω < 2N at N = {n}") })?;
        let error = (d.final_z - 1.0).norm();
        rows.push(SweepRow {
            n,
            period: d.period,
            tail: d.period,
            t_f: d.t_f,
            gap: d.t_f - t_c,
            converged: error <= 1e-9,
            residual_norm: error,
            costate: qsl_core::Vec3::new(f64::NAN, f64::NAN, f64::NAN),
        });
    }
    Ok((rows, t_c))
}

fn adjoint_map(p: &Params) -> Result<Outcome, ConfigError> {
    let n = p.n.unwrap_or(3);
    let grid = p.grid.unwrap_or(200);
    let choice = root(p.root);
    let problem = ShootingProblem::two_control_with_root(Mode::LockedGrid { n }, choice);
    let solved = match parallel_multistart(&problem, SeedPlan { perturbations: 20, sigma: 0.1, stream: 42 }) {
        Ok(r) => r,
        Err(e) => {
            let mut o = shooting_outcome(&problem, Err(e));
            o.primary = Table::new(&["theta", "phi", "d"]);
            return Ok(o);
        }
    };
    let period = solved.period;
    let rows: Vec<Vec<analytic::SphereMapPoint>> =
        (0..grid).into_par_iter().map(|i| analytic::adjoint_sphere_row(i, n, period, grid, choice)).collect();
    let zeros: Vec<analytic::SphereMapPoint> = rows
        .par_iter()
        .flat_map_iter(|row| analytic::refine_row_minima(row, n, period, choice))
        .filter(|z| z.d <= 1e-8)
        .collect();
    let mut t = Table::new(&["theta", "phi", "d"]);
    let mut defined = Vec::with_capacity(grid * grid);
    for pt in rows.iter().flatten() {
        t.push(vec![pt.theta.into(), pt.phi.into(), pt.d.into()]);
        defined.push(true);
    }
    let samples = p.curve_samples.unwrap_or(400);
    let px_max = p.px_max.unwrap_or(20.0);
    let mut curve = Table::new(&["p_x", "theta", "phi", "branch"]);
    for (branch, label) in [(Branch::South, "south"), (Branch::North, "north")] {
        for (px, th, ph) in analytic::adjoint_reference_curve(samples, px_max, branch) {
            curve.push(vec![px.into(), th.into(), ph.into(), label.into()]);
        }
    }
    let mut zt = Table::new(&["theta", "phi", "d"]);
    for z in &zeros {
        zt.push(vec![z.theta.into(), z.phi.into(), z.d.into()]);
    }
    let undefined = rows.iter().flatten().filter(|pt| pt.d.is_nan()).count();
    let level = rows.iter().flatten().filter(|pt| pt.d <= 1e-4).count();
    Ok(Outcome {
        primary: t,
        extra: vec![("curve", curve), ("zeros", zt)],
        summary: json!({
            "n": n,
            "grid": grid,
            "period": period,
            "t_f": solved.t_f,
            "cells_below_1e-4": level,
            "cells_undefined": undefined,
            "refined_zeros": zeros.len(),
        }),
        row_status: defined,
        failures: Vec::new(),
    })
}

fn nmr(p: &Params) -> Result<Outcome, ConfigError> {
    let nu = p.nu.unwrap_or(100e3);
    let dwell = p.dwell.unwrap_or(0.5e-6);
    let mode = match p.mode.unwrap_or(ModeArg::FreeTail) {
        ModeArg::FreeTail => Mode::FreeTail { period: 2.0 * PI * nu * dwell },
        ModeArg::Locked => Mode::LockedGrid { n: p.n.unwrap_or(9) },
    };
    let problem = ShootingProblem::two_control(mode);
    let us = |t: f64| analytic::nmr_time(t, nu).unwrap_or(f64::NAN);
    let mut table = Table::new(&["case", "N", "T", "t_f", "time_us"]);
    let t_c = analytic::TWO_CONTROL_TIME;
    table.push(vec!["continuous".into(), Cell::Text(String::new()), Cell::Text(String::new()), t_c.into(), us(t_c).into()]);
    let mut failures = Vec::new();
    let mut status = vec![true];
    let mut summary = json!({ "nu_hz": nu, "dwell_s": dwell, "continuous_us": us(t_c) });
    match parallel_multistart(&problem, SeedPlan::from(p)) {
        Ok(r) => {
            table.push(vec!["discrete".into(), r.n.into(), r.period.into(), r.t_f.into(), us(r.t_f).into()]);
            status.push(true);
            if let (Some(expected), Mode::FreeTail { .. }) = (p.n, mode) {
                if expected != r.n {
                    failures.push(format!("free-tail solution uses N = {}, expected {expected}", r.n));
                }
            }
            summary["discrete_us"] = json!(us(r.t_f));
            summary["n"] = json!(r.n);
            summary["tail"] = json!(r.tail);
            summary["t_f"] = json!(r.t_f);
        }
        Err(e) => {
            status.push(false);
            failures.push(e.to_string());
        }
    }
    Ok(Outcome { primary: table, extra: Vec::new(), summary, row_status: status, failures })
}
