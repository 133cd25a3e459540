//! Damped-Newton shooting on the initial costate and the time unknown.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::analytic::{self, Branch};
use crate::geometry::{BlochVector, Vec3};
use crate::linalg::lstsq_min_norm;
use crate::pmp::{propagate_extremal, ExtremalTrajectory, Family, PiecewiseControl, PmpError, RootChoice};

/// How the final time relates to the sampling grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// `N` fixed, unknowns `(P(0), T)`, `t_f = N T`.
    LockedGrid { n: usize },
    /// `T` fixed, unknowns `(P(0), t_f)`, last interval `δT = t_f − (N − 1) T`.
    FreeTail { period: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub residual: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step, scaled by `|u| + 1`.
    pub fd_step: f64,
    pub max_halvings: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: 1e-10, max_iterations: 200, fd_step: 1e-7, max_halvings: 30 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShootingProblem {
    pub family: Family,
    pub initial: BlochVector,
    pub target: BlochVector,
    pub mode: Mode,
    pub tolerances: Tolerances,
}

impl ShootingProblem {
    /// `(1,0,0) → (0,1,0)` with two resonant controls.
    pub fn two_control(mode: Mode) -> Self {
        Self::two_control_with_root(mode, RootChoice::Maximizing)
    }

    pub fn two_control_with_root(mode: Mode, root: RootChoice) -> Self {
        Self {
            family: Family::TwoControl { root },
            initial: Vec3::X,
            target: Vec3::Y,
            mode,
            tolerances: Tolerances::default(),
        }
    }

    /// North pole to south pole with `|ω| ≤ 1` at fixed detuning.
    pub fn one_control(detuning: f64, mode: Mode) -> Self {
        Self {
            family: Family::OneControl { detuning, bound: 1.0 },
            initial: Vec3::Z,
            target: -Vec3::Z,
            mode,
            tolerances: Tolerances::default(),
        }
    }

    /// Between the adiabatic states with detuning control `|Δ| ≤ bound`.
    pub fn landau_zener(coupling: f64, bound: f64, mode: Mode) -> Self {
        let (initial, target) = analytic::lz_boundary_states(coupling);
        Self { family: Family::LandauZener { coupling, bound }, initial, target, mode, tolerances: Tolerances::default() }
    }

    /// Sampling grid `(N, T, δT)` implied by the unknowns.
    pub fn grid(&self, unknowns: &[f64; 4]) -> Result<(usize, f64, f64), ShootingError> {
        let time = unknowns[3];
        match self.mode {
            Mode::LockedGrid { n } => {
                if n == 0 || !(time > 0.0) || !time.is_finite() {
                    return Err(ShootingError::InvalidTail);
                }
                Ok((n, time, time))
            }
            Mode::FreeTail { period } => {
                if !(time > 0.0) || !time.is_finite() || !(period > 0.0) {
                    return Err(ShootingError::InvalidTail);
                }
                let n = (time / period).ceil().max(1.0) as usize;
                let tail = time - (n - 1) as f64 * period;
                if !(tail > 0.0) || tail > period * (1.0 + 1e-12) {
                    return Err(ShootingError::InvalidTail);
                }
                Ok((n, period, tail.min(period)))
            }
        }
    }

    /// Final time implied by the unknowns.
    pub fn final_time(&self, unknowns: &[f64; 4]) -> f64 {
        match self.mode {
            Mode::LockedGrid { n } => n as f64 * unknowns[3],
            Mode::FreeTail { .. } => unknowns[3],
        }
    }

    /// Continuous-limit reference time of the problem.
    pub fn continuous_time(&self) -> Option<f64> {
        match self.family {
            Family::TwoControl { .. } => Some(analytic::TWO_CONTROL_TIME),
            Family::OneControl { detuning, .. } => analytic::one_control_continuous(detuning).ok().map(|s| s.t_f),
            Family::LandauZener { coupling, bound } => analytic::lz_continuous_reference(coupling, bound).ok().map(|s| s.t_f),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShootingError {
    /// Extremal construction failed at the seed itself.
    Trajectory { seed_id: usize, error: PmpError },
    /// Derived tail interval outside `(0, T]`, or a non-positive time unknown.
    InvalidTail,
    /// Iteration limit or line-search failure; carries the best iterate.
    NoConvergence { best: Box<ShootingResult> },
    AllSeedsFailed,
    /// No continuous reference is available to seed from.
    NoSeed,
}

impl fmt::Display for ShootingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShootingError::Trajectory { seed_id, error } => write!(f, "seed {seed_id}: {error}"),
            ShootingError::InvalidTail => write!(f, "tail interval outside (0, T]"),
            ShootingError::NoConvergence { best } => {
                write!(f, "no convergence (seed {}, residual {:e})", best.seed_id, best.residual_norm)
            }
            ShootingError::AllSeedsFailed => write!(f, "all seeds failed"),
            ShootingError::NoSeed => write!(f, "no continuous reference available for seeding"),
        }
    }
}

impl core::error::Error for ShootingError {}

#[derive(Clone, Debug, PartialEq)]
pub struct ShootingResult {
    pub costate: Vec3,
    pub n: usize,
    pub period: f64,
    pub tail: f64,
    pub t_f: f64,
    pub residual: [f64; 4],
    pub residual_norm: f64,
    pub trajectory: ExtremalTrajectory,
    pub controls: PiecewiseControl,
    pub converged: bool,
    pub iterations: usize,
    pub seed_id: usize,
}

impl ShootingResult {
    pub fn unknowns(&self, mode: Mode) -> [f64; 4] {
        let time = match mode {
            Mode::LockedGrid { .. } => self.period,
            Mode::FreeTail { .. } => self.t_f,
        };
        [self.costate.x, self.costate.y, self.costate.z, time]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Seed {
    pub id: usize,
    pub unknowns: [f64; 4],
}

struct Evaluation {
    n: usize,
    period: f64,
    tail: f64,
    trajectory: ExtremalTrajectory,
    residual: [f64; 4],
}

fn evaluate(problem: &ShootingProblem, u: &[f64; 4]) -> Result<Evaluation, ShootingError> {
    let (n, period, tail) = problem.grid(u)?;
    let p0 = Vec3::new(u[0], u[1], u[2]);
    let trajectory = propagate_extremal(problem.initial, p0, &problem.family, n, period, tail)
        .map_err(|error| ShootingError::Trajectory { seed_id: 0, error })?;
    let dx = trajectory.final_state - problem.target;
    let residual = [dx.x, dx.y, dx.z, trajectory.final_hamiltonian() - 1.0];
    Ok(Evaluation { n, period, tail, trajectory, residual })
}

/// `(X(t_f) − X_target, H_P(t_f) − 1)`.
pub fn residual(problem: &ShootingProblem, unknowns: &[f64; 4]) -> Result<[f64; 4], ShootingError> {
    evaluate(problem, unknowns).map(|e| e.residual)
}

fn norm(r: &[f64; 4]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn package(problem: &ShootingProblem, u: &[f64; 4], e: Evaluation, iterations: usize, seed_id: usize) -> ShootingResult {
    let residual_norm = norm(&e.residual);
    let controls = PiecewiseControl {
        period: e.period,
        tail: e.tail,
        values: e.trajectory.intervals.iter().map(|r| r.control).collect(),
    };
    ShootingResult {
        costate: Vec3::new(u[0], u[1], u[2]),
        n: e.n,
        period: e.period,
        tail: e.tail,
        t_f: problem.final_time(u),
        residual: e.residual,
        residual_norm,
        trajectory: e.trajectory,
        controls,
        converged: residual_norm < problem.tolerances.residual,
        iterations,
        seed_id,
    }
}

fn jacobian(problem: &ShootingProblem, u: &[f64; 4], r: &[f64; 4]) -> Vec<Vec<f64>> {
    let mut jac = vec![vec![0.0; 4]; 4];
    for j in 0..4 {
        let h = problem.tolerances.fd_step * (u[j].abs() + 1.0);
        let mut up = *u;
        up[j] += h;
        let column = match residual(problem, &up) {
            Ok(rp) => Some((rp, h)),
            Err(_) => {
                let mut dn = *u;
                dn[j] -= h;
                residual(problem, &dn).ok().map(|rm| (rm, -h))
            }
        };
        if let Some((rs, step)) = column {
            for i in 0..4 {
                jac[i][j] = (rs[i] - r[i]) / step;
            }
        }
    }
    jac
}

/// Damped Newton from one seed.
///
/// The Jacobian may be rank deficient (the two-control residual does not depend on `p_x(0)`),
/// so the step is the minimum-norm least-squares solution.
pub fn solve(problem: &ShootingProblem, seed: &Seed) -> Result<ShootingResult, ShootingError> {
    let tol = problem.tolerances;
    let mut u = seed.unknowns;
    let mut current = evaluate(problem, &u).map_err(|e| match e {
        ShootingError::Trajectory { error, .. } => ShootingError::Trajectory { seed_id: seed.id, error },
        other => other,
    })?;
    let mut r_norm = norm(&current.residual);
    let mut iterations = 0;
    while r_norm >= tol.residual && iterations < tol.max_iterations {
        iterations += 1;
        let jac = jacobian(problem, &u, &current.residual);
        let rhs: Vec<f64> = current.residual.iter().map(|v| -v).collect();
        // Forward differences carry ~1e-8 relative error; smaller singular values are noise.
        let step = lstsq_min_norm(&jac, &rhs, 1e-7);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=tol.max_halvings {
            let trial = [u[0] + lambda * step[0], u[1] + lambda * step[1], u[2] + lambda * step[2], u[3] + lambda * step[3]];
            if let Ok(e) = evaluate(problem, &trial) {
                let n = norm(&e.residual);
                if n < r_norm {
                    accepted = Some((trial, e, n));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, e, n)) => {
                u = trial;
                current = e;
                r_norm = n;
            }
            None => break,
        }
    }
    let result = package(problem, &u, current, iterations, seed.id);
    if result.converged {
        Ok(result)
    } else {
        Err(ShootingError::NoConvergence { best: Box::new(result) })
    }
}

/// Continuous-limit seeds for the problem: the analytic adjoint and the matching time unknown.
///
/// One-control problems get all four bang-bang structures (two switch times, two signs).
pub fn continuous_seeds(problem: &ShootingProblem) -> Result<Vec<[f64; 4]>, ShootingError> {
    let t_c = problem.continuous_time().ok_or(ShootingError::NoSeed)?;
    let time = match problem.mode {
        Mode::LockedGrid { n } => t_c / n as f64,
        Mode::FreeTail { .. } => t_c,
    };
    let pack = |p: Vec3| [p.x, p.y, p.z, time];
    Ok(match problem.family {
        Family::TwoControl { root } => {
            let branch = if root == RootChoice::Negative { Branch::North } else { Branch::South };
            vec![pack(analytic::two_control_continuous(branch).adjoint.base)]
        }
        Family::OneControl { detuning, .. } => {
            let s = analytic::one_control_continuous(detuning).map_err(|_| ShootingError::NoSeed)?;
            let mut seeds = Vec::new();
            for switch in [s.t1, s.t2] {
                for first in [-1.0, 1.0] {
                    seeds.push(pack(s.solution(switch, first).adjoint.base));
                }
            }
            seeds
        }
        Family::LandauZener { coupling, bound } => {
            let s = analytic::lz_continuous_reference(coupling, bound).map_err(|_| ShootingError::NoSeed)?;
            vec![pack(s.solution.adjoint.base)]
        }
    })
}

/// Continuous seeds followed by Gaussian perturbations of the first one.
///
/// Costate components get additive noise of width `sigma`; the time unknown is scaled by
/// `1 + sigma·z`. The stream is a ChaCha8 generator seeded with `stream`.
pub fn default_seeds(problem: &ShootingProblem, perturbations: usize, sigma: f64, stream: u64) -> Result<Vec<Seed>, ShootingError> {
    let base = continuous_seeds(problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let normal = Normal::new(0.0, sigma).map_err(|_| ShootingError::NoSeed)?;
    let mut seeds: Vec<Seed> = Vec::with_capacity(base.len() + perturbations);
    seeds.push(Seed { id: 0, unknowns: base[0] });
    let centre = base[0];
    for k in 0..perturbations {
        let mut u = centre;
        for v in u.iter_mut().take(3) {
            *v += normal.sample(&mut rng);
        }
        u[3] *= 1.0 + normal.sample(&mut rng);
        seeds.push(Seed { id: k + 1, unknowns: u });
    }
    for (k, u) in base.iter().enumerate().skip(1) {
        seeds.push(Seed { id: perturbations + k, unknowns: *u });
    }
    Ok(seeds)
}

/// Converged result with the smallest final time; ties go to the earlier seed.
pub fn select_best<I>(results: I) -> Result<ShootingResult, ShootingError>
where
    I: IntoIterator<Item = Result<ShootingResult, ShootingError>>,
{
    let mut best: Option<ShootingResult> = None;
    for r in results.into_iter().flatten() {
        if !r.converged {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => r.t_f < b.t_f - 1e-12 || (r.t_f <= b.t_f + 1e-12 && r.seed_id < b.seed_id),
        };
        if better {
            best = Some(r);
        }
    }
    best.ok_or(ShootingError::AllSeedsFailed)
}

pub fn multistart(problem: &ShootingProblem, seeds: &[Seed]) -> Result<ShootingResult, ShootingError> {
    select_best(seeds.iter().map(|s| solve(problem, s)))
}

/// One row of a convergence sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub period: f64,
    pub tail: f64,
    pub t_f: f64,
    /// `t_f − t_f^(c)`.
    pub gap: f64,
    pub converged: bool,
    pub residual_norm: f64,
    pub costate: Vec3,
}

impl SweepRow {
    fn from_result(r: &ShootingResult, t_c: f64) -> Self {
        Self {
            n: r.n,
            period: r.period,
            tail: r.tail,
            t_f: r.t_f,
            gap: r.t_f - t_c,
            converged: r.converged,
            residual_norm: r.residual_norm,
            costate: r.costate,
        }
    }
}

/// Solve a sequence of problems, warm-starting each from the previous converged solution
/// and falling back to the default seeds when the warm start fails.
pub fn convergence_sweep(template: &ShootingProblem, modes: &[Mode]) -> Result<Vec<SweepRow>, ShootingError> {
    convergence_sweep_with(template, modes, |problem| {
        let seeds = default_seeds(problem, 20, 0.1, 42)?;
        multistart(problem, &seeds)
    })
}

/// [`convergence_sweep`] with a caller-supplied cold-start solver.
pub fn convergence_sweep_with<F>(template: &ShootingProblem, modes: &[Mode], mut cold_start: F) -> Result<Vec<SweepRow>, ShootingError>
where
    F: FnMut(&ShootingProblem) -> Result<ShootingResult, ShootingError>,
{
    let t_c = template.continuous_time().ok_or(ShootingError::NoSeed)?;
    let mut rows = Vec::with_capacity(modes.len());
    let mut previous: Option<ShootingResult> = None;
    for &mode in modes {
        let problem = ShootingProblem { mode, ..*template };
        let mut attempt = None;
        if let Some(prev) = &previous {
            let time = match mode {
                Mode::LockedGrid { n } => prev.t_f / n as f64,
                Mode::FreeTail { .. } => prev.t_f,
            };
            let warm = Seed { id: usize::MAX, unknowns: [prev.costate.x, prev.costate.y, prev.costate.z, time] };
            attempt = solve(&problem, &warm).ok();
        }
        let result = match attempt {
            Some(r) => Ok(r),
            None => cold_start(&problem),
        };
        match result {
            Ok(r) => {
                rows.push(SweepRow::from_result(&r, t_c));
                previous = Some(r);
            }
            Err(ShootingError::NoConvergence { best }) => rows.push(SweepRow::from_result(&best, t_c)),
            Err(_) => {
                let n = match mode {
                    Mode::LockedGrid { n } => n,
                    Mode::FreeTail { .. } => 0,
                };
                let period = match mode {
                    Mode::FreeTail { period } => period,
                    Mode::LockedGrid { .. } => f64::NAN,
                };
                rows.push(SweepRow {
                    n,
                    period,
                    tail: f64::NAN,
                    t_f: f64::NAN,
                    gap: f64::NAN,
                    converged: false,
                    residual_norm: f64::NAN,
                    costate: Vec3::new(f64::NAN, f64::NAN, f64::NAN),
                });
            }
        }
    }
    Ok(rows)
}
