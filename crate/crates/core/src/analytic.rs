//! Continuous-limit references and the exactly solvable linearized system.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::rotation_about;
use crate::geometry::{BlochVector, Vec3};
use crate::pmp::{propagate_extremal, Family, PmpError, RootChoice};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticError {
    DomainError,
    NoConvergence,
}

impl fmt::Display for AnalyticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticError::DomainError => write!(f, "parameter outside the domain of the closed form"),
            AnalyticError::NoConvergence => write!(f, "no admissible schedule found"),
        }
    }
}

impl core::error::Error for AnalyticError {}

/// Continuous-limit two-control minimum time, `π√3/2`.
pub const TWO_CONTROL_TIME: f64 = 2.720_699_046_351_326_5;

/// Adjoint momentum conjugate to the azimuth on the two-control extremal.
pub const P_PHI: f64 = 0.577_350_269_189_625_8;

/// `P(0) = base + s · free` for any real `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjointFamily {
    pub base: Vec3,
    pub free: Vec3,
}

impl AdjointFamily {
    pub fn member(&self, s: f64) -> Vec3 {
        self.base + self.free.scale(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ControlLaw {
    /// `u(t) = initial + rate · t`.
    LinearPhase { initial: f64, rate: f64 },
    /// Consecutive `(value, duration)` segments.
    Schedule(Vec<(f64, f64)>),
}

impl ControlLaw {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            ControlLaw::LinearPhase { initial, rate } => initial + rate * t,
            ControlLaw::Schedule(segments) => {
                let mut start = 0.0;
                for &(u, d) in segments {
                    if t < start + d {
                        return u;
                    }
                    start += d;
                }
                segments.last().map(|s| s.0).unwrap_or(0.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousSolution {
    pub family: Family,
    pub initial: BlochVector,
    pub target: BlochVector,
    pub t_f: f64,
    pub control: ControlLaw,
    pub adjoint: AdjointFamily,
}

impl ContinuousSolution {
    /// State at time `t` under the stored control, in closed form.
    pub fn state(&self, t: f64) -> Result<BlochVector, PmpError> {
        match &self.control {
            ControlLaw::LinearPhase { initial, rate } => {
                // In the frame co-rotating with the phase the generator is constant.
                let (s, c) = initial.sin_cos();
                let body = Vec3::new(c, s, -rate);
                let x = rotation_about(body, t)? * self.initial;
                Ok(if *rate == 0.0 { x } else { rotation_about(Vec3::Z, rate * t)? * x })
            }
            ControlLaw::Schedule(segments) => {
                let mut x = self.initial;
                let mut left = t;
                for &(u, d) in segments {
                    let step = d.min(left);
                    if step <= 0.0 {
                        break;
                    }
                    x = self.family.rotation(u, step)? * x;
                    left -= step;
                }
                Ok(x)
            }
        }
    }

    pub fn final_state(&self) -> Result<BlochVector, PmpError> {
        self.state(self.t_f)
    }
}

/// Hemisphere of the two-control extremal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Branch {
    /// `p_z(0) = −1`, trajectory below the equator.
    #[default]
    South,
    /// `p_z(0) = +1`, equator-mirrored.
    North,
}

impl Branch {
    pub fn pz(self) -> f64 {
        match self {
            Branch::South => -1.0,
            Branch::North => 1.0,
        }
    }
}

/// Continuous two-control transfer `(1,0,0) → (0,1,0)`.
pub fn two_control_continuous(branch: Branch) -> ContinuousSolution {
    let pz = branch.pz();
    ContinuousSolution {
        family: Family::two_control(),
        initial: Vec3::X,
        target: Vec3::Y,
        t_f: TWO_CONTROL_TIME,
        control: ControlLaw::LinearPhase { initial: -pz * FRAC_PI_2, rate: -P_PHI },
        adjoint: AdjointFamily { base: Vec3::new(0.0, P_PHI, pz), free: Vec3::X },
    }
}

/// Polar angle on the increasing branch, `ϑ(t) = π/2 + asin(sin(√(1+p_φ²) t)/√(1+p_φ²))`.
pub fn two_control_polar_angle(t: f64) -> f64 {
    let k = (1.0 + P_PHI * P_PHI).sqrt();
    FRAC_PI_2 + ((k * t).sin() / k).asin()
}

/// Time of the polar-angle extremum, `π√3/4`.
pub fn two_control_extremum_time() -> f64 {
    0.5 * TWO_CONTROL_TIME
}

/// Bang-bang transfer from the north to the south pole at fixed detuning.
#[derive(Clone, Debug, PartialEq)]
pub struct OneControlContinuous {
    pub detuning: f64,
    pub t_f: f64,
    /// Earlier switch time `(π − acos Δ²)/Ω`.
    pub t1: f64,
    /// Later switch time `(π + acos Δ²)/Ω`.
    pub t2: f64,
}

impl OneControlContinuous {
    /// Bang-bang solution switching at `switch`, starting from amplitude `first ∈ {−1, +1}`.
    pub fn solution(&self, switch: f64, first: f64) -> ContinuousSolution {
        let d = self.detuning;
        let big = (1.0 + d * d).sqrt();
        // L(0) = (u0, Ly0, 0) with H_P = first · u0 = 1.
        let u0 = first;
        let (s, c) = (big * switch).sin_cos();
        let ly0 = if d == 0.0 || s == 0.0 { 0.0 } else { u0 * (1.0 + d * d * c) / (d * big * s) };
        ContinuousSolution {
            family: Family::OneControl { detuning: d, bound: 1.0 },
            initial: Vec3::Z,
            target: -Vec3::Z,
            t_f: self.t_f,
            control: ControlLaw::Schedule(vec![(first, switch), (-first, self.t_f - switch)]),
            // X₀ = ẑ gives L = (−p_y, p_x, 0).
            adjoint: AdjointFamily { base: Vec3::new(ly0, -u0, 0.0), free: Vec3::Z },
        }
    }
}

pub fn one_control_continuous(detuning: f64) -> Result<OneControlContinuous, AnalyticError> {
    if !(detuning.abs() <= 1.0) {
        return Err(AnalyticError::DomainError);
    }
    let big = (1.0 + detuning * detuning).sqrt();
    let a = (detuning * detuning).acos();
    Ok(OneControlContinuous { detuning, t_f: 2.0 * PI / big, t1: (PI - a) / big, t2: (PI + a) / big })
}

/// Adiabatic boundary states of the Landau-Zener transfer: `(ω, 0, ±1)/√(ω²+1)`.
pub fn lz_boundary_states(coupling: f64) -> (BlochVector, BlochVector) {
    let r = (coupling * coupling + 1.0).sqrt();
    (Vec3::new(coupling / r, 0.0, 1.0 / r), Vec3::new(coupling / r, 0.0, -1.0 / r))
}

/// Bang-singular-bang reference for the Landau-Zener family.
#[derive(Clone, Debug, PartialEq)]
pub struct LzContinuous {
    pub coupling: f64,
    pub bound: f64,
    pub tau1: f64,
    pub tau_singular: f64,
    pub tau2: f64,
    /// Value of the first bang (the last one has the opposite sign).
    pub first: f64,
    pub t_f: f64,
    pub solution: ContinuousSolution,
}

/// First positive time at which the rotation about `n` brings `x` onto the plane `x = 0`.
fn first_crossing(n: Vec3, x: BlochVector, sign: f64) -> Option<f64> {
    let rate = n.norm();
    let period = 2.0 * PI / rate;
    let f = |t: f64| rotation_about(n, sign * t).map(|r| (r * x).x).unwrap_or(f64::NAN);
    let samples = 2000;
    let mut prev_t = 0.0;
    let mut prev = f(0.0);
    for k in 1..=samples {
        let t = period * k as f64 / samples as f64;
        let v = f(t);
        if prev == 0.0 && prev_t > 0.0 {
            return Some(prev_t);
        }
        if prev * v < 0.0 {
            let (mut lo, mut hi, mut flo) = (prev_t, t, prev);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev_t = t;
        prev = v;
    }
    None
}

/// Durations of the bang-singular-bang schedule.
///
/// On the singular arc `L_z ≡ 0` forces `L ∥ x̂`; since `L ⊥ X` the state sits on the
/// plane `x = 0` throughout the arc. Each bang is therefore stopped at its first crossing
/// of that plane, and the singular rotation about `x̂` connects the two crossings.
pub fn lz_continuous_reference(coupling: f64, bound: f64) -> Result<LzContinuous, AnalyticError> {
    if !(coupling > 0.0) || !(bound > 0.0) {
        return Err(AnalyticError::DomainError);
    }
    let (x0, xf) = lz_boundary_states(coupling);
    let mut best: Option<LzContinuous> = None;
    for first in [-bound, bound] {
        let n1 = Vec3::new(coupling, 0.0, first);
        let n2 = Vec3::new(coupling, 0.0, -first);
        let (Some(t1), Some(t2)) = (first_crossing(n1, x0, 1.0), first_crossing(n2, xf, -1.0)) else {
            continue;
        };
        let a = rotation_about(n1, t1).map_err(|_| AnalyticError::NoConvergence)? * x0;
        let b = rotation_about(n2, -t2).map_err(|_| AnalyticError::NoConvergence)? * xf;
        // Positive rotation about x̂ taking a to b.
        let mut angle = b.z.atan2(b.y) - a.z.atan2(a.y);
        while angle < 0.0 {
            angle += 2.0 * PI;
        }
        let ts = angle / coupling;
        let t_f = t1 + ts + t2;
        if best.as_ref().is_none_or(|b| t_f < b.t_f) {
            let l1 = Vec3::new(1.0 / coupling, 0.0, 0.0);
            let l0 = rotation_about(n1, -t1).map_err(|_| AnalyticError::NoConvergence)? * l1;
            let solution = ContinuousSolution {
                family: Family::LandauZener { coupling, bound },
                initial: x0,
                target: xf,
                t_f,
                control: ControlLaw::Schedule(vec![(first, t1), (0.0, ts), (-first, t2)]),
                adjoint: AdjointFamily { base: l0.cross(x0), free: x0 },
            };
            best = Some(LzContinuous { coupling, bound, tau1: t1, tau_singular: ts, tau2: t2, first, t_f, solution });
        }
    }
    best.ok_or(AnalyticError::NoConvergence)
}

/// Continuous solution of the linearized system `Ż = iωZ − i e^{iφ}`, from `Z = 0` to `Z = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearContinuous {
    pub omega: f64,
    pub t_f: f64,
    /// `ϑ = π − ω t_f`.
    pub theta: f64,
}

impl LinearContinuous {
    pub fn phase(&self, t: f64) -> f64 {
        self.theta + self.omega * t - FRAC_PI_2
    }

    /// `Z(t) = e^{iωt}[Z(0) − e^{iϑ} t]` with `Z(0) = 0`.
    pub fn z(&self, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.omega * t) * (-Complex64::from_polar(t, self.theta))
    }
}

pub fn linear_continuous(omega: f64) -> Result<LinearContinuous, AnalyticError> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(AnalyticError::DomainError);
    }
    Ok(LinearContinuous { omega, t_f: 1.0, theta: PI - omega })
}

/// Exact one-interval step of the linearized system with constant phase.
pub fn linear_step(z: Complex64, omega: f64, phase: f64, tau: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, omega * tau);
    e * z - Complex64::from_polar(1.0, phase) * (e - 1.0) / omega
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearDiscrete {
    pub omega: f64,
    pub n: usize,
    pub period: f64,
    pub t_f: f64,
    pub phases: Vec<f64>,
    pub final_z: Complex64,
}

pub fn linear_discrete(omega: f64, n: usize) -> Result<LinearDiscrete, AnalyticError> {
    if omega == 0.0 || n == 0 || !((omega / (2.0 * n as f64)).abs() <= 1.0) {
        return Err(AnalyticError::DomainError);
    }
    let period = 2.0 / omega * (omega / (2.0 * n as f64)).asin();
    let t_f = n as f64 * period;
    let theta = PI - omega * t_f;
    let phases: Vec<f64> = (0..n).map(|k| theta + (k as f64 + 0.5) * omega * period - FRAC_PI_2).collect();
    let mut z = Complex64::new(0.0, 0.0);
    for &phi in &phases {
        z = linear_step(z, omega, phi, period);
    }
    Ok(LinearDiscrete { omega, n, period, t_f, phases, final_z: z })
}

/// Radius of the adjoint sphere for a given free component.
pub fn adjoint_radius(px: f64) -> f64 {
    (4.0 / 3.0 + px * px).sqrt()
}

/// `(Θ_p, Φ_p)` of the continuous adjoint `(p_x, 1/√3, p_z)`.
pub fn adjoint_curve_point(px: f64, branch: Branch) -> (f64, f64) {
    let r = adjoint_radius(px);
    ((branch.pz() / r).acos(), (1.0 / (3.0_f64.sqrt() * px)).atan())
}

pub fn adjoint_from_angles(radius: f64, theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(radius * st * cp, radius * st * sp, radius * ct)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereMapPoint {
    pub theta: f64,
    pub phi: f64,
    /// Distance to the target at `t_f`; NaN where the extremal is undefined.
    pub d: f64,
}

/// Distance to the two-control target reached by the extremal from the adjoint direction `(Θ, Φ)`.
pub fn sphere_map_distance(theta: f64, phi: f64, n: usize, period: f64, root: RootChoice) -> f64 {
    // The extremal depends on the direction of P only, and not on its p_x component.
    let p = adjoint_from_angles(1.0, theta, phi);
    match propagate_extremal(Vec3::X, p, &Family::TwoControl { root }, n, period, period) {
        Ok(t) => t.final_state.distance(Vec3::Y),
        Err(_) => f64::NAN,
    }
}

/// Figure of merit on a `grid × grid` mesh spanning `Θ ∈ (0, π)`, `Φ ∈ (−π/2, π/2)` (cell centres).
pub fn adjoint_sphere_map(n: usize, period: f64, grid: usize, root: RootChoice) -> Vec<SphereMapPoint> {
    (0..grid).flat_map(|i| adjoint_sphere_row(i, n, period, grid, root)).collect()
}

/// Row `i` (fixed `Θ`) of [`adjoint_sphere_map`].
pub fn adjoint_sphere_row(i: usize, n: usize, period: f64, grid: usize, root: RootChoice) -> Vec<SphereMapPoint> {
    let theta = PI * (i as f64 + 0.5) / grid as f64;
    (0..grid)
        .map(|j| {
            let phi = -FRAC_PI_2 + PI * (j as f64 + 0.5) / grid as f64;
            SphereMapPoint { theta, phi, d: sphere_map_distance(theta, phi, n, period, root) }
        })
        .collect()
}

/// Continuous reference curve `(p_x, Θ_p, Φ_p)` for `p_x` on a uniform grid in `(0, px_max]`.
pub fn adjoint_reference_curve(samples: usize, px_max: f64, branch: Branch) -> Vec<(f64, f64, f64)> {
    (1..=samples)
        .map(|k| {
            let px = px_max * k as f64 / samples as f64;
            let (t, p) = adjoint_curve_point(px, branch);
            (px, t, p)
        })
        .collect()
}

/// Minimize `d` over `Φ` on one grid row, starting from every local grid minimum, by golden section.
///
/// Returns refined `(Θ, Φ, d)` triples. Used to locate the zero set to better than grid resolution.
pub fn refine_row_minima(row: &[SphereMapPoint], n: usize, period: f64, root: RootChoice) -> Vec<SphereMapPoint> {
    let mut out = Vec::new();
    if row.len() < 3 {
        return out;
    }
    let h = row[1].phi - row[0].phi;
    let theta = row[0].theta;
    for j in 1..row.len() - 1 {
        let (a, b, c) = (row[j - 1].d, row[j].d, row[j + 1].d);
        if !(b <= a && b <= c) {
            continue;
        }
        let f = |phi: f64| sphere_map_distance(theta, phi, n, period, root);
        let (mut lo, mut hi) = (row[j].phi - h, row[j].phi + h);
        let g = 0.5 * (5.0_f64.sqrt() - 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if !(f1 > f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            }
        }
        let phi = 0.5 * (lo + hi);
        out.push(SphereMapPoint { theta, phi, d: f(phi) });
    }
    out
}

/// Normalized time to physical microseconds, `t_exp = t / (2πν)`.
pub fn nmr_time(t_normalized: f64, nu_hz: f64) -> Result<f64, AnalyticError> {
    if !(nu_hz > 0.0) {
        return Err(AnalyticError::DomainError);
    }
    Ok(t_normalized / (2.0 * PI * nu_hz) * 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_control_constants() {
        assert!((TWO_CONTROL_TIME - PI * 3.0_f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((P_PHI - 1.0 / 3.0_f64.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn equator_to_equator() {
        assert!((two_control_polar_angle(0.0) - FRAC_PI_2).abs() < 1e-15);
        assert!((two_control_polar_angle(TWO_CONTROL_TIME) - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn one_control_at_zero_detuning() {
        let s = one_control_continuous(0.0).unwrap();
        assert!((s.t1 - FRAC_PI_2).abs() < 1e-15);
        assert!((s.t2 - 1.5 * PI).abs() < 1e-15);
        assert!((s.t_f - 2.0 * PI).abs() < 1e-15);
        assert_eq!(one_control_continuous(1.5), Err(AnalyticError::DomainError));
    }

    #[test]
    fn lz_without_bangs_fails() {
        assert_eq!(lz_continuous_reference(0.5, 1e-9).unwrap_err(), AnalyticError::NoConvergence);
    }

    #[test]
    fn nmr_zero() {
        assert_eq!(nmr_time(0.0, 1e5).unwrap(), 0.0);
    }

    #[test]
    fn linear_single_step() {
        let omega = 0.01;
        let s = linear_discrete(omega, 1).unwrap();
        assert!((s.t_f - 2.0 / omega * (omega / 2.0).asin()).abs() < 1e-15);
        assert!((s.final_z - 1.0).norm() < 1e-12);
        assert_eq!(linear_discrete(4.0, 1).unwrap_err(), AnalyticError::DomainError);
    }
}
