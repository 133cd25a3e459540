//! Interval-averaged maximization conditions of the discrete maximum principle.
//!
//! State and costate share the dynamics `Ẋ = n × X`, so the angular momentum
//! `L = X × P` co-rotates with them and the Pontryagin Hamiltonian `H_P = n · L`
//! is constant inside each sampling interval.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{integrated_unit_rotation, rotation_about, rotation_two_control, DynamicsError};
use crate::geometry::{AdjointVector, BlochVector, Vec3};
use crate::quadrature::GaussLegendre;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PmpError {
    /// `P ∥ X`: every moment vanishes and the maximization is void.
    DegenerateMoments,
    /// The phase quadratic has a negative discriminant.
    NoRealRoot,
    ZeroGenerator,
    ZeroCoupling,
    InvalidInterval,
    /// An interval-level failure inside a trajectory, with its index.
    AtInterval { index: usize, source: IntervalFailure },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntervalFailure {
    DegenerateMoments,
    NoRealRoot,
    ZeroGenerator,
    ZeroCoupling,
}

impl fmt::Display for PmpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PmpError::DegenerateMoments => write!(f, "costate parallel to state, moments vanish"),
            PmpError::NoRealRoot => write!(f, "phase quadratic has no real root"),
            PmpError::ZeroGenerator => write!(f, "generator has zero detuning and zero amplitude"),
            PmpError::ZeroCoupling => write!(f, "coupling must be nonzero"),
            PmpError::InvalidInterval => write!(f, "interval lengths must satisfy 0 < dT <= T"),
            PmpError::AtInterval { index, source } => write!(f, "interval {index}: {source:?}"),
        }
    }
}

impl core::error::Error for PmpError {}

impl From<DynamicsError> for PmpError {
    fn from(_: DynamicsError) -> Self {
        PmpError::ZeroGenerator
    }
}

impl PmpError {
    fn at(self, index: usize) -> PmpError {
        let source = match self {
            PmpError::DegenerateMoments => IntervalFailure::DegenerateMoments,
            PmpError::NoRealRoot => IntervalFailure::NoRealRoot,
            PmpError::ZeroGenerator => IntervalFailure::ZeroGenerator,
            PmpError::ZeroCoupling => IntervalFailure::ZeroCoupling,
            other => return other,
        };
        PmpError::AtInterval { index, source }
    }
}

/// `I_a = Pᵀ M_a X` at the start of an interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentTriple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl MomentTriple {
    pub fn as_vec(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

pub fn moments(x: BlochVector, p: AdjointVector) -> MomentTriple {
    use crate::geometry::{M_X, M_Y, M_Z};
    MomentTriple { x: M_X.bilinear(p, x), y: M_Y.bilinear(p, x), z: M_Z.bilinear(p, x) }
}

/// `L = X × P`. Equal to the moment triple, since `Pᵀ(e_a × X) = e_a · (X × P)`.
pub fn angular_momentum(x: BlochVector, p: AdjointVector) -> Vec3 {
    x.cross(p)
}

/// Which solution of the phase quadratic to follow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RootChoice {
    /// The root with positive interval Hamiltonian (the interval maximizer).
    #[default]
    Maximizing,
    /// `h = tan(φ/2) > 0`.
    Positive,
    /// `h = tan(φ/2) < 0`.
    Negative,
}

fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    } else if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Coefficients `(a, b, c)` of `a h² + b h + c = 0`, `h = tan(φ/2)`.
pub fn phase_quadratic(i: MomentTriple, tau: f64) -> (f64, f64, f64) {
    let (s, c) = tau.sin_cos();
    let omc = 1.0 - c;
    (i.y * s + omc * i.z, 2.0 * i.x * s, omc * i.z - i.y * s)
}

/// Extremal phase for two resonant controls over an interval of length `tau`.
///
/// The two roots are found in polar form, `φ = β + asin q` and `φ = β + π − asin q`
/// with `(I_x, I_y) = ρ(cos β, sin β)` and `q = −(1 − cos τ) I_z / (ρ sin τ)`; this is
/// the same pair as the quadratic in `h` but avoids cancellation when `a ≈ 0`.
pub fn extremal_phase_two_control(i: MomentTriple, tau: f64, choice: RootChoice) -> Result<f64, PmpError> {
    let (a, b, c) = phase_quadratic(i, tau);
    if a == 0.0 && b == 0.0 && c == 0.0 {
        return Err(PmpError::DegenerateMoments);
    }
    let rho = i.x.hypot(i.y);
    let (s, co) = tau.sin_cos();
    let num = -(1.0 - co) * i.z;
    let den = rho * s;
    if den == 0.0 || (num / den).abs() > 1.0 {
        return Err(PmpError::NoRealRoot);
    }
    let q = num / den;
    let beta = i.y.atan2(i.x);
    let maximizing = wrap_angle(beta + q.asin());
    let other = wrap_angle(beta + PI - q.asin());
    let hp = |phi: f64| phi.cos() * i.x + phi.sin() * i.y;
    let (first, second) = if hp(maximizing) * tau >= hp(other) * tau {
        (maximizing, other)
    } else {
        (other, maximizing)
    };
    Ok(match choice {
        RootChoice::Maximizing => first,
        RootChoice::Positive | RootChoice::Negative => {
            let want_positive = choice == RootChoice::Positive;
            // h = tan(φ/2) > 0 iff φ ∈ (0, π) for wrapped φ.
            let pos = |phi: f64| phi > 0.0 && phi < PI;
            if pos(first) == want_positive {
                first
            } else if pos(second) == want_positive {
                second
            } else {
                first
            }
        }
    })
}

/// `∫₀^τ [cos φ Pᵀ M_y X − sin φ Pᵀ M_x X] dt` along the interval, in closed form.
pub fn phase_condition_residual(i: MomentTriple, phase: f64, tau: f64) -> f64 {
    let (s, c) = phase.sin_cos();
    let integral = integrated_unit_rotation(Vec3::new(c, s, 0.0), tau) * i.as_vec();
    c * integral.y - s * integral.x
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

fn cosc(x: f64) -> f64 {
    // (cos x − 1)/x
    if x.abs() < 1e-4 {
        -x / 2.0 + x.powi(3) / 24.0
    } else {
        (x.cos() - 1.0) / x
    }
}

/// Interval average of the switching function `Φ = L_x` for the one-control family.
pub fn gamma_one_control(x0: BlochVector, p0: AdjointVector, detuning: f64, amplitude: f64, tau: f64) -> Result<f64, PmpError> {
    let big = amplitude.hypot(detuning);
    if big == 0.0 {
        return Err(PmpError::ZeroGenerator);
    }
    let l = angular_momentum(x0, p0);
    let (d, w) = (detuning, amplitude);
    let b2 = big * big;
    let arg = big * tau;
    Ok(w / b2 * (d * l.z + w * l.x) + d / b2 * (d * l.x - w * l.z) * sinc(arg) + d / big * l.y * cosc(arg))
}

/// Outcome of the bounded one-dimensional maximization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SwitchCase {
    Upper,
    Lower,
    Interior,
    /// Switching average vanishes identically.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeChoice {
    pub value: f64,
    pub case: SwitchCase,
}

const GRID_POINTS: usize = 101;

/// Three-case rule shared by the amplitude controls.
///
/// `gamma(u)` is the interval average of `∂H_P/∂u`; `score(u)` ranks interior roots.
fn bounded_choice<G, S>(bound: f64, mut gamma: G, score: S) -> Result<AmplitudeChoice, PmpError>
where
    G: FnMut(f64) -> Result<f64, PmpError>,
    S: Fn(f64) -> f64,
{
    let mut us = [0.0; GRID_POINTS];
    let mut gs = [0.0; GRID_POINTS];
    for k in 0..GRID_POINTS {
        let u = -bound + 2.0 * bound * k as f64 / (GRID_POINTS - 1) as f64;
        us[k] = u;
        gs[k] = gamma(u)?;
    }
    let min = gs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = gs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if min > 0.0 {
        return Ok(AmplitudeChoice { value: bound, case: SwitchCase::Upper });
    }
    if max < 0.0 {
        return Ok(AmplitudeChoice { value: -bound, case: SwitchCase::Lower });
    }
    if min == 0.0 && max == 0.0 {
        return Ok(AmplitudeChoice { value: 0.0, case: SwitchCase::Degenerate });
    }

    let mut roots: Vec<f64> = Vec::new();
    for k in 0..GRID_POINTS - 1 {
        let (ga, gb) = (gs[k], gs[k + 1]);
        if ga == 0.0 {
            roots.push(us[k]);
            continue;
        }
        if ga * gb < 0.0 {
            let (mut lo, mut hi, mut glo) = (us[k], us[k + 1], ga);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                let gm = gamma(mid)?;
                if gm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (gm < 0.0) == (glo < 0.0) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    if gs[GRID_POINTS - 1] == 0.0 {
        roots.push(us[GRID_POINTS - 1]);
    }
    let best = roots
        .into_iter()
        .fold(None::<(f64, f64)>, |acc, r| {
            let s = score(r);
            match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((r, s)),
            }
        })
        .map(|(r, _)| r)
        .unwrap_or(0.0);
    Ok(AmplitudeChoice { value: best, case: SwitchCase::Interior })
}

/// Extremal amplitude `ω_k ∈ [−bound, bound]` for fixed detuning.
pub fn extremal_amplitude_one_control(
    x0: BlochVector,
    p0: AdjointVector,
    detuning: f64,
    tau: f64,
    bound: f64,
) -> Result<AmplitudeChoice, PmpError> {
    let l = angular_momentum(x0, p0);
    if detuning == 0.0 {
        // Γ ≡ L_x.
        return Ok(if l.x > 0.0 {
            AmplitudeChoice { value: bound, case: SwitchCase::Upper }
        } else if l.x < 0.0 {
            AmplitudeChoice { value: -bound, case: SwitchCase::Lower }
        } else {
            AmplitudeChoice { value: 0.0, case: SwitchCase::Degenerate }
        });
    }
    bounded_choice(
        bound,
        |w| gamma_one_control(x0, p0, detuning, w, tau),
        |w| w * l.x + detuning * l.z,
    )
}

/// Interval average of `L_z = ∂H_P/∂Δ` for the Landau-Zener family, by 32-point Gauss-Legendre.
pub fn gamma_lz(x0: BlochVector, p0: AdjointVector, coupling: f64, detuning: f64, tau: f64, rule: &GaussLegendre) -> Result<f64, PmpError> {
    if coupling == 0.0 {
        return Err(PmpError::ZeroCoupling);
    }
    let l = angular_momentum(x0, p0);
    let n = Vec3::new(coupling, 0.0, detuning);
    let mut acc = 0.0;
    for (t, w) in rule.points(0.0, tau) {
        acc += w * (rotation_about(n, t)? * l).z;
    }
    Ok(acc / tau)
}

/// Extremal detuning `Δ_k ∈ [−bound, bound]` for fixed coupling.
pub fn extremal_amplitude_lz(
    x0: BlochVector,
    p0: AdjointVector,
    coupling: f64,
    tau: f64,
    bound: f64,
) -> Result<AmplitudeChoice, PmpError> {
    if coupling == 0.0 {
        return Err(PmpError::ZeroCoupling);
    }
    let l = angular_momentum(x0, p0);
    if l.norm() == 0.0 {
        return Ok(AmplitudeChoice { value: 0.0, case: SwitchCase::Degenerate });
    }
    let rule = lz_rule();
    bounded_choice(
        bound,
        |d| gamma_lz(x0, p0, coupling, d, tau, &rule),
        |d| coupling * l.x + d * l.z,
    )
}

fn lz_rule() -> GaussLegendre {
    GaussLegendre::new(32)
}

/// Hamiltonian family of a control problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    TwoControl { root: RootChoice },
    OneControl { detuning: f64, bound: f64 },
    LandauZener { coupling: f64, bound: f64 },
}

impl Family {
    pub fn two_control() -> Self {
        Family::TwoControl { root: RootChoice::Maximizing }
    }

    /// Angular velocity for control value `u`.
    pub fn angular_velocity(&self, u: f64) -> Vec3 {
        match *self {
            Family::TwoControl { .. } => Vec3::new(u.cos(), u.sin(), 0.0),
            Family::OneControl { detuning, .. } => Vec3::new(u, 0.0, detuning),
            Family::LandauZener { coupling, .. } => Vec3::new(coupling, 0.0, u),
        }
    }

    pub fn rotation(&self, u: f64, tau: f64) -> Result<crate::geometry::Mat3, PmpError> {
        match *self {
            Family::TwoControl { .. } => Ok(rotation_two_control(u, tau)),
            _ => Ok(rotation_about(self.angular_velocity(u), tau)?),
        }
    }
}

/// Controls held constant on a uniform grid, with a possibly shorter last interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseControl {
    pub period: f64,
    pub tail: f64,
    pub values: Vec<f64>,
}

impl PiecewiseControl {
    pub fn total_time(&self) -> f64 {
        match self.values.len() {
            0 => 0.0,
            n => (n - 1) as f64 * self.period + self.tail,
        }
    }

    pub fn duration(&self, k: usize) -> f64 {
        if k + 1 == self.values.len() {
            self.tail
        } else {
            self.period
        }
    }

    /// Propagate a state through the whole sequence.
    pub fn simulate(&self, family: &Family, x0: BlochVector) -> Result<BlochVector, PmpError> {
        let mut x = x0;
        for (k, &u) in self.values.iter().enumerate() {
            x = family.rotation(u, self.duration(k))? * x;
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalRecord {
    pub state: BlochVector,
    pub costate: AdjointVector,
    pub control: f64,
    pub duration: f64,
    /// `H_P = n · (X × P)`, constant over the interval.
    pub hamiltonian: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalTrajectory {
    pub intervals: Vec<IntervalRecord>,
    pub final_state: BlochVector,
    pub final_costate: AdjointVector,
}

impl ExtremalTrajectory {
    pub fn final_hamiltonian(&self) -> f64 {
        self.intervals.last().map(|r| r.hamiltonian).unwrap_or(0.0)
    }

    pub fn controls(&self) -> PiecewiseControl {
        let n = self.intervals.len();
        let period = if n > 1 { self.intervals[0].duration } else { self.intervals.first().map(|r| r.duration).unwrap_or(0.0) };
        PiecewiseControl {
            period,
            tail: self.intervals.last().map(|r| r.duration).unwrap_or(0.0),
            values: self.intervals.iter().map(|r| r.control).collect(),
        }
    }
}

/// Extremal control for a single interval starting at `(x, p)`.
pub fn extremal_control(family: &Family, x: BlochVector, p: AdjointVector, tau: f64) -> Result<f64, PmpError> {
    match *family {
        Family::TwoControl { root } => extremal_phase_two_control(moments(x, p), tau, root),
        Family::OneControl { detuning, bound } => {
            extremal_amplitude_one_control(x, p, detuning, tau, bound).and_then(|c| match c.case {
                SwitchCase::Degenerate => Err(PmpError::DegenerateMoments),
                _ => Ok(c.value),
            })
        }
        Family::LandauZener { coupling, bound } => {
            extremal_amplitude_lz(x, p, coupling, tau, bound).and_then(|c| match c.case {
                SwitchCase::Degenerate => Err(PmpError::DegenerateMoments),
                _ => Ok(c.value),
            })
        }
    }
}

/// Build the extremal trajectory interval by interval: `N − 1` intervals of length `T`
/// followed by one of length `δT`.
pub fn propagate_extremal(
    x0: BlochVector,
    p0: AdjointVector,
    family: &Family,
    n: usize,
    period: f64,
    tail: f64,
) -> Result<ExtremalTrajectory, PmpError> {
    if n == 0 || !(period > 0.0) || !(tail > 0.0) || tail > period * (1.0 + 1e-12) {
        return Err(PmpError::InvalidInterval);
    }
    let mut x = x0;
    let mut p = p0;
    let mut intervals = Vec::with_capacity(n);
    for k in 0..n {
        let tau = if k + 1 == n { tail } else { period };
        let u = extremal_control(family, x, p, tau).map_err(|e| e.at(k))?;
        let rot = family.rotation(u, tau).map_err(|e| e.at(k))?;
        let hamiltonian = family.angular_velocity(u).dot(angular_momentum(x, p));
        intervals.push(IntervalRecord { state: x, costate: p, control: u, duration: tau, hamiltonian });
        x = rot * x;
        p = rot * p;
    }
    Ok(ExtremalTrajectory { intervals, final_state: x, final_costate: p })
}
