//! Exact single-interval propagation for the two-level Hamiltonian families.
//!
//! Every generator used here is a constant rotation on the Bloch sphere over one
//! sampling interval, so propagation is a closed-form rotation matrix. States and
//! costates obey the same equation and are propagated with the same matrix.

use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{BlochVector, Mat3, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicsError {
    /// Both detuning and amplitude vanish, so the rotation axis is undefined.
    ZeroGenerator,
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::ZeroGenerator => write!(f, "generator has zero detuning and zero amplitude"),
        }
    }
}

impl core::error::Error for DynamicsError {}

/// `R(τ) = exp[(cos φ M_x + sin φ M_y) τ]`, written out entry by entry.
pub fn rotation_two_control(phase: f64, tau: f64) -> Mat3 {
    let (s, c) = phase.sin_cos();
    let (st, ct) = tau.sin_cos();
    let omc = 1.0 - ct;
    Mat3([
        [s * s * ct + c * c, omc * s * c, st * s],
        [omc * s * c, s * s + ct * c * c, -st * c],
        [-st * s, st * c, ct],
    ])
}

/// Rotation generated by `Δ M_z + ω M_x` over `τ`: axis `(ω, 0, Δ)/Ω₀`, angle `Ω₀ τ`.
pub fn rotation_axis(detuning: f64, amplitude: f64, tau: f64) -> Result<Mat3, DynamicsError> {
    rotation_about(Vec3::new(amplitude, 0.0, detuning), tau)
}

/// Rodrigues rotation `exp([v]× τ)`: angle `|v| τ` about `v/|v|`.
pub fn rotation_about(angular_velocity: Vec3, tau: f64) -> Result<Mat3, DynamicsError> {
    let rate = angular_velocity.norm();
    if rate == 0.0 {
        return Err(DynamicsError::ZeroGenerator);
    }
    let k = Mat3::skew(angular_velocity.scale(1.0 / rate));
    let (s, c) = (rate * tau).sin_cos();
    Ok(Mat3::IDENTITY + k.scaled(s) + (k * k).scaled(1.0 - c))
}

/// `∫₀^τ exp([n]× t) dt` for a unit axis `n`, scaled to a rotation rate of one.
///
/// Used for interval averages of co-rotating quantities.
pub(crate) fn integrated_unit_rotation(axis: Vec3, tau: f64) -> Mat3 {
    let k = Mat3::skew(axis);
    Mat3::IDENTITY.scaled(tau) + k.scaled(1.0 - tau.cos()) + (k * k).scaled(tau - tau.sin())
}

/// Hamiltonian family held constant over one interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Generator {
    /// Resonant x/y controls with saturated unit amplitude and phase `φ`.
    TwoControlResonant { phase: f64 },
    /// Fixed detuning, control amplitude `|ω| ≤ 1` along x.
    OneControlDetuned { detuning: f64, amplitude: f64 },
    /// Fixed coupling `ω`, control is the detuning `Δ`.
    LandauZener { detuning: f64, coupling: f64 },
}

impl Generator {
    /// Angular-velocity vector `n` such that `Ẋ = n × X`.
    pub fn angular_velocity(&self) -> Vec3 {
        match *self {
            Generator::TwoControlResonant { phase } => {
                let (s, c) = phase.sin_cos();
                Vec3::new(c, s, 0.0)
            }
            Generator::OneControlDetuned { detuning, amplitude } => Vec3::new(amplitude, 0.0, detuning),
            Generator::LandauZener { detuning, coupling } => Vec3::new(coupling, 0.0, detuning),
        }
    }

    pub fn rotation(&self, tau: f64) -> Result<Mat3, DynamicsError> {
        match *self {
            Generator::TwoControlResonant { phase } => Ok(rotation_two_control(phase, tau)),
            Generator::OneControlDetuned { detuning, amplitude } => rotation_axis(detuning, amplitude, tau),
            Generator::LandauZener { detuning, coupling } => rotation_axis(detuning, coupling, tau),
        }
    }
}

/// A generator together with the length of the interval it is applied for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntervalGenerator {
    pub generator: Generator,
    pub duration: f64,
}

impl IntervalGenerator {
    pub fn new(generator: Generator, duration: f64) -> Self {
        Self { generator, duration }
    }

    pub fn rotation(&self) -> Result<Mat3, DynamicsError> {
        self.generator.rotation(self.duration)
    }
}

pub fn propagate(state: BlochVector, interval: &IntervalGenerator) -> Result<BlochVector, DynamicsError> {
    Ok(interval.rotation()? * state)
}

/// Two-component pure state `a|1⟩ + b|2⟩`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitState {
    pub a: Complex64,
    pub b: Complex64,
}

impl QubitState {
    pub fn new(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QubitState) -> Complex64 {
        self.a.conj() * other.a + self.b.conj() * other.b
    }

    /// Pauli expectation vector `(⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩)`.
    pub fn bloch_vector(&self) -> BlochVector {
        let t = pauli_transition(self, self);
        Vec3::new(t[0].re, t[1].re, t[2].re)
    }

    /// Pure state whose Bloch vector is the unit vector `v` (global phase fixed so `a` is real).
    pub fn from_bloch(v: BlochVector) -> Option<QubitState> {
        let v = v.normalized()?;
        let theta = v.x.hypot(v.y).atan2(v.z);
        let phi = v.y.atan2(v.x);
        let (s, c) = (0.5 * theta).sin_cos();
        Some(QubitState::new(Complex64::new(c, 0.0), Complex64::from_polar(s, phi)))
    }
}

/// `(⟨l|σ_x|r⟩, ⟨l|σ_y|r⟩, ⟨l|σ_z|r⟩)`.
pub fn pauli_transition(l: &QubitState, r: &QubitState) -> [Complex64; 3] {
    let i = Complex64::i();
    let la = l.a.conj();
    let lb = l.b.conj();
    [
        la * r.b + lb * r.a,
        -i * la * r.b + i * lb * r.a,
        la * r.a - lb * r.b,
    ]
}

/// 2x2 complex matrix acting on [`QubitState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary2(pub [[Complex64; 2]; 2]);

impl Unitary2 {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Unitary2([[one, zero], [zero, one]])
    }

    pub fn apply(&self, s: &QubitState) -> QubitState {
        let m = &self.0;
        QubitState::new(m[0][0] * s.a + m[0][1] * s.b, m[1][0] * s.a + m[1][1] * s.b)
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Unitary2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn mul(&self, o: &Unitary2) -> Unitary2 {
        let (a, b) = (&self.0, &o.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Unitary2(out)
    }

    /// Largest entry of `|U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let mut worst = 0.0_f64;
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Bloch rotation induced by conjugation, `R_ab = ½ tr(σ_a U σ_b U†)`.
    pub fn bloch_rotation(&self) -> Mat3 {
        let mut r = Mat3::ZERO;
        let basis = [
            QubitState::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            QubitState::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
        ];
        // Build U σ_b U† column by column through its action on the basis.
        for b in 0..3 {
            let mut conj = [[Complex64::new(0.0, 0.0); 2]; 2];
            for (col, e) in basis.iter().enumerate() {
                let v = self.adjoint().apply(e);
                let v = apply_pauli(b, &v);
                let v = self.apply(&v);
                conj[0][col] = v.a;
                conj[1][col] = v.b;
            }
            let m = Unitary2(conj);
            for a in 0..3 {
                // ½ tr(σ_a M)
                let mut tr = Complex64::new(0.0, 0.0);
                for (col, e) in basis.iter().enumerate() {
                    let v = apply_pauli(a, &m.apply(e));
                    tr += if col == 0 { v.a } else { v.b };
                }
                r.0[a][b] = 0.5 * tr.re;
            }
        }
        r
    }
}

fn apply_pauli(which: usize, s: &QubitState) -> QubitState {
    let i = Complex64::i();
    match which {
        0 => QubitState::new(s.b, s.a),
        1 => QubitState::new(-i * s.b, i * s.a),
        _ => QubitState::new(s.a, -s.b),
    }
}

/// `exp[-i τ (cos φ σ_x + sin φ σ_y)/2] = cos(τ/2) I − i sin(τ/2)(cos φ σ_x + sin φ σ_y)`.
pub fn spinor_propagator(phase: f64, tau: f64) -> Unitary2 {
    let (sp, cp) = phase.sin_cos();
    let (sh, ch) = (0.5 * tau).sin_cos();
    let diag = Complex64::new(ch, 0.0);
    // -i sh (cp σx + sp σy): off-diagonals -i sh (cp ∓ i sp)
    let upper = Complex64::new(0.0, -sh) * Complex64::new(cp, -sp);
    let lower = Complex64::new(0.0, -sh) * Complex64::new(cp, sp);
    Unitary2([[diag, upper], [lower, diag]])
}
