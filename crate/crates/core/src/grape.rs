//! Fixed-time fidelity maximization with piecewise-constant phases.
//!
//! Hamiltonian `H(φ) = cos φ σ_x/2 + sin φ σ_y/2`, propagator of interval `k`
//! `U_k = exp(−i T H(φ_k))`, fidelity `J = |⟨ψ_f|U_{N−1}⋯U_0|ψ_0⟩|²`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{integrated_unit_rotation, pauli_transition, rotation_two_control, spinor_propagator, QubitState, Unitary2};
use crate::geometry::Vec3;
use crate::linalg::CMatrix;
use crate::quadrature::GaussLegendre;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradientMethod {
    SplitOperator,
    AuxiliaryMatrix,
    PmpExact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrapeProblem {
    pub initial: QubitState,
    pub target: QubitState,
    pub n: usize,
    pub t_f: f64,
    pub method: GradientMethod,
}

impl GrapeProblem {
    /// `(|1⟩ + |2⟩)/√2 → (|1⟩ + i|2⟩)/√2`, the spinor form of `(1,0,0) → (0,1,0)`.
    pub fn equator_transfer(n: usize, t_f: f64, method: GradientMethod) -> Self {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        Self {
            initial: QubitState::new(Complex64::new(h, 0.0), Complex64::new(h, 0.0)),
            target: QubitState::new(Complex64::new(h, 0.0), Complex64::new(0.0, h)),
            n,
            t_f,
            method,
        }
    }

    pub fn period(&self) -> f64 {
        self.t_f / self.n as f64
    }
}

/// Forward states `ψ_k` and backward states `χ_k`, `k = 0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub j: f64,
    /// `⟨ψ_f|ψ_N⟩`.
    pub overlap: Complex64,
    pub forward: Vec<QubitState>,
    pub backward: Vec<QubitState>,
}

impl Sweep {
    /// `|⟨χ_k|ψ_k⟩|²`, equal to `J` for every `k`.
    pub fn fidelity_at(&self, k: usize) -> f64 {
        self.backward[k].inner(&self.forward[k]).norm_sqr()
    }
}

pub fn fidelity(problem: &GrapeProblem, phases: &[f64]) -> Sweep {
    let t = problem.period();
    let props: Vec<Unitary2> = phases.iter().map(|&p| spinor_propagator(p, t)).collect();
    let mut forward = Vec::with_capacity(phases.len() + 1);
    forward.push(problem.initial);
    for u in &props {
        let next = u.apply(forward.last().unwrap());
        forward.push(next);
    }
    let mut backward = vec![problem.target; phases.len() + 1];
    for k in (0..props.len()).rev() {
        backward[k] = props[k].adjoint().apply(&backward[k + 1]);
    }
    let last = forward.last().unwrap();
    let overlap = problem.target.inner(last);
    Sweep { j: 1.0 - complement(&problem.target, last), overlap, forward, backward }
}

/// `1 − |⟨u|v⟩|²` for unit spinors, as `|u_a v_b − u_b v_a|²`.
///
/// In two dimensions this is exact (Lagrange's identity) and keeps full relative precision as `J → 1`.
fn complement(u: &QubitState, v: &QubitState) -> f64 {
    (u.a * v.b - u.b * v.a).norm_sqr()
}

fn final_state(problem: &GrapeProblem, phases: &[f64]) -> QubitState {
    let t = problem.period();
    let mut psi = problem.initial;
    for &p in phases {
        psi = spinor_propagator(p, t).apply(&psi);
    }
    psi
}

/// `J` alone, forward pass only.
pub fn fidelity_value(problem: &GrapeProblem, phases: &[f64]) -> f64 {
    1.0 - infidelity_value(problem, phases)
}

/// `d = 1 − J`, accurate to round-off relative to `d` itself.
pub fn infidelity_value(problem: &GrapeProblem, phases: &[f64]) -> f64 {
    complement(&problem.target, &final_state(problem, phases))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientReport {
    pub method: GradientMethod,
    pub j: f64,
    pub values: Vec<f64>,
}

impl GradientReport {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `I_a^(k) = 2∫ Im[⟨ψ_N|ψ_f⟩⟨χ_k(t)|H_a|ψ_k(t)⟩] dt` for `a = x, y`, both intervals' worth.
///
/// With `s_b = ⟨χ_k|σ_b|ψ_k⟩` the integrand is `(R(t) s)_a`, so the time integral is
/// `(∫R dt) s` with `R` the Bloch rotation of the interval.
pub fn pmp_integrals(problem: &GrapeProblem, phases: &[f64], sweep: &Sweep) -> Vec<(f64, f64)> {
    let t = problem.period();
    let conj = sweep.overlap.conj();
    phases
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let s = pauli_transition(&sweep.backward[k], &sweep.forward[k]);
            let (sp, cp) = phi.sin_cos();
            let m = integrated_unit_rotation(Vec3::new(cp, sp, 0.0), t);
            let row = |a: usize| m.0[a][0] * s[0] + m.0[a][1] * s[1] + m.0[a][2] * s[2];
            ((conj * row(0)).im, (conj * row(1)).im)
        })
        .collect()
}

/// Same integrals by 32-point Gauss-Legendre quadrature of `R(t) s`.
pub fn pmp_integrals_quadrature(problem: &GrapeProblem, phases: &[f64], sweep: &Sweep) -> Vec<(f64, f64)> {
    let t = problem.period();
    let rule = GaussLegendre::new(32);
    let conj = sweep.overlap.conj();
    phases
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let s = pauli_transition(&sweep.backward[k], &sweep.forward[k]);
            let mut acc = [Complex64::new(0.0, 0.0); 2];
            for (tau, w) in rule.points(0.0, t) {
                let r = rotation_two_control(phi, tau);
                for (a, slot) in acc.iter_mut().enumerate() {
                    *slot += (r.0[a][0] * s[0] + r.0[a][1] * s[1] + r.0[a][2] * s[2]) * w;
                }
            }
            ((conj * acc[0]).im, (conj * acc[1]).im)
        })
        .collect()
}

/// `∂J/∂φ_k = −sin φ_k I_x^(k) + cos φ_k I_y^(k)`.
pub fn gradient_pmp(problem: &GrapeProblem, phases: &[f64]) -> GradientReport {
    let sweep = fidelity(problem, phases);
    let values = pmp_integrals(problem, phases, &sweep)
        .into_iter()
        .zip(phases)
        .map(|((ix, iy), &phi)| -phi.sin() * ix + phi.cos() * iy)
        .collect();
    GradientReport { method: GradientMethod::PmpExact, j: sweep.j, values }
}

fn h_matrix(phi: f64) -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    let off = Complex64::from_polar(0.5, -phi);
    [[z, off], [off.conj(), z]]
}

fn dh_matrix(phi: f64) -> [[Complex64; 2]; 2] {
    // ∂/∂φ of ½(cos φ σ_x + sin φ σ_y)
    let z = Complex64::new(0.0, 0.0);
    let off = Complex64::new(0.0, -0.5) * Complex64::from_polar(1.0, -phi);
    [[z, off], [off.conj(), z]]
}

/// Upper-right block of `exp [[A, B], [0, A]]` with `A = −iT H`, `B = −iT ∂H`, i.e. `∂U/∂φ`.
pub fn auxiliary_derivative(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut m = CMatrix::zeros(4);
    for i in 0..2 {
        for j in 0..2 {
            m.set(i, j, a[i][j]);
            m.set(i + 2, j + 2, a[i][j]);
            m.set(i, j + 2, b[i][j]);
        }
    }
    let e = m.expm();
    [[e.get(0, 2), e.get(0, 3)], [e.get(1, 2), e.get(1, 3)]]
}

fn sandwich(l: &QubitState, m: &[[Complex64; 2]; 2], r: &QubitState) -> Complex64 {
    let a = m[0][0] * r.a + m[0][1] * r.b;
    let b = m[1][0] * r.a + m[1][1] * r.b;
    l.a.conj() * a + l.b.conj() * b
}

fn scaled(m: [[Complex64; 2]; 2], s: Complex64) -> [[Complex64; 2]; 2] {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

pub fn gradient_aux(problem: &GrapeProblem, phases: &[f64]) -> GradientReport {
    let sweep = fidelity(problem, phases);
    let t = problem.period();
    let mit = Complex64::new(0.0, -t);
    let values = phases
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let du = auxiliary_derivative(scaled(h_matrix(phi), mit), scaled(dh_matrix(phi), mit));
            let da = sandwich(&sweep.backward[k + 1], &du, &sweep.forward[k]);
            2.0 * (sweep.overlap.conj() * da).re
        })
        .collect();
    GradientReport { method: GradientMethod::AuxiliaryMatrix, j: sweep.j, values }
}

/// First-order approximation `∂U_k/∂φ_k ≈ −iT (∂H/∂φ_k) U_k`.
pub fn gradient_split(problem: &GrapeProblem, phases: &[f64]) -> GradientReport {
    let sweep = fidelity(problem, phases);
    let t = problem.period();
    let values = phases
        .iter()
        .enumerate()
        .map(|(k, &phi)| {
            let dh = dh_matrix(phi);
            let m = sandwich(&sweep.backward[k + 1], &dh, &sweep.forward[k + 1]);
            2.0 * t * (sweep.overlap.conj() * m).im
        })
        .collect();
    GradientReport { method: GradientMethod::SplitOperator, j: sweep.j, values }
}

pub fn gradient(problem: &GrapeProblem, phases: &[f64]) -> GradientReport {
    match problem.method {
        GradientMethod::SplitOperator => gradient_split(problem, phases),
        GradientMethod::AuxiliaryMatrix => gradient_aux(problem, phases),
        GradientMethod::PmpExact => gradient_pmp(problem, phases),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizeOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    pub max_shrinks: usize,
    /// Keep the phase vector of every iterate in the trace.
    pub record_phases: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            gradient_tolerance: 1e-10,
            initial_step: 1.0,
            shrink: 0.5,
            armijo: 1e-4,
            max_shrinks: 60,
            record_phases: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub j: f64,
    pub gradient_norm: f64,
    pub phases: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The line search found no Armijo step.
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeResult {
    pub phases: Vec<f64>,
    pub j: f64,
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
}

/// Gradient ascent with Armijo backtracking.
pub fn optimize(problem: &GrapeProblem, init: &[f64], opts: &OptimizeOptions) -> OptimizeResult {
    let mut phases = init.to_vec();
    let mut report = gradient(problem, &phases);
    let mut d = infidelity_value(problem, &phases);
    let mut trace = Vec::new();
    let mut iteration = 0;
    let termination = loop {
        let gnorm = report.norm();
        trace.push(TraceEntry {
            iteration,
            j: report.j,
            gradient_norm: gnorm,
            phases: opts.record_phases.then(|| phases.clone()),
        });
        if gnorm < opts.gradient_tolerance {
            break Termination::Converged;
        }
        if iteration >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        let mut step = opts.initial_step;
        let mut accepted = None;
        for _ in 0..opts.max_shrinks {
            let trial: Vec<f64> = phases.iter().zip(&report.values).map(|(p, g)| p + step * g).collect();
            // Armijo on J, written for d so that the test stays resolvable near J = 1.
            let trial_d = infidelity_value(problem, &trial);
            if trial_d < d && trial_d <= d - opts.armijo * step * gnorm * gnorm {
                accepted = Some((trial, trial_d));
                break;
            }
            step *= opts.shrink;
        }
        match accepted {
            Some((trial, trial_d)) => {
                phases = trial;
                d = trial_d;
                report = gradient(problem, &phases);
                iteration += 1;
            }
            None => break Termination::Stalled,
        }
    };
    OptimizeResult { j: report.j, phases, trace, termination }
}

/// Uniform random phase vectors in `[−π, π)` from a ChaCha8 stream.
pub fn random_phases(n: usize, count: usize, stream: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    (0..count).map(|_| (0..n).map(|_| rng.gen_range(-PI..PI)).collect()).collect()
}

/// Best `1 − J` over multistart runs at one final time.
pub fn best_infidelity(problem: &GrapeProblem, starts: &[Vec<f64>], opts: &OptimizeOptions) -> (f64, Vec<f64>) {
    let mut best = (f64::INFINITY, Vec::new());
    for init in starts {
        let r = optimize(problem, init, opts);
        let d = 1.0 - r.j;
        if d < best.0 {
            best = (d, r.phases);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub t_f: f64,
    pub d: f64,
}

/// `(t_f, best d)` over a grid of final times, plus the smallest time with `d ≤ threshold`.
pub fn time_scan(template: &GrapeProblem, times: &[f64], starts: &[Vec<f64>], opts: &OptimizeOptions, threshold: f64) -> (Vec<ScanRow>, Option<f64>) {
    let rows: Vec<ScanRow> = times
        .iter()
        .map(|&t_f| {
            let p = GrapeProblem { t_f, ..*template };
            ScanRow { t_f, d: best_infidelity(&p, starts, opts).0 }
        })
        .collect();
    let estimate = scan_estimate(&rows, threshold);
    (rows, estimate)
}

pub fn scan_estimate(rows: &[ScanRow], threshold: f64) -> Option<f64> {
    rows.iter().filter(|r| r.d <= threshold).map(|r| r.t_f).fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))))
}
