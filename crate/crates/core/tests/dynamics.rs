mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use qsl_core::dynamics::{propagate, spinor_propagator, Generator, IntervalGenerator, QubitState};
use qsl_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{rk4_rotate, unit};

fn vec3() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn generator() -> impl Strategy<Value = Generator> {
    prop_oneof![
        (-10.0..10.0f64).prop_map(|phase| Generator::TwoControlResonant { phase }),
        (-2.0..2.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(d, w)| d.abs() + w.abs() > 1e-3)
            .prop_map(|(detuning, amplitude)| Generator::OneControlDetuned { detuning, amplitude }),
        (-2.0..2.0f64, 0.05..1.0f64).prop_map(|(detuning, coupling)| Generator::LandauZener { detuning, coupling }),
    ]
}

fn random_generator(rng: &mut ChaCha8Rng) -> Generator {
    match rng.gen_range(0..3) {
        0 => Generator::TwoControlResonant { phase: rng.gen_range(-10.0..10.0) },
        1 => Generator::OneControlDetuned { detuning: rng.gen_range(-2.0..2.0), amplitude: rng.gen_range(0.01..1.0) },
        _ => Generator::LandauZener { detuning: rng.gen_range(-2.0..2.0), coupling: rng.gen_range(0.05..1.0) },
    }
}

#[test]
fn norm_conservation_on_ten_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let g = random_generator(&mut rng);
        let tau = rng.gen_range(0.0..5.0);
        let x = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let p = Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let iv = IntervalGenerator::new(g, tau);
        let x1 = propagate(x, &iv).unwrap();
        let p1 = propagate(p, &iv).unwrap();
        assert!((x1.norm() - x.norm()).abs() < 1e-12);
        assert!((p1.norm() - p.norm()).abs() < 1e-12);
        assert!((p1.dot(x1) - p.dot(x)).abs() < 1e-12);
    }
}

#[test]
fn closed_form_matches_rk4() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let g = random_generator(&mut rng);
        let tau = rng.gen_range(0.01..3.0);
        let x = unit(Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let exact = propagate(x, &IntervalGenerator::new(g, tau)).unwrap();
        let oracle = rk4_rotate(g.angular_velocity(), x, tau, 4000);
        assert!(exact.distance(oracle) < 1e-11, "{g:?} {tau}");
    }
}

#[test]
fn resonant_rotation_examples() {
    // Quarter turn about x takes the north pole to −y.
    let r = Generator::TwoControlResonant { phase: 0.0 }.rotation(std::f64::consts::FRAC_PI_2).unwrap();
    let z = r * Vec3::Z;
    assert_abs_diff_eq!(z.y, -1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(z.z, 0.0, epsilon = 1e-15);
    let id = Generator::OneControlDetuned { detuning: 0.3, amplitude: 0.4 }.rotation(0.0).unwrap();
    assert!(id.max_abs_diff(&qsl_core::Mat3::IDENTITY) < 1e-15);
}

#[test]
fn zero_generator_rejected() {
    assert!(Generator::OneControlDetuned { detuning: 0.0, amplitude: 0.0 }.rotation(1.0).is_err());
}

proptest! {
    #[test]
    fn rotations_are_proper_orthogonal(g in generator(), tau in 0.0..6.0f64) {
        let r = g.rotation(tau).unwrap();
        prop_assert!(r.orthogonality_defect() < 1e-13);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn composition_adds_durations(g in generator(), a in 0.0..3.0f64, b in 0.0..3.0f64, x in vec3()) {
        let two = g.rotation(b).unwrap() * (g.rotation(a).unwrap() * x);
        let one = g.rotation(a + b).unwrap() * x;
        prop_assert!(two.distance(one) < 1e-12);
    }

    #[test]
    fn backward_rotation_inverts(g in generator(), tau in 0.0..4.0f64, x in vec3()) {
        let back = g.rotation(-tau).unwrap() * (g.rotation(tau).unwrap() * x);
        prop_assert!(back.distance(x) < 1e-12);
    }

    #[test]
    fn spinor_conjugation_matches_bloch_rotation(phase in -7.0..7.0f64, tau in 0.0..7.0f64, v in vec3()) {
        let u = spinor_propagator(phase, tau);
        prop_assert!(u.unitarity_defect() < 1e-14);
        let r = Generator::TwoControlResonant { phase }.rotation(tau).unwrap();
        prop_assert!(u.bloch_rotation().max_abs_diff(&r) < 1e-12);
        // Pure-state route: the Bloch vector of U|ψ⟩ is R applied to that of |ψ⟩.
        let psi = QubitState::from_bloch(v).unwrap();
        let moved = u.apply(&psi).bloch_vector();
        prop_assert!(moved.distance(r * unit(v)) < 1e-12);
    }

    #[test]
    fn bloch_round_trip(v in vec3()) {
        let s = QubitState::from_bloch(v).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
        prop_assert!(s.bloch_vector().distance(unit(v)) < 1e-14);
        prop_assert_eq!(s.a.im, 0.0);
    }
}
