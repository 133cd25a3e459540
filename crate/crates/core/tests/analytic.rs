mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use qsl_core::analytic::*;
use qsl_core::pmp::{Family, RootChoice};
use qsl_core::shooting::{default_seeds, multistart, Mode, ShootingProblem};
use qsl_core::{Complex64, Vec3};

use common::rk4_rotate;

/// RK4 for `ẋ = n(t) × x` with a time-dependent generator.
fn rk4_driven(n: impl Fn(f64) -> Vec3, x0: Vec3, t_f: f64, steps: usize) -> Vec3 {
    let h = t_f / steps as f64;
    let f = |t: f64, x: Vec3| n(t).cross(x);
    let mut x = x0;
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = f(t, x);
        let k2 = f(t + 0.5 * h, x + k1.scale(0.5 * h));
        let k3 = f(t + 0.5 * h, x + k2.scale(0.5 * h));
        let k4 = f(t + h, x + k3.scale(h));
        x = x + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
    }
    x
}

fn polar(x: Vec3) -> (f64, f64) {
    (x.z.clamp(-1.0, 1.0).acos(), x.y.atan2(x.x))
}

#[test]
fn two_control_reaches_target() {
    for branch in [Branch::South, Branch::North] {
        let sol = two_control_continuous(branch);
        assert!(sol.final_state().unwrap().distance(Vec3::Y) < 1e-12);
        let law = sol.control.clone();
        let oracle = rk4_driven(
            |t| {
                let (s, c) = law.value(t).sin_cos();
                Vec3::new(c, s, 0.0)
            },
            Vec3::X,
            sol.t_f,
            20_000,
        );
        assert!(oracle.distance(Vec3::Y) < 1e-10);
        assert!(sol.state(1.3).unwrap().distance(oracle_at(&sol, 1.3)) < 1e-10);
    }
}

fn oracle_at(sol: &ContinuousSolution, t: f64) -> Vec3 {
    let law = sol.control.clone();
    rk4_driven(
        |s| {
            let (a, b) = law.value(s).sin_cos();
            Vec3::new(b, a, 0.0)
        },
        sol.initial,
        t,
        20_000,
    )
}

#[test]
fn two_control_polar_angle_law() {
    let sol = two_control_continuous(Branch::South);
    let (t0, _) = polar(sol.state(0.0).unwrap());
    let (t1, _) = polar(sol.final_state().unwrap());
    assert!((t0 - FRAC_PI_2).abs() < 1e-12 && (t1 - FRAC_PI_2).abs() < 1e-8);
    let tm = two_control_extremum_time();
    for k in 0..=50 {
        let t = tm * k as f64 / 50.0;
        let (theta, _) = polar(sol.state(t).unwrap());
        assert!((theta - two_control_polar_angle(t)).abs() < 1e-10, "t = {t}");
    }
    let theta_m = two_control_polar_angle(tm);
    assert!((theta_m.tan().abs() - P_PHI).abs() < 1e-12);
    assert!((theta_m - 5.0 * PI / 6.0).abs() < 1e-12);
}

#[test]
fn two_control_spherical_hamiltonian() {
    let sol = two_control_continuous(Branch::South);
    for s in [-0.8, 0.0, 1.7] {
        let costate = ContinuousSolution { initial: sol.adjoint.member(s), ..sol.clone() };
        for k in 0..100 {
            let t = sol.t_f * (k as f64 + 0.5) / 100.0;
            let x = sol.state(t).unwrap();
            let p = costate.state(t).unwrap();
            let (th, ph) = polar(x);
            let d_th = Vec3::new(th.cos() * ph.cos(), th.cos() * ph.sin(), -th.sin());
            let d_ph = Vec3::new(-th.sin() * ph.sin(), th.sin() * ph.cos(), 0.0);
            let (p_th, p_ph) = (p.dot(d_th), p.dot(d_ph));
            assert!((p_ph - P_PHI).abs() < 1e-10);
            let h = (p_th * p_th + p_ph * p_ph / th.tan().powi(2)).sqrt();
            assert!((h - 1.0).abs() < 1e-10, "t = {t}: {h}");
            let l = x.cross(p);
            assert!((l.x.hypot(l.y) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn one_control_switch_times() {
    let d = 0.5;
    let sol = one_control_continuous(d).unwrap();
    let big = (1.0 + d * d).sqrt();
    assert!((sol.t_f - 2.0 * PI / big).abs() < 1e-15);
    assert!((sol.t1 + sol.t2 - sol.t_f).abs() < 1e-14);
    assert!((sol.t1 - (PI - (d * d).acos()) / big).abs() < 1e-15);
    let family = Family::OneControl { detuning: d, bound: 1.0 };
    for switch in [sol.t1, sol.t2] {
        let reached = [-1.0, 1.0].iter().any(|&first| {
            let s = sol.solution(switch, first);
            let a = rk4_rotate(family.angular_velocity(first), Vec3::Z, switch, 5000);
            let b = rk4_rotate(family.angular_velocity(-first), a, sol.t_f - switch, 5000);
            s.final_state().unwrap().distance(-Vec3::Z) < 1e-12 && b.distance(-Vec3::Z) < 1e-10
        });
        assert!(reached, "switch {switch}");
    }
}

#[test]
fn one_control_domain() {
    assert_eq!(one_control_continuous(1.5), Err(AnalyticError::DomainError));
    assert_eq!(one_control_continuous(f64::NAN), Err(AnalyticError::DomainError));
    assert!(one_control_continuous(-1.0).is_ok());
}

#[test]
fn lz_schedule_connects_boundary_states() {
    for (w, bound) in [(0.5, 2.0), (1.0, 3.0), (0.3, 1.0)] {
        let r = lz_continuous_reference(w, bound).unwrap();
        let (x0, xf) = lz_boundary_states(w);
        assert!(x0.z > 0.0 && xf.z < 0.0);
        assert!((x0.norm() - 1.0).abs() < 1e-15);
        let ControlLaw::Schedule(segments) = &r.solution.control else { panic!() };
        let mut x = x0;
        for &(u, d) in segments {
            assert!(u.abs() <= bound && d >= 0.0);
            x = rk4_rotate(r.solution.family.angular_velocity(u), x, d, 5000);
        }
        assert!(x.distance(xf) < 1e-9, "ω = {w}: {}", x.distance(xf));
        assert!((r.tau1 + r.tau_singular + r.tau2 - r.t_f).abs() < 1e-14);
    }
}

#[test]
fn lz_domain() {
    assert_eq!(lz_continuous_reference(0.0, 1.0), Err(AnalyticError::DomainError));
    assert_eq!(lz_continuous_reference(0.5, -1.0), Err(AnalyticError::DomainError));
}

#[test]
fn linear_continuous_boundary_and_ode() {
    for w in [0.1, 0.5, 1.0, 2.0] {
        let c = linear_continuous(w).unwrap();
        let lhs = Complex64::from_polar(1.0, -w * c.t_f);
        let rhs = -Complex64::from_polar(c.t_f, c.theta);
        assert!((lhs - rhs).norm() < 1e-14);
        // RK4 on Ż = iωZ − i e^{iφ(t)}.
        let f = |t: f64, z: Complex64| Complex64::i() * w * z - Complex64::i() * Complex64::from_polar(1.0, c.phase(t));
        let steps = 4000;
        let h = c.t_f / steps as f64;
        let mut z = Complex64::new(0.0, 0.0);
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = f(t, z);
            let k2 = f(t + 0.5 * h, z + k1 * (0.5 * h));
            let k3 = f(t + 0.5 * h, z + k2 * (0.5 * h));
            let k4 = f(t + h, z + k3 * h);
            z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        assert!((z - 1.0).norm() < 1e-12);
        assert!((c.z(c.t_f) - 1.0).norm() < 1e-14);
    }
    assert_eq!(linear_continuous(0.0), Err(AnalyticError::DomainError));
}

#[test]
fn linear_discrete_is_exact() {
    let ns = [1usize, 2, 3, 5, 10, 31, 100, 316, 1000, 3162, 10_000];
    for w in [0.1, 0.5, 1.0] {
        for &n in &ns {
            let d = linear_discrete(w, n).unwrap();
            assert!((d.final_z - 1.0).norm() < 1e-9, "ω = {w}, N = {n}");
            // Independent re-propagation with a fine RK4 on one interval.
            if n <= 10 {
                let mut z = Complex64::new(0.0, 0.0);
                for &phi in &d.phases {
                    let f = |z: Complex64| Complex64::i() * w * z - Complex64::i() * Complex64::from_polar(1.0, phi);
                    let h = d.period / 1000.0;
                    for _ in 0..1000 {
                        let k1 = f(z);
                        let k2 = f(z + k1 * (0.5 * h));
                        let k3 = f(z + k2 * (0.5 * h));
                        let k4 = f(z + k3 * h);
                        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                    }
                }
                assert!((z - 1.0).norm() < 1e-10);
            }
        }
    }
    assert_eq!(linear_discrete(1.0, 0), Err(AnalyticError::DomainError));
    assert_eq!(linear_discrete(10.0, 1), Err(AnalyticError::DomainError));
}

#[test]
fn linear_gap_scaling() {
    let w = 0.5;
    let gap = |n: usize| linear_discrete(w, n).unwrap().t_f - 1.0;
    let (a, b) = (50usize, 400usize);
    let slope = (gap(b).ln() - gap(a).ln()) / ((b as f64).ln() - (a as f64).ln());
    assert!((slope + 2.0).abs() < 0.01, "{slope}");
    let ratio = gap(100) * 100.0_f64.powi(2);
    assert!((ratio / (w * w / 24.0) - 1.0).abs() < 1e-4);
    let d4 = linear_discrete(w, 4).unwrap();
    assert!((d4.t_f - 1.000_652_188_7).abs() < 1e-9);
}

#[test]
fn converged_costate_lies_on_zero_set() {
    let p = ShootingProblem::two_control(Mode::LockedGrid { n: 3 });
    let r = multistart(&p, &default_seeds(&p, 20, 0.1, 42).unwrap()).unwrap();
    let c = Vec3::new(1.0, r.costate.y, r.costate.z);
    let rad = c.norm();
    let theta = (c.z / rad).acos();
    let phi = (c.y / c.x).atan();
    let d = sphere_map_distance(theta, phi, 3, r.period, RootChoice::Maximizing);
    assert!(d < 1e-6, "{d}");
}

#[test]
fn reference_curve_matches_costate() {
    for px in [0.1, 1.0, 5.0, 20.0] {
        for branch in [Branch::South, Branch::North] {
            let (th, ph) = adjoint_curve_point(px, branch);
            let p = adjoint_from_angles(adjoint_radius(px), th, ph);
            assert!(p.distance(Vec3::new(px, P_PHI, branch.pz())) < 1e-12);
            let member = two_control_continuous(branch).adjoint.member(px);
            assert!(p.distance(member) < 1e-12);
        }
    }
    let curve = adjoint_reference_curve(400, 20.0, Branch::South);
    assert_eq!(curve.len(), 400);
    assert!((curve[399].0 - 20.0).abs() < 1e-12);
    assert!(curve.windows(2).all(|w| w[1].2 < w[0].2));
}

#[test]
fn nmr_conversion() {
    let t = nmr_time(TWO_CONTROL_TIME, 100e3).unwrap();
    assert!((t - 4.330127).abs() < 1e-6);
    assert!((nmr_time(2.0 * PI, 1e6).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(nmr_time(1.0, 0.0), Err(AnalyticError::DomainError));
}
