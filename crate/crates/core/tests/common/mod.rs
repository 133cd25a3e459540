#![allow(dead_code)]

use qsl_core::Vec3;

/// Classical RK4 for `ẋ = n × x`, independent of the closed-form propagators.
pub fn rk4_rotate(n: Vec3, x0: Vec3, tau: f64, steps: usize) -> Vec3 {
    let h = tau / steps as f64;
    let f = |x: Vec3| n.cross(x);
    let mut x = x0;
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + k1.scale(0.5 * h));
        let k3 = f(x + k2.scale(0.5 * h));
        let k4 = f(x + k3.scale(h));
        x = x + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
    }
    x
}

/// RK4 samples `x(t_j)`, `j = 0..=steps`.
pub fn rk4_path(n: Vec3, x0: Vec3, tau: f64, steps: usize) -> Vec<Vec3> {
    let h = tau / steps as f64;
    let f = |x: Vec3| n.cross(x);
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0;
    out.push(x);
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(x + k1.scale(0.5 * h));
        let k3 = f(x + k2.scale(0.5 * h));
        let k4 = f(x + k3.scale(h));
        x = x + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
        out.push(x);
    }
    out
}

/// Composite Simpson rule on equally spaced samples (even number of panels).
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let m = samples.len() - 1;
    assert!(m % 2 == 0);
    let mut s = samples[0] + samples[m];
    for (k, v) in samples.iter().enumerate().take(m).skip(1) {
        s += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

pub fn unit(v: Vec3) -> Vec3 {
    v.scale(1.0 / v.norm())
}

pub fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}
