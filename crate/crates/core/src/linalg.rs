//! Small dense linear algebra: minimum-norm least squares and a complex matrix exponential.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Minimum-norm least-squares solution of `A x = b` for a dense row-major `m × n` matrix.
///
/// Uses a one-sided Jacobi SVD; singular values below `rcond · σ_max` are discarded.
/// Needed because some shooting Jacobians carry an exactly null direction.
pub fn lstsq_min_norm(a: &[Vec<f64>], b: &[f64], rcond: f64) -> Vec<f64> {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    // Columns of U·Σ are built in place in `w`; V accumulates the rotations.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                let scale = (alpha * beta).sqrt();
                if scale > 0.0 {
                    off = off.max(gamma.abs() / scale);
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[p][i], w[q][i]);
                    w[p][i] = c * x - s * y;
                    w[q][i] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[p][i], v[q][i]);
                    v[p][i] = c * x - s * y;
                    v[q][i] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }

    let sigma: Vec<f64> = w.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let smax = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let mut x = vec![0.0; n];
    if smax == 0.0 {
        return x;
    }
    for j in 0..n {
        if sigma[j] <= rcond * smax {
            continue;
        }
        // u_j = w_j / σ_j, coefficient (u_jᵀ b)/σ_j
        let coef = w[j].iter().zip(b).map(|(u, bi)| u * bi).sum::<f64>() / (sigma[j] * sigma[j]);
        for i in 0..n {
            x[i] += coef * v[j][i];
        }
    }
    x
}

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matmul(&self, o: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * o.get(k, j);
                }
            }
        }
        out
    }

    fn scale(&self, s: f64) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().map(|z| z * s).collect() }
    }

    fn add(&self, o: &CMatrix) -> CMatrix {
        CMatrix { n: self.n, data: self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect() }
    }

    fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix exponential by scaling and squaring with a truncated Taylor series.
    pub fn expm(&self) -> CMatrix {
        let norm = self.norm1();
        let mut squarings = 0u32;
        if norm > 0.5 {
            squarings = (norm / 0.5).log2().ceil() as u32;
        }
        let a = self.scale(1.0 / (1u64 << squarings) as f64);
        let mut term = CMatrix::identity(self.n);
        let mut sum = CMatrix::identity(self.n);
        for k in 1..=20 {
            term = term.matmul(&a).scale(1.0 / k as f64);
            sum = sum.add(&term);
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = lstsq_min_norm(&a, &[3.0, 5.0], 1e-12);
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn null_column_gets_zero_component() {
        let a = vec![
            vec![0.0, 1.0, 2.0],
            vec![0.0, 3.0, -1.0],
            vec![0.0, 0.5, 0.5],
        ];
        let x = lstsq_min_norm(&a, &[3.0, 2.0, 1.0], 1e-12);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 1.0).abs() < 1e-13 && (x[2] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let theta = 2.5_f64;
        let mut a = CMatrix::zeros(2);
        a.set(0, 1, Complex64::new(-theta, 0.0));
        a.set(1, 0, Complex64::new(theta, 0.0));
        let e = a.expm();
        assert!((e.get(0, 0).re - theta.cos()).abs() < 1e-14);
        assert!((e.get(1, 0).re - theta.sin()).abs() < 1e-14);
    }
}
