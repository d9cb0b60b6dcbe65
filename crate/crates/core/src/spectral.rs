//! Collocation primitives: Gauss–Legendre nodes, barycentric differentiation
//! matrices and Fourier differentiation along the periodic axis.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Array1<f64>, Array1<f64>) {
    let mut nodes = Array1::zeros(n);
    let mut weights = Array1::zeros(n);
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is descending in i; mirror into ascending slots
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Barycentric weights for Gauss–Legendre nodes (ascending order).
pub fn gauss_legendre_barycentric(nodes: &Array1<f64>, weights: &Array1<f64>) -> Array1<f64> {
    let n = nodes.len();
    Array1::from_iter((0..n).map(|j| {
        let sign = if (n - 1 - j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * ((1.0 - nodes[j] * nodes[j]) * weights[j]).sqrt()
    }))
}

/// Collocation differentiation matrix for the polynomial interpolant through
/// `nodes` with barycentric weights `bary`.
pub fn differentiation_matrix(nodes: &Array1<f64>, bary: &Array1<f64>) -> Array2<f64> {
    let n = nodes.len();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                d[[i, j]] = v;
                diag -= v;
            }
        }
        d[[i, i]] = diag;
    }
    d
}

/// Spectral differentiation along axis 1 of a real array whose rows sample a
/// periodic function at `n` equispaced points over one period of length 2π.
#[derive(Clone)]
pub struct FourierAxis {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierAxis").field("n", &self.n).finish()
    }
}

impl FourierAxis {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Signed wavenumber of FFT slot `j`; `None` for the Nyquist slot.
    pub fn wavenumber(&self, j: usize) -> Option<i64> {
        let n = self.n;
        if n % 2 == 0 && j == n / 2 {
            None
        } else if j <= n / 2 {
            Some(j as i64)
        } else {
            Some(j as i64 - n as i64)
        }
    }

    /// Unnormalized forward transform of every row.
    pub fn forward(&self, a: &Array2<f64>) -> Array2<Complex64> {
        let mut buf: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        Array2::from_shape_vec(a.raw_dim(), buf).expect("shape preserved")
    }

    /// Inverse of [`FourierAxis::forward`] keeping the real part.
    pub fn inverse_real(&self, spec: Array2<Complex64>) -> Array2<f64> {
        let dim = spec.raw_dim();
        let mut buf = spec.into_raw_vec_and_offset().0;
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        Array2::from_shape_vec(dim, buf.into_iter().map(|c| c.re * scale).collect())
            .expect("shape preserved")
    }

    pub fn differentiate(&self, a: &Array2<f64>) -> Array2<f64> {
        let mut spec = self.forward(a);
        for mut row in spec.axis_iter_mut(Axis(0)) {
            for (j, c) in row.iter_mut().enumerate() {
                *c = match self.wavenumber(j) {
                    Some(k) => *c * Complex64::new(0.0, k as f64),
                    None => Complex64::new(0.0, 0.0),
                };
            }
        }
        self.inverse_real(spec)
    }
}
