//! A seeded family of smooth nonlinear models with hand-written
//! derivatives, for exercising the generic code beyond the linear examples.
//!
//! `u_i = W_ij q_j + g_i sin q_i`, `V = ½ qᵀSq + Σ c_i cos q_i`,
//! `α_i = A_ik q̄_k + s_ikl q̄_k q̄_l + d_ik sin q̄_k`,
//! `β_ik = B_ik + G_ikl sin q̄_l + F_iklm q̄_l q̄_m`.
//! The constant part `B` dominates so that `β` keeps full rank near the origin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{Lagrangian, ModelSpec, Transform};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Tensor3, Tensor4};

#[derive(Clone, Debug)]
pub struct RandomLagrangian {
    m: f64,
    w: Vec<Vec<f64>>,
    g: Vec<f64>,
    s: Vec<Vec<f64>>,
    c: Vec<f64>,
}

impl Lagrangian for RandomLagrangian {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn mass(&self) -> f64 {
        self.m
    }

    fn u<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).fold(q[i].sin().scale(self.g[i]), |acc, j| acc + q[j].scale(self.w[i][j])))
            .collect()
    }

    fn du<T: Scalar>(&self, q: &[T]) -> Matrix<T> {
        let n = self.dim();
        Matrix::from_fn(n, n, |i, j| {
            let base = T::cst(self.w[i][j]);
            if i == j {
                base + q[i].cos().scale(self.g[i])
            } else {
                base
            }
        })
    }

    fn potential<T: Scalar>(&self, q: &[T]) -> T {
        let n = self.dim();
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc += (q[i] * q[j]).scale(0.5 * self.s[i][j]);
            }
            acc += q[i].cos().scale(self.c[i]);
        }
        acc
    }

    fn grad_potential<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).fold(-q[i].sin().scale(self.c[i]), |acc, j| acc + q[j].scale(self.s[i][j])))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RandomTransform {
    i: usize,
    k: usize,
    a: Vec<f64>,
    s: Vec<f64>,
    d: Vec<f64>,
    b: Vec<f64>,
    g: Vec<f64>,
    f: Vec<f64>,
}

impl RandomTransform {
    fn a(&self, i: usize, k: usize) -> f64 {
        self.a[i * self.k + k]
    }
    fn d(&self, i: usize, k: usize) -> f64 {
        self.d[i * self.k + k]
    }
    fn b(&self, i: usize, k: usize) -> f64 {
        self.b[i * self.k + k]
    }
    fn s(&self, i: usize, k: usize, l: usize) -> f64 {
        self.s[(i * self.k + k) * self.k + l]
    }
    fn g(&self, i: usize, k: usize, l: usize) -> f64 {
        self.g[(i * self.k + k) * self.k + l]
    }
    fn f(&self, i: usize, k: usize, l: usize, m: usize) -> f64 {
        self.f[((i * self.k + k) * self.k + l) * self.k + m]
    }
}

impl Transform for RandomTransform {
    fn output_dim(&self) -> usize {
        self.i
    }

    fn input_dim(&self) -> usize {
        self.k
    }

    fn alpha<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        (0..self.i)
            .map(|i| {
                let mut acc = T::zero();
                for k in 0..self.k {
                    acc += x[k].scale(self.a(i, k)) + x[k].sin().scale(self.d(i, k));
                    for l in 0..self.k {
                        acc += (x[k] * x[l]).scale(self.s(i, k, l));
                    }
                }
                acc
            })
            .collect()
    }

    fn beta<T: Scalar>(&self, x: &[T]) -> Matrix<T> {
        Matrix::from_fn(self.i, self.k, |i, k| {
            let mut acc = T::cst(self.b(i, k));
            for l in 0..self.k {
                acc += x[l].sin().scale(self.g(i, k, l));
                for m in 0..self.k {
                    acc += (x[l] * x[m]).scale(self.f(i, k, l, m));
                }
            }
            acc
        })
    }

    fn dalpha<T: Scalar>(&self, x: &[T]) -> Matrix<T> {
        Matrix::from_fn(self.i, self.k, |i, k| {
            let mut acc = T::cst(self.a(i, k)) + x[k].cos().scale(self.d(i, k));
            for l in 0..self.k {
                acc += x[l].scale(self.s(i, k, l) + self.s(i, l, k));
            }
            acc
        })
    }

    fn dbeta<T: Scalar>(&self, x: &[T]) -> Tensor3<T> {
        Tensor3::from_fn(self.i, self.k, self.k, |i, k, l| {
            let mut acc = x[l].cos().scale(self.g(i, k, l));
            for m in 0..self.k {
                acc += x[m].scale(self.f(i, k, l, m) + self.f(i, k, m, l));
            }
            acc
        })
    }

    fn ddalpha<T: Scalar>(&self, x: &[T]) -> Tensor3<T> {
        Tensor3::from_fn(self.i, self.k, self.k, |i, k, l| {
            let c = T::cst(self.s(i, k, l) + self.s(i, l, k));
            if k == l {
                c - x[k].sin().scale(self.d(i, k))
            } else {
                c
            }
        })
    }

    fn ddbeta<T: Scalar>(&self, x: &[T]) -> Tensor4<T> {
        Tensor4::from_fn(self.i, self.k, self.k, self.k, |i, k, l, m| {
            let c = T::cst(self.f(i, k, l, m) + self.f(i, k, m, l));
            if l == m {
                c - x[l].sin().scale(self.g(i, k, l))
            } else {
                c
            }
        })
    }
}

pub type RandomModel = ModelSpec<RandomLagrangian, RandomTransform>;

/// Builds a model with `I` lifted and `K ≤ I` basic variables from `seed`.
/// Nonlinear coefficients are scaled by `nonlinearity` (0.2 is a good default).
pub fn random_model(i: usize, k: usize, seed: u64, nonlinearity: f64) -> Result<RandomModel> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |scale: f64| r.gen_range(-scale..scale);
    let nl = nonlinearity;
    let m = 0.8 + u(0.2).abs();
    let w: Vec<Vec<f64>> = (0..i).map(|_| (0..i).map(|_| u(0.5)).collect()).collect();
    let g: Vec<f64> = (0..i).map(|_| u(nl)).collect();
    let raw: Vec<Vec<f64>> = (0..i).map(|_| (0..i).map(|_| u(0.5)).collect()).collect();
    let s: Vec<Vec<f64>> = (0..i)
        .map(|a| (0..i).map(|b| 0.5 * (raw[a][b] + raw[b][a]) + if a == b { 1.0 } else { 0.0 }).collect())
        .collect();
    let c: Vec<f64> = (0..i).map(|_| u(nl)).collect();
    let lag = RandomLagrangian { m, w, g, s, c };

    let n2 = i * k;
    let n3 = n2 * k;
    let a = (0..n2).map(|_| u(1.0)).collect();
    let s = (0..n3).map(|_| u(nl)).collect();
    let d = (0..n2).map(|_| u(nl)).collect();
    // identity-like block plus noise keeps β well conditioned
    let b = (0..n2).map(|idx| if idx / k == idx % k { 1.0 } else { 0.0 } + u(0.3)).collect();
    let gg = (0..n3).map(|_| u(nl)).collect();
    let f = (0..n3 * k).map(|_| u(nl)).collect();
    let tr = RandomTransform { i, k, a, s, d, b, g: gg, f };
    ModelSpec::new(format!("random-{i}x{k}-{seed}"), lag, tr)
}
