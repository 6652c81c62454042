//! Scalar types used by every model callback.
//!
//! All kinematic and dynamic formulas are written once, generic over
//! [`Scalar`]. Plain `f64` is the everyday instantiation. [`Dual`] carries a
//! first derivative along one direction (forward-mode AD) and [`Taylor`]
//! carries a truncated power series in time, which is how the library obtains
//! exact higher time derivatives along the canonical flow without finite
//! differencing.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Number-like type the model callbacks are evaluated with.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Embeds a constant.
    fn cst(x: f64) -> Self;
    /// The underlying real value (the constant term of any series/dual part).
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc *= self;
        }
        acc
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

/// Dual number `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

pub type Dual64 = Dual<f64>;

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Self { re, eps }
    }

    /// A variable seeded with unit tangent.
    pub fn var(re: T) -> Self {
        Self { re, eps: T::one() }
    }

    pub fn constant(re: T) -> Self {
        Self { re, eps: T::zero() }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let re = self.re / o.re;
        Self::new(re, (self.eps - re * o.eps) / o.re)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> AddAssign for Dual<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> SubAssign for Dual<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar> MulAssign for Dual<T> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn cst(x: f64) -> Self {
        Self::constant(T::cst(x))
    }
    fn value(&self) -> f64 {
        self.re.value()
    }
    fn sin(self) -> Self {
        Self::new(self.re.sin(), self.eps * self.re.cos())
    }
    fn cos(self) -> Self {
        Self::new(self.re.cos(), -(self.eps * self.re.sin()))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Self::new(e, self.eps * e)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Self::new(s, self.eps / (s + s))
    }
}

/// Truncated power series `Σ_{j<N} c_j tʲ`.
///
/// Arithmetic keeps the first `N` coefficients exactly, so the coefficient
/// of `tʲ` of any composite expression is its `j`-th time derivative divided
/// by `j!`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taylor<T, const N: usize> {
    pub c: [T; N],
}

impl<T: Scalar, const N: usize> Taylor<T, N> {
    pub fn constant(x: T) -> Self {
        let mut c = [T::zero(); N];
        c[0] = x;
        Self { c }
    }

    pub fn from_coeffs(c: [T; N]) -> Self {
        Self { c }
    }

    /// Series of the time derivative (last coefficient becomes zero).
    pub fn derivative(&self) -> Self {
        let mut c = [T::zero(); N];
        for j in 1..N {
            c[j - 1] = self.c[j].scale(j as f64);
        }
        Self { c }
    }

    /// `j`-th time derivative at `t = 0`.
    pub fn derivative_at_zero(&self, j: usize) -> T {
        self.c[j].scale(factorial(j))
    }
}

pub(crate) fn factorial(j: usize) -> f64 {
    (1..=j).fold(1.0, |acc, i| acc * i as f64)
}

impl<T: Scalar, const N: usize> Add for Taylor<T, N> {
    type Output = Self;
    #[inline]
    fn add(mut self, o: Self) -> Self {
        for j in 0..N {
            self.c[j] += o.c[j];
        }
        self
    }
}

impl<T: Scalar, const N: usize> Sub for Taylor<T, N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, o: Self) -> Self {
        for j in 0..N {
            self.c[j] -= o.c[j];
        }
        self
    }
}

impl<T: Scalar, const N: usize> Mul for Taylor<T, N> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        let mut c = [T::zero(); N];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in o.c[..N - i].iter().enumerate() {
                c[i + j] += *a * *b;
            }
        }
        Self { c }
    }
}

impl<T: Scalar, const N: usize> Div for Taylor<T, N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let mut c = [T::zero(); N];
        let inv = T::one() / o.c[0];
        for k in 0..N {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= o.c[j] * c[k - j];
            }
            c[k] = acc * inv;
        }
        Self { c }
    }
}

impl<T: Scalar, const N: usize> Neg for Taylor<T, N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        for x in self.c.iter_mut() {
            *x = -*x;
        }
        self
    }
}

impl<T: Scalar, const N: usize> AddAssign for Taylor<T, N> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar, const N: usize> SubAssign for Taylor<T, N> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Scalar, const N: usize> MulAssign for Taylor<T, N> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<T: Scalar, const N: usize> Scalar for Taylor<T, N> {
    fn cst(x: f64) -> Self {
        Self::constant(T::cst(x))
    }

    fn value(&self) -> f64 {
        self.c[0].value()
    }

    fn sin(self) -> Self {
        sin_cos(self).0
    }

    fn cos(self) -> Self {
        sin_cos(self).1
    }

    fn exp(self) -> Self {
        // k e_k = Σ_{j=1..k} j a_j e_{k-j}
        let mut e = [T::zero(); N];
        e[0] = self.c[0].exp();
        for k in 1..N {
            let mut acc = T::zero();
            for j in 1..=k {
                acc += self.c[j].scale(j as f64) * e[k - j];
            }
            e[k] = acc.scale(1.0 / k as f64);
        }
        Self { c: e }
    }

    fn sqrt(self) -> Self {
        let mut s = [T::zero(); N];
        s[0] = self.c[0].sqrt();
        let inv2 = T::one() / (s[0] + s[0]);
        for k in 1..N {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= s[j] * s[k - j];
            }
            s[k] = acc * inv2;
        }
        Self { c: s }
    }
}

fn sin_cos<T: Scalar, const N: usize>(a: Taylor<T, N>) -> (Taylor<T, N>, Taylor<T, N>) {
    let mut s = [T::zero(); N];
    let mut c = [T::zero(); N];
    s[0] = a.c[0].sin();
    c[0] = a.c[0].cos();
    for k in 1..N {
        let mut ds = T::zero();
        let mut dc = T::zero();
        for j in 1..=k {
            let ja = a.c[j].scale(j as f64);
            ds += ja * c[k - j];
            dc -= ja * s[k - j];
        }
        s[k] = ds.scale(1.0 / k as f64);
        c[k] = dc.scale(1.0 / k as f64);
    }
    (Taylor { c: s }, Taylor { c })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_var(x0: f64) -> Taylor<f64, 6> {
        let mut c = [0.0; 6];
        c[0] = x0;
        c[1] = 1.0;
        Taylor::from_coeffs(c)
    }

    #[test]
    fn dual_product_rule() {
        let x = Dual64::var(3.0);
        let y = x * x * x;
        assert_eq!(y.re, 27.0);
        assert_eq!(y.eps, 27.0);
        let z = (x.sin() / x).exp();
        let fd = {
            let f = |x: f64| (x.sin() / x).exp();
            (f(3.0 + 1e-6) - f(3.0 - 1e-6)) / 2e-6
        };
        assert!((z.eps - fd).abs() < 1e-8);
    }

    #[test]
    fn taylor_sin_matches_derivatives() {
        let s = t_var(0.7).sin();
        let expect = [0.7f64.sin(), 0.7f64.cos(), -0.7f64.sin(), -0.7f64.cos(), 0.7f64.sin()];
        for (j, e) in expect.iter().enumerate() {
            assert!((s.derivative_at_zero(j) - e).abs() < 1e-13, "order {j}");
        }
    }

    #[test]
    fn taylor_exp_sqrt_div() {
        let x = t_var(0.5);
        let e = x.exp();
        for j in 0..6 {
            assert!((e.derivative_at_zero(j) - 0.5f64.exp()).abs() < 1e-12);
        }
        let r = x.sqrt() * x.sqrt();
        for j in 0..6 {
            assert!((r.c[j] - x.c[j]).abs() < 1e-13);
        }
        let q = (x * x + Taylor::cst(1.0)) / x;
        // (x² + 1)/x = x + 1/x, third derivative of 1/x at 0.5 is -6/x⁴
        assert!((q.derivative_at_zero(3) + 6.0 / 0.5f64.powi(4)).abs() < 1e-9);
    }

    #[test]
    fn nested_taylor_of_dual() {
        // d/dp of d²/dt² [p·sin(t)]|_{t=0.3} = -sin(0.3)
        let p = Dual64::var(2.0);
        let mut c = [Dual64::cst(0.0); 4];
        c[0] = Dual64::cst(0.3);
        c[1] = Dual64::cst(1.0);
        let t: Taylor<Dual64, 4> = Taylor::from_coeffs(c);
        let y = Taylor::constant(p) * t.sin();
        let d2 = y.derivative_at_zero(2);
        assert!((d2.re + 2.0 * 0.3f64.sin()).abs() < 1e-14);
        assert!((d2.eps + 0.3f64.sin()).abs() < 1e-14);
    }
}
