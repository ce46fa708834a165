//! Scalar activation functions and their derivatives.
//!
//! GeLU uses the exact Gaussian-CDF form `x·Φ(x)`, not the tanh
//! approximation.

use super::scalar::Scalar;

#[inline]
fn std_normal_cdf<S: Scalar>(x: S) -> S {
    S::lit(0.5) * (S::one() + (x * S::lit(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

#[inline]
fn std_normal_pdf<S: Scalar>(x: S) -> S {
    S::lit(0.398_942_280_401_432_7) * (-(x * x) * S::lit(0.5)).exp()
}

#[inline]
pub fn gelu<S: Scalar>(x: S) -> S {
    x * std_normal_cdf(x)
}

#[inline]
pub fn gelu_grad<S: Scalar>(x: S) -> S {
    std_normal_cdf(x) + x * std_normal_pdf(x)
}

/// `ln(1 + eˣ)` without overflow.
#[inline]
pub fn softplus<S: Scalar>(x: S) -> S {
    x.max(S::zero()) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// `tanh(softplus(x))` and `sigmoid(x)` from one exponential:
/// with `n = eˣ(eˣ + 2)`, `tanh(softplus(x)) = n / (n + 2)`.
#[inline]
fn mish_parts<S: Scalar>(x: S) -> (S, S) {
    if x > S::lit(20.0) {
        return (S::one(), sigmoid(x));
    }
    let e = x.exp();
    let n = e * (e + S::lit(2.0));
    (n / (n + S::lit(2.0)), e / (S::one() + e))
}

#[inline]
pub fn mish<S: Scalar>(x: S) -> S {
    x * mish_parts(x).0
}

#[inline]
pub fn mish_grad<S: Scalar>(x: S) -> S {
    let (t, sig) = mish_parts(x);
    t + x * (S::one() - t * t) * sig
}
