//! The floating-point abstraction every numeric routine is written against.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Real scalar usable by the tape, the networks and the mixture fitter.
///
/// Implemented for `f32` and `f64`. The crate-root aliases pin `f64`,
/// which is what training and the checkpoint format use.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    fn erf(self) -> Self;

    /// Lossy conversion from `f64`; used for literals and sampled noise.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Standard normal draw. Always sampled in `f64` so a seed yields the
    /// same stream regardless of the scalar type.
    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        Self::lit(z)
    }

    /// `c += a · b` for strided `a [m,k]`, `b [k,n]`, `c [m,n]`.
    fn gemm_acc(m: usize, k: usize, n: usize, a: Strided<'_, Self>, b: Strided<'_, Self>, c: &mut [Self], rsc: usize);
}

/// A matrix view: data plus row and column strides.
#[derive(Clone, Copy)]
pub struct Strided<'a, S> {
    pub data: &'a [S],
    pub rs: usize,
    pub cs: usize,
}

fn check_extent<S>(rows: usize, cols: usize, v: &Strided<'_, S>) {
    if rows > 0 && cols > 0 {
        assert!((rows - 1) * v.rs + (cols - 1) * v.cs < v.data.len(), "strided view out of bounds");
    }
}

/// Below this many multiply-adds the packed kernel costs more than it saves.
const SMALL_GEMM: usize = 4096;

fn small_gemm<S: Scalar>(m: usize, k: usize, n: usize, a: Strided<'_, S>, b: Strided<'_, S>, c: &mut [S], rsc: usize) {
    for i in 0..m {
        for p in 0..k {
            let aip = a.data[i * a.rs + p * a.cs];
            for j in 0..n {
                let o = &mut c[i * rsc + j];
                *o = *o + aip * b.data[p * b.rs + j * b.cs];
            }
        }
    }
}

macro_rules! gemm_impl {
    ($kernel:path) => {
        fn gemm_acc(m: usize, k: usize, n: usize, a: Strided<'_, Self>, b: Strided<'_, Self>, c: &mut [Self], rsc: usize) {
            if m == 0 || n == 0 || k == 0 {
                return;
            }
            check_extent(m, k, &a);
            check_extent(k, n, &b);
            assert!((m - 1) * rsc + n <= c.len(), "output view out of bounds");
            if m * k * n < SMALL_GEMM {
                return small_gemm(m, k, n, a, b, c, rsc);
            }
            // SAFETY: every index the kernel touches was bounds-checked above.
            unsafe {
                $kernel(
                    m, k, n, 1.0,
                    a.data.as_ptr(), a.rs as isize, a.cs as isize,
                    b.data.as_ptr(), b.rs as isize, b.cs as isize,
                    1.0,
                    c.as_mut_ptr(), rsc as isize, 1,
                );
            }
        }
    };
}

impl Scalar for f64 {
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }

    gemm_impl!(matrixmultiply::dgemm);
}

impl Scalar for f32 {
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }

    gemm_impl!(matrixmultiply::sgemm);
}
