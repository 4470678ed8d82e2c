//! Floating-point abstraction for the compute kernels.
//!
//! Parameters are always stored as `f32`; the kernels run either in `f32`
//! (training and inference) or in `f64` (finite-difference gradient checks,
//! where `f32` round-off would swamp the central-difference quotient).

use num_traits::{Float, FromPrimitive};
use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

pub trait Scalar:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + Debug + Default + Send + Sync + 'static
{
    fn of_f32(v: f32) -> Self;
    fn to_f32(self) -> f32;
    fn to_f64_lossless(self) -> f64;

    /// `c = alpha * a @ b + beta * c` with arbitrary element strides.
    ///
    /// # Safety contract
    /// Callers go through [`gemm`], which bounds-checks every operand first.
    #[allow(clippy::too_many_arguments)]
    fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

impl Scalar for f32 {
    fn of_f32(v: f32) -> Self {
        v
    }
    fn to_f32(self) -> f32 {
        self
    }
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
    fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: &[f32],
        rsa: isize,
        csa: isize,
        b: &[f32],
        rsb: isize,
        csb: isize,
        beta: f32,
        c: &mut [f32],
        rsc: isize,
        csc: isize,
    ) {
        // SAFETY: operand extents were checked by `gemm`.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                rsc,
                csc,
            )
        }
    }
}

impl Scalar for f64 {
    fn of_f32(v: f32) -> Self {
        v as f64
    }
    fn to_f32(self) -> f32 {
        self as f32
    }
    fn to_f64_lossless(self) -> f64 {
        self
    }
    fn raw_gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: &[f64],
        rsa: isize,
        csa: isize,
        b: &[f64],
        rsb: isize,
        csb: isize,
        beta: f64,
        c: &mut [f64],
        rsc: isize,
        csc: isize,
    ) {
        // SAFETY: operand extents were checked by `gemm`.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                rsc,
                csc,
            )
        }
    }
}

/// Row/column strides of a matrix operand.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Strides(pub usize, pub usize);

impl Strides {
    /// Plain row-major layout with `cols` columns.
    pub fn row_major(cols: usize) -> Self {
        Strides(cols, 1)
    }

    /// Transposed view of a row-major matrix with `cols` columns.
    pub fn transposed(cols: usize) -> Self {
        Strides(1, cols)
    }

    fn extent(self, rows: usize, cols: usize) -> usize {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * self.0 + (cols - 1) * self.1 + 1
        }
    }
}

/// Bounds-checked strided GEMM: `c[m×n] = alpha * a[m×k] b[k×n] + beta * c`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<S: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: S,
    a: &[S],
    sa: Strides,
    b: &[S],
    sb: Strides,
    beta: S,
    c: &mut [S],
    sc: Strides,
) {
    assert!(sa.extent(m, k) <= a.len(), "gemm: lhs out of bounds");
    assert!(sb.extent(k, n) <= b.len(), "gemm: rhs out of bounds");
    assert!(sc.extent(m, n) <= c.len(), "gemm: output out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    S::raw_gemm(
        m,
        k,
        n,
        alpha,
        a,
        sa.0 as isize,
        sa.1 as isize,
        b,
        sb.0 as isize,
        sb.1 as isize,
        beta,
        c,
        sc.0 as isize,
        sc.1 as isize,
    );
}

pub(crate) fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

pub(crate) fn to_scalar<S: Scalar>(v: &[f32]) -> Vec<S> {
    v.iter().map(|&x| S::of_f32(x)).collect()
}

pub(crate) fn to_f32<S: Scalar>(v: &[S]) -> Vec<f32> {
    v.iter().map(|&x| x.to_f32()).collect()
}
