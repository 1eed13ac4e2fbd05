//! Small dense/sparse linear-algebra kernels shared by the grid solvers.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real or complex scalar stored in fields and solved for in linear systems.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Mul<f64, Output = Self>
    + 'static
{
    const IS_COMPLEX: bool;
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn norm_sqr(self) -> f64;
    fn conj(self) -> Self;
    fn is_finite(self) -> bool;
    fn abs(self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Thomas algorithm for a tridiagonal system.
///
/// `lower[i]` couples row i to i-1 (lower[0] unused), `upper[i]` couples row i
/// to i+1 (upper[n-1] unused).
pub fn solve_tridiagonal<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::InvalidInput("tridiagonal system with inconsistent lengths".into()));
    }
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut denom = diag[0];
    if denom.norm_sqr() == 0.0 {
        return Err(Error::Diagnostic("zero pivot in tridiagonal solve".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom.norm_sqr() == 0.0 {
            return Err(Error::Diagnostic("zero pivot in tridiagonal solve".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { T::zero() };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n.saturating_sub(1)).rev() {
        let next = x[i + 1];
        x[i] -= c[i] * next;
    }
    Ok(x)
}

/// Cyclic tridiagonal solve via Sherman-Morrison: the corner entries are
/// `lower[0]` (row 0, column n-1) and `upper[n-1]` (row n-1, column 0).
pub fn solve_cyclic_tridiagonal<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    if n < 3 {
        return Err(Error::InvalidInput("cyclic tridiagonal system needs n >= 3".into()));
    }
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &bb, upper, rhs)?;
    let mut u = vec![T::zero(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &bb, upper, &u)?;
    let fact = (x[0] + beta * x[n - 1] / gamma) / (T::from_real(1.0) + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(&xi, &zi)| xi - fact * zi).collect())
}

/// Unconjugated bilinear form, the inner product used by CG and COCG.
fn bilinear<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

fn norm2<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for real symmetric positive definite systems, and the
/// conjugate-orthogonal variant (COCG) for complex symmetric ones. Both use the
/// unconjugated bilinear form, so one routine covers the two cases.
pub fn conjugate_gradient<T, F>(
    apply: F,
    rhs: &[T],
    x0: Option<&[T]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<T>, KrylovStats)>
where
    T: Scalar,
    F: Fn(&[T], &mut [T]),
{
    let n = rhs.len();
    let bnorm = norm2(rhs);
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![T::zero(); n],
    };
    if bnorm == 0.0 {
        return Ok((
            vec![T::zero(); n],
            KrylovStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut ax = vec![T::zero(); n];
    apply(&x, &mut ax);
    let mut r: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = bilinear(&r, &r);
    let mut ap = vec![T::zero(); n];
    let mut res = norm2(&r) / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok((
                x,
                KrylovStats {
                    iterations: it,
                    relative_residual: res,
                },
            ));
        }
        apply(&p, &mut ap);
        let pap = bilinear(&p, &ap);
        if pap.norm_sqr() == 0.0 || !pap.is_finite() {
            return Err(Error::Diagnostic("Krylov breakdown (p^T A p = 0)".into()));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = bilinear(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        res = norm2(&r) / bnorm;
    }
    if res <= tol {
        return Ok((
            x,
            KrylovStats {
                iterations: max_iter,
                relative_residual: res,
            },
        ));
    }
    Err(Error::Convergence {
        what: "conjugate gradient",
        iterations: max_iter,
        residual: res,
    })
}
