use super::{Boundary, Field, Grid, VectorField};
use crate::linalg::Scalar;

/// Visit every grid line along `axis` as (first index, stride, length).
fn for_each_line(grid: &Grid, axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let n = grid.axis(axis).n;
    let stride = grid.stride(axis);
    let block = n * stride;
    for outer in 0..grid.len() / block {
        for inner in 0..stride {
            f(outer * block + inner, stride, n);
        }
    }
}

fn first_derivative_line<T: Scalar>(src: &[T], dst: &mut [T], start: usize, stride: usize, n: usize, h: f64, bc: Boundary) {
    let at = |i: usize| src[start + i * stride];
    let inv2h = 0.5 / h;
    for i in 1..n - 1 {
        dst[start + i * stride] = (at(i + 1) - at(i - 1)) * inv2h;
    }
    let (d0, dn) = match bc {
        Boundary::Periodic => ((at(1) - at(n - 1)) * inv2h, (at(0) - at(n - 2)) * inv2h),
        Boundary::Dirichlet => (at(1) * inv2h, -at(n - 2) * inv2h),
        Boundary::Open => (
            (at(0) * -3.0 + at(1) * 4.0 - at(2)) * inv2h,
            (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * inv2h,
        ),
    };
    dst[start] = d0;
    dst[start + (n - 1) * stride] = dn;
}

fn second_derivative_line<T: Scalar>(src: &[T], dst: &mut [T], start: usize, stride: usize, n: usize, h: f64, bc: Boundary) {
    let at = |i: usize| src[start + i * stride];
    let inv_h2 = 1.0 / (h * h);
    for i in 1..n - 1 {
        dst[start + i * stride] += (at(i + 1) + at(i - 1) - at(i) * 2.0) * inv_h2;
    }
    let (d0, dn) = match bc {
        Boundary::Periodic => (
            (at(1) + at(n - 1) - at(0) * 2.0) * inv_h2,
            (at(0) + at(n - 2) - at(n - 1) * 2.0) * inv_h2,
        ),
        Boundary::Dirichlet => ((at(1) - at(0) * 2.0) * inv_h2, (at(n - 2) - at(n - 1) * 2.0) * inv_h2),
        Boundary::Open => (
            (at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)) * inv_h2,
            (at(n - 1) * 2.0 - at(n - 2) * 5.0 + at(n - 3) * 4.0 - at(n - 4)) * inv_h2,
        ),
    };
    dst[start] += d0;
    dst[start + (n - 1) * stride] += dn;
}

/// Central first difference along `axis`.
pub fn derivative<T: Scalar>(f: &Field<T>, axis: usize) -> Field<T> {
    let grid = f.grid();
    let h = grid.spacing(axis);
    let mut out = vec![T::zero(); grid.len()];
    for_each_line(grid, axis, |s, st, n| first_derivative_line(f.values(), &mut out, s, st, n, h, f.boundary()));
    Field::from_parts(grid.clone(), f.boundary(), out)
}

/// Central second difference along `axis`.
pub fn second_derivative<T: Scalar>(f: &Field<T>, axis: usize) -> Field<T> {
    let grid = f.grid();
    let h = grid.spacing(axis);
    let mut out = vec![T::zero(); grid.len()];
    for_each_line(grid, axis, |s, st, n| second_derivative_line(f.values(), &mut out, s, st, n, h, f.boundary()));
    Field::from_parts(grid.clone(), f.boundary(), out)
}

pub fn laplacian<T: Scalar>(f: &Field<T>) -> Field<T> {
    let grid = f.grid();
    let mut out = vec![T::zero(); grid.len()];
    laplacian_into(grid, f.boundary(), f.values(), &mut out);
    Field::from_parts(grid.clone(), f.boundary(), out)
}

/// Slice form of [`laplacian`] for solver inner loops; overwrites `dst`.
pub fn laplacian_into<T: Scalar>(grid: &Grid, boundary: Boundary, src: &[T], dst: &mut [T]) {
    dst.iter_mut().for_each(|v| *v = T::zero());
    for axis in 0..grid.dim() {
        let h = grid.spacing(axis);
        for_each_line(grid, axis, |s, st, n| second_derivative_line(src, dst, s, st, n, h, boundary));
    }
}

pub fn gradient<T: Scalar>(f: &Field<T>) -> VectorField<T> {
    let comps = (0..f.grid().dim()).map(|k| derivative(f, k).into_values()).collect();
    VectorField::from_parts(f.grid().clone(), f.boundary(), comps)
}

pub fn divergence<T: Scalar>(v: &VectorField<T>) -> Field<T> {
    let grid = v.grid();
    let mut out = vec![T::zero(); grid.len()];
    for k in 0..grid.dim() {
        let d = derivative(&v.component_field(k), k);
        for (o, x) in out.iter_mut().zip(d.values()) {
            *o += *x;
        }
    }
    Field::from_parts(grid.clone(), v.boundary(), out)
}

/// Trapezoid rule on every axis (uniform weights on periodic axes).
pub fn integrate<T: Scalar>(f: &Field<T>) -> T {
    let grid = f.grid();
    let mut acc = T::zero();
    for (i, &v) in f.values().iter().enumerate() {
        acc += v * grid.node_weight(i, f.boundary());
    }
    acc
}
