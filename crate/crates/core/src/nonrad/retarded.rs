use crate::error::{invalid, Result};

use super::source::FourCurrent;

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Scalar and vector potentials `φ = Σ ρ(t_r)/R h³`, `A = (1/c) Σ J(t_r)/R h³`
/// with the source linearly interpolated at the retarded time
/// `t_r = t − R/c`. Retarded times outside the window contribute nothing.
pub fn retarded_potentials(src: &FourCurrent, x: &[f64; 3], t: f64) -> (f64, [f64; 3]) {
    let c = src.light_speed();
    let mut phi = 0.0;
    let mut a = [0.0; 3];
    for (s, p) in src.positions().iter().enumerate() {
        let r = sub(x, p);
        let dist = dot(&r, &r).sqrt();
        if let Some((rho, j)) = src.linear(s, t - dist / c) {
            phi += rho / dist;
            for k in 0..3 {
                a[k] += j[k] / dist;
            }
        }
    }
    let v = src.cell_volume();
    (phi * v, a.map(|x| x * v / c))
}

fn closest_source(src: &FourCurrent, x: &[f64; 3]) -> f64 {
    src.positions()
        .iter()
        .map(|p| {
            let r = sub(x, p);
            dot(&r, &r).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `E = −∇φ − (1/c)∂A/∂t` and `B = ∇×A` by central differences of the
/// retarded potentials with spatial step `hf` and time step `dtf`. The
/// stencil must stay at least one grid spacing away from every source node.
/// The potentials are piecewise linear in time, so `dtf` below the sample
/// step or `hf` below `c` times the sample step only resolves segment slopes.
pub fn fields_at(src: &FourCurrent, x: &[f64; 3], t: f64, hf: f64, dtf: f64) -> Result<([f64; 3], [f64; 3])> {
    if !(hf > 0.0 && dtf > 0.0) {
        return invalid("finite-difference steps must be positive");
    }
    let h = (0..3).map(|k| src.grid().spacing(k)).fold(0.0, f64::max);
    if src.support_len() > 0 && closest_source(src, x) < hf + h {
        return invalid("field stencil overlaps the source support");
    }
    let mut e = [0.0; 3];
    let mut da = [[0.0; 3]; 3]; // da[k][l] = ∂A_l/∂x_k
    for k in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += hf;
        xm[k] -= hf;
        let (pp, ap) = retarded_potentials(src, &xp, t);
        let (pm, am) = retarded_potentials(src, &xm, t);
        e[k] = -(pp - pm) / (2.0 * hf);
        for l in 0..3 {
            da[k][l] = (ap[l] - am[l]) / (2.0 * hf);
        }
    }
    let (_, a_next) = retarded_potentials(src, x, t + dtf);
    let (_, a_prev) = retarded_potentials(src, x, t - dtf);
    let c = src.light_speed();
    for k in 0..3 {
        e[k] -= (a_next[k] - a_prev[k]) / (2.0 * dtf * c);
    }
    let b = [da[1][2] - da[2][1], da[2][0] - da[0][2], da[0][1] - da[1][0]];
    Ok((e, b))
}

/// Retarded fields from the charge, the current and their time derivatives
/// at the retarded time:
/// `E = Σ [ρ R̂/R² + ρ̇ R̂/(cR) − J̇/(c²R)] h³`,
/// `B = Σ [J×R̂/(cR²) + J̇×R̂/(c²R)] h³`.
pub fn jefimenko(src: &FourCurrent, x: &[f64; 3], t: f64) -> ([f64; 3], [f64; 3]) {
    let c = src.light_speed();
    let mut e = [0.0; 3];
    let mut b = [0.0; 3];
    for (s, p) in src.positions().iter().enumerate() {
        let r = sub(x, p);
        let dist = dot(&r, &r).sqrt();
        let Some(st) = src.state(s, t - dist / c) else {
            continue;
        };
        let inv = 1.0 / dist;
        let n = r.map(|v| v * inv);
        let radial = st.rho * inv * inv + st.rho_dot * inv / c;
        let jn = [
            st.j[0] * inv * inv / c + st.j_dot[0] * inv / (c * c),
            st.j[1] * inv * inv / c + st.j_dot[1] * inv / (c * c),
            st.j[2] * inv * inv / c + st.j_dot[2] * inv / (c * c),
        ];
        let bx = cross(&jn, &n);
        let inv_c2r = inv / (c * c);
        for k in 0..3 {
            e[k] += radial * n[k] - st.j_dot[k] * inv_c2r;
            b[k] += bx[k];
        }
    }
    let v = src.cell_volume();
    (e.map(|x| x * v), b.map(|x| x * v))
}
