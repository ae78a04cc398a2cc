//! Quadrature: Romberg (trapezoid + Richardson) in one and two dimensions,
//! adaptive Simpson for complex integrands, half-line integrals with an
//! explicit tail bound, and deterministic pairwise summation.

use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::linalg::C64;

/// Default absolute tolerance for quadrature.
pub const DEFAULT_TOL: f64 = 1e-8;

const MIN_LEVEL: usize = 5;
const MAX_LEVEL_1D: usize = 24;
const MAX_LEVEL_2D: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Difference of the last two diagonal Richardson estimates.
    pub error: f64,
    pub evaluations: usize,
}

/// Pairwise (cascade) sum; the reduction order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn richardson(table: &mut Vec<Vec<f64>>, trapezoid: f64) -> f64 {
    let k = table.len();
    let mut row = Vec::with_capacity(k + 1);
    row.push(trapezoid);
    let mut factor = 1.0;
    for j in 1..=k {
        factor *= 4.0;
        let prev = row[j - 1];
        let above = table[k - 1][j - 1];
        row.push(prev + (prev - above) / (factor - 1.0));
    }
    let best = row[k];
    table.push(row);
    best
}

/// Romberg integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn romberg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if a == b {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let width = b - a;
    let mut trap = 0.5 * width * (f(a) + f(b));
    let mut evaluations = 2;
    let mut table: Vec<Vec<f64>> = Vec::new();
    table.push(alloc::vec![trap]);
    let mut best = trap;
    let mut last_change = f64::INFINITY;
    for level in 1..=MAX_LEVEL_1D {
        let count = 1usize << (level - 1);
        let h = width / (2 * count) as f64;
        let mut fresh = 0.0;
        for i in 0..count {
            fresh += f(a + (2 * i + 1) as f64 * h);
        }
        evaluations += count;
        trap = 0.5 * trap + h * fresh;
        let next = richardson(&mut table, trap);
        last_change = (next - best).abs();
        best = next;
        if level >= MIN_LEVEL && last_change < tol {
            return Ok(Quadrature {
                value: best,
                error: last_change,
                evaluations,
            });
        }
    }
    Err(Error::QuadratureNonConvergence { tol, last_change })
}

/// Romberg integration over the rectangle `[ax, bx] x [ay, by]` using tensor
/// trapezoid grids halved in both directions.
pub fn romberg_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    tol: f64,
) -> Result<Quadrature> {
    let (wx, wy) = (bx - ax, by - ay);
    if wx == 0.0 || wy == 0.0 {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let weight = |i: usize, last: usize| if i == 0 || i == last { 0.5 } else { 1.0 };
    // Weighted sum over the grid of the current level (without the h factors).
    let mut sum = 0.0;
    for (i, x) in [ax, bx].iter().enumerate() {
        for (j, y) in [ay, by].iter().enumerate() {
            sum += weight(i, 1) * weight(j, 1) * f(*x, *y);
        }
    }
    let mut evaluations = 4;
    let mut table: Vec<Vec<f64>> = Vec::new();
    table.push(alloc::vec![sum * wx * wy]);
    let mut best = sum * wx * wy;
    let mut last_change = f64::INFINITY;
    for level in 1..=MAX_LEVEL_2D {
        let cells = 1usize << level;
        let hx = wx / cells as f64;
        let hy = wy / cells as f64;
        let mut fresh = 0.0;
        for i in 0..=cells {
            let x = ax + i as f64 * hx;
            let j_step = if i % 2 == 0 { 2 } else { 1 };
            let j_start = if i % 2 == 0 { 1 } else { 0 };
            let mut j = j_start;
            while j <= cells {
                let y = ay + j as f64 * hy;
                fresh += weight(i, cells) * weight(j, cells) * f(x, y);
                evaluations += 1;
                j += j_step;
            }
        }
        sum += fresh;
        let trap = sum * hx * hy;
        let next = richardson(&mut table, trap);
        last_change = (next - best).abs();
        best = next;
        if level >= 4 && last_change < tol {
            return Ok(Quadrature {
                value: best,
                error: last_change,
                evaluations,
            });
        }
    }
    Err(Error::QuadratureNonConvergence { tol, last_change })
}

/// Adaptive Simpson for complex integrands.
pub fn adaptive_simpson<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, tol: f64) -> Result<C64> {
    if a == b {
        return Ok(C64::new(0.0, 0.0));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    let mut worst = 0.0;
    let value = simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48, &mut worst);
    if worst > 0.0 {
        return Err(Error::QuadratureNonConvergence {
            tol,
            last_change: worst,
        });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> C64>(
    f: &F,
    a: f64,
    b: f64,
    fa: C64,
    fm: C64,
    fb: C64,
    whole: C64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> C64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
    let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
    let delta = left + right - whole;
    // Depth 44 keeps a floor of a few evaluations per support interval.
    if depth < 44 && delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *worst = worst.max(delta.norm());
        return left + right;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst)
}

/// Bound on `int_t^inf h` when `ln h` is concave on `[t, inf)` and has slope
/// `log_slope < 0` at `t`.
pub fn log_concave_tail(h_at_t: f64, log_slope: f64) -> f64 {
    if h_at_t == 0.0 {
        0.0
    } else if log_slope < 0.0 {
        h_at_t / -log_slope
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineIntegral {
    /// Quadrature over `[start, truncation]`.
    pub value: f64,
    /// Certified bound on the neglected integral over `[truncation, inf)`.
    pub tail_bound: f64,
    pub truncation: f64,
}

/// Integrates `f` over `[start, inf)`.
///
/// `breakpoints` (ascending, all `> start`) mark kinks; Romberg runs on each
/// piece between them and then on pieces of doubling width until
/// `tail_bound(t)` (a bound on `int_t^inf f`) falls below `tol / 2`.
pub fn integrate_half_line<F, T>(
    f: F,
    start: f64,
    breakpoints: &[f64],
    tail_bound: T,
    tol: f64,
) -> Result<HalfLineIntegral>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let mut cursor = start;
    let mut total = 0.0;
    let fixed: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > start).collect();
    let fixed_tol = tol / (4.0 * (fixed.len() as f64 + 1.0));
    for b in &fixed {
        total += romberg(&f, cursor, *b, fixed_tol)?.value;
        cursor = *b;
    }
    let mut width = 1.0_f64.max(cursor - start);
    let mut piece_tol = tol / 8.0;
    for _ in 0..200 {
        let tail = tail_bound(cursor);
        if tail < 0.5 * tol {
            return Ok(HalfLineIntegral {
                value: total,
                tail_bound: tail,
                truncation: cursor,
            });
        }
        total += romberg(&f, cursor, cursor + width, piece_tol)?.value;
        cursor += width;
        width *= 2.0;
        piece_tol *= 0.5;
    }
    Err(Error::QuadratureNonConvergence {
        tol,
        last_change: tail_bound(cursor),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn romberg_polynomial_and_gaussian() {
        let q = romberg(|x| x * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((q.value - 9.0).abs() < 1e-12);
        let g = romberg(|x| (-PI * x * x).exp(), -8.0, 8.0, 1e-13).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn romberg_2d_gaussian_surface() {
        let q = romberg_2d(
            |x, y| (-PI * (x * x + y * y)).exp(),
            (-7.0, 7.0),
            (-7.0, 7.0),
            1e-11,
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-10, "{}", q.value);
    }

    #[test]
    fn adaptive_simpson_oscillatory() {
        // int_0^1 e^{2 pi i 3 t} dt = 0
        let v = adaptive_simpson(|t| C64::from_polar(1.0, 2.0 * PI * 3.0 * t), 0.0, 1.0, 1e-12)
            .unwrap();
        assert!(v.norm() < 1e-11);
    }

    #[test]
    fn half_line_with_power_tail() {
        // int_1^inf t^{-3} dt = 1/2, tail int_t^inf = t^{-2}/2
        let q = integrate_half_line(|t| t.powi(-3), 1.0, &[], |t| 0.5 * t.powi(-2), 1e-9).unwrap();
        assert!((q.value + q.tail_bound - 0.5).abs() < 1e-9);
        assert!(q.tail_bound < 5e-10);
    }

    #[test]
    fn log_concave_tail_bounds_gaussian() {
        let t = 1.5;
        let h = (-PI * t * t).exp();
        let bound = log_concave_tail(h, -2.0 * PI * t);
        let exact = 0.5 * libm::erfc(PI.sqrt() * t) / 1.0;
        assert!(bound >= exact);
        assert!(bound < 2.0 * exact);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4950.0);
    }
}
