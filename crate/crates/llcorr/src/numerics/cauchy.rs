use num_complex::Complex64;
use std::f64::consts::PI;

use super::contour::Contour;
use super::quad::gauss_legendre;
use crate::error::{Error, Result};

type C64 = Complex64;

/// Quadrature of `∫ f(μ)/(μ−λ) dμ` over the contour.
pub fn cauchy_transform(contour: &Contour, f: &[C64], lambda: C64) -> Result<C64> {
    if contour.relative_distance(lambda) < 0.25 {
        return Err(Error::TooCloseToContour { at: lambda });
    }
    Ok(cauchy_unchecked(contour, f, lambda))
}

fn cauchy_unchecked(contour: &Contour, f: &[C64], lambda: C64) -> C64 {
    contour
        .nodes
        .iter()
        .zip(&contour.weights)
        .zip(f)
        .map(|((x, w), v)| w * v / (x - lambda))
        .sum()
}

/// Winding number of f around the rectangle [lo, hi], from a closure returning
/// `(|f|, f′/f)`. The logarithmic derivative is integrated adaptively per side.
pub fn count_zeros_logderiv<G>(g: G, lo: C64, hi: C64) -> Result<i64>
where
    G: Fn(C64) -> Result<(f64, C64)>,
{
    if !(hi.re > lo.re && hi.im > lo.im) {
        return Err(Error::InvalidInput(format!("degenerate rectangle {lo} .. {hi}")));
    }
    let corners = [lo, C64::new(hi.re, lo.im), hi, C64::new(lo.re, hi.im), lo];
    count_zeros_polygon(g, &corners)
}

/// Signed winding number of f along a closed polyline (first vertex repeated at the end).
/// Counterclockwise traversal counts enclosed zeros positively.
pub fn count_zeros_polygon<G>(g: G, vertices: &[C64]) -> Result<i64>
where
    G: Fn(C64) -> Result<(f64, C64)>,
{
    if vertices.len() < 4 || vertices.first() != vertices.last() {
        return Err(Error::InvalidInput("polygon must be closed with at least three sides".into()));
    }
    let (t, w) = gauss_legendre(16);
    let mut total = C64::new(0.0, 0.0);
    let mut min_mod = f64::INFINITY;
    for s in vertices.windows(2) {
        if s[0] != s[1] {
            total += adaptive(&g, s[0], s[1], &t, &w, 0, &mut min_mod)?;
        }
    }
    if min_mod < 1e-13 {
        return Err(Error::ZeroOnBoundary { min_modulus: min_mod });
    }
    let n = total / C64::new(0.0, 2.0 * PI);
    let rounded = n.re.round();
    if (n - rounded).norm() >= 0.25 {
        return Err(Error::AmbiguousCount { value: n.re });
    }
    Ok(rounded as i64)
}

/// Winding count for an analytic function with its derivative.
pub fn count_zeros<F, D>(f: F, df: D, lo: C64, hi: C64) -> Result<i64>
where
    F: Fn(C64) -> C64,
    D: Fn(C64) -> C64,
{
    count_zeros_logderiv(
        |z| {
            let v = f(z);
            Ok((v.norm(), df(z) / v))
        },
        lo,
        hi,
    )
}

fn panel_sum<G>(g: &G, a: C64, b: C64, t: &[f64], w: &[f64], min_mod: &mut f64) -> Result<C64>
where
    G: Fn(C64) -> Result<(f64, C64)>,
{
    let half = (b - a) * 0.5;
    let mut s = C64::new(0.0, 0.0);
    for k in 0..t.len() {
        let (m, r) = g(a + half * (t[k] + 1.0))?;
        *min_mod = min_mod.min(m);
        s += r * w[k];
    }
    Ok(s * half)
}

fn adaptive<G>(g: &G, a: C64, b: C64, t: &[f64], w: &[f64], depth: usize, min_mod: &mut f64) -> Result<C64>
where
    G: Fn(C64) -> Result<(f64, C64)>,
{
    let m = (a + b) * 0.5;
    let whole = panel_sum(g, a, b, t, w, min_mod)?;
    let left = panel_sum(g, a, m, t, w, min_mod)?;
    let right = panel_sum(g, m, b, t, w, min_mod)?;
    let err = (whole - left - right).norm();
    if !err.is_finite() {
        return Err(Error::ZeroOnBoundary { min_modulus: 0.0 });
    }
    if err < 1e-9 || depth >= 40 {
        if depth >= 40 && err >= 1e-9 {
            return Err(Error::ZeroOnBoundary { min_modulus: *min_mod });
        }
        return Ok(left + right);
    }
    Ok(adaptive(g, a, m, t, w, depth + 1, min_mod)? + adaptive(g, m, b, t, w, depth + 1, min_mod)?)
}
