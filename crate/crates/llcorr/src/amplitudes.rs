//! Amplitudes B[u_i]: the μ₊ double integral, C₀, the Û determinants on a rectangle around Ĉ,
//! and the weighted-kernel determinants.

use nalgebra::{DVector, Dyn, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::deformed::{build_contour, check_simple, segment_gap, solve_selection, DeformOptions, DeformedState, RootSelection};
use crate::error::{Error, Result};
use crate::numerics::{
    cauchy_transform, log1p_exp, nystrom_det, nystrom_matrix, segment_distance, unwrap_imag, Contour, Panel, PanelRule,
};
use crate::thermo::{fermi_from_eps, lieb_kernel, Coupling};

type C64 = Complex64;
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest disagreement tolerated between the two evaluations of the μ₊ double integral.
pub const DOUBLE_INTEGRAL_AGREEMENT: f64 = 1e-7;

/// Nodal values of a density on an open polyline, plus its analytic continuation.
/// The continuation receives an ordered list of points so it can follow branches along it.
pub struct Density<'a> {
    pub values: &'a [C64],
    pub continuation: &'a dyn Fn(&[C64]) -> Result<Vec<C64>>,
    /// Points where the continuation stops being analytic.
    pub singular: &'a [C64],
    /// Largest offset allowed regardless of the singular points.
    pub reach: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AFunctional {
    pub linear: C64,
    /// Double integral by parts with the left boundary value of the Cauchy transform.
    pub double: C64,
    /// Same double integral with the μ-copy moved off the contour to the left.
    pub double_offset: C64,
    pub offset_step: f64,
    /// |J(δ) − J(δ/2)| before extrapolation.
    pub offset_drift: f64,
    pub value: C64,
}

/// −∫(ix+g′)ν + ∬ ν(λ)ν(μ)/(λ−μ₊)², with both evaluations of the double integral required to agree.
pub fn a_functional(contour: &Contour, g_prime: &[C64], nu: &Density, x: f64) -> Result<AFunctional> {
    if contour.closed {
        return Err(Error::InvalidInput("the A functional is defined on open contours".into()));
    }
    let linear: C64 =
        -(0..contour.len()).map(|k| contour.weights[k] * (I * x + g_prime[k]) * nu.values[k]).sum::<C64>();
    let double = double_by_parts(contour, nu.values);
    let (double_offset, offset_step, offset_drift) = double_by_offset(contour, nu)?;
    if (double - double_offset).norm() > DOUBLE_INTEGRAL_AGREEMENT {
        return Err(Error::ExtrapolationDisagrees { a: double, b: double_offset });
    }
    Ok(AFunctional { linear, double, double_offset, offset_step, offset_drift, value: linear + double })
}

/// −∫ L₊[ν](μ) ν′(μ) dμ, with L₊ the boundary value from the left of the oriented contour,
/// computed by singularity subtraction.
pub fn double_by_parts(contour: &Contour, nu: &[C64]) -> C64 {
    let dnu = contour.differentiate(nu);
    let q = contour.order;
    let n = contour.len();
    let mut total = C64::new(0.0, 0.0);
    for j in 0..n {
        let mu = contour.nodes[j];
        let mut l = contour.weights[j] * dnu[j];
        for k in 0..n {
            if k != j {
                l += contour.weights[k] * (nu[k] - nu[j]) / (contour.nodes[k] - mu);
            }
        }
        let own = j / q;
        let mut ell = C64::new(0.0, 0.0);
        for (p, panel) in contour.panels.iter().enumerate() {
            ell += if p == own {
                C64::new(((panel.b - mu).norm() / (panel.a - mu).norm()).ln(), PI)
            } else {
                ((panel.b - mu) / (panel.a - mu)).ln()
            };
        }
        l += nu[j] * ell;
        total -= contour.weights[j] * dnu[j] * l;
    }
    total
}

fn dedup(v: &[C64]) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(v.len());
    for &z in v {
        if out.last().is_none_or(|l| (l - z).norm() > 1e-14) {
            out.push(z);
        }
    }
    out
}

/// Parallel polyline to the left with a separate distance per segment, mitred at the corners.
fn offset_polyline(v: &[C64], d: &[f64]) -> Result<Vec<C64>> {
    let normals: Vec<C64> = v.windows(2).map(|s| I * (s[1] - s[0]) / (s[1] - s[0]).norm()).collect();
    let mut out = Vec::with_capacity(v.len());
    out.push(v[0] + normals[0] * d[0]);
    for k in 1..v.len() - 1 {
        let (a, b) = (normals[k - 1], normals[k]);
        let det = a.re * b.im - a.im * b.re;
        if det < 0.0 && a.re * b.re + a.im * b.im < 0.5 {
            // convex on the left: round the corner
            let r = d[k - 1].min(d[k]);
            let turn = -(b / a).arg();
            let steps = (turn / (PI / 8.0)).ceil().max(1.0) as usize;
            out.push(v[k] + a * d[k - 1]);
            for i in 1..steps {
                out.push(v[k] + a * C64::from_polar(r, -turn * i as f64 / steps as f64));
            }
            out.push(v[k] + b * d[k]);
            continue;
        }
        // x·a = d_a and x·b = d_b for the corner displacement x
        let x = if det.abs() < 1e-12 {
            a * d[k - 1]
        } else {
            C64::new((d[k - 1] * b.im - d[k] * a.im) / det, (a.re * d[k] - b.re * d[k - 1]) / det)
        };
        // an inner mitre must land on both neighbouring offset segments
        let (ta, tb) = (-I * a, -I * b);
        let back = -(x.re * ta.re + x.im * ta.im);
        let fwd = x.re * tb.re + x.im * tb.im;
        if back > 0.5 * (v[k] - v[k - 1]).norm() || fwd > 0.5 * (v[k + 1] - v[k]).norm() {
            return Err(Error::CannotSeparate(format!("contour turns too sharply at {} to offset", v[k])));
        }
        out.push(v[k] + x);
    }
    out.push(v[v.len() - 1] + normals[normals.len() - 1] * d[d.len() - 1]);
    Ok(out)
}

/// Distance from segment `s` of a polyline to the segments that do not touch it.
fn segment_clearance(v: &[C64], s: usize) -> f64 {
    let mut gap = f64::INFINITY;
    for j in 0..v.len() - 1 {
        if j + 1 < s || j > s + 1 {
            gap = gap.min(segment_gap(v[s], v[s + 1], v[j], v[j + 1]));
        }
    }
    gap
}

fn polyline_distance(v: &[C64], a: C64, b: C64) -> f64 {
    v.windows(2).map(|s| segment_gap(a, b, s[0], s[1])).fold(f64::INFINITY, f64::min)
}

/// Length of the panel of `contour` closest to `p`.
fn nearest_panel(contour: &Contour, p: &Panel) -> f64 {
    let mut best = (f64::INFINITY, f64::INFINITY);
    for q in &contour.panels {
        let g = segment_gap(p.a, p.b, q.a, q.b);
        if g < best.0 {
            best = (g, q.len());
        }
    }
    best.1
}

/// Splits panels in halves until each is no longer than `limit(panel)`.
fn grade(contour: &Contour, limit: impl Fn(&Panel) -> f64) -> Result<Contour> {
    let mut out = Vec::with_capacity(contour.panels.len());
    let mut stack: Vec<Panel> = contour.panels.iter().rev().cloned().collect();
    while let Some(p) = stack.pop() {
        if p.len() <= limit(&p) {
            out.push(p);
            continue;
        }
        if p.len() < 1e-9 {
            return Err(Error::CannotSeparate(format!("panel refinement below 1e-9 near {}", p.a)));
        }
        let m = (p.a + p.b) * 0.5;
        stack.push(Panel { a: m, b: p.b, segment: p.segment });
        stack.push(Panel { a: p.a, b: m, segment: p.segment });
    }
    Ok(Contour::from_panels(contour.vertices.clone(), contour.closed, contour.order, out))
}

/// Double integral with μ on a parallel curve to the left at distances δ_s and δ_s/2 per segment,
/// then one Richardson step. By Cauchy's theorem the value does not depend on the offset while the
/// swept strip stays analytic, so the step mostly reports quadrature drift.
fn double_by_offset(contour: &Contour, nu: &Density) -> Result<(C64, f64, f64)> {
    let v = dedup(&contour.vertices);
    let m = v.len() - 1;
    let lens: Vec<f64> = v.windows(2).map(|s| (s[1] - s[0]).norm()).collect();
    let delta: Vec<f64> = (0..m)
        .map(|s| {
            let local = lens[s].min(lens[s.saturating_sub(1)]).min(lens[(s + 1).min(m - 1)]);
            let clear = nu.singular.iter().map(|p| segment_distance(v[s], v[s + 1], *p)).fold(nu.reach, f64::min);
            0.2 * local.min(segment_clearance(&v, s)).min(clear)
        })
        .collect();
    let dmin = delta.iter().copied().fold(f64::INFINITY, f64::min);
    if !(dmin > 1e-6) {
        return Err(Error::CannotSeparate(format!("no room to offset the contour (step {dmin:e})")));
    }
    let half: Vec<f64> = delta.iter().map(|d| d / 2.0).collect();
    let near = offset_polyline(&v, &half)?;
    let fine = grade(contour, |p| 2.0 * polyline_distance(&near, p.a, p.b))?;
    let nu_fine = (nu.continuation)(&fine.nodes)?;
    let wnu: Vec<C64> = fine.weights.iter().zip(&nu_fine).map(|(w, f)| w * f).collect();
    let mut level = [C64::new(0.0, 0.0); 2];
    for (slot, d) in level.iter_mut().zip([&delta, &half]) {
        let ov = offset_polyline(&v, d)?;
        check_simple(&ov)?;
        let off = Contour::polyline(ov, false, &PanelRule::uniform(f64::INFINITY, contour.order))?;
        let off = grade(&off, |p| (2.0 * polyline_distance(&v, p.a, p.b)).min(nearest_panel(&fine, p)))?;
        let nu_off = (nu.continuation)(&off.nodes)?;
        let mut s = C64::new(0.0, 0.0);
        for j in 0..off.len() {
            let mu = off.nodes[j];
            let inner: C64 = fine.nodes.iter().zip(&wnu).map(|(x, f)| f / ((x - mu) * (x - mu))).sum();
            s += off.weights[j] * nu_off[j] * inner;
        }
        *slot = s;
    }
    Ok((level[1] * 2.0 - level[0], dmin, (level[1] - level[0]).norm()))
}

/// ∬ z(λ)z(μ)/(λ−μ−ic)² over the contour; zero at infinite coupling.
pub fn c0_functional(contour: &Contour, z: &[C64], c: Coupling) -> Result<C64> {
    let c = match c {
        Coupling::Infinite => return Ok(C64::new(0.0, 0.0)),
        Coupling::Finite(c) => c,
    };
    let mut total = C64::new(0.0, 0.0);
    for j in 0..contour.len() {
        let mut inner = C64::new(0.0, 0.0);
        for k in 0..contour.len() {
            let d = contour.nodes[j] - contour.nodes[k] - I * c;
            inner += contour.weights[k] * z[k] / (d * d);
        }
        total += contour.weights[j] * z[j] * inner;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("C₀ double integral".into()));
    }
    Ok(total)
}

/// z(λ) = −(1/2πi) log[(1+e^{−u/T})/(1+e^{−ε/T})] along an ordered path starting near the
/// left end of the real axis, with both logarithms followed continuously.
pub fn z_along(state: &DeformedState, path: &[C64]) -> Result<Vec<C64>> {
    let t = state.params.t;
    let mut lu = Vec::with_capacity(path.len());
    let mut le = Vec::with_capacity(path.len());
    for &p in path {
        lu.push(log1p_exp(-state.u_at(p)? / t));
        le.push(log1p_exp(-state.thermal.epsilon_at(p)? / t));
    }
    unwrap_imag(&mut lu);
    unwrap_imag(&mut le);
    if lu[0].norm() > 1e-6 || le[0].norm() > 1e-6 {
        return Err(Error::BranchJump(format!("path starts at {} with nonzero log-weight", path[0])));
    }
    Ok(lu.iter().zip(&le).map(|(a, b)| (a - b) * I / (2.0 * PI)).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmplitudeResult {
    pub selection: String,
    pub alpha: C64,
    pub b: C64,
    pub a_double: C64,
    pub a_double_offset: C64,
    pub c0: C64,
    pub det_u1: C64,
    pub det_u2: C64,
    pub det_k_eps: C64,
    pub det_k_u: C64,
    /// e^{L(θ₁+ic)} − e^{2πiα+L(θ₁−ic)} and e^{−L(θ₂−ic)} − e^{2πiα−L(θ₂+ic)}.
    pub denom1: C64,
    pub denom2: C64,
    /// (e^{2πiα}−1) divided by each denominator.
    pub pref1: C64,
    pub pref2: C64,
    /// Smallest |denominator| on the rectangle relative to |e^{2πiα}−1|.
    pub min_denominator: f64,
    pub theta1: C64,
    pub theta2: C64,
    pub theta_spread: Option<f64>,
    /// Components are the α → 0 limit of a symmetric extrapolation.
    pub alpha_limit: bool,
}

impl AmplitudeResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn combine(parts: [&AmplitudeResult; 4], f: impl Fn(&AmplitudeResult) -> C64) -> C64 {
        // symmetric averages at ±δ and ±δ/2, then one Richardson step in δ²
        let wide = (f(parts[0]) + f(parts[1])) * 0.5;
        let narrow = (f(parts[2]) + f(parts[3])) * 0.5;
        (narrow * 4.0 - wide) / 3.0
    }
}

/// θ-independent pieces, shared by every (θ₁, θ₂).
struct Parts {
    contour: Contour,
    a_double: C64,
    a_double_offset: C64,
    c0: C64,
    det_k_eps: C64,
    det_k_u: C64,
    rect: Option<Rect>,
}

struct Rect {
    c: f64,
    half_height: f64,
    half_width: f64,
    nodes: Vec<C64>,
    e2: C64,
    min_denominator: f64,
    /// det of the θ-free part of I + Û⁽¹⁾/2πi, and its inverse applied to the rank-one column.
    det1: C64,
    y1: Vec<C64>,
    weights: Vec<C64>,
    /// Same for Û⁽²⁾, whose θ-dependent column is solved per θ.
    det2: C64,
    lu2: LU<C64, Dyn, Dyn>,
    v2: Vec<C64>,
}

impl Rect {
    fn new(contour: &Contour, z: &[C64], c: f64, hh: f64, hw: f64, rule: &PanelRule, e2: C64) -> Result<Rect> {
        let rc = Contour::rectangle(C64::new(-hw, -hh), C64::new(hw, hh), rule)?;
        let n = rc.len();
        let scale = if (e2 - 1.0).norm() > 0.0 { (e2 - 1.0).norm() } else { 1.0 };
        let mut e0 = Vec::with_capacity(n);
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        let mut min_den = f64::INFINITY;
        for &w in &rc.nodes {
            let l0 = cauchy_transform(contour, z, w)?;
            let lp = cauchy_transform(contour, z, w + I * c)?;
            let lm = cauchy_transform(contour, z, w - I * c)?;
            let a = lp.exp() - e2 * lm.exp();
            let b = (-lm).exp() - e2 * (-lp).exp();
            min_den = min_den.min(a.norm() / scale).min(b.norm() / scale);
            e0.push(l0.exp());
            d1.push(a);
            d2.push(b);
        }
        if min_den < 1e-8 {
            return Err(Error::SmallDenominator { min: min_den });
        }
        let w = &rc.nodes;
        let tpi = I * 2.0 * PI;
        // Û⁽¹⁾ = A₁ + u₁ v₁(θ₁)ᵀ and Û⁽²⁾ = A₂ + u₂(θ₂) v₂ᵀ; the determinant lemma handles the rank-one parts
        let m1 = nystrom_matrix(w, &rc.weights, |j, k| -e0[j] * k_alpha(w[j] - w[k], c, e2) / d1[j] / tpi)?;
        let lu1 = m1.lu();
        let det1 = lu1.determinant();
        let u1 = DVector::from_iterator(n, (0..n).map(|j| e0[j] / (d1[j] * tpi)));
        let y1 = lu1.solve(&u1).ok_or(Error::Singular)?;
        let m2 = nystrom_matrix(w, &rc.weights, |j, k| k_alpha(w[j] - w[k], c, e2) / (e0[k] * d2[k] * tpi))?;
        let lu2 = m2.lu();
        let det2 = lu2.determinant();
        let v2: Vec<C64> = (0..n).map(|k| rc.weights[k] / (e0[k] * d2[k] * tpi)).collect();
        Ok(Rect {
            c,
            half_height: hh,
            half_width: hw,
            nodes: rc.nodes.clone(),
            e2,
            min_denominator: min_den,
            det1,
            y1: y1.iter().copied().collect(),
            weights: rc.weights.clone(),
            det2,
            lu2,
            v2,
        })
    }

    fn det_u1(&self, theta1: C64) -> C64 {
        let s: C64 = (0..self.nodes.len())
            .map(|k| k_alpha(theta1 - self.nodes[k], self.c, self.e2) * self.weights[k] * self.y1[k])
            .sum();
        self.det1 * (1.0 + s)
    }

    fn det_u2(&self, theta2: C64) -> Result<C64> {
        let n = self.nodes.len();
        let u = DVector::from_iterator(n, self.nodes.iter().map(|w| -k_alpha(w - theta2, self.c, self.e2)));
        let y = self.lu2.solve(&u).ok_or(Error::Singular)?;
        let s: C64 = self.v2.iter().zip(y.iter()).map(|(v, y)| v * y).sum();
        Ok(self.det2 * (1.0 + s))
    }
}

fn parts(state: &DeformedState) -> Result<Parts> {
    if state.gamma != 1.0 {
        return Err(Error::InvalidInput("amplitudes need the γ = 1 solution".into()));
    }
    if state.roots().iter().zip(state.origins()).any(|(s, r)| (s - r).norm() < 1e-8) {
        return Err(Error::InvalidInput(
            "roots coincide with their poles; the amplitude of this term vanishes in the limit".into(),
        ));
    }
    let dc = build_contour(state)?;
    let verts = dedup(&dc.contour.vertices);
    let top = verts.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let lambda = state.thermal.grid.cutoff;

    // rectangle geometry fixes the resolution Ĉ needs for Cauchy transforms off it
    let rect_geom = match state.params.c {
        Coupling::Infinite => None,
        Coupling::Finite(c) => {
            let hh = 0.45 * c;
            let clearance = (hh - top).min(c - hh - top).min(1.0);
            if clearance < 0.02 * c {
                return Err(Error::CannotSeparate(format!(
                    "contour reaches Im = {top:.3}, too close to the rectangle of half-height {hh:.3}"
                )));
            }
            Some((c, hh, clearance))
        }
    };
    let mut max_len = state.thermal.grid.panel_width();
    if let Some((_, _, clr)) = rect_geom {
        max_len = max_len.min(2.0 * clr);
    }
    let segs = dc.contour.vertices.clone();
    let contour = grade(&dc.contour, |p| {
        let mut near = f64::INFINITY;
        for j in 0..segs.len() - 1 {
            if j + 1 < p.segment || j > p.segment + 1 {
                let g = segment_gap(p.a, p.b, segs[j], segs[j + 1]);
                if g > 0.0 {
                    near = near.min(g);
                }
            }
        }
        max_len.min(near)
    })?;
    let z = z_along(state, &contour.nodes)?;
    let end = z[0].norm().max(z[z.len() - 1].norm());
    if end > 1e-10 {
        return Err(Error::BranchJump(format!("z does not vanish at the contour ends ({end:e})")));
    }

    let singular: Vec<C64> = dc.poles.iter().chain(&dc.holes).chain(state.roots().iter()).copied().collect();
    let cont = |pts: &[C64]| z_along(state, pts);
    // only poles and holes near the roots are listed; the cap keeps the offset clear of the rest
    let reach = (state.u_cap(true).min(state.u_cap(false)) - top).min(0.25);
    let density = Density { values: &z, continuation: &cont, singular: &singular, reach };
    let a = a_functional(&contour, &vec![C64::new(0.0, 0.0); z.len()], &density, 0.0)?;
    let c0 = c0_functional(&contour, &z, state.params.c)?;

    let (det_k_eps, det_k_u, rect) = match rect_geom {
        None => (C64::new(1.0, 0.0), C64::new(1.0, 0.0), None),
        Some((c, hh, clr)) => {
            let th = &state.thermal;
            let nodes: Vec<C64> = th.grid.nodes.iter().map(|x| C64::new(*x, 0.0)).collect();
            let weights: Vec<C64> = th.grid.weights.iter().map(|w| C64::new(*w, 0.0)).collect();
            let fw = th.fermi_weights();
            let det_k_eps =
                nystrom_det(&nodes, &weights, |j, k| -lieb_kernel(nodes[j] - nodes[k], c) * fw[k] / (2.0 * PI))?;
            let mut fu = Vec::with_capacity(contour.len());
            for &x in &contour.nodes {
                fu.push(fermi_from_eps(state.u_at(x)?, state.params.t));
            }
            let cn = &contour.nodes;
            let det_k_u =
                nystrom_det(cn, &contour.weights, |j, k| -lieb_kernel(cn[j] - cn[k], c) * fu[k] / (2.0 * PI))?;

            let hw = lambda + 1.0;
            let rule = PanelRule::uniform(2.0 * clr, contour.order);
            let e2 = (I * 2.0 * PI * state.params.alpha).exp();
            (det_k_eps, det_k_u, Some(Rect::new(&contour, &z, c, hh, hw, &rule, e2)?))
        }
    };
    Ok(Parts { contour, a_double: a.double, a_double_offset: a.double_offset, c0, det_k_eps, det_k_u, rect })
}

fn k_alpha(x: C64, c: f64, e2: C64) -> C64 {
    1.0 / (x + I * c) - e2 / (x - I * c)
}

fn at_theta(state: &DeformedState, parts: &Parts, z: &[C64], theta1: C64, theta2: C64) -> Result<AmplitudeResult> {
    let e2 = (I * 2.0 * PI * state.params.alpha).exp();
    let jexp = (parts.a_double - parts.c0).exp();
    let mut r = AmplitudeResult {
        selection: state.selection.to_string(),
        alpha: state.params.alpha,
        b: C64::new(0.0, 0.0),
        a_double: parts.a_double,
        a_double_offset: parts.a_double_offset,
        c0: parts.c0,
        det_u1: C64::new(1.0, 0.0),
        det_u2: C64::new(1.0, 0.0),
        det_k_eps: parts.det_k_eps,
        det_k_u: parts.det_k_u,
        denom1: 1.0 - e2,
        denom2: 1.0 - e2,
        pref1: C64::new(-1.0, 0.0),
        pref2: C64::new(-1.0, 0.0),
        min_denominator: 1.0,
        theta1,
        theta2,
        theta_spread: None,
        alpha_limit: false,
    };
    let rect = match &parts.rect {
        // the prefactor is identically one and every kernel vanishes
        None => {
            r.b = jexp;
            return Ok(r);
        }
        Some(rect) => rect,
    };
    let c = rect.c;
    for th in [theta1, theta2] {
        if th.re.abs() >= rect.half_width || th.im.abs() >= rect.half_height {
            return Err(Error::InvalidInput(format!("θ = {th} is not inside the rectangle")));
        }
    }
    let det_u1 = rect.det_u1(theta1);
    let det_u2 = rect.det_u2(theta2)?;
    let lt = |p: C64| cauchy_transform(&parts.contour, z, p);
    let denom1 = lt(theta1 + I * c)?.exp() - e2 * lt(theta1 - I * c)?.exp();
    let denom2 = (-lt(theta2 - I * c)?).exp() - e2 * (-lt(theta2 + I * c)?).exp();
    r.det_u1 = det_u1;
    r.det_u2 = det_u2;
    r.denom1 = denom1;
    r.denom2 = denom2;
    r.pref1 = (e2 - 1.0) / denom1;
    r.pref2 = (e2 - 1.0) / denom2;
    r.min_denominator = rect.min_denominator;
    r.b = r.pref1 * r.pref2 * jexp * det_u1 * det_u2 / (parts.det_k_eps * parts.det_k_u);
    if !r.b.is_finite() {
        return Err(Error::NonFinite(format!("amplitude at θ = ({theta1}, {theta2})")));
    }
    Ok(r)
}

/// Interior points of the surrounding rectangle: the default pair first, then two alternates.
pub fn theta_choices(state: &DeformedState) -> Vec<(C64, C64)> {
    let hh = match state.params.c {
        Coupling::Finite(c) => 0.45 * c,
        Coupling::Infinite => 1.0,
    };
    let l = state.thermal.grid.cutoff;
    vec![
        (C64::new(0.0, 0.5 * hh), C64::new(0.0, -0.5 * hh)),
        (C64::new(0.3 * l, 0.3 * hh), C64::new(-0.2 * l, -0.6 * hh)),
        (C64::new(-0.4 * l, 0.7 * hh), C64::new(0.4 * l, -0.3 * hh)),
    ]
}

fn evaluate(state: &DeformedState, thetas: &[(C64, C64)]) -> Result<Vec<AmplitudeResult>> {
    let p = parts(state)?;
    let z = z_along(state, &p.contour.nodes)?;
    thetas.iter().map(|&(t1, t2)| at_theta(state, &p, &z, t1, t2)).collect()
}

/// Step of the symmetric α → 0 extrapolation used when α = 0 and the selection is empty.
pub const ALPHA_LIMIT_STEP: f64 = 2e-3;

fn evaluate_any_alpha(state: &DeformedState, thetas: &[(C64, C64)]) -> Result<Vec<AmplitudeResult>> {
    let zero_alpha = state.params.alpha == C64::new(0.0, 0.0);
    if !(zero_alpha && state.n() == 0 && !state.params.c.is_infinite()) {
        return evaluate(state, thetas);
    }
    let d = ALPHA_LIMIT_STEP;
    let mut runs = Vec::with_capacity(4);
    for a in [d, -d, d / 2.0, -d / 2.0] {
        let s = solve_selection(&state.thermal, C64::new(a, 0.0), &RootSelection::empty(), &DeformOptions::default())?;
        runs.push(evaluate(&s, thetas)?);
    }
    let mut out = Vec::with_capacity(thetas.len());
    for i in 0..thetas.len() {
        let set = [&runs[0][i], &runs[1][i], &runs[2][i], &runs[3][i]];
        let f = |g: &dyn Fn(&AmplitudeResult) -> C64| AmplitudeResult::combine(set, g);
        out.push(AmplitudeResult {
            selection: state.selection.to_string(),
            alpha: state.params.alpha,
            b: f(&|r| r.b),
            a_double: f(&|r| r.a_double),
            a_double_offset: f(&|r| r.a_double_offset),
            c0: f(&|r| r.c0),
            det_u1: f(&|r| r.det_u1),
            det_u2: f(&|r| r.det_u2),
            det_k_eps: f(&|r| r.det_k_eps),
            det_k_u: f(&|r| r.det_k_u),
            denom1: f(&|r| r.denom1),
            denom2: f(&|r| r.denom2),
            pref1: f(&|r| r.pref1),
            pref2: f(&|r| r.pref2),
            min_denominator: set.iter().map(|r| r.min_denominator).fold(f64::INFINITY, f64::min),
            theta1: thetas[i].0,
            theta2: thetas[i].1,
            theta_spread: None,
            alpha_limit: true,
        });
    }
    Ok(out)
}

/// B[u_i] at the given (θ₁, θ₂). At α = 0 with the empty selection the components are the
/// α → 0 limit, since the prefactor and the Û kernels are 0/0 there.
pub fn amplitude_b(state: &DeformedState, theta1: C64, theta2: C64) -> Result<AmplitudeResult> {
    Ok(evaluate_any_alpha(state, &[(theta1, theta2)])?.remove(0))
}

/// B[u_i] at the default θ pair, with the relative spread over the alternates recorded.
pub fn amplitude_b_checked(state: &DeformedState) -> Result<AmplitudeResult> {
    let all = evaluate_any_alpha(state, &theta_choices(state))?;
    let b0 = all[0].b;
    let spread = all.iter().map(|r| (r.b - b0).norm()).fold(0.0, f64::max) / b0.norm().max(f64::MIN_POSITIVE);
    let mut first = all.into_iter().next().expect("three θ choices");
    first.theta_spread = Some(if b0.norm() == 0.0 { 0.0 } else { spread });
    Ok(first)
}

/// Σ_i e^{−x p_i} B_i over `(p, B)` pairs.
pub fn asymptotic_sum(terms: &[(C64, C64)], x: f64) -> C64 {
    terms.iter().map(|(p, b)| (-p * x).exp() * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::make_real_grid;
    use crate::thermo::{solve_epsilon, GridSpec, ModelParams};

    fn deform(c: Coupling, h: f64, t: f64, alpha: f64, sel: &str) -> DeformedState {
        let p = ModelParams::new(c, h, t, C64::new(0.0, 0.0)).unwrap();
        let th = solve_epsilon(&p, &GridSpec::default(), 1e-13, 1000).unwrap();
        solve_selection(&th, C64::new(alpha, 0.0), &sel.parse().unwrap(), &DeformOptions::default()).unwrap()
    }

    fn gaussian(z: C64) -> C64 {
        (-(z * z) / 0.09).exp() * 0.3
    }

    #[test]
    fn zero_density_gives_zero() {
        let k = Contour::real_line(&make_real_grid(4.0, 8, 16).unwrap());
        let zero = vec![C64::new(0.0, 0.0); k.len()];
        let cont = |p: &[C64]| Ok(vec![C64::new(0.0, 0.0); p.len()]);
        let d = Density { values: &zero, continuation: &cont, singular: &[], reach: 1.0 };
        let a = a_functional(&k, &zero, &d, 3.0).unwrap();
        assert_eq!(a.value, C64::new(0.0, 0.0));
        assert_eq!(c0_functional(&k, &zero, Coupling::Finite(2.0)).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn narrow_gaussian_methods_agree() {
        let k = Contour::real_line(&make_real_grid(4.0, 32, 16).unwrap());
        let nu: Vec<C64> = k.nodes.iter().map(|z| gaussian(*z)).collect();
        let cont = |p: &[C64]| Ok(p.iter().map(|z| gaussian(*z)).collect());
        let d = Density { values: &nu, continuation: &cont, singular: &[], reach: 1.0 };
        let zero = vec![C64::new(0.0, 0.0); k.len()];
        let a = a_functional(&k, &zero, &d, 0.0).unwrap();
        assert!((a.double - a.double_offset).norm() < 1e-8, "{a:?}");
        // linear term alone reproduces −ix∫ν
        let b = a_functional(&k, &zero, &d, 2.0).unwrap();
        let integral: C64 = k.integrate(&nu);
        assert!((b.linear + I * 2.0 * integral).norm() < 1e-14);
    }

    #[test]
    fn c0_is_symmetric_and_refinement_stable() {
        let s = deform(Coupling::Finite(10.0), 4.0, 2.0, 0.1, "");
        let k = Contour::real_line(&s.thermal.grid);
        let z = z_along(&s, &k.nodes).unwrap();
        let c0 = c0_functional(&k, &z, Coupling::Finite(10.0)).unwrap();
        // swapping the order of integration
        let mut swapped = C64::new(0.0, 0.0);
        for k1 in 0..k.len() {
            for j in 0..k.len() {
                let d = k.nodes[j] - k.nodes[k1] - I * 10.0;
                swapped += k.weights[k1] * z[k1] * k.weights[j] * z[j] / (d * d);
            }
        }
        assert!((c0 - swapped).norm() < 1e-14);
        let fine = k.refined();
        let zf = z_along(&s, &fine.nodes).unwrap();
        let c0f = c0_functional(&fine, &zf, Coupling::Finite(10.0)).unwrap();
        assert!((c0 - c0f).norm() < 1e-9, "{c0} vs {c0f}");
    }

    #[test]
    fn normalization_at_zero_alpha() {
        let s = deform(Coupling::Finite(10.0), 4.0, 2.0, 0.0, "");
        let r = amplitude_b_checked(&s).unwrap();
        assert!(r.alpha_limit);
        assert!((r.b - 1.0).norm() < 1e-6, "{r:?}");
        assert!(r.theta_spread.unwrap() < 1e-8, "{r:?}");
        let rho1 = s.thermal.rho_t_at(r.theta1).unwrap() * 2.0 * PI;
        let rho2 = s.thermal.rho_t_at(r.theta2).unwrap() * 2.0 * PI;
        assert!((r.det_u1 / r.det_k_eps - rho1).norm() < 1e-6, "{} vs {rho1}", r.det_u1 / r.det_k_eps);
        assert!((r.det_u2 / r.det_k_u - rho2).norm() < 1e-6);
        assert!((r.pref1 + 1.0 / rho1).norm() < 1e-6);
    }

    #[test]
    fn theta_independence_at_finite_alpha() {
        let s = deform(Coupling::Finite(10.0), 4.0, 2.0, 0.1, "");
        let r = amplitude_b_checked(&s).unwrap();
        assert!(r.theta_spread.unwrap() < 1e-8, "{r:?}");
        assert!(r.min_denominator > 1e-3);
    }

    #[test]
    fn free_fermion_amplitude_is_exponential_of_double_integral() {
        let s = deform(Coupling::Infinite, 1.0, 1.0, 0.1, "");
        let r = amplitude_b_checked(&s).unwrap();
        assert!((r.b - r.a_double.exp()).norm() < 1e-14);
        assert!((r.a_double - r.a_double_offset).norm() < 1e-9);
        let s0 = deform(Coupling::Infinite, 1.0, 1.0, 0.0, "");
        assert!((amplitude_b_checked(&s0).unwrap().b - 1.0).norm() < 1e-14);
    }

    #[test]
    fn conjugate_pair_amplitude_is_real_at_zero_alpha() {
        let s = deform(Coupling::Finite(10.0), 4.0, 2.0, 0.0, "+R1;-R1");
        let r = amplitude_b(&s, theta_choices(&s)[0].0, theta_choices(&s)[0].1).unwrap();
        // the (e^{2πiα}−1)² prefactor vanishes
        assert_eq!(r.b, C64::new(0.0, 0.0));
        let s = deform(Coupling::Finite(10.0), 4.0, 2.0, 0.1, "+R1;-R1");
        let r = amplitude_b_checked(&s).unwrap();
        assert!(r.b.is_finite() && r.b.norm() > 0.0);
        assert!(r.theta_spread.unwrap() < 1e-6, "{r:?}");
    }

    #[test]
    fn asymptotic_sum_of_leading_term() {
        let terms = [(C64::new(0.0, 0.0), C64::new(1.0, 0.0))];
        for x in [0.0, 5.0, 50.0] {
            assert_eq!(asymptotic_sum(&terms, x), C64::new(1.0, 0.0));
        }
    }
}
