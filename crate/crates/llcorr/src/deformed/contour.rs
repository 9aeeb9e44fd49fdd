use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DeformedState;
use crate::error::{Error, Result};
use crate::numerics::{count_zeros_logderiv, count_zeros_polygon, log1p_exp, segment_distance, unwrap_imag, Contour, PanelRule};
use crate::poles::{locate_poles, pole_logderiv};
use crate::thermo::Coupling;

type C64 = Complex64;

/// Detour of the contour around one root: a straight channel from the real axis to a square head.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tower {
    pub root: C64,
    pub upper: bool,
    pub foot: f64,
    pub channel_half_width: f64,
    pub head_half_size: f64,
    /// Open polyline from the left foot to the right foot.
    pub vertices: Vec<C64>,
}

impl Tower {
    pub fn left_foot(&self) -> f64 {
        self.vertices[0].re
    }

    pub fn right_foot(&self) -> f64 {
        self.vertices[self.vertices.len() - 1].re
    }

    /// The tower region closed along the real axis.
    pub fn region(&self) -> Vec<C64> {
        let mut v = self.vertices.clone();
        v.push(self.vertices[0]);
        v
    }
}

#[derive(Clone, Debug)]
pub struct DeformedContour {
    pub contour: Contour,
    pub towers: Vec<Tower>,
    /// Zeros of 1+e^{−u/T} near the roots that the contour must not cross.
    pub holes: Vec<C64>,
    /// Fermi-weight poles near the roots.
    pub poles: Vec<C64>,
    /// log(1+e^{−u/T}) and log(1+e^{−ε/T}) at the contour nodes, continuous from −Λ.
    pub log_u: Vec<C64>,
    pub log_eps: Vec<C64>,
}

/// Zeros of 1+e^{−u/T} inside a rectangle that are not selected roots.
pub fn hole_solutions(state: &DeformedState, lo: C64, hi: C64) -> Result<Vec<C64>> {
    let g = |z: C64| state.zero_logderiv(z);
    let total = count_zeros_logderiv(g, lo, hi)?;
    let mut found = Vec::new();
    if total > 0 {
        subdivide(state, lo, hi, total, 0, &mut found)?;
    }
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    found.dedup_by(|a, b| (*a - *b).norm() < 1e-8);
    if found.len() as i64 != total {
        return Err(Error::AmbiguousCount { value: found.len() as f64 });
    }
    let roots = state.roots();
    Ok(found.into_iter().filter(|w| roots.iter().all(|s| (s - w).norm() > 1e-8)).collect())
}

fn subdivide(state: &DeformedState, lo: C64, hi: C64, count: i64, depth: usize, out: &mut Vec<C64>) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    if count == 1 {
        let mid = (lo + hi) * 0.5;
        if let Ok(z) = state.refine_zero(mid) {
            if z.re > lo.re && z.re < hi.re && z.im > lo.im && z.im < hi.im {
                out.push(z);
                return Ok(());
            }
        }
    }
    if depth > 40 {
        return Err(Error::AmbiguousCount { value: count as f64 });
    }
    let wide = hi.re - lo.re >= hi.im - lo.im;
    // cut slightly off-centre, moving the cut if it hits a zero
    for f in [0.5037, 0.4611, 0.5519, 0.4203] {
        let (a, b) = if wide {
            let x = lo.re + f * (hi.re - lo.re);
            ((lo, C64::new(x, hi.im)), (C64::new(x, lo.im), hi))
        } else {
            let y = lo.im + f * (hi.im - lo.im);
            ((lo, C64::new(hi.re, y)), (C64::new(lo.re, y), hi))
        };
        let g = |z: C64| state.zero_logderiv(z);
        let (na, nb) = match (count_zeros_logderiv(g, a.0, a.1), count_zeros_logderiv(g, b.0, b.1)) {
            (Ok(na), Ok(nb)) => (na, nb),
            _ => continue,
        };
        if na + nb != count {
            continue;
        }
        subdivide(state, a.0, a.1, na, depth + 1, out)?;
        return subdivide(state, b.0, b.1, nb, depth + 1, out);
    }
    Err(Error::AmbiguousCount { value: count as f64 })
}

fn search_box(s: C64, cap: f64) -> (C64, C64) {
    let y = s.im.abs();
    let w = (2.0 * y).max(2.0);
    let top = (y + y.max(1.0)).min(0.95 * cap);
    let bottom = 0.05 * y;
    if s.im > 0.0 {
        (C64::new(s.re - w, bottom), C64::new(s.re + w, top))
    } else {
        (C64::new(s.re - w, -top), C64::new(s.re + w, -bottom))
    }
}

fn holes_near(state: &DeformedState, s: C64) -> Result<Vec<C64>> {
    let (lo, hi) = search_box(s, state.u_cap(s.im > 0.0));
    let mut last = None;
    for grow in [1.0, 1.013, 0.981, 1.029] {
        let mid = (lo + hi) * 0.5;
        let half = (hi - lo) * 0.5;
        let (l, h) = (mid - C64::new(half.re * grow, half.im), mid + C64::new(half.re * grow, half.im));
        let (l, h) = if s.im > 0.0 {
            (C64::new(l.re, lo.im * grow), C64::new(h.re, hi.im))
        } else {
            (C64::new(l.re, lo.im), C64::new(h.re, hi.im * grow))
        };
        match hole_solutions(state, l, h) {
            Ok(v) => return Ok(v),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

pub(crate) fn segments_cross(a: C64, b: C64, c: C64, d: C64) -> bool {
    // orientations within roundoff of zero count as collinear, not as a side
    let cross = |o: C64, p: C64, q: C64| {
        let v = ((p - o).conj() * (q - o)).im;
        if v.abs() <= 1e-12 * (p - o).norm() * (q - o).norm() { 0.0 } else { v }
    };
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub(crate) fn segment_gap(a: C64, b: C64, c: C64, d: C64) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    segment_distance(a, b, c)
        .min(segment_distance(a, b, d))
        .min(segment_distance(c, d, a))
        .min(segment_distance(c, d, b))
}

/// Upper-half tower around `s` avoiding `excluded`; `taken` are channels already placed as
/// (foot, root, half-width), all in the upper half after reflection. The tower must fit in (−span, span)
/// and stay below Im λ = `cap`.
fn plan_tower(
    s: C64,
    excluded: &[C64],
    taken: &[(C64, C64, f64)],
    feet: &[(f64, f64)],
    span: f64,
    cap: f64,
) -> Option<(C64, f64, f64)> {
    let d_head = excluded.iter().map(|e| (e - s).norm()).fold(f64::INFINITY, f64::min);
    let mut best: Option<(C64, f64, f64)> = None;
    for deg in [0.0, 12.0, -12.0, 25.0, -25.0, 38.0, -38.0, 50.0, -50.0, 60.0, -60.0] {
        let phi: f64 = (deg as f64).to_radians();
        let foot = C64::new(s.re + s.im * phi.tan(), 0.0);
        let e = (s - foot) / (s - foot).norm();
        let n = C64::i() * e;
        let lowest = e.im.abs() + n.im.abs();
        let mut a = (0.5 * d_head).min(0.6 * s.im / lowest).min(0.9 * (cap - s.im) / lowest);
        let d_seg = excluded.iter().map(|x| segment_distance(foot, s, *x)).fold(f64::INFINITY, f64::min);
        let mut b = a.min(0.5 * d_seg);
        for &(f2, s2, b2) in taken {
            let gap = segment_gap(foot, s, f2, s2);
            b = b.min(0.4 * (gap - b2).max(0.0));
            a = a.min(0.4 * ((s2 - s).norm() - b2).max(0.0));
        }
        b = b.min(a);
        let half_foot = b / e.im.abs();
        for &(l, r) in feet {
            if foot.re + half_foot > l - b && foot.re - half_foot < r + b {
                b = 0.0;
            }
        }
        if b > 0.0 {
            let v = tower_vertices(s, foot, b.min(0.5 * a), a);
            if v.iter().any(|z| z.re.abs() >= span) {
                b = 0.0;
            }
        }
        let better = match best {
            None => true,
            Some((_, bb, _)) => b > 1.2 * bb,
        };
        if b > 0.0 && better {
            best = Some((foot, b, a));
        }
    }
    best
}

fn tower_vertices(s: C64, foot: C64, b: f64, a: f64) -> Vec<C64> {
    let e = (s - foot) / (s - foot).norm();
    let n = C64::i() * e;
    let wf = b / e.im;
    let head = [
        s - e * a + n * b,
        s - e * a + n * a,
        s + e * a + n * a,
        s + e * a - n * a,
        s - e * a - n * a,
        s - e * a - n * b,
    ];
    let mut v = vec![foot - wf];
    for p in head {
        if (p - v[v.len() - 1]).norm() > 1e-15 {
            v.push(p);
        }
    }
    v.push(foot + wf);
    v
}

/// Builds Ĉ: the real segment [−Λ, Λ] with a detour around each selected root, so that only the
/// selected roots lie between ℝ and Ĉ. Each detour is audited by the argument principle.
pub fn build_contour(state: &DeformedState) -> Result<DeformedContour> {
    let grid = &state.thermal.grid;
    let lambda = grid.cutoff;
    let roots = state.roots();
    let cap = state.params.strip_cap();
    let (poles, holes) = if roots.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let m_max = state.selection.plus.iter().chain(&state.selection.minus).map(|k| k.m).max().unwrap_or(0) + 2;
        let table = locate_poles(&state.thermal, m_max)?;
        let mut holes: Vec<C64> = Vec::new();
        for &s in &roots {
            for w in holes_near(state, s)? {
                if holes.iter().all(|h| (h - w).norm() > 1e-8) {
                    holes.push(w);
                }
            }
        }
        (table.points(), holes)
    };

    let mut order: Vec<usize> = (0..roots.len()).collect();
    order.sort_by(|&i, &j| roots[i].im.abs().total_cmp(&roots[j].im.abs()));
    let mut towers: Vec<Tower> = Vec::new();
    let mut feet: Vec<(f64, f64)> = Vec::new();
    for &i in &order {
        let s = roots[i];
        let upper = s.im > 0.0;
        let reflect = |z: C64| if upper { z } else { z.conj() };
        let sr = reflect(s);
        let excluded: Vec<C64> = poles
            .iter()
            .chain(&holes)
            .chain(roots.iter().filter(|r| (*r - s).norm() > 0.0))
            .filter(|z| z.im * s.im > 0.0)
            .map(|z| reflect(*z))
            .collect();
        let taken: Vec<(C64, C64, f64)> = towers
            .iter()
            .filter(|t| t.upper == upper)
            .map(|t| (C64::new(t.foot, 0.0), reflect(t.root), t.channel_half_width))
            .collect();
        let (foot, b, a) = plan_tower(sr, &excluded, &taken, &feet, lambda, state.u_cap(upper))
            .ok_or_else(|| Error::CannotSeparate(format!("no detour fits around root {s}")))?;
        // a head much wider than its channel avoids sliver segments at the junction
        let b = b.min(0.5 * a);
        if b < 1e-6 {
            return Err(Error::CannotSeparate(format!("detour around {s} narrower than 1e-6")));
        }
        let verts: Vec<C64> = tower_vertices(sr, foot, b, a).into_iter().map(reflect).collect();
        let (l, r) = (verts[0].re, verts[verts.len() - 1].re);
        if l <= -lambda || r >= lambda {
            return Err(Error::CannotSeparate(format!("detour around {s} leaves [−Λ, Λ]")));
        }
        feet.push((l, r));
        towers.push(Tower { root: s, upper, foot: foot.re, channel_half_width: b, head_half_size: a, vertices: verts });
    }
    towers.sort_by(|a, b| a.foot.total_cmp(&b.foot));

    let mut vertices = vec![C64::new(-lambda, 0.0)];
    for t in &towers {
        vertices.extend(t.vertices.iter().copied());
    }
    vertices.push(C64::new(lambda, 0.0));
    check_simple(&vertices)?;

    let mut singular: Vec<C64> = poles.iter().chain(&holes).chain(&roots).copied().collect();
    // branch points of the phase terms θ(ŝ − λ)
    if let Coupling::Finite(c) = state.params.c {
        singular.extend(roots.iter().flat_map(|r| [r + C64::new(0.0, c), r - C64::new(0.0, c)]));
    }
    singular.retain(|z| z.im.abs() < cap);
    let rule = PanelRule {
        order: grid.order,
        max_len: grid.panel_width(),
        singular,
        ratio: 0.5,
        min_len: 1e-9,
    };
    let contour = Contour::polyline(vertices, false, &rule)?;

    for t in &towers {
        audit_tower(state, t)?;
    }

    let tt = state.params.t;
    let mut log_u = Vec::with_capacity(contour.len());
    let mut log_eps = Vec::with_capacity(contour.len());
    for &z in &contour.nodes {
        log_u.push(log1p_exp(-state.u_at(z)? / tt));
        log_eps.push(log1p_exp(-state.thermal.epsilon_at(z)? / tt));
    }
    unwrap_imag(&mut log_u);
    unwrap_imag(&mut log_eps);
    for (name, l) in [("u", &log_u), ("ε", &log_eps)] {
        let (first, last) = (l[0], l[l.len() - 1]);
        if first.norm() > 1e-6 || last.norm() > 1e-6 {
            return Err(Error::BranchJump(format!("log-weight of {name} on the contour: {first} .. {last}")));
        }
    }
    Ok(DeformedContour { contour, towers, holes, poles, log_u, log_eps })
}

pub(crate) fn check_simple(v: &[C64]) -> Result<()> {
    for i in 0..v.len() - 1 {
        for j in i + 2..v.len() - 1 {
            if segments_cross(v[i], v[i + 1], v[j], v[j + 1]) {
                return Err(Error::CannotSeparate(format!("contour self-intersects near {}", v[i])));
            }
        }
    }
    Ok(())
}

/// The tower must enclose exactly its root among the zeros of 1+e^{−u/T}, and no Fermi-weight pole.
fn audit_tower(state: &DeformedState, t: &Tower) -> Result<()> {
    let region = t.region();
    // upper towers are traversed clockwise
    let sign = if t.upper { -1 } else { 1 };
    let zeros = count_zeros_polygon(|z| state.zero_logderiv(z), &region)? * sign;
    let poles = count_zeros_polygon(|z| pole_logderiv(&state.thermal, z), &region)? * sign;
    if zeros != 1 || poles != 0 {
        return Err(Error::CannotSeparate(format!(
            "detour around {} encloses {zeros} zeros and {poles} poles",
            t.root
        )));
    }
    Ok(())
}

impl DeformedContour {
    pub fn nodes(&self) -> &[C64] {
        &self.contour.nodes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformed::{solve_selection, DeformOptions};
    use crate::thermo::{solve_epsilon, Coupling, GridSpec, ModelParams};
    use std::f64::consts::PI;

    fn solve(c: Coupling, h: f64, t: f64, alpha: f64, sel: &str) -> DeformedState {
        let p = ModelParams::new(c, h, t, C64::new(0.0, 0.0)).unwrap();
        let th = solve_epsilon(&p, &GridSpec::default(), 1e-13, 1000).unwrap();
        solve_selection(&th, C64::new(alpha, 0.0), &sel.parse().unwrap(), &DeformOptions::default()).unwrap()
    }

    #[test]
    fn empty_selection_keeps_real_axis() {
        let d = solve(Coupling::Finite(10.0), 4.0, 2.0, 0.1, "");
        let k = build_contour(&d).unwrap();
        assert!(k.towers.is_empty());
        assert!(k.contour.nodes.iter().all(|z| z.im == 0.0));
        assert_eq!(k.contour.vertices, vec![C64::new(-d.thermal.grid.cutoff, 0.0), C64::new(d.thermal.grid.cutoff, 0.0)]);
    }

    #[test]
    fn free_fermion_holes_are_the_other_lattice_points() {
        let d = solve(Coupling::Infinite, 1.0, 1.0, 0.1, "+R1;-R1");
        let ha = d.params.h_alpha();
        let holes = hole_solutions(&d, C64::new(-4.0, 0.2), C64::new(4.0, 3.5)).unwrap();
        let lattice: Vec<C64> = (0..8)
            .flat_map(|m| {
                let k = C64::new(0.0, PI * (2 * m + 1) as f64);
                [(ha + k).sqrt(), -(ha - k).sqrt()]
            })
            .filter(|z| z.im > 0.2 && z.im < 3.5 && z.re.abs() < 4.0 && (z - d.plus[0]).norm() > 1e-6)
            .collect();
        assert_eq!(holes.len(), lattice.len(), "{holes:?}");
        for w in &lattice {
            assert!(holes.iter().any(|h| (h - w).norm() < 1e-10));
        }
        assert!(hole_solutions(&d, C64::new(5.0, 0.1), C64::new(6.0, 0.3)).unwrap().is_empty());
    }

    #[test]
    fn single_pair_contour_passes_audit() {
        let d = solve(Coupling::Finite(10.0), 4.0, 2.0, 0.0, "+R1;-R1");
        let k = build_contour(&d).unwrap();
        assert_eq!(k.towers.len(), 2);
        assert!(k.towers.iter().all(|t| t.channel_half_width > 1e-3));
        let lambda = d.thermal.grid.cutoff;
        let total: C64 = k.contour.weights.iter().sum();
        assert!((total - 2.0 * lambda).norm() < 1e-12);
    }
}
