use num_complex::Complex64;
use std::f64::consts::PI;

use super::quad::{gauss_legendre, QuadGrid};
use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Panel {
    pub a: C64,
    pub b: C64,
    pub segment: usize,
}

impl Panel {
    pub fn len(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn distance(&self, w: C64) -> f64 {
        segment_distance(self.a, self.b, w)
    }

    /// Point at local parameter t in [-1, 1].
    pub fn point(&self, t: f64) -> C64 {
        self.a + (self.b - self.a) * (0.5 * (t + 1.0))
    }
}

pub fn segment_distance(a: C64, b: C64, w: C64) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return (w - a).norm();
    }
    let t = ((w - a) * d.conj()).re / l2;
    let t = t.clamp(0.0, 1.0);
    (w - (a + d * t)).norm()
}

/// How a polyline is cut into Gauss–Legendre panels.
#[derive(Clone, Debug)]
pub struct PanelRule {
    pub order: usize,
    pub max_len: f64,
    /// Panels are split until their length is below `ratio` times the distance to every point here.
    pub singular: Vec<C64>,
    pub ratio: f64,
    pub min_len: f64,
}

impl PanelRule {
    pub fn uniform(max_len: f64, order: usize) -> Self {
        PanelRule { order, max_len, singular: Vec::new(), ratio: 1.0, min_len: 1e-9 }
    }
}

/// Oriented piecewise-linear contour with composite Gauss–Legendre nodes.
/// Weights carry the direction, so `Σ w_k f(x_k)` approximates `∫ f(λ) dλ`.
#[derive(Clone, Debug)]
pub struct Contour {
    pub vertices: Vec<C64>,
    pub closed: bool,
    pub order: usize,
    pub panels: Vec<Panel>,
    pub nodes: Vec<C64>,
    pub weights: Vec<C64>,
    ref_nodes: Vec<f64>,
    ref_weights: Vec<f64>,
    bary: Vec<f64>,
}

impl Contour {
    pub fn real_line(grid: &QuadGrid) -> Contour {
        let h = grid.panel_width();
        let panels = (0..grid.panels)
            .map(|p| {
                let a = -grid.cutoff + p as f64 * h;
                Panel { a: C64::new(a, 0.0), b: C64::new(a + h, 0.0), segment: 0 }
            })
            .collect();
        let vertices = vec![C64::new(-grid.cutoff, 0.0), C64::new(grid.cutoff, 0.0)];
        Contour::from_panels(vertices, false, grid.order, panels)
    }

    pub fn polyline(vertices: Vec<C64>, closed: bool, rule: &PanelRule) -> Result<Contour> {
        if vertices.len() < 2 {
            return Err(Error::InvalidInput("a contour needs at least two vertices".into()));
        }
        if closed && vertices.first() != vertices.last() {
            return Err(Error::InvalidInput("closed contour must end at its first vertex".into()));
        }
        if rule.order < 2 || !(rule.max_len > 0.0) {
            return Err(Error::InvalidInput("invalid panel rule".into()));
        }
        let mut panels = Vec::new();
        for (s, pair) in vertices.windows(2).enumerate() {
            if pair[0] == pair[1] {
                continue;
            }
            split_segment(pair[0], pair[1], s, rule, &mut panels)?;
        }
        Ok(Contour::from_panels(vertices, closed, rule.order, panels))
    }

    /// Counterclockwise rectangle with corners `lo` (bottom-left) and `hi` (top-right).
    pub fn rectangle(lo: C64, hi: C64, rule: &PanelRule) -> Result<Contour> {
        if !(hi.re > lo.re && hi.im > lo.im) {
            return Err(Error::InvalidInput(format!("degenerate rectangle {lo} .. {hi}")));
        }
        let v = vec![lo, C64::new(hi.re, lo.im), hi, C64::new(lo.re, hi.im), lo];
        Contour::polyline(v, true, rule)
    }

    pub fn from_panels(vertices: Vec<C64>, closed: bool, order: usize, panels: Vec<Panel>) -> Contour {
        let (t, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(panels.len() * order);
        let mut weights = Vec::with_capacity(panels.len() * order);
        for p in &panels {
            let half = (p.b - p.a) * 0.5;
            for k in 0..order {
                nodes.push(p.point(t[k]));
                weights.push(half * w[k]);
            }
        }
        let bary = bary_weights(&t);
        Contour { vertices, closed, order, panels, nodes, weights, ref_nodes: t, ref_weights: w, bary }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_of(&self, node: usize) -> &Panel {
        &self.panels[node / self.order]
    }

    /// Unit tangent at a node.
    pub fn tangent(&self, node: usize) -> C64 {
        let p = self.panel_of(node);
        let d = p.b - p.a;
        d / d.norm()
    }

    pub fn reference_rule(&self) -> (&[f64], &[f64]) {
        (&self.ref_nodes, &self.ref_weights)
    }

    pub fn integrate(&self, f: &[C64]) -> C64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn integrate_fn<F: FnMut(C64) -> C64>(&self, mut f: F) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    /// Every panel split in two.
    pub fn refined(&self) -> Contour {
        let mut panels = Vec::with_capacity(2 * self.panels.len());
        for p in &self.panels {
            let m = (p.a + p.b) * 0.5;
            panels.push(Panel { a: p.a, b: m, segment: p.segment });
            panels.push(Panel { a: m, b: p.b, segment: p.segment });
        }
        Contour::from_panels(self.vertices.clone(), self.closed, self.order, panels)
    }

    pub fn distance(&self, w: C64) -> f64 {
        self.vertices.windows(2).map(|s| segment_distance(s[0], s[1], w)).fold(f64::INFINITY, f64::min)
    }

    /// Distance to the contour divided by the length of the nearest panel.
    pub fn relative_distance(&self, w: C64) -> f64 {
        let mut best = f64::INFINITY;
        let mut rel = f64::INFINITY;
        for p in &self.panels {
            let d = p.distance(w);
            if d < best {
                best = d;
                rel = d / p.len();
            }
        }
        rel
    }

    /// Panelwise spectral derivative d/dλ of nodal values.
    pub fn differentiate(&self, f: &[C64]) -> Vec<C64> {
        let q = self.order;
        let d = diff_matrix(&self.ref_nodes);
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        for (p, panel) in self.panels.iter().enumerate() {
            let scale = C64::new(2.0, 0.0) / (panel.b - panel.a);
            for i in 0..q {
                let mut s = C64::new(0.0, 0.0);
                for j in 0..q {
                    s += f[p * q + j] * d[i * q + j];
                }
                out[p * q + i] = s * scale;
            }
        }
        out
    }

    /// Barycentric interpolation of nodal values at local parameter t of a panel.
    pub fn interpolate(&self, f: &[C64], panel: usize, t: f64) -> C64 {
        let q = self.order;
        let bw = &self.bary;
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for j in 0..q {
            let dt = t - self.ref_nodes[j];
            if dt == 0.0 {
                return f[panel * q + j];
            }
            let c = bw[j] / dt;
            num += f[panel * q + j] * c;
            den += c;
        }
        num / den
    }
}

fn split_segment(a: C64, b: C64, seg: usize, rule: &PanelRule, out: &mut Vec<Panel>) -> Result<()> {
    let len = (b - a).norm();
    let near = rule.singular.iter().map(|s| segment_distance(a, b, *s)).fold(f64::INFINITY, f64::min);
    if len <= rule.max_len && len <= rule.ratio * near {
        out.push(Panel { a, b, segment: seg });
        return Ok(());
    }
    if len < rule.min_len {
        return Err(Error::CannotSeparate(format!(
            "panel refinement below {:e} near {}",
            rule.min_len,
            (a + b) * 0.5
        )));
    }
    let m = (a + b) * 0.5;
    split_segment(a, m, seg, rule, out)?;
    split_segment(m, b, seg, rule, out)
}

fn bary_weights(t: &[f64]) -> Vec<f64> {
    (0..t.len())
        .map(|j| {
            let p: f64 = (0..t.len()).filter(|&k| k != j).map(|k| t[j] - t[k]).product();
            1.0 / p
        })
        .collect()
}

fn diff_matrix(t: &[f64]) -> Vec<f64> {
    let q = t.len();
    let w = bary_weights(t);
    let mut d = vec![0.0; q * q];
    for i in 0..q {
        let mut diag = 0.0;
        for j in 0..q {
            if i != j {
                let v = (w[j] / w[i]) / (t[i] - t[j]);
                d[i * q + j] = v;
                diag -= v;
            }
        }
        d[i * q + i] = diag;
    }
    d
}

/// Shift imaginary parts by multiples of 2π so consecutive values differ by less than π.
pub fn unwrap_imag(values: &mut [C64]) {
    for k in 1..values.len() {
        let d = values[k].im - values[k - 1].im;
        let n = (d / (2.0 * PI)).round();
        values[k].im -= n * 2.0 * PI;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::make_real_grid;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn nodes_lie_on_segments() {
        let v = vec![c(-3.0, 0.0), c(-1.0, 0.0), c(-1.0, 1.5), c(1.0, 1.5), c(1.0, 0.0), c(3.0, 0.0)];
        let k = Contour::polyline(v.clone(), false, &PanelRule::uniform(0.4, 8)).unwrap();
        for (n, x) in k.nodes.iter().enumerate() {
            let p = k.panel_of(n);
            assert!(segment_distance(v[p.segment], v[p.segment + 1], *x) < 1e-14);
        }
        // ∫ dλ over an open contour is the endpoint difference
        let total = k.integrate(&vec![c(1.0, 0.0); k.len()]);
        assert!((total - c(6.0, 0.0)).norm() < 1e-13);
    }

    #[test]
    fn closed_rectangle_integrates_analytic_to_zero() {
        let r = Contour::rectangle(c(-1.0, -1.0), c(2.0, 0.5), &PanelRule::uniform(0.5, 12)).unwrap();
        let s = r.integrate_fn(|z| (z * z).exp() + z.powu(5));
        assert!(s.norm() < 1e-12);
        let w = r.integrate_fn(|z| 1.0 / (z - c(0.3, 0.1)));
        assert!((w - c(0.0, 2.0 * PI)).norm() < 1e-10);
    }

    #[test]
    fn refinement_near_singular_points() {
        let mut rule = PanelRule::uniform(1.0, 8);
        rule.singular = vec![c(0.0, 0.01)];
        rule.ratio = 1.0;
        let k = Contour::polyline(vec![c(-2.0, 0.0), c(2.0, 0.0)], false, &rule).unwrap();
        let shortest = k.panels.iter().map(|p| p.len()).fold(f64::INFINITY, f64::min);
        assert!(shortest <= 0.01 + 1e-15);
        let s = k.integrate_fn(|z| 1.0 / (z - c(0.0, 0.01)));
        let exact = ((c(2.0, -0.01)) / c(-2.0, -0.01)).ln();
        assert!((s - exact).norm() < 1e-10);
    }

    #[test]
    fn spectral_derivative_and_interpolation() {
        let g = make_real_grid(2.0, 4, 16).unwrap();
        let k = Contour::real_line(&g);
        let f: Vec<C64> = k.nodes.iter().map(|z| (z * c(0.5, 0.3)).sin()).collect();
        let d = k.differentiate(&f);
        for (z, dv) in k.nodes.iter().zip(&d) {
            assert!((dv - c(0.5, 0.3) * (z * c(0.5, 0.3)).cos()).norm() < 1e-11);
        }
        let x = k.panels[1].point(0.123);
        assert!((k.interpolate(&f, 1, 0.123) - (x * c(0.5, 0.3)).sin()).norm() < 1e-14);
    }

    #[test]
    fn unwrap_removes_jumps() {
        let mut v: Vec<C64> = (0..50).map(|k| c(0.0, 0.3 * k as f64)).collect();
        let target = v.clone();
        for z in v.iter_mut() {
            *z = z.exp().ln();
        }
        unwrap_imag(&mut v);
        for (a, b) in v.iter().zip(&target) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
