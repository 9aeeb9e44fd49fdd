use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Composite Gauss–Legendre grid on [-Λ, Λ].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct QuadGrid {
    pub cutoff: f64,
    pub panels: usize,
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn make_real_grid(cutoff: f64, panels: usize, order: usize) -> Result<QuadGrid> {
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidInput(format!("cutoff must be positive, got {cutoff}")));
    }
    if panels == 0 || order < 2 {
        return Err(Error::InvalidInput(format!(
            "need panels >= 1 and order >= 2, got {panels} and {order}"
        )));
    }
    let (x, w) = gauss_legendre(order);
    let h = 2.0 * cutoff / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = -cutoff + p as f64 * h;
        for k in 0..order {
            nodes.push(a + 0.5 * h * (x[k] + 1.0));
            weights.push(0.5 * h * w[k]);
        }
    }
    Ok(QuadGrid { cutoff, panels, order, nodes, weights })
}

impl QuadGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_width(&self) -> f64 {
        2.0 * self.cutoff / self.panels as f64
    }

    pub fn refined(&self) -> QuadGrid {
        make_real_grid(self.cutoff, 2 * self.panels, self.order).expect("valid grid")
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let g = make_real_grid(1.0, 1, 2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((g.nodes[0] + s).abs() < 1e-15 && (g.nodes[1] - s).abs() < 1e-15);
        assert!((g.weights[0] - 1.0).abs() < 1e-15 && (g.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_exactness() {
        for order in [3usize, 8, 16, 21] {
            let g = make_real_grid(1.5, 3, order).unwrap();
            let deg = 2 * order - 1;
            let f: Vec<f64> = g.nodes.iter().map(|x| x.powi(deg as i32 - 1) + x.powi(2)).collect();
            let exact = 2.0 * 1.5f64.powi(deg as i32) / deg as f64 + 2.0 * 1.5f64.powi(3) / 3.0;
            assert!((g.integrate(&f) - exact).abs() < 1e-13 * exact.max(1.0), "order {order}");
        }
    }

    #[test]
    fn gaussian_integral() {
        let g = make_real_grid(10.0, 40, 16).unwrap();
        let f: Vec<f64> = g.nodes.iter().map(|x| (-x * x).exp()).collect();
        assert!((g.integrate(&f) - PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn invalid_sizes() {
        assert!(make_real_grid(0.0, 1, 4).is_err());
        assert!(make_real_grid(1.0, 0, 4).is_err());
        assert!(make_real_grid(1.0, 2, 1).is_err());
    }
}
