use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{fixed_point, make_real_grid, nystrom_det, FixedPointOptions, QuadGrid};

type C64 = Complex64;

/// Entire functions used by the toys, with Taylor data at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Entire {
    Constant(f64),
    /// scale·e^{rate·t}
    Exp { scale: f64, rate: f64 },
    Identity,
}

impl Entire {
    pub fn value(&self, t: C64) -> C64 {
        match *self {
            Entire::Constant(b) => C64::new(b, 0.0),
            Entire::Exp { scale, rate } => (t * rate).exp() * scale,
            Entire::Identity => t,
        }
    }

    pub fn derivative(&self, t: C64) -> C64 {
        match *self {
            Entire::Constant(_) => C64::new(0.0, 0.0),
            Entire::Exp { scale, rate } => (t * rate).exp() * (scale * rate),
            Entire::Identity => C64::new(1.0, 0.0),
        }
    }

    /// Derivatives of orders 0..n at the origin.
    pub fn derivatives_at_zero(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|q| match *self {
                Entire::Constant(b) => if q == 0 { b } else { 0.0 },
                Entire::Exp { scale, rate } => scale * rate.powi(q as i32),
                Entire::Identity => if q == 1 { 1.0 } else { 0.0 },
            })
            .collect()
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Series toy on [lo, hi] with separable kernel ξ(λ,μ) = a(λ)·b(μ).
#[derive(Clone)]
pub struct ToyLagrangeSpec {
    pub lo: f64,
    pub hi: f64,
    pub f: Entire,
    pub a: RealFn,
    pub b: RealFn,
    pub h1: RealFn,
    pub outer: Entire,
    pub panels: usize,
}

impl ToyLagrangeSpec {
    /// f(t) = 0.2e^t, ξ ≡ 0.5 on [0,1], h₁ ≡ 1, F(s) = e^s.
    pub fn exponential() -> Self {
        ToyLagrangeSpec {
            lo: 0.0,
            hi: 1.0,
            f: Entire::Exp { scale: 0.2, rate: 1.0 },
            a: Arc::new(|_| 0.5),
            b: Arc::new(|_| 1.0),
            h1: Arc::new(|_| 1.0),
            outer: Entire::Exp { scale: 1.0, rate: 1.0 },
            panels: 4,
        }
    }

    fn grid(&self) -> Result<QuadGrid> {
        if !(self.hi > self.lo) {
            return Err(Error::InvalidInput(format!("empty interval [{}, {}]", self.lo, self.hi)));
        }
        let half = 0.5 * (self.hi - self.lo);
        let mut g = make_real_grid(half, self.panels, 16)?;
        let mid = 0.5 * (self.hi + self.lo);
        g.nodes.iter_mut().for_each(|x| *x += mid);
        Ok(g)
    }

    fn xi(&self, l: f64, m: f64) -> f64 {
        (self.a)(l) * (self.b)(m)
    }
}

/// max over R₀ of R₀ / sup_{φ,μ} |f(R₀e^{iφ}∫|ξ(λ,μ)|dλ)|; the series converges when this exceeds 1.
pub fn contraction_margin(spec: &ToyLagrangeSpec) -> Result<f64> {
    let g = spec.grid()?;
    let spread = g
        .nodes
        .iter()
        .map(|m| g.nodes.iter().zip(&g.weights).map(|(l, w)| w * spec.xi(*l, *m).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut best = 0.0f64;
    for i in 0..=120 {
        let r0 = 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0);
        let sup = (0..64)
            .map(|k| {
                let phase = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 64.0);
                spec.f.value(phase * r0 * spread).norm()
            })
            .fold(0.0, f64::max);
        best = best.max(if sup == 0.0 { f64::INFINITY } else { r0 / sup });
    }
    Ok(best)
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut r = vec![0.0; n];
    for i in 0..n {
        for j in 0..n - i {
            r[i + j] += p[i] * q[j];
        }
    }
    r
}

fn poly_pow(p: &[f64], k: usize) -> Vec<f64> {
    let mut r = vec![0.0; p.len()];
    r[0] = 1.0;
    for _ in 0..k {
        r = poly_mul(&r, p);
    }
    r
}

/// Terms 0..=n_max of the series. For separable ξ the n-fold integral of the mixed ε-derivative is
/// Σ_k C(n,k) F^{(n−k)}(0) k! [s^k] P_a(s)^k P_h(s)^{n−k}, with P_w(s) = Σ_q f^{(q)}(0) ∫w·b^q s^q/q!.
pub fn lagrange_terms(spec: &ToyLagrangeSpec, n_max: usize) -> Result<Vec<f64>> {
    if n_max > 12 {
        return Err(Error::InvalidInput(format!("n_max is limited to 12, got {n_max}")));
    }
    let g = spec.grid()?;
    let len = n_max + 1;
    let fd = spec.f.derivatives_at_zero(len);
    let outer = spec.outer.derivatives_at_zero(len);
    let mut fact = vec![1.0; len + 1];
    for k in 1..=len {
        fact[k] = fact[k - 1] * k as f64;
    }
    let moment = |w: &RealFn, q: usize| -> f64 {
        g.nodes.iter().zip(&g.weights).map(|(x, wt)| wt * w(*x) * (spec.b)(*x).powi(q as i32)).sum()
    };
    let pa: Vec<f64> = (0..len).map(|q| fd[q] * moment(&spec.a, q) / fact[q]).collect();
    let ph: Vec<f64> = (0..len).map(|q| fd[q] * moment(&spec.h1, q) / fact[q]).collect();
    let mut terms = Vec::with_capacity(len);
    for n in 0..len {
        let mut t = 0.0;
        for k in 0..=n {
            let coeff = poly_mul(&poly_pow(&pa, k), &poly_pow(&ph, n - k))[k];
            t += fact[n] / (fact[k] * fact[n - k]) * outer[n - k] * fact[k] * coeff;
        }
        terms.push(t / fact[n]);
    }
    Ok(terms)
}

/// Truncated series, required to have settled: |last term| ≤ 1e−10·|sum|.
pub fn lagrange_direct(spec: &ToyLagrangeSpec, n_max: usize) -> Result<f64> {
    let terms = lagrange_terms(spec, n_max)?;
    let sum: f64 = terms.iter().sum();
    let last = terms[terms.len() - 1].abs();
    if last > 1e-10 * sum.abs() {
        return Err(Error::TruncationNotSettled { last, sum });
    }
    Ok(sum)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LagrangeClosed {
    pub value: C64,
    pub determinant: C64,
    /// ∫h₁z.
    pub outer_argument: C64,
    pub iterations: usize,
}

/// F(∫h₁z) / det[δ(λ−μ) − ξ(μ,λ) f′(∫ξ(ν,λ)z(ν)dν)] with z = f(∫ξ(λ,·)z(λ)dλ).
pub fn lagrange_closed(spec: &ToyLagrangeSpec) -> Result<LagrangeClosed> {
    let g = spec.grid()?;
    let n = g.len();
    let xi: Vec<f64> = (0..n * n).map(|i| spec.xi(g.nodes[i / n], g.nodes[i % n])).collect();
    // s(μ_j) = Σ_k w_k ξ(λ_k, μ_j) z_k
    let smear = |z: &[C64]| -> Vec<C64> {
        (0..n).map(|j| (0..n).map(|k| z[k] * (g.weights[k] * xi[k * n + j])).sum()).collect()
    };
    let opts = FixedPointOptions { tol: 1e-15, max_iter: 2000, damping: 1.0, min_damping: 1.0 / 256.0 };
    let init = vec![spec.f.value(C64::new(0.0, 0.0)); n];
    let (z, report) = fixed_point(|z| Ok(smear(z).into_iter().map(|s| spec.f.value(s)).collect()), init, &opts)?;
    let s = smear(&z);
    let nodes: Vec<C64> = g.nodes.iter().map(|x| C64::new(*x, 0.0)).collect();
    let weights: Vec<C64> = g.weights.iter().map(|w| C64::new(*w, 0.0)).collect();
    let determinant = nystrom_det(&nodes, &weights, |j, k| -spec.f.derivative(s[j]) * xi[k * n + j])?;
    let outer_argument: C64 = (0..n).map(|k| z[k] * (g.weights[k] * (spec.h1)(g.nodes[k]))).sum();
    Ok(LagrangeClosed {
        value: spec.outer.value(outer_argument) / determinant,
        determinant,
        outer_argument,
        iterations: report.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_f_terminates_at_first_order() {
        let spec = ToyLagrangeSpec {
            f: Entire::Constant(0.7),
            outer: Entire::Identity,
            h1: Arc::new(|x| 1.0 + x * x),
            ..ToyLagrangeSpec::exponential()
        };
        let t = lagrange_terms(&spec, 6).unwrap();
        assert!(t[0] == 0.0 && t[2..].iter().all(|v| *v == 0.0));
        let expect = 0.7 * (4.0 / 3.0);
        assert!((t[1] - expect).abs() < 1e-14);
        assert!((lagrange_closed(&spec).unwrap().value - expect).norm() < 1e-14);
    }

    #[test]
    fn decoupled_limit_is_taylor_series_of_outer() {
        let spec = ToyLagrangeSpec { a: Arc::new(|_| 0.0), ..ToyLagrangeSpec::exponential() };
        let closed = lagrange_closed(&spec).unwrap();
        assert!((closed.determinant - 1.0).norm() < 1e-15);
        assert!((closed.value - 0.2f64.exp()).norm() < 1e-14);
        let direct = lagrange_direct(&spec, 12).unwrap();
        assert!((direct - 0.2f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn exponential_toy_terms_and_closed_form() {
        let spec = ToyLagrangeSpec::exponential();
        // z = 0.2e^{z/2} and closed = e^z/(1 − z/2)
        let closed = lagrange_closed(&spec).unwrap();
        let z = closed.outer_argument.re;
        assert!((z - 0.2 * (0.5 * z).exp()).abs() < 1e-15);
        assert!((closed.value.re - z.exp() / (1.0 - 0.5 * z)).abs() < 1e-14);
        let t = lagrange_terms(&spec, 3).unwrap();
        for (got, want) in t.iter().zip([1.0, 0.3, 0.08, 0.125 / 6.0]) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
        assert!(contraction_margin(&spec).unwrap() >= 3.0);
    }

    #[test]
    fn partial_sums_contract_geometrically() {
        let t = lagrange_terms(&ToyLagrangeSpec::exponential(), 12).unwrap();
        let ratios: Vec<f64> = t.windows(2).skip(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().all(|r| *r > 0.0 && *r < 0.3), "{ratios:?}");
    }

    #[test]
    fn unsettled_truncation_is_reported() {
        let r = lagrange_direct(&ToyLagrangeSpec::exponential(), 5);
        assert!(matches!(r, Err(Error::TruncationNotSettled { .. })));
    }
}
