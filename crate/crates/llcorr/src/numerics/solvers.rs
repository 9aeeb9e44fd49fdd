use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    pub damping: f64,
}

impl fmt::Display for SolverReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "converged={} iterations={} residual={:e} damping={}",
            self.converged, self.iterations, self.residual, self.damping
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub min_damping: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { tol: 1e-12, max_iter: 500, damping: 1.0, min_damping: 1.0 / 64.0 }
    }
}

pub fn sup_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Damped fixed-point iteration `v ← (1−θ)v + θ·map(v)`; θ is halved whenever the residual grows.
pub fn fixed_point<F>(mut map: F, init: Vec<C64>, opts: &FixedPointOptions) -> Result<(Vec<C64>, SolverReport)>
where
    F: FnMut(&[C64]) -> Result<Vec<C64>>,
{
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidInput(format!("damping must lie in (0,1], got {}", opts.damping)));
    }
    let mut theta = opts.damping;
    let mut v = init;
    let mut prev = f64::INFINITY;
    let mut report = SolverReport { damping: theta, ..Default::default() };
    for it in 1..=opts.max_iter {
        let mv = map(&v)?;
        if mv.len() != v.len() {
            return Err(Error::InvalidInput("map changed the grid size".into()));
        }
        let res = sup_distance(&mv, &v);
        if !res.is_finite() {
            return Err(Error::NonFinite("fixed-point map".into()));
        }
        report.iterations = it;
        report.residual = res;
        report.damping = theta;
        if res <= opts.tol {
            report.converged = true;
            return Ok((v, report));
        }
        if res > prev && theta > opts.min_damping {
            theta = (theta * 0.5).max(opts.min_damping);
        }
        prev = res;
        for (x, y) in v.iter_mut().zip(&mv) {
            *x += (y - *x) * theta;
        }
    }
    Err(Error::NoConvergence { what: "fixed point".into(), report })
}

/// Newton iteration on a complex function returning `(f, f′)`, with step halving when |f| grows.
pub fn newton_complex<F>(mut f: F, seed: C64, tol: f64, max_iter: usize) -> Result<(C64, SolverReport)>
where
    F: FnMut(C64) -> Result<(C64, C64)>,
{
    let mut z = seed;
    let (mut fz, mut dfz) = f(z)?;
    let mut report = SolverReport { damping: 1.0, ..Default::default() };
    for it in 0..=max_iter {
        report.iterations = it;
        report.residual = fz.norm();
        if !report.residual.is_finite() {
            return Err(Error::NonFinite(format!("newton iterate at {z}")));
        }
        if report.residual <= tol {
            report.converged = true;
            return Ok((z, report));
        }
        if it == max_iter {
            break;
        }
        if dfz.norm() <= 1e-300 || !(dfz.norm() > fz.norm() * 1e-14) {
            return Err(Error::DerivativeVanishes { at: z });
        }
        let step = fz / dfz;
        let mut lambda = 1.0;
        loop {
            let trial = z - step * lambda;
            let (ft, dft) = f(trial)?;
            if ft.norm() < fz.norm() || lambda < 1.0 / 64.0 {
                z = trial;
                fz = ft;
                dfz = dft;
                break;
            }
            lambda *= 0.5;
        }
        report.damping = report.damping.min(lambda);
    }
    Err(Error::NoConvergence { what: "newton".into(), report })
}

/// Central-difference derivative for analytic functions when no formula is available.
pub fn numeric_derivative<F: FnMut(C64) -> C64>(mut f: F, z: C64) -> C64 {
    let h = 1e-5 * z.norm().max(1.0);
    (f(z + h) - f(z - h)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_map_converges_immediately() {
        let init = vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)];
        let (v, r) = fixed_point(|v| Ok(v.to_vec()), init.clone(), &Default::default()).unwrap();
        assert_eq!(v, init);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn affine_map() {
        let (v, r) = fixed_point(
            |v| Ok(vec![v[0] * 0.5 + 1.0]),
            vec![C64::new(0.0, 0.0)],
            &FixedPointOptions { tol: 1e-13, ..Default::default() },
        )
        .unwrap();
        assert!((v[0] - 2.0).norm() < 1e-12 && r.converged);
    }

    #[test]
    fn expanding_map_gets_damped() {
        // v ↦ 3 − 2v oscillates at θ=1; halving damping makes it contract
        let (v, r) = fixed_point(|v| Ok(vec![3.0 - v[0] * 2.0]), vec![C64::new(0.0, 0.0)], &Default::default()).unwrap();
        assert!((v[0] - 1.0).norm() < 1e-11);
        assert!(r.damping < 1.0);
    }

    #[test]
    fn newton_examples() {
        let (z, _) = newton_complex(|z| Ok((z * z - 1.0, z * 2.0)), C64::new(0.9, 0.0), 1e-13, 50).unwrap();
        assert!((z - 1.0).norm() < 1e-12);
        let target = C64::new(1.0, std::f64::consts::PI);
        let (z, _) = newton_complex(|z| Ok((z * z - target, z * 2.0)), C64::new(1.4, 1.0), 1e-14, 50).unwrap();
        assert!((z - target.sqrt()).norm() < 1e-13);
        assert!((z - C64::new(1.4657606062170614, 1.0716595330317402)).norm() < 1e-13);
        let e = newton_complex(|z| Ok((z * z + 1.0, z * 2.0)), C64::new(0.0, 0.0), 1e-12, 50);
        assert!(matches!(e, Err(Error::DerivativeVanishes { .. })));
    }

    proptest! {
        #[test]
        fn newton_finds_square_roots(re in -5.0f64..5.0, im in 0.2f64..5.0) {
            let a = C64::new(re, im);
            let seed = a.sqrt() * C64::new(1.1, 0.05);
            let (z, r) = newton_complex(|z| Ok((z * z - a, z * 2.0)), seed, 1e-12, 60).unwrap();
            prop_assert!(r.converged);
            prop_assert!((z * z - a).norm() <= 1e-12);
        }
    }
}
