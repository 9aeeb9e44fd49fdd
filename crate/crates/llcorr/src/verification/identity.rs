use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::amplitudes::{a_functional, Density};
use crate::error::{Error, Result};
use crate::numerics::{cauchy_transform, unwrap_imag, Contour, PanelRule};

type C64 = Complex64;
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A pole r of the weight and the zero s it is paired with.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleZeroPair {
    pub r: C64,
    pub s: C64,
}

/// ν = ν̃ − (1/2πi) log Π(λ−s⁺)(λ−s⁻)/((λ−r⁺)(λ−r⁻)) with ν̃ a Gaussian bump.
/// Γ is the real axis, so C ∪ −Γ winds counterclockwise around the `plus` poles (below the axis)
/// and clockwise around the `minus` poles (above). C passes between each pole and its zero.
/// Both contours are cut at ±`cutoff`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticNu {
    pub bump_amplitude: C64,
    pub bump_center: f64,
    pub bump_width: f64,
    pub plus: Vec<PoleZeroPair>,
    pub minus: Vec<PoleZeroPair>,
    /// Half-width of each detour of C.
    pub detour_half_width: f64,
    pub cutoff: f64,
}

impl SyntheticNu {
    /// Standard layouts with n = 0, 1 or 2 pairs; zeros sit 0.3 beyond their poles.
    pub fn standard(n: usize) -> Result<Self> {
        let pair = |re: f64, im: f64| PoleZeroPair {
            r: C64::new(re, im),
            s: C64::new(re, im + 0.3 * im.signum()),
        };
        let (plus, minus) = match n {
            0 => (vec![], vec![]),
            1 => (vec![pair(-0.8, -0.5)], vec![pair(0.8, 0.5)]),
            2 => (vec![pair(-1.8, -0.5), pair(0.6, -0.7)], vec![pair(-0.6, 0.6), pair(1.8, 0.5)]),
            _ => return Err(Error::InvalidInput(format!("standard layouts exist for n ≤ 2, got {n}"))),
        };
        let spec = SyntheticNu {
            bump_amplitude: C64::new(0.15, 0.05),
            bump_center: 0.2,
            bump_width: 0.7,
            plus,
            minus,
            detour_half_width: 0.4,
            cutoff: 8192.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.plus.len()
    }

    fn points(&self) -> Vec<C64> {
        self.plus.iter().chain(&self.minus).flat_map(|p| [p.r, p.s]).collect()
    }

    /// Depth of the detour around a pair: halfway between pole and zero.
    fn level(p: &PoleZeroPair) -> f64 {
        0.5 * (p.r.im + p.s.im)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plus.len() != self.minus.len() {
            return Err(Error::InvalidInput("need as many plus as minus pairs".into()));
        }
        let w = self.detour_half_width;
        let inside = |p: &PoleZeroPair, z: C64| {
            let lvl = Self::level(p);
            (z.re - p.r.re).abs() < w && z.im.abs() < lvl.abs() && z.im * lvl > 0.0
        };
        let pairs: Vec<(&PoleZeroPair, bool)> =
            self.plus.iter().map(|p| (p, true)).chain(self.minus.iter().map(|p| (p, false))).collect();
        for &(p, is_plus) in &pairs {
            if is_plus != (p.r.im < 0.0) || p.r.im * p.s.im <= 0.0 || p.s.im.abs() <= p.r.im.abs() {
                return Err(Error::InvalidInput(format!(
                    "plus poles lie below the axis and minus poles above, each zero beyond its pole ({} / {})",
                    p.r, p.s
                )));
            }
            for &(q, _) in &pairs {
                for z in [q.r, q.s] {
                    let own = std::ptr::eq(p, q) && z == p.r;
                    if inside(p, z) != own {
                        return Err(Error::CannotSeparate(format!("detour around {} misplaces {z}", p.r)));
                    }
                }
                if !std::ptr::eq(p, q) && (p.r.re - q.r.re).abs() < 2.0 * w + 0.1 {
                    return Err(Error::CannotSeparate(format!("detours around {} and {} overlap", p.r, q.r)));
                }
            }
        }
        let reach = self.points().iter().map(|z| z.re.abs()).fold(0.0, f64::max) + w;
        if self.cutoff < 10.0 * reach {
            return Err(Error::InvalidInput(format!("cutoff {} too small for the layout", self.cutoff)));
        }
        Ok(())
    }

    fn bump(&self, z: C64) -> C64 {
        let u = (z - self.bump_center) / self.bump_width;
        self.bump_amplitude * (-u * u).exp()
    }

    /// Vertices of Γ (detours = false) or C (detours = true), geometric beyond the core.
    fn vertices(&self, detours: bool) -> Vec<C64> {
        let w = self.detour_half_width;
        let core = self.points().iter().map(|z| z.re.abs()).fold(0.0, f64::max) + w + 0.5;
        let mut tail = vec![core];
        while tail[tail.len() - 1] * 2.0 < self.cutoff {
            tail.push(tail[tail.len() - 1] * 2.0);
        }
        tail.push(self.cutoff);
        let mut v: Vec<C64> = tail.iter().rev().map(|x| C64::new(-x, 0.0)).collect();
        if detours {
            let mut all: Vec<&PoleZeroPair> = self.plus.iter().chain(&self.minus).collect();
            all.sort_by(|a, b| a.r.re.total_cmp(&b.r.re));
            for p in all {
                let (x, y) = (p.r.re, Self::level(p));
                v.extend([C64::new(x - w, 0.0), C64::new(x - w, y), C64::new(x + w, y), C64::new(x + w, 0.0)]);
            }
        }
        v.extend(tail.iter().map(|x| C64::new(*x, 0.0)));
        v
    }

    fn contour(&self, detours: bool) -> Result<Contour> {
        // panels grow with the distance to the poles and zeros, so the tails stay cheap
        let rule = PanelRule { order: 16, max_len: f64::INFINITY, singular: self.points(), ratio: 0.5, min_len: 1e-9 };
        Contour::polyline(self.vertices(detours), false, &rule)
    }

    /// ν along an ordered path, each logarithm continued from the left end of the real axis.
    pub fn along(&self, path: &[C64]) -> Vec<C64> {
        if path.is_empty() {
            return Vec::new();
        }
        let start = C64::new(-self.cutoff, 0.0);
        let lead: Vec<C64> = (0..32).map(|k| start + (path[0] - start) * (k as f64 / 32.0)).collect();
        let full: Vec<C64> = lead.iter().chain(path).copied().collect();
        let mut total = vec![C64::new(0.0, 0.0); full.len()];
        for p in self.plus.iter().chain(&self.minus) {
            for (pt, sign) in [(p.s, 1.0), (p.r, -1.0)] {
                let mut l: Vec<C64> = full.iter().map(|z| (z - pt).ln()).collect();
                unwrap_imag(&mut l);
                for (t, v) in total.iter_mut().zip(&l) {
                    *t += v * sign;
                }
            }
        }
        full.iter()
            .zip(&total)
            .skip(lead.len())
            .map(|(z, lg)| self.bump(*z) - lg / (2.0 * PI * I))
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// exp(A_C([g],[ν])).
    pub lhs: C64,
    /// Γ-contour expression with the pole terms.
    pub rhs: C64,
    pub gap: f64,
    /// Single integrals: A_C − A_Γ restricted to the linear parts.
    pub single_difference: C64,
    /// Σ(ix(r⁺−r⁻) + g(r⁺) − g(r⁻)).
    pub single_expected: C64,
    pub nodes_c: usize,
    pub nodes_gamma: usize,
}

fn cauchy_det(plus: &[C64], minus: &[C64]) -> C64 {
    let n = plus.len();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    DMatrix::from_fn(n, n, |j, k| 1.0 / (plus[j] - minus[k])).determinant()
}

/// exp(A_C) against its deformation to Γ, where the crossed poles contribute residue terms.
pub fn contour_identity_check(
    spec: &SyntheticNu,
    g: &dyn Fn(C64) -> C64,
    g_prime: &dyn Fn(C64) -> C64,
    x: f64,
) -> Result<IdentityCheck> {
    spec.validate()?;
    let singular = spec.points();
    let cont = |p: &[C64]| Ok(spec.along(p));
    let functional = |k: &Contour| {
        let nu = spec.along(&k.nodes);
        let gp: Vec<C64> = k.nodes.iter().map(|z| g_prime(*z)).collect();
        let d = Density { values: &nu, continuation: &cont, singular: &singular, reach: f64::INFINITY };
        a_functional(k, &gp, &d, x).map(|a| (a, nu))
    };
    let gamma = spec.contour(false)?;
    let (a_gamma, nu_gamma) = functional(&gamma)?;
    let (c_contour, a_c) = if spec.n() == 0 {
        (gamma.clone(), a_gamma)
    } else {
        let c = spec.contour(true)?;
        let a = functional(&c)?.0;
        (c, a)
    };

    let rp: Vec<C64> = spec.plus.iter().map(|p| p.r).collect();
    let rm: Vec<C64> = spec.minus.iter().map(|p| p.r).collect();
    let zeros: Vec<C64> = spec.plus.iter().chain(&spec.minus).map(|p| p.s).collect();
    // residue of e^{−2πiν} at a pole r, with the poles of the opposite family in `other`
    let residue = |r: C64, same: &[C64], other: &[C64]| -> C64 {
        let mut v = (-2.0 * PI * I * spec.bump(r)).exp();
        for s in &zeros {
            v *= r - s;
        }
        for o in other {
            v /= r - o;
        }
        for q in same.iter().filter(|q| **q != r) {
            v /= r - q;
        }
        v
    };
    let mut log_rest = C64::new(0.0, 0.0);
    let mut product = cauchy_det(&rp, &rm).powi(2);
    let mut single_expected = C64::new(0.0, 0.0);
    for k in 0..spec.n() {
        let (p, m) = (rp[k], rm[k]);
        single_expected += I * x * (p - m) + g(p) - g(m);
        log_rest += 2.0 * cauchy_transform(&gamma, &nu_gamma, m)? - 2.0 * cauchy_transform(&gamma, &nu_gamma, p)?;
        product *= residue(p, &rp, &rm) * residue(m, &rm, &rp);
    }
    let lhs = a_c.value.exp();
    let rhs = (a_gamma.value + single_expected + log_rest).exp() * product;
    Ok(IdentityCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).norm() / rhs.norm(),
        single_difference: a_c.linear - a_gamma.linear,
        single_expected,
        nodes_c: c_contour.len(),
        nodes_gamma: gamma.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(_: C64) -> C64 {
        C64::new(0.0, 0.0)
    }

    #[test]
    fn no_pairs_gives_identical_sides() {
        let r = contour_identity_check(&SyntheticNu::standard(0).unwrap(), &zero, &zero, 1.0).unwrap();
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn single_integrals_differ_by_pole_terms() {
        let g = |z: C64| 0.2 * z * (-z * z / 8.0).exp();
        let gp = |z: C64| 0.2 * (1.0 - z * z / 4.0) * (-z * z / 8.0).exp();
        let r = contour_identity_check(&SyntheticNu::standard(1).unwrap(), &g, &gp, 1.0).unwrap();
        assert!((r.single_difference - r.single_expected).norm() < 1e-12, "{r:?}");
    }

    #[test]
    fn one_pair_identity() {
        let r = contour_identity_check(&SyntheticNu::standard(1).unwrap(), &zero, &zero, 1.0).unwrap();
        assert!(r.gap < 1e-10, "{r:?}");
    }

    #[test]
    fn two_pair_identity_with_smooth_g() {
        let g = |z: C64| 0.2 * z * (-z * z / 8.0).exp();
        let gp = |z: C64| 0.2 * (1.0 - z * z / 4.0) * (-z * z / 8.0).exp();
        let r = contour_identity_check(&SyntheticNu::standard(2).unwrap(), &g, &gp, 1.5).unwrap();
        assert!(r.gap < 1e-10, "{r:?}");
    }

    #[test]
    fn gap_falls_with_the_cutoff() {
        // ν decays like 1/λ, so truncating the tails leaves an error of order cutoff⁻³
        let gaps: Vec<f64> = [512.0, 2048.0]
            .iter()
            .map(|c| {
                let s = SyntheticNu { cutoff: *c, ..SyntheticNu::standard(1).unwrap() };
                contour_identity_check(&s, &zero, &zero, 1.0).unwrap().gap
            })
            .collect();
        assert!(gaps[0] / gaps[1] > 30.0, "{gaps:?}");
    }

    #[test]
    fn misplaced_detour_is_rejected() {
        let mut s = SyntheticNu::standard(1).unwrap();
        s.plus[0].s = C64::new(-0.8, -0.4);
        assert!(s.validate().is_err());
    }
}
