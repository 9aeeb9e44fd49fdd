//! Deformed TBA equations for u_i, solved by homotopy in γ from the thermal state.

mod contour;
mod selection;

pub use contour::{build_contour, hole_solutions, DeformedContour, Tower};
pub(crate) use contour::{check_simple, segment_gap};
pub use selection::{PoleKey, RootSelection};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{fixed_point, newton_complex, sup_distance, unwrap_imag, FixedPointOptions, SolverReport};
use crate::poles::{locate_poles, PoleTable};
use crate::thermo::{kernel_matrix, lieb_kernel, Coupling, ModelParams, ThermalState};

type C64 = Complex64;

/// θ(λ) = i[log(ic+λ) − log(ic−λ)] on principal branches; identically 0 at c = ∞.
pub fn theta(lambda: C64, c: Coupling) -> Result<C64> {
    let Coupling::Finite(c) = c else {
        return Ok(C64::new(0.0, 0.0));
    };
    let ic = C64::new(0.0, c);
    if (ic + lambda).norm() < 1e-14 || (ic - lambda).norm() < 1e-14 {
        return Err(Error::AtBranchPoint { at: lambda });
    }
    Ok(C64::i() * ((ic + lambda).ln() - (ic - lambda).ln()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformOptions {
    pub gamma_steps: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// How many times a γ-step may be halved before giving up.
    pub max_halvings: usize,
}

impl Default for DeformOptions {
    fn default() -> Self {
        DeformOptions { gamma_steps: 8, tol: 1e-12, max_iter: 1000, max_halvings: 8 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GammaStep {
    pub gamma: f64,
    /// Nonzero on a detour through complex γ.
    pub gamma_im: f64,
    pub report: SolverReport,
    /// Alternations between the u solve and the root update.
    pub sweeps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeformedState {
    pub thermal: ThermalState,
    pub params: ModelParams,
    pub selection: RootSelection,
    pub gamma: f64,
    pub u: Vec<C64>,
    /// log[1+γe^{−u/T}+(1−γ)e^{−ε/T}] on the real grid, continuous from −Λ.
    pub log_weight: Vec<C64>,
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
    /// Pre-images of the roots in the thermal pole table (same order as `plus`, `minus`).
    pub origins_plus: Vec<C64>,
    pub origins_minus: Vec<C64>,
    pub root_residuals: Vec<f64>,
    /// Sup-norm residual of the real-axis equation at the final γ.
    pub residual: f64,
    /// Distance of the γ=0 solution from its closed form.
    pub start_gap: f64,
    pub steps: Vec<GammaStep>,
}

struct Homotopy<'a> {
    thermal: &'a ThermalState,
    params: ModelParams,
    kmat: Option<Vec<f64>>,
    tol: f64,
    max_iter: usize,
}

/// Real-axis data needed to continue u into the strip.
struct UData<'a> {
    ctx: &'a Homotopy<'a>,
    log_weight: &'a [C64],
    plus: &'a [C64],
    minus: &'a [C64],
}

impl UData<'_> {
    fn eval(&self, lambda: C64) -> Result<(C64, C64)> {
        u_continuation(self.ctx.thermal, &self.ctx.params, self.log_weight, self.plus, self.minus, lambda)
    }
}

/// u(λ) and u′(λ) off the real axis from real-axis log-weight values.
fn u_continuation(
    thermal: &ThermalState,
    params: &ModelParams,
    log_weight: &[C64],
    plus: &[C64],
    minus: &[C64],
    lambda: C64,
) -> Result<(C64, C64)> {
    thermal.check_strip(lambda)?;
    let t = params.t;
    let mut u = lambda * lambda - params.h_alpha();
    let mut du = lambda * 2.0;
    if let Coupling::Finite(c) = params.c {
        let pref = t / (2.0 * PI);
        let mut s = C64::new(0.0, 0.0);
        let mut ds = C64::new(0.0, 0.0);
        for k in 0..thermal.grid.len() {
            let x = lambda - thermal.grid.nodes[k];
            let d = x * x + c * c;
            let wl = log_weight[k] * thermal.grid.weights[k];
            s += wl * (2.0 * c) / d;
            ds += wl * (-4.0 * c) * x / (d * d);
        }
        u -= s * pref;
        du -= ds * pref;
        for (roots, sign) in [(plus, 1.0), (minus, -1.0)] {
            for &r in roots {
                if (lambda.im - r.im).abs() >= c {
                    return Err(Error::OutsideStrip { at: lambda });
                }
                u -= C64::i() * t * sign * theta(r - lambda, params.c)?;
                du += C64::i() * t * sign * lieb_kernel(r - lambda, c);
            }
        }
    }
    Ok((u, du))
}

/// log(1 + γe^{a} + (1−γ)e^{b}) without overflow.
fn mixed_log(a: C64, b: C64, gamma: C64) -> C64 {
    let m = 0f64.max(a.re).max(b.re);
    let s = (-m).exp() + gamma * (a - m).exp() + (1.0 - gamma) * (b - m).exp();
    s.ln() + m
}

fn continuous_logs(mut l: Vec<C64>) -> Result<Vec<C64>> {
    unwrap_imag(&mut l);
    if let (Some(first), Some(last)) = (l.first(), l.last()) {
        if first.norm() > 1e-6 || last.im.abs() > 1.0 {
            return Err(Error::BranchJump(format!(
                "log-weight does not return to the principal branch: {first} at −Λ, {last} at +Λ"
            )));
        }
    }
    Ok(l)
}

impl<'a> Homotopy<'a> {
    fn logs(&self, u: &[C64], gamma: C64) -> Result<Vec<C64>> {
        let t = self.params.t;
        let l = u.iter().zip(&self.thermal.eps).map(|(u, e)| mixed_log(-u / t, -e / t, gamma)).collect();
        continuous_logs(l)
    }

    fn drive(&self, plus: &[C64], minus: &[C64]) -> Result<Vec<C64>> {
        let ha = self.params.h_alpha();
        let t = self.params.t;
        self.thermal
            .grid
            .nodes
            .iter()
            .map(|&x| {
                let mut d = C64::new(x * x, 0.0) - ha;
                for &r in plus {
                    d -= C64::i() * t * theta(r - x, self.params.c)?;
                }
                for &r in minus {
                    d += C64::i() * t * theta(r - x, self.params.c)?;
                }
                Ok(d)
            })
            .collect()
    }

    fn apply(&self, drive: &[C64], l: &[C64]) -> Vec<C64> {
        let n = drive.len();
        match &self.kmat {
            None => drive.to_vec(),
            Some(k) => (0..n)
                .map(|j| drive[j] - k[j * n..(j + 1) * n].iter().zip(l).map(|(a, b)| b * *a).sum::<C64>())
                .collect(),
        }
    }

    fn solve_u(&self, gamma: C64, init: Vec<C64>, plus: &[C64], minus: &[C64]) -> Result<(Vec<C64>, SolverReport)> {
        let drive = self.drive(plus, minus)?;
        if self.kmat.is_none() {
            return Ok((drive, SolverReport { converged: true, iterations: 0, residual: 0.0, damping: 1.0 }));
        }
        let opts = FixedPointOptions { tol: self.tol, max_iter: self.max_iter, ..Default::default() };
        fixed_point(|v| Ok(self.apply(&drive, &self.logs(v, gamma)?)), init, &opts)
    }

    fn root_newton(&self, data: &UData, gamma: C64, seed: C64) -> Result<C64> {
        let t = self.params.t;
        let (s, _) = newton_complex(
            |z| {
                let (u, du) = data.eval(z)?;
                let (e, de) = self.thermal.epsilon_with_derivative(z)?;
                let eu = (-u / t).exp();
                let ee = (-e / t).exp();
                let f = 1.0 + gamma * eu + (1.0 - gamma) * ee;
                let df = -(gamma * eu * du + (1.0 - gamma) * ee * de) / t;
                Ok((f, df))
            },
            seed,
            1e-13,
            60,
        )?;
        Ok(s)
    }

    /// Newton-refines every root against the u given on the real grid.
    fn update_roots(&self, u: &[C64], gamma: C64, plus: &[C64], minus: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
        let l = self.logs(u, gamma)?;
        let data = UData { ctx: self, log_weight: &l, plus, minus };
        let new_plus = plus.iter().map(|&s| self.root_newton(&data, gamma, s)).collect::<Result<Vec<_>>>()?;
        let new_minus = minus.iter().map(|&s| self.root_newton(&data, gamma, s)).collect::<Result<Vec<_>>>()?;
        Ok((new_plus, new_minus))
    }

    /// Alternates the u fixed point and Newton updates of the roots at fixed γ.
    #[allow(clippy::type_complexity)]
    fn solve_at(
        &self,
        gamma: C64,
        init: Vec<C64>,
        plus: Vec<C64>,
        minus: Vec<C64>,
    ) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>, SolverReport, usize)> {
        let mut u = init;
        let mut plus = plus;
        let mut minus = minus;
        let mut last = f64::INFINITY;
        for sweep in 1..=60 {
            let (v, rep) = self.solve_u(gamma, u, &plus, &minus)?;
            u = v;
            if plus.is_empty() {
                return Ok((u, plus, minus, rep, sweep));
            }
            let (new_plus, new_minus) = self.update_roots(&u, gamma, &plus, &minus)?;
            let delta = sup_distance(&new_plus, &plus).max(sup_distance(&new_minus, &minus));
            if sweep >= 4 && delta > 1e-13 && delta > 0.3 * last {
                // the alternation contracts slowly or not at all at high T
                return self.solve_roots_newton(gamma, u, plus, minus, sweep);
            }
            last = delta;
            plus = new_plus;
            minus = new_minus;
            self.check_roots(&plus, &minus)?;
            if delta <= 1e-13 {
                let (v, rep) = self.solve_u(gamma, u, &plus, &minus)?;
                return Ok((v, plus, minus, rep, sweep));
            }
        }
        Err(Error::NoConvergence {
            what: format!("root/u alternation at γ={gamma}"),
            report: SolverReport { converged: false, iterations: 60, residual: f64::NAN, damping: 1.0 },
        })
    }

    /// Newton on s ↦ Φ(s) − s, where Φ re-solves u for the roots s and refines them once.
    /// Φ is holomorphic, so a real finite-difference step gives the complex Jacobian.
    #[allow(clippy::type_complexity)]
    fn solve_roots_newton(
        &self,
        gamma: C64,
        init: Vec<C64>,
        plus: Vec<C64>,
        minus: Vec<C64>,
        sweeps: usize,
    ) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>, SolverReport, usize)> {
        let np = plus.len();
        let map = |u: &[C64], s: &[C64]| -> Result<(Vec<C64>, Vec<C64>)> {
            let (v, _) = self.solve_u(gamma, u.to_vec(), &s[..np], &s[np..])?;
            let (a, b) = self.update_roots(&v, gamma, &s[..np], &s[np..])?;
            Ok((v, a.into_iter().chain(b).collect()))
        };
        let mut s: Vec<C64> = plus.into_iter().chain(minus).collect();
        let mut u = init;
        let m = s.len();
        for it in 1..=30 {
            let (v, image) = map(&u, &s)?;
            let g: Vec<C64> = image.iter().zip(&s).map(|(a, b)| a - b).collect();
            if g.iter().all(|d| d.norm() <= 1e-13) {
                let (v, rep) = self.solve_u(gamma, v, &image[..np], &image[np..])?;
                return Ok((v, image[..np].to_vec(), image[np..].to_vec(), rep, sweeps + it));
            }
            let mut jac = DMatrix::<C64>::zeros(m, m);
            for k in 0..m {
                let h = 1e-7 * s[k].norm().max(1.0);
                let mut sk = s.clone();
                sk[k] += h;
                let (_, ik) = map(&v, &sk)?;
                for j in 0..m {
                    jac[(j, k)] = (ik[j] - sk[j] - g[j]) / h;
                }
            }
            let step = jac.lu().solve(&DVector::from_vec(g)).ok_or(Error::Singular)?;
            for (x, d) in s.iter_mut().zip(step.iter()) {
                *x -= d;
            }
            self.check_roots(&s[..np], &s[np..])?;
            u = v;
        }
        Err(Error::NoConvergence {
            what: format!("root Newton at γ={gamma}"),
            report: SolverReport { converged: false, iterations: 30, residual: f64::NAN, damping: 1.0 },
        })
    }

    fn check_roots(&self, plus: &[C64], minus: &[C64]) -> Result<()> {
        let cap = self.params.strip_cap();
        for &s in plus {
            if s.im <= 0.0 || s.im >= cap {
                return Err(Error::RootLeftStrip { at: s });
            }
        }
        for &s in minus {
            if s.im >= 0.0 || -s.im >= cap {
                return Err(Error::RootLeftStrip { at: s });
            }
        }
        let all: Vec<C64> = plus.iter().chain(minus).copied().collect();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                if (all[i] - all[j]).norm() < 1e-6 {
                    return Err(Error::RootCollision { a: all[i], b: all[j] });
                }
            }
        }
        Ok(())
    }
}

/// Solves the deformed equations for `selection`, continuing from the thermal state at α = 0
/// to the target `alpha`. `table` must be the pole table of `thermal`.
pub fn solve_deformed(
    thermal: &ThermalState,
    alpha: C64,
    selection: &RootSelection,
    table: &PoleTable,
    opts: &DeformOptions,
) -> Result<DeformedState> {
    if thermal.params.alpha != C64::new(0.0, 0.0) {
        return Err(Error::InvalidInput("the deformation starts from the α = 0 thermal state".into()));
    }
    if opts.gamma_steps == 0 {
        return Err(Error::InvalidInput("gamma_steps must be at least 1".into()));
    }
    selection.validate()?;
    let params = thermal.params.with_alpha(alpha);
    params.validate()?;
    let origins_plus: Vec<C64> = selection.plus.iter().map(|k| k.lookup(table).map(|e| e.r)).collect::<Result<_>>()?;
    let origins_minus: Vec<C64> =
        selection.minus.iter().map(|k| k.lookup(table).map(|e| e.r)).collect::<Result<_>>()?;
    let kmat = match params.c {
        Coupling::Finite(c) => Some(kernel_matrix(&thermal.grid, c, params.t)),
        Coupling::Infinite => None,
    };
    let hom = Homotopy { thermal, params, kmat, tol: opts.tol, max_iter: opts.max_iter };

    // γ = 0 has the closed form u = ε − 2πiαT − iTΣθ(r − λ)
    let shift = C64::new(0.0, 2.0 * PI * params.t) * alpha;
    let drive0 = hom.drive(&origins_plus, &origins_minus)?;
    let closed: Vec<C64> = thermal
        .eps
        .iter()
        .zip(&drive0)
        .zip(&thermal.grid.nodes)
        .map(|((e, d), x)| e - shift + (d - (C64::new(x * x, 0.0) - params.h_alpha())))
        .collect();
    let (u0, p0, m0, rep0, sw0) = hom.solve_at(C64::new(0.0, 0.0), closed.clone(), origins_plus.clone(), origins_minus.clone())?;
    let start_gap = sup_distance(&u0, &closed).max(sup_distance(&p0, &origins_plus)).max(sup_distance(&m0, &origins_minus));

    let nominal = 1.0 / opts.gamma_steps as f64;
    let min_step = nominal / 2f64.powi(opts.max_halvings as i32);
    // the path runs along real γ; after a stall it is re-run from an earlier point through Im γ > 0,
    // passing above a fold of the real path
    let mut detour: Option<f64> = None;
    // on real γ at α = 0 a self-conjugate selection keeps ŝ⁻ = conj(ŝ⁺); losing that means a fold was crossed
    let symmetric = alpha == C64::new(0.0, 0.0) && selection.is_self_conjugate();
    let conjugate_pairs = |plus: &[C64], minus: &[C64]| {
        plus.iter().all(|p| minus.iter().any(|m| (p.conj() - m).norm() <= 1e-8 * p.norm().max(1.0)))
    };
    let path = |t: f64, detour: Option<f64>| match detour {
        None => C64::new(t, 0.0),
        Some(tb) => C64::new(t, (t - tb) * (1.0 - t) / (1.0 - tb)),
    };
    let mut steps = vec![GammaStep { gamma: 0.0, gamma_im: 0.0, report: rep0, sweeps: sw0 }];
    let mut accepted: Vec<(f64, Vec<C64>, Vec<C64>, Vec<C64>)> = vec![(0.0, u0.clone(), p0.clone(), m0.clone())];
    let (mut u, mut plus, mut minus) = (u0, p0, m0);
    let mut prev: Option<(f64, Vec<C64>, Vec<C64>)> = None;
    let mut t = 0.0;
    let mut step = nominal;
    while t < 1.0 {
        let target = (t + step).min(1.0);
        let predict = |cur: &[C64], old: &[C64], t_old: f64| -> Vec<C64> {
            let f = (target - t) / (t - t_old);
            cur.iter().zip(old).map(|(c, o)| c + (c - o) * f).collect()
        };
        let (pp, pm) = match &prev {
            Some((t_old, op, om)) => (predict(&plus, op, *t_old), predict(&minus, om, *t_old)),
            None => (plus.clone(), minus.clone()),
        };
        let g = path(target, detour);
        let attempt = hom.solve_at(g, u.clone(), pp, pm).and_then(|res| {
            let jump = sup_distance(&res.1, &plus).max(sup_distance(&res.2, &minus));
            let room = separation(&plus, &minus, table);
            if jump > 0.5 * room {
                Err(Error::NoConvergence {
                    what: format!("root jumped by {jump:.3e} at γ={g}"),
                    report: res.3,
                })
            } else if symmetric && detour.is_none() && !conjugate_pairs(&res.1, &res.2) {
                Err(Error::NoConvergence { what: format!("conjugation symmetry lost at γ={g}"), report: res.3 })
            } else {
                Ok(res)
            }
        });
        match attempt {
            Ok((v, p, m, rep, sw)) => {
                prev = Some((t, plus, minus));
                t = target;
                u = v;
                plus = p;
                minus = m;
                steps.push(GammaStep { gamma: g.re, gamma_im: g.im, report: rep, sweeps: sw });
                accepted.push((t, u.clone(), plus.clone(), minus.clone()));
                step = (step * 2.0).min(nominal);
            }
            Err(e) => {
                step *= 0.5;
                if step >= min_step {
                    continue;
                }
                if let (None, Error::NoConvergence { .. } | Error::OutsideStrip { .. }) = (detour, &e) {
                    // restart two nominal steps back
                    let k = accepted.iter().rposition(|a| a.0 <= t - 2.0 * nominal).unwrap_or(0);
                    accepted.truncate(k + 1);
                    steps.truncate(k + 1);
                    let back = &accepted[k];
                    t = back.0;
                    u = back.1.clone();
                    plus = back.2.clone();
                    minus = back.3.clone();
                    prev = None;
                    step = nominal;
                    detour = Some(t);
                    continue;
                }
                return Err(match e {
                    Error::RootCollision { .. } | Error::RootLeftStrip { .. } => e,
                    other => Error::NoConvergence {
                        what: format!("deformation stalled after γ={}: {other}", path(t, detour)),
                        report: steps.last().map(|s| s.report).unwrap_or_default(),
                    },
                });
            }
        }
    }

    let log_weight = hom.logs(&u, C64::new(1.0, 0.0))?;
    let mut state = DeformedState {
        thermal: thermal.clone(),
        params,
        selection: selection.clone(),
        gamma: 1.0,
        u,
        log_weight,
        plus,
        minus,
        origins_plus,
        origins_minus,
        root_residuals: Vec::new(),
        residual: 0.0,
        start_gap,
        steps,
    };
    state.residual = state.equation_residual()?;
    state.root_residuals =
        state.roots().iter().map(|&s| state.root_residual(s)).collect::<Result<Vec<_>>>()?;
    Ok(state)
}

/// Locates the poles needed by `selection` and runs [`solve_deformed`].
pub fn solve_selection(
    thermal: &ThermalState,
    alpha: C64,
    selection: &RootSelection,
    opts: &DeformOptions,
) -> Result<DeformedState> {
    let m_max = selection.plus.iter().chain(&selection.minus).map(|k| k.m).max().unwrap_or(0) + 1;
    let table = locate_poles(thermal, m_max)?;
    solve_deformed(thermal, alpha, selection, &table, opts)
}

/// Smallest distance from a root to any other root or to a table pole that is not nearby.
fn separation(plus: &[C64], minus: &[C64], table: &PoleTable) -> f64 {
    let all: Vec<C64> = plus.iter().chain(minus).copied().collect();
    let mut best = f64::INFINITY;
    for (i, &s) in all.iter().enumerate() {
        for (j, &o) in all.iter().enumerate() {
            if i != j {
                best = best.min((s - o).norm());
            }
        }
        // the pre-image itself is the closest table pole; skip it
        let mut d: Vec<f64> = table.entries.iter().map(|e| (e.r - s).norm()).collect();
        d.sort_by(f64::total_cmp);
        if d.len() > 1 {
            best = best.min(d[1]);
        }
    }
    best
}

impl DeformedState {
    pub fn n(&self) -> usize {
        self.plus.len()
    }

    /// Whether the homotopy left the real γ axis to get around a fold.
    pub fn took_detour(&self) -> bool {
        self.steps.iter().any(|s| s.gamma_im != 0.0)
    }

    pub fn roots(&self) -> Vec<C64> {
        self.plus.iter().chain(&self.minus).copied().collect()
    }

    /// Largest |Im λ| in the upper (or lower) half where u can be continued: the phase terms of
    /// the roots across the axis branch at distance c.
    pub fn u_cap(&self, upper: bool) -> f64 {
        let cap = self.params.strip_cap();
        let c = match self.params.c {
            Coupling::Finite(c) => c,
            Coupling::Infinite => return cap,
        };
        let across = if upper { &self.minus } else { &self.plus };
        across.iter().map(|r| c - r.im.abs()).fold(cap, f64::min)
    }

    pub fn origins(&self) -> Vec<C64> {
        self.origins_plus.iter().chain(&self.origins_minus).copied().collect()
    }

    /// u and u′ anywhere in the strip.
    pub fn u_with_derivative(&self, lambda: C64) -> Result<(C64, C64)> {
        u_continuation(&self.thermal, &self.params, &self.log_weight, &self.plus, &self.minus, lambda)
    }

    pub fn u_at(&self, lambda: C64) -> Result<C64> {
        Ok(self.u_with_derivative(lambda)?.0)
    }

    /// |1 + e^{−u(s)/T}|.
    pub fn root_residual(&self, s: C64) -> Result<f64> {
        Ok((1.0 + (-self.u_at(s)? / self.params.t).exp()).norm())
    }

    /// `(|1+e^{−u/T}|, logarithmic derivative)` for argument-principle counts.
    pub fn zero_logderiv(&self, lambda: C64) -> Result<(f64, C64)> {
        let (u, du) = self.u_with_derivative(lambda)?;
        let x = -u / self.params.t;
        let modulus = if x.re > 700.0 { f64::MAX } else { (1.0 + x.exp()).norm() };
        let dx = -du / self.params.t;
        Ok((modulus, dx / (1.0 + (-x).exp())))
    }

    /// Newton refinement of a zero of 1+e^{−u/T} on the branch through `seed`.
    pub fn refine_zero(&self, seed: C64) -> Result<C64> {
        let t = self.params.t;
        let (u0, _) = self.u_with_derivative(seed)?;
        // nearest odd multiple of iπ
        let k = 2.0 * (((-u0 / t).im / PI - 1.0) / 2.0).round() + 1.0;
        let shift = C64::new(0.0, PI * k);
        let (s, _) = newton_complex(
            |z| {
                let (u, du) = self.u_with_derivative(z)?;
                Ok((-u / t - shift, -du / t))
            },
            seed,
            1e-13,
            60,
        )?;
        Ok(s)
    }

    /// Sup-norm residual of the real-axis equation with θ-driving terms at γ = 1.
    pub fn equation_residual(&self) -> Result<f64> {
        let t = self.params.t;
        let l: Vec<C64> = self.u.iter().map(|u| crate::numerics::log1p_exp(-u / t)).collect();
        let l = continuous_logs(l)?;
        let mut worst: f64 = 0.0;
        for (j, &x) in self.thermal.grid.nodes.iter().enumerate() {
            let (v, _) = u_continuation(&self.thermal, &self.params, &l, &self.plus, &self.minus, C64::new(x, 0.0))?;
            worst = worst.max((v - self.u[j]).norm());
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
