//! Yang–Yang thermodynamics: dressed energy, Fermi weight, densities and pressure.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{
    fixed_point, log1p_exp, make_real_grid, nystrom_solve, unwrap_imag, FixedPointOptions, QuadGrid, SolverReport,
};

type C64 = Complex64;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    Finite(f64),
    Infinite,
}

impl Coupling {
    pub fn value(&self) -> f64 {
        match self {
            Coupling::Finite(c) => *c,
            Coupling::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Coupling::Infinite)
    }
}

impl std::fmt::Display for Coupling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coupling::Finite(c) => write!(f, "{c}"),
            Coupling::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Coupling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "infinity" => Ok(Coupling::Infinite),
            t => {
                let c: f64 = t.parse().map_err(|_| Error::Parse(format!("bad coupling '{s}'")))?;
                if c > 0.0 && c.is_finite() {
                    Ok(Coupling::Finite(c))
                } else {
                    Err(Error::InvalidInput(format!("coupling must be positive, got {c}")))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: Coupling,
    pub h: f64,
    pub t: f64,
    pub alpha: C64,
}

impl ModelParams {
    pub fn new(c: Coupling, h: f64, t: f64, alpha: C64) -> Result<Self> {
        let p = ModelParams { c, h, t, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidInput(format!("temperature must be positive, got {}", self.t)));
        }
        if let Coupling::Finite(c) = self.c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidInput(format!("coupling must be positive, got {c}")));
            }
        }
        if !self.h.is_finite() || !self.alpha.is_finite() {
            return Err(Error::InvalidInput("h and alpha must be finite".into()));
        }
        Ok(())
    }

    /// h_α = h + 2πiαT.
    pub fn h_alpha(&self) -> C64 {
        self.h + C64::new(0.0, 2.0 * PI * self.t) * self.alpha
    }

    pub fn with_alpha(&self, alpha: C64) -> Self {
        ModelParams { alpha, ..*self }
    }

    /// Largest |Im λ| at which the continuation of ε is trusted.
    pub fn strip_cap(&self) -> f64 {
        match self.c {
            Coupling::Finite(c) => 0.9 * c,
            Coupling::Infinite => f64::INFINITY,
        }
    }
}

/// K(λ) = 2c/(λ²+c²).
pub fn lieb_kernel(x: C64, c: f64) -> C64 {
    2.0 * c / (x * x + c * c)
}

pub fn lieb_kernel_prime(x: C64, c: f64) -> C64 {
    let d = x * x + c * c;
    -4.0 * c * x / (d * d)
}

/// Row-major `(T/2π) K(x_j − x_k) w_k` on a real grid.
pub(crate) fn kernel_matrix(grid: &QuadGrid, c: f64, t: f64) -> Vec<f64> {
    let n = grid.len();
    let mut kmat = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            let x = grid.nodes[j] - grid.nodes[k];
            kmat[j * n + k] = t / (2.0 * PI) * 2.0 * c / (x * x + c * c) * grid.weights[k];
        }
    }
    kmat
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cutoff: Option<f64>,
    pub panels: Option<usize>,
    pub order: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { cutoff: None, panels: None, order: 16 }
    }
}

impl GridSpec {
    pub fn default_cutoff(params: &ModelParams) -> f64 {
        let shift = 2.0 * PI * params.t * params.alpha.im.abs();
        (params.h.abs() + shift + 40.0 * params.t).sqrt().ceil()
    }

    /// Free-fermion estimate of the distance from ℝ to the nearest Fermi-weight pole.
    pub fn pole_distance_estimate(params: &ModelParams) -> f64 {
        C64::new(params.h, PI * params.t).sqrt().im
    }

    pub fn resolve(&self, params: &ModelParams) -> Result<QuadGrid> {
        let cutoff = self.cutoff.unwrap_or_else(|| GridSpec::default_cutoff(params));
        let panels = match self.panels {
            Some(p) => p,
            None => {
                let width = GridSpec::pole_distance_estimate(params).clamp(0.05, 1.0);
                (2.0 * cutoff / width).ceil() as usize
            }
        };
        make_real_grid(cutoff, panels, self.order)
    }

    pub fn of(grid: &QuadGrid) -> GridSpec {
        GridSpec { cutoff: Some(grid.cutoff), panels: Some(grid.panels), order: grid.order }
    }

    pub fn doubled(&self, params: &ModelParams) -> Result<GridSpec> {
        let g = self.resolve(params)?;
        Ok(GridSpec { cutoff: Some(g.cutoff), panels: Some(2 * g.panels), order: self.order })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermalState {
    pub params: ModelParams,
    pub grid: QuadGrid,
    pub eps: Vec<C64>,
    /// log(1+e^{−ε/T}) on the grid, continuous along ℝ.
    pub log_weight: Vec<C64>,
    pub rho_t: Vec<C64>,
    pub rho_p: Vec<C64>,
    pub density: C64,
    pub pressure: C64,
    pub report: SolverReport,
}

#[derive(Serialize, Deserialize)]
struct ThermalDump {
    version: u32,
    state: ThermalState,
}

pub fn log_weights(eps: &[C64], t: f64) -> Vec<C64> {
    let mut l: Vec<C64> = eps.iter().map(|e| log1p_exp(-e / t)).collect();
    unwrap_imag(&mut l);
    l
}

pub fn solve_epsilon(params: &ModelParams, grid: &GridSpec, tol: f64, max_iter: usize) -> Result<ThermalState> {
    params.validate()?;
    let grid = grid.resolve(params)?;
    let ha = params.h_alpha();
    let t = params.t;
    let drive: Vec<C64> = grid.nodes.iter().map(|x| x * x - ha).collect();
    let (eps, report) = match params.c {
        Coupling::Infinite => (drive.clone(), SolverReport { converged: true, iterations: 0, residual: 0.0, damping: 1.0 }),
        Coupling::Finite(c) => {
            let n = grid.len();
            let kmat = kernel_matrix(&grid, c, t);
            let map = |e: &[C64]| -> Result<Vec<C64>> {
                let l = log_weights(e, t);
                Ok((0..n)
                    .map(|j| {
                        let row = &kmat[j * n..(j + 1) * n];
                        let s: C64 = row.iter().zip(&l).map(|(k, v)| v * *k).sum();
                        drive[j] - s
                    })
                    .collect())
            };
            let opts = FixedPointOptions { tol, max_iter, ..Default::default() };
            fixed_point(map, drive.clone(), &opts).map_err(|e| match e {
                Error::NoConvergence { report, .. } => Error::NoConvergence { what: "Yang-Yang".into(), report },
                other => other,
            })?
        }
    };
    ThermalState::assemble(*params, grid, eps, report)
}

impl ThermalState {
    fn assemble(params: ModelParams, grid: QuadGrid, eps: Vec<C64>, report: SolverReport) -> Result<Self> {
        let t = params.t;
        let log_weight = log_weights(&eps, t);
        let theta: Vec<C64> = eps.iter().map(|e| fermi_from_eps(*e, t)).collect();
        let rho_t = match params.c {
            Coupling::Infinite => vec![C64::new(1.0 / (2.0 * PI), 0.0); grid.len()],
            Coupling::Finite(c) => {
                let nodes: Vec<C64> = grid.nodes.iter().map(|x| C64::new(*x, 0.0)).collect();
                let weights: Vec<C64> = grid.weights.iter().map(|w| C64::new(*w, 0.0)).collect();
                let rhs = vec![C64::new(1.0 / (2.0 * PI), 0.0); grid.len()];
                let (v, _) = nystrom_solve(
                    &nodes,
                    &weights,
                    |j, k| -lieb_kernel(nodes[j] - nodes[k], c) * theta[k] / (2.0 * PI),
                    &rhs,
                )?;
                v
            }
        };
        let rho_p: Vec<C64> = rho_t.iter().zip(&theta).map(|(r, th)| r * th).collect();
        let density = grid.weights.iter().zip(&rho_p).map(|(w, r)| r * *w).sum();
        let pressure = grid.weights.iter().zip(&log_weight).map(|(w, l)| l * *w).sum::<C64>() * (t / (2.0 * PI));
        Ok(ThermalState { params, grid, eps, log_weight, rho_t, rho_p, density, pressure, report })
    }

    pub fn check_strip(&self, lambda: C64) -> Result<()> {
        if lambda.im.abs() >= self.params.strip_cap() || !lambda.is_finite() {
            return Err(Error::OutsideStrip { at: lambda });
        }
        Ok(())
    }

    /// ε and ε′ at a complex point by continuation of the stored log-weight.
    pub fn epsilon_with_derivative(&self, lambda: C64) -> Result<(C64, C64)> {
        self.check_strip(lambda)?;
        let ha = self.params.h_alpha();
        match self.params.c {
            Coupling::Infinite => Ok((lambda * lambda - ha, lambda * 2.0)),
            Coupling::Finite(c) => {
                let pref = self.params.t / (2.0 * PI);
                let mut s = C64::new(0.0, 0.0);
                let mut ds = C64::new(0.0, 0.0);
                for k in 0..self.grid.len() {
                    let x = lambda - self.grid.nodes[k];
                    let d = x * x + c * c;
                    let wl = self.log_weight[k] * self.grid.weights[k];
                    s += wl * (2.0 * c) / d;
                    ds += wl * (-4.0 * c) * x / (d * d);
                }
                Ok((lambda * lambda - ha - s * pref, lambda * 2.0 - ds * pref))
            }
        }
    }

    pub fn epsilon_at(&self, lambda: C64) -> Result<C64> {
        Ok(self.epsilon_with_derivative(lambda)?.0)
    }

    pub fn epsilon_prime_at(&self, lambda: C64) -> Result<C64> {
        Ok(self.epsilon_with_derivative(lambda)?.1)
    }

    /// ϑ(λ) = (1+e^{ε(λ)/T})^{−1}.
    pub fn fermi_weight(&self, lambda: C64) -> Result<C64> {
        let e = self.epsilon_at(lambda)? / self.params.t;
        let den = if e.re > 0.0 { 1.0 + (-e).exp() } else { 1.0 + e.exp() };
        let scaled = if e.re > 0.0 { den * e.exp() } else { den };
        if scaled.norm() < 1e-13 {
            return Err(Error::AtPole { at: lambda });
        }
        Ok(fermi_from_eps(e * self.params.t, self.params.t))
    }

    pub fn fermi_weights(&self) -> Vec<C64> {
        self.eps.iter().map(|e| fermi_from_eps(*e, self.params.t)).collect()
    }

    /// Continuation of ρ_t off the real axis through its integral equation.
    pub fn rho_t_at(&self, lambda: C64) -> Result<C64> {
        self.check_strip(lambda)?;
        let base = C64::new(1.0 / (2.0 * PI), 0.0);
        match self.params.c {
            Coupling::Infinite => Ok(base),
            Coupling::Finite(c) => {
                let s: C64 = (0..self.grid.len())
                    .map(|k| lieb_kernel(lambda - self.grid.nodes[k], c) * self.rho_p[k] * self.grid.weights[k])
                    .sum();
                Ok(base + s / (2.0 * PI))
            }
        }
    }

    pub fn pressure(&self) -> C64 {
        self.pressure
    }

    pub fn density(&self) -> C64 {
        self.density
    }

    /// Sup-norm residual of the Yang–Yang equation on the grid.
    pub fn residual(&self) -> f64 {
        let ha = self.params.h_alpha();
        let Coupling::Finite(c) = self.params.c else {
            return self
                .grid
                .nodes
                .iter()
                .zip(&self.eps)
                .map(|(x, e)| (x * x - ha - e).norm())
                .fold(0.0, f64::max);
        };
        let pref = self.params.t / (2.0 * PI);
        let n = self.grid.len();
        (0..n)
            .map(|j| {
                let x = self.grid.nodes[j];
                let s: C64 = (0..n)
                    .map(|k| self.log_weight[k] * (lieb_kernel(C64::new(x - self.grid.nodes[k], 0.0), c) * self.grid.weights[k]))
                    .sum();
                (x * x - ha - s * pref - self.eps[j]).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ThermalDump { version: SCHEMA_VERSION, state: self.clone() })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: ThermalDump = serde_json::from_str(s)?;
        if d.version != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported thermal schema version {}", d.version)));
        }
        Ok(d.state)
    }
}

pub(crate) fn fermi_from_eps(eps: C64, t: f64) -> C64 {
    let x = eps / t;
    if x.re > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: Coupling, h: f64, t: f64) -> ModelParams {
        ModelParams::new(c, h, t, C64::new(0.0, 0.0)).unwrap()
    }

    #[test]
    fn free_fermions_are_exact() {
        let s = solve_epsilon(&p(Coupling::Infinite, 1.0, 1.0), &GridSpec::default(), 1e-12, 10).unwrap();
        for (x, e) in s.grid.nodes.iter().zip(&s.eps) {
            assert!((e - (x * x - 1.0)).norm() < 1e-12);
        }
        assert!(s.rho_t.iter().all(|r| (r - 1.0 / (2.0 * PI)).norm() < 1e-12));
        assert_eq!(s.epsilon_prime_at(C64::new(0.3, 0.7)).unwrap(), C64::new(0.6, 1.4));
        let th0 = s.fermi_weight(C64::new(0.0, 0.0)).unwrap();
        assert!((th0.re - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-15);
        assert!((th0.re - 0.73106).abs() < 1e-5);
    }

    #[test]
    fn yang_yang_converges_at_reference_point() {
        let s = solve_epsilon(&p(Coupling::Finite(10.0), 4.0, 2.0), &GridSpec::default(), 1e-12, 200).unwrap();
        assert!(s.report.converged && s.report.iterations < 200);
        assert!(s.residual() < 1e-10);
        for (a, b) in s.eps.iter().zip(s.eps.iter().rev()) {
            assert!((a - b).norm() < 1e-10, "evenness");
        }
        assert!(s.eps.iter().all(|e| e.im.abs() < 1e-12));
        for (rt, rp) in s.rho_t.iter().zip(&s.rho_p) {
            assert!(rt.re >= rp.re && rp.re >= 0.0);
        }
        // real node continuation agrees with stored values
        let k = 37;
        let x = C64::new(s.grid.nodes[k], 0.0);
        assert!((s.epsilon_at(x).unwrap() - s.eps[k]).norm() < 1e-12);
        let z = C64::new(0.8, 1.3);
        assert!((s.epsilon_at(z.conj()).unwrap() - s.epsilon_at(z).unwrap().conj()).norm() < 1e-12);
        assert!(s.epsilon_at(C64::new(0.0, 9.5)).is_err());
    }

    #[test]
    fn grid_refinement_is_stable() {
        let params = p(Coupling::Finite(4.0), 2.0, 1.0);
        let coarse = GridSpec { cutoff: Some(8.0), panels: Some(25), order: 16 };
        let fine = GridSpec { cutoff: Some(8.0), panels: Some(50), order: 16 };
        let a = solve_epsilon(&params, &coarse, 1e-13, 500).unwrap();
        let b = solve_epsilon(&params, &fine, 1e-13, 500).unwrap();
        let z = C64::new(0.0, 0.0);
        assert!((a.epsilon_at(z).unwrap() - b.epsilon_at(z).unwrap()).norm() < 1e-8);
        assert!((a.rho_t_at(z).unwrap() - b.rho_t_at(z).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn pressure_and_density() {
        let g = GridSpec::default();
        let lo = solve_epsilon(&p(Coupling::Finite(10.0), -1.0, 2.0), &g, 1e-12, 500).unwrap();
        let hi = solve_epsilon(&p(Coupling::Finite(10.0), 4.0, 2.0), &g, 1e-12, 500).unwrap();
        assert!(lo.pressure.re < hi.pressure.re);
        assert!(hi.pressure.im.abs() < 1e-12);
        // c = ∞: D = (1/2π)∫ϑ
        let ff = solve_epsilon(&p(Coupling::Infinite, 1.0, 1.0), &g, 1e-12, 10).unwrap();
        let th = ff.fermi_weights();
        let d: C64 = ff.grid.weights.iter().zip(&th).map(|(w, t)| t * *w).sum::<C64>() / (2.0 * PI);
        assert!((ff.density - d).norm() < 1e-15);
    }

    #[test]
    fn json_round_trip_keeps_values() {
        let s = solve_epsilon(&p(Coupling::Finite(7.0), 1.0, 1.5), &GridSpec::default(), 1e-12, 500).unwrap();
        let back = ThermalState::from_json(&s.to_json().unwrap()).unwrap();
        assert!(back.eps == s.eps);
        assert_eq!(back.pressure, s.pressure);
        assert!(ThermalState::from_json(&s.to_json().unwrap().replace("\"version\":1", "\"version\":9")).is_err());
    }
}
