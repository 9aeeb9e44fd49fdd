//! Correlation lengths p_i, the leading length from pressures, and the transfer-matrix analogs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::deformed::{build_contour, solve_selection, DeformOptions, DeformedContour, DeformedState, RootSelection};
use crate::error::{Error, Result};
use crate::numerics::{log1p_exp, unwrap_imag};
use crate::thermo::{solve_epsilon, GridSpec, ModelParams, ThermalState};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthRoute {
    /// Integral over the deformed contour.
    Contour,
    /// Real-axis integral plus the root positions; used when the detours degenerate.
    Residue,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LengthResult {
    pub selection: String,
    pub p: C64,
    pub route: LengthRoute,
    /// |p(contour) − p(residue)| when both were available.
    pub route_gap: Option<f64>,
    /// Largest imaginary jump absorbed while unwrapping the log-weights on the real axis.
    pub unwrap_jump: f64,
    pub refinement_delta: Option<f64>,
}

/// −(1/2π)∫_ℝ log[(1+e^{−u/T})/(1+e^{−ε/T})] − iΣ(ŝ⁺ − ŝ⁻).
pub fn length_by_residues(state: &DeformedState) -> Result<(C64, f64)> {
    let t = state.params.t;
    let mut lu: Vec<C64> = state.u.iter().map(|u| log1p_exp(-u / t)).collect();
    let raw = lu.clone();
    unwrap_imag(&mut lu);
    let jump = lu.iter().zip(&raw).map(|(a, b)| (a.im - b.im).abs()).fold(0.0, f64::max);
    if lu[lu.len() - 1].norm() > 1e-6 {
        return Err(Error::BranchJump(format!("log(1+e^(-u/T)) ends at {} on the real axis", lu[lu.len() - 1])));
    }
    let w = &state.thermal.grid.weights;
    let integral: C64 = (0..lu.len()).map(|k| (lu[k] - state.thermal.log_weight[k]) * w[k]).sum();
    let roots: C64 = state.plus.iter().sum::<C64>() - state.minus.iter().sum::<C64>();
    Ok((-integral / (2.0 * PI) - C64::i() * roots, jump))
}

pub fn length_on_contour(contour: &DeformedContour) -> C64 {
    let k = &contour.contour;
    let s: C64 = (0..k.len()).map(|j| (contour.log_u[j] - contour.log_eps[j]) * k.weights[j]).sum();
    -s / (2.0 * PI)
}

fn roots_sit_on_poles(state: &DeformedState) -> bool {
    state.roots().iter().zip(state.origins()).any(|(s, r)| (s - r).norm() < 1e-8)
}

/// Correlation length of a solved deformation, from the contour integral; the residue form is
/// computed alongside as a cross-check and used alone when roots coincide with their poles.
pub fn correlation_length(state: &DeformedState) -> Result<LengthResult> {
    if state.gamma != 1.0 {
        return Err(Error::InvalidInput("correlation lengths need the γ = 1 solution".into()));
    }
    let (p_res, jump) = length_by_residues(state)?;
    let selection = state.selection.to_string();
    if roots_sit_on_poles(state) {
        return Ok(LengthResult {
            selection,
            p: p_res,
            route: LengthRoute::Residue,
            route_gap: None,
            unwrap_jump: jump,
            refinement_delta: None,
        });
    }
    let contour = build_contour(state)?;
    let p = length_on_contour(&contour);
    Ok(LengthResult {
        selection,
        p,
        route: LengthRoute::Contour,
        route_gap: Some((p - p_res).norm()),
        unwrap_jump: jump,
        refinement_delta: None,
    })
}

/// Solves, measures p, then repeats on a doubled grid with halved γ-steps and records the change.
pub fn correlation_length_checked(
    params: &ModelParams,
    grid: &GridSpec,
    selection: &RootSelection,
    opts: &DeformOptions,
) -> Result<(LengthResult, DeformedState)> {
    let base = params.with_alpha(C64::new(0.0, 0.0));
    let thermal = solve_epsilon(&base, grid, 1e-13, 2000)?;
    let state = solve_selection(&thermal, params.alpha, selection, opts)?;
    let mut result = correlation_length(&state)?;
    let fine_grid = grid.doubled(&base)?;
    let fine_thermal = solve_epsilon(&base, &fine_grid, 1e-13, 2000)?;
    let fine_opts = DeformOptions { gamma_steps: 2 * opts.gamma_steps, ..*opts };
    let fine = solve_selection(&fine_thermal, params.alpha, selection, &fine_opts)?;
    let p_fine = correlation_length(&fine)?.p;
    result.refinement_delta = Some((p_fine - result.p).norm());
    Ok((result, state))
}

/// p₀ = (P(h) − P(h_α))/T from two thermal solves on the same grid.
pub fn leading_length(params: &ModelParams, grid: &GridSpec) -> Result<C64> {
    let base = solve_epsilon(&params.with_alpha(C64::new(0.0, 0.0)), grid, 1e-13, 2000)?;
    leading_length_from(&base, params.alpha)
}

pub fn leading_length_from(base: &ThermalState, alpha: C64) -> Result<C64> {
    if alpha == C64::new(0.0, 0.0) {
        return Ok(C64::new(0.0, 0.0));
    }
    let shifted = solve_epsilon(&base.params.with_alpha(alpha), &GridSpec::of(&base.grid), 1e-13, 2000)?;
    Ok((base.pressure - shifted.pressure) / base.params.t)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub slope: C64,
    pub target: C64,
    pub mismatch: f64,
    /// Slope from the plain central difference at the base step, before extrapolation.
    pub raw_slope: C64,
}

/// ∂p₀/∂α at α = 0 by central differences (step 1e−4, one Richardson level) against −2πiD.
pub fn alpha_slope_check(params: &ModelParams, grid: &GridSpec) -> Result<SlopeCheck> {
    let base = solve_epsilon(&params.with_alpha(C64::new(0.0, 0.0)), grid, 1e-13, 2000)?;
    let diff = |h: f64| -> Result<C64> {
        let up = leading_length_from(&base, C64::new(h, 0.0))?;
        let down = leading_length_from(&base, C64::new(-h, 0.0))?;
        Ok((up - down) / (2.0 * h))
    };
    let step = 1e-4;
    let raw = diff(step)?;
    let half = diff(step / 2.0)?;
    let slope = (half * 4.0 - raw) / 3.0;
    let target = C64::new(0.0, -2.0 * PI) * base.density;
    Ok(SlopeCheck { slope, target, mismatch: (slope - target).norm() / target.norm(), raw_slope: raw })
}

/// Λ_i = (1/2π)∫_Ĉ log(1+e^{−u/T}).
pub fn qtm_eigenvalue(contour: &DeformedContour) -> C64 {
    let k = &contour.contour;
    (0..k.len()).map(|j| contour.log_u[j] * k.weights[j]).sum::<C64>() / (2.0 * PI)
}

/// Λ₀ at the physical chemical potential, equal to P/T.
pub fn qtm_leading(thermal: &ThermalState) -> C64 {
    thermal.pressure / thermal.params.t
}

/// e^{−x(Λ₀(h) − Λ_i(h_α))}.
pub fn qtm_ratio(contour: &DeformedContour, thermal: &ThermalState, x: f64) -> C64 {
    (-(qtm_leading(thermal) - qtm_eigenvalue(contour)) * x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::Coupling;

    fn params(c: Coupling, h: f64, t: f64, alpha: f64) -> ModelParams {
        ModelParams::new(c, h, t, C64::new(alpha, 0.0)).unwrap()
    }

    fn deform(p: &ModelParams, sel: &str) -> DeformedState {
        let th = solve_epsilon(&p.with_alpha(C64::new(0.0, 0.0)), &GridSpec::default(), 1e-13, 1000).unwrap();
        solve_selection(&th, p.alpha, &sel.parse().unwrap(), &DeformOptions::default()).unwrap()
    }

    #[test]
    fn empty_selection_at_zero_alpha_has_zero_length() {
        let d = deform(&params(Coupling::Finite(10.0), 4.0, 2.0, 0.0), "");
        let r = correlation_length(&d).unwrap();
        assert!(r.p.norm() < 1e-10);
    }

    #[test]
    fn empty_selection_matches_pressure_difference() {
        let p = params(Coupling::Finite(10.0), 4.0, 2.0, 0.1);
        let d = deform(&p, "");
        let r = correlation_length(&d).unwrap();
        let p0 = leading_length(&p, &GridSpec::default()).unwrap();
        assert!((r.p - p0).norm() < 1e-9, "{} vs {p0}", r.p);
        let back = leading_length(&p.with_alpha(C64::new(-0.1, 0.0)), &GridSpec::default()).unwrap();
        assert!((back - p0.conj()).norm() < 1e-10);
    }

    #[test]
    fn free_fermion_pair_length() {
        // at c = ∞ the pair deforms into √(h_α ± iπT); p − p₀ = −iΣ(ŝ⁺ − ŝ⁻)
        let p = params(Coupling::Infinite, 1.0, 1.0, 0.1);
        let d = deform(&p, "+R1;-R1");
        let r = correlation_length(&d).unwrap();
        assert_eq!(r.route, LengthRoute::Contour);
        assert!(r.route_gap.unwrap() < 1e-10);
        let p0 = leading_length(&p, &GridSpec::default()).unwrap();
        let ha = d.params.h_alpha();
        let expect = p0 - C64::i() * ((ha + C64::new(0.0, PI)).sqrt() - (ha - C64::new(0.0, PI)).sqrt());
        assert!((r.p - expect).norm() < 1e-10, "{} vs {expect}", r.p);
        // α = 0: roots sit on the poles, p = 2 Im r
        let d0 = deform(&params(Coupling::Infinite, 1.0, 1.0, 0.0), "+R1;-R1");
        let r0 = correlation_length(&d0).unwrap();
        assert_eq!(r0.route, LengthRoute::Residue);
        assert!((r0.p - 2.0 * C64::new(1.0, PI).sqrt().im).norm() < 1e-12);
    }

    #[test]
    fn slope_matches_density() {
        let c = alpha_slope_check(&params(Coupling::Infinite, 1.0, 1.0, 0.0), &GridSpec::default()).unwrap();
        assert!(c.mismatch < 1e-6, "{c:?}");
    }

    #[test]
    fn qtm_correspondence() {
        let p = params(Coupling::Finite(10.0), 4.0, 2.0, 0.0);
        let d = deform(&p, "+R1;-R1");
        let k = build_contour(&d).unwrap();
        let lam = qtm_eigenvalue(&k);
        let lam0 = qtm_leading(&d.thermal);
        let pl = length_on_contour(&k);
        assert!((pl - (lam0 - lam)).norm() < 1e-10);
        assert!(lam.re < lam0.re);
        assert!((qtm_ratio(&k, &d.thermal, 2.0) - (-pl * 2.0).exp()).norm() < 1e-10);
    }
}
