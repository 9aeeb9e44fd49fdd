use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::amplitudes::amplitude_b_checked;
use crate::deformed::{solve_selection, DeformOptions, RootSelection};
use crate::error::{Error, Result};
use crate::lengths::correlation_length;
use crate::numerics::{make_real_grid, nystrom_det};
use crate::thermo::{solve_epsilon, GridSpec, ModelParams};

type C64 = Complex64;

const FF_ORDER: usize = 16;
pub const MIN_NODES_PER_PERIOD: f64 = 8.0;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FfDeterminant {
    pub x: f64,
    pub value: C64,
    pub cutoff: f64,
    pub panels: usize,
    pub order: usize,
    pub nodes_per_period: f64,
}

fn free_fermi(lambda: f64, h: f64, t: f64) -> f64 {
    let e = (lambda * lambda - h) / t;
    if e > 700.0 {
        0.0
    } else {
        1.0 / (1.0 + e.exp())
    }
}

/// Half-width beyond which the Fermi weight is below e^{−40}.
pub fn ff_cutoff(params: &ModelParams) -> f64 {
    (params.h.max(0.0) + 40.0 * params.t).sqrt()
}

/// Panel count giving at least two panels of 16 nodes per oscillation period, and width ≤ 0.5.
pub fn ff_panels(params: &ModelParams, x: f64) -> usize {
    let width = if x > 0.0 { (8.0 * PI / x).min(0.5) } else { 0.5 };
    (2.0 * ff_cutoff(params) / width).ceil() as usize
}

pub fn ff_determinant(params: &ModelParams, x: f64) -> Result<FfDeterminant> {
    ff_determinant_on(params, x, ff_panels(params, x))
}

/// det(I+V₀) with V₀(λ,μ) = (e^{2πiα}−1) sin(x(λ−μ)/2)/(π(λ−μ)) ϑ(μ) on a given panel count.
pub fn ff_determinant_on(params: &ModelParams, x: f64, panels: usize) -> Result<FfDeterminant> {
    if !params.c.is_infinite() {
        return Err(Error::InvalidInput("the free-fermion determinant needs infinite coupling".into()));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::InvalidInput(format!("distance must be finite and non-negative, got {x}")));
    }
    let cutoff = ff_cutoff(params);
    let grid = make_real_grid(cutoff, panels, FF_ORDER)?;
    let nodes_per_period = if x > 0.0 { grid.len() as f64 / (2.0 * cutoff) * 4.0 * PI / x } else { f64::INFINITY };
    if nodes_per_period < MIN_NODES_PER_PERIOD {
        return Err(Error::GridTooCoarse(format!(
            "{nodes_per_period:.2} nodes per period at x = {x}, need {MIN_NODES_PER_PERIOD}"
        )));
    }
    let kappa = (C64::new(0.0, 2.0 * PI) * params.alpha).exp() - 1.0;
    let fw: Vec<f64> = grid.nodes.iter().map(|l| free_fermi(*l, params.h, params.t)).collect();
    let nodes: Vec<C64> = grid.nodes.iter().map(|l| C64::new(*l, 0.0)).collect();
    let weights: Vec<C64> = grid.weights.iter().map(|w| C64::new(*w, 0.0)).collect();
    let l = &grid.nodes;
    let value = nystrom_det(&nodes, &weights, |j, k| {
        let sine = if j == k { x / (2.0 * PI) } else { (0.5 * x * (l[j] - l[k])).sin() / (PI * (l[j] - l[k])) };
        kappa * sine * fw[k]
    })?;
    Ok(FfDeterminant { x, value, cutoff, panels, order: FF_ORDER, nodes_per_period })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticTerm {
    pub selection: String,
    pub p: C64,
    pub b: C64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub x: f64,
    pub oracle: C64,
    pub asymptotic: C64,
    /// |log(oracle / asymptotic)|.
    pub residual: f64,
}

/// Oracle against Σ e^{−x p_i} B_i at each x.
pub fn ff_compare(params: &ModelParams, xs: &[f64], terms: &[AsymptoticTerm]) -> Result<Vec<ComparisonRow>> {
    xs.iter()
        .map(|&x| {
            let oracle = ff_determinant(params, x)?.value;
            let asymptotic: C64 = terms.iter().map(|t| (-t.p * x).exp() * t.b).sum();
            let residual = (oracle / asymptotic).ln().norm();
            if !residual.is_finite() {
                return Err(Error::NonFinite(format!("log-residual at x = {x}")));
            }
            Ok(ComparisonRow { x, oracle, asymptotic, residual })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// r(x) ≈ e^{intercept − rate·x}.
    pub rate: f64,
    pub intercept: f64,
    pub points: usize,
    /// RMS of the log-residuals about the line.
    pub rms: f64,
}

/// Least-squares line through (x, log r).
pub fn fit_decay(xs: &[f64], residuals: &[f64]) -> Result<DecayFit> {
    if xs.len() != residuals.len() || xs.len() < 3 {
        return Err(Error::FitIllConditioned(format!("need at least 3 points, got {}", xs.len().min(residuals.len()))));
    }
    if let Some(r) = residuals.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::FitIllConditioned(format!("residual {r} has no logarithm")));
    }
    let n = xs.len() as f64;
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx < 1e-12 * n * (1.0 + mx * mx) {
        return Err(Error::FitIllConditioned("abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { rate: -slope, intercept, points: xs.len(), rms })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleStudy {
    pub leading: AsymptoticTerm,
    /// Single-pair terms built from the first pole level, sorted by Re p.
    pub candidates: Vec<AsymptoticTerm>,
    pub leading_rows: Vec<ComparisonRow>,
    /// Rows with the two smallest-Re p candidates added.
    pub corrected_rows: Vec<ComparisonRow>,
    pub fit: DecayFit,
    /// Re(p₁ − p₀) for the leading candidate.
    pub target_rate: f64,
    pub rate_mismatch: f64,
    /// max residual without corrections over max residual with them.
    pub reduction: f64,
}

const FIRST_LEVEL_PAIRS: [&str; 4] = ["+R1;-R1", "+R1;-L1", "+L1;-R1", "+L1;-L1"];

/// Free-fermion determinant against the leading term and the first correction terms.
pub fn free_fermion_study(params: &ModelParams, grid: &GridSpec, xs: &[f64]) -> Result<OracleStudy> {
    let base = params.with_alpha(C64::new(0.0, 0.0));
    let thermal = solve_epsilon(&base, grid, 1e-13, 2000)?;
    let opts = DeformOptions::default();
    let term = |sel: &RootSelection| -> Result<AsymptoticTerm> {
        let state = solve_selection(&thermal, params.alpha, sel, &opts)?;
        let p = correlation_length(&state)?.p;
        let b = amplitude_b_checked(&state)?.b;
        Ok(AsymptoticTerm { selection: sel.to_string(), p, b })
    };
    let leading = term(&RootSelection::empty())?;
    let mut candidates = FIRST_LEVEL_PAIRS
        .iter()
        .map(|s| term(&s.parse()?))
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by(|a, b| a.p.re.total_cmp(&b.p.re));

    let leading_rows = ff_compare(params, xs, std::slice::from_ref(&leading))?;
    let mut terms = vec![leading.clone()];
    terms.extend(candidates.iter().take(2).cloned());
    let corrected_rows = ff_compare(params, xs, &terms)?;
    let fit = fit_decay(xs, &leading_rows.iter().map(|r| r.residual).collect::<Vec<_>>())?;
    let target_rate = (candidates[0].p - leading.p).re;
    let max = |rows: &[ComparisonRow]| rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(OracleStudy {
        rate_mismatch: (fit.rate - target_rate).abs() / target_rate.abs(),
        reduction: max(&leading_rows) / max(&corrected_rows),
        leading,
        candidates,
        leading_rows,
        corrected_rows,
        fit,
        target_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::Coupling;

    fn ff(alpha: f64) -> ModelParams {
        ModelParams::new(Coupling::Infinite, 1.0, 1.0, C64::new(alpha, 0.0)).unwrap()
    }

    #[test]
    fn trivial_limits() {
        assert_eq!(ff_determinant(&ff(0.0), 7.0).unwrap().value, C64::new(1.0, 0.0));
        assert_eq!(ff_determinant(&ff(0.1), 0.0).unwrap().value, C64::new(1.0, 0.0));
    }

    #[test]
    fn trace_term_for_small_alpha() {
        let p = ff(1e-3);
        let x = 4.0;
        let d = ff_determinant(&p, x).unwrap().value;
        let kappa = (C64::new(0.0, 2.0 * PI) * p.alpha).exp() - 1.0;
        let g = make_real_grid(ff_cutoff(&p), 200, 16).unwrap();
        let occupied: f64 = g.integrate(&g.nodes.iter().map(|l| free_fermi(*l, 1.0, 1.0)).collect::<Vec<_>>());
        let trace = kappa * x / (2.0 * PI) * occupied;
        let rest = (d - 1.0 - trace).norm();
        assert!(rest < 2.0 * (kappa.norm() * x * occupied).powi(2), "{rest:e}");
        assert!(rest > 0.0);
    }

    #[test]
    fn grid_stable_under_doubling() {
        let p = ff(0.1);
        for x in [1.0, 12.0, 30.0] {
            let a = ff_determinant(&p, x).unwrap();
            let b = ff_determinant_on(&p, x, 2 * a.panels).unwrap();
            assert!((a.value - b.value).norm() < 1e-9 * b.value.norm(), "x = {x}");
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(matches!(ff_determinant_on(&ff(0.1), 30.0, 4), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn fit_recovers_exponential() {
        let xs: Vec<f64> = (0..8).map(|k| 2.0 + k as f64).collect();
        let r: Vec<f64> = xs.iter().map(|x| 3.0 * (-1.7 * x).exp()).collect();
        let f = fit_decay(&xs, &r).unwrap();
        assert!((f.rate - 1.7).abs() < 1e-12 && (f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(fit_decay(&xs[..2], &r[..2]), Err(Error::FitIllConditioned(_))));
        let mut z = r.clone();
        z[3] = 0.0;
        assert!(matches!(fit_decay(&xs, &z), Err(Error::FitIllConditioned(_))));
    }

    #[test]
    fn leading_term_captures_determinant() {
        // with the n = 0 term alone the log-residual is already small and shrinks with x
        let p = ff(0.1);
        let th = solve_epsilon(&p.with_alpha(C64::new(0.0, 0.0)), &GridSpec::default(), 1e-13, 1000).unwrap();
        let s = solve_selection(&th, p.alpha, &RootSelection::empty(), &DeformOptions::default()).unwrap();
        let lead = AsymptoticTerm {
            selection: String::new(),
            p: correlation_length(&s).unwrap().p,
            b: amplitude_b_checked(&s).unwrap().b,
        };
        let rows = ff_compare(&p, &[4.0, 6.0, 8.0], &[lead]).unwrap();
        assert!(rows[0].residual < 1e-2);
        assert!(rows.windows(2).all(|w| w[1].residual < w[0].residual));
    }
}
