//! The acceptance suite: ten pass/fail criteria with fixed tolerances and time budgets.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use llcorr::amplitudes::amplitude_b_checked;
use llcorr::deformed::{solve_selection, DeformOptions, RootSelection};
use llcorr::lengths::{alpha_slope_check, correlation_length, correlation_length_checked, leading_length_from};
use llcorr::poles::{free_fermion_pole, locate_poles, Half};
use llcorr::thermo::{solve_epsilon, Coupling, GridSpec, ModelParams, ThermalState};
use llcorr::verification::{
    contour_identity_check, contraction_margin, free_fermion_study, lagrange_closed, lagrange_terms, SyntheticNu,
    ToyLagrangeSpec,
};
use llcorr::Complex64;

use crate::figures::{jumps, ALL};
use crate::sweep::{compute_figure, FigureTable, Solver};

type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: {} [{:.1} s of {:.0} s]",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds,
            self.budget
        )
    }
}

pub const NAMES: [(&str, f64); 10] = [
    ("free-fermion closed form", 1.0),
    ("pole location", 5.0),
    ("leading length", 10.0),
    ("slope/density identity", 10.0),
    ("deformed solve", 60.0),
    ("amplitude normalization", 60.0),
    ("free-fermion oracle vs asymptotics", 120.0),
    ("series identity", 30.0),
    ("contour-deformation identity", 30.0),
    ("figure reproduction", 900.0),
];

/// A check result: whether every bound held, and a line of measured values.
type Check = llcorr::Result<(bool, String)>;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn params(c: Coupling, h: f64, t: f64, alpha: f64) -> llcorr::Result<ModelParams> {
    ModelParams::new(c, h, t, C64::new(alpha, 0.0))
}

fn thermal(p: &ModelParams) -> llcorr::Result<ThermalState> {
    solve_epsilon(p, &GridSpec::default(), 1e-13, 2000)
}

fn reference() -> llcorr::Result<ModelParams> {
    params(Coupling::Finite(10.0), 4.0, 2.0, 0.0)
}

fn c1() -> Check {
    let p = params(Coupling::Infinite, 1.0, 1.0, 0.0)?;
    let th = thermal(&p)?;
    let eps = th.grid.nodes.iter().zip(&th.eps).map(|(l, e)| (e - (l * l - 1.0)).norm()).fold(0.0, f64::max);
    let rho = th.rho_t.iter().map(|r| (r - 1.0 / (2.0 * PI)).norm()).fold(0.0, f64::max);
    Ok((eps < 1e-12 && rho < 1e-12, format!("sup|ε−(λ²−h)| = {eps:.2e}, sup|ρ_t−1/2π| = {rho:.2e}")))
}

fn c2() -> Check {
    let p = params(Coupling::Infinite, 1.0, 1.0, 0.0)?;
    let table = locate_poles(&thermal(&p)?, 3)?;
    let seeds = table
        .entries
        .iter()
        .map(|e| (e.r - free_fermion_pole(p.h_alpha(), p.t, e.half, e.side, e.m)).norm())
        .fold(0.0, f64::max);
    let complete = table.entries.len() == 16;

    let q = reference()?;
    let th = thermal(&q)?;
    let t = locate_poles(&th, 3)?;
    let residual = t.entries.iter().map(|e| e.residual).fold(0.0, f64::max);
    let (nu, iu) = t.audit(&th, Half::Upper)?;
    let (nl, il) = t.audit(&th, Half::Lower)?;
    let counts = nu == iu as i64 && nl == il as i64;
    Ok((
        complete && seeds < 1e-10 && residual < 1e-10 && counts && !t.entries.is_empty(),
        format!(
            "seed gap {seeds:.2e} over {} poles, residual {residual:.2e}, winding {nu}/{nl} vs table {iu}/{il}",
            table.entries.len()
        ),
    ))
}

fn c3() -> Check {
    let q = reference()?;
    let th = thermal(&q)?;
    let empty = RootSelection::empty();
    let opts = DeformOptions::default();
    let p0 = correlation_length(&solve_selection(&th, zero(), &empty, &opts)?)?.p;
    let alpha = C64::new(0.1, 0.0);
    let contour = correlation_length(&solve_selection(&th, alpha, &empty, &opts)?)?.p;
    let pressure = leading_length_from(&th, alpha)?;
    let gap = (contour - pressure).norm();
    Ok((p0.norm() < 1e-10 && gap < 1e-9, format!("|p₀(0)| = {:.2e}, contour vs pressure form at α=0.1: {gap:.2e}", p0.norm())))
}

fn c4() -> Check {
    let s = alpha_slope_check(&reference()?, &GridSpec::default())?;
    Ok((s.mismatch < 1e-6, format!("∂p₀/∂α = {:.10}, −2πiD = {:.10}, relative mismatch {:.2e}", s.slope, s.target, s.mismatch)))
}

fn c5() -> Check {
    let sel: RootSelection = "+R1;-R1".parse()?;
    let (r, state) = correlation_length_checked(&reference()?, &GridSpec::default(), &sel, &DeformOptions::default())?;
    let eq = state.equation_residual()?;
    let roots = state.root_residuals.iter().copied().fold(0.0, f64::max);
    let delta = r.refinement_delta.unwrap_or(f64::INFINITY);
    Ok((
        eq < 1e-8 && roots < 1e-10 && r.p.im.abs() < 1e-8 && r.p.re > 0.0 && delta < 1e-6,
        format!("p = {:.10}, equation residual {eq:.2e}, root residual {roots:.2e}, refinement change {delta:.2e}", r.p),
    ))
}

fn c6() -> Check {
    let th = thermal(&reference()?)?;
    let s = solve_selection(&th, zero(), &RootSelection::empty(), &DeformOptions::default())?;
    let r = amplitude_b_checked(&s)?;
    let rho1 = s.thermal.rho_t_at(r.theta1)? * (2.0 * PI);
    let rho2 = s.thermal.rho_t_at(r.theta2)? * (2.0 * PI);
    let d1 = (r.det_u1 / r.det_k_eps - rho1).norm();
    let d2 = (r.det_u2 / r.det_k_u - rho2).norm();
    let b = (r.b - 1.0).norm();
    let spread = r.theta_spread.unwrap_or(f64::INFINITY);
    Ok((
        b < 1e-6 && d1 < 1e-6 && d2 < 1e-6 && spread < 1e-8,
        format!("|B−1| = {b:.2e}, ratio identities {d1:.2e} / {d2:.2e}, θ spread {spread:.2e}"),
    ))
}

fn c7() -> Check {
    let p = params(Coupling::Infinite, 1.0, 1.0, 0.1)?;
    let xs: Vec<f64> = (10..=30).map(f64::from).collect();
    let s = free_fermion_study(&p, &GridSpec::default(), &xs)?;
    Ok((
        s.rate_mismatch < 0.1 && s.reduction >= 10.0,
        format!(
            "fitted rate {:.4} vs Re(p₁−p₀) = {:.4} (mismatch {:.1}%), correction reduces max residual {:.2}×",
            s.fit.rate,
            s.target_rate,
            100.0 * s.rate_mismatch,
            s.reduction
        ),
    ))
}

fn c8() -> Check {
    let spec = ToyLagrangeSpec::exponential();
    let margin = contraction_margin(&spec)?;
    let direct: f64 = lagrange_terms(&spec, 12)?.iter().sum();
    let closed = lagrange_closed(&spec)?.value;
    let gap = (closed - direct).norm();
    Ok((margin >= 3.0 && gap < 1e-8, format!("margin {margin:.3}, |direct(n≤12) − closed| = {gap:.2e} (closed {:.15})", closed.re)))
}

fn c9() -> Check {
    let g = |z: C64| 0.2 * z * (-z * z / 8.0).exp();
    let gp = |z: C64| 0.2 * (1.0 - z * z / 4.0) * (-z * z / 8.0).exp();
    let one = contour_identity_check(&SyntheticNu::standard(1)?, &g, &gp, 1.5)?.gap;
    let two = contour_identity_check(&SyntheticNu::standard(2)?, &g, &gp, 1.5)?.gap;
    Ok((one < 1e-10 && two < 1e-10, format!("gap n=1 {one:.2e}, n=2 {two:.2e}")))
}

/// All rows converged, Re p > 0, and no jumps in Re p along any curve.
pub fn judge_figures(tables: &[FigureTable]) -> (bool, String) {
    let mut rows = 0;
    let mut failed = 0;
    let mut nonpositive = 0;
    let mut jumped = Vec::new();
    for t in tables {
        for (label, series) in t.series() {
            rows += series.len();
            failed += series.iter().filter(|r| !r.converged()).count();
            nonpositive += series.iter().filter_map(|r| r.p()).filter(|p| !(p.re > 0.0)).count();
            let re: Vec<f64> = series.iter().filter_map(|r| r.p()).map(|p| p.re).collect();
            for i in jumps(&re, 5.0, 1e-9) {
                jumped.push(format!("{} {label} at {}", t.figure, t.axis.of(&series[i].params)));
            }
        }
    }
    let pass = rows > 0 && failed == 0 && nonpositive == 0 && jumped.is_empty();
    let mut detail = format!("{rows} rows, {failed} unconverged, {nonpositive} with Re p ≤ 0, {} jumps", jumped.len());
    if !jumped.is_empty() {
        detail.push_str(&format!(" ({})", jumped.join("; ")));
    }
    (pass, detail)
}

fn c10(figures: &mut Option<Vec<FigureTable>>) -> Check {
    let solver = Solver::default();
    let tables = ALL
        .iter()
        .map(|f| compute_figure(&solver, *f, zero()))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(|e| llcorr::Error::InvalidInput(e.to_string()))?;
    let verdict = judge_figures(&tables);
    *figures = Some(tables);
    Ok(verdict)
}

pub struct Report {
    pub outcomes: Vec<Outcome>,
    /// The figure tables, when criterion 10 ran.
    pub figures: Option<Vec<FigureTable>>,
}

impl Report {
    pub fn failed(&self) -> Vec<u8> {
        self.outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect()
    }
}

/// Runs the listed criteria (1–10) in order. A criterion that errors or overruns its budget fails.
pub fn run(ids: &[u8]) -> Report {
    let mut figures = None;
    let mut outcomes = Vec::new();
    for &id in ids {
        let (name, budget) = NAMES[(id - 1) as usize];
        let start = Instant::now();
        let check = match id {
            1 => c1(),
            2 => c2(),
            3 => c3(),
            4 => c4(),
            5 => c5(),
            6 => c6(),
            7 => c7(),
            8 => c8(),
            9 => c9(),
            10 => c10(&mut figures),
            _ => Err(llcorr::Error::InvalidInput(format!("no criterion {id}"))),
        };
        let seconds = start.elapsed().as_secs_f64();
        let (pass, mut detail) = match check {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if seconds > budget {
            detail.push_str(" (over time budget)");
        }
        outcomes.push(Outcome { id, name, pass: pass && seconds <= budget, detail, seconds, budget });
    }
    Report { outcomes, figures }
}

pub fn parse_ids(s: &str) -> crate::Result<Vec<u8>> {
    let ids = s
        .split(',')
        .map(|t| t.trim().parse::<u8>().ok().filter(|i| (1..=10).contains(i)))
        .collect::<Option<Vec<u8>>>()
        .ok_or_else(|| crate::CliError::Config(format!("criteria are numbers 1 to 10, got '{s}'")))?;
    Ok(ids)
}
