//! Poles r± of the Fermi weight in the complex strip and their residues.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{count_zeros_logderiv, newton_complex};
use crate::thermo::{solve_epsilon, Coupling, GridSpec, ThermalState};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Half {
    Upper,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

impl Half {
    pub fn sign(self) -> f64 {
        match self {
            Half::Upper => 1.0,
            Half::Lower => -1.0,
        }
    }
}

/// Which branch of ε/T = iπk the pole sits on: k = ±(2m+1).
pub fn branch_index(half: Half, side: Side, m: usize) -> i64 {
    let k = 2 * m as i64 + 1;
    match (half, side) {
        (Half::Upper, Side::Right) | (Half::Lower, Side::Left) => k,
        _ => -k,
    }
}

/// Closed-form pole of the c = ∞ Fermi weight.
pub fn free_fermion_pole(h_alpha: C64, t: f64, half: Half, side: Side, m: usize) -> C64 {
    let k = branch_index(half, side, m) as f64;
    let root = (h_alpha + C64::new(0.0, PI * t * k)).sqrt();
    match side {
        Side::Right => root,
        Side::Left => -root,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleEntry {
    pub half: Half,
    pub side: Side,
    pub m: usize,
    pub r: C64,
    pub residue: C64,
    pub residual: f64,
}

impl PoleEntry {
    pub fn label(&self) -> String {
        let h = if self.half == Half::Upper { '+' } else { '-' };
        let s = if self.side == Side::Right { 'R' } else { 'L' };
        format!("{h}{s}{}", self.m + 1)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoleTable {
    pub m_max: usize,
    pub im_cap: f64,
    pub entries: Vec<PoleEntry>,
    /// Entries that could not be produced, with the reason.
    pub skipped: Vec<String>,
}

/// `1+e^{ε/T}` as `(|f|, f′/f)`, safe against overflow of the exponential.
pub(crate) fn pole_logderiv(state: &ThermalState, lambda: C64) -> Result<(f64, C64)> {
    let (e, de) = state.epsilon_with_derivative(lambda)?;
    let x = e / state.params.t;
    let modulus = if x.re > 700.0 { f64::MAX } else { (1.0 + x.exp()).norm() };
    let ratio = de / state.params.t / (1.0 + (-x).exp());
    Ok((modulus, ratio))
}

fn newton_on_branch(state: &ThermalState, k: i64, seed: C64) -> Result<C64> {
    let t = state.params.t;
    let shift = C64::new(0.0, PI * k as f64);
    let (r, _) = newton_complex(
        |z| {
            let (e, de) = state.epsilon_with_derivative(z)?;
            Ok((e / t - shift, de / t))
        },
        seed,
        1e-13,
        60,
    )?;
    Ok(r)
}

/// ϑ_reg(r) = −T/ε′(r).
pub fn fermi_residue(state: &ThermalState, r: C64) -> Result<C64> {
    let de = state.epsilon_prime_at(r)?;
    if de.norm() < 1e-14 {
        return Err(Error::DerivativeVanishes { at: r });
    }
    Ok(-state.params.t / de)
}

pub fn pole_residual(state: &ThermalState, r: C64) -> Result<f64> {
    Ok((1.0 + (state.epsilon_at(r)? / state.params.t).exp()).norm())
}

/// Continues a pole from c = ∞ down to the target coupling through c/s, s ∈ (0, 1].
fn continue_in_coupling(state: &ThermalState, half: Half, side: Side, m: usize) -> Result<C64> {
    let Coupling::Finite(c) = state.params.c else {
        return Err(Error::InvalidInput("continuation needs finite coupling".into()));
    };
    let grid = GridSpec::of(&state.grid);
    let k = branch_index(half, side, m);
    let mut r = free_fermion_pole(state.params.h_alpha(), state.params.t, half, side, m);
    let steps = 16;
    for j in 1..=steps {
        let s = j as f64 / steps as f64;
        let st = if j == steps {
            state.clone()
        } else {
            let mut p = state.params;
            p.c = Coupling::Finite(c / s);
            solve_epsilon(&p, &grid, 1e-13, 1000)?
        };
        r = newton_on_branch(&st, k, r)?;
    }
    Ok(r)
}

pub fn locate_poles(state: &ThermalState, m_max: usize) -> Result<PoleTable> {
    let cap = state.params.strip_cap();
    let ha = state.params.h_alpha();
    let t = state.params.t;
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for half in [Half::Upper, Half::Lower] {
        for side in [Side::Right, Side::Left] {
            for m in 0..=m_max {
                let seed = free_fermion_pole(ha, t, half, side, m);
                if seed.im.abs() >= cap {
                    skipped.push(format!("{half:?} {side:?} m={m}: {}", Error::SeedOutsideStrip { seed }));
                    continue;
                }
                let k = branch_index(half, side, m);
                let found = newton_on_branch(state, k, seed).or_else(|first| {
                    if state.params.c.is_infinite() {
                        Err(first)
                    } else {
                        continue_in_coupling(state, half, side, m)
                    }
                });
                let r = match found {
                    Ok(r) => r,
                    Err(e) => {
                        skipped.push(format!("{half:?} {side:?} m={m}: {e}"));
                        continue;
                    }
                };
                if r.im * half.sign() <= 0.0 || r.im.abs() >= cap {
                    skipped.push(format!("{half:?} {side:?} m={m}: root {r} left its half-strip"));
                    continue;
                }
                let residual = pole_residual(state, r)?;
                if residual > 1e-10 {
                    skipped.push(format!("{half:?} {side:?} m={m}: residual {residual:e}"));
                    continue;
                }
                let residue = fermi_residue(state, r)?;
                if let Some(dup) = entries.iter().find(|e: &&PoleEntry| (e.r - r).norm() < 1e-8) {
                    skipped.push(format!("{half:?} {side:?} m={m}: duplicate of {}", dup.label()));
                    continue;
                }
                entries.push(PoleEntry { half, side, m, r, residue, residual });
            }
        }
    }
    entries.sort_by_key(|e| (e.half, e.side, e.m));
    Ok(PoleTable { m_max, im_cap: cap, entries, skipped })
}

impl PoleTable {
    pub fn get(&self, half: Half, side: Side, m: usize) -> Option<&PoleEntry> {
        self.entries.iter().find(|e| e.half == half && e.side == side && e.m == m)
    }

    pub fn points(&self) -> Vec<C64> {
        self.entries.iter().map(|e| e.r).collect()
    }

    /// Distance from ℝ to the nearest located pole.
    pub fn nearest_distance(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.r.im.abs()).reduce(f64::min)
    }

    /// Argument-principle count of poles in one half-plane below the next unsearched level,
    /// returned with the number of table entries in the same window.
    pub fn audit(&self, state: &ThermalState, half: Half) -> Result<(i64, usize)> {
        let ha = state.params.h_alpha();
        let t = state.params.t;
        let ours: Vec<&PoleEntry> = self.entries.iter().filter(|e| e.half == half).collect();
        let top_found = ours.iter().map(|e| e.r.im.abs()).fold(0.0, f64::max);
        let next = [Side::Right, Side::Left]
            .iter()
            .map(|s| free_fermion_pole(ha, t, half, *s, self.m_max + 1).im.abs())
            .fold(f64::INFINITY, f64::min);
        let y = (0.5 * (top_found + next)).min(0.5 * (top_found + self.im_cap)).max(top_found * 1.05 + 1e-3);
        let x = ours.iter().map(|e| e.r.re.abs()).fold(0.0, f64::max) + 2.0;
        let (lo, hi) = match half {
            Half::Upper => (C64::new(-x, 0.0), C64::new(x, y)),
            Half::Lower => (C64::new(-x, -y), C64::new(x, 0.0)),
        };
        let n = count_zeros_logderiv(|z| pole_logderiv(state, z), lo, hi)?;
        let inside = ours.iter().filter(|e| e.r.im.abs() < y).count();
        Ok((n, inside))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["half", "side", "m", "re_r", "im_r", "re_residue", "im_residue", "residual"])?;
        for e in &self.entries {
            w.write_record([
                if e.half == Half::Upper { "+" } else { "-" }.to_string(),
                if e.side == Side::Right { "R" } else { "L" }.to_string(),
                e.m.to_string(),
                format!("{:.16e}", e.r.re),
                format!("{:.16e}", e.r.im),
                format!("{:.16e}", e.residue.re),
                format!("{:.16e}", e.residue.im),
                format!("{:.3e}", e.residual),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::ModelParams;

    fn state(c: Coupling, h: f64, t: f64, alpha: f64) -> ThermalState {
        let p = ModelParams::new(c, h, t, C64::new(alpha, 0.0)).unwrap();
        solve_epsilon(&p, &GridSpec::default(), 1e-13, 1000).unwrap()
    }

    #[test]
    fn free_fermion_table() {
        let s = state(Coupling::Infinite, 1.0, 1.0, 0.0);
        let table = locate_poles(&s, 3).unwrap();
        assert_eq!(table.entries.len(), 16);
        let r = table.get(Half::Upper, Side::Right, 0).unwrap();
        assert!((r.r - C64::new(1.0, PI).sqrt()).norm() < 1e-12);
        assert!(r.residual < 1e-14);
        assert!((r.residue - (-1.0 / (2.0 * r.r))).norm() < 1e-14);
        for e in &table.entries {
            let flip_half = if e.half == Half::Upper { Half::Lower } else { Half::Upper };
            let flip_side = if e.side == Side::Right { Side::Left } else { Side::Right };
            let mirror = table.get(flip_half, flip_side, e.m).unwrap();
            assert!((mirror.r + e.r).norm() < 1e-12);
            let conj = table.get(flip_half, e.side, e.m).unwrap();
            assert!((conj.r - e.r.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn residue_matches_limit() {
        let s = state(Coupling::Finite(10.0), 4.0, 2.0, 0.0);
        let table = locate_poles(&s, 1).unwrap();
        let e = table.get(Half::Upper, Side::Right, 0).unwrap();
        // (λ−r)ϑ(λ) → ϑ_reg; Richardson over δ, δ/2 in four directions
        for dir in [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)] {
            let at = |d: f64| {
                let z = e.r + dir * d;
                dir * d * s.fermi_weight(z).unwrap()
            };
            let d = 1e-4;
            let extrap = at(d / 2.0) * 2.0 - at(d);
            assert!((extrap - e.residue).norm() < 1e-8, "{dir}: {extrap} vs {}", e.residue);
        }
        let lower = table.get(Half::Lower, Side::Right, 0).unwrap();
        assert!((lower.r - e.r.conj()).norm() < 1e-10);
        assert!((lower.residue - e.residue.conj()).norm() < 1e-10);
    }

    #[test]
    fn argument_principle_audit() {
        let s = state(Coupling::Finite(10.0), 4.0, 2.0, 0.0);
        let table = locate_poles(&s, 2).unwrap();
        assert!(table.entries.iter().all(|e| e.residual < 1e-10));
        for half in [Half::Upper, Half::Lower] {
            let (n, inside) = table.audit(&s, half).unwrap();
            assert_eq!(n as usize, inside);
            assert_eq!(inside, 6);
        }
    }

    #[test]
    fn continuation_reaches_same_pole() {
        let s = state(Coupling::Finite(7.0), 2.0, 1.5, 0.0);
        let direct = locate_poles(&s, 0).unwrap();
        let cont = continue_in_coupling(&s, Half::Upper, Side::Left, 0).unwrap();
        assert!((cont - direct.get(Half::Upper, Side::Left, 0).unwrap().r).norm() < 1e-10);
    }

    #[test]
    fn csv_has_one_row_per_entry() {
        let s = state(Coupling::Infinite, 0.5, 1.0, 0.0);
        let table = locate_poles(&s, 1).unwrap();
        let csv = table.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 1 + table.entries.len());
        assert!(csv.starts_with("half,side,m,"));
    }

    #[test]
    fn strip_cap_skips_high_levels() {
        let s = state(Coupling::Finite(1.0), 1.0, 1.0, 0.0);
        let table = locate_poles(&s, 5).unwrap();
        assert!(table.entries.iter().all(|e| e.r.im.abs() < 0.9));
        assert!(!table.skipped.is_empty());
    }
}
