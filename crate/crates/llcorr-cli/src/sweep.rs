//! Point solves, optionally cached, dispatched over a worker pool in deterministic order.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use llcorr::amplitudes::{amplitude_b_checked, AmplitudeResult};
use llcorr::deformed::{solve_selection, DeformOptions, DeformedState, RootSelection};
use llcorr::lengths::{correlation_length, LengthResult, LengthRoute};
use llcorr::thermo::{solve_epsilon, GridSpec, ModelParams, ThermalState};
use llcorr::Complex64;

use crate::cache::Cache;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::figures::{Axis, Figure};
use crate::output::{coupling, num, write_csv};
use crate::plot::{line_plot, Curve};

const MAX_THERMAL_ITER: usize = 2000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: String,
    pub message: String,
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure { kind: e.kind().to_string(), message: e.to_string() }
    }
}

impl From<llcorr::Error> for Failure {
    fn from(e: llcorr::Error) -> Self {
        CliError::from(e).into()
    }
}

/// Maps `f` over `items` on the rayon pool; the output keeps the input order.
pub fn par_map<I: Sync, T: Send>(items: &[I], f: impl Fn(&I) -> T + Sync + Send) -> Vec<T> {
    items.par_iter().map(f).collect()
}

#[derive(Serialize)]
struct Key<'a> {
    what: &'a str,
    version: &'a str,
    params: &'a ModelParams,
    selection: String,
    grid: &'a GridSpec,
    opts: &'a DeformOptions,
    thermal_tol: f64,
}

#[derive(Clone, Debug)]
pub struct Solver {
    pub grid: GridSpec,
    pub opts: DeformOptions,
    pub thermal_tol: f64,
    pub cache: Option<Cache>,
}

/// The settings of a run with the default configuration, without a cache.
impl Default for Solver {
    fn default() -> Self {
        let opts = DeformOptions::default();
        Solver { grid: GridSpec::default(), opts, thermal_tol: 0.1 * opts.tol, cache: None }
    }
}

impl Solver {
    pub fn from_config(cfg: &RunConfig) -> Result<Solver> {
        let cache = cfg.cache_dir().map(Cache::open).transpose()?;
        Ok(Solver { grid: cfg.grid, opts: cfg.deform_options(), thermal_tol: cfg.thermal_tol(), cache })
    }

    fn key(&self, what: &str, params: &ModelParams, selection: &RootSelection) -> Result<String> {
        Cache::key(&Key {
            what,
            version: env!("CARGO_PKG_VERSION"),
            params,
            selection: selection.to_string(),
            grid: &self.grid,
            opts: &self.opts,
            thermal_tol: self.thermal_tol,
        })
    }

    fn cached<V: Serialize + for<'de> Deserialize<'de>>(
        &self,
        what: &str,
        params: &ModelParams,
        selection: &RootSelection,
        compute: impl FnOnce() -> Result<V>,
    ) -> Result<V> {
        let Some(cache) = &self.cache else {
            return compute();
        };
        let key = self.key(what, params, selection)?;
        if let Some(v) = cache.load(&key) {
            return Ok(v);
        }
        let v = compute()?;
        cache.store(&key, &v)?;
        Ok(v)
    }

    /// Thermal state at the given α.
    pub fn thermal(&self, params: &ModelParams) -> Result<ThermalState> {
        Ok(solve_epsilon(params, &self.grid, self.thermal_tol, MAX_THERMAL_ITER)?)
    }

    /// Deformation to α of the α = 0 thermal state.
    pub fn deformed(&self, params: &ModelParams, selection: &RootSelection) -> Result<DeformedState> {
        let base = self.thermal(&params.with_alpha(Complex64::new(0.0, 0.0)))?;
        Ok(solve_selection(&base, params.alpha, selection, &self.opts)?)
    }

    pub fn length(&self, params: &ModelParams, selection: &RootSelection) -> Result<LengthResult> {
        self.cached("length", params, selection, || Ok(correlation_length(&self.deformed(params, selection)?)?))
    }

    pub fn amplitude(&self, params: &ModelParams, selection: &RootSelection) -> Result<(LengthResult, AmplitudeResult)> {
        self.cached("amplitude", params, selection, || {
            let state = self.deformed(params, selection)?;
            Ok((correlation_length(&state)?, amplitude_b_checked(&state)?))
        })
    }
}

#[derive(Clone, Debug)]
pub struct LengthRow {
    pub series: String,
    pub params: ModelParams,
    pub selection: RootSelection,
    pub result: std::result::Result<LengthResult, Failure>,
}

impl LengthRow {
    pub fn converged(&self) -> bool {
        self.result.is_ok()
    }

    pub fn p(&self) -> Option<Complex64> {
        self.result.as_ref().ok().map(|r| r.p)
    }
}

pub const LENGTH_HEADER: [&str; 13] =
    ["series", "c", "h", "T", "alpha_re", "alpha_im", "selection", "re_p", "im_p", "route", "route_gap", "converged", "error"];

pub fn param_cells(p: &ModelParams) -> Vec<String> {
    vec![coupling(p.c), num(p.h), num(p.t), num(p.alpha.re), num(p.alpha.im)]
}

pub fn failure_cell(f: &Failure) -> String {
    format!("{}: {}", f.kind, f.message)
}

pub fn length_cells(row: &LengthRow) -> Vec<String> {
    let mut v = vec![row.series.clone()];
    v.extend(param_cells(&row.params));
    v.push(row.selection.to_string());
    match &row.result {
        Ok(r) => {
            let route = match r.route {
                LengthRoute::Contour => "contour",
                LengthRoute::Residue => "residue",
            };
            v.extend([num(r.p.re), num(r.p.im), route.into(), r.route_gap.map(num).unwrap_or_default(), "true".into(), String::new()]);
        }
        Err(f) => v.extend([String::new(), String::new(), String::new(), String::new(), "false".into(), failure_cell(f)]),
    }
    v
}

pub fn length_rows(solver: &Solver, points: &[(String, ModelParams, RootSelection)]) -> Vec<LengthRow> {
    par_map(points, |(series, params, selection)| LengthRow {
        series: series.clone(),
        params: *params,
        selection: selection.clone(),
        result: solver.length(params, selection).map_err(Failure::from),
    })
}

#[derive(Clone, Debug)]
pub struct FigureTable {
    pub figure: Figure,
    pub axis: Axis,
    /// Rows grouped by series, in series order.
    pub rows: Vec<LengthRow>,
}

impl FigureTable {
    pub fn series(&self) -> Vec<(&str, Vec<&LengthRow>)> {
        let mut out: Vec<(&str, Vec<&LengthRow>)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some((label, v)) if *label == r.series => v.push(r),
                _ => out.push((r.series.as_str(), vec![r])),
            }
        }
        out
    }

    pub fn file_stem(&self) -> String {
        format!("fig{}", self.figure)
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.rows.iter().map(length_cells).collect()
    }

    pub fn svg(&self) -> String {
        let curves: Vec<Curve> = self
            .series()
            .into_iter()
            .map(|(label, rows)| Curve {
                label: label.to_string(),
                points: rows.iter().map(|r| (self.axis.of(&r.params), r.p().map(|p| p.re))).collect(),
            })
            .collect();
        line_plot(self.figure.title(), self.axis.label(), "Re p", &curves)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.file_stem()));
        let svg = dir.join(format!("{}.svg", self.file_stem()));
        write_csv(&csv, &LENGTH_HEADER, &self.csv_rows())?;
        std::fs::write(&svg, self.svg())?;
        Ok(vec![csv, svg])
    }
}

pub fn compute_figure(solver: &Solver, figure: Figure, alpha: Complex64) -> Result<FigureTable> {
    let spec = figure.spec(alpha)?;
    let points: Vec<(String, ModelParams, RootSelection)> = spec
        .series
        .iter()
        .flat_map(|s| s.params.iter().map(move |p| (s.label.clone(), *p, s.selection.clone())))
        .collect();
    Ok(FigureTable { figure, axis: spec.axis, rows: length_rows(solver, &points) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use llcorr::thermo::Coupling;

    #[test]
    fn default_solver_matches_default_config() {
        let cfg = RunConfig::resolve(&crate::config::base_defaults(), &Default::default()).unwrap();
        let d = Solver::default();
        assert_eq!((cfg.grid, cfg.deform_options()), (d.grid, d.opts));
        assert_eq!(cfg.thermal_tol().to_bits(), d.thermal_tol.to_bits());
    }

    #[test]
    fn cache_hit_equals_fresh_solve() {
        let dir = tempfile::tempdir().unwrap();
        let cached = Solver { cache: Some(Cache::open(dir.path()).unwrap()), ..Solver::default() };
        let p = ModelParams::new(Coupling::Finite(10.0), 4.0, 2.0, Complex64::new(0.1, 0.0)).unwrap();
        let sel: RootSelection = "+R1;-R1".parse().unwrap();
        let first = cached.length(&p, &sel).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let hit = cached.length(&p, &sel).unwrap();
        let fresh = Solver::default().length(&p, &sel).unwrap();
        for v in [first.p, hit.p] {
            assert_eq!(v.re.to_bits(), fresh.p.re.to_bits());
            assert_eq!(v.im.to_bits(), fresh.p.im.to_bits());
        }
        assert_eq!(hit.route_gap.map(f64::to_bits), fresh.route_gap.map(f64::to_bits));
    }

    #[test]
    fn failures_become_rows() {
        // no pole table entry exists for this level inside the strip
        let p = ModelParams::new(Coupling::Finite(1.0), 4.0, 2.0, Complex64::new(0.0, 0.0)).unwrap();
        let rows = length_rows(&Solver::default(), &[("s".into(), p, "+R9;-R9".parse().unwrap())]);
        assert!(!rows[0].converged());
        let cells = length_cells(&rows[0]);
        assert_eq!(cells.len(), LENGTH_HEADER.len());
        assert_eq!(cells[11], "false");
        assert!(!cells[12].is_empty());
    }
}
