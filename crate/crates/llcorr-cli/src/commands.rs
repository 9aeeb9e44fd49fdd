//! The six subcommands. Each writes its files, then reports a JSON summary and any failed rows.

use std::path::PathBuf;

use serde_json::{json, Value};

use llcorr::deformed::RootSelection;
use llcorr::poles::{locate_poles, Half, Side};
use llcorr::thermo::{Coupling, ModelParams};
use llcorr::verification::free_fermion_study;
use llcorr::Complex64;

use crate::acceptance;
use crate::config::{base_defaults, RawConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{num, write_csv};
use crate::sweep::{compute_figure, failure_cell, length_cells, length_rows, par_map, param_cells, Failure, Solver, LENGTH_HEADER};

#[derive(Clone, Debug, PartialEq)]
pub struct RowFailure {
    pub row: usize,
    pub point: String,
    pub failure: Failure,
}

#[derive(Debug)]
pub struct Outcome {
    pub command: &'static str,
    pub summary: Value,
    pub files: Vec<PathBuf>,
    pub rows: usize,
    pub failures: Vec<RowFailure>,
    /// Acceptance criteria that failed.
    pub failed_checks: Vec<u8>,
}

impl Outcome {
    fn new(command: &'static str) -> Self {
        Outcome { command, summary: Value::Null, files: Vec::new(), rows: 0, failures: Vec::new(), failed_checks: Vec::new() }
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() && self.failed_checks.is_empty() {
            0
        } else {
            1
        }
    }

    /// Machine-readable record of what failed, if anything did.
    pub fn error_record(&self) -> Option<Value> {
        if !self.failed_checks.is_empty() {
            return Some(json!({
                "error": "acceptance_failed",
                "command": self.command,
                "failed_criteria": self.failed_checks,
            }));
        }
        let first = self.failures.first()?;
        Some(json!({
            "error": "solver_failure",
            "command": self.command,
            "failed_rows": self.failures.len(),
            "total_rows": self.rows,
            "first": {
                "row": first.row,
                "point": first.point,
                "kind": first.failure.kind,
                "message": first.failure.message,
            },
            "files": self.files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        }))
    }
}

/// Record for an error that stopped a command before it produced results.
pub fn fatal_record(command: &str, e: &CliError) -> Value {
    json!({ "error": e.kind(), "command": command, "message": e.to_string() })
}

fn describe(p: &ModelParams, sel: Option<&RootSelection>) -> String {
    let mut s = format!("c={} h={} T={} alpha={}", p.c, p.h, p.t, p.alpha);
    if let Some(sel) = sel {
        s.push_str(&format!(" selection={sel}"));
    }
    s
}

fn cx(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn single<T>(v: &[T], what: &str) -> Result<()> {
    if v.len() != 1 {
        return Err(CliError::Config(format!("{what} takes a single parameter point, got {}", v.len())));
    }
    Ok(())
}

pub fn thermo(cfg: &RunConfig) -> Result<Outcome> {
    let solver = Solver::from_config(cfg)?;
    let points = cfg.params()?;
    let results = par_map(&points, |p| solver.thermal(p));
    let mut out = Outcome::new("thermo");
    let header = [
        "c", "h", "T", "alpha_re", "alpha_im", "re_pressure", "im_pressure", "re_density", "im_density", "residual", "iterations",
        "converged", "error",
    ];
    let mut rows = Vec::new();
    for (i, (p, r)) in points.iter().zip(&results).enumerate() {
        let mut row = param_cells(p);
        match r {
            Ok(th) => row.extend([
                num(th.pressure.re),
                num(th.pressure.im),
                num(th.density.re),
                num(th.density.im),
                num(th.residual()),
                th.report.iterations.to_string(),
                "true".into(),
                String::new(),
            ]),
            Err(e) => {
                let f = Failure { kind: e.kind().into(), message: e.to_string() };
                row.extend(std::iter::repeat_n(String::new(), 6).chain(["false".into(), failure_cell(&f)]));
                out.failures.push(RowFailure { row: i, point: describe(p, None), failure: f });
            }
        }
        rows.push(row);
    }
    let path = cfg.out.join("thermo.csv");
    write_csv(&path, &header, &rows)?;
    out.files.push(path);
    out.rows = rows.len();
    if let [Ok(th)] = results.as_slice() {
        let state = cfg.out.join("thermo_state.json");
        std::fs::write(&state, th.to_json()?)?;
        out.files.push(state);
        out.summary = json!({
            "pressure": cx(th.pressure),
            "density": cx(th.density),
            "residual": th.residual(),
            "iterations": th.report.iterations,
            "nodes": th.grid.nodes.len(),
        });
    } else {
        out.summary = json!({ "rows": out.rows, "failed": out.failures.len() });
    }
    Ok(out)
}

pub fn poles(cfg: &RunConfig) -> Result<Outcome> {
    let solver = Solver::from_config(cfg)?;
    let points = cfg.params()?;
    let results = par_map(&points, |p| -> Result<_> {
        let th = solver.thermal(p)?;
        let table = locate_poles(&th, cfg.m_max)?;
        let upper = table.audit(&th, Half::Upper)?;
        let lower = table.audit(&th, Half::Lower)?;
        Ok((table, upper, lower))
    });
    let mut out = Outcome::new("poles");
    let header = [
        "c", "h", "T", "alpha_re", "alpha_im", "label", "half", "side", "m", "re_r", "im_r", "re_residue", "im_residue", "residual",
        "converged", "error",
    ];
    let mut rows = Vec::new();
    for (i, (p, r)) in points.iter().zip(&results).enumerate() {
        match r {
            Ok((table, _, _)) => {
                for e in &table.entries {
                    let mut row = param_cells(p);
                    row.extend([
                        e.label(),
                        if e.half == Half::Upper { "+" } else { "-" }.into(),
                        if e.side == Side::Right { "R" } else { "L" }.into(),
                        e.m.to_string(),
                        num(e.r.re),
                        num(e.r.im),
                        num(e.residue.re),
                        num(e.residue.im),
                        num(e.residual),
                        "true".into(),
                        String::new(),
                    ]);
                    rows.push(row);
                }
            }
            Err(e) => {
                let f = Failure::from_cli(e);
                let mut row = param_cells(p);
                row.extend(std::iter::repeat_n(String::new(), 9).chain(["false".into(), failure_cell(&f)]));
                rows.push(row);
                out.failures.push(RowFailure { row: i, point: describe(p, None), failure: f });
            }
        }
    }
    let path = cfg.out.join("poles.csv");
    write_csv(&path, &header, &rows)?;
    out.files.push(path);
    out.rows = points.len();
    out.summary = match results.as_slice() {
        [Ok((table, (nu, iu), (nl, il)))] => json!({
            "poles": table.entries.iter().map(|e| json!({ "label": e.label(), "r": cx(e.r), "residual": e.residual })).collect::<Vec<_>>(),
            "skipped": table.skipped,
            "nearest_pole_distance": table.nearest_distance(),
            "winding_upper": nu,
            "table_upper": iu,
            "winding_lower": nl,
            "table_lower": il,
        }),
        _ => json!({ "points": out.rows, "failed": out.failures.len() }),
    };
    Ok(out)
}

pub fn lengths(cfg: &RunConfig) -> Result<Outcome> {
    let solver = Solver::from_config(cfg)?;
    let mut out = Outcome::new("lengths");
    if !cfg.figures.is_empty() {
        let alpha = Complex64::new(cfg.alpha_re[0], cfg.alpha_im[0]);
        if cfg.alpha_re.len() > 1 || cfg.alpha_im.len() > 1 {
            return Err(CliError::Config("figures take a single α".into()));
        }
        let mut summary = serde_json::Map::new();
        for &f in &cfg.figures {
            let table = compute_figure(&solver, f, alpha)?;
            out.files.extend(table.write(&cfg.out)?);
            let offset = out.rows;
            for (i, r) in table.rows.iter().enumerate() {
                if let Err(fail) = &r.result {
                    out.failures.push(RowFailure {
                        row: offset + i,
                        point: format!("figure {f} {}: {}", r.series, describe(&r.params, Some(&r.selection))),
                        failure: fail.clone(),
                    });
                }
            }
            out.rows += table.rows.len();
            let failed = table.rows.iter().filter(|r| !r.converged()).count();
            summary.insert(table.file_stem(), json!({ "rows": table.rows.len(), "failed": failed }));
        }
        out.summary = Value::Object(summary);
        return Ok(out);
    }
    let mut points = Vec::new();
    for p in cfg.params()? {
        for s in &cfg.selections {
            points.push((s.to_string(), p, s.clone()));
        }
    }
    let rows = length_rows(&solver, &points);
    for (i, r) in rows.iter().enumerate() {
        if let Err(f) = &r.result {
            out.failures.push(RowFailure { row: i, point: describe(&r.params, Some(&r.selection)), failure: f.clone() });
        }
    }
    let path = cfg.out.join("lengths.csv");
    write_csv(&path, &LENGTH_HEADER, &rows.iter().map(length_cells).collect::<Vec<_>>())?;
    out.files.push(path);
    out.rows = rows.len();
    out.summary = match rows.as_slice() {
        [r] => match &r.result {
            Ok(l) => serde_json::to_value(l)?,
            Err(f) => json!({ "failed": f }),
        },
        _ => json!({ "rows": out.rows, "failed": out.failures.len() }),
    };
    Ok(out)
}

pub fn amplitude(cfg: &RunConfig) -> Result<Outcome> {
    let solver = Solver::from_config(cfg)?;
    let mut points = Vec::new();
    for p in cfg.params()? {
        for s in &cfg.selections {
            points.push((p, s.clone()));
        }
    }
    let results = par_map(&points, |(p, s)| solver.amplitude(p, s));
    let mut out = Outcome::new("amplitude");
    let header = [
        "c", "h", "T", "alpha_re", "alpha_im", "selection", "re_p", "im_p", "re_b", "im_b", "theta_spread", "min_denominator",
        "converged", "error",
    ];
    let mut rows = Vec::new();
    for (i, ((p, s), r)) in points.iter().zip(&results).enumerate() {
        let mut row = param_cells(p);
        row.push(s.to_string());
        match r {
            Ok((l, a)) => row.extend([
                num(l.p.re),
                num(l.p.im),
                num(a.b.re),
                num(a.b.im),
                a.theta_spread.map(num).unwrap_or_default(),
                num(a.min_denominator),
                "true".into(),
                String::new(),
            ]),
            Err(e) => {
                let f = Failure::from_cli(e);
                row.extend(std::iter::repeat_n(String::new(), 6).chain(["false".into(), failure_cell(&f)]));
                out.failures.push(RowFailure { row: i, point: describe(p, Some(s)), failure: f });
            }
        }
        rows.push(row);
    }
    let path = cfg.out.join("amplitude.csv");
    write_csv(&path, &header, &rows)?;
    out.files.push(path);
    out.rows = rows.len();
    out.summary = match results.as_slice() {
        [Ok((l, a))] => json!({ "p": cx(l.p), "amplitude": a }),
        _ => json!({ "rows": out.rows, "failed": out.failures.len() }),
    };
    Ok(out)
}

/// Defaults of the oracle: the free-fermion point of the asymptotic study.
pub fn oracle_defaults() -> RawConfig {
    let mut d = base_defaults();
    for (k, v) in [("c", "inf"), ("h", "1"), ("T", "1"), ("alpha_re", "0.1")] {
        d.insert(k.into(), v.into());
    }
    d
}

pub fn oracle(cfg: &RunConfig) -> Result<Outcome> {
    let points = cfg.params()?;
    single(&points, "oracle")?;
    let p = points[0];
    if p.c != Coupling::Infinite {
        return Err(CliError::Config("the free-fermion oracle needs c = inf".into()));
    }
    let study = free_fermion_study(&p, &cfg.grid, &cfg.x)?;
    let header = [
        "x", "re_oracle", "im_oracle", "re_leading", "im_leading", "residual_leading", "re_corrected", "im_corrected",
        "residual_corrected",
    ];
    let rows: Vec<Vec<String>> = study
        .leading_rows
        .iter()
        .zip(&study.corrected_rows)
        .map(|(a, b)| {
            vec![
                num(a.x),
                num(a.oracle.re),
                num(a.oracle.im),
                num(a.asymptotic.re),
                num(a.asymptotic.im),
                num(a.residual),
                num(b.asymptotic.re),
                num(b.asymptotic.im),
                num(b.residual),
            ]
        })
        .collect();
    let mut out = Outcome::new("oracle");
    let path = cfg.out.join("oracle.csv");
    write_csv(&path, &header, &rows)?;
    out.files.push(path);
    out.rows = rows.len();
    let term = |t: &llcorr::verification::AsymptoticTerm| json!({ "selection": t.selection, "p": cx(t.p), "b": cx(t.b) });
    out.summary = json!({
        "leading": term(&study.leading),
        "candidates": study.candidates.iter().map(term).collect::<Vec<_>>(),
        "fitted_rate": study.fit.rate,
        "fit_rms": study.fit.rms,
        "target_rate": study.target_rate,
        "rate_mismatch": study.rate_mismatch,
        "rate_within_10_percent": study.rate_mismatch < 0.1,
        "residual_reduction": study.reduction,
    });
    Ok(out)
}

/// Runs the acceptance criteria; figure tables are written to the output directory when computed.
pub fn verify(cfg: &RunConfig, ids: &[u8], mut echo: impl FnMut(&str)) -> Result<Outcome> {
    let mut out = Outcome::new("verify");
    let mut lines = Vec::new();
    let mut outcomes = Vec::new();
    let mut figures = None;
    for &id in ids {
        let mut r = acceptance::run(&[id]);
        let o = r.outcomes.remove(0);
        echo(&o.to_string());
        lines.push(o.to_string());
        if r.figures.is_some() {
            figures = r.figures;
        }
        outcomes.push(o);
    }
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("acceptance.txt");
    std::fs::write(&path, lines.join("\n") + "\n")?;
    out.files.push(path);
    for t in figures.iter().flatten() {
        out.files.extend(t.write(&cfg.out)?);
    }
    out.rows = outcomes.len();
    out.failed_checks = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    out.summary = json!({
        "passed": outcomes.iter().filter(|o| o.pass).map(|o| o.id).collect::<Vec<_>>(),
        "failed": out.failed_checks,
    });
    Ok(out)
}

impl Failure {
    fn from_cli(e: &CliError) -> Failure {
        Failure { kind: e.kind().into(), message: e.to_string() }
    }
}
