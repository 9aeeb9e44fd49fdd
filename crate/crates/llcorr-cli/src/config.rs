//! Flat `key = value` run configuration. Files and flags produce the same raw map; flags win.

use std::collections::BTreeMap;
use std::path::PathBuf;

use llcorr::deformed::{DeformOptions, RootSelection};
use llcorr::thermo::{Coupling, GridSpec, ModelParams};
use llcorr::Complex64;

use crate::error::{CliError, Result};
use crate::figures::{parse_figures, Figure};

pub type RawConfig = BTreeMap<String, String>;

pub const KEYS: &[&str] = &[
    "c", "h", "T", "alpha_re", "alpha_im", "selection", "figure", "grid_panels", "grid_order", "grid_cutoff",
    "tol", "gamma_steps", "m_max", "x", "out", "cache",
];

/// Environment variable naming the cache directory when none is configured.
pub const CACHE_ENV: &str = "LLCORR_CACHE";

pub fn normalize_key(key: &str) -> String {
    let k = key.trim().trim_start_matches("--").replace('-', "_");
    if k == "t" {
        "T".to_string()
    } else {
        k
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", no + 1)))?;
        let key = normalize_key(k);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("line {}: unknown key '{}'", no + 1, k.trim())));
        }
        if raw.insert(key, v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: '{}' given twice", no + 1, k.trim())));
        }
    }
    Ok(raw)
}

/// `a`, `a,b,c` or `start:stop:step` (stop included when hit).
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| CliError::Config(format!("bad value list '{s}': {what}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("not a number")).and_then(|v| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad("not finite"))
        }
    });
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("ranges are start:stop:step"));
        }
        let (a, b, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(bad("empty range"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|k| a + k as f64 * step).collect());
    }
    let v = s.split(',').map(num).collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(bad("empty"));
    }
    Ok(v)
}

pub fn parse_couplings(s: &str) -> Result<Vec<Coupling>> {
    if s.contains(':') {
        return parse_values(s)?.into_iter().map(|c| Ok(c.to_string().parse::<Coupling>()?)).collect();
    }
    s.split(',').map(|t| Ok(t.parse::<Coupling>()?)).collect()
}

/// Selections separated by `|`.
pub fn parse_selections(s: &str) -> Result<Vec<RootSelection>> {
    s.split('|').map(|t| Ok(t.parse::<RootSelection>()?)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub c: Vec<Coupling>,
    pub h: Vec<f64>,
    pub t: Vec<f64>,
    pub alpha_re: Vec<f64>,
    pub alpha_im: Vec<f64>,
    pub selections: Vec<RootSelection>,
    pub figures: Vec<Figure>,
    pub grid: GridSpec,
    /// Tolerance of the deformed solve; the thermal solve uses a tenth of it.
    pub tol: f64,
    pub gamma_steps: usize,
    pub m_max: usize,
    pub x: Vec<f64>,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
}

/// Defaults shared by all commands; a command may override them before the user's values.
pub fn base_defaults() -> RawConfig {
    [
        ("c", "10"),
        ("h", "4"),
        ("T", "2"),
        ("alpha_re", "0"),
        ("alpha_im", "0"),
        ("selection", ""),
        ("grid_order", "16"),
        ("tol", "1e-12"),
        ("gamma_steps", "8"),
        ("m_max", "3"),
        ("x", "10:30:1"),
        ("out", "."),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn parse_count(raw: &RawConfig, key: &str) -> Result<Option<usize>> {
    raw.get(key)
        .map(|v| v.trim().parse::<usize>().map_err(|_| CliError::Config(format!("{key} must be a non-negative integer, got '{v}'"))))
        .transpose()
}

impl RunConfig {
    /// `user` is the merged file and flag map, laid over `defaults`.
    pub fn resolve(defaults: &RawConfig, user: &RawConfig) -> Result<RunConfig> {
        if let Some(k) = user.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown key '{k}'")));
        }
        let figures = user.get("figure").map(|f| parse_figures(f)).transpose()?.unwrap_or_default();
        if !figures.is_empty() {
            if let Some(k) = ["c", "h", "T", "selection"].iter().find(|k| user.contains_key(**k)) {
                return Err(CliError::Config(format!("a figure fixes c, h, T and selection; drop '{k}'")));
            }
        }
        let mut raw = defaults.clone();
        raw.extend(user.iter().map(|(k, v)| (k.clone(), v.clone())));
        let get = |k: &str| raw.get(k).map(String::as_str).unwrap_or("");

        let tol: f64 = get("tol").trim().parse().map_err(|_| CliError::Config(format!("bad tol '{}'", get("tol"))))?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(CliError::Config(format!("tol must be positive, got {tol}")));
        }
        let gamma_steps = parse_count(&raw, "gamma_steps")?.unwrap_or(8);
        let order = parse_count(&raw, "grid_order")?.unwrap_or(16);
        let panels = parse_count(&raw, "grid_panels")?;
        if gamma_steps == 0 || order == 0 || panels == Some(0) {
            return Err(CliError::Config("gamma_steps, grid_order and grid_panels must be positive".into()));
        }
        let cutoff = match raw.get("grid_cutoff") {
            Some(v) => {
                let c: f64 = v.trim().parse().map_err(|_| CliError::Config(format!("bad grid_cutoff '{v}'")))?;
                if !(c > 0.0 && c.is_finite()) {
                    return Err(CliError::Config(format!("grid_cutoff must be positive, got {c}")));
                }
                Some(c)
            }
            None => None,
        };
        let cfg = RunConfig {
            c: parse_couplings(get("c"))?,
            h: parse_values(get("h"))?,
            t: parse_values(get("T"))?,
            alpha_re: parse_values(get("alpha_re"))?,
            alpha_im: parse_values(get("alpha_im"))?,
            selections: parse_selections(get("selection"))?,
            figures,
            grid: GridSpec { cutoff, panels, order },
            tol,
            gamma_steps,
            m_max: parse_count(&raw, "m_max")?.unwrap_or(3),
            x: parse_values(get("x"))?,
            out: PathBuf::from(get("out")),
            cache: raw.get("cache").filter(|v| !v.trim().is_empty()).map(PathBuf::from),
        };
        let swept = [
            ("c", cfg.c.len()),
            ("h", cfg.h.len()),
            ("T", cfg.t.len()),
            ("alpha_re", cfg.alpha_re.len()),
            ("alpha_im", cfg.alpha_im.len()),
        ]
        .iter()
        .filter(|(_, n)| *n > 1)
        .map(|(k, _)| *k)
        .collect::<Vec<_>>();
        if swept.len() > 1 {
            return Err(CliError::Config(format!("at most one parameter may be swept, got {}", swept.join(", "))));
        }
        Ok(cfg)
    }

    pub fn deform_options(&self) -> DeformOptions {
        DeformOptions { gamma_steps: self.gamma_steps, tol: self.tol, ..DeformOptions::default() }
    }

    pub fn thermal_tol(&self) -> f64 {
        0.1 * self.tol
    }

    /// Cache directory from the configuration, else from the environment.
    pub fn cache_dir(&self) -> Option<PathBuf> {
        self.cache
            .clone()
            .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
    }

    /// Parameter points in sweep order.
    pub fn params(&self) -> Result<Vec<ModelParams>> {
        let mut out = Vec::new();
        for &c in &self.c {
            for &h in &self.h {
                for &t in &self.t {
                    for &ar in &self.alpha_re {
                        for &ai in &self.alpha_im {
                            out.push(ModelParams::new(c, h, t, Complex64::new(ar, ai))?);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn user(pairs: &[(&str, &str)]) -> RawConfig {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn ranges_and_lists() {
        assert_eq!(parse_values("-2:-1:0.25").unwrap(), vec![-2.0, -1.75, -1.5, -1.25, -1.0]);
        assert_eq!(parse_values("1, 3,5").unwrap(), vec![1.0, 3.0, 5.0]);
        assert_eq!(parse_values("0:1:0.3").unwrap().len(), 4);
        assert!(parse_values("1:0:0.1").is_err());
        assert!(parse_values("0:1:0").is_err());
        assert!(parse_values("nan").is_err());
        assert_eq!(parse_couplings("7,inf").unwrap(), vec![Coupling::Finite(7.0), Coupling::Infinite]);
    }

    #[test]
    fn file_syntax() {
        let raw = parse_config_text("# sweep\nh = 1:2:0.5\nT=2  # kelvin-free\n\ngamma-steps = 16\n").unwrap();
        assert_eq!(raw["h"], "1:2:0.5");
        assert_eq!(raw["T"], "2");
        assert_eq!(raw["gamma_steps"], "16");
        assert!(parse_config_text("speed = 3").is_err());
        assert!(parse_config_text("h = 1\nh = 2").is_err());
        assert!(parse_config_text("h 1").is_err());
    }

    #[test]
    fn flags_override_file_and_defaults() {
        let mut merged = parse_config_text("h = 1\ntol = 1e-9").unwrap();
        merged.extend(user(&[("h", "2")]));
        let cfg = RunConfig::resolve(&base_defaults(), &merged).unwrap();
        assert_eq!(cfg.h, vec![2.0]);
        assert_eq!(cfg.tol, 1e-9);
        assert_eq!(cfg.c, vec![Coupling::Finite(10.0)]);
        assert!((cfg.thermal_tol() - 1e-10).abs() < 1e-25);
    }

    #[test]
    fn invariants_are_enforced() {
        let d = base_defaults();
        assert!(RunConfig::resolve(&d, &user(&[("h", "1,2"), ("T", "1,2")])).is_err());
        assert!(RunConfig::resolve(&d, &user(&[("tol", "0")])).is_err());
        assert!(RunConfig::resolve(&d, &user(&[("gamma_steps", "0")])).is_err());
        assert!(RunConfig::resolve(&d, &user(&[("figure", "3a"), ("h", "1")])).is_err());
        assert!(RunConfig::resolve(&d, &user(&[("T", "-1")])).unwrap().params().is_err());
        let cfg = RunConfig::resolve(&d, &user(&[("selection", "+R1;-R1|;"), ("h", "0:1:0.5")])).unwrap();
        assert_eq!(cfg.selections.len(), 2);
        assert_eq!(cfg.params().unwrap().len(), 3);
    }

    proptest::proptest! {
        #[test]
        fn ranges_cover_start_to_stop(a in -10i32..10, n in 0usize..40, q in 1u32..5) {
            let step = 0.25 * q as f64;
            let stop = a as f64 + n as f64 * step;
            let v = parse_values(&format!("{a}:{stop}:{step}")).unwrap();
            proptest::prop_assert_eq!(v.len(), n + 1);
            proptest::prop_assert_eq!(v[0], a as f64);
            proptest::prop_assert_eq!(*v.last().unwrap(), stop);
        }
    }
}
