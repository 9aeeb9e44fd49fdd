//! Command-line flags. Every flag maps to a configuration key and overrides the `--config` file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config_text, RawConfig};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "llcorr", version, about = "Correlation lengths and amplitudes of the 1D Bose gas at finite temperature")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Thermal state: pressure, density and the dressed energy.
    Thermo(Common),
    /// Poles of the Fermi weight near the real axis.
    Poles(Common),
    /// Correlation lengths p for root selections, or a whole figure.
    Lengths(Common),
    /// Amplitudes B of the selected terms.
    Amplitude(Common),
    /// Free-fermion determinant against the asymptotic expansion.
    Oracle(Common),
    /// Runs the acceptance suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated criteria to run (default: all ten).
        #[arg(long)]
        only: Option<String>,
    },
}

/// Values are kept as text and parsed with the configuration file's rules.
#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat key = value file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Coupling: number, "inf", list a,b or range start:stop:step.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<String>,
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t: Option<String>,
    #[arg(long, visible_alias = "alpha", allow_hyphen_values = true)]
    pub alpha_re: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha_im: Option<String>,
    /// Root selections like "+R1,+R2;-R1,-L1", several separated by '|'.
    #[arg(long, allow_hyphen_values = true)]
    pub selection: Option<String>,
    /// 3a, 3b, 4a, 4b, a comma list, or "all".
    #[arg(long)]
    pub figure: Option<String>,
    #[arg(long)]
    pub grid_panels: Option<String>,
    #[arg(long)]
    pub grid_order: Option<String>,
    #[arg(long)]
    pub grid_cutoff: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long)]
    pub gamma_steps: Option<String>,
    #[arg(long)]
    pub m_max: Option<String>,
    /// Distances for the oracle.
    #[arg(long)]
    pub x: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Cache directory (else $LLCORR_CACHE; no caching when neither is set).
    #[arg(long)]
    pub cache: Option<String>,
}

impl Common {
    /// The config file's map with the flags laid over it.
    pub fn raw(&self) -> Result<RawConfig> {
        let mut raw = match &self.config {
            Some(path) => parse_config_text(&std::fs::read_to_string(path)?)?,
            None => RawConfig::new(),
        };
        let flags = [
            ("c", &self.c),
            ("h", &self.h),
            ("T", &self.t),
            ("alpha_re", &self.alpha_re),
            ("alpha_im", &self.alpha_im),
            ("selection", &self.selection),
            ("figure", &self.figure),
            ("grid_panels", &self.grid_panels),
            ("grid_order", &self.grid_order),
            ("grid_cutoff", &self.grid_cutoff),
            ("tol", &self.tol),
            ("gamma_steps", &self.gamma_steps),
            ("m_max", &self.m_max),
            ("x", &self.x),
            ("out", &self.out),
            ("cache", &self.cache),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                raw.insert(k.to_string(), v.clone());
            }
        }
        Ok(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_and_override() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "h = 1\nT = 3\n").unwrap();
        let cli = Cli::try_parse_from([
            "llcorr", "lengths", "--config", file.to_str().unwrap(), "--h", "-1", "--selection", "+R1;-R1", "--alpha", "0.1",
        ])
        .unwrap();
        let Command::Lengths(common) = cli.command else { panic!("wrong subcommand") };
        let raw = common.raw().unwrap();
        assert_eq!((raw["h"].as_str(), raw["T"].as_str()), ("-1", "3"));
        assert_eq!(raw["alpha_re"], "0.1");
        assert_eq!(raw["selection"], "+R1;-R1");
    }
}
