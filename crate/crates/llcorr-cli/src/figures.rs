//! The four length figures: which curves, over which axis.

use std::fmt;
use std::str::FromStr;

use llcorr::deformed::RootSelection;
use llcorr::thermo::{Coupling, ModelParams};
use llcorr::Complex64;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    /// p(h) at T = 2 for c ∈ {7, 10, ∞}.
    F3a,
    /// p(h) at c = 10 for T ∈ {1, 3, 5}.
    F3b,
    /// p(T) at c = 10 for h ∈ {−1, 4, 9}.
    F4a,
    /// Re p(h) at c = 10, T = 2 for five root configurations.
    F4b,
}

pub const ALL: [Figure; 4] = [Figure::F3a, Figure::F3b, Figure::F4a, Figure::F4b];

impl FromStr for Figure {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_start_matches("fig").to_ascii_lowercase().as_str() {
            "3a" => Ok(Figure::F3a),
            "3b" => Ok(Figure::F3b),
            "4a" => Ok(Figure::F4a),
            "4b" => Ok(Figure::F4b),
            _ => Err(CliError::Config(format!("unknown figure '{s}' (expected 3a, 3b, 4a or 4b)"))),
        }
    }
}

/// Comma-separated figure names, or `all`.
pub fn parse_figures(s: &str) -> Result<Vec<Figure>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(ALL.to_vec());
    }
    s.split(',').map(str::parse).collect()
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Figure::F3a => "3a",
            Figure::F3b => "3b",
            Figure::F4a => "4a",
            Figure::F4b => "4b",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    H,
    T,
}

impl Axis {
    pub fn of(&self, p: &ModelParams) -> f64 {
        match self {
            Axis::H => p.h,
            Axis::T => p.t,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Axis::H => "h",
            Axis::T => "T",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub selection: RootSelection,
    pub params: Vec<ModelParams>,
}

#[derive(Clone, Debug)]
pub struct FigureSpec {
    pub figure: Figure,
    pub axis: Axis,
    pub series: Vec<Series>,
}

/// h from −2 to 10 in steps of 1/4.
pub fn h_axis() -> Vec<f64> {
    (0..=48).map(|k| (k as f64 - 8.0) / 4.0).collect()
}

/// T from 0.5 to 6 in steps of 1/10.
pub fn t_axis() -> Vec<f64> {
    (5..=60).map(|k| k as f64 / 10.0).collect()
}

/// The five configurations of the level-crossing figure, in caption order.
pub const CONFIGURATIONS: [(&str, &str); 5] = [
    ("(i)", "+R1;-R1"),
    ("(ii)", "+R1;-L1"),
    ("(iii)", "+R2;-R1"),
    ("(iv)", "+R1,+R2;-R1,-R2"),
    ("(v)", "+R1,+R2;-R1,-L2"),
];

const NEAREST_PAIR: &str = "+R1;-R1";

impl Figure {
    pub fn spec(&self, alpha: Complex64) -> Result<FigureSpec> {
        let sel = |s: &str| -> Result<RootSelection> { Ok(s.parse()?) };
        let over_h = |c: Coupling, t: f64| -> Result<Vec<ModelParams>> {
            h_axis().into_iter().map(|h| Ok(ModelParams::new(c, h, t, alpha)?)).collect()
        };
        let ten = Coupling::Finite(10.0);
        let (axis, series) = match self {
            Figure::F3a => {
                let mut v = Vec::new();
                for (label, c) in [("c=7", Coupling::Finite(7.0)), ("c=10", ten), ("c=inf", Coupling::Infinite)] {
                    v.push(Series { label: label.into(), selection: sel(NEAREST_PAIR)?, params: over_h(c, 2.0)? });
                }
                (Axis::H, v)
            }
            Figure::F3b => {
                let mut v = Vec::new();
                for t in [1.0, 3.0, 5.0] {
                    v.push(Series { label: format!("T={t}"), selection: sel(NEAREST_PAIR)?, params: over_h(ten, t)? });
                }
                (Axis::H, v)
            }
            Figure::F4a => {
                let mut v = Vec::new();
                for h in [-1.0, 4.0, 9.0] {
                    let params = t_axis().into_iter().map(|t| Ok(ModelParams::new(ten, h, t, alpha)?)).collect::<Result<_>>()?;
                    v.push(Series { label: format!("h={h}"), selection: sel(NEAREST_PAIR)?, params });
                }
                (Axis::T, v)
            }
            Figure::F4b => {
                let mut v = Vec::new();
                for (label, s) in CONFIGURATIONS {
                    v.push(Series { label: format!("{label} {s}"), selection: sel(s)?, params: over_h(ten, 2.0)? });
                }
                (Axis::H, v)
            }
        };
        Ok(FigureSpec { figure: *self, axis, series })
    }

    pub fn title(&self) -> &'static str {
        match self {
            Figure::F3a => "p(h) at T = 2",
            Figure::F3b => "p(h) at c = 10",
            Figure::F4a => "p(T) at c = 10",
            Figure::F4b => "Re p(h) at c = 10, T = 2",
        }
    }
}

/// Indices i where the step |y_i − y_{i−1}| exceeds `factor` times both neighbouring steps plus `floor`.
/// A curve with such a step has jumped rather than bent.
pub fn jumps(ys: &[f64], factor: f64, floor: f64) -> Vec<usize> {
    let d: Vec<f64> = ys.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut out = Vec::new();
    for i in 0..d.len() {
        let before = if i > 0 { Some(d[i - 1]) } else { None };
        let after = d.get(i + 1).copied();
        let local = match (before, after) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => continue,
        };
        if d[i] > factor * local + floor {
            out.push(i + 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_are_exact_decimals() {
        let h = h_axis();
        assert_eq!((h[0], h[8], h[48], h.len()), (-2.0, 0.0, 10.0, 49));
        let t = t_axis();
        assert_eq!((t[0], t[1], t[55], t.len()), (0.5, 0.6, 6.0, 56));
    }

    #[test]
    fn figure_shapes() {
        let zero = Complex64::new(0.0, 0.0);
        let sizes: Vec<(usize, usize)> = ALL
            .iter()
            .map(|f| {
                let s = f.spec(zero).unwrap();
                (s.series.len(), s.series.iter().map(|x| x.params.len()).sum())
            })
            .collect();
        assert_eq!(sizes, vec![(3, 147), (3, 147), (3, 168), (5, 245)]);
        assert_eq!("fig4b".parse::<Figure>().unwrap(), Figure::F4b);
        assert!("5".parse::<Figure>().is_err());
        assert_eq!(parse_figures("all").unwrap(), ALL.to_vec());
        assert_eq!(parse_figures("3b,4a").unwrap(), vec![Figure::F3b, Figure::F4a]);
    }

    #[test]
    fn jump_detection() {
        let smooth: Vec<f64> = (0..20).map(|k| (k as f64 * 0.2).sin()).collect();
        assert!(jumps(&smooth, 5.0, 1e-9).is_empty());
        let mut step = smooth.clone();
        step[10..].iter_mut().for_each(|y| *y += 1.0);
        assert_eq!(jumps(&step, 5.0, 1e-9), vec![10]);
        // a kink is not a jump
        let kink: Vec<f64> = (0..20).map(|k| (k as f64 - 10.0).abs()).collect();
        assert!(jumps(&kink, 5.0, 1e-9).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn jumps_ignore_scale_and_offset(a in 0.1f64..1.0, b in -1.0f64..1.0, scale in 0.1f64..100.0, shift in -50.0f64..50.0, at in 2usize..27) {
            // increments stay within a few percent of a, so only the step stands out
            let mut ys: Vec<f64> = (0..30).map(|k| a * k as f64 + 0.1 * a * b * (k as f64 * 0.3).sin()).collect();
            ys[at..].iter_mut().for_each(|y| *y += 40.0);
            let moved: Vec<f64> = ys.iter().map(|y| scale * y + shift).collect();
            proptest::prop_assert_eq!(jumps(&ys, 5.0, 0.0), vec![at]);
            proptest::prop_assert_eq!(jumps(&moved, 5.0, 0.0), vec![at]);
        }
    }
}
