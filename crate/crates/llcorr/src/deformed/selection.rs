use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::poles::{Half, PoleEntry, PoleTable, Side};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PoleKey {
    pub half: Half,
    pub side: Side,
    /// Zero-based level; written 1-based in the text syntax.
    pub m: usize,
}

impl PoleKey {
    pub fn new(half: Half, side: Side, m: usize) -> Self {
        PoleKey { half, side, m }
    }

    pub fn lookup<'a>(&self, table: &'a PoleTable) -> Result<&'a PoleEntry> {
        table
            .get(self.half, self.side, self.m)
            .ok_or_else(|| Error::MissingPole(self.to_string()))
    }
}

impl fmt::Display for PoleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = if self.half == Half::Upper { '+' } else { '-' };
        let s = if self.side == Side::Right { 'R' } else { 'L' };
        write!(f, "{h}{s}{}", self.m + 1)
    }
}

impl FromStr for PoleKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let mut chars = t.chars();
        let bad = || Error::Parse(format!("bad pole reference '{t}' (expected e.g. +R1 or -L2)"));
        let half = match chars.next() {
            Some('+') => Half::Upper,
            Some('-') => Half::Lower,
            _ => return Err(bad()),
        };
        let side = match chars.next().map(|c| c.to_ascii_uppercase()) {
            Some('R') => Side::Right,
            Some('L') => Side::Left,
            _ => return Err(bad()),
        };
        let level: usize = chars.as_str().parse().map_err(|_| bad())?;
        if level == 0 {
            return Err(bad());
        }
        Ok(PoleKey { half, side, m: level - 1 })
    }
}

/// Poles whose deformations the contour encloses: `plus` from the upper half-plane,
/// `minus` from the lower one, always in equal numbers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RootSelection {
    pub plus: Vec<PoleKey>,
    pub minus: Vec<PoleKey>,
}

impl RootSelection {
    pub fn empty() -> Self {
        RootSelection::default()
    }

    pub fn new(plus: Vec<PoleKey>, minus: Vec<PoleKey>) -> Result<Self> {
        let sel = RootSelection { plus, minus };
        sel.validate()?;
        Ok(sel)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plus.len() != self.minus.len() {
            return Err(Error::InvalidInput(format!(
                "selection needs as many upper as lower poles, got {} and {}",
                self.plus.len(),
                self.minus.len()
            )));
        }
        if self.plus.iter().any(|k| k.half != Half::Upper) || self.minus.iter().any(|k| k.half != Half::Lower) {
            return Err(Error::InvalidInput("upper list takes '+' poles, lower list '-' poles".into()));
        }
        let mut all: Vec<&PoleKey> = self.plus.iter().chain(&self.minus).collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("duplicate pole in selection {self}")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    /// Image under λ → −λ.
    pub fn mirror(&self) -> Self {
        let flip = |k: &PoleKey| PoleKey {
            half: if k.half == Half::Upper { Half::Lower } else { Half::Upper },
            side: if k.side == Side::Right { Side::Left } else { Side::Right },
            m: k.m,
        };
        RootSelection { plus: self.minus.iter().map(flip).collect(), minus: self.plus.iter().map(flip).collect() }
    }

    /// Image under complex conjugation.
    pub fn conjugate(&self) -> Self {
        let flip = |k: &PoleKey| PoleKey {
            half: if k.half == Half::Upper { Half::Lower } else { Half::Upper },
            ..*k
        };
        RootSelection { plus: self.minus.iter().map(flip).collect(), minus: self.plus.iter().map(flip).collect() }
    }
}

impl RootSelection {
    pub fn is_self_conjugate(&self) -> bool {
        let keys = |v: &[PoleKey]| {
            let mut k: Vec<String> = v.iter().map(|k| k.to_string()).collect();
            k.sort();
            k
        };
        let c = self.conjugate();
        keys(&c.plus) == keys(&self.plus) && keys(&c.minus) == keys(&self.minus)
    }
}

impl fmt::Display for RootSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[PoleKey]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{};{}", join(&self.plus), join(&self.minus))
    }
}

impl FromStr for RootSelection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.is_empty() || t == ";" {
            return Ok(RootSelection::empty());
        }
        let (up, down) = t
            .split_once(';')
            .ok_or_else(|| Error::Parse(format!("selection '{t}' needs ';' between upper and lower lists")))?;
        let list = |part: &str| -> Result<Vec<PoleKey>> {
            part.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
        };
        RootSelection::new(list(up)?, list(down)?)
    }
}
