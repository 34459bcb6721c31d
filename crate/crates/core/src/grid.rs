use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid `lo, …, hi` with `count` points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        let g = GridSpec { lo, hi, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("grid must have at least one point".into()));
        }
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if self.count > 1 && !(self.lo < self.hi) {
            return Err(Error::Config(format!("grid needs lo < hi, got {}:{}", self.lo, self.hi)));
        }
        Ok(())
    }

    pub fn pitch(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.hi - self.lo) / (self.count - 1) as f64
        }
    }

    /// Grid points; the endpoints are exact and interior points are
    /// computed from the index so that refined grids share coarse points.
    pub fn points(&self) -> Vec<f64> {
        let n = self.count;
        if n == 1 {
            return vec![self.lo];
        }
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    self.hi
                } else {
                    let s = i as f64 / (n - 1) as f64;
                    let x = self.lo + (self.hi - self.lo) * s;
                    // Keep the midpoint of a symmetric grid exactly zero.
                    if 2 * i == n - 1 && self.lo == -self.hi {
                        0.0
                    } else {
                        x
                    }
                }
            })
            .collect()
    }

    /// The grid with `factor − 1` points inserted in every interval.
    pub fn refined(&self, factor: usize) -> GridSpec {
        GridSpec { count: factor * (self.count.max(1) - 1) + 1, ..*self }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// Parses `LO:HI:COUNT`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Config(format!("grid '{s}' is not LO:HI:COUNT"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let hi = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        let count = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        GridSpec::new(lo, hi, count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_refines() {
        let g: GridSpec = "-0.3:0.3:241".parse().unwrap();
        assert_eq!(g.count, 241);
        let pts = g.points();
        assert_eq!(pts[0], -0.3);
        assert_eq!(pts[120], 0.0);
        assert_eq!(pts[240], 0.3);
        let fine = g.refined(4);
        assert_eq!(fine.count, 961);
        let fp = fine.points();
        for (i, x) in pts.iter().enumerate() {
            assert!((fp[4 * i] - x).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!("0:1:0".parse::<GridSpec>().is_err());
        assert!("1:0:5".parse::<GridSpec>().is_err());
        assert!("0:1".parse::<GridSpec>().is_err());
        assert!("a:1:3".parse::<GridSpec>().is_err());
        assert_eq!("0.1:0.1:1".parse::<GridSpec>().unwrap().points(), vec![0.1]);
    }
}
