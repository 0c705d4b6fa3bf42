//! Rates, chamber points and Gelfand-Tsetlin patterns.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Equal,
    StrictlyDecreasing,
    StrictlyIncreasing,
    General,
}

/// Which kill time a quantity refers to: leaving the chamber (`Tau`) or
/// losing interlacing between consecutive steps (`Rho`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KillKind {
    Tau,
    Rho,
}

impl std::str::FromStr for KillKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tau" => Ok(KillKind::Tau),
            "rho" => Ok(KillKind::Rho),
            _ => invalid(format!("unknown kill kind '{s}' (tau|rho)")),
        }
    }
}

/// Classify a rate vector using exact comparisons.
pub fn classify_rates(rates: &[f64]) -> Result<Regime> {
    if rates.is_empty() {
        return invalid("empty rate vector");
    }
    if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return invalid("rates must be positive and finite");
    }
    if rates.windows(2).all(|w| w[0] == w[1]) {
        Ok(Regime::Equal)
    } else if rates.windows(2).all(|w| w[0] > w[1]) {
        Ok(Regime::StrictlyDecreasing)
    } else if rates.windows(2).all(|w| w[0] < w[1]) {
        Ok(Regime::StrictlyIncreasing)
    } else {
        Ok(Regime::General)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub rates: Vec<f64>,
    pub regime: Regime,
}

impl Rates {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        let regime = classify_rates(&rates)?;
        Ok(Rates { rates, regime })
    }

    pub fn equal(d: usize, rate: f64) -> Result<Self> {
        Self::new(vec![rate; d])
    }

    pub fn dim(&self) -> usize {
        self.rates.len()
    }

    pub fn mean(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }

    pub fn geomean(&self) -> f64 {
        (self.rates.iter().map(|r| r.ln()).sum::<f64>() / self.rates.len() as f64).exp()
    }

    /// All rates pairwise different.
    pub fn all_distinct(&self) -> bool {
        let r = &self.rates;
        (0..r.len()).all(|i| (i + 1..r.len()).all(|j| r[i] != r[j]))
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::Dimension(format!("{} rates for dimension {d}", self.dim())));
        }
        Ok(())
    }
}

/// A point of the (open or closed) ordered chamber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChamberPoint {
    pub coords: Vec<f64>,
    pub strict: bool,
}

impl ChamberPoint {
    pub fn new(coords: Vec<f64>, strict: bool) -> Result<Self> {
        check_ordered(&coords, strict)?;
        Ok(ChamberPoint { coords, strict })
    }

    /// Strict if the coordinates allow it, weak otherwise.
    pub fn closed(coords: Vec<f64>) -> Result<Self> {
        check_ordered(&coords, false)?;
        let strict = coords.windows(2).all(|w| w[0] < w[1]);
        Ok(ChamberPoint { coords, strict })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

pub fn check_ordered(x: &[f64], strict: bool) -> Result<()> {
    if x.is_empty() {
        return invalid("empty point");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("coordinates must be finite");
    }
    let ok = if strict {
        x.windows(2).all(|w| w[0] < w[1])
    } else {
        x.windows(2).all(|w| w[0] <= w[1])
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "coordinates {x:?} are not {}ordered",
            if strict { "strictly " } else { "" }
        )))
    }
}

/// prod_{i<j} (x_j - x_i)
pub fn vandermonde(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for j in 0..x.len() {
        for i in 0..j {
            p *= x[j] - x[i];
        }
    }
    p
}

/// a_1 <= b_1 <= a_2 <= b_2 <= ... <= a_d <= b_d
pub fn interlaces(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|j| a[j] <= b[j] && (j + 1 == a.len() || b[j] <= a[j + 1]))
}

/// Layer of length k-1 sits between the entries of the layer of length k.
pub fn interlaces_layers(lower: &[f64], upper: &[f64]) -> bool {
    lower.len() + 1 == upper.len() && (0..lower.len()).all(|j| upper[j] <= lower[j] && lower[j] <= upper[j + 1])
}

/// Triangular array of interlacing layers; layer k has k entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GTPattern {
    pub layers: Vec<Vec<f64>>,
}

impl GTPattern {
    pub fn new(layers: Vec<Vec<f64>>) -> Result<Self> {
        for (k, l) in layers.iter().enumerate() {
            if l.len() != k + 1 {
                return Err(Error::Dimension(format!("layer {} has {} entries", k + 1, l.len())));
            }
            if l.iter().any(|v| !v.is_finite()) {
                return invalid("pattern entries must be finite");
            }
        }
        for k in 1..layers.len() {
            if !interlaces_layers(&layers[k - 1], &layers[k]) {
                return Err(Error::Domain(format!("layers {k} and {} do not interlace", k + 1)));
            }
        }
        Ok(GTPattern { layers })
    }

    pub fn zeros(d: usize) -> Self {
        GTPattern { layers: (1..=d).map(|k| vec![0.0; k]).collect() }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn top(&self) -> &[f64] {
        self.layers.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes() {
        assert_eq!(classify_rates(&[1.0, 1.0]).unwrap(), Regime::Equal);
        assert_eq!(classify_rates(&[2.0, 1.0]).unwrap(), Regime::StrictlyDecreasing);
        assert_eq!(classify_rates(&[1.0, 2.0]).unwrap(), Regime::StrictlyIncreasing);
        assert_eq!(classify_rates(&[1.0, 2.0, 1.0]).unwrap(), Regime::General);
        assert_eq!(classify_rates(&[3.0]).unwrap(), Regime::Equal);
        assert!(classify_rates(&[1.0, 0.0]).is_err());
        assert!(classify_rates(&[1.0, -2.0]).is_err());
    }

    #[test]
    fn vandermonde_and_interlacing() {
        assert_eq!(vandermonde(&[0.0, 1.0, 2.0]), 2.0);
        assert_eq!(vandermonde(&[5.0]), 1.0);
        assert!(interlaces(&[0.0, 1.0], &[0.5, 2.0]));
        assert!(!interlaces(&[0.0, 1.0], &[1.5, 2.0]));
    }

    #[test]
    fn gt_validation() {
        assert!(GTPattern::new(vec![vec![1.0], vec![0.0, 2.0]]).is_ok());
        assert!(matches!(GTPattern::new(vec![vec![3.0], vec![0.0, 2.0]]), Err(Error::Domain(_))));
        assert!(matches!(GTPattern::new(vec![vec![3.0], vec![0.0]]), Err(Error::Dimension(_))));
    }

    #[test]
    fn chamber_points() {
        assert!(ChamberPoint::new(vec![0.0, 0.0], true).is_err());
        assert!(ChamberPoint::new(vec![0.0, 0.0], false).is_ok());
        assert!(!ChamberPoint::closed(vec![0.0, 0.0]).unwrap().strict);
    }
}
