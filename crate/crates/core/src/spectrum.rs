//! Spectra (ordered eigenvalue lists) and the three conjugation ensembles.

use serde::{Deserialize, Serialize};

use crate::error::{HornError, Result};
use crate::rat::{parse_rat, rat_to_f64, Rat};

/// Which group conjugates B: real orthogonal, unitary, or unitary symplectic,
/// i.e. Dyson index 1, 2 or 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    Orthogonal,
    Unitary,
    Symplectic,
}

impl EnsembleKind {
    pub fn dyson_index(self) -> u8 {
        match self {
            EnsembleKind::Orthogonal => 1,
            EnsembleKind::Unitary => 2,
            EnsembleKind::Symplectic => 4,
        }
    }

    pub fn from_dyson(beta: u8) -> Result<Self> {
        match beta {
            1 => Ok(EnsembleKind::Orthogonal),
            2 => Ok(EnsembleKind::Unitary),
            4 => Ok(EnsembleKind::Symplectic),
            other => Err(HornError::InvalidInput(format!("Dyson index {other} not in {{1,2,4}}"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnsembleKind::Orthogonal => "orthogonal",
            EnsembleKind::Unitary => "unitary",
            EnsembleKind::Symplectic => "symplectic",
        }
    }
}

/// Weakly decreasing list of real eigenvalues, n ∈ {2, 3}; keeps the exact
/// rational values when the spectrum came from literal input.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub exact: Option<Vec<Rat>>,
}

impl Spectrum {
    pub fn from_f64(mut values: Vec<f64>) -> Result<Self> {
        if !(values.len() == 2 || values.len() == 3) {
            return Err(HornError::InvalidInput(format!(
                "spectrum length {} not in {{2,3}}",
                values.len()
            )));
        }
        values.sort_by(|a, b| b.partial_cmp(a).ok_or(()).unwrap());
        Ok(Spectrum { values, exact: None })
    }

    pub fn from_rats(mut rats: Vec<Rat>) -> Result<Self> {
        if !(rats.len() == 2 || rats.len() == 3) {
            return Err(HornError::InvalidInput(format!(
                "spectrum length {} not in {{2,3}}",
                rats.len()
            )));
        }
        rats.sort_by(|a, b| b.cmp(a));
        let values = rats.iter().map(rat_to_f64).collect();
        Ok(Spectrum { values, exact: Some(rats) })
    }

    /// Parse a comma-separated list of rational literals, e.g. "1,0,-1".
    pub fn parse(s: &str) -> Result<Self> {
        let rats: Result<Vec<Rat>> = s.split(',').map(parse_rat).collect();
        Self::from_rats(rats?)
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_traceless(&self, tol: f64) -> bool {
        self.sum().abs() <= tol
    }

    /// Shift to zero trace (exactly, when exact values are present).
    pub fn traceless(&self) -> Self {
        match &self.exact {
            Some(rats) => {
                let n = Rat::from_integer(num_bigint::BigInt::from(rats.len() as i64));
                let mean = rats.iter().sum::<Rat>() / n;
                let shifted: Vec<Rat> = rats.iter().map(|r| r - &mean).collect();
                Spectrum::from_rats(shifted).expect("length preserved")
            }
            None => {
                let mean = self.sum() / self.n() as f64;
                let values = self.values.iter().map(|v| v - mean).collect();
                Spectrum { values, exact: None }
            }
        }
    }

    /// Vandermonde Δ = Π_{i<j} (λ_i − λ_j); nonnegative for the stored
    /// descending order.
    pub fn vandermonde(&self) -> f64 {
        let v = &self.values;
        let mut acc = 1.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                acc *= v[i] - v[j];
            }
        }
        acc
    }

    pub fn vandermonde_rat(&self) -> Option<Rat> {
        let rats = self.exact.as_ref()?;
        let mut acc = Rat::from_integer(num_bigint::BigInt::from(1));
        for i in 0..rats.len() {
            for j in i + 1..rats.len() {
                acc *= &rats[i] - &rats[j];
            }
        }
        Some(acc)
    }

    pub fn has_repeats(&self) -> bool {
        self.values.windows(2).any(|w| w[0] == w[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat_i64;

    #[test]
    fn parse_and_sort() {
        let s = Spectrum::parse("0,1,-1").unwrap();
        assert_eq!(s.values, vec![1.0, 0.0, -1.0]);
        assert_eq!(
            s.exact.as_ref().unwrap(),
            &vec![rat_i64(1), rat_i64(0), rat_i64(-1)]
        );
        assert!(s.is_traceless(1e-12));
        assert_eq!(s.vandermonde(), 2.0);
        assert_eq!(s.vandermonde_rat().unwrap(), rat_i64(2));
    }

    #[test]
    fn traceless_shift_is_exact() {
        let s = Spectrum::parse("11,-1,-10").unwrap();
        assert!(s.is_traceless(1e-12)); // already traceless
        let t = Spectrum::parse("3,1,-1").unwrap().traceless();
        assert_eq!(t.exact.as_ref().unwrap(), &vec![rat_i64(2), rat_i64(0), rat_i64(-2)]);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(Spectrum::parse("1").is_err());
        assert!(Spectrum::parse("4,3,2,1").is_err());
        assert!(Spectrum::parse("1,0.5").is_ok());
    }

    #[test]
    fn ensemble_round_trip() {
        for k in [EnsembleKind::Orthogonal, EnsembleKind::Unitary, EnsembleKind::Symplectic] {
            assert_eq!(EnsembleKind::from_dyson(k.dyson_index()).unwrap(), k);
        }
        assert!(EnsembleKind::from_dyson(3).is_err());
    }
}
