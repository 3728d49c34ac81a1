//! Truncated Zeta distribution used for integer literals and variable indices.

use once_cell::sync::Lazy;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("zeta exponent must exceed 1 and kmax must be positive (s={s}, kmax={kmax})")]
pub struct DomainError {
    pub s: f64,
    pub kmax: usize,
}

/// `P(k) = k^-s / Σ_{j≤kmax} j^-s` for `k = 1..=kmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaTable {
    pub s: f64,
    pub kmax: usize,
    /// `probs[k - 1]` is the probability of `k`.
    pub probs: Vec<f64>,
}

impl ZetaTable {
    /// Probability of `k` (1-based); zero outside the table.
    pub fn p(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.probs.get(k - 1).copied().unwrap_or(0.0)
    }
}

pub fn zeta_table(s: f64, kmax: usize) -> Result<ZetaTable, DomainError> {
    if s.is_nan() || s <= 1.0 || kmax == 0 {
        return Err(DomainError { s, kmax });
    }
    let weights: Vec<f64> = (1..=kmax).map(|k| (k as f64).powf(-s)).collect();
    // Smallest terms first keeps the sum accurate.
    let total: f64 = weights.iter().rev().sum();
    Ok(ZetaTable { s, kmax, probs: weights.iter().map(|w| w / total).collect() })
}

pub const LITERAL_S: f64 = 2.0;
pub const LITERAL_KMAX: usize = 256;

pub static LITERALS: Lazy<ZetaTable> = Lazy::new(|| zeta_table(LITERAL_S, LITERAL_KMAX).expect("valid parameters"));

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_domain() {
        assert!(zeta_table(1.0, 10).is_err());
        assert!(zeta_table(2.0, 0).is_err());
    }

    #[test]
    fn single_entry() {
        assert_eq!(zeta_table(2.0, 1).unwrap().probs, vec![1.0]);
    }

    #[test]
    fn decreasing() {
        let t = &*LITERALS;
        assert!(t.probs.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(t.p(0), 0.0);
        assert_eq!(t.p(257), 0.0);
    }
}
