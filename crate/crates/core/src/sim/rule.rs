use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Site-local branching rate `b(k)` as a function of the site occupation.
///
/// Each branching event at a site is a birth or a death with probability
/// one half, so the offspring law is always critical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum BranchRule {
    /// `b(k) = gamma 1{k = 1}`
    Lonely { gamma: f64 },
    /// `b(k) = c k`
    Linear { c: f64 },
    /// `b(k) = gamma 1{k = j}`
    JStar { gamma: f64, j: u32 },
}

impl BranchRule {
    pub fn lonely(gamma: f64) -> Self {
        Self::Lonely { gamma }
    }

    pub fn validate(&self) -> Result<()> {
        let (v, what) = match *self {
            Self::Lonely { gamma } => (gamma, "gamma"),
            Self::Linear { c } => (c, "c"),
            Self::JStar { gamma, j } => {
                if j == 0 {
                    return Err(Error::Config("j-star rule needs j >= 1".into()));
                }
                (gamma, "gamma")
            }
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Config(format!("{what} must be finite and >= 0, got {v}")));
        }
        Ok(())
    }

    #[inline]
    pub fn rate(&self, k: u32) -> f64 {
        match *self {
            Self::Lonely { gamma } => if k == 1 { gamma } else { 0.0 },
            Self::Linear { c } => c * k as f64,
            Self::JStar { gamma, j } => if k == j { gamma } else { 0.0 },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lonely { .. } => "lonely",
            Self::Linear { .. } => "linear",
            Self::JStar { .. } => "j-star",
        }
    }

    /// Whether `b(k) > 0` only for `k = 1`.
    pub fn is_lonely(&self) -> bool {
        match *self {
            Self::Lonely { .. } => true,
            Self::JStar { gamma, j } => j == 1 || gamma == 0.0,
            Self::Linear { c } => c == 0.0,
        }
    }

    /// The constant `gamma` when the rule is lonely.
    pub fn lonely_gamma(&self) -> Option<f64> {
        match *self {
            Self::Lonely { gamma } => Some(gamma),
            Self::JStar { gamma, j: 1 } => Some(gamma),
            Self::JStar { gamma: g, .. } | Self::Linear { c: g } if g == 0.0 => Some(0.0),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let l = BranchRule::lonely(2.0);
        assert_eq!(l.rate(0), 0.0);
        assert_eq!(l.rate(1), 2.0);
        assert_eq!(l.rate(2), 0.0);
        assert_eq!(BranchRule::Linear { c: 0.5 }.rate(4), 2.0);
        let j = BranchRule::JStar { gamma: 1.0, j: 3 };
        assert_eq!(j.rate(3), 1.0);
        assert_eq!(j.rate(1), 0.0);
        assert_eq!(j.lonely_gamma(), None);
        assert_eq!(BranchRule::JStar { gamma: 1.5, j: 1 }.lonely_gamma(), Some(1.5));
    }

    #[test]
    fn validation() {
        assert!(BranchRule::lonely(-1.0).validate().is_err());
        assert!(BranchRule::lonely(f64::NAN).validate().is_err());
        assert!(BranchRule::JStar { gamma: 1.0, j: 0 }.validate().is_err());
        assert!(BranchRule::lonely(0.0).validate().is_ok());
    }
}
