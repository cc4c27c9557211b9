use serde::{Deserialize, Serialize};

use crate::analysis::AppnpOptions;
use crate::error::{Error, Result};

/// Graph size category selecting hyperparameter defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    /// Category by node count: under 20k nodes is small, under 100k medium.
    pub fn for_node_count(n: usize) -> Self {
        match n {
            0..20_000 => SizeClass::Small,
            20_000..100_000 => SizeClass::Medium,
            _ => SizeClass::Large,
        }
    }

    pub fn defaults(self) -> ModelConfig {
        let (lr, hops, init_std, eps) = match self {
            SizeClass::Small => (1e-4, 4, 0.05, 0.0),
            SizeClass::Medium => (5e-4, 5, 0.01, 4e-3),
            SizeClass::Large => (5e-4, 6, 0.05, 4e-3),
        };
        ModelConfig {
            hops,
            hidden: 64,
            lr,
            eps,
            init_std,
            epochs: 100,
            variant: Variant::Standard,
            sc_enabled: true,
        }
    }
}

impl std::str::FromStr for SizeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "small" => Ok(SizeClass::Small),
            "medium" => Ok(SizeClass::Medium),
            "large" => Ok(SizeClass::Large),
            _ => Err(Error::InvalidArgument(format!("unknown size class {s:?}"))),
        }
    }
}

/// Which smoothing process feeds the smoothing learning component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// Augmented propagation `Bᵗ = Pᵗ − P^∞`.
    Standard,
    /// APPNP deviations `Zᵗ − Z^∞`.
    Appnp {
        alpha: f64,
        tol: f64,
        max_iter: usize,
    },
}

impl Variant {
    pub fn appnp(alpha: f64) -> Self {
        let opts = AppnpOptions::new(alpha);
        Variant::Appnp {
            alpha,
            tol: opts.tol,
            max_iter: opts.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Propagation hops `T`; the model uses hops `0..=T`.
    pub hops: usize,
    pub hidden: usize,
    pub lr: f64,
    /// Threshold below which converged-projector entries are zeroed.
    pub eps: f64,
    pub init_std: f64,
    pub epochs: usize,
    pub variant: Variant,
    /// Scale representations by the smoothing coefficients.
    pub sc_enabled: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        SizeClass::Medium.defaults()
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.hops < 1 {
            return bad("hops must be at least 1".into());
        }
        if self.hidden < 1 {
            return bad("hidden width must be at least 1".into());
        }
        if !(self.eps >= 0.0) {
            return bad(format!("eps must be non-negative, got {}", self.eps));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad(format!(
                "init std must be non-negative, got {}",
                self.init_std
            ));
        }
        if let Variant::Appnp {
            alpha,
            tol,
            max_iter,
        } = self.variant
        {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return bad(format!(
                    "teleport probability must lie in (0, 1], got {alpha}"
                ));
            }
            if !(tol > 0.0) || max_iter == 0 {
                return bad("APPNP tolerance and iteration cap must be positive".into());
            }
        }
        Ok(())
    }

    pub(crate) fn appnp_options(&self) -> Option<AppnpOptions> {
        match self.variant {
            Variant::Standard => None,
            Variant::Appnp {
                alpha,
                tol,
                max_iter,
            } => Some(AppnpOptions {
                alpha,
                tol,
                max_iter,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_class_defaults() {
        let s = SizeClass::Small.defaults();
        assert_eq!(
            (s.lr, s.hops, s.init_std, s.eps, s.hidden),
            (1e-4, 4, 0.05, 0.0, 64)
        );
        let m = SizeClass::Medium.defaults();
        assert_eq!(
            (m.lr, m.hops, m.init_std, m.eps, m.hidden),
            (5e-4, 5, 0.01, 4e-3, 64)
        );
        let l = SizeClass::Large.defaults();
        assert_eq!(
            (l.lr, l.hops, l.init_std, l.eps, l.hidden),
            (5e-4, 6, 0.05, 4e-3, 64)
        );
        assert_eq!(m.epochs, 100);
    }

    #[test]
    fn size_class_by_count_and_name() {
        assert_eq!(SizeClass::for_node_count(10_984), SizeClass::Small);
        assert_eq!(SizeClass::for_node_count(39_357), SizeClass::Medium);
        assert_eq!(SizeClass::for_node_count(203_769), SizeClass::Large);
        assert_eq!("medium".parse::<SizeClass>().unwrap(), SizeClass::Medium);
        assert!("huge".parse::<SizeClass>().is_err());
    }

    #[test]
    fn validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig {
            hops: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ModelConfig {
            eps: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        let appnp = ModelConfig {
            variant: Variant::appnp(0.0),
            ..Default::default()
        };
        assert!(appnp.validate().is_err());
        let appnp = ModelConfig {
            variant: Variant::appnp(0.2),
            ..Default::default()
        };
        assert!(appnp.validate().is_ok());
    }

    #[test]
    fn config_json_round_trip() {
        let c = ModelConfig {
            variant: Variant::appnp(0.25),
            sc_enabled: false,
            ..Default::default()
        };
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ModelConfig>(&json).unwrap(), c);
    }
}
