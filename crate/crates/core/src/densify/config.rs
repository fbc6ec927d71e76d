use std::f64::consts::FRAC_PI_6;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How newly added depths are checked inside the densification loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Validation {
    /// Against the previous keyframe's depth reprojected into this view;
    /// pixels it does not cover use the median test.
    #[default]
    TwoView,
    /// 5×5 median-absolute-deviation test against known neighbors.
    Median,
}

/// Parameters of the densification loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensifyConfig {
    /// Consistency threshold as a fraction of the depth range span.
    pub consistency_frac: f64,
    /// Largest azimuth change between consecutive pixels a walk crosses.
    pub azimuth_stop: f64,
    /// TV regularization weight.
    pub lambda: f64,
    /// Edge sensitivity of the TV weights `exp(-zeta·|∇I|)`.
    pub zeta: f64,
    /// Primal-dual iterations per smoothing pass.
    pub tv_iters: usize,
    /// Stop once `added / total` falls below this.
    pub convergence_ratio: f64,
    pub max_outer_iters: usize,
    pub validation: Validation,
    /// Smooth `ln z` instead of `z`.
    pub log_depth: bool,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        DensifyConfig {
            consistency_frac: 0.01,
            azimuth_stop: FRAC_PI_6,
            lambda: 0.3,
            zeta: 3.0,
            tv_iters: 3,
            convergence_ratio: 0.1,
            max_outer_iters: 20,
            validation: Validation::TwoView,
            log_depth: false,
        }
    }
}

impl DensifyConfig {
    /// Checks every field; the error message names the offending key.
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, key: &str, rule: &str, value: impl std::fmt::Display) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("`{key}` must be {rule}, got {value}")))
            }
        }
        let c = self;
        check(c.consistency_frac > 0.0 && c.consistency_frac.is_finite(), "consistency_frac", "positive", c.consistency_frac)?;
        check(c.azimuth_stop > 0.0 && c.azimuth_stop <= std::f64::consts::PI, "azimuth_stop", "in (0, π]", c.azimuth_stop)?;
        check(c.lambda >= 0.0 && c.lambda.is_finite(), "lambda", "non-negative", c.lambda)?;
        check(c.zeta >= 0.0 && c.zeta.is_finite(), "zeta", "non-negative", c.zeta)?;
        check(c.convergence_ratio > 0.0 && c.convergence_ratio < 1.0, "convergence_ratio", "in (0, 1)", c.convergence_ratio)?;
        check(c.max_outer_iters > 0, "max_outer_iters", "positive", c.max_outer_iters)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        DensifyConfig::default().validate().unwrap();
    }

    #[test]
    fn negative_lambda_names_the_key() {
        let cfg = DensifyConfig {
            lambda: -1.0,
            ..DensifyConfig::default()
        };
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("`lambda`"), "{msg}");
    }

    #[test]
    fn ratio_bounds() {
        for r in [0.0, 1.0, 1.5] {
            let cfg = DensifyConfig {
                convergence_ratio: r,
                ..DensifyConfig::default()
            };
            assert!(cfg.validate().is_err());
        }
    }
}
