//! Scalars that define one draw of the random ensemble.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every scalar needed to sample logits, labels, mean logit gradients and
/// residuals.
///
/// The defaults are the reference configuration: 300 examples, 10 classes,
/// 1000 weights, logit scale 15, mean-gradient scale `1/sqrt(D)`, residual
/// scale `0.7/sqrt(D)`, simulated accuracy 0.95 and a 10-dimensional
/// projection hyperplane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_examples: usize,
    pub n_classes: usize,
    pub n_weights: usize,
    /// Standard deviation of each logit.
    pub sigma_z: f64,
    /// Standard deviation of each mean logit-gradient component.
    pub sigma_c: f64,
    /// Standard deviation of each residual component.
    pub sigma_e: f64,
    /// Class `k` mean gradient is stretched by `1 + length_beta * k / (C - 1)`.
    pub length_beta: f64,
    pub target_accuracy: f64,
    pub seed: u64,
    /// Dimension of the random hyperplane used for projected statistics.
    pub hyperplane_dim: usize,
}

pub const DEFAULT_SEED: u64 = 42;

impl Default for ModelParams {
    fn default() -> Self {
        Self::with_weights(1000)
    }
}

impl ModelParams {
    /// Reference configuration with `n_weights` weights and the gradient
    /// scales rescaled to `1/sqrt(n_weights)` and `0.7/sqrt(n_weights)`.
    pub fn with_weights(n_weights: usize) -> Self {
        let root = (n_weights.max(1) as f64).sqrt();
        ModelParams {
            n_examples: 300,
            n_classes: 10,
            n_weights,
            sigma_z: 15.0,
            sigma_c: 1.0 / root,
            sigma_e: 0.7 / root,
            length_beta: 0.0,
            target_accuracy: 0.95,
            seed: DEFAULT_SEED,
            hyperplane_dim: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_examples == 0 {
            return Err(Error::param("n_examples", "must be at least 1"));
        }
        if self.n_classes < 2 {
            return Err(Error::param("n_classes", "must be at least 2"));
        }
        if self.n_weights == 0 {
            return Err(Error::param("n_weights", "must be at least 1"));
        }
        for (name, value) in [
            ("sigma_z", self.sigma_z),
            ("sigma_c", self.sigma_c),
            ("sigma_e", self.sigma_e),
            ("length_beta", self.length_beta),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and nonnegative, got {value}"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.target_accuracy) {
            return Err(Error::param(
                "target_accuracy",
                format!("must lie in [0, 1], got {}", self.target_accuracy),
            ));
        }
        if self.hyperplane_dim == 0 || self.hyperplane_dim > self.n_weights {
            return Err(Error::param(
                "hyperplane_dim",
                format!(
                    "must lie in [1, n_weights = {}], got {}",
                    self.n_weights, self.hyperplane_dim
                ),
            ));
        }
        Ok(())
    }

    /// Signal-to-noise ratio `sigma_c^2 / sigma_e^2` of the logit gradients.
    pub fn snr(&self) -> f64 {
        (self.sigma_c * self.sigma_c) / (self.sigma_e * self.sigma_e)
    }

    /// Length multiplier applied to the mean gradient of class `k`.
    pub fn length_multiplier(&self, k: usize) -> f64 {
        1.0 + self.length_beta * k as f64 / (self.n_classes - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_configuration() {
        let p = ModelParams::default();
        assert_eq!((p.n_examples, p.n_classes, p.n_weights), (300, 10, 1000));
        assert_eq!(p.sigma_z, 15.0);
        assert!((p.sigma_c - 1.0 / 1000f64.sqrt()).abs() < 1e-15);
        assert!((p.sigma_e - 0.7 / 1000f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.target_accuracy, 0.95);
        assert_eq!(p.hyperplane_dim, 10);
        assert!(p.validate().is_ok());
        assert!((p.snr() - 1.0 / 0.49).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        let mut p = ModelParams::default();
        p.n_classes = 1;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParam { name: "n_classes", .. })
        ));

        let mut p = ModelParams::default();
        p.hyperplane_dim = 2000;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParam { name: "hyperplane_dim", .. })
        ));

        let mut p = ModelParams::default();
        p.sigma_z = -1.0;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidParam { name: "sigma_z", .. })
        ));

        let mut p = ModelParams::default();
        p.target_accuracy = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn length_multiplier_is_linear_in_class_index() {
        let mut p = ModelParams::default();
        assert_eq!(p.length_multiplier(9), 1.0);
        p.length_beta = 2.0;
        assert_eq!(p.length_multiplier(0), 1.0);
        assert_eq!(p.length_multiplier(9), 3.0);
    }
}
