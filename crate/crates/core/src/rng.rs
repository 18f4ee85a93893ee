//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `SHA-256(seed_le || label)`,
//! where `seed_le` is the 8-byte little-endian seed and `label` the UTF-8
//! bytes of the stream label. Gaussian variates come from the Box-Muller
//! transform evaluated with `libm`, and uniform integers from rejection
//! sampling on raw 64-bit words. None of these depend on the platform or on
//! `rand` version changes, so identical `(seed, label)` pairs give
//! bit-identical draws everywhere.

use std::f64::consts::TAU;

use ndarray::{Array2, Array3};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A labelled, independently seeded random stream.
///
/// Streams are deliberately not `Clone`: two consumers drawing from copies
/// of one stream would silently see the same numbers.
#[derive(Debug)]
pub struct RngStream {
    rng: ChaCha8Rng,
    label: String,
    spare: Option<f64>,
}

/// Derive the stream for `(seed, label)`.
pub fn substream(seed: u64, label: &str) -> RngStream {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    RngStream {
        rng: ChaCha8Rng::from_seed(key),
        label: label.to_owned(),
        spare: None,
    }
}

impl RngStream {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` by rejection, without modulo bias.
    ///
    /// # Panics
    /// If `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// Standard normal variate (Box-Muller, cached second value).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the logarithm is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * libm::log(u1)).sqrt();
        let angle = TAU * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    /// Fill `out` with i.i.d. `Normal(0, sigma^2)` draws.
    ///
    /// The stream advances by the same amount whatever `sigma` is, so a zero
    /// scale does not shift later draws.
    pub fn fill_normal(&mut self, out: &mut [f64], sigma: f64) {
        for x in out.iter_mut() {
            let z = self.standard_normal();
            *x = if sigma == 0.0 { 0.0 } else { sigma * z };
        }
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            "sigma",
            format!("must be finite and nonnegative, got {sigma}"),
        ))
    }
}

/// `rows x cols` matrix of i.i.d. `Normal(0, sigma^2)` entries, filled in
/// row-major order.
pub fn gaussian_matrix(
    stream: &mut RngStream,
    rows: usize,
    cols: usize,
    sigma: f64,
) -> Result<Array2<f64>> {
    check_sigma(sigma)?;
    let mut m = Array2::zeros((rows, cols));
    stream.fill_normal(m.as_slice_mut().expect("standard layout"), sigma);
    Ok(m)
}

/// Three-index analogue of [`gaussian_matrix`], filled in row-major order.
pub fn gaussian_tensor(
    stream: &mut RngStream,
    shape: (usize, usize, usize),
    sigma: f64,
) -> Result<Array3<f64>> {
    check_sigma(sigma)?;
    let mut t = Array3::zeros(shape);
    stream.fill_normal(t.as_slice_mut().expect("standard layout"), sigma);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(stream: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| stream.standard_normal()).collect()
    }

    #[test]
    fn same_seed_and_label_repeat() {
        let a = draws(&mut substream(42, "logits"), 100);
        let b = draws(&mut substream(42, "logits"), 100);
        assert_eq!(a, b);
    }

    #[test]
    fn labels_and_seeds_separate_streams() {
        let a = draws(&mut substream(42, "logits"), 100);
        let b = draws(&mut substream(42, "residuals"), 100);
        let c = draws(&mut substream(43, "logits"), 100);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_sigma_gives_zeros_and_keeps_stream_position() {
        let mut s = substream(1, "x");
        let m = gaussian_matrix(&mut s, 3, 4, 0.0).unwrap();
        assert!(m.iter().all(|&x| x == 0.0 && x.is_sign_positive()));
        let after_zero = s.next_u64();

        let mut s = substream(1, "x");
        gaussian_matrix(&mut s, 3, 4, 2.0).unwrap();
        assert_eq!(s.next_u64(), after_zero);
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut s = substream(1, "x");
        assert!(gaussian_matrix(&mut s, 2, 2, -1.0).is_err());
        assert!(gaussian_matrix(&mut s, 2, 2, f64::NAN).is_err());
    }

    #[test]
    fn same_state_same_matrix() {
        let a = gaussian_matrix(&mut substream(7, "m"), 5, 6, 1.5).unwrap();
        let b = gaussian_matrix(&mut substream(7, "m"), 5, 6, 1.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_moments() {
        // 1e6 draws: the standard error of the mean is 1e-3, of the variance
        // sqrt(2)*1e-3 and of the kurtosis sqrt(24/n) ~ 4.9e-3.
        let n = 1_000_000;
        let m = gaussian_matrix(&mut substream(2024, "moments"), 1000, 1000, 1.0).unwrap();
        let mean = m.sum() / n as f64;
        let var = m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        let m4 = m.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64;
        let kurtosis = m4 / (var * var);
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "variance {var}");
        assert!(
            (kurtosis - 3.0).abs() < 3.0 * (24.0 / n as f64).sqrt(),
            "kurtosis {kurtosis}"
        );
    }

    #[test]
    fn below_is_in_range_and_roughly_uniform() {
        let mut s = substream(3, "below");
        let mut counts = [0usize; 7];
        for _ in 0..70_000 {
            counts[s.below(7)] += 1;
        }
        for c in counts {
            assert!((9_500..10_500).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut s = substream(5, "shuffle");
        let mut v: Vec<usize> = (0..50).collect();
        s.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
