//! Channel aging with delayed, imperfect CSIT, plus the residual hardware
//! distortions at both link ends.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::TierParams;
use crate::error::{Error, Result};

/// Below this |delta| the delayed precoder scaling delta^-2 is treated as a
/// domain error.
pub const MIN_AGING: f64 = 1e-6;

/// Variance of the combined aging and feedback error, 1 - delta^2 (1 - tau^2).
pub fn combined_error_variance(delta: f64, tau: f64) -> f64 {
    (1.0 - delta * delta * (1.0 - tau * tau)).clamp(0.0, 1.0)
}

/// Aged CSIT of one tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgedCsit {
    pub delta: f64,
    pub tau: f64,
}

impl AgedCsit {
    pub fn new(delta: f64, tau: f64) -> Self {
        AgedCsit { delta, tau }
    }

    pub fn of(tier: &TierParams) -> Self {
        AgedCsit::new(tier.delta(), tier.csit_quality)
    }

    pub fn error_variance(&self) -> f64 {
        combined_error_variance(self.delta, self.tau)
    }

    /// Factor applied to the previous estimate, delta sqrt(1 - tau^2).
    pub fn estimate_scale(&self) -> f64 {
        self.delta * (1.0 - self.tau * self.tau).sqrt()
    }

    /// delta^-2, or a domain error when |delta| is numerically zero.
    pub fn inverse_delta_sq(&self) -> Result<f64> {
        if self.delta.abs() < MIN_AGING {
            return Err(Error::AgingDomain { delta: self.delta });
        }
        Ok(1.0 / (self.delta * self.delta))
    }
}

/// Hardware distortion levels and the amplified thermal noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionParams {
    pub kappa_t: f64,
    pub kappa_r: f64,
    pub atn_variance: f64,
}

impl DistortionParams {
    pub fn of(tier: &TierParams) -> Self {
        DistortionParams {
            kappa_t: tier.tx_impairment,
            kappa_r: tier.rx_impairment,
            atn_variance: tier.atn_variance,
        }
    }
}

/// One CN(0, variance) sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Vector with i.i.d. CN(0, variance) entries.
pub fn complex_normal_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> DVector<Complex64> {
    DVector::from_fn(len, |_, _| complex_normal(rng, variance))
}

/// One step of the Gauss-Markov aging model seen through delayed CSIT.
/// Returns (current channel, current estimate).
pub fn sample_aged_channel<R: Rng + ?Sized>(
    prev_estimate: &DVector<Complex64>,
    csit: AgedCsit,
    rng: &mut R,
) -> (DVector<Complex64>, DVector<Complex64>) {
    let estimate = prev_estimate * Complex64::from(csit.estimate_scale());
    let var = csit.error_variance();
    let channel = if var == 0.0 {
        estimate.clone()
    } else {
        &estimate + complex_normal_vector(rng, prev_estimate.len(), var)
    };
    (channel, estimate)
}

/// Transmit and receive distortion powers for a channel realization with
/// squared norm `channel_norm_sq` and serving power factor `beta`.
pub fn distortion_powers(params: &DistortionParams, channel_norm_sq: f64, beta: f64) -> (f64, f64) {
    (
        beta * params.kappa_t * params.kappa_t * channel_norm_sq,
        beta * params.kappa_r * params.kappa_r * channel_norm_sq,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{jakes_delta, kappa_from_bits};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Gamma;

    #[test]
    fn error_variance_values() {
        assert_eq!(combined_error_variance(1.0, 0.0), 0.0);
        assert_eq!(combined_error_variance(0.0, 0.3), 1.0);
        assert!((combined_error_variance(0.9, 0.1) - 0.1981).abs() < 1e-12);
    }

    #[test]
    fn error_variance_matches_sample_variance() {
        // h_n = delta h_{n-1} + e, hhat_{n-1} = sqrt(1-tau^2) h_{n-1} + tau htilde
        let (delta, tau) = (0.9f64, 0.1f64);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mut acc = 0.0;
        let scale = delta * (1.0 - tau * tau).sqrt();
        for _ in 0..n {
            let h_prev = complex_normal(&mut rng, 1.0);
            let htilde = complex_normal(&mut rng, 1.0);
            let e = complex_normal(&mut rng, 1.0 - delta * delta);
            let h = h_prev * delta + e;
            let hhat = h_prev * (1.0 - tau * tau).sqrt() + htilde * tau;
            acc += (h - hhat * scale).norm_sqr();
        }
        let v = acc / n as f64;
        assert!((v - 0.1981).abs() < 3e-3, "{v}");
    }

    #[test]
    fn perfect_csit_keeps_the_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prev = complex_normal_vector(&mut rng, 4, 1.0);
        let (h, est) = sample_aged_channel(&prev, AgedCsit::new(1.0, 0.0), &mut rng);
        assert_eq!(h, prev);
        assert_eq!(est, prev);
    }

    #[test]
    fn aged_channel_moments() {
        let csit = AgedCsit::new(0.8, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let (mut var, mut corr) = (0.0, Complex64::new(0.0, 0.0));
        let mut sq = 0.0;
        for _ in 0..n {
            let prev = complex_normal_vector(&mut rng, 1, 1.0);
            let (h, _) = sample_aged_channel(&prev, csit, &mut rng);
            let p = h[0].norm_sqr();
            var += p;
            sq += p * p;
            corr += h[0] * prev[0].conj();
        }
        let mean = var / n as f64;
        // |h|^2 is Exp(1): variance of the estimator is 1/n
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "{mean}");
        let c = corr / n as f64;
        assert!((c.re - csit.estimate_scale()).abs() < 4.0 / (n as f64).sqrt());
        assert!(c.im.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn aging_is_stationary() {
        let csit = AgedCsit::new(0.95, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut h = complex_normal_vector(&mut rng, 20_000, 1.0);
        for _ in 0..10 {
            h = sample_aged_channel(&h, csit, &mut rng).0;
        }
        let v = h.iter().map(|c| c.norm_sqr()).sum::<f64>() / h.len() as f64;
        assert!((v - 1.0).abs() < 3.0 / (h.len() as f64).sqrt(), "{v}");
    }

    #[test]
    fn distortion_values() {
        let zero = DistortionParams { kappa_t: 0.0, kappa_r: 0.0, atn_variance: 1.0 };
        assert_eq!(distortion_powers(&zero, 3.0, 2.0), (0.0, 0.0));
        let p = DistortionParams { kappa_t: 0.126, kappa_r: 0.063, atn_variance: 1.0 };
        let (t, r) = distortion_powers(&p, 2.7, 1.5);
        assert_eq!(t / r, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Gamma::new(5.0, 1.0).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| distortion_powers(&p, g.sample(&mut rng), 2.0).0).sum::<f64>() / n as f64;
        let expected = 2.0 * 0.126f64.powi(2) * 5.0;
        assert!((mean / expected - 1.0).abs() < 0.01);
        let _ = kappa_from_bits(3);
    }

    #[test]
    fn domain_error_near_zero_delta() {
        assert!(matches!(AgedCsit::new(1e-7, 0.0).inverse_delta_sq(), Err(Error::AgingDomain { .. })));
        assert_eq!(AgedCsit::new(-0.5, 0.0).inverse_delta_sq().unwrap(), 4.0);
    }

    #[test]
    fn jakes_zeros_show_up_in_error_variance() {
        // sigma_e^2 = 1 exactly where J0 vanishes
        let mut peaks = Vec::new();
        let step = 1e-5;
        let mut prev = combined_error_variance(jakes_delta(0.0, 1.0), 0.0);
        let mut rising = true;
        let mut x = step;
        while x < 0.95 {
            let v = combined_error_variance(jakes_delta(x, 1.0), 0.0);
            if rising && v < prev {
                peaks.push(x - step);
            }
            rising = v >= prev;
            prev = v;
            x += step;
        }
        assert!(peaks.len() >= 2);
        assert!((peaks[0] - 2.40483 / (2.0 * std::f64::consts::PI)).abs() < 1e-3);
        assert!((peaks[1] - 5.52008 / (2.0 * std::f64::consts::PI)).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn error_variance_monotone(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (dl, dh) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let (tl, th) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(combined_error_variance(dh, t1) <= combined_error_variance(dl, t1));
            prop_assert!(combined_error_variance(d1, tl) <= combined_error_variance(d1, th));
            let v = combined_error_variance(d1, t1);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
