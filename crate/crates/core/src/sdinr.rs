//! Serving-link SDINR: desired power, estimation error, transmit and
//! receive distortions, other-cell interference and amplified noise.
//!
//! Two samplers are provided. The distributional one draws every term from
//! its closed-form law; the matrix one builds explicit channels and the
//! normalized ZF precoder and is used to check the former.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};

use crate::channel::{complex_normal, complex_normal_vector, distortion_powers, AgedCsit, DistortionParams};
use crate::config::NetworkConfig;
use crate::error::Result;
use crate::geometry::{directivity_pmf, Association, BsRealization};

/// How the SDINR terms are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fidelity {
    #[default]
    Distributional,
    Matrix,
}

impl Fidelity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fidelity::Distributional => "distributional",
            Fidelity::Matrix => "matrix",
        }
    }
}

impl std::str::FromStr for Fidelity {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "distributional" => Ok(Fidelity::Distributional),
            "matrix" => Ok(Fidelity::Matrix),
            other => Err(crate::Error::invalid("mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// One realization of the SDINR decomposition. Powers are in Watts except
/// `z`, which is the dimensionless desired channel gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdinrTerms {
    /// M_r M_t P C x^-alpha of the serving link.
    pub beta: f64,
    pub z: f64,
    pub estimation_error: f64,
    pub tx_distortion: f64,
    pub rx_distortion: f64,
    pub interference: f64,
    pub atn: f64,
}

impl SdinrTerms {
    pub fn denominator(&self) -> f64 {
        self.estimation_error + self.tx_distortion + self.rx_distortion + self.interference + self.atn
    }

    pub fn sdinr(&self) -> f64 {
        self.beta * self.z / self.denominator()
    }
}

/// Serving power factor beta of an association.
pub fn serving_beta(cfg: &NetworkConfig, bss: &[BsRealization], assoc: &Association) -> f64 {
    assoc.gain * cfg.tiers[assoc.tier].per_user_power() * bss[assoc.index].path_loss
}

/// Cumulative directivity PMFs per tier, for sampling interfering gains.
#[derive(Debug, Clone)]
pub struct GainSampler {
    tiers: Vec<[(f64, f64); 4]>,
}

impl GainSampler {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let tiers = cfg
            .tiers
            .iter()
            .map(|t| {
                let pmf = directivity_pmf(&cfg.rx_beam, &t.tx_beam);
                let mut acc = 0.0;
                pmf.map(|(a, b)| {
                    acc += b;
                    (a, acc)
                })
            })
            .collect();
        GainSampler { tiers }
    }

    /// Draws the directivity gain of an interfering link from tier `j`.
    pub fn sample<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let classes = &self.tiers[j];
        classes.iter().find(|(_, c)| u < *c).unwrap_or(&classes[3]).0
    }
}

/// Per-configuration samplers reused across drops.
#[derive(Debug, Clone)]
pub struct SdinrSampler {
    gains: GainSampler,
    fading: Vec<Gamma<f64>>,
    fading_scale: Vec<f64>,
}

impl SdinrSampler {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let fading_scale: Vec<f64> = cfg.tiers.iter().map(|t| cfg.fading_scale.theta(t.users_per_bs)).collect();
        let fading = cfg
            .tiers
            .iter()
            .zip(&fading_scale)
            .map(|(t, &theta)| Gamma::new(t.users_per_bs as f64, theta).expect("validated"))
            .collect();
        SdinrSampler {
            gains: GainSampler::new(cfg),
            fading,
            fading_scale,
        }
    }

    /// Aggregate interference from every BS except the serving one, with
    /// fading powers drawn by `fading(tier, rng)`.
    fn interference<R, F>(&self, cfg: &NetworkConfig, bss: &[BsRealization], serving: usize, rng: &mut R, mut fading: F) -> f64
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &mut R) -> f64,
    {
        let mut total = 0.0;
        for (i, bs) in bss.iter().enumerate() {
            if i == serving {
                continue;
            }
            let a = self.gains.sample(bs.tier, rng);
            let g = fading(bs.tier, rng);
            total += a * bs.path_loss * cfg.tiers[bs.tier].per_user_power() * g;
        }
        total
    }

    /// Aggregate interference with Gamma fading, as used by the
    /// distributional sampler.
    pub fn sample_interference<R: Rng + ?Sized>(&self, cfg: &NetworkConfig, bss: &[BsRealization], serving: usize, rng: &mut R) -> f64 {
        self.interference(cfg, bss, serving, rng, |j, r| self.fading[j].sample(r))
    }

    /// Draws every term from its closed-form distribution.
    pub fn sample_distributional<R: Rng + ?Sized>(
        &self,
        cfg: &NetworkConfig,
        bss: &[BsRealization],
        assoc: &Association,
        rng: &mut R,
    ) -> Result<SdinrTerms> {
        let tier = &cfg.tiers[assoc.tier];
        let csit = AgedCsit::of(tier);
        let inv_delta_sq = csit.inverse_delta_sq()?;
        let beta = serving_beta(cfg, bss, assoc);
        let (n, k) = (tier.antennas as f64, tier.users_per_bs as f64);
        let sigma_h = cfg.estimated_channel_variance;

        let gain = Gamma::new(n, sigma_h).expect("validated").sample(rng);
        let split = if tier.users_per_bs == 1 {
            1.0
        } else {
            Beta::new(tier.diversity() as f64, k - 1.0).expect("validated").sample(rng)
        };
        let err_var = csit.error_variance();
        let error_gain = if err_var > 0.0 {
            Gamma::new(k, err_var).expect("validated").sample(rng)
        } else {
            0.0
        };
        let h_norm_sq = Gamma::new(n, 1.0).expect("validated").sample(rng);
        let dist = DistortionParams::of(tier);
        let (tx, rx) = distortion_powers(&dist, h_norm_sq, beta);
        Ok(SdinrTerms {
            beta,
            z: split * gain,
            estimation_error: beta * inv_delta_sq * (1.0 + dist.kappa_t * dist.kappa_t) * error_gain,
            tx_distortion: tx,
            rx_distortion: rx,
            interference: self.sample_interference(cfg, bss, assoc.index, rng),
            atn: dist.atn_variance,
        })
    }

    /// Builds explicit channels and the normalized ZF precoder.
    pub fn sample_matrix<R: Rng + ?Sized>(
        &self,
        cfg: &NetworkConfig,
        bss: &[BsRealization],
        assoc: &Association,
        rng: &mut R,
    ) -> Result<SdinrTerms> {
        let tier = &cfg.tiers[assoc.tier];
        let csit = AgedCsit::of(tier);
        let inv_delta_sq = csit.inverse_delta_sq()?;
        let beta = serving_beta(cfg, bss, assoc);
        let sigma_h = cfg.estimated_channel_variance;
        let (n, k) = (tier.antennas, tier.users_per_bs);

        let (estimates, precoder) = loop {
            let h = DMatrix::from_fn(n, k, |_, _| complex_normal(rng, sigma_h));
            if let Some(v) = zf_precoder(&h) {
                break (h, v);
            }
        };
        let h0 = estimates.column(0);
        let z = h0.dotc(&precoder.column(0)).norm_sqr();

        let err = complex_normal_vector(rng, n, csit.error_variance());
        let leak = precoder.ad_mul(&err);
        let error_gain = leak.norm_squared();

        // current channel: aged estimate plus the combined error
        let scale = csit.estimate_scale() / sigma_h.sqrt();
        let channel = h0.map(|c| c * scale) + &err;
        let dist = DistortionParams::of(tier);
        let (tx, rx) = distortion_powers(&dist, channel.norm_squared(), beta);

        let interference = self.interference(cfg, bss, assoc.index, rng, |j, r| {
            let t = &cfg.tiers[j];
            let g = complex_normal_vector(r, t.antennas, 1.0);
            let v = random_orthonormal(t.antennas, t.users_per_bs, r);
            v.ad_mul(&g).norm_squared() * self.fading_scale[j]
        });

        Ok(SdinrTerms {
            beta,
            z,
            estimation_error: beta * inv_delta_sq * (1.0 + dist.kappa_t * dist.kappa_t) * error_gain,
            tx_distortion: tx,
            rx_distortion: rx,
            interference,
            atn: dist.atn_variance,
        })
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        cfg: &NetworkConfig,
        bss: &[BsRealization],
        assoc: &Association,
        fidelity: Fidelity,
        rng: &mut R,
    ) -> Result<SdinrTerms> {
        match fidelity {
            Fidelity::Distributional => self.sample_distributional(cfg, bss, assoc, rng),
            Fidelity::Matrix => self.sample_matrix(cfg, bss, assoc, rng),
        }
    }
}

fn normalize_columns(m: &mut DMatrix<Complex64>) -> Option<()> {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        col.unscale_mut(norm);
    }
    Some(())
}

/// Column-normalized ZF precoder of an N x K estimate matrix: columns of
/// H_bar (H_bar^H H_bar)^-1 scaled to unit norm, H_bar the column-normalized
/// estimate. None if the Gram matrix is singular.
pub fn zf_precoder(estimates: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let mut bar = estimates.clone();
    normalize_columns(&mut bar)?;
    let gram = bar.ad_mul(&bar);
    let inv = gram.cholesky()?.inverse();
    let mut v = &bar * inv;
    normalize_columns(&mut v)?;
    Some(v)
}

/// N x K matrix with orthonormal columns spanning an isotropic random subspace.
pub fn random_orthonormal<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> DMatrix<Complex64> {
    loop {
        let mut m = DMatrix::from_fn(n, k, |_, _| complex_normal(rng, 1.0));
        let mut ok = true;
        for c in 0..k {
            for p in 0..c {
                let proj = m.column(p).dotc(&m.column(c));
                let prev = m.column(p).into_owned();
                m.column_mut(c).axpy(-proj, &prev, Complex64::new(1.0, 0.0));
            }
            let norm = m.column(c).norm();
            if norm < 1e-12 {
                ok = false;
                break;
            }
            m.column_mut(c).unscale_mut(norm);
        }
        if ok {
            return m;
        }
    }
}
