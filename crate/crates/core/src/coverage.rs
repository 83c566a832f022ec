//! Coverage probability and area spectral efficiency from the Laplace
//! machinery and the serving-distance laws.
//!
//! Given the serving distance x, Z ~ Gamma(D, sigma_h^2) with D = N - K + 1
//! and s = T / (beta(x) sigma_h^2),
//!
//!   P(SDINR > T | x) = sum_{i<D} (-s)^i / i! d^i/ds^i L_Den(s),
//!
//! where L_Den is the product of the transforms of the estimation error,
//! both distortions, the interference and the (constant) ATN. By Leibniz'
//! rule each order i is the coefficient of z^i in the product of the five
//! scaled-derivative series, so the whole sum is a truncated polynomial
//! product of nonnegative terms.

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::geometry::{path_loss, Geometry, LinkType};
use crate::laplace::{constant_series, lemma2_transforms, InterferenceLaplace};
use crate::quadrature::{integrate_vec_to_infinity, CompensatedSum, Tolerance};

/// Product of power series truncated after `len` coefficients.
fn truncated_product(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, &x) in a.iter().enumerate().take(len) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Coverage of one (tier, link type) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCoverage {
    pub tier: usize,
    pub link: LinkType,
    /// Joint probability of being served by this pair and being covered.
    pub value: f64,
    /// Probability of being served by this pair.
    pub association_probability: f64,
    /// Contribution of each derivative order i = 0..D-1.
    pub order_terms: Vec<f64>,
    pub quadrature_error: f64,
    /// Set when the serving tier's aging coefficient is numerically zero;
    /// the value is then reported as zero.
    pub aging_domain: bool,
}

impl ConditionalCoverage {
    /// sum |term| / |sum term| over the derivative orders.
    pub fn condition_number(&self) -> f64 {
        let abs: f64 = self.order_terms.iter().map(|t| t.abs()).sum();
        if self.value == 0.0 {
            1.0
        } else {
            abs / self.value.abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageResult {
    /// [LOS, NLOS] contribution of each tier.
    pub per_tier: Vec<[f64; 2]>,
    pub raw: f64,
    pub clamped: f64,
    pub terms: Vec<ConditionalCoverage>,
}

impl CoverageResult {
    pub fn los(&self) -> f64 {
        self.per_tier.iter().map(|t| t[0]).sum()
    }

    pub fn nlos(&self) -> f64 {
        self.per_tier.iter().map(|t| t[1]).sum()
    }

    pub fn condition_number(&self) -> f64 {
        self.terms.iter().map(ConditionalCoverage::condition_number).fold(1.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AseResult {
    /// bits/s/Hz/m^2
    pub ase: f64,
    pub coverage: f64,
    /// K_w lambda_w log2(1 + T_w) per tier.
    pub weights: Vec<f64>,
}

/// Evaluates the coverage integrals of a configuration.
#[derive(Debug, Clone)]
pub struct CoverageEngine<'a> {
    cfg: &'a NetworkConfig,
    geometry: Geometry,
    tol: Tolerance,
}

impl<'a> CoverageEngine<'a> {
    pub fn new(cfg: &'a NetworkConfig) -> Self {
        Self::with_tolerance(cfg, Tolerance::default())
    }

    pub fn with_tolerance(cfg: &'a NetworkConfig, tol: Tolerance) -> Self {
        CoverageEngine {
            cfg,
            geometry: Geometry::new(cfg),
            tol,
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// beta(x) of a serving link.
    pub fn serving_beta(&self, w: usize, link: LinkType, x: f64) -> f64 {
        let t = &self.cfg.tiers[w];
        self.cfg.serving_gain(w) * t.per_user_power() * path_loss(t, link, x)
    }

    /// Per-order terms of P(SDINR > T | serving pair at distance x).
    pub fn conditional_terms(&self, w: usize, link: LinkType, x: f64) -> Result<Vec<f64>> {
        let t = &self.cfg.tiers[w];
        let order = t.diversity();
        let beta = self.serving_beta(w, link, x);
        let s = t.target_sdinr / (beta * self.cfg.estimated_channel_variance);
        let [le, lt, lr] = lemma2_transforms(t, beta)?;
        let interference = InterferenceLaplace::with_tolerance(self.cfg, &self.geometry, w, link, x, self.tol)
            .series(s, order - 1)?;
        let mut acc = constant_series(s, t.atn_variance, order - 1);
        for series in [le.series(s, order - 1), lt.series(s, order - 1), lr.series(s, order - 1), interference.coeffs] {
            acc = truncated_product(&acc, &series, order);
        }
        Ok(acc)
    }

    /// P(SDINR > T | serving pair at distance x).
    pub fn conditional_coverage(&self, w: usize, link: LinkType, x: f64) -> Result<f64> {
        let mut sum = CompensatedSum::default();
        for v in self.conditional_terms(w, link, x)? {
            sum.add(v);
        }
        Ok(sum.value())
    }

    /// Joint coverage and association integral of one (tier, link) pair.
    pub fn coverage_conditional(&self, w: usize, link: LinkType) -> Result<ConditionalCoverage> {
        let order = self.cfg.tiers[w].diversity();
        let association_probability = self.geometry.association_probability(w, link)?;
        let mut failure = None;
        let est = integrate_vec_to_infinity(
            |x, out: &mut [f64]| {
                out.iter_mut().for_each(|v| *v = 0.0);
                let density = self.geometry.serving_density(w, link, x);
                if density == 0.0 || failure.is_some() {
                    return;
                }
                match self.conditional_terms(w, link, x) {
                    Ok(terms) => {
                        for (o, t) in out.iter_mut().zip(terms) {
                            *o = density * t;
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            },
            0.0,
            self.geometry.distance_scale(w),
            order,
            self.tol,
        );
        if let Some(e) = failure {
            return match e {
                Error::AgingDomain { .. } => Ok(ConditionalCoverage {
                    tier: w,
                    link,
                    value: 0.0,
                    association_probability,
                    order_terms: vec![0.0; order],
                    quadrature_error: 0.0,
                    aging_domain: true,
                }),
                other => Err(other),
            };
        }
        let est = est?;
        let mut sum = CompensatedSum::default();
        est.value.iter().for_each(|&v| sum.add(v));
        Ok(ConditionalCoverage {
            tier: w,
            link,
            value: sum.value(),
            association_probability,
            order_terms: est.value,
            quadrature_error: est.error,
            aging_domain: false,
        })
    }

    pub fn coverage(&self) -> Result<CoverageResult> {
        let mut terms = Vec::new();
        let mut per_tier = Vec::new();
        let mut raw = CompensatedSum::default();
        for w in 0..self.cfg.tiers.len() {
            let mut pair = [0.0; 2];
            for link in LinkType::BOTH {
                let c = self.coverage_conditional(w, link)?;
                pair[link.index()] = c.value;
                raw.add(c.value);
                terms.push(c);
            }
            per_tier.push(pair);
        }
        let raw = raw.value();
        Ok(CoverageResult {
            per_tier,
            raw,
            clamped: raw.clamp(0.0, 1.0),
            terms,
        })
    }
}

/// Coverage probability of the typical user.
pub fn coverage_total(cfg: &NetworkConfig) -> Result<CoverageResult> {
    CoverageEngine::new(cfg).coverage()
}

/// ASE weights K_w lambda_w log2(1 + T_w).
pub fn ase_weights(cfg: &NetworkConfig) -> Vec<f64> {
    cfg.tiers
        .iter()
        .map(|t| t.users_per_bs as f64 * t.outdoor_density() * (1.0 + t.target_sdinr).log2())
        .collect()
}

/// ASE from an already computed coverage value.
pub fn ase_from_coverage(cfg: &NetworkConfig, coverage: f64) -> AseResult {
    let weights = ase_weights(cfg);
    AseResult {
        ase: coverage * weights.iter().sum::<f64>(),
        coverage,
        weights,
    }
}

/// Area spectral efficiency in bits/s/Hz/m^2.
pub fn ase(cfg: &NetworkConfig) -> Result<AseResult> {
    Ok(ase_from_coverage(cfg, coverage_total(cfg)?.clamped))
}
