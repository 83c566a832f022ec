//! Laplace transforms of the SDINR denominator terms and their derivatives.
//!
//! Coverage needs, for each term X, the scaled derivatives
//! q_u(s) = (-s)^u L_X^(u)(s) / u!, which are all nonnegative. Everything
//! here is expressed through those coefficients; raw derivatives are
//! available for checking.

use std::f64::consts::PI;

use crate::channel::{AgedCsit, DistortionParams};
use crate::config::{NetworkConfig, TierParams};
use crate::error::Result;
use crate::geometry::{directivity_pmf, los_probability, Geometry, LinkType};
use crate::quadrature::{integrate_vec_to_infinity, Tolerance};

/// Rising factorial k (k + 1) ... (k + u - 1).
pub fn rising_factorial(k: f64, u: usize) -> f64 {
    (0..u).map(|i| k + i as f64).product()
}

/// Laplace transform (1 + c s)^-k of a Gamma(k, c) variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaLaplace {
    pub shape: f64,
    pub scale: f64,
}

impl GammaLaplace {
    pub fn new(shape: f64, scale: f64) -> Self {
        GammaLaplace { shape, scale }
    }

    pub fn value(&self, s: f64) -> f64 {
        (-self.shape * (self.scale * s).ln_1p()).exp()
    }

    /// d^u/ds^u (1 + c s)^-k.
    pub fn deriv(&self, s: f64, u: usize) -> f64 {
        let c = self.scale;
        (-c).powi(u as i32) * rising_factorial(self.shape, u) * (-(self.shape + u as f64) * (c * s).ln_1p()).exp()
    }

    /// Scaled derivatives (-s)^u L^(u)(s) / u! for u = 0..=order.
    pub fn series(&self, s: f64, order: usize) -> Vec<f64> {
        let cs = self.scale * s;
        let r = cs / (1.0 + cs);
        let mut out = Vec::with_capacity(order + 1);
        let mut q = self.value(s);
        for u in 0..=order {
            out.push(q);
            q *= (self.shape + u as f64) / (u as f64 + 1.0) * r;
        }
        out
    }
}

/// Scaled derivatives of e^{-s v}, the transform of the constant v.
pub fn constant_series(s: f64, v: f64, order: usize) -> Vec<f64> {
    let sv = s * v;
    let mut out = Vec::with_capacity(order + 1);
    let mut q = (-sv).exp();
    for u in 0..=order {
        out.push(q);
        q *= sv / (u as f64 + 1.0);
    }
    out
}

/// Transforms of the estimation error and the two distortion terms of a
/// serving link with power factor `beta`: [E, I_eta_t, I_eta_r].
pub fn lemma2_transforms(tier: &TierParams, beta: f64) -> Result<[GammaLaplace; 3]> {
    let csit = AgedCsit::of(tier);
    let inv_delta_sq = csit.inverse_delta_sq()?;
    let d = DistortionParams::of(tier);
    let n = tier.antennas as f64;
    Ok([
        GammaLaplace::new(
            tier.users_per_bs as f64,
            beta * inv_delta_sq * (1.0 + d.kappa_t * d.kappa_t) * csit.error_variance(),
        ),
        GammaLaplace::new(n, beta * d.kappa_t * d.kappa_t),
        GammaLaplace::new(n, beta * d.kappa_r * d.kappa_r),
    ])
}

#[derive(Debug, Clone)]
struct InterferingTier {
    density: f64,
    beta: f64,
    users: f64,
    /// (a P theta, b) per directivity class
    classes: Vec<(f64, f64)>,
    intercept: [f64; 2],
    exponent: [f64; 2],
    exclusion: [f64; 2],
}

/// Interference seen by a user served by tier `w` over a `link` at distance `x`.
#[derive(Debug, Clone)]
pub struct InterferenceLaplace {
    tiers: Vec<InterferingTier>,
    tol: Tolerance,
}

/// Exponent and scaled derivative coefficients of L_I at one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceSeries {
    pub s: f64,
    /// log L_I(s).
    pub log_value: f64,
    /// gamma_m = (-s)^m G^(m)(s) / m! for m = 0..=order (gamma_0 unused, set to 0).
    pub exponent_coeffs: Vec<f64>,
    /// (-s)^u L_I^(u)(s) / u! for u = 0..=order.
    pub coeffs: Vec<f64>,
}

impl InterferenceSeries {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }

    /// Raw derivative L_I^(u)(s); requires s > 0 for u > 0.
    pub fn deriv(&self, u: usize) -> f64 {
        if u == 0 {
            return self.value();
        }
        let fact: f64 = (1..=u).map(|i| i as f64).product();
        self.coeffs[u] * fact / (-self.s).powi(u as i32)
    }

    /// Raw exponent derivative G^(m)(s), m >= 1.
    pub fn exponent_deriv(&self, m: usize) -> f64 {
        let fact: f64 = (1..=m).map(|i| i as f64).product();
        self.exponent_coeffs[m] * fact / (-self.s).powi(m as i32)
    }
}

impl InterferenceLaplace {
    pub fn new(cfg: &NetworkConfig, geometry: &Geometry, w: usize, link: LinkType, x: f64) -> Self {
        Self::with_tolerance(cfg, geometry, w, link, x, Tolerance::default())
    }

    pub fn with_tolerance(cfg: &NetworkConfig, geometry: &Geometry, w: usize, link: LinkType, x: f64, tol: Tolerance) -> Self {
        let tiers = cfg
            .tiers
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let theta = cfg.fading_scale.theta(t.users_per_bs);
                let power = t.per_user_power();
                let classes = directivity_pmf(&cfg.rx_beam, &t.tx_beam)
                    .iter()
                    .filter(|(_, b)| *b > 0.0)
                    .map(|&(a, b)| (a * power * theta, b))
                    .collect();
                InterferingTier {
                    density: t.outdoor_density(),
                    beta: t.blockage_rate,
                    users: t.users_per_bs as f64,
                    classes,
                    intercept: [t.los_intercept, t.nlos_intercept],
                    exponent: [t.los_exponent, t.nlos_exponent],
                    exclusion: geometry.exclusion_radii(w, link, x, j),
                }
            })
            .collect();
        InterferenceLaplace { tiers, tol }
    }

    /// Exclusion radii [d_L, d_N] of interfering tier `j`.
    pub fn exclusion_radii(&self, j: usize) -> [f64; 2] {
        self.tiers[j].exclusion
    }

    /// log L_I(s).
    pub fn log_laplace(&self, s: f64) -> Result<f64> {
        Ok(self.series(s, 0)?.log_value)
    }

    pub fn laplace(&self, s: f64) -> Result<f64> {
        Ok(self.log_laplace(s)?.exp())
    }

    /// Exponent and derivative coefficients up to `order` at `s`.
    pub fn series(&self, s: f64, order: usize) -> Result<InterferenceSeries> {
        let dim = order + 1;
        let mut log_value = 0.0;
        let mut gamma = vec![0.0; dim];
        if s > 0.0 {
            for tier in &self.tiers {
                if tier.density == 0.0 {
                    continue;
                }
                for link in LinkType::BOTH {
                    let part = self.link_integrals(tier, link, s, dim)?;
                    let pref = 2.0 * PI * tier.density;
                    log_value -= pref * part[0];
                    for m in 1..dim {
                        gamma[m] += pref * part[m];
                    }
                }
            }
        }
        // L = e^G  =>  l_n = (1/n) sum_{m=1}^{n} m gamma_m l_{n-m}
        let mut ell = vec![0.0; dim];
        ell[0] = 1.0;
        for n in 1..dim {
            let mut acc = 0.0;
            for m in 1..=n {
                acc += m as f64 * gamma[m] * ell[n - m];
            }
            ell[n] = acc / n as f64;
        }
        let value = log_value.exp();
        Ok(InterferenceSeries {
            s,
            log_value,
            exponent_coeffs: gamma,
            coeffs: ell.iter().map(|l| l * value).collect(),
        })
    }

    /// [int (1 - (1+sy)^-K) w t dt, then (K)_m/m! int (sy/(1+sy))^m (1+sy)^-K w t dt]
    /// over t beyond the exclusion radius of the given link type.
    fn link_integrals(&self, tier: &InterferingTier, link: LinkType, s: f64, dim: usize) -> Result<Vec<f64>> {
        let z = link.index();
        let c = tier.intercept[z];
        let alpha = tier.exponent[z];
        let d = tier.exclusion[z];
        if !d.is_finite() {
            return Ok(vec![0.0; dim]);
        }
        let k = tier.users;
        let coef: Vec<f64> = (0..dim).map(|m| rising_factorial(k, m) / (1..=m).map(|i| i as f64).product::<f64>()).collect();
        let peak = tier.classes.iter().map(|c| c.0).fold(0.0, f64::max);
        // distance at which s y = 1 for the strongest class
        let knee = (s * peak * c).powf(1.0 / alpha);
        let scale = knee.max(1.0 / tier.beta).max(1e-3 * d.max(1.0));
        let beta = tier.beta;
        let est = integrate_vec_to_infinity(
            |t, out: &mut [f64]| {
                out.iter_mut().for_each(|v| *v = 0.0);
                let weight = t * match link {
                    LinkType::Los => los_probability(t, beta),
                    LinkType::Nlos => -(-beta * t).exp_m1(),
                };
                if weight == 0.0 {
                    return;
                }
                let decay = c * t.powf(-alpha);
                for &(gain, b) in &tier.classes {
                    let sy = s * gain * decay;
                    let log1p = sy.ln_1p();
                    out[0] += b * -(-k * log1p).exp_m1();
                    if dim > 1 {
                        let base = (-k * log1p).exp();
                        let r = sy / (1.0 + sy);
                        let mut rm = 1.0;
                        for m in 1..dim {
                            rm *= r;
                            out[m] += b * coef[m] * rm * base;
                        }
                    }
                }
                out.iter_mut().for_each(|v| *v *= weight);
            },
            d,
            scale,
            dim,
            self.tol,
        )?;
        Ok(est.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Aging, BeamPattern, FadingScale};
    use crate::geometry::{associate, sample_network, BsRealization};
    use crate::sdinr::SdinrSampler;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn tier() -> TierParams {
        TierParams {
            bs_density: 5e-6,
            blockage_fraction: 0.0,
            blockage_rate: 1.0 / 141.4,
            antennas: 5,
            users_per_bs: 2,
            tx_power: 3.16,
            target_sdinr: 1.0,
            los_exponent: 3.0,
            nlos_exponent: 4.0,
            los_intercept: 2.28e-7,
            nlos_intercept: 2.28e-7,
            tx_beam: BeamPattern::from_db_deg(20.0, 0.0, 30.0).unwrap(),
            csit_quality: 0.0,
            aging: Aging::Coefficient(1.0),
            tx_impairment: 0.0,
            rx_impairment: 0.0,
            atn_variance: 4e-13,
        }
    }

    fn network(tiers: Vec<TierParams>) -> NetworkConfig {
        NetworkConfig {
            tiers,
            rx_beam: BeamPattern::omni(),
            thermal_noise: 4e-13,
            carrier_freq: 50e9,
            sim_window: 2500.0,
            estimated_channel_variance: 1.0,
            fading_scale: FadingScale::UnitScale,
            rng_seed: 0,
        }
    }

    fn five_point(f: &dyn Fn(f64) -> f64, s: f64, h: f64) -> f64 {
        (-f(s + 2.0 * h) + 8.0 * f(s + h) - 8.0 * f(s - h) + f(s - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn gamma_laplace_basics() {
        let g = GammaLaplace::new(2.0, 0.5);
        assert_eq!(g.deriv(0.0, 0), 1.0);
        assert_eq!(g.deriv(0.0, 1), -1.0);
        // third derivative against finite differences of the second
        let fd = five_point(&|s| g.deriv(s, 2), 1.0, 1e-3);
        assert!((fd / g.deriv(1.0, 3) - 1.0).abs() < 1e-6);
        let series = g.series(1.3, 5);
        for (u, q) in series.iter().enumerate() {
            let fact: f64 = (1..=u).map(|i| i as f64).product();
            let raw = (-1.3f64).powi(u as i32) * g.deriv(1.3, u) / fact;
            assert!((q - raw).abs() <= 1e-14 * raw.abs().max(1e-300));
        }
    }

    #[test]
    fn ideal_transforms_are_one() {
        let t = tier();
        for g in lemma2_transforms(&t, 1e-9).unwrap() {
            assert_eq!(g.value(123.0), 1.0);
            assert_eq!(g.series(123.0, 3), vec![1.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn estimation_error_transform_matches_simulation() {
        let mut t = tier();
        t.aging = Aging::Coefficient(0.8);
        t.csit_quality = 0.2;
        t.tx_impairment = 0.2;
        t.rx_impairment = 0.1;
        let beta = 2.0;
        let [le, lt, lr] = lemma2_transforms(&t, beta).unwrap();
        let var = t.error_variance();
        let ge = Gamma::new(2.0, var).unwrap();
        let gh = Gamma::new(5.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 1_000_000;
        for &s in &[0.05, 0.2, 0.5, 1.0, 3.0] {
            let mut acc = [0.0; 3];
            let mut acc2 = [0.0; 3];
            for _ in 0..n {
                let e = beta / 0.64 * 1.04 * ge.sample(&mut rng);
                let h = gh.sample(&mut rng);
                let v = [(-s * e).exp(), (-s * beta * 0.04 * h).exp(), (-s * beta * 0.01 * h).exp()];
                for i in 0..3 {
                    acc[i] += v[i];
                    acc2[i] += v[i] * v[i];
                }
            }
            for (i, l) in [le, lt, lr].iter().enumerate() {
                let m = acc[i] / n as f64;
                let se = ((acc2[i] / n as f64 - m * m) / n as f64).sqrt();
                assert!((m - l.value(s)).abs() < 3.0 * se + 1e-12, "s={s} i={i}: {m} vs {}", l.value(s));
            }
        }
    }

    #[test]
    fn interference_trivial_cases() {
        let t = tier();
        let cfg = network(vec![t.clone()]);
        let g = Geometry::new(&cfg);
        let il = InterferenceLaplace::new(&cfg, &g, 0, LinkType::Los, 100.0);
        assert_eq!(il.laplace(0.0).unwrap(), 1.0);
        let mut sparse = t.clone();
        sparse.bs_density = 1e-300;
        let cfg0 = network(vec![sparse]);
        let g0 = Geometry::new(&cfg0);
        let il0 = InterferenceLaplace::new(&cfg0, &g0, 0, LinkType::Los, 100.0);
        assert!((il0.laplace(1e12).unwrap() - 1.0).abs() < 1e-250);
        let v = il.laplace(1e12).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }

    #[test]
    fn log_laplace_survives_huge_arguments() {
        let mut t = tier();
        t.bs_density = 1e-3;
        let cfg = network(vec![t]);
        let g = Geometry::new(&cfg);
        let il = InterferenceLaplace::new(&cfg, &g, 0, LinkType::Los, 20.0);
        for &s in &[1e10, 1e14, 1e18, 1e22] {
            let ser = il.series(s, 4).unwrap();
            assert!(ser.log_value.is_finite() && ser.log_value <= 0.0);
            assert!(ser.coeffs.iter().all(|c| c.is_finite() && *c >= 0.0));
        }
        let ser = il.series(1e22, 2).unwrap();
        assert!(ser.log_value < -700.0, "{}", ser.log_value);
        assert_eq!(ser.value(), 0.0);
    }

    /// Matches E[e^{-sI}] from sampled networks with the same exclusion.
    #[test]
    fn interference_transform_matches_simulation() {
        let t = tier();
        let cfg = network(vec![t.clone()]);
        let geo = Geometry::new(&cfg);
        let x = 100.0f64;
        let beta = cfg.serving_gain(0) * t.per_user_power() * t.los_intercept * x.powf(-3.0);
        let s = 1.0 / (beta / 1.0);
        let il = InterferenceLaplace::new(&cfg, &geo, 0, LinkType::Los, x);
        let expected = il.laplace(s).unwrap();

        let sampler = SdinrSampler::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let drops = 10_000;
        let (mut acc, mut acc2) = (0.0, 0.0);
        let radii = il.exclusion_radii(0);
        for _ in 0..drops {
            // serving LOS BS at x, interferers outside their exclusion radii
            let mut bss = vec![BsRealization { tier: 0, x, y: 0.0, distance: x, link: LinkType::Los, path_loss: crate::geometry::path_loss(&t, LinkType::Los, x) }];
            bss.extend(sample_network(&cfg, &mut rng).into_iter().filter(|b| b.distance > radii[b.link.index()]));
            let i = sampler.sample_interference(&cfg, &bss, 0, &mut rng);
            let v = (-s * i).exp();
            acc += v;
            acc2 += v * v;
        }
        let m = acc / drops as f64;
        let se = ((acc2 / drops as f64 - m * m) / drops as f64).sqrt();
        assert!((m - expected).abs() < 3.0 * se, "{m} vs {expected} (se {se})");
    }

    fn random_config(rng: &mut ChaCha8Rng) -> (NetworkConfig, LinkType, f64) {
        let mut t = tier();
        t.bs_density = 10f64.powf(rng.random_range(-6.0..-4.0));
        t.blockage_rate = 1.0 / rng.random_range(50.0..300.0);
        t.users_per_bs = rng.random_range(1..4);
        t.los_exponent = rng.random_range(2.1..3.0);
        t.nlos_exponent = rng.random_range(3.0..4.5);
        let mut cfg = network(vec![t.clone()]);
        if rng.random::<bool>() {
            let mut t2 = t.clone();
            t2.bs_density *= 3.0;
            t2.tx_power *= 0.1;
            cfg.tiers.push(t2);
        }
        if rng.random::<bool>() {
            cfg.fading_scale = FadingScale::UnitMean;
            cfg.rx_beam = BeamPattern::from_db_deg(10.0, -5.0, 60.0).unwrap();
        }
        let link = if rng.random::<bool>() { LinkType::Los } else { LinkType::Nlos };
        (cfg, link, rng.random_range(20.0..200.0))
    }

    #[test]
    fn interference_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let tight = Tolerance::new(1e-14, 1e-12);
        for _ in 0..10 {
            let (cfg, link, x) = random_config(&mut rng);
            let geo = Geometry::new(&cfg);
            let il = InterferenceLaplace::with_tolerance(&cfg, &geo, 0, link, x, tight);
            let t = &cfg.tiers[0];
            let (c, a) = match link {
                LinkType::Los => (t.los_intercept, t.los_exponent),
                LinkType::Nlos => (t.nlos_intercept, t.nlos_exponent),
            };
            let s = 1.0 / (cfg.serving_gain(0) * t.per_user_power() * c * x.powf(-a));
            let ser = il.series(s, 3).unwrap();
            let h = 1e-2 * s;
            let l = |v: f64| il.laplace(v).unwrap();
            let d1 = five_point(&l, s, h);
            assert!((d1 / ser.deriv(1) - 1.0).abs() < 1e-4, "{d1} vs {}", ser.deriv(1));
            let d2 = five_point(&|v| il.series(v, 1).unwrap().deriv(1), s, h);
            assert!((d2 / ser.deriv(2) - 1.0).abs() < 1e-4);
            let d3 = five_point(&|v| il.series(v, 2).unwrap().deriv(2), s, h);
            assert!((d3 / ser.deriv(3) - 1.0).abs() < 1e-3);
            // exponent derivatives against differences of the exponent
            let g = |v: f64| il.log_laplace(v).unwrap();
            let g1 = five_point(&g, s, h);
            assert!((g1 / ser.exponent_deriv(1) - 1.0).abs() < 1e-5);
            let g2 = five_point(&|v| il.series(v, 1).unwrap().exponent_deriv(1), s, h);
            assert!((g2 / ser.exponent_deriv(2) - 1.0).abs() < 1e-5);
            let g3 = five_point(&|v| il.series(v, 2).unwrap().exponent_deriv(2), s, h);
            assert!((g3 / ser.exponent_deriv(3) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn raw_recursion_matches_normalized() {
        let cfg = network(vec![tier()]);
        let geo = Geometry::new(&cfg);
        let il = InterferenceLaplace::new(&cfg, &geo, 0, LinkType::Nlos, 150.0);
        let ser = il.series(2e7, 4).unwrap();
        // L^(n) = sum_m C(n-1, m) G^(m+1) L^(n-1-m)
        let mut raw = vec![ser.value()];
        for n in 1..=4usize {
            let mut acc = 0.0;
            let mut binom = 1.0;
            for m in 0..n {
                acc += binom * ser.exponent_deriv(m + 1) * raw[n - 1 - m];
                binom *= (n - 1 - m) as f64 / (m + 1) as f64;
            }
            raw.push(acc);
        }
        for n in 0..=4 {
            assert!((raw[n] / ser.deriv(n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_pattern_of_derivatives() {
        let cfg = network(vec![tier()]);
        let geo = Geometry::new(&cfg);
        let il = InterferenceLaplace::new(&cfg, &geo, 0, LinkType::Los, 60.0);
        for &s in &[1e4, 1e6, 1e8, 1e10] {
            let ser = il.series(s, 4).unwrap();
            for u in 0..=4 {
                assert!((-1f64).powi(u as i32) * ser.deriv(u) >= 0.0);
            }
        }
        let g = GammaLaplace::new(3.0, 0.7);
        for &s in &[0.0, 0.1, 1.0, 10.0] {
            for u in 0..=4 {
                assert!((-1f64).powi(u as i32) * g.deriv(s, u) >= 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn gamma_derivatives_match_finite_differences(k in 0.5f64..8.0, c in 0.05f64..3.0, s in 0.1f64..3.0) {
            let g = GammaLaplace::new(k, c);
            let h = 1e-3 * (1.0 + c * s) / c;
            for u in 1..=4 {
                let fd = five_point(&|v| g.deriv(v, u - 1), s, h);
                let exact = g.deriv(s, u);
                let tol = if u == 4 { 1e-4 } else { 1e-6 };
                prop_assert!((fd / exact - 1.0).abs() < tol, "u={} fd={} exact={}", u, fd, exact);
            }
        }

        #[test]
        fn constant_series_sums_to_one(s in 0.0f64..5.0, v in 0.0f64..5.0) {
            let q = constant_series(s, v, 200);
            prop_assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn association_sampled_interferers_respect_exclusion() {
        // every interferer of an associated drop lies outside the exclusion radii
        let cfg = network(vec![tier()]);
        let geo = Geometry::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let bss = sample_network(&cfg, &mut rng);
            let Ok(a) = associate(&bss, &cfg) else { continue };
            let radii = geo.exclusion_radii(a.tier, a.link, a.distance, 0);
            for (i, b) in bss.iter().enumerate() {
                if i != a.index {
                    assert!(b.distance >= radii[b.link.index()] * (1.0 - 1e-12));
                }
            }
        }
    }
}
