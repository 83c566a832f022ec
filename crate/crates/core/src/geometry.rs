//! BS placement, LOS/NLOS classification, cell association and the
//! distance laws of the serving link.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::{NetworkConfig, TierParams};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_to_infinity, integrate, Tolerance};

/// Probability that a link of length `r` is unobstructed.
pub fn los_probability(r: f64, blockage_rate: f64) -> f64 {
    (-blockage_rate * r).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkType {
    Los,
    Nlos,
}

impl LinkType {
    pub const BOTH: [LinkType; 2] = [LinkType::Los, LinkType::Nlos];

    pub fn index(self) -> usize {
        match self {
            LinkType::Los => 0,
            LinkType::Nlos => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkType::Los => "LOS",
            LinkType::Nlos => "NLOS",
        }
    }

    /// Probability of this link type at distance `r`.
    pub fn probability(self, r: f64, blockage_rate: f64) -> f64 {
        match self {
            LinkType::Los => los_probability(r, blockage_rate),
            LinkType::Nlos => -(-blockage_rate * r).exp_m1(),
        }
    }
}

/// Path loss C r^-alpha of a tier for the given link type.
pub fn path_loss(tier: &TierParams, link: LinkType, r: f64) -> f64 {
    let (c, alpha) = intercept_exponent(tier, link);
    c * r.powf(-alpha)
}

fn intercept_exponent(tier: &TierParams, link: LinkType) -> (f64, f64) {
    match link {
        LinkType::Los => (tier.los_intercept, tier.los_exponent),
        LinkType::Nlos => (tier.nlos_intercept, tier.nlos_exponent),
    }
}

/// Distance to the nearest NLOS BS whose path loss equals that of a LOS BS at `x`.
pub fn psi_los(tier: &TierParams, x: f64) -> f64 {
    (tier.nlos_intercept / tier.los_intercept).powf(1.0 / tier.nlos_exponent)
        * x.powf(tier.los_exponent / tier.nlos_exponent)
}

/// Distance to the LOS BS whose path loss equals that of an NLOS BS at `x`.
pub fn psi_nlos(tier: &TierParams, x: f64) -> f64 {
    (tier.los_intercept / tier.nlos_intercept).powf(1.0 / tier.los_exponent)
        * x.powf(tier.nlos_exponent / tier.los_exponent)
}

/// The four (gain, probability) pairs of the product of two sectored
/// patterns pointing in independent uniform directions, ordered
/// main-main, main-back, back-main, back-back (receiver first).
pub fn directivity_pmf(rx: &crate::config::BeamPattern, tx: &crate::config::BeamPattern) -> [(f64, f64); 4] {
    let cr = rx.main_lobe_fraction().min(1.0);
    let ct = tx.main_lobe_fraction().min(1.0);
    [
        (rx.main_lobe_gain * tx.main_lobe_gain, cr * ct),
        (rx.main_lobe_gain * tx.back_lobe_gain, cr * (1.0 - ct)),
        (rx.back_lobe_gain * tx.main_lobe_gain, (1.0 - cr) * ct),
        (rx.back_lobe_gain * tx.back_lobe_gain, (1.0 - cr) * (1.0 - ct)),
    ]
}

/// int_0^d t e^{-beta t} dt, accurate for small beta d.
pub fn los_mass(d: f64, beta: f64) -> f64 {
    if d.is_infinite() {
        return 1.0 / (beta * beta);
    }
    let u = beta * d;
    if u < 1e-2 {
        // series of 1 - e^-u (1 + u)
        let mut term = u * u / 2.0;
        let mut sum = 0.0f64;
        let mut n = 2.0f64;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            sum += term;
            term *= -u * (n) / ((n + 1.0) * (n - 1.0)) ;
            n += 1.0;
            if n > 30.0 {
                break;
            }
        }
        return sum / (beta * beta);
    }
    (-(-u).exp_m1() - u * (-u).exp()) / (beta * beta)
}

/// int_0^d t (1 - e^{-beta t}) dt.
pub fn nlos_mass(d: f64, beta: f64) -> f64 {
    if d.is_infinite() {
        return f64::INFINITY;
    }
    0.5 * d * d - los_mass(d, beta)
}

/// One BS of a drop, positioned relative to the typical user at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsRealization {
    pub tier: usize,
    pub x: f64,
    pub y: f64,
    pub distance: f64,
    pub link: LinkType,
    pub path_loss: f64,
}

/// Serving link of the typical user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    /// Index of the serving BS in the realization list.
    pub index: usize,
    pub tier: usize,
    pub distance: f64,
    pub link: LinkType,
    /// M_r M_t of the serving link.
    pub gain: f64,
}

/// Draws the outdoor BSs of one tier in the square [-window, window]^2.
pub fn sample_tier_ppp<R: Rng + ?Sized>(tier_index: usize, tier: &TierParams, window: f64, rng: &mut R) -> Vec<BsRealization> {
    let mean = tier.outdoor_density() * 4.0 * window * window;
    let count = if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = rng.random_range(-window..window);
        let y = rng.random_range(-window..window);
        let distance = x.hypot(y);
        if distance == 0.0 {
            continue;
        }
        let link = if rng.random::<f64>() < los_probability(distance, tier.blockage_rate) {
            LinkType::Los
        } else {
            LinkType::Nlos
        };
        out.push(BsRealization {
            tier: tier_index,
            x,
            y,
            distance,
            link,
            path_loss: path_loss(tier, link, distance),
        });
    }
    out
}

/// Draws every tier of the network.
pub fn sample_network<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Vec<BsRealization> {
    let mut all = Vec::new();
    for (j, tier) in cfg.tiers.iter().enumerate() {
        all.extend(sample_tier_ppp(j, tier, cfg.sim_window, rng));
    }
    all
}

/// Association metric M_t P L of a BS. The receive gain is common to all
/// candidates and left out.
pub fn association_metric(cfg: &NetworkConfig, bs: &BsRealization) -> f64 {
    let t = &cfg.tiers[bs.tier];
    t.tx_beam.main_lobe_gain * t.per_user_power() * bs.path_loss
}

/// Picks the BS with the largest average received power. Ties go to the
/// closer BS, then to the lower tier index.
pub fn associate(bss: &[BsRealization], cfg: &NetworkConfig) -> Result<Association> {
    let mut best: Option<(usize, f64)> = None;
    for (i, bs) in bss.iter().enumerate() {
        let m = association_metric(cfg, bs);
        let better = match best {
            None => true,
            Some((b, bm)) => {
                let other = &bss[b];
                m > bm
                    || (m == bm
                        && (bs.distance < other.distance || (bs.distance == other.distance && bs.tier < other.tier)))
            }
        };
        if better {
            best = Some((i, m));
        }
    }
    let (index, _) = best.ok_or(Error::EmptyNetwork)?;
    let bs = &bss[index];
    Ok(Association {
        index,
        tier: bs.tier,
        distance: bs.distance,
        link: bs.link,
        gain: cfg.serving_gain(bs.tier),
    })
}

/// Writes a realization as CSV with columns tier,x,y,r,los,path_loss.
pub fn write_realization<W: Write>(mut out: W, bss: &[BsRealization]) -> Result<()> {
    writeln!(out, "tier,x,y,r,los,path_loss")?;
    for bs in bss {
        writeln!(
            out,
            "{},{},{},{},{},{:e}",
            bs.tier,
            bs.x,
            bs.y,
            bs.distance,
            u8::from(bs.link == LinkType::Los),
            bs.path_loss
        )?;
    }
    Ok(())
}

fn tol() -> Tolerance {
    Tolerance::default()
}

/// Length scale used to split semi-infinite distance integrals.
fn distance_scale(density: f64, beta: f64) -> f64 {
    (1.0 / beta).min(1.0 / (PI * density).sqrt())
}

/// Distance laws of a single tier in isolation.
#[derive(Debug, Clone)]
pub struct SingleTier {
    tier: TierParams,
    density: f64,
}

impl SingleTier {
    pub fn new(tier: &TierParams) -> Self {
        SingleTier {
            tier: tier.clone(),
            density: tier.outdoor_density(),
        }
    }

    fn beta(&self) -> f64 {
        self.tier.blockage_rate
    }

    /// Probability of seeing at least one LOS BS on the infinite plane.
    pub fn b_los(&self) -> f64 {
        -(-2.0 * PI * self.density * los_mass(f64::INFINITY, self.beta())).exp_m1()
    }

    /// Probability of seeing at least one NLOS BS. The NLOS mass of the
    /// infinite plane diverges, so this is one.
    pub fn b_nlos(&self) -> f64 {
        1.0
    }

    /// B_L restricted to a disc of the given radius, by quadrature.
    pub fn b_los_within(&self, radius: f64) -> Result<f64> {
        let beta = self.beta();
        let m = integrate(|r| r * los_probability(r, beta), 0.0, radius, tol())?.value;
        Ok(-(-2.0 * PI * self.density * m).exp_m1())
    }

    /// B_N restricted to a disc of the given radius, by quadrature.
    pub fn b_nlos_within(&self, radius: f64) -> Result<f64> {
        let beta = self.beta();
        let m = integrate(|r| r * LinkType::Nlos.probability(r, beta), 0.0, radius, tol())?.value;
        Ok(-(-2.0 * PI * self.density * m).exp_m1())
    }

    /// Density of the nearest-LOS distance given at least one LOS BS.
    pub fn f_los(&self, x: f64) -> f64 {
        let l = self.density;
        let beta = self.beta();
        2.0 * PI * l * x * los_probability(x, beta) * (-2.0 * PI * l * los_mass(x, beta)).exp() / self.b_los()
    }

    /// Density of the nearest-NLOS distance given at least one NLOS BS.
    pub fn f_nlos(&self, x: f64) -> f64 {
        let l = self.density;
        let beta = self.beta();
        2.0 * PI * l * x * LinkType::Nlos.probability(x, beta) * (-2.0 * PI * l * nlos_mass(x, beta)).exp()
            / self.b_nlos()
    }

    fn los_serving_unnormalized(&self, x: f64) -> f64 {
        let void = (-2.0 * PI * self.density * nlos_mass(psi_los(&self.tier, x), self.beta())).exp();
        self.b_los() * self.f_los(x) * void
    }

    fn nlos_serving_unnormalized(&self, x: f64) -> f64 {
        let void = (-2.0 * PI * self.density * los_mass(psi_nlos(&self.tier, x), self.beta())).exp();
        self.b_nlos() * self.f_nlos(x) * void
    }

    /// Probability that the serving BS is LOS.
    pub fn a_los(&self) -> Result<f64> {
        let scale = distance_scale(self.density, self.beta());
        Ok(integrate_to_infinity(|x| self.los_serving_unnormalized(x), 0.0, scale, tol())?.value)
    }

    /// Probability that the serving BS is NLOS, 1 - A_L.
    pub fn a_nlos(&self) -> Result<f64> {
        Ok(1.0 - self.a_los()?)
    }

    /// Serving-distance density conditioned on a LOS serving link.
    pub fn serving_pdf_los(&self) -> Result<impl Fn(f64) -> f64 + '_> {
        let a = self.a_los()?;
        Ok(move |x| self.los_serving_unnormalized(x) / a)
    }

    /// Serving-distance density conditioned on an NLOS serving link.
    pub fn serving_pdf_nlos(&self) -> Result<impl Fn(f64) -> f64 + '_> {
        let a = self.a_nlos()?;
        Ok(move |x| self.nlos_serving_unnormalized(x) / a)
    }
}

/// Per-tier quantities used by the multi-tier association analysis.
#[derive(Debug, Clone)]
struct TierGeom {
    density: f64,
    beta: f64,
    /// ln(M_t P) of the tier.
    log_weight: f64,
    intercept: [f64; 2],
    exponent: [f64; 2],
}

/// Association analysis for max-received-power association across tiers.
#[derive(Debug, Clone)]
pub struct Geometry {
    tiers: Vec<TierGeom>,
}

impl Geometry {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let tiers = cfg
            .tiers
            .iter()
            .map(|t| TierGeom {
                density: t.outdoor_density(),
                beta: t.blockage_rate,
                log_weight: (t.tx_beam.main_lobe_gain * t.per_user_power()).ln(),
                intercept: [t.los_intercept, t.nlos_intercept],
                exponent: [t.los_exponent, t.nlos_exponent],
            })
            .collect();
        Geometry { tiers }
    }

    pub fn tier_count(&self) -> usize {
        self.tiers.len()
    }

    /// Radius inside which a `link_j` BS of tier `j` would beat a `link_w`
    /// BS of tier `w` at distance `x`.
    pub fn exclusion_radius(&self, w: usize, link_w: LinkType, x: f64, j: usize, link_j: LinkType) -> f64 {
        let s = &self.tiers[w];
        let i = &self.tiers[j];
        let zw = link_w.index();
        let zj = link_j.index();
        let log_metric = s.log_weight + s.intercept[zw].ln() - s.exponent[zw] * x.ln();
        ((i.log_weight + i.intercept[zj].ln() - log_metric) / i.exponent[zj]).exp()
    }

    /// Both exclusion radii [d_L, d_N] of tier `j`.
    pub fn exclusion_radii(&self, w: usize, link_w: LinkType, x: f64, j: usize) -> [f64; 2] {
        [
            self.exclusion_radius(w, link_w, x, j, LinkType::Los),
            self.exclusion_radius(w, link_w, x, j, LinkType::Nlos),
        ]
    }

    /// Density of the serving distance jointly with the event that the
    /// serving BS is of tier `w` and link type `link`.
    pub fn serving_density(&self, w: usize, link: LinkType, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let t = &self.tiers[w];
        let mut void = 0.0;
        for (j, tj) in self.tiers.iter().enumerate() {
            let [dl, dn] = self.exclusion_radii(w, link, x, j);
            void += 2.0 * PI * tj.density * (los_mass(dl, tj.beta) + nlos_mass(dn, tj.beta));
        }
        2.0 * PI * t.density * x * link.probability(x, t.beta) * (-void).exp()
    }

    /// Splitting scale for integrals of [`Geometry::serving_density`].
    pub fn distance_scale(&self, w: usize) -> f64 {
        let total: f64 = self.tiers.iter().map(|t| t.density).sum();
        distance_scale(total, self.tiers[w].beta)
    }

    /// Probability that the serving BS is of tier `w` with link type `link`.
    pub fn association_probability(&self, w: usize, link: LinkType) -> Result<f64> {
        Ok(integrate_to_infinity(|x| self.serving_density(w, link, x), 0.0, self.distance_scale(w), tol())?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Aging, BeamPattern, FadingScale};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn bs(tier: &TierParams, idx: usize, r: f64, link: LinkType) -> BsRealization {
        BsRealization {
            tier: idx,
            x: r,
            y: 0.0,
            distance: r,
            link,
            path_loss: path_loss(tier, link, r),
        }
    }

    #[test]
    fn los_probability_values() {
        let beta = 1.0 / 141.4;
        assert_eq!(los_probability(0.0, beta), 1.0);
        assert!((los_probability(141.4, beta) - 0.36788).abs() < 1e-5);
        assert!((los_probability(282.8, beta) - 0.13534).abs() < 1e-5);
    }

    #[test]
    fn mass_closed_forms_match_quadrature() {
        let beta = 1.0 / 141.4;
        for &d in &[1e-3, 0.5, 1.0, 10.0, 141.4, 1000.0, 5000.0] {
            let q = integrate(|t| t * (-beta * t).exp(), 0.0, d, Tolerance::new(1e-15, 1e-13)).unwrap().value;
            assert!((los_mass(d, beta) - q).abs() <= 1e-11 * q.max(1e-300), "d={d}");
            let qn = integrate(|t| t * -(-beta * t).exp_m1(), 0.0, d, Tolerance::new(1e-15, 1e-13)).unwrap().value;
            assert!((nlos_mass(d, beta) - qn).abs() <= 1e-9 * qn.max(1e-300), "d={d}");
        }
    }

    #[test]
    fn pmf_is_a_distribution() {
        let rx = BeamPattern::from_db_deg(10.0, -10.0, 90.0).unwrap();
        let tx = BeamPattern::from_db_deg(20.0, 0.0, 30.0).unwrap();
        let pmf = directivity_pmf(&rx, &tx);
        let total: f64 = pmf.iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((pmf[0].1 - 0.25 / 12.0).abs() < 1e-15);
        let omni = directivity_pmf(&BeamPattern::omni(), &tx);
        assert_eq!(omni[0], (100.0, 1.0 / 12.0));
        assert!((omni[1].1 - 11.0 / 12.0).abs() < 1e-15);
        assert_eq!(omni[2].1, 0.0);
        assert_eq!(omni[3].1, 0.0);
    }

    #[test]
    fn ppp_count_and_los_fraction() {
        let t = tier();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 1000;
        let mut total = 0usize;
        // LOS counts in 50 m bins
        let mut bins = vec![(0usize, 0usize); 20];
        for _ in 0..draws {
            let bss = sample_tier_ppp(0, &t, 2500.0, &mut rng);
            total += bss.len();
            for b in &bss {
                assert_eq!(b.path_loss, path_loss(&t, b.link, b.distance));
                let k = (b.distance / 50.0) as usize;
                if k < bins.len() {
                    bins[k].1 += 1;
                    if b.link == LinkType::Los {
                        bins[k].0 += 1;
                    }
                }
            }
        }
        let mean = total as f64 / draws as f64;
        let sigma = (125.0f64 / draws as f64).sqrt();
        assert!((mean - 125.0).abs() < 3.0 * sigma, "mean {mean}");
        for (k, &(los, n)) in bins.iter().enumerate() {
            if n < 30 {
                continue;
            }
            // average of e^{-beta r} over the annulus, area-weighted
            let (a, b) = (50.0 * k as f64, 50.0 * (k + 1) as f64);
            let p = integrate(|r| r * los_probability(r, t.blockage_rate), a, b, tol()).unwrap().value
                / (0.5 * (b * b - a * a));
            let frac = los as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((frac - p).abs() < 4.0 * se, "bin {k}: {frac} vs {p}");
        }
        let mut zero = tier();
        zero.bs_density = 1e-300;
        assert!(sample_tier_ppp(0, &zero, 2500.0, &mut rng).is_empty());
    }

    #[test]
    fn association_rules() {
        let t = tier();
        let cfg = network(vec![t.clone()]);
        assert_eq!(associate(&[], &cfg), Err(Error::EmptyNetwork));
        let one = [bs(&t, 0, 300.0, LinkType::Nlos)];
        assert_eq!(associate(&one, &cfg).unwrap().index, 0);
        let two = [bs(&t, 0, 200.0, LinkType::Los), bs(&t, 0, 100.0, LinkType::Los)];
        let a = associate(&two, &cfg).unwrap();
        assert_eq!(a.distance, 100.0);
        assert_eq!(a.gain, 100.0);
        // exact tie between a LOS BS at x and an NLOS BS at Psi_L(x)
        let mut tie = t.clone();
        tie.los_intercept = 1.0;
        tie.nlos_intercept = 1.0;
        tie.los_exponent = 2.5;
        tie.nlos_exponent = 5.0;
        let cfg = network(vec![tie.clone()]);
        let x = 16.0;
        let d = psi_los(&tie, x);
        assert_eq!(d, 4.0);
        let pair = [bs(&tie, 0, d, LinkType::Nlos), bs(&tie, 0, x, LinkType::Los)];
        assert_eq!(pair[0].path_loss, pair[1].path_loss);
        assert_eq!(associate(&pair, &cfg).unwrap().link, LinkType::Nlos);
        let x = 0.25;
        let d = psi_los(&tie, x);
        let pair = [bs(&tie, 0, d, LinkType::Nlos), bs(&tie, 0, x, LinkType::Los)];
        assert_eq!(pair[0].path_loss, pair[1].path_loss);
        assert_eq!(associate(&pair, &cfg).unwrap().link, LinkType::Los);
        // equal metric and distance across tiers goes to the lower index
        let cfg2 = network(vec![t.clone(), t.clone()]);
        let cross = [bs(&t, 1, 100.0, LinkType::Los), bs(&t, 0, 100.0, LinkType::Los)];
        assert_eq!(associate(&cross, &cfg2).unwrap().tier, 0);
    }

    #[test]
    fn closed_form_b_los() {
        let s = SingleTier::new(&tier());
        let expected = 1.0 - (-2.0 * PI * 5e-6 * 141.4f64.powi(2)).exp();
        assert!((s.b_los() - expected).abs() < 1e-14);
        assert!((s.b_los() - 0.4664).abs() < 1e-4);
        let within = s.b_los_within(40.0 * 141.4).unwrap();
        assert!((within - s.b_los()).abs() < 1e-9);
        for &r in &[100.0, 500.0, 2500.0] {
            assert!(s.b_nlos_within(r).unwrap() >= s.b_los_within(r).unwrap() - 0.2);
        }
        assert!(s.b_nlos_within(2500.0).unwrap() > s.b_los());
        let mut sparse = tier();
        sparse.bs_density = 1e-300;
        assert!(SingleTier::new(&sparse).b_los() < 1e-290);
    }

    #[test]
    fn nearest_pdfs_integrate_to_one() {
        let s = SingleTier::new(&tier());
        let tol = Tolerance::new(1e-12, 1e-10);
        let fl = integrate_to_infinity(|x| s.f_los(x), 0.0, 141.4, tol).unwrap().value;
        let fnl = integrate_to_infinity(|x| s.f_nlos(x), 0.0, 141.4, tol).unwrap().value;
        assert!((fl - 1.0).abs() < 1e-6, "{fl}");
        assert!((fnl - 1.0).abs() < 1e-6, "{fnl}");
        assert_eq!(s.f_los(0.0), 0.0);
        let hl = s.serving_pdf_los().unwrap();
        let hn = s.serving_pdf_nlos().unwrap();
        let il = integrate_to_infinity(&hl, 0.0, 141.4, tol).unwrap().value;
        let inl = integrate_to_infinity(&hn, 0.0, 141.4, tol).unwrap().value;
        assert!((il - 1.0).abs() < 1e-6, "{il}");
        assert!((inl - 1.0).abs() < 1e-6, "{inl}");
        for i in 0..200 {
            let x = 10.0 * i as f64;
            assert!(s.f_los(x) >= 0.0 && s.f_nlos(x) >= 0.0 && hl(x) >= 0.0 && hn(x) >= 0.0);
        }
    }

    #[test]
    fn f_los_mode_matches_log_derivative_root() {
        let s = SingleTier::new(&tier());
        let mut best = (0.0, 0.0);
        for i in 1..200_000 {
            let x = i as f64 * 0.01;
            let v = s.f_los(x);
            if v > best.1 {
                best = (x, v);
            }
        }
        // d/dx log f_L = 1/x - beta - 2 pi lambda x e^{-beta x}
        let beta = 1.0 / 141.4;
        let g = |x: f64| 1.0 / x - beta - 2.0 * PI * 5e-6 * x * (-beta * x).exp();
        let (mut lo, mut hi) = (1.0, 1000.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((best.0 - lo).abs() < 0.02, "{} vs {}", best.0, lo);
    }

    #[test]
    fn association_probability_limits() {
        let mut t = tier();
        let s = SingleTier::new(&t);
        let al = s.a_los().unwrap();
        assert!(al > 0.0 && al < s.b_los());
        assert_eq!(al + s.a_nlos().unwrap(), 1.0);
        t.nlos_intercept = 1e-30;
        let lossy = SingleTier::new(&t);
        assert!((lossy.a_los().unwrap() - lossy.b_los()).abs() < 1e-4);
    }

    #[test]
    fn a_los_non_increasing_in_blockage() {
        let mut last = f64::INFINITY;
        for &r in &[400.0, 250.0, 141.4, 80.0, 40.0] {
            let mut t = tier();
            t.blockage_rate = 1.0 / r;
            let a = SingleTier::new(&t).a_los().unwrap();
            assert!(a <= last);
            last = a;
        }
    }

    #[test]
    fn multi_tier_density_reduces_to_single_tier() {
        let t = tier();
        let s = SingleTier::new(&t);
        let g = Geometry::new(&network(vec![t.clone()]));
        let al = s.a_los().unwrap();
        let an = s.a_nlos().unwrap();
        let hl = s.serving_pdf_los().unwrap();
        let hn = s.serving_pdf_nlos().unwrap();
        for i in 1..100 {
            let x = 7.3 * i as f64;
            let a = g.serving_density(0, LinkType::Los, x);
            let b = hl(x) * al;
            assert!((a - b).abs() <= 1e-10 * b.max(1e-300), "x={x}");
            let a = g.serving_density(0, LinkType::Nlos, x);
            let b = hn(x) * an;
            assert!((a - b).abs() <= 1e-10 * b.max(1e-300), "x={x}");
            assert!((g.exclusion_radius(0, LinkType::Los, x, 0, LinkType::Nlos) - psi_los(&t, x)).abs() < 1e-9 * x);
            assert!((g.exclusion_radius(0, LinkType::Nlos, x, 0, LinkType::Los) - psi_nlos(&t, x)).abs() < 1e-9 * x);
        }
        let total = g.association_probability(0, LinkType::Los).unwrap() + g.association_probability(0, LinkType::Nlos).unwrap();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn association_probabilities_sum_to_one_across_tiers() {
        let mut small = tier();
        small.bs_density = 2e-5;
        small.tx_power = 0.1;
        let g = Geometry::new(&network(vec![tier(), small]));
        let mut total = 0.0;
        for w in 0..2 {
            for link in LinkType::BOTH {
                total += g.association_probability(w, link).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn a_los_matches_simulation() {
        let t = tier();
        let cfg = network(vec![t.clone()]);
        let a = SingleTier::new(&t).a_los().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let drops = 10_000;
        let mut los = 0;
        for _ in 0..drops {
            let bss = sample_network(&cfg, &mut rng);
            if let Ok(assoc) = associate(&bss, &cfg) {
                if assoc.link == LinkType::Los {
                    los += 1;
                }
            }
        }
        let p = los as f64 / drops as f64;
        let se = (a * (1.0 - a) / drops as f64).sqrt();
        assert!((p - a).abs() < 3.0 * se, "{p} vs {a}");
    }

    #[test]
    fn realization_csv() {
        let t = tier();
        let mut buf = Vec::new();
        write_realization(&mut buf, &[bs(&t, 0, 10.0, LinkType::Los)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("tier,x,y,r,los,path_loss\n0,10,0,10,1,"));
    }

    proptest! {
        #[test]
        fn psi_maps_are_inverse(x in 0.1f64..5000.0, al in 2.1f64..4.0, an in 2.1f64..6.0, cl in 1e-9f64..1e-5, cn in 1e-9f64..1e-5) {
            let mut t = tier();
            t.los_exponent = al;
            t.nlos_exponent = an;
            t.los_intercept = cl;
            t.nlos_intercept = cn;
            let back = psi_nlos(&t, psi_los(&t, x));
            prop_assert!((back - x).abs() <= 1e-9 * x);
        }

        #[test]
        fn association_invariant_to_common_power_scaling(seed in 0u64..1000, scale in 1e-3f64..1e3) {
            let mut small = tier();
            small.bs_density = 3e-5;
            small.tx_power = 0.05;
            let cfg = network(vec![tier(), small]);
            let mut scaled = cfg.clone();
            for t in &mut scaled.tiers {
                t.tx_power *= scale;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut bss = sample_network(&cfg, &mut rng);
            bss.truncate(40);
            if !bss.is_empty() {
                prop_assert_eq!(associate(&bss, &cfg).unwrap().index, associate(&bss, &scaled).unwrap().index);
            }
        }

        #[test]
        fn los_probability_non_increasing(r in 0.0f64..1e4, dr in 0.0f64..1e3, beta in 1e-4f64..1.0) {
            prop_assert!(los_probability(r + dr, beta) <= los_probability(r, beta));
        }
    }
}
