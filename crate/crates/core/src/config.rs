//! Scenario configuration: validated tier and network parameters plus the
//! JSON document format they are read from and written to.
//!
//! All quantities are linear and SI internally. The document format accepts
//! decibel values only in fields suffixed `_db` / `_dbw` and degrees only in
//! fields suffixed `_deg`; each quantity may be given in exactly one form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::bessel_j0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// EVM-style impairment level of a `bits`-bit converter: 2^-b / sqrt(1 - 2^-2b).
pub fn kappa_from_bits(bits: u32) -> f64 {
    let q = 0.5f64.powi(bits as i32);
    q / (1.0 - q * q).sqrt()
}

/// Amplified thermal noise variance F * sigma^2 / (1 - 2^-2b).
pub fn atn_from_amplifier(noise_figure_db: f64, bits: u32, thermal_noise: f64) -> f64 {
    let q2 = 0.25f64.powi(bits as i32);
    db_to_linear(noise_figure_db) * thermal_noise / (1.0 - q2)
}

/// One-lag Jakes autocorrelation J0(2 pi f_D T_s).
pub fn jakes_delta(doppler_hz: f64, symbol_period_s: f64) -> f64 {
    bessel_j0(2.0 * PI * doppler_hz * symbol_period_s)
}

/// Sectored antenna pattern: constant main lobe over the beamwidth, constant
/// back lobe elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamPattern {
    pub main_lobe_gain: f64,
    pub back_lobe_gain: f64,
    /// Main-lobe beamwidth in radians.
    pub beamwidth: f64,
}

impl BeamPattern {
    pub fn new(main_lobe_gain: f64, back_lobe_gain: f64, beamwidth: f64) -> Result<Self> {
        let beam = BeamPattern {
            main_lobe_gain,
            back_lobe_gain,
            beamwidth,
        };
        beam.validate("beam")?;
        Ok(beam)
    }

    /// Pattern from gains in dB and a beamwidth in degrees.
    pub fn from_db_deg(main_db: f64, back_db: f64, beamwidth_deg: f64) -> Result<Self> {
        Self::new(db_to_linear(main_db), db_to_linear(back_db), beamwidth_deg.to_radians())
    }

    /// Single isotropic antenna.
    pub fn omni() -> Self {
        BeamPattern {
            main_lobe_gain: 1.0,
            back_lobe_gain: 1.0,
            beamwidth: 2.0 * PI,
        }
    }

    /// Probability that a uniformly random direction falls in the main lobe.
    pub fn main_lobe_fraction(&self) -> f64 {
        self.beamwidth / (2.0 * PI)
    }

    fn validate(&self, field: &str) -> Result<()> {
        let ok = |v: f64| v.is_finite();
        if !(ok(self.back_lobe_gain) && self.back_lobe_gain > 0.0) {
            return Err(Error::invalid(format!("{field}.back_lobe_gain"), "must be > 0"));
        }
        if !(ok(self.main_lobe_gain) && self.main_lobe_gain >= self.back_lobe_gain) {
            return Err(Error::invalid(
                format!("{field}.main_lobe_gain"),
                "must be >= back_lobe_gain",
            ));
        }
        if !(ok(self.beamwidth) && self.beamwidth > 0.0 && self.beamwidth <= 2.0 * PI * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!("{field}.beamwidth"), "must lie in (0, 2*pi]"));
        }
        Ok(())
    }
}

/// How the aging coefficient of a tier is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aging {
    /// The coefficient itself.
    Coefficient(f64),
    /// Maximum Doppler shift and channel sampling period.
    Doppler { doppler_hz: f64, symbol_period_s: f64 },
    /// The product f_D * T_s.
    NormalizedDoppler(f64),
}

impl Aging {
    /// Signed aging coefficient. Only its square enters the analysis.
    pub fn delta(&self) -> f64 {
        match *self {
            Aging::Coefficient(d) => d,
            Aging::Doppler {
                doppler_hz,
                symbol_period_s,
            } => jakes_delta(doppler_hz, symbol_period_s),
            Aging::NormalizedDoppler(x) => bessel_j0(2.0 * PI * x),
        }
    }
}

/// Convention for the interfering-link fading power g ~ Gamma(K_j, theta).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FadingScale {
    /// theta = 1: each of the K_j streams contributes unit mean power.
    #[default]
    UnitScale,
    /// theta = 1/K_j: total interfering power has unit mean.
    UnitMean,
}

impl FadingScale {
    pub fn theta(&self, users: usize) -> f64 {
        match self {
            FadingScale::UnitScale => 1.0,
            FadingScale::UnitMean => 1.0 / users as f64,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FadingScale::UnitScale => "unit-scale",
            FadingScale::UnitMean => "unit-mean",
        }
    }
}

impl std::str::FromStr for FadingScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit-scale" => Ok(FadingScale::UnitScale),
            "unit-mean" => Ok(FadingScale::UnitMean),
            other => Err(Error::invalid("fading_scale", format!("unknown convention `{other}`"))),
        }
    }
}

/// Parameters shared by every cell of one tier.
#[derive(Debug, Clone, PartialEq)]
pub struct TierParams {
    /// BS density before the indoor/outdoor thinning, per m^2.
    pub bs_density: f64,
    /// Fraction of the area covered by blockages (indoor BSs are discarded).
    pub blockage_fraction: f64,
    /// Exponential LOS decay rate beta (1/m).
    pub blockage_rate: f64,
    pub antennas: usize,
    pub users_per_bs: usize,
    /// Total transmit power of one BS in Watts.
    pub tx_power: f64,
    pub target_sdinr: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    pub los_intercept: f64,
    pub nlos_intercept: f64,
    pub tx_beam: BeamPattern,
    /// 0 is perfect CSIT, 1 is an uncorrelated estimate.
    pub csit_quality: f64,
    pub aging: Aging,
    pub tx_impairment: f64,
    pub rx_impairment: f64,
    /// Amplified thermal noise variance in Watts.
    pub atn_variance: f64,
}

impl TierParams {
    /// Density of outdoor BSs, (1 - gamma) * lambda_B.
    pub fn outdoor_density(&self) -> f64 {
        (1.0 - self.blockage_fraction) * self.bs_density
    }

    /// Power per data stream, rho / N.
    pub fn per_user_power(&self) -> f64 {
        self.tx_power / self.antennas as f64
    }

    pub fn delta(&self) -> f64 {
        self.aging.delta()
    }

    /// ZF diversity order N - K + 1.
    pub fn diversity(&self) -> usize {
        self.antennas - self.users_per_bs + 1
    }

    /// Combined aging and feedback error variance 1 - delta^2 (1 - tau^2).
    pub fn error_variance(&self) -> f64 {
        crate::channel::combined_error_variance(self.delta(), self.csit_quality)
    }

    pub fn los_probability(&self, r: f64) -> f64 {
        crate::geometry::los_probability(r, self.blockage_rate)
    }

    fn validate(&self, idx: usize, thermal_noise: f64) -> Result<()> {
        let f = |name: &str| format!("tiers[{idx}].{name}");
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_pos(self.bs_density) {
            return Err(Error::invalid(f("bs_density"), "must be > 0"));
        }
        if !(self.blockage_fraction >= 0.0 && self.blockage_fraction < 1.0) {
            return Err(Error::invalid(f("blockage_fraction"), "must lie in [0, 1)"));
        }
        if !finite_pos(self.blockage_rate) {
            return Err(Error::invalid(f("blockage_rate"), "must be > 0"));
        }
        if self.users_per_bs == 0 {
            return Err(Error::invalid(f("users_per_bs"), "must be >= 1"));
        }
        if self.users_per_bs > self.antennas {
            return Err(Error::invalid(f("users_per_bs"), "must not exceed antennas (ZF needs N >= K)"));
        }
        if !finite_pos(self.tx_power) {
            return Err(Error::invalid(f("tx_power"), "must be > 0"));
        }
        if !finite_pos(self.target_sdinr) {
            return Err(Error::invalid(f("target_sdinr"), "must be > 0"));
        }
        if !(self.los_exponent.is_finite() && self.los_exponent > 2.0) {
            return Err(Error::invalid(f("los_exponent"), "must be > 2"));
        }
        if !(self.nlos_exponent.is_finite() && self.nlos_exponent > 2.0) {
            return Err(Error::invalid(f("nlos_exponent"), "must be > 2"));
        }
        if !finite_pos(self.los_intercept) {
            return Err(Error::invalid(f("los_intercept"), "must be > 0"));
        }
        if !finite_pos(self.nlos_intercept) {
            return Err(Error::invalid(f("nlos_intercept"), "must be > 0"));
        }
        self.tx_beam.validate(&f("tx_beam"))?;
        if !(0.0..=1.0).contains(&self.csit_quality) {
            return Err(Error::invalid(f("csit_quality"), "must lie in [0, 1]"));
        }
        match self.aging {
            Aging::Coefficient(d) if !(-1.0..=1.0).contains(&d) => {
                return Err(Error::invalid(f("aging.delta"), "must lie in [-1, 1]"));
            }
            Aging::Doppler {
                doppler_hz,
                symbol_period_s,
            } => {
                if !(doppler_hz >= 0.0 && doppler_hz.is_finite()) {
                    return Err(Error::invalid(f("aging.doppler_hz"), "must be >= 0"));
                }
                if !finite_pos(symbol_period_s) {
                    return Err(Error::invalid(f("aging.symbol_period_s"), "must be > 0"));
                }
            }
            Aging::NormalizedDoppler(x) if !(x >= 0.0 && x.is_finite()) => {
                return Err(Error::invalid(f("aging.normalized_doppler"), "must be >= 0"));
            }
            _ => {}
        }
        if !(self.tx_impairment >= 0.0 && self.tx_impairment.is_finite()) {
            return Err(Error::invalid(f("tx_impairment"), "must be >= 0"));
        }
        if !(self.rx_impairment >= 0.0 && self.rx_impairment.is_finite()) {
            return Err(Error::invalid(f("rx_impairment"), "must be >= 0"));
        }
        if !(self.atn_variance.is_finite() && self.atn_variance >= thermal_noise * (1.0 - 1e-12)) {
            return Err(Error::invalid(f("atn_variance"), "must be >= thermal_noise"));
        }
        Ok(())
    }
}

/// A complete multi-tier scenario. Immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub tiers: Vec<TierParams>,
    /// Receive pattern of the typical user.
    pub rx_beam: BeamPattern,
    /// Thermal noise variance sigma^2 in Watts.
    pub thermal_noise: f64,
    pub carrier_freq: f64,
    /// Half-width of the square simulation window in meters.
    pub sim_window: f64,
    /// Per-entry variance of the channel estimate.
    pub estimated_channel_variance: f64,
    pub fading_scale: FadingScale,
    pub rng_seed: u64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::invalid("tiers", "at least one tier is required"));
        }
        if !(self.thermal_noise.is_finite() && self.thermal_noise > 0.0) {
            return Err(Error::invalid("thermal_noise", "must be > 0"));
        }
        if !(self.carrier_freq.is_finite() && self.carrier_freq > 0.0) {
            return Err(Error::invalid("carrier_freq", "must be > 0"));
        }
        if !(self.sim_window.is_finite() && self.sim_window > 0.0) {
            return Err(Error::invalid("sim_window", "must be > 0"));
        }
        if !(self.estimated_channel_variance.is_finite() && self.estimated_channel_variance > 0.0) {
            return Err(Error::invalid("estimated_channel_variance", "must be > 0"));
        }
        self.rx_beam.validate("rx_beam")?;
        for (i, t) in self.tiers.iter().enumerate() {
            t.validate(i, self.thermal_noise)?;
        }
        Ok(())
    }

    /// Directional gain of a serving link in tier `w`: M_r * M_t.
    pub fn serving_gain(&self, w: usize) -> f64 {
        self.rx_beam.main_lobe_gain * self.tiers[w].tx_beam.main_lobe_gain
    }

    /// Sum over tiers of K_w * lambda_w * log2(1 + T_w).
    pub fn ase_weight(&self) -> f64 {
        self.tiers
            .iter()
            .map(|t| t.users_per_bs as f64 * t.outdoor_density() * (1.0 + t.target_sdinr).log2())
            .sum()
    }

    /// Parses and validates a JSON scenario document.
    pub fn from_json(text: &str) -> Result<Self> {
        load_config(text)
    }

    /// Canonical JSON document (linear units, radians).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkDoc::from(self)).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical document.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(serde_json::to_string(&NetworkDoc::from(self)).expect("serializes").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn load_config(text: &str) -> Result<NetworkConfig> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    doc.into_config()
}

pub fn load_config_value(value: serde_json::Value) -> Result<NetworkConfig> {
    let doc: NetworkDoc = serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    doc.into_config()
}

// ---------------------------------------------------------------------------
// document format

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BeamDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    main_lobe_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    main_lobe_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    back_lobe_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    back_lobe_gain_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beamwidth_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beamwidth_deg: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct AgingDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    doppler_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symbol_period_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    normalized_doppler: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct TierDoc {
    bs_density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blockage_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    blockage_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    los_range_m: Option<f64>,
    antennas: Option<usize>,
    users_per_bs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tx_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tx_power_dbw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_sdinr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_sdinr_db: Option<f64>,
    los_exponent: Option<f64>,
    nlos_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    los_intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    los_intercept_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nlos_intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nlos_intercept_db: Option<f64>,
    tx_beam: Option<BeamDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    csit_quality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    aging: Option<AgingDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tx_impairment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rx_impairment: Option<f64>,
    /// Sets both impairment levels at once.
    #[serde(skip_serializing_if = "Option::is_none")]
    impairment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    atn_variance_w: Option<f64>,
    /// ATN variance as a multiple of the thermal noise.
    #[serde(skip_serializing_if = "Option::is_none")]
    atn_noise_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct NetworkDoc {
    tiers: Vec<TierDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rx_beam: Option<BeamDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thermal_noise_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thermal_noise_dbw: Option<f64>,
    carrier_freq_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim_window_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimated_channel_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fading_scale: Option<FadingScale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rng_seed: Option<u64>,
}

/// Resolves a quantity that may be given either linearly or in dB.
fn one_of(field: &str, linear: Option<f64>, db_field: &str, db: Option<f64>) -> Result<Option<f64>> {
    match (linear, db) {
        (Some(_), Some(_)) => Err(Error::invalid(field, format!("give either `{field}` or `{db_field}`, not both"))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(d)) => Ok(Some(db_to_linear(d))),
        (None, None) => Ok(None),
    }
}

fn required<T>(field: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| Error::invalid(field, "missing required field"))
}

impl BeamDoc {
    fn into_beam(self, field: &str) -> Result<BeamPattern> {
        let main = one_of(
            &format!("{field}.main_lobe_gain"),
            self.main_lobe_gain,
            "main_lobe_gain_db",
            self.main_lobe_gain_db,
        )?;
        let back = one_of(
            &format!("{field}.back_lobe_gain"),
            self.back_lobe_gain,
            "back_lobe_gain_db",
            self.back_lobe_gain_db,
        )?;
        let width = match (self.beamwidth_rad, self.beamwidth_deg) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    format!("{field}.beamwidth_rad"),
                    "give either `beamwidth_rad` or `beamwidth_deg`, not both",
                ))
            }
            (Some(r), None) => Some(r),
            (None, Some(d)) => Some(d.to_radians()),
            (None, None) => None,
        };
        let beam = BeamPattern {
            main_lobe_gain: required(&format!("{field}.main_lobe_gain"), main)?,
            back_lobe_gain: required(&format!("{field}.back_lobe_gain"), back)?,
            beamwidth: required(&format!("{field}.beamwidth_rad"), width)?,
        };
        beam.validate(field)?;
        Ok(beam)
    }
}

impl From<&BeamPattern> for BeamDoc {
    fn from(b: &BeamPattern) -> Self {
        BeamDoc {
            main_lobe_gain: Some(b.main_lobe_gain),
            back_lobe_gain: Some(b.back_lobe_gain),
            beamwidth_rad: Some(b.beamwidth),
            ..Default::default()
        }
    }
}

impl AgingDoc {
    fn into_aging(self, field: &str) -> Result<Aging> {
        match (self.delta, self.doppler_hz, self.symbol_period_s, self.normalized_doppler) {
            (Some(d), None, None, None) => Ok(Aging::Coefficient(d)),
            (None, Some(f), Some(t), None) => Ok(Aging::Doppler {
                doppler_hz: f,
                symbol_period_s: t,
            }),
            (None, None, None, Some(x)) => Ok(Aging::NormalizedDoppler(x)),
            _ => Err(Error::invalid(
                field,
                "give exactly one of `delta`, `doppler_hz` + `symbol_period_s`, or `normalized_doppler`",
            )),
        }
    }
}

impl From<&Aging> for AgingDoc {
    fn from(a: &Aging) -> Self {
        match *a {
            Aging::Coefficient(d) => AgingDoc {
                delta: Some(d),
                ..Default::default()
            },
            Aging::Doppler {
                doppler_hz,
                symbol_period_s,
            } => AgingDoc {
                doppler_hz: Some(doppler_hz),
                symbol_period_s: Some(symbol_period_s),
                ..Default::default()
            },
            Aging::NormalizedDoppler(x) => AgingDoc {
                normalized_doppler: Some(x),
                ..Default::default()
            },
        }
    }
}

impl TierDoc {
    fn into_tier(self, idx: usize, thermal_noise: f64) -> Result<TierParams> {
        let f = |name: &str| format!("tiers[{idx}].{name}");
        let blockage_rate = match (self.blockage_rate, self.los_range_m) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(f("blockage_rate"), "give either `blockage_rate` or `los_range_m`"))
            }
            (Some(b), None) => b,
            (None, Some(r)) => 1.0 / r,
            (None, None) => return Err(Error::invalid(f("blockage_rate"), "missing required field")),
        };
        let tx_power = required(&f("tx_power_w"), one_of(&f("tx_power_w"), self.tx_power_w, "tx_power_dbw", self.tx_power_dbw)?)?;
        let target = required(
            &f("target_sdinr"),
            one_of(&f("target_sdinr"), self.target_sdinr, "target_sdinr_db", self.target_sdinr_db)?,
        )?;
        let los_intercept = required(
            &f("los_intercept"),
            one_of(&f("los_intercept"), self.los_intercept, "los_intercept_db", self.los_intercept_db)?,
        )?;
        let nlos_intercept = required(
            &f("nlos_intercept"),
            one_of(&f("nlos_intercept"), self.nlos_intercept, "nlos_intercept_db", self.nlos_intercept_db)?,
        )?;
        let (tx_impairment, rx_impairment) = match (self.impairment, self.tx_impairment, self.rx_impairment) {
            (Some(k), None, None) => (k, k),
            (None, t, r) => (t.unwrap_or(0.0), r.unwrap_or(0.0)),
            _ => {
                return Err(Error::invalid(
                    f("impairment"),
                    "`impairment` cannot be combined with `tx_impairment`/`rx_impairment`",
                ))
            }
        };
        let atn_variance = match (self.atn_variance_w, self.atn_noise_ratio) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(f("atn_variance_w"), "give either `atn_variance_w` or `atn_noise_ratio`"))
            }
            (Some(v), None) => v,
            (None, Some(r)) => r * thermal_noise,
            (None, None) => thermal_noise,
        };
        let tier = TierParams {
            bs_density: required(&f("bs_density"), self.bs_density)?,
            blockage_fraction: self.blockage_fraction.unwrap_or(0.0),
            blockage_rate,
            antennas: required(&f("antennas"), self.antennas)?,
            users_per_bs: required(&f("users_per_bs"), self.users_per_bs)?,
            tx_power,
            target_sdinr: target,
            los_exponent: required(&f("los_exponent"), self.los_exponent)?,
            nlos_exponent: required(&f("nlos_exponent"), self.nlos_exponent)?,
            los_intercept,
            nlos_intercept,
            tx_beam: required(&f("tx_beam"), self.tx_beam)?.into_beam(&f("tx_beam"))?,
            csit_quality: self.csit_quality.unwrap_or(0.0),
            aging: match self.aging {
                Some(a) => a.into_aging(&f("aging"))?,
                None => Aging::Coefficient(1.0),
            },
            tx_impairment,
            rx_impairment,
            atn_variance,
        };
        tier.validate(idx, thermal_noise)?;
        Ok(tier)
    }
}

impl From<&TierParams> for TierDoc {
    fn from(t: &TierParams) -> Self {
        TierDoc {
            bs_density: Some(t.bs_density),
            blockage_fraction: Some(t.blockage_fraction),
            blockage_rate: Some(t.blockage_rate),
            antennas: Some(t.antennas),
            users_per_bs: Some(t.users_per_bs),
            tx_power_w: Some(t.tx_power),
            target_sdinr: Some(t.target_sdinr),
            los_exponent: Some(t.los_exponent),
            nlos_exponent: Some(t.nlos_exponent),
            los_intercept: Some(t.los_intercept),
            nlos_intercept: Some(t.nlos_intercept),
            tx_beam: Some(BeamDoc::from(&t.tx_beam)),
            csit_quality: Some(t.csit_quality),
            aging: Some(AgingDoc::from(&t.aging)),
            tx_impairment: Some(t.tx_impairment),
            rx_impairment: Some(t.rx_impairment),
            atn_variance_w: Some(t.atn_variance),
            ..Default::default()
        }
    }
}

impl NetworkDoc {
    fn into_config(self) -> Result<NetworkConfig> {
        let thermal_noise = required(
            "thermal_noise_w",
            one_of("thermal_noise_w", self.thermal_noise_w, "thermal_noise_dbw", self.thermal_noise_dbw)?,
        )?;
        if !(thermal_noise.is_finite() && thermal_noise > 0.0) {
            return Err(Error::invalid("thermal_noise", "must be > 0"));
        }
        let tiers = self
            .tiers
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.into_tier(i, thermal_noise))
            .collect::<Result<Vec<_>>>()?;
        let cfg = NetworkConfig {
            tiers,
            rx_beam: match self.rx_beam {
                Some(b) => b.into_beam("rx_beam")?,
                None => BeamPattern::omni(),
            },
            thermal_noise,
            carrier_freq: required("carrier_freq_hz", self.carrier_freq_hz)?,
            sim_window: self.sim_window_m.unwrap_or(2500.0),
            estimated_channel_variance: self.estimated_channel_variance.unwrap_or(1.0),
            fading_scale: self.fading_scale.unwrap_or_default(),
            rng_seed: self.rng_seed.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<&NetworkConfig> for NetworkDoc {
    fn from(c: &NetworkConfig) -> Self {
        NetworkDoc {
            tiers: c.tiers.iter().map(TierDoc::from).collect(),
            rx_beam: Some(BeamDoc::from(&c.rx_beam)),
            thermal_noise_w: Some(c.thermal_noise),
            thermal_noise_dbw: None,
            carrier_freq_hz: Some(c.carrier_freq),
            sim_window_m: Some(c.sim_window),
            estimated_channel_variance: Some(c.estimated_channel_variance),
            fading_scale: Some(c.fading_scale),
            rng_seed: Some(c.rng_seed),
        }
    }
}

/// Canonical JSON value of a config, used by the sweep machinery.
pub(crate) fn to_value(cfg: &NetworkConfig) -> serde_json::Value {
    serde_json::to_value(NetworkDoc::from(cfg)).expect("config serializes")
}
