//! Parameter sweeps, figure presets and the versioned curve CSV format.
//!
//! A sweep applies dotted-key overrides to the canonical JSON form of a
//! configuration, e.g. `tiers.*.aging.delta=0.9` or `rx_beam.main_lobe_gain_db=3`.
//! `*` addresses every tier. Setting a field removes any alternative spelling
//! of the same quantity (`target_sdinr` vs `target_sdinr_db`, ...).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::config::{db_to_linear, load_config_value, to_value, Aging, BeamPattern, FadingScale, NetworkConfig, TierParams};
use crate::coverage::{ase_from_coverage, coverage_total};
use crate::error::{Error, Result};
use crate::montecarlo::{ase_from_coverage_estimate, coverage_from_drops, simulate_drops, targets, DropOutcome, McEstimate};
use crate::sdinr::Fidelity;

pub const SCHEMA: &str = "hetnet-curve-v1";

pub const CSV_HEADER: [&str; 12] = [
    "series",
    "param",
    "value",
    "analytic_raw",
    "analytic_clamped",
    "mc_estimate",
    "mc_stderr",
    "mc_empty_drops",
    "bound_ok",
    "error",
    "config_hash",
    "runtime_ms",
];

/// Default macro-tier BS density (per m^2) used by the presets.
pub const DEFAULT_DENSITY: f64 = 5e-6;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const PRESETS: [&str; 8] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"];

pub const DEFAULT_DROPS: usize = 10_000;

/// Free-space intercept (c / (4 pi f))^2.
pub fn free_space_intercept(carrier_freq: f64) -> f64 {
    (SPEED_OF_LIGHT / (4.0 * PI * carrier_freq)).powi(2)
}

/// Thermal noise k T0 B at T0 = 290 K.
pub fn thermal_noise(bandwidth_hz: f64) -> f64 {
    1.380_649e-23 * 290.0 * bandwidth_hz
}

/// Macro tier at 50 GHz with ideal hardware: N = 5, K = 2, 5 dBW, LOS range
/// 141.4 m, exponents 3 / 4, 20 dB / 0 dB / 30 degree transmit beam.
pub fn reference_tier() -> TierParams {
    let c = free_space_intercept(50e9);
    TierParams {
        bs_density: DEFAULT_DENSITY,
        blockage_fraction: 0.0,
        blockage_rate: 1.0 / 141.4,
        antennas: 5,
        users_per_bs: 2,
        tx_power: db_to_linear(5.0),
        target_sdinr: 1.0,
        los_exponent: 3.0,
        nlos_exponent: 4.0,
        los_intercept: c,
        nlos_intercept: c,
        tx_beam: BeamPattern::from_db_deg(20.0, 0.0, 30.0).expect("valid beam"),
        csit_quality: 0.0,
        aging: Aging::Coefficient(1.0),
        tx_impairment: 0.0,
        rx_impairment: 0.0,
        atn_variance: thermal_noise(100e6),
    }
}

/// Reference network with `tiers` tiers; tier j has density DEFAULT_DENSITY / 2^j
/// and is otherwise identical to the reference tier.
pub fn reference_network(tiers: usize) -> NetworkConfig {
    let tiers = (0..tiers.max(1))
        .map(|j| TierParams {
            bs_density: DEFAULT_DENSITY * 0.5f64.powi(j as i32),
            ..reference_tier()
        })
        .collect();
    NetworkConfig {
        tiers,
        rx_beam: BeamPattern::omni(),
        thermal_noise: thermal_noise(100e6),
        carrier_freq: 50e9,
        sim_window: 2500.0,
        estimated_channel_variance: 1.0,
        fading_scale: FadingScale::default(),
        rng_seed: 1,
    }
}

/// Target SDINR grid in dB: -10..30 in 2 dB steps.
pub fn target_grid_db() -> Vec<f64> {
    (0..=20).map(|k| -10.0 + 2.0 * k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    Mc,
    Both,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Mc => "mc",
            Engine::Both => "both",
        }
    }

    pub fn analytic(&self) -> bool {
        matches!(self, Engine::Analytic | Engine::Both)
    }

    pub fn mc(&self) -> bool {
        matches!(self, Engine::Mc | Engine::Both)
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "mc" => Ok(Engine::Mc),
            "both" => Ok(Engine::Both),
            _ => Err(Error::invalid("engine", "expected analytic, mc or both")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Coverage,
    Ase,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Coverage => "coverage",
            Metric::Ase => "ase",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(Metric::Coverage),
            "ase" => Ok(Metric::Ase),
            _ => Err(Error::invalid("metric", "expected coverage or ase")),
        }
    }
}

/// A dotted-key override such as `tiers.*.antennas = 8`.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: Value,
}

impl Override {
    pub fn new(key: impl Into<String>, value: impl Into<Value>) -> Self {
        Override {
            key: key.into(),
            value: value.into(),
        }
    }

    /// Parses `key=value`; the value is read as JSON and falls back to a string.
    pub fn parse(text: &str) -> Result<Self> {
        let (key, raw) = text
            .split_once('=')
            .ok_or_else(|| Error::InvalidOverride(format!("{text}: expected key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        if key.is_empty() || raw.is_empty() {
            return Err(Error::InvalidOverride(format!("{text}: expected key=value")));
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        Ok(Override::new(key, value))
    }
}

/// One curve of a sweep: a label and the overrides that distinguish it.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub overrides: Vec<Override>,
}

impl Series {
    pub fn base() -> Self {
        Series {
            label: "base".into(),
            overrides: Vec::new(),
        }
    }

    /// Series setting a single key, labelled `name=value`.
    pub fn single(name: &str, key: &str, value: f64) -> Self {
        Series {
            label: format!("{name}={value}"),
            overrides: vec![Override::new(key, value)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Preset name or `custom`.
    pub name: String,
    /// Dotted key of the swept parameter.
    pub key: String,
    pub values: Vec<f64>,
    pub engine: Engine,
    pub metric: Metric,
    pub series: Vec<Series>,
    pub drops: usize,
    pub fidelity: Fidelity,
}

impl SweepSpec {
    /// Coverage versus target SDINR in dB over the default grid.
    pub fn target_sweep(name: &str, metric: Metric) -> Self {
        SweepSpec {
            name: name.into(),
            key: "tiers.*.target_sdinr_db".into(),
            values: target_grid_db(),
            engine: Engine::Analytic,
            metric,
            series: vec![Series::base()],
            drops: DEFAULT_DROPS,
            fidelity: Fidelity::Distributional,
        }
    }

    /// Parses `key=v1,v2,...` into the swept key and grid.
    pub fn parse_axis(text: &str) -> Result<(String, Vec<f64>)> {
        let (key, raw) = text
            .split_once('=')
            .ok_or_else(|| Error::InvalidOverride(format!("{text}: expected key=v1,v2,...")))?;
        let values = raw
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::InvalidOverride(format!("{text}: `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((key.trim().to_string(), values))
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep", "value grid is empty"));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("sweep", format!("non-finite grid value {v}")));
        }
        if self.series.is_empty() {
            return Err(Error::invalid("sweep", "at least one series is required"));
        }
        if self.engine.mc() && self.drops == 0 {
            return Err(Error::invalid("drops", "must be >= 1"));
        }
        Ok(())
    }
}

/// One row of a curve file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub series: String,
    pub value: f64,
    pub analytic_raw: Option<f64>,
    pub analytic_clamped: Option<f64>,
    pub mc: Option<McEstimate>,
    pub error: Option<String>,
    /// True if any engine failed on a validation error rather than numerically.
    pub validation_error: bool,
    pub config_hash: Option<String>,
    pub runtime_ms: f64,
}

impl CurvePoint {
    /// analytic clamped >= mc - 3 stderr; `None` unless both engines produced a value.
    pub fn bound_ok(&self) -> Option<bool> {
        match (self.analytic_clamped, &self.mc) {
            (Some(a), Some(m)) => Some(a >= m.estimate - 3.0 * m.stderr),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub base_hash: String,
    pub base: NetworkConfig,
    pub points: Vec<CurvePoint>,
}

impl SweepResult {
    /// Rows of one series, in grid order.
    pub fn series(&self, label: &str) -> Vec<&CurvePoint> {
        self.points.iter().filter(|p| p.series == label).collect()
    }

    pub fn all_bounds_ok(&self) -> bool {
        self.points.iter().all(|p| p.bound_ok() != Some(false))
    }

    /// Exit-style status: 0 clean, 2 if a row failed validation, 3 on numerical failure.
    pub fn status(&self) -> i32 {
        if self.points.iter().any(|p| p.error.is_some() && !p.validation_error) {
            3
        } else if self.points.iter().any(|p| p.validation_error) {
            2
        } else {
            0
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "thermal_noise_w",
    "thermal_noise_dbw",
    "carrier_freq_hz",
    "sim_window_m",
    "estimated_channel_variance",
    "fading_scale",
    "rng_seed",
];

const TIER_KEYS: &[&str] = &[
    "bs_density",
    "blockage_fraction",
    "blockage_rate",
    "los_range_m",
    "antennas",
    "users_per_bs",
    "tx_power_w",
    "tx_power_dbw",
    "target_sdinr",
    "target_sdinr_db",
    "los_exponent",
    "nlos_exponent",
    "los_intercept",
    "los_intercept_db",
    "nlos_intercept",
    "nlos_intercept_db",
    "csit_quality",
    "tx_impairment",
    "rx_impairment",
    "impairment",
    "atn_variance_w",
    "atn_noise_ratio",
];

const BEAM_KEYS: &[&str] = &[
    "main_lobe_gain",
    "main_lobe_gain_db",
    "back_lobe_gain",
    "back_lobe_gain_db",
    "beamwidth_rad",
    "beamwidth_deg",
];

const AGING_KEYS: &[&str] = &["delta", "doppler_hz", "symbol_period_s", "normalized_doppler"];

const INTEGER_KEYS: &[&str] = &["antennas", "users_per_bs", "rng_seed"];

/// Fields that a newly set field replaces within the same object.
fn conflicts(key: &str) -> &'static [&'static str] {
    match key {
        "thermal_noise_w" => &["thermal_noise_dbw"],
        "thermal_noise_dbw" => &["thermal_noise_w"],
        "blockage_rate" => &["los_range_m"],
        "los_range_m" => &["blockage_rate"],
        "tx_power_w" => &["tx_power_dbw"],
        "tx_power_dbw" => &["tx_power_w"],
        "target_sdinr" => &["target_sdinr_db"],
        "target_sdinr_db" => &["target_sdinr"],
        "los_intercept" => &["los_intercept_db"],
        "los_intercept_db" => &["los_intercept"],
        "nlos_intercept" => &["nlos_intercept_db"],
        "nlos_intercept_db" => &["nlos_intercept"],
        "impairment" => &["tx_impairment", "rx_impairment"],
        "atn_variance_w" => &["atn_noise_ratio"],
        "atn_noise_ratio" => &["atn_variance_w"],
        "main_lobe_gain" => &["main_lobe_gain_db"],
        "main_lobe_gain_db" => &["main_lobe_gain"],
        "back_lobe_gain" => &["back_lobe_gain_db"],
        "back_lobe_gain_db" => &["back_lobe_gain"],
        "beamwidth_rad" => &["beamwidth_deg"],
        "beamwidth_deg" => &["beamwidth_rad"],
        "delta" | "normalized_doppler" => &["delta", "doppler_hz", "symbol_period_s", "normalized_doppler"],
        "doppler_hz" | "symbol_period_s" => &["delta", "normalized_doppler"],
        _ => &[],
    }
}

fn set_field(obj: &mut Map<String, Value>, field: &str, value: &Value) {
    if matches!(field, "tx_impairment" | "rx_impairment") {
        // Split a shared impairment level into its two explicit halves first.
        if let Some(shared) = obj.remove("impairment") {
            obj.insert("tx_impairment".into(), shared.clone());
            obj.insert("rx_impairment".into(), shared);
        }
    }
    for c in conflicts(field) {
        if *c != field {
            obj.remove(*c);
        }
    }
    obj.insert(field.to_string(), value.clone());
}

fn normalize_value(field: &str, value: &Value, full_key: &str) -> Result<Value> {
    let bad = |why: &str| Error::InvalidOverride(format!("{full_key}: {why}"));
    if INTEGER_KEYS.contains(&field) {
        let v = value.as_f64().ok_or_else(|| bad("expected an integer"))?;
        if v < 0.0 || v.fract() != 0.0 || v > 9.0e15 {
            return Err(bad("expected a non-negative integer"));
        }
        return Ok(Value::from(v as u64));
    }
    if field == "fading_scale" {
        return match value {
            Value::String(_) => Ok(value.clone()),
            _ => Err(bad("expected unit-scale or unit-mean")),
        };
    }
    match value.as_f64() {
        Some(v) if v.is_finite() => Ok(value.clone()),
        _ => Err(bad("expected a finite number")),
    }
}

fn object_mut<'a>(v: &'a mut Value, full_key: &str) -> Result<&'a mut Map<String, Value>> {
    if v.is_null() {
        *v = Value::Object(Map::new());
    }
    v.as_object_mut()
        .ok_or_else(|| Error::InvalidOverride(format!("{full_key}: not an object")))
}

fn apply_nested(obj: &mut Map<String, Value>, rest: &[&str], allowed_child: &[&str], value: &Value, full_key: &str) -> Result<()> {
    match rest {
        [field] if allowed_child.contains(field) => {
            let v = normalize_value(field, value, full_key)?;
            set_field(obj, field, &v);
            Ok(())
        }
        _ => Err(Error::InvalidOverride(format!("{full_key}: unknown parameter path"))),
    }
}

fn apply_tier(tier: &mut Value, rest: &[&str], value: &Value, full_key: &str) -> Result<()> {
    let obj = object_mut(tier, full_key)?;
    match rest {
        ["tx_beam", tail @ ..] => {
            let beam = obj.entry("tx_beam").or_insert(Value::Null);
            apply_nested(object_mut(beam, full_key)?, tail, BEAM_KEYS, value, full_key)
        }
        ["aging", tail @ ..] => {
            let aging = obj.entry("aging").or_insert(Value::Null);
            apply_nested(object_mut(aging, full_key)?, tail, AGING_KEYS, value, full_key)
        }
        _ => apply_nested(obj, rest, TIER_KEYS, value, full_key),
    }
}

/// Applies one dotted-key override to a configuration document in place.
pub fn apply_override(doc: &mut Value, ov: &Override) -> Result<()> {
    let key = ov.key.as_str();
    let parts: Vec<&str> = key.split('.').collect();
    let root = object_mut(doc, key)?;
    match parts.as_slice() {
        ["tiers", sel, rest @ ..] => {
            let tiers = root
                .get_mut("tiers")
                .and_then(Value::as_array_mut)
                .ok_or_else(|| Error::InvalidOverride(format!("{key}: document has no tiers")))?;
            if *sel == "*" {
                for t in tiers.iter_mut() {
                    apply_tier(t, rest, &ov.value, key)?;
                }
                Ok(())
            } else {
                let i: usize = sel
                    .parse()
                    .map_err(|_| Error::InvalidOverride(format!("{key}: tier selector must be an index or *")))?;
                let n = tiers.len();
                let t = tiers
                    .get_mut(i)
                    .ok_or_else(|| Error::InvalidOverride(format!("{key}: tier {i} out of range ({n} tiers)")))?;
                apply_tier(t, rest, &ov.value, key)
            }
        }
        ["rx_beam", rest @ ..] => {
            let beam = root.entry("rx_beam").or_insert(Value::Null);
            apply_nested(object_mut(beam, key)?, rest, BEAM_KEYS, &ov.value, key)
        }
        _ => apply_nested(root, &parts, TOP_KEYS, &ov.value, key),
    }
}

/// Applies overrides to a validated config and revalidates the result.
pub fn with_overrides(cfg: &NetworkConfig, overrides: &[Override]) -> Result<NetworkConfig> {
    let mut doc = to_value(cfg);
    for ov in overrides {
        apply_override(&mut doc, ov)?;
    }
    load_config_value(doc)
}

/// Base configuration and sweep of a figure preset.
pub fn preset(name: &str) -> Result<(NetworkConfig, SweepSpec)> {
    let mut cfg = reference_network(2);
    let mut spec = match name {
        "fig1" | "fig3" | "fig5" | "fig7" | "fig8" => SweepSpec::target_sweep(name, Metric::Coverage),
        "fig2" | "fig4" | "fig6" => SweepSpec::target_sweep(name, Metric::Ase),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    let bits_kappa = [0.062, 0.126, 0.258];
    match name {
        "fig1" => {
            spec.series = [1.0, 0.9, 0.7]
                .iter()
                .map(|&d| Series::single("delta", "tiers.*.aging.delta", d))
                .collect();
        }
        "fig2" => {
            spec.key = "tiers.*.aging.normalized_doppler".into();
            spec.values = (0..=60).map(|k| k as f64 / 100.0).collect();
            spec.series = [2.0, 5.0, 10.0]
                .iter()
                .map(|&n| Series::single("N", "tiers.*.antennas", n))
                .collect();
        }
        "fig3" => {
            spec.series = bits_kappa
                .iter()
                .map(|&k| Series::single("kappa", "tiers.*.impairment", k))
                .collect();
        }
        "fig4" => {
            // A small feedback error keeps the estimation-error term alive, which
            // is the only place where transmit and receive impairments differ.
            for t in &mut cfg.tiers {
                t.csit_quality = 0.1;
            }
            spec.series = std::iter::once(Series::single("kappa", "tiers.*.impairment", 0.0))
                .chain(bits_kappa.iter().map(|&k| Series::single("kappa", "tiers.*.impairment", k)))
                .chain([
                    Series {
                        label: "tx_only=0.126".into(),
                        overrides: vec![
                            Override::new("tiers.*.tx_impairment", 0.126),
                            Override::new("tiers.*.rx_impairment", 0.0),
                        ],
                    },
                    Series {
                        label: "rx_only=0.126".into(),
                        overrides: vec![
                            Override::new("tiers.*.tx_impairment", 0.0),
                            Override::new("tiers.*.rx_impairment", 0.126),
                        ],
                    },
                ])
                .collect();
        }
        "fig5" => {
            spec.series = [1.0, 1.6, 3.2]
                .iter()
                .map(|&r| Series::single("atn_ratio", "tiers.*.atn_noise_ratio", r))
                .collect();
        }
        "fig6" => {
            impaired(&mut cfg, 0.7);
            spec.series = [100.0, 200.0, 300.0]
                .iter()
                .map(|&m| Series::single("Mt", "tiers.*.tx_beam.main_lobe_gain", m))
                .collect();
        }
        "fig7" => {
            impaired(&mut cfg, 0.9);
            spec.series = [2.0, 4.0, 6.0, 8.0]
                .iter()
                .map(|&n| Series::single("N", "tiers.*.antennas", n))
                .collect();
        }
        "fig8" => {
            impaired(&mut cfg, 0.9);
            spec.series = (1..=5)
                .map(|k| Series::single("K", "tiers.*.users_per_bs", k as f64))
                .collect();
        }
        _ => unreachable!(),
    }
    Ok((cfg, spec))
}

fn impaired(cfg: &mut NetworkConfig, delta: f64) {
    let sigma2 = cfg.thermal_noise;
    for t in &mut cfg.tiers {
        t.tx_impairment = 0.126;
        t.rx_impairment = 0.126;
        t.atn_variance = 1.6 * sigma2;
        t.aging = Aging::Coefficient(delta);
    }
}

/// Key under which drops can be shared: drop outcomes do not depend on targets.
fn drop_key(cfg: &NetworkConfig) -> String {
    let mut c = cfg.clone();
    for t in &mut c.tiers {
        t.target_sdinr = 1.0;
    }
    c.fingerprint()
}

fn ms(t: Instant) -> f64 {
    (t.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

struct Prepared {
    series: String,
    value: f64,
    cfg: std::result::Result<NetworkConfig, Error>,
}

/// Runs every (series, value) point of a sweep against `base`.
///
/// Bad keys fail the whole sweep; per-point failures are recorded on the row.
pub fn run_sweep(spec: &SweepSpec, base: &NetworkConfig) -> Result<SweepResult> {
    spec.validate()?;
    base.validate()?;
    let base_doc = to_value(base);
    // Resolve every path once up front so typos are reported before any work.
    for ov in spec.series.iter().flat_map(|s| s.overrides.iter()) {
        apply_override(&mut base_doc.clone(), ov)?;
    }
    apply_override(&mut base_doc.clone(), &Override::new(spec.key.clone(), spec.values[0]))?;

    let mut prepared = Vec::with_capacity(spec.series.len() * spec.values.len());
    for s in &spec.series {
        let mut doc = base_doc.clone();
        for ov in &s.overrides {
            apply_override(&mut doc, ov)?;
        }
        for &v in &spec.values {
            let mut d = doc.clone();
            apply_override(&mut d, &Override::new(spec.key.clone(), v))?;
            prepared.push(Prepared {
                series: s.label.clone(),
                value: v,
                cfg: load_config_value(d),
            });
        }
    }

    type Simulated = (std::result::Result<Vec<DropOutcome>, Error>, f64);
    let mut drops: HashMap<String, Simulated> = HashMap::new();
    if spec.engine.mc() {
        for p in &prepared {
            if let Ok(cfg) = &p.cfg {
                drops.entry(drop_key(cfg)).or_insert_with(|| {
                    let t = Instant::now();
                    let out = simulate_drops(cfg, spec.drops, spec.fidelity);
                    (out, ms(t))
                });
            }
        }
    }
    let mut charged: HashMap<String, bool> = HashMap::new();
    let sim_ms: Vec<f64> = prepared
        .iter()
        .map(|p| match (&p.cfg, spec.engine.mc()) {
            (Ok(cfg), true) => {
                let key = drop_key(cfg);
                if charged.insert(key.clone(), true).is_none() {
                    drops[&key].1
                } else {
                    0.0
                }
            }
            _ => 0.0,
        })
        .collect();

    let points = prepared
        .par_iter()
        .zip(sim_ms.par_iter())
        .map(|(p, &sim)| evaluate_point(spec, p, &drops, sim))
        .collect();

    Ok(SweepResult {
        spec: spec.clone(),
        base_hash: base.fingerprint(),
        base: base.clone(),
        points,
    })
}

type DropCache = HashMap<String, (std::result::Result<Vec<DropOutcome>, Error>, f64)>;

fn evaluate_point(spec: &SweepSpec, p: &Prepared, drops: &DropCache, sim_ms: f64) -> CurvePoint {
    let start = Instant::now();
    let mut point = CurvePoint {
        series: p.series.clone(),
        value: p.value,
        analytic_raw: None,
        analytic_clamped: None,
        mc: None,
        error: None,
        validation_error: false,
        config_hash: None,
        runtime_ms: 0.0,
    };
    let cfg = match &p.cfg {
        Ok(c) => c,
        Err(e) => {
            point.error = Some(e.to_string());
            point.validation_error = e.is_validation();
            return point;
        }
    };
    point.config_hash = Some(cfg.fingerprint());
    let mut errors = Vec::new();
    if spec.engine.analytic() {
        match coverage_total(cfg) {
            Ok(c) => {
                let (raw, clamped) = match spec.metric {
                    Metric::Coverage => (c.raw, c.clamped),
                    Metric::Ase => (ase_from_coverage(cfg, c.raw).ase, ase_from_coverage(cfg, c.clamped).ase),
                };
                point.analytic_raw = Some(raw);
                point.analytic_clamped = Some(clamped);
            }
            Err(e) => {
                point.validation_error |= e.is_validation();
                errors.push(format!("analytic: {e}"));
            }
        }
    }
    if spec.engine.mc() {
        match &drops[&drop_key(cfg)].0 {
            Ok(outcomes) => {
                let cov = coverage_from_drops(cfg, outcomes, &targets(cfg), spec.fidelity);
                point.mc = Some(match spec.metric {
                    Metric::Coverage => cov,
                    Metric::Ase => ase_from_coverage_estimate(cfg, &cov),
                });
            }
            Err(e) => {
                point.validation_error |= e.is_validation();
                errors.push(format!("mc: {e}"));
            }
        }
    }
    if !errors.is_empty() {
        point.error = Some(errors.join("; "));
    }
    point.runtime_ms = ms(start) + sim_ms;
    point
}

/// Runs a preset after applying `overrides` to its base configuration.
pub fn run_preset(name: &str, overrides: &[Override], engine: Engine, drops: usize, fidelity: Fidelity) -> Result<SweepResult> {
    let (cfg, mut spec) = preset(name)?;
    let cfg = with_overrides(&cfg, overrides)?;
    spec.engine = engine;
    spec.drops = drops;
    spec.fidelity = fidelity;
    run_sweep(&spec, &cfg)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes a sweep result as a `hetnet-curve-v1` CSV file.
pub fn write_csv<W: Write>(mut out: W, result: &SweepResult) -> Result<()> {
    let spec = &result.spec;
    writeln!(out, "# schema={SCHEMA}")?;
    writeln!(out, "# name={}", spec.name)?;
    writeln!(out, "# metric={}", spec.metric.as_str())?;
    writeln!(out, "# param={}", spec.key)?;
    writeln!(
        out,
        "# engine={} mode={} drops={} seed={} fading_scale={}",
        spec.engine.as_str(),
        spec.fidelity.as_str(),
        if spec.engine.mc() { spec.drops } else { 0 },
        result.base.rng_seed,
        result.base.fading_scale.as_str()
    )?;
    writeln!(out, "# base_config_hash={}", result.base_hash)?;
    let densities: Vec<String> = result.base.tiers.iter().map(|t| format!("{:e}", t.bs_density)).collect();
    writeln!(
        out,
        "# note=absolute levels depend on the assumed BS densities [{}] per m^2",
        densities.join(" ")
    )?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for p in &result.points {
        let record = [
            p.series.clone(),
            spec.key.clone(),
            p.value.to_string(),
            opt(p.analytic_raw),
            opt(p.analytic_clamped),
            opt(p.mc.as_ref().map(|m| m.estimate)),
            opt(p.mc.as_ref().map(|m| m.stderr)),
            p.mc.as_ref().map(|m| m.empty_drops.to_string()).unwrap_or_default(),
            p.bound_ok().map(|b| b.to_string()).unwrap_or_default(),
            p.error.clone().unwrap_or_default(),
            p.config_hash.clone().unwrap_or_default(),
            format!("{:.3}", p.runtime_ms),
        ];
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed curve file row.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub series: String,
    pub param: String,
    pub value: f64,
    pub analytic_raw: Option<f64>,
    pub analytic_clamped: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub mc_empty_drops: Option<usize>,
    pub bound_ok: Option<bool>,
    pub error: String,
    pub config_hash: String,
    pub runtime_ms: f64,
}

/// Header comments (key=value) and rows of a curve file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    pub meta: Vec<(String, String)>,
    pub rows: Vec<CurveRow>,
}

impl CurveFile {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Parses and schema-checks a curve file.
pub fn read_csv(text: &str) -> Result<CurveFile> {
    let bad = |msg: String| Error::Parse(format!("curve file: {msg}"));
    let mut meta = Vec::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        let Some(comment) = line.strip_prefix("# ") else { break };
        body_start += line.len();
        for pair in comment.trim_end().split(' ') {
            if let Some((k, v)) = pair.split_once('=') {
                meta.push((k.to_string(), v.to_string()));
            }
        }
    }
    if meta.first().map(|(k, v)| (k.as_str(), v.as_str())) != Some(("schema", SCHEMA)) {
        return Err(bad(format!("first line must be `# schema={SCHEMA}`")));
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(&text.as_bytes()[body_start..]);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let num = |s: &str, col: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>().map(Some).map_err(|_| bad(format!("column {col}: `{s}` is not a number")))
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let r = rec.map_err(|e| bad(e.to_string()))?;
        rows.push(CurveRow {
            series: r[0].to_string(),
            param: r[1].to_string(),
            value: num(&r[2], "value")?.ok_or_else(|| bad("empty value".into()))?,
            analytic_raw: num(&r[3], "analytic_raw")?,
            analytic_clamped: num(&r[4], "analytic_clamped")?,
            mc_estimate: num(&r[5], "mc_estimate")?,
            mc_stderr: num(&r[6], "mc_stderr")?,
            mc_empty_drops: match &r[7] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad(format!("column mc_empty_drops: `{s}`")))?),
            },
            bound_ok: match &r[8] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                s => return Err(bad(format!("column bound_ok: `{s}`"))),
            },
            error: r[9].to_string(),
            config_hash: r[10].to_string(),
            runtime_ms: num(&r[11], "runtime_ms")?.ok_or_else(|| bad("empty runtime_ms".into()))?,
        });
    }
    Ok(CurveFile { meta, rows })
}
