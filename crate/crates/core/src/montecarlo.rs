//! Monte Carlo estimation of coverage and ASE by direct network sampling.
//!
//! Every drop draws its own ChaCha8 stream (master seed, stream = drop
//! index), so results do not depend on how drops are spread over threads.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{FadingScale, NetworkConfig};
use crate::coverage::ase_weights;
use crate::error::{Error, Result};
use crate::geometry::{associate, sample_network, LinkType};
use crate::sdinr::{Fidelity, SdinrSampler, SdinrTerms};
use crate::stats::binomial_stderr;

/// Outcome of one network drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DropOutcome {
    /// No BS fell inside the window.
    Empty,
    /// The serving tier's aging coefficient is numerically zero.
    AgingDomain { tier: usize, distance: f64, link: LinkType },
    Served { tier: usize, distance: f64, link: LinkType, terms: SdinrTerms },
}

impl DropOutcome {
    pub fn sdinr(&self) -> Option<f64> {
        match self {
            DropOutcome::Served { terms, .. } => Some(terms.sdinr()),
            _ => None,
        }
    }

    /// Coverage indicator against per-tier targets.
    pub fn covered(&self, targets: &[f64]) -> bool {
        match self {
            DropOutcome::Served { tier, terms, .. } => terms.sdinr() > targets[*tier],
            _ => false,
        }
    }
}

/// Empirical coverage (or ASE) with its binomial standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub drops: usize,
    pub empty_drops: usize,
    pub aging_domain_drops: usize,
    pub fidelity: Fidelity,
    pub fading_scale: FadingScale,
}

/// RNG of drop `index` under master seed `seed`.
pub fn drop_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates `drops` independent networks seeded from `cfg.rng_seed`.
pub fn simulate_drops(cfg: &NetworkConfig, drops: usize, fidelity: Fidelity) -> Result<Vec<DropOutcome>> {
    let sampler = SdinrSampler::new(cfg);
    (0..drops)
        .into_par_iter()
        .map(|d| {
            let mut rng = drop_rng(cfg.rng_seed, d as u64);
            let bss = sample_network(cfg, &mut rng);
            let assoc = match associate(&bss, cfg) {
                Ok(a) => a,
                Err(Error::EmptyNetwork) => return Ok(DropOutcome::Empty),
                Err(e) => return Err(e),
            };
            match sampler.sample(cfg, &bss, &assoc, fidelity, &mut rng) {
                Ok(terms) => Ok(DropOutcome::Served {
                    tier: assoc.tier,
                    distance: assoc.distance,
                    link: assoc.link,
                    terms,
                }),
                Err(Error::AgingDomain { .. }) => Ok(DropOutcome::AgingDomain {
                    tier: assoc.tier,
                    distance: assoc.distance,
                    link: assoc.link,
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Coverage estimate from simulated drops against per-tier targets.
pub fn coverage_from_drops(cfg: &NetworkConfig, outcomes: &[DropOutcome], targets: &[f64], fidelity: Fidelity) -> McEstimate {
    let covered = outcomes.iter().filter(|o| o.covered(targets)).count();
    let n = outcomes.len();
    let p = if n == 0 { 0.0 } else { covered as f64 / n as f64 };
    McEstimate {
        estimate: p,
        stderr: binomial_stderr(p, n),
        drops: n,
        empty_drops: outcomes.iter().filter(|o| matches!(o, DropOutcome::Empty)).count(),
        aging_domain_drops: outcomes.iter().filter(|o| matches!(o, DropOutcome::AgingDomain { .. })).count(),
        fidelity,
        fading_scale: cfg.fading_scale,
    }
}

pub fn targets(cfg: &NetworkConfig) -> Vec<f64> {
    cfg.tiers.iter().map(|t| t.target_sdinr).collect()
}

/// Fraction of drops whose serving SDINR exceeds the serving tier's target.
pub fn run_coverage_mc(cfg: &NetworkConfig, drops: usize, fidelity: Fidelity) -> Result<McEstimate> {
    if drops == 0 {
        return Err(Error::invalid("drops", "must be >= 1"));
    }
    let outcomes = simulate_drops(cfg, drops, fidelity)?;
    Ok(coverage_from_drops(cfg, &outcomes, &targets(cfg), fidelity))
}

/// Scales a coverage estimate into an ASE estimate.
pub fn ase_from_coverage_estimate(cfg: &NetworkConfig, coverage: &McEstimate) -> McEstimate {
    let w: f64 = ase_weights(cfg).iter().sum();
    McEstimate {
        estimate: coverage.estimate * w,
        stderr: coverage.stderr * w,
        ..coverage.clone()
    }
}

pub fn run_ase_mc(cfg: &NetworkConfig, drops: usize, fidelity: Fidelity) -> Result<McEstimate> {
    Ok(ase_from_coverage_estimate(cfg, &run_coverage_mc(cfg, drops, fidelity)?))
}

/// Per-drop trace with columns drop,tier,x,los,sdinr_db,covered.
pub fn write_trace<W: Write>(mut out: W, cfg: &NetworkConfig, outcomes: &[DropOutcome]) -> Result<()> {
    let targets = targets(cfg);
    writeln!(out, "drop,tier,x,los,sdinr_db,covered")?;
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            DropOutcome::Empty => writeln!(out, "{i},,,,,0")?,
            DropOutcome::AgingDomain { tier, distance, link } => {
                writeln!(out, "{i},{tier},{distance},{},,0", u8::from(*link == LinkType::Los))?
            }
            DropOutcome::Served { tier, distance, link, terms } => writeln!(
                out,
                "{i},{tier},{distance},{},{},{}",
                u8::from(*link == LinkType::Los),
                10.0 * terms.sdinr().log10(),
                u8::from(o.covered(&targets))
            )?,
        }
    }
    Ok(())
}
