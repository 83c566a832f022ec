use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hetnet_core::experiments::{
    preset, reference_network, run_sweep, write_csv, Engine, Metric, Override, SweepSpec, DEFAULT_DROPS,
};
use hetnet_core::sdinr::Fidelity;
use hetnet_core::{load_config, Error, FadingScale};

/// Coverage and area spectral efficiency sweeps for multi-tier mmWave networks.
///
/// Exit status: 0 on success, 2 on invalid input, 3 when a numerical engine
/// fails on some sweep point (the CSV is still written).
#[derive(Debug, Parser)]
#[command(name = "hetnet", version)]
struct Args {
    /// Scenario JSON file; with --preset it replaces the preset's base network.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Figure preset: fig1 .. fig8.
    #[arg(long)]
    preset: Option<String>,

    /// Swept parameter and grid, e.g. tiers.*.target_sdinr_db=-10,0,10.
    #[arg(long)]
    sweep: Option<String>,

    /// Extra override applied to the base network, e.g. tiers.0.antennas=8.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[arg(long, default_value = "both", value_parser = ["analytic", "mc", "both"])]
    engine: String,

    /// Curve quantity for --config runs (presets fix their own).
    #[arg(long, value_parser = ["coverage", "ase"])]
    metric: Option<String>,

    /// Monte Carlo network drops per sweep point.
    #[arg(long, default_value_t = DEFAULT_DROPS)]
    drops: usize,

    #[arg(long, default_value = "distributional", value_parser = ["distributional", "matrix"])]
    mode: String,

    /// Master RNG seed; overrides the scenario's rng_seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long = "fading-scale", value_parser = ["unit-scale", "unit-mean"])]
    fading_scale: Option<String>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() || matches!(e, Error::Io(_)) {
        2
    } else {
        3
    }
}

fn run(args: Args) -> Result<i32, Error> {
    let (mut base, mut spec) = match &args.preset {
        Some(name) => preset(name)?,
        None => {
            if args.config.is_none() {
                return Err(Error::invalid("arguments", "give --preset and/or --config"));
            }
            let metric: Metric = args.metric.as_deref().unwrap_or("coverage").parse()?;
            (reference_network(1), SweepSpec::target_sweep("custom", metric))
        }
    };
    if args.preset.is_some() && args.metric.is_some() {
        return Err(Error::invalid("metric", "presets fix their own metric"));
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        base = load_config(&text)?;
    }
    let mut overrides = args.set.iter().map(|s| Override::parse(s)).collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = args.seed {
        overrides.push(Override::new("rng_seed", seed));
    }
    if let Some(fs) = &args.fading_scale {
        let fs: FadingScale = fs.parse()?;
        overrides.push(Override::new("fading_scale", fs.as_str()));
    }
    let base = hetnet_core::experiments::with_overrides(&base, &overrides)?;
    if let Some(axis) = &args.sweep {
        let (key, values) = SweepSpec::parse_axis(axis)?;
        spec.key = key;
        spec.values = values;
    }
    spec.engine = args.engine.parse::<Engine>()?;
    spec.drops = args.drops;
    spec.fidelity = args.mode.parse::<Fidelity>()?;

    if args.preset.is_some() {
        let densities: Vec<String> = base.tiers.iter().map(|t| format!("{:e}", t.bs_density)).collect();
        eprintln!(
            "hetnet: preset {} uses BS densities [{}] per m^2; absolute curve levels depend on this choice",
            spec.name,
            densities.join(" ")
        );
    }
    let result = run_sweep(&spec, &base)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            write_csv(&mut w, &result)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            write_csv(stdout.lock(), &result)?;
        }
    }
    for p in result.points.iter().filter(|p| p.error.is_some()) {
        eprintln!("hetnet: {} {}={}: {}", p.series, spec.key, p.value, p.error.as_deref().unwrap_or(""));
    }
    if !result.all_bounds_ok() {
        eprintln!("hetnet: warning: analytic value below MC - 3 stderr on some rows (see bound_ok)");
    }
    Ok(result.status())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("hetnet: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
