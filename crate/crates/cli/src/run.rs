use std::path::PathBuf;
use std::time::Instant;

use nvsim::trace::SCHEMA_VERSION;
use nvsim::{SimConfig, SimError, Summary, ValidConfig};
use serde::Serialize;

use crate::error::{unknown_key, CliError};
use crate::output::{to_json, OutDir, RunManifest};
use crate::ModelArgs;

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the full per-tick neuron states to `states.csv`.
    #[arg(long)]
    pub states: bool,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    schema_version: u32,
    #[serde(flatten)]
    summary: &'a Summary,
}

/// Builds the config from file, environment and flags, in that order of precedence (flags win).
pub fn load_config(args: &ModelArgs) -> Result<(SimConfig, Vec<String>), CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            SimConfig::from_toml_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    let env = cfg.apply_env(std::env::vars()).map_err(|e| match e {
        SimError::UnknownKey { key, valid } => unknown_key(&key, &valid),
        other => other.into(),
    })?;
    if let Some(m) = args.model {
        cfg.model = m;
    }
    if let Some(t) = args.t_max {
        cfg.t_max = t;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok((cfg, env))
}

pub fn validated(cfg: &SimConfig) -> Result<ValidConfig, CliError> {
    let valid = cfg.validate().map_err(CliError::Config)?;
    for w in &valid.warnings {
        eprintln!("warning: {w}");
    }
    Ok(valid)
}

pub fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let (mut cfg, env_overrides) = load_config(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let valid = validated(&cfg)?;

    let started = Instant::now();
    let trace = nvsim::run(&valid)?;
    let summary = nvsim::summarize(&trace, valid.max_period);
    let elapsed = started.elapsed().as_secs_f64();

    let mut out = OutDir::create(&args.out)?;
    out.write("trace.csv", trace.trace_csv().as_bytes())?;
    if let Some(astro) = trace.astro_csv() {
        out.write("astro.csv", astro.as_bytes())?;
    }
    if let Some(plast) = trace.plasticity_csv() {
        out.write("plasticity.csv", plast.as_bytes())?;
    }
    if args.states {
        out.write("states.csv", trace.states_csv().as_bytes())?;
    }
    let summary_json = to_json(&SummaryFile {
        schema_version: SCHEMA_VERSION,
        summary: &summary,
    });
    out.write("summary.json", summary_json.as_bytes())?;
    out.write("config.toml", valid.canonical().as_bytes())?;

    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: "run".into(),
        model: valid.model.to_string(),
        config_path: args.common.config.clone(),
        config_hash: valid.hash(),
        seed: valid.seed,
        out_dir: args.out.clone(),
        files,
        env_overrides,
        warnings: valid.warnings.clone(),
        duration_secs: elapsed,
    };
    out.write("manifest.json", to_json(&manifest).as_bytes())?;

    eprintln!(
        "{} seed {}: {} ticks, mean firing fraction {:.4}, wrote {}",
        valid.model,
        valid.seed,
        summary.t_max,
        summary.mean_firing_fraction,
        args.out.display()
    );
    Ok(())
}
