use std::path::PathBuf;
use std::time::Instant;

use nvsim::trace::{fmt_real, SCHEMA_VERSION};
use nvsim::{SimConfig, SimError, Summary};
use rayon::prelude::*;

use crate::error::{unknown_key, CliError};
use crate::output::{to_json, OutDir, RunManifest};
use crate::run::{load_config, validated};
use crate::ModelArgs;

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    /// `key=lo:hi:steps`, evenly spaced and inclusive; repeat for a grid.
    #[arg(long = "param", required = true)]
    pub params: Vec<String>,
    /// Seeds per cell, counting up from the config seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Output directory for `sweep.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Concurrent runs (defaults to all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamAxis {
    pub key: String,
    pub values: Vec<f64>,
}

pub fn parse_axis(spec: &str) -> Result<ParamAxis, CliError> {
    let bad = |why: &str| {
        CliError::Usage(format!(
            "--param `{spec}`: {why} (expected key=lo:hi:steps)"
        ))
    };
    let (key, range) = spec.split_once('=').ok_or_else(|| bad("missing `=`"))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, steps] = parts[..] else {
        return Err(bad("need three `:`-separated fields"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("hi is not a number"))?;
    let steps: usize = steps
        .trim()
        .parse()
        .map_err(|_| bad("steps is not a positive integer"))?;
    if steps == 0 {
        return Err(bad("steps must be at least 1"));
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(bad("bounds must be finite"));
    }
    let values = if steps == 1 {
        vec![lo]
    } else {
        (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    Ok(ParamAxis {
        key: key.trim().to_string(),
        values,
    })
}

/// Every combination of axis values, first axis slowest.
pub fn grid(axes: &[ParamAxis]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |cells, axis| {
        cells
            .iter()
            .flat_map(|c| {
                axis.values.iter().map(move |&v| {
                    let mut next = c.clone();
                    next.push(v);
                    next
                })
            })
            .collect()
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn row(cell: usize, values: &[f64], s: &Summary) -> Vec<String> {
    let mut r = vec![cell.to_string(), s.seed.to_string()];
    r.extend(values.iter().map(|&v| fmt_real(v)));
    r.push(fmt_real(s.mean_firing_fraction));
    r.push(opt(s.incompatible_fraction));
    r.push(opt(s.cmp.map(|c| c.mean)));
    r.push(opt(s.cmp.map(|c| c.q1)));
    r.push(opt(s.cmp.map(|c| c.median)));
    r.push(opt(s.cmp.map(|c| c.q3)));
    r.push(s.cycle.period.map(|p| p.to_string()).unwrap_or_default());
    r.push(s.cycle.onset.map(|o| o.to_string()).unwrap_or_default());
    r.push(s.config_hash.clone());
    r
}

pub fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let (base, env_overrides) = load_config(&args.common)?;
    let valid_keys = SimConfig::key_paths();
    let mut axes: Vec<ParamAxis> = Vec::new();
    for spec in &args.params {
        let axis = parse_axis(spec)?;
        if !valid_keys.contains(&axis.key) {
            return Err(unknown_key(&axis.key, &valid_keys));
        }
        if axes.iter().any(|a| a.key == axis.key) {
            return Err(CliError::Usage(format!(
                "--param `{}` given more than once",
                axis.key
            )));
        }
        axes.push(axis);
    }
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }

    let cells = grid(&axes);
    let mut jobs = Vec::with_capacity(cells.len() * args.seeds as usize);
    for (ci, values) in cells.iter().enumerate() {
        let mut cfg = base.clone();
        if args.common.workers.is_none() {
            cfg.workers = 1;
        }
        for (axis, &v) in axes.iter().zip(values) {
            cfg.set_number(&axis.key, v).map_err(|e| match e {
                SimError::UnknownKey { key, valid } => unknown_key(&key, &valid),
                other => other.into(),
            })?;
        }
        for s in 0..args.seeds {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = base.seed.wrapping_add(s);
            jobs.push((ci, run_cfg));
        }
    }
    // fail fast on the first invalid cell, reporting every violation in it
    for (_, cfg) in jobs.iter().step_by(args.seeds as usize) {
        validated(cfg)?;
    }

    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let results: Vec<Result<(usize, Summary), SimError>> = pool.install(|| {
        jobs.par_iter()
            .map(|(ci, cfg)| {
                let trace = nvsim::run(cfg)?;
                Ok((*ci, nvsim::summarize(&trace, cfg.max_period)))
            })
            .collect()
    });

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cell".to_string(), "seed".to_string()];
    header.extend(axes.iter().map(|a| a.key.clone()));
    header.extend(
        [
            "mean_firing_fraction",
            "incompatible_fraction",
            "cmp_mean",
            "cmp_q1",
            "cmp_median",
            "cmp_q3",
            "cycle_period",
            "cycle_onset",
            "config_hash",
        ]
        .map(String::from),
    );
    let csv_err = |e: csv::Error| CliError::Usage(format!("csv: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for r in results {
        let (ci, summary) = r?;
        w.write_record(row(ci, &cells[ci], &summary))
            .map_err(csv_err)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv: {e}")))?;
    let elapsed = started.elapsed().as_secs_f64();

    let mut out = OutDir::create(&args.out)?;
    out.write("sweep.csv", &body)?;
    let mut files = out.files.clone();
    files.push("sweep-manifest.json".into());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: "sweep".into(),
        model: base.model.to_string(),
        config_path: args.common.config.clone(),
        config_hash: validated(&base)?.hash(),
        seed: base.seed,
        out_dir: args.out.clone(),
        files,
        env_overrides,
        warnings: Vec::new(),
        duration_secs: elapsed,
    };
    out.write("sweep-manifest.json", to_json(&manifest).as_bytes())?;
    eprintln!(
        "{} runs ({} cells x {} seeds) in {:.1}s, wrote {}",
        jobs.len(),
        cells.len(),
        args.seeds,
        elapsed,
        args.out.join("sweep.csv").display()
    );
    Ok(())
}
