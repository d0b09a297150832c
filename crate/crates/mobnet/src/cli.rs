//! Command-line parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::{self, Command, Outcome};
use crate::config::RunConfig;
use crate::output::manifest_command;

#[derive(Parser, Debug)]
#[command(name = "mobnet", version, about = "Commute-network embeddings and regional income regression")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of consecutive seeds to run.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["raw", "log1p", "binary"])]
    weight_transform: Option<String>,
    /// Embedding width.
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true, value_parser = ["vnn", "gcn", "gat", "features"])]
    method: Option<String>,
    #[arg(long, global = true, value_parser = ["spatial", "svd", "laplacian", "randomwalk"])]
    init: Option<String>,
    /// `holdout:<train fraction>` or `kfold:<k>`.
    #[arg(long, global = true)]
    split: Option<String>,
    /// Any config key, e.g. `--set vnn.epochs=50`. Applied before the named flags.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print nothing on success.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Network statistics of an OD file.
    Stats {
        /// OD file; overrides `od.path`.
        od: Option<PathBuf>,
        #[arg(long)]
        universe: Option<PathBuf>,
    },
    /// Write a node embedding table.
    Embed {
        /// Refine the embedding by edge reconstruction.
        #[arg(long)]
        trained: bool,
    },
    /// K-means over the embedding; labels as CSV and GeoJSON.
    Cluster {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        trained: bool,
    },
    /// Train and evaluate one method; writes checkpoints and a report.
    Train,
    /// Evaluate every method × init × d cell.
    Grid {
        /// Worker threads (default: logical cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Comma-separated embedding widths.
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        inits: Option<String>,
    },
    /// Generate a planted-community city.
    Synth,
    /// Replay a run manifest.
    Rerun { manifest: PathBuf },
}

fn build_config(common: &Common, extra: &[(&str, String)]) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k.trim(), v)?;
    }
    let flags = [
        ("run.seed", common.seed.map(|v| v.to_string())),
        ("run.seeds", common.seeds.map(|v| v.to_string())),
        ("output.dir", common.out.as_ref().map(|p| p.display().to_string())),
        ("graph.weight_transform", common.weight_transform.clone()),
        ("model.d", common.d.map(|v| v.to_string())),
        ("model.method", common.method.clone()),
        ("model.init", common.init.clone()),
        ("eval.split", common.split.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, &v).with_context(|| format!("flag for {k}"))?;
        }
    }
    for (k, v) in extra {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

/// Parses the command line and returns the resolved command and config.
fn resolve(cli: &Cli) -> Result<(Command, RunConfig)> {
    let mut extra: Vec<(&str, String)> = Vec::new();
    let cmd = match &cli.command {
        Cmd::Stats { od, universe } => {
            if let Some(p) = od {
                extra.push(("od.path", p.display().to_string()));
            }
            if let Some(p) = universe {
                extra.push(("universe.path", p.display().to_string()));
            }
            Command::Stats
        }
        Cmd::Embed { trained } => {
            if *trained {
                extra.push(("embed.trained", "true".into()));
            }
            Command::Embed
        }
        Cmd::Cluster { k, trained } => {
            if let Some(k) = k {
                extra.push(("cluster.k", k.to_string()));
            }
            if *trained {
                extra.push(("embed.trained", "true".into()));
            }
            Command::Cluster
        }
        Cmd::Train => Command::Train,
        Cmd::Grid { jobs, dims, methods, inits } => {
            for (k, v) in [
                ("grid.jobs", jobs.map(|j| j.to_string())),
                ("grid.dims", dims.clone()),
                ("grid.methods", methods.clone()),
                ("grid.inits", inits.clone()),
            ] {
                if let Some(v) = v {
                    extra.push((k, v));
                }
            }
            Command::Grid
        }
        Cmd::Synth => Command::Synth,
        Cmd::Rerun { manifest } => {
            let text = std::fs::read_to_string(manifest)
                .with_context(|| format!("cannot read manifest {}", manifest.display()))?;
            let name = manifest_command(&text)?;
            let cmd = Command::from_name(&name).ok_or_else(|| anyhow!("manifest names unknown command {name:?}"))?;
            let mut cfg = RunConfig::parse(&text)?;
            if let Some(out) = &cli.common.out {
                cfg.output_dir = Some(out.clone());
            }
            return Ok((cmd, cfg));
        }
    };
    Ok((cmd, build_config(&cli.common, &extra)?))
}

/// Runs the program on `args` (including the program name) and returns the
/// process exit code: 0 when everything requested completed, 1 when some
/// cells did not, 2 on errors.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve(&cli).and_then(|(cmd, cfg)| commands::run(cmd, &cfg).map(|o| (cmd, o)));
    match result {
        Ok((cmd, outcome)) => report(cmd, &outcome, cli.common.quiet),
        Err(e) => {
            eprintln!("{}", json!({ "status": "error", "message": format!("{e:#}") }));
            2
        }
    }
}

fn report(cmd: Command, outcome: &Outcome, quiet: bool) -> i32 {
    if !quiet {
        print!("{}", outcome.text);
        for p in &outcome.outputs {
            println!("wrote {}", p.display());
        }
    }
    if outcome.complete {
        0
    } else {
        let summary = outcome
            .errors
            .clone()
            .unwrap_or_else(|| json!({ "status": "incomplete", "command": cmd.name() }));
        eprintln!("{summary}");
        1
    }
}
