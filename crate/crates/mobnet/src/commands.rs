//! Subcommand implementations.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime};

use anyhow::{anyhow, bail, Context, Result};
use mobnet_core::embeddings::{kmeans_restarts, EmbeddingMatrix};
use mobnet_core::eval::{initial_embedding, run_cell, CellResult, CityData, GridCell, Method};
use mobnet_core::graph::{build_network, NetworkStats, Summary};
use mobnet_core::synth::{generate, INCOME_COLUMN};
use mobnet_core::vnn::{train_vnn_embedding, VnnConfig};
use mobnet_core::{AttributeTable, MobilityNetwork};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::formats::{self, ReportRow};
use crate::io::{self, AttributeSchema};
use crate::output::{manifest_name, manifest_text, Staged};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Stats,
    Embed,
    Cluster,
    Train,
    Grid,
    Synth,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Stats,
        Command::Embed,
        Command::Cluster,
        Command::Train,
        Command::Grid,
        Command::Synth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Stats => "stats",
            Command::Embed => "embed",
            Command::Cluster => "cluster",
            Command::Train => "train",
            Command::Grid => "grid",
            Command::Synth => "synth",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// False when some requested cell did not finish.
    pub complete: bool,
    /// Machine-readable account of incomplete cells.
    pub errors: Option<Value>,
    /// Human-readable result printed to stdout.
    pub text: String,
}

fn warn(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

/// Flows (and universe) to a network.
pub fn load_network(cfg: &RunConfig) -> Result<MobilityNetwork> {
    let od = cfg.od_path.as_ref().ok_or_else(|| anyhow!("od.path is not set"))?;
    let flows = io::parse_od_file(od, &cfg.od)?;
    let universe = cfg.universe_path.as_deref().map(io::read_universe).transpose()?;
    let build = build_network(&flows, universe.as_deref())?;
    if build.dropped_flows > 0 {
        warn(format!("{} flow pairs fall outside the region universe and were dropped", build.dropped_flows));
    }
    Ok(build.network)
}

fn load_table(path: &std::path::Path, schema: &AttributeSchema, net: &MobilityNetwork, what: &str) -> Result<AttributeTable> {
    let load = io::parse_attribute_file(path, schema)?;
    if load.warnings > 0 {
        warn(format!("{}: {} {what} values missing or unparsable", path.display(), load.warnings));
    }
    let mut table = load.table;
    let absent = table.mark_network(net);
    if !absent.is_empty() {
        warn(format!("{}: {} regions are not in the network and are ignored", path.display(), absent.len()));
    }
    Ok(table)
}

/// Network, income targets, centroids and features of the configured city.
pub fn load_city(cfg: &RunConfig) -> Result<CityData> {
    let net = load_network(cfg)?;
    let mut city = match &cfg.income_path {
        Some(p) => {
            let schema = AttributeSchema {
                columns: Some(vec![cfg.income_column.clone()]),
                require_positive: true,
                ..AttributeSchema::new(&cfg.income_region_column)
            };
            let table = load_table(p, &schema, &net, "income")?;
            CityData::new(cfg.city.clone(), net, &table, 0)
        }
        None => {
            let n = net.node_count();
            CityData {
                name: cfg.city.clone(),
                network: net,
                targets: vec![None; n],
                centroids: None,
                features: None,
            }
        }
    };
    if let Some(p) = &cfg.centroids_path {
        city.centroids = Some(io::read_centroids(p)?);
    }
    if let Some(p) = &cfg.features_path {
        let schema = AttributeSchema {
            proportions: cfg.features_proportions,
            ..AttributeSchema::new(&cfg.features_region_column)
        };
        city.features = Some(load_table(p, &schema, &city.network, "feature")?);
    }
    Ok(city)
}

fn require_income(city: &CityData) -> Result<()> {
    if city.targets.iter().all(Option::is_none) {
        bail!("no network region has an income value (is income.path set?)");
    }
    Ok(())
}

/// Runs `cmd` and writes its outputs and manifest into the output directory.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    let started = SystemTime::now();
    let clock = Instant::now();
    cfg.validate()?;
    let dir = cfg.output_dir();
    let mut staged = Staged::new(&dir)?;
    let mut outcome = match cmd {
        Command::Stats => stats(cfg, &mut staged),
        Command::Embed => embed(cfg, &mut staged),
        Command::Cluster => cluster(cfg, &mut staged),
        Command::Train => train(cfg, &mut staged),
        Command::Grid => grid(cfg, &mut staged),
        Command::Synth => synth(cfg, &mut staged),
    }
    .with_context(|| format!("{} failed", cmd.name()))?;
    let names = staged.names();
    let manifest = manifest_text(cmd.name(), cfg, &names, started, clock.elapsed())?;
    staged.write(&manifest_name(cmd.name()), |w| Ok(w.write_all(manifest.as_bytes())?))?;
    outcome.outputs = staged.commit()?;
    Ok(outcome)
}

fn done(text: String) -> Outcome {
    Outcome {
        outputs: Vec::new(),
        complete: true,
        errors: None,
        text,
    }
}

fn summary_json(s: &Summary) -> Value {
    json!({ "min": s.min, "mean": s.mean, "max": s.max })
}

pub fn stats_json(city: &str, s: &NetworkStats) -> Value {
    json!({
        "city": city,
        "nodes": s.nodes,
        "nonzero_edges": s.nonzero_edges,
        "self_loops": s.self_loops,
        "total_weight": s.total_weight,
        "avg_weight_all_pairs": s.avg_weight_all_pairs,
        "avg_weight_nonzero": s.avg_weight_nonzero,
        "isolated_nodes": s.isolated_nodes,
        "out_degree": summary_json(&s.out_degree),
        "in_degree": summary_json(&s.in_degree),
        "out_strength": summary_json(&s.out_strength),
        "in_strength": summary_json(&s.in_strength),
    })
}

pub fn stats_text(s: &NetworkStats) -> String {
    let line = |name: &str, x: &Summary| format!("{name:<14} min {:.0}  mean {:.2}  max {:.0}\n", x.min, x.mean, x.max);
    let mut t = format!(
        "nodes          {}\nnonzero edges  {}\nself loops     {}\ntotal weight   {}\navg weight     {:.2} (all pairs)  {:.2} (nonzero edges)\nisolated       {}\n",
        s.nodes, s.nonzero_edges, s.self_loops, s.total_weight, s.avg_weight_all_pairs, s.avg_weight_nonzero, s.isolated_nodes
    );
    t.push_str(&line("out degree", &s.out_degree));
    t.push_str(&line("in degree", &s.in_degree));
    t.push_str(&line("out strength", &s.out_strength));
    t.push_str(&line("in strength", &s.in_strength));
    t
}

fn stats(cfg: &RunConfig, out: &mut Staged) -> Result<Outcome> {
    let net = load_network(cfg)?;
    let s = net.stats();
    let doc = stats_json(&cfg.city, &s);
    out.write("stats.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &doc)?;
        Ok(writeln!(w)?)
    })?;
    out.write("edges.csv", |w| formats::write_edge_list(&net, w))?;
    Ok(done(stats_text(&s)))
}

/// The configured embedding, optionally refined by edge reconstruction.
pub fn city_embedding(cfg: &RunConfig, city: &CityData) -> Result<EmbeddingMatrix> {
    let e0 = initial_embedding(city, cfg.init, cfg.d, &cfg.pipeline)?;
    if !cfg.embed_trained {
        return Ok(e0);
    }
    let vnn = VnnConfig {
        d: cfg.d,
        seed: cfg.seed,
        transform: cfg.pipeline.transform,
        ..cfg.pipeline.vnn.clone()
    };
    Ok(train_vnn_embedding(&city.network, Some(&e0), &vnn)?.embedding().standardized())
}

fn embed(cfg: &RunConfig, out: &mut Staged) -> Result<Outcome> {
    let city = load_city(cfg)?;
    let emb = city_embedding(cfg, &city)?;
    out.write("embedding.csv", |w| formats::write_embedding(city.network.regions(), &emb, w))?;
    Ok(done(format!(
        "{} embedding: {} regions x {} dims\n",
        emb.method().name(),
        emb.rows(),
        emb.dim()
    )))
}

fn cluster(cfg: &RunConfig, out: &mut Staged) -> Result<Outcome> {
    let city = load_city(cfg)?;
    let emb = city_embedding(cfg, &city)?;
    let fit = kmeans_restarts(emb.values(), cfg.cluster_k, cfg.seed, cfg.cluster_max_iter, cfg.cluster_restarts)?;
    let regions = city.network.regions();
    let income = cfg.income_path.is_some().then_some(city.targets.as_slice());
    out.write("clusters.csv", |w| formats::write_cluster_csv(regions, &fit.labels, income, w))?;
    if let Some(c) = &city.centroids {
        let doc = formats::cluster_geojson(regions, &fit.labels, income, c);
        out.write("clusters.geojson", |w| {
            serde_json::to_writer(&mut *w, &doc)?;
            Ok(writeln!(w)?)
        })?;
    }
    let mut sizes = vec![0usize; cfg.cluster_k];
    for &l in &fit.labels {
        sizes[l] += 1;
    }
    Ok(done(format!("k={} inertia {:.6} cluster sizes {:?}\n", cfg.cluster_k, fit.inertia, sizes)))
}

fn incomplete(rows: &[ReportRow]) -> Option<Value> {
    let bad: Vec<Value> = rows
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| json!({ "method": r.method, "init": r.init, "d": r.d, "status": r.status, "message": r.message }))
        .collect();
    (!bad.is_empty()).then(|| json!({ "status": "incomplete", "cells": bad }))
}

fn write_reports(out: &mut Staged, stem: &str, rows: &[ReportRow]) -> Result<()> {
    out.write(&format!("{stem}.json"), |w| formats::write_report_json(rows, w))?;
    out.write(&format!("{stem}.csv"), |w| formats::write_report_csv(rows, w))
}

fn table_text(rows: &[ReportRow]) -> String {
    let mut t = String::new();
    for r in rows {
        let score = match (r.r2_mean, r.r2_halfwidth) {
            (Some(m), Some(h)) => format!("{m:.3} ± {h:.3}"),
            _ => r.status.to_uppercase(),
        };
        t.push_str(&format!(
            "{:<13} {:<11} d={:<3} R² {score}\n",
            r.method,
            r.init.as_deref().unwrap_or("-"),
            r.d
        ));
    }
    t
}

fn cell_of(cfg: &RunConfig) -> GridCell {
    GridCell {
        method: cfg.method,
        init: cfg.method.uses_init().then_some(cfg.init),
        d: cfg.d,
    }
}

fn train(cfg: &RunConfig, out: &mut Staged) -> Result<Outcome> {
    let city = load_city(cfg)?;
    require_income(&city)?;
    let result = run_cell(&city, &cell_of(cfg), &cfg.pipeline, &cfg.seed_list());
    for run in &result.runs {
        out.write(&format!("checkpoint_seed{}.ckpt", run.seed), |w| {
            let mut all = mobnet_core::nn::ModelParams::new();
            for (fold, ckpt) in run.checkpoints.iter().enumerate() {
                all.absorb(&format!("fold{fold}."), ckpt)?;
            }
            formats::write_checkpoint(&all, w)
        })?;
    }
    out.write("predictions.csv", |w| write_predictions(&city, &result, w))?;
    let rows = vec![ReportRow::from_cell(&city.name, &result)];
    write_reports(out, "report", &rows)?;
    Ok(Outcome {
        outputs: Vec::new(),
        complete: rows[0].is_ok(),
        errors: incomplete(&rows),
        text: table_text(&rows),
    })
}

fn write_predictions<W: Write>(city: &CityData, result: &CellResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "fold", "geoid", "y", "y_hat"])?;
    for run in &result.runs {
        for (fold, rep) in run.reports.iter().enumerate() {
            for (k, &node) in rep.test_nodes.iter().enumerate() {
                w.write_record([
                    run.seed.to_string(),
                    fold.to_string(),
                    city.network.region(node).to_string(),
                    rep.y[k].to_string(),
                    rep.y_hat[k].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Methods of a grid run when none are configured.
pub fn default_methods(cfg: &RunConfig) -> Vec<Method> {
    let mut m = vec![Method::VnnTwoStep, Method::GcnVnn, Method::GatVnn];
    if cfg.features_path.is_some() {
        m.push(Method::FeatureMlp);
    }
    m
}

fn grid(cfg: &RunConfig, out: &mut Staged) -> Result<Outcome> {
    let city = load_city(cfg)?;
    require_income(&city)?;
    let methods = cfg.grid_methods.clone().unwrap_or_else(|| default_methods(cfg));
    let cells = GridCell::grid(&methods, &cfg.grid_inits, &cfg.grid_dims);
    if cells.is_empty() {
        bail!("the grid has no cells");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.grid_jobs).build()?;
    let seeds = cfg.seed_list();
    let results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| run_cell(&city, cell, &cfg.pipeline, &seeds))
            .collect()
    });
    let rows: Vec<ReportRow> = results.iter().map(|r| ReportRow::from_cell(&city.name, r)).collect();
    write_reports(out, "grid", &rows)?;
    Ok(Outcome {
        outputs: Vec::new(),
        complete: rows.iter().all(ReportRow::is_ok),
        errors: incomplete(&rows),
        text: table_text(&rows),
    })
}

fn synth(cfg: &RunConfig, out: &mut Staged) -> Result<Outcome> {
    let city = generate(&cfg.synth, cfg.seed)?;
    let net = &city.network;
    out.write("od.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["w_geocode", "h_geocode", "S000"])?;
        for f in &city.flows {
            w.write_record([f.destination.as_str(), f.origin.as_str(), &f.count.to_string()])?;
        }
        Ok(w.flush()?)
    })?;
    out.write("universe.txt", |w| {
        writeln!(w, "geoid")?;
        for r in net.regions() {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    out.write("income.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["geoid", INCOME_COLUMN])?;
        for (r, v) in net.regions().iter().zip(city.income_values()) {
            w.write_record([r.to_string(), v.to_string()])?;
        }
        Ok(w.flush()?)
    })?;
    out.write("centroids.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["geoid", "lon", "lat"])?;
        for (r, (lon, lat)) in &city.centroids {
            w.write_record([r.to_string(), lon.to_string(), lat.to_string()])?;
        }
        Ok(w.flush()?)
    })?;
    let has_features = !city.features.columns().is_empty();
    if has_features {
        out.write("features.csv", |w| {
            let mut w = csv::Writer::from_writer(w);
            let mut header = vec!["geoid".to_string()];
            header.extend(city.features.columns().iter().cloned());
            w.write_record(&header)?;
            for (r, row) in city.features.iter() {
                let mut rec = vec![r.to_string()];
                rec.extend(row.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
                w.write_record(&rec)?;
            }
            Ok(w.flush()?)
        })?;
    }
    out.write("communities.csv", |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["geoid", "community"])?;
        for (r, c) in net.regions().iter().zip(&city.communities) {
            w.write_record([r.to_string(), c.to_string()])?;
        }
        Ok(w.flush()?)
    })?;
    let mut conf = RunConfig {
        city: "planted".into(),
        od_path: Some("od.csv".into()),
        income_path: Some("income.csv".into()),
        income_column: INCOME_COLUMN.into(),
        centroids_path: Some("centroids.csv".into()),
        universe_path: Some("universe.txt".into()),
        features_path: has_features.then(|| "features.csv".into()),
        features_proportions: false,
        output_dir: None,
        ..cfg.clone()
    };
    conf.od = Default::default();
    out.write("city.conf", |w| Ok(w.write_all(conf.render().as_bytes())?))?;
    Ok(done(format!(
        "planted city: {} regions, {} communities, {} flow pairs\n",
        net.node_count(),
        cfg.synth.communities,
        city.flows.len()
    )))
}
