//! Output file formats: edge list, embedding table, cluster labels,
//! checkpoint container and run reports.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use mobnet_core::embeddings::{EmbeddingMatrix, EmbeddingMethod};
use mobnet_core::eval::{CellOutcome, CellResult};
use mobnet_core::graph::build_network;
use mobnet_core::nn::ModelParams;
use mobnet_core::{FlowRecord, GeoLevel, Matrix, MobilityNetwork, RegionId};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Canonical edge list `origin,destination,count` sorted by region pair.
/// A node without any flow is written as a zero-count self row so the
/// node set survives the round trip.
pub fn write_edge_list<W: Write>(net: &MobilityNetwork, out: W) -> Result<()> {
    let mut rows: Vec<(&RegionId, &RegionId, u64)> = Vec::new();
    let mut touched = vec![false; net.node_count()];
    for (i, j, w) in net.edges() {
        if w.fract() != 0.0 || w < 0.0 {
            bail!("edge {} -> {} has non-integer weight {w}", net.region(i), net.region(j));
        }
        touched[i] = true;
        touched[j] = true;
        rows.push((net.region(i), net.region(j), w as u64));
    }
    for (i, t) in touched.iter().enumerate() {
        if !t {
            rows.push((net.region(i), net.region(i), 0));
        }
    }
    rows.sort();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["origin", "destination", "count"])?;
    for (o, d, c) in rows {
        w.write_record([o.as_str(), d.as_str(), &c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_edge_list<R: Read>(input: R) -> Result<MobilityNetwork> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut flows = Vec::new();
    let mut regions = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            bail!("edge list line {line}: expected 3 fields");
        }
        let o = RegionId::parse(&rec[0], GeoLevel::Tract).map_err(|e| anyhow!("edge list line {line}: {e}"))?;
        let d = RegionId::parse(&rec[1], GeoLevel::Tract).map_err(|e| anyhow!("edge list line {line}: {e}"))?;
        let count: u64 = rec[2].parse().map_err(|_| anyhow!("edge list line {line}: bad count"))?;
        regions.push(o.clone());
        regions.push(d.clone());
        if count > 0 {
            flows.push(FlowRecord { origin: o, destination: d, count });
        }
    }
    Ok(build_network(&flows, Some(&regions))?.network)
}

/// `# method=<name> d=<width>` then `geoid,dim_0,..` in node order.
pub fn write_embedding<W: Write>(regions: &[RegionId], emb: &EmbeddingMatrix, mut out: W) -> Result<()> {
    if regions.len() != emb.rows() {
        bail!("embedding has {} rows for {} regions", emb.rows(), regions.len());
    }
    writeln!(out, "# method={} d={}", emb.method().name(), emb.dim())?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["geoid".to_string()];
    header.extend((0..emb.dim()).map(|c| format!("dim_{c}")));
    w.write_record(&header)?;
    for (i, r) in regions.iter().enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend(emb.values().row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embedding<R: BufRead>(mut input: R) -> Result<(Vec<RegionId>, EmbeddingMatrix)> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let method = first
        .trim()
        .strip_prefix('#')
        .into_iter()
        .flat_map(str::split_whitespace)
        .find_map(|kv| kv.strip_prefix("method="))
        .and_then(EmbeddingMethod::from_name)
        .ok_or_else(|| anyhow!("embedding file lacks a `# method=` line"))?;
    let mut rdr = csv::Reader::from_reader(input);
    let mut regions = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        regions.push(RegionId::parse(&rec[0], GeoLevel::Tract)?);
        rows.push(
            rec.iter()
                .skip(1)
                .map(|v| v.parse::<f64>().context("embedding value"))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let refs: Vec<&Vec<f64>> = rows.iter().collect();
    Ok((regions, EmbeddingMatrix::new(Matrix::from_rows(&refs)?, method)))
}

/// `geoid,cluster[,median_income]` rows in node order.
pub fn write_cluster_csv<W: Write>(regions: &[RegionId], labels: &[usize], income: Option<&[Option<f64>]>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if income.is_some() {
        w.write_record(["geoid", "cluster", "median_income"])?;
    } else {
        w.write_record(["geoid", "cluster"])?;
    }
    for (i, r) in regions.iter().enumerate() {
        let mut rec = vec![r.to_string(), labels[i].to_string()];
        if let Some(inc) = income {
            rec.push(inc[i].map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Point features at region centroids carrying the cluster label. Regions
/// without a centroid are omitted.
pub fn cluster_geojson(
    regions: &[RegionId],
    labels: &[usize],
    income: Option<&[Option<f64>]>,
    centroids: &BTreeMap<RegionId, (f64, f64)>,
) -> Value {
    let features: Vec<Value> = regions
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let (lon, lat) = centroids.get(r)?;
            let mut props = json!({ "geoid": r.as_str(), "cluster": labels[i] });
            if let Some(inc) = income {
                props["median_income"] = inc[i].map_or(Value::Null, |v| json!(v));
            }
            Some(json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [lon, lat] },
                "properties": props,
            }))
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

const CHECKPOINT_MAGIC: &str = "# mobnet checkpoint v1";

/// Text container: a `tensor <name> <rows> <cols>` line per parameter
/// followed by one line per row. Values use shortest round-trip formatting.
pub fn write_checkpoint<W: Write>(params: &ModelParams, mut out: W) -> Result<()> {
    writeln!(out, "{CHECKPOINT_MAGIC}")?;
    for (name, m) in params.iter() {
        if name.chars().any(char::is_whitespace) {
            bail!("parameter name {name:?} contains whitespace");
        }
        writeln!(out, "tensor {name} {} {}", m.rows(), m.cols())?;
        for r in 0..m.rows() {
            let line: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<ModelParams> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == CHECKPOINT_MAGIC => {}
        _ => bail!("not a checkpoint file"),
    }
    let mut params = ModelParams::new();
    while let Some((n, line)) = lines.next() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [tag, name, rows, cols] = parts[..] else {
            bail!("checkpoint line {}: expected `tensor <name> <rows> <cols>`", n + 1);
        };
        if tag != "tensor" {
            bail!("checkpoint line {}: expected `tensor`", n + 1);
        }
        let (rows, cols): (usize, usize) = (rows.parse()?, cols.parse()?);
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, line) = lines.next().ok_or_else(|| anyhow!("checkpoint truncated in {name}"))?;
            let row = line?
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<f64>, _>>()
                .with_context(|| format!("checkpoint line {}", n + 1))?;
            if row.len() != cols {
                bail!("checkpoint line {}: {} values, expected {cols}", n + 1, row.len());
            }
            values.extend(row);
        }
        params.add(name, Matrix::from_vec(rows, cols, values)?)?;
    }
    Ok(params)
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub city: String,
    pub method: String,
    pub init: Option<String>,
    pub d: usize,
    pub seeds: Vec<u64>,
    pub r2: Vec<f64>,
    pub r2_mean: Option<f64>,
    pub r2_halfwidth: Option<f64>,
    /// `ok`, `na` or `failed`.
    pub status: String,
    pub message: Option<String>,
}

impl ReportRow {
    pub fn from_cell(city: &str, result: &CellResult) -> Self {
        let (status, message) = match &result.outcome {
            CellOutcome::Done(_) => ("ok", None),
            CellOutcome::NotAvailable(m) => ("na", Some(m.clone())),
            CellOutcome::Failed(m) => ("failed", Some(m.clone())),
        };
        let summary = result.summary();
        Self {
            city: city.to_string(),
            method: result.cell.method.name().to_string(),
            init: result.cell.init.map(|i| i.name().to_string()),
            d: result.cell.d,
            seeds: result.runs.iter().map(|r| r.seed).collect(),
            r2: result.runs.iter().map(|r| r.r2).collect(),
            r2_mean: summary.map(|s| s.mean),
            r2_halfwidth: summary.map(|s| s.half_width),
            status: status.to_string(),
            message,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub fn write_report_json<W: Write>(rows: &[ReportRow], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}

pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["city", "method", "init", "d", "seeds", "r2_mean", "r2_halfwidth", "status"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
    for r in rows {
        let seeds: Vec<String> = r.seeds.iter().map(u64::to_string).collect();
        w.write_record([
            r.city.as_str(),
            r.method.as_str(),
            r.init.as_deref().unwrap_or("-"),
            &r.d.to_string(),
            &seeds.join(";"),
            &opt(r.r2_mean),
            &opt(r.r2_halfwidth),
            r.status.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rid(i: usize) -> RegionId {
        RegionId::parse(&format!("17031{i:06}"), GeoLevel::Tract).unwrap()
    }

    #[test]
    fn isolated_nodes_survive_edge_list() {
        let w = Matrix::from_vec(3, 3, vec![0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let net = MobilityNetwork::from_dense(vec![rid(1), rid(2), rid(3)], &w).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("17031000003,17031000003,0"), "{text}");
        let back = read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back.regions(), net.regions());
        assert_eq!(back.to_dense(), net.to_dense());
    }

    #[test]
    fn embedding_round_trip() {
        let m = Matrix::from_vec(2, 2, vec![0.1, -1.5e-17, 3.0, 1.0 / 3.0]).unwrap();
        let emb = EmbeddingMatrix::new(m.clone(), EmbeddingMethod::Svd);
        let mut buf = Vec::new();
        write_embedding(&[rid(1), rid(2)], &emb, &mut buf).unwrap();
        assert!(buf.starts_with(b"# method=svd d=2\ngeoid,dim_0,dim_1\n"));
        let (regions, back) = read_embedding(buf.as_slice()).unwrap();
        assert_eq!(regions, vec![rid(1), rid(2)]);
        assert_eq!(back.values(), &m);
    }

    #[test]
    fn geojson_points_carry_clusters() {
        let centroids: BTreeMap<_, _> = [(rid(1), (-87.6, 41.8))].into_iter().collect();
        let g = cluster_geojson(&[rid(1), rid(2)], &[1, 0], Some(&[Some(5.0), None]), &centroids);
        let f = &g["features"];
        assert_eq!(f.as_array().unwrap().len(), 1);
        assert_eq!(f[0]["properties"]["cluster"], 1);
        assert_eq!(f[0]["geometry"]["coordinates"][1], 41.8);
    }
}
