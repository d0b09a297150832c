//! Readers for the delimited input tables.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use csv::{ReaderBuilder, StringRecord};
use mobnet_core::region::aggregate_flows;
use mobnet_core::{AttributeTable, FlowRecord, GeoLevel, RegionId};

/// Column layout of an origin-destination file.
#[derive(Debug, Clone, PartialEq)]
pub struct OdSchema {
    pub work_column: String,
    pub home_column: String,
    pub count_column: String,
    pub delimiter: u8,
    /// Without a header the columns are taken by position: work, home, count.
    pub has_header: bool,
    pub geo_level: GeoLevel,
}

impl Default for OdSchema {
    fn default() -> Self {
        Self {
            work_column: "w_geocode".into(),
            home_column: "h_geocode".into(),
            count_column: "S000".into(),
            delimiter: b',',
            has_header: true,
            geo_level: GeoLevel::Tract,
        }
    }
}

/// Parses a region code. Numeric exports often drop the leading zero of
/// single-digit state codes, so a code one digit short is zero-padded.
pub fn parse_region(code: &str, level: GeoLevel) -> mobnet_core::Result<RegionId> {
    let code = code.trim();
    let short = code.len() == GeoLevel::Block.code_len() - 1 || code.len() == GeoLevel::Tract.code_len() - 1;
    if short && code.bytes().all(|b| b.is_ascii_digit()) {
        RegionId::parse(&format!("0{code}"), level)
    } else {
        RegionId::parse(code, level)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn reader<R: Read>(input: R, delimiter: u8) -> csv::Reader<R> {
    ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(delimiter)
        .from_reader(input)
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn column(header: &StringRecord, name: &str, source: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("{source}: line 1: no column named {name:?}"))
}

/// Aggregated flows of an OD file at `schema.geo_level`; origin is the home
/// code, destination the work code.
pub fn parse_od_file(path: &Path, schema: &OdSchema) -> Result<Vec<FlowRecord>> {
    parse_od_reader(open(path)?, schema, &path.display().to_string())
}

pub fn parse_od_reader<R: Read>(input: R, schema: &OdSchema, source: &str) -> Result<Vec<FlowRecord>> {
    let mut rdr = reader(input, schema.delimiter);
    let mut records = rdr.records();
    let (work, home, count) = if schema.has_header {
        let header = match records.next() {
            Some(h) => h.with_context(|| format!("{source}: unreadable header"))?,
            None => bail!("{source}: empty file"),
        };
        (
            column(&header, &schema.work_column, source)?,
            column(&header, &schema.home_column, source)?,
            column(&header, &schema.count_column, source)?,
        )
    } else {
        (0, 1, 2)
    };
    let width = work.max(home).max(count) + 1;
    let mut flows = Vec::new();
    for rec in records {
        let rec = rec.with_context(|| format!("{source}: malformed row"))?;
        let line = line_of(&rec);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() < width {
            bail!("{source}: line {line}: expected at least {width} fields, found {}", rec.len());
        }
        let parse = |i: usize| parse_region(&rec[i], schema.geo_level).map_err(|e| anyhow!("{source}: line {line}: {e}"));
        let n: u64 = rec[count]
            .parse()
            .map_err(|_| anyhow!("{source}: line {line}: count {:?} is not a non-negative integer", &rec[count]))?;
        flows.push(FlowRecord {
            origin: parse(home)?,
            destination: parse(work)?,
            count: n,
        });
    }
    if flows.is_empty() {
        bail!("{source}: empty file, no flow records");
    }
    Ok(aggregate_flows(flows))
}

/// Column layout of a per-region attribute file.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSchema {
    pub region_column: String,
    /// `None` takes every column except the region column.
    pub columns: Option<Vec<String>>,
    pub delimiter: u8,
    /// Rescale each row into proportions summing to one.
    pub proportions: bool,
    /// Values must be strictly positive; others become missing.
    pub require_positive: bool,
}

impl AttributeSchema {
    pub fn new(region_column: &str) -> Self {
        Self {
            region_column: region_column.into(),
            columns: None,
            delimiter: b',',
            proportions: false,
            require_positive: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AttributeLoad {
    pub table: AttributeTable,
    /// Cells that were present but unparsable or out of range.
    pub warnings: usize,
}

pub fn parse_attribute_file(path: &Path, schema: &AttributeSchema) -> Result<AttributeLoad> {
    parse_attribute_reader(open(path)?, schema, &path.display().to_string())
}

pub fn parse_attribute_reader<R: Read>(input: R, schema: &AttributeSchema, source: &str) -> Result<AttributeLoad> {
    let mut rdr = reader(input, schema.delimiter);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h.with_context(|| format!("{source}: unreadable header"))?,
        None => bail!("{source}: empty file"),
    };
    let key = column(&header, &schema.region_column, source)?;
    let names: Vec<String> = match &schema.columns {
        Some(c) => c.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != key)
            .map(|(_, h)| h.to_string())
            .collect(),
    };
    let idx = names.iter().map(|n| column(&header, n, source)).collect::<Result<Vec<_>>>()?;
    let mut table = AttributeTable::new(names);
    let mut warnings = 0;
    for rec in records {
        let rec = rec.with_context(|| format!("{source}: malformed row"))?;
        let line = line_of(&rec);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let region = parse_region(rec.get(key).unwrap_or(""), GeoLevel::Tract)
            .map_err(|e| anyhow!("{source}: line {line}: {e}"))?;
        let values = idx
            .iter()
            .map(|&i| {
                let cell = rec.get(i).unwrap_or("");
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() && (!schema.require_positive || v > 0.0) => Some(v),
                    _ => {
                        warnings += 1;
                        None
                    }
                }
            })
            .collect();
        table
            .insert(region, values)
            .map_err(|e| anyhow!("{source}: line {line}: {e}"))?;
    }
    if schema.proportions {
        table = table.to_proportions();
    }
    Ok(AttributeLoad { table, warnings })
}

/// `geoid,lon,lat` table of region centroids in degrees.
pub fn read_centroids(path: &Path) -> Result<BTreeMap<RegionId, (f64, f64)>> {
    let source = path.display().to_string();
    let mut rdr = reader(open(path)?, b',');
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => bail!("{source}: empty file"),
    };
    let find = |names: &[&str]| {
        header
            .iter()
            .position(|h| names.iter().any(|n| h.eq_ignore_ascii_case(n)))
            .ok_or_else(|| anyhow!("{source}: line 1: no column among {names:?}"))
    };
    let (g, x, y) = (
        find(&["geoid", "region"])?,
        find(&["lon", "longitude", "x"])?,
        find(&["lat", "latitude", "y"])?,
    );
    let mut out = BTreeMap::new();
    for rec in records {
        let rec = rec?;
        let line = line_of(&rec);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| anyhow!("{source}: line {line}: bad coordinate"))
        };
        let region = parse_region(rec.get(g).unwrap_or(""), GeoLevel::Tract)
            .map_err(|e| anyhow!("{source}: line {line}: {e}"))?;
        if out.insert(region.clone(), (num(x)?, num(y)?)).is_some() {
            bail!("{source}: line {line}: duplicate centroid for {region}");
        }
    }
    Ok(out)
}

/// One region code per line; a leading `geoid` header and blank lines are skipped.
pub fn read_universe(path: &Path) -> Result<Vec<RegionId>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let code = line.trim();
        if code.is_empty() || (i == 0 && code.eq_ignore_ascii_case("geoid")) {
            continue;
        }
        out.push(
            parse_region(code, GeoLevel::Tract).map_err(|e| anyhow!("{}: line {}: {e}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn od(text: &str) -> Result<Vec<FlowRecord>> {
        let schema = OdSchema {
            geo_level: GeoLevel::Tract,
            ..OdSchema::default()
        };
        parse_od_reader(text.as_bytes(), &schema, "od.csv")
    }

    #[test]
    fn blocks_aggregate_to_tracts() {
        let f = od("w_geocode,h_geocode,S000\n170310101001000,170310202002000,3\n170310101001001,170310202002999,4\n").unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].count, 7);
        assert_eq!(f[0].origin.as_str(), "17031020200");
        assert_eq!(f[0].destination.as_str(), "17031010100");
    }

    #[test]
    fn errors_name_the_line() {
        let e = od("w_geocode,h_geocode,S000\n17031010100,17031020200,3\n17031010100,17031020200,x\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = od("w_geocode,h_geocode,S000\n1703101010,17031020200,3\n17031010100,170310202,3\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(od("").unwrap_err().to_string().contains("empty"));
        assert!(od("w_geocode,h_geocode,S000\n").unwrap_err().to_string().contains("empty"));
    }

    #[test]
    fn headerless_and_custom_columns() {
        let schema = OdSchema {
            has_header: false,
            delimiter: b'\t',
            ..OdSchema::default()
        };
        let f = parse_od_reader("17031010100\t17031020200\t5\n".as_bytes(), &schema, "x").unwrap();
        assert_eq!(f[0].count, 5);
        let schema = OdSchema {
            work_column: "work".into(),
            home_column: "home".into(),
            count_column: "jobs".into(),
            ..OdSchema::default()
        };
        let f = parse_od_reader("jobs,home,work\n2,17031020200,17031010100\n".as_bytes(), &schema, "x").unwrap();
        assert_eq!(f[0].origin.as_str(), "17031020200");
    }

    #[test]
    fn dropped_leading_zero_is_restored() {
        assert_eq!(parse_region("6037101110", GeoLevel::Tract).unwrap().as_str(), "06037101110");
        assert_eq!(parse_region("60371011101000", GeoLevel::Tract).unwrap().as_str(), "06037101110");
    }

    #[test]
    fn attribute_missing_values_are_flagged() {
        let schema = AttributeSchema {
            require_positive: true,
            ..AttributeSchema::new("geoid")
        };
        let text = "geoid,median_income\n17031010100,50000\n17031010200,N/A\n17031010300,-666666666\n17031010400,72000\n";
        let load = parse_attribute_reader(text.as_bytes(), &schema, "inc").unwrap();
        assert_eq!(load.table.len(), 4);
        assert_eq!(load.warnings, 2);
        let b = RegionId::parse("17031010200", GeoLevel::Tract).unwrap();
        assert_eq!(load.table.get(&b, 0), None);
        let dup = "geoid,median_income\n17031010100,1\n17031010100,2\n";
        assert!(parse_attribute_reader(dup.as_bytes(), &schema, "inc").unwrap_err().to_string().contains("line 3"));
    }

    #[test]
    fn proportions_sum_to_one() {
        let schema = AttributeSchema {
            proportions: true,
            ..AttributeSchema::new("geoid")
        };
        let text = "geoid,noise,heat,graffiti\n17031010100,2,3,5\n17031010200,0,0,0\n";
        let load = parse_attribute_reader(text.as_bytes(), &schema, "311").unwrap();
        let a = RegionId::parse("17031010100", GeoLevel::Tract).unwrap();
        let total: f64 = (0..3).map(|c| load.table.get(&a, c).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let b = RegionId::parse("17031010200", GeoLevel::Tract).unwrap();
        assert_eq!(load.table.get(&b, 0), None);
    }
}
