//! Region identifiers, commute flow records and per-region attribute tables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::graph::MobilityNetwork;

/// Census geography granularity of a region code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GeoLevel {
    /// 15-digit census block code.
    Block,
    /// 11-digit census tract code.
    Tract,
}

impl GeoLevel {
    pub const fn code_len(self) -> usize {
        match self {
            GeoLevel::Block => 15,
            GeoLevel::Tract => 11,
        }
    }
}

/// Decimal GEOID of a census region (11 digits for a tract, 15 for a block).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegionId(String);

impl RegionId {
    /// Parses a code and brings it to `level`. Block codes are truncated to
    /// their leading 11 digits when `level` is [`GeoLevel::Tract`].
    pub fn parse(code: &str, level: GeoLevel) -> Result<Self> {
        let code = code.trim();
        if code.is_empty() || !code.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::invalid(alloc::format!(
                "region code {code:?} is not all-numeric"
            )));
        }
        match (level, code.len()) {
            (GeoLevel::Block, 15) | (GeoLevel::Tract, 11) => Ok(Self(code.to_string())),
            (GeoLevel::Tract, 15) => Ok(Self(code[..11].to_string())),
            (_, len) => Err(Error::invalid(alloc::format!(
                "region code {code:?} has {len} digits, expected {} for {level:?}",
                level.code_len()
            ))),
        }
    }

    /// A tract id; identity on an 11-digit code.
    pub fn to_tract(&self) -> RegionId {
        RegionId(self.0[..GeoLevel::Tract.code_len()].to_string())
    }

    pub fn level(&self) -> GeoLevel {
        if self.0.len() == 15 {
            GeoLevel::Block
        } else {
            GeoLevel::Tract
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Daily commuters from a home region to a work region.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FlowRecord {
    pub origin: RegionId,
    pub destination: RegionId,
    pub count: u64,
}

/// Sums records sharing an `(origin, destination)` pair. Output is sorted by
/// `(origin, destination)`.
pub fn aggregate_flows(records: impl IntoIterator<Item = FlowRecord>) -> Vec<FlowRecord> {
    let mut acc: BTreeMap<(RegionId, RegionId), u64> = BTreeMap::new();
    for r in records {
        *acc.entry((r.origin, r.destination)).or_insert(0) += r.count;
    }
    acc.into_iter()
        .map(|((origin, destination), count)| FlowRecord {
            origin,
            destination,
            count,
        })
        .collect()
}

/// One region's attribute values; `None` marks a missing entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeRow {
    pub values: Vec<Option<f64>>,
    /// Set by [`AttributeTable::mark_network`]; `None` until then.
    pub in_network: Option<bool>,
}

/// Named real-valued columns keyed by region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeTable {
    columns: Vec<String>,
    rows: BTreeMap<RegionId, AttributeRow>,
}

impl AttributeTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: BTreeMap::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Missing(alloc::format!("attribute column {name:?}")))
    }

    /// Adds a region row. A second row for the same region is an error.
    pub fn insert(&mut self, region: RegionId, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.columns.len() {
            return Err(Error::shape(
                alloc::format!("attribute row for {region}"),
                self.columns.len(),
                values.len(),
            ));
        }
        if self.rows.contains_key(&region) {
            return Err(Error::Duplicate(alloc::format!("region {region}")));
        }
        self.rows.insert(
            region,
            AttributeRow {
                values: values
                    .into_iter()
                    .map(|v| v.filter(|x| x.is_finite()))
                    .collect(),
                in_network: None,
            },
        );
        Ok(())
    }

    pub fn get(&self, region: &RegionId, column: usize) -> Option<f64> {
        self.rows.get(region).and_then(|r| r.values[column])
    }

    pub fn row(&self, region: &RegionId) -> Option<&AttributeRow> {
        self.rows.get(region)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&RegionId, &AttributeRow)> {
        self.rows.iter()
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionId> {
        self.rows.keys()
    }

    /// Rescales every row so its values sum to one (category proportions).
    /// Rows with a missing entry or a zero total become all-missing.
    pub fn to_proportions(&self) -> AttributeTable {
        let rows = self
            .rows
            .iter()
            .map(|(k, row)| {
                let total: Option<f64> = row.values.iter().copied().sum();
                let values = match total {
                    Some(t) if t > 0.0 => row.values.iter().map(|v| v.map(|x| x / t)).collect(),
                    _ => row.values.iter().map(|_| None).collect(),
                };
                (
                    k.clone(),
                    AttributeRow {
                        values,
                        in_network: row.in_network,
                    },
                )
            })
            .collect();
        AttributeTable {
            columns: self.columns.clone(),
            rows,
        }
    }

    /// Flags each row by whether its region is a node of `net`; returns the
    /// regions absent from the network.
    pub fn mark_network(&mut self, net: &MobilityNetwork) -> Vec<RegionId> {
        let mut absent = Vec::new();
        for (region, row) in self.rows.iter_mut() {
            let present = net.index_of(region).is_some();
            row.in_network = Some(present);
            if !present {
                absent.push(region.clone());
            }
        }
        absent
    }

    /// One column aligned to the network's node order; nodes without a row
    /// or with a missing value yield `None`.
    pub fn aligned_column(&self, net: &MobilityNetwork, column: usize) -> Vec<Option<f64>> {
        net.regions()
            .iter()
            .map(|r| self.get(r, column))
            .collect()
    }

    /// Several columns aligned to node order; a node is `None` if any of the
    /// requested columns is missing.
    pub fn aligned_rows(&self, net: &MobilityNetwork, columns: &[usize]) -> Vec<Option<Vec<f64>>> {
        net.regions()
            .iter()
            .map(|r| columns.iter().map(|&c| self.get(r, c)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rid(s: &str) -> RegionId {
        RegionId::parse(s, GeoLevel::Tract).unwrap()
    }

    #[test]
    fn block_codes_truncate_to_tract() {
        let r = RegionId::parse("360610001001000", GeoLevel::Tract).unwrap();
        assert_eq!(r.as_str(), "36061000100");
        assert_eq!(r.to_tract(), r);
        let b = RegionId::parse("360610001001000", GeoLevel::Block).unwrap();
        assert_eq!(b.level(), GeoLevel::Block);
        assert_eq!(b.to_tract(), r);
    }

    #[test]
    fn bad_codes_are_rejected() {
        assert!(RegionId::parse("3606100010", GeoLevel::Tract).is_err());
        assert!(RegionId::parse("36061000100", GeoLevel::Block).is_err());
        assert!(RegionId::parse("3606100010x", GeoLevel::Tract).is_err());
        assert!(RegionId::parse("", GeoLevel::Tract).is_err());
    }

    #[test]
    fn aggregation_sums_identical_pairs() {
        let a = RegionId::parse("360610001001000", GeoLevel::Tract).unwrap();
        let a2 = RegionId::parse("360610001001001", GeoLevel::Tract).unwrap();
        let b = RegionId::parse("360610002001000", GeoLevel::Tract).unwrap();
        let out = aggregate_flows(vec![
            FlowRecord { origin: a.clone(), destination: b.clone(), count: 3 },
            FlowRecord { origin: a2, destination: b.clone(), count: 4 },
        ]);
        assert_eq!(out, vec![FlowRecord { origin: a, destination: b, count: 7 }]);
    }

    #[test]
    fn duplicate_rows_rejected() {
        let mut t = AttributeTable::new(vec!["median_income".into()]);
        t.insert(rid("36061000100"), vec![Some(50000.0)]).unwrap();
        t.insert(rid("36061000200"), vec![Some(72000.0)]).unwrap();
        assert_eq!(t.len(), 2);
        assert!(matches!(
            t.insert(rid("36061000100"), vec![Some(1.0)]),
            Err(Error::Duplicate(_))
        ));
    }

    #[test]
    fn proportions_sum_to_one() {
        let mut t = AttributeTable::new(vec!["noise".into(), "heat".into(), "rodent".into()]);
        t.insert(rid("36061000100"), vec![Some(3.0), Some(1.0), Some(6.0)]).unwrap();
        t.insert(rid("36061000200"), vec![Some(0.0), Some(0.0), Some(0.0)]).unwrap();
        let p = t.to_proportions();
        let row = p.row(&rid("36061000100")).unwrap();
        let s: f64 = row.values.iter().map(|v| v.unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(row.values[0], Some(0.3));
        assert!(p.row(&rid("36061000200")).unwrap().values.iter().all(Option::is_none));
    }
}
