//! Planted-community synthetic cities with known structure and income.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{build_network, MobilityNetwork};
use crate::math;
use crate::nn::seeded_rng;
use crate::region::{AttributeTable, FlowRecord, GeoLevel, RegionId};

pub const INCOME_COLUMN: &str = "median_income";

/// Generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCitySpec {
    pub nodes: usize,
    pub communities: usize,
    /// Poisson mean of each within-community pair (self-pairs included).
    pub lambda_in: f64,
    /// Poisson mean of each across-community pair.
    pub lambda_out: f64,
    /// Income of community 0; community `c` adds `c * income_gap`.
    pub base_income: f64,
    pub income_gap: f64,
    /// Income added per unit of normalized east-west position in `[-1, 1]`.
    pub spatial_gradient: f64,
    /// Standard deviation of the gaussian income noise.
    pub noise_sd: f64,
    /// Number of extra gaussian attribute columns unrelated to anything.
    pub noise_features: usize,
    /// Centre `(lon, lat)` and half-width in degrees of the city box.
    pub center: (f64, f64),
    pub extent: f64,
    /// 0 places every node at its community's anchor, 1 scatters nodes
    /// uniformly over the box regardless of community.
    pub spatial_mixing: f64,
    /// 5-digit state+county prefix of the generated tract codes.
    pub county: String,
}

impl Default for PlantedCitySpec {
    fn default() -> Self {
        Self {
            nodes: 60,
            communities: 2,
            lambda_in: 5.0,
            lambda_out: 0.2,
            base_income: 50_000.0,
            income_gap: 30_000.0,
            spatial_gradient: 0.0,
            noise_sd: 3_000.0,
            noise_features: 3,
            center: (-87.65, 41.85),
            extent: 0.25,
            spatial_mixing: 0.5,
            county: "99999".into(),
        }
    }
}

impl PlantedCitySpec {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 10 {
            return Err(Error::invalid(format!("planted city needs >= 10 nodes, got {}", self.nodes)));
        }
        if self.communities < 2 || self.communities > self.nodes {
            return Err(Error::invalid(format!(
                "community count {} must lie in 2..={}",
                self.communities, self.nodes
            )));
        }
        if !(self.lambda_out >= 0.0 && self.lambda_in > self.lambda_out && self.lambda_in.is_finite()) {
            return Err(Error::invalid(format!(
                "rates must satisfy lambda_in > lambda_out >= 0, got {} and {}",
                self.lambda_in, self.lambda_out
            )));
        }
        if !(self.noise_sd >= 0.0) || !(0.0..=1.0).contains(&self.spatial_mixing) {
            return Err(Error::invalid("noise_sd must be >= 0 and spatial_mixing in [0, 1]"));
        }
        if self.county.len() != 5 || !self.county.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::invalid(format!("county prefix {:?} must be 5 digits", self.county)));
        }
        if self.nodes > 999_999 {
            return Err(Error::invalid("at most 999999 nodes"));
        }
        Ok(())
    }
}

/// A generated city. Vectors are indexed by network node.
#[derive(Debug, Clone)]
pub struct PlantedCity {
    pub network: MobilityNetwork,
    pub flows: Vec<FlowRecord>,
    /// `median_income` column.
    pub income: AttributeTable,
    /// `noise_0..` columns; empty table when `noise_features` is 0.
    pub features: AttributeTable,
    pub centroids: BTreeMap<RegionId, (f64, f64)>,
    pub communities: Vec<usize>,
}

impl PlantedCity {
    pub fn income_values(&self) -> Vec<f64> {
        self.income
            .aligned_column(&self.network, 0)
            .into_iter()
            .map(|v| v.unwrap_or(f64::NAN))
            .collect()
    }
}

/// Tract code of node `i` under `county`.
pub fn synthetic_region(county: &str, i: usize) -> Result<RegionId> {
    RegionId::parse(&format!("{county}{:06}", i + 1), GeoLevel::Tract)
}

/// Draws the city. Same spec and seed give the same city.
pub fn generate(spec: &PlantedCitySpec, seed: u64) -> Result<PlantedCity> {
    spec.validate()?;
    let mut rng = seeded_rng(seed);
    let n = spec.nodes;
    let c = spec.communities;

    let mut communities: Vec<usize> = (0..n).map(|i| i % c).collect();
    communities.shuffle(&mut rng);
    let regions = (0..n)
        .map(|i| synthetic_region(&spec.county, i))
        .collect::<Result<Vec<_>>>()?;

    let mut flows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let lambda = if communities[i] == communities[j] {
                spec.lambda_in
            } else {
                spec.lambda_out
            };
            let count = poisson(lambda, &mut rng);
            if count > 0 {
                flows.push(FlowRecord {
                    origin: regions[i].clone(),
                    destination: regions[j].clone(),
                    count,
                });
            }
        }
    }

    let mut centroids = BTreeMap::new();
    let mut east = vec![0.0; n];
    for i in 0..n {
        let angle = 2.0 * PI * communities[i] as f64 / c as f64;
        let anchor = (0.5 * math::cos(angle), 0.5 * math::sin(angle));
        let scatter = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        let jitter = (rng.gen_range(-0.15..=0.15), rng.gen_range(-0.15..=0.15));
        let m = spec.spatial_mixing;
        let x = ((1.0 - m) * anchor.0 + m * scatter.0 + jitter.0).clamp(-1.0, 1.0);
        let y = ((1.0 - m) * anchor.1 + m * scatter.1 + jitter.1).clamp(-1.0, 1.0);
        east[i] = x;
        centroids.insert(
            regions[i].clone(),
            (spec.center.0 + spec.extent * x, spec.center.1 + spec.extent * y),
        );
    }

    let mut income = AttributeTable::new(vec![INCOME_COLUMN.into()]);
    for i in 0..n {
        let value = spec.base_income
            + spec.income_gap * communities[i] as f64
            + spec.spatial_gradient * east[i]
            + spec.noise_sd * gaussian(&mut rng);
        income.insert(regions[i].clone(), vec![Some(value)])?;
    }

    let names: Vec<String> = (0..spec.noise_features).map(|k| format!("noise_{k}")).collect();
    let mut features = AttributeTable::new(names);
    if spec.noise_features > 0 {
        for r in &regions {
            let row = (0..spec.noise_features).map(|_| Some(gaussian(&mut rng))).collect();
            features.insert(r.clone(), row)?;
        }
    }

    let network = build_network(&flows, Some(&regions))?.network;
    Ok(PlantedCity {
        network,
        flows,
        income,
        features,
        centroids,
        communities,
    })
}

/// Poisson draw.
pub fn poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive finite rate").sample(rng) as u64
}

/// Standard normal draw.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
