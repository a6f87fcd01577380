//! Seeded synthetic worlds with a known scaling law.
//!
//! Cities are non-overlapping rectangles aligned to grid cell edges. Each
//! city draws a population `N` and a total property `Y = y0 * N^beta * e^eps`,
//! which is spread over the city's cells with random positive weights. Every
//! cell is also emitted as a point at its center, so both query paths see the
//! same data.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CityMeta, PointRecord};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, PolygonBoundary, Ring};
use crate::raster::{CellIndex, CellRecord, GridSpec};
use crate::rng::stream;

const BLOCK_PITCH: usize = 8;
const TOP_LAT: f64 = 50.0;
const LEFT_LON: f64 = 0.0;
const DEVELOPED_COUNTRIES: [&str; 8] = ["AA", "AB", "AC", "AD", "AE", "AF", "AG", "AH"];
const LOW_INCOME_COUNTRIES: [&str; 4] = ["ZA", "ZB", "ZC", "ZD"];

fn default_cell_size() -> f64 {
    0.01
}

/// A second population of cities living in low-GDP countries, with a
/// depressed normalization and skewed towards large populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowIncomeCohort {
    /// Fraction of cities assigned to the cohort.
    pub share: f64,
    /// Multiplier applied to `y0` for cohort cities.
    pub y0_factor: f64,
    /// Cohort populations are log-uniform in `[10^min_log10_pop, 10^7]`.
    pub min_log10_pop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_cities: usize,
    pub beta_true: f64,
    pub y0: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    #[serde(default)]
    pub low_income: Option<LowIncomeCohort>,
}

impl SynthConfig {
    pub fn new(n_cities: usize, beta_true: f64, y0: f64, noise_sigma: f64, seed: u64) -> Self {
        Self {
            n_cities,
            beta_true,
            y0,
            noise_sigma,
            seed,
            cell_size: default_cell_size(),
            low_income: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_cities < 2 {
            return bad(format!("n_cities must be at least 2, got {}", self.n_cities));
        }
        if !(self.y0.is_finite() && self.y0 > 0.0) {
            return bad(format!("y0 must be positive, got {}", self.y0));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if !self.beta_true.is_finite() {
            return bad("beta_true must be finite".into());
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return bad(format!("cell_size must be positive, got {}", self.cell_size));
        }
        if let Some(c) = &self.low_income {
            if !(c.share > 0.0 && c.share < 1.0) {
                return bad(format!("low-income share must be in (0, 1), got {}", c.share));
            }
            if !(c.y0_factor.is_finite() && c.y0_factor > 0.0) {
                return bad(format!("low-income y0_factor must be positive, got {}", c.y0_factor));
            }
            if !(3.0..7.0).contains(&c.min_log10_pop) {
                return bad(format!(
                    "low-income min_log10_pop must be in [3, 7), got {}",
                    c.min_log10_pop
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerCity {
    pub id: String,
    pub population: f64,
    pub property: f64,
    pub low_income: bool,
    pub n_cells: usize,
}

/// The generator's record of what it drew.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLedger {
    pub config: SynthConfig,
    pub cities: Vec<LedgerCity>,
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub spec: GridSpec,
    pub boundaries: Vec<PolygonBoundary>,
    /// One point per cell, at the cell center, in row-major cell order.
    pub points: Vec<PointRecord>,
    pub cells: Vec<CellRecord>,
    pub catalog: Vec<CityMeta>,
    pub gdp: BTreeMap<String, f64>,
    pub ledger: SynthLedger,
}

fn log_uniform<R: Rng>(rng: &mut R, lo_log10: f64, hi_log10: f64) -> f64 {
    10f64.powf(rng.random_range(lo_log10..hi_log10))
}

fn side_cells(population: f64) -> usize {
    (3 + (population.log10() - 3.0).floor().max(0.0) as usize).min(BLOCK_PITCH - 1)
}

pub fn generate_synthetic_world(config: &SynthConfig) -> Result<SyntheticWorld> {
    config.validate()?;
    let n = config.n_cities;
    let per_row = (n as f64).sqrt().ceil() as usize;
    let block_rows = n.div_ceil(per_row);
    let spec = GridSpec::new(
        TOP_LAT,
        LEFT_LON,
        config.cell_size,
        block_rows * BLOCK_PITCH,
        per_row * BLOCK_PITCH,
    )
    .map_err(|e| Error::InvalidConfig(format!("{n} cities do not fit on the globe at this cell size: {e}")))?;

    let mut gdp_rng = stream(config.seed, "gdp");
    let mut gdp = BTreeMap::new();
    for c in DEVELOPED_COUNTRIES {
        gdp.insert(
            c.to_string(),
            log_uniform(&mut gdp_rng, 5000f64.log10(), 60000f64.log10()),
        );
    }
    if config.low_income.is_some() {
        for c in LOW_INCOME_COUNTRIES {
            gdp.insert(
                c.to_string(),
                log_uniform(&mut gdp_rng, 400f64.log10(), 2900f64.log10()),
            );
        }
    }

    let mut cohort_rng = stream(config.seed, "cohort");
    let mut pop_rng = stream(config.seed, "population");
    let mut noise_rng = stream(config.seed, "noise");
    let mut country_rng = stream(config.seed, "country");
    let mut weight_rng = stream(config.seed, "weights");

    let width = (n - 1).to_string().len();
    let mut boundaries = Vec::with_capacity(n);
    let mut catalog = Vec::with_capacity(n);
    let mut ledger_cities = Vec::with_capacity(n);
    let mut cells = Vec::new();

    for i in 0..n {
        let low_income = config
            .low_income
            .as_ref()
            .filter(|c| cohort_rng.random::<f64>() < c.share);
        let (population, y0, countries): (f64, f64, &[&str]) = match low_income {
            Some(c) => (
                log_uniform(&mut pop_rng, c.min_log10_pop, 7.0),
                config.y0 * c.y0_factor,
                &LOW_INCOME_COUNTRIES,
            ),
            None => (log_uniform(&mut pop_rng, 3.0, 7.0), config.y0, &DEVELOPED_COUNTRIES),
        };
        let eps: f64 = noise_rng.sample::<f64, _>(StandardNormal) * config.noise_sigma;
        let property = y0 * population.powf(config.beta_true) * eps.exp();
        let country = countries[country_rng.random_range(0..countries.len())].to_string();

        let side = side_cells(population);
        let row0 = (i / per_row) * BLOCK_PITCH;
        let col0 = (i % per_row) * BLOCK_PITCH;
        let lat_top = spec.top_lat - row0 as f64 * spec.cell_size;
        let lat_bottom = spec.top_lat - (row0 + side) as f64 * spec.cell_size;
        let lon_left = spec.left_lon + col0 as f64 * spec.cell_size;
        let lon_right = spec.left_lon + (col0 + side) as f64 * spec.cell_size;
        let ring = Ring::new(vec![
            GeoPoint::new(lat_bottom, lon_left)?,
            GeoPoint::new(lat_bottom, lon_right)?,
            GeoPoint::new(lat_top, lon_right)?,
            GeoPoint::new(lat_top, lon_left)?,
        ])?;
        let id = format!("c{i:0width$}");
        boundaries.push(PolygonBoundary::new(
            id.clone(),
            format!("City {i}"),
            Some(country.clone()),
            vec![ring],
        )?);

        let weights: Vec<f64> = (0..side * side).map(|_| weight_rng.random_range(0.5..1.5)).collect();
        let total: f64 = weights.iter().sum();
        for (k, w) in weights.iter().enumerate() {
            cells.push(CellRecord {
                cell: CellIndex::new(row0 + k / side, col0 + k % side),
                value: property * w / total,
            });
        }

        catalog.push(CityMeta {
            id: id.clone(),
            name: format!("City {i}"),
            gdp_per_capita: gdp.get(&country).copied(),
            country: Some(country),
            population: Some(population),
        });
        ledger_cities.push(LedgerCity {
            id,
            population,
            property,
            low_income: low_income.is_some(),
            n_cells: side * side,
        });
    }

    cells.sort_by_key(|c| c.cell);
    let points = cells
        .iter()
        .map(|c| {
            Ok(PointRecord {
                location: crate::raster::center_of(c.cell, &spec)?,
                value: c.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticWorld {
        spec,
        boundaries,
        points,
        cells,
        catalog,
        gdp,
        ledger: SynthLedger {
            config: config.clone(),
            cities: ledger_cities,
        },
    })
}
