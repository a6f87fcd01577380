//! Canonical on-disk tables: boundary catalogs (JSON lines), point, cell,
//! edge, GDP and city catalog CSVs, and the grid-spec sidecar.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{CityMeta, EdgeRecord, PointRecord};
use crate::engine::{AggregateKind, CityAggregate};
use crate::error::{Error, Result};
use crate::geo::{GeoPoint, PolygonBoundary, Ring};
use crate::raster::{CellIndex, CellRecord, GridSpec};

/// Formats a coordinate with at most nine decimals and no trailing zeros.
pub fn fmt_coord(v: f64) -> String {
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn line_of(pos: Option<&csv::Position>) -> usize {
    pos.map_or(0, |p| p.line() as usize)
}

fn row_err(record: &csv::StringRecord, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line_of(record.position()),
        message: message.into(),
    }
}

fn expect_headers<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn field_f64(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| row_err(record, format!("column `{name}`: `{raw}` is not a finite number")))
}

fn field_opt_f64(record: &csv::StringRecord, idx: usize, name: &str) -> Result<Option<f64>> {
    match record.get(idx).map(str::trim) {
        None | Some("") => Ok(None),
        Some(_) => field_f64(record, idx, name).map(Some),
    }
}

fn field_point(record: &csv::StringRecord, lat_idx: usize, lon_idx: usize) -> Result<GeoPoint> {
    let lat = field_f64(record, lat_idx, "lat")?;
    let lon = field_f64(record, lon_idx, "lon")?;
    GeoPoint::new(lat, lon).map_err(|e| row_err(record, e.to_string()))
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

#[derive(Serialize, Deserialize)]
struct BoundaryLine {
    id: String,
    #[serde(default)]
    name: String,
    #[serde(default)]
    country: Option<String>,
    rings: Vec<Vec<[f64; 2]>>,
}

/// Reads a JSON-lines boundary catalog, `{"id","name","country","rings"}` per
/// line with `[lat, lon]` vertices.
pub fn read_boundary_catalog<R: BufRead>(reader: R) -> Result<Vec<PolygonBoundary>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: idx + 1, message };
        let entry: BoundaryLine = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if !seen.insert(entry.id.clone()) {
            return Err(err(format!("duplicate boundary id `{}`", entry.id)));
        }
        let mut rings = Vec::with_capacity(entry.rings.len());
        for ring in entry.rings {
            let vertices = ring
                .iter()
                .map(|&[lat, lon]| GeoPoint::new(lat, lon))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| err(e.to_string()))?;
            rings.push(Ring::new(vertices).map_err(|e| err(e.to_string()))?);
        }
        out.push(PolygonBoundary::new(entry.id, entry.name, entry.country, rings).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_boundary_catalog<W: Write>(mut w: W, boundaries: &[PolygonBoundary]) -> Result<()> {
    for b in boundaries {
        let line = BoundaryLine {
            id: b.id.clone(),
            name: b.name.clone(),
            country: b.country.clone(),
            rings: b
                .rings()
                .iter()
                .map(|r| r.vertices().iter().map(|p| [p.lat, p.lon]).collect())
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a `lat,lon,value` point table.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<PointRecord>> {
    let mut rdr = csv_reader(reader);
    expect_headers(&mut rdr, &["lat", "lon", "value"])?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let location = field_point(&record, 0, 1)?;
        let value = field_f64(&record, 2, "value")?;
        out.push(PointRecord { location, value });
    }
    Ok(out)
}

pub fn write_points_csv<W: Write>(w: W, points: &[PointRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["lat", "lon", "value"])?;
    for p in points {
        wtr.write_record([
            fmt_coord(p.location.lat),
            fmt_coord(p.location.lon),
            p.value.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `row,col,value` cell table, rejecting indices outside `spec`.
pub fn read_cells_csv<R: Read>(reader: R, spec: &GridSpec) -> Result<Vec<CellRecord>> {
    let mut rdr = csv_reader(reader);
    expect_headers(&mut rdr, &["row", "col", "value"])?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let index = |i: usize, name: &str| -> Result<usize> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<usize>()
                .map_err(|_| row_err(&record, format!("column `{name}`: `{raw}` is not a cell index")))
        };
        let cell = CellIndex::new(index(0, "row")?, index(1, "col")?);
        if !spec.contains_index(cell) {
            return Err(row_err(
                &record,
                format!(
                    "cell ({}, {}) outside {}x{} grid",
                    cell.row, cell.col, spec.nrows, spec.ncols
                ),
            ));
        }
        let value = field_f64(&record, 2, "value")?;
        out.push(CellRecord { cell, value });
    }
    Ok(out)
}

pub fn write_cells_csv<W: Write>(w: W, cells: &[CellRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["row", "col", "value"])?;
    for c in cells {
        wtr.write_record([c.cell.row.to_string(), c.cell.col.to_string(), c.value.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_grid_spec_json<R: Read>(reader: R) -> Result<GridSpec> {
    let spec: GridSpec = serde_json::from_reader(reader)?;
    spec.validate()?;
    Ok(spec)
}

pub fn write_grid_spec_json<W: Write>(mut w: W, spec: &GridSpec) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, spec)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Reads a `way_id,start_lat,start_lon,end_lat,end_lon` edge table.
pub fn read_edges_csv<R: Read>(reader: R) -> Result<Vec<EdgeRecord>> {
    let mut rdr = csv_reader(reader);
    expect_headers(&mut rdr, &["way_id", "start_lat", "start_lon", "end_lat", "end_lon"])?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let way_id = record.get(0).unwrap_or("").to_string();
        let start = field_point(&record, 1, 2)?;
        let end = field_point(&record, 3, 4)?;
        out.push(EdgeRecord::new(way_id, start, end).map_err(|e| row_err(&record, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_edges_csv<W: Write>(w: W, edges: &[EdgeRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["way_id", "start_lat", "start_lon", "end_lat", "end_lon"])?;
    for e in edges {
        wtr.write_record([
            e.way_id.clone(),
            fmt_coord(e.start.lat),
            fmt_coord(e.start.lon),
            fmt_coord(e.end.lat),
            fmt_coord(e.end.lon),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `country,gdp_per_capita` table. Values must be positive.
pub fn read_gdp_csv<R: Read>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv_reader(reader);
    expect_headers(&mut rdr, &["country", "gdp_per_capita"])?;
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let country = record.get(0).unwrap_or("").to_string();
        if country.is_empty() {
            return Err(row_err(&record, "empty country code"));
        }
        let gdp = field_f64(&record, 1, "gdp_per_capita")?;
        if gdp <= 0.0 {
            return Err(row_err(&record, format!("gdp_per_capita must be positive, got {gdp}")));
        }
        if out.insert(country.clone(), gdp).is_some() {
            return Err(row_err(&record, format!("duplicate country `{country}`")));
        }
    }
    Ok(out)
}

pub fn write_gdp_csv<W: Write>(w: W, gdp: &BTreeMap<String, f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["country", "gdp_per_capita"])?;
    for (country, value) in gdp {
        wtr.write_record([country.clone(), value.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

const CATALOG_HEADER: [&str; 5] = ["id", "name", "country", "population", "gdp_per_capita"];

/// Reads an `id,name,country,population,gdp_per_capita` city catalog; the
/// last three columns may be empty.
pub fn read_city_catalog_csv<R: Read>(reader: R) -> Result<Vec<CityMeta>> {
    let mut rdr = csv_reader(reader);
    expect_headers(&mut rdr, &CATALOG_HEADER)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let id = record.get(0).unwrap_or("").to_string();
        if !seen.insert(id.clone()) {
            return Err(row_err(&record, format!("duplicate city id `{id}`")));
        }
        let country = record.get(2).filter(|c| !c.is_empty()).map(str::to_string);
        let population = field_opt_f64(&record, 3, "population")?;
        if population.is_some_and(|p| p < 0.0) {
            return Err(row_err(&record, "population must be non-negative"));
        }
        let gdp_per_capita = field_opt_f64(&record, 4, "gdp_per_capita")?;
        if gdp_per_capita.is_some_and(|g| g <= 0.0) {
            return Err(row_err(&record, "gdp_per_capita must be positive"));
        }
        out.push(CityMeta {
            id,
            name: record.get(1).unwrap_or("").to_string(),
            country,
            population,
            gdp_per_capita,
        });
    }
    Ok(out)
}

pub fn write_city_catalog_csv<W: Write>(w: W, catalog: &[CityMeta]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CATALOG_HEADER)?;
    for c in catalog {
        wtr.write_record([
            c.id.clone(),
            c.name.clone(),
            c.country.clone().unwrap_or_default(),
            opt(c.population),
            opt(c.gdp_per_capita),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Fills each city's GDP per capita from a country-level table, leaving
/// cities with unknown countries untouched.
pub fn attach_gdp(catalog: &mut [CityMeta], gdp: &BTreeMap<String, f64>) {
    for city in catalog {
        if let Some(v) = city.country.as_ref().and_then(|c| gdp.get(c)) {
            city.gdp_per_capita = Some(*v);
        }
    }
}

/// One row of the `city_id,population,property,country` table that feeds the
/// scaling fit.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedCity {
    pub city_id: String,
    pub population: Option<f64>,
    pub property: Option<f64>,
    pub country: Option<String>,
}

const JOINED_HEADER: [&str; 4] = ["city_id", "population", "property", "country"];

/// Pairs each aggregate with its catalog entry. `kind` picks which statistic
/// becomes the property; empty cities get no property.
pub fn join_aggregates(
    aggregates: &[CityAggregate],
    catalog: &[CityMeta],
    kind: AggregateKind,
) -> Result<Vec<JoinedCity>> {
    let by_id: HashMap<&str, &CityMeta> = catalog.iter().map(|c| (c.id.as_str(), c)).collect();
    let mut seen = HashSet::new();
    aggregates
        .iter()
        .map(|a| {
            if !seen.insert(a.city_id.as_str()) {
                return Err(Error::DuplicateCityId(a.city_id.clone()));
            }
            let meta = by_id
                .get(a.city_id.as_str())
                .ok_or_else(|| Error::Format(format!("city `{}` is not in the catalog", a.city_id)))?;
            Ok(JoinedCity {
                city_id: a.city_id.clone(),
                population: meta.population,
                property: if a.is_empty() { None } else { a.value(kind) },
                country: meta.country.clone(),
            })
        })
        .collect()
}

pub fn read_joined_csv<R: Read>(reader: R) -> Result<Vec<JoinedCity>> {
    let mut rdr = csv_reader(reader);
    expect_headers(&mut rdr, &JOINED_HEADER)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let city_id = record.get(0).unwrap_or("").to_string();
        if city_id.is_empty() {
            return Err(row_err(&record, "empty city_id"));
        }
        if !seen.insert(city_id.clone()) {
            return Err(row_err(&record, format!("duplicate city id `{city_id}`")));
        }
        out.push(JoinedCity {
            city_id,
            population: field_opt_f64(&record, 1, "population")?,
            property: field_opt_f64(&record, 2, "property")?,
            country: record.get(3).filter(|c| !c.is_empty()).map(str::to_string),
        });
    }
    Ok(out)
}

pub fn write_joined_csv<W: Write>(w: W, rows: &[JoinedCity]) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(JOINED_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.city_id.clone(),
            opt(r.population),
            opt(r.property),
            r.country.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
