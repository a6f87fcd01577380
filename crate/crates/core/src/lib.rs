//! Polygon aggregation over point and raster tables.
//!
//! Per-city statistics are computed either on the vector path (bbox prefilter
//! plus ray-crossing containment for every point) or on the raster path (an
//! equi-join of cell indices against pre-rasterized city masks). Both paths
//! run as partitioned map / partial-aggregate / merge jobs. The [`scaling`]
//! module fits urban scaling laws on the resulting per-city totals.

pub mod bench;
pub mod engine;
pub mod error;
pub mod geo;
pub mod ingest;
pub mod raster;
pub mod rng;
pub mod scaling;
pub mod stats;

pub use engine::{
    merge_aggregates, raster_polygon_query, run_partitioned, vector_polygon_query, AggregateKind, CellTable,
    CityAggregate, ExecStats, QueryMode, QueryOutput, QueryPlan, RasterizedBoundaries,
};
pub use error::{Error, Result};
pub use geo::{
    bbox_of, haversine_length, midpoint, point_in_boundary, point_in_polygon, BBox, GeoPoint, PolygonBoundary, Ring,
};
pub use ingest::{CityMeta, EdgeRecord, PointRecord};
pub use raster::{cell_of, center_of, dense_raster_query, rasterize_boundary, CellIndex, CellRecord, GridSpec};
pub use scaling::{
    bottom_k, classify_regime, correlate_loglog, country_histogram, filter_by_country, filter_by_gdp, fit_power_law,
    FitResult, Regime, ScalingPoint,
};
