use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coordinate (lat {lat}, lon {lon})")]
    InvalidCoordinate { lat: f64, lon: f64 },

    #[error("degenerate ring: {0}")]
    DegenerateRing(String),

    #[error("boundary `{0}` has no rings")]
    EmptyBoundary(String),

    #[error("edge crosses the antimeridian (lon {0} -> {1})")]
    AntimeridianCrossing(f64, f64),

    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("point (lat {lat}, lon {lon}) lies outside the grid extent")]
    OutsideGrid { lat: f64, lon: f64 },

    #[error("cell ({row}, {col}) is outside a {nrows}x{ncols} grid")]
    CellOutOfBounds {
        row: i64,
        col: i64,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid spec mismatch between cell table and rasterized boundaries")]
    GridSpecMismatch,

    #[error("feature {feature}: {message}")]
    GeoJson { feature: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Format(String),

    #[error("city id mismatch: `{0}` vs `{1}`")]
    CityIdMismatch(String, String),

    #[error("duplicate city id `{0}`")]
    DuplicateCityId(String),

    #[error("invalid query plan: {0}")]
    InvalidPlan(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate abscissa: all ln N values are equal")]
    DegenerateAbscissa,

    #[error("degenerate variance in {0}")]
    DegenerateVariance(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
