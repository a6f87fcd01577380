use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use polyagg::bench::{run_bench, BenchScenario};
use polyagg::engine::{read_aggregates_csv, write_aggregates_csv, write_stats_json};
use polyagg::ingest::synth::{generate_synthetic_world, LowIncomeCohort, SynthConfig};
use polyagg::ingest::tables::*;
use polyagg::ingest::{edges_to_points, parse_boundary_geojson, read_ascii_grid, sparsify};
use polyagg::scaling::{per_capita, write_fit_json, write_scatter_csv};
use polyagg::*;

#[derive(Parser)]
#[command(
    name = "polyagg",
    version,
    about = "Polygon aggregation over point and raster tables"
)]
struct Cli {
    /// Print a single JSON summary line on standard output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an external dataset into a canonical table.
    Ingest(IngestArgs),
    /// Aggregate a point or cell table over a boundary catalog.
    Query(QueryArgs),
    /// Join aggregates with a city catalog into the table `fit` reads.
    Join(JoinArgs),
    /// Fit ln Y = ln Y0 + beta ln N.
    Fit(FitArgs),
    /// Lowest per-capita cities and their country histogram.
    Rank(RankArgs),
    /// Log-log correlation between two numeric columns of a CSV.
    Correlate(CorrelateArgs),
    /// Write a seeded synthetic fixture directory.
    Synth(SynthArgs),
    /// Time the vector and raster paths on one workload.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    GeojsonBoundaries,
    AsciiGrid,
    PointCsv,
    EdgeCsv,
    GdpCsv,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    format: Format,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Grid spec sidecar (ascii-grid only, required there).
    #[arg(long)]
    spec_out: Option<PathBuf>,
    /// Drop zero-valued cells (ascii-grid only).
    #[arg(long)]
    drop_zeros: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Vector,
    Raster,
}

#[derive(Clone, Copy, ValueEnum)]
enum Agg {
    Sum,
    Count,
    Mean,
}

impl From<Agg> for AggregateKind {
    fn from(a: Agg) -> Self {
        match a {
            Agg::Sum => AggregateKind::Sum,
            Agg::Count => AggregateKind::Count,
            Agg::Mean => AggregateKind::Mean,
        }
    }
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, value_enum, default_value = "sum")]
    agg: Agg,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 1)]
    partitions: usize,
    /// Boundary catalog (JSON lines).
    #[arg(long)]
    boundaries: PathBuf,
    /// Point table, vector mode.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Cell table, raster mode.
    #[arg(long)]
    cells: Option<PathBuf>,
    /// Grid spec of the cell table, raster mode.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Disable the bounding-box prefilter (vector mode).
    #[arg(long)]
    no_prefilter: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stats: PathBuf,
}

#[derive(Args)]
struct JoinArgs {
    #[arg(long)]
    aggregates: PathBuf,
    /// City catalog CSV.
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, value_enum, default_value = "sum")]
    agg: Agg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Joined CSV `city_id,population,property,country`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Country GDP table, needed by --min-gdp.
    #[arg(long)]
    gdp: Option<PathBuf>,
    #[arg(long)]
    min_gdp: Option<f64>,
    #[arg(long)]
    country: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    scatter: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    cities: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    y0: f64,
    #[arg(long, default_value_t = 0.01)]
    cell_size: f64,
    /// Fraction of cities placed in a low-GDP cohort.
    #[arg(long)]
    low_income_share: Option<f64>,
    #[arg(long, default_value_t = 0.05, requires = "low_income_share")]
    low_income_y0_factor: f64,
    #[arg(long, default_value_t = 5.0, requires = "low_income_share")]
    low_income_min_log10_pop: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    grid_side: Option<usize>,
    #[arg(long)]
    boundaries: Option<usize>,
    #[arg(long)]
    vertices: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    partitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-repetition table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A broken internal invariant, reported with exit code 2.
#[derive(Debug)]
struct Internal(String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal invariant violated: {}", self.0)
    }
}

impl std::error::Error for Internal {}

/// Tracks files written by the current command so they can be removed if it
/// fails.
#[derive(Default)]
struct Outputs {
    created: Vec<PathBuf>,
}

impl Outputs {
    fn create(&mut self, path: &Path) -> anyhow::Result<BufWriter<File>> {
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        self.created.push(path.to_path_buf());
        Ok(BufWriter::new(f))
    }

    fn write_with(
        &mut self,
        path: &Path,
        f: impl FnOnce(&mut BufWriter<File>) -> polyagg::Result<()>,
    ) -> anyhow::Result<()> {
        let mut w = self.create(path)?;
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    fn discard(&self) {
        for p in &self.created {
            let _ = fs::remove_file(p);
        }
    }
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_with<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> polyagg::Result<T>) -> anyhow::Result<T> {
    f(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn cmd_ingest(a: &IngestArgs, out: &mut Outputs) -> anyhow::Result<Value> {
    if matches!(a.format, Format::AsciiGrid) != a.spec_out.is_some() {
        bail!("--spec-out is required for ascii-grid and not accepted for other formats");
    }
    if a.drop_zeros && !matches!(a.format, Format::AsciiGrid) {
        bail!("--drop-zeros only applies to ascii-grid");
    }
    let summary = match a.format {
        Format::GeojsonBoundaries => {
            let text = fs::read_to_string(&a.input).with_context(|| format!("cannot read {}", a.input.display()))?;
            let boundaries = parse_boundary_geojson(&text).with_context(|| format!("reading {}", a.input.display()))?;
            out.write_with(&a.out, |w| write_boundary_catalog(w, &boundaries))?;
            json!({ "boundaries": boundaries.len() })
        }
        Format::AsciiGrid => {
            let (spec, cells) = read_with(&a.input, read_ascii_grid)?;
            let total = cells.len();
            let cells = if a.drop_zeros { sparsify(&cells) } else { cells };
            out.write_with(&a.out, |w| write_cells_csv(w, &cells))?;
            out.write_with(a.spec_out.as_deref().unwrap(), |w| write_grid_spec_json(w, &spec))?;
            json!({ "cells": cells.len(), "dropped": total - cells.len(), "nrows": spec.nrows, "ncols": spec.ncols })
        }
        Format::PointCsv => {
            let points = read_with(&a.input, read_points_csv)?;
            out.write_with(&a.out, |w| write_points_csv(w, &points))?;
            json!({ "points": points.len() })
        }
        Format::EdgeCsv => {
            let edges = read_with(&a.input, read_edges_csv)?;
            let conv = edges_to_points(&edges);
            out.write_with(&a.out, |w| write_points_csv(w, &conv.points))?;
            json!({ "edges": edges.len(), "points": conv.points.len(), "skipped": conv.skipped })
        }
        Format::GdpCsv => {
            let gdp = read_with(&a.input, read_gdp_csv)?;
            out.write_with(&a.out, |w| write_gdp_csv(w, &gdp))?;
            json!({ "countries": gdp.len() })
        }
    };
    Ok(summary)
}

fn cmd_query(a: &QueryArgs, out: &mut Outputs) -> anyhow::Result<Value> {
    let mode = match a.mode {
        Mode::Vector => QueryMode::Vector,
        Mode::Raster => QueryMode::Raster,
    };
    let mut plan = QueryPlan::new(mode, a.partitions, a.workers);
    plan.aggregate = a.agg.into();
    plan.bbox_prefilter = !a.no_prefilter;
    plan.validate()?;
    let (need, forbid) = match mode {
        QueryMode::Vector => (a.points.is_some(), a.cells.is_some() || a.grid.is_some()),
        QueryMode::Raster => (a.cells.is_some() && a.grid.is_some(), a.points.is_some()),
    };
    if !need || forbid {
        bail!("vector mode takes --points; raster mode takes --cells and --grid");
    }

    let boundaries = read_with(&a.boundaries, read_boundary_catalog)?;
    let result = match mode {
        QueryMode::Vector => {
            let points = read_with(a.points.as_deref().unwrap(), read_points_csv)?;
            vector_polygon_query(&points, &boundaries, &plan)?
        }
        QueryMode::Raster => {
            let spec = read_with(a.grid.as_deref().unwrap(), read_grid_spec_json)?;
            let records = read_with(a.cells.as_deref().unwrap(), |r| read_cells_csv(r, &spec))?;
            let rasterized = RasterizedBoundaries::from_boundaries(&boundaries, &spec);
            raster_polygon_query(&CellTable { spec, records }, &rasterized, &plan)?
        }
    };
    if result.aggregates.len() != boundaries.len() {
        return Err(Internal(format!(
            "{} aggregates for {} boundaries",
            result.aggregates.len(),
            boundaries.len()
        ))
        .into());
    }
    out.write_with(&a.out, |w| write_aggregates_csv(w, &result.aggregates))?;
    out.write_with(&a.stats, |w| write_stats_json(w, &result.stats))?;
    let empty = result.aggregates.iter().filter(|c| c.is_empty()).count();
    Ok(json!({
        "mode": mode,
        "agg": plan.aggregate,
        "cities": result.aggregates.len(),
        "empty_cities": empty,
        "rows_scanned": result.stats.rows_scanned,
        "rows_matched": result.stats.rows_matched,
        "wall_seconds": result.stats.wall_seconds,
    }))
}

fn cmd_join(a: &JoinArgs, out: &mut Outputs) -> anyhow::Result<Value> {
    let aggregates = read_with(&a.aggregates, read_aggregates_csv)?;
    let catalog = read_with(&a.catalog, read_city_catalog_csv)?;
    let rows = join_aggregates(&aggregates, &catalog, a.agg.into())?;
    out.write_with(&a.out, |w| write_joined_csv(w, &rows))?;
    Ok(json!({ "cities": rows.len(), "without_property": rows.iter().filter(|r| r.property.is_none()).count() }))
}

/// Scaling points and a catalog view of the joined table.
fn scaling_inputs(rows: &[JoinedCity]) -> (Vec<ScalingPoint>, Vec<CityMeta>) {
    // Missing values become 0 so the fit excludes and counts them.
    let points = rows
        .iter()
        .map(|r| {
            ScalingPoint::new(
                r.city_id.clone(),
                r.population.unwrap_or(0.0),
                r.property.unwrap_or(0.0),
            )
        })
        .collect();
    let catalog = rows
        .iter()
        .map(|r| CityMeta {
            id: r.city_id.clone(),
            name: String::new(),
            country: r.country.clone(),
            population: r.population,
            gdp_per_capita: None,
        })
        .collect();
    (points, catalog)
}

fn cmd_fit(a: &FitArgs, out: &mut Outputs) -> anyhow::Result<Value> {
    if let Some(t) = a.min_gdp {
        if !(t.is_finite() && t >= 0.0) {
            bail!("--min-gdp must be a non-negative number");
        }
        if a.gdp.is_none() {
            bail!("--min-gdp needs --gdp");
        }
    }
    let rows = read_with(&a.input, read_joined_csv)?;
    let (mut points, mut catalog) = scaling_inputs(&rows);
    if let Some(path) = &a.gdp {
        let gdp = read_with(path, read_gdp_csv)?;
        attach_gdp(&mut catalog, &gdp);
    }
    let total = points.len();
    if let Some(code) = &a.country {
        points = filter_by_country(&points, &catalog, code);
    }
    let after_country = points.len();
    let mut below = 0;
    let mut unknown = 0;
    if let Some(t) = a.min_gdp {
        let split = filter_by_gdp(&points, &catalog, t);
        for (_, reason) in &split.removed {
            match reason {
                polyagg::scaling::RemovalReason::BelowThreshold => below += 1,
                polyagg::scaling::RemovalReason::UnknownGdp => unknown += 1,
            }
        }
        points = split.kept;
    }
    let fit = fit_power_law(&points)?;
    out.write_with(&a.out, |w| write_fit_json(w, &fit))?;
    if let Some(path) = &a.scatter {
        out.write_with(path, |w| write_scatter_csv(w, &points, &fit))?;
    }
    Ok(json!({
        "beta": fit.beta,
        "ci_low": fit.ci_low,
        "ci_high": fit.ci_high,
        "r2": fit.r2,
        "regime": fit.regime(),
        "n_obs": fit.n_obs,
        "n_excluded": fit.n_excluded,
        "cities": total,
        "removed_by_country": total - after_country,
        "removed_below_gdp": below,
        "removed_unknown_gdp": unknown,
    }))
}

fn cmd_rank(a: &RankArgs, out: &mut Outputs) -> anyhow::Result<Value> {
    let rows = read_with(&a.input, read_joined_csv)?;
    let (points, _) = scaling_inputs(&rows);
    let usable: Vec<ScalingPoint> = points.into_iter().filter(|p| p.y_value > 0.0).collect();
    let lowest = bottom_k(&per_capita(&usable), a.k);
    let country: std::collections::HashMap<&str, &str> = rows
        .iter()
        .filter_map(|r| r.country.as_deref().map(|c| (r.city_id.as_str(), c)))
        .collect();
    let pairs: Vec<(String, String)> = lowest
        .iter()
        .map(|(id, _)| (id.clone(), country.get(id.as_str()).copied().unwrap_or("").to_string()))
        .collect();
    let histogram = country_histogram(&pairs);
    let report = json!({
        "bottom": lowest.iter().zip(&pairs).map(|((id, v), (_, c))| json!({"city_id": id, "per_capita": v, "country": c})).collect::<Vec<_>>(),
        "countries": histogram.iter().map(|(c, n)| json!({"country": c, "cities": n})).collect::<Vec<_>>(),
    });
    let mut w = out.create(&a.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(json!({ "ranked": lowest.len(), "countries": histogram.len() }))
}

fn cmd_correlate(a: &CorrelateArgs) -> anyhow::Result<Value> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(&a.input)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no column `{name}`", a.input.display()))
    };
    let (ix, iy) = (col(&a.x)?, col(&a.y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record?;
        let num = |i: usize| record.get(i).and_then(|v| v.parse::<f64>().ok()).unwrap_or(f64::NAN);
        xs.push(num(ix));
        ys.push(num(iy));
    }
    let c = correlate_loglog(&xs, &ys)?;
    Ok(json!({ "coefficient": c.coefficient, "r2": c.r2, "n": c.n }))
}

fn cmd_synth(a: &SynthArgs, out: &mut Outputs) -> anyhow::Result<Value> {
    let mut config = SynthConfig::new(a.cities, a.beta, a.y0, a.sigma, a.seed);
    config.cell_size = a.cell_size;
    config.low_income = a.low_income_share.map(|share| LowIncomeCohort {
        share,
        y0_factor: a.low_income_y0_factor,
        min_log10_pop: a.low_income_min_log10_pop,
    });
    config.validate()?;
    let world = generate_synthetic_world(&config)?;
    fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let d = &a.out;
    out.write_with(&d.join("boundaries.jsonl"), |w| {
        write_boundary_catalog(w, &world.boundaries)
    })?;
    out.write_with(&d.join("points.csv"), |w| write_points_csv(w, &world.points))?;
    out.write_with(&d.join("cells.csv"), |w| write_cells_csv(w, &world.cells))?;
    out.write_with(&d.join("grid.json"), |w| write_grid_spec_json(w, &world.spec))?;
    out.write_with(&d.join("catalog.csv"), |w| write_city_catalog_csv(w, &world.catalog))?;
    out.write_with(&d.join("gdp.csv"), |w| write_gdp_csv(w, &world.gdp))?;
    let mut w = out.create(&d.join("ledger.json"))?;
    serde_json::to_writer_pretty(&mut w, &world.ledger)?;
    writeln!(w)?;
    w.flush()?;
    Ok(json!({
        "cities": world.catalog.len(),
        "points": world.points.len(),
        "cells": world.cells.len(),
        "beta": config.beta_true,
        "seed": config.seed,
    }))
}

fn cmd_bench(a: &BenchArgs, out: &mut Outputs) -> anyhow::Result<Value> {
    let d = BenchScenario::default();
    let workers = a.workers.unwrap_or(d.workers);
    let s = BenchScenario {
        grid_side: a.grid_side.unwrap_or(d.grid_side),
        boundaries: a.boundaries.unwrap_or(d.boundaries),
        vertices: a.vertices.unwrap_or(d.vertices),
        repetitions: a.repetitions.unwrap_or(d.repetitions),
        workers,
        partitions: a.partitions.unwrap_or(4 * workers),
        seed: a.seed.unwrap_or(d.seed),
    };
    let report = run_bench(&s)?;
    if !report.counts_agree {
        return Err(Internal("vector and raster paths disagree on per-city counts".into()).into());
    }
    if let Some(path) = &a.out {
        let mut w = out.create(path)?;
        writeln!(w, "mode,repetition,wall_seconds,busy_core_seconds,core_minutes")?;
        for r in report.rows.iter().chain([&report.vector_median, &report.raster_median]) {
            let rep = r.repetition.map_or("median".to_string(), |n| n.to_string());
            writeln!(
                w,
                "{},{rep},{},{},{}",
                r.mode, r.wall_seconds, r.busy_core_seconds, r.core_minutes
            )?;
        }
        w.flush()?;
    }
    Ok(json!({
        "points": report.points,
        "cells": report.cells,
        "boundaries": s.boundaries,
        "repetitions": s.repetitions,
        "workers": s.workers,
        "vector_median_wall_seconds": report.vector_median.wall_seconds,
        "raster_median_wall_seconds": report.raster_median.wall_seconds,
        "vector_median_core_minutes": report.vector_median.core_minutes,
        "raster_median_core_minutes": report.raster_median.core_minutes,
    }))
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Query(_) => "query",
        Command::Join(_) => "join",
        Command::Fit(_) => "fit",
        Command::Rank(_) => "rank",
        Command::Correlate(_) => "correlate",
        Command::Synth(_) => "synth",
        Command::Bench(_) => "bench",
    }
}

fn run(cli: &Cli, out: &mut Outputs) -> anyhow::Result<Value> {
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Query(a) => cmd_query(a, out),
        Command::Join(a) => cmd_join(a, out),
        Command::Fit(a) => cmd_fit(a, out),
        Command::Rank(a) => cmd_rank(a, out),
        Command::Correlate(a) => cmd_correlate(a),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let name = command_name(&cli.command);
    let mut outputs = Outputs::default();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&cli, &mut outputs)));
    let (code, summary) = match result {
        Ok(Ok(summary)) => (0, summary),
        Ok(Err(e)) => {
            let code = if e.downcast_ref::<Internal>().is_some() { 2 } else { 1 };
            eprintln!("error: {e:#}");
            (code, json!({ "error": format!("{e:#}") }))
        }
        Err(_) => (2, json!({ "error": "internal panic" })),
    };
    if code != 0 {
        outputs.discard();
    }
    let mut line = json!({ "command": name, "ok": code == 0 });
    if let (Value::Object(dst), Value::Object(src)) = (&mut line, summary) {
        dst.extend(src);
    }
    if cli.json {
        println!("{line}");
    } else if code == 0 {
        let parts: Vec<String> = line
            .as_object()
            .unwrap()
            .iter()
            .filter(|(k, _)| *k != "command" && *k != "ok")
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        println!("{name}: {}", parts.join(" "));
    }
    ExitCode::from(code)
}
