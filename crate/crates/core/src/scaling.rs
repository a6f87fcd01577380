//! Urban scaling analysis: fits of `Y = Y0 * N^beta` by least squares in
//! log-log space, cohort filters, per-capita correlation and rankings.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::CityMeta;
use crate::stats::student_t_quantile;

/// One city's size (population) and property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub city_id: String,
    pub n_pop: f64,
    pub y_value: f64,
}

impl ScalingPoint {
    pub fn new(city_id: impl Into<String>, n_pop: f64, y_value: f64) -> Self {
        Self {
            city_id: city_id.into(),
            n_pop,
            y_value,
        }
    }

    fn usable(&self) -> bool {
        self.n_pop.is_finite() && self.n_pop > 0.0 && self.y_value.is_finite() && self.y_value > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Sublinear,
    Linear,
    Superlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: f64,
    pub ln_y0: f64,
    pub se_beta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub r2: f64,
    pub n_obs: usize,
    /// Points dropped because N or Y was not strictly positive.
    pub n_excluded: usize,
}

impl FitResult {
    pub fn y0(&self) -> f64 {
        self.ln_y0.exp()
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }

    pub fn predict_ln(&self, n_pop: f64) -> f64 {
        self.ln_y0 + self.beta * n_pop.ln()
    }
}

/// Ordinary least squares of `y` on `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ols {
    pub slope: f64,
    pub intercept: f64,
    pub se_slope: f64,
    pub r2: f64,
    pub n: usize,
}

/// Fits `y = intercept + slope * x`. A constant `y` gives slope 0 and r2 0.
pub fn ols(x: &[f64], y: &[f64]) -> Result<Ols> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} x values vs {} y values",
            n,
            y.len()
        )));
    }
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} usable points, need at least 3")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if x.iter().all(|v| *v == x[0]) || sxx <= 1e-24 * nf * mx.abs().max(1.0).powi(2) {
        return Err(Error::DegenerateAbscissa);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let se_slope = (ss_res / (nf - 2.0) / sxx).sqrt();
    Ok(Ols {
        slope,
        intercept,
        se_slope,
        r2,
        n,
    })
}

/// Fits `ln Y = ln Y0 + beta * ln N` with a two-sided 95% t interval on beta.
/// Points with non-positive N or Y are excluded and counted.
pub fn fit_power_law(points: &[ScalingPoint]) -> Result<FitResult> {
    let usable: Vec<&ScalingPoint> = points.iter().filter(|p| p.usable()).collect();
    let n_excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable cities ({} excluded), need at least 3",
            usable.len(),
            n_excluded
        )));
    }
    let x: Vec<f64> = usable.iter().map(|p| p.n_pop.ln()).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.y_value.ln()).collect();
    let fit = ols(&x, &y)?;
    let t = student_t_quantile(0.975, (fit.n - 2) as f64);
    let half = t * fit.se_slope;
    Ok(FitResult {
        beta: fit.slope,
        ln_y0: fit.intercept,
        se_beta: fit.se_slope,
        ci_low: fit.slope - half,
        ci_high: fit.slope + half,
        r2: fit.r2,
        n_obs: fit.n,
        n_excluded,
    })
}

/// Linear when the 95% interval contains 1, otherwise by the sign of beta - 1.
pub fn classify_regime(fit: &FitResult) -> Regime {
    if fit.ci_low <= 1.0 && 1.0 <= fit.ci_high {
        Regime::Linear
    } else if fit.beta < 1.0 {
        Regime::Sublinear
    } else {
        Regime::Superlinear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    BelowThreshold,
    UnknownGdp,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GdpSplit {
    pub kept: Vec<ScalingPoint>,
    pub removed: Vec<(ScalingPoint, RemovalReason)>,
}

/// Keeps cities whose country GDP per capita is at least `threshold_usd`.
/// Cities with no known GDP are always removed.
pub fn filter_by_gdp(points: &[ScalingPoint], catalog: &[CityMeta], threshold_usd: f64) -> GdpSplit {
    let gdp: HashMap<&str, Option<f64>> = catalog.iter().map(|c| (c.id.as_str(), c.gdp_per_capita)).collect();
    let mut split = GdpSplit::default();
    for p in points {
        match gdp.get(p.city_id.as_str()).copied().flatten() {
            Some(g) if g >= threshold_usd => split.kept.push(p.clone()),
            Some(_) => split.removed.push((p.clone(), RemovalReason::BelowThreshold)),
            None => split.removed.push((p.clone(), RemovalReason::UnknownGdp)),
        }
    }
    split
}

pub fn filter_by_country(points: &[ScalingPoint], catalog: &[CityMeta], country_code: &str) -> Vec<ScalingPoint> {
    let country: HashMap<&str, Option<&str>> = catalog.iter().map(|c| (c.id.as_str(), c.country.as_deref())).collect();
    points
        .iter()
        .filter(|p| country.get(p.city_id.as_str()).copied().flatten() == Some(country_code))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub coefficient: f64,
    pub r2: f64,
    pub n: usize,
}

/// Slope and r2 of `ln y` on `ln x`. Pairs with a non-positive member are
/// skipped.
pub fn correlate_loglog(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} x values vs {} y values",
            x.len(),
            y.len()
        )));
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && **a > 0.0 && b.is_finite() && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    let fit = ols(&lx, &ly).map_err(|e| match e {
        Error::DegenerateAbscissa => Error::DegenerateVariance("ln x"),
        other => other,
    })?;
    Ok(Correlation {
        coefficient: fit.slope,
        r2: fit.r2,
        n: fit.n,
    })
}

/// The `k` smallest values in ascending order, ties broken by city id.
pub fn bottom_k(values: &[(String, f64)], k: usize) -> Vec<(String, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    sorted.truncate(k);
    sorted
}

/// City counts per country, most frequent first, then by country code.
pub fn country_histogram(cities: &[(String, String)]) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, country) in cities {
        *counts.entry(country.as_str()).or_default() += 1;
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(c, n)| (c.to_string(), n)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Property per person, skipping cities without a positive population.
pub fn per_capita(points: &[ScalingPoint]) -> Vec<(String, f64)> {
    points
        .iter()
        .filter(|p| p.n_pop > 0.0)
        .map(|p| (p.city_id.clone(), p.y_value / p.n_pop))
        .collect()
}

#[derive(Serialize)]
struct FitJson<'a> {
    beta: f64,
    ln_y0: f64,
    se_beta: f64,
    ci_low: f64,
    ci_high: f64,
    r2: f64,
    n_obs: usize,
    n_excluded: usize,
    regime: &'a Regime,
}

pub fn write_fit_json<W: Write>(mut w: W, fit: &FitResult) -> Result<()> {
    let regime = fit.regime();
    serde_json::to_writer_pretty(
        &mut w,
        &FitJson {
            beta: fit.beta,
            ln_y0: fit.ln_y0,
            se_beta: fit.se_beta,
            ci_low: fit.ci_low,
            ci_high: fit.ci_high,
            r2: fit.r2,
            n_obs: fit.n_obs,
            n_excluded: fit.n_excluded,
            regime: &regime,
        },
    )?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Writes `city_id,ln_n,ln_y,fitted_ln_y` for every point the fit used.
pub fn write_scatter_csv<W: Write>(w: W, points: &[ScalingPoint], fit: &FitResult) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["city_id", "ln_n", "ln_y", "fitted_ln_y"])?;
    for p in points.iter().filter(|p| p.usable()) {
        wtr.write_record([
            p.city_id.clone(),
            p.n_pop.ln().to_string(),
            p.y_value.ln().to_string(),
            fit.predict_ln(p.n_pop).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fit_with(beta: f64, lo: f64, hi: f64) -> FitResult {
        FitResult {
            beta,
            ln_y0: 0.0,
            se_beta: 0.0,
            ci_low: lo,
            ci_high: hi,
            r2: 1.0,
            n_obs: 3,
            n_excluded: 0,
        }
    }

    #[test]
    fn noiseless_power_law() {
        let pts: Vec<ScalingPoint> = (0..50)
            .map(|i| {
                let n = 10f64.powf(2.0 + 4.0 * i as f64 / 49.0);
                ScalingPoint::new(format!("c{i}"), n, 2.0 * n.powf(0.85))
            })
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert_abs_diff_eq!(fit.beta, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r2, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.y0(), 2.0, epsilon = 1e-9);
        assert!(fit.ci_high - fit.ci_low < 1e-9);
    }

    #[test]
    fn three_point_hand_fit() {
        // (ln N, ln Y) = (0, 1), (1, 1.5), (2, 3): slope 1, intercept 5/6, r2 12/13
        let pts: Vec<ScalingPoint> = [(0.0, 1.0), (1.0, 1.5), (2.0, 3.0)]
            .iter()
            .enumerate()
            .map(|(i, &(lx, ly)): (usize, &(f64, f64))| ScalingPoint::new(i.to_string(), lx.exp(), ly.exp()))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert_abs_diff_eq!(fit.beta, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.ln_y0, 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r2, 12.0 / 13.0, epsilon = 1e-12);
        assert_eq!(fit.n_obs, 3);
    }

    #[test]
    fn degenerate_inputs() {
        let same: Vec<_> = (0..5)
            .map(|i| ScalingPoint::new(i.to_string(), 100.0, i as f64 + 1.0))
            .collect();
        let err = fit_power_law(&same).unwrap_err();
        assert!(err.to_string().contains("degenerate abscissa"), "{err}");

        let few = vec![
            ScalingPoint::new("a", 10.0, 1.0),
            ScalingPoint::new("b", 100.0, 2.0),
            ScalingPoint::new("c", 1000.0, 0.0),
        ];
        assert!(matches!(fit_power_law(&few), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn non_positive_points_are_excluded() {
        let mut pts: Vec<_> = (1..=10)
            .map(|i| ScalingPoint::new(i.to_string(), 10f64.powi(i), 3.0 * 10f64.powi(i)))
            .collect();
        pts.push(ScalingPoint::new("z", 1e4, 0.0));
        pts.push(ScalingPoint::new("n", -1.0, 5.0));
        let fit = fit_power_law(&pts).unwrap();
        assert_eq!(fit.n_obs, 10);
        assert_eq!(fit.n_excluded, 2);
        assert_abs_diff_eq!(fit.beta, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&fit_with(0.749, 0.744, 0.755)), Regime::Sublinear);
        assert_eq!(classify_regime(&fit_with(1.2, 1.1, 1.3)), Regime::Superlinear);
        assert_eq!(classify_regime(&fit_with(1.001, 0.95, 1.05)), Regime::Linear);
    }

    fn meta(id: &str, country: &str, gdp: Option<f64>) -> CityMeta {
        CityMeta {
            id: id.into(),
            name: id.into(),
            country: Some(country.into()),
            population: None,
            gdp_per_capita: gdp,
        }
    }

    #[test]
    fn gdp_and_country_filters() {
        let catalog = vec![
            meta("x1", "X", Some(2500.0)),
            meta("x2", "X", Some(2500.0)),
            meta("z1", "Z", Some(40000.0)),
            meta("u1", "US", None),
        ];
        let pts: Vec<_> = ["x1", "x2", "z1", "u1"]
            .iter()
            .map(|id| ScalingPoint::new(*id, 10.0, 1.0))
            .collect();
        let split = filter_by_gdp(&pts, &catalog, 3000.0);
        assert_eq!(
            split.kept.iter().map(|p| p.city_id.as_str()).collect::<Vec<_>>(),
            ["z1"]
        );
        assert_eq!(split.removed.len(), 3);
        assert_eq!(split.removed[2].1, RemovalReason::UnknownGdp);
        assert_eq!(split.removed[0].1, RemovalReason::BelowThreshold);

        let all = filter_by_gdp(&pts[..3], &catalog, 0.0);
        assert_eq!(all.kept.len(), 3);

        assert_eq!(filter_by_country(&pts, &catalog, "US")[0].city_id, "u1");
        assert_eq!(filter_by_country(&pts, &catalog, "X").len(), 2);
        assert!(filter_by_country(&pts, &catalog, "QQ").is_empty());
    }

    #[test]
    fn loglog_correlation() {
        let x = [1.0, 2.0, 5.0, 10.0];
        let c = correlate_loglog(&x, &x).unwrap();
        assert_abs_diff_eq!(c.coefficient, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.r2, 1.0, epsilon = 1e-12);
        let c = correlate_loglog(&x, &[4.0; 4]).unwrap();
        assert_eq!((c.coefficient, c.r2), (0.0, 0.0));

        let lx = [0f64, 1.0, 2.0].map(f64::exp);
        let ly = [1f64, 1.5, 3.0].map(f64::exp);
        let c = correlate_loglog(&lx, &ly).unwrap();
        assert_abs_diff_eq!(c.coefficient, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.r2, 12.0 / 13.0, epsilon = 1e-12);

        assert!(matches!(
            correlate_loglog(&[3.0; 4], &x),
            Err(Error::DegenerateVariance(_))
        ));
        assert!(correlate_loglog(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bottom_k_examples() {
        let v = |pairs: &[(&str, f64)]| pairs.iter().map(|(a, b)| (a.to_string(), *b)).collect::<Vec<_>>();
        let vals = v(&[("a", 3.0), ("b", 1.0), ("c", 2.0)]);
        assert_eq!(bottom_k(&vals, 2), v(&[("b", 1.0), ("c", 2.0)]));
        assert_eq!(bottom_k(&vals, 10).len(), 3);
        assert_eq!(bottom_k(&v(&[("b", 1.0), ("a", 1.0)]), 1), v(&[("a", 1.0)]));
    }

    #[test]
    fn histogram_examples() {
        let cities: Vec<(String, String)> = [("a", "X"), ("b", "X"), ("c", "Z")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(
            country_histogram(&cities),
            vec![("X".to_string(), 2), ("Z".to_string(), 1)]
        );
        assert!(country_histogram(&[]).is_empty());
        let tied: Vec<(String, String)> = [("a", "Q"), ("b", "B")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(country_histogram(&tied)[0].0, "B");
    }

    #[test]
    fn fit_json_fields() {
        let mut buf = Vec::new();
        write_fit_json(&mut buf, &fit_with(0.749, 0.744, 0.755)).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["regime"], "sublinear");
        assert_eq!(v.as_object().unwrap().len(), 9);
    }
}
