use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, PolygonBoundary, Ring};

fn feature_err(feature: &str, message: impl Into<String>) -> Error {
    Error::GeoJson {
        feature: feature.to_string(),
        message: message.into(),
    }
}

fn property_text(props: Option<&Value>, key: &str) -> Option<String> {
    match props?.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Reads one GeoJSON position, `[lon, lat, ...]`, into (lat, lon) order.
fn position(v: &Value, feature: &str) -> Result<GeoPoint> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| feature_err(feature, "position must be an array of at least two numbers"))?;
    let lon = arr[0].as_f64();
    let lat = arr[1].as_f64();
    match (lat, lon) {
        (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).map_err(|e| feature_err(feature, e.to_string())),
        _ => Err(feature_err(feature, "non-numeric coordinate")),
    }
}

fn ring(v: &Value, feature: &str) -> Result<Ring> {
    let positions = v
        .as_array()
        .ok_or_else(|| feature_err(feature, "ring must be an array of positions"))?;
    let vertices = positions
        .iter()
        .map(|p| position(p, feature))
        .collect::<Result<Vec<_>>>()?;
    Ring::new(vertices).map_err(|e| feature_err(feature, e.to_string()))
}

fn polygon_rings(v: &Value, feature: &str, out: &mut Vec<Ring>) -> Result<()> {
    let rings = v
        .as_array()
        .ok_or_else(|| feature_err(feature, "polygon must be an array of rings"))?;
    for r in rings {
        out.push(ring(r, feature)?);
    }
    Ok(())
}

/// Parses a GeoJSON FeatureCollection of Polygon / MultiPolygon features
/// into boundaries, one per feature.
///
/// The boundary id comes from the `id` property, then `osm_id`, then the
/// feature's position in the collection.
pub fn parse_boundary_geojson(text: &str) -> Result<Vec<PolygonBoundary>> {
    let doc: Value = serde_json::from_str(text)?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Format("expected a GeoJSON FeatureCollection".into()));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Format("FeatureCollection has no `features` array".into()))?;

    let mut out = Vec::with_capacity(features.len());
    for (index, feature) in features.iter().enumerate() {
        let props = feature.get("properties");
        let id = property_text(props, "id")
            .or_else(|| property_text(props, "osm_id"))
            .unwrap_or_else(|| index.to_string());
        let name = property_text(props, "name").unwrap_or_default();
        let country = property_text(props, "country");

        let geometry = feature
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| feature_err(&id, "missing geometry"))?;
        let kind = geometry.get("type").and_then(Value::as_str).unwrap_or("");
        let coords = geometry
            .get("coordinates")
            .ok_or_else(|| feature_err(&id, "geometry has no coordinates"))?;

        let mut rings = Vec::new();
        match kind {
            "Polygon" => polygon_rings(coords, &id, &mut rings)?,
            "MultiPolygon" => {
                let polys = coords
                    .as_array()
                    .ok_or_else(|| feature_err(&id, "MultiPolygon must be an array of polygons"))?;
                for p in polys {
                    polygon_rings(p, &id, &mut rings)?;
                }
            }
            other => return Err(feature_err(&id, format!("unsupported geometry `{other}`"))),
        }
        let b = PolygonBoundary::new(id.clone(), name, country, rings).map_err(|e| feature_err(&id, e.to_string()))?;
        out.push(b);
    }
    Ok(out)
}

/// Parses a polygon literal such as `[[35.29,-97.41],[35.31,-97.41],[35.31,-97.44]]`,
/// given as `[lat, lon]` pairs.
pub fn parse_polygon_string(text: &str) -> Result<Ring> {
    let v: Value = serde_json::from_str(text)?;
    let pairs = v
        .as_array()
        .ok_or_else(|| Error::Format("polygon must be an array of [lat, lon] pairs".into()))?;
    if pairs.is_empty() {
        return Err(Error::DegenerateRing("empty polygon".into()));
    }
    let mut vertices = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let nums = pair
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Format(format!("vertex {i} is not a [lat, lon] pair")))?;
        match (nums[0].as_f64(), nums[1].as_f64()) {
            (Some(lat), Some(lon)) => vertices.push(GeoPoint::new(lat, lon)?),
            _ => return Err(Error::Format(format!("vertex {i} has a non-numeric entry"))),
        }
    }
    Ring::new(vertices)
}
