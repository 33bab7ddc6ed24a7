//! KML, GeoJSON and timeline JSON writers.
//!
//! All writers are deterministic: identical input gives identical bytes.
//! Numbers use the shortest representation that parses back to the same
//! value.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ingest::{Gazetteer, GeoEvent, RawEvent};
use crate::thematic::{ChoroplethLayer, TimeSeries};

pub const KML_NAMESPACE: &str = "http://www.opengis.net/kml/2.2";
pub const KML_CONTENT_TYPE: &str = "application/vnd.google-earth.kml+xml";

/// Longest report excerpt placed in a placemark description, in characters.
pub const SNIPPET_CHARS: usize = 280;

#[derive(Debug, Error)]
pub enum GeoExportError {
    #[error("regions missing from polygon file: {}", .0.join(", "))]
    MissingRegions(Vec<String>),
    #[error("invalid GeoJSON: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Escapes markup characters and drops characters XML 1.0 forbids.
pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\r' => out.push_str("&#13;"),
            c if !xml_char(c) => {}
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..)
}

fn snippet(text: &str) -> String {
    let mut chars = text.chars();
    let head: String = chars.by_ref().take(SNIPPET_CHARS).collect();
    if chars.next().is_some() {
        format!("{head}…")
    } else {
        head
    }
}

/// One placemark per event, in input order.
pub fn write_kml(events: &[GeoEvent]) -> Vec<u8> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(&format!("<kml xmlns=\"{KML_NAMESPACE}\">\n<Document>\n<name>events</name>\n<Folder>\n"));
    for e in events {
        s.push_str(&format!("<Placemark id=\"{}\">\n", xml_escape(e.id())));
        s.push_str(&format!("<name>{}</name>\n", xml_escape(&e.raw.event_type)));
        s.push_str(&format!("<description>{}</description>\n", xml_escape(&snippet(&e.raw.report_text))));
        s.push_str(&format!("<TimeStamp><when>{}</when></TimeStamp>\n", e.date().format("%Y-%m-%d")));
        s.push_str("<ExtendedData>\n");
        for (name, value) in [("fips", e.fips.as_str()), ("county", e.canonical_county.as_str())] {
            s.push_str(&format!("<Data name=\"{name}\"><value>{}</value></Data>\n", xml_escape(value)));
        }
        s.push_str("</ExtendedData>\n");
        s.push_str(&format!("<Point><coordinates>{},{},0</coordinates></Point>\n", e.lon, e.lat));
        s.push_str("</Placemark>\n");
    }
    s.push_str("</Folder>\n</Document>\n</kml>\n");
    s.into_bytes()
}

#[derive(Serialize, Deserialize)]
struct PointGeometry {
    #[serde(rename = "type")]
    kind: String,
    coordinates: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct EventProperties {
    id: String,
    date: NaiveDate,
    state: String,
    county: Option<String>,
    address: Option<String>,
    event_type: String,
    report_text: String,
    fips: String,
    canonical_county: String,
}

#[derive(Serialize, Deserialize)]
struct Feature<G, P> {
    #[serde(rename = "type")]
    kind: String,
    geometry: G,
    properties: P,
}

#[derive(Serialize, Deserialize)]
struct FeatureCollection<F> {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<F>,
}

/// Events as Point features with `[lon, lat]` coordinates.
pub fn write_geojson_events(events: &[GeoEvent]) -> Vec<u8> {
    let features = events
        .iter()
        .map(|e| Feature {
            kind: "Feature".into(),
            geometry: PointGeometry { kind: "Point".into(), coordinates: [e.lon, e.lat] },
            properties: EventProperties {
                id: e.raw.id.clone(),
                date: e.raw.date,
                state: e.raw.state.clone(),
                county: e.raw.county_name.clone(),
                address: e.raw.address.clone(),
                event_type: e.raw.event_type.clone(),
                report_text: e.raw.report_text.clone(),
                fips: e.fips.clone(),
                canonical_county: e.canonical_county.clone(),
            },
        })
        .collect();
    serde_json::to_vec(&FeatureCollection { kind: "FeatureCollection".into(), features }).expect("events serialize")
}

/// Inverse of [`write_geojson_events`].
pub fn parse_geojson_events(bytes: &[u8]) -> Result<Vec<GeoEvent>, GeoExportError> {
    let fc: FeatureCollection<Feature<PointGeometry, EventProperties>> = serde_json::from_slice(bytes)?;
    if fc.kind != "FeatureCollection" {
        return Err(GeoExportError::Invalid(format!("expected FeatureCollection, got {}", fc.kind)));
    }
    fc.features
        .into_iter()
        .map(|f| {
            if f.geometry.kind != "Point" {
                return Err(GeoExportError::Invalid(format!("expected Point geometry, got {}", f.geometry.kind)));
            }
            let p = f.properties;
            Ok(GeoEvent {
                raw: RawEvent {
                    id: p.id,
                    date: p.date,
                    state: p.state,
                    county_name: p.county,
                    address: p.address,
                    event_type: p.event_type,
                    report_text: p.report_text,
                },
                fips: p.fips,
                lon: f.geometry.coordinates[0],
                lat: f.geometry.coordinates[1],
                canonical_county: p.canonical_county,
            })
        })
        .collect()
}

/// County outlines keyed by FIPS code.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegionPolygons {
    geometries: BTreeMap<String, Value>,
}

impl RegionPolygons {
    /// Reads a FeatureCollection. Each feature's code is taken from the
    /// `fips`, `FIPS` or `GEOID` property, or else the feature `id`.
    pub fn from_geojson(bytes: &[u8]) -> Result<Self, GeoExportError> {
        let doc: Value = serde_json::from_slice(bytes)?;
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| GeoExportError::Invalid("no features array".into()))?;
        let mut geometries = BTreeMap::new();
        for (i, f) in features.iter().enumerate() {
            let props = f.get("properties");
            let code = ["fips", "FIPS", "GEOID"]
                .iter()
                .find_map(|k| props.and_then(|p| p.get(*k)))
                .or_else(|| f.get("id"))
                .and_then(|v| match v {
                    Value::String(s) => Some(s.clone()),
                    Value::Number(n) => n.as_u64().map(|n| format!("{n:05}")),
                    _ => None,
                })
                .ok_or_else(|| GeoExportError::Invalid(format!("feature {i} has no fips code")))?;
            let geometry = f.get("geometry").cloned().ok_or_else(|| GeoExportError::Invalid(format!("feature {i} has no geometry")))?;
            geometries.insert(code, geometry);
        }
        Ok(Self { geometries })
    }

    /// Square stand-ins of `half_size` degrees around each gazetteer centroid,
    /// for use when no county outline file is available.
    pub fn centroid_boxes(gazetteer: &Gazetteer, half_size: f64) -> Self {
        let geometries = gazetteer
            .entries()
            .iter()
            .map(|c| {
                let (x0, x1, y0, y1) = (c.lon - half_size, c.lon + half_size, c.lat - half_size, c.lat + half_size);
                let ring = serde_json::json!([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]);
                (c.fips.clone(), serde_json::json!({ "type": "Polygon", "coordinates": [ring] }))
            })
            .collect();
        Self { geometries }
    }

    pub fn get(&self, fips: &str) -> Option<&Value> {
        self.geometries.get(fips)
    }

    pub fn len(&self) -> usize {
        self.geometries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.geometries.is_empty()
    }

    pub fn to_geojson(&self) -> Vec<u8> {
        let features = self
            .geometries
            .iter()
            .map(|(fips, g)| Feature { kind: "Feature".into(), geometry: g, properties: serde_json::json!({ "fips": fips }) })
            .collect();
        serde_json::to_vec(&FeatureCollection { kind: "FeatureCollection".into(), features }).expect("polygons serialize")
    }
}

#[derive(Serialize)]
struct LayerProperties<'a> {
    fips: &'a str,
    value: f64,
    class: usize,
    color: &'a str,
}

/// Layer values joined onto county outlines.
pub fn write_geojson_layer(layer: &ChoroplethLayer, polygons: &RegionPolygons) -> Result<Vec<u8>, GeoExportError> {
    let missing: Vec<String> = layer.values.keys().filter(|f| polygons.get(f).is_none()).cloned().collect();
    if !missing.is_empty() {
        return Err(GeoExportError::MissingRegions(missing));
    }
    let features = layer
        .values
        .iter()
        .map(|(fips, &value)| {
            let class = layer.class(fips).expect("value present");
            Feature {
                kind: "Feature".into(),
                geometry: polygons.get(fips).expect("checked above"),
                properties: LayerProperties { fips, value, class, color: &layer.colors[class] },
            }
        })
        .collect();
    Ok(serde_json::to_vec(&FeatureCollection { kind: "FeatureCollection".into(), features })?)
}

/// `{"scale":…,"series":[[label,count],…]}`.
pub fn write_timeline_json(series: &TimeSeries) -> Vec<u8> {
    serde_json::to_vec(series).expect("series serialize")
}
