//! HTTP routes over an [`EventStore`].

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use eventmap::geoexport::{write_geojson_events, write_kml, write_timeline_json, RegionPolygons, KML_CONTENT_TYPE};
use eventmap::relevance::{location_time_posterior, mark_events, TimeBucket};
use eventmap::thematic::{aggregate_choropleth, timeline_series, ChoroplethLayer, Metric, Ramp, Scale, Scheme, Scope};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::Defaults;
use crate::store::{EventFilter, EventStore, FitSpec, StoreError};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<EventStore>,
    pub polygons: Arc<RegionPolygons>,
    pub defaults: Defaults,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/events", get(events))
        .route("/api/choropleth", get(choropleth))
        .route("/api/timeline", get(timeline))
        .route("/api/topics", get(topics))
        .route("/api/marks", get(marks))
        .route("/api/posterior", get(posterior))
        .route("/api/models", get(models))
        .route("/api/polygons", get(polygons))
        .route("/api/export/kml", get(export_kml))
        .route("/api/admin/fit", post(start_fit))
        .route("/api/admin/jobs/{id}", get(job))
        .with_state(state)
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::Busy => StatusCode::CONFLICT,
            StoreError::UnknownModel(_) | StoreError::UnknownJob(_) => StatusCode::NOT_FOUND,
            StoreError::Io(_) | StoreError::Corrupt { .. } | StoreError::InjectedCrash | StoreError::Json(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

fn bad(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, message.into())
}

type Params = Query<HashMap<String, String>>;

fn param<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match q.get(key).filter(|v| !v.is_empty()) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| bad(format!("invalid {key}: {v:?}"))),
    }
}

fn required<T: std::str::FromStr>(q: &HashMap<String, String>, key: &str) -> Result<T, ApiError> {
    param(q, key)?.ok_or_else(|| bad(format!("missing {key}")))
}

/// Parses a snake_case enum value the way serde names it.
fn enum_param<T: DeserializeOwned>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match q.get(key).filter(|v| !v.is_empty()) {
        None => Ok(None),
        Some(v) => serde_json::from_value(serde_json::Value::String(v.clone()))
            .map(Some)
            .map_err(|_| bad(format!("invalid {key}: {v:?}"))),
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Response {
    let body = serde_json::to_vec(value).expect("response serializes");
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn filter_from(q: &HashMap<String, String>) -> Result<EventFilter, ApiError> {
    Ok(EventFilter {
        from: param::<NaiveDate>(q, "from")?,
        to: param::<NaiveDate>(q, "to")?,
        fips: param(q, "fips")?,
        event_type: param(q, "event_type")?,
        topic: param(q, "topic")?,
        min_prop: param(q, "min_prop")?,
        model: param(q, "model")?,
    })
}

async fn events(State(s): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let found = s.store.query(&filter_from(&q)?)?;
    match q.get("format").map(String::as_str) {
        None | Some("json") => Ok(json_bytes(&found)),
        Some("geojson") => Ok(([(header::CONTENT_TYPE, "application/geo+json")], write_geojson_events(&found)).into_response()),
        Some(other) => Err(bad(format!("invalid format: {other:?}"))),
    }
}

async fn export_kml(State(s): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let found = s.store.query(&filter_from(&q)?)?;
    Ok(([(header::CONTENT_TYPE, KML_CONTENT_TYPE)], write_kml(&found)).into_response())
}

async fn choropleth(State(s): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let metric: Metric = enum_param(&q, "metric")?.unwrap_or(Metric::Count);
    let scheme: Scheme = enum_param(&q, "scheme")?.unwrap_or(s.defaults.scheme);
    let ramp: Ramp = enum_param(&q, "ramp")?.unwrap_or(s.defaults.ramp);
    let classes: usize = param(&q, "classes")?.unwrap_or(s.defaults.classes);
    let scope = param::<i32>(&q, "year")?.map_or(Scope::All, Scope::Year);
    let values = match metric {
        Metric::Count => aggregate_choropleth(&s.store.events(), None, metric, None, scope),
        Metric::TopicProp => {
            let model = s.store.model(param::<String>(&q, "model")?.as_deref())?;
            let table = s.store.table(Some(&model.id))?;
            let topic: String = required(&q, "topic")?;
            let k = model.topic_index(&topic).ok_or_else(|| bad(format!("unknown topic {topic:?}")))?;
            aggregate_choropleth(&[], Some(&table), metric, Some(&model.topic_labels[k]), scope)
        }
    }
    .map_err(|e| bad(e.to_string()))?;
    let layer = ChoroplethLayer::build(metric, values, scheme, classes, ramp).map_err(|e| bad(e.to_string()))?;
    Ok(json_bytes(&layer))
}

async fn timeline(State(s): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let scale: Scale = enum_param(&q, "scale")?.unwrap_or(Scale::Monthly);
    let fips: Option<String> = param(&q, "fips")?;
    let series = timeline_series(&s.store.events(), scale, fips.as_deref());
    Ok(([(header::CONTENT_TYPE, "application/json")], write_timeline_json(&series)).into_response())
}

#[derive(Serialize)]
struct TopicEntry<'a> {
    topic_id: usize,
    label: &'a str,
    top_words: &'a [String],
}

async fn topics(State(s): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let model = s.store.model(param::<String>(&q, "model")?.as_deref())?;
    let list: Vec<TopicEntry> = model
        .topic_labels
        .iter()
        .zip(&model.top_words)
        .enumerate()
        .map(|(topic_id, (label, top_words))| TopicEntry { topic_id, label, top_words })
        .collect();
    Ok(json_bytes(&list))
}

async fn marks(State(s): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let model = s.store.model(param::<String>(&q, "model")?.as_deref())?;
    let topic: String = required(&q, "topic")?;
    let k = model.topic_index(&topic).ok_or_else(|| bad(format!("unknown topic {topic:?}")))?;
    let threshold: f64 = param(&q, "threshold")?.unwrap_or(s.defaults.threshold);
    let year: i32 = required(&q, "year")?;
    let table = s.store.table(Some(&model.id))?;
    let set = mark_events(&table, &model.topic_labels[k], threshold, year).map_err(|e| bad(e.to_string()))?;
    Ok(json_bytes(&serde_json::json!({ "marked": set.marked })))
}

async fn posterior(State(s): State<AppState>, Query(q): Params) -> Result<Response, ApiError> {
    let model = s.store.model(param::<String>(&q, "model")?.as_deref())?;
    let topic: String = required(&q, "topic")?;
    let k = model.topic_index(&topic).ok_or_else(|| bad(format!("unknown topic {topic:?}")))?;
    let bucket: TimeBucket = enum_param(&q, "bucket")?.unwrap_or(TimeBucket::Year);
    let events = s.store.model_events(&model)?;
    let post = location_time_posterior(&model.theta, &events, k, bucket).map_err(|e| bad(e.to_string()))?;
    Ok(json_bytes(&post))
}

async fn models(State(s): State<AppState>) -> Response {
    let list: Vec<serde_json::Value> = s
        .store
        .models()
        .iter()
        .map(|m| serde_json::json!({ "id": m.id, "kind": m.kind, "k": m.topic_labels.len(), "events": m.event_ids.len() }))
        .collect();
    json_bytes(&list)
}

async fn polygons(State(s): State<AppState>) -> Response {
    ([(header::CONTENT_TYPE, "application/geo+json")], s.polygons.to_geojson()).into_response()
}

async fn start_fit(State(s): State<AppState>, body: axum::body::Bytes) -> Result<Response, ApiError> {
    let spec: FitSpec = serde_json::from_slice(&body).map_err(|e| bad(format!("invalid fit spec: {e}")))?;
    let job_id = s.store.start_fit_job(spec)?;
    Ok((StatusCode::ACCEPTED, json_bytes(&serde_json::json!({ "job_id": job_id }))).into_response())
}

async fn job(State(s): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_bytes(&s.store.job(&id)?))
}
