//! Event record parsing and gazetteer-based georeferencing.
//!
//! Raw records arrive as CSV or JSONL. Row-level problems (bad dates, missing
//! locations, duplicate ids) are collected per line and never abort a batch;
//! only an undecodable stream or a missing CSV column is fatal.

use std::collections::{HashMap, HashSet};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const KANSAS_GAZETTEER: &str = include_str!("../data/kansas_counties.csv");

/// Columns every events CSV must carry, in canonical order.
pub const EVENT_COLUMNS: [&str; 7] = [
    "id",
    "date",
    "state",
    "county",
    "address",
    "event_type",
    "report_text",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("format error: {0}")]
    Format(String),
    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),
    #[error("gazetteer line {line}: {message}")]
    Gazetteer { line: u64, message: String },
    #[error("unresolved location for event `{id}`")]
    UnresolvedLocation { id: String },
}

/// Record encoding accepted by [`parse_records`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

/// Inclusive date range events must fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl StudyWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

impl Default for StudyWindow {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2011, 12, 31).unwrap(),
        }
    }
}

/// A dated, typed report before location resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub id: String,
    pub date: NaiveDate,
    pub state: String,
    #[serde(rename = "county", default)]
    pub county_name: Option<String>,
    #[serde(default)]
    pub address: Option<String>,
    pub event_type: String,
    pub report_text: String,
}

/// A report resolved to a county and carrying that county's centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoEvent {
    #[serde(flatten)]
    pub raw: RawEvent,
    pub fips: String,
    pub lat: f64,
    pub lon: f64,
    pub canonical_county: String,
}

impl GeoEvent {
    pub fn id(&self) -> &str {
        &self.raw.id
    }

    pub fn date(&self) -> NaiveDate {
        self.raw.date
    }

    pub fn year(&self) -> i32 {
        self.raw.date.year()
    }
}

/// A problem with one input row. `line` is 1-based and counts the CSV header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedBatch {
    pub records: Vec<RawEvent>,
    pub errors: Vec<RowError>,
}

/// Parses an ISO-8601 calendar date, naming the offending component on failure.
pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    let parts: Vec<&str> = s.trim().split('-').collect();
    if parts.len() != 3
        || parts[0].len() != 4
        || parts[1].len() != 2
        || parts[2].len() != 2
        || !parts.iter().all(|p| p.bytes().all(|b| b.is_ascii_digit()))
    {
        return Err(format!("invalid date `{s}`: expected YYYY-MM-DD"));
    }
    let year: i32 = parts[0].parse().unwrap();
    let month: u32 = parts[1].parse().unwrap();
    let day: u32 = parts[2].parse().unwrap();
    if !(1..=12).contains(&month) {
        return Err(format!("invalid month in `{s}`"));
    }
    NaiveDate::from_ymd_opt(year, month, day).ok_or_else(|| format!("invalid day in `{s}`"))
}

fn non_empty(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

/// Checks the per-row invariants shared by both formats.
fn validate(
    record: &RawEvent,
    window: &StudyWindow,
    seen: &mut HashSet<String>,
) -> Result<(), String> {
    if record.id.trim().is_empty() {
        return Err("empty id".into());
    }
    if !window.contains(record.date) {
        return Err(format!(
            "date {} outside study window {}..{}",
            record.date, window.start, window.end
        ));
    }
    if record.county_name.is_none() && record.address.is_none() {
        return Err("neither county nor address present".into());
    }
    if !seen.insert(record.id.clone()) {
        return Err(format!("duplicate id `{}`", record.id));
    }
    Ok(())
}

/// Parses a batch of raw event records, preserving row order.
pub fn parse_records(
    bytes: &[u8],
    format: RecordFormat,
    window: &StudyWindow,
) -> Result<ParsedBatch, IngestError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| IngestError::Format(format!("stream is not valid UTF-8: {e}")))?;
    match format {
        RecordFormat::Csv => parse_csv(text, window),
        RecordFormat::Jsonl => Ok(parse_jsonl(text, window)),
    }
}

fn parse_csv(text: &str, window: &StudyWindow) -> Result<ParsedBatch, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Format(e.to_string()))?
        .clone();
    let mut index = [0usize; 7];
    for (slot, column) in index.iter_mut().zip(EVENT_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == column)
            .ok_or_else(|| IngestError::MissingColumn(column.to_string()))?;
    }
    let [id, date, state, county, address, event_type, report_text] = index;

    let mut batch = ParsedBatch::default();
    let mut seen = HashSet::new();
    for result in reader.records() {
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                batch.errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let parsed = parse_date(field(date)).and_then(|date| {
            let record = RawEvent {
                id: field(id).trim().to_string(),
                date,
                state: field(state).trim().to_string(),
                county_name: non_empty(field(county)),
                address: non_empty(field(address)),
                event_type: field(event_type).trim().to_string(),
                report_text: field(report_text).to_string(),
            };
            validate(&record, window, &mut seen).map(|_| record)
        });
        match parsed {
            Ok(record) => batch.records.push(record),
            Err(message) => batch.errors.push(RowError { line, message }),
        }
    }
    Ok(batch)
}

#[derive(Deserialize)]
struct JsonRow {
    id: String,
    date: String,
    state: String,
    #[serde(default)]
    county: Option<String>,
    #[serde(default)]
    address: Option<String>,
    event_type: String,
    report_text: String,
}

fn parse_jsonl(text: &str, window: &StudyWindow) -> ParsedBatch {
    let mut batch = ParsedBatch::default();
    let mut seen = HashSet::new();
    for (i, line_text) in text.lines().enumerate() {
        let line = i as u64 + 1;
        if line_text.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<JsonRow>(line_text)
            .map_err(|e| e.to_string())
            .and_then(|row| {
                let record = RawEvent {
                    id: row.id.trim().to_string(),
                    date: parse_date(&row.date)?,
                    state: row.state.trim().to_string(),
                    county_name: row.county.as_deref().and_then(non_empty),
                    address: row.address.as_deref().and_then(non_empty),
                    event_type: row.event_type.trim().to_string(),
                    report_text: row.report_text,
                };
                validate(&record, window, &mut seen).map(|_| record)
            });
        match parsed {
            Ok(record) => batch.records.push(record),
            Err(message) => batch.errors.push(RowError { line, message }),
        }
    }
    batch
}

/// Writes records as an events CSV with the canonical header.
pub fn serialize_records(records: &[RawEvent]) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(EVENT_COLUMNS).expect("in-memory write");
    for r in records {
        let date = r.date.to_string();
        writer
            .write_record([
                r.id.as_str(),
                date.as_str(),
                r.state.as_str(),
                r.county_name.as_deref().unwrap_or(""),
                r.address.as_deref().unwrap_or(""),
                r.event_type.as_str(),
                r.report_text.as_str(),
            ])
            .expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

/// Canonical lookup key for county names: casefolded, the word "county"
/// removed, whitespace collapsed.
pub fn normalize_county_name(name: &str) -> String {
    name.to_lowercase()
        .split_whitespace()
        .filter(|w| *w != "county")
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountyEntry {
    pub fips: String,
    pub state: String,
    pub county_name: String,
    pub lat: f64,
    pub lon: f64,
    pub zips: Vec<String>,
}

/// Immutable county lookup table indexed by FIPS, by (state, normalized name)
/// and by ZIP code.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: Vec<CountyEntry>,
    by_fips: HashMap<String, usize>,
    by_name: HashMap<(String, String), usize>,
    by_zip: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct GazetteerRow {
    fips: String,
    state: String,
    county_name: String,
    lat: f64,
    lon: f64,
    #[serde(default)]
    zips: String,
}

impl Gazetteer {
    /// The bundled gazetteer of the 105 Kansas counties.
    pub fn kansas() -> Self {
        Self::load(KANSAS_GAZETTEER.as_bytes()).expect("bundled gazetteer is valid")
    }

    pub fn load(bytes: &[u8]) -> Result<Self, IngestError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| IngestError::Format(format!("gazetteer is not valid UTF-8: {e}")))?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| IngestError::Format(e.to_string()))?
            .clone();
        for column in ["fips", "state", "county_name", "lat", "lon", "zips"] {
            if !headers.iter().any(|h| h == column) {
                return Err(IngestError::MissingColumn(column.to_string()));
            }
        }

        let mut gaz = Gazetteer::default();
        for result in reader.deserialize::<GazetteerRow>() {
            let row = result.map_err(|e| IngestError::Gazetteer {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = gaz.entries.len() as u64 + 2;
            let fail = |message: String| IngestError::Gazetteer { line, message };

            let fips = row.fips.trim().to_string();
            if fips.len() != 5 || !fips.bytes().all(|b| b.is_ascii_digit()) {
                return Err(fail(format!("malformed FIPS `{fips}`")));
            }
            if !(-90.0..=90.0).contains(&row.lat) || !(-180.0..=180.0).contains(&row.lon) {
                return Err(fail(format!(
                    "coordinate out of range: lat={} lon={}",
                    row.lat, row.lon
                )));
            }
            let idx = gaz.entries.len();
            if gaz.by_fips.insert(fips.clone(), idx).is_some() {
                return Err(fail(format!("duplicate FIPS {fips}")));
            }
            let state = row.state.trim().to_uppercase();
            let key = (state.clone(), normalize_county_name(&row.county_name));
            if gaz.by_name.insert(key, idx).is_some() {
                return Err(fail(format!("duplicate county name `{}`", row.county_name)));
            }
            let zips: Vec<String> = row
                .zips
                .split(';')
                .map(str::trim)
                .filter(|z| !z.is_empty())
                .map(String::from)
                .collect();
            for zip in &zips {
                if let Some(other) = gaz.by_zip.insert(zip.clone(), idx) {
                    return Err(fail(format!(
                        "ZIP {zip} already mapped to {}",
                        gaz.entries[other].fips
                    )));
                }
            }
            gaz.entries.push(CountyEntry {
                fips,
                state,
                county_name: row.county_name.trim().to_string(),
                lat: row.lat,
                lon: row.lon,
                zips,
            });
        }
        Ok(gaz)
    }

    pub fn entries(&self) -> &[CountyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_fips(&self, fips: &str) -> Option<&CountyEntry> {
        self.by_fips.get(fips).map(|&i| &self.entries[i])
    }

    pub fn by_name(&self, state: &str, county: &str) -> Option<&CountyEntry> {
        let key = (state.trim().to_uppercase(), normalize_county_name(county));
        self.by_name.get(&key).map(|&i| &self.entries[i])
    }

    pub fn by_zip(&self, zip: &str) -> Option<&CountyEntry> {
        self.by_zip.get(zip).map(|&i| &self.entries[i])
    }
}

/// Five-digit runs in free text, in order of appearance. A trailing `-dddd`
/// ZIP+4 suffix is tolerated; longer digit runs are not ZIPs.
fn zip_candidates(address: &str) -> Vec<&str> {
    let bytes = address.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let bounded_left = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
            let bounded_right = i == bytes.len() || !bytes[i].is_ascii_alphanumeric();
            if i - start == 5 && bounded_left && bounded_right {
                out.push(&address[start..i]);
            }
        } else {
            i += 1;
        }
    }
    out
}

/// Resolves an event to its county: the explicit county name first, then the
/// last ZIP in the address that the gazetteer knows.
pub fn georeference(event: &RawEvent, gaz: &Gazetteer) -> Result<GeoEvent, IngestError> {
    let by_name = event
        .county_name
        .as_deref()
        .and_then(|name| gaz.by_name(&event.state, name));
    let entry = by_name.or_else(|| {
        event.address.as_deref().and_then(|address| {
            zip_candidates(address)
                .into_iter()
                .rev()
                .find_map(|zip| gaz.by_zip(zip))
        })
    });
    let entry = entry.ok_or_else(|| IngestError::UnresolvedLocation {
        id: event.id.clone(),
    })?;
    Ok(GeoEvent {
        raw: event.clone(),
        fips: entry.fips.clone(),
        lat: entry.lat,
        lon: entry.lon,
        canonical_county: entry.county_name.clone(),
    })
}

/// Georeferences a batch, splitting resolved events from failures.
pub fn georeference_all(
    events: &[RawEvent],
    gaz: &Gazetteer,
) -> (Vec<GeoEvent>, Vec<IngestError>) {
    let mut resolved = Vec::with_capacity(events.len());
    let mut failed = Vec::new();
    for event in events {
        match georeference(event, gaz) {
            Ok(geo) => resolved.push(geo),
            Err(e) => failed.push(e),
        }
    }
    (resolved, failed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "id,date,state,county,address,event_type,report_text\n";

    fn window() -> StudyWindow {
        StudyWindow::default()
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn parses_csv_row() {
        let data = format!("{HEADER}e1,2010-04-02,KS,Riley,,lab-seizure,\"tanks seized\"\n");
        let batch = parse_records(data.as_bytes(), RecordFormat::Csv, &window()).unwrap();
        assert!(batch.errors.is_empty());
        assert_eq!(
            batch.records,
            vec![RawEvent {
                id: "e1".into(),
                date: date(2010, 4, 2),
                state: "KS".into(),
                county_name: Some("Riley".into()),
                address: None,
                event_type: "lab-seizure".into(),
                report_text: "tanks seized".into(),
            }]
        );
    }

    #[test]
    fn header_only_is_empty() {
        let batch = parse_records(HEADER.as_bytes(), RecordFormat::Csv, &window()).unwrap();
        assert!(batch.records.is_empty());
        assert!(batch.errors.is_empty());
    }

    #[test]
    fn bad_month_is_row_error() {
        let data = format!(
            "{HEADER}e1,2010-13-01,KS,Riley,,t,x\ne2,2010-01-05,KS,Riley,,t,y\n"
        );
        let batch = parse_records(data.as_bytes(), RecordFormat::Csv, &window()).unwrap();
        assert_eq!(batch.records.len(), 1);
        assert_eq!(batch.records[0].id, "e2");
        assert_eq!(batch.errors.len(), 1);
        assert_eq!(batch.errors[0].line, 2);
        assert!(batch.errors[0].message.contains("invalid month"));
    }

    #[test]
    fn row_invariants_are_collected() {
        let data = format!(
            "{HEADER}e1,1999-12-31,KS,Riley,,t,x\n\
             e2,2001-01-01,KS,,,t,x\n\
             e3,2001-01-01,KS,Riley,,t,x\n\
             e3,2001-01-02,KS,Riley,,t,x\n"
        );
        let batch = parse_records(data.as_bytes(), RecordFormat::Csv, &window()).unwrap();
        assert_eq!(batch.records.len(), 1);
        let lines: Vec<u64> = batch.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 5]);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let data = "id,date,state,county,address,event_type\n";
        let err = parse_records(data.as_bytes(), RecordFormat::Csv, &window()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == "report_text"));
    }

    #[test]
    fn invalid_utf8_is_format_error() {
        let err = parse_records(&[0xff, 0xfe, 0x00], RecordFormat::Csv, &window()).unwrap_err();
        assert!(matches!(err, IngestError::Format(_)));
    }

    #[test]
    fn parses_jsonl() {
        let data = concat!(
            r#"{"id":"a","date":"2004-06-01","state":"KS","county":null,"address":"12 Elm St, Manhattan, KS 66506","event_type":"t","report_text":"x"}"#,
            "\n\n",
            r#"{"id":"b","date":"2004-06-31","state":"KS","county":"Reno","event_type":"t","report_text":"x"}"#,
            "\nnot json\n"
        );
        let batch = parse_records(data.as_bytes(), RecordFormat::Jsonl, &window()).unwrap();
        assert_eq!(batch.records.len(), 1);
        assert_eq!(batch.records[0].county_name, None);
        let lines: Vec<u64> = batch.errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![3, 4]);
        assert!(batch.errors[0].message.contains("invalid day"));
    }

    #[test]
    fn gazetteer_indexes_name_and_zip() {
        let gaz = Gazetteer::load(
            b"fips,state,county_name,lat,lon,zips\n20161,KS,Riley,39.35,-96.74,\"66502;66506\"\n",
        )
        .unwrap();
        let by_name = gaz.by_name("KS", "riley").unwrap();
        let by_zip = gaz.by_zip("66506").unwrap();
        assert_eq!(by_name, by_zip);
        assert_eq!(by_name.fips, "20161");
        assert_eq!(gaz.by_name("ks", "RILEY COUNTY"), Some(by_name));
        assert_eq!(gaz.by_name("KS", "  Riley \t County "), Some(by_name));
    }

    #[test]
    fn gazetteer_rejects_duplicates_and_bad_coordinates() {
        let dup = b"fips,state,county_name,lat,lon,zips\n\
            20161,KS,Riley,39.35,-96.74,66502\n20161,KS,Other,39.0,-96.0,66000\n";
        assert!(matches!(
            Gazetteer::load(dup),
            Err(IngestError::Gazetteer { line: 3, .. })
        ));
        let bad = b"fips,state,county_name,lat,lon,zips\n20161,KS,Riley,95.0,-96.74,\n";
        assert!(Gazetteer::load(bad).is_err());
        let zip = b"fips,state,county_name,lat,lon,zips\n\
            20161,KS,Riley,39.35,-96.74,66502\n20149,KS,Pottawatomie,39.3,-96.3,66502\n";
        assert!(Gazetteer::load(zip).is_err());
    }

    #[test]
    fn bundled_gazetteer_covers_kansas() {
        let gaz = Gazetteer::kansas();
        assert_eq!(gaz.len(), 105);
        let riley = gaz.by_fips("20161").unwrap();
        assert_eq!((riley.lat, riley.lon), (39.35, -96.74));
        assert!(riley.zips.iter().any(|z| z == "66506"));
    }

    fn raw(county: Option<&str>, address: Option<&str>) -> RawEvent {
        RawEvent {
            id: "e1".into(),
            date: date(2010, 4, 2),
            state: "KS".into(),
            county_name: county.map(String::from),
            address: address.map(String::from),
            event_type: "t".into(),
            report_text: String::new(),
        }
    }

    #[test]
    fn georeference_by_county_name() {
        let geo = georeference(&raw(Some("Riley"), None), &Gazetteer::kansas()).unwrap();
        assert_eq!(geo.fips, "20161");
        assert_eq!((geo.lat, geo.lon), (39.35, -96.74));
        assert_eq!(geo.canonical_county, "Riley");
    }

    #[test]
    fn georeference_by_zip() {
        let geo = georeference(
            &raw(None, Some("1701 Anderson Ave, Manhattan, KS 66506")),
            &Gazetteer::kansas(),
        )
        .unwrap();
        assert_eq!(geo.fips, "20161");
    }

    #[test]
    fn county_name_takes_precedence_over_zip() {
        let geo = georeference(&raw(Some("Reno"), Some("KS 66506")), &Gazetteer::kansas())
            .unwrap();
        assert_eq!(geo.fips, "20155");
    }

    #[test]
    fn unknown_county_is_unresolved() {
        let err = georeference(&raw(Some("Atlantis"), None), &Gazetteer::kansas()).unwrap_err();
        assert!(matches!(err, IngestError::UnresolvedLocation { id } if id == "e1"));
    }

    #[test]
    fn zip_candidates_skip_long_runs() {
        assert_eq!(zip_candidates("12345 Main 665061 KS 66506-1234"), vec!["12345", "66506"]);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 ,.\"'\n-]{0,40}"
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            rows in proptest::collection::vec(
                (arb_text(), proptest::option::of("[A-Za-z ]{1,12}"), proptest::option::of(arb_text()), 0u32..4000),
                0..8,
            )
        ) {
            let records: Vec<RawEvent> = rows
                .into_iter()
                .enumerate()
                .map(|(i, (text, county, address, day))| {
                    let county = county.and_then(|c| non_empty(&c));
                    let address = address.and_then(|a| non_empty(&a));
                    let county = if county.is_none() && address.is_none() {
                        Some("Riley".to_string())
                    } else {
                        county
                    };
                    RawEvent {
                        id: format!("ev{i}"),
                        date: date(2000, 1, 1) + chrono::Days::new(day as u64),
                        state: "KS".into(),
                        county_name: county,
                        address,
                        event_type: "lab seizure".into(),
                        report_text: text,
                    }
                })
                .collect();
            let bytes = serialize_records(&records);
            let batch = parse_records(&bytes, RecordFormat::Csv, &window()).unwrap();
            prop_assert!(batch.errors.is_empty(), "{:?}", batch.errors);
            prop_assert_eq!(batch.records, records);
        }

        #[test]
        fn georeference_is_pure_and_uses_centroid(idx in 0usize..105, upper in any::<bool>()) {
            let gaz = Gazetteer::kansas();
            let entry = &gaz.entries()[idx];
            let name = if upper {
                format!("  {} COUNTY ", entry.county_name.to_uppercase())
            } else {
                entry.county_name.to_lowercase()
            };
            let event = raw(Some(&name), None);
            let a = georeference(&event, &gaz).unwrap();
            let b = georeference(&event, &gaz).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(&a.fips, &entry.fips);
            prop_assert_eq!(a.lat.to_bits(), entry.lat.to_bits());
            prop_assert_eq!(a.lon.to_bits(), entry.lon.to_bits());
        }
    }
}
