//! County-year topic tables and the decisions drawn from them.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::GeoEvent;
use crate::lda::ThetaMatrix;

#[derive(Debug, Error)]
pub enum RelevanceError {
    #[error("theta has {theta_rows} rows but there are {events} events")]
    Alignment { theta_rows: usize, events: usize },
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error("topic {0} has zero total mass")]
    DegenerateTopic(usize),
    #[error("empty range: lo {lo} > hi {hi}")]
    Range { lo: f64, hi: f64 },
    #[error("table row {line}: {message}")]
    Row { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Topic proportions of one county-year.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cell {
    /// Topic index → mean proportion.
    pub proportions: BTreeMap<usize, f64>,
    pub n_reports: Option<usize>,
}

/// Mean topic proportion per (county, year, topic).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProportionTable {
    topics: Vec<String>,
    cells: BTreeMap<(String, i32), Cell>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    fips: String,
    year: i32,
    topic: String,
    proportion: f64,
    n_reports: Option<usize>,
}

impl ProportionTable {
    pub fn topics(&self) -> &[String] {
        &self.topics
    }

    pub fn topic_index(&self, label: &str) -> Option<usize> {
        self.topics.iter().position(|t| t == label)
    }

    pub fn cells(&self) -> &BTreeMap<(String, i32), Cell> {
        &self.cells
    }

    pub fn cell(&self, fips: &str, year: i32) -> Option<&Cell> {
        self.cells.get(&(fips.to_string(), year))
    }

    pub fn proportion(&self, fips: &str, year: i32, topic: &str) -> Option<f64> {
        let k = self.topic_index(topic)?;
        self.cell(fips, year)?.proportions.get(&k).copied()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.cells.keys().map(|(_, y)| *y).collect()
    }

    fn intern(&mut self, label: &str) -> usize {
        match self.topic_index(label) {
            Some(k) => k,
            None => {
                self.topics.push(label.to_string());
                self.topics.len() - 1
            }
        }
    }

    /// Reads the `fips,year,topic,proportion,n_reports` CSV layout.
    /// `n_reports` may be blank.
    pub fn from_csv(bytes: &[u8]) -> Result<Self, RelevanceError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
        let mut table = Self::default();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row?;
            if !(0.0..=1.0).contains(&row.proportion) {
                return Err(RelevanceError::Row { line, message: format!("proportion {} outside [0, 1]", row.proportion) });
            }
            let k = table.intern(&row.topic);
            let cell = table.cells.entry((row.fips, row.year)).or_default();
            if cell.proportions.insert(k, row.proportion).is_some() {
                return Err(RelevanceError::Row { line, message: "duplicate cell".into() });
            }
            match (cell.n_reports, row.n_reports) {
                (Some(a), Some(b)) if a != b => {
                    return Err(RelevanceError::Row { line, message: format!("report count {b} disagrees with {a}") });
                }
                (None, Some(b)) => cell.n_reports = Some(b),
                _ => {}
            }
        }
        Ok(table)
    }

    /// Rows ordered by fips, year, then topic order.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(["fips", "year", "topic", "proportion", "n_reports"]).expect("in-memory write");
        for ((fips, year), cell) in &self.cells {
            for (&k, p) in &cell.proportions {
                let count = cell.n_reports.map(|n| n.to_string()).unwrap_or_default();
                writer
                    .write_record([fips.as_str(), &year.to_string(), &self.topics[k], &p.to_string(), &count])
                    .expect("in-memory write");
            }
        }
        writer.into_inner().expect("in-memory flush")
    }

    /// Per county, an aggregate of a topic's column across years.
    pub fn region_values(&self, topic: &str, metric: FrequencyMetric) -> Result<BTreeMap<String, f64>, RelevanceError> {
        let k = self.topic_index(topic).ok_or_else(|| RelevanceError::UnknownTopic(topic.into()))?;
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for ((fips, _), cell) in &self.cells {
            let value = match metric {
                FrequencyMetric::EventCount => {
                    cell.n_reports.ok_or_else(|| RelevanceError::Invalid("table has no report counts".into()))? as f64
                }
                FrequencyMetric::MeanProportion => match cell.proportions.get(&k) {
                    Some(&p) => p,
                    None => continue,
                },
            };
            let entry = sums.entry(fips.clone()).or_default();
            entry.0 += value;
            entry.1 += 1;
        }
        Ok(sums
            .into_iter()
            .map(|(fips, (sum, n))| match metric {
                FrequencyMetric::EventCount => (fips, sum),
                FrequencyMetric::MeanProportion => (fips, sum / n as f64),
            })
            .collect())
    }
}

fn check_alignment(theta: &ThetaMatrix, events: &[GeoEvent]) -> Result<(), RelevanceError> {
    if theta.num_docs() != events.len() {
        return Err(RelevanceError::Alignment { theta_rows: theta.num_docs(), events: events.len() });
    }
    Ok(())
}

/// Averages θ over the reports of each county-year. `topic_labels` names the
/// columns of `theta`.
pub fn build_table(theta: &ThetaMatrix, events: &[GeoEvent], topic_labels: &[String]) -> Result<ProportionTable, RelevanceError> {
    check_alignment(theta, events)?;
    let k = topic_labels.len();
    if theta.rows().iter().any(|r| r.len() != k) {
        return Err(RelevanceError::Invalid(format!("theta rows must have {k} entries")));
    }
    let mut sums: BTreeMap<(String, i32), (Vec<f64>, usize)> = BTreeMap::new();
    for (row, event) in theta.rows().iter().zip(events) {
        let entry = sums.entry((event.fips.clone(), event.year())).or_insert_with(|| (vec![0.0; k], 0));
        for (s, x) in entry.0.iter_mut().zip(row) {
            *s += x;
        }
        entry.1 += 1;
    }
    let cells = sums
        .into_iter()
        .map(|(key, (sum, n))| {
            let proportions = sum.into_iter().map(|s| s / n as f64).enumerate().collect();
            (key, Cell { proportions, n_reports: Some(n) })
        })
        .collect();
    Ok(ProportionTable { topics: topic_labels.to_vec(), cells })
}

/// Counties marked for one topic in one year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkSet {
    pub topic: String,
    pub threshold: f64,
    pub year: i32,
    pub marked: BTreeSet<String>,
}

/// Counties whose proportion for `topic` in `year` is strictly above
/// `threshold`.
pub fn mark_events(table: &ProportionTable, topic: &str, threshold: f64, year: i32) -> Result<MarkSet, RelevanceError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(RelevanceError::Threshold(threshold));
    }
    let k = table.topic_index(topic).ok_or_else(|| RelevanceError::UnknownTopic(topic.into()))?;
    let marked = table
        .cells
        .iter()
        .filter(|((_, y), cell)| *y == year && cell.proportions.get(&k).is_some_and(|&p| p > threshold))
        .map(|((fips, _), _)| fips.clone())
        .collect();
    Ok(MarkSet { topic: topic.into(), threshold, year, marked })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBucket {
    Year,
    Month,
}

impl TimeBucket {
    pub fn label(self, date: chrono::NaiveDate) -> String {
        match self {
            TimeBucket::Year => format!("{:04}", date.year()),
            TimeBucket::Month => format!("{:04}-{:02}", date.year(), date.month()),
        }
    }
}

/// `p(county, bucket | topic)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationTimePosterior {
    pub topic: usize,
    pub bucket: TimeBucket,
    /// (fips, bucket label) → probability.
    #[serde(serialize_with = "serialize_cells")]
    pub cells: BTreeMap<(String, String), f64>,
}

#[derive(Serialize)]
struct PosteriorCell<'a> {
    fips: &'a str,
    bucket: &'a str,
    probability: f64,
}

fn serialize_cells<S: serde::Serializer>(cells: &BTreeMap<(String, String), f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(cells.iter().map(|((fips, bucket), &probability)| PosteriorCell { fips, bucket, probability }))
}

pub fn location_time_posterior(
    theta: &ThetaMatrix,
    events: &[GeoEvent],
    topic: usize,
    bucket: TimeBucket,
) -> Result<LocationTimePosterior, RelevanceError> {
    check_alignment(theta, events)?;
    let mut mass: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (row, event) in theta.rows().iter().zip(events) {
        let x = *row.get(topic).ok_or_else(|| RelevanceError::UnknownTopic(topic.to_string()))?;
        mass.entry((event.fips.clone(), bucket.label(event.date()))).or_default().push(x);
    }
    // Sorted summation keeps the result independent of event order.
    let cells: BTreeMap<_, f64> = mass
        .into_iter()
        .map(|(key, mut xs)| {
            xs.sort_by(f64::total_cmp);
            (key, xs.iter().sum())
        })
        .collect();
    let total: f64 = cells.values().sum();
    if total <= 0.0 {
        return Err(RelevanceError::DegenerateTopic(topic));
    }
    Ok(LocationTimePosterior {
        topic,
        bucket,
        cells: cells.into_iter().map(|(k, v)| (k, v / total)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMetric {
    EventCount,
    MeanProportion,
}

/// Number of events per county.
pub fn event_counts(events: &[GeoEvent]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for e in events {
        *out.entry(e.fips.clone()).or_insert(0.0) += 1.0;
    }
    out
}

/// Regions whose value lies in `[lo, hi]`; `hi` may be infinite.
pub fn frequency_filter(values: &BTreeMap<String, f64>, lo: f64, hi: f64) -> Result<BTreeSet<String>, RelevanceError> {
    if lo > hi || lo.is_nan() || hi.is_nan() {
        return Err(RelevanceError::Range { lo, hi });
    }
    Ok(values.iter().filter(|(_, &v)| v >= lo && v <= hi).map(|(k, _)| k.clone()).collect())
}
