//! Choropleth layers and calendar time series.

use std::collections::{BTreeMap, BTreeSet};

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::GeoEvent;
use crate::relevance::{FrequencyMetric, ProportionTable};

#[derive(Debug, Error, PartialEq)]
pub enum ThematicError {
    #[error("no values to classify")]
    EmptyValues,
    #[error("values must be finite")]
    NonFinite,
    #[error("class count {0} is out of range")]
    ClassCount(usize),
    #[error("topic_prop needs a proportion table and a topic")]
    MissingTable,
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Count,
    TopicProp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    All,
    Year(i32),
}

impl Scope {
    fn admits(self, year: i32) -> bool {
        match self {
            Scope::All => true,
            Scope::Year(y) => y == year,
        }
    }
}

/// Value per county. Counties without data are left out.
///
/// `Count` sums events. `TopicProp` reads the table cell for the scoped year,
/// or the mean over years when the scope is `All`.
pub fn aggregate_choropleth(
    events: &[GeoEvent],
    table: Option<&ProportionTable>,
    metric: Metric,
    topic: Option<&str>,
    scope: Scope,
) -> Result<BTreeMap<String, f64>, ThematicError> {
    match metric {
        Metric::Count => {
            let mut out = BTreeMap::new();
            for e in events.iter().filter(|e| scope.admits(e.year())) {
                *out.entry(e.fips.clone()).or_insert(0.0) += 1.0;
            }
            Ok(out)
        }
        Metric::TopicProp => {
            let (table, topic) = table.zip(topic).ok_or(ThematicError::MissingTable)?;
            match scope {
                Scope::All => table
                    .region_values(topic, FrequencyMetric::MeanProportion)
                    .map_err(|_| ThematicError::UnknownTopic(topic.into())),
                Scope::Year(year) => {
                    let k = table.topic_index(topic).ok_or_else(|| ThematicError::UnknownTopic(topic.into()))?;
                    Ok(table
                        .cells()
                        .iter()
                        .filter(|((_, y), _)| *y == year)
                        .filter_map(|((fips, _), cell)| cell.proportions.get(&k).map(|&p| (fips.clone(), p)))
                        .collect())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EqualInterval,
    #[default]
    Quantile,
}

pub const DEFAULT_CLASSES: usize = 5;

/// Interior class breaks, strictly ascending and all below the maximum.
/// Classes are `(-∞, b1], (b1, b2], …, (b_last, ∞)`.
pub fn classify_breaks(values: &[f64], scheme: Scheme, n_classes: usize) -> Result<Vec<f64>, ThematicError> {
    if n_classes < 1 {
        return Err(ThematicError::ClassCount(n_classes));
    }
    if values.is_empty() {
        return Err(ThematicError::EmptyValues);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ThematicError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    let n = n_classes.min(distinct.len());
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let raw: Vec<f64> = (1..n)
        .map(|i| match scheme {
            Scheme::EqualInterval => min + i as f64 * (max - min) / n as f64,
            Scheme::Quantile => {
                let rank = (i * sorted.len()).div_ceil(n);
                sorted[rank - 1]
            }
        })
        .collect();
    let mut breaks: Vec<f64> = Vec::with_capacity(raw.len());
    for b in raw {
        if b < max && breaks.last().is_none_or(|&last| b > last) {
            breaks.push(b);
        }
    }
    Ok(breaks)
}

/// Index of the class holding `value`.
pub fn class_of(value: f64, breaks: &[f64]) -> usize {
    breaks.iter().take_while(|&&b| value > b).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ramp {
    SequentialRed,
    SequentialBlue,
    #[default]
    Grayscale,
}

impl Ramp {
    fn stops(self) -> [[u8; 3]; 3] {
        match self {
            Ramp::Grayscale => [[0xEE; 3], [0x77; 3], [0x22; 3]],
            Ramp::SequentialRed => [[0xFE, 0xE5, 0xD9], [0xFB, 0x6A, 0x4A], [0xA5, 0x0F, 0x15]],
            Ramp::SequentialBlue => [[0xEF, 0xF3, 0xFF], [0x6B, 0xAE, 0xD6], [0x08, 0x51, 0x9C]],
        }
    }
}

/// `n` colors from light to dark, sampled evenly along the ramp's light,
/// middle and dark stops. A single class takes the middle stop.
pub fn assign_palette(n_classes: usize, ramp: Ramp) -> Result<Vec<String>, ThematicError> {
    if !(1..=9).contains(&n_classes) {
        return Err(ThematicError::ClassCount(n_classes));
    }
    let stops = ramp.stops();
    Ok((0..n_classes)
        .map(|i| {
            let t = if n_classes == 1 { 0.5 } else { i as f64 / (n_classes - 1) as f64 };
            let (a, b, u) = if t <= 0.5 { (stops[0], stops[1], t * 2.0) } else { (stops[1], stops[2], t * 2.0 - 1.0) };
            let c: Vec<u8> = (0..3).map(|j| (a[j] as f64 + (b[j] as f64 - a[j] as f64) * u).round() as u8).collect();
            format!("#{:02X}{:02X}{:02X}", c[0], c[1], c[2])
        })
        .collect())
}

/// Relative luminance of a `#RRGGBB` color on a 0-255 scale.
pub fn luminance(hex: &str) -> f64 {
    let c = |i: usize| u8::from_str_radix(&hex[1 + 2 * i..3 + 2 * i], 16).map_or(0.0, f64::from);
    0.2126 * c(0) + 0.7152 * c(1) + 0.0722 * c(2)
}

/// A classified, colored region layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoroplethLayer {
    pub metric: Metric,
    pub scheme: Scheme,
    pub breaks: Vec<f64>,
    pub colors: Vec<String>,
    pub values: BTreeMap<String, f64>,
}

impl ChoroplethLayer {
    pub fn build(
        metric: Metric,
        values: BTreeMap<String, f64>,
        scheme: Scheme,
        n_classes: usize,
        ramp: Ramp,
    ) -> Result<Self, ThematicError> {
        if values.is_empty() {
            return Ok(Self { metric, scheme, breaks: Vec::new(), colors: Vec::new(), values });
        }
        let v: Vec<f64> = values.values().copied().collect();
        let breaks = classify_breaks(&v, scheme, n_classes)?;
        let colors = assign_palette(breaks.len() + 1, ramp)?;
        Ok(Self { metric, scheme, breaks, colors, values })
    }

    pub fn class(&self, fips: &str) -> Option<usize> {
        self.values.get(fips).map(|&v| class_of(v, &self.breaks))
    }

    pub fn color(&self, fips: &str) -> Option<&str> {
        self.class(fips).map(|c| self.colors[c].as_str())
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("layer serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Monthly,
    Yearly,
}

/// Event counts per calendar bucket, contiguous from the first to the last
/// event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub scale: Scale,
    pub series: Vec<(String, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fips: Option<String>,
}

impl TimeSeries {
    pub fn total(&self) -> u64 {
        self.series.iter().map(|(_, c)| c).sum()
    }
}

pub fn timeline_series(events: &[GeoEvent], scale: Scale, fips: Option<&str>) -> TimeSeries {
    let key = |e: &GeoEvent| match scale {
        Scale::Monthly => e.date().year() * 12 + e.date().month0() as i32,
        Scale::Yearly => e.date().year(),
    };
    let mut counts: BTreeMap<i32, u64> = BTreeMap::new();
    for e in events.iter().filter(|e| fips.is_none_or(|f| e.fips == f)) {
        *counts.entry(key(e)).or_insert(0) += 1;
    }
    let series = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&first), Some(&last)) => (first..=last)
            .map(|b| {
                let label = match scale {
                    Scale::Monthly => format!("{:04}-{:02}", b.div_euclid(12), b.rem_euclid(12) + 1),
                    Scale::Yearly => format!("{b:04}"),
                };
                (label, counts.get(&b).copied().unwrap_or(0))
            })
            .collect(),
        _ => Vec::new(),
    };
    TimeSeries { scale, series, fips: fips.map(str::to_string) }
}

/// Counties present in a set of events.
pub fn counties(events: &[GeoEvent]) -> BTreeSet<&str> {
    events.iter().map(|e| e.fips.as_str()).collect()
}
