//! Report text to indexed corpus, plus synthetic event generation.

use std::collections::{HashMap, HashSet};

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{GeoEvent, Gazetteer, RawEvent};
use crate::lda;

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("vocabulary is empty after filtering (min_count = {0})")]
    EmptyVocabulary(usize),
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("no events to build a corpus from")]
    NoEvents,
    #[error("invalid synthesis profile: {0}")]
    Profile(String),
}

/// A set of words dropped during tokenization.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The bundled 127-word English list.
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    pub fn none() -> Self {
        Self::default()
    }

    /// One word per line; blank lines ignored, words lowercased.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

/// Lowercases, splits on non-alphanumeric characters, then drops one-character
/// tokens and stopwords.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2 && !stopwords.contains(t))
        .map(String::from)
        .collect()
}

/// Dense word index. Index order is descending frequency, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Self { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: u32) -> Option<&str> {
        self.words.get(index as usize).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.words.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let words = Vec::<String>::deserialize(deserializer)?;
        let vocab = Self::from_words(words);
        if vocab.index.len() != vocab.words.len() {
            return Err(serde::de::Error::custom("vocabulary contains duplicate words"));
        }
        Ok(vocab)
    }
}

pub fn build_vocabulary<S: AsRef<str>>(
    token_lists: &[Vec<S>],
    min_count: usize,
) -> Result<Vocabulary, CorpusError> {
    if min_count < 1 {
        return Err(CorpusError::InvalidMinCount);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for token in token_lists.iter().flatten() {
        *counts.entry(token.as_ref()).or_default() += 1;
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(CorpusError::EmptyVocabulary(min_count));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocabulary::from_words(
        kept.into_iter().map(|(w, _)| w.to_string()).collect(),
    ))
}

/// Days since 1970-01-01 as a real number.
pub fn days_since_epoch(date: NaiveDate) -> f64 {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
    (date - epoch).num_days() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub tokens: Vec<u32>,
    /// Days since 1970-01-01.
    pub timestamp: f64,
    pub date: NaiveDate,
    pub event_id: String,
    pub fips: String,
    pub year: i32,
}

impl Document {
    /// A document with no event metadata, dated 1970-01-01.
    pub fn from_tokens(tokens: Vec<u32>) -> Self {
        Self {
            tokens,
            timestamp: 0.0,
            date: NaiveDate::from_ymd_opt(1970, 1, 1).unwrap(),
            event_id: String::new(),
            fips: String::new(),
            year: 1970,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocabulary: Vocabulary,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(vocabulary: Vocabulary, documents: Vec<Document>) -> Self {
        Self { vocabulary, documents }
    }

    /// Builds an undated corpus from token index lists.
    pub fn from_token_ids(vocabulary: Vocabulary, docs: Vec<Vec<u32>>) -> Self {
        Self {
            vocabulary,
            documents: docs.into_iter().map(Document::from_tokens).collect(),
        }
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }
}

/// One document per event, in event order. Tokens missing from the
/// vocabulary are dropped; documents left empty are kept.
pub fn corpus_from_events(
    events: &[GeoEvent],
    stopwords: &Stopwords,
    min_count: usize,
) -> Result<Corpus, CorpusError> {
    if events.is_empty() {
        return Err(CorpusError::NoEvents);
    }
    let token_lists: Vec<Vec<String>> = events
        .iter()
        .map(|e| tokenize(&e.raw.report_text, stopwords))
        .collect();
    let vocabulary = build_vocabulary(&token_lists, min_count)?;
    let documents = events
        .iter()
        .zip(&token_lists)
        .map(|(event, tokens)| Document {
            tokens: tokens.iter().filter_map(|t| vocabulary.get(t)).collect(),
            timestamp: days_since_epoch(event.raw.date),
            date: event.raw.date,
            event_id: event.raw.id.clone(),
            fips: event.fips.clone(),
            year: event.raw.date.year(),
        })
        .collect();
    Ok(Corpus { vocabulary, documents })
}

/// Event-type inventory used by the synthesizer; type `k` is topic `k`.
pub const EVENT_TYPES: [&str; 50] = [
    "Abandoned dump site",
    "Active one-pot lab",
    "Anhydrous ammonia theft",
    "Red phosphorus lab",
    "Shake and bake bottle",
    "Mobile vehicle lab",
    "Motel room lab",
    "Residential kitchen lab",
    "Storage unit lab",
    "Rural outbuilding lab",
    "Chemical waste burn pit",
    "Roadside trash dump",
    "Glassware seizure",
    "Precursor purchase violation",
    "Pseudoephedrine smurfing ring",
    "Lithium battery extraction",
    "Hydrogen chloride generator",
    "Tank valve tampering",
    "Child endangerment lab",
    "Fire or explosion lab",
    "Booby trapped structure",
    "Farm cooperative theft",
    "Traffic stop lab components",
    "Probation search lab",
    "Apartment complex lab",
    "Trailer park lab",
    "Camping site lab",
    "Creek bank dump",
    "Field burn residue",
    "Chemical odor complaint",
    "Utility worker discovery",
    "Landlord report lab",
    "Warrant service lab",
    "Informant tip lab",
    "Multi-agency task force raid",
    "Large scale superlab",
    "Ice conversion lab",
    "Iodine crystal lab",
    "Solvent drum cache",
    "Contaminated vehicle",
    "Contaminated residence",
    "Hazmat cleanup referral",
    "Interstate trafficking stop",
    "Postal package seizure",
    "Pharmacy log alert",
    "Hotel housekeeping discovery",
    "Abandoned barn lab",
    "Cooking vessel recovery",
    "Cold cook method lab",
    "Meth oil extraction",
];

const BACKGROUND_WORDS: [&str; 30] = [
    "officers", "seized", "deputies", "found", "reported", "scene", "suspect", "arrested",
    "investigation", "sheriff", "agents", "evidence", "materials", "containers", "chemicals",
    "methamphetamine", "manufacturing", "equipment", "items", "recovered", "police", "kbi",
    "hazardous", "removed", "located", "tubing", "property", "responded", "samples", "sealed",
];

/// Parameters of the synthetic seizure dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub total: usize,
    /// Inclusive year range.
    pub years: [i32; 2],
    pub n_counties: usize,
    pub n_types: usize,
    pub zipf_exponent: f64,
    pub doc_len_mean: f64,
    /// Relative weight per year of `years`; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year_weights: Option<Vec<f64>>,
}

impl SynthProfile {
    /// 4942 seizures over 104 Kansas counties, 2000 through 2011, 50 event types.
    pub fn kansas_2000_2011() -> Self {
        Self {
            total: 4942,
            years: [2000, 2011],
            n_counties: 104,
            n_types: 50,
            zipf_exponent: 1.0,
            doc_len_mean: 24.0,
            year_weights: None,
        }
    }

    fn validate(&self, gaz: &Gazetteer) -> Result<(), CorpusError> {
        let fail = |m: String| Err(CorpusError::Profile(m));
        if self.total == 0 {
            return fail("total must be positive".into());
        }
        if self.n_counties == 0 || self.n_counties > self.total {
            return fail(format!(
                "n_counties must be in 1..={} (total), got {}",
                self.total, self.n_counties
            ));
        }
        if self.n_counties > gaz.len() {
            return fail(format!(
                "n_counties {} exceeds gazetteer size {}",
                self.n_counties,
                gaz.len()
            ));
        }
        if self.n_types == 0 || self.n_types > EVENT_TYPES.len() {
            return fail(format!("n_types must be in 1..={}", EVENT_TYPES.len()));
        }
        if self.years[0] > self.years[1] {
            return fail("years must be ascending".into());
        }
        if let Some(w) = &self.year_weights {
            let span = (self.years[1] - self.years[0] + 1) as usize;
            if w.len() != span || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return fail(format!("year_weights needs {span} nonnegative entries"));
            }
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent >= 0.0) {
            return fail("zipf_exponent must be finite and nonnegative".into());
        }
        if !(self.doc_len_mean.is_finite() && self.doc_len_mean > 0.0) {
            return fail("doc_len_mean must be positive".into());
        }
        Ok(())
    }
}

/// The topic model behind synthetic report text: topic `k` puts most of its
/// mass on the words of event type `k`'s label, the rest on a shared
/// background vocabulary.
pub fn synthetic_topic_model(n_types: usize, alpha: f64) -> lda::LdaModel {
    let stop = Stopwords::english();
    let label_words: Vec<Vec<String>> = EVENT_TYPES[..n_types]
        .iter()
        .map(|label| tokenize(label, &stop))
        .collect();
    let mut words: Vec<String> = BACKGROUND_WORDS.iter().map(|w| w.to_string()).collect();
    for w in label_words.iter().flatten() {
        if !words.contains(w) {
            words.push(w.clone());
        }
    }
    let vocab = Vocabulary::from_words(words);
    let beta = label_words
        .iter()
        .map(|signature| {
            let mut row: Vec<f64> = (0..vocab.len())
                .map(|i| if i < BACKGROUND_WORDS.len() { 1.0 } else { 0.02 })
                .collect();
            for w in signature {
                row[vocab.get(w).unwrap() as usize] += 12.0;
            }
            let total: f64 = row.iter().sum();
            row.iter().map(|x| x / total).collect()
        })
        .collect();
    lda::LdaModel::new(n_types, alpha, 0.01, beta, vocab).expect("synthetic model is valid")
}

fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-exponent)).collect()
}

/// Generates `profile.total` georeferenced events over exactly
/// `profile.n_counties` gazetteer counties.
///
/// Counties are shuffled and weighted by a Zipf law; each selected county gets
/// one event up front so the support size is exact. Report text is drawn from
/// [`synthetic_topic_model`], with the event's type boosting its own topic.
pub fn synth_events(
    profile: &SynthProfile,
    gaz: &Gazetteer,
    seed: u64,
) -> Result<Vec<GeoEvent>, CorpusError> {
    profile.validate(gaz)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut counties: Vec<usize> = (0..gaz.len()).collect();
    counties.shuffle(&mut rng);
    counties.truncate(profile.n_counties);
    let county_law = WeightedIndex::new(zipf_weights(profile.n_counties, profile.zipf_exponent))
        .map_err(|e| CorpusError::Profile(e.to_string()))?;
    let mut assignment: Vec<usize> = counties.clone();
    assignment.extend((profile.n_counties..profile.total).map(|_| counties[county_law.sample(&mut rng)]));
    assignment.shuffle(&mut rng);

    let span = (profile.years[1] - profile.years[0] + 1) as usize;
    let year_weights = profile.year_weights.clone().unwrap_or_else(|| vec![1.0; span]);
    let year_law =
        WeightedIndex::new(&year_weights).map_err(|e| CorpusError::Profile(e.to_string()))?;
    let length_law =
        Poisson::new(profile.doc_len_mean).map_err(|e| CorpusError::Profile(e.to_string()))?;

    let alpha = 0.1;
    let boost = 4.0;
    let model = synthetic_topic_model(profile.n_types, alpha);

    let mut drafts = Vec::with_capacity(profile.total);
    for county_idx in assignment {
        let year = profile.years[0] + year_law.sample(&mut rng) as i32;
        let jan1 = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        let days_in_year = (NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap() - jan1).num_days();
        let date = jan1 + chrono::Days::new(rng.random_range(0..days_in_year) as u64);

        let event_type = rng.random_range(0..profile.n_types);
        let mut doc_alpha = vec![alpha; profile.n_types];
        doc_alpha[event_type] += boost;
        let len = (length_law.sample(&mut rng) as usize).max(1);
        let (tokens, _) = lda::sample_document(&model.beta, &doc_alpha, len, &mut rng);
        let text = tokens
            .iter()
            .map(|&w| model.vocabulary.word(w).unwrap())
            .collect::<Vec<_>>()
            .join(" ");

        let entry = &gaz.entries()[county_idx];
        let address = entry.zips.first().map(|zip| {
            format!(
                "{} County Road {}, {} {}",
                rng.random_range(100..9999),
                rng.random_range(1..400),
                entry.state,
                zip
            )
        });
        drafts.push((date, county_idx, event_type, address, text));
    }
    drafts.sort_by_key(|d| d.0);

    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, (date, county_idx, event_type, address, text))| {
            let entry = &gaz.entries()[county_idx];
            GeoEvent {
                raw: RawEvent {
                    id: format!("syn-{:05}", i + 1),
                    date,
                    state: entry.state.clone(),
                    county_name: Some(entry.county_name.clone()),
                    address,
                    event_type: EVENT_TYPES[event_type].to_string(),
                    report_text: text,
                },
                fips: entry.fips.clone(),
                lat: entry.lat,
                lon: entry.lon,
                canonical_county: entry.county_name.clone(),
            }
        })
        .collect())
}
