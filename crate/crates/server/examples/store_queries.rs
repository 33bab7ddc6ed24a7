//! Ingest synthetic events into a file-backed store, fit a topic model and
//! run filtered queries. The store survives a reopen with identical answers.
//!
//! ```bash
//! cargo run --release -p eventmap-server --example store_queries
//! ```

use chrono::NaiveDate;
use eventmap::corpus::synth_events;
use eventmap::{Gazetteer, SynthProfile};
use eventmap_server::{EventFilter, EventStore, FitSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let profile = SynthProfile { total: 600, n_counties: 40, n_types: 5, ..SynthProfile::kansas_2000_2011() };
    let events = synth_events(&profile, &Gazetteer::kansas(), 1)?;

    let store = EventStore::open(dir.path())?;
    let report = store.ingest(&events)?;
    println!("appended {}, duplicates {}", report.appended, report.duplicates.len());
    println!("second ingest: duplicates {}", store.ingest(&events[..50])?.duplicates.len());

    let id = store.fit(&FitSpec { iterations: Some(200), burn_in: Some(100), ..FitSpec::lda(5, 0) })?;
    let model = store.model(Some(&id))?;
    for (label, words) in model.topic_labels.iter().zip(&model.top_words) {
        println!("{id} {label:<24} {}", words[..5].join(" "));
    }

    let reno_2006 = EventFilter {
        fips: Some("20155".into()),
        from: NaiveDate::from_ymd_opt(2006, 1, 1),
        to: NaiveDate::from_ymd_opt(2006, 12, 31),
        ..Default::default()
    };
    let topical = EventFilter { topic: Some(model.topic_labels[0].clone()), min_prop: Some(0.3), ..Default::default() };
    for (name, filter) in [("Reno County, 2006", &reno_2006), ("topic 0 above 0.3", &topical)] {
        let found = store.query(filter)?;
        println!("{name}: {} events", found.len());
        for e in found.iter().take(3) {
            println!("  {} {} {}", e.id(), e.date(), e.raw.event_type);
        }
    }

    let before = store.query(&topical)?;
    drop(store);
    let reopened = EventStore::open(dir.path())?;
    println!("reopened: {} events, same answers: {}", reopened.len(), reopened.query(&topical)? == before);
    Ok(())
}
