//! Generate the statewide synthetic seizure set (4942 reports, 104 counties,
//! 2000 through 2011) and write it as CSV.
//!
//! ```bash
//! cargo run -p eventmap --example synth_statewide -- /tmp/seizures.csv
//! ```

use std::collections::BTreeSet;

use eventmap::corpus::synth_events;
use eventmap::ingest::serialize_records;
use eventmap::{Gazetteer, SynthProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1);
    let profile = SynthProfile::kansas_2000_2011();
    let events = synth_events(&profile, &Gazetteer::kansas(), 2011)?;

    let counties: BTreeSet<&str> = events.iter().map(|e| e.fips.as_str()).collect();
    let types: BTreeSet<&str> = events.iter().map(|e| e.raw.event_type.as_str()).collect();
    println!("{} events, {} counties, {} event types", events.len(), counties.len(), types.len());
    for e in events.iter().take(3) {
        println!("{} {} {}: {}", e.id(), e.date(), e.canonical_county, e.raw.report_text);
    }

    if let Some(path) = out {
        let raw: Vec<_> = events.iter().map(|e| e.raw.clone()).collect();
        std::fs::write(&path, serialize_records(&raw))?;
        println!("wrote {path}");
    }
    Ok(())
}
