//! Monthly and yearly event timelines, statewide and for one county.
//!
//! ```bash
//! cargo run -p eventmap --example timelines
//! ```

use eventmap::corpus::synth_events;
use eventmap::thematic::{timeline_series, Scale};
use eventmap::{Gazetteer, SynthProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let events = synth_events(&SynthProfile::kansas_2000_2011(), &Gazetteer::kansas(), 2011)?;

    let yearly = timeline_series(&events, Scale::Yearly, None);
    println!("statewide, {} events", yearly.total());
    let peak = yearly.series.iter().map(|(_, n)| *n).max().unwrap_or(1);
    for (label, n) in &yearly.series {
        println!("  {label}  {n:>4}  {}", "#".repeat((*n * 50 / peak) as usize));
    }

    let monthly = timeline_series(&events, Scale::Monthly, None);
    println!("{} monthly buckets, total {}", monthly.series.len(), monthly.total());

    let busiest = &events.iter().max_by_key(|e| events.iter().filter(|o| o.fips == e.fips).count()).unwrap().fips;
    let county = timeline_series(&events, Scale::Yearly, Some(busiest));
    println!("county {busiest}: {:?}", county.series);
    Ok(())
}
