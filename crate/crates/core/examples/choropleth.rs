//! Yearly seizure counts per county, classified two ways and colored with a
//! sequential ramp.
//!
//! ```bash
//! cargo run -p eventmap --example choropleth -- 2006
//! ```

use eventmap::corpus::synth_events;
use eventmap::thematic::{aggregate_choropleth, Metric, Ramp, Scheme, Scope};
use eventmap::{ChoroplethLayer, Gazetteer, SynthProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let year: i32 = std::env::args().nth(1).map_or(Ok(2006), |s| s.parse())?;
    let events = synth_events(&SynthProfile::kansas_2000_2011(), &Gazetteer::kansas(), 2011)?;
    let values = aggregate_choropleth(&events, None, Metric::Count, None, Scope::Year(year))?;
    println!("{year}: {} counties, {} events", values.len(), values.values().sum::<f64>());

    for scheme in [Scheme::Quantile, Scheme::EqualInterval] {
        let layer = ChoroplethLayer::build(Metric::Count, values.clone(), scheme, 5, Ramp::SequentialRed)?;
        println!("{scheme:?}: breaks {:?}", layer.breaks);
        let mut sizes = vec![0; layer.colors.len()];
        for fips in layer.values.keys() {
            sizes[layer.class(fips).unwrap()] += 1;
        }
        for (color, n) in layer.colors.iter().zip(sizes) {
            println!("  {color}  {n:>3} counties");
        }
    }
    Ok(())
}
