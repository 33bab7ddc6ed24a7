//! Mark the counties whose "Abandoned dump site" proportion exceeds a
//! threshold, year by year, from a published proportion table.
//!
//! ```bash
//! cargo run -p eventmap --example table1_marks -- 0.02
//! ```

use eventmap::relevance::mark_events;
use eventmap::{Gazetteer, ProportionTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let threshold: f64 = std::env::args().nth(1).map_or(Ok(0.02), |s| s.parse())?;
    let table = ProportionTable::from_csv(include_bytes!("../fixtures/table1.csv"))?;
    let gaz = Gazetteer::kansas();
    let topic = "Abandoned dump site";

    println!("{topic}, threshold {threshold}");
    for year in table.years() {
        let marks = mark_events(&table, topic, threshold, year)?;
        let names: Vec<String> = marks
            .marked
            .iter()
            .map(|fips| gaz.by_fips(fips).map_or(fips.clone(), |c| c.county_name.clone()))
            .collect();
        let row: Vec<String> = ["20035", "20037", "20021", "20155"]
            .iter()
            .map(|f| table.proportion(f, year, topic).map_or("-".into(), |p| format!("{p:.4}")))
            .collect();
        println!("{year}  [{}]  marked: {}", row.join(" "), if names.is_empty() { "none".into() } else { names.join(", ") });
    }
    Ok(())
}
