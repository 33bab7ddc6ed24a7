//! Parse a small CSV batch and resolve each report to a Kansas county.
//!
//! ```bash
//! cargo run -p eventmap --example georeference
//! ```

use eventmap::ingest::{georeference_all, parse_records, RecordFormat};
use eventmap::{Gazetteer, StudyWindow};

const BATCH: &str = "\
id,date,state,county,address,event_type,report_text
a1,2004-03-18,KS,Reno,,Abandoned dump site,Deputies found a dump of tubing and jars near a creek
a2,2004-05-02,KS,,\"1200 Main St, Winfield, KS 67156\",Residential lab,Officers seized a working lab in a house
a3,2004-06-11,KS,Riley County,,Vehicle lab,A car with a mobile lab was stopped on K-18
a4,2004-07-30,KS,Nowhere,,Vehicle lab,No such county
a5,1999-12-31,KS,Reno,,Residential lab,Outside the study window
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gaz = Gazetteer::kansas();
    println!("gazetteer: {} counties", gaz.len());

    let batch = parse_records(BATCH.as_bytes(), RecordFormat::Csv, &StudyWindow::default())?;
    for err in &batch.errors {
        println!("rejected {err}");
    }

    let (events, failed) = georeference_all(&batch.records, &gaz);
    for e in &events {
        println!(
            "{:>3}  {}  fips {}  {:<12} ({:.4}, {:.4})",
            e.id(),
            e.date(),
            e.fips,
            e.canonical_county,
            e.lat,
            e.lon
        );
    }
    for e in &failed {
        println!("unresolved: {e}");
    }

    if let Some(entry) = gaz.by_zip("67156") {
        println!("ZIP 67156 -> {} County ({})", entry.county_name, entry.fips);
    }
    Ok(())
}
