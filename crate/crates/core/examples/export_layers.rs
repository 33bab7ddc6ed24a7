//! Write the map layers a GIS client consumes: event placemarks as KML and
//! GeoJSON, a choropleth joined to county outlines, and a timeline.
//!
//! ```bash
//! cargo run -p eventmap --example export_layers -- /tmp/layers
//! ```

use std::path::PathBuf;

use eventmap::corpus::synth_events;
use eventmap::geoexport::{write_geojson_events, write_geojson_layer, write_kml, write_timeline_json, RegionPolygons};
use eventmap::thematic::{aggregate_choropleth, timeline_series, Metric, Ramp, Scale, Scheme, Scope};
use eventmap::{ChoroplethLayer, Gazetteer, SynthProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "layers".into()));
    std::fs::create_dir_all(&dir)?;
    let gaz = Gazetteer::kansas();
    let profile = SynthProfile { total: 400, n_counties: 60, ..SynthProfile::kansas_2000_2011() };
    let events = synth_events(&profile, &gaz, 5)?;

    // Without outline data, each county is drawn as a box around its centroid.
    let polygons = RegionPolygons::centroid_boxes(&gaz, 0.12);
    let values = aggregate_choropleth(&events, None, Metric::Count, None, Scope::All)?;
    let layer = ChoroplethLayer::build(Metric::Count, values, Scheme::Quantile, 5, Ramp::SequentialBlue)?;

    let files = [
        ("events.kml", write_kml(&events)),
        ("events.geojson", write_geojson_events(&events)),
        ("counts.geojson", write_geojson_layer(&layer, &polygons)?),
        ("timeline.json", write_timeline_json(&timeline_series(&events, Scale::Monthly, None))),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, &bytes)?;
        println!("{:<40} {:>9} bytes", path.display(), bytes.len());
    }
    Ok(())
}
