//! Serve the HTTP API on a local port and query it with plain HTTP/1.1.
//!
//! ```bash
//! cargo run --release -p eventmap-server --example http_service
//! ```

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::sync::Arc;

use eventmap::corpus::synth_events;
use eventmap::geoexport::RegionPolygons;
use eventmap::{Gazetteer, ProportionTable, SynthProfile};
use eventmap_server::api::{router, AppState};
use eventmap_server::config::Defaults;
use eventmap_server::EventStore;

fn request(addr: SocketAddr, method: &str, path: &str, body: &str) -> std::io::Result<String> {
    let mut stream = TcpStream::connect(addr)?;
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )?;
    let mut response = String::new();
    stream.read_to_string(&mut response)?;
    let (head, body) = response.split_once("\r\n\r\n").unwrap_or((&response, ""));
    Ok(format!("{}\n{}", head.lines().next().unwrap_or(""), body))
}

fn show(addr: SocketAddr, method: &str, path: &str, body: &str) -> std::io::Result<String> {
    let out = request(addr, method, path, body)?;
    let shown: String = out.chars().take(300).collect();
    println!("{method} {path}\n{shown}{}\n", if out.len() > 300 { " ..." } else { "" });
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let gaz = Gazetteer::kansas();
    let store = Arc::new(EventStore::open(dir.path())?);
    let profile = SynthProfile { total: 500, n_counties: 50, n_types: 4, ..SynthProfile::kansas_2000_2011() };
    store.ingest(&synth_events(&profile, &gaz, 3)?)?;
    store.import_table("table-1", &ProportionTable::from_csv(include_bytes!("../../core/fixtures/table1.csv"))?)?;

    let state = AppState { store, polygons: Arc::new(RegionPolygons::centroid_boxes(&gaz, 0.12)), defaults: Defaults::default() };
    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    runtime.spawn(async move { axum::serve(listener, router(state)).await });
    println!("listening on {addr}\n");

    show(addr, "GET", "/api/events?fips=20121&from=2008-01-01&to=2008-06-30", "")?;
    show(addr, "GET", "/api/choropleth?metric=count&year=2008&classes=4", "")?;
    show(addr, "GET", "/api/timeline?scale=yearly", "")?;
    show(addr, "GET", "/api/marks?model=table-1&topic=Abandoned%20dump%20site&threshold=0.02&year=2000", "")?;

    let started = show(addr, "POST", "/api/admin/fit", r#"{"model":"lda","k":4,"iterations":200,"burn_in":100}"#)?;
    let job: serde_json::Value = serde_json::from_str(started.lines().nth(1).unwrap_or("{}"))?;
    let job = job["job_id"].as_str().unwrap_or_default().to_string();
    loop {
        let status = request(addr, "GET", &format!("/api/admin/jobs/{job}"), "")?;
        if !status.contains("running") && !status.contains("queued") {
            println!("job {job}: {}\n", status.lines().nth(1).unwrap_or(""));
            break;
        }
        std::thread::sleep(std::time::Duration::from_millis(100));
    }
    show(addr, "GET", "/api/topics", "")?;
    show(addr, "GET", "/api/posterior?topic=0&bucket=year", "")?;
    show(addr, "GET", "/api/marks?topic=0&year=2000", "")?;
    Ok(())
}
