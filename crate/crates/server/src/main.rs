use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use eventmap::corpus::{synth_events, Stopwords, SynthProfile};
use eventmap::geoexport::{write_geojson_events, write_geojson_layer, write_kml, RegionPolygons};
use eventmap::ingest::{georeference_all, parse_records, Gazetteer, RecordFormat, StudyWindow};
use eventmap::relevance::mark_events;
use eventmap::thematic::{aggregate_choropleth, ChoroplethLayer, Metric, Scope};
use eventmap::ProportionTable;
use eventmap_server::api::{router, AppState};
use eventmap_server::config::Config;
use eventmap_server::store::{EventFilter, EventStore, FitSpec, ModelKind};

#[derive(Parser)]
#[command(name = "eventmap", about = "Georeferenced event mining: ingest, fit, mark, map, export, serve")]
struct Cli {
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Store directory; overrides the config.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Csv,
    Jsonl,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExportFormat {
    Kml,
    Geojson,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Lda,
    Cdtm,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Count,
    TopicProp,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, georeference and store event records.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gazetteer: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
    },
    /// Generate a synthetic event set and store it (or write it as CSV).
    Synth {
        /// `kansas` or a JSON profile file.
        #[arg(long, default_value = "kansas")]
        profile: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a topic model over the stored events.
    Fit {
        #[arg(long, value_enum, default_value = "lda")]
        model: ModelArg,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        sigma2_rate: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Counties whose topic proportion exceeds a threshold in a year.
    Mark {
        #[arg(long)]
        topic: String,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        year: i32,
        #[arg(long)]
        model: Option<String>,
        /// Read a proportion table CSV instead of a stored model.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Register a proportion table CSV as a model.
    ImportTable {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "table-1")]
        id: String,
    },
    /// Write a choropleth layer as JSON, or as GeoJSON joined to polygons.
    Choropleth {
        #[arg(long)]
        year: Option<i32>,
        #[arg(long, value_enum, default_value = "count")]
        metric: MetricArg,
        #[arg(long)]
        topic: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        geojson: bool,
    },
    /// Export stored events.
    Export {
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        from: Option<chrono::NaiveDate>,
        #[arg(long)]
        to: Option<chrono::NaiveDate>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        polygons: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => Config::default(),
    };
    if let Some(s) = cli.store {
        config.store = s;
    }
    let stopwords = match &config.stopwords {
        Some(p) => Stopwords::parse(&std::fs::read_to_string(p)?),
        None => Stopwords::english(),
    };
    let gazetteer = |override_path: Option<&PathBuf>| -> anyhow::Result<Gazetteer> {
        match override_path.or(config.gazetteer.as_ref()) {
            Some(p) => Ok(Gazetteer::load(&std::fs::read(p)?)?),
            None => Ok(Gazetteer::kansas()),
        }
    };
    let store = Arc::new(EventStore::open_with(&config.store, stopwords)?);

    match cli.command {
        Command::Ingest { input, gazetteer: gaz, format } => {
            let gaz = gazetteer(gaz.as_ref())?;
            let format = match format {
                Some(InputFormat::Jsonl) => RecordFormat::Jsonl,
                Some(InputFormat::Csv) => RecordFormat::Csv,
                None if input.extension().is_some_and(|e| e == "jsonl") => RecordFormat::Jsonl,
                None => RecordFormat::Csv,
            };
            let batch = parse_records(&std::fs::read(&input)?, format, &StudyWindow::default())?;
            for e in &batch.errors {
                eprintln!("line {}: {}", e.line, e.message);
            }
            let (resolved, failed) = georeference_all(&batch.records, &gaz);
            for e in &failed {
                eprintln!("{e}");
            }
            let report = store.ingest(&resolved)?;
            println!("{}", serde_json::json!({
                "appended": report.appended,
                "duplicates": report.duplicates.len(),
                "row_errors": batch.errors.len(),
                "unresolved": failed.len(),
            }));
        }
        Command::Synth { profile, seed, out } => {
            let profile = if profile == "kansas" {
                SynthProfile::kansas_2000_2011()
            } else {
                serde_json::from_slice(&std::fs::read(&profile)?)?
            };
            let events = synth_events(&profile, &gazetteer(None)?, seed)?;
            match out {
                Some(path) => {
                    let raw: Vec<_> = events.iter().map(|e| e.raw.clone()).collect();
                    std::fs::write(path, eventmap::ingest::serialize_records(&raw))?;
                    println!("{}", serde_json::json!({ "written": raw.len() }));
                }
                None => println!("{}", serde_json::to_string(&store.ingest(&events)?)?),
            }
        }
        Command::Fit { model, k, seed, alpha, iterations, burn_in, sigma2_rate, max_iters } => {
            let spec = FitSpec {
                model: match model {
                    ModelArg::Lda => ModelKind::Lda,
                    ModelArg::Cdtm => ModelKind::Cdtm,
                },
                alpha,
                iterations,
                burn_in,
                sigma2_rate,
                max_iters,
                min_count: Some(config.defaults.min_count),
                ..FitSpec::lda(k.unwrap_or(config.defaults.k), seed.unwrap_or(config.defaults.seed))
            };
            let id = store.fit(&spec)?;
            println!("{}", serde_json::json!({ "model_id": id }));
        }
        Command::Mark { topic, threshold, year, model, table } => {
            let (table, label) = match table {
                Some(path) => (ProportionTable::from_csv(&std::fs::read(path)?)?, topic),
                None => {
                    let m = store.model(model.as_deref())?;
                    let k = m.topic_index(&topic).with_context(|| format!("unknown topic {topic:?}"))?;
                    (store.table(Some(&m.id))?, m.topic_labels[k].clone())
                }
            };
            let set = mark_events(&table, &label, threshold.unwrap_or(config.defaults.threshold), year)?;
            println!("{}", serde_json::json!({ "marked": set.marked }));
        }
        Command::ImportTable { input, id } => {
            let table = ProportionTable::from_csv(&std::fs::read(input)?)?;
            println!("{}", serde_json::json!({ "model_id": store.import_table(&id, &table)? }));
        }
        Command::Choropleth { year, metric, topic, model, classes, out, geojson } => {
            let scope = year.map_or(Scope::All, Scope::Year);
            let (metric, values) = match metric {
                MetricArg::Count => (Metric::Count, aggregate_choropleth(&store.events(), None, Metric::Count, None, scope)?),
                MetricArg::TopicProp => {
                    let m = store.model(model.as_deref())?;
                    let Some(topic) = topic else { bail!("--topic is required for topic_prop") };
                    let k = m.topic_index(&topic).with_context(|| format!("unknown topic {topic:?}"))?;
                    let table = store.table(Some(&m.id))?;
                    (Metric::TopicProp, aggregate_choropleth(&[], Some(&table), Metric::TopicProp, Some(&m.topic_labels[k]), scope)?)
                }
            };
            let d = &config.defaults;
            let layer = ChoroplethLayer::build(metric, values, d.scheme, classes.unwrap_or(d.classes), d.ramp)?;
            let bytes = if geojson { write_geojson_layer(&layer, &polygons(&config)?)? } else { layer.to_json() };
            std::fs::write(&out, bytes)?;
            println!("{}", serde_json::json!({ "regions": layer.values.len(), "breaks": layer.breaks }));
        }
        Command::Export { format, out, from, to } => {
            let events = store.query(&EventFilter { from, to, ..Default::default() })?;
            let bytes = match format {
                ExportFormat::Kml => write_kml(&events),
                ExportFormat::Geojson => write_geojson_events(&events),
            };
            std::fs::write(&out, bytes)?;
            println!("{}", serde_json::json!({ "exported": events.len() }));
        }
        Command::Serve { port, polygons: poly_path } => {
            if poly_path.is_some() {
                config.polygons = poly_path;
            }
            let state = AppState { store, polygons: Arc::new(polygons(&config)?), defaults: config.defaults.clone() };
            let port = port.unwrap_or(config.defaults.port);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
                tracing::info!("listening on {}", listener.local_addr()?);
                axum::serve(listener, router(state))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await?;
                anyhow::Ok(())
            })?;
        }
    }
    Ok(())
}

fn polygons(config: &Config) -> anyhow::Result<RegionPolygons> {
    match &config.polygons {
        Some(p) => Ok(RegionPolygons::from_geojson(&std::fs::read(p)?)?),
        None => Ok(RegionPolygons::centroid_boxes(&Gazetteer::kansas(), 0.12)),
    }
}
