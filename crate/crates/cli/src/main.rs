use anyhow::{bail, Context, Result};
use bridgerole::metapath::ClassifierThresholds;
use bridgerole::par::Exec;
use bridgerole::pipeline::overpass::{self, BBox};
use bridgerole::pipeline::{
    analyze, build, category_counts, classify_city, ingest, load_json, run_pipeline_with, save_json, whatif, write_outputs,
    BuiltCity, CitySnapshot, ClassifiedCity, PipelineConfig, Stage, WhatIfRequest, CHECKPOINT_FILE, GRAPH_FILE,
    PROFILES_FILE, SNAPSHOT_FILE,
};
use bridgerole::synthetic::{SyntheticCity, SyntheticParams};
use bridgerole::vgae::{read_checkpoint, write_checkpoint, write_embeddings_csv, Checkpoint, TrainReport, Trained};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

const TRAIN_REPORT_FILE: &str = "train_report.json";
const OVERPASS_URL: &str = "https://overpass-api.de/api/interpreter";

#[derive(Parser)]
#[command(name = "bridgerole", version, about = "Bridge role classification from street, bridge and building geodata")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for training, UMAP and k-means.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Download streets, bridges and buildings for a bounding box from Overpass.
    Fetch {
        /// south,west,north,east in degrees
        #[arg(long, allow_hyphen_values = true)]
        bbox: String,
        #[arg(long, default_value = OVERPASS_URL)]
        endpoint: String,
    },
    /// Write a synthetic demo city and a matching config.
    Demo {
        #[arg(long, default_value_t = 30)]
        bridges: usize,
    },
    /// Ingest inputs and build the graph with features.
    Build,
    /// Train the encoder on the built graph.
    Train,
    /// Metapath profiles and rule classification.
    Classify,
    /// Projection, clustering and correlation; writes every export.
    Analyze,
    /// All stages.
    Run,
    /// Reclassify under different k-NN parameters without retraining.
    Whatif {
        #[arg(long)]
        k_shop: Option<usize>,
        #[arg(long)]
        k_hospital: Option<usize>,
        #[arg(long)]
        k_residence: Option<usize>,
        /// Rank this many bridges for funding.
        #[arg(long)]
        budget: Option<usize>,
        /// Threshold override as TOML, e.g. "supply_min = 0.8".
        #[arg(long)]
        thresholds: Option<String>,
    },
    /// Serve the snapshot over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Re-export files from a stored snapshot.
    Export {
        /// Snapshot to read; defaults to the config's output directory.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

fn config(common: &Common) -> Result<PipelineConfig> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(config: &PipelineConfig) -> Result<&Path> {
    std::fs::create_dir_all(&config.output_dir).with_context(|| format!("creating {}", config.output_dir.display()))?;
    Ok(&config.output_dir)
}

fn load_snapshot(config: &PipelineConfig) -> Result<CitySnapshot> {
    let path = config.output_dir.join(SNAPSHOT_FILE);
    CitySnapshot::load(&path).with_context(|| format!("loading {} (run `bridgerole run` first)", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn fetch(bbox: &str, endpoint: &str, dir: &Path) -> Result<()> {
    let bbox = BBox::parse(bbox)?;
    let q = overpass::queries(&bbox);
    let client = reqwest::blocking::Client::builder().timeout(std::time::Duration::from_secs(300)).build()?;
    std::fs::create_dir_all(dir)?;
    for (name, query) in [("streets", &q.streets), ("bridges", &q.bridges), ("buildings", &q.buildings)] {
        eprintln!("fetching {name}");
        let answer = client
            .post(endpoint)
            .form(&[("data", query.as_str())])
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.text())
            .with_context(|| format!("fetching {name} from {endpoint}"))?;
        let path = dir.join(format!("{name}.geojson"));
        std::fs::write(&path, overpass::to_geojson(&answer)?)?;
        eprintln!("wrote {}", path.display());
    }
    write_city_config(dir)
}

fn write_city_config(dir: &Path) -> Result<()> {
    let config = PipelineConfig {
        streets: "streets.geojson".into(),
        bridges: "bridges.geojson".into(),
        buildings: "buildings.geojson".into(),
        output_dir: "out".into(),
        ..Default::default()
    };
    let path = dir.join("city.toml");
    std::fs::write(&path, config.to_toml())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn summarize(snapshot: &CitySnapshot) {
    let m = &snapshot.metrics;
    eprintln!(
        "{} bridges, {} epochs ({:?}), {} clusters via {:?}, silhouette {}",
        m.bridge_count,
        m.training.epochs,
        m.training.stop_reason,
        m.clustering.n_clusters,
        m.clustering.method,
        m.clustering.silhouette.map_or("n/a".to_string(), |s| format!("{s:.3}")),
    );
    for (category, n) in &m.category_counts {
        eprintln!("  {category:<24} {n}");
    }
    eprintln!("content hash {}", snapshot.content_hash);
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let exec = if cli.common.sequential { Exec::Sequential } else { Exec::Parallel };

    match cli.command {
        Command::Fetch { bbox, endpoint } => {
            let dir = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            fetch(&bbox, &endpoint, &dir)?;
        }
        Command::Demo { bridges } => {
            let dir = cli.common.out.clone().unwrap_or_else(|| PathBuf::from("demo"));
            let mut params = SyntheticParams { bridges, ..Default::default() };
            if let Some(seed) = cli.common.seed {
                params.seed = seed;
            }
            SyntheticCity::generate(&params).write_to(&dir)?;
            write_city_config(&dir)?;
        }
        Command::Build => {
            let config = config(&cli.common)?;
            let built = build(&ingest(&config)?, &config, exec)?;
            save_json(Stage::Build, &out_dir(&config)?.join(GRAPH_FILE), &built)?;
            eprintln!("graph: {} nodes, {} bridges", built.graph.node_count(), built.graph.bridges().len());
        }
        Command::Train => {
            let config = config(&cli.common)?;
            let dir = out_dir(&config)?;
            let built: BuiltCity = load_json(Stage::Train, &dir.join(GRAPH_FILE))?;
            let trained = bridgerole::pipeline::train_encoder(&built, &config, exec)?;
            let checkpoint = Checkpoint::new(config.encoder.clone(), trained.weights, trained.embedding);
            write_checkpoint(&checkpoint, std::io::BufWriter::new(std::fs::File::create(dir.join(CHECKPOINT_FILE))?))?;
            write_embeddings_csv(&checkpoint.embedding, std::fs::File::create(dir.join("embeddings.csv"))?)?;
            save_json(Stage::Train, &dir.join(TRAIN_REPORT_FILE), &trained.report)?;
            eprintln!("trained {} epochs, stopped by {:?}", trained.report.epochs.len(), trained.report.stop_reason);
        }
        Command::Classify => {
            let config = config(&cli.common)?;
            let dir = out_dir(&config)?;
            let built: BuiltCity = load_json(Stage::Classify, &dir.join(GRAPH_FILE))?;
            let classified = classify_city(&built.graph, &config.thresholds)?;
            save_json(Stage::Classify, &dir.join(PROFILES_FILE), &classified)?;
            print_json(&category_counts(&classified.classifications))?;
        }
        Command::Analyze => {
            let config = config(&cli.common)?;
            let dir = out_dir(&config)?;
            let built: BuiltCity = load_json(Stage::Analyze, &dir.join(GRAPH_FILE))?;
            let checkpoint = read_checkpoint(std::fs::File::open(dir.join(CHECKPOINT_FILE)).context("run `train` first")?)?;
            if checkpoint.config != config.encoder {
                bail!("checkpoint was trained with a different encoder config; rerun `train`");
            }
            let report: TrainReport = load_json(Stage::Analyze, &dir.join(TRAIN_REPORT_FILE))?;
            let classified: ClassifiedCity = load_json(Stage::Analyze, &dir.join(PROFILES_FILE))?;
            let analysis = analyze(&built.graph, &checkpoint.embedding, &config, exec)?;
            let trained = Trained { weights: checkpoint.weights, embedding: checkpoint.embedding, report };
            let snapshot = CitySnapshot::assemble(config.clone(), built, trained, classified, analysis);
            write_outputs(&snapshot, dir)?;
            summarize(&snapshot);
        }
        Command::Run => {
            let config = config(&cli.common)?;
            let snapshot = run_pipeline_with(&config, exec)?;
            summarize(&snapshot);
        }
        Command::Whatif { k_shop, k_hospital, k_residence, budget, thresholds } => {
            let config = config(&cli.common)?;
            let snapshot = load_snapshot(&config)?;
            let thresholds = match thresholds {
                Some(text) => {
                    let mut value: toml::Table = text.parse().context("parsing --thresholds")?;
                    let base = toml::Table::try_from(snapshot.config.thresholds)?;
                    for (k, v) in base {
                        value.entry(k).or_insert(v);
                    }
                    Some(value.try_into::<ClassifierThresholds>().context("parsing --thresholds")?)
                }
                None => None,
            };
            let request = WhatIfRequest { k_shop, k_hospital, k_residence, thresholds, budget_n: budget };
            print_json(&whatif(&snapshot, &request)?)?;
        }
        Command::Serve { port, host } => {
            let config = config(&cli.common)?;
            let snapshot = Arc::new(load_snapshot(&config)?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad --host/--port")?;
            eprintln!("serving snapshot {} on http://{addr}/api/v1", snapshot.content_hash);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(bridgerole_service::serve(snapshot, addr))?;
        }
        Command::Export { snapshot } => {
            let config = config(&cli.common)?;
            let path = snapshot.unwrap_or_else(|| config.output_dir.join(SNAPSHOT_FILE));
            let snapshot = CitySnapshot::load(&path)?;
            let files = write_outputs(&snapshot, out_dir(&config)?)?;
            eprintln!("wrote {}", files.classification.display());
        }
    }
    Ok(())
}
