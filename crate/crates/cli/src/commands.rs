use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, Context};
use relevance_core::simulation::{
    emit_report, grid_search, parse_report_csv, rank_runs, ranking_to_string, split, write_ranking, ReportFormat,
    SearchSpace, SimulationReport, Split, SplitSpec,
};
use relevance_core::{
    simulate_stream, AverageMode, ClassifierModel, EmbeddingTable, HyperparameterOverrides, Hyperparameters,
    ModelType, PerformanceEstimator, StreamConfig, DEFAULT_DELIVERY_SIZE,
};
use relevance_server::{replay_stream, shutdown_signal, ApiConfig, ReplayConfig, Server, ServerConfig, Sink};

use crate::cli::{DataArgs, EvalReportArgs, ModelArgs, ReplayArgs, ServeArgs, SimulateArgs, StreamArgs, TuneArgs};
use crate::data::{label_mapping, load_corpus, load_embeddings, load_stream_items};
use crate::error::CliError;
use crate::settings::{layer, layer_vec, required, FileConfig};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "models";

struct Data {
    datasets: Vec<PathBuf>,
    table: EmbeddingTable,
    spec: SplitSpec,
    file: FileConfig,
}

fn resolve_data(args: DataArgs, file: FileConfig, default_split: fn(u64) -> SplitSpec) -> Result<Data, CliError> {
    let datasets = layer_vec(args.dataset, file.dataset.clone());
    if datasets.is_empty() {
        return Err(CliError::Config("--dataset is required (flag, environment or config file)".into()));
    }
    let seed = layer(args.seed, file.seed).unwrap_or(0);
    let spec = match layer(args.split, file.split.clone()) {
        Some(s) => s
            .parse::<SplitSpec>()
            .map_err(|e| CliError::Config(format!("--split: {e}")))?
            .with_seed(seed),
        None => default_split(seed),
    };
    let embeddings = required(layer(args.embeddings, file.embeddings.clone()), "embeddings")?;
    let table = load_embeddings(&embeddings)?;
    Ok(Data {
        datasets,
        table,
        spec,
        file,
    })
}

fn load_split(data: &Data, args_format: Option<crate::cli::DataFormat>, map: &[String], path: &Path) -> Result<Split, CliError> {
    let format = layer(args_format, data.file.format).unwrap_or(crate::cli::DataFormat::Auto);
    let mapping = label_mapping(map)?;
    let corpus = load_corpus(path, format, &mapping)?;
    split(&corpus, &data.spec).map_err(|e| CliError::data(anyhow!(e).context(format!("dataset {}", path.display()))))
}

fn stream_config(args: &StreamArgs, file: &FileConfig) -> Result<StreamConfig, CliError> {
    let delivery_size = layer(args.delivery_size, file.delivery_size).unwrap_or(DEFAULT_DELIVERY_SIZE);
    if delivery_size == 0 {
        return Err(CliError::Config("--delivery-size must be positive".into()));
    }
    Ok(StreamConfig {
        delivery_size,
        mode: layer(args.mode, file.mode).unwrap_or(AverageMode::Macro),
    })
}

fn hyperparameters(args: &ModelArgs, file: &FileConfig, dim: usize, seed: u64) -> Result<Hyperparameters, CliError> {
    let overrides = HyperparameterOverrides {
        model_type: layer(args.model, file.model),
        learning_rate: layer(args.learning_rate, file.learning_rate),
        batch_size: layer(args.batch_size, file.batch_size),
        epochs: layer(args.epochs, file.epochs),
        dropout: layer(args.dropout, file.dropout),
        recurrent_dropout: layer(args.recurrent_dropout, file.recurrent_dropout),
        filter_size: layer(args.filters, file.filters),
        kernel_size: layer(args.kernel, file.kernel),
        optimizer: layer(args.optimizer, file.optimizer),
        hidden_size: layer(args.hidden, file.hidden),
        max_len: layer(args.max_len, file.max_len),
        embedding_dim: Some(dim),
        seed: Some(seed),
    };
    let hp = overrides.resolve(ModelType::Cnn);
    hp.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(hp)
}

fn report_format(flag: Option<crate::cli::OutputFormat>, file: &FileConfig, out: Option<&Path>) -> ReportFormat {
    if let Some(f) = layer(flag, file.report_format) {
        return f.into();
    }
    match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("md") => ReportFormat::Markdown,
        _ => ReportFormat::Csv,
    }
}

fn render(report: &SimulationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Markdown => report.to_markdown(),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("cannot create {}", parent.display()))
                    .map_err(CliError::Data)?;
            }
            fs::write(p, text)
                .with_context(|| format!("cannot write {}", p.display()))
                .map_err(CliError::Data)
        }
        None => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .context("cannot write to stdout")
                .map_err(CliError::Data)
        }
    }
}

/// Runs `f` over `items` on up to `jobs` threads, preserving order.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<(usize, R)>> = Mutex::new(Vec::with_capacity(items.len()));
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(k) else { break };
                let r = f(item);
                out.lock().unwrap_or_else(|e| e.into_inner()).push((k, r));
            });
        }
    });
    let mut out = out.into_inner().unwrap_or_else(|e| e.into_inner());
    out.sort_by_key(|(k, _)| *k);
    out.into_iter().map(|(_, r)| r).collect()
}

fn summarize(name: &str, report: &SimulationReport, timing: &SimulationReport) {
    let crossing = report.crossing_n().map_or_else(|| "-".to_string(), |n| n.to_string());
    eprintln!(
        "{name}: {} iterations, average P {:.4} R {:.4} F1 {:.4}, trendline crosses average at n={crossing}, \
         mean CPU {:.3}s/iteration",
        report.iterations.len(),
        report.average.precision,
        report.average.recall,
        report.average.f1,
        timing.mean_cpu_seconds(),
    );
}

pub fn simulate(args: SimulateArgs, file: FileConfig) -> Result<(), CliError> {
    let stream = stream_config(&args.stream, &file)?;
    let timing = args.stream.timing || file.timing.unwrap_or(false);
    let jobs = layer(args.stream.jobs, file.jobs).unwrap_or(1);
    let max_iterations = layer(args.stream.max_iterations, file.max_iterations);
    let out = layer(args.out.clone(), file.out.clone());
    let format = report_format(args.report_format, &file, out.as_deref());
    let map = layer_vec(args.data.label_map.clone(), file.map.clone());
    let format_flag = args.data.format;
    let data = resolve_data(args.data, file, SplitSpec::evaluation)?;
    let hp = hyperparameters(&args.model, &data.file, data.table.dim(), data.spec.seed)?;
    let several = data.datasets.len() > 1;
    if several && out.is_none() {
        return Err(CliError::Config("--out must name a directory when several datasets are given".into()));
    }

    let run = |path: &PathBuf| -> Result<(SimulationReport, SimulationReport), CliError> {
        let parts = load_split(&data, format_flag, &map, path)?;
        let mut train = parts.train.vectorize(&data.table, hp.max_len);
        let test = parts.test.vectorize(&data.table, hp.max_len);
        if let Some(n) = max_iterations {
            train.truncate(n.saturating_mul(stream.delivery_size));
        }
        let mut model = ClassifierModel::build(hp.clone())?;
        let report = simulate_stream(&mut model, &train, &test, stream)
            .map_err(|e| CliError::data(anyhow!(e).context(format!("dataset {}", path.display()))))?;
        let written = if timing { report.clone() } else { report.without_timing() };
        Ok((written, report))
    };
    let results = par_map(&data.datasets, jobs, run);

    for (path, result) in data.datasets.iter().zip(results) {
        let (written, measured) = result?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
        summarize(name, &written, &measured);
        let target = match (&out, several) {
            (Some(dir), true) => Some(dir.join(format!("{name}.{}", extension(format)))),
            (o, _) => o.clone(),
        };
        match &target {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)
                        .with_context(|| format!("cannot create {}", parent.display()))
                        .map_err(CliError::Data)?;
                }
                emit_report(&written, p, format)
                    .map_err(|e| CliError::data(anyhow!(e).context(format!("cannot write {}", p.display()))))?;
            }
            None => write_output(None, &render(&written, format))?,
        }
    }
    Ok(())
}

fn extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Markdown => "md",
    }
}

pub fn tune(args: TuneArgs, file: FileConfig) -> Result<(), CliError> {
    let stream = stream_config(&args.stream, &file)?;
    let timing = args.stream.timing || file.timing.unwrap_or(false);
    let jobs = layer(args.stream.jobs, file.jobs).unwrap_or(1);
    let max_iterations = layer(args.stream.max_iterations, file.max_iterations);
    let out = layer(args.out.clone(), file.out.clone());
    let format = report_format(args.report_format, &file, out.as_deref());
    let space = match layer(args.space.clone(), file.space.clone()) {
        Some(p) => SearchSpace::load(&p).map_err(|e| CliError::Config(format!("search space {}: {e}", p.display())))?,
        None => SearchSpace::tuned(),
    };
    if space.is_empty() {
        return Err(CliError::Config("search space contains no configurations".into()));
    }
    let n_samples = layer(args.n_samples, file.n_samples).unwrap_or(space.len());
    if n_samples == 0 {
        return Err(CliError::Config("--n-samples must be positive".into()));
    }
    let map = layer_vec(args.data.label_map.clone(), file.map.clone());
    let format_flag = args.data.format;
    let data = resolve_data(args.data, file, SplitSpec::tuning)?;
    let [path] = data.datasets.as_slice() else {
        return Err(CliError::Config("tune takes exactly one --dataset".into()));
    };
    let mut parts = load_split(&data, format_flag, &map, path)?;
    if let Some(n) = max_iterations {
        parts.train.examples.truncate(n.saturating_mul(stream.delivery_size));
    }

    let runs = grid_search(&parts, &data.table, &space, n_samples, data.spec.seed, stream, jobs)
        .map_err(|e| CliError::data(anyhow!(e).context(format!("dataset {}", path.display()))))?;
    let runs = if timing {
        runs
    } else {
        let mut zeroed: Vec<_> = runs.iter().map(|r| r.without_timing()).collect();
        rank_runs(&mut zeroed);
        zeroed
    };
    if let Some(best) = runs.first() {
        eprintln!(
            "{} configurations; best: {} (index {}) average F1 {:.4}",
            runs.len(),
            best.hyperparameters.model_type,
            best.index,
            best.f1()
        );
    }
    match &out {
        Some(p) => write_ranking(&runs, p, format)
            .map_err(|e| CliError::data(anyhow!(e).context(format!("cannot write {}", p.display())))),
        None => write_output(None, &ranking_to_string(&runs, format)),
    }
}

pub fn serve(args: ServeArgs, file: FileConfig) -> Result<(), CliError> {
    let listen: SocketAddr = match layer(args.listen, file.listen) {
        Some(a) => a,
        None => DEFAULT_LISTEN.parse().expect("valid default address"),
    };
    let data_dir = layer(args.data_dir, file.data_dir).unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let embeddings = required(layer(args.embeddings, file.embeddings), "embeddings")?;
    let defaults = ApiConfig::default();
    let max_batch = layer(args.max_batch, file.max_batch).unwrap_or(defaults.max_batch);
    if max_batch == 0 {
        return Err(CliError::Config("--max-batch must be positive".into()));
    }
    let estimator = PerformanceEstimator {
        a: layer(args.trend_a, file.trend_a).unwrap_or(defaults.estimator.a),
        b: layer(args.trend_b, file.trend_b).unwrap_or(defaults.estimator.b),
    };
    let table = Arc::new(load_embeddings(&embeddings)?);
    let api = ApiConfig {
        max_batch,
        estimator,
        default_hyperparameters: Hyperparameters {
            embedding_dim: table.dim(),
            ..defaults.default_hyperparameters
        },
    };
    let mut config = ServerConfig::new(listen, data_dir);
    config.api = api;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cannot start runtime")
        .map_err(CliError::Data)?;
    runtime.block_on(async move {
        let server = Server::bind(config, table).await.map_err(CliError::data)?;
        let addr = server.local_addr().map_err(CliError::data)?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        server.run(shutdown_signal()).await.map_err(CliError::data)?;
        eprintln!("shut down cleanly");
        Ok(())
    })
}

pub fn replay(args: ReplayArgs, file: FileConfig) -> Result<(), CliError> {
    let datasets = layer_vec(args.dataset, file.dataset);
    if datasets.is_empty() {
        return Err(CliError::Config("--dataset is required (flag, environment or config file)".into()));
    }
    let target = required(layer(args.target, file.target), "target")?;
    let defaults = ReplayConfig::default();
    let config = ReplayConfig {
        rate: layer(args.rate, file.rate).unwrap_or(defaults.rate),
        max_retries: layer(args.retries, file.retries).unwrap_or(defaults.max_retries),
        ..defaults
    };
    if !(config.rate.is_finite() && config.rate > 0.0) {
        return Err(CliError::Config(format!("--rate must be positive, got {}", config.rate)));
    }
    let mut items = Vec::new();
    for path in &datasets {
        items.extend(load_stream_items(path)?);
    }
    if let Some(n) = layer(args.limit, file.limit) {
        items.truncate(n);
    }
    let handle = replay_stream(items, config, Sink::server(&target)).map_err(|e| CliError::Config(e.to_string()))?;
    let stats = handle.join().map_err(CliError::data)?;
    eprintln!(
        "sent {} items in {:.1}s ({} retries)",
        stats.sent,
        stats.elapsed.as_secs_f64(),
        stats.retries
    );
    Ok(())
}

pub fn eval_report(args: EvalReportArgs, file: FileConfig) -> Result<(), CliError> {
    let out = layer(args.out, file.out.clone());
    let format = report_format(args.report_format, &file, out.as_deref());
    let mut rows = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let f = fs::File::open(path)
            .with_context(|| format!("cannot open report {}", path.display()))
            .map_err(CliError::Data)?;
        let report = parse_report_csv(f)
            .map_err(|e| CliError::data(anyhow!(e).context(format!("report {}", path.display()))))?;
        rows.push((path.display().to_string(), report));
    }
    write_output(out.as_deref(), &summary_table(&rows, format))
}

/// One row per report plus an unweighted mean row.
pub fn summary_table(rows: &[(String, SimulationReport)], format: ReportFormat) -> String {
    let header = ["report", "iterations", "n_tweets", "precision", "recall", "f1", "mean_cpu_seconds", "crossing_n"];
    let mut lines: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            vec![
                name.clone(),
                r.iterations.len().to_string(),
                r.iterations.last().map_or(0, |i| i.n_tweets).to_string(),
                format!("{:.4}", r.average.precision),
                format!("{:.4}", r.average.recall),
                format!("{:.4}", r.average.f1),
                format!("{:.3}", r.mean_cpu_seconds()),
                r.crossing_n().map_or_else(|| "-".into(), |n| n.to_string()),
            ]
        })
        .collect();
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let mean = |f: fn(&SimulationReport) -> f64| rows.iter().map(|(_, r)| f(r)).sum::<f64>() / n;
        lines.push(vec![
            "mean".into(),
            "-".into(),
            "-".into(),
            format!("{:.4}", mean(|r| r.average.precision)),
            format!("{:.4}", mean(|r| r.average.recall)),
            format!("{:.4}", mean(|r| r.average.f1)),
            format!("{:.3}", mean(|r| r.mean_cpu_seconds())),
            "-".into(),
        ]);
    }
    let mut s = String::new();
    match format {
        ReportFormat::Csv => {
            s.push_str(&header.join(","));
            s.push('\n');
            for l in &lines {
                let cells: Vec<String> = l.iter().map(|c| csv_cell(c)).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
        }
        ReportFormat::Markdown => {
            s.push_str(&format!("| {} |\n", header.join(" | ")));
            s.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for l in &lines {
                s.push_str(&format!("| {} |\n", l.join(" | ")));
            }
        }
    }
    s
}

fn csv_cell(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}
