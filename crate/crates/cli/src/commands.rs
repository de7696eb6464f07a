use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use serde_json::json;
use taxonomist_core::ingest::{parse_corpus, run_pipeline, CleanCorpus, CorpusFormat, IngestConfig};
use taxonomist_core::precompute::{
    load_corpus, precompute as run_precompute, CellOutcome, PrecomputeConfig, PrecomputeError, PrecomputeOptions,
    CORPUS_KEY, GRID_KEY,
};
use taxonomist_core::session::{SystemClock, TaxonomyExport, Workbench};
use taxonomist_core::store::{ArtifactKind, ArtifactStore, ProducedBy, StoreError};
use taxonomist_server::{AppState, LoadError, TAXONOMY_KEY};

use crate::{Cli, ExportArgs, IngestArgs, PrecomputeArgs, ServeArgs, EXIT_INTEGRITY, EXIT_OK, EXIT_PARTIAL, EXIT_USAGE};

pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        let integrity = if let Some(e) = cause.downcast_ref::<StoreError>() {
            e.is_integrity()
        } else if let Some(e) = cause.downcast_ref::<LoadError>() {
            e.is_integrity()
        } else if let Some(PrecomputeError::Store(e)) = cause.downcast_ref::<PrecomputeError>() {
            e.is_integrity()
        } else {
            false
        };
        if integrity {
            return EXIT_INTEGRITY;
        }
    }
    EXIT_USAGE
}

fn open_store(cli: &Cli) -> anyhow::Result<ArtifactStore> {
    ArtifactStore::open(&cli.store).with_context(|| format!("opening store {}", cli.store.display()))
}

fn infer_format(path: &Path) -> anyhow::Result<CorpusFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => ext.parse().map_err(anyhow::Error::msg),
        None => bail!("cannot infer format of {}; pass --format", path.display()),
    }
}

pub fn ingest(cli: &Cli, args: &IngestArgs) -> anyhow::Result<u8> {
    let format = match args.format {
        Some(f) => f,
        None => infer_format(&args.input)?,
    };
    let config = IngestConfig {
        stopword_paths: args.stopwords.iter().cloned().collect(),
        gazetteer_path: args.gazetteer.clone(),
        min_count: args.min_count,
        ..IngestConfig::default()
    };
    let raw = parse_corpus(&args.input, format)?;
    let corpus = run_pipeline(raw, &config)?;
    let store = open_store(cli)?;
    let entry = store.save(
        ArtifactKind::Corpus,
        CORPUS_KEY,
        &corpus.to_json(),
        ProducedBy::new("ingest"),
        None,
    )?;
    store.record_run(
        "ingest",
        json!({ "input": args.input, "format": format, "config": config }),
        None,
    )?;
    print_report(&corpus);
    println!("corpus {} ({} items)", entry.content_hash, corpus.len());
    Ok(EXIT_OK)
}

fn print_report(corpus: &CleanCorpus) {
    let r = &corpus.pipeline_report;
    println!("raw records {} (total count {})", r.raw_records, r.raw_count);
    println!("{:<4} {:<28} {:>8} {:>8} {:>8} {:>8}", "step", "name", "in", "out", "removed", "merged");
    for s in &r.steps {
        println!(
            "{:<4} {:<28} {:>8} {:>8} {:>8} {:>8}",
            s.step, s.name, s.input_items, s.output_items, s.removed_items, s.merged_items
        );
    }
    println!("final items {}", r.final_items);
}

pub fn precompute(cli: &Cli, args: &PrecomputeArgs) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(&args.grid_config)
        .with_context(|| format!("reading grid config {}", args.grid_config.display()))?;
    let config: PrecomputeConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing grid config {}", args.grid_config.display()))?;
    config.validate()?;
    let total = config.grid.size();
    let store = open_store(cli)?;
    store.verify_all()?;
    store.record_run(
        "precompute",
        json!({ "grid_config": config, "workers": cli.workers, "seed": cli.seed }),
        Some(config.config_hash()),
    )?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let options = PrecomputeOptions {
        workers: cli.workers,
        seed: cli.seed,
    };
    let report = run_precompute(&store, &config, &options, &|cell, outcome| {
        let n = done.fetch_add(1, std::sync::atomic::Ordering::SeqCst) + 1;
        let status = match outcome {
            CellOutcome::Computed => "computed".to_string(),
            CellOutcome::Skipped => "skipped".to_string(),
            CellOutcome::Failed(e) => format!("FAILED: {e}"),
        };
        println!("[{n}/{total}] {} {} {status}", cell.output_id, cell.model_id);
    })?;
    println!(
        "{} computed, {} skipped, {} failed; vp-trees {} built, {} reused",
        report.count(|o| *o == CellOutcome::Computed),
        report.count(|o| *o == CellOutcome::Skipped),
        report.failed(),
        report.vp_trees_built,
        report.vp_trees_reused
    );
    Ok(if report.failed() > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

pub fn serve(cli: &Cli, args: &ServeArgs) -> anyhow::Result<u8> {
    let store = open_store(cli)?;
    store.record_run("serve", json!({ "bind": args.bind, "workers": cli.workers }), None)?;
    let state = Arc::new(AppState::load(store, Arc::new(SystemClock))?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(cli.workers)
        .enable_all()
        .build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.bind)
            .await
            .with_context(|| format!("binding {}", args.bind))?;
        println!("listening on http://{}/v1", listener.local_addr()?);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        taxonomist_server::serve(listener, state, shutdown).await?;
        anyhow::Ok(())
    })?;
    Ok(EXIT_OK)
}

/// The export document, from the full workbench when a grid exists and
/// from the corpus and stored taxonomy alone otherwise.
fn export_document(store: ArtifactStore) -> anyhow::Result<TaxonomyExport> {
    if store.entry(ArtifactKind::Grid, GRID_KEY).is_some() {
        let state = AppState::load(store, Arc::new(SystemClock))?;
        return Ok(state.workbench.export_taxonomy());
    }
    store.verify_all()?;
    if store.entry(ArtifactKind::Corpus, CORPUS_KEY).is_none() {
        bail!("store has no corpus; run ingest first");
    }
    let corpus = Arc::new(load_corpus(&store)?);
    let workbench = Workbench::new(corpus, Vec::new(), Vec::new(), Arc::new(SystemClock))?;
    if store.entry(ArtifactKind::Taxonomy, TAXONOMY_KEY).is_some() {
        let doc: TaxonomyExport = store.load_json(ArtifactKind::Taxonomy, TAXONOMY_KEY)?;
        workbench.import_taxonomy(&doc)?;
    }
    Ok(workbench.export_taxonomy())
}

pub fn export(cli: &Cli, args: &ExportArgs) -> anyhow::Result<u8> {
    let store = open_store(cli)?;
    store.record_run("export", json!({ "out": args.out }), None)?;
    let doc = export_document(store)?;
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    match &args.out {
        Some(path) => {
            std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("{} classes, {} unassigned -> {}", doc.classes.len(), doc.unassigned.len(), path.display());
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
        }
    }
    Ok(EXIT_OK)
}
