use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use glyphsearch_core::encoders::RemoteConfig;
use glyphsearch_core::harness::{
    format_table, generate_synthetic_corpus, write_reports, EmbeddingCache, Encoders,
    ExperimentConfig, Harness, Listing, MetricsReport, Query, SyntheticCorpusSpec,
};
use glyphsearch_core::ingest::{load_image, load_manifest, load_query_manifest, sha256_hex, ContentStore};
use glyphsearch_core::knn::{save_index, KnnIndex};
use glyphsearch_core::{render_text, EncoderHandle, RenderSpec, Typeface};
use serde_json::json;

use crate::config::{load_grid, usage, RunConfig};
use crate::{EmbedArgs, EvalArgs, ExperimentFlags, RenderArgs, RenderFlags, SweepArgs, SynthArgs};

impl RenderFlags {
    fn apply(&self, spec: &mut RenderSpec) {
        if let Some(r) = self.ratio {
            spec.font_size_ratio = r;
        }
        if let Some(c) = self.color {
            spec.color = c;
        }
        if let Some(l) = self.location {
            spec.location = l;
        }
        if let Some(f) = &self.font {
            spec.font_asset = f.clone();
        }
        if let Some(w) = self.max_width_fraction {
            spec.max_width_fraction = w;
        }
        if let Some(m) = self.margin_fraction {
            spec.margin_fraction = m;
        }
    }
}

pub fn render(args: RenderArgs) -> anyhow::Result<()> {
    let mut spec = RenderSpec::default();
    args.factors.apply(&mut spec);
    spec.validate()?;
    let image = load_image(&args.image)?;
    // A missing or unreadable font is a runtime failure here, not a usage error.
    let face = Typeface::load(&spec.font_asset).map_err(|e| anyhow!("{e}"))?;
    let rendered = render_text(&image, &args.text, &spec, &face)?;
    rendered
        .image
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let out = json!({
        "font_size": rendered.applied_font_size,
        "bbox": rendered.text_bbox,
        "width": rendered.image.width(),
        "height": rendered.image.height(),
        "out": args.out,
    });
    println!("{out}");
    Ok(())
}

fn effective_config(run: &RunConfig, flags: &ExperimentFlags) -> anyhow::Result<ExperimentConfig> {
    let mut section = run.experiment.clone();
    if let Some(m) = flags.mode {
        section.mode = m;
    }
    if let Some(s) = flags.seed {
        section.seed = s;
    }
    if let Some(k) = &flags.k {
        section.k_values = k.clone();
    }
    flags.factors.apply(&mut section.render_spec);
    let cfg = section.to_config();
    cfg.validate()?;
    Ok(cfg)
}

fn harness(run: &RunConfig, flags: &ExperimentFlags) -> anyhow::Result<Harness> {
    match run.cache_root(flags.cache.as_deref()) {
        Some(root) => {
            let store = ContentStore::open(&root)
                .with_context(|| format!("opening cache {}", root.display()))?;
            log::info!("embedding cache at {}", root.display());
            Ok(Harness::with_cache(EmbeddingCache::with_disk(store)))
        }
        None => Ok(Harness::new()),
    }
}

pub fn embed(args: EmbedArgs, json_out: bool) -> anyhow::Result<()> {
    let run = RunConfig::load_or_default(args.exp.config.as_deref())?;
    let mut cfg = effective_config(&run, &args.exp)?;
    match args.encoder.as_deref() {
        None | Some("reference") => {}
        Some(url) if url.starts_with("http://") || url.starts_with("https://") => {
            let model = args
                .model_id
                .clone()
                .ok_or_else(|| usage("--model-id is required with a remote --encoder"))?;
            let remote = EncoderHandle::Remote(RemoteConfig::new(model, url));
            cfg.image_encoder = remote.clone();
            cfg.text_encoder = remote;
        }
        Some(other) => {
            return Err(usage(format!(
                "--encoder must be `reference` or an http(s) URL, got {other:?}"
            )))
        }
    }
    let listings = load_manifest(&args.manifest, &run.dataset.title_options())?;
    if listings.is_empty() {
        return Err(usage(format!("{} has no records", args.manifest.display())));
    }
    let h = harness(&run, &args.exp)?;
    let encoders = Encoders::from_handles(&cfg.image_encoder, &cfg.text_encoder)?;
    let refs: Vec<&Listing> = listings.iter().collect();
    let embeddings = h.embed_listings(&refs, cfg.mode, cfg.render_spec.as_ref(), &encoders)?;
    let index = KnnIndex::build(listings.iter().map(|l| l.id).zip(embeddings).collect())?;
    save_index(&index, &args.out_store)?;
    let digest = sha256_hex(&std::fs::read(&args.out_store)?);
    let computed = h.cache().computed();
    if json_out {
        let out = json!({
            "store": args.out_store,
            "count": index.len(),
            "dim": index.dim(),
            "model_id": index.model_id(),
            "mode": cfg.mode,
            "computed": computed,
            "sha256": digest,
        });
        println!("{out}");
    } else {
        println!(
            "wrote {} embeddings (dim {}, {} computed) to {} sha256={digest}",
            index.len(),
            index.dim(),
            computed,
            args.out_store.display()
        );
    }
    Ok(())
}

fn datasets(
    run: &RunConfig,
    queries: Option<&PathBuf>,
    products: Option<&PathBuf>,
) -> anyhow::Result<(Vec<Query>, Vec<Listing>)> {
    let q = queries
        .or(run.dataset.queries.as_ref())
        .ok_or_else(|| usage("no query manifest: set dataset.queries or --queries"))?;
    let p = products
        .or(run.dataset.products.as_ref())
        .ok_or_else(|| usage("no product manifest: set dataset.products or --products"))?;
    let opts = run.dataset.title_options();
    Ok((load_query_manifest(q, &opts)?, load_manifest(p, &opts)?))
}

fn out_dir(run: &RunConfig, flag: Option<&PathBuf>) -> PathBuf {
    flag.cloned()
        .or_else(|| run.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("reports"))
}

fn emit(reports: &[MetricsReport], dir: &Path, stem: &str, json_out: bool) -> anyhow::Result<()> {
    write_reports(dir, stem, reports)?;
    if json_out {
        println!("{}", serde_json::to_string(reports)?);
    } else {
        print!("{}", format_table(reports));
        println!("reports written to {}", dir.join(format!("{stem}.{{json,csv}}")).display());
    }
    Ok(())
}

pub fn eval(args: EvalArgs, json_out: bool) -> anyhow::Result<()> {
    let config_path = args
        .exp
        .config
        .as_deref()
        .ok_or_else(|| usage("eval requires --config"))?;
    let run = RunConfig::load(config_path)?;
    let cfg = effective_config(&run, &args.exp)?;
    let (queries, products) = datasets(&run, args.data.queries.as_ref(), args.data.products.as_ref())?;
    let report = harness(&run, &args.exp)?.run_experiment(&cfg, &queries, &products)?;
    log::info!("eval finished in {} ms", report.wall.total_ms);
    emit(&[report], &out_dir(&run, args.data.out_dir.as_ref()), "eval", json_out)
}

pub fn sweep(args: SweepArgs, json_out: bool) -> anyhow::Result<()> {
    let config_path = args
        .exp
        .config
        .as_deref()
        .ok_or_else(|| usage("sweep requires --config"))?;
    let run = RunConfig::load(config_path)?;
    let cfg = effective_config(&run, &args.exp)?;
    let grid = load_grid(&args.grid)?;
    let (queries, products) = datasets(&run, args.data.queries.as_ref(), args.data.products.as_ref())?;
    let rows = harness(&run, &args.exp)?.factor_sweep(&cfg, &grid, &queries, &products)?;
    let reports: Vec<MetricsReport> = rows.into_iter().map(|r| r.report).collect();
    emit(&reports, &out_dir(&run, args.data.out_dir.as_ref()), "sweep", json_out)
}

pub fn synth(args: SynthArgs, json_out: bool) -> anyhow::Result<()> {
    let spec = SyntheticCorpusSpec {
        n_queries: args.queries,
        n_products: args.products,
        width: args.width,
        height: args.height,
        n_classes: args.classes,
        seed: args.seed,
        ..SyntheticCorpusSpec::default()
    };
    let corpus = generate_synthetic_corpus(&spec)?;
    corpus.write_to_dir(&args.out)?;
    let config_path = args.out.join("eval.toml");
    let starter = format!(
        "[experiment]\nmode = \"rendered_image_only\"\nseed = {}\nk_values = [1, 3]\n\n\
         [dataset]\nqueries = \"queries.jsonl\"\nproducts = \"products.jsonl\"\n\n\
         [output]\ndir = \"reports\"\n",
        args.seed
    );
    std::fs::write(&config_path, starter)?;
    if json_out {
        let out = json!({
            "dir": args.out,
            "queries": corpus.queries.len(),
            "products": corpus.products.len(),
            "config": config_path,
        });
        println!("{out}");
    } else {
        println!(
            "wrote {} queries and {} products to {}; try `glyphsearch eval --config {}`",
            corpus.queries.len(),
            corpus.products.len(),
            args.out.display(),
            config_path.display()
        );
    }
    Ok(())
}
