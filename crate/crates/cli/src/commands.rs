use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lcfn_core::evaluation::{evaluate, split, EvalOptions, MetricsReport, Phase};
use lcfn_core::hypergraph::{build_interaction_matrix, ncore_filter};
use lcfn_core::io::{self, read_eigen_cache, write_eigen_cache, RecordFormat, Side};
use lcfn_core::model::{lcfn_forward, read_checkpoint, write_checkpoint, Init, ModelParams};
use lcfn_core::seed;
use lcfn_core::spectral::demo::{run_demo, write_spectrum_csv, DemoSignal};
use lcfn_core::spectral::passband_bases;
use lcfn_core::training::{coarse_grid, grid_search, train, tune, TrainConfig, TrainOutcome};
use lcfn_core::InteractionSet;
use serde_json::json;

use crate::layout::{create, require, Layout};

pub fn ingest(
    layout: &Layout,
    input: &Path,
    format: RecordFormat,
    core_user: usize,
    core_item: usize,
) -> Result<()> {
    let records = io::read_records(input, format)?;
    let raw = InteractionSet::from_records(records)?;
    let set = ncore_filter(&raw, core_user, core_item)?;
    let dir = layout.dir("dataset")?;
    io::write_interactions(create(&dir.join("interactions.tsv"))?, &set)?;
    io::write_ids(create(&dir.join("users.txt"))?, set.user_ids())?;
    io::write_ids(create(&dir.join("items.txt"))?, set.item_ids())?;
    let stats = json!({
        "users": set.num_users(),
        "items": set.num_items(),
        "interactions": set.len(),
        "density": set.len() as f64 / (set.num_users() as f64 * set.num_items() as f64),
        "core_user": core_user,
        "core_item": core_item,
        "raw_interactions": raw.len(),
        "source_digest": io::digest_file(input)?,
    });
    io::write_json(&dir.join("stats.json"), &stats)?;
    println!(
        "ingested {} users, {} items, {} interactions ({} before filtering)",
        set.num_users(),
        set.num_items(),
        set.len(),
        raw.len()
    );
    Ok(())
}

pub fn split_cmd(layout: &Layout, ratios: [f64; 3], run_seed: u64) -> Result<()> {
    let (users, items) = layout.id_maps()?;
    let path = layout.dataset("interactions.tsv");
    require(&path, "ingest")?;
    let set = io::read_interactions(&path, &users, &items)?;
    let parts = split(&set, ratios, seed::substream(run_seed, seed::SPLIT))?;
    let dir = layout.dir("split")?;
    for (name, part) in [("train", &parts.train), ("validation", &parts.validation), ("test", &parts.test)] {
        io::write_interactions(create(&dir.join(format!("{name}.tsv")))?, part)?;
    }
    let meta = json!({
        "seed": run_seed,
        "ratios": ratios,
        "sizes": [parts.train.len(), parts.validation.len(), parts.test.len()],
    });
    io::write_json(&dir.join("split.json"), &meta)?;
    println!(
        "split into {} train, {} validation, {} test pairs",
        parts.train.len(),
        parts.validation.len(),
        parts.test.len()
    );
    Ok(())
}

fn cache_is_current(path: &Path, digest: &str, f: f64) -> bool {
    let Ok(file) = File::open(path) else { return false };
    matches!(
        read_eigen_cache(BufReader::new(file), Some(digest)),
        Ok((header, _)) if header.cutoff_ratio == f
    )
}

pub fn eigen(layout: &Layout, f: f64, run_seed: u64, force: bool) -> Result<()> {
    let digest = layout.train_digest()?;
    let (user_path, item_path) = (layout.eigen(Side::User), layout.eigen(Side::Item));
    if !force && cache_is_current(&user_path, &digest, f) && cache_is_current(&item_path, &digest, f) {
        log::info!("eigen caches for F = {f} are up to date; skipping");
        println!("eigen caches up to date (F = {f})");
        return Ok(());
    }
    let train = layout.read_split_part("train")?;
    let started = Instant::now();
    let bases = passband_bases(&build_interaction_matrix(&train), f, seed::substream(run_seed, seed::EIGEN))?;
    let elapsed = started.elapsed();
    layout.dir("eigen")?;
    write_eigen_cache(create(&user_path)?, &digest, Side::User, f, bases.user())?;
    write_eigen_cache(create(&item_path)?, &digest, Side::Item, f, bases.item())?;
    let (phi, psi) = bases.passband();
    println!("computed {phi} user and {psi} item eigenpairs for F = {f} in {:.2?}", elapsed);
    Ok(())
}

fn write_history(path: &Path, outcome: &TrainOutcome) -> Result<()> {
    io::write_jsonl(create(path)?, &outcome.history)?;
    Ok(())
}

fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    write_checkpoint(create(path)?, params)?;
    Ok(())
}

fn load_checkpoint(path: &Path, producer: &str) -> Result<ModelParams> {
    require(path, producer)?;
    let file = BufReader::new(File::open(path)?);
    let (_, params) = read_checkpoint(file).with_context(|| format!("reading {}", path.display()))?;
    Ok(params)
}

fn config_digest(config: &TrainConfig) -> Result<String> {
    Ok(io::digest_bytes(&serde_json::to_vec(config)?))
}

fn summary(outcome: &TrainOutcome, config: &TrainConfig) {
    println!(
        "best epoch {} of {}: validation {} = {:.5}",
        outcome.best_epoch,
        outcome.history.len(),
        config.selection_metric,
        outcome.best_metric()
    );
    if let Some(reason) = &outcome.aborted {
        println!("training stopped early after divergence ({reason})");
    }
}

pub fn pretrain(layout: &Layout, config: &TrainConfig) -> Result<()> {
    let data = layout.read_split(config.seed)?;
    let mf = TrainConfig { layers: 0, ..config.clone() };
    let outcome = train(&mf, &data, None, Init::Random)?;
    let dir = layout.dir("pretrain")?;
    save_checkpoint(&layout.pretrained(), &outcome.params)?;
    write_history(&dir.join("history.jsonl"), &outcome)?;
    summary(&outcome, &mf);
    Ok(())
}

fn initial(layout: &Layout, pretrained: bool, config: &TrainConfig) -> Result<Init> {
    if !pretrained {
        return Ok(Init::Random);
    }
    let mf = load_checkpoint(&layout.pretrained(), "pretrain")?;
    if mf.embed_dim() != config.embed_dim {
        bail!(
            "pretrained embeddings have width {}, the model needs {}; rerun `lcfn pretrain` with the same dimensions",
            mf.embed_dim(),
            config.embed_dim
        );
    }
    Ok(Init::Pretrained { u0: mf.u0, v0: mf.v0 })
}

pub fn train_cmd(layout: &Layout, config: &TrainConfig, pretrained: bool) -> Result<()> {
    let data = layout.read_split(config.seed)?;
    let bases = match config.layers {
        0 => None,
        _ => Some(layout.read_bases(Some(config.cutoff_ratio))?),
    };
    let init = initial(layout, pretrained, config)?;
    let mut outcome = train(config, &data, bases.as_ref(), init)?;
    outcome.best_report.config_digest = config_digest(config)?;
    let dir = layout.dir("train")?;
    save_checkpoint(&layout.trained(), &outcome.params)?;
    write_history(&dir.join("history.jsonl"), &outcome)?;
    io::write_json(&dir.join("validation.json"), &outcome.best_report)?;
    io::write_json(&dir.join("config.json"), config)?;
    summary(&outcome, config);
    Ok(())
}

pub fn tune_cmd(layout: &Layout, config: &TrainConfig, pretrained: bool, fine: bool) -> Result<()> {
    let data = layout.read_split(config.seed)?;
    let bases = match config.layers {
        0 => None,
        _ => Some(layout.read_bases(Some(config.cutoff_ratio))?),
    };
    let init = initial(layout, pretrained, config)?;
    let outcome = if fine {
        tune(config, &data, bases.as_ref(), &init)?
    } else {
        grid_search(config, &coarse_grid(), &data, bases.as_ref(), &init)?
    };
    let dir = layout.dir("tune")?;
    io::write_jsonl(create(&dir.join("cells.jsonl"))?, &outcome.cells)?;
    io::write_json(&dir.join("best.json"), &outcome.best_config)?;
    save_checkpoint(&dir.join("model.ckpt"), &outcome.best.params)?;
    println!(
        "{} cells; best η = {}, λ = {} with validation {} = {:.5}",
        outcome.cells.len(),
        outcome.best_config.learning_rate,
        outcome.best_config.reg_lambda,
        outcome.best_config.selection_metric,
        outcome.best.best_metric()
    );
    Ok(())
}

pub fn evaluate_cmd(
    layout: &Layout,
    checkpoint: Option<PathBuf>,
    phase: Phase,
    ks: &[usize],
    run_seed: u64,
) -> Result<MetricsReport> {
    let path = checkpoint.unwrap_or_else(|| layout.trained());
    let params = load_checkpoint(&path, "train")?;
    let data = layout.read_split(run_seed)?;
    let bases = match params.num_layers() {
        0 => None,
        _ => Some(layout.read_bases(None)?),
    };
    let cache = lcfn_forward(&params, bases.as_ref())
        .with_context(|| format!("{} does not fit the current split and caches", path.display()))?;
    let options = EvalOptions { seed: run_seed, config_digest: io::digest_file(&path)? };
    let report = evaluate(&cache, &data, phase, ks, &options)?;
    let dir = layout.dir("metrics")?;
    let name = match phase {
        Phase::Validation => "validation.json",
        Phase::Test => "test.json",
    };
    io::write_json(&dir.join(name), &report)?;
    for &k in ks {
        println!(
            "{phase:?} F1@{k} = {:.5}  NDCG@{k} = {:.5}",
            report.f1(k).unwrap_or(f64::NAN),
            report.ndcg(k).unwrap_or(f64::NAN)
        );
    }
    println!("users evaluated: {}", report.users_included);
    Ok(report)
}

pub fn demo_gft(
    layout: &Layout,
    n: usize,
    signal: DemoSignal,
    passband: f64,
    csv: Option<PathBuf>,
) -> Result<()> {
    let outcome = run_demo(n, signal, passband)?;
    let path = match csv {
        Some(p) => p,
        None => layout.dir("demo")?.join(format!("spectrum-{}.csv", signal_name(signal))),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = create(&path)?;
    write_spectrum_csv(&mut out, &outcome.rows())?;
    out.flush()?;
    println!("wrote spectrum to {}", path.display());
    if let Some(freq) = signal.frequency() {
        println!("energy at frequency {freq:.6}: {:.6}", outcome.energy_fraction_at(freq));
    }
    if let Some(err) = outcome.reconstruction_error {
        println!("low-pass reconstruction error vs s1: {err:.3e}");
    }
    Ok(())
}

fn signal_name(signal: DemoSignal) -> &'static str {
    match signal {
        DemoSignal::Low => "s1",
        DemoSignal::High => "s2",
        DemoSignal::Mixed => "s3",
    }
}
