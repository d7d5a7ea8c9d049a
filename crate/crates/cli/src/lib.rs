//! The `spinepatch` command line. [`run`] executes one parsed invocation and
//! returns the JSON document to print; `main` only handles parsing, logging
//! and exit codes.

pub mod args;
pub mod error;
pub mod report;

pub use args::Cli;
pub use error::CliError;
pub use report::{compare_report, CompareReport, MethodMetrics};

use args::*;
use serde::Serialize;
use serde_json::{json, Value};
use spinepatch::annotations::{
    import_csv, parse_manifest, split_dataset, vertebra_polygon, write_manifest, DatasetManifest, Method,
    Region, Split, TRAIN_FRACTION,
};
use spinepatch::classifier::{
    evaluate, load_patch_samples, log_csv, occlusion_saliency, render_saliency, train, LossKind, Model,
    TrainConfig,
};
use spinepatch::pipeline::{for_each_scan, load_scan_image, RunOptions, ScanFailure};
use spinepatch::raster::{crop_pixels, render_overlay, save_overlay, write_atomic, Overlay};
use spinepatch::segpatch::{
    coverage_report, run_segpatch, ContourSource, LabelGeometry, PerRegion, SegPatchConfig,
};
use spinepatch::synthgen::{corpus_stats, generate, SynthConfig};
use spinepatch::tiling::{run_tiling, TilingConfig};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Result of one subcommand. `failure` is set when some scans failed but the
/// rest of the run still produced output worth printing.
#[derive(Debug)]
pub struct Outcome {
    pub json: Value,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(json: Value) -> Self {
        Self { json, failure: None }
    }
}

/// Resolved global paths and knobs.
#[derive(Debug, Clone)]
pub struct Context {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

fn parent_or_cwd(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

impl Context {
    pub fn new(g: &GlobalArgs) -> Self {
        let manifest = g.manifest.clone().unwrap_or_else(|| {
            g.out_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("."))
                .join("manifest.json")
        });
        let out_dir = g.out_dir.clone().unwrap_or_else(|| parent_or_cwd(&manifest));
        Self {
            manifest,
            out_dir,
            seed: g.seed,
            jobs: g.jobs as usize,
        }
    }

    fn manifest_dir(&self) -> PathBuf {
        parent_or_cwd(&self.manifest)
    }

    fn load(&self) -> Result<DatasetManifest, CliError> {
        Ok(parse_manifest(&self.manifest)?)
    }

    fn save(&self, m: &DatasetManifest) -> Result<(), CliError> {
        Ok(write_manifest(m, &self.manifest)?)
    }

    fn run_options(&self, write_crops: bool) -> RunOptions {
        let mut o = RunOptions::new(self.manifest_dir(), &self.out_dir);
        o.jobs = self.jobs;
        o.write_crops = write_crops;
        o
    }

    fn model_path(&self, method: Method) -> PathBuf {
        self.out_dir.join("models").join(format!("{method}.model"))
    }

    fn epoch_log_path(&self, method: Method) -> PathBuf {
        self.out_dir.join("models").join(format!("{method}.epochs.csv"))
    }

    fn metrics_path(&self, method: Method) -> PathBuf {
        self.out_dir.join("metrics").join(format!("{method}.json"))
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result types serialize")
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    Ok(write_atomic(path, text.as_bytes())?)
}

fn method_of(m: MethodArg) -> Method {
    match m {
        MethodArg::Tiling => Method::Tiling,
        MethodArg::Segpatch => Method::Segpatch,
    }
}

/// Nonzero exit for scans that failed while the rest went through.
fn scan_failures(failed: &[ScanFailure]) -> Option<CliError> {
    if failed.is_empty() {
        return None;
    }
    let msg = format!(
        "{} scan(s) failed: {}",
        failed.len(),
        failed.iter().map(|f| f.scan_id.as_str()).collect::<Vec<_>>().join(", ")
    );
    Some(if failed.iter().any(|f| f.io) {
        CliError::Io(msg)
    } else {
        CliError::Validation(msg)
    })
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = Context::new(&cli.global);
    match &cli.command {
        Command::Synth(a) => synth(&ctx, a).map(|(json, failure)| Outcome { json, failure }),
        Command::Import(a) => import(&ctx, a).map(Outcome::ok),
        Command::Tile(a) => {
            let cfg = TilingConfig {
                tile_w: a.tile_w as usize,
                tile_h: a.tile_h as usize,
                annotation_half_extent: a.half_extent,
            };
            tile(&ctx, &cfg, !a.no_crops)
        }
        Command::Segpatch(a) => segpatch(&ctx, &segpatch_config(a)?, !a.no_crops),
        Command::Split(a) => split(&ctx, a.train_fraction).map(Outcome::ok),
        Command::Train(a) => {
            let method = method_of(a.method);
            let m = train_method(&ctx, method, &train_config(&ctx, method, a))?;
            Ok(Outcome::ok(to_json(&m)))
        }
        Command::Eval(a) => eval(&ctx, a).map(Outcome::ok),
        Command::Saliency(a) => saliency(&ctx, a).map(Outcome::ok),
        Command::Overlay(a) => overlay(&ctx, a),
        Command::Stats => Ok(Outcome::ok(to_json(&corpus_stats(&ctx.load()?)))),
        Command::Coverage => {
            let m = ctx.load()?;
            if m.patches_for(Method::Segpatch).next().is_none() {
                return Err(CliError::validation(
                    "manifest has no segpatch patches; run `spinepatch segpatch` first",
                ));
            }
            Ok(Outcome::ok(to_json(&coverage_report(&m))))
        }
        Command::Compare => compare(&ctx).map(|r| Outcome::ok(to_json(&r))),
        Command::Demo(a) => demo(&ctx, a),
    }
}

fn synth_config(ctx: &Context, a: &SynthArgs) -> SynthConfig {
    let mut cfg = SynthConfig {
        seed: ctx.seed,
        n_scans: a.n_scans,
        ..Default::default()
    };
    if a.independent {
        cfg = cfg.independent();
    }
    let set = |slot: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.region_mix, a.region_mix);
    set(&mut cfg.curvature, a.curvature);
    set(&mut cfg.osteophyte_rate, a.osteophyte_rate);
    set(&mut cfg.bump_radius, a.bump_radius);
    set(&mut cfg.noise_sigma, a.noise_sigma);
    set(&mut cfg.artifact_text_rate, a.artifact_text_rate);
    if let Some(lo) = a.min_vertebrae {
        cfg.vertebrae_per_scan.0 = lo;
    }
    if let Some(hi) = a.max_vertebrae {
        cfg.vertebrae_per_scan.1 = hi;
    }
    cfg
}

fn synth(ctx: &Context, a: &SynthArgs) -> Result<(Value, Option<CliError>), CliError> {
    run_synth(ctx, &synth_config(ctx, a))
}

fn run_synth(ctx: &Context, cfg: &SynthConfig) -> Result<(Value, Option<CliError>), CliError> {
    // image paths in the manifest are relative to the output directory
    let target = ctx.out_dir.join("manifest.json");
    let same = ctx.manifest.file_name() == target.file_name() && parent_or_cwd(&ctx.manifest) == ctx.out_dir;
    if !same {
        return Err(CliError::validation(format!(
            "synth writes {}; --manifest must point there",
            target.display()
        )));
    }
    let t = Instant::now();
    let (_, summary) = generate(cfg, &ctx.out_dir, ctx.jobs)?;
    log::info!(
        "synth: {} scans, {} osteophytes in {:.1?}",
        summary.scans,
        summary.osteophytes,
        t.elapsed()
    );
    Ok((to_json(&summary), None))
}

fn import(ctx: &Context, a: &ImportArgs) -> Result<Value, CliError> {
    let m = import_csv(&a.csv, &a.images_dir, &ctx.manifest_dir())?;
    ctx.save(&m)?;
    let stats = corpus_stats(&m);
    log::info!("import: {} scans into {}", stats.scans, ctx.manifest.display());
    Ok(json!({
        "manifest": ctx.manifest.display().to_string(),
        "scans": stats.scans,
        "vertebrae": stats.vertebrae,
        "osteophytes": stats.osteophytes,
    }))
}

fn tile(ctx: &Context, cfg: &TilingConfig, write_crops: bool) -> Result<Outcome, CliError> {
    let t = Instant::now();
    let m = ctx.load()?;
    let (mut m, summary) = run_tiling(&m, cfg, &ctx.run_options(write_crops))?;
    m.assign_patch_splits();
    ctx.save(&m)?;
    log::info!(
        "tile: {} patches, {:.3} positive, {:.1?}",
        summary.patches,
        summary.positive_fraction,
        t.elapsed()
    );
    Ok(Outcome {
        json: to_json(&summary),
        failure: scan_failures(&summary.failed),
    })
}

fn segpatch_config(a: &SegpatchArgs) -> Result<SegPatchConfig, CliError> {
    if !(a.expansion_scale.is_finite() && a.expansion_scale >= 0.0) {
        return Err(CliError::validation(format!(
            "--expansion-scale must be a non-negative number, got {}",
            a.expansion_scale
        )));
    }
    let d = SegPatchConfig::default();
    let cfg = SegPatchConfig {
        dx_minus_x: PerRegion {
            cervical: a.dx_cervical.unwrap_or(d.dx_minus_x.cervical),
            lumbar: a.dx_lumbar.unwrap_or(d.dx_minus_x.lumbar),
        }
        .scaled(a.expansion_scale),
        dy_plus_y: PerRegion {
            cervical: a.dy_cervical.unwrap_or(d.dy_plus_y.cervical),
            lumbar: a.dy_lumbar.unwrap_or(d.dy_plus_y.lumbar),
        }
        .scaled(a.expansion_scale),
        contour_source: match a.contour_source {
            ContourSourceArg::Mask => ContourSource::Mask,
            ContourSourceArg::SixPoints => ContourSource::SixPoints,
        },
        label_geometry: match a.label_geometry {
            LabelGeometryArg::ExpandedPolygon => LabelGeometry::ExpandedPolygon,
            LabelGeometryArg::CropBbox => LabelGeometry::CropBbox,
        },
    };
    Ok(cfg)
}

fn segpatch(ctx: &Context, cfg: &SegPatchConfig, write_crops: bool) -> Result<Outcome, CliError> {
    let t = Instant::now();
    let m = ctx.load()?;
    let (mut m, summary) = run_segpatch(&m, cfg, &ctx.run_options(write_crops))?;
    m.assign_patch_splits();
    ctx.save(&m)?;
    log::info!(
        "segpatch: {} patches, {:.3} positive, {} uncovered osteophytes, {:.1?}",
        summary.patches,
        summary.positive_fraction,
        summary.coverage.uncovered.len(),
        t.elapsed()
    );
    Ok(Outcome {
        json: to_json(&summary),
        failure: scan_failures(&summary.failed),
    })
}

fn split(ctx: &Context, train_fraction: f64) -> Result<Value, CliError> {
    let m = ctx.load()?;
    let mut m = split_dataset(&m, train_fraction, ctx.seed)?;
    m.assign_patch_splits();
    ctx.save(&m)?;
    let mut out = serde_json::Map::new();
    for s in [Split::Train, Split::Test] {
        let ids = m.splits.get(s.as_str()).cloned().unwrap_or_default();
        let count = |r: Region| {
            ids.iter()
                .filter(|id| m.scan(id).is_some_and(|sc| sc.region == r))
                .count()
        };
        out.insert(
            s.as_str().into(),
            json!({
                "scans": ids.len(),
                "cervical": count(Region::Cervical),
                "lumbar": count(Region::Lumbar),
            }),
        );
    }
    log::info!("split: {}", Value::Object(out.clone()));
    Ok(Value::Object(out))
}

/// Per-method defaults: tiling trains at lr 0.01 / momentum 0.7, SegPatch at
/// 0.002 / 0.9.
pub fn method_defaults(method: Method) -> (f64, f64) {
    match method {
        Method::Tiling => (0.01, 0.7),
        Method::Segpatch => {
            let d = TrainConfig::default();
            (d.learning_rate, d.momentum)
        }
    }
}

fn train_config(ctx: &Context, method: Method, a: &TrainArgs) -> TrainConfig {
    let (lr, momentum) = method_defaults(method);
    TrainConfig {
        learning_rate: a.lr.unwrap_or(lr),
        momentum: a.momentum.unwrap_or(momentum),
        scheduler_step: a.scheduler_step,
        scheduler_gamma: a.scheduler_gamma,
        epochs: a.epochs,
        loss: match a.loss {
            LossArg::CrossEntropy => LossKind::CrossEntropy,
            LossArg::WeightedCrossEntropy => LossKind::WeightedCrossEntropy,
            LossArg::Focal => LossKind::Focal,
        },
        focal_gamma: a.focal_gamma,
        rotation_max_deg: a.rotation_max,
        equalize_prob: a.equalize_prob,
        batch_size: a.batch_size,
        seed: ctx.seed,
    }
}

/// Checks the method's patches exist and stamps their splits. A manifest
/// that was never split gets the default stratified split in memory.
fn require_split(ctx: &Context, m: &mut DatasetManifest, method: Method) -> Result<(), CliError> {
    if m.patches_for(method).next().is_none() {
        let step = match method {
            Method::Tiling => "tile",
            Method::Segpatch => "segpatch",
        };
        return Err(CliError::validation(format!(
            "manifest has no {method} patches; run `spinepatch {step}` first"
        )));
    }
    if m.splits.get("train").is_none_or(|ids| ids.is_empty()) {
        log::warn!(
            "manifest has no train split; using a {:.0}/{:.0} split from seed {} (run `spinepatch split` to persist one)",
            TRAIN_FRACTION * 100.0,
            (1.0 - TRAIN_FRACTION) * 100.0,
            ctx.seed
        );
        *m = split_dataset(m, TRAIN_FRACTION, ctx.seed)?;
    }
    m.assign_patch_splits();
    Ok(())
}

/// Trains one method on its train split, evaluates both splits and writes
/// the model, the epoch log and the metrics document.
pub fn train_method(ctx: &Context, method: Method, cfg: &TrainConfig) -> Result<MethodMetrics, CliError> {
    let t = Instant::now();
    let mut m = ctx.load()?;
    require_split(ctx, &mut m, method)?;
    let dir = ctx.manifest_dir();
    let train_set = load_patch_samples(&m, method, Some(Split::Train), &dir, ctx.jobs)?;
    let test_set = load_patch_samples(&m, method, Some(Split::Test), &dir, ctx.jobs)?;
    log::info!(
        "train {method}: {} train / {} test patches loaded in {:.1?}",
        train_set.len(),
        test_set.len(),
        t.elapsed()
    );
    let outcome = train(&train_set, cfg, ctx.jobs)?;
    outcome.model.save(ctx.model_path(method))?;
    write_text(&ctx.epoch_log_path(method), &log_csv(&outcome.log))?;
    let metrics = MethodMetrics {
        method,
        config: cfg.clone(),
        final_loss: outcome.log.last().map_or(0.0, |l| l.loss),
        train: evaluate(&outcome.model, &train_set, ctx.jobs),
        test: evaluate(&outcome.model, &test_set, ctx.jobs),
        train_balance: report::balance_of(&m, method, Some(Split::Train)),
        test_balance: report::balance_of(&m, method, Some(Split::Test)),
    };
    let text = serde_json::to_string_pretty(&metrics).expect("metrics serialize") + "\n";
    write_text(&ctx.metrics_path(method), &text)?;
    log::info!(
        "train {method}: test accuracy {:.3} (train {:.3}) in {:.1?}",
        metrics.test.accuracy,
        metrics.train.accuracy,
        t.elapsed()
    );
    Ok(metrics)
}

fn eval(ctx: &Context, a: &EvalArgs) -> Result<Value, CliError> {
    let method = method_of(a.method);
    let model = Model::load(ctx.model_path(method))?;
    let mut m = ctx.load()?;
    let split = match a.split {
        SplitArg::Train => Some(Split::Train),
        SplitArg::Test => Some(Split::Test),
        SplitArg::All => None,
    };
    if split.is_some() {
        require_split(ctx, &mut m, method)?;
    }
    let samples = load_patch_samples(&m, method, split, &ctx.manifest_dir(), ctx.jobs)?;
    let metrics = evaluate(&model, &samples, ctx.jobs);
    Ok(json!({
        "method": method,
        "split": split.map_or("all", |s| s.as_str()),
        "metrics": metrics,
    }))
}

fn saliency(ctx: &Context, a: &SaliencyArgs) -> Result<Value, CliError> {
    if !(a.fraction.is_finite() && (0.0..=1.0).contains(&a.fraction)) {
        return Err(CliError::validation(format!(
            "--fraction must lie in [0, 1], got {}",
            a.fraction
        )));
    }
    let method = method_of(a.method);
    let model = Model::load(ctx.model_path(method))?;
    let m = ctx.load()?;
    let patch = m
        .patches_for(method)
        .find(|p| p.patch_id == a.patch_id)
        .ok_or_else(|| CliError::validation(format!("no {method} patch with id '{}'", a.patch_id)))?;
    let scan = m
        .scan(&patch.scan_id)
        .ok_or_else(|| CliError::validation(format!("patch refers to unknown scan '{}'", patch.scan_id)))?;
    let img = load_scan_image(scan, &ctx.manifest_dir())?;
    let crop = crop_pixels(&img, &patch.crop)?;
    let map = occlusion_saliency(&model, &crop, a.window, a.stride)?;
    let path = ctx
        .out_dir
        .join("saliency")
        .join(format!("{method}_{}.png", patch.patch_id));
    save_overlay(&render_saliency(&crop, &map, a.fraction), &path)?;
    Ok(json!({
        "patch_id": patch.patch_id,
        "label": patch.label,
        "overlay": path.display().to_string(),
        "map": map,
    }))
}

fn overlay(ctx: &Context, a: &OverlayArgs) -> Result<Outcome, CliError> {
    let m = ctx.load()?;
    let scans: Vec<_> = m
        .scans
        .iter()
        .filter(|s| a.scan_id.as_ref().is_none_or(|id| &s.scan_id == id))
        .cloned()
        .collect();
    if let (Some(id), true) = (&a.scan_id, scans.is_empty()) {
        return Err(CliError::validation(format!("no scan with id '{id}'")));
    }
    let method = a.method.map(method_of);
    let dir = ctx.manifest_dir();
    let (paths, failed) = for_each_scan(&scans, ctx.jobs, |scan| {
        let img = load_scan_image(scan, &dir)?;
        let polygons = scan
            .vertebrae
            .iter()
            .map(vertebra_polygon)
            .collect::<Result<Vec<_>, _>>()?;
        let overlay = Overlay {
            polygons,
            points: scan.osteophytes.iter().map(|o| o.location).collect(),
            boxes: method
                .map(|me| {
                    m.patches_for(me)
                        .filter(|p| p.scan_id == scan.scan_id)
                        .map(|p| p.crop)
                        .collect()
                })
                .unwrap_or_default(),
            dot_radius: 4.0,
        };
        let path = ctx.out_dir.join("overlays").join(format!("{}.png", scan.scan_id));
        save_overlay(&render_overlay(&img, &overlay), &path)?;
        Ok(path.display().to_string())
    })?;
    Ok(Outcome {
        json: json!({ "overlays": paths, "failed": failed }),
        failure: scan_failures(&failed),
    })
}

fn read_metrics(ctx: &Context, method: Method) -> Result<MethodMetrics, CliError> {
    let path = ctx.metrics_path(method);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::validation(format!(
                "missing metrics for {method} ({}); run `spinepatch train --method {method}` first",
                path.display()
            ))
        } else {
            CliError::Io(format!("{}: {e}", path.display()))
        }
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("{}: malformed metrics: {e}", path.display())))
}

fn compare(ctx: &Context) -> Result<CompareReport, CliError> {
    let m = ctx.load()?;
    let report = compare_report(&m, &read_metrics(ctx, Method::Tiling)?, &read_metrics(ctx, Method::Segpatch)?)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_text(&ctx.out_dir.join("compare.json"), &text)?;
    write_text(&ctx.out_dir.join("compare.md"), &report.to_markdown())?;
    log::info!("compare: test accuracy gap {:+.3}", report.gap);
    Ok(report)
}

fn demo(ctx: &Context, a: &DemoArgs) -> Result<Outcome, CliError> {
    let t = Instant::now();
    // the demo always owns OUT_DIR/manifest.json
    let ctx = Context {
        manifest: ctx.out_dir.join("manifest.json"),
        ..ctx.clone()
    };
    let (synth, _) = run_synth(
        &ctx,
        &SynthConfig {
            seed: ctx.seed,
            n_scans: a.n_scans,
            ..Default::default()
        },
    )?;
    let tiled = tile(&ctx, &TilingConfig::default(), true)?;
    let seg = segpatch(&ctx, &SegPatchConfig::default(), true)?;
    if let Some(f) = tiled.failure.or(seg.failure) {
        return Err(f);
    }
    let split = split(&ctx, TRAIN_FRACTION)?;
    let mut trained = serde_json::Map::new();
    for method in [Method::Tiling, Method::Segpatch] {
        let (learning_rate, momentum) = method_defaults(method);
        let cfg = TrainConfig {
            learning_rate,
            momentum,
            epochs: a.epochs,
            seed: ctx.seed,
            ..Default::default()
        };
        let m = train_method(&ctx, method, &cfg)?;
        trained.insert(method.as_str().into(), to_json(&m));
    }
    let report = compare(&ctx)?;
    log::info!("demo finished in {:.1?}", t.elapsed());
    Ok(Outcome::ok(json!({
        "synth": synth,
        "tiling": tiled.json,
        "segpatch": seg.json,
        "split": split,
        "metrics": trained,
        "compare": report,
    })))
}
