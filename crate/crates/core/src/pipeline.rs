//! Shared machinery for the patch generators: per-scan parallel execution,
//! image loading with dimension checks, and crop output.

use crate::annotations::{resolve_path, Label, ManifestError, Method, PatchRecord, ScanRecord};
use crate::geometry::GeometryError;
use crate::raster::{crop_pixels, load_image, save_image, GrayImage, ImageError};
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scan '{scan_id}': image is {found_w}×{found_h} but the manifest says {width}×{height}")]
    DimensionMismatch {
        scan_id: String,
        width: usize,
        height: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("could not build a thread pool: {0}")]
    ThreadPool(String),
}

impl PipelineError {
    /// True for failures caused by the filesystem rather than bad data.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            PipelineError::Image(ImageError::Io { .. }) | PipelineError::Manifest(ManifestError::Io { .. })
        )
    }
}

/// Where inputs resolve from and outputs go.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Directory the manifest lives in; relative image and mask paths hang off it.
    pub manifest_dir: PathBuf,
    pub out_dir: PathBuf,
    pub jobs: usize,
    /// Skip writing crop files (benchmarks, dry runs).
    pub write_crops: bool,
}

impl RunOptions {
    pub fn new(manifest_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest_dir: manifest_dir.into(),
            out_dir: out_dir.into(),
            jobs: 1,
            write_crops: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanFailure {
    pub scan_id: String,
    pub message: String,
    #[serde(skip)]
    pub io: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub present: usize,
    pub absent: usize,
}

impl ClassCounts {
    pub fn of<'a>(patches: impl IntoIterator<Item = &'a PatchRecord>) -> Self {
        let mut c = Self::default();
        for p in patches {
            match p.label {
                Label::Present => c.present += 1,
                Label::Absent => c.absent += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.present + self.absent
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.present as f64 / self.total() as f64
        }
    }
}

/// Runs `f` over every scan on `jobs` threads. Results keep manifest order
/// regardless of scheduling.
pub fn for_each_scan<T, F>(
    scans: &[ScanRecord],
    jobs: usize,
    f: F,
) -> Result<(Vec<T>, Vec<ScanFailure>), PipelineError>
where
    T: Send,
    F: Fn(&ScanRecord) -> Result<T, PipelineError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
    let results: Vec<Result<T, ScanFailure>> = pool.install(|| {
        scans
            .par_iter()
            .map(|scan| {
                f(scan).map_err(|e| ScanFailure {
                    scan_id: scan.scan_id.clone(),
                    message: e.to_string(),
                    io: e.is_io(),
                })
            })
            .collect()
    });
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::error!("scan {}: {}", e.scan_id, e.message);
                failed.push(e);
            }
        }
    }
    Ok((ok, failed))
}

/// Loads a scan's image and checks it against the manifest's dimensions.
pub fn load_scan_image(scan: &ScanRecord, manifest_dir: &Path) -> Result<GrayImage, PipelineError> {
    let img = load_image(resolve_path(manifest_dir, &scan.image_path))?;
    if (img.width(), img.height()) != (scan.width, scan.height) {
        return Err(PipelineError::DimensionMismatch {
            scan_id: scan.scan_id.clone(),
            width: scan.width,
            height: scan.height,
            found_w: img.width(),
            found_h: img.height(),
        });
    }
    Ok(img)
}

/// `out_dir/{method}/{label}/{patch_id}.png`
pub fn patch_path(out_dir: &Path, method: Method, label: Label, patch_id: &str) -> PathBuf {
    out_dir
        .join(method.as_str())
        .join(label.as_str())
        .join(format!("{patch_id}.png"))
}

/// Clears stale crops so reruns leave exactly the current patch set.
pub(crate) fn reset_patch_dirs(out_dir: &Path, method: Method) -> Result<(), PipelineError> {
    for label in [Label::Present, Label::Absent] {
        let dir = out_dir.join(method.as_str()).join(label.as_str());
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| ImageError::Io {
                path: dir.clone(),
                source: e,
            })?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| ImageError::Io {
            path: dir.clone(),
            source: e,
        })?;
    }
    Ok(())
}

pub(crate) fn write_crop(
    img: &GrayImage,
    patch: &PatchRecord,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    let pixels = crop_pixels(img, &patch.crop)?;
    save_image(&pixels, patch_path(out_dir, patch.method, patch.label, &patch.patch_id))?;
    Ok(())
}
