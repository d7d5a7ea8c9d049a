use super::features::to_input;
use super::ClassifierError;
use crate::annotations::{DatasetManifest, Method, Split};
use crate::pipeline::load_scan_image;
use crate::raster::{crop_pixels, GrayImage};
use rayon::prelude::*;
use std::path::Path;

/// A patch re-cropped from its source scan and resized to the model input.
#[derive(Debug, Clone)]
pub struct PatchSample {
    pub patch_id: String,
    pub label: bool,
    pub image: GrayImage,
}

/// Loads every patch of `method` in `split` (all patches when `None`), in
/// manifest order. Each source scan is decoded once.
pub fn load_patch_samples(
    manifest: &DatasetManifest,
    method: Method,
    split: Option<Split>,
    manifest_dir: &Path,
    jobs: usize,
) -> Result<Vec<PatchSample>, ClassifierError> {
    let wanted: Vec<_> = manifest
        .patches_for(method)
        .filter(|p| split.is_none() || p.split == split)
        .collect();
    let mut scan_ids: Vec<&str> = wanted.iter().map(|p| p.scan_id.as_str()).collect();
    scan_ids.sort_unstable();
    scan_ids.dedup();

    let load = || -> Result<Vec<Vec<PatchSample>>, ClassifierError> {
        scan_ids
            .par_iter()
            .map(|&id| {
                let scan = manifest
                    .scan(id)
                    .ok_or_else(|| ClassifierError::Data(format!("patch refers to unknown scan {id}")))?;
                let img = load_scan_image(scan, manifest_dir)?;
                wanted
                    .iter()
                    .filter(|p| p.scan_id == id)
                    .map(|p| {
                        let crop = crop_pixels(&img, &p.crop)
                            .map_err(|e| ClassifierError::Data(format!("{}: {e}", p.patch_id)))?;
                        Ok(PatchSample {
                            patch_id: p.patch_id.clone(),
                            label: p.label.is_present(),
                            image: to_input(&crop),
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let per_scan = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(load)?,
        Err(e) => return Err(ClassifierError::ThreadPool(e.to_string())),
    };
    let mut by_id: std::collections::HashMap<String, PatchSample> = per_scan
        .into_iter()
        .flatten()
        .map(|s| (s.patch_id.clone(), s))
        .collect();
    Ok(wanted
        .iter()
        .map(|p| by_id.remove(&p.patch_id).expect("every wanted patch was loaded"))
        .collect())
}
