//! Per-vertebra patches: take the vertebra contour, grow it toward −X and +Y
//! so corner osteophytes and the gap below fall inside, crop its bounding box
//! and label by containment.

use crate::annotations::{
    resolve_path, vertebra_polygon, DatasetManifest, Label, Method, PatchRecord, Region,
    ScanRecord, VertebraAnnotation,
};
use crate::geometry::{bbox_of, expand_contour, point_in_polygon, BBox, Point, Polygon};
use crate::pipeline::{
    for_each_scan, load_scan_image, reset_patch_dirs, write_crop, ClassCounts, PipelineError,
    RunOptions, ScanFailure,
};
use crate::raster::{load_mask, trace_mask_contour};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourSource {
    /// Trace the vertebra's body mask; scans without any masks use the points.
    Mask,
    SixPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelGeometry {
    ExpandedPolygon,
    CropBbox,
}

/// A value per spine region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerRegion {
    pub cervical: f64,
    pub lumbar: f64,
}

impl PerRegion {
    pub fn get(&self, r: Region) -> f64 {
        match r {
            Region::Cervical => self.cervical,
            Region::Lumbar => self.lumbar,
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            cervical: self.cervical * k,
            lumbar: self.lumbar * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegPatchConfig {
    pub dx_minus_x: PerRegion,
    pub dy_plus_y: PerRegion,
    pub contour_source: ContourSource,
    pub label_geometry: LabelGeometry,
}

impl Default for SegPatchConfig {
    fn default() -> Self {
        Self {
            dx_minus_x: PerRegion {
                cervical: 40.0,
                lumbar: 60.0,
            },
            dy_plus_y: PerRegion {
                cervical: 30.0,
                lumbar: 45.0,
            },
            contour_source: ContourSource::Mask,
            label_geometry: LabelGeometry::ExpandedPolygon,
        }
    }
}

impl SegPatchConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, v) in [
            ("cervical dx", self.dx_minus_x.cervical),
            ("lumbar dx", self.dx_minus_x.lumbar),
            ("cervical dy", self.dy_plus_y.cervical),
            ("lumbar dy", self.dy_plus_y.lumbar),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PipelineError::Config(format!(
                    "{name} displacement must be a non-negative number, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Body outline of one vertebra from its mask or its six points.
pub fn vertebra_contour(
    scan: &ScanRecord,
    vertebra: &VertebraAnnotation,
    cfg: &SegPatchConfig,
    manifest_dir: &Path,
) -> Result<Polygon, PipelineError> {
    match (cfg.contour_source, &scan.mask_paths) {
        (ContourSource::Mask, Some(masks)) => {
            let rel = masks.get(&vertebra.vertebra_id).ok_or_else(|| {
                PipelineError::Config(format!(
                    "scan '{}' has no mask for vertebra '{}'",
                    scan.scan_id, vertebra.vertebra_id
                ))
            })?;
            let mask = load_mask(resolve_path(manifest_dir, rel))?;
            if (mask.width(), mask.height()) != (scan.width, scan.height) {
                return Err(PipelineError::DimensionMismatch {
                    scan_id: scan.scan_id.clone(),
                    width: scan.width,
                    height: scan.height,
                    found_w: mask.width(),
                    found_h: mask.height(),
                });
            }
            Ok(trace_mask_contour(&mask)?)
        }
        _ => Ok(vertebra_polygon(vertebra)?),
    }
}

/// A patch before its pixels are cut out.
#[derive(Debug, Clone, PartialEq)]
pub struct SegPatch {
    pub record: PatchRecord,
    pub expanded: Polygon,
}

/// Expanded contour, its clamped crop and the containment label. `None`
/// when the crop misses the image entirely.
pub fn make_segpatch(
    scan: &ScanRecord,
    vertebra: &VertebraAnnotation,
    contour: &Polygon,
    cfg: &SegPatchConfig,
) -> Result<Option<SegPatch>, PipelineError> {
    let expanded = expand_contour(
        contour,
        cfg.dx_minus_x.get(scan.region),
        cfg.dy_plus_y.get(scan.region),
    )?;
    let Some(crop) = clamp_to_image(&bbox_of(&expanded), scan.width, scan.height) else {
        return Ok(None);
    };
    let present = scan
        .osteophytes
        .iter()
        .map(|o| contains(&expanded, &crop, &o.location, cfg.label_geometry))
        .collect::<Result<Vec<bool>, _>>()?
        .into_iter()
        .any(|b| b);
    Ok(Some(SegPatch {
        record: PatchRecord {
            patch_id: format!("{}_{}", scan.scan_id, vertebra.vertebra_id),
            scan_id: scan.scan_id.clone(),
            method: Method::Segpatch,
            crop,
            label: Label::from_present(present),
            source_vertebra: Some(vertebra.vertebra_id.clone()),
            split: None,
        },
        expanded,
    }))
}

fn contains(
    expanded: &Polygon,
    crop: &BBox,
    p: &Point,
    geometry: LabelGeometry,
) -> Result<bool, PipelineError> {
    Ok(match geometry {
        LabelGeometry::CropBbox => crop.contains(p),
        LabelGeometry::ExpandedPolygon if expanded.len() >= 3 => point_in_polygon(p, expanded)?,
        LabelGeometry::ExpandedPolygon => expanded.boundary_distance(p) <= crate::geometry::BOUNDARY_EPS,
    })
}

/// Intersection with the pixel-center extent of a `w×h` image.
pub fn clamp_to_image(b: &BBox, w: usize, h: usize) -> Option<BBox> {
    b.intersection(&BBox {
        x0: 0.0,
        y0: 0.0,
        x1: w as f64 - 1.0,
        y1: h as f64 - 1.0,
    })
}

/// Every patch of one scan, in annotation order.
pub fn scan_segpatches(
    scan: &ScanRecord,
    cfg: &SegPatchConfig,
    manifest_dir: &Path,
) -> Result<(Vec<SegPatch>, Vec<String>), PipelineError> {
    let mut patches = Vec::with_capacity(scan.vertebrae.len());
    let mut skipped = Vec::new();
    for v in &scan.vertebrae {
        let contour = vertebra_contour(scan, v, cfg, manifest_dir)?;
        match make_segpatch(scan, v, &contour, cfg)? {
            Some(p) => patches.push(p),
            None => {
                log::warn!(
                    "scan {}: vertebra {} crop is empty after clamping; skipped",
                    scan.scan_id,
                    v.vertebra_id
                );
                skipped.push(format!("{}_{}", scan.scan_id, v.vertebra_id));
            }
        }
    }
    Ok((patches, skipped))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncoveredOsteophyte {
    pub scan_id: String,
    pub point: Point,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RegionCoverage {
    pub osteophytes: usize,
    pub covered: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub uncovered: Vec<UncoveredOsteophyte>,
    pub by_region: BTreeMap<Region, RegionCoverage>,
    pub total: RegionCoverage,
}

impl CoverageReport {
    pub fn coverage(&self) -> f64 {
        self.total.coverage
    }
}

/// Osteophytes outside every SegPatch crop of their scan. A point on a crop
/// edge counts as covered.
pub fn coverage_report(manifest: &DatasetManifest) -> CoverageReport {
    let mut crops: BTreeMap<&str, Vec<&BBox>> = BTreeMap::new();
    for p in manifest.patches_for(Method::Segpatch) {
        crops.entry(p.scan_id.as_str()).or_default().push(&p.crop);
    }
    let mut uncovered = Vec::new();
    let mut by_region: BTreeMap<Region, RegionCoverage> =
        Region::ALL.iter().map(|&r| (r, RegionCoverage::default())).collect();
    let mut total = RegionCoverage::default();
    for scan in &manifest.scans {
        let boxes = crops.get(scan.scan_id.as_str());
        for o in &scan.osteophytes {
            let hit = boxes.is_some_and(|bs| bs.iter().any(|b| b.contains(&o.location)));
            let r = by_region.get_mut(&scan.region).expect("all regions present");
            r.osteophytes += 1;
            total.osteophytes += 1;
            if hit {
                r.covered += 1;
                total.covered += 1;
            } else {
                uncovered.push(UncoveredOsteophyte {
                    scan_id: scan.scan_id.clone(),
                    point: o.location,
                });
            }
        }
    }
    for r in by_region.values_mut().chain(std::iter::once(&mut total)) {
        r.coverage = if r.osteophytes == 0 {
            1.0
        } else {
            r.covered as f64 / r.osteophytes as f64
        };
    }
    CoverageReport {
        uncovered,
        by_region,
        total,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SegPatchSummary {
    pub method: Method,
    pub scans: usize,
    pub patches: usize,
    pub counts: ClassCounts,
    pub positive_fraction: f64,
    pub skipped_empty: Vec<String>,
    pub coverage: CoverageReport,
    pub failed: Vec<ScanFailure>,
}

/// Builds every SegPatch, writes the crops and returns the updated manifest
/// with a coverage report.
pub fn run_segpatch(
    manifest: &DatasetManifest,
    cfg: &SegPatchConfig,
    opts: &RunOptions,
) -> Result<(DatasetManifest, SegPatchSummary), PipelineError> {
    cfg.validate()?;
    if opts.write_crops {
        reset_patch_dirs(&opts.out_dir, Method::Segpatch)?;
    }
    let (per_scan, failed) = for_each_scan(&manifest.scans, opts.jobs, |scan| {
        let (patches, skipped) = scan_segpatches(scan, cfg, &opts.manifest_dir)?;
        if opts.write_crops {
            let img = load_scan_image(scan, &opts.manifest_dir)?;
            for p in &patches {
                write_crop(&img, &p.record, &opts.out_dir)?;
            }
        }
        Ok((patches, skipped))
    })?;
    let mut patches = Vec::new();
    let mut skipped_empty = Vec::new();
    for (p, s) in per_scan {
        patches.extend(p.into_iter().map(|sp| sp.record));
        skipped_empty.extend(s);
    }
    let counts = ClassCounts::of(&patches);
    let mut out = manifest.clone();
    out.replace_patches(Method::Segpatch, patches);
    out.assign_patch_splits();
    let summary = SegPatchSummary {
        method: Method::Segpatch,
        scans: manifest.scans.len() - failed.len(),
        patches: counts.total(),
        counts,
        positive_fraction: counts.positive_fraction(),
        skipped_empty,
        coverage: coverage_report(&out),
        failed,
    };
    Ok((out, summary))
}
