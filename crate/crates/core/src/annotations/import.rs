//! CSV importer for raw point annotations.
//!
//! Columns: `scan_id,kind,index,x,y,region`. `kind` is `vertebra_pt` or
//! `osteophyte`. For vertebra rows `index` numbers the vertebra and six rows
//! share it; for osteophyte rows it is just a running number. Images are
//! looked up as `{images_dir}/{scan_id}.pgm` or `.png`.

use super::{
    DatasetManifest, ManifestError, OsteophytePoint, Region, ScanRecord, VertebraAnnotation,
};
use crate::geometry::Point;
use crate::raster::read_dimensions;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportRow {
    pub scan_id: String,
    pub kind: String,
    pub index: u32,
    pub x: f64,
    pub y: f64,
    pub region: Region,
}

#[derive(Default)]
struct Pending {
    region: Option<Region>,
    vertebrae: BTreeMap<u32, Vec<Point>>,
    osteophytes: Vec<Point>,
}

/// Builds a validated manifest from the CSV. Image paths are written
/// relative to `manifest_dir` when possible.
pub fn import_csv(
    csv_path: &Path,
    images_dir: &Path,
    manifest_dir: &Path,
) -> Result<DatasetManifest, ManifestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(|e| csv_error(e, csv_path))?;
    let mut scans: BTreeMap<String, Pending> = BTreeMap::new();
    for (i, row) in reader.deserialize::<ImportRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| match e.position() {
            Some(p) => ManifestError::Import {
                line: p.line() as usize,
                message: e.to_string(),
            },
            None => csv_error(e, csv_path),
        })?;
        let entry = scans.entry(row.scan_id.clone()).or_default();
        match entry.region {
            Some(r) if r != row.region => {
                return Err(ManifestError::Import {
                    line,
                    message: format!("scan '{}' mixes regions {r} and {}", row.scan_id, row.region),
                })
            }
            _ => entry.region = Some(row.region),
        }
        let p = Point::new(row.x, row.y);
        match row.kind.as_str() {
            "vertebra_pt" => entry.vertebrae.entry(row.index).or_default().push(p),
            "osteophyte" => entry.osteophytes.push(p),
            other => {
                return Err(ManifestError::Import {
                    line,
                    message: format!("unknown kind '{other}' (expected vertebra_pt or osteophyte)"),
                })
            }
        }
    }

    let mut records = Vec::with_capacity(scans.len());
    for (scan_id, pending) in scans {
        let region = pending.region.expect("set with first row");
        let image = ["pgm", "png"]
            .iter()
            .map(|ext| images_dir.join(format!("{scan_id}.{ext}")))
            .find(|p| p.is_file())
            .ok_or_else(|| ManifestError::Schema {
                scan_id: Some(scan_id.clone()),
                message: format!("no {scan_id}.pgm or {scan_id}.png in {}", images_dir.display()),
            })?;
        let (width, height) = read_dimensions(&image).map_err(|e| ManifestError::Schema {
            scan_id: Some(scan_id.clone()),
            message: e.to_string(),
        })?;
        let image_path = image
            .strip_prefix(manifest_dir)
            .map(Path::to_path_buf)
            .unwrap_or(image);
        let mut scan = ScanRecord {
            image_path,
            region,
            width,
            height,
            vertebrae: pending
                .vertebrae
                .into_iter()
                .map(|(idx, points)| VertebraAnnotation {
                    vertebra_id: format!("v{idx}"),
                    points,
                    region,
                })
                .collect(),
            osteophytes: pending
                .osteophytes
                .into_iter()
                .map(|location| OsteophytePoint {
                    location,
                    vertebra_id: None,
                })
                .collect(),
            mask_paths: None,
            scan_id,
        };
        associate_osteophytes(&mut scan);
        records.push(scan);
    }
    let manifest = DatasetManifest::new(records);
    manifest.validate()?;
    Ok(manifest)
}

fn csv_error(e: csv::Error, path: &Path) -> ManifestError {
    ManifestError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Fills missing osteophyte associations with the vertebra whose centroid is
/// nearest. Ties go to the earlier vertebra.
pub fn associate_osteophytes(scan: &mut ScanRecord) {
    if scan.vertebrae.is_empty() {
        return;
    }
    let centroids: Vec<(String, Point)> = scan
        .vertebrae
        .iter()
        .map(|v| (v.vertebra_id.clone(), v.centroid()))
        .collect();
    for o in scan.osteophytes.iter_mut().filter(|o| o.vertebra_id.is_none()) {
        let mut best = &centroids[0];
        for c in &centroids[1..] {
            if c.1.distance(&o.location) < best.1.distance(&o.location) {
                best = c;
            }
        }
        o.vertebra_id = Some(best.0.clone());
    }
}
