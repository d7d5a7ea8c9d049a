//! Dataset schema: scans, their vertebra and osteophyte annotations, the
//! generated patches, and the train/test split. The manifest file is the
//! pipeline's interchange format.

mod import;
mod json;
mod split;

pub use import::{associate_osteophytes, import_csv, ImportRow};
pub use json::{format_manifest, parse_manifest, parse_manifest_str, write_manifest};
pub use split::{split_dataset, TRAIN_FRACTION};

use crate::geometry::{BBox, GeometryError, Point, Polygon};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_VERSION: u32 = 1;
/// Points delineating one vertebra body.
pub const VERTEBRA_POINTS: usize = 6;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error{}: {message}", scan_id.as_ref().map(|s| format!(" in scan '{s}'")).unwrap_or_default())]
    Schema {
        scan_id: Option<String>,
        message: String,
    },
    #[error("split error: {0}")]
    Split(String),
    #[error("import error at line {line}: {message}")]
    Import { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl ManifestError {
    fn schema(scan_id: &str, message: impl Into<String>) -> Self {
        ManifestError::Schema {
            scan_id: Some(scan_id.to_string()),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        ManifestError::Schema {
            scan_id: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Cervical,
    Lumbar,
}

impl Region {
    pub const ALL: [Region; 2] = [Region::Cervical, Region::Lumbar];

    pub fn as_str(&self) -> &'static str {
        match self {
            Region::Cervical => "cervical",
            Region::Lumbar => "lumbar",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Region {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cervical" => Ok(Region::Cervical),
            "lumbar" => Ok(Region::Lumbar),
            other => Err(format!("unknown region '{other}' (expected cervical or lumbar)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertebraAnnotation {
    pub vertebra_id: String,
    pub points: Vec<Point>,
    pub region: Region,
}

impl VertebraAnnotation {
    pub fn centroid(&self) -> Point {
        let n = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
        Point::new(sx / n, sy / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OsteophytePoint {
    pub location: Point,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertebra_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRecord {
    pub scan_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub image_path: PathBuf,
    pub region: Region,
    pub width: usize,
    pub height: usize,
    pub vertebrae: Vec<VertebraAnnotation>,
    #[serde(default)]
    pub osteophytes: Vec<OsteophytePoint>,
    /// Per-vertebra body masks keyed by `vertebra_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_paths: Option<BTreeMap<String, PathBuf>>,
}

impl ScanRecord {
    pub fn vertebra(&self, id: &str) -> Option<&VertebraAnnotation> {
        self.vertebrae.iter().find(|v| v.vertebra_id == id)
    }

    fn in_bounds(&self, p: &Point) -> bool {
        p.is_finite()
            && p.x >= 0.0
            && p.y >= 0.0
            && p.x < self.width as f64
            && p.y < self.height as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Tiling,
    Segpatch,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Tiling => "tiling",
            Method::Segpatch => "segpatch",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tiling" => Ok(Method::Tiling),
            "segpatch" => Ok(Method::Segpatch),
            other => Err(format!("unknown method '{other}' (expected tiling or segpatch)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Present,
    Absent,
}

impl Label {
    pub fn from_present(present: bool) -> Self {
        if present {
            Label::Present
        } else {
            Label::Absent
        }
    }

    pub fn is_present(&self) -> bool {
        matches!(self, Label::Present)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Present => "present",
            Label::Absent => "absent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One generated patch: a crop rectangle in pixel-center coordinates plus
/// its label and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchRecord {
    pub patch_id: String,
    pub scan_id: String,
    pub method: Method,
    pub crop: BBox,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_vertebra: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub scans: Vec<ScanRecord>,
    #[serde(default)]
    pub splits: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patches: Option<Vec<PatchRecord>>,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            version: MANIFEST_VERSION,
            scans: Vec::new(),
            splits: BTreeMap::new(),
            patches: None,
        }
    }
}

impl DatasetManifest {
    pub fn new(scans: Vec<ScanRecord>) -> Self {
        let mut m = Self {
            scans,
            ..Self::default()
        };
        m.canonicalize();
        m
    }

    pub fn scan(&self, scan_id: &str) -> Option<&ScanRecord> {
        self.scans.iter().find(|s| s.scan_id == scan_id)
    }

    /// Split a scan belongs to, if any.
    pub fn split_of(&self, scan_id: &str) -> Option<Split> {
        for (name, ids) in &self.splits {
            if ids.iter().any(|id| id == scan_id) {
                return match name.as_str() {
                    "train" => Some(Split::Train),
                    "test" => Some(Split::Test),
                    _ => None,
                };
            }
        }
        None
    }

    pub fn patches_for(&self, method: Method) -> impl Iterator<Item = &PatchRecord> {
        self.patches
            .iter()
            .flatten()
            .filter(move |p| p.method == method)
    }

    /// Replaces every patch of `method` with `patches`.
    pub fn replace_patches(&mut self, method: Method, patches: Vec<PatchRecord>) {
        let mut all: Vec<PatchRecord> = self
            .patches
            .take()
            .unwrap_or_default()
            .into_iter()
            .filter(|p| p.method != method)
            .collect();
        all.extend(patches);
        self.patches = Some(all);
        self.canonicalize();
    }

    /// Stamps each patch with its scan's split.
    pub fn assign_patch_splits(&mut self) {
        let lookup: BTreeMap<String, Option<Split>> = self
            .scans
            .iter()
            .map(|s| (s.scan_id.clone(), self.split_of(&s.scan_id)))
            .collect();
        for p in self.patches.iter_mut().flatten() {
            p.split = lookup.get(&p.scan_id).copied().flatten();
        }
    }

    /// Sorted order used on disk: scans by id, split lists by id, patches by
    /// method then id.
    pub fn canonicalize(&mut self) {
        self.scans.sort_by(|a, b| a.scan_id.cmp(&b.scan_id));
        for ids in self.splits.values_mut() {
            ids.sort();
        }
        if let Some(patches) = self.patches.as_mut() {
            patches.sort_by(|a, b| (a.method, &a.patch_id).cmp(&(b.method, &b.patch_id)));
        }
    }

    /// Checks every schema invariant; errors name the offending scan.
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.version != MANIFEST_VERSION {
            return Err(ManifestError::global(format!(
                "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                self.version
            )));
        }
        let mut ids = BTreeSet::new();
        for scan in &self.scans {
            if scan.scan_id.is_empty() {
                return Err(ManifestError::global("scan with empty scan_id"));
            }
            if !ids.insert(scan.scan_id.as_str()) {
                return Err(ManifestError::schema(&scan.scan_id, "duplicate scan_id"));
            }
            validate_scan(scan)?;
        }
        let mut seen: BTreeMap<&str, &str> = BTreeMap::new();
        for (name, members) in &self.splits {
            for id in members {
                if !ids.contains(id.as_str()) {
                    return Err(ManifestError::Split(format!(
                        "split '{name}' references unknown scan_id '{id}'"
                    )));
                }
                if let Some(other) = seen.insert(id, name) {
                    return Err(ManifestError::Split(format!(
                        "scan_id '{id}' appears in both '{other}' and '{name}'"
                    )));
                }
            }
        }
        let mut patch_ids = BTreeSet::new();
        for p in self.patches.iter().flatten() {
            let Some(scan) = self.scan(&p.scan_id) else {
                return Err(ManifestError::global(format!(
                    "patch '{}' references unknown scan_id '{}'",
                    p.patch_id, p.scan_id
                )));
            };
            if !patch_ids.insert((p.method, p.patch_id.as_str())) {
                return Err(ManifestError::schema(
                    &p.scan_id,
                    format!("duplicate patch_id '{}'", p.patch_id),
                ));
            }
            if BBox::new(p.crop.x0, p.crop.y0, p.crop.x1, p.crop.y1).is_err() {
                return Err(ManifestError::schema(
                    &p.scan_id,
                    format!("patch '{}' has an inverted or non-finite crop", p.patch_id),
                ));
            }
            if let Some(v) = &p.source_vertebra {
                if scan.vertebra(v).is_none() {
                    return Err(ManifestError::schema(
                        &p.scan_id,
                        format!("patch '{}' names unknown vertebra '{v}'", p.patch_id),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn validate_scan(scan: &ScanRecord) -> Result<(), ManifestError> {
    let id = &scan.scan_id;
    if scan.width == 0 || scan.height == 0 {
        return Err(ManifestError::schema(id, "image dimensions must be positive"));
    }
    let mut vids = BTreeSet::new();
    for v in &scan.vertebrae {
        if !vids.insert(v.vertebra_id.as_str()) {
            return Err(ManifestError::schema(
                id,
                format!("duplicate vertebra_id '{}'", v.vertebra_id),
            ));
        }
        if v.points.len() != VERTEBRA_POINTS {
            return Err(ManifestError::schema(
                id,
                format!(
                    "vertebra '{}' has {} points; each vertebra must be delineated by six pixel points",
                    v.vertebra_id,
                    v.points.len()
                ),
            ));
        }
        if v.region != scan.region {
            return Err(ManifestError::schema(
                id,
                format!(
                    "vertebra '{}' is {} but the scan is {}",
                    v.vertebra_id, v.region, scan.region
                ),
            ));
        }
        if let Some(p) = v.points.iter().find(|p| !scan.in_bounds(p)) {
            return Err(ManifestError::schema(
                id,
                format!(
                    "vertebra '{}' point ({}, {}) lies outside the {}×{} image",
                    v.vertebra_id, p.x, p.y, scan.width, scan.height
                ),
            ));
        }
    }
    for o in &scan.osteophytes {
        if !scan.in_bounds(&o.location) {
            return Err(ManifestError::schema(
                id,
                format!(
                    "osteophyte ({}, {}) lies outside the {}×{} image",
                    o.location.x, o.location.y, scan.width, scan.height
                ),
            ));
        }
        if let Some(v) = &o.vertebra_id {
            if !vids.contains(v.as_str()) {
                return Err(ManifestError::schema(
                    id,
                    format!("osteophyte references unknown vertebra '{v}'"),
                ));
            }
        }
    }
    if let Some(masks) = &scan.mask_paths {
        if let Some(k) = masks.keys().find(|k| !vids.contains(k.as_str())) {
            return Err(ManifestError::schema(
                id,
                format!("mask_paths names unknown vertebra '{k}'"),
            ));
        }
    }
    Ok(())
}

/// Resolves a manifest-relative path.
pub fn resolve_path(manifest_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_dir.join(p)
    }
}

/// Closed contour through the six annotated points, ordered by angle about
/// their centroid.
pub fn vertebra_polygon(ann: &VertebraAnnotation) -> Result<Polygon, GeometryError> {
    if ann.points.len() < 3 {
        return Err(GeometryError::InvalidGeometry(format!(
            "vertebra '{}' has fewer than three points",
            ann.vertebra_id
        )));
    }
    let c = ann.centroid();
    let mut pts = ann.points.clone();
    pts.sort_by(|a, b| {
        let ta = (a.y - c.y).atan2(a.x - c.x);
        let tb = (b.y - c.y).atan2(b.x - c.x);
        ta.total_cmp(&tb)
            .then_with(|| a.distance(&c).total_cmp(&b.distance(&c)))
    });
    let poly = Polygon::new(pts)?;
    let b = crate::geometry::bbox_of(&poly);
    let scale = b.width().max(b.height()).max(1.0);
    if poly.len() < 3 || poly.area() <= 1e-9 * scale * scale {
        return Err(GeometryError::InvalidGeometry(format!(
            "vertebra '{}' points are collinear",
            ann.vertebra_id
        )));
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::segments_intersect;

    pub(crate) fn vertebra(id: &str, pts: &[(f64, f64)]) -> VertebraAnnotation {
        VertebraAnnotation {
            vertebra_id: id.into(),
            points: pts.iter().map(|&(x, y)| Point::new(x, y)).collect(),
            region: Region::Cervical,
        }
    }

    fn is_simple(poly: &Polygon) -> bool {
        let vs = poly.vertices();
        let n = vs.len();
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(&vs[i], &vs[(i + 1) % n], &vs[j], &vs[(j + 1) % n]) {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn shuffled_hexagon_becomes_canonical() {
        let hex: Vec<(f64, f64)> = (0..6)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 3.0;
                (50.0 + 10.0 * t.cos(), 50.0 + 10.0 * t.sin())
            })
            .collect();
        let a = vertebra_polygon(&vertebra("a", &hex)).unwrap();
        let shuffled = [hex[3], hex[0], hex[5], hex[1], hex[4], hex[2]];
        let b = vertebra_polygon(&vertebra("a", &shuffled)).unwrap();
        assert_eq!(a, b);
        assert!(a.signed_area() < 0.0);
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn rectangle_with_midpoints_is_simple() {
        let pts = [
            (0.0, 0.0),
            (20.0, 10.0),
            (20.0, 0.0),
            (0.0, 10.0),
            (10.0, 0.0),
            (10.0, 10.0),
        ];
        let poly = vertebra_polygon(&vertebra("r", &pts)).unwrap();
        assert!(is_simple(&poly));
        for &(x, y) in &pts {
            assert!(poly.boundary_distance(&Point::new(x, y)) < 1e-9);
        }
    }

    #[test]
    fn collinear_points_rejected() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!(vertebra_polygon(&vertebra("c", &pts)).is_err());
    }

    #[test]
    fn region_and_method_parse() {
        assert_eq!("lumbar".parse::<Region>().unwrap(), Region::Lumbar);
        assert!("thoracic".parse::<Region>().is_err());
        assert_eq!("segpatch".parse::<Method>().unwrap(), Method::Segpatch);
    }
}
