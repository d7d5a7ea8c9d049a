use crate::annotations::{DatasetManifest, Method, Region};
use crate::pipeline::ClassCounts;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CountSummary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl CountSummary {
    fn of(values: &[usize]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        Self {
            min: *values.iter().min().expect("non-empty"),
            max: *values.iter().max().expect("non-empty"),
            mean: values.iter().sum::<usize>() as f64 / values.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RegionStats {
    pub scans: usize,
    pub vertebrae: usize,
    pub osteophytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub scans: usize,
    pub vertebrae: usize,
    pub osteophytes: usize,
    pub by_region: BTreeMap<Region, RegionStats>,
    pub vertebrae_per_scan: CountSummary,
    pub osteophytes_per_scan: CountSummary,
    pub patches: BTreeMap<Method, ClassCounts>,
}

pub fn corpus_stats(manifest: &DatasetManifest) -> CorpusStats {
    let mut by_region: BTreeMap<Region, RegionStats> =
        Region::ALL.iter().map(|&r| (r, RegionStats::default())).collect();
    for s in &manifest.scans {
        let r = by_region.get_mut(&s.region).expect("all regions present");
        r.scans += 1;
        r.vertebrae += s.vertebrae.len();
        r.osteophytes += s.osteophytes.len();
    }
    let verts: Vec<usize> = manifest.scans.iter().map(|s| s.vertebrae.len()).collect();
    let osts: Vec<usize> = manifest.scans.iter().map(|s| s.osteophytes.len()).collect();
    let patches = [Method::Tiling, Method::Segpatch]
        .into_iter()
        .map(|m| (m, ClassCounts::of(manifest.patches_for(m))))
        .collect();
    CorpusStats {
        scans: manifest.scans.len(),
        vertebrae: verts.iter().sum(),
        osteophytes: osts.iter().sum(),
        by_region,
        vertebrae_per_scan: CountSummary::of(&verts),
        osteophytes_per_scan: CountSummary::of(&osts),
        patches,
    }
}
