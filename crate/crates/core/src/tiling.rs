//! Baseline patching: a fixed grid of equal tiles, each labeled by whether an
//! osteophyte's annotation box touches it.

use crate::annotations::{DatasetManifest, Label, Method, PatchRecord};
use crate::geometry::{bbox_intersects, point_to_box, BBox, Point};
use crate::pipeline::{
    for_each_scan, load_scan_image, reset_patch_dirs, write_crop, ClassCounts, PipelineError,
    RunOptions, ScanFailure,
};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TilingConfig {
    pub tile_w: usize,
    pub tile_h: usize,
    /// Half side of the square box drawn around each osteophyte point.
    pub annotation_half_extent: f64,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self {
            tile_w: 224,
            tile_h: 224,
            annotation_half_extent: 18.0,
        }
    }
}

impl TilingConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.tile_w == 0 || self.tile_h == 0 {
            return Err(PipelineError::Config(format!(
                "tile size must be positive, got {}×{}",
                self.tile_w, self.tile_h
            )));
        }
        if !(self.annotation_half_extent.is_finite() && self.annotation_half_extent > 0.0) {
            return Err(PipelineError::Config(format!(
                "annotation half extent must be a positive number, got {}",
                self.annotation_half_extent
            )));
        }
        Ok(())
    }
}

/// Tile origins along one axis. The last tile is pulled back to end flush
/// with the image.
fn axis_origins(len: usize, tile: usize) -> Vec<usize> {
    if len <= tile {
        return vec![0];
    }
    let mut v: Vec<usize> = (0..).map(|k| k * tile).take_while(|&o| o + tile <= len).collect();
    if v.last().is_none_or(|&o| o + tile < len) {
        v.push(len - tile);
    }
    v
}

/// Grid tiles in pixel-center coordinates (inclusive corners), row-major.
/// An image smaller than a tile yields one tile clamped to the image.
pub fn tile_grid(img_w: usize, img_h: usize, cfg: &TilingConfig) -> Vec<BBox> {
    let xs = axis_origins(img_w, cfg.tile_w);
    let ys = axis_origins(img_h, cfg.tile_h);
    let tw = cfg.tile_w.min(img_w).max(1);
    let th = cfg.tile_h.min(img_h).max(1);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            out.push(BBox {
                x0: x as f64,
                y0: y as f64,
                x1: (x + tw - 1) as f64,
                y1: (y + th - 1) as f64,
            });
        }
    }
    out
}

pub fn tile_label(tile: &BBox, osteophytes: &[Point], cfg: &TilingConfig) -> Label {
    Label::from_present(osteophytes.iter().any(|o| {
        point_to_box(o, cfg.annotation_half_extent).is_ok_and(|b| bbox_intersects(tile, &b))
    }))
}

/// Labels each tile. Patch ids are `{scan_id}_{x}_{y}` from the tile origin.
pub fn label_tiles(
    scan_id: &str,
    tiles: &[BBox],
    osteophytes: &[Point],
    cfg: &TilingConfig,
) -> Vec<PatchRecord> {
    tiles
        .iter()
        .map(|t| PatchRecord {
            patch_id: format!("{scan_id}_{}_{}", t.x0 as usize, t.y0 as usize),
            scan_id: scan_id.to_string(),
            method: Method::Tiling,
            crop: *t,
            label: tile_label(t, osteophytes, cfg),
            source_vertebra: None,
            split: None,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TilingSummary {
    pub method: Method,
    pub scans: usize,
    pub patches: usize,
    pub counts: ClassCounts,
    pub positive_fraction: f64,
    pub failed: Vec<ScanFailure>,
}

/// Tiles every scan, writes the crops and returns the manifest with its
/// tiling patches replaced. Failing scans are reported and skipped.
pub fn run_tiling(
    manifest: &DatasetManifest,
    cfg: &TilingConfig,
    opts: &RunOptions,
) -> Result<(DatasetManifest, TilingSummary), PipelineError> {
    cfg.validate()?;
    if opts.write_crops {
        reset_patch_dirs(&opts.out_dir, Method::Tiling)?;
    }
    let (per_scan, failed) = for_each_scan(&manifest.scans, opts.jobs, |scan| {
        let tiles = tile_grid(scan.width, scan.height, cfg);
        let points: Vec<Point> = scan.osteophytes.iter().map(|o| o.location).collect();
        let patches = label_tiles(&scan.scan_id, &tiles, &points, cfg);
        if opts.write_crops {
            let img = load_scan_image(scan, &opts.manifest_dir)?;
            for p in &patches {
                write_crop(&img, p, &opts.out_dir)?;
            }
        }
        Ok(patches)
    })?;
    let patches: Vec<PatchRecord> = per_scan.into_iter().flatten().collect();
    let counts = ClassCounts::of(&patches);
    let summary = TilingSummary {
        method: Method::Tiling,
        scans: manifest.scans.len() - failed.len(),
        patches: patches.len(),
        counts,
        positive_fraction: counts.positive_fraction(),
        failed,
    };
    let mut out = manifest.clone();
    out.replace_patches(Method::Tiling, patches);
    out.assign_patch_splits();
    Ok((out, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(half: f64) -> TilingConfig {
        TilingConfig {
            annotation_half_extent: half,
            ..TilingConfig::default()
        }
    }

    fn origins(tiles: &[BBox]) -> Vec<(f64, f64)> {
        tiles.iter().map(|t| (t.x0, t.y0)).collect()
    }

    #[test]
    fn square_image_four_tiles() {
        let tiles = tile_grid(448, 448, &cfg(18.0));
        assert_eq!(
            origins(&tiles),
            vec![(0.0, 0.0), (224.0, 0.0), (0.0, 224.0), (224.0, 224.0)]
        );
    }

    /// Every pixel covered and every tile full-size.
    fn check_cover(w: usize, h: usize, c: &TilingConfig, tiles: &[BBox]) {
        let mut hits = vec![0u32; w * h];
        for t in tiles {
            if w >= c.tile_w {
                assert_eq!(t.width() as usize + 1, c.tile_w);
            }
            if h >= c.tile_h {
                assert_eq!(t.height() as usize + 1, c.tile_h);
            }
            assert!(t.x0 >= 0.0 && t.y0 >= 0.0 && t.x1 < w as f64 && t.y1 < h as f64);
            for y in t.y0 as usize..=t.y1 as usize {
                for x in t.x0 as usize..=t.x1 as usize {
                    hits[y * w + x] += 1;
                }
            }
        }
        assert!(hits.iter().all(|&n| n >= 1));
    }

    #[test]
    fn ragged_width_anchors_last_column() {
        let c = cfg(18.0);
        let tiles = tile_grid(500, 448, &c);
        assert_eq!(tiles.len(), 6);
        assert_eq!(tiles[2].x0, 276.0);
        assert_eq!(tiles[1].x1 - tiles[2].x0 + 1.0, 172.0);
        check_cover(500, 448, &c, &tiles);
    }

    #[test]
    fn small_image_single_clamped_tile() {
        let tiles = tile_grid(200, 200, &cfg(18.0));
        assert_eq!(tiles, vec![BBox::new(0.0, 0.0, 199.0, 199.0).unwrap()]);
    }

    #[test]
    fn label_examples() {
        let c = cfg(18.0);
        let t = BBox::new(0.0, 0.0, 223.0, 223.0).unwrap();
        assert_eq!(tile_label(&t, &[Point::new(10.0, 10.0)], &c), Label::Present);
        assert_eq!(tile_label(&t, &[Point::new(300.0, 300.0)], &c), Label::Absent);
        let tiles = tile_grid(448, 224, &c);
        let labels = label_tiles("s", &tiles, &[Point::new(224.0, 100.0)], &cfg(5.0));
        assert!(labels.iter().all(|p| p.label == Label::Present));
        assert_eq!(labels[1].patch_id, "s_224_0");
    }

    #[test]
    fn no_osteophytes_all_absent() {
        let tiles = tile_grid(731, 877, &cfg(18.0));
        assert!(label_tiles("s", &tiles, &[], &cfg(18.0))
            .iter()
            .all(|p| p.label == Label::Absent));
    }

    /// Brute force: a tile is positive iff some integer pixel lies in both
    /// the tile and an annotation square.
    fn pixel_oracle(tile: &BBox, pts: &[(i64, i64)], half: i64) -> bool {
        pts.iter().any(|&(px, py)| {
            ((px - half)..=(px + half)).any(|x| {
                ((py - half)..=(py + half)).any(|y| {
                    x as f64 >= tile.x0 && x as f64 <= tile.x1 && y as f64 >= tile.y0 && y as f64 <= tile.y1
                })
            })
        })
    }

    #[test]
    fn labels_match_pixel_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let c = TilingConfig {
                tile_w: rng.random_range(16..80),
                tile_h: rng.random_range(16..80),
                annotation_half_extent: rng.random_range(1..12) as f64,
            };
            let (w, h) = (rng.random_range(10..260), rng.random_range(10..260));
            let pts: Vec<(i64, i64)> = (0..rng.random_range(0..6))
                .map(|_| (rng.random_range(0..w as i64), rng.random_range(0..h as i64)))
                .collect();
            let points: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x as f64, y as f64)).collect();
            let tiles = tile_grid(w, h, &c);
            check_cover(w, h, &c, &tiles);
            for p in label_tiles("s", &tiles, &points, &c) {
                let expect = pixel_oracle(&p.crop, &pts, c.annotation_half_extent as i64);
                assert_eq!(p.label.is_present(), expect);
            }
        }
    }

    proptest! {
        #[test]
        fn interior_tiles_disjoint(w in 1usize..1200, h in 1usize..1200, tw in 8usize..300, th in 8usize..300) {
            let c = TilingConfig { tile_w: tw, tile_h: th, annotation_half_extent: 18.0 };
            let tiles = tile_grid(w, h, &c);
            let last_x = tiles.iter().map(|t| t.x0).fold(0.0, f64::max);
            let last_y = tiles.iter().map(|t| t.y0).fold(0.0, f64::max);
            let interior: Vec<&BBox> = tiles.iter().filter(|t| t.x0 < last_x && t.y0 < last_y).collect();
            for (i, a) in interior.iter().enumerate() {
                for b in &interior[i + 1..] {
                    prop_assert!(!bbox_intersects(a, b));
                }
            }
        }

        #[test]
        fn growing_box_never_clears_label(
            x in 0.0f64..500.0, y in 0.0f64..500.0, h1 in 0.5f64..40.0, extra in 0.0f64..40.0,
        ) {
            let tiles = tile_grid(500, 500, &cfg(h1));
            let p = [Point::new(x, y)];
            for t in &tiles {
                if tile_label(t, &p, &cfg(h1)).is_present() {
                    prop_assert!(tile_label(t, &p, &cfg(h1 + extra)).is_present());
                }
            }
        }
    }
}
