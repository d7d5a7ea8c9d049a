//! Synthetic lateral spine films with known ground truth.
//!
//! Each scan is a chain of bright quadrilateral vertebra bodies along a gently
//! curved axis over a dark, noisy background. Osteophytes are small bright
//! spurs grown from body corners; they always end outside every body, so a
//! raw body contour never contains them. Every scan draws from its own
//! random stream, so output does not depend on thread count.

mod font;
mod stats;

pub use stats::{corpus_stats, CorpusStats, CountSummary, RegionStats};

use crate::annotations::{
    write_manifest, DatasetManifest, OsteophytePoint, Region, ScanRecord, VertebraAnnotation,
};
use crate::geometry::{expand_contour, point_in_polygon, Point, Polygon};
use crate::pipeline::{for_each_scan, PipelineError};
use crate::raster::{fill_polygon, save_image, save_mask, trace_mask_contour, BinaryMask, GrayImage};
use crate::segpatch::{PerRegion, SegPatchConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageSizes {
    pub cervical: (usize, usize),
    pub lumbar: (usize, usize),
}

impl ImageSizes {
    pub fn get(&self, r: Region) -> (usize, usize) {
        match r {
            Region::Cervical => self.cervical,
            Region::Lumbar => self.lumbar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_scans: usize,
    /// Fraction of scans that are cervical.
    pub region_mix: f64,
    pub image_size: ImageSizes,
    /// Inclusive range.
    pub vertebrae_per_scan: (usize, usize),
    /// Largest tilt of the spine axis from vertical, degrees.
    pub curvature: f64,
    /// Mean probability that a given vertebra corner carries an osteophyte.
    pub osteophyte_rate: f64,
    pub bump_radius: f64,
    pub noise_sigma: f64,
    pub artifact_text_rate: f64,
    /// Gamma shape of the per-scan severity multiplier (mean 1). Zero gives
    /// every scan the base rate.
    pub severity_shape: f64,
    /// Decay length, in vertebrae, of osteophyte risk around a per-scan
    /// degenerative focus. Zero spreads risk evenly.
    pub focal_decay: f64,
    /// Share of expected osteophytes on the left (−X) corners.
    pub left_share: f64,
    /// Spurs are only grown where this −X / +Y sweep of some body contour
    /// reaches the tip.
    pub reach_dx: PerRegion,
    pub reach_dy: PerRegion,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let seg = SegPatchConfig::default();
        Self {
            seed: 0,
            n_scans: 40,
            region_mix: 0.5,
            image_size: ImageSizes {
                cervical: (731, 877),
                lumbar: (1024, 1243),
            },
            vertebrae_per_scan: (5, 7),
            curvature: 25.0,
            osteophyte_rate: 0.15,
            bump_radius: 8.0,
            noise_sigma: 6.0,
            artifact_text_rate: 0.1,
            severity_shape: 2.0,
            focal_decay: 1.0,
            left_share: 0.65,
            reach_dx: seg.dx_minus_x,
            reach_dy: seg.dy_plus_y,
        }
    }
}

impl SynthConfig {
    /// Corners are independent Bernoulli draws at `osteophyte_rate`.
    pub fn independent(mut self) -> Self {
        self.severity_shape = 0.0;
        self.focal_decay = 0.0;
        self.left_share = 0.5;
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        for (name, p) in [
            ("region_mix", self.region_mix),
            ("osteophyte_rate", self.osteophyte_rate),
            ("artifact_text_rate", self.artifact_text_rate),
            ("left_share", self.left_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        for (name, v) in [
            ("curvature", self.curvature),
            ("bump_radius", self.bump_radius),
            ("noise_sigma", self.noise_sigma),
            ("severity_shape", self.severity_shape),
            ("focal_decay", self.focal_decay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.curvature >= 60.0 {
            return bad(format!("curvature must be below 60 degrees, got {}", self.curvature));
        }
        let (lo, hi) = self.vertebrae_per_scan;
        if lo == 0 || lo > hi {
            return bad(format!("vertebrae_per_scan range {lo}..={hi} is empty or starts at 0"));
        }
        for r in Region::ALL {
            let (w, h) = self.image_size.get(r);
            let a = anatomy(r);
            let need = hi as f64 * (a.height.1 + a.gap.1) * 1.15 + 80.0;
            if w < 3 * a.width.1 as usize || (h as f64) < need {
                return bad(format!(
                    "{r} image {w}×{h} is too small for {hi} vertebrae (need about {}×{need:.0})",
                    3 * a.width.1 as usize
                ));
            }
        }
        Ok(())
    }

    fn region_of(&self, index: usize) -> Region {
        // Bresenham-style interleaving keeps the mix exact and spread out.
        let before = (index as f64 * self.region_mix).floor();
        let after = ((index + 1) as f64 * self.region_mix).floor();
        if after > before {
            Region::Cervical
        } else {
            Region::Lumbar
        }
    }
}

/// Body size ranges at half film resolution, in pixels.
struct Anatomy {
    width: (f64, f64),
    height: (f64, f64),
    gap: (f64, f64),
}

fn anatomy(region: Region) -> Anatomy {
    match region {
        Region::Cervical => Anatomy {
            width: (52.0, 64.0),
            height: (42.0, 52.0),
            gap: (15.0, 20.0),
        },
        Region::Lumbar => Anatomy {
            width: (118.0, 142.0),
            height: (72.0, 88.0),
            gap: (24.0, 30.0),
        },
    }
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn round_point(p: Point) -> Point {
    Point::new(round3(p.x), round3(p.y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    const ALL: [Corner; 4] = [
        Corner::TopLeft,
        Corner::TopRight,
        Corner::BottomLeft,
        Corner::BottomRight,
    ];

    fn is_left(self) -> bool {
        matches!(self, Corner::TopLeft | Corner::BottomLeft)
    }
}

#[derive(Debug, Clone)]
struct Body {
    center: Point,
    /// Unit vectors across and along the spine.
    ex: (f64, f64),
    ey: (f64, f64),
    w: f64,
    h: f64,
}

impl Body {
    fn at(&self, sx: f64, sy: f64) -> Point {
        Point::new(
            self.center.x + self.ex.0 * sx * self.w / 2.0 + self.ey.0 * sy * self.h / 2.0,
            self.center.y + self.ex.1 * sx * self.w / 2.0 + self.ey.1 * sy * self.h / 2.0,
        )
    }

    fn corner(&self, c: Corner) -> Point {
        round_point(match c {
            Corner::TopLeft => self.at(-1.0, -1.0),
            Corner::TopRight => self.at(1.0, -1.0),
            Corner::BottomLeft => self.at(-1.0, 1.0),
            Corner::BottomRight => self.at(1.0, 1.0),
        })
    }

    /// Four corners then the top and bottom edge midpoints.
    fn six_points(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = Corner::ALL.iter().map(|&c| self.corner(c)).collect();
        pts.push(round_point(self.at(0.0, -1.0)));
        pts.push(round_point(self.at(0.0, 1.0)));
        pts
    }

    fn polygon(&self) -> Polygon {
        Polygon::new(vec![
            self.corner(Corner::TopLeft),
            self.corner(Corner::TopRight),
            self.corner(Corner::BottomRight),
            self.corner(Corner::BottomLeft),
        ])
        .expect("finite corners")
    }
}

/// One rendered scan before it is written out.
#[derive(Debug, Clone)]
pub struct SynthScan {
    pub record: ScanRecord,
    pub image: GrayImage,
    pub masks: Vec<BinaryMask>,
    /// Corners that drew an osteophyte but offered no admissible spur direction.
    pub skipped_sites: usize,
}

fn scan_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Lays out the vertebra chain. Retries with a flatter curve when bodies
/// come too close or the chain will not fit.
fn layout(cfg: &SynthConfig, region: Region, (iw, ih): (usize, usize), rng: &mut ChaCha8Rng) -> Vec<Body> {
    let a = anatomy(region);
    let (lo, hi) = cfg.vertebrae_per_scan;
    let n = rng.random_range(lo..=hi);
    let base_w = rng.random_range(a.width.0..=a.width.1);
    let base_h = rng.random_range(a.height.0..=a.height.1);
    let sizes: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let grow = 1.0 + 0.02 * k as f64;
            (
                base_w * grow * rng.random_range(0.95..=1.05),
                base_h * grow * rng.random_range(0.95..=1.05),
            )
        })
        .collect();
    let gaps: Vec<f64> = (0..n).map(|_| rng.random_range(a.gap.0..=a.gap.1)).collect();
    let mut amp = rng.random_range(0.0..=cfg.curvature);
    let phase = rng.random_range(0.0..2.0 * PI);
    let freq = rng.random_range(0.25..=0.5);
    let cx = iw as f64 * rng.random_range(0.45..=0.55);
    let top_frac: f64 = rng.random_range(0.0..=1.0);

    loop {
        let tilt: Vec<f64> = (0..n)
            .map(|k| (amp * (phase + freq * k as f64).sin()).to_radians())
            .collect();
        let mut bodies: Vec<Body> = Vec::with_capacity(n);
        let mut c = Point::new(0.0, 0.0);
        for k in 0..n {
            if k > 0 {
                let t = (tilt[k - 1] + tilt[k]) / 2.0;
                let step = sizes[k - 1].1 / 2.0 + gaps[k] + sizes[k].1 / 2.0;
                c = Point::new(c.x - step * t.sin(), c.y + step * t.cos());
            }
            let t = tilt[k];
            bodies.push(Body {
                center: c,
                ex: (t.cos(), t.sin()),
                ey: (-t.sin(), t.cos()),
                w: sizes[k].0,
                h: sizes[k].1,
            });
        }
        let corners: Vec<Point> = bodies
            .iter()
            .flat_map(|b| [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)].map(|(sx, sy)| b.at(sx, sy)))
            .collect();
        let x0 = corners.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let x1 = corners.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let y0 = corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let y1 = corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let margin = 40.0;
        let fits_w = x1 - x0 + 2.0 * margin <= iw as f64;
        let fits_h = y1 - y0 + 2.0 * margin <= ih as f64;
        let separated = bodies.windows(2).all(|p| bodies_apart(&p[0], &p[1], 6.0));
        if fits_w && fits_h && separated {
            let shift_x = (cx - (x0 + x1) / 2.0)
                .clamp(margin - x0, iw as f64 - margin - x1);
            let free = ih as f64 - 2.0 * margin - (y1 - y0);
            let shift_y = margin + free * (0.2 + 0.6 * top_frac) - y0;
            for b in &mut bodies {
                b.center = Point::new(b.center.x + shift_x, b.center.y + shift_y);
            }
            return bodies;
        }
        amp *= 0.5;
        if amp < 0.5 {
            amp = 0.0;
        }
    }
}

fn bodies_apart(a: &Body, b: &Body, min_gap: f64) -> bool {
    let (pa, pb) = (a.polygon(), b.polygon());
    let check = |p: &Polygon, q: &Polygon| {
        p.vertices().iter().all(|v| {
            !point_in_polygon(v, q).expect("quad") && q.boundary_distance(v) >= min_gap
        })
    };
    check(&pa, &pb) && check(&pb, &pa)
}

/// Relative osteophyte risk per vertebra, mean 1.
fn level_weights(n: usize, decay: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let focus = rng.random_range(0.0..=(n - 1) as f64);
    if decay <= 0.0 {
        return vec![1.0; n];
    }
    let raw: Vec<f64> = (0..n).map(|k| (-(k as f64 - focus).abs() / decay).exp()).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    raw.into_iter().map(|w| w / mean).collect()
}

const SPUR_DIRECTIONS: usize = 24;
/// Osteophytes are dense bone and render brighter than the body.
const SPUR_LEVEL: f64 = 250.0;
/// Spur disc radius as a fraction of `bump_radius`.
const SPUR_THICKNESS: f64 = 0.75;
/// Width of the soft margin where a body fades into the background.
const EDGE_RAMP: f64 = 4.0;

/// Tip of an admissible spur from `corner`, or `None`. A tip is admissible
/// when it clears every body by 2 px, sits inside the image, and lies (with
/// a 1 px margin) inside the reach sweep of its own or a neighbouring body.
fn spur_tip(
    corner: Point,
    radius: f64,
    bodies: &[Polygon],
    reach: &[&Polygon],
    (iw, ih): (usize, usize),
    rng: &mut ChaCha8Rng,
) -> Option<Point> {
    let admissible: Vec<Point> = (0..SPUR_DIRECTIONS)
        .filter_map(|i| {
            let t = 2.0 * PI * i as f64 / SPUR_DIRECTIONS as f64;
            let tip = round_point(Point::new(corner.x + radius * t.cos(), corner.y + radius * t.sin()));
            let inside_image = tip.x >= 2.0
                && tip.y >= 2.0
                && tip.x <= iw as f64 - 3.0
                && tip.y <= ih as f64 - 3.0;
            let clear = bodies.iter().all(|b| {
                !point_in_polygon(&tip, b).expect("quad") && b.boundary_distance(&tip) >= 2.0
            });
            let probes = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
            let reached = reach.iter().any(|env| {
                probes
                    .iter()
                    .all(|&(dx, dy)| point_in_polygon(&tip.translate(dx, dy), env).unwrap_or(false))
            });
            (inside_image && clear && reached).then_some(tip)
        })
        .collect();
    if admissible.is_empty() {
        None
    } else {
        Some(admissible[rng.random_range(0..admissible.len())])
    }
}

fn dist_to_segment(p: &Point, a: &Point, b: &Point) -> f64 {
    let (vx, vy) = (b.x - a.x, b.y - a.y);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0)
    };
    p.distance(&Point::new(a.x + t * vx, a.y + t * vy))
}

/// Renders scan `index` of the corpus. Pure in `(cfg, index)`.
pub fn render_scan(cfg: &SynthConfig, index: usize) -> Result<SynthScan, PipelineError> {
    let mut rng = scan_rng(cfg.seed, index);
    let region = cfg.region_of(index);
    let (iw, ih) = cfg.image_size.get(region);
    let bodies = layout(cfg, region, (iw, ih), &mut rng);
    let polys: Vec<Polygon> = bodies.iter().map(Body::polygon).collect();
    let masks: Vec<BinaryMask> = polys.iter().map(|p| fill_polygon(p, iw, ih)).collect();
    let (dx, dy) = (cfg.reach_dx.get(region), cfg.reach_dy.get(region));
    let envelopes: Vec<Polygon> = masks
        .iter()
        .map(|m| {
            let traced = trace_mask_contour(m)?;
            Ok(expand_contour(&traced, dx, dy)?)
        })
        .collect::<Result<_, PipelineError>>()?;

    // osteophyte sites
    let severity = if cfg.severity_shape > 0.0 {
        Gamma::new(cfg.severity_shape, 1.0 / cfg.severity_shape)
            .expect("validated shape")
            .sample(&mut rng)
    } else {
        1.0
    };
    let levels = level_weights(bodies.len(), cfg.focal_decay, &mut rng);
    let mut spurs: Vec<(Point, Point, usize)> = Vec::new();
    let mut skipped = 0;
    for (k, body) in bodies.iter().enumerate() {
        for corner in Corner::ALL {
            let side = if corner.is_left() {
                2.0 * cfg.left_share
            } else {
                2.0 * (1.0 - cfg.left_share)
            };
            let p = (cfg.osteophyte_rate * severity * levels[k] * side).min(1.0);
            if !rng.random_bool(p) {
                continue;
            }
            let reach: Vec<&Polygon> = (k.saturating_sub(1)..=(k + 1).min(bodies.len() - 1))
                .map(|j| &envelopes[j])
                .collect();
            let base = body.corner(corner);
            match spur_tip(base, cfg.bump_radius, &polys, &reach, (iw, ih), &mut rng) {
                Some(tip) => spurs.push((base, tip, k)),
                None => skipped += 1,
            }
        }
    }

    // intensities
    let tissue = rng.random_range(30.0..=45.0);
    let body_level = rng.random_range(135.0..=160.0);
    let spine_x = bodies.iter().map(|b| b.center.x).sum::<f64>() / bodies.len() as f64;
    let soft = 0.45 * iw as f64;
    let mut canvas: Vec<f64> = (0..ih)
        .flat_map(|y| {
            (0..iw).map(move |x| {
                let d = (x as f64 - spine_x) / soft;
                tissue + 10.0 * y as f64 / ih as f64 + 35.0 * (-d * d).exp()
            })
        })
        .collect();
    for (poly, body) in polys.iter().zip(&bodies) {
        let b = crate::geometry::bbox_of(poly);
        let phase = body.center.x * 0.13;
        for y in b.y0.floor().max(0.0) as usize..=(b.y1.ceil() as usize).min(ih - 1) {
            for x in b.x0.floor().max(0.0) as usize..=(b.x1.ceil() as usize).min(iw - 1) {
                let p = Point::new(x as f64, y as f64);
                if !point_in_polygon(&p, poly).expect("quad") {
                    continue;
                }
                let edge = poly.boundary_distance(&p);
                let texture = 6.0 * ((x as f64 * 0.35 + phase).sin() * (y as f64 * 0.29).sin());
                let target = body_level + texture;
                let v = &mut canvas[y * iw + x];
                *v = if edge < EDGE_RAMP {
                    // soft cortical margin: smoothstep from the background
                    let t = edge / EDGE_RAMP;
                    *v + (target - *v) * t * t * (3.0 - 2.0 * t)
                } else {
                    target
                };
            }
        }
    }
    let thickness = cfg.bump_radius * SPUR_THICKNESS;
    for (base, tip, _) in &spurs {
        // capsule from the corner whose far end reaches exactly the tip
        let len = base.distance(tip);
        let scale = if len > 0.0 { (len - thickness).max(0.0) / len } else { 0.0 };
        let end = Point::new(base.x + (tip.x - base.x) * scale, base.y + (tip.y - base.y) * scale);
        let reach = thickness.ceil() as i64 + 1;
        let (xa, xb) = (base.x.min(end.x).floor() as i64 - reach, base.x.max(end.x).ceil() as i64 + reach);
        let (ya, yb) = (base.y.min(end.y).floor() as i64 - reach, base.y.max(end.y).ceil() as i64 + reach);
        for y in ya.max(0)..=yb.min(ih as i64 - 1) {
            for x in xa.max(0)..=xb.min(iw as i64 - 1) {
                let p = Point::new(x as f64, y as f64);
                if dist_to_segment(&p, base, &end) <= thickness {
                    let v = &mut canvas[y as usize * iw + x as usize];
                    *v = v.max(SPUR_LEVEL);
                }
            }
        }
    }
    if rng.random_bool(cfg.artifact_text_rate) {
        let scale = 3;
        let text = if rng.random_bool(0.5) {
            format!("ID {:04}", rng.random_range(0..10_000))
        } else if rng.random_bool(0.5) {
            "R".to_string()
        } else {
            "L".to_string()
        };
        let w = font::text_width(&text, scale);
        let h = font::GLYPH_H * scale;
        let x0 = if rng.random_bool(0.5) { 16 } else { iw.saturating_sub(w + 16) };
        let y0 = if rng.random_bool(0.5) { 16 } else { ih.saturating_sub(h + 16) };
        font::draw_text(&text, x0, y0, scale, |x, y| {
            if x < iw && y < ih {
                canvas[y * iw + x] = 245.0;
            }
        });
    }
    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let data: Vec<u8> = canvas
        .into_iter()
        .map(|v| {
            let n = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            (v + n).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    let image = GrayImage::new(iw, ih, data)?;

    let scan_id = format!("scan_{index:04}");
    let vertebrae: Vec<VertebraAnnotation> = bodies
        .iter()
        .enumerate()
        .map(|(k, b)| VertebraAnnotation {
            vertebra_id: format!("v{k}"),
            points: b.six_points(),
            region,
        })
        .collect();
    let osteophytes = spurs
        .iter()
        .map(|(_, tip, k)| OsteophytePoint {
            location: *tip,
            vertebra_id: Some(format!("v{k}")),
        })
        .collect();
    let mask_paths: BTreeMap<String, std::path::PathBuf> = vertebrae
        .iter()
        .map(|v| {
            (
                v.vertebra_id.clone(),
                format!("masks/{scan_id}_{}.png", v.vertebra_id).into(),
            )
        })
        .collect();
    let record = ScanRecord {
        image_path: format!("images/{scan_id}.pgm").into(),
        scan_id,
        region,
        width: iw,
        height: ih,
        vertebrae,
        osteophytes,
        mask_paths: Some(mask_paths),
    };
    Ok(SynthScan {
        record,
        image,
        masks,
        skipped_sites: skipped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthSummary {
    pub scans: usize,
    pub vertebrae: usize,
    pub osteophytes: usize,
    pub skipped_sites: usize,
    pub manifest: String,
}

/// Renders the corpus into `out_dir` (images, masks, `manifest.json`).
pub fn generate(
    cfg: &SynthConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<(DatasetManifest, SynthSummary), PipelineError> {
    cfg.validate()?;
    let indices: Vec<ScanRecord> = (0..cfg.n_scans)
        .map(|i| ScanRecord {
            scan_id: i.to_string(),
            image_path: Default::default(),
            region: Region::Cervical,
            width: 1,
            height: 1,
            vertebrae: vec![],
            osteophytes: vec![],
            mask_paths: None,
        })
        .collect();
    let (scans, failed) = for_each_scan(&indices, jobs, |slot| {
        let index: usize = slot.scan_id.parse().expect("numeric slot");
        let s = render_scan(cfg, index)?;
        save_image(&s.image, out_dir.join(&s.record.image_path))?;
        let masks = s.record.mask_paths.as_ref().expect("synthetic scans carry masks");
        for (v, m) in s.record.vertebrae.iter().zip(&s.masks) {
            save_mask(m, out_dir.join(&masks[&v.vertebra_id]))?;
        }
        Ok((s.record, s.skipped_sites))
    })?;
    if let Some(f) = failed.into_iter().next() {
        return Err(if f.io {
            PipelineError::Image(crate::raster::ImageError::Io {
                path: out_dir.to_path_buf(),
                source: std::io::Error::other(f.message),
            })
        } else {
            PipelineError::Config(f.message)
        });
    }
    let skipped_sites = scans.iter().map(|(_, s)| s).sum();
    let manifest = DatasetManifest::new(scans.into_iter().map(|(r, _)| r).collect());
    let path = out_dir.join("manifest.json");
    write_manifest(&manifest, &path)?;
    let summary = SynthSummary {
        scans: manifest.scans.len(),
        vertebrae: manifest.scans.iter().map(|s| s.vertebrae.len()).sum(),
        osteophytes: manifest.scans.iter().map(|s| s.osteophytes.len()).sum(),
        skipped_sites,
        manifest: path.display().to_string(),
    };
    Ok((manifest, summary))
}
