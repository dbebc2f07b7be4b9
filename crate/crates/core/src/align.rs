//! Shoulder-anchored scale + translation alignment onto the working canvas.
//!
//! The two shoulder points are read from fixed cells of the pose's coordinate
//! map, then image and pose are resampled so those points land on fixed canvas
//! targets. Rotation is not estimated: a vertical offset between the shoulders
//! is absorbed by the midpoint.

use crate::atlas::{AtlasLayout, CoordinateMap};
use crate::error::{Error, Result};
use crate::iuv::IuvMap;
use crate::raster::{check_same, BitMask, RgbImage};
use crate::warp::i2uv_coords;

pub const CANVAS_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub canvas: usize,
    /// Canvas positions the left/right shoulders are mapped to.
    pub target_left: [f64; 2],
    pub target_right: [f64; 2],
    /// Atlas cells holding the shoulder positions. Only their offset inside a
    /// tile matters: they are read from the `torso_part` tile.
    pub anchor_left: (usize, usize),
    pub anchor_right: (usize, usize),
    pub torso_part: u8,
    /// Fallback search radius (atlas cells) when an anchor cell is empty.
    pub search_radius: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            canvas: CANVAS_SIZE,
            target_left: [112.0, 128.0],
            target_right: [143.0, 128.0],
            anchor_left: (63, 133),
            anchor_right: (92, 133),
            torso_part: 2,
            search_radius: 5,
        }
    }
}

impl AlignConfig {
    /// The two anchor cells placed in the torso tile of `layout`.
    pub fn anchor_cells(&self, layout: &AtlasLayout) -> [(usize, usize); 2] {
        let ts = layout.tile_size();
        [self.anchor_left, self.anchor_right]
            .map(|(ax, ay)| layout.tile_cell(self.torso_part, ax % ts, ay % ts))
    }

    fn target_separation(&self) -> f64 {
        dist(self.target_left, self.target_right)
    }

    fn target_midpoint(&self) -> [f64; 2] {
        midpoint(self.target_left, self.target_right)
    }
}

/// `p ↦ scale·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub translation: [f64; 2],
}

impl SimilarityTransform {
    pub const IDENTITY: Self = Self {
        scale: 1.0,
        translation: [0.0, 0.0],
    };

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.scale * p[0] + self.translation[0],
            self.scale * p[1] + self.translation[1],
        ]
    }

    #[inline]
    pub fn invert(&self, q: [f64; 2]) -> [f64; 2] {
        [
            (q[0] - self.translation[0]) / self.scale,
            (q[1] - self.translation[1]) / self.scale,
        ]
    }

    /// Transform sending the shoulder pair onto the configured targets.
    pub fn from_shoulders(left: [f64; 2], right: [f64; 2], cfg: &AlignConfig) -> Result<Self> {
        let separation = dist(left, right);
        if separation.is_nan() || separation <= 1.0 {
            return Err(Error::DegenerateTransform { separation });
        }
        let scale = cfg.target_separation() / separation;
        let mid = midpoint(left, right);
        let target = cfg.target_midpoint();
        Ok(Self {
            scale,
            translation: [target[0] - scale * mid[0], target[1] - scale * mid[1]],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSample {
    pub image: RgbImage,
    pub pose: IuvMap,
    /// Canvas pixels with no source coverage.
    pub invalid: BitMask,
    pub transform: SimilarityTransform,
}

/// Image-space positions of the left and right shoulder.
pub fn find_shoulders(pose: &IuvMap, layout: &AtlasLayout, cfg: &AlignConfig) -> Result<([f64; 2], [f64; 2])> {
    let coords = i2uv_coords(pose, layout);
    let [l, r] = cfg.anchor_cells(layout);
    let left = lookup_anchor(&coords, layout, l, cfg.search_radius)?;
    let right = lookup_anchor(&coords, layout, r, cfg.search_radius)?;
    Ok((left, right))
}

/// Value at `cell`, or the nearest valid cell of the same tile within
/// `radius`; ties go to the smaller (y, x).
fn lookup_anchor(coords: &CoordinateMap, layout: &AtlasLayout, cell: (usize, usize), radius: usize) -> Result<[f64; 2]> {
    let not_found = Error::ShoulderNotFound {
        x: cell.0,
        y: cell.1,
        radius,
    };
    let (part, lx, ly) = layout.locate(cell.0, cell.1).ok_or_else(|| Error::ShoulderNotFound {
        x: cell.0,
        y: cell.1,
        radius,
    })?;
    let ts = layout.tile_size() as i64;
    let r = radius as i64;
    let mut best: Option<(i64, usize, usize)> = None;
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = dx * dx + dy * dy;
            if d2 > r * r {
                continue;
            }
            let (nx, ny) = (lx as i64 + dx, ly as i64 + dy);
            if nx < 0 || ny < 0 || nx >= ts || ny >= ts {
                continue;
            }
            let (cx, cy) = layout.tile_cell(part, nx as usize, ny as usize);
            if coords.get(cx, cy).is_none() {
                continue;
            }
            let key = (d2, cy, cx);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    let (_, cy, cx) = best.ok_or(not_found)?;
    let [x, y] = coords.get(cx, cy).expect("checked valid");
    Ok([x as f64, y as f64])
}

/// Resamples `img` and `pose` onto the canvas so the detected shoulders sit on
/// the configured targets.
pub fn align(img: &RgbImage, pose: &IuvMap, layout: &AtlasLayout, cfg: &AlignConfig) -> Result<AlignedSample> {
    check_same(pose.width(), pose.height(), img.width(), img.height(), "image")?;
    let (left, right) = find_shoulders(pose, layout, cfg)?;
    let transform = SimilarityTransform::from_shoulders(left, right, cfg)?;
    Ok(warp_to_canvas(img, pose, &transform, cfg.canvas))
}

/// Applies `transform` to image (bilinear) and pose (nearest neighbor, UV
/// copied) on an `n`×`n` canvas.
pub fn warp_to_canvas(img: &RgbImage, pose: &IuvMap, transform: &SimilarityTransform, n: usize) -> AlignedSample {
    let (w, h) = (img.width(), img.height());
    let (max_x, max_y) = (w as f64 - 1.0, h as f64 - 1.0);
    let mut image = RgbImage::new(n, n);
    let mut out_pose = IuvMap::new(n, n);
    let mut invalid = BitMask::new(n, n);
    for qy in 0..n {
        for qx in 0..n {
            let [px, py] = transform.invert([qx as f64, qy as f64]);
            if !(px >= 0.0 && py >= 0.0 && px <= max_x && py <= max_y) {
                invalid.set(qx, qy, true);
                continue;
            }
            image.set(qx, qy, bilinear_f64(img, px, py));
            let (sx, sy) = (
                (px.round() as usize).min(w - 1),
                (py.round() as usize).min(h - 1),
            );
            let part = pose.part(sx, sy);
            if part > 0 {
                out_pose
                    .set(qx, qy, part, pose.uv(sx, sy))
                    .expect("labels and UV come from a valid map");
            }
        }
    }
    AlignedSample {
        image,
        pose: out_pose,
        invalid,
        transform: *transform,
    }
}

fn bilinear_f64(img: &RgbImage, x: f64, y: f64) -> [f32; 3] {
    let (w, h) = (img.width(), img.height());
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (fx, fy) = ((x - x0 as f64) as f32, (y - y0 as f64) as f32);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (p00, p10) = (img.get(x0, y0), img.get(x1, y0));
    let (p01, p11) = (img.get(x0, y1), img.get(x1, y1));
    std::array::from_fn(|c| {
        let top = p00[c] + fx * (p10[c] - p00[c]);
        let bottom = p01[c] + fx * (p11[c] - p01[c]);
        top + fy * (bottom - top)
    })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}
