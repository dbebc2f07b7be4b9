//! Procedural upright bodies (torso, head, two-segment arms) rendered as IUV
//! maps and textured images. Used for fixtures, demos and tests; the shapes
//! are crude but carry consistent part labels and surface coordinates.

use std::f64::consts::PI;

use rand::Rng;

use crate::iuv::IuvMap;
use crate::raster::RgbImage;

pub const TORSO: u8 = 2;
pub const HEAD_RIGHT: u8 = 23;
pub const HEAD_LEFT: u8 = 24;
/// (upper, lower) arm parts for the arm on the image's left and right side.
pub const ARM_IMAGE_LEFT: (u8, u8) = (15, 19);
pub const ARM_IMAGE_RIGHT: (u8, u8) = (16, 20);

/// Angles in radians: 0 hangs straight down, positive swings away from the
/// torso, π points straight up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub center_x: f64,
    /// Top edge of the torso.
    pub top: f64,
    pub torso_width: f64,
    pub torso_height: f64,
    pub head_radius: f64,
    pub limb_width: f64,
    pub upper_len: f64,
    pub lower_len: f64,
    pub left: Arm,
    pub right: Arm,
}

/// Torso surface coordinates of the two shoulder anchors under the default
/// layout: in-tile offsets (12, 31) and (41, 31) of a 51-cell tile.
pub const ANCHOR_UV: [[f64; 2]; 2] = [[12.0 / 50.0, 31.0 / 50.0], [41.0 / 50.0, 31.0 / 50.0]];

impl Body {
    /// Neutral-looking body whose shoulder anchors sit at `left`/`right`
    /// (horizontal pair).
    pub fn with_shoulders(left: [f64; 2], right: [f64; 2]) -> Self {
        let width = (right[0] - left[0]) / (ANCHOR_UV[1][0] - ANCHOR_UV[0][0]);
        let height = width * 1.5;
        let x0 = left[0] - ANCHOR_UV[0][0] * width;
        Self {
            center_x: x0 + width / 2.0,
            top: left[1] - ANCHOR_UV[0][1] * height,
            torso_width: width,
            torso_height: height,
            head_radius: width * 0.35,
            limb_width: width * 0.22,
            upper_len: height * 0.5,
            lower_len: height * 0.45,
            left: Arm { upper: 0.2, lower: 0.0 },
            right: Arm { upper: 0.2, lower: 0.0 },
        }
    }

    /// Image positions of the two shoulder anchors.
    pub fn shoulders(&self) -> [[f64; 2]; 2] {
        let x0 = self.center_x - self.torso_width / 2.0;
        ANCHOR_UV.map(|[u, v]| [x0 + u * self.torso_width, self.top + v * self.torso_height])
    }

    /// Random neutral pose: arms mostly down.
    pub fn random_neutral<R: Rng>(rng: &mut R, shoulders: ([f64; 2], [f64; 2])) -> Self {
        let mut b = Self::with_shoulders(shoulders.0, shoulders.1);
        b.torso_height *= rng.gen_range(0.9..1.15);
        b.top = shoulders.0[1] - ANCHOR_UV[0][1] * b.torso_height;
        b.left = Arm {
            upper: rng.gen_range(0.02..0.45),
            lower: rng.gen_range(-0.3..0.3),
        };
        b.right = Arm {
            upper: rng.gen_range(0.02..0.45),
            lower: rng.gen_range(-0.3..0.3),
        };
        b
    }

    /// Random selfie pose: one arm raised and bent toward the head.
    pub fn random_selfie<R: Rng>(rng: &mut R, shoulders: ([f64; 2], [f64; 2])) -> Self {
        let mut b = Self::random_neutral(rng, shoulders);
        let raised = Arm {
            upper: rng.gen_range(1.6..2.6),
            lower: rng.gen_range(2.6..3.6),
        };
        if rng.gen_bool(0.5) {
            b.left = raised;
        } else {
            b.right = raised;
        }
        b
    }

    pub fn render(&self, width: usize, height: usize) -> (IuvMap, RgbImage) {
        let mut pose = IuvMap::new(width, height);
        let x0 = self.center_x - self.torso_width / 2.0;
        let head_c = [self.center_x, self.top - self.head_radius * 0.85];
        let attach_y = self.top + 0.12 * self.torso_height;
        let arms = [
            (self.left, ARM_IMAGE_LEFT, [x0, attach_y], -1.0),
            (self.right, ARM_IMAGE_RIGHT, [x0 + self.torso_width, attach_y], 1.0),
        ];
        for y in 0..height {
            for x in 0..width {
                let p = [x as f64, y as f64];
                let mut hit: Option<(u8, [f64; 2])> = None;
                let (u, v) = ((p[0] - x0) / self.torso_width, (p[1] - self.top) / self.torso_height);
                if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&v) {
                    hit = Some((TORSO, [u, v]));
                }
                let (dx, dy) = (p[0] - head_c[0], p[1] - head_c[1]);
                if dx * dx + dy * dy <= self.head_radius * self.head_radius {
                    let r2 = 2.0 * self.head_radius;
                    let v = (dy + self.head_radius) / r2;
                    hit = Some(if dx < 0.0 {
                        (HEAD_LEFT, [(dx + self.head_radius) / self.head_radius, v])
                    } else {
                        (HEAD_RIGHT, [dx / self.head_radius, v])
                    });
                }
                for &(arm, (upper, lower), shoulder, side) in &arms {
                    let elbow = limb_end(shoulder, arm.upper, self.upper_len, side);
                    if let Some(uv) = limb_uv(p, shoulder, elbow, self.limb_width, side) {
                        hit = Some((upper, uv));
                    }
                    let wrist = limb_end(elbow, arm.lower, self.lower_len, side);
                    if let Some(uv) = limb_uv(p, elbow, wrist, self.limb_width, side) {
                        hit = Some((lower, uv));
                    }
                }
                if let Some((part, [u, v])) = hit {
                    let uv = [u.clamp(0.0, 1.0) as f32, v.clamp(0.0, 1.0) as f32];
                    pose.set(x, y, part, uv).expect("labels and UV in range");
                }
            }
        }
        let image = RgbImage::from_fn(width, height, |x, y| {
            let part = pose.part(x, y);
            if part == 0 {
                background(x, y, width, height)
            } else {
                let [u, v] = pose.uv(x, y);
                texture(part, u, v)
            }
        });
        (pose, image)
    }
}

/// Random upright body in a randomly sized frame, shoulders horizontal and
/// on integer pixels.
pub fn random_sample<R: Rng>(rng: &mut R, selfie: bool) -> (IuvMap, RgbImage) {
    let width = rng.gen_range(192..=320usize);
    let height = rng.gen_range(224..=320usize);
    let sep = rng.gen_range(24..=48) as f64;
    let lx = rng.gen_range(0.3..0.5) * width as f64 - sep / 2.0;
    let y = rng.gen_range(0.35..0.55) * height as f64;
    let left = [lx.round(), y.round()];
    let right = [left[0] + sep, left[1]];
    let body = if selfie {
        Body::random_selfie(rng, (left, right))
    } else {
        Body::random_neutral(rng, (left, right))
    };
    body.render(width, height)
}

fn limb_end(from: [f64; 2], angle: f64, len: f64, side: f64) -> [f64; 2] {
    [from[0] + side * angle.sin() * len, from[1] + angle.cos() * len]
}

/// (across, along) coordinates of `p` on a capsule-free limb rectangle.
fn limb_uv(p: [f64; 2], a: [f64; 2], b: [f64; 2], width: f64, side: f64) -> Option<[f64; 2]> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    if len < 1e-9 {
        return None;
    }
    let t = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / (len * len);
    let across = side * ((p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0]) / len;
    if !(0.0..=1.0).contains(&t) || across.abs() > width / 2.0 {
        return None;
    }
    Some([across / width + 0.5, t])
}

fn texture(part: u8, u: f32, v: f32) -> [f32; 3] {
    let stripes = 0.5 + 0.5 * ((v * 12.0 * PI as f32).sin());
    [
        0.25 + 0.5 * u,
        0.2 + 0.4 * v + 0.2 * stripes,
        (part as f32 / 24.0) * 0.8 + 0.1,
    ]
}

fn background(x: usize, y: usize, w: usize, h: usize) -> [f32; 3] {
    let (fx, fy) = (x as f32 / w.max(1) as f32, y as f32 / h.max(1) as f32);
    let checks = if (x / 16 + y / 16).is_multiple_of(2) { 0.08 } else { 0.0 };
    [0.55 + 0.3 * fx - checks, 0.6 - 0.2 * fy, 0.7 - 0.3 * fx * fy + checks]
}
