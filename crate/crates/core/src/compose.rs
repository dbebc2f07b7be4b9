//! Compositing: body and hole masks, head-preserving background, diffusion
//! hole fill, alpha blending with the alignment mask, and the composition
//! losses.

use crate::error::{Error, Result};
use crate::inpaint::{diffuse_tile, LossConfig};
use crate::iuv::IuvMap;
use crate::raster::{check_same, disk_offsets, BitMask, RgbImage, ScalarImage};

pub const DEFAULT_MATTE_THRESHOLD: f32 = 0.1;
pub const DEFAULT_BODY_DILATION: usize = 3;
pub const DEFAULT_HEAD_DILATION: usize = 5;
pub const DEFAULT_FEATHER: usize = 2;
pub const DEFAULT_HEAD_PARTS: [u8; 2] = [23, 24];

/// Body region from a matte (`value > threshold`) or, without one, from the
/// pose foreground dilated by `dilation` pixels. Exactly one source must be given.
pub fn body_mask(pose: Option<&IuvMap>, matte: Option<&ScalarImage>, threshold: f32, dilation: usize) -> Result<BitMask> {
    match (pose, matte) {
        (None, Some(m)) => {
            let bits = m.values().iter().map(|&v| v > threshold).collect();
            BitMask::from_vec(m.width(), m.height(), bits)
        }
        (Some(p), None) => Ok(p.foreground().dilate_disk(dilation)),
        _ => Err(Error::MaskSource),
    }
}

/// Head parts grown by a disk of `radius` plus the same disk shifted `radius`
/// pixels down, so the mask reaches `radius` above the head and `2·radius`
/// below it to take in the neck.
pub fn head_mask(pose: &IuvMap, head_parts: &[u8], radius: usize) -> BitMask {
    let r = radius as i32;
    let mut offsets = disk_offsets(radius);
    offsets.extend(disk_offsets(radius).into_iter().map(|(dx, dy)| (dx, dy + r)));
    offsets.sort_unstable();
    offsets.dedup();
    pose.mask_where(|p| head_parts.contains(&p)).dilate_with(&offsets)
}

/// `H = H_selfie ∪ H_neutral`.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleSpec {
    pub h_selfie: BitMask,
    pub h_neutral: BitMask,
    pub h: BitMask,
    pub threshold: f32,
}

impl HoleSpec {
    pub fn new(h_selfie: BitMask, h_neutral: BitMask, threshold: f32) -> Result<Self> {
        let h = h_selfie.union(&h_neutral)?;
        Ok(Self {
            h_selfie,
            h_neutral,
            h,
            threshold,
        })
    }

    /// Hole mask at another resolution, nearest-neighbor scaled.
    pub fn resized(&self, width: usize, height: usize) -> BitMask {
        self.h.resize_nearest(width, height)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    /// Input with hole pixels zeroed.
    pub image: RgbImage,
    pub holes: BitMask,
}

/// Cuts `holes \ head` out of `input`; head pixels are always kept.
pub fn make_background(input: &RgbImage, holes: &BitMask, head: &BitMask) -> Result<Background> {
    check_same(input.width(), input.height(), holes.width(), holes.height(), "hole mask")?;
    let holes = holes.difference(head)?;
    let image = input.masked(&holes.complement())?;
    Ok(Background { image, holes })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillConfig {
    pub tolerance: f64,
    /// Iteration cap as a multiple of max(W, H).
    pub max_iter_factor: usize,
}

impl Default for FillConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iter_factor: 4,
        }
    }
}

/// Diffuses the non-hole colors into the holes.
pub fn fill_background(bg: &Background, cfg: &FillConfig) -> Result<RgbImage> {
    let (w, h) = (bg.image.width(), bg.image.height());
    check_same(w, h, bg.holes.width(), bg.holes.height(), "hole mask")?;
    if bg.holes.count() == w * h {
        return Err(Error::AllHole);
    }
    if bg.holes.is_empty() {
        return Ok(bg.image.clone());
    }
    let cells: Vec<Option<[f32; 3]>> = bg
        .image
        .pixels()
        .iter()
        .zip(bg.holes.bits())
        .map(|(&p, &hole)| (!hole).then_some(p))
        .collect();
    let filled = diffuse_tile(&cells, w, h, cfg.tolerance, cfg.max_iter_factor * w.max(h));
    let data = filled
        .into_iter()
        .map(|c| c.expect("connected grid with a known pixel fills completely"))
        .collect();
    RgbImage::from_vec(w, h, data)
}

/// Baseline alpha: 1 deep inside `fg`, ramping down linearly over the
/// `ramp` pixels nearest the boundary (Chebyshev distance), 0 outside `fg`
/// and on `head`.
pub fn feather_alpha(fg: &BitMask, head: &BitMask, ramp: usize) -> Result<ScalarImage> {
    let (w, h) = (fg.width(), fg.height());
    check_same(w, h, head.width(), head.height(), "head mask")?;
    let mut alpha = ScalarImage::filled(w, h, 0.0);
    let r = ramp as i64;
    for y in 0..h {
        for x in 0..w {
            if !fg.get(x, y) || head.get(x, y) {
                continue;
            }
            // distance (1-based) to the nearest non-foreground pixel, capped at ramp + 1
            let mut d = r + 1;
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    if !fg.get(nx as usize, ny as usize) {
                        d = d.min(dx.abs().max(dy.abs()));
                    }
                }
            }
            alpha.set(x, y, d as f32 / (r + 1) as f32);
        }
    }
    Ok(alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Blended {
    pub image: RgbImage,
    /// Alpha values outside [0, 1] that were clamped.
    pub clamped: usize,
}

/// `I_out = (I_fg·A + I_bg·(1 − A))·(1 − M)`.
pub fn blend(fg: &RgbImage, alpha: &ScalarImage, bg: &RgbImage, invalid: &BitMask) -> Result<Blended> {
    let (w, h) = (fg.width(), fg.height());
    check_same(w, h, alpha.width(), alpha.height(), "alpha")?;
    check_same(w, h, bg.width(), bg.height(), "background")?;
    check_same(w, h, invalid.width(), invalid.height(), "alignment mask")?;
    let mut clamped = 0;
    let mut image = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if invalid.get(x, y) {
                continue;
            }
            let raw = alpha.get(x, y);
            let a = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, 1.0) };
            if a != raw {
                clamped += 1;
            }
            let (f, b) = (fg.get(x, y), bg.get(x, y));
            image.set(x, y, std::array::from_fn(|c| f[c] * a + b[c] * (1.0 - a)));
        }
    }
    Ok(Blended { image, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Losses {
    /// Mean of per-pixel RGB L1 weighted by (1 + H).
    pub reconstruction: f64,
    /// Mean |A − H|.
    pub alpha: f64,
    /// λ3·reconstruction + alpha. Perceptual and adversarial terms are not computed.
    pub combined: f64,
}

pub fn g2_losses(out: &RgbImage, target: &RgbImage, alpha: &ScalarImage, holes: &BitMask, cfg: &LossConfig) -> Result<G2Losses> {
    let (w, h) = (out.width(), out.height());
    check_same(w, h, target.width(), target.height(), "target")?;
    check_same(w, h, alpha.width(), alpha.height(), "alpha")?;
    check_same(w, h, holes.width(), holes.height(), "hole mask")?;
    let n = (w * h) as f64;
    if w * h == 0 {
        return Ok(G2Losses {
            reconstruction: 0.0,
            alpha: 0.0,
            combined: 0.0,
        });
    }
    let mut rec = 0.0f64;
    let mut al = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let hv = if holes.get(x, y) { 1.0 } else { 0.0 };
            let (o, t) = (out.get(x, y), target.get(x, y));
            let l1: f64 = (0..3).map(|c| (o[c] as f64 - t[c] as f64).abs()).sum();
            rec += l1 * (1.0 + hv);
            al += (alpha.get(x, y) as f64 - hv).abs();
        }
    }
    let (reconstruction, alpha) = (rec / n, al / n);
    Ok(G2Losses {
        reconstruction,
        alpha,
        combined: cfg.lambda3 * reconstruction + alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matte_threshold() {
        let low = ScalarImage::filled(4, 4, 0.05);
        assert!(body_mask(None, Some(&low), 0.1, 3).unwrap().is_empty());
        let high = ScalarImage::filled(4, 4, 0.5);
        assert_eq!(body_mask(None, Some(&high), 0.1, 3).unwrap().count(), 16);
    }

    #[test]
    fn pose_fallback_dilates_by_a_disk() {
        let mut p = IuvMap::new(11, 11);
        p.set(5, 5, 2, [0.5, 0.5]).unwrap();
        let m = body_mask(Some(&p), None, 0.1, 3).unwrap();
        // lattice points of the radius-3 disk inside the 7x7 box
        let expected = (-3i32..=3)
            .flat_map(|dy| (-3i32..=3).map(move |dx| (dx, dy)))
            .filter(|(dx, dy)| dx * dx + dy * dy <= 9)
            .count();
        assert_eq!(m.count(), expected);
        assert_eq!(expected, 29);
    }

    #[test]
    fn body_mask_needs_one_source() {
        let p = IuvMap::new(2, 2);
        let m = ScalarImage::filled(2, 2, 1.0);
        assert!(matches!(body_mask(None, None, 0.1, 3), Err(Error::MaskSource)));
        assert!(matches!(body_mask(Some(&p), Some(&m), 0.1, 3), Err(Error::MaskSource)));
    }

    #[test]
    fn head_mask_reaches_further_down() {
        let mut p = IuvMap::new(40, 40);
        p.set(20, 10, 23, [0.5, 0.5]).unwrap();
        let m = head_mask(&p, &DEFAULT_HEAD_PARTS, 5);
        assert!(m.get(20, 5) && !m.get(20, 4));
        assert!(m.get(20, 20) && !m.get(20, 21));
    }

    #[test]
    fn background_without_holes_is_input() {
        let img = RgbImage::from_fn(3, 3, |x, y| [x as f32, y as f32, 1.0]);
        let none = BitMask::new(3, 3);
        let bg = make_background(&img, &none, &none).unwrap();
        assert_eq!(bg.image, img);
        assert!(bg.holes.is_empty());
    }

    #[test]
    fn head_covering_holes_leaves_none() {
        let img = RgbImage::filled(3, 3, [0.5; 3]);
        let holes = BitMask::from_fn(3, 3, |x, _| x == 1);
        let head = BitMask::from_fn(3, 3, |x, _| x >= 1);
        let bg = make_background(&img, &holes, &head).unwrap();
        assert!(bg.holes.is_empty());
        assert_eq!(bg.image, img);
    }

    #[test]
    fn checkerboard_holes_are_set_difference() {
        let img = RgbImage::filled(6, 6, [0.7; 3]);
        let holes = BitMask::from_fn(6, 6, |x, y| (x + y) % 2 == 0);
        let head = BitMask::from_fn(6, 6, |x, y| (x / 2 + y / 2) % 2 == 0);
        let bg = make_background(&img, &holes, &head).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                let expect = holes.get(x, y) && !head.get(x, y);
                assert_eq!(bg.holes.get(x, y), expect);
                assert_eq!(bg.image.get(x, y), if expect { [0.0; 3] } else { [0.7; 3] });
            }
        }
    }

    #[test]
    fn fill_single_hole_in_constant_image() {
        let img = RgbImage::filled(5, 5, [0.3, 0.6, 0.9]);
        let mut holes = BitMask::new(5, 5);
        holes.set(2, 2, true);
        let bg = make_background(&img, &holes, &BitMask::new(5, 5)).unwrap();
        let filled = fill_background(&bg, &FillConfig::default()).unwrap();
        assert_eq!(filled, img);
    }

    #[test]
    fn fill_without_holes_is_identity() {
        let img = RgbImage::from_fn(4, 4, |x, y| [x as f32 * 0.1, y as f32 * 0.2, 0.0]);
        let bg = Background {
            image: img.clone(),
            holes: BitMask::new(4, 4),
        };
        assert_eq!(fill_background(&bg, &FillConfig::default()).unwrap(), img);
    }

    #[test]
    fn fill_all_hole_is_an_error() {
        let bg = Background {
            image: RgbImage::new(3, 3),
            holes: BitMask::filled(3, 3, true),
        };
        assert!(matches!(fill_background(&bg, &FillConfig::default()), Err(Error::AllHole)));
    }

    #[test]
    fn fill_stays_within_boundary_range() {
        let img = RgbImage::from_fn(20, 10, |x, _| [x as f32 / 19.0; 3]);
        let holes = BitMask::from_fn(20, 10, |x, _| (8..12).contains(&x));
        let bg = make_background(&img, &holes, &BitMask::new(20, 10)).unwrap();
        let filled = fill_background(&bg, &FillConfig::default()).unwrap();
        let (lo, hi) = (7.0 / 19.0, 12.0 / 19.0);
        for y in 0..10 {
            for x in 8..12 {
                let v = filled.get(x, y)[0];
                assert!(v >= lo - 1e-6 && v <= hi + 1e-6, "{v}");
            }
        }
    }

    #[test]
    fn feather_ramps_inward_and_skips_head() {
        let fg = BitMask::from_fn(9, 1, |x, _| (1..8).contains(&x));
        let head = BitMask::from_fn(9, 1, |x, _| x == 4);
        let a = feather_alpha(&fg, &head, 2).unwrap();
        let v: Vec<f32> = (0..9).map(|x| a.get(x, 0)).collect();
        assert_eq!(v, [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 0.0, 1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0]);
    }

    #[test]
    fn blend_limits() {
        let fg = RgbImage::filled(3, 3, [0.2; 3]);
        let bg = RgbImage::filled(3, 3, [0.6; 3]);
        let none = BitMask::new(3, 3);
        let one = ScalarImage::filled(3, 3, 1.0);
        assert_eq!(blend(&fg, &one, &bg, &none).unwrap().image, fg);
        let zero = ScalarImage::filled(3, 3, 0.0);
        assert_eq!(blend(&fg, &zero, &bg, &none).unwrap().image, bg);
        let half = ScalarImage::filled(3, 3, 0.5);
        let mut m = BitMask::new(3, 3);
        m.set(0, 0, true);
        let out = blend(&fg, &half, &bg, &m).unwrap().image;
        assert_eq!(out.get(0, 0), [0.0; 3]);
        for &(x, y) in &[(1, 0), (2, 2), (0, 1)] {
            for c in out.get(x, y) {
                assert!((c - 0.4).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn blend_clamps_alpha() {
        let fg = RgbImage::filled(2, 1, [1.0; 3]);
        let bg = RgbImage::filled(2, 1, [0.0; 3]);
        let a = ScalarImage::from_vec(2, 1, vec![1.5, -0.5]).unwrap();
        let b = blend(&fg, &a, &bg, &BitMask::new(2, 1)).unwrap();
        assert_eq!(b.clamped, 2);
        assert_eq!(b.image.get(0, 0), [1.0; 3]);
        assert_eq!(b.image.get(1, 0), [0.0; 3]);
    }

    #[test]
    fn g2_toy_case_by_hand() {
        // residuals per pixel (summed over RGB): 0.3, 0, 0.6, 0.3; H = [1, 0, 0, 1]
        // L_1 = (0.3·2 + 0 + 0.6 + 0.3·2) / 4 = 0.45
        // A = [1, 0.5, 0, 0]: L_A = (0 + 0.5 + 0 + 1) / 4 = 0.375
        let out = RgbImage::from_vec(2, 2, vec![[0.1; 3], [0.5; 3], [0.2; 3], [0.4; 3]]).unwrap();
        let tgt = RgbImage::from_vec(2, 2, vec![[0.0; 3], [0.5; 3], [0.4; 3], [0.5; 3]]).unwrap();
        let alpha = ScalarImage::from_vec(2, 2, vec![1.0, 0.5, 0.0, 0.0]).unwrap();
        let h = BitMask::from_vec(2, 2, vec![true, false, false, true]).unwrap();
        let g = g2_losses(&out, &tgt, &alpha, &h, &LossConfig::default()).unwrap();
        assert!((g.reconstruction - 0.45).abs() < 1e-6, "{}", g.reconstruction);
        assert_eq!(g.alpha, 0.375);
        assert!((g.combined - (10.0 * g.reconstruction + 0.375)).abs() < 1e-12);

        let same = g2_losses(&tgt, &tgt, &ScalarImage::from_mask(&h), &h, &LossConfig::default()).unwrap();
        assert_eq!((same.reconstruction, same.alpha), (0.0, 0.0));
    }

    #[test]
    fn hole_spec_is_union() {
        let a = BitMask::from_fn(4, 1, |x, _| x == 0);
        let b = BitMask::from_fn(4, 1, |x, _| x == 3);
        let s = HoleSpec::new(a, b, 0.1).unwrap();
        assert_eq!(s.h.count(), 2);
        assert_eq!(s.resized(8, 2).count(), 8);
    }
}
