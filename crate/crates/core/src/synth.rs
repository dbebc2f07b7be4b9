//! Self-supervised training pairs: a neutral-pose portrait is re-posed into a
//! retrieved selfie pose through the atlas, giving a synthetic selfie whose
//! ground truth is the original portrait.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::atlas::{AtlasLayout, CoordinateMap, TextureMap};
use crate::error::Result;
use crate::inpaint::SymmetryTable;
use crate::iuv::IuvMap;
use crate::raster::{check_same, BitMask, RgbImage};
use crate::warp::{i2uv, i2uv_coords, uv2i_texture};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSelfie {
    pub image: RgbImage,
    /// Selfie-pose foreground pixels whose atlas cell the portrait never saw.
    pub holes: BitMask,
}

/// Warps `portrait` from `portrait_pose` into `selfie_pose`. Hole pixels are black.
pub fn synth_selfie_image(
    portrait: &RgbImage,
    portrait_pose: &IuvMap,
    selfie_pose: &IuvMap,
    layout: &AtlasLayout,
) -> Result<SyntheticSelfie> {
    check_same(portrait_pose.width(), portrait_pose.height(), selfie_pose.width(), selfie_pose.height(), "selfie pose")?;
    let (texture, _) = i2uv(portrait, portrait_pose, layout)?;
    let (image, covered) = uv2i_texture(&texture, selfie_pose, layout)?;
    let holes = selfie_pose.foreground().difference(&covered)?;
    Ok(SyntheticSelfie { image, holes })
}

/// UV-domain training triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct UvPair {
    /// Selfie coordinate map, restricted to cells the portrait texture covers (V_src).
    pub c_src: CoordinateMap,
    /// Portrait colors on V_src.
    pub t_src: TextureMap,
    /// Portrait texture; its validity is V_tgt.
    pub t_tgt: TextureMap,
}

impl UvPair {
    pub fn v_src(&self) -> &BitMask {
        self.c_src.valid()
    }

    pub fn v_tgt(&self) -> &BitMask {
        self.t_tgt.valid()
    }
}

pub fn synth_uv_pair(
    portrait: &RgbImage,
    portrait_pose: &IuvMap,
    selfie_pose: &IuvMap,
    layout: &AtlasLayout,
) -> Result<UvPair> {
    check_same(portrait_pose.width(), portrait_pose.height(), selfie_pose.width(), selfie_pose.height(), "selfie pose")?;
    let (t_tgt, _) = i2uv(portrait, portrait_pose, layout)?;
    let c_src = i2uv_coords(selfie_pose, layout).restricted(t_tgt.valid())?;
    let t_src = TextureMap::from_parts(t_tgt.image().clone(), c_src.valid().clone())?;
    Ok(UvPair { c_src, t_src, t_tgt })
}

/// Everything written for one synthesized pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedPair {
    pub selfie: SyntheticSelfie,
    pub uv: UvPair,
    pub flipped: bool,
}

#[derive(Debug, Clone)]
pub struct Augment<'a> {
    pub flip: bool,
    /// Candidate backgrounds, already resized to the canvas.
    pub backgrounds: &'a [RgbImage],
    pub body_dilation: usize,
}

/// Generator for one portrait. Seeded from the batch seed and the portrait's
/// position so batch output is independent of scheduling.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws the selfie partner uniformly from `candidates` (ranked ids).
pub fn pick_partner<'c, R: Rng>(rng: &mut R, candidates: &'c [String]) -> Option<(usize, &'c String)> {
    if candidates.is_empty() {
        return None;
    }
    let rank = rng.gen_range(0..candidates.len());
    Some((rank, &candidates[rank]))
}

/// Builds one pair with optional flip and background replacement. The flip
/// mirrors portrait image and pose together; background replacement keeps the
/// dilated pose foreground and takes everything else from a random background.
pub fn synthesize_pair<R: Rng>(
    rng: &mut R,
    portrait: &RgbImage,
    portrait_pose: &IuvMap,
    selfie_pose: &IuvMap,
    layout: &AtlasLayout,
    table: &SymmetryTable,
    augment: &Augment<'_>,
) -> Result<SynthesizedPair> {
    let flipped = augment.flip && rng.gen_bool(0.5);
    let (mut image, pose) = if flipped {
        (portrait.flip_horizontal(), portrait_pose.flip_horizontal(|p| table.mirror(p)))
    } else {
        (portrait.clone(), portrait_pose.clone())
    };
    if let Some(bg) = augment.backgrounds.choose(rng) {
        check_same(image.width(), image.height(), bg.width(), bg.height(), "background")?;
        let keep = pose.foreground().dilate_disk(augment.body_dilation);
        for y in 0..image.height() {
            for x in 0..image.width() {
                if !keep.get(x, y) {
                    image.set(x, y, bg.get(x, y));
                }
            }
        }
    }
    let selfie = synth_selfie_image(&image, &pose, selfie_pose, layout)?;
    let uv = synth_uv_pair(&image, &pose, selfie_pose, layout)?;
    Ok(SynthesizedPair { selfie, uv, flipped })
}
