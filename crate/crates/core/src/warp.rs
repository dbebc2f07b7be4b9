//! Image ↔ atlas transfer: bilinear lookup through a coordinate map, the
//! I2UV scatter and the UV2I gather.

use rayon::prelude::*;

use crate::atlas::{AtlasLayout, CoordinateMap, TextureMap};
use crate::error::{Error, Result};
use crate::iuv::IuvMap;
use crate::raster::{check_same, BitMask, Rgb, RgbImage};

/// Bilinear interpolation of `img` at a real position. `None` outside
/// [0, W−1]×[0, H−1].
#[inline]
pub fn sample_at(img: &RgbImage, x: f32, y: f32) -> Option<Rgb> {
    if img.is_empty() {
        return None;
    }
    let (w, h) = (img.width(), img.height());
    if !(x >= 0.0 && y >= 0.0 && x <= (w - 1) as f32 && y <= (h - 1) as f32) {
        return None;
    }
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (fx, fy) = (x - x0 as f32, y - y0 as f32);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (p00, p10) = (img.get(x0, y0), img.get(x1, y0));
    let (p01, p11) = (img.get(x0, y1), img.get(x1, y1));
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] + fx * (p10[c] - p00[c]);
        let bottom = p01[c] + fx * (p11[c] - p01[c]);
        out[c] = top + fy * (bottom - top);
    }
    Some(out)
}

/// Bilinear rescale with corner pixels aligned.
pub fn resize(img: &RgbImage, width: usize, height: usize) -> RgbImage {
    if img.is_empty() {
        return RgbImage::new(width, height);
    }
    let step = |src: usize, dst: usize| if dst > 1 { (src - 1) as f32 / (dst - 1) as f32 } else { 0.0 };
    let (sx, sy) = (step(img.width(), width), step(img.height(), height));
    RgbImage::from_fn(width, height, |x, y| {
        let (fx, fy) = ((x as f32 * sx).min((img.width() - 1) as f32), (y as f32 * sy).min((img.height() - 1) as f32));
        sample_at(img, fx, fy).expect("clamped into the image")
    })
}

/// Texture lookup `img(coords)`. A cell is valid iff its coordinate is valid
/// and inside the image; everything else stays invalid.
pub fn bilinear_sample(img: &RgbImage, coords: &CoordinateMap) -> Result<TextureMap> {
    if img.is_empty() {
        return Err(Error::dim("cannot sample a zero-sized image"));
    }
    let (w, h) = (coords.width(), coords.height());
    let rows: Vec<Vec<Option<Rgb>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| coords.get(x, y).and_then(|[cx, cy]| sample_at(img, cx, cy)))
                .collect()
        })
        .collect();
    let mut out = TextureMap::invalid(w, h);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, rgb) in row.into_iter().enumerate() {
            if let Some(rgb) = rgb {
                out.set(x, y, rgb);
            }
        }
    }
    Ok(out)
}

/// Scatters `img` into the atlas through `pose`. Returns the texture map
/// (colors) and the coordinate map (source pixel positions).
///
/// When several pixels land on one cell the lowest one in the image (largest
/// y, then largest x) wins.
pub fn i2uv(img: &RgbImage, pose: &IuvMap, layout: &AtlasLayout) -> Result<(TextureMap, CoordinateMap)> {
    check_same(pose.width(), pose.height(), img.width(), img.height(), "image")?;
    let n = layout.atlas_size();
    let mut texture = TextureMap::invalid(n, n);
    let mut coords = CoordinateMap::for_layout(layout);
    // row-major traversal: later writes have larger (y, x)
    for_each_cell(pose, layout, |x, y, cx, cy| {
        texture.set(cx, cy, img.get(x, y));
        coords.set(cx, cy, [x as f32, y as f32]);
    });
    Ok((texture, coords))
}

/// Coordinate half of [`i2uv`], for when there is no image.
pub fn i2uv_coords(pose: &IuvMap, layout: &AtlasLayout) -> CoordinateMap {
    let mut coords = CoordinateMap::for_layout(layout);
    for_each_cell(pose, layout, |x, y, cx, cy| coords.set(cx, cy, [x as f32, y as f32]));
    coords
}

fn for_each_cell(pose: &IuvMap, layout: &AtlasLayout, mut f: impl FnMut(usize, usize, usize, usize)) {
    for y in 0..pose.height() {
        for x in 0..pose.width() {
            let part = pose.part(x, y);
            if part == 0 {
                continue;
            }
            let [u, v] = pose.uv(x, y);
            let (cx, cy) = layout.cell(part, u, v);
            f(x, y, cx, cy);
        }
    }
}

/// Gathers a texture map back into image space through `pose`. The mask is
/// foreground ∧ valid cell; masked-out pixels are black.
pub fn uv2i_texture(texture: &TextureMap, pose: &IuvMap, layout: &AtlasLayout) -> Result<(RgbImage, BitMask)> {
    texture.check_layout(layout)?;
    let (w, h) = (pose.width(), pose.height());
    let mut img = RgbImage::new(w, h);
    let mut mask = BitMask::new(w, h);
    gather(pose, layout, |x, y, cx, cy| {
        if let Some(rgb) = texture.get(cx, cy) {
            img.set(x, y, rgb);
            mask.set(x, y, true);
        }
    });
    Ok((img, mask))
}

/// Gathers a coordinate map into an image-shaped warp field.
pub fn uv2i_coords(coords: &CoordinateMap, pose: &IuvMap, layout: &AtlasLayout) -> Result<CoordinateMap> {
    coords.check_layout(layout)?;
    let mut out = CoordinateMap::invalid(pose.width(), pose.height());
    gather(pose, layout, |x, y, cx, cy| {
        if let Some(xy) = coords.get(cx, cy) {
            out.set(x, y, xy);
        }
    });
    Ok(out)
}

fn gather(pose: &IuvMap, layout: &AtlasLayout, f: impl FnMut(usize, usize, usize, usize)) {
    for_each_cell(pose, layout, f)
}
