//! UV atlas layout and the two atlas-domain grids: coordinate maps (image
//! positions per cell) and texture maps (colors per cell).

use crate::error::{Error, Result};
use crate::iuv::MAX_PART;
use crate::raster::{check_same, BitMask, Rgb, RgbImage};

/// Stored in invalid coordinate cells. The validity mask is authoritative.
pub const COORD_SENTINEL: [f32; 2] = [-1.0, -1.0];

/// Square atlas split into a `rows`×`cols` grid of square tiles; part `p`
/// occupies slot `p − 1` in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AtlasLayout {
    atlas_size: usize,
    rows: usize,
    cols: usize,
    tile_size: usize,
}

impl Default for AtlasLayout {
    fn default() -> Self {
        Self::new(256, 5, 5).expect("default layout is valid")
    }
}

impl AtlasLayout {
    pub fn new(atlas_size: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols < MAX_PART as usize {
            return Err(Error::Layout(format!(
                "{rows}x{cols} grid cannot hold {MAX_PART} parts"
            )));
        }
        let tile_size = atlas_size / rows.max(cols);
        if tile_size == 0 {
            return Err(Error::Layout(format!(
                "atlas of {atlas_size} px is too small for a {rows}x{cols} grid"
            )));
        }
        Ok(Self {
            atlas_size,
            rows,
            cols,
            tile_size,
        })
    }

    #[inline]
    pub fn atlas_size(&self) -> usize {
        self.atlas_size
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn tile_size(&self) -> usize {
        self.tile_size
    }

    /// Top-left atlas cell of the tile owned by `part` (1..=24).
    #[inline]
    pub fn tile_origin(&self, part: u8) -> (usize, usize) {
        debug_assert!((1..=MAX_PART).contains(&part));
        let slot = part as usize - 1;
        ((slot % self.cols) * self.tile_size, (slot / self.cols) * self.tile_size)
    }

    /// Atlas cell receiving surface point (u, v) of `part`.
    #[inline]
    pub fn cell(&self, part: u8, u: f32, v: f32) -> (usize, usize) {
        let (ox, oy) = self.tile_origin(part);
        let span = (self.tile_size - 1) as f32;
        // f32::round rounds half away from zero
        let lx = (u * span).round() as usize;
        let ly = (v * span).round() as usize;
        (ox + lx.min(self.tile_size - 1), oy + ly.min(self.tile_size - 1))
    }

    /// Inverse of the tile placement: which part owns atlas cell (x, y), and
    /// the cell's offset inside that tile. `None` for dead border and unused
    /// slots.
    pub fn locate(&self, x: usize, y: usize) -> Option<(u8, usize, usize)> {
        let (col, row) = (x / self.tile_size, y / self.tile_size);
        if col >= self.cols || row >= self.rows {
            return None;
        }
        let slot = row * self.cols + col;
        if slot >= MAX_PART as usize {
            return None;
        }
        Some((
            slot as u8 + 1,
            x % self.tile_size,
            y % self.tile_size,
        ))
    }

    /// Cell of `part`'s tile at in-tile offset (lx, ly).
    #[inline]
    pub fn tile_cell(&self, part: u8, lx: usize, ly: usize) -> (usize, usize) {
        let (ox, oy) = self.tile_origin(part);
        (ox + lx, oy + ly)
    }

    fn check_grid(&self, width: usize, height: usize, what: &str) -> Result<()> {
        check_same(self.atlas_size, self.atlas_size, width, height, what)
    }
}

/// Grid of image-space (x, y) positions with a validity mask. Used both for
/// atlas-domain coordinate maps and image-shaped warp fields.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap {
    width: usize,
    height: usize,
    xy: Vec<[f32; 2]>,
    valid: BitMask,
}

impl CoordinateMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            xy: vec![COORD_SENTINEL; width * height],
            valid: BitMask::new(width, height),
        }
    }

    pub fn for_layout(layout: &AtlasLayout) -> Self {
        Self::invalid(layout.atlas_size(), layout.atlas_size())
    }

    /// Builds from raw values; entries outside `valid` are reset to the sentinel.
    pub fn from_parts(width: usize, height: usize, mut xy: Vec<[f32; 2]>, valid: BitMask) -> Result<Self> {
        if xy.len() != width * height {
            return Err(Error::dim(format!(
                "{} coordinates for a {width}x{height} map",
                xy.len()
            )));
        }
        check_same(width, height, valid.width(), valid.height(), "validity mask")?;
        for (c, &ok) in xy.iter_mut().zip(valid.bits()) {
            if !ok {
                *c = COORD_SENTINEL;
            } else if !c[0].is_finite() || !c[1].is_finite() {
                return Err(Error::dim("non-finite coordinate in a valid cell"));
            }
        }
        Ok(Self {
            width,
            height,
            xy,
            valid,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<[f32; 2]> {
        let i = y * self.width + x;
        self.valid.bits()[i].then(|| self.xy[i])
    }

    /// Raw value, sentinel included.
    #[inline]
    pub fn raw(&self, x: usize, y: usize) -> [f32; 2] {
        self.xy[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, xy: [f32; 2]) {
        let i = y * self.width + x;
        self.xy[i] = xy;
        self.valid.bits_mut()[i] = true;
    }

    #[inline]
    pub fn clear(&mut self, x: usize, y: usize) {
        let i = y * self.width + x;
        self.xy[i] = COORD_SENTINEL;
        self.valid.bits_mut()[i] = false;
    }

    pub fn valid(&self) -> &BitMask {
        &self.valid
    }

    pub fn values(&self) -> &[[f32; 2]] {
        &self.xy
    }

    /// Copy with validity restricted to `mask`.
    pub fn restricted(&self, mask: &BitMask) -> Result<Self> {
        let valid = self.valid.intersect(mask)?;
        Self::from_parts(self.width, self.height, self.xy.clone(), valid)
    }

    pub(crate) fn check_layout(&self, layout: &AtlasLayout) -> Result<()> {
        layout.check_grid(self.width, self.height, "coordinate map")
    }
}

/// Grid of RGB colors with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureMap {
    image: RgbImage,
    valid: BitMask,
}

impl TextureMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            image: RgbImage::new(width, height),
            valid: BitMask::new(width, height),
        }
    }

    /// Entries outside `valid` are zeroed.
    pub fn from_parts(image: RgbImage, valid: BitMask) -> Result<Self> {
        let image = image.masked(&valid)?;
        Ok(Self { image, valid })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.image.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.image.height()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<Rgb> {
        self.valid.get(x, y).then(|| self.image.get(x, y))
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: Rgb) {
        self.image.set(x, y, rgb);
        self.valid.set(x, y, true);
    }

    pub fn valid(&self) -> &BitMask {
        &self.valid
    }

    /// Color grid; invalid cells are black.
    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub(crate) fn check_layout(&self, layout: &AtlasLayout) -> Result<()> {
        layout.check_grid(self.width(), self.height(), "texture map")
    }
}
