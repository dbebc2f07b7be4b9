//! Plain row-major rasters: RGB images, scalar images (alpha, matte) and
//! boolean masks.

use crate::error::{Error, Result};

pub type Rgb = [f32; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, value: Rgb) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dim(format!(
                "{} pixels supplied for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
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
    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: Rgb) {
        self.data[y * self.width + x] = value;
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.data
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    /// Copy of `self` with every pixel outside `mask` set to zero.
    pub fn masked(&self, mask: &BitMask) -> Result<Self> {
        check_same(self.width, self.height, mask.width(), mask.height(), "mask")?;
        let data = self
            .data
            .iter()
            .zip(mask.bits())
            .map(|(&p, &m)| if m { p } else { [0.0; 3] })
            .collect();
        Ok(Self {
            width: self.width,
            height: self.height,
            data,
        })
    }
}

/// Single-channel real raster (alpha mattes, feathered masks).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ScalarImage {
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dim(format!(
                "{} values supplied for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_mask(mask: &BitMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            data: mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
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
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        self.data[y * self.width + x] = value;
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, false)
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::dim(format!(
                "{} bits supplied for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
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
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn union(&self, other: &BitMask) -> Result<BitMask> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersect(&self, other: &BitMask) -> Result<BitMask> {
        self.zip_with(other, |a, b| a && b)
    }

    /// `self ∧ ¬other`.
    pub fn difference(&self, other: &BitMask) -> Result<BitMask> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> BitMask {
        BitMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &BitMask, f: impl Fn(bool, bool) -> bool) -> Result<BitMask> {
        check_same(self.width, self.height, other.width, other.height, "mask")?;
        Ok(BitMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Morphological dilation by an arbitrary set of (dx, dy) offsets.
    pub fn dilate_with(&self, offsets: &[(i32, i32)]) -> BitMask {
        let mut out = BitMask::new(self.width, self.height);
        let (w, h) = (self.width as i64, self.height as i64);
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                for &(dx, dy) in offsets {
                    let (nx, ny) = (x as i64 + dx as i64, y as i64 + dy as i64);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        out.set(nx as usize, ny as usize, true);
                    }
                }
            }
        }
        out
    }

    /// Dilation by a Euclidean disk of the given radius.
    pub fn dilate_disk(&self, radius: usize) -> BitMask {
        self.dilate_with(&disk_offsets(radius))
    }

    /// Nearest-neighbor rescale to `width`×`height`.
    pub fn resize_nearest(&self, width: usize, height: usize) -> BitMask {
        BitMask::from_fn(width, height, |x, y| {
            let sx = ((x as f64 + 0.5) * self.width as f64 / width as f64).floor() as usize;
            let sy = ((y as f64 + 0.5) * self.height as f64 / height as f64).floor() as usize;
            self.get(sx.min(self.width - 1), sy.min(self.height - 1))
        })
    }
}

/// Offsets (dx, dy) with dx² + dy² ≤ r².
pub fn disk_offsets(radius: usize) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

pub(crate) fn check_same(w: usize, h: usize, ow: usize, oh: usize, what: &str) -> Result<()> {
    if w != ow || h != oh {
        return Err(Error::dim(format!(
            "{what} is {ow}x{oh}, expected {w}x{h}"
        )));
    }
    Ok(())
}
