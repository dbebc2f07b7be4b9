//! Dense-pose IUV maps: a body-part label per pixel plus continuous surface
//! coordinates on that part.

use crate::error::{Error, Result};
use crate::raster::BitMask;

/// Largest part label; 0 is background, 1..=24 are body parts.
pub const MAX_PART: u8 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct IuvMap {
    width: usize,
    height: usize,
    part: Vec<u8>,
    uv: Vec<[f32; 2]>,
}

impl IuvMap {
    /// All-background map.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            part: vec![0; width * height],
            uv: vec![[0.0; 2]; width * height],
        }
    }

    /// Builds a map from raw channels. Background pixels have their UV reset to 0.
    pub fn from_parts(
        width: usize,
        height: usize,
        part: Vec<u8>,
        mut uv: Vec<[f32; 2]>,
    ) -> Result<Self> {
        if part.len() != width * height || uv.len() != width * height {
            return Err(Error::dim(format!(
                "IUV channels of length {}/{} for a {width}x{height} map",
                part.len(),
                uv.len()
            )));
        }
        for (i, (&p, c)) in part.iter().zip(uv.iter_mut()).enumerate() {
            if p > MAX_PART {
                return Err(Error::PartIndex {
                    part: p,
                    x: i % width,
                    y: i / width,
                });
            }
            if p == 0 {
                *c = [0.0; 2];
            } else if !unit(c[0]) || !unit(c[1]) {
                return Err(Error::dim(format!(
                    "UV ({}, {}) outside [0,1] at pixel ({}, {})",
                    c[0],
                    c[1],
                    i % width,
                    i / width
                )));
            }
        }
        Ok(Self {
            width,
            height,
            part,
            uv,
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
    pub fn part(&self, x: usize, y: usize) -> u8 {
        self.part[y * self.width + x]
    }

    #[inline]
    pub fn uv(&self, x: usize, y: usize) -> [f32; 2] {
        self.uv[y * self.width + x]
    }

    pub fn parts(&self) -> &[u8] {
        &self.part
    }

    pub fn uvs(&self) -> &[[f32; 2]] {
        &self.uv
    }

    /// Sets one pixel. `part == 0` clears it to background.
    pub fn set(&mut self, x: usize, y: usize, part: u8, uv: [f32; 2]) -> Result<()> {
        if part > MAX_PART {
            return Err(Error::PartIndex { part, x, y });
        }
        let i = y * self.width + x;
        if part == 0 {
            self.part[i] = 0;
            self.uv[i] = [0.0; 2];
            return Ok(());
        }
        if !unit(uv[0]) || !unit(uv[1]) {
            return Err(Error::dim(format!(
                "UV ({}, {}) outside [0,1] at pixel ({x}, {y})",
                uv[0], uv[1]
            )));
        }
        self.part[i] = part;
        self.uv[i] = uv;
        Ok(())
    }

    pub fn foreground(&self) -> BitMask {
        self.mask_where(|p| p > 0)
    }

    pub fn mask_where(&self, pred: impl Fn(u8) -> bool) -> BitMask {
        let bits = self.part.iter().map(|&p| pred(p)).collect();
        BitMask::from_vec(self.width, self.height, bits).expect("same size")
    }

    /// Mirror left-right. `mirror_part` maps each label to its counterpart and
    /// the surface coordinate u is reflected to 1 − u.
    pub fn flip_horizontal(&self, mirror_part: impl Fn(u8) -> u8) -> IuvMap {
        let mut out = IuvMap::new(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let (sx, i) = (self.width - 1 - x, y * self.width + x);
                let p = self.part(sx, y);
                if p > 0 {
                    let [u, v] = self.uv(sx, y);
                    out.part[i] = mirror_part(p);
                    out.uv[i] = [1.0 - u, v];
                }
            }
        }
        out
    }
}

#[inline]
fn unit(v: f32) -> bool {
    (0.0..=1.0).contains(&v)
}
