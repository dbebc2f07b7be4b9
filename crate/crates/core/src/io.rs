//! On-disk formats.
//!
//! * IUV map: 8-bit RGB PNG; R = part index verbatim, G = round(255·u), B = round(255·v).
//! * Masks: 8-bit gray PNG, 0 or 255.
//! * Texture map: 8-bit RGB PNG plus a validity mask PNG.
//! * Coordinate map: little-endian f32 pairs (x then y, row-major) plus a
//!   validity mask PNG that also carries the grid size.

use std::fs;
use std::path::Path;

use image::{ColorType, GrayImage, ImageBuffer, Luma, Rgb};

use crate::atlas::{CoordinateMap, TextureMap};
use crate::error::{Error, Result};
use crate::iuv::{IuvMap, MAX_PART};
use crate::raster::{BitMask, RgbImage, ScalarImage};

fn open(path: &Path) -> Result<image::DynamicImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory(&bytes).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn save<P, C>(path: &Path, buf: &ImageBuffer<P, C>) -> Result<()>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    buf.save_with_format(path, image::ImageFormat::Png).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[inline]
fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = open(path)?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img
        .pixels()
        .map(|p| p.0.map(|c| c as f32 / 255.0))
        .collect();
    RgbImage::from_vec(w as usize, h as usize, data)
}

pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    let buf = ImageBuffer::<Rgb<u8>, _>::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Rgb(img.get(x as usize, y as usize).map(to_u8))
    });
    save(path, &buf)
}

pub fn read_iuv(path: &Path) -> Result<IuvMap> {
    let img = open(path)?;
    if img.color() != ColorType::Rgb8 {
        return Err(Error::format(
            path,
            format!("IUV maps must be 8-bit RGB, found {:?}", img.color()),
        ));
    }
    let img = img.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut part = Vec::with_capacity(w * h);
    let mut uv = Vec::with_capacity(w * h);
    for (x, y, p) in img.enumerate_pixels() {
        let [i, u, v] = p.0;
        if i > MAX_PART {
            return Err(Error::format(path, format!("part index {i} > {MAX_PART} at pixel ({x}, {y})")));
        }
        part.push(i);
        uv.push([u as f32 / 255.0, v as f32 / 255.0]);
    }
    IuvMap::from_parts(w, h, part, uv)
}

pub fn write_iuv(path: &Path, map: &IuvMap) -> Result<()> {
    let buf = ImageBuffer::<Rgb<u8>, _>::from_fn(map.width() as u32, map.height() as u32, |x, y| {
        let (x, y) = (x as usize, y as usize);
        let [u, v] = map.uv(x, y);
        Rgb([map.part(x, y), to_u8(u), to_u8(v)])
    });
    save(path, &buf)
}

pub fn read_mask(path: &Path) -> Result<BitMask> {
    let img = open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    BitMask::from_vec(w as usize, h as usize, img.pixels().map(|p| p.0[0] > 127).collect())
}

pub fn write_mask(path: &Path, mask: &BitMask) -> Result<()> {
    let buf = GrayImage::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
        Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
    });
    save(path, &buf)
}

/// Gray matte in [0, 1].
pub fn read_scalar(path: &Path) -> Result<ScalarImage> {
    let img = open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    ScalarImage::from_vec(w as usize, h as usize, img.pixels().map(|p| p.0[0] as f32 / 255.0).collect())
}

pub fn write_scalar(path: &Path, img: &ScalarImage) -> Result<()> {
    let buf = GrayImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        Luma([to_u8(img.get(x as usize, y as usize))])
    });
    save(path, &buf)
}

pub fn write_texture(png: &Path, valid_png: &Path, tex: &TextureMap) -> Result<()> {
    write_rgb(png, tex.image())?;
    write_mask(valid_png, tex.valid())
}

pub fn read_texture(png: &Path, valid_png: &Path) -> Result<TextureMap> {
    TextureMap::from_parts(read_rgb(png)?, read_mask(valid_png)?)
}

pub fn coords_to_bytes(map: &CoordinateMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(map.values().len() * 8);
    for [x, y] in map.values() {
        out.extend_from_slice(&x.to_le_bytes());
        out.extend_from_slice(&y.to_le_bytes());
    }
    out
}

pub fn coords_from_bytes(bytes: &[u8], valid: BitMask) -> std::result::Result<CoordinateMap, String> {
    let (w, h) = (valid.width(), valid.height());
    if bytes.len() != w * h * 8 {
        return Err(format!("{} bytes for a {w}x{h} coordinate map (expected {})", bytes.len(), w * h * 8));
    }
    let xy = bytes
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().expect("4 bytes")),
                f32::from_le_bytes(c[4..8].try_into().expect("4 bytes")),
            ]
        })
        .collect();
    CoordinateMap::from_parts(w, h, xy, valid).map_err(|e| e.to_string())
}

pub fn write_coords(bin: &Path, valid_png: &Path, map: &CoordinateMap) -> Result<()> {
    if let Some(dir) = bin.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(bin, coords_to_bytes(map)).map_err(|e| Error::io(bin, e))?;
    write_mask(valid_png, map.valid())
}

pub fn read_coords(bin: &Path, valid_png: &Path) -> Result<CoordinateMap> {
    let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
    coords_from_bytes(&bytes, read_mask(valid_png)?).map_err(|msg| Error::format(bin, msg))
}

/// `foo.bin` → `foo_valid.png`.
pub fn validity_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_valid.png"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn iuv_png_channels_are_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p_iuv.png");
        let mut m = IuvMap::new(3, 2);
        m.set(0, 0, 24, [1.0, 0.0]).unwrap();
        m.set(1, 1, 2, [0.5, 0.2]).unwrap();
        write_iuv(&path, &m).unwrap();
        let raw = image::open(&path).unwrap().to_rgb8();
        assert_eq!(raw.get_pixel(0, 0).0, [24, 255, 0]);
        // round(127.5) = 128, round(51) = 51
        assert_eq!(raw.get_pixel(1, 1).0, [2, 128, 51]);
        assert_eq!(raw.get_pixel(2, 0).0, [0, 0, 0]);
        let back = read_iuv(&path).unwrap();
        assert_eq!(back.part(0, 0), 24);
        assert_eq!(back.uv(1, 1), [128.0 / 255.0, 51.0 / 255.0]);
    }

    #[test]
    fn iuv_rejects_bad_labels_with_file_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad_iuv.png");
        let mut buf = image::RgbImage::new(2, 2);
        buf.put_pixel(1, 0, Rgb([25, 10, 10]));
        buf.save(&path).unwrap();
        let err = read_iuv(&path).unwrap_err().to_string();
        assert!(err.contains("bad_iuv.png") && err.contains("25"), "{err}");
    }

    #[test]
    fn iuv_rejects_non_rgb_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let gray = dir.path().join("g.png");
        image::GrayImage::new(2, 2).save(&gray).unwrap();
        assert!(matches!(read_iuv(&gray), Err(Error::Format { .. })));
        let junk = dir.path().join("j.png");
        fs::write(&junk, b"not a png").unwrap();
        assert!(matches!(read_iuv(&junk), Err(Error::Image { .. })));
    }

    #[test]
    fn coordinate_binary_layout() {
        let mut valid = BitMask::new(2, 1);
        valid.set(1, 0, true);
        let m = CoordinateMap::from_parts(2, 1, vec![[0.0; 2], [1.5, -2.0]], valid).unwrap();
        let bytes = coords_to_bytes(&m);
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[0..4], &(-1.0f32).to_le_bytes());
        assert_eq!(&bytes[8..12], &1.5f32.to_le_bytes());
        assert_eq!(&bytes[12..16], &(-2.0f32).to_le_bytes());
        assert!(coords_from_bytes(&bytes[..8], m.valid().clone()).is_err());
    }

    #[test]
    fn validity_sidecar_name() {
        assert_eq!(validity_path(Path::new("out/C_src.bin")), Path::new("out/C_src_valid.png"));
    }

    proptest! {
        #[test]
        fn coordinate_files_round_trip(vals in prop::collection::vec((any::<bool>(), -1e4f32..1e4, -1e4f32..1e4), 12)) {
            let dir = tempfile::tempdir().unwrap();
            let valid = BitMask::from_vec(4, 3, vals.iter().map(|v| v.0).collect()).unwrap();
            let m = CoordinateMap::from_parts(4, 3, vals.iter().map(|v| [v.1, v.2]).collect(), valid).unwrap();
            let bin = dir.path().join("c.bin");
            write_coords(&bin, &validity_path(&bin), &m).unwrap();
            prop_assert_eq!(read_coords(&bin, &validity_path(&bin)).unwrap(), m);
        }

        #[test]
        fn iuv_files_round_trip_on_the_8bit_lattice(cells in prop::collection::vec((0u8..=24, 0u8..=255, 0u8..=255), 6)) {
            let dir = tempfile::tempdir().unwrap();
            let part = cells.iter().map(|c| c.0).collect();
            let uv = cells.iter().map(|c| [c.1 as f32 / 255.0, c.2 as f32 / 255.0]).collect();
            let m = IuvMap::from_parts(3, 2, part, uv).unwrap();
            let path = dir.path().join("x_iuv.png");
            write_iuv(&path, &m).unwrap();
            prop_assert_eq!(read_iuv(&path).unwrap(), m);
        }
    }
}
