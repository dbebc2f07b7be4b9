//! Pose database index files and dataset ingestion.
//!
//! Index format: optional `#` header lines, then one tab-separated record per
//! pose: `id  iuv-path  image-path  torso-pixel-count`. Paths are relative to
//! the index file's directory; a missing image is written as `-`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::align::{align, CANVAS_SIZE};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{read_iuv, read_rgb, write_iuv, write_rgb};
use crate::iuv::IuvMap;
use crate::raster::RgbImage;
use crate::search::{torso_mask, Direction, PoseDatabase};

pub const IUV_SUFFIX: &str = "_iuv.png";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRecord {
    pub id: String,
    pub iuv_path: PathBuf,
    pub image_path: Option<PathBuf>,
    pub torso_pixels: usize,
}

fn base_dir(index: &Path) -> PathBuf {
    index.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn relative<'a>(path: &'a Path, base: &Path) -> &'a Path {
    path.strip_prefix(base).unwrap_or(path)
}

pub fn format_index(db: &PoseDatabase, base: &Path) -> String {
    let mut s = String::new();
    let (w, h) = db.canvas();
    let _ = writeln!(s, "# direction={} torso_part={} canvas={w}x{h}", db.direction(), db.torso_part());
    for e in db.entries() {
        let image = e
            .image_path
            .as_deref()
            .map_or("-".to_string(), |p| relative(p, base).display().to_string());
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            e.id,
            relative(&e.iuv_path, base).display(),
            image,
            e.features.torso_len()
        );
    }
    s
}

pub fn write_index(path: &Path, db: &PoseDatabase) -> Result<()> {
    let text = format_index(db, &base_dir(path));
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexHeader {
    pub direction: Direction,
    pub torso_part: u8,
    pub canvas: (usize, usize),
}

pub fn parse_index(text: &str, base: &Path, path: &Path) -> Result<(IndexHeader, Vec<IndexRecord>)> {
    let mut header = IndexHeader {
        direction: Direction::Neutral,
        torso_part: 2,
        canvas: (CANVAS_SIZE, CANVAS_SIZE),
    };
    let mut records = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let bad = |msg: String| Error::format(path, format!("line {}: {msg}", n + 1));
        if let Some(comment) = line.strip_prefix('#') {
            for kv in comment.split_whitespace() {
                match kv.split_once('=') {
                    Some(("direction", v)) => header.direction = v.parse()?,
                    Some(("torso_part", v)) => {
                        header.torso_part = v.parse().map_err(|_| bad(format!("bad torso_part {v:?}")))?
                    }
                    Some(("canvas", v)) => {
                        let (w, h) = v.split_once('x').ok_or_else(|| bad(format!("bad canvas {v:?}")))?;
                        header.canvas = (
                            w.parse().map_err(|_| bad(format!("bad canvas {v:?}")))?,
                            h.parse().map_err(|_| bad(format!("bad canvas {v:?}")))?,
                        );
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let [id, iuv, image, count] = f.as_slice() else {
            return Err(bad(format!("expected 4 tab-separated fields, found {}", f.len())));
        };
        records.push(IndexRecord {
            id: id.to_string(),
            iuv_path: base.join(iuv),
            image_path: (*image != "-").then(|| base.join(image)),
            torso_pixels: count.parse().map_err(|_| bad(format!("bad torso count {count:?}")))?,
        });
    }
    Ok((header, records))
}

/// Loads an index and every pose it references. Stored torso counts must
/// match the poses on disk.
pub fn load_index(path: &Path) -> Result<PoseDatabase> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (header, records) = parse_index(&text, &base_dir(path), path)?;
    let poses: Vec<IuvMap> = records
        .par_iter()
        .map(|r| read_iuv(&r.iuv_path))
        .collect::<Result<_>>()?;
    let mut db = PoseDatabase::new(header.direction, header.torso_part, header.canvas);
    for (r, pose) in records.into_iter().zip(&poses) {
        let torso = torso_mask(pose, header.torso_part).len();
        if torso != r.torso_pixels {
            return Err(Error::format(
                &r.iuv_path,
                format!("index says {} torso pixels, file has {torso}", r.torso_pixels),
            ));
        }
        db.insert(r.id, pose, r.iuv_path, r.image_path)?;
    }
    Ok(db)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    /// Seeded shuffle of `ids`, first round(n·ratio) go to train.
    pub fn new(ids: &[String], ratio: f64, seed: u64) -> Self {
        let mut ids = ids.to_vec();
        ids.sort();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((ids.len() as f64) * ratio).round() as usize;
        let test = ids.split_off(n_train.min(ids.len()));
        Split { train: ids, test }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for id in &self.train {
            let _ = writeln!(s, "{id}\ttrain");
        }
        for id in &self.test {
            let _ = writeln!(s, "{id}\ttest");
        }
        s
    }
}

#[derive(Debug)]
pub struct Ingested {
    pub db: PoseDatabase,
    pub split: Split,
}

/// `<stem>_aligned/` next to the index.
pub fn aligned_dir(index: &Path) -> PathBuf {
    let stem = index.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    index.with_file_name(format!("{stem}_aligned"))
}

/// `<stem>_split.txt` next to the index.
pub fn split_path(index: &Path) -> PathBuf {
    let stem = index.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    index.with_file_name(format!("{stem}_split.txt"))
}

/// Scans `dir` for `<id>_iuv.png` files (with optional `<id>.png` images),
/// aligns each pair onto the canvas, writes the aligned copies and the index,
/// and splits the ids into train/test.
pub fn ingest(dir: &Path, index: &Path, direction: Direction, cfg: &PipelineConfig) -> Result<Ingested> {
    let layout = cfg.layout()?;
    let align_cfg = cfg.align();
    let found = scan(dir)?;

    let out_dir = aligned_dir(index);
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let aligned: Vec<(String, IuvMap, PathBuf, Option<PathBuf>)> = found
        .par_iter()
        .map(|(id, iuv_path)| {
            let pose = read_iuv(iuv_path)?;
            let image_src = iuv_path.with_file_name(format!("{id}.png"));
            let image = if image_src.exists() {
                Some(read_rgb(&image_src)?)
            } else {
                None
            };
            let img = image.clone().unwrap_or_else(|| RgbImage::new(pose.width(), pose.height()));
            let sample = align(&img, &pose, &layout, &align_cfg).map_err(|e| Error::format(iuv_path, e.to_string()))?;
            let out_iuv = out_dir.join(format!("{id}{IUV_SUFFIX}"));
            write_iuv(&out_iuv, &sample.pose)?;
            let out_img = match image {
                Some(_) => {
                    let p = out_dir.join(format!("{id}.png"));
                    write_rgb(&p, &sample.image)?;
                    Some(p)
                }
                None => None,
            };
            // the stored pose is the 8-bit quantized one; index what is on disk
            let stored = read_iuv(&out_iuv)?;
            Ok((id.clone(), stored, out_iuv, out_img))
        })
        .collect::<Result<_>>()?;

    finish(index, direction, cfg, aligned)
}

/// Like [`ingest`] for poses already on the canvas: files are indexed in
/// place, nothing is resampled.
pub fn index_aligned(dir: &Path, index: &Path, direction: Direction, cfg: &PipelineConfig) -> Result<Ingested> {
    let found = scan(dir)?;
    let loaded = found
        .par_iter()
        .map(|(id, iuv_path)| {
            let pose = read_iuv(iuv_path)?;
            let image = iuv_path.with_file_name(format!("{id}.png"));
            Ok((id.clone(), pose, iuv_path.clone(), image.exists().then_some(image)))
        })
        .collect::<Result<_>>()?;
    finish(index, direction, cfg, loaded)
}

/// `(id, path)` of every `<id>_iuv.png` in `dir`, sorted by id.
fn scan(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut found: Vec<(String, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?.to_string();
            let id = name.strip_suffix(IUV_SUFFIX)?.to_string();
            Some((id, p))
        })
        .collect();
    found.sort();
    Ok(found)
}

fn finish(
    index: &Path,
    direction: Direction,
    cfg: &PipelineConfig,
    poses: Vec<(String, IuvMap, PathBuf, Option<PathBuf>)>,
) -> Result<Ingested> {
    let canvas = cfg.align().canvas;
    let mut db = PoseDatabase::new(direction, cfg.torso_part, (canvas, canvas));
    for (id, pose, iuv, img) in poses {
        db.insert(id, &pose, iuv, img)?;
    }
    write_index(index, &db)?;
    let ids: Vec<String> = db.entries().iter().map(|e| e.id.clone()).collect();
    let split = Split::new(&ids, cfg.split_ratio, cfg.seed);
    Ok(Ingested { db, split })
}
