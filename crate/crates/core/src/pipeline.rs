//! End-to-end stages built from the individual modules: single-image
//! composition, the full selfie → neutral-pose run, and batch pair synthesis.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::align::{align, AlignedSample};
use crate::compose::{blend, body_mask, feather_alpha, fill_background, head_mask, make_background, HoleSpec};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::index::load_index;
use crate::inpaint::{inpaint_coords, render, Rendered};
use crate::io::{read_iuv, read_rgb, validity_path, write_coords, write_iuv, write_mask, write_rgb, write_scalar, write_texture};
use crate::iuv::IuvMap;
use crate::provenance::version_stamp;
use crate::raster::{check_same, BitMask, RgbImage, ScalarImage};
use crate::search::{search, Hit, PoseDatabase, SearchResult};
use crate::synth::{item_rng, pick_partner, synthesize_pair, Augment, SynthesizedPair};
use crate::warp::{i2uv, resize};

pub struct ComposeInputs<'a> {
    pub selfie: &'a RgbImage,
    pub selfie_pose: &'a IuvMap,
    /// Warped body and the pixels where it is defined.
    pub fg: &'a RgbImage,
    pub fg_mask: &'a BitMask,
    pub target_pose: &'a IuvMap,
    pub matte: Option<&'a ScalarImage>,
    /// Alignment mask M; nothing is masked when absent.
    pub invalid: Option<&'a BitMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub output: RgbImage,
    pub alpha: ScalarImage,
    pub holes: HoleSpec,
    pub head: BitMask,
    pub background: RgbImage,
    pub clamped: usize,
}

/// Head-preserving background, diffusion hole fill, feathered alpha from the
/// foreground mask (target head parts excluded), blend, then zero on M.
pub fn compose(inputs: &ComposeInputs<'_>, cfg: &PipelineConfig) -> Result<Composite> {
    let (w, h) = (inputs.selfie.width(), inputs.selfie.height());
    check_same(w, h, inputs.selfie_pose.width(), inputs.selfie_pose.height(), "selfie pose")?;
    check_same(w, h, inputs.target_pose.width(), inputs.target_pose.height(), "target pose")?;
    check_same(w, h, inputs.fg.width(), inputs.fg.height(), "foreground")?;
    let h_selfie = match inputs.matte {
        Some(m) => body_mask(None, Some(m), cfg.matte_threshold, cfg.body_dilation)?,
        None => body_mask(Some(inputs.selfie_pose), None, cfg.matte_threshold, cfg.body_dilation)?,
    };
    let h_neutral = body_mask(Some(inputs.target_pose), None, cfg.matte_threshold, cfg.body_dilation)?;
    let holes = HoleSpec::new(h_selfie, h_neutral, cfg.matte_threshold)?;
    let head = head_mask(inputs.selfie_pose, &cfg.head_parts, cfg.head_dilation);
    let bg = make_background(inputs.selfie, &holes.h_selfie, &head)?;
    let background = fill_background(&bg, &cfg.fill)?;
    let target_head = inputs.target_pose.mask_where(|p| cfg.head_parts.contains(&p));
    let fg_mask = inputs.fg_mask.difference(&target_head)?;
    let alpha = feather_alpha(&fg_mask, &head, cfg.feather)?;
    let none = BitMask::new(w, h);
    let blended = blend(inputs.fg, &alpha, &background, inputs.invalid.unwrap_or(&none))?;
    Ok(Composite {
        output: blended.image,
        alpha,
        holes,
        head,
        background,
        clamped: blended.clamped,
    })
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub hit: Hit,
    pub target_pose: IuvMap,
    pub rendered: Rendered,
    pub composite: Composite,
}

#[derive(Debug, Clone)]
pub struct UnselfieOutput {
    pub aligned: AlignedSample,
    pub ranking: SearchResult,
    pub candidates: Vec<Candidate>,
}

/// Align → retrieve `k` neutral poses → lift the selfie into the atlas →
/// complete coordinates → render into each retrieved pose → composite.
pub fn unselfie(selfie: &RgbImage, selfie_pose: &IuvMap, db: &PoseDatabase, k: usize, cfg: &PipelineConfig) -> Result<UnselfieOutput> {
    let layout = cfg.layout()?;
    let table = cfg.symmetry()?;
    let aligned = align(selfie, selfie_pose, &layout, &cfg.align())?;
    let ranking = search(&aligned.pose, db, k, cfg.k1.max(k))?;
    let (_, c_src) = i2uv(&aligned.image, &aligned.pose, &layout)?;
    let c_g1 = inpaint_coords(&c_src, &layout, &table, &cfg.inpaint)?;

    let candidates = ranking
        .hits
        .par_iter()
        .map(|hit| {
            let entry = db.get(&hit.id).expect("hit ids come from the database");
            let target_pose = read_iuv(&entry.iuv_path)?;
            let rendered = render(&c_g1, &aligned.image, &target_pose, &layout)?;
            let composite = compose(
                &ComposeInputs {
                    selfie: &aligned.image,
                    selfie_pose: &aligned.pose,
                    fg: &rendered.image,
                    fg_mask: &rendered.fg_mask,
                    target_pose: &target_pose,
                    matte: None,
                    invalid: Some(&aligned.invalid),
                },
                cfg,
            )?;
            Ok(Candidate {
                hit: hit.clone(),
                target_pose,
                rendered,
                composite,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UnselfieOutput {
        aligned,
        ranking,
        candidates,
    })
}

/// Writes `rank_NN.png` outputs plus the aligned input, M, the ranking and a
/// provenance record.
pub fn write_unselfie(out_dir: &Path, out: &UnselfieOutput, cfg: &PipelineConfig, inputs: &[(&str, &Path)]) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_rgb(&out_dir.join("aligned.png"), &out.aligned.image)?;
    write_iuv(&out_dir.join("aligned_iuv.png"), &out.aligned.pose)?;
    write_mask(&out_dir.join("invalid.png"), &out.aligned.invalid)?;
    let ranks = out_dir.join("ranks.txt");
    std::fs::write(&ranks, out.ranking.to_ranks_text()).map_err(|e| Error::io(&ranks, e))?;
    for (i, c) in out.candidates.iter().enumerate() {
        let n = i + 1;
        write_rgb(&out_dir.join(format!("rank_{n:02}.png")), &c.composite.output)?;
        write_rgb(&out_dir.join(format!("rank_{n:02}_warped.png")), &c.rendered.image)?;
        write_scalar(&out_dir.join(format!("rank_{n:02}_alpha.png")), &c.composite.alpha)?;
    }
    let mut stamp = version_stamp(cfg, inputs)?;
    for (i, c) in out.candidates.iter().enumerate() {
        stamp = stamp.with_note(format!("rank_{:02}", i + 1), c.hit.id.clone());
    }
    stamp.write_to_dir(out_dir)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub portrait_id: String,
    pub selfie_id: String,
    /// 1-based rank of the selfie among the portrait's retrieved candidates.
    pub rank: usize,
    pub flipped: bool,
}

impl PairRecord {
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}\t{}\n", self.portrait_id, self.selfie_id, self.rank, self.flipped)
    }
}

pub struct BatchOptions<'a> {
    pub flip: bool,
    pub bg_dir: Option<&'a Path>,
}

/// Synthesizes one training pair per portrait: search the selfie database
/// with the portrait pose, draw one of the top `k1` uniformly, warp.
pub fn synthesize_batch(
    portrait_index: &Path,
    selfie_index: &Path,
    out_dir: &Path,
    opts: &BatchOptions<'_>,
    cfg: &PipelineConfig,
) -> Result<Vec<PairRecord>> {
    let layout = cfg.layout()?;
    let table = cfg.symmetry()?;
    let portraits = load_index(portrait_index)?;
    let selfies = load_index(selfie_index)?;
    if selfies.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let canvas = portraits.canvas();
    let backgrounds = match opts.bg_dir {
        Some(dir) => load_backgrounds(dir, canvas)?,
        None => Vec::new(),
    };
    let augment = Augment {
        flip: opts.flip,
        backgrounds: &backgrounds,
        body_dilation: cfg.body_dilation,
    };
    let k1 = cfg.k1.min(selfies.len());

    let records = portraits
        .entries()
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let mut rng = item_rng(cfg.seed, i as u64);
            let image_path = entry
                .image_path
                .as_ref()
                .ok_or_else(|| Error::format(&entry.iuv_path, "portrait has no image"))?;
            let portrait = read_rgb(image_path)?;
            let portrait_pose = read_iuv(&entry.iuv_path)?;
            let ranked = search(&portrait_pose, &selfies, k1, k1)?;
            let ids: Vec<String> = ranked.hits.iter().map(|h| h.id.clone()).collect();
            let (rank, selfie_id) = pick_partner(&mut rng, &ids).expect("selfie database is nonempty");
            let selfie_entry = selfies.get(selfie_id).expect("hit ids come from the database");
            let selfie_pose = read_iuv(&selfie_entry.iuv_path)?;
            let pair = synthesize_pair(&mut rng, &portrait, &portrait_pose, &selfie_pose, &layout, &table, &augment)?;
            let record = PairRecord {
                portrait_id: entry.id.clone(),
                selfie_id: selfie_id.clone(),
                rank: rank + 1,
                flipped: pair.flipped,
            };
            let dir = out_dir.join(&entry.id);
            write_pair(&dir, &pair, &record)?;
            version_stamp(cfg, &[("portrait_image", image_path.as_path()), ("portrait_iuv", entry.iuv_path.as_path()), ("selfie_iuv", selfie_entry.iuv_path.as_path())])?
                .with_note("portrait", record.portrait_id.clone())
                .with_note("selfie", record.selfie_id.clone())
                .with_note("rank", record.rank.to_string())
                .with_note("flipped", record.flipped.to_string())
                .write_to_dir(&dir)?;
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;

    let listing: String = records.iter().map(PairRecord::to_line).collect();
    let path = out_dir.join("pairs.txt");
    std::fs::write(&path, listing).map_err(|e| Error::io(&path, e))?;
    version_stamp(cfg, &[("portrait_db", portrait_index), ("selfie_db", selfie_index)])?
        .with_note("pairs", records.len().to_string())
        .write_to_dir(out_dir)?;
    Ok(records)
}

pub fn write_pair(dir: &Path, pair: &SynthesizedPair, record: &PairRecord) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rgb(&dir.join("I_src.png"), &pair.selfie.image)?;
    write_mask(&dir.join("hole.png"), &pair.selfie.holes)?;
    let c = dir.join("C_src.bin");
    write_coords(&c, &validity_path(&c), &pair.uv.c_src)?;
    write_texture(&dir.join("T_src.png"), &dir.join("T_src_valid.png"), &pair.uv.t_src)?;
    write_texture(&dir.join("T_tgt.png"), &dir.join("T_tgt_valid.png"), &pair.uv.t_tgt)?;
    let path = dir.join("pair.txt");
    std::fs::write(&path, record.to_line()).map_err(|e| Error::io(&path, e))
}

fn load_backgrounds(dir: &Path, (w, h): (usize, usize)) -> Result<Vec<RgbImage>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(resize(&read_rgb(p)?, w, h))).collect()
}
