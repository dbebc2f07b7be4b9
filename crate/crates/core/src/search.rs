//! Two-step nearest pose retrieval over front-torso regions.
//!
//! Stage one ranks every database pose by the number of torso pixels whose
//! part labels disagree with the query (global shape and position). Stage two
//! reranks the best `k1` of those by the summed UV distance over pixels that
//! are torso in both poses (local surface agreement).

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::iuv::IuvMap;
use crate::raster::{check_same, BitMask};

pub const DEFAULT_TORSO_PART: u8 = 2;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_K1: usize = 40;

/// Front-torso pixel set R of a pose, kept as sorted linear pixel indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorsoMask {
    width: usize,
    height: usize,
    indices: Vec<u32>,
}

impl TorsoMask {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn to_mask(&self) -> BitMask {
        let mut m = BitMask::new(self.width, self.height);
        for &i in &self.indices {
            m.bits_mut()[i as usize] = true;
        }
        m
    }

    /// Keeps only the pixels also set in `mask`.
    pub fn restrict(&self, mask: &BitMask) -> Result<TorsoMask> {
        check_same(self.width, self.height, mask.width(), mask.height(), "mask")?;
        Ok(TorsoMask {
            width: self.width,
            height: self.height,
            indices: self
                .indices
                .iter()
                .copied()
                .filter(|&i| mask.bits()[i as usize])
                .collect(),
        })
    }
}

/// Pixels labelled `torso_part`. The head never carries that label, so it is
/// excluded automatically.
pub fn torso_mask(pose: &IuvMap, torso_part: u8) -> TorsoMask {
    let indices = pose
        .parts()
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p == torso_part)
        .map(|(i, _)| i as u32)
        .collect();
    TorsoMask {
        width: pose.width(),
        height: pose.height(),
        indices,
    }
}

/// Everything the distance kernel needs from one pose: full label plane plus
/// UV at the torso pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFeatures {
    width: usize,
    height: usize,
    labels: Vec<u8>,
    torso: Vec<u32>,
    torso_uv: Vec<[f32; 2]>,
}

impl PoseFeatures {
    pub fn new(pose: &IuvMap, mask: &TorsoMask) -> Result<Self> {
        check_same(pose.width(), pose.height(), mask.width, mask.height, "torso mask")?;
        let torso_uv = mask.indices.iter().map(|&i| pose.uvs()[i as usize]).collect();
        Ok(Self {
            width: pose.width(),
            height: pose.height(),
            labels: pose.parts().to_vec(),
            torso: mask.indices.clone(),
            torso_uv,
        })
    }

    pub fn from_pose(pose: &IuvMap, torso_part: u8) -> Self {
        Self::new(pose, &torso_mask(pose, torso_part)).expect("mask built from the same pose")
    }

    pub fn torso_len(&self) -> usize {
        self.torso.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distances {
    /// Label mismatches over R1 ∪ R2.
    pub d_index: u64,
    /// Summed UV distance over R1 ∩ R2.
    pub d_uv: f64,
    /// |R1 ∩ R2|.
    pub overlap: usize,
}

/// Both distances in one sorted merge over the two torso lists.
pub fn distances(a: &PoseFeatures, b: &PoseFeatures) -> Distances {
    debug_assert_eq!(a.dims(), b.dims());
    let (mut i, mut j) = (0, 0);
    let mut d_index = 0u64;
    let mut d_uv = 0.0f64;
    let mut overlap = 0usize;
    while i < a.torso.len() || j < b.torso.len() {
        let ia = a.torso.get(i).copied().unwrap_or(u32::MAX);
        let ib = b.torso.get(j).copied().unwrap_or(u32::MAX);
        let px = ia.min(ib) as usize;
        if a.labels[px] != b.labels[px] {
            d_index += 1;
        }
        if ia == ib {
            let ([ua, va], [ub, vb]) = (a.torso_uv[i], b.torso_uv[j]);
            let (du, dv) = (ua as f64 - ub as f64, va as f64 - vb as f64);
            d_uv += (du * du + dv * dv).sqrt();
            overlap += 1;
            i += 1;
            j += 1;
        } else if ia < ib {
            i += 1;
        } else {
            j += 1;
        }
    }
    Distances {
        d_index,
        d_uv,
        overlap,
    }
}

/// Σ over R1 ∪ R2 of [P1 label ≠ P2 label].
pub fn d_index(p1: &IuvMap, r1: &TorsoMask, p2: &IuvMap, r2: &TorsoMask) -> Result<u64> {
    Ok(pair(p1, r1, p2, r2)?.d_index)
}

/// Σ over R1 ∩ R2 of ‖P1 UV − P2 UV‖₂. Zero for an empty intersection.
pub fn d_uv(p1: &IuvMap, r1: &TorsoMask, p2: &IuvMap, r2: &TorsoMask) -> Result<f64> {
    Ok(pair(p1, r1, p2, r2)?.d_uv)
}

fn pair(p1: &IuvMap, r1: &TorsoMask, p2: &IuvMap, r2: &TorsoMask) -> Result<Distances> {
    check_same(p1.width(), p1.height(), p2.width(), p2.height(), "pose")?;
    Ok(distances(&PoseFeatures::new(p1, r1)?, &PoseFeatures::new(p2, r2)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Neutral,
    Selfie,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Neutral => "neutral",
            Direction::Selfie => "selfie",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neutral" => Ok(Direction::Neutral),
            "selfie" => Ok(Direction::Selfie),
            other => Err(Error::ConfigValue(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DbEntry {
    pub id: String,
    pub features: PoseFeatures,
    pub iuv_path: PathBuf,
    pub image_path: Option<PathBuf>,
}

/// Read-only collection of aligned poses. All entries share one canvas size.
#[derive(Debug, Clone)]
pub struct PoseDatabase {
    direction: Direction,
    torso_part: u8,
    canvas: (usize, usize),
    entries: Vec<DbEntry>,
    ids: HashSet<String>,
}

impl PoseDatabase {
    pub fn new(direction: Direction, torso_part: u8, canvas: (usize, usize)) -> Self {
        Self {
            direction,
            torso_part,
            canvas,
            entries: Vec::new(),
            ids: HashSet::new(),
        }
    }

    /// Adds an aligned pose.
    pub fn insert(
        &mut self,
        id: impl Into<String>,
        pose: &IuvMap,
        iuv_path: impl Into<PathBuf>,
        image_path: Option<PathBuf>,
    ) -> Result<()> {
        let id = id.into();
        check_same(self.canvas.0, self.canvas.1, pose.width(), pose.height(), "database pose")?;
        if self.ids.contains(&id) {
            return Err(Error::DuplicateId(id));
        }
        self.ids.insert(id.clone());
        self.entries.push(DbEntry {
            id,
            features: PoseFeatures::from_pose(pose, self.torso_part),
            iuv_path: iuv_path.into(),
            image_path,
        });
        Ok(())
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn torso_part(&self) -> u8 {
        self.torso_part
    }

    pub fn canvas(&self) -> (usize, usize) {
        self.canvas
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DbEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&DbEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub id: String,
    pub d_index: u64,
    pub d_uv: f64,
    pub overlap: usize,
}

impl Hit {
    /// Stage-two order: poses sharing no torso pixel with the query come
    /// last, then d_uv, then d_index, then id.
    pub fn rerank_cmp(&self, other: &Hit) -> Ordering {
        (self.overlap == 0)
            .cmp(&(other.overlap == 0))
            .then(self.d_uv.total_cmp(&other.d_uv))
            .then(self.d_index.cmp(&other.d_index))
            .then_with(|| self.id.cmp(&other.id))
    }

    pub fn coarse_cmp(&self, other: &Hit) -> Ordering {
        self.d_index
            .cmp(&other.d_index)
            .then_with(|| self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub hits: Vec<Hit>,
    pub k: usize,
}

impl SearchResult {
    /// One `id\td_index\td_uv` line per hit.
    pub fn to_ranks_text(&self) -> String {
        self.hits
            .iter()
            .map(|h| format!("{}\t{}\t{}\n", h.id, h.d_index, h.d_uv))
            .collect()
    }
}

/// Two-step top-k search. The query must be on the database canvas.
pub fn search(query: &IuvMap, db: &PoseDatabase, k: usize, k1: usize) -> Result<SearchResult> {
    let (w, h) = db.canvas();
    if query.width() != w || query.height() != h {
        return Err(Error::SearchParams(format!(
            "query is {}x{}, database canvas is {w}x{h}; align the query first",
            query.width(),
            query.height()
        )));
    }
    search_features(&PoseFeatures::from_pose(query, db.torso_part()), db, k, k1)
}

pub fn search_features(query: &PoseFeatures, db: &PoseDatabase, k: usize, k1: usize) -> Result<SearchResult> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if k == 0 || k > k1 {
        return Err(Error::SearchParams(format!("need 0 < k <= k1, got k={k}, k1={k1}")));
    }
    if query.dims() != db.canvas() {
        return Err(Error::SearchParams("query features do not match the database canvas".into()));
    }
    let mut hits: Vec<Hit> = db
        .entries()
        .par_iter()
        .map(|e| {
            let d = distances(query, &e.features);
            Hit {
                id: e.id.clone(),
                d_index: d.d_index,
                d_uv: d.d_uv,
                overlap: d.overlap,
            }
        })
        .collect();
    hits.sort_by(Hit::coarse_cmp);
    hits.truncate(k1);
    hits.sort_by(Hit::rerank_cmp);
    hits.truncate(k);
    Ok(SearchResult { hits, k })
}
