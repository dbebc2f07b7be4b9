//! Pipeline configuration in a flat `key = value` text format.
//!
//! Blank lines and `#` comments are ignored; unknown or repeated keys are
//! errors. Every key is optional.

use std::fmt::Write as _;
use std::path::Path;

use crate::align::AlignConfig;
use crate::atlas::AtlasLayout;
use crate::compose::{FillConfig, DEFAULT_BODY_DILATION, DEFAULT_FEATHER, DEFAULT_HEAD_DILATION, DEFAULT_HEAD_PARTS, DEFAULT_MATTE_THRESHOLD};
use crate::error::{Error, Result};
use crate::inpaint::{InpaintConfig, LossConfig, SymmetryTable};
use crate::iuv::MAX_PART;
use crate::search::{DEFAULT_K, DEFAULT_K1, DEFAULT_TORSO_PART};

/// Default train fraction: 4114 training images out of 4614.
pub const DEFAULT_SPLIT_RATIO: f64 = 4114.0 / 4614.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub atlas_size: usize,
    pub atlas_rows: usize,
    pub atlas_cols: usize,
    pub torso_part: u8,
    pub head_parts: Vec<u8>,
    pub symmetry_pairs: Vec<(u8, u8)>,
    pub shoulder_left: (usize, usize),
    pub shoulder_right: (usize, usize),
    pub shoulder_radius: usize,
    pub k: usize,
    pub k1: usize,
    pub loss: LossConfig,
    pub body_dilation: usize,
    pub head_dilation: usize,
    pub feather: usize,
    pub matte_threshold: f32,
    pub inpaint: InpaintConfig,
    pub fill: FillConfig,
    pub seed: u64,
    pub split_ratio: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let align = AlignConfig::default();
        Self {
            atlas_size: 256,
            atlas_rows: 5,
            atlas_cols: 5,
            torso_part: DEFAULT_TORSO_PART,
            head_parts: DEFAULT_HEAD_PARTS.to_vec(),
            symmetry_pairs: default_pairs(),
            shoulder_left: align.anchor_left,
            shoulder_right: align.anchor_right,
            shoulder_radius: align.search_radius,
            k: DEFAULT_K,
            k1: DEFAULT_K1,
            loss: LossConfig::default(),
            body_dilation: DEFAULT_BODY_DILATION,
            head_dilation: DEFAULT_HEAD_DILATION,
            feather: DEFAULT_FEATHER,
            matte_threshold: DEFAULT_MATTE_THRESHOLD,
            inpaint: InpaintConfig::default(),
            fill: FillConfig::default(),
            seed: 0,
            split_ratio: DEFAULT_SPLIT_RATIO,
        }
    }
}

fn default_pairs() -> Vec<(u8, u8)> {
    let t = SymmetryTable::default();
    (1..=MAX_PART)
        .filter(|&p| t.mirror(p) >= p)
        .map(|p| (p, t.mirror(p)))
        .collect()
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected key = value, found {content:?}"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key {key:?}"),
                });
            }
            cfg.set(key, value).map_err(|msg| Error::Config { line, msg })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "atlas_size" => self.atlas_size = num(value)?,
            "atlas_rows" => self.atlas_rows = num(value)?,
            "atlas_cols" => self.atlas_cols = num(value)?,
            "torso_part" => self.torso_part = num(value)?,
            "head_parts" => self.head_parts = list(value)?,
            "symmetry_pairs" => self.symmetry_pairs = pairs(value, ':')?,
            "shoulder_left" => self.shoulder_left = pair(value, ',')?,
            "shoulder_right" => self.shoulder_right = pair(value, ',')?,
            "shoulder_radius" => self.shoulder_radius = num(value)?,
            "k" => self.k = num(value)?,
            "k1" => self.k1 = num(value)?,
            "lambda1" => self.loss.lambda1 = num(value)?,
            "lambda2" => self.loss.lambda2 = num(value)?,
            "lambda3" => self.loss.lambda3 = num(value)?,
            "lambda4" => self.loss.lambda4 = num(value)?,
            "lambda5" => self.loss.lambda5 = num(value)?,
            "body_dilation" => self.body_dilation = num(value)?,
            "head_dilation" => self.head_dilation = num(value)?,
            "feather" => self.feather = num(value)?,
            "matte_threshold" => self.matte_threshold = num(value)?,
            "inpaint_tolerance" => self.inpaint.tolerance = num(value)?,
            "inpaint_iter_factor" => self.inpaint.max_iter_factor = num(value)?,
            "fill_tolerance" => self.fill.tolerance = num(value)?,
            "fill_iter_factor" => self.fill.max_iter_factor = num(value)?,
            "seed" => self.seed = num(value)?,
            "split_ratio" => self.split_ratio = num(value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigValue(m));
        self.layout()?;
        self.symmetry()?;
        self.loss.validate()?;
        if self.k == 0 || self.k1 < self.k {
            return bad(format!("need 0 < k <= k1, got k={}, k1={}", self.k, self.k1));
        }
        if !(1..=MAX_PART).contains(&self.torso_part) {
            return bad(format!("torso_part {} outside 1..=24", self.torso_part));
        }
        if let Some(p) = self.head_parts.iter().find(|p| !(1..=MAX_PART).contains(*p)) {
            return bad(format!("head part {p} outside 1..=24"));
        }
        if !(0.0..=1.0).contains(&self.split_ratio) {
            return bad(format!("split_ratio {} outside [0, 1]", self.split_ratio));
        }
        if !(0.0..=1.0).contains(&self.matte_threshold) {
            return bad(format!("matte_threshold {} outside [0, 1]", self.matte_threshold));
        }
        if !(self.inpaint.tolerance > 0.0 && self.fill.tolerance > 0.0) {
            return bad("diffusion tolerances must be positive".into());
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<AtlasLayout> {
        AtlasLayout::new(self.atlas_size, self.atlas_rows, self.atlas_cols)
    }

    pub fn symmetry(&self) -> Result<SymmetryTable> {
        SymmetryTable::from_pairs(&self.symmetry_pairs)
    }

    pub fn align(&self) -> AlignConfig {
        AlignConfig {
            anchor_left: self.shoulder_left,
            anchor_right: self.shoulder_right,
            torso_part: self.torso_part,
            search_radius: self.shoulder_radius,
            ..AlignConfig::default()
        }
    }

    /// Every field in a fixed order and format; the basis of the config hash.
    pub fn to_canonical_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[u8]| v.iter().map(u8::to_string).collect::<Vec<_>>().join(",");
        let pairs = self
            .symmetry_pairs
            .iter()
            .map(|(a, b)| format!("{a}:{b}"))
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(s, "atlas_size = {}", self.atlas_size);
        let _ = writeln!(s, "atlas_rows = {}", self.atlas_rows);
        let _ = writeln!(s, "atlas_cols = {}", self.atlas_cols);
        let _ = writeln!(s, "torso_part = {}", self.torso_part);
        let _ = writeln!(s, "head_parts = {}", join(&self.head_parts));
        let _ = writeln!(s, "symmetry_pairs = {pairs}");
        let _ = writeln!(s, "shoulder_left = {},{}", self.shoulder_left.0, self.shoulder_left.1);
        let _ = writeln!(s, "shoulder_right = {},{}", self.shoulder_right.0, self.shoulder_right.1);
        let _ = writeln!(s, "shoulder_radius = {}", self.shoulder_radius);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "k1 = {}", self.k1);
        let _ = writeln!(s, "lambda1 = {:?}", self.loss.lambda1);
        let _ = writeln!(s, "lambda2 = {:?}", self.loss.lambda2);
        let _ = writeln!(s, "lambda3 = {:?}", self.loss.lambda3);
        let _ = writeln!(s, "lambda4 = {:?}", self.loss.lambda4);
        let _ = writeln!(s, "lambda5 = {:?}", self.loss.lambda5);
        let _ = writeln!(s, "body_dilation = {}", self.body_dilation);
        let _ = writeln!(s, "head_dilation = {}", self.head_dilation);
        let _ = writeln!(s, "feather = {}", self.feather);
        let _ = writeln!(s, "matte_threshold = {:?}", self.matte_threshold);
        let _ = writeln!(s, "inpaint_tolerance = {:?}", self.inpaint.tolerance);
        let _ = writeln!(s, "inpaint_iter_factor = {}", self.inpaint.max_iter_factor);
        let _ = writeln!(s, "fill_tolerance = {:?}", self.fill.tolerance);
        let _ = writeln!(s, "fill_iter_factor = {}", self.fill.max_iter_factor);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "split_ratio = {:?}", self.split_ratio);
        s
    }
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn list(v: &str) -> std::result::Result<Vec<u8>, String> {
    v.split(',').map(|s| num(s.trim())).collect()
}

fn pair<T: std::str::FromStr>(v: &str, sep: char) -> std::result::Result<(T, T), String> {
    let (a, b) = v.split_once(sep).ok_or_else(|| format!("expected a{sep}b, found {v:?}"))?;
    Ok((num(a.trim())?, num(b.trim())?))
}

fn pairs(v: &str, sep: char) -> std::result::Result<Vec<(u8, u8)>, String> {
    v.split(',').map(|p| pair(p.trim(), sep)).collect()
}
