use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use unselfie_core::align::align;
use unselfie_core::config::PipelineConfig;
use unselfie_core::index::{index_aligned, ingest, load_index, split_path, Ingested, IUV_SUFFIX};
use unselfie_core::inpaint::{g1_losses, inpaint_coords, render};
use unselfie_core::io::{
    read_coords, read_iuv, read_mask, read_rgb, read_scalar, read_texture, validity_path, write_coords, write_iuv,
    write_mask, write_rgb, write_scalar, write_texture,
};
use unselfie_core::pipeline::{compose, synthesize_batch, unselfie, write_unselfie, BatchOptions, ComposeInputs};
use unselfie_core::provenance::version_stamp;
use unselfie_core::raster::RgbImage;
use unselfie_core::search::{search, Direction};
use unselfie_core::synthetic::random_sample;
use unselfie_core::warp::bilinear_sample;
use unselfie_core::{compose::g2_losses, Error, Result};

#[derive(Parser)]
#[command(name = "unselfie", version, about = "Selfie to neutral-pose portrait toolkit")]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Shoulder-anchored similarity alignment onto the canvas
    Align {
        #[arg(long)]
        iuv: PathBuf,
        #[arg(long)]
        img: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Align every <id>_iuv.png (+ <id>.png) in a directory and index it
    BuildDb(DbArgs),
    /// Same as build-db
    Ingest(DbArgs),
    /// Two-step nearest pose search
    Search {
        #[arg(long)]
        db: PathBuf,
        /// IUV png of the query pose
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        k1: Option<usize>,
        /// Align the query before searching
        #[arg(long)]
        align: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Warp portraits into retrieved selfie poses to build training pairs
    SynthesizePairs {
        #[arg(long)]
        portrait_db: PathBuf,
        #[arg(long)]
        selfie_db: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        flip: bool,
        #[arg(long)]
        bg_dir: Option<PathBuf>,
    },
    /// Complete a coordinate map and render it through a pose
    InpaintUv {
        /// C.bin; validity is read from C_valid.png
        #[arg(long)]
        coords: PathBuf,
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        pose: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Coordinate-inpainting losses on a synthesized pair directory
    EvalG1 {
        /// Directory written by synthesize-pairs for one portrait
        #[arg(long)]
        pair_dir: PathBuf,
        /// Completed coordinates to score; default inpaints C_src
        #[arg(long)]
        coords: Option<PathBuf>,
    },
    /// Composition losses
    EvalG2 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        holes: PathBuf,
    },
    /// Blend a warped body over the filled selfie background
    Compose {
        #[arg(long)]
        selfie: PathBuf,
        #[arg(long)]
        iuv_in: PathBuf,
        #[arg(long)]
        fg: PathBuf,
        #[arg(long)]
        fg_mask: PathBuf,
        #[arg(long)]
        target_iuv: PathBuf,
        #[arg(long)]
        matte: Option<PathBuf>,
        /// Alignment mask M to zero
        #[arg(long)]
        invalid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the alpha map
        #[arg(long)]
        alpha_out: Option<PathBuf>,
    },
    /// Full run: align, retrieve, warp, inpaint, compose
    Unselfie {
        #[arg(long)]
        selfie: PathBuf,
        #[arg(long)]
        iuv: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write procedurally generated bodies for trying the pipeline
    MakeFixtures {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        neutral: usize,
        #[arg(long, default_value_t = 20)]
        selfies: usize,
    },
}

#[derive(Args)]
struct DbArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "neutral")]
    direction: Direction,
    /// Index poses as they are; they must already be canvas-sized
    #[arg(long)]
    no_align: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::ConfigValue("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::ConfigValue(e.to_string()))?;
    }
    let layout = cfg.layout()?;

    match cli.cmd {
        Cmd::Align { iuv, img, out_dir } => {
            let sample = align(&read_rgb(&img)?, &read_iuv(&iuv)?, &layout, &cfg.align())?;
            mkdir(&out_dir)?;
            write_rgb(&out_dir.join("aligned.png"), &sample.image)?;
            write_iuv(&out_dir.join("aligned_iuv.png"), &sample.pose)?;
            write_mask(&out_dir.join("invalid.png"), &sample.invalid)?;
            let t = sample.transform;
            write_text(
                &out_dir.join("transform.txt"),
                &format!("{} {} {}\n", t.scale, t.translation[0], t.translation[1]),
            )?;
            version_stamp(&cfg, &[("iuv", &iuv), ("img", &img)])?.write_to_dir(&out_dir)
        }
        Cmd::BuildDb(a) | Cmd::Ingest(a) => {
            let Ingested { db, split } = if a.no_align {
                index_aligned(&a.dir, &a.out, a.direction, &cfg)?
            } else {
                ingest(&a.dir, &a.out, a.direction, &cfg)?
            };
            write_text(&split_path(&a.out), &split.to_text())?;
            info!("indexed {} poses ({} train / {} test)", db.len(), split.train.len(), split.test.len());
            Ok(())
        }
        Cmd::Search {
            db,
            query,
            k,
            k1,
            align: do_align,
            out,
        } => {
            let db = load_index(&db)?;
            let mut pose = read_iuv(&query)?;
            if do_align {
                let blank = RgbImage::new(pose.width(), pose.height());
                pose = align(&blank, &pose, &layout, &cfg.align())?.pose;
            }
            let result = search(&pose, &db, k.unwrap_or(cfg.k), k1.unwrap_or(cfg.k1))?;
            let text = result.to_ranks_text();
            match out {
                Some(p) => write_text(&p, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Cmd::SynthesizePairs {
            portrait_db,
            selfie_db,
            out_dir,
            flip,
            bg_dir,
        } => {
            mkdir(&out_dir)?;
            let opts = BatchOptions {
                flip,
                bg_dir: bg_dir.as_deref(),
            };
            let records = synthesize_batch(&portrait_db, &selfie_db, &out_dir, &opts, &cfg)?;
            info!("wrote {} pairs", records.len());
            Ok(())
        }
        Cmd::InpaintUv {
            coords,
            src,
            pose,
            out_dir,
        } => {
            let c_src = read_coords(&coords, &validity_path(&coords))?;
            let image = read_rgb(&src)?;
            let target = read_iuv(&pose)?;
            let c_g1 = inpaint_coords(&c_src, &layout, &cfg.symmetry()?, &cfg.inpaint)?;
            let r = render(&c_g1, &image, &target, &layout)?;
            mkdir(&out_dir)?;
            let c = out_dir.join("C_G1.bin");
            write_coords(&c, &validity_path(&c), &c_g1)?;
            write_texture(&out_dir.join("T_G1.png"), &out_dir.join("T_G1_valid.png"), &r.texture)?;
            let e = out_dir.join("E.bin");
            write_coords(&e, &validity_path(&e), &r.warp)?;
            write_rgb(&out_dir.join("I_G1.png"), &r.image)?;
            write_mask(&out_dir.join("fg_mask.png"), &r.fg_mask)?;
            version_stamp(&cfg, &[("coords", &coords), ("src", &src), ("pose", &pose)])?.write_to_dir(&out_dir)
        }
        Cmd::EvalG1 { pair_dir, coords } => {
            let c_path = pair_dir.join("C_src.bin");
            let c_src = read_coords(&c_path, &validity_path(&c_path))?;
            let c_g1 = match coords {
                Some(p) => read_coords(&p, &validity_path(&p))?,
                None => inpaint_coords(&c_src, &layout, &cfg.symmetry()?, &cfg.inpaint)?,
            };
            let image = read_rgb(&pair_dir.join("I_src.png"))?;
            let t_g1 = bilinear_sample(&image, &c_g1)?;
            let t_tgt = read_texture(&pair_dir.join("T_tgt.png"), &pair_dir.join("T_tgt_valid.png"))?;
            let v_src = c_src.valid().clone();
            let v_tgt = t_tgt.valid().clone();
            let l = g1_losses(&c_g1, &c_src, &t_g1, &t_tgt, &v_src, &v_tgt, &cfg.loss, cfg.align().canvas)?;
            if l.empty_src || l.empty_tgt {
                warn!("empty mask: V_src empty = {}, V_tgt empty = {}", l.empty_src, l.empty_tgt);
            }
            if l.skipped > 0 {
                warn!("{} mask cells skipped (operand invalid)", l.skipped);
            }
            println!("{}\t{}\t{}", l.identity, l.reconstruction, l.combined);
            Ok(())
        }
        Cmd::EvalG2 {
            out,
            target,
            alpha,
            holes,
        } => {
            let l = g2_losses(
                &read_rgb(&out)?,
                &read_rgb(&target)?,
                &read_scalar(&alpha)?,
                &read_mask(&holes)?,
                &cfg.loss,
            )?;
            println!("{}\t{}\t{}", l.reconstruction, l.alpha, l.combined);
            Ok(())
        }
        Cmd::Compose {
            selfie,
            iuv_in,
            fg,
            fg_mask,
            target_iuv,
            matte,
            invalid,
            out,
            alpha_out,
        } => {
            let selfie_img = read_rgb(&selfie)?;
            let selfie_pose = read_iuv(&iuv_in)?;
            let fg_img = read_rgb(&fg)?;
            let fg_m = read_mask(&fg_mask)?;
            let target_pose = read_iuv(&target_iuv)?;
            let matte = matte.as_deref().map(read_scalar).transpose()?;
            let invalid = invalid.as_deref().map(read_mask).transpose()?;
            let c = compose(
                &ComposeInputs {
                    selfie: &selfie_img,
                    selfie_pose: &selfie_pose,
                    fg: &fg_img,
                    fg_mask: &fg_m,
                    target_pose: &target_pose,
                    matte: matte.as_ref(),
                    invalid: invalid.as_ref(),
                },
                &cfg,
            )?;
            if c.clamped > 0 {
                warn!("{} output values clamped to [0, 1]", c.clamped);
            }
            write_rgb(&out, &c.output)?;
            if let Some(p) = alpha_out {
                write_scalar(&p, &c.alpha)?;
            }
            Ok(())
        }
        Cmd::Unselfie {
            selfie,
            iuv,
            db: db_path,
            k,
            out_dir,
        } => {
            let db = load_index(&db_path)?;
            let out = unselfie(&read_rgb(&selfie)?, &read_iuv(&iuv)?, &db, k.unwrap_or(cfg.k), &cfg)?;
            for (i, c) in out.candidates.iter().enumerate() {
                if c.composite.clamped > 0 {
                    warn!("rank {}: {} output values clamped", i + 1, c.composite.clamped);
                }
            }
            write_unselfie(&out_dir, &out, &cfg, &[("selfie", &selfie), ("iuv", &iuv), ("db", &db_path)])
        }
        Cmd::MakeFixtures {
            out_dir,
            neutral,
            selfies,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            for (sub, n, selfie) in [("neutral", neutral, false), ("selfie", selfies, true)] {
                let dir = out_dir.join(sub);
                mkdir(&dir)?;
                for i in 0..n {
                    let (pose, img) = random_sample(&mut rng, selfie);
                    let id = format!("{sub}_{i:04}");
                    write_iuv(&dir.join(format!("{id}{IUV_SUFFIX}")), &pose)?;
                    write_rgb(&dir.join(format!("{id}.png")), &img)?;
                }
            }
            Ok(())
        }
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
