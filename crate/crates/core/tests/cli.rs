use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use unselfie_core::io::{read_iuv, read_rgb, write_iuv};
use unselfie_core::iuv::IuvMap;
use unselfie_core::provenance::Provenance;

const BIN: &str = env!("CARGO_BIN_EXE_unselfie");

fn cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn err(args: &[&str]) -> String {
    let out = cli(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new(neutral: usize, selfies: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let fx = root.join("fx");
        ok(&[
            "--seed", "5", "make-fixtures", "--out-dir", p(&fx), "--neutral", &neutral.to_string(), "--selfies",
            &selfies.to_string(),
        ]);
        Fixture { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn build(&self) -> (PathBuf, PathBuf) {
        let (n, s) = (self.path("neutral.idx"), self.path("selfie.idx"));
        ok(&["build-db", "--dir", p(&self.path("fx/neutral")), "--out", p(&n)]);
        ok(&["build-db", "--dir", p(&self.path("fx/selfie")), "--out", p(&s), "--direction", "selfie"]);
        (n, s)
    }
}

#[test]
fn build_db_writes_index_split_and_aligned_copies() {
    let fx = Fixture::new(10, 2);
    let (idx, _) = fx.build();
    let text = fs::read_to_string(&idx).unwrap();
    assert!(text.starts_with("# direction=neutral torso_part=2 canvas=256x256"));
    let records: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(records.len(), 10);
    let first: Vec<&str> = records[0].split('\t').collect();
    assert_eq!(first[0], "neutral_0000");
    assert_eq!(first[1], "neutral_aligned/neutral_0000_iuv.png");
    let aligned = read_iuv(&fx.path(first[1])).unwrap();
    assert_eq!((aligned.width(), aligned.height()), (256, 256));

    let split = fs::read_to_string(fx.path("neutral_split.txt")).unwrap();
    assert_eq!(split.lines().count(), 10);
    // default ratio 4114/4614 of 10 rounds to 9
    assert_eq!(split.lines().filter(|l| l.ends_with("\ttrain")).count(), 9);

    let cfg = fx.path("split.cfg");
    fs::write(&cfg, "split_ratio = 0.8\n").unwrap();
    ok(&["--config", p(&cfg), "ingest", "--dir", p(&fx.path("fx/neutral")), "--out", p(&fx.path("again.idx"))]);
    let split = fs::read_to_string(fx.path("again_split.txt")).unwrap();
    assert_eq!(split.lines().filter(|l| l.ends_with("\ttest")).count(), 2);
}

#[test]
fn corrupt_part_label_names_the_file() {
    let fx = Fixture::new(2, 0);
    let mut bad = IuvMap::new(4, 4);
    bad.set(1, 1, 2, [0.5, 0.5]).unwrap();
    let path = fx.path("fx/neutral/zz_iuv.png");
    write_iuv(&path, &bad).unwrap();
    let mut img = image::open(&path).unwrap().to_rgb8();
    img.get_pixel_mut(1, 1).0[0] = 25;
    img.save(&path).unwrap();
    let msg = err(&["build-db", "--dir", p(&fx.path("fx/neutral")), "--out", p(&fx.path("x.idx"))]);
    assert!(msg.contains("zz_iuv.png"), "{msg}");
    assert!(msg.contains("25"), "{msg}");
}

#[test]
fn search_ranks_and_rejects_unaligned_queries() {
    let fx = Fixture::new(12, 2);
    let (idx, _) = fx.build();
    let query = fx.path("neutral_aligned/neutral_0004_iuv.png");
    let out = ok(&["search", "--db", p(&idx), "--query", p(&query), "--k", "5", "--k1", "12"]);
    let lines: Vec<Vec<&str>> = out.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], ["neutral_0004", "0", "0"]);
    let duv: Vec<f64> = lines.iter().map(|l| l[2].parse().unwrap()).collect();
    assert!(duv.windows(2).all(|w| w[0] <= w[1]), "{duv:?}");

    let ranks = fx.path("ranks.txt");
    ok(&["search", "--db", p(&idx), "--query", p(&query), "--out", p(&ranks)]);
    assert_eq!(fs::read_to_string(&ranks).unwrap(), out);

    let raw = fx.path("fx/selfie/selfie_0000_iuv.png");
    let msg = err(&["search", "--db", p(&idx), "--query", p(&raw)]);
    assert!(msg.contains("align the query first"), "{msg}");
    let aligned = ok(&["search", "--db", p(&idx), "--query", p(&raw), "--align"]);
    assert_eq!(aligned.lines().count(), 5);

    let msg = err(&["search", "--db", p(&idx), "--query", p(&query), "--k", "6", "--k1", "5"]);
    assert!(msg.contains("k1"), "{msg}");
}

#[test]
fn align_writes_outputs_and_transform() {
    let fx = Fixture::new(1, 0);
    let out = fx.path("al");
    ok(&[
        "align", "--iuv", p(&fx.path("fx/neutral/neutral_0000_iuv.png")), "--img",
        p(&fx.path("fx/neutral/neutral_0000.png")), "--out-dir", p(&out),
    ]);
    let t: Vec<f64> = fs::read_to_string(out.join("transform.txt"))
        .unwrap()
        .split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(t.len(), 3);
    assert!(t[0] > 0.0);
    assert_eq!(read_rgb(&out.join("aligned.png")).unwrap().width(), 256);
    assert!(out.join("invalid.png").exists() && out.join("aligned_iuv.png").exists());
    let prov = Provenance::parse(&fs::read_to_string(out.join("provenance.txt")).unwrap()).unwrap();
    assert_eq!(prov.inputs.len(), 2);
}

#[test]
fn pair_synthesis_inpainting_and_losses() {
    let fx = Fixture::new(4, 6);
    let (n, s) = fx.build();
    let pairs = fx.path("pairs");
    ok(&["--seed", "9", "synthesize-pairs", "--portrait-db", p(&n), "--selfie-db", p(&s), "--out-dir", p(&pairs), "--flip"]);
    let listing = fs::read_to_string(pairs.join("pairs.txt")).unwrap();
    assert_eq!(listing.lines().count(), 4);
    let pair = pairs.join("neutral_0000");
    for f in ["I_src.png", "hole.png", "C_src.bin", "C_src_valid.png", "T_src.png", "T_tgt.png", "provenance.txt"] {
        assert!(pair.join(f).exists(), "{f}");
    }
    let prov = Provenance::parse(&fs::read_to_string(pair.join("provenance.txt")).unwrap()).unwrap();
    let keys: Vec<&str> = prov.notes.iter().map(|(k, _)| k.as_str()).collect();
    assert_eq!(keys, ["portrait", "selfie", "rank", "flipped"]);

    let again = fx.path("pairs2");
    ok(&["--seed", "9", "synthesize-pairs", "--portrait-db", p(&n), "--selfie-db", p(&s), "--out-dir", p(&again), "--flip"]);
    assert_eq!(fs::read_to_string(again.join("pairs.txt")).unwrap(), listing);
    assert_eq!(
        fs::read(again.join("neutral_0000/C_src.bin")).unwrap(),
        fs::read(pair.join("C_src.bin")).unwrap()
    );

    let line: Vec<&str> = listing.lines().next().unwrap().split('\t').collect();
    let selfie_pose = fx.path(&format!("selfie_aligned/{}_iuv.png", line[1]));
    let inp = fx.path("inp");
    ok(&[
        "inpaint-uv", "--coords", p(&pair.join("C_src.bin")), "--src", p(&pair.join("I_src.png")), "--pose",
        p(&selfie_pose), "--out-dir", p(&inp),
    ]);
    for f in ["C_G1.bin", "C_G1_valid.png", "T_G1.png", "E.bin", "I_G1.png", "fg_mask.png", "provenance.txt"] {
        assert!(inp.join(f).exists(), "{f}");
    }

    let losses = |extra: &[&str]| -> Vec<f64> {
        let mut args = vec!["eval-g1", "--pair-dir", p(&pair)];
        args.extend_from_slice(extra);
        let out = ok(&args);
        out.trim().split('\t').map(|v| v.parse().unwrap()).collect()
    };
    let l = losses(&[]);
    assert_eq!(l.len(), 3);
    assert_eq!(l[0], 0.0);
    assert!((l[2] - (l[1] + 10.0 * l[0])).abs() < 1e-12);
    let l2 = losses(&["--coords", p(&inp.join("C_G1.bin"))]);
    assert_eq!(l2[0], 0.0);
    let l3 = losses(&["--coords", p(&pair.join("C_src.bin"))]);
    assert_eq!(l3[0], 0.0);

    let out = fx.path("composed.png");
    let alpha = fx.path("alpha.png");
    ok(&[
        "compose", "--selfie", p(&pair.join("I_src.png")), "--iuv-in", p(&selfie_pose), "--fg",
        p(&inp.join("I_G1.png")), "--fg-mask", p(&inp.join("fg_mask.png")), "--target-iuv", p(&selfie_pose), "--out",
        p(&out), "--alpha-out", p(&alpha),
    ]);
    assert_eq!(read_rgb(&out).unwrap().width(), 256);
    let g2 = ok(&[
        "eval-g2", "--out", p(&out), "--target", p(&out), "--alpha", p(&alpha), "--holes", p(&pair.join("hole.png")),
    ]);
    let g2: Vec<f64> = g2.trim().split('\t').map(|v| v.parse().unwrap()).collect();
    assert_eq!(g2.len(), 3);
    assert_eq!(g2[0], 0.0);
}

#[test]
fn unselfie_writes_ranked_candidates() {
    let fx = Fixture::new(8, 1);
    let (n, _) = fx.build();
    let out = fx.path("run");
    ok(&[
        "unselfie", "--selfie", p(&fx.path("fx/selfie/selfie_0000.png")), "--iuv",
        p(&fx.path("fx/selfie/selfie_0000_iuv.png")), "--db", p(&n), "--k", "3", "--out-dir", p(&out),
    ]);
    let ranks = fs::read_to_string(out.join("ranks.txt")).unwrap();
    assert_eq!(ranks.lines().count(), 3);
    for r in 1..=3 {
        assert!(out.join(format!("rank_{r:02}.png")).exists());
        assert!(out.join(format!("rank_{r:02}_alpha.png")).exists());
    }
    assert!(!out.join("rank_04.png").exists());
    let prov = Provenance::parse(&fs::read_to_string(out.join("provenance.txt")).unwrap()).unwrap();
    let first_id = ranks.lines().next().unwrap().split('\t').next().unwrap();
    assert_eq!(prov.notes[0], ("rank_01".to_string(), first_id.to_string()));
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "k = 5\nbogus = 1\n").unwrap();
    let msg = err(&["--config", p(&cfg), "make-fixtures", "--out-dir", p(dir.path())]);
    assert!(msg.contains("line 2") && msg.contains("bogus"), "{msg}");
    fs::write(&cfg, "k = 6\nk1 = 5\n").unwrap();
    let msg = err(&["--config", p(&cfg), "make-fixtures", "--out-dir", p(dir.path())]);
    assert!(msg.contains("k1"), "{msg}");
    let msg = err(&["--threads", "0", "make-fixtures", "--out-dir", p(dir.path())]);
    assert!(msg.contains("threads"), "{msg}");
    let msg = err(&["unselfie", "--selfie", "/missing.png", "--iuv", "/missing_iuv.png", "--db", "/missing.idx", "--out-dir", p(dir.path())]);
    assert!(msg.contains("missing.idx"), "{msg}");
}
