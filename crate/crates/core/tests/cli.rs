mod common;

use std::path::Path;
use std::process::Command;

use common::*;
use covapix::cli::run_with;
use covapix::covapixel::read_covapix;
use covapix::fusion::{ci_fuse, Objective};
use covapix::imaging::{read_ppm, write_ppm};
use covapix::LabelMap;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("covapix").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert_eq!(o.code, 0, "covapix {}: {}", args.join(" "), o.stderr);
    o.stdout
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn setup(dir: &Path) -> String {
    let input = path(dir, "in.ppm");
    std::fs::write(&input, write_ppm(&synthetic_scene(64, 48)).unwrap()).unwrap();
    input
}

#[test]
fn slic_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = setup(d);
    let labels = path(d, "labels.bin");
    let seg = ok(&[
        "segment",
        "--input",
        &input,
        "--method",
        "slic",
        "--k",
        "30",
        "--labels-out",
        &labels,
    ]);
    let count: usize = seg
        .trim()
        .strip_prefix("region_count=")
        .unwrap()
        .parse()
        .unwrap();
    let map = LabelMap::from_bytes(&std::fs::read(&labels).unwrap()).unwrap();
    assert_eq!(map.region_count(), count);
    assert!(regions_are_connected(&map));

    let cp = path(d, "cp.json");
    ok(&[
        "extract", "--input", &input, "--labels", &labels, "--out", &cp,
    ]);
    let set = read_covapix::<f64>(&std::fs::read_to_string(&cp).unwrap()).unwrap();
    assert_eq!(set.covapixels.len(), count);
    assert_eq!((set.width, set.height), (64, 48));

    for mode in ["flat", "ellipse", "boundary"] {
        let out = path(d, &format!("{mode}.ppm"));
        ok(&[
            "render", "--in", &cp, "--labels", &labels, "--mode", mode, "--out", &out,
        ]);
        let img = read_ppm::<f64>(&std::fs::read(&out).unwrap()).unwrap();
        assert_eq!(img.dims(), (64, 48));
    }
    let bare = path(d, "bare.ppm");
    ok(&[
        "render", "--in", &cp, "--mode", "ellipse", "--nsigma", "1.5", "--out", &bare,
    ]);

    let stats = ok(&[
        "stats",
        "--original",
        &input,
        "--recon",
        &path(d, "flat.ppm"),
        "--labels",
        &labels,
    ]);
    let fields: Vec<&str> = stats
        .split_whitespace()
        .map(|kv| kv.split('=').next().unwrap())
        .collect();
    assert_eq!(
        fields,
        ["mse", "psnr_db", "boundary_px", "boundary_per_region"]
    );
}

#[test]
fn fuse_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = setup(d);
    let labels = path(d, "labels.bin");
    ok(&[
        "segment",
        "--input",
        &input,
        "--method",
        "grid",
        "--tile",
        "16x16",
        "--labels-out",
        &labels,
    ]);
    let cp = path(d, "cp.json");
    ok(&[
        "extract",
        "--input",
        &input,
        "--labels",
        &labels,
        "--features",
        "xy_rgb",
        "--out",
        &cp,
    ]);
    let fused = path(d, "fused.json");
    let printed = ok(&[
        "fuse", "--op", "ci", "--ids", "5,2", "--in", &cp, "--out", &fused,
    ]);

    let before = read_covapix::<f64>(&std::fs::read_to_string(&cp).unwrap()).unwrap();
    let after = read_covapix::<f64>(&std::fs::read_to_string(&fused).unwrap()).unwrap();
    let want = ci_fuse(
        &before.covapixels[5].est,
        &before.covapixels[2].est,
        Objective::LogDet,
    )
    .unwrap();
    assert_eq!(printed.trim(), format!("aux={}", want.aux));
    assert_eq!(after.covapixels.len(), before.covapixels.len() - 1);
    let merged = after.covapixels.iter().find(|c| c.id == 2).unwrap();
    assert!(after.covapixels.iter().all(|c| c.id != 5));
    assert_eq!(merged.n, before.covapixels[5].n + before.covapixels[2].n);
    assert_eq!(merged.est.mu, want.estimate.mu);
    assert!(rel_err(&merged.est.cov.to_dense(), &want.estimate.cov.to_dense()) <= 1e-12);

    let default_op = path(d, "default.json");
    assert_eq!(ok(&["fuse", "--ids", "5,2", "--in", &cp, "--out", &default_op]), printed);
    assert_eq!(std::fs::read(&default_op).unwrap(), std::fs::read(&fused).unwrap());

    for op in ["kf", "cu", "ca"] {
        ok(&[
            "fuse",
            "--op",
            op,
            "--objective",
            "trace",
            "--ids",
            "0,1,3",
            "--in",
            &cp,
            "--out",
            &path(d, "x.json"),
        ]);
    }
    let dup = run(&[
        "fuse", "--op", "ci", "--ids", "1,1", "--in", &cp, "--out", &fused,
    ]);
    assert_eq!(dup.code, 1);
    let missing = run(&[
        "fuse", "--op", "ci", "--ids", "1,999", "--in", &cp, "--out", &fused,
    ]);
    assert_eq!(missing.code, 1);
    assert!(missing.stderr.contains("999"));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = setup(d);
    let mut outputs = Vec::new();
    for round in 0..2 {
        let labels = path(d, &format!("l{round}.bin"));
        let cp = path(d, &format!("c{round}.json"));
        let img = path(d, &format!("r{round}.ppm"));
        ok(&[
            "segment",
            "--input",
            &input,
            "--method",
            "slic",
            "--k",
            "20",
            "--labels-out",
            &labels,
        ]);
        ok(&[
            "extract", "--input", &input, "--labels", &labels, "--out", &cp,
        ]);
        ok(&[
            "render", "--in", &cp, "--labels", &labels, "--mode", "ellipse", "--out", &img,
        ]);
        outputs.push([labels, cp, img].map(|p| std::fs::read(p).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = setup(d);
    let labels = path(d, "labels.bin");

    assert_eq!(run(&[]).code, 2);
    assert_eq!(run(&["segment", "--input", &input]).code, 2);
    assert_eq!(
        run(&[
            "segment",
            "--input",
            &input,
            "--method",
            "voronoi",
            "--labels-out",
            &labels
        ])
        .code,
        2
    );
    assert_eq!(
        run(&[
            "segment",
            "--input",
            &input,
            "--method",
            "grid",
            "--labels-out",
            &labels
        ])
        .code,
        2
    );
    assert_eq!(
        run(&[
            "segment",
            "--input",
            &input,
            "--method",
            "slic",
            "--labels-out",
            &labels
        ])
        .code,
        2
    );
    assert_eq!(
        run(&[
            "segment",
            "--input",
            &input,
            "--method",
            "grid",
            "--tile",
            "8",
            "--labels-out",
            &labels
        ])
        .code,
        2
    );

    let missing = run(&[
        "segment",
        "--input",
        &path(d, "nope.ppm"),
        "--method",
        "grid",
        "--tile",
        "8x8",
        "--labels-out",
        &labels,
    ]);
    assert_eq!(missing.code, 1);
    assert!(!missing.stderr.is_empty());

    std::fs::write(path(d, "bad.ppm"), b"P6\n4 4\n").unwrap();
    let bad = run(&[
        "segment",
        "--input",
        &path(d, "bad.ppm"),
        "--method",
        "grid",
        "--tile",
        "2x2",
        "--labels-out",
        &labels,
    ]);
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.contains("imaging"));

    let too_many = run(&[
        "segment",
        "--input",
        &input,
        "--method",
        "slic",
        "--k",
        "100000",
        "--labels-out",
        &labels,
    ]);
    assert_eq!(too_many.code, 1);
    assert!(too_many.stderr.contains("segmentation"));

    ok(&[
        "segment",
        "--input",
        &input,
        "--method",
        "grid",
        "--tile",
        "8x8",
        "--labels-out",
        &labels,
    ]);
    let cp = path(d, "cp.json");
    assert_eq!(
        run(&[
            "extract",
            "--input",
            &input,
            "--labels",
            &labels,
            "--features",
            "xyz",
            "--out",
            &cp
        ])
        .code,
        2
    );
    ok(&[
        "extract", "--input", &input, "--labels", &labels, "--out", &cp,
    ]);
    assert_eq!(
        run(&[
            "render",
            "--in",
            &cp,
            "--mode",
            "flat",
            "--out",
            &path(d, "f.ppm")
        ])
        .code,
        2
    );
    assert_eq!(
        run(&["fuse", "--op", "ci", "--in", &cp, "--out", &cp]).code,
        2
    );

    let other = path(d, "other.bin");
    ok(&[
        "segment",
        "--input",
        &input,
        "--method",
        "grid",
        "--tile",
        "4x4",
        "--labels-out",
        &other,
    ]);
    assert_eq!(
        run(&[
            "render",
            "--in",
            &cp,
            "--labels",
            &path(d, "nope.bin"),
            "--mode",
            "flat",
            "--out",
            &path(d, "f.ppm")
        ])
        .code,
        1
    );
    assert_eq!(
        run(&[
            "render",
            "--in",
            &cp,
            "--labels",
            &other,
            "--mode",
            "flat",
            "--out",
            &path(d, "f.ppm")
        ])
        .code,
        1
    );
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = setup(dir.path());
    let bin = env!("CARGO_BIN_EXE_covapix");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(2));
    let labels = path(dir.path(), "l.bin");
    assert_eq!(
        code(&[
            "segment",
            "--input",
            &input,
            "--method",
            "grid",
            "--tile",
            "8x8",
            "--labels-out",
            &labels
        ]),
        Some(0)
    );
    assert_eq!(
        code(&[
            "stats",
            "--original",
            &input,
            "--recon",
            &path(dir.path(), "nope.ppm"),
            "--labels",
            &labels
        ]),
        Some(1)
    );
}
