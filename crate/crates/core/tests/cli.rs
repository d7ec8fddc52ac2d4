use std::path::Path;
use std::process::{Command, Output};

use dtc_core::raychan::CsiMatrix;
use dtc_core::scene::{Cuboid, GridSpec, Scene};
use dtc_core::sensing::DynamicObjects;

fn dtc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_scene(dir: &Path) -> std::path::PathBuf {
    let scene = Scene::centered(
        GridSpec::default(),
        2.0,
        vec![
            Cuboid::new(2.0, 2.0, 1.5, 2.0, 4.0).unwrap(),
            Cuboid::new(8.0, 3.0, 2.0, 1.0, 3.0).unwrap(),
        ],
    )
    .unwrap();
    let path = dir.join("scene.json");
    scene.save(&path).unwrap();
    path
}

#[test]
fn gen_scene_and_features_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("gen.json");
    let out = dtc(&["gen-scene", "--seed", "5", "--out", p(&scene)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Scene::load(&scene).is_ok());

    let feats = dir.path().join("features");
    let out = dtc(&[
        "features",
        "--scene",
        p(&scene),
        "--ut",
        "1.05,1.05,1",
        "--out",
        p(&feats),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(feats.join("features.json").exists());
}

#[test]
fn synth_reconstruct_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let d = |n: &str| dir.path().join(n);
    let out = dtc(&[
        "synth",
        "--scene",
        p(&scene),
        "--ut",
        "10.05,10.05,1",
        "--out",
        p(&d("h.dtcc")),
        "--pilot",
        "random:0.5,3",
        "--pilot-out",
        p(&d("h0.dtcc")),
        "--mask-out",
        p(&d("mask.dtcb")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = dtc(&[
        "reconstruct",
        "--pilot-csi",
        p(&d("h0.dtcc")),
        "--mask",
        p(&d("mask.dtcb")),
        "--out",
        p(&d("rec.dtcc")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(CsiMatrix::load(d("rec.dtcc")).unwrap().dim(), (64, 96));

    let out = dtc(&["eval", "--pred", p(&d("rec.dtcc")), "--truth", p(&d("h.dtcc"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("nmse"));
}

#[test]
fn pipeline_writes_artifacts_and_profile_reports() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let objects = dir.path().join("objects.json");
    let dynamic = DynamicObjects {
        objects: vec![Cuboid::new(8.0, 6.0, 0.5, 0.5, 1.8).unwrap()],
    };
    std::fs::write(&objects, dynamic.to_json()).unwrap();
    let out_dir = dir.path().join("run");
    let out = dtc(&[
        "pipeline",
        "--scene",
        p(&scene),
        "--objects",
        p(&objects),
        "--ut",
        "10.05,10.05,1",
        "--seed",
        "4",
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "report.json",
        "latency.json",
        "csi_recon.dtcc",
        "pl_baseline.dtcm",
        "cloud.dtcp",
    ] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let out = dtc(&[
        "profile",
        "--scene",
        p(&scene),
        "--ut",
        "10.05,10.05,1",
        "--repetitions",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("total_ms"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&dtc(&["no-such-command"])), 2);
    assert_eq!(code(&dtc(&["synth", "--scene", "x.json"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    let h = dir.path().join("h.dtcc");
    let out = dtc(&[
        "synth",
        "--scene",
        p(&scene),
        "--ut",
        "10.05,10.05,1",
        "--out",
        p(&h),
        "--pilot",
        "random:0",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = dtc(&["features", "--scene", p(&missing), "--out", p(dir.path())]);
    assert_eq!(code(&out), 3);

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    let out = dtc(&["features", "--scene", p(&broken), "--out", p(dir.path())]);
    assert_eq!(code(&out), 3);

    let truncated = dir.path().join("t.dtcc");
    std::fs::write(&truncated, b"DTCC\x01\x00").unwrap();
    let mask = dir.path().join("m.dtcb");
    std::fs::write(&mask, b"DTCB").unwrap();
    let out = dtc(&[
        "reconstruct",
        "--pilot-csi",
        p(&truncated),
        "--mask",
        p(&mask),
        "--out",
        p(&dir.path().join("r.dtcc")),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn geometric_failures_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(dir.path());
    // Inside the first cuboid.
    let out = dtc(&[
        "synth",
        "--scene",
        p(&scene),
        "--ut",
        "2.5,3,1",
        "--out",
        p(&dir.path().join("h.dtcc")),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    // Outside the grid.
    let out = dtc(&[
        "features",
        "--scene",
        p(&scene),
        "--ut",
        "50,50,1",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}
