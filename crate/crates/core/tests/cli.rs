use std::path::Path;
use std::process::{Command, Output};

use voxplan::report::{Report, CLEARANCE_HEADER, LOSS_HEADER, SPEED_HEADER};
use voxplan::scenario::{self, Scenario};
use voxplan::scene::{Primitive, Shape};
use voxplan::Vec3;

fn voxplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxplan")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_then_plan_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sink.toml");
    let o = voxplan(&["synth", "--template", "sink", "--out", s(&sc)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(Scenario::load(&sc).unwrap(), scenario::sink());

    let bundle = dir.path().join("bundle");
    let o = voxplan(&["plan", s(&sc), "--out", s(&bundle)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["manifest.json", "metrics.json", "speeds.csv", "scenario.toml", "masks/manifest.json", "masks/frame_0048.pgm"] {
        assert!(bundle.join(f).is_file(), "missing {f}");
    }

    let tables = dir.path().join("tables");
    let o = voxplan(&["report", s(&bundle), "--out", s(&tables)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("clearance (m)"));
    let read = |f: &str| std::fs::read_to_string(tables.join(f)).unwrap();
    let (l, c, sp) = (read("losses.csv"), read("clearance.csv"), read("speeds.csv"));
    assert_eq!(l.lines().next(), Some(LOSS_HEADER));
    assert_eq!(c.lines().next(), Some(CLEARANCE_HEADER));
    assert_eq!(sp.lines().next(), Some(SPEED_HEADER));
    let r = Report::from_csv(&l, &c, &sp).unwrap();
    assert_eq!(r.speeds.len(), 48);
    assert!(r.clearance.iter().all(|row| row.min_after_m >= row.d_safe_m - 1e-6));
}

#[test]
fn overrides_change_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sink.toml");
    scenario::sink().save(&sc).unwrap();
    let out = dir.path().join("b");
    let o = voxplan(&["plan", s(&sc), "--out", s(&out), "--frames", "30", "--profile", "uniform", "--iterations", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let saved = Scenario::load(out.join("scenario.toml")).unwrap();
    assert_eq!(saved.timing.total_frames, 30);
    assert_eq!(saved.planner.iterations, 50);
    assert!(out.join("masks/frame_0029.pgm").is_file());
    assert!(!out.join("masks/frame_0030.pgm").exists());
}

#[test]
fn masks_subcommand_writes_only_masks() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sink.toml");
    scenario::sink().save(&sc).unwrap();
    let out = dir.path().join("m");
    let o = voxplan(&["masks", s(&sc), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (manifest, masks) = voxplan::projection::read_masks(&out).unwrap();
    assert_eq!(manifest.frame_count, 49);
    assert_eq!(masks.len(), 49);
    assert_eq!(manifest.keep_first_frame, vec![0]);
}

#[test]
fn sealed_object_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = scenario::sink();
    let o = sc.scene.spec.object;
    // hollow shell around the object, thick enough that no voxel leaks
    for (i, (c, size)) in [
        (Vec3::new(0.0, 0.0, 0.1), Vec3::new(0.2, 0.2, 0.04)),
        (Vec3::new(0.0, 0.0, -0.1), Vec3::new(0.2, 0.2, 0.04)),
        (Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.04, 0.2, 0.2)),
        (Vec3::new(-0.1, 0.0, 0.0), Vec3::new(0.04, 0.2, 0.2)),
        (Vec3::new(0.0, 0.1, 0.0), Vec3::new(0.2, 0.04, 0.2)),
        (Vec3::new(0.0, -0.1, 0.0), Vec3::new(0.2, 0.04, 0.2)),
    ]
    .into_iter()
    .enumerate()
    {
        sc.scene.spec.primitives.push(Primitive {
            name: format!("wall{i}"),
            shape: Shape::Box { center: o + c, size },
        });
    }
    let path = dir.path().join("sealed.toml");
    sc.save(&path).unwrap();
    let o = voxplan(&["plan", s(&path), "--out", s(&dir.path().join("b"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error:plan.approach:no_path:"), "{}", stderr(&o));
}

#[test]
fn malformed_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"x\"\n[grid\n").unwrap();
    let o = voxplan(&["plan", s(&path), "--out", s(&dir.path().join("b"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:scenario:parse:"), "{}", stderr(&o));
}

#[test]
fn corrupt_bundle_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sink.toml");
    scenario::sink().save(&sc).unwrap();
    let b = dir.path().join("b");
    assert!(voxplan(&["plan", s(&sc), "--out", s(&b)]).status.success());
    std::fs::write(b.join("metrics.json"), "{ not json").unwrap();
    let o = voxplan(&["report", s(&b)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:report:corrupt_bundle:"), "{}", stderr(&o));
}

#[test]
fn injected_fault_names_the_loss() {
    for loss in ["len", "acc", "curv", "col"] {
        let o = voxplan(&["check", "--inject-fault", loss]);
        assert_eq!(o.status.code(), Some(6));
        let err = stderr(&o);
        assert!(err.starts_with("error:check:oracle_mismatch:"), "{err}");
        assert!(err.contains(&format!("gradient mismatch in L_{loss}")), "{err}");
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert!(stdout.contains("[FAIL] 3. gradient correctness"), "{stdout}");
    }
}

#[test]
fn check_prints_eight_lines() {
    let o = voxplan(&["check", "--seed", "3"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).collect();
    assert_eq!(lines.len(), 8, "{stdout}");
    // exit status follows the lines
    let any_fail = lines.iter().any(|l| l.starts_with("[FAIL]"));
    assert_eq!(o.status.code(), Some(if any_fail { 6 } else { 0 }));
}
