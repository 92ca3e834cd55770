use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steklov-lab")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> serde_json::Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn disk_spectrum() {
    let v = json(&lab(&["steklov", "--shape", "disk", "--h", "0.1", "--num", "4"]));
    let eig: Vec<f64> = v["eigenvalues"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(eig.len(), 5);
    assert!(eig[0].abs() < 1e-8);
    for (s, want) in eig[1..].iter().zip([1.0, 1.0, 2.0, 2.0]) {
        assert!((s - want).abs() < 0.02 * want, "{eig:?}");
    }
}

#[test]
fn trace_report_has_checks() {
    let v = json(&lab(&["trace", "--shape", "ellipse", "--a", "2", "--b", "1", "--h", "0.1"]));
    assert!(v["report"]["deficit"].as_f64().unwrap() > 0.0);
    assert_eq!(v["cs_ok"], true);
    assert_eq!(v["brock_ok"], true);
}

#[test]
fn sweep_csv_rows() {
    let out = lab(&["sweep", "--family", "ellipse-aspect", "--from", "1", "--to", "2", "--steps", "3", "--h", "0.15"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn product_cylinder() {
    let v = json(&lab(&["product", "--m", "1", "--R", "1", "--fiber", "circle", "--L", "1", "--num", "3"]));
    let first = &v["eigenvalues"][1];
    assert!((first["value"].as_f64().unwrap() - 1f64.tanh()).abs() < 1e-12);
    assert_eq!(first["mult"], 2);
    assert_eq!(v["rigidity_holds"], false);

    let v = json(&lab(&["product", "--m", "1", "--R", "1", "--fiber", "circle", "--L", "0.5", "--critical-L"]));
    assert_eq!(v["rigidity_holds"], true);
    assert!((v["critical_L"].as_f64().unwrap() - 0.833_556_559_600_964_9).abs() < 1e-12);
}

#[test]
fn strip_cover_loop_winds_once() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (0..=200)
        .map(|i| {
            let t = i as f64 / 200.0;
            let a = 2.0 * std::f64::consts::PI * t;
            format!("{t} {} {}\n", 1.5 * a.cos(), 1.5 * a.sin())
        })
        .collect();
    let path = write(dir.path(), "loop.txt", &text);
    let v = json(&lab(&["develop", "--chart", "strip-cover", "--mode", "holonomy", "--path", &path]));
    assert_eq!(v["winding"], 1);
    assert!((v["gap"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    assert_eq!(v["frames_ok"], true);
}

#[test]
fn exit_codes() {
    // usage errors from the argument parser
    assert_eq!(code(&lab(&[])), 2);
    assert_eq!(code(&lab(&["steklov", "--shape", "hexagon"])), 2);
    // validation errors
    assert_eq!(code(&lab(&["steklov", "--h", "0.1"])), 2);
    assert_eq!(code(&lab(&["steklov", "--shape", "disk", "--radius", "-1", "--h", "0.1"])), 2);
    assert_eq!(code(&lab(&["steklov", "--shape", "ellipse", "--a", "2", "--h", "0.1"])), 2);
    assert_eq!(code(&lab(&["product", "--m", "3", "--R", "1", "--fiber", "circle", "--L", "1"])), 2);
    assert_eq!(code(&lab(&["sweep", "--family", "ellipse-aspect", "--from", "1", "--to", "2", "--steps", "0"])), 2);
    assert_eq!(code(&lab(&["steklov", "--mesh", "/nonexistent/x.tmesh"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.tmesh", "3 1 3\n0 0\n1 0\n");
    assert_eq!(code(&lab(&["steklov", "--mesh", &bad])), 2);

    // numeric failure: the development runs off the unit disk chart
    let v = write(dir.path(), "v.txt", "0 2 0\n1 2 0\n");
    let out = lab(&["develop", "--chart", "disk", "--mode", "develop", "--v", &v]);
    assert_eq!(code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let runs: [&[&str]; 3] = [
        &["steklov", "--shape", "perturbed-disk", "--eps", "0.05", "--k", "3", "--h", "0.1"],
        &["sweep", "--family", "perturbed-disk", "--from", "0", "--to", "0.05", "--steps", "4", "--h", "0.15", "--format", "json"],
        &["product", "--m", "2", "--R", "1", "--fiber", "torus", "--L", "1", "--L2", "1.3", "--num", "12"],
    ];
    for args in runs {
        let a = lab(args);
        assert_eq!(code(&a), 0);
        assert_eq!(a.stdout, lab(args).stdout, "{args:?}");
    }
    let args = ["sweep", "--family", "ellipse-aspect", "--from", "1", "--to", "2", "--steps", "4", "--h", "0.15"];
    let single = Command::new(env!("CARGO_BIN_EXE_steklov-lab")).args(args).env("STEKLOV_LAB_THREADS", "1").output().unwrap();
    let many = Command::new(env!("CARGO_BIN_EXE_steklov-lab")).args(args).env("STEKLOV_LAB_THREADS", "4").output().unwrap();
    assert_eq!(single.stdout, many.stdout);
}

#[test]
fn out_file_and_mesh_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec.json");
    let mesh = dir.path().join("disk.tmesh");
    let args = ["steklov", "--shape", "disk", "--h", "0.2", "--out", out.to_str().unwrap(), "--write-mesh", mesh.to_str().unwrap()];
    let res = lab(&args);
    assert_eq!(code(&res), 0);
    assert!(res.stdout.is_empty());
    let from_shape = std::fs::read_to_string(&out).unwrap();
    // only the output files, no stray temporaries
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);

    let from_mesh = lab(&["steklov", "--mesh", mesh.to_str().unwrap()]);
    let a: serde_json::Value = serde_json::from_str(&from_shape).unwrap();
    let b = json(&from_mesh);
    assert_eq!(a["eigenvalues"], b["eigenvalues"]);
}

#[test]
fn failed_run_leaves_existing_output_alone() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("keep.json");
    std::fs::write(&out, "previous\n").unwrap();
    let res = lab(&["steklov", "--shape", "disk", "--radius", "0", "--h", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 2);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "previous\n");
}
