use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn umom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_umom"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn estimate_sample_mean() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.txt", "1\n2\n3\n");
    let cfg = write(dir.path(), "e.cfg", "# mean of three points\ndata=data.txt\nestimator=sample_mean\n");
    let o = umom(dir.path(), &["estimate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "2.0\n");
}

#[test]
fn estimate_randomized_needs_seed() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.txt", "1\n2\n3\n4\n5\n6\n");
    let cfg = write(dir.path(), "e.cfg", "data=data.txt\nestimator=mom\nk=2\nshuffle=true\n");
    let o = umom(dir.path(), &["estimate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
    let a = umom(dir.path(), &["estimate", "--config", &cfg, "--seed", "4"]);
    let b = umom(dir.path(), &["estimate", "--config", &cfg, "--seed", "4"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn misspelled_key_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.txt", "1\n2\n3\n");
    let cfg = write(dir.path(), "e.cfg", "data=data.txt\nestimator=sample_mean\nestmator=mom\n");
    let o = umom(dir.path(), &["estimate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("estmator"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("dist=gaussian\nestimator=mom\nk=0\nn=100\nreplications=200\nseed=1\n", "k"),
        ("dist=gaussian\nestimator=sample_mean\nn=100\nreplications=200\n", "seed"),
        ("dist=student_t\ndof=1.5\nestimator=sample_mean\nn=10\nreplications=200\nseed=1\n", "dist"),
        ("dist=gaussian\nestimator=sample_mean\nn=10\nreplications=50\nseed=1\n", "replications"),
        ("dist=gaussian\nestimator=sample_mean\nn=10\nreplications=500\nseed=1\nt_grid=2,1\n", "t_grid"),
    ];
    for (i, (text, key)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("c{i}.cfg"), text);
        let o = umom(dir.path(), &["tails", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", stderr(&o));
        assert!(stderr(&o).contains(key), "case {i}: {}", stderr(&o));
    }
    let o = umom(dir.path(), &["tails", "--config", "missing.cfg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn cap_exceeded_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data: String = (0..60).map(|i| format!("{i}\n")).collect();
    write(dir.path(), "data.txt", &data);
    let cfg = write(dir.path(), "e.cfg", "data=data.txt\nestimator=exact_umom\nm=30\n");
    let o = umom(dir.path(), &["estimate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let cfg = write(dir.path(), "d.cfg", "dist=discrete\natoms=0:0.1,1:0.1,2:0.1,3:0.1,4:0.1,5:0.1,6:0.1,7:0.1,8:0.1,9:0.1\nkernel=mean\nm=8\nn=10\n");
    let o = umom(dir.path(), &["decompose", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn runtime_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "data.txt", "1\n2\n");
    let cfg = write(dir.path(), "e.cfg", "data=data.txt\nestimator=sample_mean\n");
    let o = umom(dir.path(), &["estimate", "--config", &cfg, "--out", "no/such/dir/x.json"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn decompose_product_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.cfg", "dist=discrete\natoms=-1:0.25,3:0.75\nkernel=product\nm=2\nn=10\n");
    let o = umom(dir.path(), &["decompose", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (mu, var) = (2.0f64, 3.0f64);
    let var_h = v["var_h"].as_f64().unwrap();
    assert!((var_h - (2.0 * var * mu * mu + var * var)).abs() < 1e-12);
    assert_eq!(v["N"].as_u64(), Some(10));
    assert!(v["orthogonality_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn breakdown_scan_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.cfg", "dist=gaussian\nn=12\nm=2\nseed=3\n");
    let o = umom(dir.path(), &["breakdown", "--config", &cfg, "--out", "scan.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("predicted first unbounded c = 4"), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scan.json")).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 13);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = umom(dir.path(), &["selftest", "--out", "s.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
}

#[test]
fn tails_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.cfg",
        "dist=student_t\ndof=5\nestimator=incomplete_umom\nm=10\nsubsets=300\nn=200\nreplications=300\nseed=8\nt_grid=0.5,1,1.5,2,3,4\nfit_min=0.5\nfit_max=4\n",
    );
    for format in ["json", "csv", "plotdata"] {
        let mut outputs = Vec::new();
        for threads in ["1", "8"] {
            let out = format!("{format}-{threads}.out");
            let o = umom(dir.path(), &["tails", "--config", &cfg, "--format", format, "--threads", threads, "--out", &out]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            assert!(stdout(&o).contains("L_hat") || stdout(&o).contains("fit unavailable"));
            outputs.push(fs::read(dir.path().join(&out)).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{format}");
    }
    let csv = fs::read_to_string(dir.path().join("csv-1.out")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(csv.lines().next(), Some("t,p_hat,wilson_lo,wilson_hi"));
}

#[test]
fn variance_prints_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.cfg", "dist=gaussian\nestimator=sample_mean\nn=50\nreplications=4000\nseed=2\n");
    let o = umom(dir.path(), &["variance", "--config", &cfg, "--out", "v.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ratio: f64 = stdout(&o).trim().parse().unwrap();
    assert!((ratio - 1.0).abs() < 5.0 * (2.0f64 / 4000.0).sqrt());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(v["summary"]["variance_ratio"].as_f64(), Some(ratio));
    // the seed flag overrides the key
    let o2 = umom(dir.path(), &["variance", "--config", &cfg, "--seed", "3"]);
    assert_ne!(stdout(&o), stdout(&o2));
}
