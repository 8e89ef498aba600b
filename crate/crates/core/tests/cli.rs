use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn plap_var(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap-var"))
        .args(args)
        .env("PLAPVAR_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn eigen_pipeline_reports_lambda1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.conf", "domain = interval(0, 1)\ncells = 512\np = 2\npipeline = eigen\n");
    let out = tmp.path().join("out");
    let o = plap_var(&["run", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ok");
    let l = report["eigen"]["lambda1"].as_f64().unwrap();
    assert!((l - 9.8696).abs() / 9.8696 < 0.005, "{l}");
    let (header, rows) = csv_rows(&out.join("eigenfunction.csv"));
    assert_eq!(header, "x,phi1");
    assert_eq!(rows.len(), 513);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("cells = 512"));
}

#[test]
fn solve_on_resonant_perturbation_gives_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "s.conf",
        "domain = interval(0, 1)\ncells = 64\np = 2\npipeline = solve\nnonlinearity = power_perturbation\nbeta = 1.5\n",
    );
    let out = tmp.path().join("out");
    let o = plap_var(&["run", &cfg, "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("converged = true"));
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"converged\": true"));
    let (header, rows) = csv_rows(&out.join("solution.csv"));
    assert_eq!(header, "x,u");
    for r in rows {
        assert!(r[1].parse::<f64>().unwrap().abs() < 1e-6);
    }
}

#[test]
fn incomparability_table_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "i.conf", "domain = interval(0, 1)\ncells = 32\np = 2\npipeline = incomparability\n");
    let out = tmp.path().join("out");
    let o = plap_var(&["run", &cfg, "--out", out.to_str().unwrap(), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = csv_rows(&out.join("incomparability.csv"));
    assert_eq!(header, "example,G1,G2,G3");
    assert_eq!(rows.len(), 3);
    let columns: Vec<&str> = header.split(',').collect();
    for (example, holds) in [("example2", "G2"), ("example3", "G3"), ("example4", "G1")] {
        let r = rows.iter().find(|r| r[0] == example).expect(example);
        for k in 1..4 {
            assert_eq!(r[k], if columns[k] == holds { "holds" } else { "fails" }, "{r:?}");
        }
    }
}

#[test]
fn check_config_prints_resolved_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.conf", "# minimal\ndomain = interval(0, 2)\np = 3\npipeline = eigen\n");
    let o = plap_var(&["check-config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("cells = 64"), "{text}");
    assert!(text.contains("seed = 0"), "{text}");
}

#[test]
fn errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.conf", "domain = interval(0, 1)\np = 2\npipeline = eigen\nfrobnicate = 1\n");
    let o = plap_var(&["check-config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frobnicate"));
    let o = plap_var(&["run", &cfg, "--quiet"]);
    assert_eq!(o.status.code(), Some(1));
    let o = plap_var(&["run", "/nonexistent/file.conf"]);
    assert_eq!(o.status.code(), Some(1));
    let o = plap_var(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_thread_count_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.conf", "domain = interval(0, 1)\np = 2\npipeline = eigen\n");
    let o = Command::new(env!("CARGO_BIN_EXE_plap-var"))
        .args(["check-config", &cfg])
        .env("PLAPVAR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
