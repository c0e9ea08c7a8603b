use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_fbmhypo");

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("exp.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn run(cfg: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .arg("run")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Vec<(String, String)> {
    fs::read_to_string(out.join("summary.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn value<'a>(s: &'a [(String, String)], key: &str) -> &'a str {
    &s.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("missing {key}")).1
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

const SAMPLE: &str = "kind = sample-fbm\nhurst = 0.7\nhorizon = 1\ndt = 0.0625\nn_mc = 4\nseed = 1\n";

#[test]
fn sample_fbm_writes_paths_and_covariances() {
    let dir = scratch("sample");
    let cfg = write_config(&dir, SAMPLE);
    let out = dir.join("out");
    let res = run(&cfg, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for p in 0..4 {
        let f = out.join(format!("path_{p:04}.csv"));
        let body = fs::read_to_string(&f).unwrap();
        let rows: Vec<&str> = body.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "t,B_1");
        assert_eq!(rows.len(), 1 + 17);
        let first: Vec<f64> = rows[1].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 0.0]);
    }
    assert!(!out.join("path_0004.csv").exists());
    let s = summary(&out);
    for i in 0..6 {
        for field in ["s", "t", "empirical", "stderr", "exact"] {
            let v: f64 = value(&s, &format!("fbm.cov.{i}.{field}")).parse().unwrap();
            assert!(v.is_finite());
        }
    }
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("fbm.cov.0.exact"));
}

#[test]
fn hormander_run_reports_full_rank() {
    let dir = scratch("hormander");
    let cfg = write_config(
        &dir,
        "kind = hormander\nx0 = 0, 0\nlevel = 2\nradius = 5\nseed = 3\nbegin fields\nV0 = [0, x1]\nV1 = [1, 0]\nend fields\n",
    );
    let out = dir.join("out");
    let res = run(&cfg, &out, &[]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s = summary(&out);
    assert_eq!(value(&s, "hormander.satisfied"), "true");
    assert_eq!(value(&s, "hormander.rank"), "2");
}

#[test]
fn runs_are_reproducible_and_seeded() {
    let dir = scratch("repro");
    let cfg = write_config(&dir, SAMPLE);
    let (a, b, c) = (dir.join("a"), dir.join("b"), dir.join("c"));
    assert!(run(&cfg, &a, &[]).status.success());
    assert!(run(&cfg, &b, &["--threads", "2"]).status.success());
    assert!(run(&cfg, &c, &["--seed", "2"]).status.success());
    let (fa, fb) = (sorted_files(&a), sorted_files(&b));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
    let pa = fs::read(a.join("path_0000.csv")).unwrap();
    let pc = fs::read(c.join("path_0000.csv")).unwrap();
    assert_ne!(pa, pc);
}

#[test]
fn every_file_starts_with_the_config_echo() {
    let dir = scratch("headers");
    let cfg = write_config(&dir, SAMPLE);
    let out = dir.join("out");
    assert!(run(&cfg, &out, &[]).status.success());
    for f in sorted_files(&out) {
        let body = fs::read_to_string(&f).unwrap();
        assert!(body.starts_with('#'), "{}", f.display());
        assert!(body.lines().any(|l| l.starts_with("# kind = sample-fbm")), "{}", f.display());
        assert!(body.lines().any(|l| l.starts_with("# seed = 1")), "{}", f.display());
    }
}

#[test]
fn bad_configs_fail_with_line_numbers() {
    let dir = scratch("bad");
    let cases = [
        ("kind = sample-fbm\nhurst = 0.7\nwobble = 3\n", "line 3"),
        ("kind = sample-fbm\nhurst = 0.4\n", "line 2"),
        ("kind = sample-fbm\n\n# note\nhurst = 0.7\nhurst = 0.6\n", "line 5"),
        ("kind = solve\nhurst = 0.7\nx0 = 1\nbegin fields\nV0 = [-x1 +]\nV1 = [1]\nend fields\n", "line 5"),
    ];
    for (i, (text, want)) in cases.iter().enumerate() {
        let cfg = dir.join(format!("bad{i}.cfg"));
        fs::write(&cfg, text).unwrap();
        let res = run(&cfg, &dir.join("out"), &[]);
        assert!(!res.status.success());
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains(want), "case {i}: {err}");
    }
    let res = run(&dir.join("missing.cfg"), &dir.join("out"), &[]);
    assert!(!res.status.success());
}
