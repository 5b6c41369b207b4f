//! The command-line driver as a subprocess.

use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_fraclayer");

fn run(args: &[&str]) -> i32 {
    Command::new(BIN).args(args).output().expect("binary runs").status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn operator_check_rows_match_the_symbol() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("op");
    assert_eq!(run(&["operator-check", "--out", path(&out)]), 0);
    let csv = std::fs::read_to_string(out.join("operator_check.csv")).unwrap();
    let mut symbols = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[7], "true", "{line}");
        if f[0] == "symbol" {
            let s: f64 = f[1].parse().unwrap();
            let k: f64 = f[2].parse().unwrap();
            let measured: f64 = f[4].parse().unwrap();
            let exact = k.powf(2.0 * s);
            assert!((measured - exact).abs() < 1e-6 * exact, "{line}");
            symbols += 1;
        }
    }
    assert_eq!(symbols, 15);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["preset"], "pn-half");
}

#[test]
fn invalid_configs_exit_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/presets/pn-half.toml")).unwrap();
    let cases = [
        ("weights", text.replace("atoms = [[0.5, 1.0]]", "atoms = [[0.5, 0.7]]")),
        ("range", text.replace("s_values = [0.1,", "s_values = [0.99,")),
        ("unknown", format!("{text}\nbogus = 3\n")),
    ];
    for (name, body) in cases {
        let cfg = dir.path().join(format!("{name}.toml"));
        std::fs::write(&cfg, body).unwrap();
        let out = dir.path().join(format!("out-{name}"));
        assert_eq!(run(&["solve-layer", "--config", path(&cfg), "--out", path(&out)]), 3, "{name}");
        assert!(!out.exists(), "{name} left artifacts");
    }
    let out = dir.path().join("out-both");
    let cfg = dir.path().join("weights.toml");
    assert_eq!(run(&["extend", "--config", path(&cfg), "--preset", "pn-half", "--out", path(&out)]), 3);
    assert_eq!(run(&["extend", "--preset", "nope", "--out", path(&out)]), 3);
    assert!(!out.exists());
}

#[test]
fn layer_artifacts_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        assert_eq!(run(&["solve-layer", "--preset", "quartic-lowS", "--threads", threads, "--out", path(&out)]), 0);
        outs.push(out);
    }
    for name in ["profile.csv", "log.csv", "stages.csv", "layer.json"] {
        let a = std::fs::read(outs[0].join(name)).unwrap();
        let b = std::fs::read(outs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs between thread counts");
    }
}
