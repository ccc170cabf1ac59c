use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_workthermo"))
}

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/superfluid.toml")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("workthermo-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn run_then_stagewise_commands() {
    let out = scratch("run");
    let status = bin()
        .args(["run", "--config"])
        .arg(config())
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in [
        "chi_forward.tsv",
        "work_forward.tsv",
        "log_ratio.tsv",
        "posterior_beta.tsv",
        "summary.tsv",
        "config.toml",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    // sample → reconstruct → infer from the exact series
    let s = out.join("sampled_f.tsv");
    let b = out.join("sampled_b.tsv");
    for (input, dest, seed) in [("chi_forward_exact.tsv", &s, "5"), ("chi_backward_exact.tsv", &b, "6")] {
        let st = bin()
            .args(["sample", "--n-meas", "500", "--seed", seed, "--input"])
            .arg(out.join(input))
            .arg("--out")
            .arg(dest)
            .status()
            .unwrap();
        assert!(st.success());
    }
    for (input, dest) in [(&s, "pf.tsv"), (&b, "pb.tsv")] {
        let st = bin()
            .args(["reconstruct", "--k-max", "15", "--input"])
            .arg(input)
            .arg("--out")
            .arg(out.join(dest))
            .status()
            .unwrap();
        assert!(st.success());
    }
    let o = bin()
        .args(["infer", "--forward"])
        .arg(out.join("pf.tsv"))
        .arg("--backward")
        .arg(out.join("pb.tsv"))
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("bayes beta") && text.contains("freq  beta"), "{text}");
}

#[test]
fn config_errors_exit_with_two() {
    let o = bin()
        .args(["run", "--set", "n_steps=0", "--out", "/tmp/unused", "--config"])
        .arg(config())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["run", "--out", "/tmp/unused", "--config", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_four() {
    // two experiments cannot populate ten deciles
    let out = scratch("check");
    let o = bin()
        .args(["calibrate", "--check", "--set", "n_experiments=2", "--config"])
        .arg(config())
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(out.join("aggregates.tsv").exists());
}
