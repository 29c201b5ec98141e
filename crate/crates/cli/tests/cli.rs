use std::path::Path;
use std::process::{Command, Output};

fn an2n(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_an2n")).args(args).output().expect("binary runs")
}

const TINY: &str = "total_steps = 400\nepoch_steps = 200\nwarmup_steps = 100\nbatch_size = 16\n\
                    hidden = 8\neval_episodes = 2\n";

fn write_tiny(dir: &Path) -> String {
    let path = dir.join("tiny.cfg");
    std::fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_string()
}

fn train(cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--config", cfg, "--out", out.to_str().unwrap(), "--quiet"];
    args.extend_from_slice(extra);
    an2n(&args)
}

#[test]
fn selftest_passes() {
    let out = an2n(&["selftest"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("all suites passed"));
    assert_eq!(stdout.matches("PASS").count(), 6);
}

#[test]
fn selftest_catches_cosine_mutation() {
    let out = an2n(&["selftest", "--inject-cosine-sign-flip"]);
    assert!(!out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("similarity properties") && stdout.contains("FAIL"), "{stdout}");
}

#[test]
fn train_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = train(&cfg, out, &["--seed", "5", "--algo", "sac", "--an2n", "on"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let name = "pendulum-sac-an2n-s5.csv";
    let first = std::fs::read(a.join(name)).unwrap();
    assert_eq!(first, std::fs::read(b.join(name)).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with(
        "run_id,seed,env,algo,an2n,epoch,step,eval_return_mean,eval_return_std,key_fraction,\
         sim_threshold,fifo_len,critic_loss,wall_ms\n"
    ));
    assert_eq!(text.lines().count(), 3);
    assert!(a.join("pendulum-sac-an2n-s5.cfg").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let o = train(&cfg, dir.path(), &["--env", "mcc", "--an2n", "off", "--set", "eval_episodes=1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("mcc-ddpg-s0.csv")).unwrap();
    for row in text.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!((f[2], f[4], f[8], f[11]), ("mcc", "off", "0", "0"));
    }
}

#[test]
fn invalid_config_is_reported_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "total_steps = 1000\nepoch_steps = 300\n").unwrap();
    let o = train(cfg.to_str().unwrap(), &dir.path().join("out"), &[]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("total_steps"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn report_merges_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let runs = dir.path().join("runs");
    for seed in ["0", "5"] {
        for gate in ["on", "off"] {
            assert!(train(&cfg, &runs, &["--seed", seed, "--an2n", gate]).status.success());
        }
    }
    let out = dir.path().join("report");
    let o = an2n(&["report", "--in", runs.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("env,ddpg,ddpg+an2n\npendulum,"), "{summary}");
    let svg = std::fs::read_to_string(out.join("curves_pendulum.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn report_rejects_incomplete_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny(dir.path());
    let runs = dir.path().join("runs");
    assert!(train(&cfg, &runs, &["--seed", "0", "--an2n", "on"]).status.success());
    assert!(train(&cfg, &runs, &["--seed", "5", "--an2n", "off"]).status.success());
    let o = an2n(&["report", "--in", runs.to_str().unwrap(), "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("seeds"), "{err}");
}
