use std::fs;
use std::process::Command;

fn bandlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bandlab"))
}

#[test]
fn run_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("edge.cfg");
    fs::write(&cfg, "experiment=edge\nn=200\nw=21\ntrials=2\nmaster_seed=42\n").unwrap();
    let out = dir.path().join("out");
    let res = bandlab()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--threads", "2"])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("# resolved config"));
    assert!(stdout.contains("status: ok"));
    let csv = fs::read_to_string(out.join("edge.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn config_errors_exit_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "experiment=edge\npattern=standard_band\nn=200\nw=100\n").unwrap();
    let res = bandlab().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.contains("line 4") && stderr.contains("band width must be odd"), "{stderr}");

    let res = bandlab().args(["run", "--config"]).arg(dir.path().join("missing.cfg")).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn selftest_passes() {
    let res = bandlab().arg("selftest").output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8(res.stdout).unwrap().contains("status: 13/13 checks passed"));
}

#[test]
fn thread_env_and_flag_give_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t.cfg");
    fs::write(&cfg, "experiment=norm_tail\nn=30\nt_grid=1.9,2.1\ntrials=40\nmaster_seed=3\n").unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = bandlab().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&a).env("BANDLAB_THREADS", "1").output().unwrap();
    let rb = bandlab().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&b).args(["--threads", "3"]).output().unwrap();
    assert!(ra.status.success() && rb.status.success());
    assert_eq!(fs::read(a.join("norm_tail.csv")).unwrap(), fs::read(b.join("norm_tail.csv")).unwrap());
}
