use std::process::Command;

fn ncma() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ncma"))
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let status = ncma()
        .args(["sweep", "--profile", "sr-ncma,sic-noma", "--snr-c", "9,12", "--slots", "40", "--trials", "2", "--seed", "5"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(csv.starts_with("profile,snr_c_db,"));
    assert!(dir.path().join("run.manifest.json").exists());

    let again = dir.path().join("again.csv");
    ncma()
        .args(["sweep", "--profile", "sr-ncma,sic-noma", "--snr-c", "9,12", "--slots", "40", "--trials", "2", "--seed", "5"])
        .arg("--out")
        .arg(&again)
        .output()
        .unwrap();
    assert_eq!(csv, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn sweep_reads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "profiles = [\"bpsk-homogeneous\"]\nsnr_c_db = [10.0]\nslots = 30\ntrials = 1\n").unwrap();
    let out = ncma().arg("sweep").arg("--config").arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("bpsk-homogeneous")).count(), 3);
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = ncma().args(["sweep", "--profile", "nonsense", "--slots", "1"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = ncma().args(["sweep", "--slots", "0"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn rag_sim_and_theory_print_tables() {
    let out = ncma().args(["rag-sim", "--min-users", "2", "--max-users", "4", "--trials", "500"]).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
    let out = ncma().arg("theory").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("rate_gain"));
}

#[test]
fn selftest_passes() {
    let out = ncma().arg("selftest").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(String::from_utf8(out.stdout).unwrap().matches("PASS").count(), 5);
}
