use std::process::{Command, Output};

use biqgemm_bench::harness::CSV_HEADER;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biqgemm-bench")).args(args).output().expect("binary runs")
}

const SMALL: [&str; 10] = ["--m", "48", "--n", "80", "--b", "3", "--repeats", "1", "--warmup", "0"];

#[test]
fn verify_passes_and_rejects_wide_keys() {
    let ok = run(&["--verify", "--mu", "1,2,4,8", "--cases", "5"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let out = String::from_utf8(ok.stdout).unwrap();
    assert_eq!(out.lines().filter(|l| l.contains(" PASS ")).count(), 10);

    let bad = run(&["--verify", "--mu", "9"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("LUT-unit 9"));
    assert!(bad.stdout.is_empty());
}

fn checksums(stdout: &[u8]) -> Vec<(String, String)> {
    let mut reader = csv::Reader::from_reader(stdout);
    let headers = reader.headers().unwrap().clone();
    let method = headers.iter().position(|h| h == "method").unwrap();
    let sum = headers.iter().position(|h| h == "checksum").unwrap();
    reader.records().map(|r| r.unwrap()).map(|r| (r[method].to_string(), r[sum].to_string())).collect()
}

#[test]
fn fixed_seed_reproduces_checksums() {
    let args: Vec<&str> = SMALL.iter().copied().chain(["--beta", "2", "--mu", "4", "--seed", "7"]).collect();
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let (ca, cb) = (checksums(&a.stdout), checksums(&b.stdout));
    assert_eq!(ca.len(), 4);
    assert_eq!(ca, cb);
    for (method, sum) in &ca {
        assert_eq!(sum.is_empty(), method == "bandwidth_probe", "{method}: {sum:?}");
    }
    let other = run(&SMALL.iter().copied().chain(["--beta", "2", "--mu", "4", "--seed", "8"]).collect::<Vec<_>>());
    assert_ne!(checksums(&other.stdout), ca);
}

#[test]
fn csv_file_has_header_and_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let args: Vec<&str> = SMALL
        .iter()
        .copied()
        .chain(["--threads", "1,2", "--method", "biqgemm,gemm_dense", "--csv", path.to_str().unwrap()])
        .collect();
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 4);
}

#[test]
fn bad_arguments_fail() {
    assert!(!run(&["--method", "blas"]).status.success());
    assert!(!run(&["--mu", "17"]).status.success());
    let tight = run(&["--b", "64", "--budget-bytes", "1K", "--repeats", "1"]);
    assert!(!tight.status.success());
    assert!(String::from_utf8_lossy(&tight.stderr).contains("budget"));
}
