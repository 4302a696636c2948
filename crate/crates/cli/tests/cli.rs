//! CLI behaviors: exit codes, atomic file output, manifest digests, and the
//! round-trip property of emitted tables.

use std::process::Command;

fn syrlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_syrlab"))
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn bad_arguments_exit_two() {
    let out = syrlab().args(["dist"]).output().unwrap(); // missing --n
    assert_eq!(out.status.code(), Some(2));

    let out = syrlab().args(["orbit", "--n-start", "4", "--steps", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "even Syracuse start must be rejected");

    let out = syrlab()
        .args(["triangles", "--n", "12", "--xi", "3", "--eps", "1/100", "--jmin", "1", "--jmax", "2", "--lmin", "0", "--lmax", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "xi divisible by 3 must be rejected");
}

#[test]
fn level_and_budget_errors_exit_three() {
    let out = syrlab().args(["dist", "--n", "9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = syrlab()
        .args(["dist", "--n", "14", "--kind", "float", "--budget-mb", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = syrlab().args(["valuation-tv", "--n", "3", "--m", "30"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn selftest_passes_and_corruption_fails_with_name() {
    let out = syrlab().args(["selftest"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("0 failed"));

    let out = syrlab().args(["selftest", "--corrupt"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("dist-level-2-published-table: FAIL"),
        "failing check must be named; got:\n{stdout}"
    );
}

#[test]
fn file_output_matches_manifest_digest_and_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let out = syrlab()
        .args(["dist", "--n", "3", "--out", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stdout).unwrap().lines().last().unwrap())
            .unwrap();
    let record = &manifest["outputs"][0];
    assert_eq!(record["target"], path.to_str().unwrap());

    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(record["bytes"].as_u64().unwrap(), bytes.len() as u64);
    assert_eq!(record["sha256"].as_str().unwrap(), sha256_hex(&bytes));

    // Round-trip: parse the CSV, re-serialize, and match the digest.
    let text = String::from_utf8(bytes.clone()).unwrap();
    let mut rebuilt = String::from("residue,prob_num,prob_den\n");
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let (y, p, q) = (
            fields[0].parse::<u64>().unwrap(),
            fields[1].parse::<u64>().unwrap(),
            fields[2].parse::<u64>().unwrap(),
        );
        assert!(q >= 1 && (p == 0 || p < q));
        rebuilt.push_str(&format!("{y},{p},{q}\n"));
    }
    assert_eq!(sha256_hex(rebuilt.as_bytes()), sha256_hex(&bytes));
}

#[test]
fn identical_manifests_imply_identical_outputs() {
    let run = || {
        let out = syrlab()
            .args(["charfn", "--n", "2", "--n", "4", "--random-probes", "3", "--seed", "55"])
            .output()
            .unwrap();
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn project_and_gridmap_smoke() {
    let out = syrlab().args(["project", "--n", "3", "--k", "1"]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("1,1,3") && stdout.contains("2,2,3"));

    let out = syrlab()
        .args(["gridmap", "--n", "12", "--xi", "7", "--jmin", "1", "--jmax", "2", "--lmin", "0", "--lmax", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().next().unwrap().starts_with("j,l,color,theta_num"));
    assert_eq!(stdout.lines().filter(|l| l.contains("black") || l.contains("white")).count(), 4);
}

#[test]
fn orbit_collatz_map() {
    let out = syrlab()
        .args(["orbit", "--n-start", "3", "--steps", "3", "--map", "collatz"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().next().unwrap(), "3 10 5 16");
}
