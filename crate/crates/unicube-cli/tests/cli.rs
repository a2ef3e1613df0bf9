//! End-to-end tests of the `unicube` binary: every check spawns the real
//! executable and inspects stdout, stderr, exit codes, and written files.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unicube"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout_of(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "`{}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout is UTF-8")
}

fn json_of(args: &[&str]) -> Value {
    let mut with_json = args.to_vec();
    with_json.push("--json");
    serde_json::from_str(&stdout_of(&with_json)).expect("stdout parses as JSON")
}

fn write_tt(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name).display().to_string();
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", &path]);
    stdout_of(&full);
    path
}

#[test]
fn help_lists_every_subcommand() {
    let help = stdout_of(&["--help"]);
    for name in [
        "spectrum", "gowers", "average", "reduce", "test", "rm2", "decode", "hom", "gen",
    ] {
        assert!(help.contains(name), "help is missing `{name}`");
    }
    for sub in [
        vec!["test", "--help"],
        vec!["rm2", "--help"],
        vec!["hom", "--help"],
        vec!["gen", "--help"],
        vec!["test", "hypergraph-lin", "--help"],
    ] {
        stdout_of(&sub);
    }
    let test_help = stdout_of(&["test", "--help"]);
    for name in ["blr", "graph", "hypergraph-lin", "hypergraph-quad", "akklr"] {
        assert!(test_help.contains(name), "test help is missing `{name}`");
    }
}

#[test]
fn gen_and_spectrum_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tt(dir.path(), "f.tt", &["linear", "--n", "3", "--alpha", "5"]);
    let table = std::fs::read_to_string(&f).unwrap();
    assert_eq!(table, "n=3\n01011010\n");
    let record = json_of(&["spectrum", "--fn", &f, "--top", "2"]);
    assert_eq!(record["result"]["r00000000_alpha"], 5);
    assert_eq!(record["result"]["r00000000_coeff"], 1.0);
    assert_eq!(record["result"]["parseval_sum"], 1.0);
    let digest = record["inputs"][&f].as_str().unwrap();
    assert_eq!(digest.len(), 64, "sha256 hex digest");
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(record.get("wall_time").is_none(), "timing stays off stdout");
}

#[test]
fn stdout_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tt(dir.path(), "f.tt", &["random", "--n", "8", "--seed", "3"]);
    let args = [
        "gowers", "--fn", &f, "--d", "3", "--estimate", "--trials", "20000", "--seed", "7",
        "--json",
    ];
    let first = stdout_of(&args);
    let second = stdout_of(&args);
    assert_eq!(first, second);
    let mut one = args.to_vec();
    one.extend_from_slice(&["--threads", "1"]);
    let mut eight = args.to_vec();
    eight.extend_from_slice(&["--threads", "8"]);
    assert_eq!(stdout_of(&one), stdout_of(&eight));
}

#[test]
fn input_errors_exit_2_and_budget_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tt");
    std::fs::write(&bad, "n=2\n01x0\n").unwrap();
    let out = run(&["spectrum", "--fn", &bad.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "error names the line: {stderr}");

    // n=7 is over the exhaustive quadratic-search budget.
    let f = write_tt(dir.path(), "f7.tt", &["random", "--n", "7", "--seed", "0"]);
    let out = run(&["rm2", "distance", "--fn", &f]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("budget"), "names the limit: {stderr}");
}

#[test]
fn blr_accepts_linear_functions_always() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tt(dir.path(), "f.tt", &["linear", "--n", "6", "--alpha", "19"]);
    let record = json_of(&[
        "test", "blr", "--fn", &f, "--trials", "3000", "--seed", "1",
    ]);
    assert_eq!(record["result"]["acceptance"], 1.0);
    assert_eq!(record["result"]["accepts"], 3000);
    let exact = json_of(&["test", "blr", "--fn", &f, "--exact"]);
    assert_eq!(exact["result"]["acceptance"], 1.0);
}

#[test]
fn hypergraph_test_reads_edge_files_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tt(dir.path(), "f.tt", &["random", "--n", "6", "--seed", "9"]);
    let hg = dir.path().join("h.hg");
    std::fs::write(&hg, "t=3\n1 2\n1 3\n2 3\n").unwrap();
    let record = json_of(&[
        "test",
        "hypergraph-lin",
        "--fn",
        &f,
        "--hg",
        &hg.display().to_string(),
        "--trials",
        "5000",
        "--seed",
        "2",
        "--with-bound",
    ]);
    assert_eq!(record["result"]["edges"], 3);
    let acceptance = record["result"]["acceptance"].as_f64().unwrap();
    let bound = record["result"]["theoretical_bound"].as_f64().unwrap();
    let stderr = record["result"]["stderr"].as_f64().unwrap();
    assert!(acceptance <= bound + 4.0 * stderr);
    // `graph --t 3` is the same test via the built-in complete graph.
    let graph = json_of(&[
        "test", "graph", "--fn", &f, "--t", "3", "--trials", "5000", "--seed", "2",
    ]);
    assert_eq!(graph["result"]["acceptance"], record["result"]["acceptance"]);
}

#[test]
fn hom_worked_example_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let psi = dir.path().join("psi.map");
    let phi = dir.path().join("phi.map");
    std::fs::write(&psi, "0,0\n1,0\n0,0\n1,0\n").unwrap();
    std::fs::write(&phi, "0,1\n1,1\n0,1\n1,1\n").unwrap();
    let agree = json_of(&[
        "hom", "agree", "--group", "2^2", "--codomain", "2^1 x 2^1",
        "--map", &psi.display().to_string(), "--exact",
    ]);
    assert_eq!(agree["result"]["agreement"], 1.0);
    assert_eq!(agree["result"]["is_homomorphism"], true);
    let corrected = dir.path().join("corrected.map");
    let correct = json_of(&[
        "hom", "correct", "--group", "2^2", "--codomain", "2^1 x 2^1",
        "--map", &phi.display().to_string(),
        "--hom", &psi.display().to_string(),
        "--shift", "0,1",
        "--map-out", &corrected.display().to_string(),
    ]);
    assert_eq!(correct["result"]["agreement_before"], 0.0);
    assert_eq!(correct["result"]["agreement_after"], 0.5);
    assert_eq!(correct["result"]["is_homomorphism"], true);
    assert_eq!(
        std::fs::read_to_string(&corrected).unwrap(),
        "0,0\n1,1\n0,0\n1,1\n"
    );
    // The corrected map beats psi, so the best-homomorphism search finds
    // something at least as good.
    let best = json_of(&[
        "hom", "best", "--group", "2^2", "--codomain", "2^1 x 2^1",
        "--map", &phi.display().to_string(),
    ]);
    assert!(best["result"]["agreement"].as_f64().unwrap() >= 0.5);
    assert_eq!(best["result"]["homomorphisms"], 4);
}

#[test]
fn decode_recovers_a_planted_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tt(
        dir.path(),
        "q.tt",
        &["quadratic", "--n", "5", "--expr", "x1*x2+x4"],
    );
    let poly = dir.path().join("g.quad");
    let record = json_of(&[
        "decode", "--fn", &f, "--poly-out", &poly.display().to_string(),
    ]);
    assert_eq!(record["result"]["correlation"], 1.0);
    assert_eq!(record["result"]["polynomial"], "x1*x2+x4");
    assert_eq!(record["result"]["route"], "exhaustive");
    // The written polynomial regenerates the identical truth table.
    let regen = dir.path().join("regen.tt");
    stdout_of(&[
        "gen", "quadratic", "--n", "5", "--poly", &poly.display().to_string(),
        "--out", &regen.display().to_string(),
    ]);
    assert_eq!(
        std::fs::read_to_string(&regen).unwrap(),
        std::fs::read_to_string(&f).unwrap()
    );
    // rm2 confirms the distance through the truth-table route.
    let rm2 = json_of(&["rm2", "distance", "--fn", &f]);
    assert_eq!(rm2["result"]["distance"], 0.0);
    assert_eq!(rm2["result"]["polynomial"], "x1*x2+x4");
}

#[test]
fn reduce_emits_a_certificate_file() {
    let dir = tempfile::tempdir().unwrap();
    let mat = dir.path().join("a.mat");
    std::fs::write(&mat, "101\n110\n").unwrap();
    let cert_path = dir.path().join("cert.json");
    let record = json_of(&[
        "reduce", "--matrix", &mat.display().to_string(),
        "--cert-out", &cert_path.display().to_string(),
    ]);
    assert_eq!(record["result"]["terminal_k"], 2);
    assert_eq!(record["result"]["verified"], true);
    let cert: Value =
        serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();
    assert_eq!(cert["terminal_k"], 2);
    assert!(cert["steps"].as_array().unwrap().len() >= 1);
}

#[test]
fn average_exact_matches_the_norm_fourth_power() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tt(dir.path(), "bent.tt", &["bent", "--n", "4"]);
    let mat = dir.path().join("a2.mat");
    // A_2: columns 00 01 10 11 stacked over an all-ones row.
    std::fs::write(&mat, "0011\n0101\n1111\n").unwrap();
    let avg = json_of(&["average", "--fn", &f, "--matrix", &mat.display().to_string(), "--exact"]);
    let norm = json_of(&["gowers", "--fn", &f, "--d", "2", "--exact"]);
    let value = avg["result"]["value"].as_f64().unwrap();
    let u2 = norm["result"]["value"].as_f64().unwrap();
    assert!((value - u2.powi(4)).abs() < 1e-12);
}

#[test]
fn out_record_carries_wall_time_but_stdout_does_not() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_tt(dir.path(), "f.tt", &["random", "--n", "5", "--seed", "4"]);
    let rec_path = dir.path().join("record.json");
    let stdout_record = json_of(&[
        "rm2", "dicho", "--fn", &f, "--seed", "11", "--out", &rec_path.display().to_string(),
    ]);
    assert!(stdout_record.get("wall_time").is_none());
    let file_record: Value =
        serde_json::from_str(&std::fs::read_to_string(&rec_path).unwrap()).unwrap();
    assert!(file_record["wall_time"].as_f64().unwrap() >= 0.0);
    assert_eq!(file_record["result"], stdout_record["result"]);
    assert_eq!(file_record["seed"], 11);
    let branch = stdout_record["result"]["branch"].as_str().unwrap();
    assert!(branch == "FAR" || branch == "NEAR");
}

#[test]
fn gen_json_without_out_is_an_input_error() {
    let out = run(&["gen", "bent", "--n", "4", "--json"]);
    assert_eq!(out.status.code(), Some(2));
    // And gen to stdout prints exactly the truth table.
    let table = stdout_of(&["gen", "bent", "--n", "2"]);
    assert_eq!(table, "n=2\n0001\n");
}
