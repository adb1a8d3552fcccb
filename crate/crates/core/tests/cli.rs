use std::path::Path;
use std::process::{Command, Output};

use rgg_coupling::graph::{Graph, LatentEmbedding};
use rgg_coupling::robust::read_calibration_csv;

fn rggc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rggc")).args(args).output().expect("run rggc")
}

fn ok(args: &[&str]) -> String {
    let out = rggc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn sample_couple_and_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.txt");
    let emb = path(dir.path(), "v.bin");
    ok(&["er-sample", "--n", "40", "--p", "0.2", "--seed", "3", "--out", &g]);
    let h = Graph::read_text(std::io::BufReader::new(std::fs::File::open(&g).unwrap())).unwrap();
    assert_eq!(h.n(), 40);
    let realized = ok(&["couple", "--input", &g, "--d", "256", "--p", "0.2", "--n", "40", "--embedding", &emb]);
    let realized = Graph::from_text(&realized).unwrap();
    let v = LatentEmbedding::read_binary(std::fs::File::open(&emb).unwrap()).unwrap();
    assert_eq!((v.n(), v.d()), (40, 256));
    assert!(realized.diff_count(&h) <= 40 * 39 / 2);
    // same seed, same bytes
    assert_eq!(ok(&["er-sample", "--n", "40", "--p", "0.2", "--seed", "3"]), std::fs::read_to_string(&g).unwrap());
}

#[test]
fn test_subcommand_prints_a_decision() {
    let dir = tempfile::tempdir().unwrap();
    let g = path(dir.path(), "g.txt");
    let cal = path(dir.path(), "cal.csv");
    let cfg = path(dir.path(), "run.cfg");
    std::fs::write(
        &cfg,
        "# small witness run\nn = 60\np = 0.1\nd = 6\nnull-samples = 4\nalt-samples = 4\niters = 60\n",
    )
    .unwrap();
    ok(&["calibrate", "--config", &cfg, "--seed", "1", "--out", &cal]);
    let rows = read_calibration_csv(std::io::BufReader::new(std::fs::File::open(&cal).unwrap())).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].n, rows[0].d), (60, 6));
    ok(&["rgg-sample", "--n", "60", "--p", "0.1", "--d", "6", "--seed", "2", "--out", &g]);
    let line = ok(&["test", "--config", &cfg, "--input", &g, "--calibration", &cal, "--seed", "5"]);
    let line = line.trim();
    let rest = line.strip_prefix("DECISION=RGG margin=").or_else(|| line.strip_prefix("DECISION=NULL margin="));
    let margin: f64 = rest.expect(line).parse().expect(line);
    assert!(!margin.is_nan());
}

#[test]
fn experiment_outputs_have_headers() {
    let fkg = ok(&["exp", "fkg", "--d", "3", "--trials", "20000", "--seed", "1"]);
    assert!(fkg.starts_with("quantity,estimate,std_err"));
    let thr = ok(&[
        "exp",
        "threshold",
        "--n",
        "60",
        "--property",
        "connectivity",
        "--model",
        "er",
        "--grid",
        "0.02,0.2,6",
        "--trials",
        "20",
    ]);
    assert!(thr.starts_with("p,f,fitted,std_err"));
    assert_eq!(thr.lines().count(), 7);
    let roc = ok(&["exp", "roc", "--n", "80", "--p", "0.1", "--d", "4", "--decider", "spectral", "--trials", "6"]);
    assert!(roc.starts_with("truth,decided_rgg,decided_null"));
}

#[test]
fn bad_input_exits_with_code_two() {
    assert_eq!(rggc(&["er-sample", "--p", "0.2"]).status.code(), Some(2));
    assert_eq!(rggc(&["er-sample", "--n", "10", "--p", "1.5"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "dup.cfg");
    std::fs::write(&cfg, "n = 3\nn = 4\n").unwrap();
    assert_eq!(rggc(&["er-sample", "--config", &cfg, "--p", "0.2"]).status.code(), Some(2));
}

#[test]
fn degenerate_schedule_exits_with_code_three() {
    let out = rggc(&["recursive", "--n", "50", "--p", "0.05", "--d", "4096", "--rounds", "3", "--c", "1e6"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
