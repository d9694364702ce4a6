use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dpbeta(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpbeta"))
        .args(args)
        .current_dir(dir)
        .env_remove("DPBETA_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/zebra_synthetic.txt")
}

fn manifest(path: &Path) -> serde_json::Value {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    serde_json::from_str(&std::fs::read_to_string(name).unwrap()).unwrap()
}

#[test]
fn dpcheck_prints_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = dpbeta(dir.path(), &["dpcheck", "--eps", "2", "--window", "30"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "2.0");
}

#[test]
fn generate_release_fit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = dpbeta(
        d,
        &[
            "generate", "--n", "40", "--q", "3", "--L", "loglog", "--seed", "4", "--out", "g.txt",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest(&d.join("g.txt"))["command"], "generate");

    let o = dpbeta(
        d,
        &[
            "release", "--input", "g.txt", "--q", "3", "--n", "40", "--eps", "4", "--seed", "2",
            "--out", "r.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rel: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(rel["n"], 40);
    assert_eq!(rel["q"], 3);
    assert!(rel.get("e").is_none());
    let m = manifest(&d.join("r.json"));
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);

    let o = dpbeta(d, &["fit", "--input", "r.json", "--out", "fit.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(d.join("fit.csv")).unwrap();
    assert!(table.starts_with("vertex,alpha_hat,ci_lo,ci_hi,se,degree_noisy\n"));
    assert_eq!(table.lines().count(), 41);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&dpbeta(d, &["frobnicate"])), 1);
    assert_eq!(code(&dpbeta(d, &["dpcheck", "--eps", "2", "--nope"])), 1);
    assert_eq!(code(&dpbeta(d, &["dpcheck", "--eps", "-1"])), 1);
    assert_eq!(code(&dpbeta(d, &["--help"])), 0);

    assert_eq!(
        code(&dpbeta(
            d,
            &[
                "pipeline",
                "--input",
                "missing.txt",
                "--q",
                "3",
                "--eps",
                "1"
            ]
        )),
        2
    );
    std::fs::write(d.join("bad.txt"), "1 2 1\n3 3 1\n").unwrap();
    let o = dpbeta(
        d,
        &["pipeline", "--input", "bad.txt", "--q", "3", "--eps", "1"],
    );
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    std::fs::write(d.join("deg.txt"), "0 3 4 2 3\n").unwrap();
    let o = dpbeta(
        d,
        &["fit", "--input", "deg.txt", "--q", "2", "--out", "f.csv"],
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[1, 3]"));
    assert_eq!(
        code(&dpbeta(d, &["fit", "--input", "deg.txt", "--out", "f.csv"])),
        1
    );
}

#[test]
fn pipeline_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let input = fixture();
    let o = dpbeta(
        d,
        &[
            "pipeline",
            "--input",
            input.to_str().unwrap(),
            "--q",
            "3",
            "--eps",
            "1",
            "--seed",
            "11",
            "--out",
            "t.csv",
            "--scatter",
            "s.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(d.join("t.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 27);
    assert!(rows.iter().all(|r| !r.starts_with("8,")));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[8]"));
    assert_eq!(
        manifest(&d.join("t.csv"))["outputs"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn simulate_rerun_from_manifest_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = Command::new(env!("CARGO_BIN_EXE_dpbeta"))
        .args([
            "simulate", "--n", "30", "--reps", "40", "--out", "s.csv", "--xi-out", "xi.csv",
        ])
        .current_dir(d)
        .env("DPBETA_SEED", "17")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let first = (
        std::fs::read(d.join("s.csv")).unwrap(),
        std::fs::read(d.join("xi.csv")).unwrap(),
    );
    let m = manifest(&d.join("s.csv"));
    assert_eq!(m["seed"], 17);
    let rerun: Vec<String> = serde_json::from_value(m["rerun"].clone()).unwrap();
    let args: Vec<&str> = rerun.iter().map(String::as_str).collect();
    let o = dpbeta(d, &args);
    assert_eq!(code(&o), 0);
    let second = (
        std::fs::read(d.join("s.csv")).unwrap(),
        std::fs::read(d.join("xi.csv")).unwrap(),
    );
    assert_eq!(first, second);

    let o = dpbeta(
        d,
        &[
            "qq", "--input", "xi.csv", "--pair", "29,30", "--out", "qq.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let qq = std::fs::read_to_string(d.join("qq.csv")).unwrap();
    assert!(qq.starts_with("theoretical,empirical\n"));
    assert_eq!(qq.lines().count(), 41);
    assert_eq!(
        code(&dpbeta(
            d,
            &["qq", "--input", "xi.csv", "--pair", "3,4", "--out", "qq.csv"]
        )),
        2
    );
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("sim.toml"), "n = 24\nreps = 30\nseed = 5\nL = \"loglog\"\neps = \"fixed:3\"\npairs = [[1, 2], [23, 24]]\n").unwrap();
    let o = dpbeta(
        d,
        &[
            "simulate", "--config", "sim.toml", "--reps", "20", "--out", "a.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = &manifest(&d.join("a.csv"))["params"];
    assert_eq!(p["n"], 24);
    assert_eq!(p["reps"], 20);
    assert_eq!(p["master_seed"], 5);
    assert_eq!(p["l_mode"], "loglog");
    let csv = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(2).unwrap().starts_with("23,24,"));

    std::fs::write(d.join("sim.json"), r#"{"n": 24, "reps": 20, "seed": 5, "L": "loglog", "eps": "fixed:3", "pairs": [[1, 2], [23, 24]]}"#).unwrap();
    let o = dpbeta(d, &["simulate", "--config", "sim.json", "--out", "b.csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        std::fs::read(d.join("a.csv")).unwrap(),
        std::fs::read(d.join("b.csv")).unwrap()
    );

    std::fs::write(d.join("bad.toml"), "nodes = 3\n").unwrap();
    assert_eq!(
        code(&dpbeta(
            d,
            &["simulate", "--config", "bad.toml", "--out", "c.csv"]
        )),
        2
    );
}

#[test]
fn rate_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = dpbeta(
        d,
        &[
            "rate", "--n-list", "20,40", "--reps", "10", "--seed", "1", "--out", "rate.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = std::fs::read_to_string(d.join("rate.csv")).unwrap();
    assert_eq!(t.lines().count(), 3);
    assert_eq!(
        code(&dpbeta(d, &["rate", "--n-list", "40,20", "--out", "r.csv"])),
        1
    );
}
