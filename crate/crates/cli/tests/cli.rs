use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn vulnk(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vulnk"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn vulnk")
}

fn chain(dir: &Path) {
    fs::write(dir.join("n.tsv"), "# chain\nA\t0.2\nB\t0.2\n").unwrap();
    fs::write(dir.join("e.tsv"), "A\tB\t0.2\n").unwrap();
}

fn synth(dir: &Path, n: &str, m: &str) {
    let out = vulnk(
        &[
            "synth",
            "--kind",
            "power-law",
            "--n",
            n,
            "--m",
            m,
            "--seed",
            "5",
            "--nodes",
            "n.tsv",
            "--edges",
            "e.tsv",
        ],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn oracle_on_chain() {
    let dir = TempDir::new().unwrap();
    chain(dir.path());
    let out = vulnk(
        &["oracle", "--k", "2", "--nodes", "n.tsv", "--edges", "e.tsv"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rank\tnode\testimate\tverified\testimator"));
    let r = rows(&text);
    assert_eq!(r[0][1], "B");
    assert!((r[0][2].parse::<f64>().unwrap() - 0.232).abs() < 1e-12);
    assert_eq!(r[0][4], "exact");
    assert_eq!(r[1][1], "A");
}

#[test]
fn every_method_writes_k_rows() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "200", "400");
    for m in ["n", "sn", "sr", "bsr", "bsrbk"] {
        let out = vulnk(
            &[
                "topk",
                "--method",
                m,
                "--k",
                "5%",
                "--samples",
                "500",
                "--nodes",
                "n.tsv",
                "--edges",
                "e.tsv",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{m}: {}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        let r = rows(&text);
        assert_eq!(r.len(), 10, "{m}");
        for (i, row) in r.iter().enumerate() {
            assert_eq!(row.len(), 5);
            assert_eq!(row[0], (i + 1).to_string());
            assert!(row[3] == "0" || row[3] == "1");
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "300", "700");
    let args = |out: &'static str| {
        vec![
            "topk", "--method", "bsrbk", "--k", "12", "--seed", "3", "--nodes", "n.tsv", "--edges", "e.tsv", "--out",
            out,
        ]
    };
    assert!(vulnk(&args("a.tsv"), dir.path()).status.success());
    assert!(vulnk(&args("b.tsv"), dir.path()).status.success());
    assert_eq!(
        fs::read(dir.path().join("a.tsv")).unwrap(),
        fs::read(dir.path().join("b.tsv")).unwrap()
    );

    let first = fs::read(dir.path().join("n.tsv")).unwrap();
    synth(dir.path(), "300", "700");
    assert_eq!(first, fs::read(dir.path().join("n.tsv")).unwrap());
}

#[test]
fn truth_and_eval() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "200", "300");
    let g = ["--nodes", "n.tsv", "--edges", "e.tsv"];
    let run = |extra: &[&str]| {
        let mut a: Vec<&str> = extra.to_vec();
        a.extend_from_slice(&g);
        vulnk(&a, dir.path())
    };
    assert!(run(&[
        "truth",
        "--k",
        "10",
        "--samples",
        "2000",
        "--seed",
        "2",
        "--out",
        "t.tsv"
    ])
    .status
    .success());
    assert!(run(&[
        "topk",
        "--method",
        "n",
        "--k",
        "10",
        "--samples",
        "2000",
        "--seed",
        "2",
        "--out",
        "p.tsv"
    ])
    .status
    .success());
    // same seed and sample count: the prediction is the truth itself
    let out = vulnk(&["eval", "--pred", "p.tsv", "--truth", "t.tsv"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "k\tprecision\n10\t1\n");

    assert!(run(&["truth", "--k", "11", "--out", "t11.tsv"]).status.success());
    let out = vulnk(&["eval", "--pred", "p.tsv", "--truth", "t11.tsv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_table() {
    let dir = TempDir::new().unwrap();
    chain(dir.path());
    let out = vulnk(
        &["bounds", "--z", "2", "--nodes", "n.tsv", "--edges", "e.tsv"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("node\tp_l\tp_u"));
    let b: Vec<&str> = lines.nth(1).unwrap().split('\t').collect();
    assert_eq!(b[0], "B");
    assert!((b[1].parse::<f64>().unwrap() - 0.232).abs() < 1e-12);
    assert!((b[2].parse::<f64>().unwrap() - 0.232).abs() < 1e-12);
}

#[test]
fn bench_writes_tsv_and_csv() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), "150", "300");
    let out = vulnk(
        &[
            "bench",
            "--nodes",
            "n.tsv",
            "--edges",
            "e.tsv",
            "--methods",
            "n,bsrbk",
            "--k",
            "2%,5",
            "--samples",
            "1000",
            "--truth-samples",
            "1000",
            "--no-warmup",
            "--out",
            "b.tsv",
            "--csv",
            "b.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "method,k,samples_planned,samples_used,candidates,k_prime,wall_ms,precision"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("N,3,"));
    assert!(fs::read_to_string(dir.path().join("b.tsv"))
        .unwrap()
        .starts_with("method\tk\t"));
}

#[test]
fn validation_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    chain(dir.path());
    fs::write(dir.path().join("bad.tsv"), "A\t1.5\n").unwrap();
    let g = ["--nodes", "n.tsv", "--edges", "e.tsv"];
    let cases: Vec<Vec<&str>> = vec![
        vec!["topk", "--method", "n", "--k", "0"],
        vec!["topk", "--method", "n", "--k", "3"],
        vec!["topk", "--method", "sn", "--k", "1", "--eps", "0"],
        vec!["topk", "--method", "bsrbk", "--k", "1", "--bk", "1"],
        vec!["topk", "--method", "magic", "--k", "1"],
        vec!["topk", "--method", "n", "--k", "abc"],
        vec!["bounds", "--z", "0"],
    ];
    for mut c in cases {
        c.extend_from_slice(&g);
        let out = vulnk(&c, dir.path());
        assert_eq!(out.status.code(), Some(2), "{c:?}");
    }
    let out = vulnk(
        &["oracle", "--k", "1", "--nodes", "bad.tsv", "--edges", "e.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let out = vulnk(
        &["oracle", "--k", "1", "--nodes", "nope.tsv", "--edges", "e.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let out = vulnk(
        &[
            "synth", "--kind", "chain", "--n", "4", "--m", "7", "--nodes", "x", "--edges", "y",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_1() {
    let dir = TempDir::new().unwrap();
    chain(dir.path());
    let out = vulnk(
        &[
            "oracle",
            "--k",
            "1",
            "--nodes",
            "n.tsv",
            "--edges",
            "e.tsv",
            "--out",
            "missing/dir/out.tsv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
