use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn geoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoc"))
        .args(args)
        .env_remove("GEOC_THREADS")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
    train: PathBuf,
    eval: PathBuf,
}

/// Small labeled moons split, CSV eval so both formats are exercised.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.bin");
    let eval = dir.path().join("eval.csv");
    let out = geoc(&[
        "gen",
        "--kind",
        "moons",
        "--n",
        "200",
        "--dim",
        "96",
        "--out",
        p(&train),
        "--eval-out",
        p(&eval),
        "--eval-fraction",
        "0.25",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    Fixture { dir, train, eval }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn reduce_writes_reducer_and_summary() {
    let f = fixture();
    let model = f.dir.path().join("m.geor");
    let graph = f.dir.path().join("graph.csv");
    let reduced = f.dir.path().join("eval16.csv");
    let out = geoc(&[
        "reduce",
        "--kind",
        "concat",
        "--isomap-dim",
        "4",
        "--pca-dim",
        "12",
        "--k",
        "10",
        "--train",
        p(&f.train),
        "--out",
        p(&model),
        "--dump-graph",
        p(&graph),
        "--apply",
        p(&f.eval),
        "--apply-out",
        p(&reduced),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("16 dims (isomap 4, pca 12)"), "{stdout}");
    assert!(stdout.contains("bridged="));
    assert!(stdout.contains("4 positive eigenvalues"));
    assert!(fs::metadata(&model).unwrap().len() > 0);
    assert!(fs::read_to_string(&graph)
        .unwrap()
        .starts_with("i,j,weight,bridged"));
    let header = fs::read_to_string(&reduced).unwrap();
    let cols = header.lines().next().unwrap().split(',').count();
    assert!(cols >= 16);
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.bin");
    let out = geoc(&[
        "reduce",
        "--kind",
        "pca",
        "--dim",
        "4",
        "--train",
        p(&missing),
        "--out",
        p(&dir.path().join("m.geor")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("absent.bin"));
}

#[test]
fn eval_report_has_one_row_per_run_plus_mean() {
    let f = fixture();
    for (runs, rows) in [("3", 4), ("1", 2)] {
        let report = f.dir.path().join(format!("report{runs}.csv"));
        let out = geoc(&[
            "eval",
            "--kind",
            "pca",
            "--dim",
            "8",
            "--train",
            p(&f.train),
            "--eval",
            p(&f.eval),
            "--epochs",
            "3",
            "--runs",
            runs,
            "--report",
            p(&report),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = fs::read_to_string(&report).unwrap();
        assert_eq!(text.lines().count(), rows + 1, "{text}");
        assert!(text.lines().last().unwrap().contains(",mean,"));
    }
}

#[test]
fn eval_with_saved_reducer() {
    let f = fixture();
    let model = f.dir.path().join("m.geor");
    let fit = geoc(&[
        "reduce",
        "--kind",
        "isomap",
        "--dim",
        "3",
        "--k",
        "8",
        "--train",
        p(&f.train),
        "--out",
        p(&model),
    ]);
    assert_eq!(fit.status.code(), Some(0), "{}", stderr(&fit));
    let out = geoc(&[
        "eval",
        "--reducer",
        p(&model),
        "--train",
        p(&f.train),
        "--eval",
        p(&f.eval),
        "--epochs",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("isomap isomap=3 pca=0 k=8"));
}

#[test]
fn unlabeled_eval_file_is_rejected() {
    let f = fixture();
    let unlabeled = f.dir.path().join("line.csv");
    assert!(geoc(&[
        "gen",
        "--kind",
        "line",
        "--n",
        "20",
        "--dim",
        "96",
        "--out",
        p(&unlabeled)
    ])
    .status
    .success());
    let out = geoc(&[
        "eval",
        "--kind",
        "pca",
        "--dim",
        "4",
        "--train",
        p(&f.train),
        "--eval",
        p(&unlabeled),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("labels required"));
}

#[test]
fn concat_sweep_has_five_rows() {
    let f = fixture();
    let csv = f.dir.path().join("sweep.csv");
    let out = geoc(&[
        "sweep",
        "--kind",
        "concat-splits",
        "--k",
        "10",
        "--train",
        p(&f.train),
        "--eval",
        p(&f.eval),
        "--out",
        p(&csv),
        "--epochs",
        "2",
        "--runs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let labels: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        text.lines().next(),
        Some("dim_or_split,mean_accuracy,mean_matthews")
    );
    assert_eq!(labels, ["0/64", "16/48", "32/32", "48/16", "64/0"]);
}

#[test]
fn pca_sweep_reports_failing_dims_and_continues() {
    let f = fixture();
    let csv = f.dir.path().join("sweep.csv");
    // d = 96, so 128 and 256 cannot be fitted
    let out = geoc(&[
        "sweep",
        "--kind",
        "pca-dims",
        "--train",
        p(&f.train),
        "--eval",
        p(&f.eval),
        "--out",
        p(&csv),
        "--epochs",
        "2",
        "--runs",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[2].starts_with("64,") && !rows[2].contains("NaN"));
    assert_eq!(rows[3], "128,NaN,NaN");
    assert_eq!(rows[4], "256,NaN,NaN");
    assert!(stderr(&out).contains("128"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let f = fixture();
    let run = |tag: &str, threads: &str| {
        let model = f.dir.path().join(format!("{tag}.geor"));
        let report = f.dir.path().join(format!("{tag}.csv"));
        let common = ["--threads", threads, "--seed", "5"];
        let a = geoc(
            &[
                &[
                    "reduce",
                    "--kind",
                    "concat",
                    "--isomap-dim",
                    "4",
                    "--pca-dim",
                    "4",
                    "--k",
                    "9",
                    "--train",
                    p(&f.train),
                    "--out",
                    p(&model),
                ][..],
                &common[..],
            ]
            .concat(),
        );
        assert!(a.status.success(), "{}", stderr(&a));
        let b = geoc(
            &[
                &[
                    "eval",
                    "--reducer",
                    p(&model),
                    "--train",
                    p(&f.train),
                    "--eval",
                    p(&f.eval),
                    "--epochs",
                    "3",
                    "--report",
                    p(&report),
                ][..],
                &common[..],
            ]
            .concat(),
        );
        assert!(b.status.success(), "{}", stderr(&b));
        (fs::read(model).unwrap(), fs::read(report).unwrap())
    };
    let first = run("a", "2");
    assert_eq!(first, run("b", "2"));
    assert_eq!(first, run("c", "1"));
}

#[test]
fn config_file_values_yield_to_flags() {
    let f = fixture();
    let cfg = f.dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# baseline\nkind = pca\ndim = 4\nepochs = 2 # quick\nruns = 1\n",
    )
    .unwrap();
    let out = geoc(&[
        "eval",
        "--config",
        p(&cfg),
        "--dim",
        "6",
        "--train",
        p(&f.train),
        "--eval",
        p(&f.eval),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("pca isomap=0 pca=6"));

    fs::write(&cfg, "dimension = 4\n").unwrap();
    let out = geoc(&[
        "eval",
        "--config",
        p(&cfg),
        "--train",
        p(&f.train),
        "--eval",
        p(&f.eval),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown key `dimension`"));
}

#[test]
fn resource_ceiling_exits_with_four() {
    let f = fixture();
    let out = geoc(&[
        "reduce",
        "--kind",
        "isomap",
        "--dim",
        "2",
        "--k",
        "10",
        "--memory-limit",
        "1000",
        "--train",
        p(&f.train),
        "--out",
        p(&f.dir.path().join("m.geor")),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("memory ceiling"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(geoc(&["reduce", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(geoc(&["frobnicate"]).status.code(), Some(2));
    let f = fixture();
    let out = geoc(&[
        "reduce",
        "--kind",
        "concat",
        "--isomap-dim",
        "4",
        "--train",
        p(&f.train),
        "--out",
        p(&f.dir.path().join("m.geor")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_defaults() {
    for (cmd, expected) in [
        (
            "reduce",
            &["[default: 96]", "[default: 2147483648]", "[default: 17]"][..],
        ),
        (
            "eval",
            &[
                "[default: 3]",
                "[default: 50]",
                "[default: 32]",
                "[default: 0.0001]",
            ][..],
        ),
        (
            "sweep",
            &[
                "[default: 16,32,64,128,256]",
                "[default: 64]",
                "[default: quarters]",
            ][..],
        ),
        (
            "gen",
            &["[default: 1000]", "[default: 768]", "[default: 0.05]"][..],
        ),
    ] {
        let out = geoc(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8_lossy(&out.stdout);
        for e in expected {
            assert!(text.contains(e), "{cmd} --help lacks {e}:\n{text}");
        }
    }
}
