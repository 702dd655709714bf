use std::path::{Path, PathBuf};
use std::process::Command;

use aqml_cli::config::ExperimentConfig;
use aqml_cli::manifest::config_hash;
use aqml_cli::{resolve_output_dir, run, run_config, validate, RunManifest, RunStatus};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aqml"))
}

fn run_text(text: &str, root: &Path) -> Result<aqml_cli::RunOutcome, aqml_cli::CliError> {
    let cfg = ExperimentConfig::parse(text)?;
    run_config(&cfg, text.as_bytes(), Some(root))
}

#[test]
fn shipped_configs_validate() {
    let mut n = 0;
    for e in std::fs::read_dir(configs_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            validate(&p).unwrap_or_else(|err| panic!("{}: {err}", p.display()));
            n += 1;
        }
    }
    assert_eq!(n, 10);
}

#[test]
fn gamma_table_for_two_qubits() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&configs_dir().join("gamma_n2.toml"), Some(dir.path())).unwrap();
    let csv = std::fs::read_to_string(out.output_dir.join("gamma.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 5);
    let degeneracies: Vec<&str> = rows.iter().map(|r| r[2]).collect();
    assert_eq!(degeneracies, ["1", "4", "6", "4", "1"]);
    // brute-force sign flips reproduce the degeneracy of every level
    assert!(rows.iter().all(|r| r[2] == r[3]));
    assert_eq!(rows[0][9], "minimum");
    assert_eq!(rows[4][9], "maximum");
    for r in &rows {
        let n: i64 = r[0].parse().unwrap();
        assert_eq!(r[5].parse::<i64>().unwrap(), 4 * (4 - 2 * n));
    }
}

#[test]
fn manifest_records_hash_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = configs_dir().join("gamma_n2.toml");
    let out = run(&path, Some(dir.path())).unwrap();
    let m = RunManifest::read(&out.output_dir).unwrap();
    assert_eq!(m.status, RunStatus::Complete);
    assert_eq!(m.config_hash, config_hash(&std::fs::read(&path).unwrap()));
    assert_eq!(m.config_hash.len(), 64);
    assert_eq!(m.outputs, ["gamma.csv", "summary.json"]);
    for f in &m.outputs {
        assert!(out.output_dir.join(f).exists());
    }
}

#[test]
fn identical_config_gives_identical_bytes() {
    let text = std::fs::read_to_string(configs_dir().join("magnus_ising_n3.toml")).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_text(&text, a.path()).unwrap();
    let rb = run_text(&text, b.path()).unwrap();
    assert_eq!(ra.manifest.outputs, rb.manifest.outputs);
    for f in &ra.manifest.outputs {
        let x = std::fs::read(ra.output_dir.join(f)).unwrap();
        let y = std::fs::read(rb.output_dir.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn small_training_run_converges() {
    let text = r#"
        experiment = "train-ensemble"
        seed = 3
        trials = 3
        [ansatz]
        preset = "a1-qp"
        num_qubits = 2
        k = 10
        total_time = 1.0
        [target]
        kind = "ising-qp-chain"
        h = 0.1
        [optimizer]
        epochs = 3000
        slices = 100
        early_stop = true
    "#;
    let dir = tempfile::tempdir().unwrap();
    let out = run_text(text, dir.path()).unwrap();
    let csv = std::fs::read_to_string(out.output_dir.join("trials.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let loss: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(loss < 1e-2, "{line}");
    }
    assert!(out.summary.contains("desk scale"));
}

#[test]
fn hessian_audit_writes_spectra() {
    let text = r#"
        experiment = "hessian-audit"
        seed = 1
        trials = 2
        [ansatz]
        preset = "a1-qp"
        num_qubits = 2
        k = 2
        total_time = 1.0
        [target]
        kind = "ising-qp-chain"
        h = 0.1
        [optimizer]
        epochs = 300
        slices = 40
    "#;
    let dir = tempfile::tempdir().unwrap();
    let out = run_text(text, dir.path()).unwrap();
    let eig = std::fs::read_to_string(out.output_dir.join("eigenvalues.csv")).unwrap();
    // 2 trials x 9 parameters
    assert_eq!(eig.lines().count(), 1 + 2 * 9);
    let pts = std::fs::read_to_string(out.output_dir.join("points.csv")).unwrap();
    assert_eq!(pts.lines().count(), 3);
}

#[test]
fn surjectivity_and_haar_scans() {
    let dir = tempfile::tempdir().unwrap();
    for (name, scan) in [
        ("ansatz", "samples = 50\nslices = 20"),
        ("haar", "samples = 50\nhaar = true"),
    ] {
        let text = format!(
            "experiment = \"surjectivity-scan\"\nseed = 4\noutput_dir = \"{name}\"\n[ansatz]\npreset = \"a1-qp\"\nnum_qubits = 2\nk = 2\ntotal_time = 1.0\n[scan]\n{scan}\n"
        );
        let out = run_text(&text, dir.path()).unwrap();
        let csv = std::fs::read_to_string(out.output_dir.join("overlaps.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 15, "{name}");
    }
}

#[test]
fn remaining_experiments_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "svd",
            "experiment = \"svd-analysis\"\nseed = 1\n[svd]\nnum_qubits = 2\nkinds = [\"fourier\"]\nsizes = [1, 2]\ntotal_time = 1.0\nsamples = 60\n",
            "svd.csv",
        ),
        (
            "jw",
            "experiment = \"jw-fidelity\"\nseed = 1\ntrials = 2\n[ansatz]\ntopology = \"x-chain\"\nnum_qubits = 2\ntotal_time = 0.5\naxes = [\"x\", \"z\"]\nbasis = { kind = \"fourier\", size = 2 }\n[jw]\npattern = \"XX\"\ntimes = [0.2, 0.5]\neval_slices = 50\n[optimizer]\nepochs = 50\nslices = 20\n",
            "fidelity.csv",
        ),
        (
            "sq",
            "experiment = \"squeezing-check\"\nseed = 0\n[squeezing]\nnum_qubits = 3\ncoupling = 1.0\ntotal_time = 0.1\nslices = 200\n",
            "squeezing.json",
        ),
        ("a2", "experiment = \"a2-construction\"\nseed = 0\n[a2]\nnum_qubits = 2\nn_trotter = 2\nslices = 400\n", "theta.csv"),
        (
            "haar",
            "experiment = \"haar-check\"\nseed = 0\n[haar]\nnum_qubits = 1\nsamples = 200\np = \"X\"\nh = \"Z\"\nm = \"Z\"\n",
            "haar.json",
        ),
    ];
    for (name, text, file) in cases {
        let text = format!("output_dir = \"{name}\"\n{text}");
        let out = run_text(&text, dir.path()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(out.output_dir.join(file).exists(), "{name}");
        assert!(out.output_dir.join("summary.json").exists(), "{name}");
    }
    let fid = std::fs::read_to_string(dir.path().join("jw/fidelity.csv")).unwrap();
    assert_eq!(
        fid.lines().next().unwrap(),
        "total_time,mean_fidelity,best_fidelity,identity_fidelity"
    );
    assert_eq!(fid.lines().count(), 3);
}

#[test]
fn over_parametrization_is_flagged() {
    let text = r#"
        experiment = "surjectivity-scan"
        seed = 0
        [ansatz]
        topology = "qp-star"
        num_qubits = 4
        total_time = 1.0
        axes = ["x", "y", "z"]
        basis = { kind = "fourier", size = 21 }
        [scan]
        samples = 10
    "#;
    let rep = ExperimentConfig::parse(text).unwrap().validate().unwrap();
    assert_eq!(rep.num_params, Some(255));
    assert_eq!(rep.surjectivity_threshold, Some(255));
    assert_eq!(rep.over_parametrized, Some(true));
    assert!(rep.render().contains("over-parametrized"));
    let small = text.replace("size = 21", "size = 20");
    let rep = ExperimentConfig::parse(&small).unwrap().validate().unwrap();
    assert_eq!(rep.over_parametrized, Some(false));
}

#[test]
fn malformed_axis_names_the_field() {
    let text = r#"
experiment = "magnus-table"
seed = 0
[ansatz]
topology = "ising-chain"
num_qubits = 2
total_time = 1.0
axes = ["x", "w"]
basis = { kind = "fourier", size = 2 }
[magnus]
l_max = 1
"#;
    let err = ExperimentConfig::parse(text).unwrap_err();
    let msg = err.to_string();
    assert_eq!(err.exit_code(), 2);
    assert!(msg.contains("axes"), "{msg}");
    assert!(msg.contains("line 8"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "experiment = \"gamma-theory\"\nseed = 0\nepochs = 3\n[gamma]\nnum_qubits = 1\n";
    let msg = ExperimentConfig::parse(text).unwrap_err().to_string();
    assert!(msg.contains("epochs"), "{msg}");
}

#[test]
fn a2_budget_is_enforced() {
    let text =
        "experiment = \"a2-construction\"\nseed = 0\n[a2]\nnum_qubits = 2\nn_trotter = 4\nk = 23\n";
    let err = ExperimentConfig::parse(text)
        .unwrap()
        .validate()
        .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("K >= 3 N n = 24"), "{err}");
}

#[test]
fn missing_block_is_a_validation_error() {
    let err = ExperimentConfig::parse("experiment = \"haar-check\"\nseed = 0\n")
        .unwrap()
        .validate()
        .unwrap_err();
    assert!(err.to_string().contains("[haar]"), "{err}");
}

#[test]
fn output_root_resolution() {
    let cfg = ExperimentConfig::parse(
        "experiment = \"gamma-theory\"\nseed = 0\n[gamma]\nnum_qubits = 1\n",
    )
    .unwrap();
    assert_eq!(
        resolve_output_dir(&cfg, Some(Path::new("/r"))),
        Path::new("/r/gamma-theory")
    );
    assert_eq!(resolve_output_dir(&cfg, None), Path::new("gamma-theory"));
}

#[test]
fn binary_exit_codes_and_env_root() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin()
        .args(["run", configs_dir().join("gamma_n2.toml").to_str().unwrap()])
        .env("AQML_OUTPUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert!(dir.path().join("gamma-theory/gamma.csv").exists());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("signature"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"nope\"\nseed = 0\n").unwrap();
    let out = bin()
        .args(["validate", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // valid config whose run fails: the output directory is a file
    let blocker = dir.path().join("blocked");
    std::fs::write(&blocker, "").unwrap();
    let cfg = dir.path().join("fail.toml");
    std::fs::write(
        &cfg,
        format!(
            "experiment = \"gamma-theory\"\nseed = 0\noutput_dir = \"{}\"\n[gamma]\nnum_qubits = 1\n",
            blocker.display()
        ),
    )
    .unwrap();
    let out = bin().args(["run", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let list = bin().arg("list-experiments").output().unwrap();
    let text = String::from_utf8_lossy(&list.stdout);
    assert_eq!(text.lines().count(), 10);
    assert!(text.contains("svd-analysis"));
}
