use std::collections::BTreeMap;
use std::fs;
use std::process::{Command, Output};

use qsdfv::experiment::{read_csv, ReferenceSource};

fn qsdfv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsdfv"))
        .args(args)
        .env("QSDFV_THREADS", "2")
        .output()
        .expect("binary runs")
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = qsdfv(&[
            "simulate",
            "--builder",
            "two_state_example",
            "--N",
            "10,50",
            "--replicas",
            "300",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with(
        "experiment_id,mode,chain_name,N,t,state_label,estimate,stderr,reference_value,reference_source,replicas,seed\n"
    ));
    assert!(text.ends_with('\n'));
    let rows = read_csv(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows
        .iter()
        .all(|r| r.reference_source == ReferenceSource::SemigroupOracle && r.stderr > 0.0));
}

#[test]
fn deterministic_modes_report_zero_stderr() {
    let o = qsdfv(&["solve-qsd", "--builder", "two_state_example", "--seed", "1"]);
    assert!(o.status.success());
    let rows = read_csv(&o.stdout[..]).unwrap();
    assert!((rows[0].estimate - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-10);
    assert_eq!(rows[0].reference_source, ReferenceSource::Paper);
    assert!(rows.iter().all(|r| r.stderr == 0.0));

    let o = qsdfv(&[
        "evolve",
        "--builder",
        "asymmetric_walk",
        "--p",
        "0.3",
        "--L",
        "5",
        "--t",
        "0",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    let rows = read_csv(&o.stdout[..]).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].estimate, 1.0);
    assert!(rows[1..]
        .iter()
        .all(|r| r.estimate == 0.0 && r.stderr == 0.0));
}

#[test]
fn chain_spec_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("b2.json");
    fs::write(
        &spec,
        r#"{"states":["1","2"], "rates":[{"from":"1","to":"2","rate":1.0},{"from":"2","to":"1","rate":1.0}], "absorption":[{"from":"1","rate":1.0}]}"#,
    )
    .unwrap();
    let o = qsdfv(&[
        "solve-qsd",
        "--chain",
        spec.to_str().unwrap(),
        "--seed",
        "1",
        "--method",
        "yaglom",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_csv(&o.stdout[..]).unwrap();
    assert!((rows[1].estimate - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-9);

    fs::write(
        &spec,
        r#"{"states":["1"], "rates":[], "absorption":[], "extra":1}"#,
    )
    .unwrap();
    let o = qsdfv(&[
        "solve-qsd",
        "--chain",
        spec.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    // Usage errors and module errors are 1; only violated bounds are 2.
    assert_eq!(qsdfv(&["solve-qsd", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(
        qsdfv(&["solve-qsd", "--builder", "nope", "--seed", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        qsdfv(&[
            "stationary",
            "--builder",
            "asymmetric_walk",
            "--p",
            "0.3",
            "--L",
            "4",
            "--seed",
            "1"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(qsdfv(&["--help"]).status.code(), Some(0));
    let o = qsdfv(&[
        "verify-bounds",
        "--builder",
        "two_state_example",
        "--N",
        "50",
        "--replicas",
        "2000",
        "--seed",
        "3",
        "--horizon",
        "2000",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows = read_csv(&o.stdout[..]).unwrap();
    assert!(rows.iter().any(|r| r.state_label == "coupling"));
    assert!(rows.iter().any(|r| r.state_label.starts_with("type0:")));
}

#[test]
fn compare_flags_real_differences() {
    let dir = tempfile::tempdir().unwrap();
    let power = dir.path().join("power.csv");
    let yaglom = dir.path().join("yaglom.csv");
    let shifted = dir.path().join("shifted.csv");
    for (path, method) in [(&power, "power"), (&yaglom, "yaglom")] {
        let o = qsdfv(&[
            "solve-qsd",
            "--builder",
            "asymmetric_walk",
            "--p",
            "0.3",
            "--L",
            "10",
            "--seed",
            "1",
            "--method",
            method,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let o = qsdfv(&[
        "compare",
        power.to_str().unwrap(),
        yaglom.to_str().unwrap(),
        "--tol",
        "1e-9",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let o = qsdfv(&["compare", power.to_str().unwrap(), power.to_str().unwrap()]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains(",0.0,")));

    let o = qsdfv(&[
        "solve-qsd",
        "--builder",
        "asymmetric_walk",
        "--p",
        "0.35",
        "--L",
        "10",
        "--seed",
        "1",
        "--out",
        shifted.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = qsdfv(&[
        "compare",
        power.to_str().unwrap(),
        shifted.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = qsdfv(&[
        "solve-qsd",
        "--builder",
        "two_state_example",
        "--seed",
        "1",
        "--out",
        shifted.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = qsdfv(&[
        "compare",
        power.to_str().unwrap(),
        shifted.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_error_shrinks_with_n() {
    let o = qsdfv(&[
        "sweep",
        "--builder",
        "two_state_example",
        "--N",
        "10,100,1000",
        "--replicas",
        "1000",
        "--repetitions",
        "5",
        "--seed",
        "5",
    ]);
    assert!(o.status.success());
    let rows = read_csv(&o.stdout[..]).unwrap();
    let mut worst: BTreeMap<usize, f64> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.state_label.starts_with("L2:")) {
        let e = worst.entry(r.n.unwrap()).or_insert(0.0);
        *e = e.max(r.estimate);
    }
    let v: Vec<f64> = worst.values().copied().collect();
    assert_eq!(v.len(), 3);
    assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
}

#[test]
fn only_deterministic_modes_report_zero_stderr() {
    for mode in ["simulate", "sweep", "stationary", "perfect-sample"] {
        let o = qsdfv(&[
            mode,
            "--builder",
            "two_state_example",
            "--N",
            "4",
            "--replicas",
            "200",
            "--repetitions",
            "3",
            "--horizon",
            "200",
            "--seed",
            "9",
        ]);
        assert!(
            o.status.success(),
            "{mode}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let rows = read_csv(&o.stdout[..]).unwrap();
        assert!(rows.iter().all(|r| r.stderr > 0.0), "{mode}");
    }
}
