//! File-format round trips and structural behavior of the CLI commands,
//! exercised in-process where possible and through the binary for
//! command-level contracts.

use std::path::Path;
use std::process::Command;

use mixreg::model::{Dataset, MixtureParams, ModelSpec, SparsityPattern};
use mixreg::selection::Provenance;
use mixreg_cli::io::{
    read_dataset_csv, read_functional_csv, write_dataset_csv, CollectionFile, FitManifest,
    GemSettings, ModelRecord,
};
use nalgebra::{DMatrix, DVector};
use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixreg"))
}

fn sample_dataset(labels: bool) -> Dataset {
    let x = DMatrix::from_row_slice(3, 2, &[0.25, -1.0, 2.0, 0.5, -0.75, 3.0]);
    let y = DMatrix::from_row_slice(3, 1, &[1.5, -2.25, 0.0]);
    Dataset::new(x, y, labels.then(|| vec![1, 2, 1])).unwrap()
}

#[test]
fn dataset_csv_round_trip() {
    let dir = tempdir().unwrap();
    for labels in [false, true] {
        let path = dir.path().join(format!("d{labels}.csv"));
        let data = sample_dataset(labels);
        write_dataset_csv(&path, &data).unwrap();
        let back = read_dataset_csv(&path).unwrap();
        assert_eq!(back, data);
    }
}

#[test]
fn dataset_csv_rejects_malformed_headers() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x1,z2,y1\n1,2,3\n").unwrap();
    assert!(read_dataset_csv(&path).is_err());
}

#[test]
fn functional_csv_rejects_ragged_rows() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("ragged.csv");
    std::fs::write(&path, "1,2,3\n4,5\n").unwrap();
    assert!(read_functional_csv(&path).is_err());
}

fn sample_spec() -> (ModelSpec, Provenance) {
    let params = MixtureParams::new(
        vec![0.25, 0.75],
        vec![
            DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -0.5, 0.0, 2.0, 0.0]),
            DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 0.0, 1.5, 0.0, 0.25]),
        ],
        vec![
            DVector::from_vec(vec![1.0, 0.5]),
            DVector::from_vec(vec![2.0, 1.25]),
        ],
    )
    .unwrap();
    (
        ModelSpec {
            k: 2,
            pattern: SparsityPattern::from_pairs(vec![(0, 0), (0, 2), (1, 1)]),
            ranks: Some(vec![1, 2]),
            params,
            loglik: -123.456,
            dim: 17,
            converged: true,
        },
        Provenance {
            procedure: "lasso-rank".into(),
            k: 2,
            lambda: Some(0.375),
            ranks: Some(vec![1, 2]),
        },
    )
}

#[test]
fn model_record_round_trip_preserves_everything() {
    let (spec, prov) = sample_spec();
    let record = ModelRecord::from_spec(&spec, &prov);
    let (back, back_prov) = record.to_spec().unwrap();
    assert_eq!(back, spec);
    assert_eq!(back_prov.procedure, prov.procedure);
    assert_eq!(back_prov.lambda, prov.lambda);
    assert_eq!(back_prov.ranks, prov.ranks);
}

#[test]
fn collection_file_round_trip() {
    let (spec, prov) = sample_spec();
    let mut collection = mixreg::selection::ModelCollection::new(42);
    collection.insert(spec, prov);
    let manifest = FitManifest {
        data: "d.csv".into(),
        procedure: "lasso-rank".into(),
        kmin: 2,
        kmax: 2,
        lambda_count: 5,
        rmax: Some(2),
        seed: 1,
        gem: GemSettings::from(&mixreg::gem::GemConfig::default()),
    };
    let file = CollectionFile::from_collection(manifest, &collection);
    let json = serde_json::to_string(&file).unwrap();
    let parsed: CollectionFile = serde_json::from_str(&json).unwrap();
    let back = parsed.to_collection().unwrap();
    assert_eq!(back.n(), 42);
    assert_eq!(back.entries(), collection.entries());
}

#[test]
fn simulate_writes_expected_shape_and_manifest() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("data.csv");
    let status = bin()
        .args(["simulate", "--model", "2", "--seed", "7", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 101, "header plus 100 rows");
    assert_eq!(lines[0].split(',').count(), 21, "10 + 10 + label columns");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("data.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["spec"]["n"], 100);
    assert_eq!(manifest["analytic_snr"], 3.6);
}

#[test]
fn simulate_custom_spec_row_count() {
    let dir = tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(
        &spec_path,
        r#"{"n":10,"p":5,"q":4,"k":2,"b_values":[1.0,-1.0],"sigma":1.0,"pi":[0.5,0.5]}"#,
    )
    .unwrap();
    let out = dir.path().join("custom.csv");
    let status = bin()
        .args(["simulate", "--seed", "3", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let body = std::fs::read_to_string(&out).unwrap();
    assert_eq!(body.lines().count(), 11);
}

#[test]
fn invalid_procedure_exits_with_code_2() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("data.csv");
    assert!(bin()
        .args(["simulate", "--model", "2", "--seed", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let status = bin()
        .args(["fit", "--procedure", "nonsense", "--data"])
        .arg(&out)
        .arg("--out-dir")
        .arg(dir.path().join("fit"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn select_on_empty_collection_exits_with_code_4() {
    let dir = tempdir().unwrap();
    let collection_path = dir.path().join("empty.json");
    let empty = serde_json::json!({
        "schema_version": 1,
        "command": "fit",
        "config": {
            "data": "d.csv", "procedure": "lasso-mle", "kmin": 2, "kmax": 2,
            "lambda_count": 5, "rmax": null, "seed": 0,
            "gem": {
                "min_iter": 10, "max_iter": 1000, "eps_loglik": 1e-6,
                "eps_param": 1e-5, "line_search_base": 0.1, "line_search_max": 20,
                "n_init": 50, "init_iter": 10
            }
        },
        "n": 10,
        "models": []
    });
    std::fs::write(&collection_path, empty.to_string()).unwrap();
    let status = bin()
        .args(["select", "--criterion", "bic", "--collection"])
        .arg(&collection_path)
        .arg("--out")
        .arg(dir.path().join("sel.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn slope_on_too_few_dimensions_exits_with_code_2() {
    let dir = tempdir().unwrap();
    let (spec, prov) = sample_spec();
    let mut collection = mixreg::selection::ModelCollection::new(10);
    collection.insert(spec, prov);
    let manifest = FitManifest {
        data: "d.csv".into(),
        procedure: "lasso-rank".into(),
        kmin: 2,
        kmax: 2,
        lambda_count: 5,
        rmax: Some(2),
        seed: 1,
        gem: GemSettings::from(&mixreg::gem::GemConfig::default()),
    };
    let file = CollectionFile::from_collection(manifest, &collection);
    let collection_path = dir.path().join("one.json");
    std::fs::write(&collection_path, serde_json::to_string(&file).unwrap()).unwrap();
    let status = bin()
        .args(["select", "--criterion", "slope", "--collection"])
        .arg(&collection_path)
        .arg("--out")
        .arg(dir.path().join("sel.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // BIC on the same singleton succeeds.
    let status = bin()
        .args(["select", "--criterion", "bic", "--collection"])
        .arg(&collection_path)
        .arg("--out")
        .arg(dir.path().join("sel_bic.json"))
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn simulate_without_model_or_spec_exits_with_code_2() {
    let dir = tempdir().unwrap();
    let status = bin()
        .args(["simulate", "--seed", "1", "--out"])
        .arg(dir.path().join("x.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn evaluate_without_labels_omits_ari_with_notice() {
    let dir = tempdir().unwrap();
    let data_path = dir.path().join("plain.csv");
    // Dataset without a label column.
    let data = sample_dataset(false);
    write_dataset_csv(&data_path, &data).unwrap();
    let (spec, prov) = {
        let params = MixtureParams::new(
            vec![1.0],
            vec![DMatrix::zeros(1, 2)],
            vec![DVector::from_vec(vec![1.0])],
        )
        .unwrap();
        (
            ModelSpec {
                k: 1,
                pattern: SparsityPattern::empty(),
                ranks: None,
                params,
                loglik: -1.0,
                dim: 1,
                converged: true,
            },
            Provenance {
                procedure: "lasso-mle".into(),
                k: 1,
                lambda: None,
                ranks: None,
            },
        )
    };
    let record = ModelRecord::from_spec(&spec, &prov);
    let model_path = dir.path().join("model.json");
    std::fs::write(&model_path, serde_json::to_string(&record).unwrap()).unwrap();
    let out = dir.path().join("eval.json");
    let status = bin()
        .args(["evaluate", "--kl-samples", "2000", "--model"])
        .arg(&model_path)
        .arg("--data")
        .arg(&data_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["metrics"]["ari"].is_null());
    assert!(report["metrics"]["kl"].is_null());
    let notices = report["notices"].as_array().unwrap();
    assert!(notices.iter().any(|n| n.as_str().unwrap().contains("ARI")));
    // One response is exactly zero in the sample dataset.
    assert_eq!(report["metrics"]["mape_excluded"], 1);
}

#[test]
fn wavelet_constant_functions_have_zero_details() {
    let dir = tempdir().unwrap();
    let f_path = dir.path().join("f.csv");
    std::fs::write(&f_path, "2,2,2,2\n3,3,3,3\n").unwrap();
    let out_dir = dir.path().join("wav");
    let status = bin()
        .args(["wavelet", "--basis", "haar", "--level", "2", "--x"])
        .arg(&f_path)
        .arg("--out-dir")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    let data = read_dataset_csv(&out_dir.join("dataset.csv")).unwrap();
    // Columns beyond the level-2 approximation (length 1) are all details.
    for i in 0..2 {
        for m in 1..data.q() {
            assert!(
                data.y()[(i, m)].abs() < 1e-12,
                "detail coefficient y{}{} nonzero",
                i,
                m
            );
        }
    }
}

#[test]
fn evaluate_emits_metric_rows_and_accepts_custom_truth() {
    let dir = tempdir().unwrap();
    let spec_path = dir.path().join("truth.json");
    std::fs::write(
        &spec_path,
        r#"{"n":40,"p":5,"q":4,"k":2,"b_values":[2.0,-2.0],"sigma":1.0,"pi":[0.5,0.5]}"#,
    )
    .unwrap();
    let data_path = dir.path().join("data.csv");
    assert!(bin()
        .args(["simulate", "--seed", "4", "--spec"])
        .arg(&spec_path)
        .arg("--out")
        .arg(&data_path)
        .status()
        .unwrap()
        .success());
    // Evaluate the generating parameters themselves as a model record.
    let sim = mixreg::evalsim::SimModelSpec {
        n: 40,
        p: 5,
        q: 4,
        k: 2,
        b_values: vec![2.0, -2.0],
        sigma: 1.0,
        pi: vec![0.5, 0.5],
        seed: 4,
    };
    let record = ModelRecord::from_spec(
        &ModelSpec {
            k: 2,
            pattern: sim.true_pattern(),
            ranks: None,
            params: sim.true_params().unwrap(),
            loglik: 0.0,
            dim: 19,
            converged: true,
        },
        &Provenance {
            procedure: "truth".into(),
            k: 2,
            lambda: None,
            ranks: None,
        },
    );
    let model_path = dir.path().join("model.json");
    std::fs::write(&model_path, serde_json::to_string(&record).unwrap()).unwrap();
    let out = dir.path().join("eval.json");
    let row = dir.path().join("row.csv");
    assert!(bin()
        .args(["evaluate", "--kl-samples", "3000", "--tag", "seed4", "--truth-spec"])
        .arg(&spec_path)
        .arg("--model")
        .arg(&model_path)
        .arg("--data")
        .arg(&data_path)
        .arg("--row-out")
        .arg(&row)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["tag"], "seed4");
    assert_eq!(report["procedure"], "truth");
    assert_eq!(report["K"], 2);
    assert_eq!(report["metrics"]["tr"], 8);
    assert_eq!(report["metrics"]["fr"], 0);
    let body = std::fs::read_to_string(&row).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("tag,procedure,K,dim,ari"));
    assert!(lines[1].starts_with("seed4,truth,2,19,"));
}

#[test]
fn evaluate_reconstructs_cluster_representatives() {
    let dir = tempdir().unwrap();
    let wav = dir.path().join("wav");
    assert!(bin()
        .args([
            "wavelet",
            "--generate-cosine",
            "--n",
            "60",
            "--grid-len",
            "15",
            "--seed",
            "2",
            "--basis",
            "daubechies2",
            "--level",
            "2",
            "--out-dir"
        ])
        .arg(&wav)
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args([
            "fit",
            "--procedure",
            "lasso-mle",
            "--kmin",
            "2",
            "--kmax",
            "2",
            "--lambda-count",
            "8",
            "--seed",
            "2",
            "--n-init",
            "5",
            "--init-iter",
            "4",
            "--data"
        ])
        .arg(wav.join("dataset.csv"))
        .arg("--out-dir")
        .arg(dir.path().join("fit"))
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args(["select", "--criterion", "bic", "--collection"])
        .arg(dir.path().join("fit/collection.json"))
        .arg("--out")
        .arg(dir.path().join("sel.json"))
        .status()
        .unwrap()
        .success());
    let out = dir.path().join("eval.json");
    assert!(bin()
        .args(["evaluate", "--threshold", "0.6", "--model"])
        .arg(dir.path().join("sel.json"))
        .arg("--data")
        .arg(wav.join("dataset.csv"))
        .arg("--wavelet-manifest")
        .arg(wav.join("manifest.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let rep_path = report["representatives"].as_str().expect("path recorded");
    let body = std::fs::read_to_string(rep_path).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    // Header plus one curve per component that cleared the threshold; curves
    // are on the original 15-point grid.
    assert_eq!(lines[0].split(',').count(), 16);
    assert!(lines.len() >= 2, "no representative rows: {body}");
    // Both clusters share the cosine predictor shape, so every representative
    // reconstructed from the relevant coefficients must correlate with it.
    for line in &lines[1..] {
        let v: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|f| f.parse::<f64>().unwrap())
            .collect();
        let cosine: Vec<f64> = (0..15)
            .map(|j| (2.0 * std::f64::consts::PI * j as f64 / 14.0).cos())
            .collect();
        let dot: f64 = v.iter().zip(&cosine).map(|(a, b)| a * b).sum();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nc: f64 = cosine.iter().map(|a| a * a).sum::<f64>().sqrt();
        let correlation = dot / (nv * nc);
        assert!(
            correlation > 0.8,
            "representative does not follow the cosine shape: {correlation}"
        );
    }
}

fn assert_same_bytes(a: &Path, b: &Path) {
    let ba = std::fs::read(a).unwrap();
    let bb = std::fs::read(b).unwrap();
    assert_eq!(ba, bb, "{} differs from {}", a.display(), b.display());
}

#[test]
fn select_is_deterministic_across_reruns() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert!(bin()
        .args(["simulate", "--model", "2", "--seed", "5", "--out"])
        .arg(&data)
        .status()
        .unwrap()
        .success());
    for tag in ["a", "b"] {
        assert!(bin()
            .args([
                "fit",
                "--procedure",
                "lasso-mle",
                "--kmin",
                "2",
                "--kmax",
                "2",
                "--lambda-count",
                "8",
                "--seed",
                "5",
                "--n-init",
                "4",
                "--init-iter",
                "3",
                "--data",
            ])
            .arg(&data)
            .arg("--out-dir")
            .arg(dir.path().join(format!("fit_{tag}")))
            .status()
            .unwrap()
            .success());
        assert!(bin()
            .args(["select", "--criterion", "slope", "--collection"])
            .arg(dir.path().join(format!("fit_{tag}/collection.json")))
            .arg("--out")
            .arg(dir.path().join(format!("sel_{tag}.json")))
            .status()
            .unwrap()
            .success());
    }
    // The fit config embeds only the data path, equal here; outputs must match.
    assert_same_bytes(
        &dir.path().join("fit_a/collection.json"),
        &dir.path().join("fit_b/collection.json"),
    );
    assert_same_bytes(
        &dir.path().join("fit_a/slope_points.csv"),
        &dir.path().join("fit_b/slope_points.csv"),
    );
    let sa = std::fs::read_to_string(dir.path().join("sel_a.json")).unwrap();
    let sb = std::fs::read_to_string(dir.path().join("sel_b.json")).unwrap();
    // Selection outputs embed the collection path; compare past the config.
    let ja: serde_json::Value = serde_json::from_str(&sa).unwrap();
    let jb: serde_json::Value = serde_json::from_str(&sb).unwrap();
    assert_eq!(ja["model"], jb["model"]);
    assert_eq!(ja["kappa_hat"], jb["kappa_hat"]);
}
