use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn skelact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skelact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path, name: &str, per_class: usize, seed: u64) -> PathBuf {
    let out = dir.join(name);
    let o = skelact(&[
        "synth",
        "--out",
        s(&out),
        "--per-class",
        &per_class.to_string(),
        "--min-frames",
        "10",
        "--max-frames",
        "14",
        "--seed",
        &seed.to_string(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn tiny_config(dir: &Path, data: &Path, out_dir: &Path) -> PathBuf {
    let text = format!(
        r#"seed = 3

[paths]
dataset = "{}"
out_dir = "{}"

[model]
blstm_layers = 1
hidden_size = 4
dense_hidden = 6
gi_k = 3

[augment]
copies = {{ affine = 1 }}

[train]
epochs = 3
batch_size = 8
validation_fraction = 0.2
test_split = {{ kind = "fraction", fraction = 0.3 }}
optimizer = {{ lr = 0.001 }}
"#,
        s(data),
        s(out_dir)
    );
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn export_doc(offset: f64, frames: usize) -> String {
    let body: Vec<String> = (0..frames)
        .map(|t| {
            let vals: Vec<String> = (0..18)
                .flat_map(|k| {
                    [
                        format!("{}", 100.0 + k as f64 * 5.0 + offset + t as f64 * 20.0),
                        format!("{}", 50.0 + k as f64 * 9.0),
                        "0.8".to_string(),
                    ]
                })
                .collect();
            format!(
                "{{\"frame_index\":{t},\"people\":[{{\"pose_keypoints_2d\":[{}]}}]}}",
                vals.join(",")
            )
        })
        .collect();
    format!("[{}]", body.join(","))
}

#[test]
fn ingest_builds_one_sequence_per_export() {
    let dir = TempDir::new().unwrap();
    let exports = dir.path().join("exports");
    fs::create_dir(&exports).unwrap();
    for (i, clip) in ["a01", "a02", "b01"].iter().enumerate() {
        fs::write(
            exports.join(format!("{clip}.json")),
            export_doc(i as f64, 4 + i),
        )
        .unwrap();
    }
    let manifest = dir.path().join("labels.csv");
    fs::write(
        &manifest,
        "clip_id,class_name\na01,wave\na02,wave\nb01,clap\n",
    )
    .unwrap();
    let out = dir.path().join("data.skds");
    let o = skelact(&[
        "ingest",
        "--exports",
        s(&exports),
        "--labels",
        s(&manifest),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("a02,wave,5,0"), "{text}");
    let data = skelact::pose_ingest::format::decode_dataset(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(data.len(), 3);
    assert_eq!(data.class_names, vec!["clap", "wave"]);

    fs::write(&manifest, "a01,wave\nb01,clap\n").unwrap();
    let out2 = dir.path().join("other.skds");
    let o = skelact(&[
        "ingest",
        "--exports",
        s(&exports),
        "--labels",
        s(&manifest),
        "--out",
        s(&out2),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("a02"));
    assert!(!out2.exists());
}

#[test]
fn dfd_and_augment_write_datasets() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "d.skds", 2, 1);
    let (dfd_out, stats) = (dir.path().join("dfd.skds"), dir.path().join("stats.csv"));
    let o = skelact(&[
        "dfd",
        "--input",
        s(&data),
        "--out",
        s(&dfd_out),
        "--stats",
        s(&stats),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&stats).unwrap().lines().count(), 7);
    let aug = dir.path().join("aug.skds");
    let o = skelact(&[
        "augment",
        "--input",
        s(&dfd_out),
        "--out",
        s(&aug),
        "--affine",
        "1",
        "--noise",
        "2",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("6 sequences -> 24"));
    let o = skelact(&[
        "augment",
        "--input",
        s(&dfd_out),
        "--out",
        s(&aug),
        "--scale-min",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_eval_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "d.skds", 8, 2);
    let out_dir = dir.path().join("run");
    let cfg = tiny_config(dir.path(), &data, &out_dir);
    let o = skelact(&["train", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "model.skck",
        "report.json",
        "curves.csv",
        "dfd_stats.csv",
        "timings.csv",
        "resolved_config.toml",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["train"]["model"]["n_classes"], 3);
    assert_eq!(report["train"]["config"]["optimizer"]["lr"], 0.001);

    let metrics = dir.path().join("metrics.json");
    let o = skelact(&[
        "eval",
        "--checkpoint",
        s(&out_dir.join("model.skck")),
        "--data",
        s(&data),
        "--out",
        s(&metrics),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(m["n"], 24);

    let o = skelact(&[
        "report",
        "--curves",
        s(&out_dir.join("curves.csv")),
        "--out-dir",
        s(&out_dir),
    ]);
    assert!(o.status.success());
    assert!(fs::read_to_string(out_dir.join("loss.svg"))
        .unwrap()
        .contains("<polyline"));

    let resolved = out_dir.join("resolved_config.toml");
    let again = dir.path().join("again");
    let o = skelact(&["train", "--config", s(&resolved), "--out-dir", s(&again)]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(again.join("report.json")).unwrap(),
        fs::read(out_dir.join("report.json")).unwrap()
    );
}

#[test]
fn missing_dataset_is_a_validation_error_without_outputs() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("run");
    let cfg = tiny_config(dir.path(), &dir.path().join("absent.skds"), &out_dir);
    let o = skelact(&["train", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out_dir.exists());

    fs::write(
        &cfg,
        "[paths]\ndataset = \"x\"\nout_dir = \"y\"\n[train]\nepochs = 0\n",
    )
    .unwrap();
    assert_eq!(
        skelact(&["train", "--config", s(&cfg)]).status.code(),
        Some(1)
    );
}

#[test]
fn layer_sweep_writes_one_report_per_depth() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "d.skds", 6, 4);
    let out_dir = dir.path().join("sweep");
    let cfg = tiny_config(dir.path(), &data, &out_dir);
    let o = skelact(&["train", "--config", s(&cfg), "--layers", "1,2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for l in [1, 2] {
        let r = fs::read_to_string(out_dir.join(format!("layers_{l}/report.json"))).unwrap();
        assert!(r.contains(&format!("\"blstm_layers\": {l}")));
    }
    assert_eq!(
        fs::read_to_string(out_dir.join("depth_summary.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn ablate_emits_five_variants_and_size_sweep() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "d.skds", 6, 5);
    let out_dir = dir.path().join("abl");
    let cfg = tiny_config(dir.path(), &data, &out_dir);
    let o = skelact(&["ablate", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out_dir.join("ablation.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].starts_with("baseline,false,1,0,"));
    assert!(rows.iter().all(|r| r.ends_with(",ok")));

    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace("validation_fraction = 0.2", "validation_fraction = 0.0");
    fs::write(&cfg, text).unwrap();
    let o = skelact(&["ablate", "--config", s(&cfg), "--sizes", "0,12,24"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out_dir.join("augment_sizes.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.contains("\n24,2,36,"));
    let o = skelact(&["ablate", "--config", s(&cfg), "--sizes", "5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn gradcheck_passes_and_negative_control_fails() {
    let o = skelact(&["gradcheck"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
    let a = skelact(&["gradcheck", "--epsilon", "1e-5", "--seed", "3"]);
    let b = skelact(&["gradcheck", "--epsilon", "1e-5", "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);
    let c = skelact(&["gradcheck", "--corrupt"]);
    assert_eq!(c.status.code(), Some(2));
    assert!(stdout(&c).contains("FAIL"));
    assert_eq!(
        skelact(&["gradcheck", "--epsilon=-1"]).status.code(),
        Some(1)
    );
    assert_eq!(skelact(&["gradcheck", "--bogus"]).status.code(), Some(1));
}
