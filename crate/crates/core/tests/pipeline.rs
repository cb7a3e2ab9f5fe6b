use skelact::neural_core::checkpoint::{
    decode_checkpoint, encode_checkpoint, Checkpoint, CheckpointHeader,
};
use skelact::neural_core::{Model, ModelConfig, OptimizerConfig};
use skelact::pose_ingest::format::{decode_dataset, encode_dataset};
use skelact::pose_ingest::{preprocess_export, PreprocessConfig};
use skelact::sequence_ops::{
    augment_dataset, dfd_dataset, AugmentCopies, AugmentSpec, Dataset, DfdConfig,
};
use skelact::training::{predict, train, TrainConfig};

fn export(offset: f64, frames: usize, step: f64) -> String {
    let body: Vec<String> = (0..frames)
        .map(|t| {
            let vals: Vec<String> = (0..18)
                .flat_map(|k| {
                    let x = 100.0 + offset + 4.0 * k as f64 + step * t as f64;
                    let y = 200.0 + 3.0 * k as f64 - offset;
                    let conf = if k == 17 && t % 2 == 0 { 0.05 } else { 0.9 };
                    [x, y, conf]
                })
                .map(|v| v.to_string())
                .collect();
            format!(
                r#"{{"frame_index":{t},"people":[{{"pose_keypoints_2d":[{}]}}]}}"#,
                vals.join(",")
            )
        })
        .collect();
    format!("[{}]", body.join(","))
}

fn ingested() -> Dataset {
    let cfg = PreprocessConfig::default();
    let sequences = (0..8)
        .map(|i| {
            let label = i % 2;
            let doc = export(10.0 * i as f64, 12 + i, if label == 0 { 1.0 } else { 6.0 });
            let (seq, skipped) = preprocess_export(&doc, &format!("clip{i}"), label, &cfg).unwrap();
            assert_eq!(skipped, 0);
            seq
        })
        .collect();
    Dataset::new(vec!["slow".into(), "fast".into()], sequences).unwrap()
}

#[test]
fn low_confidence_keypoints_are_masked() {
    let data = ingested();
    let f0 = &data.sequences[0].frames[0];
    assert!(!f0.mask[34] && !f0.mask[35]);
    assert_eq!((f0.values[34], f0.values[35]), (0.0, 0.0));
    assert!(data.sequences[0].frames[1].mask[34]);
}

#[test]
fn dfd_then_augment_survives_the_file_format() {
    let (dropped, stats) = dfd_dataset(&ingested(), &DfdConfig::default());
    assert_eq!(stats.len(), 8);
    // only x moves: 6 px per frame is a distance of about 25, 1 px about 4
    assert!(stats
        .iter()
        .filter(|s| s.clip_id.ends_with(['1', '3', '5', '7']))
        .all(|s| s.dropped() == 0));
    assert!(stats
        .iter()
        .filter(|s| s.clip_id.ends_with(['0', '2', '4', '6']))
        .all(|s| s.dropped() > 0));
    let spec = AugmentSpec {
        copies: AugmentCopies {
            affine: 1,
            noise: 1,
            ..Default::default()
        },
        ..Default::default()
    };
    let augmented = augment_dataset(&dropped, &spec, 3).unwrap();
    assert_eq!(augmented.len(), 24);
    let bytes = encode_dataset(&augmented);
    assert_eq!(decode_dataset(&bytes).unwrap(), augmented);
    assert_eq!(augment_dataset(&dropped, &spec, 3).unwrap(), augmented);
}

#[test]
fn trained_model_predicts_identically_after_checkpoint_round_trip() {
    let data = ingested();
    let cfg = ModelConfig {
        blstm_layers: 2,
        hidden_size: 4,
        dense_hidden: 4,
        n_classes: 2,
        gi_k: 3,
        ..Default::default()
    };
    let mut model = Model::new(cfg, 1).unwrap();
    let tcfg = TrainConfig {
        epochs: 3,
        batch_size: 4,
        seed: 1,
        patience: None,
        optimizer: OptimizerConfig {
            lr: 1e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let outcome = train(&mut model, &data, &data.select(&[]), &tcfg).unwrap();
    assert_eq!(outcome.report.epochs.len(), 3);
    let ckpt = Checkpoint {
        header: CheckpointHeader {
            model: model.config,
            class_names: data.class_names.clone(),
            theta: 0.1,
            dfd_cutoff: Some(tcfg.dfd.cutoff),
            gi_k: model.config.gi_k,
            optimizer: tcfg.optimizer,
        },
        model: model.clone(),
        optimizer_state: Some(outcome.optimizer_state),
    };
    let restored = decode_checkpoint(&encode_checkpoint(&ckpt)).unwrap();
    for seq in &data.sequences {
        let a = predict(&model, seq).unwrap();
        let b = predict(&restored.model, seq).unwrap();
        assert_eq!(a, b);
        assert!((a.sum() - 1.0).abs() < 1e-12);
    }
}
