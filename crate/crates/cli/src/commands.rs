use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use skelact::neural_core::checkpoint::decode_checkpoint;
use skelact::neural_core::gradcheck::GradCheckReport;
use skelact::neural_core::{InputNorm, Mode, Model, ModelConfig};
use skelact::pose_ingest::format::{dataset_to_csv, decode_dataset, encode_dataset};
use skelact::pose_ingest::{preprocess_export, PreprocessConfig, POSE_DIM};
use skelact::sequence_ops::{
    augment_dataset, dfd_dataset, synth_generate, AugmentCopies, AugmentSpec, Batch, Dataset,
    DfdConfig, SynthConfig,
};
use skelact::training::{evaluate, gradcheck_model, GradcheckOptions, Metrics};

use crate::cli::{
    AblateArgs, AugmentArgs, DfdArgs, EvalArgs, GradcheckArgs, IngestArgs, ReportArgs, SynthArgs,
    TrainArgs,
};
use crate::config::RunConfig;
use crate::experiments::{
    ablation_csv, ablation_variants, dfd_stats_csv, make_splits, run_ablation, run_size_sweep,
    run_training,
};
use crate::output::Outputs;
use crate::svg::{line_chart, Series};
use crate::CliError;

fn read(path: &Path, what: &str) -> Result<Vec<u8>, CliError> {
    std::fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read {what} {}: {e}", path.display())))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Ok(decode_dataset(&read(path, "dataset")?)?)
}

/// `clip_id -> class_name` from a two-column CSV; a `clip_id,class_name` header is optional.
pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.replace(' ', "") == "clip_id,class_name") {
            continue;
        }
        let (clip, class) = line
            .split_once(',')
            .map(|(a, b)| (a.trim(), b.trim()))
            .filter(|(a, b)| !a.is_empty() && !b.is_empty() && !b.contains(','))
            .ok_or_else(|| {
                CliError::Validation(format!(
                    "manifest line {}: expected `clip_id,class_name`",
                    n + 1
                ))
            })?;
        if out.insert(clip.to_string(), class.to_string()).is_some() {
            return Err(CliError::Validation(format!(
                "manifest lists clip `{clip}` twice"
            )));
        }
    }
    Ok(out)
}

pub fn ingest(a: &IngestArgs) -> Result<(), CliError> {
    let cfg = PreprocessConfig { theta: a.theta };
    cfg.validate()?;
    let manifest = parse_manifest(&String::from_utf8_lossy(&read(
        &a.labels,
        "label manifest",
    )?))?;
    let entries = std::fs::read_dir(&a.exports)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", a.exports.display())))?;
    let mut files = BTreeMap::new();
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.insert(stem.to_string(), path.clone());
            }
        }
    }
    let unlabeled: Vec<&str> = files
        .keys()
        .filter(|k| !manifest.contains_key(*k))
        .map(String::as_str)
        .collect();
    if !unlabeled.is_empty() {
        return Err(CliError::Validation(format!(
            "missing label for clip(s): {}",
            unlabeled.join(", ")
        )));
    }
    let missing: Vec<&str> = manifest
        .keys()
        .filter(|k| !files.contains_key(*k))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Validation(format!(
            "no export file for clip(s): {}",
            missing.join(", ")
        )));
    }
    if files.is_empty() {
        return Err(CliError::Validation(format!(
            "no .json exports in {}",
            a.exports.display()
        )));
    }
    let class_names: Vec<String> = manifest
        .values()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut sequences = Vec::with_capacity(files.len());
    println!("clip_id,class,frames,skipped_frames");
    for (clip, path) in &files {
        let text = String::from_utf8(read(path, "export")?)
            .map_err(|_| CliError::Validation(format!("{} is not UTF-8", path.display())))?;
        let class = &manifest[clip];
        let label = class_names
            .iter()
            .position(|c| c == class)
            .expect("class collected from manifest");
        let (seq, skipped) = preprocess_export(&text, clip, label, &cfg)?;
        println!("{clip},{class},{},{skipped}", seq.len());
        sequences.push(seq);
    }
    let data = Dataset::new(class_names, sequences)?;
    let mut out = Outputs::default();
    out.add(&a.out, encode_dataset(&data));
    if let Some(csv) = &a.csv {
        out.add(csv, dataset_to_csv(&data));
    }
    out.commit()?;
    println!(
        "wrote {} clips, {} classes, {} frames",
        data.len(),
        data.n_classes(),
        data.total_frames()
    );
    Ok(())
}

pub fn dfd(a: &DfdArgs) -> Result<(), CliError> {
    let cfg = DfdConfig { cutoff: a.cutoff };
    cfg.validate()?;
    let data = load_dataset(&a.input)?;
    let (out_data, stats) = dfd_dataset(&data, &cfg);
    let csv = dfd_stats_csv(&stats);
    print!("{csv}");
    let dropped: usize = stats.iter().map(|s| s.dropped()).sum();
    println!(
        "dropped {dropped} of {} frames, {:.2} per clip",
        data.total_frames(),
        dropped as f64 / stats.len().max(1) as f64
    );
    let mut out = Outputs::default();
    out.add(&a.out, encode_dataset(&out_data));
    if let Some(p) = &a.stats {
        out.add(p, csv);
    }
    out.commit()
}

pub fn augment(a: &AugmentArgs) -> Result<(), CliError> {
    let spec = AugmentSpec {
        translate_range: a.translate_range,
        scale_range: (a.scale_min, a.scale_max),
        noise_sigma: a.noise_sigma,
        copies: AugmentCopies {
            translate: a.translate,
            scale: a.scale,
            noise: a.noise,
            affine: a.affine,
        },
    };
    spec.validate()?;
    let data = load_dataset(&a.input)?;
    let out_data = augment_dataset(&data, &spec, a.seed)?;
    println!("{} sequences -> {}", data.len(), out_data.len());
    let mut out = Outputs::default();
    out.add(&a.out, encode_dataset(&out_data));
    out.commit()
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        n_classes: a.classes,
        n_per_class: a.per_class,
        min_frames: a.min_frames,
        max_frames: a.max_frames,
        ..Default::default()
    };
    let data = synth_generate(&cfg, a.seed)?;
    let mut out = Outputs::default();
    out.add(&a.out, encode_dataset(&data));
    if let Some(csv) = &a.csv {
        out.add(csv, dataset_to_csv(&data));
    }
    out.commit()?;
    println!(
        "wrote {} clips of classes {}",
        data.len(),
        data.class_names.join(", ")
    );
    Ok(())
}

fn load_run(
    config: &Path,
    seed: Option<u64>,
    out_dir: Option<&Path>,
) -> Result<(RunConfig, Dataset, Option<Dataset>), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = out_dir {
        cfg.paths.out_dir = d.to_path_buf();
    }
    let data = load_dataset(&cfg.paths.dataset)?;
    let test = cfg
        .paths
        .test_dataset
        .as_deref()
        .map(load_dataset)
        .transpose()?;
    Ok((cfg, data, test))
}

fn summary(m: &Metrics) -> String {
    format!(
        "top1 {:.4} top3 {:.4} top5 {:.4} macro_f1 {:.4} (bootstrap mean {:.4}, 95% [{:.4}, {:.4}])",
        m.top1, m.top3, m.top5, m.macro_f1, m.bootstrap.mean, m.bootstrap.lo, m.bootstrap.hi
    )
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let (cfg, data, test) = load_run(&a.config, a.seed, a.out_dir.as_deref())?;
    let splits = make_splits(&cfg, &data, test.as_ref())?;
    let depths: Vec<Option<usize>> = if a.layers.is_empty() {
        vec![None]
    } else {
        a.layers.iter().map(|&l| Some(l)).collect()
    };
    let mut out = Outputs::default();
    let mut depth_rows = String::from("layers,top1,top3,top5,macro_f1\n");
    for depth in depths {
        let mut run = cfg.clone();
        let dir = match depth {
            Some(l) => {
                run.model.blstm_layers = l;
                run.validate()?;
                cfg.paths.out_dir.join(format!("layers_{l}"))
            }
            None => cfg.paths.out_dir.clone(),
        };
        run.model.n_classes = data.n_classes();
        run.paths.out_dir = dir.clone();
        let art = run_training(&run, &splits)?;
        let m = &art.report.test;
        println!(
            "layers {}: {} train / {} val / {} test, best epoch {:?}: {}",
            run.model.blstm_layers,
            splits.train.len(),
            splits.val.len(),
            splits.test.len(),
            art.report.train.best_epoch,
            summary(m)
        );
        let _ = writeln!(
            depth_rows,
            "{},{},{},{},{}",
            run.model.blstm_layers, m.top1, m.top3, m.top5, m.macro_f1
        );
        out.add(dir.join("model.skck"), art.checkpoint.clone());
        out.add(dir.join("report.json"), art.report_json());
        out.add(dir.join("curves.csv"), art.report.train.curves_csv());
        out.add(dir.join("dfd_stats.csv"), dfd_stats_csv(&art.dfd_stats));
        out.add(dir.join("timings.csv"), art.timings_csv());
        out.add(dir.join("resolved_config.toml"), run.to_toml());
    }
    if !a.layers.is_empty() {
        out.add(cfg.paths.out_dir.join("depth_summary.csv"), depth_rows);
    }
    out.commit()
}

pub fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let ckpt = decode_checkpoint(&read(&a.checkpoint, "checkpoint")?)?;
    let data = load_dataset(&a.data)?;
    if data.class_names != ckpt.header.class_names {
        return Err(CliError::Validation(format!(
            "dataset classes [{}] differ from the model's [{}]",
            data.class_names.join(", "),
            ckpt.header.class_names.join(", ")
        )));
    }
    let data = match ckpt.header.dfd_cutoff {
        Some(cutoff) => dfd_dataset(&data, &DfdConfig { cutoff }).0,
        None => data,
    };
    let m = evaluate(&ckpt.model, &data, a.bootstrap_trials, a.seed)?;
    println!("{} clips: {}", m.n, summary(&m));
    if let Some(p) = &a.out {
        let mut out = Outputs::default();
        out.add(
            p,
            serde_json::to_string_pretty(&m).expect("metrics serialize") + "\n",
        );
        out.commit()?;
    }
    Ok(())
}

pub fn ablate(a: &AblateArgs) -> Result<(), CliError> {
    let (cfg, data, test) = load_run(&a.config, a.seed, None)?;
    let splits = make_splits(&cfg, &data, test.as_ref())?;
    let (csv, default_name) = if a.sizes.is_empty() {
        let rows = run_ablation(&cfg, &splits, &ablation_variants());
        for r in &rows {
            match &r.result {
                Ok(m) => println!("{:<14} {}", r.variant, summary(m)),
                Err(e) => println!("{:<14} failed: {e}", r.variant),
            }
        }
        (ablation_csv(&rows), "ablation.csv")
    } else {
        (
            run_size_sweep(&cfg, &splits, &a.sizes)?,
            "augment_sizes.csv",
        )
    };
    print!("{csv}");
    let path = a
        .out
        .clone()
        .unwrap_or_else(|| cfg.paths.out_dir.join(default_name));
    let mut out = Outputs::default();
    out.add(path, csv);
    out.commit()
}

/// Tiny model and two-clip batch (lengths 7 and 5) for gradient checking.
pub fn gradcheck_setup(seed: u64) -> Result<(Model, Batch), CliError> {
    let cfg = ModelConfig {
        blstm_layers: 2,
        hidden_size: 4,
        dense_hidden: 5,
        n_classes: 3,
        gi_k: 3,
        dropout_rate: 0.0,
        ..Default::default()
    };
    let mut model = Model::new(cfg, seed)?;
    let synth = SynthConfig {
        n_classes: 3,
        n_per_class: 1,
        min_frames: 7,
        max_frames: 7,
        ..Default::default()
    };
    let data = synth_generate(&synth, seed)?;
    let a = data.sequences[0].clone();
    let mut b = data.sequences[2].clone();
    b.frames.truncate(5);
    model.input_norm = InputNorm::fit(
        POSE_DIM,
        [&a, &b]
            .into_iter()
            .flat_map(|s| s.frames.iter().map(|f| (&f.values[..], &f.mask[..]))),
    );
    Ok((model, Batch::from_sequences(&[&a, &b])?))
}

pub fn gradcheck_table(rep: &GradCheckReport) -> String {
    let mut s = String::from("kind,checked,max_rel_error,worst_param,index,analytic,numeric\n");
    for (kind, k) in &rep.per_kind {
        let _ = writeln!(
            s,
            "{kind:?},{},{:.3e},{},{},{:.6e},{:.6e}",
            k.checked, k.max_rel_error, k.worst_param, k.worst_index, k.analytic, k.numeric
        );
    }
    s
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<(), CliError> {
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
        return Err(CliError::Validation(format!(
            "epsilon must be positive, got {}",
            a.epsilon
        )));
    }
    let (model, batch) = gradcheck_setup(a.seed)?;
    let rep = gradcheck_model(
        &model,
        &batch,
        &GradcheckOptions {
            mode: Mode::Train,
            epsilon: a.epsilon,
            seed: a.seed,
            corrupt: a.corrupt,
            ..Default::default()
        },
    )?;
    print!("{}", gradcheck_table(&rep));
    if rep.passes(a.tolerance) {
        println!(
            "PASS max relative error {:.3e} < {:e}",
            rep.max_rel_error(),
            a.tolerance
        );
        Ok(())
    } else {
        println!(
            "FAIL max relative error {:.3e} >= {:e}",
            rep.max_rel_error(),
            a.tolerance
        );
        Err(CliError::Runtime("gradient check failed".into()))
    }
}

/// Columns of a curves CSV, keyed by header name. Empty cells are skipped.
/// A named series of `(epoch, value)` points.
pub type Curve = (String, Vec<(f64, f64)>);

pub fn parse_curves(text: &str) -> Result<Vec<Curve>, CliError> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| CliError::Validation("empty curves file".into()))?
        .split(',')
        .collect();
    if header.first() != Some(&"epoch") {
        return Err(CliError::Validation(
            "curves file must start with an `epoch` column".into(),
        ));
    }
    let mut cols: Vec<(String, Vec<(f64, f64)>)> = header[1..]
        .iter()
        .map(|h| (h.to_string(), Vec::new()))
        .collect();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(CliError::Validation(format!(
                "curves line {}: wrong number of cells",
                n + 2
            )));
        }
        let num = |c: &str| {
            c.parse::<f64>().map_err(|_| {
                CliError::Validation(format!("curves line {}: bad number `{c}`", n + 2))
            })
        };
        let x = num(cells[0])?;
        for (col, cell) in cols.iter_mut().zip(&cells[1..]) {
            if !cell.is_empty() {
                col.1.push((x, num(cell)?));
            }
        }
    }
    Ok(cols)
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let text = String::from_utf8_lossy(&read(&a.curves, "curves file")?).into_owned();
    let cols = parse_curves(&text)?;
    let pick = |names: &[&str]| -> Vec<Series> {
        cols.iter()
            .filter(|(n, _)| names.contains(&n.as_str()))
            .map(|(n, p)| Series {
                name: n,
                points: p.clone(),
            })
            .collect()
    };
    let mut out = Outputs::default();
    out.add(
        a.out_dir.join("loss.svg"),
        line_chart("loss", &pick(&["ce_loss", "l2_loss"])),
    );
    out.add(
        a.out_dir.join("accuracy.svg"),
        line_chart("accuracy", &pick(&["train_acc", "val_acc"])),
    );
    out.commit()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parsing() {
        let m = parse_manifest("clip_id,class_name\na, wave\n\nb,clap\n").unwrap();
        assert_eq!(m["a"], "wave");
        assert_eq!(m.len(), 2);
        assert!(parse_manifest("a,wave\na,clap\n").is_err());
        assert!(parse_manifest("a\n").is_err());
        assert!(parse_manifest("a,b,c\n").is_err());
    }

    #[test]
    fn curves_parsing_skips_empty_cells() {
        let cols = parse_curves("epoch,ce_loss,val_acc\n1,0.5,\n2,0.4,0.75\n").unwrap();
        assert_eq!(cols[0].1, vec![(1.0, 0.5), (2.0, 0.4)]);
        assert_eq!(cols[1].1, vec![(2.0, 0.75)]);
        assert!(parse_curves("x,y\n").is_err());
        assert!(parse_curves("epoch,a\n1\n").is_err());
    }

    #[test]
    fn gradcheck_batch_has_one_padded_sample() {
        let (_, batch) = gradcheck_setup(0).unwrap();
        assert_eq!(batch.lengths, vec![7, 5]);
        assert_eq!(batch.max_len(), 7);
    }
}
