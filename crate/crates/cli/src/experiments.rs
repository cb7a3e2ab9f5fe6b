//! Training pipeline shared by `train` and `ablate`.

use serde::Serialize;
use skelact::neural_core::checkpoint::{encode_checkpoint, Checkpoint, CheckpointHeader};
use skelact::neural_core::Model;
use skelact::rng::derive_seed;
use skelact::sequence_ops::{AugmentCopies, Dataset, DfdStats};
use skelact::training::{
    check_disjoint, evaluate, split_dataset, train, EvalSplit, Metrics, TrainReport,
};

use crate::config::RunConfig;
use crate::CliError;

pub const RUN_REPORT_VERSION: u32 = 1;

const STREAM_TEST_SPLIT: u64 = 10;
const STREAM_VAL_SPLIT: u64 = 11;
const STREAM_TEST_BOOTSTRAP: u64 = 12;

/// Train, validation and test sets of one run.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Carve test and validation sets out of `data`, or take the test set as given.
pub fn make_splits(
    cfg: &RunConfig,
    data: &Dataset,
    test: Option<&Dataset>,
) -> Result<Splits, CliError> {
    let (pool, test) = match test {
        Some(t) => {
            if t.class_names != data.class_names {
                return Err(CliError::Validation(
                    "test dataset has different class names".into(),
                ));
            }
            check_disjoint(data, t)?;
            (data.clone(), t.clone())
        }
        None => split_dataset(
            data,
            &cfg.train.test_split,
            derive_seed(cfg.seed, &[STREAM_TEST_SPLIT]),
        )?,
    };
    if test.is_empty() {
        return Err(CliError::Validation("the test set is empty".into()));
    }
    let (train, val) = if cfg.train.validation_fraction > 0.0 {
        let split = EvalSplit::Fraction {
            fraction: cfg.train.validation_fraction,
        };
        split_dataset(&pool, &split, derive_seed(cfg.seed, &[STREAM_VAL_SPLIT]))?
    } else {
        let empty = pool.select(&[]);
        (pool, empty)
    };
    if train.is_empty() {
        return Err(CliError::Validation("the training set is empty".into()));
    }
    Ok(Splits { train, val, test })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: u32,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub n_test: usize,
    pub train: TrainReport,
    pub test: Metrics,
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: RunReport,
    pub model: Model,
    pub checkpoint: Vec<u8>,
    pub epoch_seconds: Vec<f64>,
    pub dfd_stats: Vec<DfdStats>,
}

impl RunArtifacts {
    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serializes") + "\n"
    }

    pub fn timings_csv(&self) -> String {
        let mut s = String::from("epoch,seconds\n");
        for (i, t) in self.epoch_seconds.iter().enumerate() {
            s.push_str(&format!("{},{t:.6}\n", i + 1));
        }
        s
    }
}

pub fn dfd_stats_csv(stats: &[DfdStats]) -> String {
    let mut s = String::from("clip_id,frames_before,frames_after,dropped\n");
    for st in stats {
        s.push_str(&format!(
            "{},{},{},{}\n",
            st.clip_id,
            st.frames_before,
            st.frames_after,
            st.dropped()
        ));
    }
    s
}

/// Train on `splits.train` (early stopping on `splits.val`) and evaluate on `splits.test`.
pub fn run_training(cfg: &RunConfig, splits: &Splits) -> Result<RunArtifacts, CliError> {
    let class_names = splits.train.class_names.clone();
    let mut model_cfg = cfg.model;
    model_cfg.n_classes = class_names.len();
    let mut model = Model::new(model_cfg, derive_seed(cfg.seed, &[0]))?;
    let tcfg = cfg.train_config();
    let outcome = train(&mut model, &splits.train, &splits.val, &tcfg)?;
    let (test, _) = tcfg.preprocess(&splits.test);
    let metrics = evaluate(
        &model,
        &test,
        cfg.train.bootstrap_trials,
        derive_seed(cfg.seed, &[STREAM_TEST_BOOTSTRAP]),
    )?;
    let header = CheckpointHeader {
        model: model.config,
        class_names: class_names.clone(),
        theta: cfg.preprocess.theta,
        dfd_cutoff: tcfg.apply_dfd.then_some(tcfg.dfd.cutoff),
        gi_k: model.config.gi_k,
        optimizer: tcfg.optimizer,
    };
    let checkpoint = encode_checkpoint(&Checkpoint {
        header,
        model: model.clone(),
        optimizer_state: Some(outcome.optimizer_state),
    });
    Ok(RunArtifacts {
        report: RunReport {
            version: RUN_REPORT_VERSION,
            seed: cfg.seed,
            class_names,
            n_test: test.len(),
            train: outcome.report,
            test: metrics,
        },
        model,
        checkpoint,
        epoch_seconds: outcome.epoch_seconds,
        dfd_stats: outcome.dfd_stats,
    })
}

/// One configuration of the design-choice ablation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub name: &'static str,
    pub dfd: bool,
    pub gi: bool,
    pub augment: AugmentCopies,
}

/// Baseline, then frame dropout, multi-step head, jitter and affine augmentation.
pub fn ablation_variants() -> [Variant; 5] {
    let none = AugmentCopies::default();
    [
        Variant {
            name: "baseline",
            dfd: false,
            gi: false,
            augment: none,
        },
        Variant {
            name: "dfd",
            dfd: true,
            gi: false,
            augment: none,
        },
        Variant {
            name: "dfd+gi",
            dfd: true,
            gi: true,
            augment: none,
        },
        Variant {
            name: "dfd+gi+jitter",
            dfd: true,
            gi: true,
            augment: AugmentCopies { noise: 1, ..none },
        },
        Variant {
            name: "dfd+gi+affine",
            dfd: true,
            gi: true,
            augment: AugmentCopies { affine: 1, ..none },
        },
    ]
}

/// `cfg` with the variant's switches applied. Without GI the head sees only the final step.
pub fn variant_config(cfg: &RunConfig, v: &Variant) -> RunConfig {
    let mut c = cfg.clone();
    c.train.apply_dfd = v.dfd;
    if !v.gi {
        c.model.gi_k = 1;
    }
    c.augment.copies = v.augment;
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: String,
    pub dfd: bool,
    pub gi_k: usize,
    pub augment_copies: usize,
    pub result: Result<Metrics, String>,
}

pub const ABLATION_HEADER: &str =
    "variant,dfd,gi_k,augment_copies,top1,top3,top5,macro_f1,ci_lo,ci_hi,status";

impl AblationRow {
    pub fn csv_line(&self) -> String {
        let metrics = match &self.result {
            Ok(m) => format!(
                "{},{},{},{},{},{},ok",
                m.top1, m.top3, m.top5, m.macro_f1, m.bootstrap.lo, m.bootstrap.hi
            ),
            Err(e) => format!(",,,,,,\"error: {}\"", e.replace('"', "'")),
        };
        format!(
            "{},{},{},{},{metrics}",
            self.variant, self.dfd, self.gi_k, self.augment_copies
        )
    }
}

/// Run every variant on the same splits. A failing variant is recorded and
/// the rest still run.
pub fn run_ablation(cfg: &RunConfig, splits: &Splits, variants: &[Variant]) -> Vec<AblationRow> {
    variants
        .iter()
        .map(|v| {
            let c = variant_config(cfg, v);
            AblationRow {
                variant: v.name.to_string(),
                dfd: v.dfd,
                gi_k: c.model.gi_k,
                augment_copies: v.augment.total(),
                result: run_training(&c, splits)
                    .map(|a| a.report.test)
                    .map_err(|e| e.to_string()),
            }
        })
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{ABLATION_HEADER}\n");
    for r in rows {
        s.push_str(&r.csv_line());
        s.push('\n');
    }
    s
}

/// Affine copies per training clip for each augmentation size.
pub fn copies_for_sizes(sizes: &[usize], n_train: usize) -> Result<Vec<usize>, CliError> {
    sizes
        .iter()
        .map(|&s| {
            if s % n_train == 0 {
                Ok(s / n_train)
            } else {
                Err(CliError::Validation(format!(
                    "augment size {s} is not a multiple of the {n_train} training clips"
                )))
            }
        })
        .collect()
}

/// Table of top-1 and top-3 error by number of added affine copies.
pub fn run_size_sweep(
    cfg: &RunConfig,
    splits: &Splits,
    sizes: &[usize],
) -> Result<String, CliError> {
    let copies = copies_for_sizes(sizes, splits.train.len())?;
    let mut s = String::from(
        "augment_size,copies_per_clip,n_train,top1_error,top3_error,macro_f1,status\n",
    );
    for (&size, &k) in sizes.iter().zip(&copies) {
        let mut c = cfg.clone();
        c.augment.copies = AugmentCopies {
            affine: k,
            ..Default::default()
        };
        match run_training(&c, splits) {
            Ok(a) => {
                let m = &a.report.test;
                s.push_str(&format!(
                    "{size},{k},{},{},{},{},ok\n",
                    a.report.train.n_train,
                    1.0 - m.top1,
                    1.0 - m.top3,
                    m.macro_f1
                ));
            }
            Err(e) => s.push_str(&format!(
                "{size},{k},,,,,\"error: {}\"\n",
                e.to_string().replace('"', "'")
            )),
        }
    }
    Ok(s)
}
