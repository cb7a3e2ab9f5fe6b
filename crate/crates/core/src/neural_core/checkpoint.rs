//! Binary model checkpoint.
//!
//! ```text
//! magic        b"SKCK"
//! version      u16 (= 1)
//! header       u32 length + JSON (model config, class names, preprocessing settings)
//! tensors      u32 count, then per tensor:
//!                name (u32 length + UTF-8), ndim u8, dims u32 * ndim, f64 LE data
//! optimizer    u8 flag; when 1: u64 step count, then a tensor list of accumulators
//! ```
//!
//! The tensor list holds the learnable parameters, the batch-norm running
//! statistics (`bn{l}.running_mean` / `bn{l}.running_var`) and the input
//! standardization (`input.mean` / `input.std`). Floats round-trip exactly.

use std::collections::BTreeMap;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, OptimizerConfig, OptimizerState, ParamSet, Params};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SKCK";
pub const VERSION: u16 = 1;

/// Settings that must travel with the weights to reproduce predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    pub class_names: Vec<String>,
    /// Confidence threshold used at ingestion.
    pub theta: f64,
    /// Frame-dropout cutoff, if dropout was applied.
    pub dfd_cutoff: Option<f64>,
    pub gi_k: usize,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Model,
    pub optimizer_state: Option<OptimizerState<Params>>,
}

struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let header = serde_json::to_vec(&ckpt.header).expect("header serializes");
    put_u32(&mut out, header.len() as u32);
    out.extend_from_slice(&header);

    let model = &ckpt.model;
    let mut tensors: Vec<(String, Vec<usize>, &[f64])> = model
        .params
        .views()
        .into_iter()
        .map(|v| (v.name, v.shape, v.data))
        .collect();
    for (l, r) in model.running.iter().enumerate() {
        tensors.push((
            format!("bn{l}.running_mean"),
            vec![r.mean.len()],
            r.mean.as_slice().unwrap(),
        ));
        tensors.push((
            format!("bn{l}.running_var"),
            vec![r.var.len()],
            r.var.as_slice().unwrap(),
        ));
    }
    let norm = &model.input_norm;
    tensors.push((
        "input.mean".into(),
        vec![norm.mean.len()],
        norm.mean.as_slice().unwrap(),
    ));
    tensors.push((
        "input.std".into(),
        vec![norm.std.len()],
        norm.std.as_slice().unwrap(),
    ));
    put_tensors(&mut out, &tensors);

    match &ckpt.optimizer_state {
        None => out.push(0),
        Some(st) => {
            out.push(1);
            out.extend_from_slice(&st.steps.to_le_bytes());
            let acc: Vec<_> = st
                .acc
                .views()
                .into_iter()
                .map(|v| (v.name, v.shape, v.data))
                .collect();
            put_tensors(&mut out, &acc);
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::parse("checkpoint", "bad magic"));
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::parse(
            "checkpoint",
            format_args!("unsupported version {version}"),
        ));
    }
    let header_len = r.u32("header length")? as usize;
    let header: CheckpointHeader = serde_json::from_slice(r.take(header_len, "header")?)
        .map_err(|e| Error::parse("checkpoint header", e))?;
    header
        .model
        .validate()
        .map_err(|e| Error::parse("checkpoint header", e))?;
    if header.class_names.len() != header.model.n_classes {
        return Err(Error::parse(
            "checkpoint header",
            format_args!(
                "{} class names for a {}-class model",
                header.class_names.len(),
                header.model.n_classes
            ),
        ));
    }
    // Refuse configs whose parameter count exceeds what the input could hold.
    let expected = parameter_count(&header.model);
    if expected.saturating_mul(8) > bytes.len() {
        return Err(Error::parse(
            "checkpoint header",
            "model larger than the file",
        ));
    }

    let mut tensors = r.tensors()?;
    let mut model = Model::new(header.model, 0)?;
    fill(&mut model.params, &mut tensors, "")?;
    for (l, running) in model.running.iter_mut().enumerate() {
        take_into(
            &mut tensors,
            &format!("bn{l}.running_mean"),
            &mut running.mean,
        )?;
        take_into(
            &mut tensors,
            &format!("bn{l}.running_var"),
            &mut running.var,
        )?;
    }
    take_into(&mut tensors, "input.mean", &mut model.input_norm.mean)?;
    take_into(&mut tensors, "input.std", &mut model.input_norm.std)?;
    if let Some(name) = tensors.keys().next() {
        return Err(Error::parse(
            "checkpoint",
            format_args!("unexpected tensor `{name}`"),
        ));
    }

    let optimizer_state = match r.take(1, "optimizer flag")?[0] {
        0 => None,
        1 => {
            let steps = u64::from_le_bytes(r.take(8, "optimizer steps")?.try_into().unwrap());
            let mut acc_tensors = r.tensors()?;
            let mut acc = model.params.zeros_like();
            fill(&mut acc, &mut acc_tensors, "optimizer ")?;
            if let Some(name) = acc_tensors.keys().next() {
                return Err(Error::parse(
                    "checkpoint",
                    format_args!("unexpected optimizer tensor `{name}`"),
                ));
            }
            Some(OptimizerState { acc, steps })
        }
        f => {
            return Err(Error::parse(
                "checkpoint",
                format_args!("bad optimizer flag {f}"),
            ))
        }
    };
    if r.pos != bytes.len() {
        return Err(Error::parse("checkpoint", "trailing bytes"));
    }
    Ok(Checkpoint {
        header,
        model,
        optimizer_state,
    })
}

fn parameter_count(cfg: &ModelConfig) -> usize {
    let h = cfg.hidden_size;
    let mut n = 0usize;
    for l in 0..cfg.blstm_layers {
        let d = if l == 0 { cfg.input_dim } else { 2 * h };
        n = n.saturating_add(2usize.saturating_mul(4 * h).saturating_mul(d + h + 1));
        n = n.saturating_add(4 * h);
    }
    n.saturating_add((2 * h + 2) * cfg.dense_hidden + (cfg.dense_hidden + 1) * cfg.n_classes)
}

fn fill<P: ParamSet>(
    params: &mut P,
    tensors: &mut BTreeMap<String, Tensor>,
    what: &str,
) -> Result<()> {
    for v in params.views_mut() {
        let t = tensors.remove(&v.name).ok_or_else(|| {
            Error::parse(
                "checkpoint",
                format_args!("missing {what}tensor `{}`", v.name),
            )
        })?;
        if t.shape != v.shape {
            return Err(Error::parse(
                "checkpoint",
                format_args!(
                    "{what}tensor `{}` has shape {:?}, expected {:?}",
                    v.name, t.shape, v.shape
                ),
            ));
        }
        v.data.copy_from_slice(&t.data);
    }
    Ok(())
}

fn take_into(
    tensors: &mut BTreeMap<String, Tensor>,
    name: &str,
    dst: &mut Array1<f64>,
) -> Result<()> {
    let t = tensors
        .remove(name)
        .ok_or_else(|| Error::parse("checkpoint", format_args!("missing tensor `{name}`")))?;
    if t.shape != [dst.len()] {
        return Err(Error::parse(
            "checkpoint",
            format_args!("tensor `{name}` has shape {:?}", t.shape),
        ));
    }
    dst.as_slice_mut().unwrap().copy_from_slice(&t.data);
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_tensors(out: &mut Vec<u8>, tensors: &[(String, Vec<usize>, &[f64])]) {
    put_u32(out, tensors.len() as u32);
    for (name, shape, data) in tensors {
        put_u32(out, name.len() as u32);
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for &d in shape {
            put_u32(out, d as u32);
        }
        for v in *data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::parse("checkpoint", format_args!("truncated reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn tensors(&mut self) -> Result<BTreeMap<String, Tensor>> {
        let count = self.u32("tensor count")? as usize;
        let mut map = BTreeMap::new();
        for _ in 0..count {
            let len = self.u32("tensor name length")? as usize;
            let name = String::from_utf8(self.take(len, "tensor name")?.to_vec())
                .map_err(|e| Error::parse("checkpoint tensor name", e))?;
            let ndim = self.take(1, "tensor rank")?[0] as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(self.u32("tensor dim")? as usize);
            }
            let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
            let bytes = n.and_then(|n| n.checked_mul(8)).ok_or_else(|| {
                Error::parse("checkpoint", format_args!("tensor `{name}` too large"))
            })?;
            let raw = self.take(bytes, &format!("tensor `{name}` data"))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if map.insert(name.clone(), Tensor { shape, data }).is_some() {
                return Err(Error::parse(
                    "checkpoint",
                    format_args!("duplicate tensor `{name}`"),
                ));
            }
        }
        Ok(map)
    }
}
