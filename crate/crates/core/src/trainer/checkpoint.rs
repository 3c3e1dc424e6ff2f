//! SFCK checkpoints.
//!
//! ```text
//! "SFCK" | u32 version | u64 header length H | H bytes JSON header
//!        | f64 LE parameter values, then optimizer moments (m, v per slot)
//!        | CRC32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::kernel::{stream, ParamId, RngSnapshot, RngState, Tensor2};
use crate::nets::ComponentBundle;
use crate::objectives::Priors;
use crate::optimizer::{AdamW, Moments, OptimizerState};
use crate::store::{BatchCursor, BatchMode, Batcher, EmbeddingDataset};
use crate::trainer::{check_splits, Method, TrainReport, Trainer};

const MAGIC: &[u8; 4] = b"SFCK";
const VERSION: u32 = 1;
const PREFIX: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotEntry {
    pub param: usize,
    pub t: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub cls_dim: usize,
    pub num_classes: usize,
    pub config: RunConfig,
    pub method: Method,
    pub budget: usize,
    pub step: u64,
    pub evals_since_best: u64,
    pub paired: Vec<usize>,
    pub paired_cursor: BatchCursor,
    pub unpaired_cursor: BatchCursor,
    pub dropout_rng: RngSnapshot,
    pub prior_rng: RngSnapshot,
    pub report: TrainReport,
    pub params: Vec<TensorEntry>,
    pub opt_step: u64,
    pub opt_slots: Vec<SlotEntry>,
    pub disc_opt_step: u64,
    pub disc_opt_slots: Vec<SlotEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointState {
    pub header: CheckpointHeader,
    pub params: Vec<Tensor2>,
    pub opt: OptimizerState,
    pub disc_opt: OptimizerState,
}

fn slots_of(state: &OptimizerState) -> Vec<SlotEntry> {
    state
        .slots
        .iter()
        .map(|(id, m)| SlotEntry { param: id.0, t: m.t })
        .collect()
}

impl Trainer<'_> {
    pub fn checkpoint(&self) -> CheckpointState {
        let store = &self.bundle.store;
        let header = CheckpointHeader {
            cls_dim: self.bundle.cls_dim,
            num_classes: self.bundle.num_classes,
            config: self.config.clone(),
            method: self.method,
            budget: self.budget,
            step: self.step,
            evals_since_best: self.evals_since_best,
            paired: self.paired.clone(),
            paired_cursor: self.paired_batches.cursor(),
            unpaired_cursor: self.unpaired_batches.cursor(),
            dropout_rng: self.dropout_rng.snapshot(),
            prior_rng: self.prior_rng.snapshot(),
            report: self.report.clone(),
            params: store
                .ids()
                .map(|id| TensorEntry {
                    name: store.name(id).to_string(),
                    rows: store.get(id).rows(),
                    cols: store.get(id).cols(),
                })
                .collect(),
            opt_step: self.opt.state.step,
            opt_slots: slots_of(&self.opt.state),
            disc_opt_step: self.disc_opt.state.step,
            disc_opt_slots: slots_of(&self.disc_opt.state),
        };
        CheckpointState {
            header,
            params: store.ids().map(|id| store.get(id).clone()).collect(),
            opt: self.opt.state.clone(),
            disc_opt: self.disc_opt.state.clone(),
        }
    }

    /// Continues a checkpointed run on the same datasets.
    pub fn resume<'d>(state: CheckpointState, train: &'d EmbeddingDataset, test: &'d EmbeddingDataset) -> Result<Trainer<'d>> {
        let h = state.header;
        check_splits(train, test)?;
        if h.cls_dim != train.cls_dim {
            // The first encoder weight is cls_dim × width, so its shapes name both dims.
            let width = h.params.first().map_or(0, |e| e.cols);
            return Err(Error::dim("checkpoint cls_dim vs dataset cls_dim", (h.cls_dim, width), (train.cls_dim, width)));
        }
        if h.num_classes != train.num_classes {
            return Err(Error::Contract(format!(
                "checkpoint has {} classes, dataset has {}",
                h.num_classes, train.num_classes
            )));
        }
        let bundle = restore_bundle(&h, state.params)?;
        let sched = &h.config.schedule;
        let seed = h.config.seed;
        Ok(Trainer {
            priors: Priors::for_bundle(&bundle),
            paired_batches: Batcher::with_cursor(
                h.paired.len(),
                sched.batch_supervised,
                BatchMode::Cycle,
                seed,
                stream::PAIRED_BATCHES,
                h.paired_cursor,
            )?,
            unpaired_batches: Batcher::with_cursor(
                train.len(),
                sched.batch_unsupervised,
                BatchMode::Epoch,
                seed,
                stream::UNPAIRED_BATCHES,
                h.unpaired_cursor,
            )?,
            opt: AdamW::with_state(h.config.optimizer.clone(), state.opt)?,
            disc_opt: AdamW::with_state(h.config.disc_optimizer.clone(), state.disc_opt)?,
            dropout_rng: RngState::restore(&h.dropout_rng),
            prior_rng: RngState::restore(&h.prior_rng),
            report: h.report,
            config: h.config,
            method: h.method,
            budget: h.budget,
            train,
            test,
            paired: h.paired,
            bundle,
            step: h.step,
            evals_since_best: h.evals_since_best,
        })
    }
}

fn restore_bundle(h: &CheckpointHeader, params: Vec<Tensor2>) -> Result<ComponentBundle> {
    let mut bundle = ComponentBundle::build(h.cls_dim, h.num_classes, &h.config.arch, h.config.seed)?;
    if h.params.len() != bundle.store.len() || params.len() != bundle.store.len() {
        return Err(Error::Contract(format!(
            "checkpoint holds {} tensors, model has {}",
            h.params.len(),
            bundle.store.len()
        )));
    }
    let ids: Vec<ParamId> = bundle.store.ids().collect();
    for (id, (entry, value)) in ids.into_iter().zip(h.params.iter().zip(params)) {
        let slot = bundle.store.get(id);
        if entry.name != bundle.store.name(id) || value.shape() != slot.shape() {
            return Err(Error::dim("load_checkpoint", value.shape(), slot.shape()));
        }
        *bundle.store.get_mut(id) = value;
    }
    Ok(bundle)
}

impl CheckpointState {
    /// The model weights alone, for inference and feature export.
    pub fn bundle(&self) -> Result<ComponentBundle> {
        restore_bundle(&self.header, self.params.clone())
    }
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_checkpoint(state: &CheckpointState) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&state.header).map_err(|e| Error::Contract(format!("checkpoint header: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in &state.params {
        push_f64s(&mut out, p.data());
    }
    for opt in [&state.opt, &state.disc_opt] {
        for m in opt.slots.values() {
            push_f64s(&mut out, &m.m);
            push_f64s(&mut out, &m.v);
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<CheckpointState> {
    let format = |offset: usize, message: &str| Error::Format {
        offset: offset as u64,
        message: message.to_string(),
    };
    if bytes.len() < PREFIX + 4 {
        return Err(Error::Length {
            expected: (PREFIX + 4) as u64,
            actual: bytes.len() as u64,
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
        return Err(format(body.len(), "crc32 mismatch"));
    }
    if &body[..4] != MAGIC {
        return Err(format(0, "bad magic, expected \"SFCK\""));
    }
    let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(format(4, &format!("unsupported checkpoint version {version}")));
    }
    let hlen = u64::from_le_bytes(body[8..16].try_into().unwrap()) as usize;
    let header_end = PREFIX.checked_add(hlen).filter(|&e| e <= body.len()).ok_or(Error::Length {
        expected: (PREFIX as u64).saturating_add(hlen as u64),
        actual: body.len() as u64,
    })?;
    let header: CheckpointHeader =
        serde_json::from_slice(&body[PREFIX..header_end]).map_err(|e| format(PREFIX, &format!("header: {e}")))?;

    let mut values = body[header_end..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let floats = (body.len() - header_end) / 8;
    let param_floats: usize = header.params.iter().map(|e| e.rows * e.cols).sum();
    let slot_floats = |slots: &[SlotEntry]| -> usize {
        slots
            .iter()
            .map(|s| header.params.get(s.param).map_or(0, |e| 2 * e.rows * e.cols))
            .sum()
    };
    let expected = param_floats + slot_floats(&header.opt_slots) + slot_floats(&header.disc_opt_slots);
    if (body.len() - header_end) % 8 != 0 || floats != expected {
        return Err(Error::Length {
            expected: (header_end + 8 * expected + 4) as u64,
            actual: bytes.len() as u64,
        });
    }

    let mut take = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };
    let mut params = Vec::with_capacity(header.params.len());
    for e in &header.params {
        params.push(Tensor2::from_vec(e.rows, e.cols, take(e.rows * e.cols))?);
    }
    let mut read_state = |step: u64, slots: &[SlotEntry]| -> Result<OptimizerState> {
        let mut state = OptimizerState {
            step,
            ..Default::default()
        };
        for s in slots {
            let e = header
                .params
                .get(s.param)
                .ok_or_else(|| format(PREFIX, &format!("optimizer slot for unknown parameter {}", s.param)))?;
            let n = e.rows * e.cols;
            state.slots.insert(ParamId(s.param), Moments { m: take(n), v: take(n), t: s.t });
        }
        Ok(state)
    };
    let opt = read_state(header.opt_step, &header.opt_slots)?;
    let disc_opt = read_state(header.disc_opt_step, &header.disc_opt_slots)?;
    Ok(CheckpointState {
        header,
        params,
        opt,
        disc_opt,
    })
}

pub fn save_checkpoint(state: &CheckpointState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(state)?;
    // Write-then-rename so a failed save never clobbers the previous file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<CheckpointState> {
    decode_checkpoint(&fs::read(path)?)
}
