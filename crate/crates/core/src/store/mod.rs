//! Embedding datasets: the EMBX container, label-budget ladders, paired /
//! unpaired selection, batch iteration and a synthetic generator.

mod batch;
mod embx;
mod select;
mod synth;

pub use batch::{Batch, BatchCursor, Batcher, BatchMode};
pub use embx::{
    crc_ok, decode_embx, encode_embx, inspect_embx, parse_header, read_embx, write_embx, EmbxHeader, EMBX_MAGIC, EMBX_VERSION,
};
pub use select::{label_ladder, select_labeled, Selection};
pub use synth::{generate_synthetic, linear_probe_error, SyntheticData, SyntheticSpec};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Tensor2;

pub const UNLABELED: i32 = -1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// `N` rows of `f32` embeddings with `i32` labels (`-1` = unlabeled).
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingDataset {
    pub cls_dim: usize,
    pub num_classes: usize,
    pub split: Split,
    /// Ordered `key=value` pairs; the `split` key is reserved.
    pub metadata: Vec<(String, String)>,
    pub labels: Vec<i32>,
    /// Row-major, `labels.len() * cls_dim` values.
    pub embeddings: Vec<f32>,
}

impl EmbeddingDataset {
    pub fn new(cls_dim: usize, num_classes: usize, split: Split, labels: Vec<i32>, embeddings: Vec<f32>) -> Result<Self> {
        let ds = EmbeddingDataset {
            cls_dim,
            num_classes,
            split,
            metadata: Vec::new(),
            labels,
            embeddings,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let (key, value) = (key.into(), value.into());
        match self.metadata.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.metadata.push((key, value)),
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.embeddings[i * self.cls_dim..(i + 1) * self.cls_dim]
    }

    pub fn validate(&self) -> Result<()> {
        if self.cls_dim == 0 || self.num_classes == 0 {
            return Err(Error::Contract("cls_dim and num_classes must be positive".into()));
        }
        if self.labels.is_empty() {
            return Err(Error::Contract("dataset has no rows".into()));
        }
        let expected = self.labels.len() * self.cls_dim;
        if self.embeddings.len() != expected {
            return Err(Error::Contract(format!(
                "{} embedding values for {} rows of width {}",
                self.embeddings.len(),
                self.labels.len(),
                self.cls_dim
            )));
        }
        for (row, &l) in self.labels.iter().enumerate() {
            if l != UNLABELED && !(0..self.num_classes as i64).contains(&(l as i64)) {
                return Err(Error::Label {
                    row,
                    label: l as i64,
                    classes: self.num_classes,
                });
            }
        }
        if let Some(i) = self.embeddings.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("non-finite embedding value in row {}", i / self.cls_dim)));
        }
        for (k, v) in &self.metadata {
            if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') || k == "split" {
                return Err(Error::Contract(format!("invalid metadata entry `{k}`")));
            }
        }
        Ok(())
    }

    /// Rows widened to `f64`.
    pub fn features(&self, idx: &[usize]) -> Tensor2 {
        let mut data = Vec::with_capacity(idx.len() * self.cls_dim);
        for &i in idx {
            data.extend(self.row(i).iter().map(|&v| v as f64));
        }
        Tensor2::from_vec(idx.len(), self.cls_dim, data).expect("sized above")
    }

    pub fn all_features(&self) -> Tensor2 {
        Tensor2::from_vec(self.len(), self.cls_dim, self.embeddings.iter().map(|&v| v as f64).collect()).expect("validated")
    }

    pub fn labels_of(&self, idx: &[usize]) -> Vec<i32> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }

    /// Per-class row counts; unlabeled rows are not counted.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            if l >= 0 {
                counts[l as usize] += 1;
            }
        }
        counts
    }

    /// Label-masked copy: every row present, every label `-1`.
    pub fn masked(&self) -> EmbeddingDataset {
        EmbeddingDataset {
            labels: vec![UNLABELED; self.len()],
            ..self.clone()
        }
    }

    pub fn subset(&self, idx: &[usize]) -> EmbeddingDataset {
        let mut embeddings = Vec::with_capacity(idx.len() * self.cls_dim);
        for &i in idx {
            embeddings.extend_from_slice(self.row(i));
        }
        EmbeddingDataset {
            labels: self.labels_of(idx),
            embeddings,
            ..self.clone()
        }
    }
}
