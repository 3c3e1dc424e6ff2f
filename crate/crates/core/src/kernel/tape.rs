//! Reverse-mode differentiation over a linear tape.
//!
//! Operations append nodes in evaluation order; `backward` walks them in
//! exact reverse. Parameters live in a [`ParamStore`] borrowed for the
//! lifetime of the tape, so forward passes never copy weights, and gradients
//! are handed back keyed by [`ParamId`] once the tape is done.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::rng::RngState;
use super::tensor::{gemm, Tensor2};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named parameter tensors. Owned by a model, borrowed by tapes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor2>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor2 {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn total_elements(&self) -> usize {
        self.values.iter().map(Tensor2::len).sum()
    }
}

/// Gradients detached from a finished tape; `None` means never reached.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    /// Gradients indexed by parameter id.
    pub fn from_vec(grads: Vec<Option<Tensor2>>) -> Self {
        Gradients { grads }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor2> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// True when `id` received a gradient with at least one non-zero entry.
    pub fn is_nonzero(&self, id: ParamId) -> bool {
        self.get(id).is_some_and(|g| g.data().iter().any(|&v| v != 0.0))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

/// Handle to a value recorded on a specific tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    Linear { x: usize, w: usize, b: usize },
    LeakyRelu { x: usize, slope: f64 },
    Dropout { x: usize, mask: Vec<f64> },
    Softmax { x: usize },
    Concat { a: usize, b: usize },
    SoftmaxCe { logits: usize, labels: Vec<usize> },
    SigmoidBce { logits: usize, target: f64 },
    Cosine { a: usize, b: usize },
    WeightedSum { terms: Vec<(usize, f64)> },
}

#[derive(Debug)]
struct Node {
    /// `None` for parameter nodes, whose value stays in the store.
    value: Option<Tensor2>,
    op: Op,
    requires_grad: bool,
}

pub struct Tape<'p> {
    id: u64,
    store: &'p ParamStore,
    trainable: Vec<bool>,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<usize>>,
    grads: Vec<Option<Tensor2>>,
    consumed: bool,
}

impl<'p> Tape<'p> {
    /// Tape on which every parameter of `store` is trainable.
    pub fn new(store: &'p ParamStore) -> Self {
        Self::with_mask(store, vec![true; store.len()])
    }

    /// Tape that records no gradient for any parameter.
    pub fn inference(store: &'p ParamStore) -> Self {
        Self::with_mask(store, vec![false; store.len()])
    }

    /// Tape where only the parameters selected by `trainable` accumulate
    /// gradient; the rest behave as constants.
    pub fn with_trainable(store: &'p ParamStore, trainable: impl Fn(ParamId) -> bool) -> Self {
        let mask = store.ids().map(trainable).collect();
        Self::with_mask(store, mask)
    }

    fn with_mask(store: &'p ParamStore, trainable: Vec<bool>) -> Self {
        let n = store.len();
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            store,
            trainable,
            nodes: Vec::new(),
            param_nodes: vec![None; n],
            grads: vec![None; n],
            consumed: false,
        }
    }

    /// Drops all recorded nodes and accumulated gradients. Handles issued
    /// before the clear become invalid.
    pub fn clear(&mut self) {
        self.id = NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed);
        self.nodes.clear();
        self.param_nodes.iter_mut().for_each(|p| *p = None);
        self.grads.iter_mut().for_each(|g| *g = None);
        self.consumed = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::Tape("value was not recorded on this tape".into()));
        }
        Ok(v.idx)
    }

    fn var(&self, idx: usize) -> Var {
        Var { tape: self.id, idx }
    }

    fn push(&mut self, value: Tensor2, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            requires_grad,
        });
        self.var(self.nodes.len() - 1)
    }

    fn val(&self, idx: usize) -> &Tensor2 {
        match (&self.nodes[idx].value, &self.nodes[idx].op) {
            (Some(v), _) => v,
            (None, Op::Param(id)) => self.store.get(*id),
            (None, _) => unreachable!("non-parameter node without value"),
        }
    }

    fn rg(&self, idx: usize) -> bool {
        self.nodes[idx].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        self.val(v.idx)
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.val(v.idx).item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v.idx)
    }

    /// Records a constant. Non-finite input is rejected here so that the
    /// failure names the entry point rather than a downstream op.
    pub fn input(&mut self, value: Tensor2) -> Result<Var> {
        value.ensure_finite("input")?;
        Ok(self.push(value, Op::Input, false))
    }

    /// Records a detached copy of another node's value.
    pub fn detach(&mut self, v: Var) -> Result<Var> {
        let idx = self.check(v)?;
        let value = self.val(idx).clone();
        Ok(self.push(value, Op::Input, false))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(idx) = self.param_nodes[id.0] {
            return self.var(idx);
        }
        let requires_grad = self.trainable[id.0];
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            requires_grad,
        });
        let idx = self.nodes.len() - 1;
        self.param_nodes[id.0] = Some(idx);
        self.var(idx)
    }

    /// `x·W + b` with `x: b×n`, `W: n×m`, `b: 1×m`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xi, wi, bi) = (self.check(x)?, self.check(w)?, self.check(b)?);
        let (xv, wv, bv) = (self.val(xi), self.val(wi), self.val(bi));
        if xv.cols() != wv.rows() {
            return Err(Error::dim("linear", xv.shape(), wv.shape()));
        }
        if bv.rows() != 1 || bv.cols() != wv.cols() {
            return Err(Error::dim("linear", wv.shape(), bv.shape()));
        }
        xv.ensure_finite("linear")?;
        let mut out = Tensor2::zeros(xv.rows(), wv.cols());
        for r in 0..out.rows() {
            out.row_mut(r).copy_from_slice(bv.data());
        }
        gemm(xv, false, wv, false, 1.0, &mut out);
        out.ensure_finite("linear")?;
        let rg = self.rg(xi) || self.rg(wi) || self.rg(bi);
        Ok(self.push(out, Op::Linear { x: xi, w: wi, b: bi }, rg))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::Parameter(format!("leaky_relu slope {slope} outside (0, 1)")));
        }
        let xi = self.check(x)?;
        let out = self.val(xi).map(|v| if v > 0.0 { v } else { slope * v });
        out.ensure_finite("leaky_relu")?;
        let rg = self.rg(xi);
        Ok(self.push(out, Op::LeakyRelu { x: xi, slope }, rg))
    }

    /// Inverted dropout: survivors are scaled by `1/(1-p)` at train time so
    /// inference is the identity.
    pub fn dropout(&mut self, x: Var, p: f64, training: bool, rng: &mut RngState) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Parameter(format!("dropout probability {p} outside [0, 1)")));
        }
        let xi = self.check(x)?;
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let xv = self.val(xi);
        let rng = rng.inner();
        let mask: Vec<f64> = (0..xv.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = xv.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor2::from_vec(xv.rows(), xv.cols(), data)?;
        let rg = self.rg(xi);
        Ok(self.push(out, Op::Dropout { x: xi, mask }, rg))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xi = self.check(x)?;
        let out = softmax_rows(self.val(xi));
        out.ensure_finite("softmax")?;
        let rg = self.rg(xi);
        Ok(self.push(out, Op::Softmax { x: xi }, rg))
    }

    /// Column-wise concatenation `[a | b]`.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.check(a)?, self.check(b)?);
        let (av, bv) = (self.val(ai), self.val(bi));
        if av.rows() != bv.rows() {
            return Err(Error::dim("concat", av.shape(), bv.shape()));
        }
        let cols = av.cols() + bv.cols();
        let mut data = Vec::with_capacity(av.rows() * cols);
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let out = Tensor2::from_vec(av.rows(), cols, data)?;
        let rg = self.rg(ai) || self.rg(bi);
        Ok(self.push(out, Op::Concat { a: ai, b: bi }, rg))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let li = self.check(logits)?;
        let lv = self.val(li);
        if labels.len() != lv.rows() {
            return Err(Error::dim("softmax_cross_entropy", lv.shape(), (labels.len(), 1)));
        }
        if lv.rows() == 0 {
            return Err(Error::Contract("softmax_cross_entropy on an empty batch".into()));
        }
        let k = lv.cols();
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            if label >= k {
                return Err(Error::Label {
                    row: r,
                    label: label as i64,
                    classes: k,
                });
            }
            let row = lv.row(r);
            let (lse, _) = log_sum_exp(row);
            total += lse - row[label];
        }
        let loss = Tensor2::scalar(total / lv.rows() as f64);
        loss.ensure_finite("softmax_cross_entropy")?;
        let rg = self.rg(li);
        Ok(self.push(
            loss,
            Op::SoftmaxCe {
                logits: li,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Mean binary cross-entropy of `sigmoid(logit)` against a constant
    /// target, evaluated in logit space.
    pub fn sigmoid_bce(&mut self, logits: Var, target: f64) -> Result<Var> {
        if target != 0.0 && target != 1.0 {
            return Err(Error::Parameter(format!("bce target {target} is not binary")));
        }
        let li = self.check(logits)?;
        let lv = self.val(li);
        if lv.cols() != 1 {
            return Err(Error::dim("sigmoid_bce", lv.shape(), (lv.rows(), 1)));
        }
        if lv.rows() == 0 {
            return Err(Error::Contract("sigmoid_bce on an empty batch".into()));
        }
        let total: f64 = lv
            .data()
            .iter()
            .map(|&z| z.max(0.0) - z * target + (-z.abs()).exp().ln_1p())
            .sum();
        let loss = Tensor2::scalar(total / lv.rows() as f64);
        loss.ensure_finite("sigmoid_bce")?;
        let rg = self.rg(li);
        Ok(self.push(loss, Op::SigmoidBce { logits: li, target }, rg))
    }

    /// Mean over rows of `1 - cos(y_true, y_hat)`.
    pub fn cosine_loss(&mut self, y_true: Var, y_hat: Var) -> Result<Var> {
        let (ai, bi) = (self.check(y_true)?, self.check(y_hat)?);
        let (av, bv) = (self.val(ai), self.val(bi));
        if av.shape() != bv.shape() {
            return Err(Error::dim("cosine_loss", av.shape(), bv.shape()));
        }
        if av.rows() == 0 {
            return Err(Error::Contract("cosine_loss on an empty batch".into()));
        }
        let mut total = 0.0;
        for r in 0..av.rows() {
            let (cos, _, _) = cosine_row(av.row(r), bv.row(r), r)?;
            total += 1.0 - cos;
        }
        let loss = Tensor2::scalar(total / av.rows() as f64);
        loss.ensure_finite("cosine_loss")?;
        let rg = self.rg(ai) || self.rg(bi);
        Ok(self.push(loss, Op::Cosine { a: ai, b: bi }, rg))
    }

    /// `Σ wᵢ·termᵢ` over 1×1 nodes.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let mut idxs = Vec::with_capacity(terms.len());
        let mut total = 0.0;
        let mut rg = false;
        for &(v, w) in terms {
            let i = self.check(v)?;
            let tv = self.val(i);
            if tv.shape() != (1, 1) {
                return Err(Error::dim("weighted_sum", tv.shape(), (1, 1)));
            }
            total += w * tv.item();
            // Zero-weighted terms are excluded from differentiation.
            rg |= w != 0.0 && self.rg(i);
            idxs.push((i, w));
        }
        let out = Tensor2::scalar(total);
        out.ensure_finite("weighted_sum")?;
        Ok(self.push(out, Op::WeightedSum { terms: idxs }, rg))
    }

    /// Sign pattern of every leaky-ReLU input recorded so far. Used by
    /// gradient checks to discard probes that cross a kink.
    pub fn activation_signs(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if let Op::LeakyRelu { x, .. } = node.op {
                out.extend(self.val(x).data().iter().map(|&v| v > 0.0));
            }
        }
        out
    }

    /// Accumulates `d loss / d param` for every trainable parameter that the
    /// loss depends on. A tape supports one backward pass per `clear`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.consumed {
            return Err(Error::Tape("backward already ran; clear the tape first".into()));
        }
        let li = self.check(loss)?;
        if self.val(li).shape() != (1, 1) {
            return Err(Error::Tape(format!(
                "loss must be 1×1, got {}×{}",
                self.val(li).rows(),
                self.val(li).cols()
            )));
        }
        self.consumed = true;
        if !self.rg(li) {
            return Ok(());
        }

        let mut grads: Vec<Option<Tensor2>> = Vec::with_capacity(li + 1);
        grads.resize_with(li + 1, || None);
        grads[li] = Some(Tensor2::scalar(1.0));

        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(id) => {
                    let id = *id;
                    match &mut self.grads[id.0] {
                        Some(acc) => acc.add_assign(&g),
                        slot => *slot = Some(g),
                    }
                }
                Op::Linear { x, w, b } => {
                    let (x, w, b) = (*x, *w, *b);
                    if self.rg(x) {
                        let wv = self.val(w);
                        let mut dx = Tensor2::zeros(g.rows(), wv.rows());
                        gemm(&g, false, wv, true, 0.0, &mut dx);
                        accumulate(&mut grads, x, dx);
                    }
                    if self.rg(w) {
                        let xv = self.val(x);
                        let mut dw = Tensor2::zeros(xv.cols(), g.cols());
                        gemm(xv, true, &g, false, 0.0, &mut dw);
                        accumulate(&mut grads, w, dw);
                    }
                    if self.rg(b) {
                        let mut db = Tensor2::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (acc, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                                *acc += v;
                            }
                        }
                        accumulate(&mut grads, b, db);
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    let (x, slope) = (*x, *slope);
                    // Kink at 0 takes the negative-branch slope.
                    let xv = self.val(x);
                    let data = g
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(gv, &xv)| if xv > 0.0 { *gv } else { slope * gv })
                        .collect();
                    accumulate(&mut grads, x, Tensor2::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::Dropout { x, mask } => {
                    let data = g.data().iter().zip(mask).map(|(gv, m)| gv * m).collect();
                    let x = *x;
                    accumulate(&mut grads, x, Tensor2::from_vec(g.rows(), g.cols(), data)?);
                }
                Op::Softmax { x } => {
                    let x = *x;
                    let s = self.nodes[i].value.as_ref().expect("softmax output");
                    let mut dx = Tensor2::zeros(s.rows(), s.cols());
                    for r in 0..s.rows() {
                        let (sr, gr) = (s.row(r), g.row(r));
                        let dot: f64 = sr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for (d, (sv, gv)) in dx.row_mut(r).iter_mut().zip(sr.iter().zip(gr)) {
                            *d = sv * (gv - dot);
                        }
                    }
                    accumulate(&mut grads, x, dx);
                }
                Op::Concat { a, b } => {
                    let (a, b) = (*a, *b);
                    let ac = self.val(a).cols();
                    let bc = self.val(b).cols();
                    if self.rg(a) {
                        let rows: Vec<&[f64]> = (0..g.rows()).map(|r| &g.row(r)[..ac]).collect();
                        accumulate(&mut grads, a, Tensor2::from_rows(&rows)?);
                    }
                    if self.rg(b) {
                        let rows: Vec<&[f64]> = (0..g.rows()).map(|r| &g.row(r)[ac..ac + bc]).collect();
                        accumulate(&mut grads, b, Tensor2::from_rows(&rows)?);
                    }
                }
                Op::SoftmaxCe { logits, labels } => {
                    let logits = *logits;
                    let scale = g.item() / labels.len() as f64;
                    let mut d = softmax_rows(self.val(logits));
                    for (r, &label) in labels.iter().enumerate() {
                        let row = d.row_mut(r);
                        row[label] -= 1.0;
                        row.iter_mut().for_each(|v| *v *= scale);
                    }
                    accumulate(&mut grads, logits, d);
                }
                Op::SigmoidBce { logits, target } => {
                    let (logits, target) = (*logits, *target);
                    let lv = self.val(logits);
                    let scale = g.item() / lv.rows() as f64;
                    let d = lv.map(|z| (sigmoid(z) - target) * scale);
                    accumulate(&mut grads, logits, d);
                }
                Op::Cosine { a, b } => {
                    let (a, b) = (*a, *b);
                    let (av, bv) = (self.val(a), self.val(b));
                    let scale = -g.item() / av.rows() as f64;
                    let mut da = Tensor2::zeros(av.rows(), av.cols());
                    let mut db = Tensor2::zeros(bv.rows(), bv.cols());
                    for r in 0..av.rows() {
                        let (ar, br) = (av.row(r), bv.row(r));
                        let (cos, na, nb) = cosine_row(ar, br, r)?;
                        let inv = 1.0 / (na * nb);
                        for j in 0..ar.len() {
                            da.row_mut(r)[j] = scale * (br[j] * inv - cos * ar[j] / (na * na));
                            db.row_mut(r)[j] = scale * (ar[j] * inv - cos * br[j] / (nb * nb));
                        }
                    }
                    if self.rg(a) {
                        accumulate(&mut grads, a, da);
                    }
                    if self.rg(b) {
                        accumulate(&mut grads, b, db);
                    }
                }
                Op::WeightedSum { terms } => {
                    let gv = g.item();
                    let terms = terms.clone();
                    for (t, w) in terms {
                        if w != 0.0 && self.rg(t) {
                            accumulate(&mut grads, t, Tensor2::scalar(gv * w));
                        }
                    }
                }
            }
        }

        if self.grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { op: "backward" });
        }
        Ok(())
    }

    /// Gradient accumulated for `id`, if the last backward reached it.
    pub fn grad(&self, id: ParamId) -> Option<&Tensor2> {
        self.grads[id.0].as_ref()
    }

    pub fn gradients(&self) -> Gradients {
        Gradients {
            grads: self.grads.clone(),
        }
    }

    pub fn into_gradients(self) -> Gradients {
        Gradients { grads: self.grads }
    }
}

fn accumulate(grads: &mut [Option<Tensor2>], idx: usize, g: Tensor2) {
    match &mut grads[idx] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `(log Σ exp(row), argmax)`, with the maximal term factored out and the
/// remainder summed through `ln_1p` to keep near-certain rows accurate.
fn log_sum_exp(row: &[f64]) -> (f64, usize) {
    let mut arg = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[arg] {
            arg = j;
        }
    }
    let max = row[arg];
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != arg)
        .map(|(_, &v)| (v - max).exp())
        .sum();
    (max + rest.ln_1p(), arg)
}

pub(crate) fn softmax_rows(x: &Tensor2) -> Tensor2 {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

const COSINE_EPS: f64 = 1e-12;

/// Returns `(cos, ‖a‖, ‖b‖)`; the cosine is clamped to `[-1, 1]`.
fn cosine_row(a: &[f64], b: &[f64], row: usize) -> Result<(f64, f64, f64)> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb <= COSINE_EPS {
        return Err(Error::Degenerate { op: "cosine_loss", row });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(((dot / (na * nb)).clamp(-1.0, 1.0), na, nb))
}
