use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{stream, RngState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchMode {
    /// One shuffled pass per epoch; the last batch of an epoch may be short.
    Epoch,
    /// Always full batches, continuing into the next shuffled pass when the
    /// current one runs out. Used for paired views so supervised steps never
    /// starve.
    Cycle,
}

/// Resumable position: epoch number and offset into that epoch's order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchCursor {
    pub epoch: u64,
    pub pos: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    /// Row indices into the underlying view.
    pub indices: Vec<usize>,
    /// Epoch in which the batch started.
    pub epoch: u64,
    /// The batch crossed an epoch boundary, so rows may repeat.
    pub wrapped: bool,
}

#[derive(Clone, Debug)]
pub struct Batcher {
    n: usize,
    batch_size: usize,
    mode: BatchMode,
    seed: u64,
    consumer: u64,
    cursor: BatchCursor,
    order: Vec<usize>,
}

impl Batcher {
    /// `consumer` separates shuffle streams of different views sharing a seed.
    pub fn new(n: usize, batch_size: usize, mode: BatchMode, seed: u64, consumer: u64) -> Result<Self> {
        Self::with_cursor(n, batch_size, mode, seed, consumer, BatchCursor::default())
    }

    pub fn with_cursor(
        n: usize,
        batch_size: usize,
        mode: BatchMode,
        seed: u64,
        consumer: u64,
        cursor: BatchCursor,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Contract("cannot batch an empty view".into()));
        }
        if batch_size == 0 {
            return Err(Error::Parameter("batch size must be at least 1".into()));
        }
        if cursor.pos > n {
            return Err(Error::Contract(format!("batch cursor {} beyond view of {n} rows", cursor.pos)));
        }
        let order = shuffled(n, seed, consumer, cursor.epoch);
        Ok(Batcher {
            n,
            batch_size,
            mode,
            seed,
            consumer,
            cursor,
            order,
        })
    }

    pub fn cursor(&self) -> BatchCursor {
        self.cursor
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn advance_epoch(&mut self) {
        self.cursor.epoch += 1;
        self.cursor.pos = 0;
        self.order = shuffled(self.n, self.seed, self.consumer, self.cursor.epoch);
    }

    pub fn next_batch(&mut self) -> Batch {
        if self.cursor.pos == self.n {
            self.advance_epoch();
        }
        let epoch = self.cursor.epoch;
        match self.mode {
            BatchMode::Epoch => {
                let end = (self.cursor.pos + self.batch_size).min(self.n);
                let indices = self.order[self.cursor.pos..end].to_vec();
                self.cursor.pos = end;
                Batch {
                    indices,
                    epoch,
                    wrapped: false,
                }
            }
            BatchMode::Cycle => {
                let mut indices = Vec::with_capacity(self.batch_size);
                let mut wrapped = false;
                while indices.len() < self.batch_size {
                    if self.cursor.pos == self.n {
                        self.advance_epoch();
                        wrapped = true;
                    }
                    let take = (self.batch_size - indices.len()).min(self.n - self.cursor.pos);
                    indices.extend_from_slice(&self.order[self.cursor.pos..self.cursor.pos + take]);
                    self.cursor.pos += take;
                }
                Batch { indices, epoch, wrapped }
            }
        }
    }
}

fn shuffled(n: usize, seed: u64, consumer: u64, epoch: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngState::new(seed, consumer.wrapping_mul(stream::SHUFFLE_BASE).wrapping_add(epoch));
    order.shuffle(rng.inner());
    order
}
