use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::kernel::{stream, RngState};
use crate::store::EmbeddingDataset;

/// Labeled-sample budgets, descending: the full set, `⌊n/5ᵏ⌋` for
/// `k = 1..=5`, and a floor of one sample per class. Entries below the
/// floor are dropped.
pub fn label_ladder(n_train: usize, num_classes: usize) -> Result<Vec<usize>> {
    if num_classes == 0 || n_train < num_classes {
        return Err(Error::Contract(format!(
            "label ladder needs at least one row per class: {n_train} rows for {num_classes} classes"
        )));
    }
    let mut ladder = vec![n_train];
    let mut div = 1usize;
    for _ in 0..5 {
        div *= 5;
        ladder.push(n_train / div);
    }
    ladder.push(num_classes);
    ladder.retain(|&b| b >= num_classes);
    ladder.sort_unstable_by(|a, b| b.cmp(a));
    ladder.dedup();
    Ok(ladder)
}

/// A class-balanced labeled subset of a training set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Selection {
    pub budget: usize,
    /// Sorted row indices of the paired (labeled) subset.
    pub paired: Vec<usize>,
    /// Rows taken from each class.
    pub per_class: Vec<usize>,
}

/// `⌊budget/K⌋` rows per class, with the remainder going one each to the
/// lowest-numbered classes. Rows within a class are chosen by a seeded
/// shuffle. The unpaired pool is always the whole dataset.
pub fn select_labeled(ds: &EmbeddingDataset, budget: usize, seed: u64) -> Result<Selection> {
    let labeled = ds.labels.iter().filter(|&&l| l >= 0).count();
    if budget == 0 || budget > labeled {
        return Err(Error::Contract(format!(
            "label budget {budget} outside [1, {labeled}] (labeled training rows)"
        )));
    }
    let k = ds.num_classes;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in ds.labels.iter().enumerate() {
        if l >= 0 {
            by_class[l as usize].push(i);
        }
    }

    let quota: Vec<usize> = (0..k).map(|c| budget / k + usize::from(c < budget % k)).collect();
    for (class, (rows, &q)) in by_class.iter().zip(&quota).enumerate() {
        if rows.len() < q {
            return Err(Error::Stratification {
                class,
                available: rows.len(),
                required: q,
            });
        }
    }

    let mut rng = RngState::new(seed, stream::SELECTION);
    let mut paired = Vec::with_capacity(budget);
    for (rows, &q) in by_class.iter_mut().zip(&quota) {
        if q == rows.len() {
            paired.extend_from_slice(rows);
        } else {
            let (chosen, _) = rows.partial_shuffle(rng.inner(), q);
            paired.extend_from_slice(chosen);
        }
    }
    paired.sort_unstable();
    Ok(Selection {
        budget,
        paired,
        per_class: quota,
    })
}
