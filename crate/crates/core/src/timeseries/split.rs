use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One expanding-window fold: train on everything before the test block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

/// Places `n_folds` consecutive test blocks of `fold_len` hours at the end of a
/// series of length `n`. Each fold trains on `0..test.start`.
pub fn split_expanding(
    n: usize,
    n_folds: usize,
    fold_len: usize,
    min_train: usize,
) -> Result<Vec<Fold>> {
    if n_folds == 0 || fold_len == 0 {
        return Err(Error::InvalidArgument(
            "folds and fold length must be positive".into(),
        ));
    }
    let test_total = n_folds * fold_len;
    let needed = test_total + min_train.max(1);
    if n < needed {
        return Err(Error::TooShort {
            needed,
            available: n,
        });
    }
    let first = n - test_total;
    Ok((0..n_folds)
        .map(|k| {
            let start = first + k * fold_len;
            Fold {
                index: k,
                train: 0..start,
                test: start..start + fold_len,
            }
        })
        .collect())
}
