use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::rng::stream;
use crate::{Error, Result};

/// Shuffles `0..n` and deals it into `k` disjoint folds whose sizes differ by
/// at most one. Each fold is returned sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(Error::Invalid(alloc::format!("need k >= 2 and n >= k (n = {n}, k = {k})")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, 11));
    let mut folds: Vec<Vec<usize>> = (0..k).map(|_| Vec::with_capacity(n / k + 1)).collect();
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
