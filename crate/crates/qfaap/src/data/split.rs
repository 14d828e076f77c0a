//! Deterministic image-wise dataset split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shuffles all items with the seeded generator and splits them into
/// disjoint train/test sets; the train side gets `floor(n * train_fraction)`
/// items.
pub fn split_imagewise<T>(items: Vec<T>, train_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {train_fraction} outside (0,1)"
        )));
    }
    if items.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 records to split, got {}",
            items.len()
        )));
    }
    let n = items.len();
    let n_train = ((n as f64) * train_fraction).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(n - n_train);
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    for (pos, &idx) in order.iter().enumerate() {
        let item = slots[idx].take().expect("each index visited once");
        if pos < n_train {
            train.push(item);
        } else {
            test.push(item);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn ninety_ten_split_of_ten() {
        let (train, test) = split_imagewise((0..10).collect(), 0.9, 0).unwrap();
        assert_eq!(train.len(), 9);
        assert_eq!(test.len(), 1);
    }

    #[test]
    fn same_seed_same_membership() {
        let (a1, b1) = split_imagewise((0..57).collect::<Vec<i32>>(), 0.8, 9).unwrap();
        let (a2, b2) = split_imagewise((0..57).collect::<Vec<i32>>(), 0.8, 9).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn partition_property_over_seeds() {
        for seed in 0..100u64 {
            let (train, test) = split_imagewise((0..23).collect::<Vec<i32>>(), 0.7, seed).unwrap();
            let mut all: Vec<i32> = train.iter().chain(test.iter()).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..23).collect::<Vec<i32>>());
            let train_set: HashSet<i32> = train.into_iter().collect();
            assert!(test.iter().all(|t| !train_set.contains(t)));
        }
    }

    #[test]
    fn rejects_bad_fraction_and_tiny_input() {
        assert!(split_imagewise(vec![1, 2, 3], 1.0, 0).is_err());
        assert!(split_imagewise(vec![1, 2, 3], 0.0, 0).is_err());
        assert!(split_imagewise(vec![1], 0.5, 0).is_err());
    }
}
