use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Row indices of a train/test partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_indices(labels: &[u8]) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        out[(l != 0) as usize].push(i);
    }
    out
}

/// Per-class shuffled hold-out: `round(n_c · test_fraction)` rows of each
/// class go to the test side (at least one, never all).
pub fn stratified_split(
    labels: &[u8],
    test_fraction: f64,
    rng_seed: u64,
) -> Result<Split, ModelError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ModelError::InvalidParameter(format!(
            "test_fraction {test_fraction} not in (0,1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (label, mut idx) in class_indices(labels).into_iter().enumerate() {
        if idx.len() < 2 {
            return Err(ModelError::ClassTooSmall {
                label: label as u8,
                count: idx.len(),
                needed: 2,
            });
        }
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
        split.test.extend_from_slice(&idx[..n_test]);
        split.train.extend_from_slice(&idx[n_test..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// `k` test folds over the rows `rows` (indices into `labels`). Each class is
/// shuffled and dealt round-robin, continuing where the previous class
/// stopped so fold sizes differ by at most one.
pub fn stratified_kfold(
    labels: &[u8],
    rows: &[usize],
    k: usize,
    rng_seed: u64,
) -> Result<Vec<Vec<usize>>, ModelError> {
    if k < 2 {
        return Err(ModelError::InvalidParameter(format!("k = {k} < 2")));
    }
    let sub: Vec<u8> = rows.iter().map(|&i| labels[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (label, mut idx) in class_indices(&sub).into_iter().enumerate() {
        if idx.len() < k {
            return Err(ModelError::ClassTooSmall {
                label: label as u8,
                count: idx.len(),
                needed: k,
            });
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next % k].push(rows[i]);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn balanced(n: usize) -> Vec<u8> {
        (0..2 * n).map(|i| (i % 2) as u8).collect()
    }

    #[test]
    fn published_split_sizes() {
        // 7394 + 7394 users, 20% hold-out
        let s = stratified_split(&balanced(7394), 0.2, 1).unwrap();
        assert_eq!(s.test.len(), 2958);
        assert_eq!(s.train.len(), 11_830);
        let labels = balanced(7394);
        assert_eq!(s.test.iter().filter(|&&i| labels[i] == 1).count(), 1479);
    }

    #[test]
    fn small_split_and_determinism() {
        let labels = balanced(10);
        let a = stratified_split(&labels, 0.2, 9).unwrap();
        assert_eq!(a.test.len(), 4);
        assert_eq!(a.test.iter().filter(|&&i| labels[i] == 1).count(), 2);
        assert_eq!(a, stratified_split(&labels, 0.2, 9).unwrap());
        assert!(stratified_split(&[0, 0, 0, 1], 0.2, 9).is_err());
    }

    #[test]
    fn ten_folds_of_one_plus_one() {
        let labels = balanced(10);
        let rows: Vec<usize> = (0..20).collect();
        let folds = stratified_kfold(&labels, &rows, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
        assert_eq!(folds, stratified_kfold(&labels, &rows, 10, 3).unwrap());
        assert!(stratified_kfold(&labels, &rows[..8], 10, 3).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n0 in 10usize..60, n1 in 10usize..60, k in 2usize..10, seed: u64) {
            let mut labels = vec![0u8; n0];
            labels.extend(vec![1u8; n1]);
            let rows: Vec<usize> = (0..labels.len()).collect();
            let folds = stratified_kfold(&labels, &rows, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(&all, &rows);
            for f in &folds {
                let pos = f.iter().filter(|&&i| labels[i] == 1).count() as f64;
                let expect = n1 as f64 / k as f64;
                prop_assert!((pos - expect).abs() <= 1.0);
            }
        }

        #[test]
        fn split_preserves_class_shares(n0 in 2usize..200, n1 in 2usize..200, seed: u64) {
            let mut labels = vec![0u8; n0];
            labels.extend(vec![1u8; n1]);
            let s = stratified_split(&labels, 0.2, seed).unwrap();
            let pos = s.test.iter().filter(|&&i| labels[i] == 1).count() as f64;
            prop_assert!((pos - 0.2 * n1 as f64).abs() <= 1.0);
            prop_assert_eq!(s.train.len() + s.test.len(), n0 + n1);
        }
    }
}
