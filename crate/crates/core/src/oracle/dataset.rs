use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Triplet;

/// One (query, candidate) classification example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub anchor_id: String,
    pub query_text: String,
    pub candidate_id: String,
    pub label: u8,
}

/// Positives first, then negatives, per triplet in order.
pub fn expand_pairs(triplets: &[Triplet]) -> Vec<Pair> {
    let mut out = Vec::new();
    for t in triplets {
        for (ids, label) in [(&t.positives, 1u8), (&t.negatives, 0u8)] {
            out.extend(ids.iter().map(|id| Pair {
                anchor_id: t.query.anchor_id.clone(),
                query_text: t.query.text.clone(),
                candidate_id: id.clone(),
                label,
            }));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<Triplet>,
    pub validation: Vec<Triplet>,
    pub test: Vec<Triplet>,
    /// Training pairs after negative downsampling to a 1:1 ratio.
    pub train_pairs: Vec<Pair>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub triplets: usize,
    pub positive_pairs: usize,
    pub negative_pairs: usize,
}

impl SplitCounts {
    fn of(triplets: &[Triplet]) -> Self {
        SplitCounts {
            triplets: triplets.len(),
            positive_pairs: triplets.iter().map(|t| t.positives.len()).sum(),
            negative_pairs: triplets.iter().map(|t| t.negatives.len()).sum(),
        }
    }
}

/// Both candidate notions of "sample": triplets and expanded pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub seed: u64,
    pub total: SplitCounts,
    pub train: SplitCounts,
    pub train_balanced: SplitCounts,
    pub validation: SplitCounts,
    pub test: SplitCounts,
}

impl DatasetSplit {
    pub fn stats(&self) -> DatasetStats {
        let all: Vec<Triplet> = self
            .train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .cloned()
            .collect();
        let pos = self.train_pairs.iter().filter(|p| p.label == 1).count();
        DatasetStats {
            seed: self.seed,
            total: SplitCounts::of(&all),
            train: SplitCounts::of(&self.train),
            train_balanced: SplitCounts {
                triplets: self.train.len(),
                positive_pairs: pos,
                negative_pairs: self.train_pairs.len() - pos,
            },
            validation: SplitCounts::of(&self.validation),
            test: SplitCounts::of(&self.test),
        }
    }
}

/// Sizes of the 8:1:1 partition of `n` items.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let tenth = (n as f64 * 0.1).round() as usize;
    (n - 2 * tenth, tenth, tenth)
}

/// Seeded shuffle, 8:1:1 split, then negatives in the training pairs are
/// downsampled to the number of positives. Validation and test keep their
/// natural class ratio.
pub fn split_and_balance(triplets: &[Triplet], seed: u64) -> DatasetSplit {
    if triplets.len() < 10 {
        log::warn!(
            "only {} triplets; validation and test splits will be tiny or empty",
            triplets.len()
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    order.shuffle(&mut rng);
    let (n_train, n_val, _) = split_sizes(triplets.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| triplets[i].clone()).collect::<Vec<_>>();
    let train = pick(&order[..n_train]);
    let validation = pick(&order[n_train..n_train + n_val]);
    let test = pick(&order[n_train + n_val..]);

    let pairs = expand_pairs(&train);
    let (positives, negatives): (Vec<Pair>, Vec<Pair>) = pairs.into_iter().partition(|p| p.label == 1);
    let negatives = if negatives.len() > positives.len() {
        let mut keep = index::sample(&mut rng, negatives.len(), positives.len()).into_vec();
        keep.sort_unstable();
        keep.into_iter().map(|i| negatives[i].clone()).collect()
    } else {
        negatives
    };
    let mut train_pairs = positives;
    train_pairs.extend(negatives);

    DatasetSplit {
        train,
        validation,
        test,
        train_pairs,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Query;

    fn triplet(i: usize, pos: usize, neg: usize) -> Triplet {
        Triplet {
            query: Query {
                anchor_id: format!("f{i}.py::f::Function"),
                text: format!("def f{i}():"),
            },
            positives: (0..pos).map(|j| format!("p{i}_{j}")).collect(),
            negatives: (0..neg).map(|j| format!("n{i}_{j}")).collect(),
        }
    }

    #[test]
    fn hundred_triplets_split_80_10_10() {
        let ts: Vec<_> = (0..100).map(|i| triplet(i, 1, 1)).collect();
        let s = split_and_balance(&ts, 7);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 10, 10));
        let mut ids: Vec<_> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .map(|t| t.query.anchor_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 100);
    }

    #[test]
    fn downsampling_balances_train_only() {
        // 100 triplets with 3 positives and 47 negatives each: the 80 train
        // triplets carry 240 positives and 3760 negatives.
        let ts: Vec<_> = (0..100).map(|i| triplet(i, 3, 47)).collect();
        let s = split_and_balance(&ts, 11);
        let stats = s.stats();
        assert_eq!(stats.train.positive_pairs, 240);
        assert_eq!(stats.train.negative_pairs, 3760);
        assert_eq!(stats.train_balanced.positive_pairs, 240);
        assert_eq!(stats.train_balanced.negative_pairs, 240);
        assert_eq!(stats.validation.negative_pairs, 10 * 47);
        assert_eq!(stats.test.positive_pairs, 10 * 3);
    }

    #[test]
    fn three_hundred_positives_vs_4700_negatives() {
        // 100 train-side triplets, 3 positives and 47 negatives each.
        let ts: Vec<_> = (0..126).map(|i| triplet(i, 3, 47)).collect();
        let s = split_and_balance(&ts, 3);
        assert_eq!(s.train.len(), 100);
        let pos = s.train_pairs.iter().filter(|p| p.label == 1).count();
        let neg = s.train_pairs.len() - pos;
        assert_eq!((pos, neg), (300, 300));
        let all_negs: std::collections::HashSet<_> = s
            .train
            .iter()
            .flat_map(|t| t.negatives.iter())
            .collect();
        assert!(s
            .train_pairs
            .iter()
            .filter(|p| p.label == 0)
            .all(|p| all_negs.contains(&p.candidate_id)));
    }

    #[test]
    fn same_seed_same_split() {
        let ts: Vec<_> = (0..57).map(|i| triplet(i, 2, 9)).collect();
        assert_eq!(split_and_balance(&ts, 5), split_and_balance(&ts, 5));
        assert_ne!(split_and_balance(&ts, 5).train, split_and_balance(&ts, 6).train);
    }

    #[test]
    fn split_sizes_stay_within_one_of_ratio() {
        for n in 10..500 {
            let (tr, va, te) = split_sizes(n);
            assert_eq!(tr + va + te, n);
            assert!((tr as f64 - 0.8 * n as f64).abs() <= 1.0, "n={n}");
            assert!((va as f64 - 0.1 * n as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn fewer_negatives_than_positives_keeps_all() {
        let ts: Vec<_> = (0..10).map(|i| triplet(i, 5, 1)).collect();
        let s = split_and_balance(&ts, 1);
        let neg = s.train_pairs.iter().filter(|p| p.label == 0).count();
        assert_eq!(neg, s.train.len());
    }
}
