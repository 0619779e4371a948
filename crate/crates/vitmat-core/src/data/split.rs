//! Stratified train/val/test splitting and k-fold planning.
//!
//! Both are pure functions of `(index, seed)`: each class's sample list is
//! shuffled on its own derived substream (`substream2(seed, salt, class)`
//! with salt 0 for splits and 1 for folds), so adding a class never perturbs
//! another class's draw.

use serde::{Deserialize, Serialize};

use super::DatasetIndex;
use crate::error::{Error, Result};
use crate::tensor::RngState;

const SPLIT_SALT: u64 = 0;
const FOLD_SALT: u64 = 1;

/// Train/val/test fractions plus the shuffle seed. Fractions must be
/// non-negative and sum to one; `val` (or `test`) may be zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train,
            val,
            test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for f in [self.train, self.val, self.test] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Input(format!("split fraction {f} outside [0, 1]")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("split fractions sum to {sum}, not 1")));
        }
        Ok(())
    }

    pub fn fractions(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Sample-id lists of the three partitions, each sorted ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn fisher_yates(ids: &mut [usize], rng: &mut RngState) {
    for i in (1..ids.len()).rev() {
        let j = rng.bounded(i as u64 + 1) as usize;
        ids.swap(i, j);
    }
}

/// Allocates `n` items over the fractions by largest remainder: floor each
/// target, then hand the leftover items to the partitions with the largest
/// fractional parts, ties resolved in partition order (train, val, test).
pub(crate) fn largest_remainder(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let mut alloc = [0usize; 3];
    let mut frac_part = [0f64; 3];
    let mut assigned = 0;
    for i in 0..3 {
        let target = fractions[i] * n as f64;
        alloc[i] = target.floor() as usize;
        frac_part[i] = target - target.floor();
        assigned += alloc[i];
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        frac_part[b]
            .partial_cmp(&frac_part[a])
            .expect("fractions are finite")
            .then(a.cmp(&b))
    });
    for &i in order.iter().take(n - assigned) {
        alloc[i] += 1;
    }
    alloc
}

/// Stratified split: per class, shuffle then allocate by largest remainder.
/// Every partition with a nonzero fraction must receive at least one sample
/// of every class, otherwise the split fails naming the class.
pub fn stratified_split(index: &DatasetIndex, spec: &SplitSpec) -> Result<SplitAssignment> {
    spec.validate()?;
    let fractions = spec.fractions();
    let mut out = SplitAssignment::default();
    for class in 0..index.num_classes() {
        let mut ids = index.class_sample_ids(class);
        let mut rng = RngState::substream2(spec.seed, SPLIT_SALT, class as u64);
        fisher_yates(&mut ids, &mut rng);

        let alloc = largest_remainder(ids.len(), fractions);
        for (i, &count) in alloc.iter().enumerate() {
            if fractions[i] > 0.0 && count == 0 {
                return Err(Error::Split {
                    class: index.classes()[class].clone(),
                    reason: format!(
                        "{} samples cannot fill a {:.0}% partition",
                        ids.len(),
                        fractions[i] * 100.0
                    ),
                });
            }
        }
        out.train.extend(&ids[..alloc[0]]);
        out.val.extend(&ids[alloc[0]..alloc[0] + alloc[1]]);
        out.test.extend(&ids[alloc[0] + alloc[1]..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// Fold id per sample, produced by [`kfold`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    /// Sample ids held out by fold `f`, sorted.
    pub fn test_ids(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sample ids trained on when fold `f` is held out, sorted.
    pub fn train_ids(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Per-class seeded shuffle followed by round-robin assignment, so per-class
/// fold sizes differ by at most one. Classes with fewer than `k` samples are
/// allowed (some folds receive none of them) but reported as warnings.
pub fn kfold(index: &DatasetIndex, k: usize, seed: u64) -> Result<(FoldPlan, Vec<String>)> {
    if k < 2 {
        return Err(Error::Input(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut assignment = vec![0usize; index.len()];
    let mut warnings = Vec::new();
    for class in 0..index.num_classes() {
        let mut ids = index.class_sample_ids(class);
        if ids.len() < k {
            warnings.push(format!(
                "class `{}` has {} samples for {k} folds; some folds get none",
                index.classes()[class],
                ids.len()
            ));
        }
        let mut rng = RngState::substream2(seed, FOLD_SALT, class as u64);
        fisher_yates(&mut ids, &mut rng);
        for (position, &id) in ids.iter().enumerate() {
            assignment[id] = position % k;
        }
    }
    Ok((FoldPlan { k, assignment, seed }, warnings))
}

#[cfg(test)]
mod tests {
    use super::super::fixture_index;
    use super::*;

    /// Independent largest-remainder allocator: enumerates every candidate
    /// set of partitions receiving a remainder unit and picks the set whose
    /// fractional parts are lexicographically largest (compared exactly),
    /// with exact ties resolved toward the smaller partition indices —
    /// brute-force search instead of the incremental rule.
    fn oracle_allocator(n: usize, fractions: [f64; 3]) -> [usize; 3] {
        let floors: Vec<usize> = fractions
            .iter()
            .map(|f| (f * n as f64).floor() as usize)
            .collect();
        let fracs: Vec<f64> = fractions
            .iter()
            .zip(&floors)
            .map(|(f, &fl)| f * n as f64 - fl as f64)
            .collect();
        let rem = n - floors.iter().sum::<usize>();

        let mut best: Option<(Vec<f64>, Vec<usize>)> = None;
        for mask in 0u8..8 {
            if mask.count_ones() as usize != rem {
                continue;
            }
            let idxs: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let mut chosen: Vec<f64> = idxs.iter().map(|&i| fracs[i]).collect();
            chosen.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let better = match &best {
                None => true,
                Some((bc, bi)) => match chosen.partial_cmp(bc).unwrap() {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => idxs < *bi,
                },
            };
            if better {
                best = Some((chosen, idxs));
            }
        }
        let mut alloc = [floors[0], floors[1], floors[2]];
        for &i in &best.expect("some allocation exists").1 {
            alloc[i] += 1;
        }
        alloc
    }

    #[test]
    fn largest_remainder_matches_brute_force() {
        let modes = [
            [0.85, 0.0, 0.15],
            [0.7, 0.0, 0.3],
            [0.7, 0.15, 0.15],
            [0.6, 0.2, 0.2],
            [0.6, 0.1, 0.3],
            [0.8, 0.1, 0.1],
        ];
        for n in 1..60 {
            for m in modes {
                assert_eq!(
                    largest_remainder(n, m),
                    oracle_allocator(n, m),
                    "n={n} mode={m:?}"
                );
            }
        }
    }

    #[test]
    fn class_of_ten_at_85_15() {
        // floors 8 and 1, remainders tie at 0.5, train wins: 9/1
        assert_eq!(largest_remainder(10, [0.85, 0.0, 0.15]), [9, 0, 1]);
    }

    #[test]
    fn all_in_train_mode() {
        let idx = fixture_index("d", &["a", "b"], &[5, 3]);
        let spec = SplitSpec::new(1.0, 0.0, 0.0, 1).unwrap();
        let split = stratified_split(&idx, &spec).unwrap();
        assert_eq!(split.train.len(), 8);
        assert!(split.val.is_empty() && split.test.is_empty());
    }

    #[test]
    fn partitions_are_disjoint_and_cover() {
        let idx = fixture_index("d", &["a", "b", "c", "d"], &[40, 25, 10, 5]);
        let spec = SplitSpec::new(0.6, 0.2, 0.2, 7).unwrap();
        let split = stratified_split(&idx, &spec).unwrap();
        let mut all: Vec<usize> = split
            .train
            .iter()
            .chain(&split.val)
            .chain(&split.test)
            .copied()
            .collect();
        all.sort_unstable();
        let expect: Vec<usize> = (0..idx.len()).collect();
        assert_eq!(all, expect);
    }

    #[test]
    fn per_class_deviation_below_one() {
        let idx = fixture_index("d", &["a", "b", "c"], &[17, 23, 11]);
        let spec = SplitSpec::new(0.7, 0.15, 0.15, 3).unwrap();
        let split = stratified_split(&idx, &spec).unwrap();
        for class in 0..3 {
            let n = idx.per_class_counts()[class] as f64;
            for (ids, frac) in [
                (&split.train, 0.7),
                (&split.val, 0.15),
                (&split.test, 0.15),
            ] {
                let actual = ids
                    .iter()
                    .filter(|&&i| idx.samples()[i].class == class)
                    .count() as f64;
                assert!((actual - frac * n).abs() < 1.0, "class {class}");
            }
        }
    }

    #[test]
    fn split_is_deterministic() {
        let idx = fixture_index("d", &["a", "b"], &[12, 9]);
        let spec = SplitSpec::new(0.7, 0.0, 0.3, 99).unwrap();
        assert_eq!(
            stratified_split(&idx, &spec).unwrap(),
            stratified_split(&idx, &spec).unwrap()
        );
    }

    #[test]
    fn infeasible_class_is_named() {
        let idx = fixture_index("d", &["tiny", "big"], &[2, 40]);
        let spec = SplitSpec::new(0.6, 0.2, 0.2, 1).unwrap();
        match stratified_split(&idx, &spec) {
            Err(Error::Split { class, .. }) => assert_eq!(class, "tiny"),
            other => panic!("expected split error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_fractions_rejected() {
        assert!(SplitSpec::new(0.5, 0.2, 0.2, 0).is_err());
        assert!(SplitSpec::new(-0.1, 0.6, 0.5, 0).is_err());
    }

    #[test]
    fn kfold_equal_sizes() {
        let idx = fixture_index("d", &["only"], &[25]);
        let (plan, warnings) = kfold(&idx, 5, 3).unwrap();
        assert_eq!(plan.fold_sizes(), vec![5; 5]);
        assert!(warnings.is_empty());
    }

    #[test]
    fn kfold_partitions_exactly() {
        let idx = fixture_index("d", &["a", "b"], &[13, 8]);
        let (plan, _) = kfold(&idx, 5, 11).unwrap();
        let mut seen = vec![false; idx.len()];
        for f in 0..5 {
            for id in plan.test_ids(f) {
                assert!(!seen[id], "sample {id} in two folds");
                seen[id] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        // train/test complementarity
        let train = plan.train_ids(2);
        let test = plan.test_ids(2);
        assert_eq!(train.len() + test.len(), idx.len());
    }

    #[test]
    fn kfold_round_robin_sizes_for_seven() {
        let idx = fixture_index("d", &["only"], &[7]);
        let (plan, _) = kfold(&idx, 5, 0).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
    }

    #[test]
    fn kfold_small_class_warns() {
        let idx = fixture_index("d", &["small", "big"], &[3, 20]);
        let (_, warnings) = kfold(&idx, 5, 0).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("small"));
    }

    #[test]
    fn kfold_rejects_k_below_two() {
        let idx = fixture_index("d", &["a"], &[10]);
        assert!(matches!(kfold(&idx, 1, 0), Err(Error::Input(_))));
    }

    #[test]
    fn per_class_fold_sizes_differ_by_at_most_one() {
        let idx = fixture_index("d", &["a", "b", "c"], &[23, 11, 7]);
        let (plan, _) = kfold(&idx, 5, 17).unwrap();
        for class in 0..3 {
            let mut sizes = vec![0usize; 5];
            for (i, s) in idx.samples().iter().enumerate() {
                if s.class == class {
                    sizes[plan.assignment[i]] += 1;
                }
            }
            let max = *sizes.iter().max().unwrap();
            let min = *sizes.iter().min().unwrap();
            assert!(max - min <= 1, "class {class}: {sizes:?}");
        }
    }
}
