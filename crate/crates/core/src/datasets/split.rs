//! Seed-deterministic train/test partitioning of corrupted sets.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledImageSet;
use crate::error::{Error, Result};

/// Fisher-Yates with an explicit generator; the shuffle all deterministic
/// orderings in this crate funnel through.
pub fn seeded_shuffle<T>(v: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

fn round_half_up(v: f64) -> usize {
    (v + 0.5).floor() as usize
}

/// Label-stratified disjoint exhaustive split; |first| = round(fraction*N).
///
/// Per-class quotas are floor(fraction*count) with the remaining slots
/// assigned by largest fractional remainder, so each class lands within one
/// of fraction*count while the total stays exact.
pub fn augmentation_split(
    set: &LabeledImageSet,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    validate(set, fraction)?;
    let total_take = round_half_up(fraction * set.len() as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // indices per class, each shuffled
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); set.num_classes()];
    for (i, &l) in set.labels.iter().enumerate() {
        per_class[l as usize].push(i);
    }
    for bucket in &mut per_class {
        seeded_shuffle(bucket, &mut rng);
    }

    let mut quotas: Vec<usize> = Vec::with_capacity(per_class.len());
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    let mut assigned = 0;
    for (c, bucket) in per_class.iter().enumerate() {
        let exact = fraction * bucket.len() as f64;
        let base = exact.floor() as usize;
        quotas.push(base);
        assigned += base;
        remainders.push((c, exact - base as f64));
    }
    // stable order: remainder descending, class index ascending
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (c, _) in remainders {
        if assigned == total_take {
            break;
        }
        if quotas[c] < per_class[c].len() {
            quotas[c] += 1;
            assigned += 1;
        }
    }

    let mut take = Vec::with_capacity(total_take);
    let mut keep = Vec::with_capacity(set.len() - total_take);
    for (bucket, quota) in per_class.iter().zip(&quotas) {
        take.extend_from_slice(&bucket[..*quota]);
        keep.extend_from_slice(&bucket[*quota..]);
    }
    take.sort_unstable();
    keep.sort_unstable();
    Ok((set.subset(&take), set.subset(&keep)))
}

/// Pure-random (unstratified) variant.
pub fn random_split(
    set: &LabeledImageSet,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    validate(set, fraction)?;
    let total_take = round_half_up(fraction * set.len() as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..set.len()).collect();
    seeded_shuffle(&mut indices, &mut rng);
    let (mut take, mut keep) = (
        indices[..total_take].to_vec(),
        indices[total_take..].to_vec(),
    );
    take.sort_unstable();
    keep.sort_unstable();
    Ok((set.subset(&take), set.subset(&keep)))
}

fn validate(set: &LabeledImageSet, fraction: f64) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Dataset("cannot split an empty set".into()));
    }
    if !(0.0..1.0).contains(&fraction) || fraction == 0.0 {
        return Err(Error::arg(format!(
            "fraction must be in (0, 1), got {fraction}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synth_shapes;
    use std::collections::HashSet;

    #[test]
    fn fifty_fifty_is_disjoint_and_exhaustive() {
        let set = synth_shapes(100, 10, 5).unwrap();
        let (a, b) = augmentation_split(&set, 0.5, 9).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(b.len(), 50);
        let ids_a: HashSet<u64> = a.ids.iter().copied().collect();
        let ids_b: HashSet<u64> = b.ids.iter().copied().collect();
        assert!(ids_a.is_disjoint(&ids_b));
        assert_eq!(ids_a.len() + ids_b.len(), 100);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let set = synth_shapes(120, 10, 5).unwrap();
        let (a1, _) = augmentation_split(&set, 0.5, 1).unwrap();
        let (a2, _) = augmentation_split(&set, 0.5, 1).unwrap();
        assert_eq!(a1.ids, a2.ids);
        let (a3, _) = augmentation_split(&set, 0.5, 2).unwrap();
        assert_ne!(a1.ids, a3.ids);
    }

    #[test]
    fn per_class_counts_differ_by_at_most_one() {
        // 99 samples over 10 classes: several odd class counts
        let set = synth_shapes(99, 10, 3).unwrap();
        let (a, b) = augmentation_split(&set, 0.5, 7).unwrap();
        assert_eq!(a.len() + b.len(), 99);
        assert_eq!(a.len(), 50); // round(0.5 * 99) = 50 (half-up)
        for (ca, cb) in a.class_counts().into_iter().zip(b.class_counts()) {
            assert!(ca.abs_diff(cb) <= 1, "class counts {ca} vs {cb}");
        }
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let set = synth_shapes(10, 10, 0).unwrap();
        assert!(augmentation_split(&set, 0.0, 0).is_err());
        assert!(augmentation_split(&set, 1.0, 0).is_err());
        let empty = LabeledImageSet::new(vec![], vec![], 10).unwrap();
        assert!(augmentation_split(&empty, 0.5, 0).is_err());
    }
}
