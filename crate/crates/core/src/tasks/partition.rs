use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::idx::ImageDataset;
use crate::error::{Error, Result};

/// Mutually exclusive, class-balanced index subsets, one per sub-model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmodelPartition {
    pub subsets: Vec<Vec<usize>>,
}

impl SubmodelPartition {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

/// Splits `ds` into `d` subsets with `per_class` samples of every class
/// each (default: as many as the rarest class allows).
pub fn partition_balanced(
    ds: &ImageDataset,
    d: usize,
    per_class: Option<usize>,
    seed: u64,
) -> Result<SubmodelPartition> {
    if d == 0 {
        return Err(Error::Dataset("need at least one subset".into()));
    }
    let classes: Vec<Vec<usize>> = ds.by_class().into_iter().filter(|c| !c.is_empty()).collect();
    let rarest = classes.iter().map(Vec::len).min().unwrap_or(0);
    let per = per_class.unwrap_or(rarest / d);
    if per == 0 || per * d > rarest {
        return Err(Error::Dataset(format!(
            "insufficient samples: {d} subsets × {per} per class need {} of every class, rarest has {rarest}",
            d * per.max(1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subsets = vec![Vec::with_capacity(per * classes.len()); d];
    for class in &classes {
        let mut idx = class.clone();
        idx.shuffle(&mut rng);
        for (j, subset) in subsets.iter_mut().enumerate() {
            subset.extend_from_slice(&idx[j * per..(j + 1) * per]);
        }
    }
    for s in &mut subsets {
        s.sort_unstable();
    }
    Ok(SubmodelPartition { subsets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labelled(per_class: usize) -> ImageDataset {
        let labels: Vec<u8> = (0..per_class * 10).map(|i| (i % 10) as u8).collect();
        ImageDataset::new(1, 1, vec![0.0; labels.len()], labels).unwrap()
    }

    fn class_counts(ds: &ImageDataset, subset: &[usize]) -> Vec<usize> {
        let mut c = vec![0; 10];
        for &i in subset {
            c[ds.labels[i] as usize] += 1;
        }
        c
    }

    #[test]
    fn hundred_per_class_into_five() {
        let ds = labelled(100);
        let p = partition_balanced(&ds, 5, None, 0).unwrap();
        assert_eq!(p.len(), 5);
        for s in &p.subsets {
            assert_eq!(class_counts(&ds, s), vec![20; 10]);
        }
    }

    #[test]
    fn forty_subsets_are_forty_times_smaller() {
        let ds = labelled(400);
        let one = partition_balanced(&ds, 1, None, 0).unwrap();
        let forty = partition_balanced(&ds, 40, None, 0).unwrap();
        assert_eq!(one.subsets[0].len(), 40 * forty.subsets[0].len());
    }

    #[test]
    fn insufficient_samples() {
        let ds = labelled(3);
        assert!(partition_balanced(&ds, 4, None, 0).is_err());
        assert!(partition_balanced(&ds, 2, Some(2), 0).is_err());
        assert!(partition_balanced(&ds, 0, None, 0).is_err());
    }

    proptest! {
        #[test]
        fn is_a_balanced_partition(per in 1usize..30, d in 1usize..8, seed in any::<u64>()) {
            let ds = labelled(per * d + seed as usize % 3);
            let p = partition_balanced(&ds, d, None, seed).unwrap();
            prop_assert_eq!(&p, &partition_balanced(&ds, d, None, seed).unwrap());
            let mut seen = std::collections::HashSet::new();
            for s in &p.subsets {
                prop_assert_eq!(class_counts(&ds, s), vec![s.len() / 10; 10]);
                prop_assert_eq!(s.len(), p.subsets[0].len());
                for &i in s {
                    prop_assert!(seen.insert(i));
                }
            }
        }
    }
}
