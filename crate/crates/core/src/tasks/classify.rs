use super::idx::ImageDataset;
use super::partition::SubmodelPartition;
use crate::error::Result;
use crate::net::Network;
use crate::par::Parallelism;
use crate::train::{predict_slot, Example, Input, TrainData};

pub const CLASSES: usize = 10;

pub fn one_hot(label: u8) -> Vec<f64> {
    (0..CLASSES).map(|k| f64::from(u8::from(k == label as usize))).collect()
}

/// Partition `j` of the training data becomes the examples of sub-model `j`.
pub fn classification_data(ds: &ImageDataset, partition: &SubmodelPartition) -> TrainData {
    TrainData::new(
        partition
            .subsets
            .iter()
            .map(|subset| {
                subset
                    .iter()
                    .map(|&i| Example::new(Input::real(ds.image(i).to_vec()), one_hot(ds.labels[i])))
                    .collect()
            })
            .collect(),
    )
}

pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// Accuracy of sub-model `slot` on `test`: argmax over its output slice.
pub fn submodel_accuracy(net: &Network, test: &ImageDataset, slot: usize, mode: Parallelism) -> Result<f64> {
    let inputs: Vec<&[f64]> = (0..test.len()).map(|i| test.image(i)).collect();
    let outputs = predict_slot(net, &inputs, slot, mode)?;
    let correct = outputs
        .iter()
        .zip(&test.labels)
        .filter(|(y, &l)| argmax(y) == l as usize)
        .count();
    Ok(correct as f64 / test.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_picks_first_maximum() {
        assert_eq!(argmax(&[0.1, 0.9, 0.9, -1.0]), 1);
        assert_eq!(one_hot(3)[3], 1.0);
        assert_eq!(one_hot(3).iter().sum::<f64>(), 1.0);
    }
}
