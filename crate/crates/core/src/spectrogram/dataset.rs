use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::label::ClassLabel;
use crate::seed;

use super::image::{SpectrogramImage, IMAGE_PIXELS};

/// Column-per-sample matrix of flattened images with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMatrix {
    pub data: DMatrix<f64>,
    pub labels: Vec<ClassLabel>,
    pub column_order_seed: u64,
}

impl DatasetMatrix {
    pub fn new(data: DMatrix<f64>, labels: Vec<ClassLabel>, column_order_seed: u64) -> Result<Self> {
        if labels.len() != data.ncols() {
            return Err(Error::Shape {
                expected: format!("{} labels", data.ncols()),
                actual: format!("{}", labels.len()),
            });
        }
        Ok(DatasetMatrix {
            data,
            labels,
            column_order_seed,
        })
    }

    /// Rows (pixels per image).
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Columns (samples).
    pub fn m(&self) -> usize {
        self.data.ncols()
    }

    pub fn classes(&self) -> Vec<ClassLabel> {
        self.class_counts().into_keys().collect()
    }

    pub fn class_counts(&self) -> BTreeMap<ClassLabel, usize> {
        let mut counts = BTreeMap::new();
        for label in &self.labels {
            *counts.entry(label.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn image(&self, col: usize) -> Result<SpectrogramImage> {
        SpectrogramImage::from_column(self.data.column(col).as_slice(), Some(self.labels[col].clone()))
    }
}

/// Stratified random train/test split.
///
/// Each class contributes `round(count * split_frac)` images to the training
/// set (at least one, and at least one left for testing). Columns are
/// grouped by class in label order, shuffled within each class.
pub fn assemble_dataset(
    images: Vec<SpectrogramImage>,
    split_frac: f64,
    seed: u64,
) -> Result<(DatasetMatrix, DatasetMatrix)> {
    if !(split_frac > 0.0 && split_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0, 1), got {split_frac}"
        )));
    }
    if images.is_empty() {
        return Err(Error::EmptyDataset("no images to assemble".into()));
    }
    let mut groups: BTreeMap<ClassLabel, Vec<usize>> = BTreeMap::new();
    for (i, img) in images.iter().enumerate() {
        let label = img
            .label
            .clone()
            .ok_or_else(|| Error::InvalidDataset(format!("image {i} has no label")))?;
        groups.entry(label).or_default().push(i);
    }

    let mut rng = seed::rng(seed, 0);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (label, idx) in groups.iter_mut() {
        let count = idx.len();
        if count < 2 {
            return Err(Error::InvalidDataset(format!(
                "class {label} has {count} image(s); a train/test split needs at least 2"
            )));
        }
        idx.shuffle(&mut rng);
        let n_train = split_count(count, split_frac);
        train_idx.extend(idx[..n_train].iter().map(|&i| (i, label.clone())));
        test_idx.extend(idx[n_train..].iter().map(|&i| (i, label.clone())));
    }

    let mut slots: Vec<Option<SpectrogramImage>> = images.into_iter().map(Some).collect();
    let mut build = |picks: Vec<(usize, ClassLabel)>| -> Result<DatasetMatrix> {
        let mut data = DMatrix::zeros(IMAGE_PIXELS, picks.len());
        let mut labels = Vec::with_capacity(picks.len());
        for (col, (i, label)) in picks.into_iter().enumerate() {
            let img = slots[i].take().expect("each image is used once");
            data.column_mut(col).copy_from_slice(img.as_column());
            labels.push(label);
        }
        DatasetMatrix::new(data, labels, seed)
    };
    let train = build(train_idx)?;
    let test = build(test_idx)?;
    Ok((train, test))
}

/// Training share of a class, kept within `[1, count - 1]`.
pub(crate) fn split_count(count: usize, split_frac: f64) -> usize {
    let n = (count as f64 * split_frac).round() as usize;
    n.clamp(1, count - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(spec: &[(&str, usize)]) -> Vec<SpectrogramImage> {
        let mut out = Vec::new();
        for (c, &(label, count)) in spec.iter().enumerate() {
            for i in 0..count {
                let mut px = DMatrix::zeros(227, 227);
                px[(0, 0)] = c as f64 / 20.0;
                px[(1, 0)] = i as f64 / 1000.0;
                out.push(SpectrogramImage::new(px, Some(label.parse().unwrap())).unwrap());
            }
        }
        out
    }

    #[test]
    fn table_layout_counts() {
        let names = ["B1", "B2", "B3", "B4", "IR1", "IR2", "IR3", "IR4", "OR1", "OR2", "OR3", "OR4"];
        let spec: Vec<(&str, usize)> = names.iter().map(|n| (*n, 150)).collect();
        let (train, test) = assemble_dataset(images(&spec), 0.8, 1).unwrap();
        assert_eq!(train.m(), 1440);
        assert_eq!(test.m(), 360);
        assert!(train.class_counts().values().all(|&c| c == 120));
        assert!(test.class_counts().values().all(|&c| c == 30));
    }

    #[test]
    fn five_image_class_splits_four_one() {
        let (train, test) = assemble_dataset(images(&[("IR1", 5)]), 0.8, 3).unwrap();
        assert_eq!((train.m(), test.m()), (4, 1));
    }

    #[test]
    fn split_is_deterministic_and_seed_dependent() {
        let spec = [("B1", 20), ("OR2", 20)];
        let (a, _) = assemble_dataset(images(&spec), 0.8, 9).unwrap();
        let (b, _) = assemble_dataset(images(&spec), 0.8, 9).unwrap();
        assert_eq!(a, b);
        let (c, _) = assemble_dataset(images(&spec), 0.8, 10).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn columns_carry_their_images() {
        let (train, test) = assemble_dataset(images(&[("B1", 6), ("IR2", 6)]), 0.5, 4).unwrap();
        for ds in [&train, &test] {
            for col in 0..ds.m() {
                let class_marker = ds.data[(0, col)];
                let expected = if ds.labels[col].to_string() == "B1" { 0.0 } else { 0.05 };
                assert_eq!(class_marker, expected);
            }
        }
        // every image used exactly once
        let mut ids: Vec<(u64, u64)> = [&train, &test]
            .iter()
            .flat_map(|d| (0..d.m()).map(move |c| ((d.data[(0, c)] * 20.0).round() as u64, (d.data[(1, c)] * 1000.0).round() as u64)))
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            assemble_dataset(images(&[("B1", 1)]), 0.8, 0),
            Err(Error::InvalidDataset(_))
        ));
        assert!(assemble_dataset(images(&[("B1", 4)]), 1.0, 0).is_err());
        assert!(matches!(assemble_dataset(Vec::new(), 0.8, 0), Err(Error::EmptyDataset(_))));
    }

    #[test]
    fn proportions_within_one_sample() {
        for count in 2..60 {
            for frac in [0.2, 0.5, 0.8, 0.9] {
                let n = split_count(count, frac);
                assert!((n as f64 - count as f64 * frac).abs() <= 1.0, "{count} {frac}");
            }
        }
    }
}
