use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::io::{decode_tensor, encode_tensor, parse_json, TensorRecord, FORMAT_VERSION};
use crate::netgraph::TaskSignature;
use crate::tensorcore::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Labelled samples with disjoint train/validation/test index lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub seed: u64,
    pub num_classes: usize,
    /// `[N, ...]`
    pub samples: Tensor,
    pub labels: Vec<usize>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn task(&self) -> TaskSignature {
        TaskSignature {
            input_shape: self.samples.shape()[1..].to_vec(),
            num_classes: self.num_classes,
        }
    }

    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// The first `limit` samples of a split (all of them when `limit` is `None`
    /// or exceeds the split size) with their labels.
    pub fn split_data(&self, split: Split, limit: Option<usize>) -> (Tensor, Vec<usize>) {
        let idx = self.indices(split);
        let idx = &idx[..limit.map_or(idx.len(), |l| l.min(idx.len()))];
        let x = self.samples.select(idx).expect("split indices are in range");
        (x, idx.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.samples.batch() != n {
            return Err(Error::Invalid(format!("{} samples but {} labels", self.samples.batch(), n)));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::Invalid(format!("label {bad} outside [0, {})", self.num_classes)));
        }
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.validation).chain(&self.test) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invalid(format!("split index {i} out of range or repeated")));
            }
        }
        Ok(())
    }
}

/// Shuffled 60/20/20 split of `0..n`.
pub(crate) fn standard_split<R: rand::Rng>(n: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let n_train = n * 3 / 5;
    let n_val = n / 5;
    let test = perm.split_off(n_train + n_val);
    let validation = perm.split_off(n_train);
    (perm, validation, test)
}

#[derive(Serialize, Deserialize)]
struct DatasetDocument {
    format_version: u32,
    name: String,
    seed: u64,
    num_classes: usize,
    samples: TensorRecord,
    labels: Vec<usize>,
    train: Vec<usize>,
    validation: Vec<usize>,
    test: Vec<usize>,
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let doc = DatasetDocument {
        format_version: FORMAT_VERSION,
        name: ds.name.clone(),
        seed: ds.seed,
        num_classes: ds.num_classes,
        samples: encode_tensor(&ds.samples),
        labels: ds.labels.clone(),
        train: ds.train.clone(),
        validation: ds.validation.clone(),
        test: ds.test.clone(),
    };
    std::fs::write(path, serde_json::to_string(&doc)? + "\n")?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let doc: DatasetDocument = parse_json(&std::fs::read_to_string(path)?)?;
    let ds = Dataset {
        name: doc.name,
        seed: doc.seed,
        num_classes: doc.num_classes,
        samples: decode_tensor(&doc.samples, "dataset samples")?,
        labels: doc.labels,
        train: doc.train,
        validation: doc.validation,
        test: doc.test,
    };
    ds.validate()?;
    Ok(ds)
}
