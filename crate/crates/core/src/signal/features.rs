use serde::{Deserialize, Serialize};

use super::dataset::Sample;
use super::mfcc::{FeatureConfig, MfccExtractor};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Model-ready inputs (`[1, n_mfcc, frames]` each) with their label vectors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSet {
    pub inputs: Vec<Tensor<f32>>,
    pub labels: Vec<Vec<u8>>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> FeatureSet {
        FeatureSet {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}

pub fn featurize<'a>(samples: impl IntoIterator<Item = &'a Sample>, config: &FeatureConfig) -> Result<FeatureSet> {
    let ex = MfccExtractor::new(config)?;
    let mut out = FeatureSet::default();
    for s in samples {
        out.inputs.push(ex.extract(&s.signal)?);
        out.labels.push(s.labels.clone());
    }
    Ok(out)
}

/// Per-coefficient standardization fitted on training features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Standardizer {
    /// Mean and standard deviation of every coefficient row over all frames
    /// of all inputs. A constant row gets `std = 1`.
    pub fn fit(set: &FeatureSet) -> Result<Self> {
        let first = set.inputs.first().ok_or_else(|| Error::Data("cannot fit normalization on no samples".into()))?;
        let (_, rows, cols) = first.chw()?;
        let mut sum = vec![0f64; rows];
        let mut sq = vec![0f64; rows];
        for x in &set.inputs {
            if x.shape() != first.shape() {
                return Err(Error::dim("standardizer", format!("{:?} vs {:?}", x.shape(), first.shape())));
            }
            for (r, row) in x.data().chunks(cols).enumerate() {
                let r = r % rows;
                for &v in row {
                    sum[r] += v as f64;
                    sq[r] += (v as f64) * (v as f64);
                }
            }
        }
        let n = (set.len() * cols * (first.len() / (rows * cols))) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 1e-12 {
                    var.sqrt() as f32
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean: mean.into_iter().map(|m| m as f32).collect(), std })
    }

    pub fn apply(&self, x: &mut Tensor<f32>) -> Result<()> {
        let (_, rows, cols) = x.chw()?;
        if rows != self.mean.len() {
            return Err(Error::dim("standardizer", format!("{rows} rows, fitted on {}", self.mean.len())));
        }
        for (r, row) in x.data_mut().chunks_mut(cols).enumerate() {
            let (m, s) = (self.mean[r % rows], self.std[r % rows]);
            row.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        Ok(())
    }
}

/// Signal-to-input pipeline stored alongside a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub features: FeatureConfig,
    pub norm: Option<Standardizer>,
}

impl Preprocess {
    pub fn input_shape(&self, signal_len: usize) -> Result<[usize; 3]> {
        self.features.output_shape(signal_len)
    }

    pub fn prepare<'a>(&self, samples: impl IntoIterator<Item = &'a Sample>) -> Result<FeatureSet> {
        let mut set = featurize(samples, &self.features)?;
        if let Some(norm) = &self.norm {
            for x in &mut set.inputs {
                norm.apply(x)?;
            }
        }
        Ok(set)
    }

    pub fn prepare_signal(&self, extractor: &MfccExtractor, signal: &[f32]) -> Result<Tensor<f32>> {
        let mut x = extractor.extract(signal)?;
        if let Some(norm) = &self.norm {
            norm.apply(&mut x)?;
        }
        Ok(x)
    }
}
