//! In-memory multi-event dataset and its on-disk form.
//!
//! On disk a dataset is a directory holding `manifest.json` plus one
//! header-less CSV per split. Each CSV row is
//! `split-relative id, C label bits, signal values…`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}` (train|test)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub signal: Vec<f32>,
    pub labels: Vec<u8>,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub sample_rate: f64,
    pub events: Vec<String>,
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub file: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    pub sample_rate: f64,
    pub events: Vec<String>,
    pub signal_len: usize,
    pub splits: BTreeMap<Split, SplitEntry>,
}

impl Dataset {
    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn signal_len(&self) -> usize {
        self.samples.first().map_or(0, |s| s.signal.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::Data("dataset declares no events".into()));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Data(format!("sample rate {} must be positive", self.sample_rate)));
        }
        let len = self.signal_len();
        for (i, s) in self.samples.iter().enumerate() {
            if s.signal.len() != len {
                return Err(Error::Data(format!("sample {i} has {} values, expected {len}", s.signal.len())));
            }
            if s.labels.len() != self.events.len() {
                return Err(Error::Data(format!(
                    "sample {i} has {} labels, expected {}",
                    s.labels.len(),
                    self.events.len()
                )));
            }
            if let Some(c) = s.labels.iter().position(|&v| v > 1) {
                return Err(Error::InvalidLabel { sample: i, event: c, value: s.labels[c] as f64 });
            }
            if s.signal.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("sample {i} contains non-finite values")));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// A copy holding only one split's samples.
    pub fn subset(&self, split: Split) -> Dataset {
        Dataset { samples: self.split(split).cloned().collect(), ..self.header_clone() }
    }

    pub fn header_clone(&self) -> Dataset {
        Dataset {
            name: self.name.clone(),
            sample_rate: self.sample_rate,
            events: self.events.clone(),
            samples: Vec::new(),
        }
    }

    pub fn positives(&self, event: usize, split: Split) -> usize {
        self.split(split).filter(|s| s.labels[event] == 1).count()
    }

    /// Stratification key of a label vector (its bit pattern).
    pub fn label_key(labels: &[u8]) -> u64 {
        labels.iter().fold(0u64, |k, &b| (k << 1) | b as u64)
    }

    /// Index sets `(kept, held_out)` drawing `fraction` of every label pattern
    /// into the held-out part; deterministic under `seed`.
    pub fn stratified_indices(labels: &[&[u8]], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            groups.entry(Self::label_key(l)).or_default().push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut kept, mut held) = (Vec::new(), Vec::new());
        for (_, mut idx) in groups {
            idx.shuffle(&mut rng);
            let n_held = ((idx.len() as f64) * fraction).round() as usize;
            held.extend_from_slice(&idx[..n_held]);
            kept.extend_from_slice(&idx[n_held..]);
        }
        kept.sort_unstable();
        held.sort_unstable();
        (kept, held)
    }

    /// Re-tags all samples: a stratified `test_fraction` becomes the test split.
    pub fn assign_test_split(&mut self, test_fraction: f64, seed: u64) -> Result<()> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Config(format!("test fraction {test_fraction} outside [0, 1)")));
        }
        let labels: Vec<&[u8]> = self.samples.iter().map(|s| s.labels.as_slice()).collect();
        let (_, test) = Self::stratified_indices(&labels, test_fraction, seed);
        self.samples.iter_mut().for_each(|s| s.split = Split::Train);
        for i in test {
            self.samples[i].split = Split::Test;
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut splits = BTreeMap::new();
        for split in [Split::Train, Split::Test] {
            let file = format!("{}.csv", split.name());
            let path = dir.join(&file);
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
            let mut count = 0;
            for (id, s) in self.split(split).enumerate() {
                let mut row = Vec::with_capacity(1 + s.labels.len() + s.signal.len());
                row.push(id.to_string());
                row.extend(s.labels.iter().map(u8::to_string));
                row.extend(s.signal.iter().map(f32::to_string));
                w.write_record(&row)?;
                count += 1;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            splits.insert(split, SplitEntry { file, count });
        }
        let manifest = Manifest {
            format_version: DATASET_FORMAT_VERSION,
            name: self.name.clone(),
            sample_rate: self.sample_rate,
            events: self.events.clone(),
            signal_len: self.signal_len(),
            splits,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Dataset> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if manifest.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::Data(format!("unsupported dataset format version {}", manifest.format_version)));
        }
        let c = manifest.events.len();
        let mut samples = Vec::new();
        for (&split, entry) in &manifest.splits {
            let path = dir.join(&entry.file);
            let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(&path)?;
            let mut count = 0;
            for (row_no, rec) in r.records().enumerate() {
                let rec = rec?;
                let bad = |what: &str| Error::Data(format!("{}:{}: {what}", path.display(), row_no + 1));
                if rec.len() != 1 + c + manifest.signal_len {
                    return Err(bad(&format!("{} fields, expected {}", rec.len(), 1 + c + manifest.signal_len)));
                }
                let labels = rec
                    .iter()
                    .skip(1)
                    .take(c)
                    .map(|f| match f.trim() {
                        "0" => Ok(0),
                        "1" => Ok(1),
                        other => Err(bad(&format!("label `{other}` is not 0/1"))),
                    })
                    .collect::<Result<Vec<u8>>>()?;
                let signal = rec
                    .iter()
                    .skip(1 + c)
                    .map(|f| f.trim().parse::<f32>().map_err(|_| bad(&format!("bad value `{f}`"))))
                    .collect::<Result<Vec<f32>>>()?;
                samples.push(Sample { signal, labels, split });
                count += 1;
            }
            if count != entry.count {
                return Err(Error::Data(format!(
                    "{} holds {count} rows, manifest says {}",
                    path.display(),
                    entry.count
                )));
            }
        }
        let ds = Dataset { name: manifest.name, sample_rate: manifest.sample_rate, events: manifest.events, samples };
        ds.validate()?;
        Ok(ds)
    }
}
