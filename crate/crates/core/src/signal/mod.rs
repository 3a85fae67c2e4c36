//! Dataset ingestion, MFCC features, SMOTE, synthetic data and corruption.

pub mod corrupt;
pub mod dataset;
pub mod features;
pub mod mfcc;
pub mod smote;
pub mod synth;

pub use corrupt::{corrupt, rms, Corruption};
pub use dataset::{Dataset, Manifest, Sample, Split, MANIFEST_FILE};
pub use features::{featurize, FeatureSet, Preprocess, Standardizer};
pub use mfcc::{extract_mfcc, fft_magnitude, FeatureConfig, MfccExtractor};
pub use smote::smote_upsample;
pub use synth::{gen_synthetic, SyntheticSpec};
