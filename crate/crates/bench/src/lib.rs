//! Shared fixtures for the benchmarks.

use cascade_edl::model::{build_model, BackboneConfig, CascadeModel};
use cascade_edl::signal::{
    featurize, gen_synthetic, Dataset, FeatureConfig, FeatureSet, Preprocess, Standardizer, SyntheticSpec,
};

pub struct Fixture {
    pub data: Dataset,
    pub features: FeatureSet,
    pub preprocess: Preprocess,
    pub model: CascadeModel<f32>,
}

/// Untrained cascade plus 32 standardized synthetic samples per event.
pub fn fixture(channels: usize, ops: usize) -> Fixture {
    let data = gen_synthetic(&SyntheticSpec { n_per_event: 32, ..Default::default() }).expect("synthetic data");
    let fc = FeatureConfig::for_rate(data.sample_rate);
    let norm = Standardizer::fit(&featurize(&data.samples, &fc).expect("features")).expect("standardizer");
    let preprocess = Preprocess { features: fc, norm: Some(norm) };
    let features = preprocess.prepare(&data.samples).expect("features");
    let shape = preprocess.input_shape(data.signal_len()).expect("shape");
    let cfg = BackboneConfig::new(channels, ops, shape, data.num_events()).off_grid();
    let model = build_model(&cfg, 0).expect("model");
    Fixture { data, features, preprocess, model }
}
