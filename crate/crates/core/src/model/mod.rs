//! Cascade backbone with per-stage evidence heads, its softmax baseline
//! sibling, cost counting and the `.ucm` file format.

pub mod backbone;
pub mod cascade;
pub mod config;
pub mod cost;
pub mod format;
pub mod io;
pub mod softmax;

pub use backbone::{Backbone, Block, UnitCache};
pub use cascade::{build_model, evidence_of, CascadeModel, StageOutput, StageTape};
pub use config::{BackboneConfig, Depth, CHANNEL_GRID, OPS_GRID};
pub use cost::{count_macs, count_params, softmax_macs, softmax_params, stage_macs};
pub use format::{Container, DType, TensorData, Writer, FORMAT_VERSION};
pub use io::{ModelMeta, KIND_BASELINE, KIND_CASCADE, KIND_SOFTMAX};
pub use softmax::{SoftmaxNet, SoftmaxTape};
