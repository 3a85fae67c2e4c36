//! Closed-form multiply-accumulate and parameter counts.
//!
//! A conv contributes `output elements × kh·kw·C_in/groups`. Each stage's
//! heads add one pass of global pooling (`L·H·W` accumulates, shared by all
//! events) plus `2L` per event for the linear maps.

use super::config::{BackboneConfig, Depth};

fn hw(cfg: &BackboneConfig) -> u64 {
    (cfg.input_shape[1] * cfg.input_shape[2]) as u64
}

pub fn stem_macs(cfg: &BackboneConfig) -> u64 {
    hw(cfg) * cfg.channels as u64 * 9 * cfg.input_shape[0] as u64
}

/// `H·W·L·(2L + 9)`: two pointwise convs and one depthwise 3×3.
pub fn block_macs(cfg: &BackboneConfig) -> u64 {
    let l = cfg.channels as u64;
    hw(cfg) * l * (2 * l + 9)
}

pub fn head_macs(cfg: &BackboneConfig) -> u64 {
    let l = cfg.channels as u64;
    hw(cfg) * l + cfg.events as u64 * 2 * l
}

/// MACs of one stage alone, its heads included.
pub fn stage_macs(cfg: &BackboneConfig, stage: usize) -> u64 {
    let stem = if stage == 0 { stem_macs(cfg) } else { 0 };
    stem + cfg.stage_blocks(stage).len() as u64 * block_macs(cfg) + head_macs(cfg)
}

/// Cumulative MACs to produce every exit up to `depth`.
pub fn count_macs(cfg: &BackboneConfig, depth: Depth) -> u64 {
    (0..depth.stages()).map(|s| stage_macs(cfg, s)).sum()
}

/// MACs of the deep path with a single C-way classifier head.
pub fn softmax_macs(cfg: &BackboneConfig) -> u64 {
    let l = cfg.channels as u64;
    stem_macs(cfg) + cfg.ops as u64 * block_macs(cfg) + hw(cfg) * l + cfg.events as u64 * l
}

pub fn backbone_params(cfg: &BackboneConfig) -> usize {
    let l = cfg.channels;
    let stem = 9 * cfg.input_shape[0] * l + l;
    let block = 2 * (l * l + l) + 9 * l + l;
    stem + cfg.ops * block
}

/// Weights plus biases of the full cascade (3·C heads of `L -> 2`).
pub fn count_params(cfg: &BackboneConfig) -> usize {
    backbone_params(cfg) + 3 * cfg.events * (2 * cfg.channels + 2)
}

pub fn softmax_params(cfg: &BackboneConfig) -> usize {
    backbone_params(cfg) + cfg.events * cfg.channels + cfg.events
}
