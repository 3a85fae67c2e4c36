//! Parameter bytes and peak activation memory under a liveness model of the
//! sequential stage graph.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{count_macs, Backbone, BackboneConfig, Depth};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    Int8,
}

impl Precision {
    pub fn bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::Int8 => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub precision: Precision,
    pub depth: Depth,
    /// Weight tensors at the storage width.
    pub weight_bytes: usize,
    /// Biases, always f32.
    pub bias_bytes: usize,
    /// Quantization scale and zero point per quantized tensor.
    pub meta_bytes: usize,
    pub param_bytes: usize,
    pub peak_activation_bytes: usize,
    pub largest_tensor_bytes: usize,
    pub macs: [u64; 3],
}

/// `(weights, biases, weight tensors)` of a cascade with this configuration.
fn param_counts(cfg: &BackboneConfig) -> (usize, usize, usize) {
    let (l, c) = (cfg.channels, cfg.events);
    let cin = cfg.input_shape[0];
    let weights = 9 * cin * l + cfg.ops * (2 * l * l + 9 * l) + 3 * c * 2 * l;
    let biases = l + cfg.ops * 3 * l + 3 * c * 2;
    let tensors = 1 + 3 * cfg.ops + 3 * c;
    (weights, biases, tensors)
}

struct Op {
    inputs: Vec<usize>,
    output: usize,
}

/// Peak of the summed sizes of live tensors over a sequence of ops, where
/// a tensor lives from its producing op through its last consumer.
/// Tensor 0 is the graph input, live from the first op.
fn peak_live(sizes: &[usize], ops: &[Op]) -> usize {
    let n = sizes.len();
    let mut born = vec![0usize; n];
    let mut last = vec![0usize; n];
    for (k, op) in ops.iter().enumerate() {
        born[op.output] = k;
        last[op.output] = last[op.output].max(k);
        for &i in &op.inputs {
            last[i] = last[i].max(k);
        }
    }
    (0..ops.len())
        .map(|k| (0..n).filter(|&t| born[t] <= k && k <= last[t]).map(|t| sizes[t]).sum())
        .max()
        .unwrap_or(sizes.first().copied().unwrap_or(0))
}

/// Cost of running a cascade to `depth` at `precision`.
pub fn estimate_memory(cfg: &BackboneConfig, precision: Precision, depth: Depth) -> Result<CostReport> {
    cfg.validate()?;
    let w = precision.bytes();
    let [cin, h, wd] = cfg.input_shape;
    let hw = h * wd;
    let l = cfg.channels;

    let mut sizes = vec![cin * hw * w];
    let mut ops = Vec::new();
    let mut cur = 0;
    for s in 0..depth.stages() {
        let units = Backbone::<f32>::stage_units(cfg, s);
        for _ in units {
            sizes.push(l * hw * w);
            ops.push(Op { inputs: vec![cur], output: sizes.len() - 1 });
            cur = sizes.len() - 1;
        }
        sizes.push(l * w);
        ops.push(Op { inputs: vec![cur], output: sizes.len() - 1 });
        let pooled = sizes.len() - 1;
        sizes.push(2 * cfg.events * w);
        ops.push(Op { inputs: vec![pooled], output: sizes.len() - 1 });
    }
    // a stage's feature map stays live through its heads until the next stage reads it
    let peak = peak_live(&sizes, &ops);

    let (weights, biases, tensors) = param_counts(cfg);
    let weight_bytes = weights * w;
    let bias_bytes = biases * 4;
    let meta_bytes = match precision {
        Precision::F32 => 0,
        Precision::Int8 => 8 * (tensors + Backbone::<f32>::stage_units(cfg, 2).end + 3),
    };
    Ok(CostReport {
        precision,
        depth,
        weight_bytes,
        bias_bytes,
        meta_bytes,
        param_bytes: weight_bytes + bias_bytes + meta_bytes,
        peak_activation_bytes: peak,
        largest_tensor_bytes: sizes.iter().copied().max().unwrap_or(0),
        macs: [Depth::Shallow, Depth::Medium, Depth::Deep].map(|d| count_macs(cfg, d)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{count_params, CascadeModel};

    fn cfg(events: usize) -> BackboneConfig {
        BackboneConfig::new(16, 3, [1, 10, 24], events).off_grid()
    }

    #[test]
    fn counts_match_model() {
        let c = cfg(3);
        let (w, b, t) = param_counts(&c);
        assert_eq!(w + b, count_params(&c));
        let m = CascadeModel::<f32>::build(&c, 0).unwrap();
        let names = m.params().into_iter().filter(|(n, _)| n.ends_with(".weight")).count();
        assert_eq!(names, t);
    }

    #[test]
    fn single_op_peak_is_input_plus_output() {
        assert_eq!(peak_live(&[10, 7], &[Op { inputs: vec![0], output: 1 }]), 17);
    }

    #[test]
    fn chain_frees_dead_tensors() {
        let ops = [Op { inputs: vec![0], output: 1 }, Op { inputs: vec![1], output: 2 }];
        assert_eq!(peak_live(&[5, 5, 5], &ops), 10);
    }

    #[test]
    fn sharing_and_precision() {
        let one = estimate_memory(&cfg(1), Precision::F32, Depth::Deep).unwrap();
        let three = estimate_memory(&cfg(3), Precision::F32, Depth::Deep).unwrap();
        assert!(three.param_bytes < 3 * one.param_bytes);
        let q = estimate_memory(&cfg(3), Precision::Int8, Depth::Deep).unwrap();
        assert!(q.peak_activation_bytes <= three.peak_activation_bytes);
        assert_eq!(q.weight_bytes * 4, three.weight_bytes);
        assert!(three.peak_activation_bytes >= three.largest_tensor_bytes);
    }
}
