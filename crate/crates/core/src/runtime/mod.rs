//! Early-exit inference, int8 fake quantization, the uncertainty op graph
//! and memory/cost estimates.

pub mod exit;
pub mod memory;
pub mod opgraph;
pub mod quant;

pub use exit::{
    infer_sample, infer_with_exits, EventOutcome, ExitPolicy, ExitRule, InferenceTrace, SampleTrace, StagedModel,
    TraceSummary,
};
pub use memory::{estimate_memory, CostReport, Precision};
pub use opgraph::{build_uncertainty_opgraph, eval_opgraph, Node, Op, OpGraph};
pub use quant::{
    decision_agreement, quantize_model, quantized_forward, QTensor, QuantParams, QuantizedModel, KIND_CASCADE_INT8,
};
