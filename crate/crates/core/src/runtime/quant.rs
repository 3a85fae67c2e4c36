//! Post-training int8 quantization simulated in float ("fake quant").
//!
//! Weights are per-tensor symmetric (`zero_point = 0`, `scale = max|w| / 127`).
//! Activations entering every conv unit and every stage's heads get a
//! per-tensor affine range from calibration min/max. Biases stay f32.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::format::write_file;
use crate::model::{
    evidence_of, Backbone, BackboneConfig, CascadeModel, Container, Depth, StageOutput, TensorData, Writer,
};
use crate::numerics::{global_avg_pool, Tensor};
use crate::signal::Preprocess;

pub const KIND_CASCADE_INT8: &str = "cascade_int8";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantParams {
    pub scale: f32,
    pub zero_point: i32,
}

impl QuantParams {
    /// `q = clamp(round(x / scale) + zero_point, -128, 127)`, rounding half
    /// away from zero.
    pub fn quantize(&self, x: f32) -> i8 {
        ((x / self.scale).round() as i64 + self.zero_point as i64).clamp(-128, 127) as i8
    }

    pub fn dequantize(&self, q: i8) -> f32 {
        (q as i32 - self.zero_point) as f32 * self.scale
    }

    pub fn fake(&self, x: f32) -> f32 {
        self.dequantize(self.quantize(x))
    }

    /// Symmetric range for weights; an all-zero tensor gets scale 1.
    pub fn symmetric(values: &[f32]) -> Self {
        let m = values.iter().fold(0.0f32, |a, v| a.max(v.abs()));
        Self { scale: if m > 0.0 { m / 127.0 } else { 1.0 }, zero_point: 0 }
    }

    /// Affine range covering `[min, max] ∪ {0}`.
    pub fn affine(min: f32, max: f32) -> Self {
        let (lo, hi) = (min.min(0.0), max.max(0.0));
        let scale = if hi > lo { (hi - lo) / 255.0 } else { 1.0 };
        let zero_point = ((-128.0 - lo / scale).round() as i32).clamp(-128, 127);
        Self { scale, zero_point }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub q: Vec<i8>,
    pub params: QuantParams,
}

impl QTensor {
    pub fn quantize(name: &str, t: &Tensor<f32>) -> Self {
        let params = QuantParams::symmetric(t.data());
        Self {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            q: t.data().iter().map(|&w| params.quantize(w)).collect(),
            params,
        }
    }

    pub fn dequantize(&self) -> Tensor<f32> {
        let data = self.q.iter().map(|&q| self.params.dequantize(q)).collect();
        Tensor::from_vec(&self.shape, data).expect("shape matches length")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedModel {
    pub config: BackboneConfig,
    /// Every weight tensor, in serialization order.
    pub weights: Vec<QTensor>,
    pub biases: Vec<(String, Tensor<f32>)>,
    /// Range of the input to each conv unit.
    pub unit_act: Vec<QuantParams>,
    /// Range of each stage's pooled features.
    pub head_act: Vec<QuantParams>,
    /// Float model carrying the dequantized weights.
    dequant: CascadeModel<f32>,
}

#[derive(Serialize, Deserialize)]
struct QuantMeta {
    config: BackboneConfig,
    preprocess: Option<Preprocess>,
    weight_params: Vec<QuantParams>,
    unit_act: Vec<QuantParams>,
    head_act: Vec<QuantParams>,
}

fn is_weight(name: &str) -> bool {
    name.ends_with(".weight")
}

struct Range1 {
    lo: f32,
    hi: f32,
}

impl Range1 {
    fn new() -> Self {
        Self { lo: f32::INFINITY, hi: f32::NEG_INFINITY }
    }

    fn add(&mut self, xs: &[f32]) {
        for &x in xs {
            self.lo = self.lo.min(x);
            self.hi = self.hi.max(x);
        }
    }
}

/// Quantizes `model` with activation ranges observed on `calibration`.
pub fn quantize_model(model: &CascadeModel<f32>, calibration: &[Tensor<f32>]) -> Result<QuantizedModel> {
    if calibration.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    if !model.is_finite() {
        return Err(Error::NonFiniteWeights("model".into()));
    }
    let cfg = &model.config;
    let mut units: Vec<Range1> = (0..model.backbone.num_units()).map(|_| Range1::new()).collect();
    let mut heads: Vec<Range1> = (0..3).map(|_| Range1::new()).collect();
    for x in calibration {
        model.check_input(x)?;
        let mut h = x.clone();
        for s in 0..3 {
            let cache = model.backbone.forward_units(Backbone::<f32>::stage_units(cfg, s), &h)?;
            for (k, u) in cache.units.clone().enumerate() {
                units[u].add(cache.acts[k].data());
            }
            h = cache.into_output();
            heads[s].add(&global_avg_pool(&h)?);
        }
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (name, t) in model.params() {
        if is_weight(&name) {
            weights.push(QTensor::quantize(&name, t));
        } else {
            biases.push((name, Tensor::from_vec(t.shape(), t.data().to_vec())?));
        }
    }
    let unit_act = units.iter().map(|r| QuantParams::affine(r.lo, r.hi)).collect();
    let head_act = heads.iter().map(|r| QuantParams::affine(r.lo, r.hi)).collect();
    QuantizedModel::assemble(cfg.clone(), weights, biases, unit_act, head_act)
}

impl QuantizedModel {
    fn assemble(
        config: BackboneConfig,
        weights: Vec<QTensor>,
        biases: Vec<(String, Tensor<f32>)>,
        unit_act: Vec<QuantParams>,
        head_act: Vec<QuantParams>,
    ) -> Result<Self> {
        let mut dequant = CascadeModel::build(&config, 0)?;
        let (mut wi, mut bi) = (weights.iter(), biases.iter());
        for (name, p) in dequant.params_mut() {
            let src = if is_weight(&name) {
                wi.next().filter(|q| q.name == name).map(QTensor::dequantize)
            } else {
                bi.next().filter(|(n, _)| *n == name).map(|(_, t)| t.clone())
            };
            let src = src.ok_or_else(|| Error::TensorInconsistent {
                name: name.clone(),
                detail: "missing or out of order".into(),
            })?;
            if src.shape() != p.shape() {
                return Err(Error::TensorInconsistent {
                    name,
                    detail: format!("shape {:?} vs {:?}", src.shape(), p.shape()),
                });
            }
            p.data_mut().copy_from_slice(src.data());
        }
        if unit_act.len() != dequant.backbone.num_units() || head_act.len() != 3 {
            return Err(Error::Header("activation ranges do not match the model".into()));
        }
        Ok(Self { config, weights, biases, unit_act, head_act, dequant })
    }

    /// The float model holding dequantized weights.
    pub fn dequantized(&self) -> &CascadeModel<f32> {
        &self.dequant
    }

    /// One stage with fake quantization on every conv input and on the
    /// pooled features feeding the heads.
    pub fn stage_forward(&self, stage: usize, x: &Tensor<f32>) -> Result<StageOutput<f32>> {
        let mut h = x.clone();
        for u in Backbone::<f32>::stage_units(&self.config, stage) {
            let p = self.unit_act[u];
            h = h.map(|v| p.fake(v));
            h = self.dequant.backbone.run_units(u..u + 1, &h)?;
        }
        let p = self.head_act[stage];
        let pooled: Vec<f32> = global_avg_pool(&h)?.into_iter().map(|v| p.fake(v)).collect();
        let logits = self.dequant.heads[stage]
            .iter()
            .map(|head| head.forward(&pooled).map(|z| [z[0], z[1]]))
            .collect::<Result<Vec<_>>>()?;
        Ok(StageOutput { stage, evidence: evidence_of(&logits), logits, features: h })
    }

    pub fn to_bytes(&self, preprocess: Option<&Preprocess>) -> Result<Vec<u8>> {
        let meta = QuantMeta {
            config: self.config.clone(),
            preprocess: preprocess.cloned(),
            weight_params: self.weights.iter().map(|w| w.params).collect(),
            unit_act: self.unit_act.clone(),
            head_act: self.head_act.clone(),
        };
        let mut w = Writer::new(KIND_CASCADE_INT8, &meta)?;
        // tensors are written in float-model order so offsets match `params()`
        let (mut wi, mut bi) = (self.weights.iter(), self.biases.iter());
        for (name, _) in self.dequant.params() {
            if is_weight(&name) {
                let q = wi.next().expect("weight present");
                w.push(name, &q.shape, TensorData::I8(q.q.clone()))?;
            } else {
                let (_, t) = bi.next().expect("bias present");
                w.push_tensor(name, t)?;
            }
        }
        w.finish()
    }

    pub fn from_container(c: &Container) -> Result<(Self, Option<Preprocess>)> {
        c.expect_kind(KIND_CASCADE_INT8)?;
        let meta: QuantMeta = c.meta()?;
        let template = CascadeModel::<f32>::build(&meta.config, 0)?;
        let mut wp = meta.weight_params.iter();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let mut used = Vec::new();
        for (name, t) in template.params() {
            if is_weight(&name) {
                let params =
                    *wp.next().ok_or_else(|| Error::Header(format!("no quantization parameters for `{name}`")))?;
                if !(params.scale > 0.0 && params.scale.is_finite()) {
                    return Err(Error::NonFiniteWeights(name));
                }
                let q = c.i8(&name, t.shape())?;
                weights.push(QTensor { name: name.clone(), shape: t.shape().to_vec(), q, params });
            } else {
                let b = c.f32(&name, t.shape())?;
                if !b.is_finite() {
                    return Err(Error::NonFiniteWeights(name));
                }
                biases.push((name.clone(), b));
            }
            used.push(name);
        }
        c.ensure_names(&used)?;
        let model = Self::assemble(meta.config, weights, biases, meta.unit_act, meta.head_act)?;
        Ok((model, meta.preprocess))
    }

    pub fn save(&self, path: &Path, preprocess: Option<&Preprocess>) -> Result<()> {
        write_file(path, &self.to_bytes(preprocess)?)
    }

    pub fn load(path: &Path) -> Result<(Self, Option<Preprocess>)> {
        Self::from_container(&Container::read(path)?)
    }

    pub fn weight_count(&self) -> usize {
        self.weights.iter().map(|w| w.q.len()).sum()
    }

    pub fn bias_count(&self) -> usize {
        self.biases.iter().map(|(_, b)| b.len()).sum()
    }
}

/// Quantized stage outputs up to `depth`.
pub fn quantized_forward(model: &QuantizedModel, x: &Tensor<f32>, depth: Depth) -> Result<Vec<StageOutput<f32>>> {
    model.dequant.check_input(x)?;
    let mut outs: Vec<StageOutput<f32>> = Vec::with_capacity(depth.stages());
    for s in 0..depth.stages() {
        let input = outs.last().map_or(x, |o| &o.features);
        let out = model.stage_forward(s, input)?;
        outs.push(out);
    }
    Ok(outs)
}

/// Fraction of `(sample, event)` decisions on which float and quantized
/// deep exits agree.
pub fn decision_agreement(float: &CascadeModel<f32>, quant: &QuantizedModel, inputs: &[Tensor<f32>]) -> Result<f64> {
    let mut same = 0usize;
    let mut total = 0usize;
    for x in inputs {
        let a = float.forward(x, Depth::Deep)?.pop().expect("deep output");
        let b = quantized_forward(quant, x, Depth::Deep)?.pop().expect("deep output");
        for (ea, eb) in a.evidence.iter().zip(&b.evidence) {
            same += (ea.is_positive() == eb.is_positive()) as usize;
            total += 1;
        }
    }
    Ok(if total == 0 { 1.0 } else { same as f64 / total as f64 })
}
