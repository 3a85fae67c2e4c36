use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cascade::CascadeModel;
use super::config::BackboneConfig;
use super::format::{write_file, Container, Writer};
use super::softmax::SoftmaxNet;
use crate::error::{Error, Result};
use crate::numerics::{NamedParam, Tensor};
use crate::signal::Preprocess;

pub const KIND_CASCADE: &str = "cascade";
pub const KIND_SOFTMAX: &str = "softmax";
pub const KIND_BASELINE: &str = "baseline";

/// Metadata shared by every float model kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config: BackboneConfig,
    pub preprocess: Option<Preprocess>,
}

pub fn write_params<'a>(
    w: &mut Writer,
    prefix: &str,
    params: impl IntoIterator<Item = (String, &'a Tensor<f32>)>,
) -> Result<()> {
    for (name, t) in params {
        w.push_tensor(format!("{prefix}{name}"), t)?;
    }
    Ok(())
}

/// Fills parameters in place; returns the stored names consumed.
pub fn read_params(c: &Container, prefix: &str, params: Vec<NamedParam<'_, f32>>) -> Result<Vec<String>> {
    let mut used = Vec::with_capacity(params.len());
    for (name, t) in params {
        let full = format!("{prefix}{name}");
        let loaded = c.f32(&full, t.shape())?;
        if !loaded.is_finite() {
            return Err(Error::NonFiniteWeights(full));
        }
        t.data_mut().copy_from_slice(loaded.data());
        used.push(full);
    }
    Ok(used)
}

impl CascadeModel<f32> {
    pub fn to_bytes(&self, preprocess: Option<&Preprocess>) -> Result<Vec<u8>> {
        let meta = ModelMeta { config: self.config.clone(), preprocess: preprocess.cloned() };
        let mut w = Writer::new(KIND_CASCADE, &meta)?;
        write_params(&mut w, "", self.params())?;
        w.finish()
    }

    pub fn from_container(c: &Container) -> Result<(Self, Option<Preprocess>)> {
        c.expect_kind(KIND_CASCADE)?;
        let meta: ModelMeta = c.meta()?;
        let mut model = CascadeModel::build(&meta.config, 0)?;
        let used = read_params(c, "", model.params_mut())?;
        c.ensure_names(&used)?;
        Ok((model, meta.preprocess))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, Option<Preprocess>)> {
        Self::from_container(&Container::parse(bytes)?)
    }

    pub fn save(&self, path: &Path, preprocess: Option<&Preprocess>) -> Result<()> {
        write_file(path, &self.to_bytes(preprocess)?)
    }

    pub fn load(path: &Path) -> Result<(Self, Option<Preprocess>)> {
        Self::from_container(&Container::read(path)?)
    }
}

impl SoftmaxNet<f32> {
    pub fn write_into(&self, w: &mut Writer, prefix: &str) -> Result<()> {
        write_params(w, prefix, self.params())
    }

    pub fn read_from(c: &Container, prefix: &str, config: &BackboneConfig) -> Result<(Self, Vec<String>)> {
        let mut net = SoftmaxNet::build(config, 0)?;
        let used = read_params(c, prefix, net.params_mut())?;
        Ok((net, used))
    }

    pub fn to_bytes(&self, preprocess: Option<&Preprocess>) -> Result<Vec<u8>> {
        let meta = ModelMeta { config: self.config.clone(), preprocess: preprocess.cloned() };
        let mut w = Writer::new(KIND_SOFTMAX, &meta)?;
        self.write_into(&mut w, "")?;
        w.finish()
    }

    pub fn from_container(c: &Container) -> Result<(Self, Option<Preprocess>)> {
        c.expect_kind(KIND_SOFTMAX)?;
        let meta: ModelMeta = c.meta()?;
        let (net, used) = Self::read_from(c, "", &meta.config)?;
        c.ensure_names(&used)?;
        Ok((net, meta.preprocess))
    }
}
