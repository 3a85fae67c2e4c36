//! Stem plus depthwise blocks, viewed as a flat list of conv units.
//!
//! Unit 0 is the stem; block `b` occupies units `1 + 3b .. 4 + 3b`
//! (expand 1×1, depthwise 3×3, project 1×1). Every unit is followed by relu.

use std::ops::Range;

use rand::Rng;

use super::config::BackboneConfig;
use crate::error::{Error, Result};
use crate::numerics::{relu, relu_backward, Conv2d, NamedParam, Real, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Block<T = f32> {
    pub expand: Conv2d<T>,
    pub depthwise: Conv2d<T>,
    pub project: Conv2d<T>,
}

impl<T: Real> Block<T> {
    pub fn new<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Self {
        Self {
            expand: Conv2d::new(width, width, 1, 1, rng),
            depthwise: Conv2d::new(width, width, 3, width, rng),
            project: Conv2d::new(width, width, 1, 1, rng),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let h = relu(&self.expand.forward(x)?);
        let h = relu(&self.depthwise.forward(&h)?);
        Ok(relu(&self.project.forward(&h)?))
    }

    fn cast<U: Real>(&self) -> Block<U> {
        Block { expand: self.expand.cast(), depthwise: self.depthwise.cast(), project: self.project.cast() }
    }
}

/// Activations recorded by [`Backbone::forward_units`]: `acts[0]` is the
/// input, `acts[k + 1]` the relu output of the k-th unit in the range.
#[derive(Clone, Debug)]
pub struct UnitCache<T = f32> {
    pub units: Range<usize>,
    pub acts: Vec<Tensor<T>>,
}

impl<T: Real> UnitCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        self.acts.last().expect("cache holds the input at least")
    }

    pub fn into_output(mut self) -> Tensor<T> {
        self.acts.pop().expect("cache holds the input at least")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Backbone<T = f32> {
    pub stem: Conv2d<T>,
    pub blocks: Vec<Block<T>>,
}

impl<T: Real> Backbone<T> {
    pub fn new<R: Rng + ?Sized>(cfg: &BackboneConfig, rng: &mut R) -> Self {
        let stem = Conv2d::new(cfg.input_shape[0], cfg.channels, 3, 1, rng);
        let blocks = (0..cfg.ops).map(|_| Block::new(cfg.channels, rng)).collect();
        Self { stem, blocks }
    }

    pub fn num_units(&self) -> usize {
        1 + 3 * self.blocks.len()
    }

    pub fn unit(&self, i: usize) -> &Conv2d<T> {
        match i {
            0 => &self.stem,
            _ => {
                let b = &self.blocks[(i - 1) / 3];
                [&b.expand, &b.depthwise, &b.project][(i - 1) % 3]
            }
        }
    }

    pub fn unit_mut(&mut self, i: usize) -> &mut Conv2d<T> {
        match i {
            0 => &mut self.stem,
            _ => {
                let b = &mut self.blocks[(i - 1) / 3];
                match (i - 1) % 3 {
                    0 => &mut b.expand,
                    1 => &mut b.depthwise,
                    _ => &mut b.project,
                }
            }
        }
    }

    pub fn unit_name(i: usize) -> String {
        match i {
            0 => "stem".into(),
            _ => format!("blocks.{}.{}", (i - 1) / 3, ["expand", "depthwise", "project"][(i - 1) % 3]),
        }
    }

    /// Units computed by a cascade stage. Stage 0 always includes the stem.
    pub fn stage_units(cfg: &BackboneConfig, stage: usize) -> Range<usize> {
        let blocks = cfg.stage_blocks(stage);
        let start = if stage == 0 { 0 } else { 1 + 3 * blocks.start };
        start..1 + 3 * blocks.end
    }

    pub fn forward_units(&self, units: Range<usize>, x: &Tensor<T>) -> Result<UnitCache<T>> {
        let mut acts = Vec::with_capacity(units.len() + 1);
        acts.push(x.clone());
        for i in units.clone() {
            let y = relu(&self.unit(i).forward(acts.last().expect("nonempty"))?);
            acts.push(y);
        }
        Ok(UnitCache { units, acts })
    }

    /// Output of a unit range without keeping intermediate activations.
    pub fn run_units(&self, units: Range<usize>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for i in units {
            h = relu(&self.unit(i).forward(&h)?);
        }
        Ok(h)
    }

    /// Back-propagates through the cached range, accumulating parameter
    /// gradients; returns the gradient with respect to the range input.
    pub fn backward_units(&mut self, cache: &UnitCache<T>, grad_out: Tensor<T>) -> Result<Tensor<T>> {
        if grad_out.shape() != cache.output().shape() {
            return Err(Error::dim(
                "backbone backward",
                format!("gradient {:?} vs output {:?}", grad_out.shape(), cache.output().shape()),
            ));
        }
        let mut g = grad_out;
        for (k, i) in cache.units.clone().enumerate().rev() {
            g = relu_backward(&cache.acts[k + 1], &g);
            g = self.unit_mut(i).backward(&cache.acts[k], &g)?;
        }
        Ok(g)
    }

    pub fn params(&self, units: Range<usize>) -> Vec<(String, &Tensor<T>)> {
        units
            .flat_map(|i| {
                let u = self.unit(i);
                let name = Self::unit_name(i);
                [(format!("{name}.weight"), &u.weight), (format!("{name}.bias"), &u.bias)]
            })
            .collect()
    }

    /// Mutable parameters of a block-aligned unit range, named as in [`params`](Self::params).
    pub fn params_mut(&mut self, units: Range<usize>) -> Vec<NamedParam<'_, T>> {
        let mut out = Vec::new();
        if units.contains(&0) {
            out.push(("stem.weight".to_string(), &mut self.stem.weight));
            out.push(("stem.bias".to_string(), &mut self.stem.bias));
        }
        let first = units.start.max(1);
        debug_assert!((first - 1) % 3 == 0 && (units.end - 1) % 3 == 0, "block-aligned range");
        let blocks = (first - 1) / 3..(units.end.max(1) - 1) / 3;
        for (b, blk) in self.blocks.iter_mut().enumerate().filter(|(b, _)| blocks.contains(b)) {
            for (part, conv) in
                [("expand", &mut blk.expand), ("depthwise", &mut blk.depthwise), ("project", &mut blk.project)]
            {
                out.push((format!("blocks.{b}.{part}.weight"), &mut conv.weight));
                out.push((format!("blocks.{b}.{part}.bias"), &mut conv.bias));
            }
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for i in 0..self.num_units() {
            let u = self.unit_mut(i);
            u.weight.zero_grad();
            u.bias.zero_grad();
        }
    }

    pub fn cast<U: Real>(&self) -> Backbone<U> {
        Backbone { stem: self.stem.cast(), blocks: self.blocks.iter().map(Block::cast).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(ops: usize) -> BackboneConfig {
        BackboneConfig::new(8, ops, [2, 5, 6], 2).off_grid()
    }

    #[test]
    fn stage_units_cover_all_units_once() {
        for ops in 1..=7 {
            let c = cfg(ops);
            let mut next = 0;
            for s in 0..3 {
                let r = Backbone::<f32>::stage_units(&c, s);
                assert_eq!(r.start, next);
                next = r.end;
            }
            assert_eq!(next, 1 + 3 * ops);
        }
    }

    #[test]
    fn block_equals_sequential_convs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bb = Backbone::<f64>::new(&cfg(2), &mut rng);
        let x = Tensor::from_vec(&[8, 5, 6], (0..240).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect()).unwrap();
        let via_block = bb.blocks[1].forward(&x).unwrap();
        let via_units = bb.run_units(4..7, &x).unwrap();
        assert_eq!(via_block, via_units);
    }

    #[test]
    fn params_mut_names_match_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut bb = Backbone::<f32>::new(&cfg(4), &mut rng);
        for range in [0..4, 4..10, 10..13, 0..13] {
            let names: Vec<String> = bb.params(range.clone()).into_iter().map(|(n, _)| n).collect();
            let names_mut: Vec<String> = bb.params_mut(range).into_iter().map(|(n, _)| n).collect();
            assert_eq!(names, names_mut);
        }
    }

    #[test]
    fn spatial_dims_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = cfg(3);
        let bb = Backbone::<f32>::new(&c, &mut rng);
        let x = Tensor::full(&[2, 5, 6], 0.5f32);
        let y = bb.run_units(0..bb.num_units(), &x).unwrap();
        assert_eq!(y.shape(), &[8, 5, 6]);
    }
}
