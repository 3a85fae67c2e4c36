//! Dense layer set: relu, linear, global average pooling and softmax, plus
//! parameterized `Conv2d` / `Linear` modules holding gradient buffers.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::conv::{conv2d, conv2d_backward, Padding};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Gradient of relu given its *output* (`out > 0` marks the active set).
pub fn relu_backward<T: Real>(out: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data =
        out.data().iter().zip(grad_out.data()).map(|(&o, &g)| if o > T::zero() { g } else { T::zero() }).collect();
    Tensor::from_vec(out.shape(), data).expect("same shape")
}

/// `y = W x + b` with `W: [out, in]`.
pub fn linear<T: Real>(x: &[T], weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Vec<T>> {
    let (o, i) = match *weight.shape() {
        [o, i] => (o, i),
        _ => return Err(Error::dim("linear", format!("weight must be [out,in], got {:?}", weight.shape()))),
    };
    if x.len() != i || bias.shape() != [o] {
        return Err(Error::dim(
            "linear",
            format!("input len {} / bias {:?} vs weight [{o},{i}]", x.len(), bias.shape()),
        ));
    }
    let w = weight.data();
    Ok((0..o).map(|r| w[r * i..(r + 1) * i].iter().zip(x).fold(bias.data()[r], |acc, (&a, &b)| acc + a * b)).collect())
}

/// Returns `(dx, dW, db)`.
pub fn linear_backward<T: Real>(x: &[T], weight: &Tensor<T>, grad_out: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let i = x.len();
    let o = grad_out.len();
    let w = weight.data();
    let mut dx = vec![T::zero(); i];
    let mut dw = vec![T::zero(); o * i];
    for r in 0..o {
        let g = grad_out[r];
        for c in 0..i {
            dw[r * i + c] = g * x[c];
            dx[c] += g * w[r * i + c];
        }
    }
    (dx, dw, grad_out.to_vec())
}

/// Adaptive average pooling to 1×1: `[C, H, W] -> [C]`.
pub fn global_avg_pool<T: Real>(x: &Tensor<T>) -> Result<Vec<T>> {
    let (c, h, w) = x.chw()?;
    if h * w == 0 {
        return Err(Error::dim("global_avg_pool", "empty spatial extent"));
    }
    let n = T::of((h * w) as f64);
    Ok(x.data().chunks(h * w).take(c).map(|plane| plane.iter().fold(T::zero(), |a, &b| a + b) / n).collect())
}

pub fn global_avg_pool_backward<T: Real>(shape: &[usize], grad_out: &[T]) -> Tensor<T> {
    let plane: usize = shape[1..].iter().product();
    let n = T::of(plane as f64);
    let mut data = Vec::with_capacity(shape.iter().product());
    for &g in grad_out {
        data.extend(std::iter::repeat(g / n).take(plane));
    }
    Tensor::from_vec(shape, data).expect("pool backward shape")
}

pub fn softmax<T: Real>(z: &[T]) -> Vec<T> {
    let m = z.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let e: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s = e.iter().fold(T::zero(), |a, &b| a + b);
    e.into_iter().map(|v| v / s).collect()
}

/// Vector-Jacobian product of softmax: `dz_i = p_i (g_i - Σ_j p_j g_j)`.
pub fn softmax_backward<T: Real>(p: &[T], grad_out: &[T]) -> Vec<T> {
    let dot = p.iter().zip(grad_out).fold(T::zero(), |a, (&pi, &gi)| a + pi * gi);
    p.iter().zip(grad_out).map(|(&pi, &gi)| pi * (gi - dot)).collect()
}

/// Kaiming-uniform (fan-in) weights: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
fn kaiming_uniform<T: Real, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(dist.sample(rng))).collect();
    Tensor::from_vec(shape, data).expect("init shape")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub groups: usize,
    pub padding: Padding,
}

impl<T: Real> Conv2d<T> {
    pub fn new<R: Rng + ?Sized>(c_in: usize, c_out: usize, kernel: usize, groups: usize, rng: &mut R) -> Self {
        let fan_in = c_in / groups * kernel * kernel;
        Self {
            weight: kaiming_uniform(&[c_out, c_in / groups, kernel, kernel], fan_in, rng).with_grad(),
            bias: Tensor::zeros(&[c_out]).with_grad(),
            groups,
            padding: Padding::Same,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(x, &self.weight, Some(&self.bias), self.groups, self.padding)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = conv2d_backward(x, &self.weight, grad_out, self.groups, self.padding)?;
        accumulate(&mut self.weight, g.weight.data());
        accumulate(&mut self.bias, g.bias.data());
        Ok(g.input)
    }

    pub fn kernel(&self) -> (usize, usize) {
        let s = self.weight.shape();
        (s[2], s[3])
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1] * self.groups
    }

    pub fn cast<U: Real>(&self) -> Conv2d<U> {
        Conv2d { weight: self.weight.cast(), bias: self.bias.cast(), groups: self.groups, padding: self.padding }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Linear<T> {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weight: kaiming_uniform(&[outputs, inputs], inputs, rng).with_grad(),
            bias: Tensor::zeros(&[outputs]).with_grad(),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        linear(x, &self.weight, &self.bias)
    }

    pub fn backward(&mut self, x: &[T], grad_out: &[T]) -> Vec<T> {
        let (dx, dw, db) = linear_backward(x, &self.weight, grad_out);
        accumulate(&mut self.weight, &dw);
        accumulate(&mut self.bias, &db);
        dx
    }

    pub fn cast<U: Real>(&self) -> Linear<U> {
        Linear { weight: self.weight.cast(), bias: self.bias.cast() }
    }
}

fn accumulate<T: Real>(t: &mut Tensor<T>, delta: &[T]) {
    if let Some(g) = t.grad_mut() {
        for (a, &d) in g.iter_mut().zip(delta) {
            *a += d;
        }
    }
}
