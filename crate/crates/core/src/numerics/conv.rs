//! Direct (loop) 2-D convolution over a single `[C, H, W]` sample.
//!
//! * `weight`: `[C_out, C_in / groups, kh, kw]`
//! * `bias`:   `[C_out]`
//!
//! `groups == C_in == C_out` gives a depthwise convolution; a 1×1 kernel with
//! `groups == 1` gives a pointwise convolution.

use serde::{Deserialize, Serialize};

use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Symmetric zero padding of `(k - 1) / 2`; spatial dims are preserved.
    Same,
    Valid,
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    c_out: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
    in_per_group: usize,
    out_per_group: usize,
}

fn geometry(
    input: &[usize],
    weight: &[usize],
    bias: Option<&[usize]>,
    groups: usize,
    padding: Padding,
) -> Result<Geometry> {
    let (c_in, h, w) = match *input {
        [c, h, w] => (c, h, w),
        _ => return Err(Error::dim("conv2d", format!("input must be [C,H,W], got {input:?}"))),
    };
    let (c_out, cig, kh, kw) = match *weight {
        [a, b, c, d] => (a, b, c, d),
        _ => return Err(Error::dim("conv2d", format!("weight must be rank 4, got {weight:?}"))),
    };
    if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
        return Err(Error::dim(
            "conv2d",
            format!("channels (in {c_in}, out {c_out}) not divisible by groups {groups}"),
        ));
    }
    if cig != c_in / groups {
        return Err(Error::dim("conv2d", format!("weight axis 1 is {cig}, expected C_in/groups = {}", c_in / groups)));
    }
    if let Some(b) = bias {
        if b != [c_out] {
            return Err(Error::dim("conv2d", format!("bias shape {b:?}, expected [{c_out}]")));
        }
    }
    let (ph, pw) = match padding {
        Padding::Same => {
            if kh % 2 == 0 || kw % 2 == 0 {
                return Err(Error::dim("conv2d", format!("same padding needs odd kernel, got {kh}x{kw}")));
            }
            ((kh - 1) / 2, (kw - 1) / 2)
        }
        Padding::Valid => (0, 0),
    };
    if h + 2 * ph < kh || w + 2 * pw < kw {
        return Err(Error::dim("conv2d", format!("kernel {kh}x{kw} larger than input {h}x{w}")));
    }
    let oh = h + 2 * ph - kh + 1;
    let ow = w + 2 * pw - kw + 1;
    Ok(Geometry { c_out, h, w, kh, kw, ph, pw, oh, ow, in_per_group: c_in / groups, out_per_group: c_out / groups })
}

/// Output index range along one axis for which `o + k - pad` lands inside `[0, n)`.
#[inline]
fn valid_range(k: usize, pad: usize, n: usize, out_n: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (n + pad).saturating_sub(k).min(out_n);
    (lo, hi.max(lo))
}

pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    groups: usize,
    padding: Padding,
) -> Result<Tensor<T>> {
    let g = geometry(input.shape(), weight.shape(), bias.map(|b| b.shape()), groups, padding)?;
    let mut out = Tensor::zeros(&[g.c_out, g.oh, g.ow]);
    let x = input.data();
    let wt = weight.data();
    let y = out.data_mut();
    let plane_out = g.oh * g.ow;
    let plane_in = g.h * g.w;

    for oc in 0..g.c_out {
        let grp = oc / g.out_per_group;
        let y_plane = &mut y[oc * plane_out..(oc + 1) * plane_out];
        if let Some(b) = bias {
            let bv = b.data()[oc];
            y_plane.iter_mut().for_each(|v| *v = bv);
        }
        for icg in 0..g.in_per_group {
            let ic = grp * g.in_per_group + icg;
            let x_plane = &x[ic * plane_in..(ic + 1) * plane_in];
            for ky in 0..g.kh {
                let (oy0, oy1) = valid_range(ky, g.ph, g.h, g.oh);
                for kx in 0..g.kw {
                    let wv = wt[((oc * g.in_per_group + icg) * g.kh + ky) * g.kw + kx];
                    let (ox0, ox1) = valid_range(kx, g.pw, g.w, g.ow);
                    for oy in oy0..oy1 {
                        let iy = oy + ky - g.ph;
                        let ix0 = ox0 + kx - g.pw;
                        let src = &x_plane[iy * g.w + ix0..iy * g.w + ix0 + (ox1 - ox0)];
                        let dst = &mut y_plane[oy * g.ow + ox0..oy * g.ow + ox1];
                        for (d, &s) in dst.iter_mut().zip(src) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of a convolution given the upstream gradient `grad_out`.
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    groups: usize,
    padding: Padding,
) -> Result<ConvGrads<T>> {
    let g = geometry(input.shape(), weight.shape(), None, groups, padding)?;
    if grad_out.shape() != [g.c_out, g.oh, g.ow] {
        return Err(Error::dim(
            "conv2d_backward",
            format!("grad_out {:?}, expected {:?}", grad_out.shape(), [g.c_out, g.oh, g.ow]),
        ));
    }
    let mut gi = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[g.c_out]);
    let x = input.data();
    let wt = weight.data();
    let dy = grad_out.data();
    let plane_out = g.oh * g.ow;
    let plane_in = g.h * g.w;

    {
        let gbd = gb.data_mut();
        for oc in 0..g.c_out {
            gbd[oc] = dy[oc * plane_out..(oc + 1) * plane_out].iter().fold(T::zero(), |a, &b| a + b);
        }
    }

    let gid = gi.data_mut();
    let gwd = gw.data_mut();
    for oc in 0..g.c_out {
        let grp = oc / g.out_per_group;
        let dy_plane = &dy[oc * plane_out..(oc + 1) * plane_out];
        for icg in 0..g.in_per_group {
            let ic = grp * g.in_per_group + icg;
            let x_plane = &x[ic * plane_in..(ic + 1) * plane_in];
            let gi_plane = &mut gid[ic * plane_in..(ic + 1) * plane_in];
            for ky in 0..g.kh {
                let (oy0, oy1) = valid_range(ky, g.ph, g.h, g.oh);
                for kx in 0..g.kw {
                    let widx = ((oc * g.in_per_group + icg) * g.kh + ky) * g.kw + kx;
                    let wv = wt[widx];
                    let (ox0, ox1) = valid_range(kx, g.pw, g.w, g.ow);
                    let mut acc = T::zero();
                    for oy in oy0..oy1 {
                        let iy = oy + ky - g.ph;
                        let ix0 = ox0 + kx - g.pw;
                        let span = ox1 - ox0;
                        let d = &dy_plane[oy * g.ow + ox0..oy * g.ow + ox1];
                        let s = &x_plane[iy * g.w + ix0..iy * g.w + ix0 + span];
                        for (&dv, &sv) in d.iter().zip(s) {
                            acc += dv * sv;
                        }
                        let gi_row = &mut gi_plane[iy * g.w + ix0..iy * g.w + ix0 + span];
                        for (gv, &dv) in gi_row.iter_mut().zip(d) {
                            *gv += wv * dv;
                        }
                    }
                    gwd[widx] += acc;
                }
            }
        }
    }
    Ok(ConvGrads { input: gi, weight: gw, bias: gb })
}

/// Output spatial size of a convolution.
pub fn conv_output_hw(h: usize, w: usize, kh: usize, kw: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => (h, w),
        Padding::Valid => (h + 1 - kh, w + 1 - kw),
    }
}
