//! Strided 3D convolution and transposed convolution, forward and backward.
//!
//! Both layers relate a "small" grid to a "big" grid through taps
//! `big = small * stride - padding + offset`. A convolution gathers from the
//! big (input) grid into the small (output) grid; a transposed convolution
//! scatters from the small (input) grid into the big (output) grid.
//!
//! Weight layouts: convolution `[out][in][kx][ky][kz]`, transposed
//! convolution `[in][out][kx][ky][kz]`.

use super::spec::{LayerKind, LayerSpec};

/// Range of small-grid coordinates `q` with `0 <= q*s - p + k < big`.
#[inline]
fn tap_range(small: usize, big: usize, s: usize, p: usize, k: usize) -> std::ops::Range<usize> {
    // q*s >= p - k
    let lo = if p > k { (p - k).div_ceil(s) } else { 0 };
    // q*s <= big - 1 + p - k
    let top = big as isize - 1 + p as isize - k as isize;
    if top < 0 {
        return 0..0;
    }
    let hi = (top as usize / s + 1).min(small);
    lo.min(hi)..hi
}

/// Visit every (small index, big index) pair connected by kernel offset
/// `(kx, ky, kz)`.
#[inline]
fn for_each_tap(
    small: [usize; 3],
    big: [usize; 3],
    stride: usize,
    pad: usize,
    k: [usize; 3],
    mut f: impl FnMut(usize, usize),
) {
    let rx = tap_range(small[0], big[0], stride, pad, k[0]);
    let ry = tap_range(small[1], big[1], stride, pad, k[1]);
    let rz = tap_range(small[2], big[2], stride, pad, k[2]);
    if rz.is_empty() {
        return;
    }
    for qx in rx {
        let bx = qx * stride + k[0] - pad;
        for qy in ry.clone() {
            let by = qy * stride + k[1] - pad;
            let srow = (qx * small[1] + qy) * small[2];
            let brow = (bx * big[1] + by) * big[2];
            for qz in rz.clone() {
                let bz = qz * stride + k[2] - pad;
                f(srow + qz, brow + bz);
            }
        }
    }
}

fn vol(d: [usize; 3]) -> usize {
    d[0] * d[1] * d[2]
}

fn kernel_offsets(k: usize) -> impl Iterator<Item = (usize, [usize; 3])> {
    (0..k * k * k).map(move |t| (t, [t / (k * k), (t / k) % k, t % k]))
}

/// Pre-activation output of one layer.
pub fn forward(
    layer: &LayerSpec,
    in_dims: [usize; 3],
    out_dims: [usize; 3],
    input: &[f64],
    weights: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let (ci, co) = (layer.in_channels, layer.out_channels);
    let (ni, no) = (vol(in_dims), vol(out_dims));
    let kk = layer.kernel.pow(3);
    let mut out = vec![0.0; co * no];
    for (oc, chunk) in out.chunks_mut(no).enumerate() {
        chunk.fill(bias[oc]);
    }
    match layer.kind {
        LayerKind::Conv => {
            for oc in 0..co {
                let dst = &mut out[oc * no..(oc + 1) * no];
                for ic in 0..ci {
                    let src = &input[ic * ni..(ic + 1) * ni];
                    for (t, k) in kernel_offsets(layer.kernel) {
                        let w = weights[(oc * ci + ic) * kk + t];
                        if w == 0.0 {
                            continue;
                        }
                        for_each_tap(out_dims, in_dims, layer.stride, layer.padding, k, |s, b| {
                            dst[s] += w * src[b];
                        });
                    }
                }
            }
        }
        LayerKind::TransposedConv => {
            for ic in 0..ci {
                let src = &input[ic * ni..(ic + 1) * ni];
                if src.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for oc in 0..co {
                    let dst = &mut out[oc * no..(oc + 1) * no];
                    for (t, k) in kernel_offsets(layer.kernel) {
                        let w = weights[(ic * co + oc) * kk + t];
                        for_each_tap(in_dims, out_dims, layer.stride, layer.padding, k, |s, b| {
                            dst[b] += w * src[s];
                        });
                    }
                }
            }
        }
    }
    out
}

/// Accumulate parameter gradients and optionally return the input gradient,
/// given `grad_out` with respect to the layer's pre-activation output.
#[allow(clippy::too_many_arguments)]
pub fn backward(
    layer: &LayerSpec,
    in_dims: [usize; 3],
    out_dims: [usize; 3],
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    need_input_grad: bool,
) -> Option<Vec<f64>> {
    let (ci, co) = (layer.in_channels, layer.out_channels);
    let (ni, no) = (vol(in_dims), vol(out_dims));
    let kk = layer.kernel.pow(3);
    for oc in 0..co {
        grad_b[oc] += grad_out[oc * no..(oc + 1) * no].iter().sum::<f64>();
    }
    let mut grad_in = need_input_grad.then(|| vec![0.0; ci * ni]);
    match layer.kind {
        LayerKind::Conv => {
            for oc in 0..co {
                let g = &grad_out[oc * no..(oc + 1) * no];
                for ic in 0..ci {
                    let x = &input[ic * ni..(ic + 1) * ni];
                    for (t, k) in kernel_offsets(layer.kernel) {
                        let widx = (oc * ci + ic) * kk + t;
                        let mut acc = 0.0;
                        for_each_tap(out_dims, in_dims, layer.stride, layer.padding, k, |s, b| {
                            acc += g[s] * x[b];
                        });
                        grad_w[widx] += acc;
                        if let Some(gi) = grad_in.as_mut() {
                            let w = weights[widx];
                            let gi = &mut gi[ic * ni..(ic + 1) * ni];
                            for_each_tap(out_dims, in_dims, layer.stride, layer.padding, k, |s, b| {
                                gi[b] += w * g[s];
                            });
                        }
                    }
                }
            }
        }
        LayerKind::TransposedConv => {
            for ic in 0..ci {
                let x = &input[ic * ni..(ic + 1) * ni];
                for oc in 0..co {
                    let g = &grad_out[oc * no..(oc + 1) * no];
                    for (t, k) in kernel_offsets(layer.kernel) {
                        let widx = (ic * co + oc) * kk + t;
                        let mut acc = 0.0;
                        for_each_tap(in_dims, out_dims, layer.stride, layer.padding, k, |s, b| {
                            acc += x[s] * g[b];
                        });
                        grad_w[widx] += acc;
                        if let Some(gi) = grad_in.as_mut() {
                            let w = weights[widx];
                            let gi = &mut gi[ic * ni..(ic + 1) * ni];
                            for_each_tap(in_dims, out_dims, layer.stride, layer.padding, k, |s, b| {
                                gi[s] += w * g[b];
                            });
                        }
                    }
                }
            }
        }
    }
    grad_in
}
