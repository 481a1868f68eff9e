//! Layer primitives: same-padding cross-correlation (as GEMM over shifted
//! channel planes), 2x2 max pooling, and channel-wise global max pooling.
//!
//! Convolution with an odd kernel `k` and padding `p = k/2` decomposes into
//! `k*k` rank updates: for each kernel offset, the (out x in) weight slice
//! multiplies the input planes shifted by that offset. Each update is one
//! dgemm call, which is where virtually all the arithmetic happens, in both
//! the forward and the two backward passes.

use super::tensor::Tensor;
use super::{ConvLayer, DenseLayer};

/// Thin wrapper over matrixmultiply's dgemm with alpha = 1.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    kk: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    debug_assert!(m * kk <= a.len() && kk * n <= b.len() && m * n <= c.len());
    unsafe {
        matrixmultiply::dgemm(
            m,
            kk,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

/// dest[c][y][x] = src[c][y + dy][x + dx], zero outside bounds.
fn build_shift(src: &Tensor, dy: isize, dx: isize, dest: &mut [f64]) {
    let (h, w) = (src.height as isize, src.width as isize);
    let hw = (h * w) as usize;
    dest.fill(0.0);
    let x_lo = 0.max(-dx) as usize;
    let x_hi = w.min(w - dx) as usize;
    if x_lo >= x_hi {
        return;
    }
    for c in 0..src.channels {
        let sp = src.plane(c);
        let dp = &mut dest[c * hw..(c + 1) * hw];
        for y in 0..h {
            let sy = y + dy;
            if sy < 0 || sy >= h {
                continue;
            }
            let drow = (y * w) as usize;
            let srow = (sy * w) as usize;
            let s_lo = (x_lo as isize + dx) as usize;
            dp[drow + x_lo..drow + x_hi]
                .copy_from_slice(&sp[srow + s_lo..srow + s_lo + (x_hi - x_lo)]);
        }
    }
}

/// out[oc] = bias[oc] + sum over (ic, du, dv) of w[oc][ic][du][dv] * shifted input.
pub fn conv_forward(x: &Tensor, layer: &ConvLayer, out: &mut Tensor) {
    let (cin, cout, k) = (layer.in_ch, layer.out_ch, layer.kernel);
    let p = (k / 2) as isize;
    let hw = x.spatial();
    assert_eq!(x.channels, cin, "conv input channels");
    assert!(out.channels == cout && out.height == x.height && out.width == x.width);

    for oc in 0..cout {
        out.plane_mut(oc).fill(layer.bias[oc]);
    }
    let mut shifted = vec![0.0; cin * hw];
    let mut wslice = vec![0.0; cout * cin];
    for du in 0..k {
        for dv in 0..k {
            build_shift(x, du as isize - p, dv as isize - p, &mut shifted);
            for oc in 0..cout {
                for ic in 0..cin {
                    wslice[oc * cin + ic] = layer.weights[((oc * cin + ic) * k + du) * k + dv];
                }
            }
            gemm(
                cout,
                cin,
                hw,
                &wslice,
                cin as isize,
                1,
                &shifted,
                hw as isize,
                1,
                1.0,
                &mut out.data,
                hw as isize,
                1,
            );
        }
    }
}

/// Gradient w.r.t. the convolution input; `dx` is overwritten.
pub fn conv_backward_input(dy: &Tensor, layer: &ConvLayer, dx: &mut Tensor) {
    let (cin, cout, k) = (layer.in_ch, layer.out_ch, layer.kernel);
    let p = (k / 2) as isize;
    let hw = dy.spatial();
    assert_eq!(dy.channels, cout);
    assert!(dx.channels == cin && dx.height == dy.height && dx.width == dy.width);

    dx.data.fill(0.0);
    let mut shifted = vec![0.0; cout * hw];
    let mut wslice_t = vec![0.0; cin * cout];
    for du in 0..k {
        for dv in 0..k {
            // Input position z feeds output z - (offset - p), so the
            // incoming gradient is shifted the opposite way.
            build_shift(dy, p - du as isize, p - dv as isize, &mut shifted);
            for oc in 0..cout {
                for ic in 0..cin {
                    wslice_t[ic * cout + oc] = layer.weights[((oc * cin + ic) * k + du) * k + dv];
                }
            }
            gemm(
                cin,
                cout,
                hw,
                &wslice_t,
                cout as isize,
                1,
                &shifted,
                hw as isize,
                1,
                1.0,
                &mut dx.data,
                hw as isize,
                1,
            );
        }
    }
}

/// Accumulate weight and bias gradients (`dw`, `db` are += targets).
pub fn conv_backward_params(
    x: &Tensor,
    dy: &Tensor,
    layer: &ConvLayer,
    dw: &mut [f64],
    db: &mut [f64],
) {
    let (cin, cout, k) = (layer.in_ch, layer.out_ch, layer.kernel);
    let p = (k / 2) as isize;
    let hw = x.spatial();
    assert_eq!(dw.len(), layer.weights.len());
    assert_eq!(db.len(), cout);

    for oc in 0..cout {
        db[oc] += dy.plane(oc).iter().sum::<f64>();
    }
    let mut shifted = vec![0.0; cin * hw];
    let mut wgrad = vec![0.0; cout * cin];
    for du in 0..k {
        for dv in 0..k {
            build_shift(x, du as isize - p, dv as isize - p, &mut shifted);
            gemm(
                cout,
                hw,
                cin,
                &dy.data,
                hw as isize,
                1,
                &shifted,
                1,
                hw as isize,
                0.0,
                &mut wgrad,
                cin as isize,
                1,
            );
            for oc in 0..cout {
                for ic in 0..cin {
                    dw[((oc * cin + ic) * k + du) * k + dv] += wgrad[oc * cin + ic];
                }
            }
        }
    }
}

/// 2x2 max pooling with stride 2; trailing odd row/column is dropped.
/// Ties resolve to the first element in scan order, recorded in `argmax`
/// as flat indices into the source plane.
pub fn maxpool2(x: &Tensor, out: &mut Tensor, argmax: &mut Vec<u32>) {
    let (ph, pw) = (x.height / 2, x.width / 2);
    assert!(out.channels == x.channels && out.height == ph && out.width == pw);
    argmax.clear();
    argmax.reserve(x.channels * ph * pw);
    for c in 0..x.channels {
        let plane = x.plane(c);
        for py in 0..ph {
            for px in 0..pw {
                let base = 2 * py * x.width + 2 * px;
                let mut best = base;
                for &cand in &[base + 1, base + x.width, base + x.width + 1] {
                    if plane[cand] > plane[best] {
                        best = cand;
                    }
                }
                out.set(c, py, px, plane[best]);
                argmax.push(best as u32);
            }
        }
    }
}

/// Scatter pooled gradients back to the positions that won the max.
pub fn maxpool2_backward(dy: &Tensor, argmax: &[u32], dx: &mut Tensor) {
    dx.data.fill(0.0);
    let hw = dx.spatial();
    let phw = dy.spatial();
    for c in 0..dy.channels {
        let dyp = dy.plane(c);
        let dxp = &mut dx.data[c * hw..(c + 1) * hw];
        for (i, &g) in dyp.iter().enumerate() {
            dxp[argmax[c * phw + i] as usize] += g;
        }
    }
}

/// Global max over each channel plane; ties resolve to the first position.
pub fn global_max(x: &Tensor) -> (Vec<f64>, Vec<u32>) {
    let mut vals = Vec::with_capacity(x.channels);
    let mut arg = Vec::with_capacity(x.channels);
    for c in 0..x.channels {
        let plane = x.plane(c);
        let mut best = 0;
        for (i, &v) in plane.iter().enumerate() {
            if v > plane[best] {
                best = i;
            }
        }
        vals.push(plane[best]);
        arg.push(best as u32);
    }
    (vals, arg)
}

pub fn dense_forward(x: &[f64], layer: &DenseLayer, out: &mut [f64]) {
    assert_eq!(x.len(), layer.in_dim);
    assert_eq!(out.len(), layer.out_dim);
    for (o, out_v) in out.iter_mut().enumerate() {
        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
        let mut acc = layer.bias[o];
        for (w, xv) in row.iter().zip(x) {
            acc += w * xv;
        }
        *out_v = acc;
    }
}

/// Dense backward: accumulates parameter gradients, overwrites `dx`.
pub fn dense_backward(
    x: &[f64],
    dz: &[f64],
    layer: &DenseLayer,
    dw: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) {
    dx.fill(0.0);
    for (o, &g) in dz.iter().enumerate() {
        db[o] += g;
        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
        let grow = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
        for i in 0..layer.in_dim {
            grow[i] += g * x[i];
            dx[i] += g * row[i];
        }
    }
}

/// Numerically safe softmax: shift by the max logit before exponentiating.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}
