//! Dense f64 kernels behind the tensor ops: matrix products and the
//! im2col/col2im plumbing used by both convolution directions.
//!
//! Everything here is plain array math with no graph bookkeeping, so the
//! backward rules in `mod.rs` can reuse the same primitives.

/// c += a[m,k] * b[k,n]
pub fn matmul_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for (kk, &a_ik) in a_row.iter().enumerate() {
            if a_ik == 0.0 {
                continue;
            }
            let b_row = &b[kk * n..kk * n + n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += a_ik * bv;
            }
        }
    }
}

/// c += a[m,k] * b[n,k]^T  (rows of `b` are dotted against rows of `a`)
pub fn matmul_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let c_row = &mut c[i * n..(i + 1) * n];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let dot: f64 = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            c_row[j] += dot;
        }
    }
}

/// c += a[k,m]^T * b[k,n]
pub fn matmul_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for kk in 0..k {
        let a_row = &a[kk * m..(kk + 1) * m];
        let b_row = &b[kk * n..(kk + 1) * n];
        for (i, &a_ki) in a_row.iter().enumerate() {
            if a_ki == 0.0 {
                continue;
            }
            let c_row = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += a_ki * bv;
            }
        }
    }
}

/// Output spatial extent of a strided convolution with explicit zero padding.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Output spatial extent of a transposed convolution.
pub fn conv_transpose_out_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Option<usize> {
    let full = (input - 1) * stride + kernel;
    full.checked_sub(2 * pad).filter(|&e| e > 0)
}

/// Gather input patches into a [cin*kh*kw, oh*ow] matrix (zero padded).
#[allow(clippy::too_many_arguments)]
pub fn im2col(
    x: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let mut cols = vec![0.0; cin * kh * kw * oh * ow];
    for ci in 0..cin {
        let x_ch = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((ci * kh + ky) * kw + kx) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let x_row = &x_ch[iy as usize * w..(iy as usize + 1) * w];
                    let c_row = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                    for (ox, cv) in c_row.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            *cv = x_row[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add a [cin*kh*kw, oh*ow] patch-gradient matrix back onto the input.
#[allow(clippy::too_many_arguments)]
pub fn col2im_add(
    cols: &[f64],
    dx: &mut [f64],
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) {
    for ci in 0..cin {
        let dx_ch = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((ci * kh + ky) * kw + kx) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = iy as usize * w;
                    let c_row = &cols[row + oy * ow..row + (oy + 1) * ow];
                    for (ox, cv) in c_row.iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dx_ch[base + ix as usize] += cv;
                        }
                    }
                }
            }
        }
    }
}

/// Forward strided 2-D convolution; `x` is [cin,h,w], `k` is [cout,cin,kh,kw].
#[allow(clippy::too_many_arguments)]
pub fn conv2d_forward(
    x: &[f64],
    k: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let cols = im2col(x, cin, h, w, kh, kw, stride, pad, oh, ow);
    let mut out = vec![0.0; cout * oh * ow];
    matmul_nn(k, &cols, &mut out, cout, cin * kh * kw, oh * ow);
    out
}

/// Gradients of a strided 2-D convolution w.r.t. input and kernel.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_backward(
    x: &[f64],
    k: &[f64],
    g: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> (Vec<f64>, Vec<f64>) {
    let patch = cin * kh * kw;
    let area = oh * ow;
    let cols = im2col(x, cin, h, w, kh, kw, stride, pad, oh, ow);
    let mut dk = vec![0.0; cout * patch];
    matmul_nt(g, &cols, &mut dk, cout, area, patch);
    let mut dcols = vec![0.0; patch * area];
    matmul_tn(k, g, &mut dcols, patch, cout, area);
    let mut dx = vec![0.0; cin * h * w];
    col2im_add(&dcols, &mut dx, cin, h, w, kh, kw, stride, pad, oh, ow);
    (dx, dk)
}

/// Forward transposed 2-D convolution; `x` is [cin,h,w], `k` is [cin,cout,kh,kw].
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_forward(
    x: &[f64],
    k: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Vec<f64> {
    let patch = cout * kh * kw;
    let area = h * w;
    // cols[(co,ky,kx), (iy,ix)] = sum_ci k[ci,co,ky,kx] * x[ci,iy,ix]
    let mut cols = vec![0.0; patch * area];
    matmul_tn(k, x, &mut cols, patch, cin, area);
    let mut out = vec![0.0; cout * oh * ow];
    // The scatter is the exact adjoint of im2col with the roles of the
    // "input" and "output" grids swapped.
    col2im_add(&cols, &mut out, cout, oh, ow, kh, kw, stride, pad, h, w);
    out
}

/// Gradients of a transposed 2-D convolution w.r.t. input and kernel.
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_backward(
    x: &[f64],
    k: &[f64],
    g: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> (Vec<f64>, Vec<f64>) {
    let patch = cout * kh * kw;
    let area = h * w;
    let gcols = im2col(g, cout, oh, ow, kh, kw, stride, pad, h, w);
    let mut dx = vec![0.0; cin * area];
    matmul_nn(k, &gcols, &mut dx, cin, patch, area);
    let mut dk = vec![0.0; cin * patch];
    matmul_nt(x, &gcols, &mut dk, cin, area, patch);
    (dx, dk)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let mut c = vec![0.0; 4];
        matmul_nn(&a, &b, &mut c, 2, 3, 2);
        assert_eq!(c, vec![58.0, 64.0, 139.0, 154.0]);

        // a * b == a * (b^T)^T
        let bt = [7.0, 9.0, 11.0, 8.0, 10.0, 12.0]; // 2x3 transpose of b
        let mut c2 = vec![0.0; 4];
        matmul_nt(&a, &bt, &mut c2, 2, 3, 2);
        assert_eq!(c, c2);

        let at = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]; // 3x2 transpose of a
        let mut c3 = vec![0.0; 4];
        matmul_tn(&at, &b, &mut c3, 2, 3, 2);
        assert_eq!(c, c3);
    }

    #[test]
    fn conv_extents() {
        assert_eq!(conv_out_extent(16, 3, 2, 1), Some(8));
        assert_eq!(conv_out_extent(64, 3, 1, 1), Some(64));
        assert_eq!(conv_out_extent(2, 5, 1, 0), None);
        assert_eq!(conv_transpose_out_extent(8, 2, 2, 0), Some(16));
        assert_eq!(conv_transpose_out_extent(4, 4, 2, 1), Some(8));
    }

    #[test]
    fn conv2d_matches_direct_sum() {
        // 2x3x4 input, 2 output channels, k=3, stride 2, pad 1
        let (cin, h, w, cout, kh, kw, stride, pad) = (2, 3, 4, 2, 3, 3, 2, 1);
        let x: Vec<f64> = (0..cin * h * w).map(|i| (i as f64) * 0.37 - 2.0).collect();
        let k: Vec<f64> = (0..cout * cin * kh * kw)
            .map(|i| ((i * 7 % 11) as f64) * 0.21 - 1.0)
            .collect();
        let oh = conv_out_extent(h, kh, stride, pad).unwrap();
        let ow = conv_out_extent(w, kw, stride, pad).unwrap();
        let got = conv2d_forward(&x, &k, cin, h, w, cout, kh, kw, stride, pad, oh, ow);

        let mut want = vec![0.0; cout * oh * ow];
        for co in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = 0.0;
                    for ci in 0..cin {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    s += k[((co * cin + ci) * kh + ky) * kw + kx]
                                        * x[(ci * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                    }
                    want[(co * oh + oy) * ow + ox] = s;
                }
            }
        }
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, conv_transpose(y)> when both use the same kernel
        // (with the [cout,cin] axes swapped), stride, and padding.
        let (cin, h, w, cout, kh, kw, stride, pad) = (2, 4, 5, 3, 3, 3, 2, 1);
        let oh = conv_out_extent(h, kh, stride, pad).unwrap();
        let ow = conv_out_extent(w, kw, stride, pad).unwrap();
        let x: Vec<f64> = (0..cin * h * w).map(|i| (i as f64 * 0.11).sin()).collect();
        let y: Vec<f64> = (0..cout * oh * ow).map(|i| (i as f64 * 0.23).cos()).collect();
        let k: Vec<f64> = (0..cout * cin * kh * kw)
            .map(|i| (i as f64 * 0.05).sin())
            .collect();

        let cx = conv2d_forward(&x, &k, cin, h, w, cout, kh, kw, stride, pad, oh, ow);
        let lhs: f64 = cx.iter().zip(&y).map(|(a, b)| a * b).sum();

        // Re-layout k from [cout,cin,kh,kw] to [cout(cin'),cout',kh,kw] order
        // expected by the transposed direction: input channels first.
        let ty = conv_transpose2d_forward(&y, &k, cout, oh, ow, cin, kh, kw, stride, pad, h, w);
        let rhs: f64 = ty.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9, "lhs={lhs} rhs={rhs}");
    }
}
