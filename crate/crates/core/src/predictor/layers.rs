//! Convolution, upsampling and activation kernels with their backward passes.
//! Tensors are channel-major `C×H×W` slices.

use alloc::vec;
use alloc::vec::Vec;

/// Static description of a 2D convolution with square kernel and
/// `pad = kernel / 2`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvSpec {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    /// Offset of the weights in the flat parameter vector; biases follow.
    pub offset: usize,
}

impl ConvSpec {
    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel * self.kernel
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_ch
    }

    pub fn out_size(&self, size: usize) -> usize {
        (size - 1) / self.stride + 1
    }

    fn pad(&self) -> isize {
        (self.kernel / 2) as isize
    }

    /// Range of output columns `ox` whose input column `ox*stride + kx - pad`
    /// lies in `[0, iw)`.
    #[inline]
    fn valid_range(&self, kx: usize, iw: usize, ow: usize) -> (usize, usize) {
        let shift = kx as isize - self.pad();
        let s = self.stride as isize;
        let lo = if shift >= 0 { 0 } else { ((-shift) + s - 1) / s };
        let hi = ((iw as isize - 1 - shift).div_euclid(s) + 1).clamp(0, ow as isize);
        (lo as usize, (hi as usize).max(lo as usize))
    }

    /// Unrolls `input` into a `(in_ch·k·k) × (out_size²)` column matrix.
    fn im2col(&self, input: &[f64], size: usize) -> Vec<f64> {
        let (isz, osz) = (size, self.out_size(size));
        let (ip, op) = (isz * isz, osz * osz);
        let k = self.kernel;
        let mut cols = vec![0.0; self.in_ch * k * k * op];
        for i in 0..self.in_ch {
            let iplane = &input[i * ip..(i + 1) * ip];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (i * k + ky) * k + kx;
                    let dst = &mut cols[row * op..(row + 1) * op];
                    let (lo, hi) = self.valid_range(kx, isz, osz);
                    for oy in 0..osz {
                        let iy = (oy * self.stride + ky) as isize - self.pad();
                        if iy < 0 || iy >= isz as isize {
                            continue;
                        }
                        let irow = &iplane[iy as usize * isz..(iy as usize + 1) * isz];
                        let drow = &mut dst[oy * osz..(oy + 1) * osz];
                        for ox in lo..hi {
                            drow[ox] = irow[((ox * self.stride + kx) as isize - self.pad()) as usize];
                        }
                    }
                }
            }
        }
        cols
    }

    /// Scatters a column-matrix gradient back onto the input planes.
    fn col2im(&self, cols: &[f64], size: usize, grad_input: &mut [f64]) {
        let (isz, osz) = (size, self.out_size(size));
        let (ip, op) = (isz * isz, osz * osz);
        let k = self.kernel;
        for i in 0..self.in_ch {
            for ky in 0..k {
                for kx in 0..k {
                    let row = (i * k + ky) * k + kx;
                    let src = &cols[row * op..(row + 1) * op];
                    let (lo, hi) = self.valid_range(kx, isz, osz);
                    for oy in 0..osz {
                        let iy = (oy * self.stride + ky) as isize - self.pad();
                        if iy < 0 || iy >= isz as isize {
                            continue;
                        }
                        let base = i * ip + iy as usize * isz;
                        for ox in lo..hi {
                            let ix = ((ox * self.stride + kx) as isize - self.pad()) as usize;
                            grad_input[base + ix] += src[oy * osz + ox];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, params: &[f64], input: &[f64], size: usize, out: &mut [f64]) {
        let op = self.out_size(size).pow(2);
        let kk = self.in_ch * self.kernel * self.kernel;
        let w = &params[self.offset..self.offset + self.weight_len()];
        let b = &params[self.offset + self.weight_len()..self.offset + self.param_len()];
        debug_assert_eq!(input.len(), self.in_ch * size * size);
        debug_assert_eq!(out.len(), self.out_ch * op);
        for o in 0..self.out_ch {
            out[o * op..(o + 1) * op].fill(b[o]);
        }
        let cols = self.im2col(input, size);
        // out[out_ch × op] += W[out_ch × kk] · cols[kk × op]
        gemm(self.out_ch, kk, op, w, (kk, 1), &cols, (op, 1), out, op);
    }

    /// Accumulates weight/bias gradients into `grad_params` and, when given,
    /// the input gradient into `grad_input`.
    pub fn backward(
        &self,
        params: &[f64],
        input: &[f64],
        size: usize,
        grad_out: &[f64],
        grad_params: &mut [f64],
        grad_input: Option<&mut [f64]>,
    ) {
        let op = self.out_size(size).pow(2);
        let kk = self.in_ch * self.kernel * self.kernel;
        let wl = self.weight_len();
        let w = &params[self.offset..self.offset + wl];
        let (gw, gb) = grad_params[self.offset..self.offset + self.param_len()].split_at_mut(wl);
        for o in 0..self.out_ch {
            gb[o] += grad_out[o * op..(o + 1) * op].iter().sum::<f64>();
        }
        let cols = self.im2col(input, size);
        // gW[out_ch × kk] += gout[out_ch × op] · colsᵀ[op × kk]
        gemm(self.out_ch, op, kk, grad_out, (op, 1), &cols, (1, op), gw, kk);
        if let Some(gi) = grad_input {
            // gcols[kk × op] = Wᵀ[kk × out_ch] · gout[out_ch × op]
            let mut gcols = vec![0.0; kk * op];
            gemm(kk, self.out_ch, op, w, (1, kk), grad_out, (op, 1), &mut gcols, op);
            self.col2im(&gcols, size, gi);
        }
    }
}

/// `c[m×n] += a[m×k] · b[k×n]` with explicit (row, col) strides for `a`, `b`.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_stride: (usize, usize), b: &[f64], b_stride: (usize, usize), c: &mut [f64], c_row: usize) {
    assert!(a.len() > (m - 1) * a_stride.0 + (k - 1) * a_stride.1);
    assert!(b.len() > (k - 1) * b_stride.0 + (n - 1) * b_stride.1);
    assert!(c.len() >= (m - 1) * c_row + n);
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_stride.0 as isize,
            a_stride.1 as isize,
            b.as_ptr(),
            b_stride.0 as isize,
            b_stride.1 as isize,
            1.0,
            c.as_mut_ptr(),
            c_row as isize,
            1,
        );
    }
}

pub(crate) fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries where the activation output was not positive.
pub(crate) fn relu_backward(activation: &[f64], grad: &mut [f64]) {
    for (g, a) in grad.iter_mut().zip(activation) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Nearest-neighbour upsampling of `channels` planes from `from` to `to`
/// (`to` ≤ 2·`from`): `out[y][x] = in[y/2][x/2]`.
pub(crate) fn upsample(input: &[f64], channels: usize, from: usize, to: usize) -> alloc::vec::Vec<f64> {
    let mut out = alloc::vec![0.0; channels * to * to];
    for c in 0..channels {
        for y in 0..to {
            for x in 0..to {
                out[(c * to + y) * to + x] = input[(c * from + y / 2) * from + x / 2];
            }
        }
    }
    out
}

pub(crate) fn upsample_backward(grad_out: &[f64], channels: usize, from: usize, to: usize) -> alloc::vec::Vec<f64> {
    let mut g = alloc::vec![0.0; channels * from * from];
    for c in 0..channels {
        for y in 0..to {
            for x in 0..to {
                g[(c * from + y / 2) * from + x / 2] += grad_out[(c * to + y) * to + x];
            }
        }
    }
    g
}
