//! Encoder-decoder used by both predictor stages: two stride-2 encoder
//! blocks, two upsampling decoder blocks and a 1×1 classification head that
//! sees the last decoder block, the first encoder block and the raw input. Two fixed coordinate planes are appended to the
//! input so that unobserved regions of the egocentric crop can be told apart.

use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{relu_backward, relu_in_place, upsample, upsample_backward, ConvSpec};

const COORD_CHANNELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct StageNet {
    pub in_ch: usize,
    pub out_ch: usize,
    pub width: usize,
    pub size: usize,
}

/// Activations kept for the backward pass.
pub(crate) struct Cache {
    input: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
    e3: Vec<f64>,
    u1: Vec<f64>,
    d1: Vec<f64>,
    u2: Vec<f64>,
    cat: Vec<f64>,
}

impl StageNet {
    pub fn new(in_ch: usize, out_ch: usize, width: usize, size: usize) -> Self {
        Self { in_ch, out_ch, width, size }
    }

    fn specs(&self) -> [ConvSpec; 6] {
        let c = self.width;
        let mut offset = 0;
        let mut mk = |in_ch, out_ch, kernel, stride| {
            let s = ConvSpec { in_ch, out_ch, kernel, stride, offset };
            offset += s.param_len();
            s
        };
        [
            mk(self.in_ch + COORD_CHANNELS, c, 3, 1),
            mk(c, 2 * c, 3, 2),
            mk(2 * c, 2 * c, 3, 2),
            mk(2 * c, 2 * c, 3, 1),
            mk(2 * c, c, 3, 1),
            mk(2 * c + self.in_ch, self.out_ch, 1, 1),
        ]
    }

    fn sizes(&self) -> (usize, usize, usize) {
        let s1 = self.size;
        let s2 = (s1 - 1) / 2 + 1;
        let s3 = (s2 - 1) / 2 + 1;
        (s1, s2, s3)
    }

    pub fn param_count(&self) -> usize {
        self.specs().iter().map(|s| s.param_len()).sum()
    }

    /// He-normal weights, zero biases.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; self.param_count()];
        for (n, spec) in self.specs().iter().enumerate() {
            let fan_in = (spec.in_ch * spec.kernel * spec.kernel) as f64;
            let gain = if n == 5 { 1.0 } else { 2.0 };
            let normal = Normal::new(0.0, crate::math::sqrt(gain / fan_in)).unwrap();
            for w in &mut params[spec.offset..spec.offset + spec.weight_len()] {
                *w = normal.sample(&mut rng);
            }
        }
        params
    }

    fn with_coordinates(&self, input: &[f64]) -> Vec<f64> {
        let n = self.size;
        let mut out = Vec::with_capacity((self.in_ch + COORD_CHANNELS) * n * n);
        out.extend_from_slice(input);
        let scale = if n > 1 { 2.0 / (n - 1) as f64 } else { 0.0 };
        for y in 0..n {
            for _ in 0..n {
                out.push(y as f64 * scale - 1.0);
            }
        }
        for _ in 0..n {
            for x in 0..n {
                out.push(x as f64 * scale - 1.0);
            }
        }
        out
    }

    /// Returns output logits and the activation cache.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> (Vec<f64>, Cache) {
        let [c1, c2, c3, c4, c5, head] = self.specs();
        let (s1, s2, s3) = self.sizes();
        let c = self.width;
        let input = self.with_coordinates(input);
        let mut e1 = vec![0.0; c * s1 * s1];
        c1.forward(params, &input, s1, &mut e1);
        relu_in_place(&mut e1);
        let mut e2 = vec![0.0; 2 * c * s2 * s2];
        c2.forward(params, &e1, s1, &mut e2);
        relu_in_place(&mut e2);
        let mut e3 = vec![0.0; 2 * c * s3 * s3];
        c3.forward(params, &e2, s2, &mut e3);
        relu_in_place(&mut e3);
        let u1 = upsample(&e3, 2 * c, s3, s2);
        let mut d1 = vec![0.0; 2 * c * s2 * s2];
        c4.forward(params, &u1, s2, &mut d1);
        relu_in_place(&mut d1);
        let u2 = upsample(&d1, 2 * c, s2, s1);
        let plane = s1 * s1;
        let mut cat = vec![0.0; (2 * c + self.in_ch) * plane];
        {
            let (d2, rest) = cat.split_at_mut(c * plane);
            let (skip, raw) = rest.split_at_mut(c * plane);
            c5.forward(params, &u2, s1, d2);
            relu_in_place(d2);
            skip.copy_from_slice(&e1);
            raw.copy_from_slice(&input[..self.in_ch * plane]);
        }
        let mut logits = vec![0.0; self.out_ch * s1 * s1];
        head.forward(params, &cat, s1, &mut logits);
        let cache = Cache {
            input,
            e1,
            e2,
            e3,
            u1,
            d1,
            u2,
            cat,
        };
        (logits, cache)
    }

    /// Accumulates parameter gradients; returns the input gradient when
    /// `want_input` is set.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &Cache,
        grad_logits: &[f64],
        grad_params: &mut [f64],
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let [c1, c2, c3, c4, c5, head] = self.specs();
        let (s1, s2, s3) = self.sizes();
        let c = self.width;

        let mut g_cat = vec![0.0; cache.cat.len()];
        head.backward(params, &cache.cat, s1, grad_logits, grad_params, Some(&mut g_cat));
        let plane = s1 * s1;
        let (g_d2, rest) = g_cat.split_at_mut(c * plane);
        let (g_skip, g_raw) = rest.split_at_mut(c * plane);
        relu_backward(&cache.cat[..c * plane], g_d2);

        let mut g_u2 = vec![0.0; cache.u2.len()];
        c5.backward(params, &cache.u2, s1, g_d2, grad_params, Some(&mut g_u2));
        let mut g_d1 = upsample_backward(&g_u2, 2 * c, s2, s1);
        relu_backward(&cache.d1, &mut g_d1);

        let mut g_u1 = vec![0.0; cache.u1.len()];
        c4.backward(params, &cache.u1, s2, &g_d1, grad_params, Some(&mut g_u1));
        let mut g_e3 = upsample_backward(&g_u1, 2 * c, s3, s2);
        relu_backward(&cache.e3, &mut g_e3);

        let mut g_e2 = vec![0.0; cache.e2.len()];
        c3.backward(params, &cache.e2, s2, &g_e3, grad_params, Some(&mut g_e2));
        relu_backward(&cache.e2, &mut g_e2);

        let mut g_e1 = g_skip.to_vec();
        c2.backward(params, &cache.e1, s1, &g_e2, grad_params, Some(&mut g_e1));
        relu_backward(&cache.e1, &mut g_e1);

        if want_input {
            let mut g_in = vec![0.0; cache.input.len()];
            g_in[..g_raw.len()].copy_from_slice(g_raw);
            c1.backward(params, &cache.input, s1, &g_e1, grad_params, Some(&mut g_in));
            g_in.truncate(self.in_ch * plane);
            Some(g_in)
        } else {
            c1.backward(params, &cache.input, s1, &g_e1, grad_params, None);
            None
        }
    }
}
