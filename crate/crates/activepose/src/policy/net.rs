//! The trainable policy network: two shared filter stages over the base
//! feature map, then separate viewpoint and continue branches. Forward and
//! exact reverse-mode gradients are hand-rolled over a flat parameter
//! vector.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scenesim::{FEAT_C, FEAT_H, FEAT_W};

/// Network shape. The base map passes through two 3x3 same-padding filter
/// stages with tanh and 2x2 mean pooling; both spatial dims must therefore
/// be divisible by 4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    pub map_h: usize,
    pub map_w: usize,
    pub map_c: usize,
    pub conv1_out: usize,
    pub conv2_out: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    /// Length of the non-map state features (poses + canvas + aux).
    pub extra_dim: usize,
}

impl NetConfig {
    pub fn desk_default(canvas_dim: usize) -> Self {
        NetConfig {
            map_h: FEAT_H,
            map_w: FEAT_W,
            map_c: FEAT_C,
            conv1_out: 16,
            conv2_out: 8,
            hidden1: 64,
            hidden2: 32,
            extra_dim: 270 + canvas_dim + 2,
        }
    }

    /// Tiny shape for exhaustive finite-difference checks.
    pub fn tiny() -> Self {
        NetConfig {
            map_h: 4,
            map_w: 4,
            map_c: 3,
            conv1_out: 3,
            conv2_out: 2,
            hidden1: 6,
            hidden2: 5,
            extra_dim: 7,
        }
    }

    pub fn trunk_out(&self) -> usize {
        self.conv2_out * (self.map_h / 4) * (self.map_w / 4)
    }

    pub fn concat_dim(&self) -> usize {
        self.trunk_out() + self.extra_dim
    }

    pub fn map_len(&self) -> usize {
        self.map_h * self.map_w * self.map_c
    }
}

/// Named slices of the flat parameter vector.
#[derive(Debug, Clone)]
pub struct Layout {
    pub tensors: Vec<(String, Vec<usize>, std::ops::Range<usize>)>,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &NetConfig) -> Self {
        let mut tensors = Vec::new();
        let mut off = 0usize;
        let push = |name: &str, shape: Vec<usize>, off: &mut usize| {
            let n: usize = shape.iter().product();
            let range = *off..*off + n;
            *off += n;
            (name.to_string(), shape, range)
        };
        let d = cfg.concat_dim();
        for t in [
            push("conv1_w", vec![cfg.conv1_out, cfg.map_c, 3, 3], &mut off),
            push("conv1_b", vec![cfg.conv1_out], &mut off),
            push("conv2_w", vec![cfg.conv2_out, cfg.conv1_out, 3, 3], &mut off),
            push("conv2_b", vec![cfg.conv2_out], &mut off),
            push("vp1_w", vec![cfg.hidden1, d], &mut off),
            push("vp1_b", vec![cfg.hidden1], &mut off),
            push("vp2_w", vec![cfg.hidden2, cfg.hidden1], &mut off),
            push("vp2_b", vec![cfg.hidden2], &mut off),
            push("az_w", vec![cfg.hidden2], &mut off),
            push("az_b", vec![1], &mut off),
            push("el_w", vec![cfg.hidden2], &mut off),
            push("el_b", vec![1], &mut off),
            push("cb1_w", vec![cfg.hidden1, d], &mut off),
            push("cb1_b", vec![cfg.hidden1], &mut off),
            push("cb2_w", vec![cfg.hidden2, cfg.hidden1], &mut off),
            push("cb2_b", vec![cfg.hidden2], &mut off),
            push("c_w", vec![cfg.hidden2], &mut off),
            push("c_b", vec![1], &mut off),
        ] {
            tensors.push(t);
        }
        Layout { tensors, total: off }
    }

    pub fn range(&self, name: &str) -> std::ops::Range<usize> {
        self.tensors
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, r)| r.clone())
            .unwrap_or_else(|| panic!("unknown tensor {name}"))
    }
}

/// All trainable weights of trunk, viewpoint branch and continue branch.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub cfg: NetConfig,
    pub data: Vec<f64>,
}

impl PolicyParams {
    /// Uniform [-0.05, 0.05] weights, zero biases: initial action means sit
    /// near zero and the continue probability near one half.
    pub fn init(cfg: NetConfig, seed: u64) -> Self {
        let layout = Layout::new(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9a11_0c_1e);
        let mut data = vec![0.0; layout.total];
        for (name, _, range) in &layout.tensors {
            if name.ends_with("_b") {
                continue;
            }
            for v in &mut data[range.clone()] {
                *v = rng.random_range(-0.05..0.05);
            }
        }
        PolicyParams { cfg, data }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.cfg)
    }

    pub fn zero_grad(&self) -> Vec<f64> {
        vec![0.0; self.data.len()]
    }
}

/// Head pre-activations from one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct HeadPreacts {
    pub azimuth: f64,
    pub elevation: f64,
    pub cont: f64,
}

/// Cached activations for the backward pass.
pub struct Trace {
    base: Vec<f64>,
    a1: Vec<f64>,
    p1: Vec<f64>,
    a2: Vec<f64>,
    concat: Vec<f64>,
    vp_h1: Vec<f64>,
    vp_h2: Vec<f64>,
    cb_h1: Vec<f64>,
    cb_h2: Vec<f64>,
    pub heads: HeadPreacts,
}

#[inline]
fn at(buf: &[f64], w: usize, ch_stride: usize, c: usize, y: usize, x: usize) -> f64 {
    buf[c * ch_stride + y * w + x]
}

fn conv3x3(
    input: &[f64],
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
    weight: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    let ch = h * w;
    for oc in 0..c_out {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias[oc];
                for ic in 0..c_in {
                    let wbase = ((oc * c_in) + ic) * 9;
                    for ky in 0..3usize {
                        let yy = y as isize + ky as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for kx in 0..3usize {
                            let xx = x as isize + kx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            acc += weight[wbase + ky * 3 + kx]
                                * at(input, w, ch, ic, yy as usize, xx as usize);
                        }
                    }
                }
                out[oc * ch + y * w + x] = acc;
            }
        }
    }
}

fn pool2(input: &[f64], h: usize, w: usize, c: usize, out: &mut [f64]) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut s = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        s += at(input, w, h * w, ch, 2 * y + dy, 2 * x + dx);
                    }
                }
                out[ch * oh * ow + y * ow + x] = 0.25 * s;
            }
        }
    }
}

fn fc(weight: &[f64], bias: &[f64], input: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = input.len();
    (0..out_dim)
        .map(|o| {
            let row = &weight[o * in_dim..(o + 1) * in_dim];
            bias[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Forward pass over (base map, extra features); returns head pre-activations
/// and the trace needed for gradients.
pub fn forward(params: &PolicyParams, base: &[f64], extra: &[f64]) -> Trace {
    let cfg = &params.cfg;
    assert_eq!(base.len(), cfg.map_len());
    assert_eq!(extra.len(), cfg.extra_dim);
    let layout = params.layout();
    let p = &params.data;
    let g = |name: &str| &p[layout.range(name)];

    let (h, w) = (cfg.map_h, cfg.map_w);
    let mut z1 = vec![0.0; cfg.conv1_out * h * w];
    conv3x3(base, h, w, cfg.map_c, cfg.conv1_out, g("conv1_w"), g("conv1_b"), &mut z1);
    let a1: Vec<f64> = z1.iter().map(|v| v.tanh()).collect();
    let (h1s, w1s) = (h / 2, w / 2);
    let mut p1 = vec![0.0; cfg.conv1_out * h1s * w1s];
    pool2(&a1, h, w, cfg.conv1_out, &mut p1);

    let mut z2 = vec![0.0; cfg.conv2_out * h1s * w1s];
    conv3x3(&p1, h1s, w1s, cfg.conv1_out, cfg.conv2_out, g("conv2_w"), g("conv2_b"), &mut z2);
    let a2: Vec<f64> = z2.iter().map(|v| v.tanh()).collect();
    let (h2s, w2s) = (h1s / 2, w1s / 2);
    let mut p2 = vec![0.0; cfg.conv2_out * h2s * w2s];
    pool2(&a2, h1s, w1s, cfg.conv2_out, &mut p2);

    let mut concat = p2;
    concat.extend_from_slice(extra);

    let vp_h1: Vec<f64> = fc(g("vp1_w"), g("vp1_b"), &concat, cfg.hidden1)
        .iter()
        .map(|v| v.tanh())
        .collect();
    let vp_h2: Vec<f64> = fc(g("vp2_w"), g("vp2_b"), &vp_h1, cfg.hidden2)
        .iter()
        .map(|v| v.tanh())
        .collect();
    let pre_a = dot(g("az_w"), &vp_h2) + g("az_b")[0];
    let pre_e = dot(g("el_w"), &vp_h2) + g("el_b")[0];

    let cb_h1: Vec<f64> = fc(g("cb1_w"), g("cb1_b"), &concat, cfg.hidden1)
        .iter()
        .map(|v| v.tanh())
        .collect();
    let cb_h2: Vec<f64> = fc(g("cb2_w"), g("cb2_b"), &cb_h1, cfg.hidden2)
        .iter()
        .map(|v| v.tanh())
        .collect();
    let pre_c = dot(g("c_w"), &cb_h2) + g("c_b")[0];

    Trace {
        base: base.to_vec(),
        a1,
        p1,
        a2,
        concat,
        vp_h1,
        vp_h2,
        cb_h1,
        cb_h2,
        heads: HeadPreacts {
            azimuth: pre_a,
            elevation: pre_e,
            cont: pre_c,
        },
    }
}

fn fc_backward(
    weight: &[f64],
    input: &[f64],
    activation: &[f64],
    g_act: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    g_input: &mut [f64],
) {
    // activation = tanh(W input + b); g_act is d loss / d activation
    let in_dim = input.len();
    for (o, (&ga, &a)) in g_act.iter().zip(activation).enumerate() {
        let gz = ga * (1.0 - a * a);
        grad_b[o] += gz;
        let row = &weight[o * in_dim..(o + 1) * in_dim];
        let grow = &mut grad_w[o * in_dim..(o + 1) * in_dim];
        for i in 0..in_dim {
            grow[i] += gz * input[i];
            g_input[i] += gz * row[i];
        }
    }
}

fn conv3x3_backward(
    input: &[f64],
    h: usize,
    w: usize,
    c_in: usize,
    c_out: usize,
    weight: &[f64],
    g_z: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    g_input: Option<&mut [f64]>,
) {
    let ch = h * w;
    let mut g_in = g_input;
    for oc in 0..c_out {
        for y in 0..h {
            for x in 0..w {
                let gz = g_z[oc * ch + y * w + x];
                if gz == 0.0 {
                    continue;
                }
                grad_b[oc] += gz;
                for ic in 0..c_in {
                    let wbase = ((oc * c_in) + ic) * 9;
                    for ky in 0..3usize {
                        let yy = y as isize + ky as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for kx in 0..3usize {
                            let xx = x as isize + kx as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let idx = ic * ch + yy as usize * w + xx as usize;
                            grad_w[wbase + ky * 3 + kx] += gz * input[idx];
                            if let Some(gi) = g_in.as_deref_mut() {
                                gi[idx] += gz * weight[wbase + ky * 3 + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn unpool2(g_out: &[f64], h: usize, w: usize, c: usize, g_in: &mut [f64]) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let g = 0.25 * g_out[ch * oh * ow + y * ow + x];
                for dy in 0..2 {
                    for dx in 0..2 {
                        g_in[ch * h * w + (2 * y + dy) * w + (2 * x + dx)] += g;
                    }
                }
            }
        }
    }
}

/// Reverse-mode accumulation from head-preactivation seeds into a gradient
/// over the flat parameter vector.
pub fn backward(
    params: &PolicyParams,
    trace: &Trace,
    seed_azimuth: f64,
    seed_elevation: f64,
    seed_cont: f64,
    grad: &mut [f64],
) {
    let cfg = &params.cfg;
    let layout = params.layout();
    let p = &params.data;

    let d = cfg.concat_dim();
    let mut g_concat = vec![0.0; d];

    // viewpoint branch (two heads share the penultimate layer)
    {
        let az_w = layout.range("az_w");
        let el_w = layout.range("el_w");
        let mut g_h2 = vec![0.0; cfg.hidden2];
        for i in 0..cfg.hidden2 {
            grad[az_w.start + i] += seed_azimuth * trace.vp_h2[i];
            grad[el_w.start + i] += seed_elevation * trace.vp_h2[i];
            g_h2[i] = seed_azimuth * p[az_w.start + i] + seed_elevation * p[el_w.start + i];
        }
        grad[layout.range("az_b").start] += seed_azimuth;
        grad[layout.range("el_b").start] += seed_elevation;

        let mut g_h1 = vec![0.0; cfg.hidden1];
        let (w2, b2) = (layout.range("vp2_w"), layout.range("vp2_b"));
        let (mut gw2, mut gb2) = (vec![0.0; w2.len()], vec![0.0; b2.len()]);
        fc_backward(&p[w2.clone()], &trace.vp_h1, &trace.vp_h2, &g_h2, &mut gw2, &mut gb2, &mut g_h1);
        grad[w2.clone()].iter_mut().zip(&gw2).for_each(|(a, b)| *a += b);
        grad[b2.clone()].iter_mut().zip(&gb2).for_each(|(a, b)| *a += b);

        let (w1, b1) = (layout.range("vp1_w"), layout.range("vp1_b"));
        let (mut gw1, mut gb1) = (vec![0.0; w1.len()], vec![0.0; b1.len()]);
        fc_backward(&p[w1.clone()], &trace.concat, &trace.vp_h1, &g_h1, &mut gw1, &mut gb1, &mut g_concat);
        grad[w1.clone()].iter_mut().zip(&gw1).for_each(|(a, b)| *a += b);
        grad[b1.clone()].iter_mut().zip(&gb1).for_each(|(a, b)| *a += b);
    }

    // continue branch
    {
        let c_w = layout.range("c_w");
        let mut g_h2 = vec![0.0; cfg.hidden2];
        for i in 0..cfg.hidden2 {
            grad[c_w.start + i] += seed_cont * trace.cb_h2[i];
            g_h2[i] = seed_cont * p[c_w.start + i];
        }
        grad[layout.range("c_b").start] += seed_cont;

        let mut g_h1 = vec![0.0; cfg.hidden1];
        let (w2, b2) = (layout.range("cb2_w"), layout.range("cb2_b"));
        let (mut gw2, mut gb2) = (vec![0.0; w2.len()], vec![0.0; b2.len()]);
        fc_backward(&p[w2.clone()], &trace.cb_h1, &trace.cb_h2, &g_h2, &mut gw2, &mut gb2, &mut g_h1);
        grad[w2.clone()].iter_mut().zip(&gw2).for_each(|(a, b)| *a += b);
        grad[b2.clone()].iter_mut().zip(&gb2).for_each(|(a, b)| *a += b);

        let (w1, b1) = (layout.range("cb1_w"), layout.range("cb1_b"));
        let (mut gw1, mut gb1) = (vec![0.0; w1.len()], vec![0.0; b1.len()]);
        fc_backward(&p[w1.clone()], &trace.concat, &trace.cb_h1, &g_h1, &mut gw1, &mut gb1, &mut g_concat);
        grad[w1.clone()].iter_mut().zip(&gw1).for_each(|(a, b)| *a += b);
        grad[b1.clone()].iter_mut().zip(&gb1).for_each(|(a, b)| *a += b);
    }

    // shared trunk: only the pooled-map slice of the concat carries gradient
    let trunk_out = cfg.trunk_out();
    let (h, w) = (cfg.map_h, cfg.map_w);
    let (h1s, w1s) = (h / 2, w / 2);

    let mut g_a2 = vec![0.0; cfg.conv2_out * h1s * w1s];
    unpool2(&g_concat[..trunk_out], h1s, w1s, cfg.conv2_out, &mut g_a2);
    let g_z2: Vec<f64> = g_a2
        .iter()
        .zip(&trace.a2)
        .map(|(g, a)| g * (1.0 - a * a))
        .collect();

    let (w2, b2) = (layout.range("conv2_w"), layout.range("conv2_b"));
    let (mut gw2, mut gb2) = (vec![0.0; w2.len()], vec![0.0; b2.len()]);
    let mut g_p1 = vec![0.0; cfg.conv1_out * h1s * w1s];
    conv3x3_backward(
        &trace.p1,
        h1s,
        w1s,
        cfg.conv1_out,
        cfg.conv2_out,
        &p[w2.clone()],
        &g_z2,
        &mut gw2,
        &mut gb2,
        Some(&mut g_p1),
    );
    grad[w2.clone()].iter_mut().zip(&gw2).for_each(|(a, b)| *a += b);
    grad[b2.clone()].iter_mut().zip(&gb2).for_each(|(a, b)| *a += b);

    let mut g_a1 = vec![0.0; cfg.conv1_out * h * w];
    unpool2(&g_p1, h, w, cfg.conv1_out, &mut g_a1);
    let g_z1: Vec<f64> = g_a1
        .iter()
        .zip(&trace.a1)
        .map(|(g, a)| g * (1.0 - a * a))
        .collect();

    let (w1, b1) = (layout.range("conv1_w"), layout.range("conv1_b"));
    let (mut gw1, mut gb1) = (vec![0.0; w1.len()], vec![0.0; b1.len()]);
    conv3x3_backward(
        &trace.base,
        h,
        w,
        cfg.map_c,
        cfg.conv1_out,
        &p[w1.clone()],
        &g_z1,
        &mut gw1,
        &mut gb1,
        None,
    );
    grad[w1.clone()].iter_mut().zip(&gw1).for_each(|(a, b)| *a += b);
    grad[b1.clone()].iter_mut().zip(&gb1).for_each(|(a, b)| *a += b);
}
