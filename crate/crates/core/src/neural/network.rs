use std::str::FromStr;

use rand::Rng as _;

use super::kernels::{gemm_nn, gemm_nt, gemm_tn, relu_backward, relu_forward, row_sums};
use super::topology::{LayerSpec, Topology};
use crate::error::{Error, Result};
use crate::scalar::{seeded_rng, Scalar};

/// Memory order of a batch of spatial activations.
///
/// `Nchw` keeps each sample contiguous (network input, dense activations);
/// convolution outputs are `Cnhw` so that one matrix product covers the batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Nchw,
    Cnhw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ActShape {
    c: usize,
    h: usize,
    w: usize,
    layout: Layout,
}

impl ActShape {
    fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    /// (batch stride, channel stride) for a batch of `batch` samples.
    fn strides(&self, batch: usize) -> (usize, usize) {
        match self.layout {
            Layout::Nchw => (self.len(), self.h * self.w),
            Layout::Cnhw => (self.h * self.w, batch * self.h * self.w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layer {
    Conv {
        kernel: usize,
        stride: usize,
        w_off: usize,
        b_off: usize,
    },
    Dense {
        w_off: usize,
        b_off: Option<usize>,
    },
    Relu,
}

/// Weight initialisation schemes. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// `U(-sqrt(3 / fan_in), sqrt(3 / fan_in))`, i.e. variance `1 / fan_in`.
    FanInUniform,
    Zero,
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fan_in_uniform" => Ok(Self::FanInUniform),
            "zero" => Ok(Self::Zero),
            other => Err(Error::Config(format!("unknown init scheme `{other}`"))),
        }
    }
}

/// Flat gradient array congruent with a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer<F>(Vec<F>);

impl<F: Scalar> GradientBuffer<F> {
    pub fn new(len: usize) -> Self {
        Self(vec![F::zero(); len])
    }

    pub fn for_network(net: &QNetwork<F>) -> Self {
        Self::new(net.num_params())
    }

    pub fn zero(&mut self) {
        self.0.fill(F::zero());
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.0
    }
}

/// Value copy of a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSnapshot<F>(pub Vec<F>);

/// Activation and gradient scratch space for one network shape, sized for up
/// to `max_batch` samples. Forward and backward passes through a workspace
/// never allocate.
#[derive(Debug, Clone)]
pub struct Workspace<F> {
    max_batch: usize,
    shapes: Vec<ActShape>,
    acts: Vec<Vec<F>>,
    dacts: Vec<Vec<F>>,
    cols: Vec<Vec<F>>,
    dcols: Vec<F>,
    flat: Vec<Vec<F>>,
    dflat: Vec<F>,
    batch: usize,
    cached: bool,
}

impl<F: Scalar> Workspace<F> {
    pub fn new(net: &QNetwork<F>, max_batch: usize) -> Self {
        assert!(max_batch >= 1, "workspace needs room for one sample");
        let shapes = net.shapes.clone();
        let acts = shapes.iter().map(|s| vec![F::zero(); max_batch * s.len()]).collect();
        let dacts = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| if i == 0 { Vec::new() } else { vec![F::zero(); max_batch * s.len()] })
            .collect();
        let mut cols = Vec::with_capacity(net.layers.len());
        let mut flat = Vec::with_capacity(net.layers.len());
        let mut dcols_len = 0;
        let mut dflat_len = 0;
        for (i, layer) in net.layers.iter().enumerate() {
            let (sin, sout) = (shapes[i], shapes[i + 1]);
            match layer {
                Layer::Conv { kernel, .. } => {
                    let len = sin.c * kernel * kernel * sout.h * sout.w * max_batch;
                    cols.push(vec![F::zero(); len]);
                    flat.push(Vec::new());
                    if i > 0 {
                        dcols_len = dcols_len.max(len);
                    }
                }
                Layer::Dense { .. } if sin.layout == Layout::Cnhw => {
                    cols.push(Vec::new());
                    flat.push(vec![F::zero(); max_batch * sin.len()]);
                    dflat_len = dflat_len.max(max_batch * sin.len());
                }
                _ => {
                    cols.push(Vec::new());
                    flat.push(Vec::new());
                }
            }
        }
        Self {
            max_batch,
            shapes,
            acts,
            dacts,
            cols,
            dcols: vec![F::zero(); dcols_len],
            flat,
            dflat: vec![F::zero(); dflat_len],
            batch: 0,
            cached: false,
        }
    }

    pub fn max_batch(&self) -> usize {
        self.max_batch
    }

    /// Activation `i` of the cached forward pass (0 is the input, `i` the
    /// output of layer `i - 1`), laid out as the layers store it.
    pub fn activation(&self, i: usize) -> &[F] {
        &self.acts[i][..self.batch * self.shapes[i].len()]
    }

    /// Drops the cached forward pass.
    pub fn invalidate(&mut self) {
        self.cached = false;
    }
}

/// Layered Q-function approximator whose weights and biases live in one flat
/// parameter vector; layers address it by offset.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<F> {
    topology: Topology,
    layers: Vec<Layer>,
    shapes: Vec<ActShape>,
    params: Vec<F>,
}

impl<F: Scalar> QNetwork<F> {
    /// Builds a network with all-zero parameters.
    pub fn new(topology: Topology) -> Result<Self> {
        let bad = |msg: String| Error::Config(format!("topology {topology}: {msg}"));
        if topology.input_len() == 0 || topology.layers.is_empty() {
            return Err(bad("empty input or no layers".into()));
        }
        let mut shape = ActShape {
            c: topology.channels,
            h: topology.height,
            w: topology.width,
            layout: Layout::Nchw,
        };
        let mut shapes = vec![shape];
        let mut layers = Vec::new();
        let mut offset = 0;
        for spec in &topology.layers {
            let (layer, out) = match *spec {
                LayerSpec::Conv { filters, kernel, stride } => {
                    if filters == 0 || kernel == 0 || stride == 0 || kernel > shape.h || kernel > shape.w {
                        return Err(bad(format!("conv {filters}@{kernel}/{stride} does not fit {}x{}", shape.h, shape.w)));
                    }
                    let w_off = offset;
                    offset += filters * shape.c * kernel * kernel;
                    let b_off = offset;
                    offset += filters;
                    let out = ActShape {
                        c: filters,
                        h: (shape.h - kernel) / stride + 1,
                        w: (shape.w - kernel) / stride + 1,
                        layout: Layout::Cnhw,
                    };
                    (Layer::Conv { kernel, stride, w_off, b_off }, out)
                }
                LayerSpec::Dense { units, bias } => {
                    if units == 0 {
                        return Err(bad("dense layer with no units".into()));
                    }
                    let w_off = offset;
                    offset += shape.len() * units;
                    let b_off = bias.then(|| {
                        let b = offset;
                        offset += units;
                        b
                    });
                    let out = ActShape { c: units, h: 1, w: 1, layout: Layout::Nchw };
                    (Layer::Dense { w_off, b_off }, out)
                }
                LayerSpec::Relu => (Layer::Relu, shape),
            };
            layers.push(layer);
            shapes.push(out);
            shape = out;
        }
        Ok(Self {
            topology,
            layers,
            shapes,
            params: vec![F::zero(); offset],
        })
    }

    pub fn with_init(topology: Topology, scheme: InitScheme, seed: u64) -> Result<Self> {
        let mut net = Self::new(topology)?;
        net.init_params(scheme, seed);
        Ok(net)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn input_len(&self) -> usize {
        self.shapes[0].len()
    }

    pub fn num_actions(&self) -> usize {
        self.shapes.last().expect("at least one layer").len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// The flat parameter vector. Layer weights are views into it.
    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn clone_params(&self) -> ParamSnapshot<F> {
        ParamSnapshot(self.params.clone())
    }

    pub fn load_params(&mut self, snapshot: &ParamSnapshot<F>) -> Result<()> {
        self.load_slice(&snapshot.0)
    }

    pub fn load_slice(&mut self, values: &[F]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Shape {
                expected: format!("{} parameters", self.params.len()),
                actual: format!("{} parameters", values.len()),
            });
        }
        self.params.copy_from_slice(values);
        Ok(())
    }

    /// Copies another network's parameters in place (target-network sync).
    pub fn copy_params_from(&mut self, other: &QNetwork<F>) -> Result<()> {
        self.load_slice(&other.params)
    }

    pub fn init_params(&mut self, scheme: InitScheme, seed: u64) {
        self.params.fill(F::zero());
        if scheme == InitScheme::Zero {
            return;
        }
        let mut rng = seeded_rng(seed);
        for (i, layer) in self.layers.iter().enumerate() {
            let sin = self.shapes[i];
            let (w_off, count, fan_in) = match *layer {
                Layer::Conv { kernel, w_off, .. } => {
                    let fan_in = sin.c * kernel * kernel;
                    (w_off, fan_in * self.shapes[i + 1].c, fan_in)
                }
                Layer::Dense { w_off, .. } => (w_off, sin.len() * self.shapes[i + 1].len(), sin.len()),
                Layer::Relu => continue,
            };
            let bound = (3.0 / fan_in as f64).sqrt();
            for w in &mut self.params[w_off..w_off + count] {
                *w = F::of(rng.random_range(-bound..bound));
            }
        }
    }

    fn check_workspace(&self, ws: &Workspace<F>, batch: usize) -> Result<()> {
        if ws.shapes != self.shapes {
            return Err(Error::Shape {
                expected: format!("workspace for {}", self.topology),
                actual: "workspace built for another topology".into(),
            });
        }
        if batch == 0 || batch > ws.max_batch {
            return Err(Error::Shape {
                expected: format!("batch in 1..={}", ws.max_batch),
                actual: format!("batch {batch}"),
            });
        }
        Ok(())
    }

    /// Forward pass over `batch` inputs laid out sample-major (each sample
    /// `channels x height x width`). Returns `batch x num_actions` values and
    /// caches activations for [`backward`](Self::backward).
    pub fn forward<'w>(&self, ws: &'w mut Workspace<F>, input: &[F], batch: usize) -> Result<&'w [F]> {
        self.check_workspace(ws, batch)?;
        let n_in = self.input_len();
        if input.len() != batch * n_in {
            return Err(Error::Shape {
                expected: format!("{} inputs ({batch} x {n_in})", batch * n_in),
                actual: format!("{} inputs", input.len()),
            });
        }
        ws.cached = false;
        let Workspace { acts, cols, flat, .. } = ws;
        acts[0][..batch * n_in].copy_from_slice(input);
        for (i, layer) in self.layers.iter().enumerate() {
            let (sin, sout) = (self.shapes[i], self.shapes[i + 1]);
            let (lo, hi) = acts.split_at_mut(i + 1);
            let x = &lo[i][..batch * sin.len()];
            let y = &mut hi[0][..batch * sout.len()];
            match *layer {
                Layer::Conv { kernel, stride, w_off, b_off } => {
                    let ckk = sin.c * kernel * kernel;
                    let bp = batch * sout.h * sout.w;
                    let cols = &mut cols[i][..ckk * bp];
                    im2col(x, sin, batch, kernel, stride, sout, cols);
                    let w = &self.params[w_off..w_off + sout.c * ckk];
                    gemm_nn(sout.c, ckk, bp, w, ckk, cols, bp, y, bp, false);
                    for (oc, row) in y.chunks_exact_mut(bp).enumerate() {
                        let b = self.params[b_off + oc];
                        row.iter_mut().for_each(|v| *v += b);
                    }
                }
                Layer::Dense { w_off, b_off } => {
                    let (inp, out) = (sin.len(), sout.len());
                    let xin: &[F] = if sin.layout == Layout::Cnhw {
                        let buf = &mut flat[i][..batch * inp];
                        cnhw_to_nchw(x, sin, batch, buf);
                        buf
                    } else {
                        x
                    };
                    let w = &self.params[w_off..w_off + inp * out];
                    gemm_nn(batch, inp, out, xin, inp, w, out, y, out, false);
                    if let Some(b_off) = b_off {
                        let bias = &self.params[b_off..b_off + out];
                        for row in y.chunks_exact_mut(out) {
                            row.iter_mut().zip(bias).for_each(|(v, &b)| *v += b);
                        }
                    }
                }
                Layer::Relu => relu_forward(x, y),
            }
        }
        ws.batch = batch;
        ws.cached = true;
        let last = self.layers.len();
        Ok(&ws.acts[last][..batch * self.num_actions()])
    }

    /// Action values for a single input.
    pub fn q_values<'w>(&self, ws: &'w mut Workspace<F>, input: &[F]) -> Result<&'w [F]> {
        self.forward(ws, input, 1)
    }

    /// Gradient of `sum(output * output_grad)` with respect to the parameters,
    /// for the batch cached by the last [`forward`](Self::forward). Overwrites `grads`.
    pub fn backward(&self, ws: &mut Workspace<F>, output_grad: &[F], grads: &mut GradientBuffer<F>) -> Result<()> {
        if !ws.cached || ws.shapes != self.shapes {
            return Err(Error::NoForwardCache);
        }
        let batch = ws.batch;
        let n_out = batch * self.num_actions();
        if output_grad.len() != n_out {
            return Err(Error::Shape {
                expected: format!("{n_out} output gradients"),
                actual: format!("{}", output_grad.len()),
            });
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape {
                expected: format!("{} gradient entries", self.params.len()),
                actual: format!("{}", grads.len()),
            });
        }
        let Workspace { acts, dacts, cols, dcols, flat, dflat, .. } = ws;
        let last = self.layers.len();
        dacts[last][..n_out].copy_from_slice(output_grad);
        let g = &mut grads.0;

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (sin, sout) = (self.shapes[i], self.shapes[i + 1]);
            let need_dx = i > 0;
            let (dlo, dhi) = dacts.split_at_mut(i + 1);
            let dy = &dhi[0][..batch * sout.len()];
            match *layer {
                Layer::Conv { kernel, stride, w_off, b_off } => {
                    let ckk = sin.c * kernel * kernel;
                    let bp = batch * sout.h * sout.w;
                    let cols = &cols[i][..ckk * bp];
                    gemm_nt(sout.c, bp, ckk, dy, bp, cols, bp, &mut g[w_off..w_off + sout.c * ckk], ckk, false);
                    row_sums(sout.c, bp, dy, &mut g[b_off..b_off + sout.c]);
                    if need_dx {
                        let w = &self.params[w_off..w_off + sout.c * ckk];
                        let dcols = &mut dcols[..ckk * bp];
                        gemm_tn(ckk, sout.c, bp, w, ckk, dy, bp, dcols, bp, false);
                        col2im(dcols, sin, batch, kernel, stride, sout, &mut dlo[i][..batch * sin.len()]);
                    }
                }
                Layer::Dense { w_off, b_off } => {
                    let (inp, out) = (sin.len(), sout.len());
                    let x: &[F] = if sin.layout == Layout::Cnhw {
                        &flat[i][..batch * inp]
                    } else {
                        &acts[i][..batch * inp]
                    };
                    gemm_tn(inp, batch, out, x, inp, dy, out, &mut g[w_off..w_off + inp * out], out, false);
                    if let Some(b_off) = b_off {
                        let db = &mut g[b_off..b_off + out];
                        db.fill(F::zero());
                        for row in dy.chunks_exact(out) {
                            db.iter_mut().zip(row).for_each(|(d, &v)| *d += v);
                        }
                    }
                    if need_dx {
                        let w = &self.params[w_off..w_off + inp * out];
                        if sin.layout == Layout::Cnhw {
                            let buf = &mut dflat[..batch * inp];
                            gemm_nt(batch, out, inp, dy, out, w, out, buf, inp, false);
                            nchw_to_cnhw(buf, sin, batch, &mut dlo[i][..batch * inp]);
                        } else {
                            gemm_nt(batch, out, inp, dy, out, w, out, &mut dlo[i][..batch * inp], inp, false);
                        }
                    }
                }
                Layer::Relu => {
                    if need_dx {
                        relu_backward(&acts[i + 1][..batch * sout.len()], dy, &mut dlo[i][..batch * sin.len()]);
                    }
                }
            }
        }
        Ok(())
    }
}

fn im2col<F: Scalar>(x: &[F], sin: ActShape, batch: usize, k: usize, stride: usize, sout: ActShape, cols: &mut [F]) {
    let (bs, cs) = sin.strides(batch);
    let (oh, ow) = (sout.h, sout.w);
    let p = oh * ow;
    let bp = batch * p;
    for c in 0..sin.c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * bp..(row + 1) * bp];
                for b in 0..batch {
                    let base = b * bs + c * cs;
                    for oy in 0..oh {
                        let src = base + (oy * stride + ky) * sin.w + kx;
                        let d = &mut dst[b * p + oy * ow..b * p + (oy + 1) * ow];
                        if stride == 1 {
                            d.copy_from_slice(&x[src..src + ow]);
                        } else {
                            for (ox, v) in d.iter_mut().enumerate() {
                                *v = x[src + ox * stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn col2im<F: Scalar>(dcols: &[F], sin: ActShape, batch: usize, k: usize, stride: usize, sout: ActShape, dx: &mut [F]) {
    dx.fill(F::zero());
    let (bs, cs) = sin.strides(batch);
    let (oh, ow) = (sout.h, sout.w);
    let p = oh * ow;
    let bp = batch * p;
    for c in 0..sin.c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &dcols[row * bp..(row + 1) * bp];
                for b in 0..batch {
                    let base = b * bs + c * cs;
                    for oy in 0..oh {
                        let dst = base + (oy * stride + ky) * sin.w + kx;
                        let s = &src[b * p + oy * ow..b * p + (oy + 1) * ow];
                        for (ox, &v) in s.iter().enumerate() {
                            dx[dst + ox * stride] += v;
                        }
                    }
                }
            }
        }
    }
}

fn cnhw_to_nchw<F: Scalar>(x: &[F], s: ActShape, batch: usize, out: &mut [F]) {
    let p = s.h * s.w;
    for c in 0..s.c {
        for b in 0..batch {
            out[b * s.len() + c * p..b * s.len() + (c + 1) * p]
                .copy_from_slice(&x[(c * batch + b) * p..(c * batch + b + 1) * p]);
        }
    }
}

fn nchw_to_cnhw<F: Scalar>(x: &[F], s: ActShape, batch: usize, out: &mut [F]) {
    let p = s.h * s.w;
    for c in 0..s.c {
        for b in 0..batch {
            out[(c * batch + b) * p..(c * batch + b + 1) * p]
                .copy_from_slice(&x[b * s.len() + c * p..b * s.len() + (c + 1) * p]);
        }
    }
}
