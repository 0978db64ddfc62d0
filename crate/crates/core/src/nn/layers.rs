use serde::{Deserialize, Serialize};

use super::param::{Grads, ParamId, ParamStore};
use super::tensor::Mat;
use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Fully connected layer, weights stored `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inp: usize,
    pub out: usize,
}

impl Dense {
    pub fn new(store: &mut ParamStore, name: &str, inp: usize, out: usize, init: &RngStream) -> Self {
        let w = store.glorot(format!("{name}.w"), vec![out, inp], inp, out, init);
        let b = store.zeros(format!("{name}.b"), vec![out]);
        Self { w, b, inp, out }
    }

    pub fn forward(&self, store: &ParamStore, x: &Mat) -> Mat {
        assert_eq!(x.cols, self.inp, "dense input width");
        let w = store.get(self.w);
        let b = store.get(self.b);
        let mut y = Mat::zeros(x.rows, self.out);
        for r in 0..x.rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for (o, yo) in yr.iter_mut().enumerate() {
                let wr = &w[o * self.inp..(o + 1) * self.inp];
                *yo = b[o] + wr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        y
    }

    /// Accumulates parameter gradients and returns `∂L/∂x`.
    pub fn backward(&self, store: &ParamStore, x: &Mat, dy: &Mat, grads: &mut Grads) -> Mat {
        let w = store.get(self.w);
        {
            let gw = grads.get_mut(self.w);
            for r in 0..x.rows {
                let xr = x.row(r);
                let dyr = dy.row(r);
                for (o, &d) in dyr.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let g = &mut gw[o * self.inp..(o + 1) * self.inp];
                    for (gi, xi) in g.iter_mut().zip(xr) {
                        *gi += d * xi;
                    }
                }
            }
        }
        {
            let gb = grads.get_mut(self.b);
            for r in 0..dy.rows {
                for (g, d) in gb.iter_mut().zip(dy.row(r)) {
                    *g += d;
                }
            }
        }
        let mut dx = Mat::zeros(x.rows, self.inp);
        for r in 0..x.rows {
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for (o, &d) in dyr.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let wr = &w[o * self.inp..(o + 1) * self.inp];
                for (g, wi) in dxr.iter_mut().zip(wr) {
                    *g += d * wi;
                }
            }
        }
        dx
    }
}

/// Same-padded 1-D convolution over rows laid out `[channel][position]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub len: usize,
}

impl Conv1d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        len: usize,
        init: &RngStream,
    ) -> Self {
        assert!(kernel % 2 == 1, "conv kernel must be odd for same padding");
        let w = store.glorot(
            format!("{name}.w"),
            vec![out_ch, in_ch, kernel],
            in_ch * kernel,
            out_ch * kernel,
            init,
        );
        let b = store.zeros(format!("{name}.b"), vec![out_ch]);
        Self {
            w,
            b,
            in_ch,
            out_ch,
            kernel,
            len,
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Mat) -> Mat {
        let (ci, co, k, l) = (self.in_ch, self.out_ch, self.kernel, self.len);
        assert_eq!(x.cols, ci * l, "conv input width");
        let pad = k / 2;
        let w = store.get(self.w);
        let b = store.get(self.b);
        let mut y = Mat::zeros(x.rows, co * l);
        for r in 0..x.rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for o in 0..co {
                let yo = &mut yr[o * l..(o + 1) * l];
                yo.iter_mut().for_each(|v| *v = b[o]);
                for c in 0..ci {
                    let xc = &xr[c * l..(c + 1) * l];
                    for j in 0..k {
                        let wv = w[(o * ci + c) * k + j];
                        // y[p] += w * x[p + j - pad]
                        let lo = pad.saturating_sub(j);
                        let hi = (l + pad).saturating_sub(j).min(l);
                        for p in lo..hi {
                            yo[p] += wv * xc[p + j - pad];
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(&self, store: &ParamStore, x: &Mat, dy: &Mat, grads: &mut Grads) -> Mat {
        let (ci, co, k, l) = (self.in_ch, self.out_ch, self.kernel, self.len);
        let pad = k / 2;
        let w = store.get(self.w);
        let mut dx = Mat::zeros(x.rows, ci * l);
        {
            let gb = grads.get_mut(self.b);
            for r in 0..dy.rows {
                let dyr = dy.row(r);
                for o in 0..co {
                    gb[o] += dyr[o * l..(o + 1) * l].iter().sum::<f64>();
                }
            }
        }
        let gw = grads.get_mut(self.w);
        for r in 0..x.rows {
            let xr = x.row(r);
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for o in 0..co {
                let dyo = &dyr[o * l..(o + 1) * l];
                for c in 0..ci {
                    let xc = &xr[c * l..(c + 1) * l];
                    for j in 0..k {
                        let idx = (o * ci + c) * k + j;
                        let wv = w[idx];
                        let lo = pad.saturating_sub(j);
                        let hi = (l + pad).saturating_sub(j).min(l);
                        let mut gsum = 0.0;
                        for p in lo..hi {
                            gsum += dyo[p] * xc[p + j - pad];
                            dxr[c * l + p + j - pad] += wv * dyo[p];
                        }
                        gw[idx] += gsum;
                    }
                }
            }
        }
        dx
    }
}

/// Per-row layer normalization with learned gain and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub dim: usize,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gamma = store.add(format!("{name}.gamma"), vec![dim], vec![1.0; dim]);
        let beta = store.zeros(format!("{name}.beta"), vec![dim]);
        Self {
            gamma,
            beta,
            dim,
            eps: 1e-5,
        }
    }

    fn stats(&self, row: &[f64]) -> (f64, f64) {
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, 1.0 / (var + self.eps).sqrt())
    }

    pub fn forward(&self, store: &ParamStore, x: &Mat) -> Mat {
        let g = store.get(self.gamma);
        let b = store.get(self.beta);
        let mut y = Mat::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let (mean, inv) = self.stats(x.row(r));
            for (i, (yo, xi)) in y.row_mut(r).iter_mut().zip(x.row(r)).enumerate() {
                *yo = g[i] * (xi - mean) * inv + b[i];
            }
        }
        y
    }

    pub fn backward(&self, store: &ParamStore, x: &Mat, dy: &Mat, grads: &mut Grads) -> Mat {
        let g = store.get(self.gamma).to_vec();
        let n = self.dim as f64;
        let mut dx = Mat::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            let (mean, inv) = self.stats(x.row(r));
            let xhat: Vec<f64> = x.row(r).iter().map(|v| (v - mean) * inv).collect();
            let dyr = dy.row(r);
            {
                let gg = grads.get_mut(self.gamma);
                for i in 0..self.dim {
                    gg[i] += dyr[i] * xhat[i];
                }
            }
            {
                let gb = grads.get_mut(self.beta);
                for i in 0..self.dim {
                    gb[i] += dyr[i];
                }
            }
            let dxhat: Vec<f64> = (0..self.dim).map(|i| dyr[i] * g[i]).collect();
            let s1: f64 = dxhat.iter().sum();
            let s2: f64 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum();
            for (i, d) in dx.row_mut(r).iter_mut().enumerate() {
                *d = inv / n * (n * dxhat[i] - s1 - xhat[i] * s2);
            }
        }
        dx
    }
}

pub fn relu(x: &Mat) -> Mat {
    Mat::from_vec(x.rows, x.cols, x.data.iter().map(|v| v.max(0.0)).collect())
}

pub fn relu_backward(x: &Mat, dy: &Mat) -> Mat {
    Mat::from_vec(
        x.rows,
        x.cols,
        x.data
            .iter()
            .zip(&dy.data)
            .map(|(v, d)| if *v > 0.0 { *d } else { 0.0 })
            .collect(),
    )
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn silu(x: &Mat) -> Mat {
    Mat::from_vec(x.rows, x.cols, x.data.iter().map(|&v| v * sigmoid(v)).collect())
}

pub fn silu_backward(x: &Mat, dy: &Mat) -> Mat {
    Mat::from_vec(
        x.rows,
        x.cols,
        x.data
            .iter()
            .zip(&dy.data)
            .map(|(&v, d)| {
                let s = sigmoid(v);
                d * (s + v * s * (1.0 - s))
            })
            .collect(),
    )
}

/// Declarative layer description; [`Sequential::build`] checks that widths
/// chain and allocates the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense { inp: usize, out: usize },
    Conv1d { in_ch: usize, out_ch: usize, kernel: usize, len: usize },
    Relu,
    Silu,
    GlobalAvgPool { channels: usize, len: usize },
    LayerNorm { dim: usize },
    /// `y = x + f(x)`; the body must preserve width.
    Residual(Vec<LayerSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    Relu,
    Silu,
    GlobalAvgPool { channels: usize, len: usize },
    LayerNorm(LayerNorm),
    Residual(Sequential),
}

/// A chain of layers with fixed input and output widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    layers: Vec<Layer>,
    pub in_width: usize,
    pub out_width: usize,
}

/// Activations saved by [`Sequential::forward`] for the reverse pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Mat>,
    nested: Vec<Option<Tape>>,
}

impl Sequential {
    pub fn build(
        store: &mut ParamStore,
        name: &str,
        in_width: usize,
        specs: &[LayerSpec],
        init: &RngStream,
    ) -> Result<Self> {
        let mut width = in_width;
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let lname = format!("{name}.{i}");
            let mismatch = |expected: usize| Error::Shape {
                layer: i,
                detail: format!("expects input width {expected}, previous layer gives {width}"),
            };
            let layer = match spec {
                LayerSpec::Dense { inp, out } => {
                    if *inp != width {
                        return Err(mismatch(*inp));
                    }
                    width = *out;
                    Layer::Dense(Dense::new(store, &lname, *inp, *out, init))
                }
                LayerSpec::Conv1d {
                    in_ch,
                    out_ch,
                    kernel,
                    len,
                } => {
                    if in_ch * len != width {
                        return Err(mismatch(in_ch * len));
                    }
                    if kernel % 2 == 0 {
                        return Err(Error::Shape {
                            layer: i,
                            detail: "convolution kernel must be odd".into(),
                        });
                    }
                    width = out_ch * len;
                    Layer::Conv1d(Conv1d::new(store, &lname, *in_ch, *out_ch, *kernel, *len, init))
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Silu => Layer::Silu,
                LayerSpec::GlobalAvgPool { channels, len } => {
                    if channels * len != width {
                        return Err(mismatch(channels * len));
                    }
                    width = *channels;
                    Layer::GlobalAvgPool {
                        channels: *channels,
                        len: *len,
                    }
                }
                LayerSpec::LayerNorm { dim } => {
                    if *dim != width {
                        return Err(mismatch(*dim));
                    }
                    Layer::LayerNorm(LayerNorm::new(store, &lname, *dim))
                }
                LayerSpec::Residual(body) => {
                    let inner = Sequential::build(store, &lname, width, body, init)?;
                    if inner.out_width != width {
                        return Err(Error::Shape {
                            layer: i,
                            detail: format!(
                                "residual body maps {width} to {}, widths must match",
                                inner.out_width
                            ),
                        });
                    }
                    Layer::Residual(inner)
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            layers,
            in_width,
            out_width: width,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Mat) -> Result<(Mat, Tape)> {
        if x.cols != self.in_width {
            return Err(Error::Shape {
                layer: 0,
                detail: format!("network expects width {}, got {}", self.in_width, x.cols),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut nested = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let (next, inner) = match layer {
                Layer::Dense(d) => (d.forward(store, &cur), None),
                Layer::Conv1d(c) => (c.forward(store, &cur), None),
                Layer::Relu => (relu(&cur), None),
                Layer::Silu => (silu(&cur), None),
                Layer::GlobalAvgPool { channels, len } => (avg_pool(&cur, *channels, *len), None),
                Layer::LayerNorm(n) => (n.forward(store, &cur), None),
                Layer::Residual(body) => {
                    let (mut y, tape) = body.forward(store, &cur)?;
                    y.add_assign(&cur);
                    (y, Some(tape))
                }
            };
            inputs.push(std::mem::replace(&mut cur, next));
            nested.push(inner);
        }
        Ok((cur, Tape { inputs, nested }))
    }

    /// Inference-only forward pass.
    pub fn apply(&self, store: &ParamStore, x: &Mat) -> Result<Mat> {
        Ok(self.forward(store, x)?.0)
    }

    pub fn backward(
        &self,
        store: &ParamStore,
        tape: &Tape,
        dy: &Mat,
        grads: &mut Grads,
    ) -> Result<Mat> {
        if tape.inputs.len() != self.layers.len() {
            return Err(Error::State(
                "backward called without a matching forward tape".into(),
            ));
        }
        if dy.cols != self.out_width {
            return Err(Error::Shape {
                layer: self.layers.len().saturating_sub(1),
                detail: format!("output gradient width {} != {}", dy.cols, self.out_width),
            });
        }
        let mut g = dy.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &tape.inputs[i];
            g = match layer {
                Layer::Dense(d) => d.backward(store, x, &g, grads),
                Layer::Conv1d(c) => c.backward(store, x, &g, grads),
                Layer::Relu => relu_backward(x, &g),
                Layer::Silu => silu_backward(x, &g),
                Layer::GlobalAvgPool { channels, len } => avg_pool_backward(&g, *channels, *len),
                Layer::LayerNorm(n) => n.backward(store, x, &g, grads),
                Layer::Residual(body) => {
                    let inner = tape.nested[i]
                        .as_ref()
                        .ok_or_else(|| Error::State("missing residual tape".into()))?;
                    let mut dx = body.backward(store, inner, &g, grads)?;
                    dx.add_assign(&g);
                    dx
                }
            };
        }
        Ok(g)
    }
}

fn avg_pool(x: &Mat, channels: usize, len: usize) -> Mat {
    let mut y = Mat::zeros(x.rows, channels);
    for r in 0..x.rows {
        let xr = x.row(r);
        for (c, yc) in y.row_mut(r).iter_mut().enumerate() {
            *yc = xr[c * len..(c + 1) * len].iter().sum::<f64>() / len as f64;
        }
    }
    y
}

fn avg_pool_backward(dy: &Mat, channels: usize, len: usize) -> Mat {
    let mut dx = Mat::zeros(dy.rows, channels * len);
    for r in 0..dy.rows {
        let d = dy.row(r).to_vec();
        let dxr = dx.row_mut(r);
        for c in 0..channels {
            let v = d[c] / len as f64;
            dxr[c * len..(c + 1) * len].iter_mut().for_each(|x| *x = v);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::check_gradients;

    fn init() -> RngStream {
        RngStream::new(11, "init")
    }

    fn random_mat(rows: usize, cols: usize, label: &str) -> Mat {
        Mat::from_vec(rows, cols, RngStream::new(12, label).gaussian(rows * cols))
    }

    /// Loss `Σ y ⊙ probe` so the output gradient is the fixed probe.
    fn probe_check(net: &Sequential, store: &mut ParamStore, x: &Mat) -> f64 {
        let probe = random_mat(x.rows, net.out_width, "probe");
        let (y, tape) = net.forward(store, x).unwrap();
        assert_eq!(y.cols, net.out_width);
        let mut grads = store.zero_grads();
        net.backward(store, &tape, &probe, &mut grads).unwrap();
        let loss = |s: &ParamStore| -> f64 {
            let y = net.apply(s, x).unwrap();
            y.data.iter().zip(&probe.data).map(|(a, b)| a * b).sum()
        };
        check_gradients(store, &grads, loss, 20, 1e-5, &RngStream::new(3, "pick")).max_rel_error
    }

    #[test]
    fn identity_dense_passes_input_through() {
        let mut store = ParamStore::new();
        let net = Sequential::build(&mut store, "id", 4, &[LayerSpec::Dense { inp: 4, out: 4 }], &init()).unwrap();
        let w = store.get_mut(ParamId(0));
        for (i, v) in w.iter_mut().enumerate() {
            *v = if i % 5 == 0 { 1.0 } else { 0.0 };
        }
        let x = random_mat(3, 4, "x");
        assert_eq!(net.apply(&store, &x).unwrap(), x);
    }

    #[test]
    fn relu_of_negative_is_zero() {
        let x = Mat::from_vec(1, 3, vec![-1.0, -0.5, -2.0]);
        assert!(relu(&x).data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_kernel_convolution_is_identity() {
        let mut store = ParamStore::new();
        let conv = Conv1d::new(&mut store, "c", 2, 2, 3, 5, &init());
        let w = store.get_mut(conv.w);
        w.iter_mut().for_each(|v| *v = 0.0);
        // w[o][c][j]: centre tap on matching channels.
        for ch in 0..2 {
            w[(ch * 2 + ch) * 3 + 1] = 1.0;
        }
        let x = random_mat(2, 10, "x");
        assert_eq!(conv.forward(&store, &x), x);
    }

    #[test]
    fn linear_net_gradient_matches_closed_form() {
        // L = ½‖XWᵀ + b − Y‖²  ⇒  ∂L/∂W = (XWᵀ + b − Y)ᵀ X.
        let mut store = ParamStore::new();
        let net = Sequential::build(&mut store, "lin", 3, &[LayerSpec::Dense { inp: 3, out: 2 }], &init()).unwrap();
        let x = random_mat(5, 3, "x");
        let target = random_mat(5, 2, "y");
        let (y, tape) = net.forward(&store, &x).unwrap();
        let resid = Mat::from_vec(5, 2, y.data.iter().zip(&target.data).map(|(a, b)| a - b).collect());
        let mut grads = store.zero_grads();
        net.backward(&store, &tape, &resid, &mut grads).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let want: f64 = (0..5).map(|r| resid.row(r)[o] * x.row(r)[i]).sum();
                assert!((grads.get(ParamId(0))[o * 3 + i] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let mut store = ParamStore::new();
        let net = Sequential::build(
            &mut store,
            "z",
            4,
            &[LayerSpec::Dense { inp: 4, out: 6 }, LayerSpec::Silu, LayerSpec::Dense { inp: 6, out: 2 }],
            &init(),
        )
        .unwrap();
        let x = random_mat(3, 4, "x");
        let (_, tape) = net.forward(&store, &x).unwrap();
        let mut grads = store.zero_grads();
        let dx = net.backward(&store, &tape, &Mat::zeros(3, 2), &mut grads).unwrap();
        assert!(grads.is_zero());
        assert!(dx.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn every_layer_kind_passes_finite_differences() {
        let cases: Vec<(usize, Vec<LayerSpec>)> = vec![
            (5, vec![LayerSpec::Dense { inp: 5, out: 7 }]),
            (5, vec![LayerSpec::Dense { inp: 5, out: 7 }, LayerSpec::Relu, LayerSpec::Dense { inp: 7, out: 3 }]),
            (5, vec![LayerSpec::Dense { inp: 5, out: 7 }, LayerSpec::Silu, LayerSpec::Dense { inp: 7, out: 3 }]),
            (12, vec![LayerSpec::Conv1d { in_ch: 2, out_ch: 3, kernel: 3, len: 6 }, LayerSpec::Dense { inp: 18, out: 2 }]),
            (12, vec![
                LayerSpec::Conv1d { in_ch: 2, out_ch: 4, kernel: 5, len: 6 },
                LayerSpec::GlobalAvgPool { channels: 4, len: 6 },
                LayerSpec::Dense { inp: 4, out: 2 },
            ]),
            (6, vec![LayerSpec::LayerNorm { dim: 6 }, LayerSpec::Dense { inp: 6, out: 3 }]),
            (6, vec![LayerSpec::Residual(vec![
                LayerSpec::Dense { inp: 6, out: 8 },
                LayerSpec::Silu,
                LayerSpec::Dense { inp: 8, out: 6 },
            ])]),
        ];
        for (k, (width, specs)) in cases.into_iter().enumerate() {
            let mut store = ParamStore::new();
            let net = Sequential::build(&mut store, "g", width, &specs, &RngStream::new(k as u64, "init")).unwrap();
            // Randomize biases and layer-norm gains so no parameter sits at a special value.
            for p in 0..store.len() {
                let extra = RngStream::new(k as u64, format!("perturb{p}")).gaussian(store.params[p].value.len());
                for (v, e) in store.params[p].value.iter_mut().zip(extra) {
                    *v += 0.1 * e;
                }
            }
            let x = random_mat(4, width, &format!("x{k}"));
            let err = probe_check(&net, &mut store, &x);
            assert!(err < 1e-4, "case {k}: rel err {err}");
        }
    }

    #[test]
    fn incompatible_specs_are_rejected() {
        let mut store = ParamStore::new();
        let err = Sequential::build(
            &mut store,
            "bad",
            4,
            &[LayerSpec::Dense { inp: 4, out: 5 }, LayerSpec::Dense { inp: 6, out: 1 }],
            &init(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 1, .. }));
        let err = Sequential::build(
            &mut store,
            "bad",
            4,
            &[LayerSpec::Residual(vec![LayerSpec::Dense { inp: 4, out: 3 }])],
            &init(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 0, .. }));
        let mut store = ParamStore::new();
        let net = Sequential::build(&mut store, "n", 4, &[LayerSpec::Dense { inp: 4, out: 2 }], &init()).unwrap();
        assert!(matches!(net.forward(&store, &Mat::zeros(1, 3)), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_without_forward_is_a_state_error() {
        let mut store = ParamStore::new();
        let net = Sequential::build(&mut store, "n", 4, &[LayerSpec::Dense { inp: 4, out: 2 }], &init()).unwrap();
        let empty = Tape {
            inputs: vec![],
            nested: vec![],
        };
        let mut grads = store.zero_grads();
        assert!(matches!(
            net.backward(&store, &empty, &Mat::zeros(1, 2), &mut grads),
            Err(Error::State(_))
        ));
    }
}
