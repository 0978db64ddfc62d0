use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampler::forward_noise;
use super::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::nn::{adam_step, silu, silu_backward, AdamConfig, Dense, Grads, Mat, ParamId, ParamStore};
use crate::numerics::{normal, RngStream};

/// Anything that predicts the injected noise from `(x_t, t, c)`.
///
/// Rows of `cond` flagged in `null` are ignored and replaced by the
/// unconditional token.
pub trait NoisePredictor {
    fn state_dim(&self) -> usize;
    fn predict(&self, x: &Mat, t: &[usize], cond: &Mat, null: &[bool]) -> Mat;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    pub state_dim: usize,
    pub cond_dim: usize,
    pub hidden: usize,
    pub time_dim: usize,
}

/// Residual bottleneck network at vector scale:
///
/// ```text
/// h1 = silu(D1x x + D1c c + T1·e(t))    width H
/// h2 = silu(D2 h1 + T2·e(t) + C2 c)     width H/2
/// h3 = silu(D3 h2 + T3·e(t)) + h1       width H
/// ε̂  = D4 h3
/// ```
///
/// `e(t)` is a fixed sinusoidal embedding. Dropped conditioners are replaced
/// by a learned null vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Denoiser {
    pub config: DenoiserConfig,
    pub store: ParamStore,
    d1x: Dense,
    d1c: Dense,
    d2: Dense,
    d3: Dense,
    d4: Dense,
    t1: Dense,
    t2: Dense,
    t3: Dense,
    c2: Dense,
    null: ParamId,
}

struct Cache {
    x: Mat,
    cond: Mat,
    temb: Mat,
    a1: Mat,
    h1: Mat,
    a2: Mat,
    h2: Mat,
    a3: Mat,
    h3: Mat,
}

/// Sinusoidal step embedding of width `dim`.
pub(crate) fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut e = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / half as f64).exp();
        e[i] = (t as f64 * freq).sin();
        e[half + i] = (t as f64 * freq).cos();
    }
    e
}

/// Dense projection that evaluates each run of identical consecutive rows
/// once. Sampling batches share `t` and `c` across rows.
fn project_runs(layer: &Dense, store: &ParamStore, x: &Mat) -> Mat {
    let mut starts = Vec::new();
    for r in 0..x.rows {
        if r == 0 || x.row(r) != x.row(r - 1) {
            starts.push(r);
        }
    }
    if starts.len() == x.rows {
        return layer.forward(store, x);
    }
    let mut uniq = Mat::zeros(starts.len(), x.cols);
    for (i, &r) in starts.iter().enumerate() {
        uniq.row_mut(i).copy_from_slice(x.row(r));
    }
    let proj = layer.forward(store, &uniq);
    let mut out = Mat::zeros(x.rows, layer.out);
    let mut u = 0;
    for r in 0..x.rows {
        if u + 1 < starts.len() && starts[u + 1] == r {
            u += 1;
        }
        out.row_mut(r).copy_from_slice(proj.row(u));
    }
    out
}

impl Denoiser {
    pub fn new(config: DenoiserConfig, init: &RngStream) -> Result<Self> {
        let DenoiserConfig {
            state_dim: s,
            cond_dim: c,
            hidden: h,
            time_dim: e,
        } = config;
        if s == 0 || c == 0 || h < 2 || e < 2 {
            return Err(Error::Config(format!("invalid denoiser dimensions {config:?}")));
        }
        let mut store = ParamStore::new();
        let d1x = Dense::new(&mut store, "den.d1x", s, h, init);
        let d1c = Dense::new(&mut store, "den.d1c", c, h, init);
        let d2 = Dense::new(&mut store, "den.d2", h, h / 2, init);
        let d3 = Dense::new(&mut store, "den.d3", h / 2, h, init);
        let d4 = Dense::new(&mut store, "den.d4", h, s, init);
        let t1 = Dense::new(&mut store, "den.t1", e, h, init);
        let t2 = Dense::new(&mut store, "den.t2", e, h / 2, init);
        let t3 = Dense::new(&mut store, "den.t3", e, h, init);
        let c2 = Dense::new(&mut store, "den.c2", c, h / 2, init);
        let null = store.gaussian("den.null", vec![c], 0.1, init);
        Ok(Self {
            config,
            store,
            d1x,
            d1c,
            d2,
            d3,
            d4,
            t1,
            t2,
            t3,
            c2,
            null,
        })
    }

    fn forward(&self, x: &Mat, t: &[usize], cond: &Mat, null: &[bool]) -> (Mat, Cache) {
        let s = &self.store;
        assert_eq!(x.cols, self.config.state_dim, "denoiser state width");
        assert_eq!(cond.cols, self.config.cond_dim, "denoiser conditioner width");
        assert!(x.rows == t.len() && x.rows == cond.rows && x.rows == null.len());
        let mut c_eff = cond.clone();
        let token = s.get(self.null);
        for (r, &n) in null.iter().enumerate() {
            if n {
                c_eff.row_mut(r).copy_from_slice(token);
            }
        }
        let mut temb = Mat::zeros(x.rows, self.config.time_dim);
        for (r, &tt) in t.iter().enumerate() {
            temb.row_mut(r)
                .copy_from_slice(&time_embedding(tt, self.config.time_dim));
        }
        let mut a1 = self.d1x.forward(s, x);
        a1.add_assign(&project_runs(&self.d1c, s, &c_eff));
        a1.add_assign(&project_runs(&self.t1, s, &temb));
        let h1 = silu(&a1);
        let mut a2 = self.d2.forward(s, &h1);
        a2.add_assign(&project_runs(&self.t2, s, &temb));
        a2.add_assign(&project_runs(&self.c2, s, &c_eff));
        let h2 = silu(&a2);
        let mut a3 = self.d3.forward(s, &h2);
        a3.add_assign(&project_runs(&self.t3, s, &temb));
        let mut h3 = silu(&a3);
        h3.add_assign(&h1);
        let out = self.d4.forward(s, &h3);
        let cache = Cache {
            x: x.clone(),
            cond: c_eff,
            temb,
            a1,
            h1,
            a2,
            h2,
            a3,
            h3,
        };
        (out, cache)
    }

    fn backward(&self, cache: &Cache, null: &[bool], dout: &Mat) -> Grads {
        let s = &self.store;
        let mut g = s.zero_grads();
        let dh3 = self.d4.backward(s, &cache.h3, dout, &mut g);
        let da3 = silu_backward(&cache.a3, &dh3);
        let mut dh1 = dh3;
        let dh2 = self.d3.backward(s, &cache.h2, &da3, &mut g);
        self.t3.backward(s, &cache.temb, &da3, &mut g);
        let da2 = silu_backward(&cache.a2, &dh2);
        dh1.add_assign(&self.d2.backward(s, &cache.h1, &da2, &mut g));
        self.t2.backward(s, &cache.temb, &da2, &mut g);
        let dc2 = self.c2.backward(s, &cache.cond, &da2, &mut g);
        let da1 = silu_backward(&cache.a1, &dh1);
        self.d1x.backward(s, &cache.x, &da1, &mut g);
        let dc1 = self.d1c.backward(s, &cache.cond, &da1, &mut g);
        self.t1.backward(s, &cache.temb, &da1, &mut g);
        let gn = g.get_mut(self.null);
        for (r, &n) in null.iter().enumerate() {
            if n {
                let dr = dc1.row(r);
                for ((gi, a), b) in gn.iter_mut().zip(dr).zip(dc2.row(r)) {
                    *gi += a + b;
                }
            }
        }
        g
    }

    /// Loss and parameter gradients for a fixed set of draws.
    pub fn loss_and_grads(
        &self,
        schedule: &DiffusionSchedule,
        x0: &Mat,
        cond: &Mat,
        draws: &TrainingDraws,
    ) -> (f64, Grads) {
        let xt = corrupt(schedule, x0, draws);
        let (pred, cache) = self.forward(&xt, &draws.t, cond, &draws.drop);
        let b = x0.rows as f64;
        let mut dout = Mat::zeros(pred.rows, pred.cols);
        let mut loss = 0.0;
        for i in 0..pred.data.len() {
            let r = pred.data[i] - draws.eps.data[i];
            loss += r * r;
            dout.data[i] = 2.0 * r / b;
        }
        (loss / b, self.backward(&cache, &draws.drop, &dout))
    }
}

impl NoisePredictor for Denoiser {
    fn state_dim(&self) -> usize {
        self.config.state_dim
    }

    fn predict(&self, x: &Mat, t: &[usize], cond: &Mat, null: &[bool]) -> Mat {
        self.forward(x, t, cond, null).0
    }
}

/// Per-sample randomness of one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDraws {
    pub t: Vec<usize>,
    pub eps: Mat,
    pub drop: Vec<bool>,
}

pub fn draw_training_noise(
    stream: &RngStream,
    batch: usize,
    dim: usize,
    steps: usize,
    p_drop: f64,
) -> TrainingDraws {
    let mut rng = stream.rng();
    let mut t = Vec::with_capacity(batch);
    let mut eps = Mat::zeros(batch, dim);
    let mut drop = Vec::with_capacity(batch);
    for r in 0..batch {
        t.push(rng.random_range(1..=steps));
        for v in eps.row_mut(r) {
            *v = normal(&mut rng);
        }
        drop.push(rng.random::<f64>() < p_drop);
    }
    TrainingDraws { t, eps, drop }
}

fn corrupt(schedule: &DiffusionSchedule, x0: &Mat, draws: &TrainingDraws) -> Mat {
    let mut xt = Mat::zeros(x0.rows, x0.cols);
    for r in 0..x0.rows {
        let v = forward_noise(schedule, x0.row(r), draws.t[r], draws.eps.row(r))
            .expect("draws lie in 1..=T_d");
        xt.row_mut(r).copy_from_slice(&v);
    }
    xt
}

/// Mean over the batch of `‖ε − ε̂(x_t, t, c)‖²`.
pub fn diffusion_loss<P: NoisePredictor>(
    pred: &P,
    schedule: &DiffusionSchedule,
    x0: &Mat,
    cond: &Mat,
    draws: &TrainingDraws,
) -> f64 {
    let xt = corrupt(schedule, x0, draws);
    let out = pred.predict(&xt, &draws.t, cond, &draws.drop);
    let sq: f64 = out
        .data
        .iter()
        .zip(&draws.eps.data)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    sq / x0.rows as f64
}

/// One Adam step on the noise-prediction loss. Returns the pre-step loss; a
/// non-finite loss leaves the parameters untouched.
pub fn training_step(
    den: &mut Denoiser,
    schedule: &DiffusionSchedule,
    x0: &Mat,
    cond: &Mat,
    p_drop: f64,
    lr: f64,
    stream: &RngStream,
) -> Result<f64> {
    if x0.rows == 0 {
        return Err(Error::EmptyBuffer);
    }
    if cond.rows != x0.rows {
        return Err(Error::Dimension(format!(
            "{} states but {} conditioners",
            x0.rows, cond.rows
        )));
    }
    let draws = draw_training_noise(stream, x0.rows, x0.cols, schedule.steps, p_drop);
    let (loss, grads) = den.loss_and_grads(schedule, x0, cond, &draws);
    if loss.is_finite() {
        adam_step(&mut den.store, &grads, AdamConfig::with_lr(lr));
    } else {
        den.store.skipped += 1;
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::SigmaChoice;
    use crate::nn::check_gradients;

    fn cfg() -> DenoiserConfig {
        DenoiserConfig {
            state_dim: 6,
            cond_dim: 5,
            hidden: 16,
            time_dim: 8,
        }
    }

    fn batch(n: usize, seed: u64) -> (Mat, Mat) {
        let g = RngStream::new(seed, "batch").gaussian(n * 11);
        let x = Mat::from_vec(n, 6, g[..n * 6].to_vec());
        let c = Mat::from_vec(n, 5, g[n * 6..].to_vec());
        (x, c)
    }

    /// Recovers ε exactly from x_t given the clean batch.
    struct Oracle<'a> {
        x0: &'a Mat,
        schedule: &'a DiffusionSchedule,
    }

    impl NoisePredictor for Oracle<'_> {
        fn state_dim(&self) -> usize {
            self.x0.cols
        }
        fn predict(&self, x: &Mat, t: &[usize], _: &Mat, _: &[bool]) -> Mat {
            let mut out = x.clone();
            for r in 0..x.rows {
                let ab = self.schedule.alpha_bar_at(t[r]);
                for (o, x0) in out.row_mut(r).iter_mut().zip(self.x0.row(r)) {
                    *o = (*o - ab.sqrt() * x0) / (1.0 - ab).sqrt();
                }
            }
            out
        }
    }

    struct Zero(usize);

    impl NoisePredictor for Zero {
        fn state_dim(&self) -> usize {
            self.0
        }
        fn predict(&self, x: &Mat, _: &[usize], _: &Mat, _: &[bool]) -> Mat {
            Mat::zeros(x.rows, x.cols)
        }
    }

    #[test]
    fn oracle_denoiser_has_zero_loss() {
        let s = DiffusionSchedule::new(50, 1e-4, 1e-2, SigmaChoice::Posterior).unwrap();
        let (x, c) = batch(64, 1);
        let draws = draw_training_noise(&RngStream::new(1, "d"), 64, 6, 50, 0.05);
        let l = diffusion_loss(&Oracle { x0: &x, schedule: &s }, &s, &x, &c, &draws);
        assert!(l < 1e-18, "{l}");
    }

    #[test]
    fn zero_denoiser_loss_is_state_dimension() {
        let s = DiffusionSchedule::new(50, 1e-4, 1e-2, SigmaChoice::Posterior).unwrap();
        let (x, c) = batch(20000, 2);
        let draws = draw_training_noise(&RngStream::new(2, "d"), 20000, 6, 50, 0.05);
        let l = diffusion_loss(&Zero(6), &s, &x, &c, &draws);
        // Chi-square with 6 dof: sd of the mean is √12/√20000 ≈ 0.0245.
        assert!((l - 6.0).abs() < 0.12, "{l}");
    }

    #[test]
    fn full_drop_ignores_conditioner() {
        let s = DiffusionSchedule::new(20, 1e-4, 1e-2, SigmaChoice::Posterior).unwrap();
        let den = Denoiser::new(cfg(), &RngStream::new(3, "init")).unwrap();
        let (x, c) = batch(16, 3);
        let (_, c2) = batch(16, 99);
        let draws = draw_training_noise(&RngStream::new(3, "d"), 16, 6, 20, 1.0);
        let (l1, g1) = den.loss_and_grads(&s, &x, &c, &draws);
        let (l2, g2) = den.loss_and_grads(&s, &x, &c2, &draws);
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let s = DiffusionSchedule::new(20, 1e-4, 1e-2, SigmaChoice::Posterior).unwrap();
        let mut den = Denoiser::new(cfg(), &RngStream::new(4, "init")).unwrap();
        let (x, c) = batch(8, 4);
        let draws = draw_training_noise(&RngStream::new(4, "d"), 8, 6, 20, 0.5);
        let (_, g) = den.loss_and_grads(&s, &x, &c, &draws);
        let probe = den.clone();
        let mut store = den.store.clone();
        let res = check_gradients(
            &mut store,
            &g,
            |st| {
                let mut d = probe.clone();
                d.store = st.clone();
                d.loss_and_grads(&s, &x, &c, &draws).0
            },
            200,
            1e-5,
            &RngStream::new(4, "probe"),
        );
        assert!(res.max_rel_error < 1e-4, "{}", res.max_rel_error);
        // The null token is reached only through dropped rows.
        den.store = store;
        assert!(g.get(den.null).iter().any(|v| *v != 0.0));
    }

    #[test]
    fn training_reduces_loss_on_fixed_batch() {
        let s = DiffusionSchedule::new(20, 1e-4, 1e-2, SigmaChoice::Posterior).unwrap();
        let mut den = Denoiser::new(cfg(), &RngStream::new(5, "init")).unwrap();
        let (x, c) = batch(64, 5);
        let eval = draw_training_noise(&RngStream::new(5, "eval"), 64, 6, 20, 0.0);
        let before = den.loss_and_grads(&s, &x, &c, &eval).0;
        for k in 0..300 {
            training_step(&mut den, &s, &x, &c, 0.05, 2e-3, &RngStream::new(5, "train").child(k)).unwrap();
        }
        let after = den.loss_and_grads(&s, &x, &c, &eval).0;
        assert!(after < before, "{before} -> {after}");
    }

    #[test]
    fn empty_batch_is_an_error() {
        let s = DiffusionSchedule::new(20, 1e-4, 1e-2, SigmaChoice::Posterior).unwrap();
        let mut den = Denoiser::new(cfg(), &RngStream::new(6, "init")).unwrap();
        let r = training_step(&mut den, &s, &Mat::zeros(0, 6), &Mat::zeros(0, 5), 0.05, 1e-3, &RngStream::new(6, "t"));
        assert!(matches!(r, Err(Error::EmptyBuffer)));
    }
}
