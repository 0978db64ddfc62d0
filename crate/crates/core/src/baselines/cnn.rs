use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, Grads, LayerSpec, Mat, ParamStore, Sequential};
use crate::numerics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    /// Feature length, treated as one channel.
    pub input_len: usize,
    pub channels: [usize; 3],
    pub dense: usize,
    pub output: usize,
    pub kernel: usize,
}

impl CnnConfig {
    /// Parameter count of the declared stack.
    pub fn parameter_count(&self) -> usize {
        let k = self.kernel;
        let [c1, c2, c3] = self.channels;
        let conv = |i: usize, o: usize| o * i * k + o;
        conv(1, c1) + conv(c1, c2) + conv(c2, c3) + c3 * self.dense + self.dense + self.dense * self.output + self.output
    }
}

/// Three same-padded convolutions with ReLU, global average pooling and two
/// dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnRegressor {
    pub config: CnnConfig,
    pub store: ParamStore,
    net: Sequential,
}

impl CnnRegressor {
    pub fn new(config: CnnConfig, init: &RngStream) -> Result<Self> {
        let CnnConfig {
            input_len: l,
            channels: [c1, c2, c3],
            dense,
            output,
            kernel,
        } = config;
        let mut store = ParamStore::new();
        let net = Sequential::build(
            &mut store,
            "cnn",
            l,
            &[
                LayerSpec::Conv1d { in_ch: 1, out_ch: c1, kernel, len: l },
                LayerSpec::Relu,
                LayerSpec::Conv1d { in_ch: c1, out_ch: c2, kernel, len: l },
                LayerSpec::Relu,
                LayerSpec::Conv1d { in_ch: c2, out_ch: c3, kernel, len: l },
                LayerSpec::Relu,
                LayerSpec::GlobalAvgPool { channels: c3, len: l },
                LayerSpec::Dense { inp: c3, out: dense },
                LayerSpec::Relu,
                LayerSpec::Dense { inp: dense, out: output },
            ],
            init,
        )?;
        Ok(Self { config, store, net })
    }

    fn check(&self, x: &Mat) -> Result<()> {
        if x.cols != self.config.input_len {
            return Err(Error::Dimension(format!(
                "CNN expects features of length {}, got {}",
                self.config.input_len, x.cols
            )));
        }
        Ok(())
    }

    pub fn forward(&self, feature: &[f64]) -> Result<Vec<f64>> {
        let x = Mat::from_vec(1, feature.len(), feature.to_vec());
        self.check(&x)?;
        Ok(self.net.apply(&self.store, &x)?.data)
    }

    /// Mean over the batch of the summed squared error, and its gradients.
    pub fn loss_and_grads(&self, x: &Mat, y: &Mat) -> Result<(f64, Grads)> {
        self.check(x)?;
        if y.rows != x.rows || y.cols != self.config.output {
            return Err(Error::Dimension("CNN target shape".into()));
        }
        let (out, tape) = self.net.forward(&self.store, x)?;
        let b = x.rows as f64;
        let mut d = Mat::zeros(out.rows, out.cols);
        let mut loss = 0.0;
        for i in 0..out.data.len() {
            let r = out.data[i] - y.data[i];
            loss += r * r;
            d.data[i] = 2.0 * r / b;
        }
        let mut g = self.store.zero_grads();
        self.net.backward(&self.store, &tape, &d, &mut g)?;
        Ok((loss / b, g))
    }

    pub fn train_step(&mut self, x: &Mat, y: &Mat, lr: f64) -> Result<f64> {
        if x.rows == 0 {
            return Err(Error::EmptyBuffer);
        }
        let (loss, g) = self.loss_and_grads(x, y)?;
        if loss.is_finite() {
            adam_step(&mut self.store, &g, AdamConfig::with_lr(lr));
        } else {
            self.store.skipped += 1;
        }
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::check_gradients;

    fn cfg() -> CnnConfig {
        CnnConfig {
            input_len: 9,
            channels: [4, 6, 6],
            dense: 8,
            output: 3,
            kernel: 3,
        }
    }

    #[test]
    fn parameter_count_matches_declared_stack() {
        let full = CnnConfig {
            input_len: 129,
            channels: [64, 128, 128],
            dense: 128,
            output: 9,
            kernel: 3,
        };
        // 1→64: 256, 64→128: 24704, 128→128: 49280, 128→128: 16512, 128→9: 1161.
        assert_eq!(full.parameter_count(), 91_913);
        let m = CnnRegressor::new(full, &RngStream::new(0, "cnn")).unwrap();
        assert_eq!(m.store.count(), 91_913);
    }

    #[test]
    fn zero_final_layer_outputs_bias() {
        let mut m = CnnRegressor::new(cfg(), &RngStream::new(1, "cnn")).unwrap();
        let n = m.store.params.len();
        m.store.params[n - 2].value.iter_mut().for_each(|v| *v = 0.0);
        m.store.params[n - 1].value = vec![0.5, -1.0, 2.0];
        let y = m.forward(&[0.3; 9]).unwrap();
        assert_eq!(y, vec![0.5, -1.0, 2.0]);
        assert!(m.forward(&[0.0; 4]).is_err());
    }

    #[test]
    fn memorizes_one_example() {
        let mut m = CnnRegressor::new(cfg(), &RngStream::new(2, "cnn")).unwrap();
        let x = Mat::from_vec(1, 9, RngStream::new(2, "x").gaussian(9));
        let y = Mat::from_vec(1, 3, vec![0.2, -0.7, 0.9]);
        let mut loss = f64::INFINITY;
        for _ in 0..500 {
            loss = m.train_step(&x, &y, 1e-2).unwrap();
        }
        assert!(m.loss_and_grads(&x, &y).unwrap().0 < 1e-3, "{loss}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = CnnRegressor::new(cfg(), &RngStream::new(3, "cnn")).unwrap();
        let x = Mat::from_vec(4, 9, RngStream::new(3, "x").gaussian(36));
        let y = Mat::from_vec(4, 3, RngStream::new(3, "y").gaussian(12));
        let (_, g) = m.loss_and_grads(&x, &y).unwrap();
        let mut store = m.store.clone();
        let res = check_gradients(
            &mut store,
            &g,
            |st| {
                let mut c = m.clone();
                c.store = st.clone();
                c.loss_and_grads(&x, &y).unwrap().0
            },
            40,
            1e-5,
            &RngStream::new(3, "probe"),
        );
        assert!(res.max_rel_error < 1e-4, "{}", res.max_rel_error);
    }
}
