use serde::{Deserialize, Serialize};

use super::param::{Grads, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update with bias correction. A tensor whose gradient contains a
/// non-finite entry is left untouched and counted in `store.skipped`.
pub fn adam_step(store: &mut ParamStore, grads: &Grads, cfg: AdamConfig) {
    store.step += 1;
    let t = store.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (i, g) in grads.0.iter().enumerate() {
        if g.iter().any(|x| !x.is_finite()) {
            store.skipped += 1;
            continue;
        }
        let value = &mut store.params[i].value;
        let m = &mut store.m[i];
        let v = &mut store.v[i];
        for j in 0..g.len() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let mhat = m[j] / c1;
            let vhat = v[j] / c2;
            value[j] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a", vec![3], vec![1.0, -2.0, 0.5]);
        s.add("b", vec![2], vec![0.0, 4.0]);
        s
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store();
        let before = s.params.clone();
        let g = s.zero_grads();
        adam_step(&mut s, &g, AdamConfig::with_lr(0.1));
        assert_eq!(s.params, before);
    }

    #[test]
    fn first_step_closed_form() {
        // After one step m̂ = g and v̂ = g², so Δ = −lr·g/(|g| + ε).
        let mut s = store();
        let mut g = s.zero_grads();
        g.0[0] = vec![0.3, -5.0, 1e-3];
        adam_step(&mut s, &g, AdamConfig::with_lr(0.01));
        let want = [1.0 - 0.01 * 0.3 / (0.3 + 1e-8), -2.0 + 0.01 * 5.0 / (5.0 + 1e-8), 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8)];
        for (a, b) in s.params[0].value.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_skips_tensor() {
        let mut s = store();
        let mut g = s.zero_grads();
        g.0[0] = vec![f64::NAN, 1.0, 1.0];
        g.0[1] = vec![1.0, 1.0];
        adam_step(&mut s, &g, AdamConfig::with_lr(0.1));
        assert_eq!(s.params[0].value, vec![1.0, -2.0, 0.5]);
        assert_ne!(s.params[1].value, vec![0.0, 4.0]);
        assert_eq!(s.skipped, 1);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut s = store();
            for k in 0..50 {
                let mut g = s.zero_grads();
                for (i, p) in s.params.iter().enumerate() {
                    g.0[i] = p.value.iter().map(|v| v.sin() + 0.01 * k as f64).collect();
                }
                adam_step(&mut s, &g, AdamConfig::with_lr(0.05));
            }
            s
        };
        assert_eq!(run(), run());
    }
}
