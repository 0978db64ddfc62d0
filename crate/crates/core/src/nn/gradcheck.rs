use rand::Rng;

use super::param::{Grads, ParamStore};
use crate::numerics::RngStream;

#[derive(Debug, Clone)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// (tensor, index, analytic, numeric) for every probed entry.
    pub probes: Vec<(usize, usize, f64, f64)>,
}

/// Compares analytic gradients with central differences on `n` randomly
/// chosen scalar parameters.
///
/// Relative error is `|a − n| / max(|a| + |n|, 1e-8)`.
pub fn check_gradients(
    store: &mut ParamStore,
    analytic: &Grads,
    mut loss: impl FnMut(&ParamStore) -> f64,
    n: usize,
    h: f64,
    pick: &RngStream,
) -> GradCheck {
    let mut rng = pick.rng();
    let sizes: Vec<usize> = store.params.iter().map(|p| p.value.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut probes = Vec::with_capacity(n);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let mut flat = rng.random_range(0..total);
        let mut tensor = 0;
        while flat >= sizes[tensor] {
            flat -= sizes[tensor];
            tensor += 1;
        }
        let orig = store.params[tensor].value[flat];
        store.params[tensor].value[flat] = orig + h;
        let up = loss(store);
        store.params[tensor].value[flat] = orig - h;
        let down = loss(store);
        store.params[tensor].value[flat] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.0[tensor][flat];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(rel);
        probes.push((tensor, flat, a, numeric));
    }
    GradCheck {
        max_rel_error: worst,
        probes,
    }
}
