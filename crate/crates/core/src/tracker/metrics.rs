use crate::diffusion::{unpack_state, StateBounds};
use crate::error::{Error, Result};

/// Per-target `(θ̂, d̂)` estimates.
pub type Prediction = Vec<(f64, f64)>;

/// `(√Σ(θ−θ̂)², √Σ(d−d̂)²)` over index-aligned targets.
pub fn rsse(truth: &[(f64, f64)], est: &[(f64, f64)]) -> Result<(f64, f64)> {
    if truth.len() != est.len() {
        return Err(Error::Dimension(format!(
            "{} true targets, {} estimates",
            truth.len(),
            est.len()
        )));
    }
    let (mut a, mut d) = (0.0, 0.0);
    for (t, e) in truth.iter().zip(est) {
        a += (t.0 - e.0).powi(2);
        d += (t.1 - e.1).powi(2);
    }
    Ok((a.sqrt(), d.sqrt()))
}

/// `ℓ_q = (θ−θ̂)² + η(d−d̂)²` per target.
pub fn per_target_loss(truth: &[(f64, f64)], est: &[(f64, f64)], eta: f64) -> Vec<f64> {
    truth
        .iter()
        .zip(est)
        .map(|(t, e)| (t.0 - e.0).powi(2) + eta * (t.1 - e.1).powi(2))
        .collect()
}

/// Minimum-cost perfect matching on a square cost matrix. Returns the
/// column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials formulation with 1-based sentinels.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Reorders unordered estimates so that entry `q` is matched to true target
/// `q`, minimizing the summed squared angle error.
pub fn associate_by_angle(truth: &[(f64, f64)], est: &[(f64, f64)]) -> Prediction {
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| est.iter().map(|e| (t.0 - e.0).powi(2)).collect())
        .collect();
    hungarian(&cost).into_iter().map(|j| est[j]).collect()
}

/// Point estimate from `K` de-normalized state samples: the unpacked
/// componentwise mean. Also returns every sample unpacked.
pub fn aggregate_predictions(samples: &[Vec<f64>], bounds: &StateBounds) -> Result<(Prediction, Vec<Prediction>)> {
    let Some(first) = samples.first() else {
        return Err(Error::Config("aggregation needs at least one sample".into()));
    };
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= samples.len() as f64;
    }
    let zip = |x: &[f64]| {
        let (t, d) = unpack_state(x, bounds);
        t.into_iter().zip(d).collect::<Prediction>()
    };
    Ok((zip(&mean), samples.iter().map(|s| zip(s)).collect()))
}
