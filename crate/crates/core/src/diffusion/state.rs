use serde::{Deserialize, Serialize};

/// Packed target state `[sin θ₁..Q, cos θ₁..Q, ρ(d₁..Q)]`.
pub type StateVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateBounds {
    pub d_min: f64,
    pub d_max: f64,
}

impl StateBounds {
    /// `ρ(d) = log₁₀(d/d_min) / log₁₀(d_max/d_min)`.
    pub fn rho(&self, d: f64) -> f64 {
        (d / self.d_min).log10() / (self.d_max / self.d_min).log10()
    }

    pub fn distance(&self, rho: f64) -> f64 {
        self.d_min * (self.d_max / self.d_min).powf(rho.clamp(0.0, 1.0))
    }
}

/// Packs angles and ranges. Ranges outside `[d_min, d_max]` are clamped and
/// reported through the returned flag.
pub fn pack_state(theta: &[f64], d: &[f64], bounds: &StateBounds) -> (StateVector, bool) {
    assert_eq!(theta.len(), d.len(), "angle and range counts differ");
    let q = theta.len();
    let mut x = vec![0.0; 3 * q];
    let mut clamped = false;
    for i in 0..q {
        x[i] = theta[i].sin();
        x[q + i] = theta[i].cos();
        let di = if d[i] < bounds.d_min || d[i] > bounds.d_max {
            clamped = true;
            d[i].clamp(bounds.d_min, bounds.d_max)
        } else {
            d[i]
        };
        x[2 * q + i] = bounds.rho(di);
    }
    (x, clamped)
}

/// Inverse packing; total on any real vector of length `3Q`.
pub fn unpack_state(x: &[f64], bounds: &StateBounds) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(x.len() % 3, 0, "state length must be a multiple of 3");
    let q = x.len() / 3;
    let theta = (0..q).map(|i| x[i].atan2(x[q + i])).collect();
    let d = (0..q)
        .map(|i| {
            let rho = if x[2 * q + i].is_nan() { 0.0 } else { x[2 * q + i] };
            bounds.distance(rho)
        })
        .collect();
    (theta, d)
}
