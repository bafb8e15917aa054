//! Exact sampling of the Ornstein-Uhlenbeck process.

use rand::Rng;
use rand_distr::StandardNormal;

/// A stationary Ornstein-Uhlenbeck process with RMS amplitude `sigma` and
/// relaxation rate `rate` (autocorrelation σ²·e^(−rate·|t|)).
#[derive(Debug, Clone, Copy)]
pub struct OrnsteinUhlenbeck {
    pub sigma: f64,
    pub rate: f64,
}

impl OrnsteinUhlenbeck {
    /// Draw from the stationary distribution N(0, σ²).
    pub fn sample_stationary<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.sigma * z
    }

    /// Advance a state by `dt` using the exact transition density
    /// x' = x·e^(−rate·dt) + σ·√(1 − e^(−2·rate·dt))·ξ.
    ///
    /// Being the exact conditional law, this introduces no discretization
    /// error in the process itself regardless of step size.
    pub fn step<R: Rng>(&self, x: f64, dt: f64, rng: &mut R) -> f64 {
        let decay = (-self.rate * dt).exp();
        let z: f64 = rng.sample(StandardNormal);
        x * decay + self.sigma * (1.0 - decay * decay).sqrt() * z
    }

    /// Stationary autocorrelation at lag `t`.
    pub fn autocorrelation(&self, t: f64) -> f64 {
        self.sigma * self.sigma * (-self.rate * t.abs()).exp()
    }
}
