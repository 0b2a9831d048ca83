//! Two-dimensional functional-form games where a pure strategy is a point in the plane.
//!
//! Both games are symmetric and antisymmetric: `payoff(p, q) = -payoff(q, p)`.
//! Payoffs are affine in each player's strategy representation, so a mixture of
//! points is summarized exactly by the mixture of representations
//! ([`OpponentSummary`]).
//!
//! * `mixture7`: seven Gaussian humps equally spaced on a circle. A point is
//!   represented by its Gaussian likelihoods `w(p)` under each hump and the
//!   payoff is `w(p)ᵀ S w(q) + ½ Σₖ (wₖ(p) − wₖ(q))`.
//! * `disc`: points in the unit disc with payoff `p₁q₂ − p₂q₁`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::GameError;

pub type Point = [f64; 2];

pub const HUMPS: usize = 7;

/// Antisymmetric cyclic dominance among the seven humps: hump `k` beats the
/// next three humps around the circle.
pub const MIXTURE_S: [[f64; HUMPS]; HUMPS] = [
    [0.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
    [-1.0, 0.0, 1.0, 1.0, 1.0, -1.0, -1.0],
    [-1.0, -1.0, 0.0, 1.0, 1.0, 1.0, -1.0],
    [-1.0, -1.0, -1.0, 0.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0, -1.0, 0.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, -1.0, -1.0, 0.0, 1.0],
    [1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 0.0],
];

/// Geometry and weighting of the seven-hump mixture game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    /// Radius of the circle holding the hump centers.
    pub radius: f64,
    /// Isotropic standard deviation; `None` means half the spacing between neighbouring humps.
    pub sigma: Option<f64>,
    /// Normalize the likelihood vector to the simplex before applying the payoff.
    pub normalize_payoff_weights: bool,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            radius: 1.0,
            sigma: None,
            normalize_payoff_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture7 {
    centers: [Point; HUMPS],
    sigma: f64,
    normalize: bool,
    bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalGame2D {
    Mixture7(Mixture7),
    Disc,
}

/// Linear summary of a mixed strategy over points, sufficient to evaluate
/// payoffs against it.
#[derive(Debug, Clone, PartialEq)]
pub enum OpponentSummary {
    /// Mixture of payoff weight vectors.
    Mixture([f64; HUMPS]),
    /// Mean point.
    Disc(Point),
}

impl Mixture7 {
    pub fn new(config: MixtureConfig) -> Self {
        let mut centers = [[0.0; 2]; HUMPS];
        for (k, c) in centers.iter_mut().enumerate() {
            let angle = 2.0 * PI * k as f64 / HUMPS as f64;
            *c = [config.radius * angle.cos(), config.radius * angle.sin()];
        }
        let spacing = 2.0 * config.radius * (PI / HUMPS as f64).sin();
        let sigma = config.sigma.unwrap_or(spacing / 2.0);
        Mixture7 {
            centers,
            sigma,
            normalize: config.normalize_payoff_weights,
            bound: config.radius + 2.0 * sigma,
        }
    }

    pub fn centers(&self) -> &[Point; HUMPS] {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Unnormalized Gaussian log-densities of `p` under each hump.
    fn log_likelihoods(&self, p: Point) -> [f64; HUMPS] {
        let s2 = self.sigma * self.sigma;
        let norm = -(2.0 * PI * s2).ln();
        self.centers.map(|c| {
            let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
            norm - (dx * dx + dy * dy) / (2.0 * s2)
        })
    }

    /// Gradient of each log-density with respect to `p`.
    fn log_likelihood_gradients(&self, p: Point) -> [Point; HUMPS] {
        let s2 = self.sigma * self.sigma;
        self.centers
            .map(|c| [(c[0] - p[0]) / s2, (c[1] - p[1]) / s2])
    }

    /// Likelihoods normalized to the simplex: the point's distribution over humps.
    pub fn hump_distribution(&self, p: Point) -> [f64; HUMPS] {
        let logs = self.log_likelihoods(p);
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps = logs.map(|l| (l - max).exp());
        let total: f64 = exps.iter().sum();
        exps.map(|e| e / total)
    }

    /// Jacobian of [`Mixture7::hump_distribution`]: row `k` is `∂πₖ/∂p`.
    pub fn hump_distribution_jacobian(&self, p: Point) -> [Point; HUMPS] {
        let pi = self.hump_distribution(p);
        let grads = self.log_likelihood_gradients(p);
        let mean = [0, 1].map(|d| (0..HUMPS).map(|k| pi[k] * grads[k][d]).sum::<f64>());
        let mut jac = [[0.0; 2]; HUMPS];
        for k in 0..HUMPS {
            for d in 0..2 {
                jac[k][d] = pi[k] * (grads[k][d] - mean[d]);
            }
        }
        jac
    }

    /// Weight vector entering the payoff formula.
    pub fn payoff_weights(&self, p: Point) -> [f64; HUMPS] {
        if self.normalize {
            self.hump_distribution(p)
        } else {
            self.log_likelihoods(p).map(f64::exp)
        }
    }

    fn payoff_weights_jacobian(&self, p: Point) -> [Point; HUMPS] {
        if self.normalize {
            return self.hump_distribution_jacobian(p);
        }
        let w = self.payoff_weights(p);
        let grads = self.log_likelihood_gradients(p);
        let mut jac = [[0.0; 2]; HUMPS];
        for k in 0..HUMPS {
            jac[k] = [w[k] * grads[k][0], w[k] * grads[k][1]];
        }
        jac
    }

    /// Per-hump marginal value of weight against an opponent weight mixture.
    fn hump_values(opponent: &[f64; HUMPS]) -> [f64; HUMPS] {
        let mut values = [0.5; HUMPS];
        for (k, v) in values.iter_mut().enumerate() {
            *v += (0..HUMPS).map(|j| MIXTURE_S[k][j] * opponent[j]).sum::<f64>();
        }
        values
    }
}

impl FunctionalGame2D {
    pub fn mixture7(config: MixtureConfig) -> Self {
        FunctionalGame2D::Mixture7(Mixture7::new(config))
    }

    pub fn disc() -> Self {
        FunctionalGame2D::Disc
    }

    pub fn name(&self) -> &'static str {
        match self {
            FunctionalGame2D::Mixture7(_) => "mixture7",
            FunctionalGame2D::Disc => "disc",
        }
    }

    /// Radius of the disc that strategies are confined to.
    pub fn bound(&self) -> f64 {
        match self {
            FunctionalGame2D::Mixture7(m) => m.bound,
            FunctionalGame2D::Disc => 1.0,
        }
    }

    pub fn project(&self, p: Point) -> Point {
        let bound = self.bound();
        let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if norm > bound {
            [p[0] * bound / norm, p[1] * bound / norm]
        } else {
            p
        }
    }

    fn check_domain(&self, p: Point) -> Result<(), GameError> {
        if let FunctionalGame2D::Disc = self {
            if p[0] * p[0] + p[1] * p[1] > 1.0 + 1e-12 {
                return Err(GameError::OutOfDomain { x: p[0], y: p[1] });
            }
        }
        Ok(())
    }

    /// Payoff of `p` against `q`.
    pub fn payoff(&self, p: Point, q: Point) -> Result<f64, GameError> {
        self.check_domain(p)?;
        self.check_domain(q)?;
        Ok(self.payoff_against(p, &self.summarize(&[q], &[1.0])))
    }

    pub fn summarize(&self, points: &[Point], weights: &[f64]) -> OpponentSummary {
        match self {
            FunctionalGame2D::Mixture7(m) => {
                let mut v = [0.0; HUMPS];
                for (q, &w) in points.iter().zip(weights) {
                    if w == 0.0 {
                        continue;
                    }
                    for (vk, qk) in v.iter_mut().zip(m.payoff_weights(*q)) {
                        *vk += w * qk;
                    }
                }
                OpponentSummary::Mixture(v)
            }
            FunctionalGame2D::Disc => {
                let mut mean = [0.0; 2];
                for (q, &w) in points.iter().zip(weights) {
                    mean[0] += w * q[0];
                    mean[1] += w * q[1];
                }
                OpponentSummary::Disc(mean)
            }
        }
    }

    pub fn payoff_against(&self, p: Point, opponent: &OpponentSummary) -> f64 {
        match (self, opponent) {
            (FunctionalGame2D::Mixture7(m), OpponentSummary::Mixture(v)) => {
                let w = m.payoff_weights(p);
                let values = Mixture7::hump_values(v);
                let opponent_mass: f64 = v.iter().sum();
                w.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() - 0.5 * opponent_mass
            }
            (FunctionalGame2D::Disc, OpponentSummary::Disc(q)) => p[0] * q[1] - p[1] * q[0],
            _ => panic!("opponent summary belongs to a different game"),
        }
    }

    pub fn payoff_gradient(&self, p: Point, opponent: &OpponentSummary) -> Point {
        match (self, opponent) {
            (FunctionalGame2D::Mixture7(m), OpponentSummary::Mixture(v)) => {
                let jac = m.payoff_weights_jacobian(p);
                let values = Mixture7::hump_values(v);
                let mut g = [0.0; 2];
                for k in 0..HUMPS {
                    g[0] += values[k] * jac[k][0];
                    g[1] += values[k] * jac[k][1];
                }
                g
            }
            (FunctionalGame2D::Disc, OpponentSummary::Disc(q)) => [q[1], -q[0]],
            _ => panic!("opponent summary belongs to a different game"),
        }
    }

    /// Best response within the strategy domain and its payoff. Exact for the
    /// disc game; for the mixture game a dense polar grid search followed by
    /// projected gradient polishing.
    pub fn best_response(&self, opponent: &OpponentSummary) -> (Point, f64) {
        match (self, opponent) {
            (FunctionalGame2D::Disc, OpponentSummary::Disc(q)) => {
                let norm = (q[0] * q[0] + q[1] * q[1]).sqrt();
                if norm == 0.0 {
                    ([0.0, 0.0], 0.0)
                } else {
                    ([q[1] / norm, -q[0] / norm], norm)
                }
            }
            (FunctionalGame2D::Mixture7(_), OpponentSummary::Mixture(_)) => {
                let bound = self.bound();
                let (rings, spokes) = (120, 360);
                let mut best = ([0.0, 0.0], self.payoff_against([0.0, 0.0], opponent));
                for i in 1..=rings {
                    let r = bound * i as f64 / rings as f64;
                    for j in 0..spokes {
                        let a = 2.0 * PI * j as f64 / spokes as f64;
                        let p = [r * a.cos(), r * a.sin()];
                        let v = self.payoff_against(p, opponent);
                        if v > best.1 {
                            best = (p, v);
                        }
                    }
                }
                self.polish(best, opponent)
            }
            _ => panic!("opponent summary belongs to a different game"),
        }
    }

    fn polish(&self, start: (Point, f64), opponent: &OpponentSummary) -> (Point, f64) {
        let (mut p, mut value) = start;
        let mut step = 0.1 * self.bound();
        for _ in 0..500 {
            let g = self.payoff_gradient(p, opponent);
            let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            if norm < 1e-14 || step < 1e-12 {
                break;
            }
            let q = self.project([p[0] + step * g[0] / norm, p[1] + step * g[1] / norm]);
            let v = self.payoff_against(q, opponent);
            if v > value {
                p = q;
                value = v;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        (p, value)
    }
}
