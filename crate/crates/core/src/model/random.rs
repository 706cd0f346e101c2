//! Random irreducible models for property tests and sweeps.

use std::sync::Arc;

use rand::Rng;

use super::laws::{Constant, Discrete, JumpLaw, Normal};
use super::{BivariateJumpLaw, MapModel, StateDynamics, TransitionJumps};
use crate::error::Result;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub min_states: usize,
    pub max_states: usize,
    /// Allow normal jump laws (otherwise constant and discrete only).
    pub normal_laws: bool,
    /// Keep every `ξ` drift at least this large and the Gaussian and jump
    /// parts of `ξ` small, so that low-order stationarity holds.
    pub min_xi_drift: f64,
    /// Draw `sigma2_xi = 0` everywhere.
    pub no_xi_diffusion: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec { min_states: 1, max_states: 4, normal_laws: true, min_xi_drift: 0.5, no_xi_diffusion: false }
    }
}

fn law<R: Rng>(rng: &mut R, normal: bool, scale: f64) -> JumpLaw {
    match rng.random_range(0..if normal { 3 } else { 2 }) {
        0 => Arc::new(Constant { value: scale * rng.random_range(-1.0..1.0) }),
        1 => {
            let k = rng.random_range(2..=4);
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            let atoms = w.iter().map(|p| (scale * rng.random_range(-1.0..1.0), p / total)).collect();
            Arc::new(Discrete { atoms })
        }
        _ => Arc::new(Normal { mean: scale * rng.random_range(-1.0..1.0), var: scale * scale * rng.random_range(0.0..0.5) }),
    }
}

fn bivariate<R: Rng>(rng: &mut R, spec: &RandomSpec) -> BivariateJumpLaw {
    if rng.random_bool(0.3) {
        let k = rng.random_range(2..=3);
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let atoms = w
            .iter()
            .map(|p| (0.3 * rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), p / total))
            .collect();
        BivariateJumpLaw::joint_discrete(atoms).expect("probabilities sum to one")
    } else {
        BivariateJumpLaw::independent(law(rng, spec.normal_laws, 0.3), law(rng, spec.normal_laws, 1.0))
    }
}

/// An irreducible model with a ring of transitions plus random extra edges.
pub fn random_model<R: Rng>(rng: &mut R, spec: &RandomSpec) -> Result<MapModel> {
    let n = rng.random_range(spec.min_states..=spec.max_states);
    let mut q = Matrix::zeros(n, n);
    if n > 1 {
        for i in 0..n {
            q[(i, (i + 1) % n)] = rng.random_range(0.2..2.0);
            for j in 0..n {
                if j != i && q[(i, j)] == 0.0 && rng.random_bool(0.4) {
                    q[(i, j)] = rng.random_range(0.2..2.0);
                }
            }
            let off: f64 = q.row(i).sum();
            q[(i, i)] = -off;
        }
    }
    let dynamics = (0..n)
        .map(|_| {
            let s_xi = if spec.no_xi_diffusion { 0.0 } else { rng.random_range(0.0..0.3) };
            let s_eta = rng.random_range(0.0..1.5);
            let rho = rng.random_range(-0.9..0.9);
            let mut d = StateDynamics::with_drift(
                spec.min_xi_drift + rng.random_range(0.0..1.5),
                rng.random_range(-1.0..1.0),
            )
            .gaussian(s_xi, s_eta, rho * (s_xi * s_eta).sqrt());
            if rng.random_bool(0.6) {
                d = d.jumps(rng.random_range(0.1..1.5), bivariate(rng, spec));
            }
            d
        })
        .collect();
    let mut transitions = TransitionJumps::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && q[(i, j)] > 0.0 && rng.random_bool(0.5) {
                transitions.insert((i, j), bivariate(rng, spec));
            }
        }
    }
    MapModel::new(q, dynamics, transitions)
}

/// [`random_model`] driven by a ChaCha stream seeded with `seed`.
pub fn seeded_model(seed: u64, spec: &RandomSpec) -> Result<MapModel> {
    use rand::SeedableRng;
    random_model(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), spec)
}
