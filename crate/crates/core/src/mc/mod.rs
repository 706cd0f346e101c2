//! Event-exact Monte Carlo for MAP and MMGOU paths.
//!
//! Every path owns two ChaCha streams derived from the master seed and the
//! path index: one for chain events and jump sizes, one for Gaussian
//! increments. Chain paths are therefore identical across substep counts
//! and schemes. Antithetic pairs share both streams and flip the Gaussian
//! signs.

mod estimators;
mod path;
mod scheme;

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub use estimators::*;
pub use path::{simulate_map_path, simulate_mmgou_path, MapPath, MmgouPath};
pub use scheme::{ExactOu, IncrementScheme, LeftPoint, SchemeBuilder, SchemeRegistry};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub horizon: f64,
    /// Substeps per unit time for the continuous part of `V`.
    pub substeps: usize,
    pub master_seed: u64,
    pub antithetic: bool,
    /// Name in [`SchemeRegistry`], or `auto`.
    pub scheme: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 10_000,
            horizon: 1.0,
            substeps: 256,
            master_seed: 1,
            antithetic: false,
            scheme: "left-point".into(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(Error::validation("paths", "need at least one path"));
        }
        if self.substeps < 1 {
            return Err(Error::validation("substeps", "need at least one substep"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::validation("horizon", format!("must be finite and >= 0, got {}", self.horizon)));
        }
        Ok(())
    }

    /// Independent sampling units: pairs when antithetic.
    pub fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

/// Random source of one path.
#[derive(Debug, Clone)]
pub struct PathRng {
    pub events: ChaCha8Rng,
    gauss: ChaCha8Rng,
    sign: f64,
}

impl PathRng {
    pub fn new(master_seed: u64, path: u64, flip: bool) -> Self {
        let mut events = ChaCha8Rng::seed_from_u64(master_seed);
        events.set_stream(2 * path);
        let mut gauss = ChaCha8Rng::seed_from_u64(master_seed);
        gauss.set_stream(2 * path + 1);
        PathRng { events, gauss, sign: if flip { -1.0 } else { 1.0 } }
    }

    pub fn normal(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.gauss);
        self.sign * z
    }

    /// Exponential time with the given rate; `∞` for rate 0.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        if rate > 0.0 {
            let e: f64 = Exp1.sample(&mut self.events);
            e / rate
        } else {
            f64::INFINITY
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.events.random()
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    pub fn z_score(&self, reference: f64) -> f64 {
        (self.mean - reference) / self.se
    }
}

/// Per-unit sample vectors of equal width, in unit order.
#[derive(Debug, Clone)]
pub struct Samples {
    pub width: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Samples {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn mean_of(&self, col: usize) -> f64 {
        self.rows.iter().map(|r| r[col]).sum::<f64>() / self.n() as f64
    }

    pub fn column(&self, col: usize) -> Estimate {
        self.linear(&[(col, 1.0)], None)
    }

    /// Estimate of `Σ g_c·mean(col_c)` (or `value`, for a delta-method
    /// functional with gradient `g`), with the standard error of the
    /// linearized functional.
    pub fn linear(&self, grad: &[(usize, f64)], value: Option<f64>) -> Estimate {
        let n = self.n();
        let combo: Vec<f64> = self.rows.iter().map(|r| grad.iter().map(|&(c, g)| g * r[c]).sum()).collect();
        let mean = combo.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            combo.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            f64::NAN
        };
        Estimate { mean: value.unwrap_or(mean), variance, se: (variance / n as f64).sqrt(), n }
    }

    /// `mean(sq) − mean(x)²`.
    pub fn variance_of(&self, x: usize, sq: usize) -> Estimate {
        let mx = self.mean_of(x);
        self.linear(&[(sq, 1.0), (x, -2.0 * mx)], Some(self.mean_of(sq) - mx * mx))
    }

    /// `mean(xy) − mean(x)·mean(y)`.
    pub fn covariance_of(&self, x: usize, y: usize, xy: usize) -> Estimate {
        let (mx, my) = (self.mean_of(x), self.mean_of(y));
        self.linear(&[(xy, 1.0), (x, -my), (y, -mx)], Some(self.mean_of(xy) - mx * my))
    }
}

static POOL: OnceLock<()> = OnceLock::new();

/// Caps the worker pool at `MAPMOM_THREADS` when set. Idempotent.
pub fn init_threads() {
    POOL.get_or_init(|| {
        if let Some(n) = std::env::var("MAPMOM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    });
}

/// Runs `f` once per sampling unit, in parallel, and returns the rows in
/// unit order. Antithetic units average the two sign-flipped paths.
pub fn run_ensemble<F>(cfg: &SimConfig, width: usize, f: F) -> Result<Samples>
where
    F: Fn(&mut PathRng) -> Vec<f64> + Sync,
{
    cfg.validate()?;
    init_threads();
    let rows: Vec<Vec<f64>> = (0..cfg.units() as u64)
        .into_par_iter()
        .map(|u| {
            let mut a = f(&mut PathRng::new(cfg.master_seed, u, false));
            if cfg.antithetic {
                let b = f(&mut PathRng::new(cfg.master_seed, u, true));
                for (x, y) in a.iter_mut().zip(b) {
                    *x = 0.5 * (*x + y);
                }
            }
            debug_assert_eq!(a.len(), width);
            a
        })
        .collect();
    Ok(Samples { width, rows })
}
