//! Ensemble estimators mirroring the closed forms.

use super::path::{draw_state, walk, Additive, ExpFunctional, Gou, Visitor};
use super::{run_ensemble, Estimate, PathRng, SchemeRegistry, SimConfig};
use crate::error::{Error, Result};
use crate::linalg::leading_eigenvalue;
use crate::map_moments::Start;
use crate::mmgou::{psi_xi, stationarity_check};
use crate::model::{dual_model, xi_l_characteristics, Component, DualSelector, MapModel, StateDynamics};

fn fixed_state(m: &MapModel, start: Start) -> Result<Option<usize>> {
    start.vector(m)?;
    Ok(match start {
        Start::State(j) => Some(j),
        Start::Stationary => None,
    })
}

fn pick_component(a: &Additive, c: Component) -> f64 {
    match c {
        Component::First => a.xi,
        Component::Second => a.eta,
    }
}

/// Monte Carlo counterparts of the MAP closed forms at one time `t`.
#[derive(Debug, Clone)]
pub struct MapEnsemble {
    pub mean: Estimate,
    pub second_moment: Estimate,
    pub variance: Estimate,
    /// `E[X_t 1{J_t = i}]`.
    pub mean_hat: Vec<Estimate>,
    /// `E[e^{w X_t} 1{J_t = i}]`.
    pub char_fn: Vec<Estimate>,
    pub occupation: Vec<Estimate>,
}

pub fn estimate_map_moments(m: &MapModel, c: Component, start: Start, t: f64, w: f64, cfg: &SimConfig) -> Result<MapEnsemble> {
    let fixed = fixed_state(m, start)?;
    let n = m.n_states();
    let width = 2 + 3 * n;
    let s = run_ensemble(cfg, width, |rng| {
        let j0 = draw_state(m, fixed, rng);
        let mut acc = Additive::default();
        let j = walk(m, j0, &[], t, rng, &mut acc);
        let x = pick_component(&acc, c);
        let mut row = vec![0.0; width];
        row[0] = x;
        row[1] = x * x;
        row[2 + j] = x;
        row[2 + n + j] = (w * x).exp();
        row[2 + 2 * n + j] = 1.0;
        row
    })?;
    Ok(MapEnsemble {
        mean: s.column(0),
        second_moment: s.column(1),
        variance: s.variance_of(0, 1),
        mean_hat: (0..n).map(|i| s.column(2 + i)).collect(),
        char_fn: (0..n).map(|i| s.column(2 + n + i)).collect(),
        occupation: (0..n).map(|i| s.column(2 + 2 * n + i)).collect(),
    })
}

struct Occupation {
    time: Vec<f64>,
    state: usize,
}

impl Visitor for Occupation {
    fn advance(&mut self, _d: &StateDynamics, dt: f64, _rng: &mut PathRng) {
        self.time[self.state] += dt;
    }
    fn jump(&mut self, _z: f64, _c: f64) {}
    fn transition(&mut self, _from: usize, to: usize) -> bool {
        self.state = to;
        true
    }
}

/// Fraction of `[0, horizon]` spent in each state, `J_0 ~ π`.
pub fn estimate_occupation(m: &MapModel, cfg: &SimConfig) -> Result<Vec<Estimate>> {
    let n = m.n_states();
    let horizon = cfg.horizon;
    if horizon <= 0.0 {
        return Err(Error::validation("horizon", "occupation needs a positive horizon"));
    }
    let s = run_ensemble(cfg, n, |rng| {
        let j0 = draw_state(m, None, rng);
        let mut occ = Occupation { time: vec![0.0; n], state: j0 };
        walk(m, j0, &[], horizon, rng, &mut occ);
        occ.time.iter().map(|x| x / horizon).collect()
    })?;
    Ok((0..n).map(|i| s.column(i)).collect())
}

/// `V_t` moments at one observation time.
#[derive(Debug, Clone)]
pub struct MmgouPoint {
    pub t: f64,
    pub mean: Estimate,
    pub second_moment: Estimate,
    pub variance: Estimate,
}

struct GouObserver<'a> {
    gou: Gou<'a>,
    values: Vec<f64>,
}

impl Visitor for GouObserver<'_> {
    fn advance(&mut self, d: &StateDynamics, dt: f64, rng: &mut PathRng) {
        self.gou.advance(d, dt, rng);
    }
    fn jump(&mut self, z: f64, c: f64) {
        self.gou.jump(z, c);
    }
    fn observe(&mut self, k: usize, _t: f64, _state: usize) {
        self.values[k] = self.gou.v;
    }
}

fn sorted_times(times: &[f64], name: &str) -> Result<Vec<f64>> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::validation(name, "times must be finite and >= 0"));
    }
    let mut v = times.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `E[V_t]`, `E[V_t²]` for deterministic `V_0 = v0`.
pub fn estimate_mmgou(m: &MapModel, v0: f64, start: Start, times: &[f64], cfg: &SimConfig) -> Result<Vec<MmgouPoint>> {
    let fixed = fixed_state(m, start)?;
    let scheme = SchemeRegistry::standard().resolve(&cfg.scheme, m)?;
    let obs = sorted_times(times, "times")?;
    let horizon = obs.last().copied().unwrap_or(0.0);
    let k = obs.len();
    let s = run_ensemble(cfg, 2 * k, |rng| {
        let j0 = draw_state(m, fixed, rng);
        let mut o = GouObserver { gou: Gou { v: v0, scheme: scheme.as_ref(), substeps: cfg.substeps }, values: vec![0.0; k] };
        walk(m, j0, &obs, horizon, rng, &mut o);
        o.values.iter().copied().chain(o.values.iter().map(|v| v * v)).collect()
    })?;
    Ok((0..k)
        .map(|i| MmgouPoint {
            t: obs[i],
            mean: s.column(i),
            second_moment: s.column(k + i),
            variance: s.variance_of(i, k + i),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationaryMode {
    /// Run forward from `V_0 = 0`, `J_0 ~ π`, for the given burn-in.
    Forward { burn: f64 },
    /// Truncated exponential functional of the dual; `None` picks the
    /// horizon where `e^{λ_max^ξ(−1)·T} = 1e-4`.
    Dual { truncation: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct StationaryEnsemble {
    pub mode: StationaryMode,
    pub horizon: f64,
    /// `moments[k-1]` estimates `μ_k`.
    pub moments: Vec<Estimate>,
    /// `hats[k-1][i]` estimates `E[V^k 1{J = i}]`.
    pub hats: Vec<Vec<Estimate>>,
    pub variance: Estimate,
    /// `e^{λ_max^ξ(−1)·T}` for dual mode.
    pub truncation_factor: Option<f64>,
    pub warnings: Vec<String>,
}

fn powers_row(v: f64, j: usize, n: usize, order: usize) -> Vec<f64> {
    let mut row = vec![0.0; order * (n + 1)];
    let mut p = 1.0;
    for k in 0..order {
        p *= v;
        row[k] = p;
        row[order + k * n + j] = p;
    }
    row
}

/// Samples of the stationary law of `V`, moments of order `1..=order`.
pub fn sample_stationary(m: &MapModel, mode: StationaryMode, order: usize, cfg: &SimConfig) -> Result<StationaryEnsemble> {
    let order = order.max(2);
    let mut warnings = Vec::new();
    let report = stationarity_check(m, order as f64);
    if !report.exists {
        warnings.push(format!(
            "stationarity conditions fail at kappa={order}; estimates depend on the horizon"
        ));
    }
    let scheme = SchemeRegistry::standard().resolve(&cfg.scheme, m)?;
    let n = m.n_states();
    let width = order * (n + 1);
    let (horizon, factor, s) = match mode {
        StationaryMode::Forward { burn } => {
            let s = run_ensemble(cfg, width, |rng| {
                let j0 = draw_state(m, None, rng);
                let mut g = Gou { v: 0.0, scheme: scheme.as_ref(), substeps: cfg.substeps };
                let j = walk(m, j0, &[], burn, rng, &mut g);
                powers_row(g.v, j, n, order)
            })?;
            (burn, None, s)
        }
        StationaryMode::Dual { truncation } => {
            let lambda = psi_xi(m, 1.0).and_then(|p| leading_eigenvalue(&p)).unwrap_or(f64::INFINITY);
            let horizon = match truncation {
                Some(t) => t,
                None if lambda < 0.0 => 1e-4f64.ln() / lambda,
                None => {
                    warnings.push(format!("lambda_max(-1) = {lambda} >= 0; dual truncation falls back to the configured horizon"));
                    cfg.horizon
                }
            };
            let dual = dual_model(&xi_l_characteristics(m)?, DualSelector::Both)?;
            let dual_scheme = SchemeRegistry::standard().resolve(&cfg.scheme, &dual)?;
            let s = run_ensemble(cfg, width, |rng| {
                let j0 = draw_state(&dual, None, rng);
                let mut f = ExpFunctional { xi: 0.0, w: 0.0, scheme: dual_scheme.as_ref(), substeps: cfg.substeps };
                walk(&dual, j0, &[], horizon, rng, &mut f);
                powers_row(-f.w, j0, n, order)
            })?;
            (horizon, Some((lambda * horizon).exp()), s)
        }
    };
    Ok(StationaryEnsemble {
        mode,
        horizon,
        moments: (0..order).map(|k| s.column(k)).collect(),
        hats: (0..order).map(|k| (0..n).map(|i| s.column(order + k * n + i)).collect()).collect(),
        variance: s.variance_of(0, 1),
        truncation_factor: factor,
        warnings,
    })
}

/// Stationary-lag autocovariance after a forward burn-in.
#[derive(Debug, Clone)]
pub struct AcfEnsemble {
    pub lags: Vec<f64>,
    pub covariance: Vec<Estimate>,
}

pub fn estimate_autocovariance(m: &MapModel, burn: f64, lags: &[f64], cfg: &SimConfig) -> Result<AcfEnsemble> {
    let lags = sorted_times(lags, "lags")?;
    let scheme = SchemeRegistry::standard().resolve(&cfg.scheme, m)?;
    let k = lags.len();
    let mut obs = vec![burn];
    obs.extend(lags.iter().map(|h| burn + h));
    let horizon = obs.iter().copied().fold(burn, f64::max);
    // columns: V_s, V_{s+h}, V_s·V_{s+h}
    let s = run_ensemble(cfg, 1 + 2 * k, |rng| {
        let j0 = draw_state(m, None, rng);
        let mut o = GouObserver { gou: Gou { v: 0.0, scheme: scheme.as_ref(), substeps: cfg.substeps }, values: vec![0.0; k + 1] };
        walk(m, j0, &obs, horizon, rng, &mut o);
        let v0 = o.values[0];
        let mut row = vec![v0];
        row.extend(&o.values[1..]);
        row.extend(o.values[1..].iter().map(|x| x * v0));
        row
    })?;
    Ok(AcfEnsemble { covariance: (0..k).map(|i| s.covariance_of(0, 1 + i, 1 + k + i)).collect(), lags })
}

#[derive(Debug, Clone)]
pub struct ReturnEnsemble {
    pub estimate: Estimate,
    /// First-half and second-half means agree within 4 combined standard
    /// errors and everything is finite.
    pub stabilized: bool,
}

struct ReturnWalk {
    acc: Additive,
    home: usize,
}

impl Visitor for ReturnWalk {
    fn advance(&mut self, d: &StateDynamics, dt: f64, rng: &mut PathRng) {
        self.acc.advance(d, dt, rng);
    }
    fn jump(&mut self, z: f64, c: f64) {
        self.acc.jump(z, c);
    }
    fn transition(&mut self, _from: usize, to: usize) -> bool {
        to != self.home
    }
}

/// `E_j[e^{κ X_τ}]` at the first return time `τ` of `J` to `j`.
pub fn estimate_return_exp_moment(m: &MapModel, c: Component, j: usize, kappa: f64, cfg: &SimConfig) -> Result<ReturnEnsemble> {
    if m.n_states() < 2 {
        return Err(Error::Precondition("return times need at least two states".into()));
    }
    Start::State(j).vector(m)?;
    let s = run_ensemble(cfg, 1, |rng| {
        let mut w = ReturnWalk { acc: Additive::default(), home: j };
        walk(m, j, &[], f64::INFINITY, rng, &mut w);
        vec![(kappa * pick_component(&w.acc, c)).exp()]
    })?;
    let estimate = s.column(0);
    let half = s.n() / 2;
    let stabilized = if half >= 2 {
        let split = |rows: &[Vec<f64>]| super::Samples { width: 1, rows: rows.to_vec() }.column(0);
        let (a, b) = (split(&s.rows[..half]), split(&s.rows[half..]));
        let tol = 4.0 * (a.se * a.se + b.se * b.se).sqrt();
        estimate.mean.is_finite() && estimate.se.is_finite() && (a.mean - b.mean).abs() <= tol
    } else {
        estimate.mean.is_finite()
    };
    Ok(ReturnEnsemble { estimate, stabilized })
}
