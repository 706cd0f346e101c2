//! Exact-event walk of the modulating chain with pluggable accumulators.

use super::scheme::{gaussian_increment, IncrementScheme};
use super::PathRng;
use crate::model::{MapModel, StateDynamics};

pub(crate) trait Visitor {
    /// Continuous evolution over `dt` in a state with dynamics `d`.
    fn advance(&mut self, d: &StateDynamics, dt: f64, rng: &mut PathRng);
    /// A jump `(Δξ, Δη) = (z, c)`.
    fn jump(&mut self, z: f64, c: f64);
    fn observe(&mut self, _k: usize, _t: f64, _state: usize) {}
    /// Called after each chain transition; `false` ends the walk.
    fn transition(&mut self, _from: usize, _to: usize) -> bool {
        true
    }
}

/// Initial state: fixed, or drawn from `π` with the event stream.
pub(crate) fn draw_state(m: &MapModel, fixed: Option<usize>, rng: &mut PathRng) -> usize {
    match fixed {
        Some(j) => j,
        None => pick(m.pi().iter().copied(), 1.0, rng),
    }
}

fn pick(weights: impl Iterator<Item = f64> + Clone, total: f64, rng: &mut PathRng) -> usize {
    let u = rng.uniform() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Walks the chain from `j0` up to `horizon` (possibly infinite), calling
/// `observe` at the sorted times `obs`. Returns the final state.
pub(crate) fn walk<V: Visitor>(
    m: &MapModel,
    j0: usize,
    obs: &[f64],
    horizon: f64,
    rng: &mut PathRng,
    v: &mut V,
) -> usize {
    let q = m.q();
    let n = m.n_states();
    let mut j = j0;
    let mut t = 0.0;
    let mut k = 0;
    while k < obs.len() && obs[k] <= 0.0 {
        v.observe(k, obs[k], j);
        k += 1;
    }
    loop {
        let d = m.state(j);
        let exit = -q[(j, j)];
        let total = exit + d.cp_rate;
        let t_evt = t + rng.exponential(total);
        let stop = t_evt.min(horizon);
        while k < obs.len() && obs[k] <= stop {
            v.advance(d, obs[k] - t, rng);
            t = obs[k];
            v.observe(k, t, j);
            k += 1;
        }
        if t_evt >= horizon {
            if horizon > t {
                v.advance(d, horizon - t, rng);
            }
            return j;
        }
        v.advance(d, t_evt - t, rng);
        t = t_evt;
        if rng.uniform() * total < d.cp_rate {
            let (z, c) = d.cp_law.sample(&mut rng.events);
            v.jump(z, c);
        } else {
            let to = pick((0..n).map(|l| if l == j { 0.0 } else { q[(j, l)] }), exit, rng);
            if let Some(law) = m.transition_law(j, to) {
                let (z, c) = law.sample(&mut rng.events);
                v.jump(z, c);
            }
            let from = j;
            j = to;
            if !v.transition(from, to) {
                return j;
            }
        }
    }
}

/// Additive components `(ξ, η)` with exact Gaussian increments.
#[derive(Debug, Clone, Default)]
pub(crate) struct Additive {
    pub xi: f64,
    pub eta: f64,
}

impl Visitor for Additive {
    fn advance(&mut self, d: &StateDynamics, dt: f64, rng: &mut PathRng) {
        let (a, b) = gaussian_increment(d, dt, rng);
        self.xi += a;
        self.eta += b;
    }
    fn jump(&mut self, z: f64, c: f64) {
        self.xi += z;
        self.eta += c;
    }
}

/// `V ← e^{−Δξ}(V + ∫ e^{ξ_s−ξ_u} dη_s)` per substep, exact jump map.
pub(crate) struct Gou<'a> {
    pub v: f64,
    pub scheme: &'a dyn IncrementScheme,
    pub substeps: usize,
}

pub(crate) fn pieces(scheme: &dyn IncrementScheme, substeps: usize, dt: f64) -> usize {
    if scheme.exact() {
        1
    } else {
        ((dt * substeps as f64).ceil() as usize).max(1)
    }
}

impl Visitor for Gou<'_> {
    fn advance(&mut self, d: &StateDynamics, dt: f64, rng: &mut PathRng) {
        if dt <= 0.0 {
            return;
        }
        let n = pieces(self.scheme, self.substeps, dt);
        let h = dt / n as f64;
        for _ in 0..n {
            let (dxi, integral) = self.scheme.step(d, h, rng);
            self.v = (-dxi).exp() * (self.v + integral);
        }
    }
    fn jump(&mut self, z: f64, c: f64) {
        self.v = (-z).exp() * (self.v + c);
    }
}

/// `W = ∫_0^· e^{ξ_{s−}} dη_s` together with `ξ`.
pub(crate) struct ExpFunctional<'a> {
    pub xi: f64,
    pub w: f64,
    pub scheme: &'a dyn IncrementScheme,
    pub substeps: usize,
}

impl Visitor for ExpFunctional<'_> {
    fn advance(&mut self, d: &StateDynamics, dt: f64, rng: &mut PathRng) {
        if dt <= 0.0 {
            return;
        }
        let n = pieces(self.scheme, self.substeps, dt);
        let h = dt / n as f64;
        for _ in 0..n {
            let (dxi, integral) = self.scheme.step(d, h, rng);
            self.w += self.xi.exp() * integral;
            self.xi += dxi;
        }
    }
    fn jump(&mut self, z: f64, c: f64) {
        self.w += self.xi.exp() * c;
        self.xi += z;
    }
}

/// Sampled MAP path: values at grid times and right after each event.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MapPath {
    pub times: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub state: Vec<usize>,
}

struct Recorder {
    acc: Additive,
    t: f64,
    path: MapPath,
    state: usize,
}

impl Recorder {
    fn push(&mut self) {
        self.path.times.push(self.t);
        self.path.xi.push(self.acc.xi);
        self.path.eta.push(self.acc.eta);
        self.path.state.push(self.state);
    }
}

impl Visitor for Recorder {
    fn advance(&mut self, d: &StateDynamics, dt: f64, rng: &mut PathRng) {
        self.acc.advance(d, dt, rng);
        self.t += dt;
    }
    fn jump(&mut self, z: f64, c: f64) {
        self.acc.jump(z, c);
    }
    fn observe(&mut self, _k: usize, t: f64, state: usize) {
        self.t = t;
        self.state = state;
        self.push();
    }
    fn transition(&mut self, _from: usize, to: usize) -> bool {
        self.state = to;
        self.push();
        true
    }
}

/// One path of `(ξ, η, J)` on `[0, horizon]`, recorded at `grid` and at
/// chain transitions. `start = None` draws `J_0` from `π`.
pub fn simulate_map_path(m: &MapModel, start: Option<usize>, horizon: f64, grid: &[f64], rng: &mut PathRng) -> MapPath {
    let j0 = draw_state(m, start, rng);
    let mut obs: Vec<f64> = grid.iter().copied().filter(|&t| t <= horizon).collect();
    obs.sort_by(f64::total_cmp);
    let mut r = Recorder { acc: Additive::default(), t: 0.0, path: MapPath::default(), state: j0 };
    let last = walk(m, j0, &obs, horizon, rng, &mut r);
    if r.path.times.last() != Some(&horizon) {
        r.t = horizon;
        r.state = last;
        r.push();
    }
    r.path
}

/// `V` sampled at `grid` times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MmgouPath {
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub state: Vec<usize>,
}

struct GouRecorder<'a> {
    gou: Gou<'a>,
    path: MmgouPath,
}

impl Visitor for GouRecorder<'_> {
    fn advance(&mut self, d: &StateDynamics, dt: f64, rng: &mut PathRng) {
        self.gou.advance(d, dt, rng);
    }
    fn jump(&mut self, z: f64, c: f64) {
        self.gou.jump(z, c);
    }
    fn observe(&mut self, _k: usize, t: f64, state: usize) {
        self.path.times.push(t);
        self.path.v.push(self.gou.v);
        self.path.state.push(state);
    }
}

/// One MMGOU path started at `v0`, observed on the sorted `grid`.
pub fn simulate_mmgou_path(
    m: &MapModel,
    v0: f64,
    start: Option<usize>,
    grid: &[f64],
    scheme: &dyn IncrementScheme,
    substeps: usize,
    rng: &mut PathRng,
) -> MmgouPath {
    let j0 = draw_state(m, start, rng);
    let horizon = grid.iter().copied().fold(0.0, f64::max);
    let mut r = GouRecorder { gou: Gou { v: v0, scheme, substeps }, path: MmgouPath::default() };
    walk(m, j0, grid, horizon, rng, &mut r);
    r.path
}
