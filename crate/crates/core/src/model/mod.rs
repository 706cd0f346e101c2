//! Model declaration, validation and transformations of bivariate MAPs.
//!
//! `drift` fields hold the pathwise linear drift of the finite-activity
//! decomposition, so that `E[X_1] = drift + cp_rate·E[jump]` in each state.
//! In the triplet convention with truncation at 1 this drift equals
//! `γ − ∫_{|x|≤1} x ν(dx)`.

pub mod bivariate;
pub mod laws;
pub mod random;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};

pub use bivariate::{BivariateJumpLaw, JointBase, PairMap};
pub use laws::{JumpFamily, JumpLaw, LawRegistry};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use laws::field;

/// Selects one coordinate of the bivariate additive component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    First,
    Second,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::First => "xi",
            Component::Second => "eta",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xi" | "first" | "u" => Ok(Component::First),
            "eta" | "second" | "l" => Ok(Component::Second),
            other => Err(Error::validation("component", format!("unknown component \"{other}\""))),
        }
    }
}

/// Which coordinates the dual model negates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualSelector {
    First,
    Second,
    Both,
}

impl DualSelector {
    fn flags(self) -> (bool, bool) {
        match self {
            DualSelector::First => (true, false),
            DualSelector::Second => (false, true),
            DualSelector::Both => (true, true),
        }
    }
}

/// Per-state Lévy characteristics in finite-activity form.
#[derive(Debug, Clone)]
pub struct StateDynamics {
    pub drift_xi: f64,
    pub drift_eta: f64,
    pub sigma2_xi: f64,
    pub sigma2_eta: f64,
    pub sigma_xi_eta: f64,
    pub cp_rate: f64,
    pub cp_law: BivariateJumpLaw,
}

impl Default for StateDynamics {
    fn default() -> Self {
        StateDynamics {
            drift_xi: 0.0,
            drift_eta: 0.0,
            sigma2_xi: 0.0,
            sigma2_eta: 0.0,
            sigma_xi_eta: 0.0,
            cp_rate: 0.0,
            cp_law: BivariateJumpLaw::zero(),
        }
    }
}

impl StateDynamics {
    pub fn with_drift(drift_xi: f64, drift_eta: f64) -> Self {
        StateDynamics { drift_xi, drift_eta, ..Default::default() }
    }

    pub fn gaussian(mut self, sigma2_xi: f64, sigma2_eta: f64, sigma_xi_eta: f64) -> Self {
        self.sigma2_xi = sigma2_xi;
        self.sigma2_eta = sigma2_eta;
        self.sigma_xi_eta = sigma_xi_eta;
        self
    }

    pub fn jumps(mut self, cp_rate: f64, cp_law: BivariateJumpLaw) -> Self {
        self.cp_rate = cp_rate;
        self.cp_law = cp_law;
        self
    }

    pub fn drift(&self, c: Component) -> f64 {
        match c {
            Component::First => self.drift_xi,
            Component::Second => self.drift_eta,
        }
    }

    pub fn covariance(&self, a: Component, b: Component) -> f64 {
        match (a, b) {
            (Component::First, Component::First) => self.sigma2_xi,
            (Component::Second, Component::Second) => self.sigma2_eta,
            _ => self.sigma_xi_eta,
        }
    }

    /// Lower Cholesky factor of the Gaussian covariance, tolerant to
    /// semidefinite input.
    pub fn cholesky(&self) -> (f64, f64, f64) {
        let l11 = self.sigma2_xi.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { self.sigma_xi_eta / l11 } else { 0.0 };
        let l22 = (self.sigma2_eta - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }

    fn validate(&self, path: &str) -> Result<()> {
        let values = [
            ("drift_xi", self.drift_xi),
            ("drift_eta", self.drift_eta),
            ("sigma2_xi", self.sigma2_xi),
            ("sigma2_eta", self.sigma2_eta),
            ("sigma_xi_eta", self.sigma_xi_eta),
            ("cp_rate", self.cp_rate),
        ];
        for (name, v) in values {
            if !v.is_finite() {
                return Err(Error::validation(format!("{path}.{name}"), "must be finite"));
            }
        }
        for (name, v) in [("sigma2_xi", self.sigma2_xi), ("sigma2_eta", self.sigma2_eta), ("cp_rate", self.cp_rate)] {
            if v < 0.0 {
                return Err(Error::validation(format!("{path}.{name}"), "must be >= 0"));
            }
        }
        let det = self.sigma2_xi * self.sigma2_eta - self.sigma_xi_eta * self.sigma_xi_eta;
        if det < -1e-12 {
            return Err(Error::validation(
                path,
                format!("Gaussian covariance is not positive semidefinite (det = {det:e})"),
            ));
        }
        Ok(())
    }

    fn to_json(&self) -> Value {
        json!({
            "drift_xi": self.drift_xi,
            "drift_eta": self.drift_eta,
            "sigma2_xi": self.sigma2_xi,
            "sigma2_eta": self.sigma2_eta,
            "sigma_xi_eta": self.sigma_xi_eta,
            "cp_rate": self.cp_rate,
            "cp_law": self.cp_law.to_json(),
        })
    }
}

pub type TransitionJumps = BTreeMap<(usize, usize), BivariateJumpLaw>;

/// A validated bivariate MAP `((ξ, η), J)`.
#[derive(Debug, Clone)]
pub struct MapModel {
    q: Matrix,
    pi: Vector,
    dynamics: Vec<StateDynamics>,
    transitions: TransitionJumps,
}

impl MapModel {
    pub fn new(q: Matrix, dynamics: Vec<StateDynamics>, transitions: TransitionJumps) -> Result<Self> {
        check_intensity(&q)?;
        let n = q.nrows();
        if dynamics.len() != n {
            return Err(Error::validation(
                "dynamics",
                format!("expected {n} entries, got {}", dynamics.len()),
            ));
        }
        for (j, d) in dynamics.iter().enumerate() {
            d.validate(&format!("dynamics[{j}]"))?;
        }
        for &(i, j) in transitions.keys() {
            let path = format!("transition_jumps.{}->{}", i + 1, j + 1);
            if i >= n || j >= n || i == j {
                return Err(Error::validation(path, "not a transition between distinct states"));
            }
            if q[(i, j)] <= 0.0 {
                return Err(Error::validation(path, "transition has zero intensity"));
            }
        }
        let pi = stationary_distribution(&q)?;
        Ok(MapModel { q, pi, dynamics, transitions })
    }

    pub fn n_states(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn pi(&self) -> &Vector {
        &self.pi
    }

    pub fn dynamics(&self) -> &[StateDynamics] {
        &self.dynamics
    }

    pub fn state(&self, j: usize) -> &StateDynamics {
        &self.dynamics[j]
    }

    pub fn transitions(&self) -> &TransitionJumps {
        &self.transitions
    }

    /// Jump law attached to the transition `i → j`; `None` means the point mass at 0.
    pub fn transition_law(&self, i: usize, j: usize) -> Option<&BivariateJumpLaw> {
        self.transitions.get(&(i, j))
    }

    pub fn to_json(&self) -> Value {
        let n = self.n_states();
        let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| self.q[(i, j)]).collect()).collect();
        let mut jumps = serde_json::Map::new();
        for (&(i, j), law) in &self.transitions {
            jumps.insert(format!("{}->{}", i + 1, j + 1), law.to_json());
        }
        json!({
            "states": n,
            "Q": q,
            "dynamics": self.dynamics.iter().map(StateDynamics::to_json).collect::<Vec<_>>(),
            "transition_jumps": Value::Object(jumps),
        })
    }
}

/// Checks that `q` is a conservative, irreducible intensity matrix.
pub fn check_intensity(q: &Matrix) -> Result<()> {
    let n = q.nrows();
    if n == 0 || q.ncols() != n {
        return Err(Error::validation("Q", format!("must be a non-empty square matrix, got {}x{}", q.nrows(), q.ncols())));
    }
    for i in 0..n {
        for j in 0..n {
            if !q[(i, j)].is_finite() {
                return Err(Error::validation(format!("Q[{i}][{j}]"), "must be finite"));
            }
            if i != j && q[(i, j)] < 0.0 {
                return Err(Error::validation(format!("Q[{i}][{j}]"), "off-diagonal entry is negative"));
            }
        }
        let s: f64 = q.row(i).iter().sum();
        if s.abs() > 1e-12 {
            return Err(Error::validation(format!("Q[{i}]"), format!("row sums to {s}, expected 0")));
        }
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let rate = if forward { q[(i, j)] } else { q[(j, i)] };
                if i != j && rate > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    for forward in [true, false] {
        if let Some(k) = reach(forward).iter().position(|s| !s) {
            return Err(Error::ReducibleChain(format!(
                "state {} is not {} state 1",
                k + 1,
                if forward { "reachable from" } else { "able to reach" }
            )));
        }
    }
    Ok(())
}

/// Stationary law of the chain by Grassmann-Taksar-Heyman elimination.
pub fn stationary_distribution(q: &Matrix) -> Result<Vector> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::NonSquare { rows: n, cols: q.ncols() });
    }
    if n == 1 {
        return Ok(Vector::from_element(1, 1.0));
    }
    let mut a = q.clone();
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if !(s > 0.0) {
            return Err(Error::SingularSystem(format!("state {} has no exit into lower states", k + 1)));
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    a[(i, j)] += a[(i, k)] * a[(k, j)];
                }
            }
        }
    }
    let mut pi = Vector::zeros(n);
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
    }
    let pi = &pi / pi.sum();
    let scale = crate::linalg::norm_inf(q).max(1.0);
    let resid = (q.transpose() * &pi).amax() / scale;
    let sum_err = (pi.sum() - 1.0).abs();
    if !(resid <= 1e-10 && sum_err <= 1e-10) {
        return Err(Error::SingularSystem(format!(
            "stationary residual {resid:e} (normalization error {sum_err:e}) exceeds 1e-10"
        )));
    }
    if let Some(k) = pi.iter().position(|&p| p <= 0.0) {
        return Err(Error::SingularSystem(format!("stationary mass of state {} is not positive", k + 1)));
    }
    Ok(pi)
}

pub fn parse_model(text: &str) -> Result<MapModel> {
    parse_model_with(text, &LawRegistry::standard())
}

fn opt_number(obj: &Value, key: &str, path: &str) -> Result<f64> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(0.0),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Schema(format!("{path}.{key}: expected a number"))),
    }
}

pub fn parse_model_with(text: &str, registry: &LawRegistry) -> Result<MapModel> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Schema(format!("invalid JSON: {e}")))?;
    model_from_value(&doc, registry)
}

pub fn model_from_value(doc: &Value, registry: &LawRegistry) -> Result<MapModel> {
    if !doc.is_object() {
        return Err(Error::Schema("model document must be an object".into()));
    }
    let states = field(doc, "states", "model")?
        .as_u64()
        .ok_or_else(|| Error::Schema("states: expected a positive integer".into()))? as usize;
    if states == 0 {
        return Err(Error::validation("states", "must be >= 1"));
    }
    let rows = field(doc, "Q", "model")?
        .as_array()
        .ok_or_else(|| Error::Schema("Q: expected an array of rows".into()))?;
    if rows.len() != states {
        return Err(Error::validation("Q", format!("expected {states} rows, got {}", rows.len())));
    }
    let mut q = Matrix::zeros(states, states);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Schema(format!("Q[{i}]: expected an array")))?;
        if row.len() != states {
            return Err(Error::validation(format!("Q[{i}]"), format!("expected {states} entries, got {}", row.len())));
        }
        for (j, x) in row.iter().enumerate() {
            q[(i, j)] = x
                .as_f64()
                .ok_or_else(|| Error::Schema(format!("Q[{i}][{j}]: expected a number")))?;
        }
    }
    let dyn_list = field(doc, "dynamics", "model")?
        .as_array()
        .ok_or_else(|| Error::Schema("dynamics: expected an array".into()))?;
    if dyn_list.len() != states {
        return Err(Error::validation("dynamics", format!("expected {states} entries, got {}", dyn_list.len())));
    }
    let mut dynamics = Vec::with_capacity(states);
    for (j, d) in dyn_list.iter().enumerate() {
        let path = format!("dynamics[{j}]");
        if !d.is_object() {
            return Err(Error::Schema(format!("{path}: expected an object")));
        }
        let cp_law = match d.get("cp_law") {
            None | Some(Value::Null) => BivariateJumpLaw::zero(),
            Some(v) => BivariateJumpLaw::from_json(v, &format!("{path}.cp_law"), registry)?,
        };
        dynamics.push(StateDynamics {
            drift_xi: opt_number(d, "drift_xi", &path)?,
            drift_eta: opt_number(d, "drift_eta", &path)?,
            sigma2_xi: opt_number(d, "sigma2_xi", &path)?,
            sigma2_eta: opt_number(d, "sigma2_eta", &path)?,
            sigma_xi_eta: opt_number(d, "sigma_xi_eta", &path)?,
            cp_rate: opt_number(d, "cp_rate", &path)?,
            cp_law,
        });
    }
    let mut transitions = TransitionJumps::new();
    if let Some(tj) = doc.get("transition_jumps").filter(|v| !v.is_null()) {
        let obj = tj
            .as_object()
            .ok_or_else(|| Error::Schema("transition_jumps: expected an object".into()))?;
        for (key, law) in obj {
            let path = format!("transition_jumps.{key}");
            let (i, j) = parse_transition_key(key, states).ok_or_else(|| {
                Error::validation(&path, format!("key must be \"i->j\" with 1 <= i, j <= {states}"))
            })?;
            transitions.insert((i, j), BivariateJumpLaw::from_json(law, &path, registry)?);
        }
    }
    MapModel::new(q, dynamics, transitions)
}

fn parse_transition_key(key: &str, n: usize) -> Option<(usize, usize)> {
    let (a, b) = key.split_once("->")?;
    let i: usize = a.trim().parse().ok()?;
    let j: usize = b.trim().parse().ok()?;
    (1..=n).contains(&i).then_some(())?;
    (1..=n).contains(&j).then_some(())?;
    Some((i - 1, j - 1))
}

fn map_dynamics(
    m: &MapModel,
    f: impl Fn(&StateDynamics) -> Result<StateDynamics>,
    g: impl Fn(&BivariateJumpLaw) -> Result<BivariateJumpLaw>,
) -> Result<MapModel> {
    let dynamics = m.dynamics.iter().map(f).collect::<Result<Vec<_>>>()?;
    let transitions = m
        .transitions
        .iter()
        .map(|(&k, law)| Ok((k, g(law)?)))
        .collect::<Result<TransitionJumps>>()?;
    Ok(MapModel { q: m.q.clone(), pi: m.pi.clone(), dynamics, transitions })
}

/// The `((U, L), J)` model: `e^{−ξ} = ℰ(U)` and `V` solves `dV = V₋ dU + dL`.
pub fn ul_characteristics(m: &MapModel) -> Result<MapModel> {
    map_dynamics(
        m,
        |d| {
            Ok(StateDynamics {
                drift_xi: -d.drift_xi + 0.5 * d.sigma2_xi,
                drift_eta: d.drift_eta - d.sigma_xi_eta,
                sigma2_xi: d.sigma2_xi,
                sigma2_eta: d.sigma2_eta,
                sigma_xi_eta: -d.sigma_xi_eta,
                cp_rate: d.cp_rate,
                cp_law: d.cp_law.mapped(PairMap::TO_UL)?,
            })
        },
        |law| law.mapped(PairMap::TO_UL),
    )
}

/// The `((ξ, L), J)` model, with `L` as in [`ul_characteristics`].
pub fn xi_l_characteristics(m: &MapModel) -> Result<MapModel> {
    map_dynamics(
        m,
        |d| {
            Ok(StateDynamics {
                drift_eta: d.drift_eta - d.sigma_xi_eta,
                cp_law: d.cp_law.mapped(PairMap::TO_XI_L)?,
                ..d.clone()
            })
        },
        |law| law.mapped(PairMap::TO_XI_L),
    )
}

/// Time-reversed model under the stationary law, with the selected
/// coordinates negated.
pub fn dual_model(m: &MapModel, which: DualSelector) -> Result<MapModel> {
    let (neg1, neg2) = which.flags();
    let n = m.n_states();
    let pi = &m.pi;
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j {
                q[(i, j)] = pi[j] / pi[i] * m.q[(j, i)];
                off += q[(i, j)];
            }
        }
        q[(i, i)] = -off;
    }
    let s1 = if neg1 { -1.0 } else { 1.0 };
    let s2 = if neg2 { -1.0 } else { 1.0 };
    let dynamics = m
        .dynamics
        .iter()
        .map(|d| StateDynamics {
            drift_xi: s1 * d.drift_xi,
            drift_eta: s2 * d.drift_eta,
            sigma2_xi: d.sigma2_xi,
            sigma2_eta: d.sigma2_eta,
            sigma_xi_eta: s1 * s2 * d.sigma_xi_eta,
            cp_rate: d.cp_rate,
            cp_law: d.cp_law.negated(neg1, neg2),
        })
        .collect();
    let transitions = m
        .transitions
        .iter()
        .map(|(&(i, j), law)| ((j, i), law.negated(neg1, neg2)))
        .collect();
    // the dual chain has the same stationary law
    check_intensity(&q)?;
    Ok(MapModel { q, pi: pi.clone(), dynamics, transitions })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_STATE: &str = r#"{
        "states": 2,
        "Q": [[-1, 1], [1, -1]],
        "dynamics": [{"drift_xi": 1}, {"drift_xi": 2}]
    }"#;

    #[test]
    fn minimal_one_state() {
        let m = parse_model(r#"{"states": 1, "Q": [[0]], "dynamics": [{"drift_xi": 1}]}"#).unwrap();
        assert_eq!(m.n_states(), 1);
        assert_eq!(m.q()[(0, 0)], 0.0);
        assert_eq!(m.pi()[0], 1.0);
    }

    #[test]
    fn symmetric_chain_is_uniform() {
        let m = parse_model(TWO_STATE).unwrap();
        assert!((m.pi()[0] - 0.5).abs() < 1e-15);
        assert!((m.pi()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn broken_row_sum_names_row() {
        let doc = r#"{"states": 2, "Q": [[-1, 1.1], [1, -1]], "dynamics": [{}, {}]}"#;
        match parse_model(doc) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "Q[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reducible_chain_rejected() {
        let doc = r#"{"states": 2, "Q": [[-1, 1], [0, 0]], "dynamics": [{}, {}]}"#;
        assert!(matches!(parse_model(doc), Err(Error::ReducibleChain(_))));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_model("{"), Err(Error::Schema(_))));
        assert!(matches!(parse_model(r#"{"Q": [[0]]}"#), Err(Error::Schema(_))));
        let bad_law = r#"{"states": 1, "Q": [[0]], "dynamics": [{"cp_rate": 1, "cp_law": {"joint": "independent", "xi": {"family": "normal", "mean": 0}, "eta": {"family": "constant", "value": 0}}}]}"#;
        assert!(matches!(parse_model(bad_law), Err(Error::Schema(_))));
    }

    #[test]
    fn transition_keys_validated() {
        let doc = r#"{"states": 2, "Q": [[-1, 1], [1, -1]], "dynamics": [{}, {}],
            "transition_jumps": {"1->1": {"joint": "discrete", "atoms": [[1, 0, 1]]}}}"#;
        assert!(matches!(parse_model(doc), Err(Error::Validation { .. })));
        let doc = r#"{"states": 2, "Q": [[-1, 1], [1, -1]], "dynamics": [{}, {}],
            "transition_jumps": {"1->2": {"joint": "discrete", "atoms": [[0.1, 0, 1]]}}}"#;
        let m = parse_model(doc).unwrap();
        assert!(m.transition_law(0, 1).is_some());
        assert!(m.transition_law(1, 0).is_none());
    }

    #[test]
    fn covariance_must_be_psd() {
        let doc = r#"{"states": 1, "Q": [[0]], "dynamics": [{"sigma2_xi": 1, "sigma2_eta": 1, "sigma_xi_eta": 2}]}"#;
        match parse_model(doc) {
            Err(Error::Validation { path, .. }) => assert_eq!(path, "dynamics[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detailed_balance_example() {
        let q = Matrix::from_row_slice(2, 2, &[-2.0, 2.0, 1.0, -1.0]);
        let pi = stationary_distribution(&q).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn ul_of_pure_drift() {
        let m = parse_model(TWO_STATE).unwrap();
        let ul = ul_characteristics(&m).unwrap();
        assert_eq!(ul.state(0).drift_xi, -1.0);
        assert_eq!(ul.state(1).drift_xi, -2.0);
        assert_eq!(ul.state(0).drift_eta, 0.0);
    }

    #[test]
    fn ul_brownian_drift_correction() {
        let m = parse_model(r#"{"states": 1, "Q": [[0]], "dynamics": [{"sigma2_xi": 1}]}"#).unwrap();
        let ul = ul_characteristics(&m).unwrap();
        assert_eq!(ul.state(0).drift_xi, 0.5);
    }

    #[test]
    fn ul_transition_constant_jump() {
        let doc = r#"{"states": 2, "Q": [[-1, 1], [1, -1]], "dynamics": [{}, {}],
            "transition_jumps": {"1->2": {"joint": "independent",
                "xi": {"family": "constant", "value": 0.6931471805599453},
                "eta": {"family": "constant", "value": 0}}}}"#;
        let ul = ul_characteristics(&parse_model(doc).unwrap()).unwrap();
        let atoms = ul.transition_law(0, 1).unwrap().atoms().unwrap();
        assert!((atoms[0].0 + 0.5).abs() < 1e-15);
        assert_eq!(atoms[0].1, 0.0);
    }

    #[test]
    fn dual_of_reversible_chain() {
        let m = parse_model(TWO_STATE).unwrap();
        let d = dual_model(&m, DualSelector::First).unwrap();
        assert!((d.q() - m.q()).amax() < 1e-15);
        assert_eq!(d.state(0).drift_xi, -1.0);
        assert_eq!(d.state(1).drift_xi, -2.0);
    }

    #[test]
    fn dual_rates() {
        let doc = r#"{"states": 2, "Q": [[-2, 2], [1, -1]], "dynamics": [{}, {}]}"#;
        let d = dual_model(&parse_model(doc).unwrap(), DualSelector::Both).unwrap();
        assert!((d.q()[(0, 1)] - 2.0).abs() < 1e-14);
        assert!((d.q()[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn transitions_swap_under_dual() {
        let doc = r#"{"states": 2, "Q": [[-2, 2], [1, -1]], "dynamics": [{}, {}],
            "transition_jumps": {"1->2": {"joint": "discrete", "atoms": [[0.5, 1.0, 1]]}}}"#;
        let d = dual_model(&parse_model(doc).unwrap(), DualSelector::First).unwrap();
        assert!(d.transition_law(0, 1).is_none());
        let atoms = d.transition_law(1, 0).unwrap().atoms().unwrap();
        assert_eq!(atoms[0], (-0.5, 1.0, 1.0));
    }

    #[test]
    fn json_round_trip() {
        let m = parse_model(TWO_STATE).unwrap();
        let again = model_from_value(&m.to_json(), &LawRegistry::standard()).unwrap();
        assert_eq!(again.q(), m.q());
        assert_eq!(again.state(1).drift_xi, 2.0);
    }
}
