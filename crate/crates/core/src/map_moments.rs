//! Closed-form moments of a single coordinate of a MAP.

use crate::error::{Error, Result};
use crate::linalg::{det, expm, leading_eigenvalue, norm_inf, ones, spectral_radius, unit, van_loan_integral, Matrix, Vector};
use crate::model::{Component, MapModel};

/// Initial condition of the modulating chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    State(usize),
    Stationary,
}

impl Start {
    pub fn vector(self, m: &MapModel) -> Result<Vector> {
        match self {
            Start::State(j) if j < m.n_states() => Ok(unit(m.n_states(), j)),
            Start::State(j) => Err(Error::validation(
                "state",
                format!("state {} out of range 1..={}", j + 1, m.n_states()),
            )),
            Start::Stationary => Ok(m.pi().clone()),
        }
    }
}

/// `E[e^{w Z}]` of the transition jump `i → k` (1 without a declared law).
pub fn transition_mgf(m: &MapModel, i: usize, k: usize, c: Component, w: f64) -> Result<f64> {
    match m.transition_law(i, k) {
        Some(law) => law.mgf(c, w),
        None => Ok(1.0),
    }
}

/// Raw cross moment `E[Z_1^a Z_2^b]` of the transition jump `i → k`.
pub fn transition_moment(m: &MapModel, i: usize, k: usize, a: u32, b: u32) -> f64 {
    match m.transition_law(i, k) {
        Some(law) => law.moment(a, b),
        None if a == 0 && b == 0 => 1.0,
        None => 0.0,
    }
}

fn cross_powers(a: Component, b: Component) -> (u32, u32) {
    match (a, b) {
        (Component::First, Component::First) => (2, 0),
        (Component::Second, Component::Second) => (0, 2),
        _ => (1, 1),
    }
}

fn single_power(c: Component) -> (u32, u32) {
    match c {
        Component::First => (1, 0),
        Component::Second => (0, 1),
    }
}

/// Laplace exponent `ψ_j(w)` of the Lévy part in state `j`; `+∞` if divergent.
pub fn laplace_exponent(m: &MapModel, j: usize, c: Component, w: f64) -> Result<f64> {
    let d = m.state(j);
    let mut psi = d.drift(c) * w + 0.5 * d.covariance(c, c) * w * w;
    if d.cp_rate > 0.0 && w != 0.0 {
        let g = d.cp_law.mgf(c, w)?;
        if !g.is_finite() {
            return Ok(f64::INFINITY);
        }
        psi += d.cp_rate * (g - 1.0);
    }
    Ok(psi)
}

/// Matrix exponent `Ψ(w) = diag(ψ_j(w)) + Qᵀ ∘ (E[e^{w Z^{jk}}])ᵀ`.
pub fn matrix_exponent(m: &MapModel, c: Component, w: f64) -> Result<Matrix> {
    let n = m.n_states();
    let q = m.q();
    let mut psi = q.transpose();
    let mut bad = Vec::new();
    for j in 0..n {
        let p = laplace_exponent(m, j, c, w)?;
        if p.is_finite() {
            psi[(j, j)] += p;
        } else {
            bad.push(format!("state {}: E[exp({w} {c}_1)] diverges", j + 1));
        }
        for k in 0..n {
            if k != j && q[(j, k)] > 0.0 {
                let g = transition_mgf(m, j, k, c, w)?;
                if g.is_finite() {
                    psi[(k, j)] *= g;
                } else {
                    bad.push(format!("transition {}->{}: E[exp({w} Z)] diverges", j + 1, k + 1));
                }
            }
        }
    }
    if bad.is_empty() {
        Ok(psi)
    } else {
        Err(Error::DivergentMoment(bad))
    }
}

fn check_abs_moments(m: &MapModel, comps: &[Component], p: f64) -> Result<()> {
    let mut bad = Vec::new();
    for (j, d) in m.dynamics().iter().enumerate() {
        if d.cp_rate > 0.0 {
            for &c in comps {
                if !d.cp_law.abs_moment_finite(c, p) {
                    bad.push(format!("state {}: E|{c} jump|^{p} diverges", j + 1));
                }
            }
        }
    }
    for (&(i, k), law) in m.transitions() {
        for &c in comps {
            if !law.abs_moment_finite(c, p) {
                bad.push(format!("transition {}->{}: E|{c} jump|^{p} diverges", i + 1, k + 1));
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::DivergentMoment(bad))
    }
}

/// Expectation matrix `ε[X] = diag(E[X_1^{(j)}]) + Qᵀ ∘ (E[Z^{ij}])ᵀ`.
pub fn expectation_matrix(m: &MapModel, c: Component) -> Result<Matrix> {
    check_abs_moments(m, &[c], 1.0)?;
    let (a, b) = single_power(c);
    let n = m.n_states();
    let q = m.q();
    let mut eps = Matrix::zeros(n, n);
    for j in 0..n {
        let d = m.state(j);
        let jump = if d.cp_rate > 0.0 { d.cp_rate * d.cp_law.moment(a, b) } else { 0.0 };
        eps[(j, j)] = d.drift(c) + jump;
        for k in 0..n {
            if k != j && q[(j, k)] > 0.0 {
                eps[(k, j)] = q[(j, k)] * transition_moment(m, j, k, a, b);
            }
        }
    }
    Ok(eps)
}

/// `ε[[A, B]] = diag(σ_AB + cp_rate·E[ζ_A ζ_B]) + Qᵀ ∘ (E[Z_A Z_B])ᵀ`.
pub fn quadratic_expectation_matrix(m: &MapModel, a: Component, b: Component) -> Result<Matrix> {
    check_abs_moments(m, &[a, b], 2.0)?;
    let (pa, pb) = cross_powers(a, b);
    let n = m.n_states();
    let q = m.q();
    let mut eps = Matrix::zeros(n, n);
    for j in 0..n {
        let d = m.state(j);
        let jump = if d.cp_rate > 0.0 { d.cp_rate * d.cp_law.moment(pa, pb) } else { 0.0 };
        eps[(j, j)] = d.covariance(a, b) + jump;
        for k in 0..n {
            if k != j && q[(j, k)] > 0.0 {
                eps[(k, j)] = q[(j, k)] * transition_moment(m, j, k, pa, pb);
            }
        }
    }
    Ok(eps)
}

/// Coefficient matrices of one coordinate, with `Ψ(w)` available on demand.
#[derive(Debug, Clone)]
pub struct MomentMatrices<'a> {
    model: &'a MapModel,
    pub component: Component,
    pub eps: Matrix,
    pub eps_quad: Matrix,
    pub eps_cross: Matrix,
}

impl<'a> MomentMatrices<'a> {
    pub fn new(model: &'a MapModel, component: Component) -> Result<Self> {
        Ok(MomentMatrices {
            model,
            component,
            eps: expectation_matrix(model, component)?,
            eps_quad: quadratic_expectation_matrix(model, component, component)?,
            eps_cross: quadratic_expectation_matrix(model, Component::First, Component::Second)?,
        })
    }

    pub fn psi(&self, w: f64) -> Result<Matrix> {
        matrix_exponent(self.model, self.component, w)
    }
}

/// `E_j[X_t Λ_t]`, the mean localized to the state of the chain at `t`.
pub fn mean_hat(m: &MapModel, c: Component, start: Start, t: f64) -> Result<Vector> {
    check_time(t)?;
    let s = start.vector(m)?;
    let qt = m.q().transpose();
    let eps = expectation_matrix(m, c)?;
    let int = van_loan_integral(&[qt.clone(), qt], &[eps], t)?;
    Ok(int * s)
}

pub fn mean(m: &MapModel, c: Component, start: Start, t: f64) -> Result<f64> {
    Ok(mean_hat(m, c, start, t)?.sum())
}

/// Long-run growth `E_π[X_t]/t = 1ᵀ ε[X] π`.
pub fn mean_rate(m: &MapModel, c: Component) -> Result<f64> {
    let eps = expectation_matrix(m, c)?;
    Ok(ones(m.n_states()).dot(&(eps * m.pi())))
}

/// `E_j[X_t² Λ_t]`.
pub fn second_moment_hat(m: &MapModel, c: Component, start: Start, t: f64) -> Result<Vector> {
    check_time(t)?;
    let s = start.vector(m)?;
    let qt = m.q().transpose();
    let eps = expectation_matrix(m, c)?;
    let eps2 = quadratic_expectation_matrix(m, c, c)?;
    let double = van_loan_integral(&[qt.clone(), qt.clone(), qt.clone()], &[eps.clone(), eps], t)?;
    let single = van_loan_integral(&[qt.clone(), qt], &[eps2], t)?;
    Ok((double * 2.0 + single) * s)
}

pub fn variance(m: &MapModel, c: Component, start: Start, t: f64) -> Result<f64> {
    let mu = mean(m, c, start, t)?;
    let second = second_moment_hat(m, c, start, t)?.sum();
    Ok(second - mu * mu)
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::validation("t", format!("time must be finite and >= 0, got {t}")))
    }
}

/// Outcome of a moment-existence check, listing every failing law.
#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceReport {
    pub holds: bool,
    pub failures: Vec<String>,
}

impl ExistenceReport {
    fn from_failures(failures: Vec<String>) -> Self {
        ExistenceReport { holds: failures.is_empty(), failures }
    }
}

/// Whether `E|X_t|^κ < ∞`, decided on the compound-Poisson and transition laws.
pub fn moment_exists(m: &MapModel, c: Component, kappa: f64) -> ExistenceReport {
    let mut failures = Vec::new();
    for (j, d) in m.dynamics().iter().enumerate() {
        if d.cp_rate > 0.0 && !d.cp_law.abs_moment_finite(c, kappa) {
            failures.push(format!("state {}", j + 1));
        }
    }
    for (&(i, k), law) in m.transitions() {
        if !law.abs_moment_finite(c, kappa) {
            failures.push(format!("transition {}->{}", i + 1, k + 1));
        }
    }
    ExistenceReport::from_failures(failures)
}

/// Whether `E[e^{κ|Z|}] < ∞` for every jump law of the coordinate.
pub fn exp_moment_exists(m: &MapModel, c: Component, kappa: f64) -> ExistenceReport {
    let mut failures = Vec::new();
    for (j, d) in m.dynamics().iter().enumerate() {
        if d.cp_rate > 0.0 && !d.cp_law.exp_moment_finite(c, kappa) {
            failures.push(format!("state {}", j + 1));
        }
    }
    for (&(i, k), law) in m.transitions() {
        if !law.exp_moment_finite(c, kappa) {
            failures.push(format!("transition {}->{}", i + 1, k + 1));
        }
    }
    ExistenceReport::from_failures(failures)
}

/// Exponential moment `E_j[e^{κ X_τ}]` at the first return time `τ` of the chain to `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTimeMoment {
    /// The moment, `+∞` when neither sufficient condition could be verified.
    pub value: f64,
    pub condition_verified: bool,
    pub row_norm_condition: bool,
    pub neumann_converges: bool,
    /// `λ_max(Ψ(κ))`; negative values certify `value < 1`.
    pub lambda_max: f64,
    pub strictly_below_one: bool,
    pub r: Matrix,
}

pub fn return_time_exp_moment(m: &MapModel, c: Component, j: usize, kappa: f64) -> Result<ReturnTimeMoment> {
    let n = m.n_states();
    if n < 2 {
        return Err(Error::Precondition("return times need at least two states".into()));
    }
    if j >= n {
        return Err(Error::validation("state", format!("state {} out of range 1..={n}", j + 1)));
    }
    // surfaces divergent transition or Lévy exponential moments
    let psi_mat = matrix_exponent(m, c, kappa)?;
    let q = m.q();
    let mut r = Matrix::zeros(n, n);
    for i in 0..n {
        let exit = -q[(i, i)];
        let psi = laplace_exponent(m, i, c, kappa)?;
        if psi >= exit {
            return Err(Error::Precondition(format!(
                "state {}: Laplace exponent {psi} is not below the exit rate {exit}",
                i + 1
            )));
        }
        for l in 0..n {
            if l != i && q[(i, l)] > 0.0 {
                r[(i, l)] = q[(i, l)] * transition_mgf(m, i, l, c, kappa)? / (exit - psi);
            }
        }
    }
    let mut l_mat = r.clone();
    l_mat.row_mut(j).fill(0.0);
    l_mat.column_mut(j).fill(0.0);
    let row_norm_condition = norm_inf(&l_mat) < 1.0;
    let neumann_converges = spectral_radius(&l_mat)? < 1.0;
    let condition_verified = row_norm_condition || neumann_converges;
    let id = Matrix::identity(n, n);
    let value = if condition_verified {
        1.0 - det(&(&id - &r))? / det(&(&id - &l_mat))?
    } else {
        f64::INFINITY
    };
    let lambda_max = leading_eigenvalue(&psi_mat)?;
    Ok(ReturnTimeMoment {
        value,
        condition_verified,
        row_norm_condition,
        neumann_converges,
        lambda_max,
        strictly_below_one: lambda_max < 0.0,
        r,
    })
}

/// `E_i[e^{w X_t} 1{J_t = k}]` as the matrix with entries `(k, i)`.
pub fn characteristic_matrix(m: &MapModel, c: Component, w: f64, t: f64) -> Result<Matrix> {
    expm(&matrix_exponent(m, c, w)?, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn model_a() -> MapModel {
        parse_model(
            r#"{"states": 2, "Q": [[-1, 1], [1, -1]], "dynamics": [{"drift_xi": 1}, {"drift_xi": 2}]}"#,
        )
        .unwrap()
    }

    fn model_a_with_jump() -> MapModel {
        parse_model(
            r#"{"states": 2, "Q": [[-1, 1], [1, -1]], "dynamics": [{"drift_xi": 1}, {"drift_xi": 2}],
               "transition_jumps": {"1->2": {"joint": "independent",
                   "xi": {"family": "constant", "value": 0.1}, "eta": {"family": "constant", "value": 0}}}}"#,
        )
        .unwrap()
    }

    fn one_state(doc: &str) -> MapModel {
        parse_model(&format!(r#"{{"states": 1, "Q": [[0]], "dynamics": [{doc}]}}"#)).unwrap()
    }

    const X: Component = Component::First;

    #[test]
    fn laplace_exponent_examples() {
        let m = one_state(r#"{"drift_xi": 2}"#);
        assert_eq!(laplace_exponent(&m, 0, X, 0.5).unwrap(), 1.0);
        let m = one_state(r#"{"sigma2_xi": 1}"#);
        assert_eq!(laplace_exponent(&m, 0, X, 3.0).unwrap(), 4.5);
        let m = one_state(
            r#"{"cp_rate": 1, "cp_law": {"joint": "independent",
                "xi": {"family": "pareto", "alpha": 1.5, "xmin": 1, "sign": 1},
                "eta": {"family": "constant", "value": 0}}}"#,
        );
        assert_eq!(laplace_exponent(&m, 0, X, 0.1).unwrap(), f64::INFINITY);
        assert!(matches!(matrix_exponent(&m, X, 0.1), Err(Error::DivergentMoment(_))));
    }

    #[test]
    fn matrix_exponent_examples() {
        let m = model_a();
        assert_eq!(matrix_exponent(&m, X, 0.0).unwrap(), m.q().transpose());
        let psi = matrix_exponent(&m, X, 0.7).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[-1.0 + 0.7, 1.0, 1.0, -1.0 + 1.4]);
        assert!((psi - expected).amax() < 1e-15);
        let m = one_state(r#"{"drift_xi": 1}"#);
        assert_eq!(matrix_exponent(&m, X, -1.0).unwrap()[(0, 0)], -1.0);
    }

    #[test]
    fn expectation_matrix_examples() {
        let eps = expectation_matrix(&model_a(), X).unwrap();
        assert_eq!(eps, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        let eps = expectation_matrix(&model_a_with_jump(), X).unwrap();
        assert_eq!(eps, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.1, 2.0]));
        let m = one_state(
            r#"{"cp_rate": 2, "cp_law": {"joint": "independent",
                "xi": {"family": "exponential", "rate": 0.3333333333333333, "sign": 1},
                "eta": {"family": "constant", "value": 0}}}"#,
        );
        assert!((expectation_matrix(&m, X).unwrap()[(0, 0)] - 6.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_expectation_examples() {
        let b = parse_model(
            r#"{"states": 2, "Q": [[-1, 1], [1, -1]],
                "dynamics": [{"drift_xi": 1, "sigma2_eta": 1}, {"drift_xi": 2, "sigma2_eta": 4}]}"#,
        )
        .unwrap();
        let e = quadratic_expectation_matrix(&b, Component::Second, Component::Second).unwrap();
        assert_eq!(e, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        assert_eq!(quadratic_expectation_matrix(&model_a(), X, X).unwrap(), Matrix::zeros(2, 2));
        let m = one_state(
            r#"{"cp_rate": 1, "cp_law": {"joint": "independent",
                "xi": {"family": "normal", "mean": 0, "var": 1},
                "eta": {"family": "constant", "value": 0}}}"#,
        );
        assert!((quadratic_expectation_matrix(&m, X, X).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mean_examples() {
        let m = model_a();
        assert_eq!(mean_hat(&m, X, Start::State(0), 0.0).unwrap(), Vector::zeros(2));
        for &t in &[0.5, 1.0, 3.0] {
            assert!((mean(&m, X, Start::Stationary, t).unwrap() - 1.5 * t).abs() < 1e-12);
        }
        let h = 1e-6;
        let slope = mean(&m, X, Start::State(0), h).unwrap() / h;
        assert!((slope - 1.0).abs() < 1e-5);
        let one = one_state(r#"{"drift_xi": 0.7}"#);
        assert!((mean_hat(&one, X, Start::State(0), 2.0).unwrap()[0] - 1.4).abs() < 1e-14);
        let mj = model_a_with_jump();
        assert!((mean(&mj, X, Start::Stationary, 1.0).unwrap() - 1.55).abs() < 1e-12);
    }

    #[test]
    fn mean_rate_examples() {
        assert!((mean_rate(&model_a(), X).unwrap() - 1.5).abs() < 1e-14);
        assert!((mean_rate(&model_a_with_jump(), X).unwrap() - 1.55).abs() < 1e-14);
        let one = one_state(r#"{"drift_xi": 0.25}"#);
        assert!((mean_rate(&one, X).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn variance_examples() {
        let bm = one_state(r#"{"sigma2_xi": 1}"#);
        let drift = one_state(r#"{"drift_xi": 3}"#);
        for &t in &[0.3, 1.0, 4.0] {
            assert!((variance(&bm, X, Start::State(0), t).unwrap() - t).abs() < 1e-12);
            assert!(variance(&drift, X, Start::State(0), t).unwrap().abs() < 1e-11);
        }
    }

    #[test]
    fn model_a_variance_closed_form() {
        // ξ_t = t + O_t with O_t the occupation time of state 2, and
        // Var_1(O_t) = t/4 - 3/16 + e^{-2t}/4 - e^{-4t}/16.
        let m = model_a();
        for &t in &[0.5f64, 1.0, 2.5] {
            let e2 = (-2.0 * t).exp();
            let expected = t / 4.0 - 3.0 / 16.0 + e2 / 4.0 - e2 * e2 / 16.0;
            let v = variance(&m, X, Start::State(0), t).unwrap();
            assert!((v - expected).abs() < 1e-12, "t={t}: {v} vs {expected}");
        }
    }

    #[test]
    fn existence_examples() {
        let normal = one_state(
            r#"{"cp_rate": 1, "cp_law": {"joint": "independent",
                "xi": {"family": "normal", "mean": 0, "var": 1},
                "eta": {"family": "normal", "mean": 0, "var": 1}}}"#,
        );
        assert!(moment_exists(&normal, X, 7.0).holds);
        assert!(exp_moment_exists(&normal, X, 3.0).holds);
        let heavy = one_state(
            r#"{"cp_rate": 1, "cp_law": {"joint": "independent",
                "xi": {"family": "pareto", "alpha": 1.5, "xmin": 1, "sign": 1},
                "eta": {"family": "constant", "value": 0}}}"#,
        );
        let r = moment_exists(&heavy, X, 2.0);
        assert!(!r.holds);
        assert_eq!(r.failures, vec!["state 1".to_string()]);
        assert!(moment_exists(&heavy, X, 1.2).holds);
        let expo = one_state(
            r#"{"cp_rate": 1, "cp_law": {"joint": "independent",
                "xi": {"family": "exponential", "rate": 1, "sign": 1},
                "eta": {"family": "constant", "value": 0}}}"#,
        );
        assert!(!exp_moment_exists(&expo, X, 2.0).holds);
        assert!(exp_moment_exists(&expo, X, 0.5).holds);
    }

    #[test]
    fn return_time_examples() {
        let zero = parse_model(r#"{"states": 2, "Q": [[-1, 1], [1, -1]], "dynamics": [{}, {}]}"#).unwrap();
        for &k in &[-2.0, 0.0, 1.5] {
            let r = return_time_exp_moment(&zero, X, 0, k).unwrap();
            assert!((r.value - 1.0).abs() < 1e-15);
        }
        let r = return_time_exp_moment(&model_a(), X, 0, -1.0).unwrap();
        assert!((r.r[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((r.r[(1, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.value - 1.0 / 6.0).abs() < 1e-14);
        assert!(r.strictly_below_one);
        let one = one_state(r#"{"drift_xi": 1}"#);
        assert!(matches!(return_time_exp_moment(&one, X, 0, -1.0), Err(Error::Precondition(_))));
        // ψ_1(κ) = κ ≥ 1 = |q_11|
        assert!(matches!(return_time_exp_moment(&model_a(), X, 0, 1.0), Err(Error::Precondition(_))));
    }
}
