//! Closed forms for the Markov-modulated generalized Ornstein-Uhlenbeck
//! process `V_t = e^{−ξ_t}(V_0 + ∫_0^t e^{ξ_{s−}} dη_s)`.

use crate::error::{Error, Result};
use crate::linalg::{expm, leading_eigenvalue, solve_vector, van_loan_integral, Matrix, Vector};
use crate::map_moments::{
    expectation_matrix, laplace_exponent, matrix_exponent, moment_exists, exp_moment_exists,
    quadratic_expectation_matrix, transition_mgf, Start,
};
use crate::model::{ul_characteristics, Component, MapModel};
use crate::numeric::binomial;

/// `Ψ_ξ(−k)` from the exponential moments of `ξ`.
pub fn psi_xi(m: &MapModel, k: f64) -> Result<Matrix> {
    matrix_exponent(m, Component::First, -k)
}

/// Coefficient matrices of the `(U, L)` coordinates.
#[derive(Debug, Clone)]
pub struct UlMatrices {
    pub eps_u: Matrix,
    pub eps_l: Matrix,
    pub eps_uu: Matrix,
    pub eps_ul: Matrix,
    pub eps_ll: Matrix,
}

impl UlMatrices {
    pub fn new(m: &MapModel) -> Result<Self> {
        let ul = ul_characteristics(m)?;
        let (eps_u, eps_l) = Self::first_order(&ul)?;
        Ok(UlMatrices {
            eps_u,
            eps_l,
            eps_uu: quadratic_expectation_matrix(&ul, Component::First, Component::First)?,
            eps_ul: quadratic_expectation_matrix(&ul, Component::First, Component::Second)?,
            eps_ll: quadratic_expectation_matrix(&ul, Component::Second, Component::Second)?,
        })
    }

    /// Only `ε[U]` and `ε[L]`, for callers that need no second moments.
    pub fn first_order(ul: &MapModel) -> Result<(Matrix, Matrix)> {
        Ok((
            expectation_matrix(ul, Component::First)?,
            expectation_matrix(ul, Component::Second)?,
        ))
    }
}

fn first_order_ul(m: &MapModel) -> Result<(Matrix, Matrix)> {
    UlMatrices::first_order(&ul_characteristics(m)?)
}

fn check_running_mean_preconditions(m: &MapModel) -> Result<()> {
    let r = exp_moment_exists(m, Component::First, 1.0);
    if !r.holds {
        return Err(Error::Precondition(format!(
            "exponential moments of order 1 of xi fail for {}",
            r.failures.join(", ")
        )));
    }
    let r = moment_exists(m, Component::Second, 1.0);
    if !r.holds {
        return Err(Error::Precondition(format!(
            "first moments of eta fail for {}",
            r.failures.join(", ")
        )));
    }
    Ok(())
}

fn check_v0(m: &MapModel, v: &Vector, name: &str) -> Result<()> {
    if v.len() != m.n_states() {
        return Err(Error::Dimension(format!(
            "{name} has {} entries, model has {} states",
            v.len(),
            m.n_states()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(name, "entries must be finite"));
    }
    Ok(())
}

/// `E_j[V_t Λ_t]` for `V_0` with `E[V_0 Λ_0] = v0_hat`.
pub fn running_mean_hat(m: &MapModel, v0_hat: &Vector, start: Start, t: f64) -> Result<Vector> {
    check_running_mean_preconditions(m)?;
    check_v0(m, v0_hat, "v0_mean_hat")?;
    let s = start.vector(m)?;
    let qt = m.q().transpose();
    let (eps_u, eps_l) = first_order_ul(m)?;
    let a1 = &qt + &eps_u;
    let free = expm(&a1, t)? * v0_hat;
    let forced = van_loan_integral(&[a1, qt], &[eps_l], t)? * s;
    Ok(free + forced)
}

pub fn running_mean(m: &MapModel, v0_hat: &Vector, start: Start, t: f64) -> Result<f64> {
    Ok(running_mean_hat(m, v0_hat, start, t)?.sum())
}

/// State of the first- and second-moment system at time `t`.
#[derive(Debug, Clone)]
pub struct TransientMoments {
    pub occupation: Vector,
    pub mean_hat: Vector,
    pub second_hat: Vector,
}

impl TransientMoments {
    pub fn mean(&self) -> f64 {
        self.mean_hat.sum()
    }
    pub fn second_moment(&self) -> f64 {
        self.second_hat.sum()
    }
    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean().powi(2)
    }
}

fn check_second_moment_preconditions(m: &MapModel) -> Result<()> {
    let r = exp_moment_exists(m, Component::First, 2.0);
    if !r.holds {
        return Err(Error::Precondition(format!(
            "exponential moments of order 2 of xi fail for {}",
            r.failures.join(", ")
        )));
    }
    let r = moment_exists(m, Component::Second, 2.0);
    if !r.holds {
        return Err(Error::Precondition(format!(
            "second moments of eta fail for {}",
            r.failures.join(", ")
        )));
    }
    Ok(())
}

/// `(E[Λ_t], E[V_t Λ_t], E[V_t² Λ_t])` from one exponential of the
/// block lower-triangular generator of the moment system.
pub fn transient_moments(
    m: &MapModel,
    v0_sq_hat: &Vector,
    v0_hat: &Vector,
    start: Start,
    t: f64,
) -> Result<TransientMoments> {
    check_second_moment_preconditions(m)?;
    check_v0(m, v0_hat, "v0_mean_hat")?;
    check_v0(m, v0_sq_hat, "v0_second_hat")?;
    let n = m.n_states();
    let s = start.vector(m)?;
    let g = MomentGenerator::new(m)?;
    let big = g.full();
    let mut z0 = Vector::zeros(3 * n);
    z0.rows_mut(0, n).copy_from(&s);
    z0.rows_mut(n, n).copy_from(v0_hat);
    z0.rows_mut(2 * n, n).copy_from(v0_sq_hat);
    let z = expm(&big, t)? * z0;
    Ok(TransientMoments {
        occupation: z.rows(0, n).into_owned(),
        mean_hat: z.rows(n, n).into_owned(),
        second_hat: z.rows(2 * n, n).into_owned(),
    })
}

/// `E_j[V_t² Λ_t]`.
pub fn transient_second_moment_hat(
    m: &MapModel,
    v0_sq_hat: &Vector,
    v0_hat: &Vector,
    start: Start,
    t: f64,
) -> Result<Vector> {
    Ok(transient_moments(m, v0_sq_hat, v0_hat, start, t)?.second_hat)
}

struct MomentGenerator {
    qt: Matrix,
    a1: Matrix,
    a2: Matrix,
    eps_l: Matrix,
    eps_ll: Matrix,
    b21: Matrix,
}

impl MomentGenerator {
    fn new(m: &MapModel) -> Result<Self> {
        let u = UlMatrices::new(m)?;
        let qt = m.q().transpose();
        let a1 = &qt + &u.eps_u;
        let a2 = &qt + &u.eps_u * 2.0 + &u.eps_uu;
        let b21 = (&u.eps_l + &u.eps_ul) * 2.0;
        Ok(MomentGenerator { qt, a1, a2, eps_l: u.eps_l, eps_ll: u.eps_ll, b21 })
    }

    fn full(&self) -> Matrix {
        let n = self.qt.nrows();
        let mut big = Matrix::zeros(3 * n, 3 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&self.qt);
        big.view_mut((n, 0), (n, n)).copy_from(&self.eps_l);
        big.view_mut((n, n), (n, n)).copy_from(&self.a1);
        big.view_mut((2 * n, 0), (n, n)).copy_from(&self.eps_ll);
        big.view_mut((2 * n, n), (n, n)).copy_from(&self.b21);
        big.view_mut((2 * n, 2 * n), (n, n)).copy_from(&self.a2);
        big
    }

    /// `K = [[Qᵀ, 0], [ε[L], Qᵀ + ε[U]]]`.
    fn lag(&self) -> Matrix {
        let n = self.qt.nrows();
        let mut k = Matrix::zeros(2 * n, 2 * n);
        k.view_mut((0, 0), (n, n)).copy_from(&self.qt);
        k.view_mut((n, 0), (n, n)).copy_from(&self.eps_l);
        k.view_mut((n, n), (n, n)).copy_from(&self.a1);
        k
    }
}

/// Initial law for autocovariances.
#[derive(Debug, Clone)]
pub enum Initial {
    Stationary,
    Given { start: Start, v0_hat: Vector, v0_sq_hat: Vector },
}

/// The lag generator `K` whose lower block propagates covariances.
pub fn lag_generator(m: &MapModel) -> Result<Matrix> {
    Ok(MomentGenerator::new(m)?.lag())
}

/// `Cov(V_t, V_s)` for `s ≤ t`.
pub fn autocovariance(m: &MapModel, s: f64, t: f64, initial: &Initial) -> Result<f64> {
    if !(s.is_finite() && t.is_finite() && 0.0 <= s && s <= t) {
        return Err(Error::validation("lags", format!("need 0 <= s <= t, got s={s}, t={t}")));
    }
    let n = m.n_states();
    let (p, x, y) = match initial {
        Initial::Stationary => {
            let ladder = stationary_moments(m, 2)?;
            (m.pi().clone(), ladder.m[1].clone(), ladder.m[2].clone())
        }
        Initial::Given { start, v0_hat, v0_sq_hat } => {
            let tm = transient_moments(m, v0_sq_hat, v0_hat, *start, s)?;
            (tm.occupation, tm.mean_hat, tm.second_hat)
        }
    };
    let mu = x.sum();
    let mut c = Vector::zeros(2 * n);
    c.rows_mut(0, n).copy_from(&(&x - &p * mu));
    c.rows_mut(n, n).copy_from(&(&y - &x * mu));
    let k = MomentGenerator::new(m)?.lag();
    let w = expm(&k, t - s)? * c;
    Ok(w.rows(n, n).sum())
}

/// Stationary autocovariance at each lag `h`.
pub fn stationary_autocovariance(m: &MapModel, lags: &[f64]) -> Result<Vec<f64>> {
    let ladder = stationary_moments(m, 2)?;
    let n = m.n_states();
    let mu = ladder.mu[1];
    let mut c = Vector::zeros(2 * n);
    c.rows_mut(0, n).copy_from(&(&ladder.m[1] - m.pi() * mu));
    c.rows_mut(n, n).copy_from(&(&ladder.m[2] - &ladder.m[1] * mu));
    let k = MomentGenerator::new(m)?.lag();
    lags.iter()
        .map(|&h| {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::validation("lags", format!("lag must be >= 0, got {h}")));
            }
            Ok((expm(&k, h)? * &c).rows(n, n).sum())
        })
        .collect()
}

/// Outcome of the sufficient conditions for a stationary law with finite
/// `κ`-th moment.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    pub exists: bool,
    pub kappa_checked: f64,
    /// (i) `ψ_ξ^{(j)}(−κ) < |q_jj|` in every state.
    pub exit_rate_condition: bool,
    /// (ii) the maximal ratio condition for every reference state.
    pub ratio_condition: bool,
    /// (iii) `λ_max(Ψ_ξ(−κ)) < 0`.
    pub eigenvalue_condition: bool,
    /// (iv) `E|L_1|^κ < ∞`.
    pub moment_condition: bool,
    pub lambda_max: f64,
    pub laplace_exponents: Vec<f64>,
    pub max_ratios: Vec<f64>,
    pub moment_failures: Vec<String>,
}

pub fn stationarity_check(m: &MapModel, kappa: f64) -> StationaryReport {
    let n = m.n_states();
    let q = m.q();
    let psi: Vec<f64> = (0..n)
        .map(|j| laplace_exponent(m, j, Component::First, -kappa).unwrap_or(f64::INFINITY))
        .collect();
    let exit_rate_condition = (0..n).all(|j| psi[j] < -q[(j, j)]);

    let mut max_ratios = Vec::with_capacity(n);
    for j in 0..n {
        let mut worst: f64 = 0.0;
        for i in (0..n).filter(|&i| i != j) {
            let mut num = 0.0;
            for l in (0..n).filter(|&l| l != i && l != j && q[(i, l)] > 0.0) {
                let g = transition_mgf(m, i, l, Component::First, -kappa).unwrap_or(f64::INFINITY);
                num += q[(i, l)] * g;
            }
            let den = -q[(i, i)] - psi[i];
            let ratio = if num == 0.0 && den > 0.0 {
                0.0
            } else if den > 0.0 {
                num / den
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        max_ratios.push(worst);
    }
    let ratio_condition = max_ratios.iter().all(|&r| r < 1.0);

    let lambda_max = psi_xi(m, kappa)
        .and_then(|p| leading_eigenvalue(&p))
        .unwrap_or(f64::INFINITY);
    let eigenvalue_condition = lambda_max < 0.0;

    let moment_failures = match ul_characteristics(m) {
        Ok(ul) => moment_exists(&ul, Component::Second, kappa).failures,
        Err(e) => vec![e.to_string()],
    };
    let moment_condition = moment_failures.is_empty();

    StationaryReport {
        exists: exit_rate_condition && ratio_condition && eigenvalue_condition && moment_condition,
        kappa_checked: kappa,
        exit_rate_condition,
        ratio_condition,
        eigenvalue_condition,
        moment_condition,
        lambda_max,
        laplace_exponents: psi,
        max_ratios,
        moment_failures,
    }
}

/// Stationary moment vectors `m_k = E_π[V_∞^k Λ_0]` and their sums.
#[derive(Debug, Clone)]
pub struct MomentLadder {
    pub order: usize,
    pub m: Vec<Vector>,
    pub mu: Vec<f64>,
}

fn divergent_if_infinite(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::DivergentMoment(vec![what()]))
    }
}

/// Coupling matrix `B_{k,n}` of the moment recursion.
pub fn recursion_coefficient(m: &MapModel, k: u32, n: u32) -> Result<Matrix> {
    let s = m.n_states();
    let q = m.q();
    let c = binomial(k, n);
    let kf = f64::from(k);
    let theta = -kf;
    let mut b = Matrix::zeros(s, s);
    for j in 0..s {
        let d = m.state(j);
        let cont = match n {
            1 => kf * (d.drift_eta - kf * d.sigma_xi_eta),
            2 => c * d.sigma2_eta,
            _ => 0.0,
        };
        let jump = if d.cp_rate > 0.0 {
            let e = divergent_if_infinite(d.cp_law.mixed(theta, n)?, || {
                format!("state {}: E[exp(-{k} zeta) chi^{n}] diverges", j + 1)
            })?;
            c * d.cp_rate * e
        } else {
            0.0
        };
        b[(j, j)] = cont + jump;
        for l in 0..s {
            if l != j && q[(j, l)] > 0.0 {
                if let Some(law) = m.transition_law(j, l) {
                    let e = divergent_if_infinite(law.mixed(theta, n)?, || {
                        format!("transition {}->{}: E[exp(-{k} Z_xi) Z_eta^{n}] diverges", j + 1, l + 1)
                    })?;
                    b[(l, j)] = c * q[(j, l)] * e;
                }
            }
        }
    }
    Ok(b)
}

/// Stationary moments up to order `order` by the moment recursion.
pub fn stationary_moments(m: &MapModel, order: usize) -> Result<MomentLadder> {
    if order >= 1 {
        let report = stationarity_check(m, order as f64);
        if !report.exists {
            return Err(Error::Precondition(format!(
                "stationarity conditions fail at kappa={order}: (i)={} (ii)={} (iii)={} (iv)={}",
                report.exit_rate_condition,
                report.ratio_condition,
                report.eigenvalue_condition,
                report.moment_condition
            )));
        }
    }
    let mut vecs = vec![m.pi().clone()];
    for k in 1..=order as u32 {
        let mut rhs = Vector::zeros(m.n_states());
        for n in 1..=k {
            rhs += recursion_coefficient(m, k, n)? * &vecs[(k - n) as usize];
        }
        let a = psi_xi(m, f64::from(k))?;
        vecs.push(-solve_vector(&a, &rhs)?);
    }
    let mu = vecs.iter().map(|v| v.sum()).collect();
    Ok(MomentLadder { order, m: vecs, mu })
}

/// First two stationary moment vectors from the `(U, L)` coefficient
/// matrices directly, without the recursion.
pub fn stationary_first_two(m: &MapModel) -> Result<(Vector, Vector)> {
    let report = stationarity_check(m, 2.0);
    if !report.exists {
        return Err(Error::Precondition("stationarity conditions fail at kappa=2".into()));
    }
    let u = UlMatrices::new(m)?;
    let qt = m.q().transpose();
    let a1 = &qt + &u.eps_u;
    let a2 = &qt + &u.eps_u * 2.0 + &u.eps_uu;
    let pi = m.pi();
    let inner = solve_vector(&a1, &(&u.eps_l * pi))?;
    let m1 = -inner.clone();
    let rhs = (&u.eps_l + &u.eps_ul) * 2.0 * inner - &u.eps_ll * pi;
    let m2 = solve_vector(&a2, &rhs)?;
    Ok((m1, m2))
}
