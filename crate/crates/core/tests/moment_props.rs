use mapmom_core::linalg::{expm, leading_eigenvalue, Matrix, Vector};
use mapmom_core::map_moments::{
    expectation_matrix, matrix_exponent, mean, mean_rate, quadratic_expectation_matrix, variance, Start,
};
use mapmom_core::mmgou::{psi_xi, stationary_first_two, stationary_moments, UlMatrices};
use mapmom_core::model::random::{random_model, RandomSpec};
use mapmom_core::model::{dual_model, parse_model, ul_characteristics, Component, DualSelector, MapModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(seed: u64, spec: RandomSpec) -> MapModel {
    random_model(&mut ChaCha8Rng::seed_from_u64(seed), &spec).unwrap()
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    (a - b).amax() <= tol * b.amax().max(1.0)
}

fn component() -> impl Strategy<Value = Component> {
    prop_oneof![Just(Component::First), Just(Component::Second)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn psi_at_zero_is_generator(seed in any::<u64>(), c in component()) {
        let m = model(seed, RandomSpec::default());
        let p = matrix_exponent(&m, c, 0.0).unwrap();
        prop_assert!(close(&p, &m.q().transpose(), 1e-12));
    }

    #[test]
    fn stochastic_exponential_identities(seed in any::<u64>()) {
        let m = model(seed, RandomSpec::default());
        let u = UlMatrices::new(&m).unwrap();
        let qt = m.q().transpose();
        prop_assert!(close(&psi_xi(&m, 1.0).unwrap(), &(&qt + &u.eps_u), 1e-10));
        prop_assert!(close(&psi_xi(&m, 2.0).unwrap(), &(&qt + &u.eps_u * 2.0 + &u.eps_uu), 1e-10));
    }

    #[test]
    fn stationary_residual(seed in any::<u64>()) {
        let m = model(seed, RandomSpec { min_states: 5, max_states: 5, ..Default::default() });
        let r = m.q().transpose() * m.pi();
        prop_assert!(r.amax() < 1e-10);
        prop_assert!((m.pi().sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dual_identity(seed in any::<u64>(), w in prop::sample::select(vec![-1.0, -0.5, 0.5]), c in component()) {
        let m = model(seed, RandomSpec::default());
        let d = dual_model(&m, DualSelector::Both).unwrap();
        let pi = Matrix::from_diagonal(m.pi());
        let pi_inv = Matrix::from_diagonal(&m.pi().map(|x| 1.0 / x));
        // row convention F = Ψᵀ: F*(w) = diag(π)⁻¹ F(−w)ᵀ diag(π)
        let f_dual = matrix_exponent(&d, c, w).unwrap().transpose();
        let f = matrix_exponent(&m, c, -w).unwrap().transpose();
        prop_assert!(close(&f_dual, &(&pi_inv * f.transpose() * &pi), 1e-10));
        // the same statement for Ψ itself
        let expected = &pi * matrix_exponent(&m, c, -w).unwrap().transpose() * &pi_inv;
        prop_assert!(close(&matrix_exponent(&d, c, w).unwrap(), &expected, 1e-10));
    }

    #[test]
    fn dual_is_an_involution(seed in any::<u64>(), c in component()) {
        let m = model(seed, RandomSpec::default());
        let dd = dual_model(&dual_model(&m, DualSelector::Both).unwrap(), DualSelector::Both).unwrap();
        prop_assert!(close(dd.q(), m.q(), 1e-12));
        for w in [-0.7, 0.4] {
            prop_assert!(close(&matrix_exponent(&dd, c, w).unwrap(), &matrix_exponent(&m, c, w).unwrap(), 1e-12));
        }
    }

    #[test]
    fn characteristic_semigroup(seed in any::<u64>(), w in -1.0f64..1.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let m = model(seed, RandomSpec::default());
        let p = matrix_exponent(&m, Component::First, w).unwrap();
        let lhs = expm(&p, s + t).unwrap();
        prop_assert!(close(&lhs, &(expm(&p, s).unwrap() * expm(&p, t).unwrap()), 1e-10));
    }

    #[test]
    fn derivative_of_perron_root_is_mean_rate(seed in any::<u64>(), c in component()) {
        let m = model(seed, RandomSpec::default());
        let h = 1e-5;
        let l = |w: f64| leading_eigenvalue(&matrix_exponent(&m, c, w).unwrap()).unwrap();
        let fd = (l(h) - l(-h)) / (2.0 * h);
        prop_assert!((fd - mean_rate(&m, c).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn stationary_mean_is_linear(seed in any::<u64>(), t in 0.0f64..3.0) {
        let m = model(seed, RandomSpec::default());
        let lhs = mean(&m, Component::Second, Start::Stationary, t).unwrap();
        prop_assert!((lhs - t * mean_rate(&m, Component::Second).unwrap()).abs() < 1e-10 * (1.0 + t));
    }

    #[test]
    fn recursion_matches_direct_second_moment(seed in any::<u64>()) {
        let m = model(seed, RandomSpec { min_xi_drift: 1.0, ..Default::default() });
        if let Ok(ladder) = stationary_moments(&m, 2) {
            let (m1, m2) = stationary_first_two(&m).unwrap();
            prop_assert!((&ladder.m[1] - &m1).amax() <= 1e-10 * m1.amax().max(1.0));
            prop_assert!((&ladder.m[2] - &m2).amax() <= 1e-10 * m2.amax().max(1.0));
        }
    }
}

/// Explicit `(U, L)` atoms versus the functional view for atomic laws.
#[test]
fn ul_functionals_agree_with_explicit_laws() {
    for seed in 0..50 {
        let m = model(seed, RandomSpec { normal_laws: false, ..Default::default() });
        let ul = ul_characteristics(&m).unwrap();
        let explicit = MapModel::new(
            ul.q().clone(),
            ul.dynamics()
                .iter()
                .map(|d| {
                    let mut d = d.clone();
                    d.cp_law = d.cp_law.explicit().unwrap();
                    d
                })
                .collect(),
            ul.transitions().iter().map(|(&k, l)| (k, l.explicit().unwrap())).collect(),
        )
        .unwrap();
        for (a, b) in [(Component::First, Component::First), (Component::First, Component::Second), (Component::Second, Component::Second)] {
            let x = quadratic_expectation_matrix(&ul, a, b).unwrap();
            let y = quadratic_expectation_matrix(&explicit, a, b).unwrap();
            assert!(close(&x, &y, 1e-12));
        }
        for c in [Component::First, Component::Second] {
            assert!(close(&expectation_matrix(&ul, c).unwrap(), &expectation_matrix(&explicit, c).unwrap(), 1e-12));
        }
    }
}

#[test]
fn model_a_variance_is_nondecreasing() {
    let m = parse_model(r#"{"states": 2, "Q": [[-1, 1], [1, -1]], "dynamics": [{"drift_xi": 1}, {"drift_xi": 2}]}"#).unwrap();
    let vars: Vec<f64> = (1..=50).map(|k| variance(&m, Component::First, Start::State(0), 0.1 * k as f64).unwrap()).collect();
    assert!(vars.windows(2).all(|w| w[1] >= w[0]));
}

/// Uniformization: `J` is a jump chain with kernel `P = I + Q/Λ` run at
/// Poisson(Λ) epochs. Given `k` epochs on `[0, t]`, the `k + 1` occupied
/// segments have mean length `t/(k+1)`, so expected occupation times and
/// transition counts follow from the `k`-step distributions alone.
fn brute_force_mean(m: &MapModel, c: Component, j: usize, t: f64) -> f64 {
    let n = m.n_states();
    let q = m.q();
    let lam = (0..n).map(|i| -q[(i, i)]).fold(0.0, f64::max);
    let p = Matrix::identity(n, n) + q / lam;
    let per_state: Vec<f64> = m
        .dynamics()
        .iter()
        .map(|d| d.drift(c) + d.cp_rate * d.cp_law.component_moment(c, 1))
        .collect();
    let jump_mean = |a: usize, b: usize| m.transition_law(a, b).map_or(0.0, |l| l.component_moment(c, 1));
    let mut dist = vec![Vector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 })];
    let mut total = 0.0;
    let mut poisson = (-lam * t).exp();
    let mut tail = 1.0;
    let mut k = 0usize;
    while tail > 1e-14 {
        let occ: f64 = dist.iter().map(|v| v.dot(&Vector::from_vec(per_state.clone()))).sum::<f64>() * t / (k + 1) as f64;
        let mut trans = 0.0;
        for v in &dist[..k] {
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        trans += v[a] * p[(a, b)] * jump_mean(a, b);
                    }
                }
            }
        }
        total += poisson * (occ + trans);
        tail -= poisson;
        let next = p.transpose() * dist.last().unwrap();
        dist.push(next);
        k += 1;
        poisson *= lam * t / k as f64;
    }
    total
}

#[test]
fn mean_matches_conditioning_on_transitions() {
    for seed in 0..20 {
        let m = model(seed, RandomSpec { min_states: 2, max_states: 2, normal_laws: false, ..Default::default() });
        for (j, t) in [(0, 0.5), (1, 1.7)] {
            for c in [Component::First, Component::Second] {
                let exact = mean(&m, c, Start::State(j), t).unwrap();
                let bf = brute_force_mean(&m, c, j, t);
                assert!((exact - bf).abs() < 1e-6, "seed {seed}: {exact} vs {bf}");
            }
        }
    }
}

#[test]
fn autocovariance_decays_at_the_leading_mode() {
    let m = parse_model(
        r#"{"states": 2, "Q": [[-1, 1], [1, -1]], "dynamics": [{"drift_xi": 1, "sigma2_eta": 1}, {"drift_xi": 2, "sigma2_eta": 4}]}"#,
    )
    .unwrap();
    let k = mapmom_core::mmgou::lag_generator(&m).unwrap();
    let mut re: Vec<f64> = k.complex_eigenvalues().iter().map(|z| z.re).collect();
    re.sort_by(|a, b| b.total_cmp(a));
    // drop the zero mode of the Qᵀ block
    assert!(re[0].abs() < 1e-12);
    let lam = re[1];
    assert!((lam - (-5.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    let lags: Vec<f64> = (0..=50).map(|i| 0.1 * i as f64).collect();
    let acf = mapmom_core::mmgou::stationary_autocovariance(&m, &lags).unwrap();
    let scaled: Vec<f64> = acf.iter().zip(&lags).map(|(c, h)| c.abs() * (-lam * h).exp()).collect();
    let bound = scaled.iter().copied().fold(0.0, f64::max);
    assert!(bound.is_finite() && bound <= 2.0 * acf[0]);
    // the leading mode dominates late lags
    let n = scaled.len();
    assert!((scaled[n - 1] / scaled[n - 6] - 1.0).abs() < 1e-2);
    assert!(leading_eigenvalue(&psi_xi(&m, 1.0).unwrap()).unwrap() < 0.0);
}
