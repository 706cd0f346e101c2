//! Scalar special functions and quadrature used by the jump-law functionals.

use statrs::function::exponential::integral as exp_integral;
use statrs::function::gamma::{gamma, gamma_ur};

/// Upper incomplete gamma `Γ(s, x) = ∫_x^∞ u^{s-1} e^{-u} du` for any real `s`, `x > 0`.
pub fn upper_incomplete_gamma(s: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if s > 0.0 {
        return gamma_ur(s, x) * gamma(s);
    }
    if s.fract() == 0.0 {
        // Γ(1-n, x) = x^{1-n} E_n(x)
        let n = (1.0 - s) as u64;
        return match exp_integral(x, n) {
            Some(e) => x.powf(s) * e,
            None => f64::NAN,
        };
    }
    // step down from the first positive argument: Γ(a, x) = (Γ(a+1, x) - x^a e^{-x}) / a
    let k = (-s).floor() as i32 + 1;
    let mut a = s + k as f64;
    let mut g = gamma_ur(a, x) * gamma(a);
    for _ in 0..k {
        a -= 1.0;
        g = (g - x.powf(a) * (-x).exp()) / a;
    }
    g
}

pub fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature over a finite interval.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err) = gk15(f, lo, hi);
        let width = (hi - lo) / (b - a);
        if err <= tol * width.max(1e-3) || depth >= 40 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn incomplete_gamma_positive_agrees_with_gamma() {
        let g = upper_incomplete_gamma(2.5, 1e-12);
        assert!((g - gamma(2.5)).abs() < 1e-10);
        // Γ(1, x) = e^{-x}
        assert!((upper_incomplete_gamma(1.0, 0.7) - (-0.7f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn incomplete_gamma_nonpositive_against_quadrature() {
        for &(s, x) in &[(-0.5, 0.8), (-1.5, 2.0), (0.0, 1.3), (-2.0, 0.4), (-0.25, 0.05)] {
            // substitute u = x + w/(1-w) on [0,1)
            let f = |w: f64| {
                if w >= 1.0 {
                    return 0.0;
                }
                let u = x + w / (1.0 - w);
                u.powf(s - 1.0) * (-u).exp() / ((1.0 - w) * (1.0 - w))
            };
            let q = integrate(&f, 0.0, 1.0, 1e-13);
            let g = upper_incomplete_gamma(s, x);
            assert!((g - q).abs() < 1e-9 * q.abs().max(1.0), "s={s} x={x}: {g} vs {q}");
        }
    }

    #[test]
    fn binomial_small() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(2, 3), 0.0);
        assert_eq!(factorial(5), 120.0);
    }

    #[test]
    fn quadrature_polynomial_and_gaussian() {
        let q = integrate(&|x: f64| x * x, 0.0, 3.0, 1e-14);
        assert!((q - 9.0).abs() < 1e-12);
        let q = integrate(&|x: f64| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-14);
        assert!((q - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }
}
