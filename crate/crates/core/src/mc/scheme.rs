//! Increment schemes for the continuous part of `∫ e^{ξ_{s−}−ξ_u} dη_s`
//! over one substep.

use std::collections::BTreeMap;
use std::fmt::Debug;

use super::PathRng;
use crate::error::{Error, Result};
use crate::model::{MapModel, StateDynamics};

/// One substep `[u, u+h]` of the continuous dynamics: returns
/// `(ξ_{u+h} − ξ_u, ∫_u^{u+h} e^{ξ_s − ξ_u} dη_s)`.
pub trait IncrementScheme: Debug + Send + Sync {
    fn name(&self) -> &'static str;
    /// Whether a single step covers any interval without bias.
    fn exact(&self) -> bool;
    fn supports(&self, m: &MapModel) -> Result<()>;
    fn step(&self, d: &StateDynamics, h: f64, rng: &mut PathRng) -> (f64, f64);
}

/// Left-point Stieltjes rule: the integrand is frozen at `e^0 = 1`, so the
/// integral is the plain `η` increment. First-order bias in `h`.
#[derive(Debug, Clone, Copy)]
pub struct LeftPoint;

impl IncrementScheme for LeftPoint {
    fn name(&self) -> &'static str {
        "left-point"
    }
    fn exact(&self) -> bool {
        false
    }
    fn supports(&self, _m: &MapModel) -> Result<()> {
        Ok(())
    }
    fn step(&self, d: &StateDynamics, h: f64, rng: &mut PathRng) -> (f64, f64) {
        let (l11, l21, l22) = d.cholesky();
        let sh = h.sqrt();
        let (z1, z2) = gaussian_pair(rng, l11 != 0.0 || l21 != 0.0, l22 != 0.0);
        (d.drift_xi * h + l11 * sh * z1, d.drift_eta * h + sh * (l21 * z1 + l22 * z2))
    }
}

/// Exact transition when `ξ` has no Brownian part: `ξ` is linear on the
/// substep and the integral is Gaussian with known mean and variance.
#[derive(Debug, Clone, Copy)]
pub struct ExactOu;

fn phi(a: f64, h: f64) -> f64 {
    if a == 0.0 {
        h
    } else {
        (a * h).exp_m1() / a
    }
}

impl IncrementScheme for ExactOu {
    fn name(&self) -> &'static str {
        "exact-ou"
    }
    fn exact(&self) -> bool {
        true
    }
    fn supports(&self, m: &MapModel) -> Result<()> {
        match m.dynamics().iter().position(|d| d.sigma2_xi != 0.0) {
            Some(j) => Err(Error::validation(
                format!("dynamics[{j}].sigma2_xi"),
                "scheme exact-ou needs sigma2_xi = 0 in every state",
            )),
            None => Ok(()),
        }
    }
    fn step(&self, d: &StateDynamics, h: f64, rng: &mut PathRng) -> (f64, f64) {
        let a = d.drift_xi;
        let mut integral = d.drift_eta * phi(a, h);
        if d.sigma2_eta > 0.0 {
            integral += (d.sigma2_eta * phi(2.0 * a, h)).sqrt() * rng.normal();
        }
        (a * h, integral)
    }
}

fn gaussian_pair(rng: &mut PathRng, first: bool, second: bool) -> (f64, f64) {
    let z1 = if first { rng.normal() } else { 0.0 };
    let z2 = if second { rng.normal() } else { 0.0 };
    (z1, z2)
}

/// Exact Gaussian increment of `(ξ, η)` over `h`.
pub(crate) fn gaussian_increment(d: &StateDynamics, h: f64, rng: &mut PathRng) -> (f64, f64) {
    LeftPoint.step(d, h, rng)
}

pub type SchemeBuilder = fn() -> Box<dyn IncrementScheme>;

/// Schemes selectable by name.
#[derive(Debug, Clone)]
pub struct SchemeRegistry {
    builders: BTreeMap<String, SchemeBuilder>,
}

impl SchemeRegistry {
    pub fn standard() -> Self {
        let mut r = SchemeRegistry { builders: BTreeMap::new() };
        r.register("left-point", || Box::new(LeftPoint));
        r.register("exact-ou", || Box::new(ExactOu));
        r
    }

    pub fn register(&mut self, name: &str, builder: SchemeBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<String> {
        self.builders.keys().cloned().collect()
    }

    /// Builds `name` for `m`. `auto` picks `exact-ou` when it applies and
    /// `left-point` otherwise.
    pub fn resolve(&self, name: &str, m: &MapModel) -> Result<Box<dyn IncrementScheme>> {
        if name == "auto" {
            let exact = ExactOu;
            return Ok(if exact.supports(m).is_ok() { Box::new(exact) } else { Box::new(LeftPoint) });
        }
        let builder = self.builders.get(name).ok_or_else(|| {
            Error::validation("scheme", format!("unknown scheme {name:?}; known: auto, {}", self.names().join(", ")))
        })?;
        let s = builder();
        s.supports(m)?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    #[test]
    fn registry_resolves() {
        let r = SchemeRegistry::standard();
        let m = parse_model(r#"{"states": 1, "Q": [[0]], "dynamics": [{"drift_xi": 1, "sigma2_xi": 1}]}"#).unwrap();
        assert_eq!(r.resolve("auto", &m).unwrap().name(), "left-point");
        assert!(r.resolve("exact-ou", &m).is_err());
        assert!(r.resolve("midpoint", &m).unwrap_err().is_validation());
        let m = parse_model(r#"{"states": 1, "Q": [[0]], "dynamics": [{"drift_xi": 1, "sigma2_eta": 1}]}"#).unwrap();
        assert_eq!(r.resolve("auto", &m).unwrap().name(), "exact-ou");
    }

    #[test]
    fn exact_ou_moments() {
        let d = StateDynamics { drift_xi: 0.7, drift_eta: 0.3, sigma2_eta: 2.0, ..Default::default() };
        let mut rng = PathRng::new(5, 0, false);
        let n = 100_000;
        let h = 0.8;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let (dx, i) = ExactOu.step(&d, h, &mut rng);
            assert_eq!(dx, 0.7 * h);
            s1 += i;
            s2 += i * i;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        // ∫_0^h e^{a r} dr and ∫_0^h e^{2 a r} dr
        let m_exact = 0.3 * ((0.7f64 * h).exp() - 1.0) / 0.7;
        let v_exact = 2.0 * ((1.4f64 * h).exp() - 1.0) / 1.4;
        assert!((mean - m_exact).abs() < 4.0 * (v_exact / n as f64).sqrt());
        assert!((var / v_exact - 1.0).abs() < 0.02);
    }
}
