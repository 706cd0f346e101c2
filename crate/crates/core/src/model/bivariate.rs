//! Joint laws of the jump pair `(ζ, χ)` and their pathwise transformations.

use rand::{Rng, RngCore};
use serde_json::{json, Value};

use super::laws::{check_probabilities, field, zero_law, JumpLaw, LawRegistry};
use super::Component;
use crate::error::{Error, Result};
use crate::numeric::factorial;

#[derive(Debug, Clone)]
pub enum JointBase {
    Independent { first: JumpLaw, second: JumpLaw },
    Discrete { atoms: Vec<(f64, f64, f64)> },
}

/// Pathwise map `(ζ, χ) ↦ (lin·ζ + expo·(e^{rate·ζ} − 1), scale·e^{tilt·ζ}·χ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMap {
    pub lin: f64,
    pub expo: f64,
    pub rate: f64,
    pub scale: f64,
    pub tilt: f64,
}

impl PairMap {
    pub const IDENTITY: PairMap = PairMap { lin: 1.0, expo: 0.0, rate: 0.0, scale: 1.0, tilt: 0.0 };
    /// `(ζ, χ) ↦ (e^{−ζ} − 1, e^{−ζ}χ)`.
    pub const TO_UL: PairMap = PairMap { lin: 0.0, expo: 1.0, rate: -1.0, scale: 1.0, tilt: -1.0 };
    /// `(ζ, χ) ↦ (ζ, e^{−ζ}χ)`.
    pub const TO_XI_L: PairMap = PairMap { lin: 1.0, expo: 0.0, rate: 0.0, scale: 1.0, tilt: -1.0 };

    pub fn sign(first: f64, second: f64) -> PairMap {
        PairMap { lin: first, expo: 0.0, rate: 0.0, scale: second, tilt: 0.0 }
    }

    fn sign_only(&self) -> bool {
        self.expo == 0.0 && self.tilt == 0.0 && self.lin.abs() == 1.0 && self.scale.abs() == 1.0
    }

    pub fn apply(&self, z: f64, c: f64) -> (f64, f64) {
        let first = if self.expo == 0.0 {
            self.lin * z
        } else {
            self.lin * z + self.expo * (self.rate * z).exp_m1()
        };
        let second = if c == 0.0 { 0.0 } else { self.scale * (self.tilt * z).exp() * c };
        (first, second)
    }

    /// `outer ∘ self`, when the result stays in the family.
    fn then(&self, outer: &PairMap) -> Option<PairMap> {
        if self.sign_only() {
            let (s1, s2) = (self.lin, self.scale);
            Some(PairMap {
                lin: outer.lin * s1,
                expo: outer.expo,
                rate: outer.rate * s1,
                scale: outer.scale * s2,
                tilt: outer.tilt * s1,
            })
        } else if outer.sign_only() {
            let (s1, s2) = (outer.lin, outer.scale);
            Some(PairMap {
                lin: self.lin * s1,
                expo: self.expo * s1,
                rate: self.rate,
                scale: self.scale * s2,
                tilt: self.tilt,
            })
        } else {
            None
        }
    }
}

/// Law of the jump pair. Transformed laws are kept as views on the original
/// base law and answer functional queries exactly where a closed form exists.
#[derive(Debug, Clone)]
pub struct BivariateJumpLaw {
    base: JointBase,
    map: PairMap,
}

impl BivariateJumpLaw {
    pub fn independent(first: JumpLaw, second: JumpLaw) -> Self {
        BivariateJumpLaw { base: JointBase::Independent { first, second }, map: PairMap::IDENTITY }
    }

    pub fn joint_discrete(atoms: Vec<(f64, f64, f64)>) -> Result<Self> {
        Self::check_atoms(&atoms, "atoms")?;
        Ok(BivariateJumpLaw { base: JointBase::Discrete { atoms }, map: PairMap::IDENTITY })
    }

    pub fn zero() -> Self {
        Self::independent(zero_law(), zero_law())
    }

    fn check_atoms(atoms: &[(f64, f64, f64)], path: &str) -> Result<()> {
        if atoms.is_empty() {
            return Err(Error::validation(path, "needs at least one atom"));
        }
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        check_probabilities(total, atoms.iter().map(|a| a.2), path)
    }

    pub fn base(&self) -> &JointBase {
        &self.base
    }

    pub fn map(&self) -> PairMap {
        self.map
    }

    pub fn is_explicit(&self) -> bool {
        self.map == PairMap::IDENTITY
    }

    pub fn is_zero(&self) -> bool {
        match &self.base {
            JointBase::Independent { first, second } => first.is_zero() && second.is_zero(),
            JointBase::Discrete { atoms } => atoms.iter().all(|a| a.0 == 0.0 && a.1 == 0.0 || a.2 == 0.0),
        }
    }

    pub fn from_json(v: &Value, path: &str, registry: &LawRegistry) -> Result<Self> {
        if !v.is_object() {
            return Err(Error::Schema(format!("{path}: expected an object")));
        }
        let kind = field(v, "joint", path)?
            .as_str()
            .ok_or_else(|| Error::Schema(format!("{path}.joint: expected a string")))?;
        match kind {
            "independent" => {
                let first = registry.build(field(v, "xi", path)?, &format!("{path}.xi"))?;
                let second = registry.build(field(v, "eta", path)?, &format!("{path}.eta"))?;
                Ok(Self::independent(first, second))
            }
            "discrete" => {
                let list = field(v, "atoms", path)?
                    .as_array()
                    .ok_or_else(|| Error::Schema(format!("{path}.atoms: expected an array")))?;
                let mut atoms = Vec::with_capacity(list.len());
                for (k, a) in list.iter().enumerate() {
                    let t = a
                        .as_array()
                        .filter(|t| t.len() == 3)
                        .and_then(|t| Some((t[0].as_f64()?, t[1].as_f64()?, t[2].as_f64()?)))
                        .filter(|t| t.0.is_finite() && t.1.is_finite() && t.2.is_finite())
                        .ok_or_else(|| {
                            Error::Schema(format!("{path}.atoms[{k}]: expected [x, y, prob]"))
                        })?;
                    atoms.push(t);
                }
                Self::check_atoms(&atoms, &format!("{path}.atoms"))?;
                Ok(BivariateJumpLaw { base: JointBase::Discrete { atoms }, map: PairMap::IDENTITY })
            }
            other => Err(Error::validation(
                format!("{path}.joint"),
                format!("unknown joint structure \"{other}\" (known: independent, discrete)"),
            )),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = match &self.base {
            JointBase::Independent { first, second } => {
                json!({"joint": "independent", "xi": first.to_json(), "eta": second.to_json()})
            }
            JointBase::Discrete { atoms } => {
                let list: Vec<Value> = atoms.iter().map(|&(x, y, p)| json!([x, y, p])).collect();
                json!({"joint": "discrete", "atoms": list})
            }
        };
        if !self.is_explicit() {
            let m = self.map;
            v["map"] = json!({
                "lin": m.lin, "expo": m.expo, "rate": m.rate, "scale": m.scale, "tilt": m.tilt
            });
        }
        v
    }

    /// Law of the pair after the pathwise map `map`.
    pub fn mapped(&self, map: PairMap) -> Result<Self> {
        let composed = self.map.then(&map).ok_or_else(|| {
            Error::UnsupportedLaw("composition of two nonlinear jump transformations".into())
        })?;
        Ok(BivariateJumpLaw { base: self.base.clone(), map: composed })
    }

    /// Law with the selected components negated; explicit laws stay explicit.
    pub fn negated(&self, first: bool, second: bool) -> Self {
        let s1 = if first { -1.0 } else { 1.0 };
        let s2 = if second { -1.0 } else { 1.0 };
        if !self.is_explicit() {
            return self.mapped(PairMap::sign(s1, s2)).expect("sign maps always compose");
        }
        let base = match &self.base {
            JointBase::Independent { first: a, second: b } => JointBase::Independent {
                first: if first { a.negated() } else { a.clone() },
                second: if second { b.negated() } else { b.clone() },
            },
            JointBase::Discrete { atoms } => JointBase::Discrete {
                atoms: atoms.iter().map(|&(x, y, p)| (s1 * x, s2 * y, p)).collect(),
            },
        };
        BivariateJumpLaw { base, map: PairMap::IDENTITY }
    }

    fn base_atoms(&self) -> Option<Vec<(f64, f64, f64)>> {
        match &self.base {
            JointBase::Discrete { atoms } => Some(atoms.clone()),
            JointBase::Independent { first, second } => {
                let a = first.atoms()?;
                let b = second.atoms()?;
                Some(
                    a.iter()
                        .flat_map(|&(x, p)| b.iter().map(move |&(y, q)| (x, y, p * q)))
                        .collect(),
                )
            }
        }
    }

    /// Atoms of the (transformed) law when it is purely atomic.
    pub fn atoms(&self) -> Option<Vec<(f64, f64, f64)>> {
        let atoms = self.base_atoms()?;
        Some(
            atoms
                .into_iter()
                .map(|(x, y, p)| {
                    let (a, b) = self.map.apply(x, y);
                    (a, b, p)
                })
                .collect(),
        )
    }

    /// Explicit (untransformed) representation, available for identity maps
    /// and atomic bases.
    pub fn explicit(&self) -> Result<Self> {
        if self.is_explicit() {
            return Ok(self.clone());
        }
        match self.atoms() {
            Some(atoms) => Ok(BivariateJumpLaw { base: JointBase::Discrete { atoms }, map: PairMap::IDENTITY }),
            None => Err(Error::UnsupportedLaw(
                "transformed law of a non-atomic jump family has no explicit parametric form".into(),
            )),
        }
    }

    /// `E[ζ^i e^{θζ} χ^m]` under the base law.
    fn base_moment(&self, i: u32, theta: f64, m: u32) -> f64 {
        match &self.base {
            JointBase::Independent { first, second } => {
                let a = if i == 0 && theta == 0.0 { 1.0 } else { first.exp_power_moment(i, theta) };
                let b = if m == 0 { 1.0 } else { second.raw_moment(m) };
                if a.is_infinite() || b.is_infinite() {
                    f64::INFINITY
                } else {
                    a * b
                }
            }
            JointBase::Discrete { atoms } => {
                let v: f64 = atoms
                    .iter()
                    .map(|&(x, y, p)| p * x.powi(i as i32) * (theta * x).exp() * y.powi(m as i32))
                    .sum();
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            }
        }
    }

    /// Raw cross moment `E[X_1^a X_2^b]` of the transformed pair.
    pub fn moment(&self, a: u32, b: u32) -> f64 {
        let m = self.map;
        let scale_b = m.scale.powi(b as i32);
        if scale_b == 0.0 && b > 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..=a {
            for j in 0..=(a - i) {
                let k = a - i - j;
                let lin_i = m.lin.powi(i as i32);
                let expo_jk = m.expo.powi(j as i32) * (-m.expo).powi(k as i32);
                let coef = factorial(a) / (factorial(i) * factorial(j) * factorial(k)) * lin_i * expo_jk;
                if coef == 0.0 {
                    continue;
                }
                let e = self.base_moment(i, f64::from(j) * m.rate + f64::from(b) * m.tilt, b);
                if e.is_infinite() {
                    return f64::INFINITY;
                }
                total += coef * e;
            }
        }
        total * scale_b
    }

    pub fn component_moment(&self, c: Component, n: u32) -> f64 {
        match c {
            Component::First => self.moment(n, 0),
            Component::Second => self.moment(0, n),
        }
    }

    fn unsupported(&self, what: &str) -> Error {
        Error::UnsupportedLaw(format!(
            "{what} of a transformed non-atomic jump law has no closed form"
        ))
    }

    /// `E[e^{θ X_c}]`.
    pub fn mgf(&self, c: Component, theta: f64) -> Result<f64> {
        if theta == 0.0 {
            return Ok(1.0);
        }
        let m = self.map;
        match c {
            Component::First if m.expo == 0.0 => Ok(self.base_moment(0, theta * m.lin, 0)),
            Component::Second if m.tilt == 0.0 => Ok(match &self.base {
                JointBase::Independent { second, .. } => second.mgf(theta * m.scale),
                JointBase::Discrete { atoms } => {
                    let v: f64 = atoms.iter().map(|&(_, y, p)| p * (theta * m.scale * y).exp()).sum();
                    if v.is_nan() { f64::INFINITY } else { v }
                }
            }),
            _ => {
                let atoms = self.atoms().ok_or_else(|| self.unsupported("moment generating function"))?;
                Ok(atoms
                    .iter()
                    .map(|&(x, y, p)| {
                        let v = match c {
                            Component::First => x,
                            Component::Second => y,
                        };
                        p * (theta * v).exp()
                    })
                    .sum())
            }
        }
    }

    /// `E[e^{θ X_1} X_2^n]`.
    pub fn mixed(&self, theta: f64, n: u32) -> Result<f64> {
        let m = self.map;
        if m.expo == 0.0 {
            let e = self.base_moment(0, theta * m.lin + f64::from(n) * m.tilt, n);
            return Ok(if e.is_infinite() { e } else { m.scale.powi(n as i32) * e });
        }
        let atoms = self.atoms().ok_or_else(|| self.unsupported("mixed functional"))?;
        Ok(atoms.iter().map(|&(x, y, p)| p * (theta * x).exp() * y.powi(n as i32)).sum())
    }

    /// Whether `E|X_c|^p < ∞`.
    pub fn abs_moment_finite(&self, c: Component, p: f64) -> bool {
        let (first, second) = match &self.base {
            JointBase::Discrete { .. } => return true,
            JointBase::Independent { first, second } => (first, second),
        };
        let m = self.map;
        match c {
            Component::First => {
                let lin_ok = m.lin == 0.0 || first.abs_moment(p).is_finite();
                let expo_ok = m.expo == 0.0 || first.mgf(p * m.rate).is_finite();
                lin_ok && expo_ok
            }
            Component::Second => {
                if m.scale == 0.0 || second.is_zero() {
                    return true;
                }
                let tilt_ok = m.tilt == 0.0 || first.mgf(p * m.tilt).is_finite();
                tilt_ok && second.abs_moment(p).is_finite()
            }
        }
    }

    /// `E|X_c|^p` for explicit laws (`None` when only finiteness is decidable).
    pub fn abs_moment(&self, c: Component, p: f64) -> Option<f64> {
        if let Some(atoms) = self.atoms() {
            return Some(
                atoms
                    .iter()
                    .map(|&(x, y, w)| {
                        let v = match c {
                            Component::First => x,
                            Component::Second => y,
                        };
                        w * v.abs().powf(p)
                    })
                    .sum(),
            );
        }
        if !self.is_explicit() {
            return None;
        }
        match &self.base {
            JointBase::Independent { first, second } => Some(match c {
                Component::First => first.abs_moment(p),
                Component::Second => second.abs_moment(p),
            }),
            JointBase::Discrete { .. } => unreachable!("discrete bases are atomic"),
        }
    }

    /// Whether `E[e^{κ|X_c|}] < ∞`.
    pub fn exp_moment_finite(&self, c: Component, kappa: f64) -> bool {
        let k = kappa.abs();
        let (first, second) = match &self.base {
            JointBase::Discrete { .. } => return true,
            JointBase::Independent { first, second } => (first, second),
        };
        if k == 0.0 {
            return true;
        }
        let both = |law: &JumpLaw, t: f64| law.mgf(t).is_finite() && law.mgf(-t).is_finite();
        let m = self.map;
        let sup_of = |r: f64| {
            let (lo, hi) = first.support();
            if r > 0.0 {
                r * hi
            } else if r < 0.0 {
                r * lo
            } else {
                0.0
            }
        };
        match c {
            Component::First => {
                if m.expo != 0.0 && !sup_of(m.rate).is_finite() {
                    return false;
                }
                m.lin == 0.0 || both(first, k * m.lin.abs())
            }
            Component::Second => {
                if m.scale == 0.0 || second.is_zero() {
                    return true;
                }
                let top = sup_of(m.tilt);
                if !top.is_finite() {
                    return false;
                }
                both(second, k * m.scale.abs() * top.exp())
            }
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> (f64, f64) {
        let (z, c) = match &self.base {
            JointBase::Independent { first, second } => (first.sample(rng), second.sample(rng)),
            JointBase::Discrete { atoms } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = atoms[atoms.len() - 1];
                for a in atoms {
                    acc += a.2;
                    if u < acc {
                        pick = *a;
                        break;
                    }
                }
                (pick.0, pick.1)
            }
        };
        self.map.apply(z, c)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::model::laws::{Constant, Exponential, Normal, Pareto};
    use crate::numeric::integrate;

    fn normal_xi(mean: f64, var: f64) -> BivariateJumpLaw {
        BivariateJumpLaw::independent(Arc::new(Normal { mean, var }), Arc::new(Constant { value: 0.7 }))
    }

    #[test]
    fn ul_transform_of_constant_is_explicit() {
        let law = BivariateJumpLaw::independent(
            Arc::new(Constant { value: 2f64.ln() }),
            Arc::new(Constant { value: 0.0 }),
        );
        let ul = law.mapped(PairMap::TO_UL).unwrap();
        let atoms = ul.explicit().unwrap().atoms().unwrap();
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].0 + 0.5).abs() < 1e-15);
        assert_eq!(atoms[0].1, 0.0);
    }

    #[test]
    fn ul_transform_of_normal_is_functional_only() {
        let ul = normal_xi(0.2, 0.5).mapped(PairMap::TO_UL).unwrap();
        assert!(matches!(ul.explicit(), Err(Error::UnsupportedLaw(_))));
        assert!(matches!(ul.mgf(Component::First, 0.3), Err(Error::UnsupportedLaw(_))));
    }

    #[test]
    fn ul_moments_match_quadrature() {
        let (mu, var) = (0.2, 0.5);
        let law = normal_xi(mu, var);
        let ul = law.mapped(PairMap::TO_UL).unwrap();
        let sd = f64::sqrt(var);
        let expect = |g: &dyn Fn(f64) -> f64| {
            let f = |x: f64| {
                let z = (x - mu) / sd;
                g(x) * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            };
            integrate(&f, mu - 40.0 * sd, mu + 40.0 * sd, 1e-14)
        };
        for a in 0..4u32 {
            for b in 0..3u32 {
                let q = expect(&|x| (-x).exp_m1().powi(a as i32) * ((-x).exp() * 0.7).powi(b as i32));
                let v = ul.moment(a, b);
                assert!((v - q).abs() < 1e-9 * q.abs().max(1.0), "a={a} b={b}: {v} vs {q}");
            }
        }
    }

    #[test]
    fn mixed_functional_independent() {
        let law = BivariateJumpLaw::independent(
            Arc::new(Exponential { rate: 3.0, sign: 1.0 }),
            Arc::new(Normal { mean: 1.0, var: 2.0 }),
        );
        // E[e^{θζ}] E[χ²] with E[e^{θζ}] = 3/(3-θ)
        let v = law.mixed(1.0, 2).unwrap();
        assert!((v - 1.5 * 3.0).abs() < 1e-14);
        assert_eq!(law.mixed(3.0, 0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn negation_keeps_explicit_form() {
        let law = BivariateJumpLaw::joint_discrete(vec![(1.0, 2.0, 0.5), (-1.0, 0.5, 0.5)]).unwrap();
        let neg = law.negated(true, false);
        assert!(neg.is_explicit());
        assert_eq!(neg.atoms().unwrap()[0], (-1.0, 2.0, 0.5));
        assert!((neg.moment(1, 1) + law.moment(1, 1)).abs() < 1e-15);
    }

    #[test]
    fn negation_of_view_composes() {
        let ul = normal_xi(0.1, 0.3).mapped(PairMap::TO_UL).unwrap();
        let neg = ul.negated(true, true);
        assert!((neg.moment(1, 0) + ul.moment(1, 0)).abs() < 1e-15);
        assert!((neg.moment(1, 1) - ul.moment(1, 1)).abs() < 1e-15);
        assert!((neg.moment(0, 1) + ul.moment(0, 1)).abs() < 1e-15);
    }

    #[test]
    fn two_nonlinear_maps_do_not_compose() {
        let ul = normal_xi(0.1, 0.3).mapped(PairMap::TO_UL).unwrap();
        assert!(matches!(ul.mapped(PairMap::TO_UL), Err(Error::UnsupportedLaw(_))));
    }

    #[test]
    fn discrete_probabilities_checked() {
        assert!(BivariateJumpLaw::joint_discrete(vec![(1.0, 2.0, 0.5)]).is_err());
        assert!(BivariateJumpLaw::joint_discrete(vec![(1.0, 2.0, 1.2), (0.0, 0.0, -0.2)]).is_err());
    }

    #[test]
    fn finiteness_checks() {
        let heavy = BivariateJumpLaw::independent(
            Arc::new(Pareto { alpha: 1.5, xmin: 1.0, sign: 1.0 }),
            Arc::new(Constant { value: 0.0 }),
        );
        assert!(!heavy.abs_moment_finite(Component::First, 2.0));
        assert!(heavy.abs_moment_finite(Component::First, 1.2));
        assert!(!heavy.exp_moment_finite(Component::First, 0.1));
        // e^{-ζ} - 1 is bounded for a positive pareto ζ
        let ul = heavy.mapped(PairMap::TO_UL).unwrap();
        assert!(ul.abs_moment_finite(Component::First, 5.0));
        assert!(ul.exp_moment_finite(Component::First, 5.0));
        let expo = BivariateJumpLaw::independent(
            Arc::new(Exponential { rate: 1.0, sign: 1.0 }),
            Arc::new(Constant { value: 0.0 }),
        );
        assert!(!expo.exp_moment_finite(Component::First, 2.0));
        assert!(expo.exp_moment_finite(Component::First, 0.5));
    }
}
