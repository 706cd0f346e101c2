//! Univariate jump families and the name-keyed registry used to build them
//! from model documents.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numeric::{factorial, integrate, upper_incomplete_gamma};

/// A one-dimensional jump distribution with exact moment functionals.
///
/// Divergent functionals are reported as `f64::INFINITY`.
pub trait JumpFamily: fmt::Debug + Send + Sync {
    fn family(&self) -> &'static str;
    fn to_json(&self) -> Value;
    /// `E|Z|^p` for `p ≥ 0`.
    fn abs_moment(&self, p: f64) -> f64;
    /// `E[Z^n e^{θZ}]`.
    fn exp_power_moment(&self, n: u32, theta: f64) -> f64;
    /// Closed hull of the support.
    fn support(&self) -> (f64, f64);
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    /// Law of `-Z`.
    fn negated(&self) -> JumpLaw;
    /// Finite atom list when the law is purely atomic.
    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        None
    }

    fn mgf(&self, theta: f64) -> f64 {
        self.exp_power_moment(0, theta)
    }
    fn raw_moment(&self, n: u32) -> f64 {
        self.exp_power_moment(n, 0.0)
    }
    fn mean(&self) -> f64 {
        self.raw_moment(1)
    }
    fn is_zero(&self) -> bool {
        self.support() == (0.0, 0.0)
    }
}

pub type JumpLaw = Arc<dyn JumpFamily>;

fn finite_or_inf(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

#[derive(Debug, Clone)]
pub struct Constant {
    pub value: f64,
}

impl JumpFamily for Constant {
    fn family(&self) -> &'static str {
        "constant"
    }
    fn to_json(&self) -> Value {
        json!({"family": "constant", "value": self.value})
    }
    fn abs_moment(&self, p: f64) -> f64 {
        self.value.abs().powf(p)
    }
    fn exp_power_moment(&self, n: u32, theta: f64) -> f64 {
        finite_or_inf(self.value.powi(n as i32) * (theta * self.value).exp())
    }
    fn support(&self) -> (f64, f64) {
        (self.value, self.value)
    }
    fn sample(&self, _rng: &mut dyn RngCore) -> f64 {
        self.value
    }
    fn negated(&self) -> JumpLaw {
        Arc::new(Constant { value: -self.value })
    }
    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        Some(vec![(self.value, 1.0)])
    }
}

#[derive(Debug, Clone)]
pub struct Normal {
    pub mean: f64,
    pub var: f64,
}

impl Normal {
    fn raw_moments_of(mean: f64, var: f64, n: u32) -> f64 {
        let (mut prev, mut cur) = (1.0, mean);
        if n == 0 {
            return 1.0;
        }
        for k in 2..=n {
            let next = mean * cur + f64::from(k - 1) * var * prev;
            prev = cur;
            cur = next;
        }
        cur
    }
}

impl JumpFamily for Normal {
    fn family(&self) -> &'static str {
        "normal"
    }
    fn to_json(&self) -> Value {
        json!({"family": "normal", "mean": self.mean, "var": self.var})
    }
    fn abs_moment(&self, p: f64) -> f64 {
        if p == 0.0 {
            return 1.0;
        }
        if self.var == 0.0 {
            return self.mean.abs().powf(p);
        }
        if p.fract() == 0.0 && (p as u32) % 2 == 0 {
            return Normal::raw_moments_of(self.mean, self.var, p as u32);
        }
        let sd = self.var.sqrt();
        let density = |x: f64| {
            let z = (x - self.mean) / sd;
            x.abs().powf(p) * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        let lo = self.mean - 40.0 * sd;
        let hi = self.mean + 40.0 * sd;
        if lo < 0.0 && hi > 0.0 {
            integrate(&density, lo, 0.0, 1e-15) + integrate(&density, 0.0, hi, 1e-15)
        } else {
            integrate(&density, lo, hi, 1e-15)
        }
    }
    fn exp_power_moment(&self, n: u32, theta: f64) -> f64 {
        let scale = (theta * self.mean + 0.5 * theta * theta * self.var).exp();
        finite_or_inf(scale * Normal::raw_moments_of(self.mean + theta * self.var, self.var, n))
    }
    fn support(&self) -> (f64, f64) {
        if self.var == 0.0 {
            (self.mean, self.mean)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.var.sqrt() * z
    }
    fn negated(&self) -> JumpLaw {
        Arc::new(Normal { mean: -self.mean, var: self.var })
    }
    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        (self.var == 0.0).then(|| vec![(self.mean, 1.0)])
    }
}

#[derive(Debug, Clone)]
pub struct Exponential {
    pub rate: f64,
    pub sign: f64,
}

impl JumpFamily for Exponential {
    fn family(&self) -> &'static str {
        "exponential"
    }
    fn to_json(&self) -> Value {
        json!({"family": "exponential", "rate": self.rate, "sign": self.sign as i64})
    }
    fn abs_moment(&self, p: f64) -> f64 {
        statrs::function::gamma::gamma(p + 1.0) / self.rate.powf(p)
    }
    fn exp_power_moment(&self, n: u32, theta: f64) -> f64 {
        let t = self.sign * theta;
        if t >= self.rate {
            return f64::INFINITY;
        }
        let v = self.sign.powi(n as i32) * self.rate * factorial(n)
            / (self.rate - t).powi(n as i32 + 1);
        finite_or_inf(v)
    }
    fn support(&self) -> (f64, f64) {
        if self.sign > 0.0 {
            (0.0, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, 0.0)
        }
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.sign * e / self.rate
    }
    fn negated(&self) -> JumpLaw {
        Arc::new(Exponential { rate: self.rate, sign: -self.sign })
    }
}

#[derive(Debug, Clone)]
pub struct Discrete {
    pub atoms: Vec<(f64, f64)>,
}

impl JumpFamily for Discrete {
    fn family(&self) -> &'static str {
        "discrete"
    }
    fn to_json(&self) -> Value {
        let atoms: Vec<Value> = self.atoms.iter().map(|&(x, p)| json!([x, p])).collect();
        json!({"family": "discrete", "atoms": atoms})
    }
    fn abs_moment(&self, p: f64) -> f64 {
        self.atoms.iter().map(|&(x, w)| w * x.abs().powf(p)).sum()
    }
    fn exp_power_moment(&self, n: u32, theta: f64) -> f64 {
        let v: f64 = self
            .atoms
            .iter()
            .map(|&(x, w)| w * x.powi(n as i32) * (theta * x).exp())
            .sum();
        finite_or_inf(v)
    }
    fn support(&self) -> (f64, f64) {
        let lo = self.atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
        let hi = self.atoms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(x, w) in &self.atoms {
            acc += w;
            if u < acc {
                return x;
            }
        }
        self.atoms.last().map_or(0.0, |a| a.0)
    }
    fn negated(&self) -> JumpLaw {
        Arc::new(Discrete { atoms: self.atoms.iter().map(|&(x, w)| (-x, w)).collect() })
    }
    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        Some(self.atoms.clone())
    }
}

#[derive(Debug, Clone)]
pub struct Pareto {
    pub alpha: f64,
    pub xmin: f64,
    pub sign: f64,
}

impl JumpFamily for Pareto {
    fn family(&self) -> &'static str {
        "pareto"
    }
    fn to_json(&self) -> Value {
        json!({"family": "pareto", "alpha": self.alpha, "xmin": self.xmin, "sign": self.sign as i64})
    }
    fn abs_moment(&self, p: f64) -> f64 {
        if self.alpha <= p {
            return f64::INFINITY;
        }
        self.alpha * self.xmin.powf(p) / (self.alpha - p)
    }
    fn exp_power_moment(&self, n: u32, theta: f64) -> f64 {
        let t = self.sign * theta;
        let sign_n = self.sign.powi(n as i32);
        if t > 0.0 {
            return f64::INFINITY;
        }
        if t == 0.0 {
            if self.alpha <= f64::from(n) {
                return f64::INFINITY;
            }
            return sign_n * self.alpha * self.xmin.powi(n as i32) / (self.alpha - f64::from(n));
        }
        // E[X^n e^{-cX}] = α xmin^α c^{α-n} Γ(n-α, c xmin)
        let c = -t;
        let s = f64::from(n) - self.alpha;
        let v = self.alpha
            * self.xmin.powf(self.alpha)
            * c.powf(-s)
            * upper_incomplete_gamma(s, c * self.xmin);
        finite_or_inf(sign_n * v)
    }
    fn support(&self) -> (f64, f64) {
        if self.sign > 0.0 {
            (self.xmin, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, -self.xmin)
        }
    }
    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        self.sign * self.xmin * u.powf(-1.0 / self.alpha)
    }
    fn negated(&self) -> JumpLaw {
        Arc::new(Pareto { alpha: self.alpha, xmin: self.xmin, sign: -self.sign })
    }
}

pub fn zero_law() -> JumpLaw {
    Arc::new(Constant { value: 0.0 })
}

// ---- document parsing ----

pub(crate) fn field<'a>(obj: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::Schema(format!("{path}: missing key \"{key}\"")))
}

pub(crate) fn number(obj: &Value, key: &str, path: &str) -> Result<f64> {
    let v = field(obj, key, path)?;
    let x = v
        .as_f64()
        .ok_or_else(|| Error::Schema(format!("{path}.{key}: expected a number")))?;
    if !x.is_finite() {
        return Err(Error::validation(format!("{path}.{key}"), "must be finite"));
    }
    Ok(x)
}

fn sign(obj: &Value, path: &str) -> Result<f64> {
    let s = number(obj, "sign", path)?;
    if s == 1.0 || s == -1.0 {
        Ok(s)
    } else {
        Err(Error::validation(format!("{path}.sign"), "must be 1 or -1"))
    }
}

pub(crate) fn check_probabilities(total: f64, probs: impl Iterator<Item = f64>, path: &str) -> Result<()> {
    for (k, p) in probs.enumerate() {
        if p < 0.0 {
            return Err(Error::validation(format!("{path}[{k}]"), "negative probability"));
        }
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::validation(path, format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

fn build_constant(v: &Value, path: &str) -> Result<JumpLaw> {
    Ok(Arc::new(Constant { value: number(v, "value", path)? }))
}

fn build_normal(v: &Value, path: &str) -> Result<JumpLaw> {
    let mean = number(v, "mean", path)?;
    let var = number(v, "var", path)?;
    if var < 0.0 {
        return Err(Error::validation(format!("{path}.var"), "must be >= 0"));
    }
    Ok(Arc::new(Normal { mean, var }))
}

fn build_exponential(v: &Value, path: &str) -> Result<JumpLaw> {
    let rate = number(v, "rate", path)?;
    if rate <= 0.0 {
        return Err(Error::validation(format!("{path}.rate"), "must be > 0"));
    }
    Ok(Arc::new(Exponential { rate, sign: sign(v, path)? }))
}

fn build_discrete(v: &Value, path: &str) -> Result<JumpLaw> {
    let list = field(v, "atoms", path)?
        .as_array()
        .ok_or_else(|| Error::Schema(format!("{path}.atoms: expected an array")))?;
    if list.is_empty() {
        return Err(Error::validation(format!("{path}.atoms"), "needs at least one atom"));
    }
    let mut atoms = Vec::with_capacity(list.len());
    for (k, a) in list.iter().enumerate() {
        let pair = a.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
            Error::Schema(format!("{path}.atoms[{k}]: expected [value, prob]"))
        })?;
        let x = pair[0].as_f64();
        let p = pair[1].as_f64();
        match (x, p) {
            (Some(x), Some(p)) if x.is_finite() && p.is_finite() => atoms.push((x, p)),
            _ => return Err(Error::Schema(format!("{path}.atoms[{k}]: expected two numbers"))),
        }
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    check_probabilities(total, atoms.iter().map(|a| a.1), &format!("{path}.atoms"))?;
    Ok(Arc::new(Discrete { atoms }))
}

fn build_pareto(v: &Value, path: &str) -> Result<JumpLaw> {
    let alpha = number(v, "alpha", path)?;
    let xmin = number(v, "xmin", path)?;
    if alpha <= 0.0 {
        return Err(Error::validation(format!("{path}.alpha"), "must be > 0"));
    }
    if xmin <= 0.0 {
        return Err(Error::validation(format!("{path}.xmin"), "must be > 0"));
    }
    Ok(Arc::new(Pareto { alpha, xmin, sign: sign(v, path)? }))
}

pub type LawBuilder = fn(&Value, &str) -> Result<JumpLaw>;

/// Jump families available to model documents, keyed by their `family` tag.
#[derive(Clone)]
pub struct LawRegistry {
    builders: BTreeMap<String, LawBuilder>,
}

impl LawRegistry {
    pub fn empty() -> Self {
        LawRegistry { builders: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut r = LawRegistry::empty();
        r.register("constant", build_constant);
        r.register("normal", build_normal);
        r.register("exponential", build_exponential);
        r.register("discrete", build_discrete);
        r.register("pareto", build_pareto);
        r
    }

    pub fn register(&mut self, name: &str, builder: LawBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> Vec<&str> {
        self.builders.keys().map(String::as_str).collect()
    }

    pub fn build(&self, v: &Value, path: &str) -> Result<JumpLaw> {
        if !v.is_object() {
            return Err(Error::Schema(format!("{path}: expected an object")));
        }
        let name = field(v, "family", path)?
            .as_str()
            .ok_or_else(|| Error::Schema(format!("{path}.family: expected a string")))?;
        let builder = self.builders.get(name).ok_or_else(|| {
            Error::validation(
                format!("{path}.family"),
                format!("unknown family \"{name}\" (known: {})", self.names().join(", ")),
            )
        })?;
        builder(v, path)
    }
}

impl fmt::Debug for LawRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LawRegistry").field("families", &self.names()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad_normal(n: &Normal, g: &dyn Fn(f64) -> f64) -> f64 {
        let sd = n.var.sqrt();
        let f = |x: f64| {
            let z = (x - n.mean) / sd;
            g(x) * (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        integrate(&f, n.mean - 40.0 * sd, n.mean + 40.0 * sd, 1e-14)
    }

    #[test]
    fn normal_functionals_match_quadrature() {
        let law = Normal { mean: 0.3, var: 0.8 };
        for n in 0..5u32 {
            for &theta in &[-1.0, -0.2, 0.0, 0.7] {
                let exact = law.exp_power_moment(n, theta);
                let q = quad_normal(&law, &|x| x.powi(n as i32) * (theta * x).exp());
                assert!((exact - q).abs() < 1e-9 * q.abs().max(1.0), "n={n} θ={theta}");
            }
        }
        for &p in &[0.5, 1.0, 1.5, 3.0] {
            let q = quad_normal(&law, &|x| x.abs().powf(p));
            assert!((law.abs_moment(p) - q).abs() < 1e-9);
        }
    }

    #[test]
    fn exponential_mgf_diverges_at_rate() {
        let law = Exponential { rate: 1.0, sign: 1.0 };
        assert_eq!(law.mgf(1.0), f64::INFINITY);
        assert_eq!(law.mgf(2.0), f64::INFINITY);
        assert!((law.mgf(0.5) - 2.0).abs() < 1e-15);
        let neg = Exponential { rate: 2.0, sign: -1.0 };
        assert!((neg.mean() + 0.5).abs() < 1e-15);
        assert_eq!(neg.mgf(-2.0), f64::INFINITY);
    }

    #[test]
    fn pareto_moments_and_divergence() {
        let law = Pareto { alpha: 1.5, xmin: 1.0, sign: 1.0 };
        assert_eq!(law.abs_moment(2.0), f64::INFINITY);
        assert!((law.abs_moment(1.2) - 1.5 / 0.3).abs() < 1e-12);
        assert_eq!(law.mgf(0.1), f64::INFINITY);
        assert!(law.mgf(-0.1).is_finite());
        assert_eq!(law.raw_moment(2), f64::INFINITY);
    }

    #[test]
    fn pareto_exp_moment_against_quadrature() {
        let law = Pareto { alpha: 2.5, xmin: 0.5, sign: -1.0 };
        for n in 0..4u32 {
            let theta = 0.8;
            let f = |w: f64| {
                if w >= 1.0 {
                    return 0.0;
                }
                let x = 0.5 + w / (1.0 - w);
                let dens = 2.5 * 0.5f64.powf(2.5) * x.powf(-3.5);
                (-x).powi(n as i32) * (-theta * x).exp() * dens / ((1.0 - w) * (1.0 - w))
            };
            let q = integrate(&f, 0.0, 1.0, 1e-14);
            let v = law.exp_power_moment(n, theta);
            assert!((v - q).abs() < 1e-9 * q.abs().max(1.0), "n={n}: {v} vs {q}");
        }
    }

    #[test]
    fn discrete_sums() {
        let law = Discrete { atoms: vec![(-1.0, 0.25), (2.0, 0.75)] };
        assert!((law.mean() - 1.25).abs() < 1e-15);
        assert!((law.mgf(1.0) - (0.25 * (-1f64).exp() + 0.75 * 2f64.exp())).abs() < 1e-14);
        assert_eq!(law.support(), (-1.0, 2.0));
    }

    #[test]
    fn registry_builds_and_rejects() {
        let r = LawRegistry::standard();
        let law = r.build(&json!({"family": "normal", "mean": 1.0, "var": 2.0}), "x").unwrap();
        assert_eq!(law.family(), "normal");
        let bad = r.build(&json!({"family": "normal", "mean": 1.0, "var": -2.0}), "x");
        assert!(matches!(bad, Err(Error::Validation { ref path, .. }) if path == "x.var"));
        let unknown = r.build(&json!({"family": "cauchy"}), "x");
        assert!(matches!(unknown, Err(Error::Validation { .. })));
        let probs = r.build(&json!({"family": "discrete", "atoms": [[1.0, 0.5], [2.0, 0.4]]}), "x");
        assert!(matches!(probs, Err(Error::Validation { .. })));
    }

    #[test]
    fn json_round_trip() {
        let r = LawRegistry::standard();
        let docs = [
            json!({"family": "constant", "value": 0.5}),
            json!({"family": "exponential", "rate": 2.0, "sign": -1}),
            json!({"family": "pareto", "alpha": 1.5, "xmin": 1.0, "sign": 1}),
        ];
        for d in docs {
            let law = r.build(&d, "x").unwrap();
            assert_eq!(law.to_json(), d);
        }
    }

    #[test]
    fn samplers_have_right_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let laws: Vec<JumpLaw> = vec![
            Arc::new(Normal { mean: 0.5, var: 2.0 }),
            Arc::new(Exponential { rate: 2.0, sign: -1.0 }),
            Arc::new(Discrete { atoms: vec![(-1.0, 0.25), (2.0, 0.75)] }),
            Arc::new(Pareto { alpha: 3.5, xmin: 1.0, sign: 1.0 }),
        ];
        for law in laws {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            let z = (m - law.mean()) / (v / n as f64).sqrt();
            assert!(z.abs() < 4.0, "{}: z={z}", law.family());
        }
    }
}
