//! Closed forms against Monte Carlo, one z-score per quantity.

use mapmom_core::linalg::{expm, leading_eigenvalue, Vector};
use mapmom_core::map_moments::{self, return_time_exp_moment, Start};
use mapmom_core::mc::{self, Estimate, SimConfig, StationaryMode};
use mapmom_core::mmgou::{self, psi_xi, stationarity_check};
use mapmom_core::model::{Component, MapModel};
use mapmom_core::Result;

use crate::output::{num, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Quick,
    Full,
}

pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct Check {
    pub quantity: String,
    pub closed_form: f64,
    pub mc: Option<Estimate>,
}

impl Check {
    pub fn z(&self) -> Option<f64> {
        let e = self.mc?;
        let diff = e.mean - self.closed_form;
        Some(if e.se > 0.0 {
            diff / e.se
        } else if diff.abs() <= 1e-12 * self.closed_form.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        })
    }

    /// `None` for skipped items.
    pub fn passed(&self) -> Option<bool> {
        self.z().map(|z| z.abs() <= Z_LIMIT)
    }
}

pub fn table(checks: &[Check]) -> Table {
    let mut t = Table::new(["quantity", "closed_form", "mc", "se", "z", "pass"]);
    for c in checks {
        let (mean, se) = c.mc.map_or((f64::NAN, f64::NAN), |e| (e.mean, e.se));
        let verdict = match c.passed() {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "skip",
        };
        t.push(vec![c.quantity.clone(), num(c.closed_form), num(mean), num(se), num(c.z().unwrap_or(f64::NAN)), verdict.into()]);
    }
    t
}

fn has_l(m: &MapModel) -> bool {
    m.dynamics().iter().any(|d| {
        d.drift_eta != 0.0 || d.sigma2_eta != 0.0 || d.sigma_xi_eta != 0.0 || (d.cp_rate > 0.0 && !d.cp_law.is_zero())
    }) || m.transitions().values().any(|l| l.component_moment(Component::Second, 2) != 0.0)
}

fn push(out: &mut Vec<Check>, quantity: impl Into<String>, closed_form: f64, mc: Estimate) {
    out.push(Check { quantity: quantity.into(), closed_form, mc: Some(mc) });
}

fn skip(out: &mut Vec<Check>, quantity: impl Into<String>, closed_form: f64) {
    out.push(Check { quantity: quantity.into(), closed_form, mc: None });
}

/// Burn-in after which first and second moments have relaxed to `1e-6`.
fn burn_in(m: &MapModel) -> f64 {
    let rate = [1.0, 2.0]
        .iter()
        .map(|&k| psi_xi(m, k).and_then(|p| leading_eigenvalue(&p)).unwrap_or(0.0))
        .fold(f64::NEG_INFINITY, f64::max);
    if rate < 0.0 {
        (1e-6f64).ln() / rate
    } else {
        50.0
    }
}

pub fn run(m: &MapModel, suite: Suite, cfg: &SimConfig) -> Result<Vec<Check>> {
    let full = suite == Suite::Full;
    let mut out = Vec::new();
    let (t, w) = (1.0, 0.3);
    let j = Start::State(0);
    let components: &[Component] = if full { &[Component::First, Component::Second] } else { &[Component::First] };

    for &c in components {
        let name = c.name();
        let e = mc::estimate_map_moments(m, c, j, t, w, cfg)?;
        push(&mut out, format!("map.mean[{name}](j=1;t=1)"), map_moments::mean(m, c, j, t)?, e.mean);
        push(&mut out, format!("map.variance[{name}](j=1;t=1)"), map_moments::variance(m, c, j, t)?, e.variance);
        if full {
            let hat = map_moments::mean_hat(m, c, j, t)?;
            let cf = expm(&map_moments::matrix_exponent(m, c, w)?, t)?;
            for i in 0..m.n_states() {
                push(&mut out, format!("map.mean_hat[{name}](j=1;t=1;i={})", i + 1), hat[i], e.mean_hat[i]);
                push(&mut out, format!("map.char_fn[{name}](j=1;t=1;w=0.3;i={})", i + 1), cf[(i, 0)], e.char_fn[i]);
            }
        }
        let s = mc::estimate_map_moments(m, c, Start::Stationary, t, w, cfg)?;
        push(&mut out, format!("map.mean_rate[{name}]"), map_moments::mean_rate(m, c)?, s.mean);
        if full {
            push(&mut out, format!("map.variance[{name}](pi;t=1)"), map_moments::variance(m, c, Start::Stationary, t)?, s.variance);
        }
    }

    if m.n_states() >= 2 {
        let kappa = -1.0;
        match return_time_exp_moment(m, Component::First, 0, kappa) {
            Ok(r) if r.value.is_finite() => {
                let e = mc::estimate_return_exp_moment(m, Component::First, 0, kappa, cfg)?;
                push(&mut out, "map.return_exp_moment[xi](j=1;kappa=-1)", r.value, e.estimate);
            }
            Ok(r) => skip(&mut out, "map.return_exp_moment[xi](j=1;kappa=-1)", r.value),
            Err(_) => skip(&mut out, "map.return_exp_moment[xi](j=1;kappa=-1)", f64::NAN),
        }
    }

    if full {
        let occ_cfg = SimConfig { n_paths: (cfg.n_paths / 50).max(100), horizon: 100.0, ..cfg.clone() };
        for (i, e) in mc::estimate_occupation(m, &occ_cfg)?.into_iter().enumerate() {
            push(&mut out, format!("chain.occupation(i={};T=100)", i + 1), m.pi()[i], e);
        }
    }

    if !has_l(m) {
        return Ok(out);
    }
    let zero = Vector::zeros(m.n_states());
    let starts: &[(Start, &str)] = if full { &[(j, "j=1"), (Start::Stationary, "pi")] } else { &[(j, "j=1")] };
    for &(start, label) in starts {
        match mmgou::transient_moments(m, &zero, &zero, start, t) {
            Ok(tm) => {
                let e = &mc::estimate_mmgou(m, 0.0, start, &[t], cfg)?[0];
                push(&mut out, format!("mmgou.running_mean({label};t=1;v0=0)"), tm.mean(), e.mean);
                push(&mut out, format!("mmgou.second_moment({label};t=1;v0=0)"), tm.second_moment(), e.second_moment);
            }
            Err(_) => {
                skip(&mut out, format!("mmgou.running_mean({label};t=1;v0=0)"), f64::NAN);
            }
        }
    }

    let order = if full { 3 } else { 2 };
    let order = if stationarity_check(m, order as f64).exists { order } else { 2 };
    let ladder = match mmgou::stationary_moments(m, order) {
        Ok(l) => l,
        Err(_) => {
            skip(&mut out, "stationary.mu1", f64::NAN);
            return Ok(out);
        }
    };
    let dual = mc::sample_stationary(m, StationaryMode::Dual { truncation: None }, order, cfg)?;
    for k in 1..=order {
        push(&mut out, format!("stationary.mu{k}(dual)"), ladder.mu[k], dual.moments[k - 1]);
    }
    let burn = burn_in(m);
    if full {
        let fwd = mc::sample_stationary(m, StationaryMode::Forward { burn }, order, cfg)?;
        for k in 1..=order {
            push(&mut out, format!("stationary.mu{k}(forward)"), ladder.mu[k], fwd.moments[k - 1]);
        }
    }
    let lags: Vec<f64> = if full { vec![0.5, 1.0, 2.0] } else { vec![0.5, 1.0] };
    let exact = mmgou::stationary_autocovariance(m, &lags)?;
    let acf = mc::estimate_autocovariance(m, burn, &lags, cfg)?;
    for ((h, x), e) in lags.iter().zip(exact).zip(acf.covariance) {
        push(&mut out, format!("mmgou.autocovariance(stationary;lag={h})"), x, e);
    }
    Ok(out)
}
