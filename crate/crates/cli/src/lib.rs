//! Command-line surface of `mapmom`.

pub mod crosscheck;
pub mod grid;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mapmom_core::linalg::Vector;
use mapmom_core::map_moments::{self, Start};
use mapmom_core::mc::{self, SimConfig, StationaryMode};
use mapmom_core::mmgou::{self, Initial};
use mapmom_core::model::{parse_model, Component, MapModel};
use mapmom_core::Error;

use crosscheck::Suite;
use grid::parse_grid;
use output::{num, Manifest, Table};

#[derive(Debug, Parser)]
#[command(name = "mapmom", version, about = "Moments of Markov additive and Markov-modulated GOU processes")]
pub struct Cli {
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct StartArgs {
    /// Initial state of the chain (1-based).
    #[arg(long, conflicts_with = "pi")]
    pub state: Option<usize>,
    /// Start the chain from its stationary law.
    #[arg(long)]
    pub pi: bool,
}

impl StartArgs {
    fn resolve(&self, m: &MapModel) -> Result<Start, Error> {
        if self.pi {
            return Ok(Start::Stationary);
        }
        state_index(self.state.unwrap_or(1), m).map(Start::State)
    }
}

fn state_index(j: usize, m: &MapModel) -> Result<usize, Error> {
    if j == 0 || j > m.n_states() {
        return Err(Error::validation("state", format!("state {j} out of range 1..={}", m.n_states())));
    }
    Ok(j - 1)
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// Number of simulated paths.
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long, default_value_t = 20240601)]
    pub seed: u64,
    /// Substeps per unit time for the continuous part of V.
    #[arg(long, default_value_t = 256)]
    pub substeps: usize,
    /// Increment scheme: left-point, exact-ou or auto.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Antithetic Gaussian pairs.
    #[arg(long)]
    pub antithetic: bool,
}

impl SimArgs {
    fn config(&self, default_paths: usize, default_scheme: &str) -> SimConfig {
        SimConfig {
            n_paths: self.paths.unwrap_or(default_paths),
            horizon: 1.0,
            substeps: self.substeps,
            master_seed: self.seed,
            antithetic: self.antithetic,
            scheme: self.scheme.clone().unwrap_or_else(|| default_scheme.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Map,
    Mmgou,
    Stationary,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Forward,
    Dual,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file against every invariant.
    Validate { model: PathBuf },
    /// Transient mean and variance of one MAP component.
    MapMoments {
        model: PathBuf,
        #[arg(long, default_value = "xi")]
        component: Component,
        #[command(flatten)]
        start: StartArgs,
        /// Time grid `start:stop:count` or list.
        #[arg(long, default_value = "0:1:11")]
        t: String,
    },
    /// Running mean and second moment of V.
    Mmgou {
        model: PathBuf,
        #[command(flatten)]
        start: StartArgs,
        #[arg(long, default_value = "0:1:11")]
        t: String,
        /// E[V_0]; a scalar or one entry per state for E[V_0 1{J_0=i}].
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        v0_mean: String,
        /// E[V_0^2]; a scalar or one entry per state.
        #[arg(long, default_value = "0")]
        v0_m2: String,
    },
    /// Autocovariance Cov(V_{s+h}, V_s) over a lag grid.
    Acf {
        model: PathBuf,
        #[arg(long, default_value = "0:2:9")]
        lags: String,
        /// Use the stationary law (default).
        #[arg(long, conflicts_with = "start")]
        stationary: bool,
        /// Start from a fixed state (1-based) instead.
        #[arg(long)]
        start: Option<usize>,
        /// Reference time s for a fixed start.
        #[arg(long, default_value_t = 0.0)]
        at: f64,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        v0_mean: String,
        #[arg(long, default_value = "0")]
        v0_m2: String,
    },
    /// Stationarity certificate and stationary moments.
    Stationary {
        model: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Moment order for the certificate (defaults to the order).
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Monte Carlo estimates with standard errors.
    Simulate {
        model: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        start: StartArgs,
        #[arg(long, default_value = "1")]
        t: String,
        #[arg(long, default_value = "xi")]
        component: Component,
        /// Argument of the characteristic function E[e^{wX_t} 1{J_t=i}].
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        w: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        kappa: f64,
        #[arg(long, value_enum, default_value_t = Mode::Dual)]
        mode: Mode,
        /// Burn-in (forward) or truncation (dual) horizon.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        v0: f64,
    },
    /// Every closed form against Monte Carlo, pass at |z| <= 4.
    Crosscheck {
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Suite::Quick)]
        suite: Suite,
        #[command(flatten)]
        sim: SimArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::MapMoments { .. } => "map-moments",
            Command::Mmgou { .. } => "mmgou",
            Command::Acf { .. } => "acf",
            Command::Stationary { .. } => "stationary",
            Command::Simulate { .. } => "simulate",
            Command::Crosscheck { .. } => "crosscheck",
        }
    }

    fn model(&self) -> &Path {
        match self {
            Command::Validate { model }
            | Command::MapMoments { model, .. }
            | Command::Mmgou { model, .. }
            | Command::Acf { model, .. }
            | Command::Stationary { model, .. }
            | Command::Simulate { model, .. }
            | Command::Crosscheck { model, .. } => model,
        }
    }
}

/// Why a run ended unsuccessfully.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Core(Error),
    Io(String),
    /// Crosscheck items outside the z limit.
    Checks(usize),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Core(e) if e.is_validation() => 2,
            Failure::Core(_) => 3,
            Failure::Io(_) => 2,
            Failure::Checks(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
            Failure::Checks(n) => write!(f, "{n} crosscheck item(s) exceed |z| <= {}", crosscheck::Z_LIMIT),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Text produced by a command plus its intended exit code. Failing
/// crosschecks and failed moment preconditions still emit their report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub text: String,
    pub warnings: Vec<String>,
    pub failure: Option<Failure>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome { text, warnings: Vec::new(), failure: None }
    }
}

pub fn load_model(path: &Path) -> Result<MapModel, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_model(&text)?)
}

/// A scalar `E[V_0^p]` spread over the start vector, or explicit entries.
fn initial_hat(text: &str, what: &str, m: &MapModel, start: Start) -> Result<Vector, Error> {
    let values = parse_grid(text, what)?;
    let s = start.vector(m)?;
    match values.len() {
        1 => Ok(s * values[0]),
        n if n == m.n_states() => Ok(Vector::from_vec(values)),
        n => Err(Error::validation(what, format!("expected 1 or {} values, got {n}", m.n_states()))),
    }
}

/// Executes `cli`; `args` is echoed into the manifest.
pub fn run(cli: &Cli, args: &[String]) -> Result<Outcome, Failure> {
    let cmd = &cli.command;
    let model_path = cmd.model().display().to_string();
    let mut manifest = Manifest::new(cmd.name(), &model_path, args);
    let m = load_model(cmd.model())?;
    match cmd {
        Command::Validate { .. } => {
            let pi: Vec<String> = m.pi().iter().map(|&p| num(p)).collect();
            Ok(Outcome::ok(format!("valid: {} state(s); pi = [{}]\n", m.n_states(), pi.join(", "))))
        }
        Command::MapMoments { component, start, t, .. } => {
            let start = start.resolve(&m)?;
            let times = parse_grid(t, "t")?;
            let n = m.n_states();
            let mut cols = vec!["t".to_string(), "mean".into(), "variance".into()];
            cols.extend((1..=n).map(|i| format!("mean_hat_{i}")));
            let mut table = Table::new(cols);
            for &s in &times {
                let hat = map_moments::mean_hat(&m, *component, start, s)?;
                let var = map_moments::variance(&m, *component, start, s)?;
                let mut row = vec![num(s), num(hat.sum()), num(var)];
                row.extend(hat.iter().map(|&x| num(x)));
                table.push(row);
            }
            Ok(Outcome::ok(table.render(&manifest)))
        }
        Command::Mmgou { start, t, v0_mean, v0_m2, .. } => {
            let start = start.resolve(&m)?;
            let times = parse_grid(t, "t")?;
            let hat = initial_hat(v0_mean, "v0-mean", &m, start)?;
            let sq = initial_hat(v0_m2, "v0-m2", &m, start)?;
            let mut table = Table::new(["t", "running_mean", "second_moment", "variance"]);
            for &s in &times {
                let tm = mmgou::transient_moments(&m, &sq, &hat, start, s)?;
                table.push(vec![num(s), num(tm.mean()), num(tm.second_moment()), num(tm.variance())]);
            }
            Ok(Outcome::ok(table.render(&manifest)))
        }
        Command::Acf { lags, start, at, v0_mean, v0_m2, .. } => {
            let lags = parse_grid(lags, "lags")?;
            let mut table = Table::new(["lag", "covariance"]);
            let values = match start {
                None => mmgou::stationary_autocovariance(&m, &lags)?,
                Some(j) => {
                    let start = Start::State(state_index(*j, &m)?);
                    let init = Initial::Given {
                        start,
                        v0_hat: initial_hat(v0_mean, "v0-mean", &m, start)?,
                        v0_sq_hat: initial_hat(v0_m2, "v0-m2", &m, start)?,
                    };
                    lags.iter().map(|h| mmgou::autocovariance(&m, *at, at + h, &init)).collect::<Result<_, _>>()?
                }
            };
            for (h, c) in lags.iter().zip(values) {
                table.push(vec![num(*h), num(c)]);
            }
            Ok(Outcome::ok(table.render(&manifest)))
        }
        Command::Stationary { order, kappa, .. } => {
            let kappa = kappa.unwrap_or(*order as f64);
            let report = mmgou::stationarity_check(&m, kappa);
            let check = json!({
                "exists": report.exists,
                "kappa_checked": report.kappa_checked,
                "conditions": {
                    "i_exit_rate": report.exit_rate_condition,
                    "ii_ratio": report.ratio_condition,
                    "iii_eigenvalue": report.eigenvalue_condition,
                    "iv_moments": report.moment_condition,
                },
                "lambda_max": finite(report.lambda_max),
                "laplace_exponents": report.laplace_exponents.iter().map(|&x| finite(x)).collect::<Vec<_>>(),
                "max_ratios": report.max_ratios.iter().map(|&x| finite(x)).collect::<Vec<_>>(),
                "moment_failures": report.moment_failures,
            });
            let mut doc = json!({ "manifest": manifest.json(), "check": check });
            let mut failure = None;
            match mmgou::stationary_moments(&m, *order) {
                Ok(ladder) => {
                    let mu: Vec<Value> = ladder.mu[1..].iter().map(|&x| finite(x)).collect();
                    let hats: Vec<Vec<Value>> = ladder.m[1..].iter().map(|v| v.iter().map(|&x| finite(x)).collect()).collect();
                    doc["moments"] = json!(mu);
                    doc["hats"] = json!(hats);
                    if ladder.mu.len() > 2 {
                        doc["variance"] = finite(ladder.mu[2] - ladder.mu[1] * ladder.mu[1]);
                    }
                }
                Err(e) => {
                    doc["moments"] = Value::Null;
                    doc["error"] = json!(e.to_string());
                    failure = Some(Failure::Core(e));
                }
            }
            let text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Io(e.to_string()))? + "\n";
            Ok(Outcome { text, warnings: Vec::new(), failure })
        }
        Command::Simulate { what, sim, start, t, component, w, kappa, mode, horizon, order, v0, .. } => {
            let cfg = sim.config(10_000, "left-point");
            manifest.seed = Some(cfg.master_seed);
            let mut table = Table::new(["quantity", "t", "estimate", "se", "n"]);
            let row = |table: &mut Table, q: String, t: f64, e: &mc::Estimate| {
                table.push(vec![q, num(t), num(e.mean), num(e.se), e.n.to_string()]);
            };
            let mut warnings = Vec::new();
            match what {
                What::Map => {
                    let start = start.resolve(&m)?;
                    for &s in &parse_grid(t, "t")? {
                        let e = mc::estimate_map_moments(&m, *component, start, s, *w, &cfg)?;
                        row(&mut table, "mean".into(), s, &e.mean);
                        row(&mut table, "second_moment".into(), s, &e.second_moment);
                        row(&mut table, "variance".into(), s, &e.variance);
                        for i in 0..m.n_states() {
                            row(&mut table, format!("mean_hat_{}", i + 1), s, &e.mean_hat[i]);
                            row(&mut table, format!("char_fn_{}", i + 1), s, &e.char_fn[i]);
                            row(&mut table, format!("occupation_{}", i + 1), s, &e.occupation[i]);
                        }
                    }
                }
                What::Mmgou => {
                    let start = start.resolve(&m)?;
                    for p in mc::estimate_mmgou(&m, *v0, start, &parse_grid(t, "t")?, &cfg)? {
                        row(&mut table, "mean".into(), p.t, &p.mean);
                        row(&mut table, "second_moment".into(), p.t, &p.second_moment);
                        row(&mut table, "variance".into(), p.t, &p.variance);
                    }
                }
                What::Stationary => {
                    let mode = match mode {
                        Mode::Forward => StationaryMode::Forward { burn: horizon.unwrap_or(20.0) },
                        Mode::Dual => StationaryMode::Dual { truncation: *horizon },
                    };
                    let e = mc::sample_stationary(&m, mode, *order, &cfg)?;
                    for (k, est) in e.moments.iter().enumerate() {
                        row(&mut table, format!("mu_{}", k + 1), e.horizon, est);
                        for (i, h) in e.hats[k].iter().enumerate() {
                            row(&mut table, format!("hat_{}_{}", k + 1, i + 1), e.horizon, h);
                        }
                    }
                    row(&mut table, "variance".into(), e.horizon, &e.variance);
                    if let Some(f) = e.truncation_factor {
                        table.push(vec!["truncation_factor".into(), num(e.horizon), num(f), num(f64::NAN), "0".into()]);
                    }
                    warnings = e.warnings;
                }
                What::Return => {
                    let j = match start.resolve(&m)? {
                        Start::State(j) => j,
                        Start::Stationary => return Err(Error::validation("state", "return times need a fixed state").into()),
                    };
                    let r = mc::estimate_return_exp_moment(&m, *component, j, *kappa, &cfg)?;
                    row(&mut table, "return_exp_moment".into(), f64::NAN, &r.estimate);
                    if !r.stabilized {
                        warnings.push("running mean of the return-time functional does not stabilize".into());
                    }
                }
            }
            Ok(Outcome { text: table.render(&manifest), warnings, failure: None })
        }
        Command::Crosscheck { suite, sim, .. } => {
            let cfg = sim.config(200_000, "auto");
            manifest.seed = Some(cfg.master_seed);
            let checks = crosscheck::run(&m, *suite, &cfg)?;
            let failed = checks.iter().filter(|c| c.passed() == Some(false)).count();
            let text = crosscheck::table(&checks).render(&manifest);
            Ok(Outcome { text, warnings: Vec::new(), failure: (failed > 0).then_some(Failure::Checks(failed)) })
        }
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(if x.is_nan() { "nan" } else if x > 0.0 { "inf" } else { "-inf" })
    }
}

/// Runs `argv` (program name first) and returns the exit code, writing
/// results to stdout or `--output` and diagnostics to stderr.
pub fn main_with(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let args = argv.get(1..).unwrap_or(&[]).to_vec();
    match run(&cli, &args) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            let written = match &cli.output {
                Some(p) => std::fs::write(p, &out.text).map_err(|e| format!("cannot write {}: {e}", p.display())),
                None => {
                    print!("{}", out.text);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return 2;
            }
            match out.failure {
                Some(f) => {
                    eprintln!("error: {f}");
                    f.exit_code()
                }
                None => 0,
            }
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
