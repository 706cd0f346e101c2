//! CSV tables with a `#` manifest header.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

/// Full-precision scientific notation, 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub command: String,
    pub model: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub started: SystemTime,
}

impl Manifest {
    pub fn new(command: &str, model: &str, args: &[String]) -> Self {
        Manifest { command: command.into(), model: model.into(), args: args.to_vec(), seed: None, started: SystemTime::now() }
    }

    /// Header lines; run-dependent values share the last line.
    pub fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# tool: mapmom {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "# command: {}", self.command);
        let _ = writeln!(s, "# model: {}", self.model);
        let _ = writeln!(s, "# parameters: {}", self.args.join(" "));
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed: {seed}");
        }
        let now = SystemTime::now();
        let stamp = now.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let wall = now.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let _ = writeln!(s, "# timestamp: unix={stamp:.3} wall_time_s={wall:.3}");
        s
    }

    pub fn json(&self) -> serde_json::Value {
        let now = SystemTime::now();
        serde_json::json!({
            "tool": format!("mapmom {}", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "model": self.model,
            "parameters": self.args.join(" "),
            "seed": self.seed,
            "timestamp": now.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            "wall_time_s": now.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        })
    }
}

/// Column-named rows of cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, manifest: &Manifest) -> String {
        let mut s = manifest.header();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(0.5), "5.0000000000000000e-1");
        assert_eq!(num(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(0.0), "0.0000000000000000e0");
    }

    #[test]
    fn timestamp_is_isolated() {
        let m = Manifest::new("validate", "m.json", &["--x".into()]);
        let h = m.header();
        assert_eq!(h.lines().filter(|l| l.contains("unix=")).count(), 1);
        assert!(h.lines().last().unwrap().starts_with("# timestamp:"));
    }
}
