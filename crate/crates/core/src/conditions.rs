//! Numeric left-hand sides of the asymptotic conditions and the rate `𝓡`.

use std::fmt::Write as _;

use crate::config::ExperimentConfig;
use crate::model::check_a1;

/// `h^{a ∧̃ b}` for `h ∈ (0,1)`: `h^a` if `a < b`, `-h^b log h` if `a = b`,
/// `h^b` if `a > b`.
pub fn tilde_exp(h: f64, a: f64, b: f64) -> f64 {
    if a < b {
        h.powf(a)
    } else if a == b {
        -h.powf(b) * h.ln()
    } else {
        h.powf(b)
    }
}

/// `L^{a ∧̃ b} = 1/(1/L)^{a ∧̃ b}` for `L > 1`.
pub fn tilde_exp_large(l: f64, a: f64, b: f64) -> f64 {
    1.0 / tilde_exp(1.0 / l, a, b)
}

/// `𝓡 = √(mN) / (Δ^{α∧̃2-α} ∨ ε^{-2} Δ^{α₀-α})`, `Δ = 1/N`.
pub fn rate_r(m: usize, big_n: usize, epsilon: f64, alpha: f64, alpha0: f64) -> f64 {
    let dt = 1.0 / big_n as f64;
    let first = dt.powf(-alpha) * tilde_exp(dt, alpha, 2.0);
    let second = dt.powf(alpha0 - alpha) / (epsilon * epsilon);
    ((m * big_n) as f64).sqrt() / first.max(second)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Should tend to zero: pass when `value ≤ threshold`.
    Small,
    /// Should diverge: pass when `value ≥ 1/threshold`.
    Large,
    /// Should be finite and nonzero.
    FiniteNonzero,
    /// Reported only.
    Info,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEntry {
    pub name: String,
    pub value: f64,
    pub direction: Direction,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
    pub threshold: f64,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# threshold = {}\n", self.threshold);
        for e in &self.entries {
            let status = match (e.direction, e.pass) {
                (Direction::Info, _) => "info",
                (_, true) => "pass",
                (_, false) => "warn",
            };
            let _ = writeln!(out, "{:<10} {:>14.6e}  {status}", e.name, e.value);
        }
        for note in &self.notes {
            let _ = writeln!(out, "# {note}");
        }
        out
    }
}

pub fn check_conditions(config: &ExperimentConfig) -> ConditionReport {
    let threshold = config.condition_threshold;
    let mut entries = Vec::new();
    let mut push = |name: &str, value: f64, direction: Direction| {
        let pass = match direction {
            Direction::Small => value <= threshold,
            Direction::Large => value >= 1.0 / threshold,
            Direction::FiniteNonzero => value.is_finite() && value != 0.0,
            Direction::Info => true,
        };
        entries.push(ConditionEntry { name: name.to_string(), value, direction, pass });
    };

    let eps = config.noise.epsilon;
    let alpha = config.noise.alpha;
    let alpha0 = config.alpha0;
    let big_n = config.time_grid.n;
    let m = config.m1 * config.m1;
    let n = config.n as f64;
    let m_min = config.grid.m1.min(config.grid.m2) as f64;

    push("A1", check_a1(&config.spectrum, &config.params, alpha0).sqrt(), Direction::FiniteNonzero);
    push("A2", config.spectrum.get(config.mode).abs(), Direction::FiniteNonzero);
    push("B1", eps * eps * (big_n as f64).powf(1.0 + alpha0 - alpha), Direction::Large);
    let b2 = 1.0 / (eps * eps * (big_n as f64).powf(alpha0 - alpha));
    push("B2", b2, Direction::Small);
    let r = rate_r(m, big_n, eps, alpha, alpha0);
    push("R", r, Direction::Info);
    push("m/N", m as f64 / big_n as f64, Direction::Info);

    let p0 = tilde_exp_large(m_min * m_min, alpha0, 1.0);
    let p = tilde_exp_large(m_min * m_min, alpha, 1.0);
    let q0 = tilde_exp(1.0 / n, alpha0, 2.0);
    let q = tilde_exp(1.0 / n, alpha, 1.0);
    let (e2, e4) = (eps * eps, eps.powi(4));
    let r2 = r * r;
    let rows: [(&str, [f64; 3]); 5] = [
        ("C1", [n * n / p0, n * n * e2 / p, (n * n * q0).max(n * n * q * e2) / r2]),
        ("C2", [n.powi(3) * e2 / p0, n.powi(3) * e4 / p, (n.powi(3) * q0 * e2).max(n.powi(3) * q * e4) / r2]),
        ("C3", [1.0 / (e4 * p0), 1.0 / (e2 * p), (q0 / e4).max(q / e2) / r2]),
        ("C4", [n * n / (e2 * p0), n * n / p, (n * n * q0 / e2).max(n * n * q) / r2]),
        ("C5", [n.max(1.0 / e2) / p0, n * e2 / p, n.max(1.0 / e2) / r2]),
    ];
    for (name, values) in rows {
        for (idx, v) in values.into_iter().enumerate() {
            push(&format!("{name}.{}", idx + 1), v, Direction::Small);
        }
    }

    let notes = vec![
        format!("B2 = 10^{:.2}", b2.log10()),
        "these are asymptotic conditions; warn means the ratio exceeds the threshold at this configuration".into(),
    ];
    ConditionReport { entries, threshold, notes }
}
