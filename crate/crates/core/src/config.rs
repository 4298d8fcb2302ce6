//! Flat `key = value` experiment configuration.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `theta0 theta1 eta1 theta2` | true parameters | required |
//! | `alpha mu0 epsilon` | noise | required |
//! | `x0` | initial spectrum, `l1,l2:value` items separated by `;` | required |
//! | `L1 L2` | spectral truncation | required |
//! | `tail_cutoff` | aliased tail up to this mode, or `none` | `none` |
//! | `N M1 M2` | time steps and spatial intervals | required |
//! | `b m1` | spatial thinning | required |
//! | `n` | temporal thinning | required |
//! | `mode` | `l1,l2` for the reaction fit | `1,1` |
//! | `mu0_known` | `true` fixes `μ₀` at its true value | `false` |
//! | `kappa_box eta_box theta2_box lambda_box mu_box` | `lo,hi` search boxes | see [`ExperimentConfig`] |
//! | `reps seed out` | replications, base seed, output directory | `1`, `0`, `out` |
//! | `alpha0 condition_threshold` | condition checker inputs | `2.99`, `1` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::coeff::{CoeffBox, SpatialThinning};
use crate::error::{Error, Result};
use crate::field_io::parse_key_values;
use crate::model::{InitialSpectrum, ModeIndex, NoiseSpec, SpdeParams};
use crate::ou::{DEFAULT_LAMBDA_BOX, DEFAULT_MU_BOX};
use crate::reaction::TemporalThinning;
use crate::sim::{SpatialGrid, TimeGrid, Truncation};

const KEYS: &[&str] = &[
    "theta0", "theta1", "eta1", "theta2", "alpha", "mu0", "epsilon", "x0", "L1", "L2", "tail_cutoff", "N", "M1",
    "M2", "b", "m1", "n", "mode", "mu0_known", "kappa_box", "eta_box", "theta2_box", "lambda_box", "mu_box", "reps",
    "seed", "out", "alpha0", "condition_threshold",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SpdeParams,
    pub noise: NoiseSpec,
    pub spectrum: InitialSpectrum,
    pub truncation: Truncation,
    pub tail_cutoff: Option<usize>,
    pub time_grid: TimeGrid,
    pub grid: SpatialGrid,
    pub b: f64,
    pub m1: usize,
    pub n: usize,
    pub mode: ModeIndex,
    pub mu0_known: bool,
    pub xi: CoeffBox,
    pub lambda_box: (f64, f64),
    pub mu_box: (f64, f64),
    pub reps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub alpha0: f64,
    pub condition_threshold: f64,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn required<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key).map(String::as_str).ok_or_else(|| config_err(format!("missing key {key}")))
}

fn parse_value<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| config_err(format!("bad value for {key}: {raw:?}")))
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    parse_value(key, required(map, key)?)
}

fn get_or<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    map.get(key).map_or(Ok(default), |raw| parse_value(key, raw))
}

fn pair<T: std::str::FromStr>(key: &str, raw: &str) -> Result<(T, T)> {
    let (a, b) = raw.split_once(',').ok_or_else(|| config_err(format!("{key} needs two comma-separated values")))?;
    Ok((parse_value(key, a)?, parse_value(key, b)?))
}

fn get_box(map: &BTreeMap<String, String>, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
    let b = map.get(key).map_or(Ok(default), |raw| pair(key, raw))?;
    if !(b.0 < b.1) {
        return Err(config_err(format!("{key} is empty")));
    }
    Ok(b)
}

fn parse_mode(key: &str, raw: &str) -> Result<ModeIndex> {
    let (l1, l2) = pair::<u32>(key, raw)?;
    ModeIndex::new(l1, l2).map_err(|e| config_err(e.to_string()))
}

pub fn parse_spectrum(raw: &str) -> Result<InitialSpectrum> {
    let mut spectrum = InitialSpectrum::new();
    for item in raw.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (mode, value) = item.split_once(':').ok_or_else(|| config_err(format!("x0 item {item:?} needs l1,l2:value")))?;
        let mode = parse_mode("x0", mode)?;
        if spectrum.get(mode) != 0.0 {
            return Err(config_err(format!("x0 lists mode ({},{}) twice", mode.l1, mode.l2)));
        }
        spectrum.set(mode, parse_value("x0", value)?);
    }
    Ok(spectrum)
}

fn spectrum_text(s: &InitialSpectrum) -> String {
    s.iter().map(|(l, v)| format!("{},{}:{v}", l.l1, l.l2)).collect::<Vec<_>>().join("; ")
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        if let Some(unknown) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(config_err(format!("unknown key {unknown}")));
        }
        let to_config = |e: Error| match e {
            Error::Config(_) => e,
            other => config_err(other.to_string()),
        };
        let params = SpdeParams::new(get(&map, "theta0")?, get(&map, "theta1")?, get(&map, "eta1")?, get(&map, "theta2")?)
            .map_err(to_config)?;
        let noise = NoiseSpec::new(get(&map, "alpha")?, get(&map, "mu0")?, get(&map, "epsilon")?).map_err(to_config)?;
        let tail_cutoff = match map.get("tail_cutoff").map(|s| s.trim()) {
            None | Some("none") => None,
            Some(raw) => Some(parse_value("tail_cutoff", raw)?),
        };
        let default_box = CoeffBox::default();
        let config = Self {
            params,
            noise,
            spectrum: parse_spectrum(required(&map, "x0")?)?,
            truncation: Truncation::new(get(&map, "L1")?, get(&map, "L2")?).map_err(to_config)?,
            tail_cutoff,
            time_grid: TimeGrid::new(get(&map, "N")?).map_err(to_config)?,
            grid: SpatialGrid::new(get(&map, "M1")?, get(&map, "M2")?).map_err(to_config)?,
            b: get(&map, "b")?,
            m1: get(&map, "m1")?,
            n: get(&map, "n")?,
            mode: map.get("mode").map_or(Ok(ModeIndex::ONE), |raw| parse_mode("mode", raw))?,
            mu0_known: get_or(&map, "mu0_known", false)?,
            xi: CoeffBox {
                kappa: get_box(&map, "kappa_box", default_box.kappa)?,
                eta: get_box(&map, "eta_box", default_box.eta)?,
                theta2: get_box(&map, "theta2_box", default_box.theta2)?,
            },
            lambda_box: get_box(&map, "lambda_box", DEFAULT_LAMBDA_BOX)?,
            mu_box: get_box(&map, "mu_box", DEFAULT_MU_BOX)?,
            reps: get_or(&map, "reps", 1)?,
            seed: get_or(&map, "seed", 0)?,
            out: PathBuf::from(map.get("out").map_or("out", String::as_str)),
            alpha0: get_or(&map, "alpha0", 2.99)?,
            condition_threshold: get_or(&map, "condition_threshold", 1.0)?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => config_err(other.to_string()),
        };
        self.params.validate().map_err(wrap)?;
        self.noise.validate().map_err(wrap)?;
        self.spatial_thinning().map_err(wrap)?;
        self.temporal_thinning().map_err(wrap)?;
        if self.reps == 0 {
            return Err(config_err("reps must be at least 1"));
        }
        if self.spectrum.is_zero() {
            return Err(config_err("x0 has no nonzero mode"));
        }
        let (e1, e2) = self.spectrum.support_extent();
        if e1 as usize > self.truncation.l1 || e2 as usize > self.truncation.l2 {
            return Err(config_err("x0 reaches beyond the truncation"));
        }
        if self.tail_cutoff.is_some_and(|c| c <= self.truncation.l1.max(self.truncation.l2)) {
            return Err(config_err("tail_cutoff must exceed the truncation"));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 < 3.0) {
            return Err(config_err("alpha0 must lie in (0,3)"));
        }
        if !(self.xi.theta2.0 > 0.0) || !(self.mu_box.0 > 0.0) {
            return Err(config_err("theta2_box and mu_box must be positive"));
        }
        if !(self.condition_threshold > 0.0) {
            return Err(config_err("condition_threshold must be positive"));
        }
        Ok(())
    }

    pub fn spatial_thinning(&self) -> Result<SpatialThinning> {
        SpatialThinning::new(self.b, self.m1, self.grid, self.time_grid)
    }

    pub fn temporal_thinning(&self) -> Result<TemporalThinning> {
        TemporalThinning::new(self.n, self.time_grid.n)
    }

    /// Text that parses back to the same configuration.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let q = &self.noise;
        let pair = |(a, b): (f64, f64)| format!("{a},{b}");
        let tail = self.tail_cutoff.map_or_else(|| "none".into(), |c| c.to_string());
        [
            format!("theta0 = {}", p.theta0),
            format!("theta1 = {}", p.theta1),
            format!("eta1 = {}", p.eta1),
            format!("theta2 = {}", p.theta2),
            format!("alpha = {}", q.alpha),
            format!("mu0 = {}", q.mu0),
            format!("epsilon = {}", q.epsilon),
            format!("x0 = {}", spectrum_text(&self.spectrum)),
            format!("L1 = {}", self.truncation.l1),
            format!("L2 = {}", self.truncation.l2),
            format!("tail_cutoff = {tail}"),
            format!("N = {}", self.time_grid.n),
            format!("M1 = {}", self.grid.m1),
            format!("M2 = {}", self.grid.m2),
            format!("b = {}", self.b),
            format!("m1 = {}", self.m1),
            format!("n = {}", self.n),
            format!("mode = {},{}", self.mode.l1, self.mode.l2),
            format!("mu0_known = {}", self.mu0_known),
            format!("kappa_box = {}", pair(self.xi.kappa)),
            format!("eta_box = {}", pair(self.xi.eta)),
            format!("theta2_box = {}", pair(self.xi.theta2)),
            format!("lambda_box = {}", pair(self.lambda_box)),
            format!("mu_box = {}", pair(self.mu_box)),
            format!("reps = {}", self.reps),
            format!("seed = {}", self.seed),
            format!("out = {}", self.out.display()),
            format!("alpha0 = {}", self.alpha0),
            format!("condition_threshold = {}", self.condition_threshold),
        ]
        .join("\n")
            + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SECTION3: &str = "\
theta0 = 0
theta1 = 0.2
eta1 = 0.2
theta2 = 0.2
alpha = 0.5
mu0 = -19.5
epsilon = 0.1
x0 = 1,1:3
L1 = 128
L2 = 128
N = 1000
M1 = 200
M2 = 200
b = 0.05
m1 = 15
n = 50
";

    #[test]
    fn parses_with_defaults_and_round_trips() {
        let c = ExperimentConfig::from_text(SECTION3).unwrap();
        assert_eq!(c.mode, ModeIndex::ONE);
        assert_eq!(c.xi, CoeffBox::default());
        assert_eq!(c.lambda_box, (0.01, 50.0));
        assert_eq!(c.spectrum.get(ModeIndex::ONE), 3.0);
        assert!(!c.mu0_known);
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        let with = |extra: &str| ExperimentConfig::from_text(&format!("{SECTION3}{extra}"));
        assert!(matches!(with("typo = 1\n"), Err(Error::Config(_))));
        assert!(matches!(with("reps = 0\n"), Err(Error::Config(_))));
        assert!(matches!(with("tail_cutoff = 100\n"), Err(Error::Config(_))));
        assert!(matches!(with("kappa_box = 1,-1\n"), Err(Error::Config(_))));
        let misaligned = SECTION3.replace("M1 = 200", "M1 = 150");
        assert!(matches!(ExperimentConfig::from_text(&misaligned), Err(Error::Config(_))));
        let zero = SECTION3.replace("x0 = 1,1:3", "x0 = 1,1:0");
        assert!(matches!(ExperimentConfig::from_text(&zero), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_text("theta0 = 1"), Err(Error::Config(_))));
    }

    #[test]
    fn spectrum_lists() {
        let s = parse_spectrum("1,1:3; 2,3:-0.5;").unwrap();
        assert_eq!(s.get(ModeIndex::new(2, 3).unwrap()), -0.5);
        assert!(parse_spectrum("1,1:3;1,1:2").is_err());
        assert!(parse_spectrum("0,1:3").is_err());
    }
}
