//! Monte Carlo replication of the full pipeline: simulate, fit the
//! coefficients, fit the reaction term, summarize.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeff::{fit_coeff, increment_stats, SpatialThinning};
use crate::conditions::check_conditions;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::reaction::{approx_coordinate_path, estimate_reaction, TemporalThinning};
use crate::rng::{derive_seed, role};
use crate::sim::{simulate_field, AliasedTail};

/// One row of `replications.csv`. Estimates are empty when the stage failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub rep: usize,
    pub seed: u64,
    pub theta1_hat: Option<f64>,
    pub eta1_hat: Option<f64>,
    pub theta2_hat: Option<f64>,
    pub kappa_hat: Option<f64>,
    pub eta_hat: Option<f64>,
    pub contrast_u: Option<f64>,
    pub theta0_hat: Option<f64>,
    pub mu0_hat: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub mu_hat: Option<f64>,
    pub contrast_v: Option<f64>,
    pub flagged: bool,
    /// `|`-separated flag names.
    pub flags: String,
    pub error: String,
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl ReplicationResult {
    fn empty(rep: usize, seed: u64) -> Self {
        Self {
            rep,
            seed,
            theta1_hat: None,
            eta1_hat: None,
            theta2_hat: None,
            kappa_hat: None,
            eta_hat: None,
            contrast_u: None,
            theta0_hat: None,
            mu0_hat: None,
            lambda_hat: None,
            mu_hat: None,
            contrast_v: None,
            flagged: false,
            flags: String::new(),
            error: String::new(),
            wall_seconds: 0.0,
        }
    }

    pub fn failed(&self) -> bool {
        !self.error.is_empty()
    }
}

/// Configuration with the per-configuration precomputations done once.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub spatial: SpatialThinning,
    pub temporal: TemporalThinning,
    pub tail: Option<AliasedTail>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let tail = match config.tail_cutoff {
            Some(cutoff) => Some(AliasedTail::new(
                &config.params,
                &config.noise,
                config.truncation,
                config.grid,
                config.time_grid,
                cutoff,
            )?),
            None => None,
        };
        Ok(Self { spatial: config.spatial_thinning()?, temporal: config.temporal_thinning()?, tail, config })
    }

    pub fn replication_seed(&self, rep: usize) -> u64 {
        derive_seed(self.config.seed, &[role::REPLICATION, rep as u64])
    }

    /// Deterministic in `(config, rep)`. Errors end up in the `error` column.
    pub fn run_replication(&self, rep: usize) -> ReplicationResult {
        let start = Instant::now();
        let seed = self.replication_seed(rep);
        let mut out = ReplicationResult::empty(rep, seed);
        if let Err(e) = self.pipeline(seed, &mut out) {
            out.error = e.to_string();
        }
        out.wall_seconds = start.elapsed().as_secs_f64();
        out
    }

    fn pipeline(&self, seed: u64, out: &mut ReplicationResult) -> Result<()> {
        let c = &self.config;
        let field = simulate_field(
            &c.params,
            &c.noise,
            &c.spectrum,
            c.truncation,
            c.time_grid,
            c.grid,
            self.tail.as_ref(),
            seed,
        )?;
        let mut flags = Vec::new();

        let stats = increment_stats(&field, &self.spatial, c.noise.alpha, c.noise.epsilon)?;
        let coeff = fit_coeff(&stats, &self.spatial, c.xi)?;
        out.theta1_hat = Some(coeff.theta1_hat);
        out.eta1_hat = Some(coeff.eta1_hat);
        out.theta2_hat = Some(coeff.theta2_hat);
        out.kappa_hat = Some(coeff.kappa_hat);
        out.eta_hat = Some(coeff.eta_hat);
        out.contrast_u = Some(coeff.contrast);
        for (hit, name) in [
            (coeff.kappa_at_bound, "kappa_bound"),
            (coeff.eta_at_bound, "eta_bound"),
            (coeff.theta2_at_bound, "theta2_bound"),
            (coeff.budget_exhausted, "coeff_budget"),
        ] {
            if hit {
                flags.push(name);
            }
        }
        let commit_flags = |out: &mut ReplicationResult, flags: &[&str]| {
            out.flagged = !flags.is_empty();
            out.flags = flags.join("|");
        };
        commit_flags(out, &flags);

        let path = approx_coordinate_path(&field, c.mode, coeff.kappa_hat, coeff.eta_hat, self.temporal)?;
        drop(field);
        let x0 = c.spectrum.get(c.mode);
        let mu0_known = c.mu0_known.then_some(c.noise.mu0);
        let reaction = estimate_reaction(&path, &coeff, &c.noise, mu0_known, c.lambda_box, c.mu_box, x0)?;
        out.theta0_hat = Some(reaction.theta0_hat);
        out.mu0_hat = reaction.mu0_hat;
        out.lambda_hat = Some(reaction.lambda_hat);
        out.mu_hat = reaction.mu_hat;
        out.contrast_v = Some(reaction.contrast);
        for (hit, name) in [
            (reaction.lambda_at_bound, "lambda_bound"),
            (reaction.mu_at_bound, "mu_bound"),
            (!reaction.converged, "reaction_nonconverged"),
        ] {
            if hit {
                flags.push(name);
            }
        }
        commit_flags(out, &flags);
        Ok(())
    }
}

pub fn run_replication(config: &ExperimentConfig, rep: usize) -> Result<ReplicationResult> {
    Ok(Experiment::new(config.clone())?.run_replication(rep))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl Stats {
    /// Sample mean and standard deviation (`n-1` denominator, 0 for one value).
    pub fn from_values(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN, count };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd, count }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub name: &'static str,
    pub true_value: f64,
    pub all: Stats,
    pub unflagged: Stats,
    /// Full-scale reference `(mean, sd)` for this `(m1, n)`, if tabulated.
    pub reference: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub estimators: Vec<EstimatorSummary>,
    pub replications: usize,
    pub failed: usize,
    pub flagged: usize,
    pub config_echo: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
struct ReferenceRow {
    m1: usize,
    n: usize,
    theta1_mean: f64,
    theta1_sd: f64,
    eta1_mean: f64,
    eta1_sd: f64,
    theta2_mean: f64,
    theta2_sd: f64,
    theta0_mean: f64,
    theta0_sd: f64,
    mu0_mean: f64,
    mu0_sd: f64,
}

pub const REFERENCE_NOTE: &str = "full-scale reference (L=10^4), not a desk-scale acceptance target";
const TABLE1: &str = include_str!("../data/table1.csv");

fn reference_row(m1: usize, n: usize) -> Option<ReferenceRow> {
    let body: String = TABLE1.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    csv::Reader::from_reader(body.as_bytes())
        .deserialize::<ReferenceRow>()
        .filter_map(|r| r.ok())
        .find(|r| r.m1 == m1 && r.n == n)
}

pub fn summarize(config: &ExperimentConfig, results: &[ReplicationResult]) -> SummaryTable {
    let reference = if config.b == 0.05 { reference_row(config.m1, config.n) } else { None };
    type Getter = fn(&ReplicationResult) -> Option<f64>;
    let p = &config.params;
    let specs: [(&'static str, f64, Getter, Option<(f64, f64)>); 5] = [
        ("theta1_hat", p.theta1, |r| r.theta1_hat, reference.map(|r| (r.theta1_mean, r.theta1_sd))),
        ("eta1_hat", p.eta1, |r| r.eta1_hat, reference.map(|r| (r.eta1_mean, r.eta1_sd))),
        ("theta2_hat", p.theta2, |r| r.theta2_hat, reference.map(|r| (r.theta2_mean, r.theta2_sd))),
        ("theta0_hat", p.theta0, |r| r.theta0_hat, reference.map(|r| (r.theta0_mean, r.theta0_sd))),
        ("mu0_hat", config.noise.mu0, |r| r.mu0_hat, reference.map(|r| (r.mu0_mean, r.mu0_sd))),
    ];
    let estimators = specs
        .into_iter()
        .map(|(name, true_value, get, reference)| {
            let all: Vec<f64> = results.iter().filter_map(get).collect();
            let unflagged: Vec<f64> = results.iter().filter(|r| !r.flagged).filter_map(get).collect();
            EstimatorSummary {
                name,
                true_value,
                all: Stats::from_values(&all),
                unflagged: Stats::from_values(&unflagged),
                reference,
            }
        })
        .collect();
    SummaryTable {
        estimators,
        replications: results.len(),
        failed: results.iter().filter(|r| r.failed()).count(),
        flagged: results.iter().filter(|r| r.flagged).count(),
        config_echo: config.to_text(),
    }
}

impl SummaryTable {
    pub fn get(&self, name: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.name == name)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "estimator",
            "true_value",
            "mean",
            "sd",
            "count",
            "mean_unflagged",
            "sd_unflagged",
            "count_unflagged",
            "failed",
            "flagged",
            "reference_mean",
            "reference_sd",
            "mean_minus_reference",
        ])?;
        for e in &self.estimators {
            let (rm, rs, dev) = match e.reference {
                Some((m, s)) => (m.to_string(), s.to_string(), (e.all.mean - m).to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                e.name.to_string(),
                e.true_value.to_string(),
                e.all.mean.to_string(),
                e.all.sd.to_string(),
                e.all.count.to_string(),
                e.unflagged.mean.to_string(),
                e.unflagged.sd.to_string(),
                e.unflagged.count.to_string(),
                self.failed.to_string(),
                self.flagged.to_string(),
                rm,
                rs,
                dev,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_replications<W: std::io::Write>(results: &[ReplicationResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_replications<R: std::io::Read>(reader: R) -> Result<Vec<ReplicationResult>> {
    csv::Reader::from_reader(reader).deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub results: Vec<ReplicationResult>,
    pub summary: SummaryTable,
}

/// Runs `config.reps` replications on a pool of `threads` workers. Nested
/// parallel work inside a replication shares the same pool. Results are
/// ordered by replication index, so the CSV content does not depend on
/// scheduling.
pub fn run_mc(config: &ExperimentConfig, threads: usize, out: Option<&Path>) -> Result<McRun> {
    let experiment = Experiment::new(config.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<ReplicationResult> =
        pool.install(|| (0..config.reps).into_par_iter().map(|rep| experiment.run_replication(rep)).collect());
    let summary = summarize(config, &results);
    if let Some(dir) = out {
        write_outputs(dir, config, &results, &summary)?;
    }
    Ok(McRun { results, summary })
}

pub fn write_outputs(dir: &Path, config: &ExperimentConfig, results: &[ReplicationResult], summary: &SummaryTable) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_replications(results, fs::File::create(dir.join("replications.csv"))?)?;
    summary.write_csv(fs::File::create(dir.join("summary.csv"))?)?;
    let mut conditions = check_conditions(config).to_text();
    if summary.estimators.iter().any(|e| e.reference.is_some()) {
        conditions.push_str(&format!("# summary.csv reference columns: {REFERENCE_NOTE}\n"));
    }
    fs::write(dir.join("conditions.txt"), conditions)?;
    fs::write(dir.join("config.txt"), &summary.config_echo)?;
    let mut w = csv::Writer::from_path(dir.join("timings.csv"))?;
    w.write_record(["rep", "wall_seconds"])?;
    for r in results {
        w.write_record([r.rep.to_string(), r.wall_seconds.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
