use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spde2d::coeff::{fit_coeff, increment_stats, SpatialThinning};
use spde2d::conditions::check_conditions;
use spde2d::config::ExperimentConfig;
use spde2d::field_io::{load_binary, save_binary, write_csv};
use spde2d::harness::{run_mc, Experiment};
use spde2d::phi::phi;
use spde2d::reaction::{approx_coordinate_path, estimate_reaction};
use spde2d::sim::{simulate_field, FieldData};
use spde2d::Error;

#[derive(Parser)]
#[command(name = "spde2d", version, about = "Simulate and calibrate a 2D linear parabolic SPDE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one field and write it to the output directory.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "binary")]
        format: Format,
    },
    /// Estimate theta1, eta1, theta2 from a binary field.
    FitCoeff {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        field: PathBuf,
    },
    /// Estimate theta2, kappa, eta, then theta0 (and mu0) from a binary field.
    FitReaction {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        field: PathBuf,
    },
    /// Monte Carlo over replications.
    Mc {
        #[command(flatten)]
        common: Common,
        /// Overrides `reps` in the config.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Tabulate phi over a theta2 grid.
    Phi {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        theta2_min: f64,
        #[arg(long, default_value_t = 2.0)]
        theta2_max: f64,
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Output directory for phi.csv; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the asymptotic conditions for a config.
    CheckConditions {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn load_field(path: &Path, spatial: &SpatialThinning) -> Result<FieldData, Error> {
    let field = load_binary(path)?;
    if field.grid != spatial.grid || field.time_grid != spatial.time_grid {
        return Err(Error::Config("field grid does not match the config".into()));
    }
    Ok(field)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), |v| v.to_string())
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate { common, format } => {
            let c = load_config(&common)?;
            let experiment = Experiment::new(c.clone())?;
            let field = simulate_field(
                &c.params,
                &c.noise,
                &c.spectrum,
                c.truncation,
                c.time_grid,
                c.grid,
                experiment.tail.as_ref(),
                c.seed,
            )?;
            fs::create_dir_all(&c.out)?;
            let path = match format {
                Format::Binary => {
                    let path = c.out.join("field.bin");
                    save_binary(&field, &path)?;
                    path
                }
                Format::Csv => {
                    let path = c.out.join("field.csv");
                    write_csv(&field, fs::File::create(&path)?)?;
                    path
                }
            };
            println!("{}", path.display());
        }
        Command::FitCoeff { common, field } => {
            let c = load_config(&common)?;
            let spatial = c.spatial_thinning()?;
            let field = load_field(&field, &spatial)?;
            let stats = increment_stats(&field, &spatial, c.noise.alpha, c.noise.epsilon)?;
            let e = fit_coeff(&stats, &spatial, c.xi)?;
            println!("theta1_hat={}\neta1_hat={}\ntheta2_hat={}", e.theta1_hat, e.eta1_hat, e.theta2_hat);
            println!("kappa_hat={}\neta_hat={}\ncontrast={}", e.kappa_hat, e.eta_hat, e.contrast);
            println!("bound_hit={}\nbudget_exhausted={}", e.any_bound_hit(), e.budget_exhausted);
        }
        Command::FitReaction { common, field } => {
            let c = load_config(&common)?;
            let spatial = c.spatial_thinning()?;
            let field = load_field(&field, &spatial)?;
            let stats = increment_stats(&field, &spatial, c.noise.alpha, c.noise.epsilon)?;
            let coeff = fit_coeff(&stats, &spatial, c.xi)?;
            let path = approx_coordinate_path(&field, c.mode, coeff.kappa_hat, coeff.eta_hat, c.temporal_thinning()?)?;
            let mu0_known = c.mu0_known.then_some(c.noise.mu0);
            let x0 = c.spectrum.get(c.mode);
            let r = estimate_reaction(&path, &coeff, &c.noise, mu0_known, c.lambda_box, c.mu_box, x0)?;
            println!("theta0_hat={}\nmu0_hat={}\nlambda_hat={}", r.theta0_hat, opt(r.mu0_hat), r.lambda_hat);
            println!("mu_hat={}\nlambda_sd={}\nmu_sd={}", opt(r.mu_hat), r.lambda_sd, opt(r.mu_sd));
            println!("bound_hit={}", r.lambda_at_bound || r.mu_at_bound);
        }
        Command::Mc { common, reps, threads } => {
            let mut c = load_config(&common)?;
            if let Some(reps) = reps {
                c.reps = reps;
            }
            c.validate()?;
            let out = c.out.clone();
            let run = run_mc(&c, threads, Some(&out))?;
            let s = &run.summary;
            for e in &s.estimators {
                println!("{:<11} mean={:<12.6} sd={:<10.6} n={}", e.name, e.all.mean, e.all.sd, e.all.count);
            }
            println!("failed={} flagged={} out={}", s.failed, s.flagged, out.display());
            if s.failed == s.replications {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Phi { r, alpha, theta2_min, theta2_max, points, out } => {
            if points < 2 || !(theta2_min < theta2_max) {
                return Err(Error::Config("need points >= 2 and theta2_min < theta2_max".into()));
            }
            let mut text = String::from("theta2,phi\n");
            for i in 0..points {
                let t = theta2_min + (theta2_max - theta2_min) * i as f64 / (points - 1) as f64;
                text.push_str(&format!("{t},{}\n", phi(r, alpha, t)?));
            }
            match out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    fs::write(dir.join("phi.csv"), text)?;
                }
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
        }
        Command::CheckConditions { common } => {
            let c = load_config(&common)?;
            let text = check_conditions(&c).to_text();
            print!("{text}");
            if common.out.is_some() {
                fs::create_dir_all(&c.out)?;
                fs::write(c.out.join("conditions.txt"), text)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::MisalignedThinning { .. } => 2,
        Error::Degenerate(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
