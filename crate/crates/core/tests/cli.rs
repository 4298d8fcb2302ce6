use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
theta0 = 0
theta1 = 0.2
eta1 = 0.2
theta2 = 0.2
alpha = 0.5
mu0 = -19.5
epsilon = 0.1
x0 = 1,1:3
L1 = 12
L2 = 12
N = 60
M1 = 40
M2 = 40
b = 0.05
m1 = 6
n = 20
reps = 2
seed = 1
";

fn spde2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spde2d")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("sim");
    let out = out.to_str().unwrap();
    let run = spde2d(&["simulate", "--config", &config, "--out", out, "--seed", "4"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let field = format!("{out}/field.bin");
    let fit = spde2d(&["fit-coeff", "--config", &config, "--field", &field]);
    assert!(fit.status.success());
    assert!(String::from_utf8_lossy(&fit.stdout).contains("theta2_hat="));
    let reaction = spde2d(&["fit-reaction", "--config", &config, "--field", &field]);
    assert!(reaction.status.success());
    assert!(String::from_utf8_lossy(&reaction.stdout).contains("mu0_hat="));

    let csv = spde2d(&["simulate", "--config", &config, "--out", out, "--format", "csv"]);
    assert!(csv.status.success());
    let text = fs::read_to_string(format!("{out}/field.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 61 * 41 * 41);
}

#[test]
fn mc_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let out = dir.path().join("mc");
    let run = spde2d(&["mc", "--config", &config, "--reps", "3", "--threads", "2", "--out", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for file in ["replications.csv", "summary.csv", "conditions.txt", "timings.csv", "config.txt"] {
        assert!(out.join(file).exists(), "{file}");
    }
    let rows = fs::read_to_string(out.join("replications.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
    assert!(rows.starts_with("rep,seed,theta1_hat,eta1_hat,theta2_hat"));
}

#[test]
fn phi_and_conditions() {
    let table = spde2d(&["phi", "--r", "1.8974", "--alpha", "0.5", "--theta2-min", "0.2", "--theta2-max", "0.4", "--points", "2"]);
    assert!(table.status.success());
    let text = String::from_utf8_lossy(&table.stdout);
    assert!(text.lines().nth(1).unwrap().starts_with("0.2,2.06918238420"));

    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), CONFIG);
    let check = spde2d(&["check-conditions", "--config", &config]);
    assert!(check.status.success());
    assert!(String::from_utf8_lossy(&check.stdout).contains("C3.3"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "theta0 = 0\n");
    assert_eq!(spde2d(&["mc", "--config", &bad]).status.code(), Some(2));
    let misaligned = write_config(dir.path(), &CONFIG.replace("M1 = 40", "M1 = 30"));
    assert_eq!(spde2d(&["check-conditions", "--config", &misaligned]).status.code(), Some(2));
    assert_eq!(spde2d(&["phi", "--r", "1", "--alpha", "4"]).status.code(), Some(2));

    // An all-zero field makes every increment statistic vanish.
    let config = write_config(dir.path(), CONFIG);
    let sim = dir.path().join("sim");
    assert!(spde2d(&["simulate", "--config", &config, "--out", sim.to_str().unwrap()]).status.success());
    let path = sim.join("field.bin");
    let mut field = spde2d::field_io::load_binary(&path).unwrap();
    field.data.fill(0.0);
    spde2d::field_io::save_binary(&field, &path).unwrap();
    let fit = spde2d(&["fit-coeff", "--config", &config, "--field", path.to_str().unwrap()]);
    assert_eq!(fit.status.code(), Some(3));
}
