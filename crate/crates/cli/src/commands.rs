use crate::Common;
use mixing_ustat::conditions::{theorem2_check, ConditionConfig};
use mixing_ustat::depgraph::{audit_neighborhoods, GraphSpec};
use mixing_ustat::kernel::{BuiltinKernel, Kernel, KernelSpec};
use mixing_ustat::mc::{plan, plot_csv, results_csv, run_experiment, ExperimentConfig};
use mixing_ustat::process::{Process, ProcessSpec};
use mixing_ustat::report::{fmt_f64, to_json_string};
use mixing_ustat::stat::{classical_u, exact_moments, statistic};
use mixing_ustat::{Error, Mode};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Budget(String),
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Acceptance(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Budget(m) => write!(f, "{m}"),
            CliError::Acceptance(m) => write!(f, "acceptance thresholds violated: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn echo<T: Serialize>(common: &Common, command: &str, config: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Echo<'a, T> {
        command: &'a str,
        config: &'a T,
    }
    write(&common.out, "config.json", &to_json_string(&Echo { command, config }))
}

fn default_mode() -> Mode {
    Mode::U
}

fn one() -> usize {
    1
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BetaConfig {
    process: ProcessSpec,
    t_max: usize,
}

pub fn beta(common: &Common) -> Result<()> {
    let config: BetaConfig = read_config(&common.config)?;
    if config.t_max == 0 {
        return Err(CliError::Config("t_max must be positive".into()));
    }
    let process = Process::new(config.process.clone())?;
    let mut csv = String::from("t,beta,exactness\n");
    for b in process.beta_profile(config.t_max)? {
        let _ = writeln!(csv, "{},{},{}", b.t, fmt_f64(b.value), b.exactness);
    }
    echo(common, "beta", &config)?;
    write(&common.out, "beta.csv", &csv)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    process: ProcessSpec,
    n: usize,
    seed: u64,
    #[serde(default = "one")]
    paths: usize,
}

pub fn simulate(common: &Common) -> Result<()> {
    let mut config: SimulateConfig = read_config(&common.config)?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    let process = Process::new(config.process.clone())?;
    let mut csv = String::from("path,t,x\n");
    for k in 0..config.paths {
        let seed = mixing_ustat::rng::derive_seed(config.seed, &[config.n as u64, k as u64]);
        for (t, x) in process.sample_path(config.n, seed)?.iter().enumerate() {
            let _ = writeln!(csv, "{k},{},{}", t + 1, fmt_f64(*x));
        }
    }
    echo(common, "simulate", &config)?;
    write(&common.out, "paths.csv", &csv)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatConfig {
    kernel: KernelSpec,
    #[serde(default = "default_mode")]
    mode: Mode,
    /// Explicit data; otherwise a path of length `n` is drawn from `process`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    process: Option<ProcessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct StatOutput {
    mode: Mode,
    n: usize,
    value: f64,
    classical_u: Option<f64>,
}

pub fn stat(common: &Common) -> Result<()> {
    let mut config: StatConfig = read_config(&common.config)?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    let kernel = BuiltinKernel::new(config.kernel.clone())?;
    let path = match (&config.path, &config.process, config.n) {
        (Some(p), None, None) => p.clone(),
        (None, Some(spec), Some(n)) => Process::new(spec.clone())?.sample_path(n, config.seed)?,
        _ => return Err(CliError::Config("give either `path`, or both `process` and `n`".into())),
    };
    let value = statistic(&path, &kernel, config.mode)?;
    let classical = match config.mode {
        Mode::U => Some(classical_u(&path, &kernel)?),
        Mode::V => None,
    };
    let out = StatOutput { mode: config.mode, n: path.len(), value, classical_u: classical };
    echo(common, "stat", &config)?;
    write(&common.out, "stat.json", &to_json_string(&out))
}

fn both_modes() -> Vec<Mode> {
    vec![Mode::U, Mode::V]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphAuditConfig {
    n_values: Vec<usize>,
    r_values: Vec<usize>,
    m_values: Vec<usize>,
    #[serde(default = "both_modes")]
    modes: Vec<Mode>,
}

pub fn graph_audit(common: &Common) -> Result<()> {
    let config: GraphAuditConfig = read_config(&common.config)?;
    let mut csv = String::from("n,r,m,mode,vertices,exact_count,bound,ratio\n");
    let mut violations = 0;
    for &mode in &config.modes {
        for &r in &config.r_values {
            for &m in &config.m_values {
                for &n in &config.n_values {
                    if mode == Mode::U && n < r {
                        continue;
                    }
                    let row = audit_neighborhoods(&GraphSpec::new(n, r, m, mode)?)?;
                    if row.max_count as f64 > row.bound {
                        violations += 1;
                    }
                    let _ = writeln!(
                        csv,
                        "{n},{r},{m},{mode},{},{},{},{}",
                        row.vertices,
                        row.max_count,
                        fmt_f64(row.bound),
                        fmt_f64(row.ratio)
                    );
                }
            }
        }
    }
    echo(common, "graph-audit", &config)?;
    write(&common.out, "graph_audit.csv", &csv)?;
    if violations > 0 {
        return Err(CliError::Acceptance(format!("{violations} instances exceed the neighbourhood bound")));
    }
    Ok(())
}

pub fn conditions(common: &Common) -> Result<()> {
    let config: ConditionConfig = read_config(&common.config)?;
    let report = theorem2_check(&config)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut csv = String::from("n,b,m_n,T1,T2,verdict\n");
    for p in &report.points {
        let _ =
            writeln!(csv, "{},{},{},{},{},{}", p.n, fmt_f64(p.b), p.m_n, fmt_f64(p.t1), fmt_f64(p.t2), report.verdict);
    }
    echo(common, "conditions", &config)?;
    write(&common.out, "conditions.json", &to_json_string(&report))?;
    write(&common.out, "conditions.csv", &csv)
}

pub fn verify_clt(common: &Common, dry_run: bool) -> Result<()> {
    let mut config: ExperimentConfig = read_config(&common.config)?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if common.jobs.is_some() {
        config.jobs = common.jobs;
    }
    if dry_run {
        #[derive(Serialize)]
        struct Plan<'a> {
            config: &'a ExperimentConfig,
            plan: Vec<mixing_ustat::mc::PlanEntry>,
        }
        let p = plan(&config)?;
        print!("{}", to_json_string(&Plan { config: &config, plan: p }));
        return Ok(());
    }
    let result = run_experiment(&config)?;
    // Worker count does not change results, so it is left out of the echo.
    let mut echoed = config.clone();
    echoed.jobs = None;
    let reproducible = {
        let mut r = result.without_timings();
        r.config.jobs = None;
        r
    };
    #[derive(Serialize)]
    struct Timing {
        n: usize,
        seconds: Option<f64>,
    }
    let timings: Vec<Timing> = result.per_n.iter().map(|p| Timing { n: p.n, seconds: p.seconds }).collect();
    echo(common, "verify-clt", &echoed)?;
    write(&common.out, "report.json", &to_json_string(&reproducible))?;
    write(&common.out, "results.csv", &results_csv(&reproducible))?;
    write(&common.out, "plot.csv", &plot_csv(&reproducible))?;
    write(&common.out, "timings.json", &to_json_string(&timings))?;
    for c in &result.checks {
        log::info!("{}: {} ({})", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
    }
    if !result.passed {
        let failed: Vec<String> =
            result.checks.iter().filter(|c| !c.passed).map(|c| format!("{} [{}]", c.name, c.detail)).collect();
        return Err(CliError::Acceptance(failed.join("; ")));
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleConfig {
    process: ProcessSpec,
    kernel: KernelSpec,
    #[serde(default = "default_mode")]
    mode: Mode,
    n_grid: Vec<usize>,
}

pub fn oracle(common: &Common) -> Result<()> {
    let config: OracleConfig = read_config(&common.config)?;
    let process = Process::new(config.process.clone())?;
    let kernel = BuiltinKernel::new(config.kernel.clone())?;
    if config.n_grid.is_empty() {
        return Err(CliError::Config("n_grid is empty".into()));
    }
    let mut csv = String::from("n,mean,variance\n");
    for &n in &config.n_grid {
        if config.mode == Mode::U && n < kernel.order() {
            return Err(CliError::Config(format!("n = {n} is smaller than the kernel order")));
        }
        let m = exact_moments(&process, &kernel, config.mode, n)?;
        let _ = writeln!(csv, "{n},{},{}", fmt_f64(m.mean), fmt_f64(m.variance));
    }
    echo(common, "oracle", &config)?;
    write(&common.out, "oracle.csv", &csv)
}
