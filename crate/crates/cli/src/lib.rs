//! The `tsinfo` command line.
//!
//! Every subcommand reads an optional JSON config, takes its randomness from
//! `--seed`, and writes files under `--out`. Exit codes: 0 success, 2 invalid
//! configuration or input, 3 numeric or enumeration guard, 4 failed suite.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use tsinfo::bounds::{required_n, estimation_bound, estimation_crossover, BoundGrid, BoundParams, REQUIRED_N_CAP};
use tsinfo::estimators::{h0_hat, ik_hat, iinf_hat};
use tsinfo::format::{Cell, Table};
use tsinfo::mdp::{build_ideal_mdp, random_ideal_mdp_recipe, sample_mdp, IdealMdpRecipe};
use tsinfo::oracle::{ci_check_markov, entropy_rate_sandwich, exact_hk, exact_ik, stationary_distribution};
use tsinfo::processes::{build_ideal_chain, enumerate_family, random_chain, random_recipe, rng_stream, sample_chain};
use tsinfo::selection::{select_active, select_passive, Mode, DEFAULT_TAU};
use tsinfo::verify::{default_bound_grid, run_suite, VerifyConfig, SUITES};
use tsinfo::{
    IdealChainRecipe, MarkovChainSpec, MdpSpec, ObservationSeries, RepresentationFunction, StationaryPolicy,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_SUITE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "tsinfo", version, about = "Select representation functions by time-series information")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed; repeat for several runs.
    #[arg(long = "seed", global = true)]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Block memory for the estimators.
    #[arg(long, global = true, conflicts_with = "schedule")]
    k: Option<usize>,
    /// Use the sample-size schedule for the block memory.
    #[arg(long, global = true)]
    schedule: bool,
    /// Equivalence tolerance for selection reports, bits.
    #[arg(long, global = true)]
    tau: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a chain or MDP specification.
    Gen,
    /// Sample trajectories from a chain or MDP.
    Sample,
    /// Score every candidate of a family on a series.
    Estimate,
    /// Select the best candidate on a series.
    Select,
    /// Sample an MDP under the uniform policy and select.
    SelectActive,
    /// Exact values for a chain and a representation.
    Oracle,
    /// Concentration bound tables.
    Bound,
    /// Run property suites.
    Verify {
        /// Suite to run; repeat for several. Defaults to all suites.
        #[arg(long = "suite")]
        suites: Vec<String>,
    },
}

#[derive(Debug)]
struct CliError {
    code: i32,
    context: &'static str,
    message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

trait Context<T> {
    fn ctx(self, context: &'static str) -> CliResult<T>;
}

impl<T> Context<T> for tsinfo::Result<T> {
    fn ctx(self, context: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError {
            code: if e.is_guard() { EXIT_GUARD } else { EXIT_CONFIG },
            context,
            message: e.to_string(),
        })
    }
}

fn config_error(context: &'static str, message: impl Into<String>) -> CliError {
    CliError { code: EXIT_CONFIG, context, message: message.into() }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    let c = &cli.common;
    if let Some(tau) = c.tau {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(config_error("cli", format!("--tau {tau} must be a finite nonnegative number")));
        }
    }
    if c.k == Some(0) {
        return Err(config_error("cli", "--k must be at least 1"));
    }
    match &cli.command {
        Command::Gen => gen(c),
        Command::Sample => sample(c),
        Command::Estimate => estimate(c),
        Command::Select => select(c),
        Command::SelectActive => select_active_cmd(c),
        Command::Oracle => oracle(c),
        Command::Bound => bound(c),
        Command::Verify { suites } => verify(c, suites),
    }
}

// io helpers

struct Config<T> {
    value: T,
    dir: PathBuf,
}

impl<T> Config<T> {
    /// Resolves `path` against the config file's directory.
    fn path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() { path.to_path_buf() } else { self.dir.join(path) }
    }
}

fn read_config<T: DeserializeOwned>(c: &Common, context: &'static str) -> CliResult<Config<T>> {
    let path = c.config.as_ref().ok_or_else(|| config_error(context, "--config is required"))?;
    let value = read_json(path, context)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Config { value, dir })
}

fn read_optional_config<T: DeserializeOwned + Default>(c: &Common, context: &'static str) -> CliResult<T> {
    match &c.config {
        Some(path) => read_json(path, context),
        None => Ok(T::default()),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, context: &'static str) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| config_error(context, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(context, format!("{}: {e}", path.display())))
}

fn read_series(path: &Path) -> CliResult<ObservationSeries> {
    let file = fs::File::open(path).map_err(|e| config_error("core::read_series", format!("{}: {e}", path.display())))?;
    ObservationSeries::read_from(std::io::BufReader::new(file)).ctx("core::read_series")
}

fn out_dir(c: &Common) -> CliResult<&Path> {
    fs::create_dir_all(&c.out).map_err(|e| config_error("cli", format!("{}: {e}", c.out.display())))?;
    Ok(&c.out)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| config_error("cli", format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable output") + "\n";
    write_file(dir, name, &text)
}

fn seeds_or_default(c: &Common) -> Vec<u64> {
    if c.seeds.is_empty() { vec![0] } else { c.seeds.clone() }
}

fn single_seed(c: &Common, context: &'static str) -> CliResult<u64> {
    match c.seeds.as_slice() {
        [] => Ok(0),
        [s] => Ok(*s),
        _ => Err(config_error(context, "this subcommand takes a single --seed")),
    }
}

fn mode(c: &Common) -> Mode {
    if c.schedule { Mode::Schedule } else { Mode::FixedK(c.k.unwrap_or(1)) }
}

/// Candidate family: an explicit list of representations or every lookup table.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FamilySpec {
    Exhaustive { exhaustive: ExhaustiveFamily },
    Explicit(Vec<RepresentationFunction>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExhaustiveFamily {
    n_states: usize,
    alphabet_size: usize,
}

impl FamilySpec {
    fn build(&self) -> CliResult<Vec<RepresentationFunction>> {
        match self {
            FamilySpec::Exhaustive { exhaustive } => {
                enumerate_family(exhaustive.n_states, exhaustive.alphabet_size).ctx("processes::enumerate_family")
            }
            FamilySpec::Explicit(list) if list.is_empty() => Err(config_error("selection", "empty candidate family")),
            FamilySpec::Explicit(list) => Ok(list.clone()),
        }
    }
}

// gen

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum GenConfig {
    IdealChain { recipe: IdealChainRecipe },
    RandomIdealChain { n_states: usize, alphabet_size: usize },
    RandomChain { n_states: usize },
    IdealMdp { recipe: IdealMdpRecipe },
    RandomIdealMdp { n_states: usize, alphabet_size: usize, n_actions: usize },
}

#[derive(Serialize)]
struct GenSummary {
    kind: &'static str,
    seed: u64,
    n_states: usize,
    gamma: Option<f64>,
}

fn gen(c: &Common) -> CliResult<i32> {
    let cfg: Config<GenConfig> = read_config(c, "processes::gen")?;
    let seed = single_seed(c, "processes::gen")?;
    let mut rng = rng_stream(seed, 0);
    let dir = out_dir(c)?;
    let write_chain = |kind, spec: &MarkovChainSpec, f: Option<&RepresentationFunction>, gamma| -> CliResult<i32> {
        write_json(dir, "chain.json", spec)?;
        if let Some(f) = f {
            write_json(dir, "representation.json", f)?;
        }
        write_json(dir, "gen.json", &GenSummary { kind, seed, n_states: spec.n_states(), gamma })?;
        Ok(EXIT_OK)
    };
    let write_mdp = |kind, mdp: &MdpSpec, f: &RepresentationFunction| -> CliResult<i32> {
        write_json(dir, "mdp.json", mdp)?;
        write_json(dir, "representation.json", f)?;
        write_json(dir, "gen.json", &GenSummary { kind, seed, n_states: mdp.n_states(), gamma: None })?;
        Ok(EXIT_OK)
    };
    match &cfg.value {
        GenConfig::IdealChain { recipe } => {
            let chain = build_ideal_chain(recipe).ctx("processes::build_ideal_chain")?;
            write_chain("ideal_chain", &chain.spec, Some(&chain.representation), chain.mixing.map(|m| m.gamma()))
        }
        GenConfig::RandomIdealChain { n_states, alphabet_size } => {
            let recipe = random_recipe(&mut rng, *n_states, *alphabet_size).ctx("processes::random_recipe")?;
            write_json(dir, "recipe.json", &recipe)?;
            let chain = build_ideal_chain(&recipe).ctx("processes::build_ideal_chain")?;
            write_chain("random_ideal_chain", &chain.spec, Some(&chain.representation), chain.mixing.map(|m| m.gamma()))
        }
        GenConfig::RandomChain { n_states } => {
            if *n_states == 0 {
                return Err(config_error("processes::random_chain", "n_states must be positive"));
            }
            let spec = random_chain(&mut rng, *n_states);
            let gamma = tsinfo::processes::MixingProfile::from_slem(&spec).map(|m| m.gamma());
            write_chain("random_chain", &spec, None, gamma)
        }
        GenConfig::IdealMdp { recipe } => {
            let (mdp, f) = build_ideal_mdp(recipe).ctx("mdp::build_ideal_mdp")?;
            write_mdp("ideal_mdp", &mdp, &f)
        }
        GenConfig::RandomIdealMdp { n_states, alphabet_size, n_actions } => {
            if *n_actions == 0 {
                return Err(config_error("mdp::random_ideal_mdp_recipe", "n_actions must be positive"));
            }
            let recipe = random_ideal_mdp_recipe(&mut rng, *n_states, *alphabet_size, *n_actions)
                .ctx("mdp::random_ideal_mdp_recipe")?;
            write_json(dir, "recipe.json", &recipe)?;
            let (mdp, f) = build_ideal_mdp(&recipe).ctx("mdp::build_ideal_mdp")?;
            write_mdp("random_ideal_mdp", &mdp, &f)
        }
    }
}

// sample

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleConfig {
    chain: Option<PathBuf>,
    mdp: Option<PathBuf>,
    /// Policy for MDP sampling; uniform when absent.
    policy: Option<PathBuf>,
    n: usize,
    #[serde(default)]
    burn_in: usize,
}

fn sample(c: &Common) -> CliResult<i32> {
    let cfg: Config<SampleConfig> = read_config(c, "processes::sample")?;
    let v = &cfg.value;
    let dir = out_dir(c)?;
    match (&v.chain, &v.mdp) {
        (Some(chain), None) => {
            if v.policy.is_some() {
                return Err(config_error("processes::sample_chain", "a policy only applies to MDP sampling"));
            }
            let spec: MarkovChainSpec = read_json(&cfg.path(chain), "processes::sample_chain")?;
            for seed in seeds_or_default(c) {
                let series = sample_chain(&spec, v.n, seed, v.burn_in).ctx("processes::sample_chain")?;
                write_series(dir, seed, &series)?;
            }
        }
        (None, Some(mdp)) => {
            let mdp: MdpSpec = read_json(&cfg.path(mdp), "mdp::sample_mdp")?;
            let policy = match &v.policy {
                Some(p) => read_json(&cfg.path(p), "mdp::sample_mdp")?,
                None => StationaryPolicy::uniform(mdp.n_states(), mdp.n_actions()),
            };
            for seed in seeds_or_default(c) {
                let series = sample_mdp(&mdp, &policy, v.n, seed, v.burn_in).ctx("mdp::sample_mdp")?;
                write_series(dir, seed, &series)?;
            }
        }
        _ => return Err(config_error("processes::sample", "give exactly one of \"chain\" and \"mdp\"")),
    }
    Ok(EXIT_OK)
}

fn write_series(dir: &Path, seed: u64, series: &ObservationSeries) -> CliResult<()> {
    let mut buf = Vec::new();
    series.write_to(&mut buf).ctx("core::write_series")?;
    write_file(dir, &format!("series-{seed}.txt"), &String::from_utf8(buf).expect("ascii series"))
}

// estimate / select

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataConfig {
    series: PathBuf,
    family: FamilySpec,
}

fn estimate(c: &Common) -> CliResult<i32> {
    let cfg: Config<DataConfig> = read_config(c, "estimators::estimate")?;
    let series = read_series(&cfg.path(&cfg.value.series))?;
    let family = cfg.value.family.build()?;
    let mut table = Table::new(&["index", "h0", "score", "k_used", "n_effective", "sparse_support"]);
    for (i, f) in family.iter().enumerate() {
        let h0 = h0_hat(f, &series).ctx("estimators::h0_hat")?;
        let est = if c.schedule {
            iinf_hat(f, &series).ctx("estimators::iinf_hat")?
        } else {
            ik_hat(f, &series, c.k.unwrap_or(1)).ctx("estimators::ik_hat")?
        };
        table.push(vec![
            i.into(),
            h0.into(),
            est.value.into(),
            est.k_used.into(),
            est.n_effective.into(),
            est.sparse_support.into(),
        ]);
    }
    write_file(out_dir(c)?, "estimates.csv", &table.to_csv())?;
    Ok(EXIT_OK)
}

fn select(c: &Common) -> CliResult<i32> {
    let cfg: Config<DataConfig> = read_config(c, "selection::select_passive")?;
    let series = read_series(&cfg.path(&cfg.value.series))?;
    let family = cfg.value.family.build()?;
    let report =
        select_passive(&family, &series, mode(c), c.tau.unwrap_or(DEFAULT_TAU)).ctx("selection::select_passive")?;
    let dir = out_dir(c)?;
    write_file(dir, "selection.csv", &report.to_table().to_csv())?;
    write_file(dir, "selection.json", &report.summary_json())?;
    Ok(EXIT_OK)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActiveConfig {
    mdp: PathBuf,
    family: FamilySpec,
    n: usize,
}

fn select_active_cmd(c: &Common) -> CliResult<i32> {
    let cfg: Config<ActiveConfig> = read_config(c, "selection::select_active")?;
    let mdp: MdpSpec = read_json(&cfg.path(&cfg.value.mdp), "selection::select_active")?;
    let family = cfg.value.family.build()?;
    let dir = out_dir(c)?;
    for seed in seeds_or_default(c) {
        let report = select_active(&mdp, &family, cfg.value.n, seed, c.tau.unwrap_or(DEFAULT_TAU))
            .ctx("selection::select_active")?;
        write_file(dir, &format!("selection-{seed}.csv"), &report.to_table().to_csv())?;
        write_file(dir, &format!("selection-{seed}.json"), &report.summary_json())?;
    }
    Ok(EXIT_OK)
}

// oracle

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleConfig {
    chain: PathBuf,
    representation: PathBuf,
    #[serde(default = "default_max_k")]
    max_k: usize,
    #[serde(default = "default_ci_tol")]
    tol: f64,
}

fn default_max_k() -> usize {
    5
}

fn default_ci_tol() -> f64 {
    1e-9
}

#[derive(Serialize)]
struct CiReport {
    holds: bool,
    max_violation: f64,
    tol: f64,
}

fn oracle(c: &Common) -> CliResult<i32> {
    let cfg: Config<OracleConfig> = read_config(c, "oracle")?;
    let v = &cfg.value;
    if v.max_k == 0 {
        return Err(config_error("oracle", "max_k must be at least 1"));
    }
    let spec: MarkovChainSpec = read_json(&cfg.path(&v.chain), "oracle")?;
    let f: RepresentationFunction = read_json(&cfg.path(&v.representation), "oracle")?;
    let pi = stationary_distribution(&spec).ctx("oracle::stationary_distribution")?;
    let mut stationary = Table::new(&["state", "probability"]);
    for (x, p) in pi.iter().enumerate() {
        stationary.push(vec![x.into(), (*p).into()]);
    }
    let mut table = Table::new(&["k", "I_k", "h_k", "sandwich_lower", "sandwich_upper"]);
    for k in 1..=v.max_k {
        let ik = exact_ik(&spec, &f, k).ctx("oracle::exact_ik")?;
        let hk = exact_hk(&spec, &f, k).ctx("oracle::exact_hk")?;
        let s = entropy_rate_sandwich(&spec, &f, k).ctx("oracle::entropy_rate_sandwich")?;
        table.push(vec![k.into(), ik.into(), hk.into(), s.lower.into(), s.upper.into()]);
    }
    let verdict = ci_check_markov(&spec, &f, v.tol, 1).ctx("oracle::ci_check_markov")?;
    let dir = out_dir(c)?;
    write_file(dir, "stationary.csv", &stationary.to_csv())?;
    write_file(dir, "oracle.csv", &table.to_csv())?;
    write_json(dir, "ci.json", &CiReport { holds: verdict.holds, max_violation: verdict.max_violation, tol: v.tol })?;
    Ok(EXIT_OK)
}

// bound

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BoundConfig {
    grid: BoundGrid,
    /// Target probability for the sample-size table; skipped when absent.
    target: Option<f64>,
    max_n: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self { grid: default_bound_grid(), target: None, max_n: REQUIRED_N_CAP }
    }
}

fn bound(c: &Common) -> CliResult<i32> {
    let cfg: BoundConfig = read_optional_config(c, "bounds")?;
    let mut table = Table::new(&[
        "d", "epsilon", "n", "gamma", "k", "alphabet_size", "bound", "vacuous", "crossover_n",
    ]);
    for p in cfg.grid.points() {
        if p.n <= p.k as u64 {
            continue;
        }
        let b = estimation_bound(&p).ctx("bounds::estimation_bound")?;
        let cross = estimation_crossover(&p).ctx("bounds::estimation_crossover")?;
        table.push(row_for(&p, vec![b.value.into(), b.is_vacuous().into(), cross.into()]));
    }
    let dir = out_dir(c)?;
    write_file(dir, "bounds.csv", &table.to_csv())?;
    if let Some(target) = cfg.target {
        let mut plan = Table::new(&["d", "epsilon", "n", "gamma", "k", "alphabet_size", "required_n", "attainable"]);
        let mut seen = Vec::new();
        for p in cfg.grid.points() {
            let p = p.with_n(0);
            if seen.contains(&p) {
                continue;
            }
            seen.push(p);
            let cells = match required_n(&p, target, cfg.max_n) {
                Ok(r) => vec![r.n.into(), true.into()],
                Err(e) if e.is_guard() => vec![Cell::Text(String::new()), false.into()],
                Err(e) => return Err(e).ctx("bounds::required_n"),
            };
            plan.push(row_for(&p, cells));
        }
        write_file(dir, "required_n.csv", &plan.to_csv())?;
    }
    Ok(EXIT_OK)
}

fn row_for(p: &BoundParams, mut tail: Vec<Cell>) -> Vec<Cell> {
    let mut row = vec![
        (p.d as usize).into(),
        p.epsilon.into(),
        p.n.into(),
        p.gamma.into(),
        p.k.into(),
        p.alphabet_size.into(),
    ];
    row.append(&mut tail);
    row
}

// verify

fn verify(c: &Common, suites: &[String]) -> CliResult<i32> {
    let cfg: VerifyConfig = read_optional_config(c, "verify")?;
    cfg.validate().ctx("verify")?;
    let names: Vec<&str> = if suites.is_empty() || suites.iter().any(|s| s == "all") {
        SUITES.to_vec()
    } else {
        for s in suites {
            if !SUITES.contains(&s.as_str()) {
                return Err(config_error("verify", format!("unknown suite '{s}'; expected one of {}", SUITES.join(", "))));
            }
        }
        suites.iter().map(String::as_str).collect()
    };
    let root = out_dir(c)?;
    let seeds = seeds_or_default(c);
    let mut summary = Table::new(&["seed", "suite", "passed", "checks", "failures", "detail"]);
    let mut failures = Vec::new();
    let mut all_passed = true;
    for &seed in &seeds {
        let dir = if seeds.len() == 1 { root.to_path_buf() } else { root.join(format!("seed-{seed}")) };
        fs::create_dir_all(&dir).map_err(|e| config_error("verify", e.to_string()))?;
        for &name in &names {
            let report = run_suite(name, &cfg, seed).ctx("verify")?;
            write_file(&dir, &format!("{name}.csv"), &report.table.to_csv())?;
            println!("{} seed={seed} {name}: {}", if report.passed { "PASS" } else { "FAIL" }, report.detail);
            all_passed &= report.passed;
            for f in &report.failures {
                failures.push(format!("seed={seed} {name}: {f}"));
            }
            summary.push(vec![
                Cell::Text(seed.to_string()),
                name.into(),
                report.passed.into(),
                report.checks.into(),
                report.failure_count.into(),
                report.detail.into(),
            ]);
        }
    }
    write_file(root, "summary.csv", &summary.to_csv())?;
    let mut listing = failures.join("\n");
    if !listing.is_empty() {
        listing.push('\n');
    }
    write_file(root, "failures.txt", &listing)?;
    if all_passed {
        Ok(EXIT_OK)
    } else {
        for f in &failures {
            eprintln!("{f}");
        }
        Ok(EXIT_SUITE)
    }
}
