//! Command-line interface: single runs, the benchmark matrix and the
//! constant ablation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bench::{BenchSpec, Family, Oracle, CLUTTER_R};
use crate::expr::TargetFile;
use crate::par::{self, Execution};
use crate::points::Points;
use crate::sampler::{run, RunOutput, SamplerConfig};
use crate::stats::{cramer_two_sample, ks_two_sample, CramerOptions, TestResult};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;
pub const EXIT_AUDIT: i32 = 4;

/// Seed offset for reference samples, so they never share a stream with the
/// run they are compared to.
const ORACLE_SEED: u64 = 0x5eed_0f_0aac1e;

#[derive(Debug, Parser)]
#[command(name = "ers", version, about = "Rejection sampling with learned Gaussian-mixture proposals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one target and write a report and the samples.
    Run(RunArgs),
    /// Run a benchmark suite and write bench.csv.
    Bench(BenchArgs),
    /// Scale the sampler constants on the peakiness target and write ablate.csv.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Built-in target family.
    #[arg(long, value_enum, default_value_t = Family::Peakiness, conflicts_with = "plugin")]
    pub family: Family,
    /// Peakiness exponent.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Dimension (sinusoid, clutter).
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Clutter mixing weight.
    #[arg(long, default_value_t = CLUTTER_R)]
    pub r: f64,
    /// JSON target file with `dims`, `lower`, `upper` and `log_density`.
    #[arg(long)]
    pub plugin: Option<PathBuf>,
}

impl TargetArgs {
    pub fn spec(&self) -> Result<BenchSpec> {
        let base = BenchSpec::new(self.family, self.d)?;
        match self.family {
            Family::Peakiness => BenchSpec::peakiness(self.a),
            Family::Sinusoid => Ok(base),
            Family::Clutter => BenchSpec::clutter(self.d, self.r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplesFormat {
    Csv,
    F64le,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Samples to accept per run.
    #[arg(long = "T", visible_alias = "samples", default_value_t = 10_000,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub t: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// JSON object overriding sampler constants.
    #[arg(long)]
    pub constants_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Execution::Parallel)]
    pub execution: Execution,
    /// Permutations for the Cramér test.
    #[arg(long, default_value_t = 200)]
    pub permutations: usize,
    /// Cramér subsample size per side.
    #[arg(long, default_value_t = 5000)]
    pub test_cap: usize,
}

impl CommonArgs {
    pub fn config(&self) -> Result<SamplerConfig> {
        let mut cfg = match &self.constants_file {
            Some(p) => serde_json::from_str::<SamplerConfig>(&fs::read_to_string(p)?)?,
            None => SamplerConfig::default(),
        };
        cfg.target_count = self.t as usize;
        cfg.seed = self.seed;
        cfg.execution = self.execution;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn test_options(&self) -> TestOptions {
        TestOptions {
            permutations: self.permutations,
            max_per_side: self.test_cap,
            execution: self.execution,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = SamplesFormat::Csv)]
    pub samples_format: SamplesFormat,
    /// Skip the comparison against the reference sampler.
    #[arg(long)]
    pub no_test: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Peakiness,
    Scaling,
    Clutter,
    All,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Design {
    /// Every combination of factors.
    Grid,
    /// One constant at a time, the others at their defaults.
    OneAtATime,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    /// Peakiness exponent of the ablation target.
    #[arg(long, default_value_t = 20.0)]
    pub a: f64,
    /// Multipliers applied to each constant.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 2.0])]
    pub factors: Vec<f64>,
    /// Constants to vary.
    #[arg(long, value_delimiter = ',', default_values_t = ABLATION_CONSTANTS.map(String::from).to_vec())]
    pub constants: Vec<String>,
    #[arg(long, value_enum, default_value_t = Design::Grid)]
    pub design: Design,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOptions {
    pub permutations: usize,
    pub max_per_side: usize,
    pub execution: Execution,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            permutations: 200,
            max_per_side: 5000,
            execution: Execution::default(),
        }
    }
}

/// Compares `samples` with as many reference draws: KS on the coordinate
/// in one dimension, Cramér otherwise.
pub fn oracle_test(spec: &BenchSpec, samples: &Points, seed: u64, opts: &TestOptions) -> Result<TestResult> {
    let oracle = Oracle::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ORACLE_SEED);
    let reference = oracle.sample(samples.len(), &mut rng);
    if spec.d == 1 {
        Ok(ks_two_sample(&samples.column(0), &reference.column(0)))
    } else {
        let c = CramerOptions {
            permutations: opts.permutations,
            max_per_side: opts.max_per_side,
            seed,
            execution: opts.execution,
        };
        Ok(cramer_two_sample(samples, &reference, &c))
    }
}

/// Samples a built-in target and attaches the reference comparison.
pub fn run_spec(spec: &BenchSpec, cfg: &SamplerConfig, test: Option<&TestOptions>) -> Result<RunOutput> {
    let mut out = run(&spec.target(), cfg)?;
    if let Some(opts) = test {
        out.report.test = Some(oracle_test(spec, &out.samples, cfg.seed, opts)?);
    }
    Ok(out)
}

pub const ABLATION_CONSTANTS: [&str; 5] = ["n_base", "c_low_inflate", "accept_weight", "gmm_growth", "gmm_k_cap_divisor"];

/// `base` with each named constant scaled. Multiplicative constants that sit
/// above one (`c_low_inflate`, `gmm_growth`) have their excess over one
/// scaled instead, so every factor keeps them meaningful.
pub fn scaled_config(base: &SamplerConfig, factors: &[(String, f64)]) -> Result<SamplerConfig> {
    let mut cfg = base.clone();
    for (name, f) in factors {
        match name.as_str() {
            "n_base" => cfg.n_base *= f,
            "accept_weight" => cfg.accept_weight *= f,
            "gmm_k_cap_divisor" => cfg.gmm_k_cap_divisor *= f,
            "c_low_inflate" => cfg.c_low_inflate = 1.0 + (cfg.c_low_inflate - 1.0) * f,
            "gmm_growth" => cfg.gmm_growth = 1.0 + (cfg.gmm_growth - 1.0) * f,
            other => return Err(Error::Config(format!("unknown constant {other:?}"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Factor assignments for an ablation design.
pub fn ablation_cells(constants: &[String], factors: &[f64], design: Design) -> Vec<Vec<(String, f64)>> {
    match design {
        Design::Grid => {
            let mut cells: Vec<Vec<(String, f64)>> = vec![Vec::new()];
            for c in constants {
                cells = cells
                    .into_iter()
                    .flat_map(|cell| {
                        factors.iter().map(move |f| {
                            let mut next = cell.clone();
                            next.push((c.clone(), *f));
                            next
                        })
                    })
                    .collect();
            }
            cells
        }
        Design::OneAtATime => constants
            .iter()
            .flat_map(|c| factors.iter().map(move |f| vec![(c.clone(), *f)]))
            .collect(),
    }
}

fn write_samples(path: &Path, samples: &Points, format: SamplesFormat) -> Result<()> {
    match format {
        SamplesFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
            for row in samples.rows() {
                w.write_record(row.iter().map(|v| format!("{v:e}")))?;
            }
            w.flush()?;
        }
        SamplesFormat::F64le => {
            let mut f = std::io::BufWriter::new(fs::File::create(path)?);
            for v in samples.as_flat() {
                f.write_all(&v.to_le_bytes())?;
            }
            f.flush()?;
        }
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let cfg = args.common.config()?;
    fs::create_dir_all(&args.common.out)?;
    let out = match &args.target.plugin {
        Some(path) => run(&TargetFile::load(path)?.target()?, &cfg)?,
        None => {
            let spec = args.target.spec()?;
            let test = args.common.test_options();
            let supported = Oracle::new(&spec).is_ok();
            run_spec(&spec, &cfg, (!args.no_test && supported).then_some(&test))?
        }
    };
    let name = match args.samples_format {
        SamplesFormat::Csv => "samples.csv",
        SamplesFormat::F64le => "samples.f64",
    };
    write_samples(&args.common.out.join(name), &out.samples, args.samples_format)?;
    write_json(&args.common.out.join("report.json"), &out.report)?;
    let r = &out.report;
    println!(
        "accepted {} of {} evaluations: acceptance rate {:.4}, {} epochs, audit {}",
        r.target_count,
        r.f_evals,
        r.acceptance_rate,
        r.epochs.len(),
        if r.audit.passed() { "passed" } else { "FAILED" }
    );
    if let Some(t) = &r.test {
        println!("{} statistic {:.5}, p = {:.4}", t.method, t.statistic, t.p_value);
    }
    Ok(if r.audit.passed() { EXIT_OK } else { EXIT_AUDIT })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub suite: String,
    pub family: String,
    pub params: String,
    pub d: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub runs: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub acceptance_std: f64,
    pub f_evals: f64,
    pub audit_pass: bool,
    pub audit_violations: usize,
    pub test_method: String,
    /// Smallest p-value over the runs.
    pub test_p: f64,
    pub test_passes: usize,
    pub error: String,
}

/// Cells of a suite: `(suite name, spec)`.
pub fn suite_cells(suite: Suite) -> Vec<(&'static str, BenchSpec)> {
    let mut cells = Vec::new();
    if matches!(suite, Suite::Peakiness | Suite::All) {
        for a in [1.0, 5.0, 10.0, 15.0, 20.0] {
            cells.push(("peakiness", BenchSpec::peakiness(a).expect("valid")));
        }
    }
    if matches!(suite, Suite::Scaling | Suite::All) {
        for d in 1..=7 {
            cells.push(("scaling", BenchSpec::sinusoid(d).expect("valid")));
        }
    }
    if matches!(suite, Suite::Clutter | Suite::All) {
        for d in 1..=2 {
            cells.push(("clutter", BenchSpec::clutter(d, CLUTTER_R).expect("valid")));
        }
    }
    cells
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (m, s)
}

/// Runs every cell `runs` times with seeds `seed, seed + 1, ...`. Failures
/// are recorded in the row and the suite carries on.
pub fn bench_rows(cells: &[(&str, BenchSpec)], base: &SamplerConfig, runs: usize, test: &TestOptions) -> Vec<BenchRow> {
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (0..runs as u64).map(move |r| (c, r))).collect();
    let results = par::map_indexed(base.execution, jobs.len(), |j| {
        let (c, r) = jobs[j];
        let cfg = SamplerConfig {
            seed: base.seed + r,
            ..base.clone()
        };
        run_spec(&cells[c].1, &cfg, Some(test)).map(|o| o.report)
    });

    cells
        .iter()
        .enumerate()
        .map(|(c, (suite, spec))| {
            let mine: Vec<&Result<_>> = jobs.iter().zip(&results).filter(|(j, _)| j.0 == c).map(|(_, r)| r).collect();
            let ok: Vec<_> = mine.iter().filter_map(|r| r.as_ref().ok()).collect();
            let errors: Vec<String> = mine.iter().filter_map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
            let rates: Vec<f64> = ok.iter().map(|r| r.acceptance_rate).collect();
            let (mean, std) = if rates.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&rates) };
            let evals: Vec<f64> = ok.iter().map(|r| r.f_evals as f64).collect();
            let tests: Vec<&TestResult> = ok.iter().filter_map(|r| r.test.as_ref()).collect();
            BenchRow {
                suite: suite.to_string(),
                family: spec.family.to_string(),
                params: spec.params(),
                d: spec.d,
                t: base.target_count,
                runs,
                seed: base.seed,
                acceptance_rate: mean,
                acceptance_std: std,
                f_evals: if evals.is_empty() { f64::NAN } else { mean_std(&evals).0 },
                audit_pass: errors.is_empty() && ok.iter().all(|r| r.audit.passed()),
                audit_violations: ok.iter().map(|r| r.audit.violations.len()).sum(),
                test_method: tests.first().map(|t| t.method.to_string()).unwrap_or_default(),
                test_p: tests.iter().map(|t| t.p_value).fold(f64::NAN, f64::min),
                test_passes: tests.iter().filter(|t| t.p_value > 0.01).count(),
                error: errors.join("; "),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let cfg = args.common.config()?;
    fs::create_dir_all(&args.common.out)?;
    let rows = bench_rows(&suite_cells(args.suite), &cfg, args.runs, &args.common.test_options());
    write_csv(&args.common.out.join("bench.csv"), &rows)?;
    for r in &rows {
        println!(
            "{:<10} {:<10} {:<12} acceptance {:.4} ± {:.4}  test {}/{} passed{}",
            r.suite,
            r.family,
            r.params,
            r.acceptance_rate,
            r.acceptance_std,
            r.test_passes,
            r.runs,
            if r.error.is_empty() { String::new() } else { format!("  error: {}", r.error) }
        );
    }
    let failed = rows.iter().any(|r| !r.error.is_empty());
    let audit = rows.iter().all(|r| r.audit_pass);
    Ok(if failed {
        EXIT_FAILURE
    } else if !audit {
        EXIT_AUDIT
    } else {
        EXIT_OK
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblateRow {
    pub family: String,
    pub params: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub n_base: f64,
    pub c_low_inflate: f64,
    pub accept_weight: f64,
    pub gmm_growth: f64,
    pub gmm_k_cap_divisor: f64,
    /// Factors applied, e.g. `n_base=0.5;gmm_growth=2`.
    pub factors: String,
    pub acceptance_rate: f64,
    pub f_evals: u64,
    pub audit_pass: bool,
    pub error: String,
}

/// One run per cell, all with the base seed.
pub fn ablate_rows(spec: &BenchSpec, base: &SamplerConfig, cells: &[Vec<(String, f64)>]) -> Result<Vec<AblateRow>> {
    let configs: Vec<SamplerConfig> = cells.iter().map(|c| scaled_config(base, c)).collect::<Result<_>>()?;
    let results = par::map_indexed(base.execution, configs.len(), |i| run(&spec.target(), &configs[i]));
    Ok(configs
        .iter()
        .zip(cells)
        .zip(results)
        .map(|((cfg, cell), res)| {
            let factors = cell.iter().map(|(n, f)| format!("{n}={f}")).collect::<Vec<_>>().join(";");
            let (rate, evals, audit, error) = match res {
                Ok(o) => (o.report.acceptance_rate, o.report.f_evals, o.report.audit.passed(), String::new()),
                Err(e) => (f64::NAN, 0, false, e.to_string()),
            };
            AblateRow {
                family: spec.family.to_string(),
                params: spec.params(),
                t: cfg.target_count,
                seed: cfg.seed,
                n_base: cfg.n_base,
                c_low_inflate: cfg.c_low_inflate,
                accept_weight: cfg.accept_weight,
                gmm_growth: cfg.gmm_growth,
                gmm_k_cap_divisor: cfg.gmm_k_cap_divisor,
                factors,
                acceptance_rate: rate,
                f_evals: evals,
                audit_pass: audit,
                error,
            }
        })
        .collect())
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<i32> {
    let cfg = args.common.config()?;
    let spec = BenchSpec::peakiness(args.a)?;
    fs::create_dir_all(&args.common.out)?;
    let cells = ablation_cells(&args.constants, &args.factors, args.design);
    let rows = ablate_rows(&spec, &cfg, &cells)?;
    write_csv(&args.common.out.join("ablate.csv"), &rows)?;
    let rates: Vec<f64> = rows.iter().map(|r| r.acceptance_rate).filter(|r| r.is_finite()).collect();
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{} cells: acceptance min {:.4}, max {:.4}, spread {:.2} points",
        rows.len(),
        lo,
        hi,
        100.0 * (hi - lo)
    );
    let failed = rows.iter().any(|r| !r.error.is_empty());
    Ok(if failed {
        EXIT_FAILURE
    } else if rows.iter().all(|r| r.audit_pass) {
        EXIT_OK
    } else {
        EXIT_AUDIT
    })
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Domain(_) | Error::Dimension { .. } | Error::Expr(_) | Error::Json(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}
