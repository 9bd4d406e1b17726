//! `monotest`: command-line driver for the testers, exact metrics and the
//! verification sweeps.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use monotest_core::harness::{
    estimate_rejection, run_sweep, BlueSweepSpec, EstimateSpec, ExperimentSpec, Format,
    FunctionSet, PairProbSpec, TesterKind,
};
use monotest_core::metrics::{average_sensitivity, compute_metrics, MetricsReport};
use monotest_core::rational::{to_f64, to_pq};
use monotest_core::testers::{combined_test, path_only_test, sensitivity_test, DEFAULT_BUDGET_CONSTANT};
use monotest_core::{make_params, Family, QueryOracle, TruthTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "monotest", version, about = "Monotonicity testers and exact verifiers on the Boolean hypercube")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact metrics of one function.
    Metrics {
        #[command(flatten)]
        function: FunctionArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// One tester run on one function.
    Test {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long, value_enum, default_value_t = RunTester::Combined)]
        tester: RunTester,
        #[command(flatten)]
        tuning: Tuning,
        /// Rounds for the path-only tester.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rejection rate over seeded trials with a Wilson interval.
    Estimate {
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long, value_enum, default_value_t = EstimateTester::Combined)]
        tester: EstimateTester,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Verification sweep; exits 1 if any row fails.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        tuning: Tuning,
        /// Comma-separated sigma values (blue sweep).
        #[arg(long, value_delimiter = ',')]
        sigmas: Vec<f64>,
        /// Smallest outcome probability compared (pair-probability sweep).
        #[arg(long, default_value_t = 1e-4)]
        min_prob: f64,
        /// Allowed standard errors (pair-probability sweep).
        #[arg(long, default_value_t = 4.0)]
        z_limit: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Disjoint-path routing on instances harvested from random functions.
    RoutingCheck {
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Blue-blue chain on random blue sets.
    BlueSweep {
        #[arg(long, default_value_t = 12)]
        n: u32,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        /// Comma-separated sigma values.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.1, 0.2])]
        sigma: Vec<f64>,
        /// Blue sets per sigma.
        #[arg(long, default_value_t = 100)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a family member as a BFTT truth-table file.
    Gen {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FunctionArgs {
    /// Family as `name[:arg[:arg]]`, e.g. `anti-dictator:0`.
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    family: Option<Family>,
    /// Dimension for `--family`.
    #[arg(long, required_unless_present = "table")]
    n: Option<u32>,
    /// BFTT truth-table file.
    #[arg(long)]
    table: Option<PathBuf>,
}

impl FunctionArgs {
    fn load(&self) -> Result<TruthTable> {
        match (&self.family, &self.table) {
            (_, Some(path)) => TruthTable::load(path)
                .with_context(|| format!("reading {}", path.display())),
            (Some(fam), None) => {
                let n = self.n.context("--n is required with --family")?;
                Ok(fam.table(n)?)
            }
            (None, None) => bail!("give --family with --n, or --table"),
        }
    }
}

#[derive(Args)]
struct Tuning {
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_BUDGET_CONSTANT)]
    budget_constant: f64,
}

#[derive(Args)]
struct SetArgs {
    #[arg(long, value_enum, default_value_t = SetKind::Random)]
    set: SetKind,
    #[arg(long, default_value_t = 6)]
    n: u32,
    /// Functions in the set (draws for the pair-probability sweep, blue
    /// sets per sigma for the blue sweep).
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Flipped points for `--set noisy`.
    #[arg(long, default_value_t = 4)]
    flips: u32,
}

impl SetArgs {
    fn function_set(&self) -> FunctionSet {
        let (n, count, seed) = (self.n, self.trials, self.seed);
        match self.set {
            SetKind::Exhaustive => FunctionSet::Exhaustive { n },
            SetKind::Random => FunctionSet::Random { n, count, seed },
            SetKind::Noisy => FunctionSet::NoisyMonotone {
                n,
                count,
                seed,
                flips: self.flips,
            },
            SetKind::Mixed => FunctionSet::Mixed { n, count, seed },
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
}

impl OutputArgs {
    fn format(&self, default: Format) -> Format {
        match self.format {
            Some(OutFormat::Csv) => Format::Csv,
            Some(OutFormat::Json) => Format::Json,
            None => default,
        }
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetKind {
    Exhaustive,
    Random,
    Noisy,
    Mixed,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Dichotomy,
    Lemmas,
    Routing,
    Pairprob,
    Blue,
}

#[derive(Clone, Copy, ValueEnum)]
enum RunTester {
    Combined,
    Sensitivity,
    Path,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateTester {
    Edge,
    Path,
    Combined,
    Sensitivity,
}

/// Writes a single record as pretty JSON or as a one-row CSV.
fn write_record<T: Serialize>(record: &T, format: Format, out: &OutputArgs) -> Result<()> {
    let mut w = out.writer()?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, record)?;
            w.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut c = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(w);
            c.serialize(record)?;
            c.flush()?;
            return Ok(());
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsRow {
    n: u32,
    eps_f: String,
    eps_f_approx: f64,
    phi_plus: String,
    gamma_plus: String,
    avg_sensitivity: String,
    r: Option<String>,
    min_changes: u64,
    violated_edges: u64,
    bichromatic_edges: u64,
    gamma_matching_size: u64,
    window_low: u32,
    window_high: u32,
    matching_size: Option<u64>,
    matching_total_length: Option<u64>,
}

impl From<&MetricsReport> for MetricsRow {
    fn from(m: &MetricsReport) -> Self {
        MetricsRow {
            n: m.n,
            eps_f: to_pq(&m.eps_f.0),
            eps_f_approx: to_f64(&m.eps_f.0),
            phi_plus: to_pq(&m.phi_plus.0),
            gamma_plus: to_pq(&m.gamma_plus.0),
            avg_sensitivity: to_pq(&m.avg_sensitivity.0),
            r: m.r.as_ref().map(|r| to_pq(&r.0)),
            min_changes: m.min_changes,
            violated_edges: m.violated_edges,
            bichromatic_edges: m.bichromatic_edges,
            gamma_matching_size: m.gamma_matching_size,
            window_low: m.window.0,
            window_high: m.window.1,
            matching_size: m.matching_size,
            matching_total_length: m.matching_total_length,
        }
    }
}

fn sweep_output(spec: &ExperimentSpec, out: &OutputArgs) -> Result<ExitCode> {
    let result = run_sweep(spec)?;
    let mut w = out.writer()?;
    result.write(out.format(Format::Csv), &mut w)?;
    w.flush()?;
    let failures = result.failures();
    eprintln!("{} rows, {} failed", result.len(), failures);
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Metrics { function, output } => {
            let f = function.load()?;
            let m = compute_metrics(&f)?;
            match output.format(Format::Json) {
                Format::Json => write_record(&m, Format::Json, &output)?,
                Format::Csv => write_record(&MetricsRow::from(&m), Format::Csv, &output)?,
            }
        }
        Command::Test {
            function,
            tester,
            tuning,
            trials,
            seed,
            output,
        } => {
            let f = function.load()?;
            let mut o = QueryOracle::new(&f);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let run = match tester {
                RunTester::Combined => combined_test(&mut o, tuning.eps, tuning.budget_constant, &mut rng)?,
                RunTester::Sensitivity => {
                    let i = to_f64(&average_sensitivity(&f));
                    sensitivity_test(&mut o, tuning.eps, i, tuning.budget_constant, &mut rng)?
                }
                RunTester::Path => {
                    let p = make_params(f.dim(), tuning.eps, tuning.sigma)?;
                    path_only_test(&mut o, &p, trials, &mut rng)?
                }
            };
            write_record(&run, Format::Json, &output)?;
        }
        Command::Estimate {
            function,
            tester,
            tuning,
            trials,
            seed,
            output,
        } => {
            let f = function.load()?;
            let tester = match tester {
                EstimateTester::Edge => TesterKind::Edge,
                EstimateTester::Path => TesterKind::Path,
                EstimateTester::Combined => TesterKind::Combined,
                EstimateTester::Sensitivity => TesterKind::Sensitivity,
            };
            let avg_sensitivity = matches!(tester, TesterKind::Sensitivity)
                .then(|| to_f64(&average_sensitivity(&f)));
            let spec = EstimateSpec {
                tester,
                eps: tuning.eps,
                sigma: tuning.sigma,
                budget_constant: tuning.budget_constant,
                avg_sensitivity,
                trials,
                seed,
            };
            let r = estimate_rejection(&f, &spec)?;
            write_record(&r, output.format(Format::Json), &output)?;
        }
        Command::Sweep {
            kind,
            set,
            tuning,
            sigmas,
            min_prob,
            z_limit,
            output,
        } => {
            let spec = match kind {
                SweepKind::Dichotomy => ExperimentSpec::Dichotomy { set: set.function_set() },
                SweepKind::Lemmas => ExperimentSpec::Lemmas { set: set.function_set() },
                SweepKind::Routing => ExperimentSpec::Routing { set: set.function_set() },
                SweepKind::Pairprob => ExperimentSpec::PairProb(PairProbSpec {
                    n: set.n,
                    eps: tuning.eps,
                    sigma: tuning.sigma,
                    draws: set.trials,
                    seed: set.seed,
                    min_prob,
                    z_limit,
                }),
                SweepKind::Blue => ExperimentSpec::Blue(BlueSweepSpec {
                    n: set.n,
                    eps: tuning.eps,
                    sigmas: if sigmas.is_empty() { vec![tuning.sigma] } else { sigmas },
                    instances: set.trials,
                    seed: set.seed,
                }),
            };
            return sweep_output(&spec, &output);
        }
        Command::RoutingCheck { set, output } => {
            return sweep_output(&ExperimentSpec::Routing { set: set.function_set() }, &output);
        }
        Command::BlueSweep {
            n,
            eps,
            sigma,
            trials,
            seed,
            output,
        } => {
            let spec = ExperimentSpec::Blue(BlueSweepSpec {
                n,
                eps,
                sigmas: sigma,
                instances: trials,
                seed,
            });
            return sweep_output(&spec, &output);
        }
        Command::Gen { family, n, out } => {
            family
                .table(n)?
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
