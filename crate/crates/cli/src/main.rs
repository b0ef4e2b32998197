//! `cyclepoint`: simulate series, fit the sampler, summarize the output.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use cyclepoint::chain::run_chain;
use cyclepoint::io::{self, SamplesHeader, SCHEMA_VERSION};
use cyclepoint::simulate::{generate, Generator, GeneratorOptions, Truth};
use cyclepoint::summaries;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{resolve_chain, resolve_hyper, ChainArgs, FileConfig, HyperArgs};

#[derive(Parser)]
#[command(name = "cyclepoint", version, about = "Change-points and frequencies of piecewise periodic series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a series from a built-in generator; writes series.csv and truth.json.
    Simulate {
        /// illustrative, t-errors, piecewise-ar or slowly-varying-ar
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Multiply t errors by the segment standard deviation
        #[arg(long)]
        scale_t_errors: bool,
        /// Discarded warm-up steps for the piecewise AR
        #[arg(long, default_value_t = 0)]
        ar_burn_in: usize,
    },
    /// Run the sampler; writes samples.jsonl, loglik.csv and acceptance.csv.
    Fit {
        /// CSV with columns `t,y` or a single `y` column, header optional
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// TOML file with `[hyper]` and `[chain]` tables; flags take precedence
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperArgs,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Summarize a samples file into plot-ready CSV tables.
    Summarize {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Condition on this many change-points [default: posterior mode]
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated frequency counts per segment [default: joint mode given k]
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        /// Histogram bin width for change-point locations
        #[arg(long, default_value_t = 5.0)]
        bin_width: f64,
        /// truth.json with a peak curve; prints the RSS of the estimated peak
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

fn simulate(model: &str, seed: u64, out: &Path, options: GeneratorOptions) -> Result<()> {
    let generator: Generator = model.parse()?;
    ensure_dir(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ts, truth) = generate(generator, options, &mut rng)?;
    io::write_series(create(out, "series.csv")?, &ts)?;
    let mut w = create(out, "truth.json")?;
    serde_json::to_writer_pretty(&mut w, &truth)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    println!("wrote {} observations from `{}` to {}", ts.len(), model, out.display());
    Ok(())
}

fn fit(input: &Path, out: &Path, config: Option<&Path>, hyper: &HyperArgs, chain: &ChainArgs) -> Result<()> {
    let file = match config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let f = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let ts = io::read_series(BufReader::new(f)).with_context(|| format!("reading {}", input.display()))?;
    let hyper = resolve_hyper(ts.len(), hyper, &file.hyper);
    let chain = resolve_chain(chain, &file.chain);
    hyper.validate(ts.len())?;
    chain.validate()?;
    ensure_dir(out)?;

    let output = run_chain(&ts, &hyper, &chain)?;
    let header = SamplesHeader {
        schema_version: SCHEMA_VERSION,
        n: ts.len(),
        hyper,
        config: chain,
    };
    io::write_samples(create(out, "samples.jsonl")?, &header, &output)?;
    io::write_loglik(create(out, "loglik.csv")?, &output.loglik)?;
    let report = summaries::acceptance_report(&output.acceptance);
    io::write_acceptance(create(out, "acceptance.csv")?, &report)?;
    println!("stored {} samples in {}", output.samples.len(), out.display());
    if let Ok(k) = summaries::modal_k(&output.samples) {
        println!("modal k = {k}");
    }
    Ok(())
}

fn summarize(
    samples: &Path,
    out: &Path,
    k: Option<usize>,
    m: Option<Vec<usize>>,
    bin_width: f64,
    truth: Option<&Path>,
) -> Result<()> {
    if !(bin_width > 0.0) {
        bail!("bin-width must be positive, got {bin_width}");
    }
    let f = File::open(samples).with_context(|| format!("opening {}", samples.display()))?;
    let file = io::read_samples(BufReader::new(f)).with_context(|| format!("reading {}", samples.display()))?;
    let s = &file.samples;
    let n = file.header.n;
    ensure_dir(out)?;

    io::write_posterior_k(create(out, "posterior_k.csv")?, &summaries::posterior_k(s)?)?;
    let k = match k {
        Some(k) => k,
        None => summaries::modal_k(s)?,
    };
    io::write_posterior_m(create(out, "posterior_m.csv")?, k, &summaries::posterior_m_given_k(s, k)?)?;
    io::write_changepoints(
        create(out, "changepoints.csv")?,
        k,
        &summaries::changepoint_posterior(s, k)?,
        bin_width,
    )?;
    let m = match m {
        Some(m) => m,
        None => summaries::modal_m_joint(s, k)?,
    };
    io::write_frequencies(create(out, "frequencies.csv")?, k, &m, &summaries::frequency_posterior(s, k, &m)?)?;
    io::write_signal(create(out, "signal.csv")?, &summaries::estimated_signal(s, n)?)?;
    io::write_power_phase(create(out, "power_phase.csv")?, &summaries::power_phase_table(s, k, &m)?)?;
    let peak = summaries::time_varying_peak(s, n)?;
    io::write_peak_curve(create(out, "peak_curve.csv")?, &peak)?;

    let m_label: Vec<String> = m.iter().map(usize::to_string).collect();
    println!("summarized {} samples at k = {k}, m = ({})", s.len(), m_label.join(", "));
    if let Some(path) = truth {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let truth: Truth = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        match truth {
            Truth::SlowlyVaryingAr { peak_curve, .. } if peak_curve.len() == n => {
                println!("peak RSS = {}", summaries::rss(&peak, &peak_curve));
            }
            _ => bail!("{} has no peak curve of length {n}", path.display()),
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            model,
            seed,
            out,
            scale_t_errors,
            ar_burn_in,
        } => simulate(
            &model,
            seed,
            &out,
            GeneratorOptions {
                scale_t_errors,
                ar_burn_in,
            },
        ),
        Command::Fit {
            input,
            out,
            config,
            hyper,
            chain,
        } => fit(&input, &out, config.as_deref(), &hyper, &chain),
        Command::Summarize {
            samples,
            out,
            k,
            m,
            bin_width,
            truth,
        } => summarize(&samples, &out, k, m, bin_width, truth.as_deref()),
    }
}
