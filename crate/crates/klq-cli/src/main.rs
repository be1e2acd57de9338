use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use klq::compander::{build_compander, Compander, CompanderSpec};
use klq::constants::MaximinConstants;
use klq::datasets::zipf_frequencies;
use klq::density::{maximin_density, Density};
use klq::distill::{
    brute_force_distiller, brute_force_quantizer_loss, degrading_cost_bounds,
    distiller_from_quantizer,
};
use klq::harness::{
    badprior_study, fit_scaling, load_dataset, log_grid, power_sweep, random_joint, run,
    worstcase_check, write_scaling_csv, ConstantsCache, DecodeChoice, ExperimentConfig, Method,
    Source,
};
use klq::loss::{asymptotic_loss, convergence_probe};
use klq::quantizer::Quantizer;
use klq::records::{parse_joint_csv, parse_vector, write_worstcase_csv, CodeFile};
use klq::simplex::ProbVector;
use klq::worstcase::BoundMethod;
use klq::Error;

#[derive(Parser)]
#[command(
    name = "klq",
    version,
    about = "Quantize probability vectors and measure KL loss"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize a probability vector file into a packed code file
    Quantize(QuantizeArgs),
    /// Reconstruct a normalized vector from a code file
    Dequantize(DequantizeArgs),
    /// Expected loss over methods, alphabet sizes and bit widths
    Eval(EvalArgs),
    /// Print maximin constants c_K, a_K, b_K
    Constants(ConstantsArgs),
    /// Worst-case bounds and an adversarial search against them
    Worstcase(WorstcaseArgs),
    /// Degrading-cost bounds and an exhaustive small-instance check
    Distill(DistillArgs),
    /// N² times the single-letter loss for a list of granularities
    Convergence(ConvergenceArgs),
    /// Raw-loss scaling of the uniform quantizer under a hard prior
    Badprior(BadpriorArgs),
    /// Power-compander loss across exponents on one vector
    PowerSweep(PowerSweepArgs),
}

/// Integer accepting `1e5` style input.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("not a nonnegative integer: {s:?}"))
    }
}

#[derive(Args)]
struct OutArg {
    /// Output file; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn writer(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

#[derive(Args)]
struct QuantizeArgs {
    /// Vector file: numbers separated by commas or whitespace
    #[arg(long)]
    input: PathBuf,
    /// Compander record, e.g. "approx_minimax K=1000"; defaults to approximate minimax for the vector length
    #[arg(long)]
    compander: Option<String>,
    #[arg(long, default_value_t = 8)]
    bits: u32,
    /// Rescale the input to sum to one
    #[arg(long)]
    normalize: bool,
    /// Encode exact zeros like any other value
    #[arg(long)]
    no_zero_bin: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DequantizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct EvalArgs {
    /// Comma-separated: truncation, approx_minimax, minimax, power[:s], float, beta[:alpha], l2sq, l1
    #[arg(long, value_delimiter = ',', required = true)]
    methods: Vec<String>,
    /// Alphabet sizes for synthetic uniform-simplex data
    #[arg(long = "K", value_delimiter = ',', value_parser = parse_count)]
    k: Vec<u64>,
    /// Bit widths; N = 2^b
    #[arg(long, value_delimiter = ',', default_values_t = [8u32, 16])]
    bits: Vec<u32>,
    #[arg(long, default_value = "midpoint")]
    decode: String,
    #[arg(long, default_value_t = 1000, value_parser = parse_count)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Text, FASTA or count-table files used instead of synthetic data
    #[arg(long)]
    dataset: Vec<PathBuf>,
    #[arg(long = "kmer-k", default_value_t = 4)]
    kmer_k: usize,
    /// Text file of solved maximin constants, read and extended
    #[arg(long)]
    constants_cache: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long = "K", value_delimiter = ',', value_parser = parse_count, required = true)]
    k: Vec<u64>,
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct WorstcaseArgs {
    #[arg(long = "K", value_parser = parse_count, default_value = "1000")]
    k: u64,
    #[arg(long, default_value_t = 8)]
    bits: u32,
    /// Comma-separated: minimax, approx_minimax, approx_minimax_sharp, power
    #[arg(long, value_delimiter = ',', default_values_t = ["minimax".to_string(), "approx_minimax".to_string(), "power".to_string()])]
    methods: Vec<String>,
    /// Candidate vectors evaluated per method
    #[arg(long, default_value_t = 20000, value_parser = parse_count)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct DistillArgs {
    #[arg(long = "K", value_parser = parse_count, default_value = "10")]
    k: u64,
    /// Number of labels, as a float so values like 1e97 work
    #[arg(long = "M", default_value_t = 1e12)]
    m: f64,
    /// Joint distribution CSV (a,b,probability) for the exhaustive check
    #[arg(long)]
    joint: Option<PathBuf>,
    /// Labels for the exhaustive check
    #[arg(long = "labels", default_value_t = 2)]
    labels: usize,
    /// Granularity of the compander used to induce a distiller
    #[arg(long = "N", default_value_t = 2)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Density: beta:A,B | uniform:LO,HI | maximin:K
    #[arg(long)]
    density: String,
    /// Compander record
    #[arg(long)]
    compander: String,
    /// Bit widths; N = 2^b
    #[arg(long, value_delimiter = ',', default_values_t = [4u32, 6, 8, 10, 12, 14, 16])]
    bits: Vec<u32>,
}

#[derive(Args)]
struct BadpriorArgs {
    #[arg(long = "K", value_parser = parse_count, default_value = "256")]
    k: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [6u32, 7, 8, 9, 10, 11, 12])]
    bits: Vec<u32>,
    #[arg(long, default_value_t = 400, value_parser = parse_count)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct PowerSweepArgs {
    /// Dataset file; a Zipf vector of size --K when omitted
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long = "kmer-k", default_value_t = 4)]
    kmer_k: usize,
    #[arg(long = "K", value_parser = parse_count, default_value = "10000")]
    k: u64,
    #[arg(long, default_value_t = 1.0)]
    zipf_exponent: f64,
    #[arg(long, default_value_t = 8)]
    bits: u32,
    #[arg(long, default_value_t = 0.02)]
    s_min: f64,
    #[arg(long, default_value_t = 1.0)]
    s_max: f64,
    #[arg(long, default_value_t = 41)]
    points: usize,
    #[command(flatten)]
    out: OutArg,
}

fn parse_density(s: &str) -> klq::Result<Density> {
    let (kind, params) = s
        .split_once(':')
        .ok_or_else(|| Error::Usage(format!("bad density {s:?}")))?;
    let nums: Vec<f64> = params
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad density parameter {t:?}")))
        })
        .collect::<klq::Result<_>>()?;
    match (kind, nums.as_slice()) {
        ("beta", [a, b]) => Density::beta(*a, *b),
        ("uniform", [lo, hi]) => Density::uniform(*lo, *hi),
        ("maximin", [k]) if k.fract() == 0.0 && *k >= 0.0 => {
            Ok(maximin_density(MaximinConstants::solve(*k as u64)?))
        }
        _ => Err(Error::Usage(format!("bad density {s:?}"))),
    }
}

fn bound_method(s: &str) -> klq::Result<BoundMethod> {
    match s {
        "minimax" => Ok(BoundMethod::Minimax),
        "approx_minimax" => Ok(BoundMethod::ApproxMinimax),
        "approx_minimax_sharp" => Ok(BoundMethod::ApproxMinimaxSharp),
        "power" => Ok(BoundMethod::Power),
        _ => Err(Error::Usage(format!("unknown bound method {s:?}"))),
    }
}

fn check_bits(b: u32) -> klq::Result<u64> {
    if (1..=32).contains(&b) {
        Ok(1u64 << b)
    } else {
        Err(Error::Usage(format!("bit width {b} outside 1..=32")))
    }
}

fn quantize(a: QuantizeArgs) -> klq::Result<()> {
    let mut x = parse_vector(&fs::read_to_string(&a.input)?)?;
    if a.normalize {
        x = ProbVector::from_weights(x)?.into_inner();
    }
    let x = ProbVector::new(x)?;
    let spec: CompanderSpec = match &a.compander {
        Some(s) => s.parse()?,
        None => CompanderSpec::ApproxMinimax { k: x.len() as u64 },
    };
    let q = Quantizer::midpoint(build_compander(&spec)?, check_bits(a.bits)?)?
        .with_zero_bin(!a.no_zero_bin)
        .cached()?;
    let qv = q.quantize_vector(&x)?;
    let file = CodeFile {
        spec,
        levels: q.levels(),
        zero_bin: q.zero_bin(),
        codes: qv.codes,
    };
    fs::write(&a.out, file.encode()?)?;
    Ok(())
}

fn dequantize(a: DequantizeArgs) -> klq::Result<()> {
    let file = CodeFile::decode(&fs::read(&a.input)?)?;
    let q = Quantizer::midpoint(build_compander(&file.spec)?, file.levels)?
        .with_zero_bin(file.zero_bin);
    let raw: Vec<f64> = file
        .codes
        .iter()
        .map(|&c| q.decode(c))
        .collect::<klq::Result<_>>()?;
    let z = ProbVector::from_weights(raw)?;
    let mut w = a.out.writer()?;
    for v in z.as_slice() {
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> klq::Result<()> {
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<klq::Result<Vec<_>>>()?;
    let source = if a.dataset.is_empty() {
        Source::Synthetic(a.k.iter().map(|&k| k as usize).collect())
    } else {
        if !a.k.is_empty() {
            return Err(Error::Usage("--K and --dataset are exclusive".into()));
        }
        Source::Datasets {
            paths: a.dataset.clone(),
            kmer_k: a.kmer_k,
        }
    };
    let config = ExperimentConfig {
        methods,
        source,
        bits: a.bits.clone(),
        decode: a.decode.parse::<DecodeChoice>()?,
        trials: a.trials as usize,
        seed: a.seed,
        constants_cache: a.constants_cache.clone(),
    };
    let output = run(&config)?;
    let mut w = a.out.writer()?;
    output.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn constants(a: ConstantsArgs) -> klq::Result<()> {
    let mut cache = match &a.cache {
        Some(p) => ConstantsCache::load(p)?,
        None => ConstantsCache::default(),
    };
    let mut out = io::stdout().lock();
    for &k in &a.k {
        writeln!(out, "{}", cache.get(k)?)?;
    }
    if let Some(p) = &a.cache {
        cache.save(p)?;
    }
    Ok(())
}

fn worstcase(a: WorstcaseArgs) -> klq::Result<()> {
    let n = check_bits(a.bits)?;
    let mut rows = Vec::new();
    for name in &a.methods {
        let method = bound_method(name)?;
        let (bound, found) = worstcase_check(method, a.k as usize, n, a.budget as usize, a.seed)?;
        rows.push((bound, found.kl));
    }
    let mut w = a.out.writer()?;
    write_worstcase_csv(&mut w, &rows)?;
    for (b, _) in &rows {
        if let Some(reason) = &b.reason {
            eprintln!("{}: bound unavailable ({reason})", b.method.name());
        }
    }
    Ok(())
}

fn distill(a: DistillArgs) -> klq::Result<()> {
    let mut out = io::stdout().lock();
    let b = degrading_cost_bounds(a.k, a.m)?;
    let show = |v: Option<f64>| v.map_or("unavailable".to_string(), |v| format!("{v:e}"));
    writeln!(out, "K={} M={:e}", a.k, a.m)?;
    writeln!(out, "compander bound: {}", show(b.compander))?;
    writeln!(out, "linear bound: {}", show(b.linear))?;
    writeln!(out, "logarithmic bound: {:e}", b.logarithmic)?;
    writeln!(out, "smallest: {}", b.smallest())?;

    let j = match &a.joint {
        Some(p) => parse_joint_csv(&fs::read_to_string(p)?)?,
        None => random_joint(3, 5, a.seed)?,
    };
    let (_, best) = brute_force_distiller(&j, a.labels)?;
    let quant = brute_force_quantizer_loss(&j, a.labels)?;
    writeln!(out, "I(A;B) = {:?}", j.mutual_information())?;
    writeln!(out, "optimal distiller loss (M={}): {best:?}", a.labels)?;
    writeln!(out, "optimal cell-quantizer KL (M={}): {quant:?}", a.labels)?;
    let k = j.alphabet_a() as u64;
    let compander = if k >= 5 {
        Compander::approx_minimax(k)?
    } else {
        Compander::power(0.5)?
    };
    let q = Quantizer::midpoint(compander, a.n)?;
    match distiller_from_quantizer(&j, &q, usize::MAX) {
        Ok(d) => writeln!(
            out,
            "compander distiller (N={}): cells={} loss={:?} quantizer_kl={:?}",
            a.n, d.cells, d.info_loss, d.quantizer_kl
        )?,
        Err(e) => writeln!(out, "compander distiller (N={}): {e}", a.n)?,
    }
    Ok(())
}

fn convergence(a: ConvergenceArgs) -> klq::Result<()> {
    let p = parse_density(&a.density)?;
    let spec: CompanderSpec = a.compander.parse()?;
    let f = build_compander(&spec)?;
    let ns = a
        .bits
        .iter()
        .map(|&b| check_bits(b))
        .collect::<klq::Result<Vec<_>>>()?;
    let limit = asymptotic_loss(&p, &f);
    let values = convergence_probe(&p, &f, &ns)?;
    let mut out = io::stdout().lock();
    writeln!(out, "N,scaled_loss,ratio")?;
    for (n, v) in ns.iter().zip(values) {
        let ratio = limit.as_ref().map_or(f64::NAN, |l| v / l);
        writeln!(out, "{n},{v:?},{ratio:?}")?;
    }
    match limit {
        Ok(l) => eprintln!("asymptotic loss {l:?}"),
        Err(e) => eprintln!("asymptotic loss unavailable: {e}"),
    }
    Ok(())
}

fn badprior(a: BadpriorArgs) -> klq::Result<()> {
    let ns = a
        .bits
        .iter()
        .map(|&b| check_bits(b))
        .collect::<klq::Result<Vec<_>>>()?;
    let points = badprior_study(a.k as usize, &ns, a.trials as usize, a.seed)?;
    let mut w = a.out.writer()?;
    write_scaling_csv(&mut w, &points)?;
    for method in ["truncation", "approx_minimax"] {
        let fit = fit_scaling(&points, method)?;
        eprintln!(
            "{method}: N^2 raw = {:.4e} + {:.4e} ln N (t = {:.2})",
            fit.intercept,
            fit.slope,
            fit.t_stat()
        );
    }
    Ok(())
}

fn sweep(a: PowerSweepArgs) -> klq::Result<()> {
    let x = match &a.dataset {
        Some(p) => load_dataset(p, a.kmer_k)?.frequencies(),
        None => zipf_frequencies(a.k as usize, a.zipf_exponent)?.into_inner(),
    };
    check_bits(a.bits)?;
    let grid = log_grid(a.s_min, a.s_max, a.points);
    let rows = power_sweep(&x, &grid, a.bits)?;
    let mut w = a.out.writer()?;
    writeln!(w, "s,K,N,nats,bits_per_entry")?;
    for (s, r) in &rows {
        writeln!(
            w,
            "{s:?},{},{},{:?},{:?}",
            r.k, r.n, r.nats, r.bits_per_entry
        )?;
    }
    if let Some((s, _)) = rows.iter().min_by(|a, b| a.1.nats.total_cmp(&b.1.nats)) {
        eprintln!(
            "best s = {s:.4}, 1/ln K = {:.4}",
            1.0 / (x.len() as f64).ln()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Quantize(a) => quantize(a),
        Command::Dequantize(a) => dequantize(a),
        Command::Eval(a) => eval(a),
        Command::Constants(a) => constants(a),
        Command::Worstcase(a) => worstcase(a),
        Command::Distill(a) => distill(a),
        Command::Convergence(a) => convergence(a),
        Command::Badprior(a) => badprior(a),
        Command::PowerSweep(a) => sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
