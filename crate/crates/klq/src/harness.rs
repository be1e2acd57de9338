//! Experiment driver: method × alphabet × bit-width grids with seeded output.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::compander::Compander;
use crate::constants::{parse_constants_cache, MaximinConstants};
use crate::datasets::{
    decode_count_table, kmer_frequencies, word_frequencies, EmpiricalDistribution,
};
use crate::density::Density;
use crate::distill::JointDistribution;
use crate::error::{Error, Result};
use crate::float_format::FloatFormat;
use crate::loss::{
    expected_loss_with, mean_and_stderr, single_letter_loss, vector_losses, LossReport, VectorCodec,
};
use crate::quantizer::{DecodeMode, Quantizer};
use crate::records::write_loss_csv;
use crate::sampling::{sample_uniform_simplex, Prior};
use crate::worstcase::{
    adversarial_search, worstcase_bound, BoundMethod, SearchResult, WorstCaseBound,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Truncation,
    ApproxMinimax,
    Minimax,
    /// `s = 1/ln K` when unset.
    Power(Option<f64>),
    /// Minifloat at 8 bits, bfloat16 at 16.
    Float,
    /// Dirichlet parameter of the matched prior, 1 for the uniform simplex.
    Beta(f64),
    L2Sq,
    L1,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Truncation => "truncation".into(),
            Method::ApproxMinimax => "approx_minimax".into(),
            Method::Minimax => "minimax".into(),
            Method::Power(None) => "power".into(),
            Method::Power(Some(s)) => format!("power:{s}"),
            Method::Float => "float".into(),
            Method::Beta(a) if *a == 1.0 => "beta".into(),
            Method::Beta(a) => format!("beta:{a}"),
            Method::L2Sq => "l2sq".into(),
            Method::L1 => "l1".into(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `name` or `name:param` for `power` and `beta`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| Error::Usage(format!("bad parameter {p:?} for {name}")))
        };
        let m = match (name.trim(), param) {
            ("truncation", None) => Method::Truncation,
            ("approx_minimax", None) => Method::ApproxMinimax,
            ("minimax", None) => Method::Minimax,
            ("power", None) => Method::Power(None),
            ("power", Some(p)) => Method::Power(Some(num(p)?)),
            ("float", None) => Method::Float,
            ("beta", None) => Method::Beta(1.0),
            ("beta", Some(p)) => Method::Beta(num(p)?),
            ("l2sq", None) => Method::L2Sq,
            ("l1", None) => Method::L1,
            _ => return Err(Error::Usage(format!("unknown method {s:?}"))),
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeChoice {
    Midpoint,
    Centroid,
}

impl FromStr for DecodeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(DecodeChoice::Midpoint),
            "centroid" => Ok(DecodeChoice::Centroid),
            _ => Err(Error::Usage(format!(
                "decode mode must be midpoint or centroid, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Uniform-simplex draws at each alphabet size.
    Synthetic(Vec<usize>),
    /// One vector per file: FASTA k-mers, a binary count table, or word counts.
    Datasets { paths: Vec<PathBuf>, kmer_k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub source: Source,
    pub bits: Vec<u32>,
    pub decode: DecodeChoice,
    pub trials: usize,
    pub seed: u64,
    pub constants_cache: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Usage("no methods given".into()));
        }
        if self.bits.is_empty() {
            return Err(Error::Usage("no bit widths given".into()));
        }
        if let Some(b) = self.bits.iter().find(|b| !(1..=32).contains(*b)) {
            return Err(Error::Usage(format!("bit width {b} outside 1..=32")));
        }
        if self.trials == 0 {
            return Err(Error::Usage("trials must be at least 1".into()));
        }
        match &self.source {
            Source::Synthetic(ks) => {
                if ks.is_empty() {
                    return Err(Error::Usage("no alphabet sizes given".into()));
                }
                if let Some(k) = ks.iter().find(|&&k| k < 2) {
                    return Err(Error::Usage(format!("alphabet size {k} below 2")));
                }
            }
            Source::Datasets { paths, .. } => {
                if paths.is_empty() {
                    return Err(Error::Usage("no dataset paths given".into()));
                }
                if self.decode == DecodeChoice::Centroid {
                    return Err(Error::Usage(
                        "centroid decoding needs a prior; use synthetic data".into(),
                    ));
                }
            }
        }
        if self.methods.contains(&Method::Float) {
            if let Some(b) = self
                .bits
                .iter()
                .find(|&&b| FloatFormat::for_bits(b).is_none())
            {
                return Err(Error::Usage(format!(
                    "float method supports 8 or 16 bits, got {b}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical one-line description, hashed into the output header.
    pub fn canonical(&self) -> String {
        let methods: Vec<String> = self.methods.iter().map(Method::name).collect();
        let source = match &self.source {
            Source::Synthetic(ks) => format!("synthetic K={ks:?}"),
            Source::Datasets { paths, kmer_k } => format!("datasets {paths:?} kmer_k={kmer_k}"),
        };
        format!(
            "methods={methods:?} {source} bits={:?} decode={:?} trials={} seed={}",
            self.bits, self.decode, self.trials, self.seed
        )
    }

    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Maximin constants keyed by `K`, persisted one record per line.
#[derive(Debug, Clone, Default)]
pub struct ConstantsCache {
    entries: BTreeMap<u64, MaximinConstants>,
    dirty: bool,
}

impl ConstantsCache {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(path)?;
        let entries = parse_constants_cache(&text)?
            .into_iter()
            .map(|c| (c.k, c))
            .collect();
        Ok(ConstantsCache {
            entries,
            dirty: false,
        })
    }

    pub fn get(&mut self, k: u64) -> Result<MaximinConstants> {
        if let Some(c) = self.entries.get(&k) {
            return Ok(*c);
        }
        let c = MaximinConstants::solve(k)?;
        self.entries.insert(k, c);
        self.dirty = true;
        Ok(c)
    }

    pub fn entries(&self) -> impl Iterator<Item = &MaximinConstants> {
        self.entries.values()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if !self.dirty && path.exists() {
            return Ok(());
        }
        let mut text = String::new();
        for c in self.entries.values() {
            text.push_str(&c.to_string());
            text.push('\n');
        }
        fs::write(path, text)?;
        Ok(())
    }
}

/// Reads a dataset by extension or magic: `.fa`/`.fasta`/`.fna` as FASTA,
/// `KQCT` count tables, otherwise UTF-8 text.
pub fn load_dataset(path: &Path, kmer_k: usize) -> Result<EmpiricalDistribution> {
    let mut file = fs::File::open(path)?;
    let mut head = [0u8; 4];
    let n = file.read(&mut head)?;
    drop(file);
    let name = path.display().to_string();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    let mut d = if n == 4 && &head == b"KQCT" {
        decode_count_table(&fs::read(path)?)?
    } else if matches!(ext.as_str(), "fa" | "fasta" | "fna") {
        kmer_frequencies(BufReader::new(fs::File::open(path)?), kmer_k)?
    } else {
        word_frequencies(BufReader::new(fs::File::open(path)?))?
    };
    d.source = name;
    Ok(d)
}

/// Builds the codec for one grid point. `prior` is required for centroid decoding.
pub fn build_codec(
    method: Method,
    k: usize,
    bits: u32,
    decode: DecodeChoice,
    prior: Option<&Density>,
    cache: &mut ConstantsCache,
) -> Result<VectorCodec> {
    let ku = k as u64;
    let compander = match method {
        Method::Float => {
            let fmt = FloatFormat::for_bits(bits).ok_or_else(|| {
                Error::Usage(format!("float method supports 8 or 16 bits, got {bits}"))
            })?;
            return Ok(VectorCodec::Float(fmt));
        }
        Method::Truncation => Compander::identity(),
        Method::ApproxMinimax => Compander::approx_minimax(ku)?,
        Method::Minimax => Compander::minimax(cache.get(ku)?),
        Method::Power(s) => Compander::power(s.unwrap_or(1.0 / (k as f64).ln()))?,
        Method::Beta(alpha) => Compander::beta(ku, alpha)?,
        Method::L2Sq => Compander::l2sq(ku)?,
        Method::L1 => Compander::l1(ku)?,
    };
    let mode = match decode {
        DecodeChoice::Midpoint => DecodeMode::Midpoint,
        DecodeChoice::Centroid => DecodeMode::Centroid(Arc::new(
            prior
                .ok_or_else(|| Error::Usage("centroid decoding needs a prior".into()))?
                .clone(),
        )),
    };
    let levels = 1u64 << bits;
    Ok(VectorCodec::Compander(
        Quantizer::new(compander, levels, mode)?.cached()?,
    ))
}

/// Rows of one run with the metadata written above the CSV body.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub header: Vec<String>,
    pub reports: Vec<LossReport>,
}

impl RunOutput {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for line in &self.header {
            writeln!(out, "# {line}")?;
        }
        write_loss_csv(out, &self.reports)
    }

    /// The CSV body without metadata.
    pub fn body(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_loss_csv(&mut buf, &self.reports)?;
        Ok(buf)
    }
}

fn method_label(method: Method, decode: DecodeChoice) -> String {
    match (method, decode) {
        (Method::Float, _) | (_, DecodeChoice::Midpoint) => method.name(),
        (_, DecodeChoice::Centroid) => format!("{}+centroid", method.name()),
    }
}

/// Runs the grid in config order. Synthetic data at a given `K` uses the same
/// draws for every method and width.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut cache = match &config.constants_cache {
        Some(p) => ConstantsCache::load(p)?,
        None => ConstantsCache::default(),
    };
    let mut reports = Vec::new();
    match &config.source {
        Source::Synthetic(ks) => {
            for &k in ks {
                let prior = Prior::UniformSimplex { k };
                let marginal = match config.decode {
                    DecodeChoice::Centroid => Some(prior.marginal()?),
                    DecodeChoice::Midpoint => None,
                };
                for &bits in &config.bits {
                    for &method in &config.methods {
                        let codec = build_codec(
                            method,
                            k,
                            bits,
                            config.decode,
                            marginal.as_ref(),
                            &mut cache,
                        )?;
                        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                        rng.set_stream(k as u64);
                        let mut r = expected_loss_with(
                            |r: &mut ChaCha8Rng| {
                                sample_uniform_simplex(k, r).map(|v| v.into_inner())
                            },
                            k,
                            &codec,
                            config.trials,
                            &mut rng,
                        )?;
                        r.method = method_label(method, config.decode);
                        reports.push(r);
                    }
                }
            }
        }
        Source::Datasets { paths, kmer_k } => {
            for path in paths {
                let d = load_dataset(path, *kmer_k)?;
                let x = d.frequencies();
                for &bits in &config.bits {
                    for &method in &config.methods {
                        let codec =
                            build_codec(method, d.k(), bits, config.decode, None, &mut cache)?;
                        reports.push(dataset_report(
                            &codec,
                            &x,
                            &method_label(method, config.decode),
                        )?);
                    }
                }
            }
        }
    }
    if let Some(p) = &config.constants_cache {
        cache.save(p)?;
    }
    let mut header = vec![
        format!("seed={}", config.seed),
        format!("config_hash={:016x}", config.hash()),
        format!("config={}", config.canonical()),
    ];
    header.extend(cache.entries().map(|c| format!("constants {c}")));
    Ok(RunOutput { header, reports })
}

/// Loss of a single fixed vector; an infinite divergence is counted, not averaged.
pub fn dataset_report(codec: &VectorCodec, x: &[f64], method: &str) -> Result<LossReport> {
    let (mut codes, mut raw) = (Vec::new(), Vec::new());
    let k = x.len();
    match vector_losses(codec, x, &mut codes, &mut raw) {
        Ok((kl, raw_loss)) => Ok(LossReport::new(
            method,
            k,
            codec.levels(),
            kl,
            raw_loss,
            1,
            0.0,
        )),
        Err(Error::InfiniteDivergence { .. }) => {
            let mut r = LossReport::new(
                method,
                k,
                codec.levels(),
                f64::INFINITY,
                f64::INFINITY,
                1,
                0.0,
            );
            r.infinite_events = 1;
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

/// Power-compander loss of one vector over a grid of exponents, midpoint decoding.
pub fn power_sweep(x: &[f64], s_grid: &[f64], bits: u32) -> Result<Vec<(f64, LossReport)>> {
    if !(1..=32).contains(&bits) {
        return Err(Error::Parameter(format!("bit width {bits} outside 1..=32")));
    }
    s_grid
        .iter()
        .map(|&s| {
            let q = Quantizer::midpoint(Compander::power(s)?, 1u64 << bits)?.cached()?;
            let r = dataset_report(&VectorCodec::Compander(q), x, &format!("power:{s}"))?;
            Ok((s, r))
        })
        .collect()
}

/// `n` log-spaced exponents between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// One row of the bad-prior study: `N² · raw loss` with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub method: String,
    pub n: u64,
    pub raw: f64,
    pub raw_stderr: f64,
    pub scaled: f64,
    pub scaled_stderr: f64,
}

/// Raw loss under the paired uniform prior on `[0, 2/K]`, centroid decoding,
/// for the uniform quantizer and the approximate minimax compander.
pub fn badprior_study(k: usize, ns: &[u64], trials: usize, seed: u64) -> Result<Vec<ScalingPoint>> {
    if k % 2 == 1 || k < 6 {
        return Err(Error::Parameter(format!(
            "bad-prior study needs even K >= 6, got {k}"
        )));
    }
    if trials < 2 {
        return Err(Error::Parameter(
            "need at least two trials for a standard error".into(),
        ));
    }
    let prior = Prior::UniformBad { k };
    let marginal = Arc::new(prior.marginal()?);
    let mut out = Vec::new();
    for (name, compander) in [
        ("truncation", Compander::identity()),
        ("approx_minimax", Compander::approx_minimax(k as u64)?),
    ] {
        for &n in ns {
            let q = Quantizer::new(compander.clone(), n, DecodeMode::Centroid(marginal.clone()))?
                .cached()?;
            let codec = VectorCodec::Compander(q);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let raws = raw_losses(&prior, &codec, trials, &mut rng)?;
            let (raw, raw_stderr) = mean_and_stderr(&raws);
            let n2 = (n as f64).powi(2);
            out.push(ScalingPoint {
                method: name.into(),
                n,
                raw,
                raw_stderr,
                scaled: raw * n2,
                scaled_stderr: raw_stderr * n2,
            });
        }
    }
    Ok(out)
}

fn raw_losses(
    prior: &Prior,
    codec: &VectorCodec,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let (mut codes, mut raw) = (Vec::new(), Vec::new());
    (0..trials)
        .map(|_| {
            let x = prior.sample(rng)?;
            vector_losses(codec, x.as_slice(), &mut codes, &mut raw).map(|v| v.1)
        })
        .collect()
}

/// Exact raw loss `K · L̃(p, f, N)` for the study's single-letter marginal.
pub fn badprior_exact(k: usize, compander: &Compander, n: u64) -> Result<f64> {
    let p = Prior::UniformBad { k }.marginal()?;
    Ok(k as f64 * single_letter_loss(&p, compander, n)?)
}

/// Weighted least-squares fit `y = a + b·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_stderr: f64,
}

impl LineFit {
    pub fn t_stat(&self) -> f64 {
        self.slope / self.slope_stderr
    }
}

/// Fits `y = a + b t` with weights `1/σ²`; the slope error comes from the given
/// `σ`, not the residuals.
pub fn weighted_line_fit(t: &[f64], y: &[f64], sigma: &[f64]) -> Result<LineFit> {
    if t.len() != y.len() || t.len() != sigma.len() || t.len() < 2 {
        return Err(Error::Parameter(
            "line fit needs at least two matched points".into(),
        ));
    }
    if sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Parameter(
            "line fit needs positive standard errors".into(),
        ));
    }
    let (mut s, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&ti, &yi), &si) in t.iter().zip(y).zip(sigma) {
        let w = 1.0 / (si * si);
        s += w;
        st += w * ti;
        sy += w * yi;
        stt += w * ti * ti;
        sty += w * ti * yi;
    }
    let det = s * stt - st * st;
    if !(det > 0.0) {
        return Err(Error::Numerical("degenerate line fit".into()));
    }
    Ok(LineFit {
        intercept: (stt * sy - st * sty) / det,
        slope: (s * sty - st * sy) / det,
        slope_stderr: (s / det).sqrt(),
    })
}

/// Fits `N²·raw = a + b ln N` for one method of a bad-prior study.
pub fn fit_scaling(points: &[ScalingPoint], method: &str) -> Result<LineFit> {
    let pts: Vec<&ScalingPoint> = points.iter().filter(|p| p.method == method).collect();
    let t: Vec<f64> = pts.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.scaled).collect();
    let s: Vec<f64> = pts.iter().map(|p| p.scaled_stderr).collect();
    weighted_line_fit(&t, &y, &s)
}

pub fn write_scaling_csv<W: Write>(mut out: W, points: &[ScalingPoint]) -> Result<()> {
    writeln!(out, "method,N,raw_loss,raw_stderr,scaled,scaled_stderr")?;
    for p in points {
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?}",
            p.method, p.n, p.raw, p.raw_stderr, p.scaled, p.scaled_stderr
        )?;
    }
    Ok(())
}

/// Bound and best adversarial vector for one method at `(K, N)`.
pub fn worstcase_check(
    method: BoundMethod,
    k: usize,
    n: u64,
    budget: usize,
    seed: u64,
) -> Result<(WorstCaseBound, SearchResult)> {
    let ku = k as u64;
    let bound = worstcase_bound(method, ku, n);
    let compander = match method {
        BoundMethod::Minimax => Compander::minimax_for(ku)?,
        BoundMethod::ApproxMinimax | BoundMethod::ApproxMinimaxSharp => {
            Compander::approx_minimax(ku)?
        }
        BoundMethod::Power => Compander::power(1.0 / (k as f64).ln())?,
    };
    let q = Quantizer::midpoint(compander, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((bound, adversarial_search(&q, k, budget, &mut rng)?))
}

/// Seeded random joint distribution on `[K] × [|B|]`.
pub fn random_joint(k: usize, nb: usize, seed: u64) -> Result<JointDistribution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    JointDistribution::random(k, nb, &mut rng)
}
