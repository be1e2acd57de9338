//! Empirical frequency tables from text and FASTA input.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::simplex::ProbVector;

pub use crate::sampling::sample_uniform_simplex;

/// Largest supported k-mer length (`4^k` counters).
pub const MAX_KMER: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pub label: String,
    pub symbols: Vec<String>,
    pub counts: Vec<u64>,
    pub source: String,
}

impl EmpiricalDistribution {
    pub fn new(label: &str, symbols: Vec<String>, counts: Vec<u64>, source: &str) -> Result<Self> {
        if symbols.len() != counts.len() {
            return Err(Error::Parameter(
                "symbol and count lists differ in length".into(),
            ));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::EmptyDistribution);
        }
        Ok(EmpiricalDistribution {
            label: label.into(),
            symbols,
            counts,
            source: source.into(),
        })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().map(|&c| c as u128).sum()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.total() as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    pub fn prob_vector(&self) -> Result<ProbVector> {
        ProbVector::new(self.frequencies())
    }

    /// `symbol,count,frequency` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["symbol", "count", "frequency"])
            .map_err(io)?;
        for ((s, c), f) in self
            .symbols
            .iter()
            .zip(&self.counts)
            .zip(self.frequencies())
        {
            w.write_record([s.as_str(), &c.to_string(), &format!("{f:?}")])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Zipf law `p_i ∝ i^{-exponent}` on `k` symbols, a stand-in for word counts.
pub fn zipf_frequencies(k: usize, exponent: f64) -> Result<ProbVector> {
    if k < 1 || !exponent.is_finite() || exponent < 0.0 {
        return Err(Error::Parameter(format!(
            "zipf needs k >= 1 and a finite exponent >= 0, got k={k}, {exponent}"
        )));
    }
    ProbVector::from_weights((1..=k).map(|i| (i as f64).powf(-exponent)).collect())
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Counts case-folded alphanumeric runs and single punctuation characters.
pub fn word_frequencies<R: BufRead>(mut input: R) -> Result<EmpiricalDistribution> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        let mut word = String::new();
        for c in line.chars() {
            if is_token_char(c) {
                word.extend(c.to_lowercase());
                continue;
            }
            if !word.is_empty() {
                *counts.entry(std::mem::take(&mut word)).or_default() += 1;
            }
            if !c.is_whitespace() && !c.is_control() {
                *counts.entry(c.to_lowercase().collect()).or_default() += 1;
            }
        }
        if !word.is_empty() {
            *counts.entry(word).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let (symbols, counts): (Vec<String>, Vec<u64>) = counts.into_iter().unzip();
    EmpiricalDistribution::new("words", symbols, counts, "text")
}

fn base_index(b: u8) -> Option<usize> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

/// All `4^k` k-mers in lexicographic `ACGT` order.
pub fn kmer_symbols(k: usize) -> Vec<String> {
    let n = 1usize << (2 * k);
    (0..n)
        .map(|mut i| {
            let mut s = vec![b'A'; k];
            for pos in (0..k).rev() {
                s[pos] = b"ACGT"[i & 3];
                i >>= 2;
            }
            String::from_utf8(s).unwrap()
        })
        .collect()
}

/// Counts k-mers over uppercase `ACGT` windows. Windows touching `N` or a
/// lowercase (soft-masked) base are skipped; windows may span line breaks but
/// not records.
pub fn kmer_frequencies<R: BufRead>(mut input: R, k: usize) -> Result<EmpiricalDistribution> {
    if k == 0 || k > MAX_KMER {
        return Err(Error::Parameter(format!(
            "k must be in 1..={MAX_KMER}, got {k}"
        )));
    }
    let mask = (1usize << (2 * k)) - 1;
    let mut counts = vec![0u64; 1 << (2 * k)];
    let mut run = 0usize;
    let mut code = 0usize;
    let mut in_record = false;
    let mut line = Vec::new();
    let mut lineno = 0;
    loop {
        line.clear();
        if input.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        lineno += 1;
        while matches!(line.last(), Some(b'\n' | b'\r')) {
            line.pop();
        }
        if line.first() == Some(&b'>') {
            let name = &line[1..];
            if name.iter().all(|c| c.is_ascii_whitespace())
                || name.first().is_some_and(|c| c.is_ascii_whitespace())
            {
                return Err(Error::parse(lineno, "FASTA header without an identifier"));
            }
            in_record = true;
            run = 0;
            code = 0;
            continue;
        }
        if line.iter().all(|c| c.is_ascii_whitespace()) {
            continue;
        }
        if !in_record {
            return Err(Error::parse(
                lineno,
                "sequence data before the first '>' header",
            ));
        }
        for &c in &line {
            match base_index(c) {
                Some(i) => {
                    code = ((code << 2) | i) & mask;
                    run += 1;
                    if run >= k {
                        counts[code] += 1;
                    }
                }
                None => {
                    if !matches!(c, b'N' | b'a' | b'c' | b'g' | b't' | b'n') {
                        return Err(Error::parse(
                            lineno,
                            format!("unexpected sequence character {:?}", c as char),
                        ));
                    }
                    run = 0;
                    code = 0;
                }
            }
        }
    }
    EmpiricalDistribution::new(&format!("{k}-mers"), kmer_symbols(k), counts, "fasta")
}

const TABLE_MAGIC: &[u8; 4] = b"KQCT";
const TABLE_VERSION: u8 = 1;
const MAX_SYMBOL_LEN: u64 = 1 << 16;

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn get_varint(data: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let &byte = data
            .get(*pos)
            .ok_or_else(|| Error::parse(0, "truncated varint"))?;
        *pos += 1;
        let bits = (byte & 0x7f) as u64;
        if shift == 63 && bits > 1 {
            return Err(Error::parse(0, "varint overflows u64"));
        }
        v |= bits << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(Error::parse(0, "varint too long"))
}

/// Compact binary count table: magic, version, varint entry count, then
/// `(varint length, UTF-8 symbol, varint count)` per entry.
pub fn encode_count_table(d: &EmpiricalDistribution) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(TABLE_MAGIC);
    out.push(TABLE_VERSION);
    put_varint(&mut out, d.k() as u64);
    for (s, &c) in d.symbols.iter().zip(&d.counts) {
        put_varint(&mut out, s.len() as u64);
        out.extend_from_slice(s.as_bytes());
        put_varint(&mut out, c);
    }
    out
}

pub fn decode_count_table(data: &[u8]) -> Result<EmpiricalDistribution> {
    if data.len() < 5 || &data[..4] != TABLE_MAGIC {
        return Err(Error::parse(0, "not a count table"));
    }
    if data[4] != TABLE_VERSION {
        return Err(Error::parse(
            0,
            format!("unsupported count table version {}", data[4]),
        ));
    }
    let mut pos = 5;
    let n = get_varint(data, &mut pos)?;
    // every entry needs at least two bytes
    if n > (data.len() - pos) as u64 / 2 {
        return Err(Error::parse(0, "entry count exceeds payload"));
    }
    let mut symbols = Vec::with_capacity(n as usize);
    let mut counts = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let len = get_varint(data, &mut pos)?;
        if len > MAX_SYMBOL_LEN || len > (data.len() - pos) as u64 {
            return Err(Error::parse(0, "symbol length exceeds payload"));
        }
        let bytes = &data[pos..pos + len as usize];
        pos += len as usize;
        let s = std::str::from_utf8(bytes).map_err(|_| Error::parse(0, "symbol is not UTF-8"))?;
        symbols.push(s.to_string());
        counts.push(get_varint(data, &mut pos)?);
    }
    if pos != data.len() {
        return Err(Error::parse(0, "trailing bytes after count table"));
    }
    EmpiricalDistribution::new("table", symbols, counts, "count-table")
}
