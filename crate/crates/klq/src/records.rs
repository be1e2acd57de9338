//! File formats: packed code streams and CSV tables.

use std::io::{Read, Write};

use crate::compander::CompanderSpec;
use crate::distill::JointDistribution;
use crate::error::{Error, Result};
use crate::loss::LossReport;
use crate::worstcase::WorstCaseBound;

/// Bits per code for granularity `N`: `⌈log₂(N+1)⌉`, covering the zero code.
pub fn code_width(levels: u64) -> u32 {
    64 - levels.leading_zeros()
}

/// Packs codes least-significant bit first into little-endian bytes.
pub fn pack_codes(codes: &[u64], width: u32) -> Result<Vec<u8>> {
    if width == 0 || width > 64 {
        return Err(Error::Parameter(format!(
            "code width {width} outside 1..=64"
        )));
    }
    let total_bits = codes.len() as u128 * width as u128;
    let mut out = vec![0u8; total_bits.div_ceil(8) as usize];
    let mut bit = 0usize;
    for &c in codes {
        if width < 64 && c >> width != 0 {
            return Err(Error::Domain(format!(
                "code {c} does not fit in {width} bits"
            )));
        }
        for i in 0..width as usize {
            if (c >> i) & 1 == 1 {
                out[(bit + i) / 8] |= 1 << ((bit + i) % 8);
            }
        }
        bit += width as usize;
    }
    Ok(out)
}

pub fn unpack_codes(bytes: &[u8], width: u32, count: usize) -> Result<Vec<u64>> {
    if width == 0 || width > 64 {
        return Err(Error::Parameter(format!(
            "code width {width} outside 1..=64"
        )));
    }
    let need = (count as u128 * width as u128).div_ceil(8);
    if need > bytes.len() as u128 {
        return Err(Error::parse(
            0,
            format!(
                "{count} codes of {width} bits need {need} bytes, have {}",
                bytes.len()
            ),
        ));
    }
    let mut out = Vec::with_capacity(count);
    let mut bit = 0usize;
    for _ in 0..count {
        let mut c = 0u64;
        for i in 0..width as usize {
            if (bytes[(bit + i) / 8] >> ((bit + i) % 8)) & 1 == 1 {
                c |= 1 << i;
            }
        }
        out.push(c);
        bit += width as usize;
    }
    Ok(out)
}

const CODES_MAGIC: &[u8; 4] = b"KQCD";
const CODES_VERSION: u8 = 1;
const MAX_SPEC_LEN: u32 = 1 << 20;

/// A quantized vector on disk: compander record, granularity, zero-bin flag, codes.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeFile {
    pub spec: CompanderSpec,
    pub levels: u64,
    pub zero_bin: bool,
    pub codes: Vec<u64>,
}

impl CodeFile {
    /// Layout: magic, version, `u32` spec length, spec text, `u64` N, `u8` zero-bin
    /// flag, `u64` code count, packed codes; integers little-endian.
    pub fn encode(&self) -> Result<Vec<u8>> {
        let spec = self.spec.to_string();
        let mut out = Vec::new();
        out.extend_from_slice(CODES_MAGIC);
        out.push(CODES_VERSION);
        out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
        out.extend_from_slice(spec.as_bytes());
        out.extend_from_slice(&self.levels.to_le_bytes());
        out.push(self.zero_bin as u8);
        out.extend_from_slice(&(self.codes.len() as u64).to_le_bytes());
        out.extend(pack_codes(&self.codes, code_width(self.levels))?);
        Ok(out)
    }

    pub fn decode(data: &[u8]) -> Result<Self> {
        let mut r = data;
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n {
                return Err(Error::parse(0, "truncated code file"));
            }
            let (a, b) = r.split_at(n);
            r = b;
            Ok(a)
        };
        if take(4)? != CODES_MAGIC {
            return Err(Error::parse(0, "not a code file"));
        }
        let version = take(1)?[0];
        if version != CODES_VERSION {
            return Err(Error::parse(
                0,
                format!("unsupported code file version {version}"),
            ));
        }
        let spec_len = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if spec_len > MAX_SPEC_LEN {
            return Err(Error::parse(0, "compander record too long"));
        }
        let spec_text = std::str::from_utf8(take(spec_len as usize)?)
            .map_err(|_| Error::parse(0, "compander record is not UTF-8"))?;
        let spec: CompanderSpec = spec_text.parse()?;
        let levels = u64::from_le_bytes(take(8)?.try_into().unwrap());
        if levels == 0 {
            return Err(Error::parse(0, "granularity must be positive"));
        }
        let zero_bin = match take(1)?[0] {
            0 => false,
            1 => true,
            other => return Err(Error::parse(0, format!("bad zero-bin flag {other}"))),
        };
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let width = code_width(levels);
        if count as u128 * width as u128 > (r.len() as u128) * 8 {
            return Err(Error::parse(0, "code count exceeds payload"));
        }
        let codes = unpack_codes(r, width, count as usize)?;
        if let Some(&bad) = codes.iter().find(|&&c| c > levels || (c == 0 && !zero_bin)) {
            return Err(Error::parse(
                0,
                format!("code {bad} invalid for N={levels}"),
            ));
        }
        Ok(CodeFile {
            spec,
            levels,
            zero_bin,
            codes,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub const LOSS_HEADER: [&str; 9] = [
    "method",
    "K",
    "N",
    "b",
    "nats",
    "bits_per_entry",
    "raw_loss",
    "trials",
    "stderr",
];

fn fmt_bits(b: f64) -> String {
    if b.fract() == 0.0 {
        format!("{}", b as i64)
    } else {
        format!("{b:?}")
    }
}

/// Writes reports as CSV with a header row.
pub fn write_loss_csv<W: Write>(out: W, reports: &[LossReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOSS_HEADER).map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.method.clone(),
            r.k.to_string(),
            r.n.to_string(),
            fmt_bits(r.bits),
            format!("{:?}", r.nats),
            format!("{:?}", r.bits_per_entry),
            format!("{:?}", r.raw_loss),
            r.trials.to_string(),
            format!("{:?}", r.stderr),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_loss_csv`]; lines starting with `#` are skipped.
pub fn read_loss_csv<R: Read>(input: R) -> Result<Vec<LossReport>> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = rd.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != LOSS_HEADER {
        return Err(Error::parse(1, "unexpected loss CSV header"));
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let f = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|_| Error::parse(line, format!("bad number {:?}", &rec[j])))
        };
        let u = |j: usize| -> Result<u64> {
            rec[j]
                .parse::<u64>()
                .map_err(|_| Error::parse(line, format!("bad integer {:?}", &rec[j])))
        };
        let r = LossReport {
            method: rec[0].to_string(),
            k: u(1)? as usize,
            n: u(2)?,
            bits: f(3)?,
            nats: f(4)?,
            bits_per_entry: f(5)?,
            raw_loss: f(6)?,
            trials: u(7)? as usize,
            stderr: f(8)?,
            infinite_events: 0,
        };
        if r.k == 0 {
            return Err(Error::parse(line, "K must be positive"));
        }
        let expect = r.nats / (r.k as f64 * std::f64::consts::LN_2);
        let consistent = if expect.is_finite() {
            (r.bits_per_entry - expect).abs() <= 1e-12 * expect.abs().max(1e-300)
        } else {
            r.bits_per_entry == expect
        };
        if !consistent {
            return Err(Error::parse(
                line,
                "bits_per_entry disagrees with nats/(K ln 2)",
            ));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn write_worstcase_csv<W: Write>(out: W, rows: &[(WorstCaseBound, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "K", "N", "bound", "achieved", "ratio"])
        .map_err(csv_err)?;
    for (b, achieved) in rows {
        w.write_record([
            b.method.name().to_string(),
            b.k.to_string(),
            b.n.to_string(),
            format!("{:?}", b.bound),
            format!("{achieved:?}"),
            format!("{:?}", achieved / b.bound),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Largest alphabet accepted from a joint CSV.
pub const MAX_JOINT_ALPHABET: usize = 1 << 12;

/// Parses `a,b,probability` rows (header optional, indices from 0). Missing
/// pairs are zero.
pub fn parse_joint_csv(text: &str) -> Result<JointDistribution> {
    let mut entries = Vec::new();
    let (mut ka, mut kb) = (0usize, 0usize);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                lineno,
                "expected three fields a,b,probability",
            ));
        }
        if lineno == 1 && fields == ["a", "b", "probability"] {
            continue;
        }
        let a: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad index {:?}", fields[0])))?;
        let b: usize = fields[1]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad index {:?}", fields[1])))?;
        let p: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad probability {:?}", fields[2])))?;
        if a >= MAX_JOINT_ALPHABET || b >= MAX_JOINT_ALPHABET {
            return Err(Error::parse(lineno, "index too large"));
        }
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::parse(
                lineno,
                format!("probability {p} is not a nonnegative number"),
            ));
        }
        ka = ka.max(a + 1);
        kb = kb.max(b + 1);
        entries.push((a, b, p));
    }
    if entries.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut flat = vec![0.0; ka * kb];
    for (a, b, p) in entries {
        flat[a * kb + b] += p;
    }
    JointDistribution::from_flat(ka, kb, flat)
}

pub fn write_joint_csv<W: Write>(mut out: W, j: &JointDistribution) -> Result<()> {
    writeln!(out, "a,b,probability")?;
    for a in 0..j.alphabet_a() {
        for b in 0..j.alphabet_b() {
            writeln!(out, "{a},{b},{:?}", j.prob(a, b))?;
        }
    }
    Ok(())
}

/// Reads numbers separated by commas, whitespace or newlines; `#` starts a comment.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad number {tok:?}")))?;
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    Ok(out)
}
