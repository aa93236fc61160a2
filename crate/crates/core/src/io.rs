//! On-disk formats.
//!
//! * Dictionary binary: 8-byte magic `FWSPDICT`, `u32` d, `u32` n (all
//!   little-endian), then `d * n` little-endian `f64` in column-major order.
//! * Dictionary CSV: `d` rows of `n` numbers, one atom per column. Lines
//!   starting with `#` are skipped.
//! * Instance JSON: `{d, n, m, support, coefficients: [[i, v], ...],
//!   dict_seed, signal_seed}`.
//! * Trace JSON lines: a header object, one [`IterationRecord`] per line,
//!   then a footer with the final iterate.
//! * Trace CSV: a `#` version line, then columns
//!   `k,atom,sign,gamma,residual_norm,iterate_l1,rho` (`rho` empty when not
//!   recorded).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, Support};
use crate::error::{Error, Result};
use crate::pursuit::{Algorithm, IterationRecord, SolverTrace, StopReason};
use crate::synth::SparseInstance;
use crate::theory::TheoryReport;

pub const DICT_MAGIC: &[u8; 8] = b"FWSPDICT";
pub const DICT_HEADER_LEN: usize = 16;
pub const TRACE_FORMAT: &str = "fwsparse-trace";
pub const TRACE_VERSION: u32 = 1;
pub const TRACE_CSV_HEADER: &str = "# fwsparse trace csv v1";

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn write_dictionary<W: Write>(dict: &Dictionary, mut w: W) -> Result<()> {
    let d = u32::try_from(dict.d()).map_err(|_| fmt_err("d does not fit in u32"))?;
    let n = u32::try_from(dict.n()).map_err(|_| fmt_err("n does not fit in u32"))?;
    w.write_all(DICT_MAGIC)?;
    w.write_all(&d.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    for v in dict.atoms().as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the binary format. Columns must already be unit norm unless
/// `normalize` is set.
pub fn read_dictionary<R: Read>(mut r: R, normalize: bool) -> Result<Dictionary> {
    let mut header = [0u8; DICT_HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| fmt_err("truncated dictionary header"))?;
    if &header[..8] != DICT_MAGIC {
        return Err(fmt_err("bad dictionary magic"));
    }
    let d = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    if d == 0 || n == 0 {
        return Err(Error::Empty);
    }
    let len = d
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| fmt_err("dictionary size overflows"))?;
    let mut body = Vec::with_capacity(len);
    r.read_to_end(&mut body)?;
    if body.len() != len {
        return Err(fmt_err(format!(
            "expected {len} payload bytes for {d}x{n}, found {}",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Dictionary::from_matrix(DMatrix::from_vec(d, n, values), normalize)
}

pub fn save_dictionary(dict: &Dictionary, path: &Path) -> Result<()> {
    write_dictionary(dict, BufWriter::new(File::create(path)?))
}

pub fn load_dictionary(path: &Path, normalize: bool) -> Result<Dictionary> {
    read_dictionary(BufReader::new(File::open(path)?), normalize)
}

/// Parses the CSV form: row `i` holds coordinate `i` of every atom.
pub fn read_dictionary_csv<R: Read>(r: R, normalize: bool) -> Result<Dictionary> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fmt_err(e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, s)| {
                s.parse::<f64>()
                    .map_err(|_| fmt_err(format!("row {i}, column {j}: cannot parse {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let d = rows.len();
    if d == 0 {
        return Err(Error::Empty);
    }
    let n = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != n) {
        return Err(fmt_err(format!(
            "row {i} has {} entries, expected {n}",
            rows[i].len()
        )));
    }
    Dictionary::from_matrix(DMatrix::from_fn(d, n, |i, j| rows[i][j]), normalize)
}

pub fn load_dictionary_csv(path: &Path, normalize: bool) -> Result<Dictionary> {
    read_dictionary_csv(BufReader::new(File::open(path)?), normalize)
}

/// Serializable form of a [`SparseInstance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub support: Support,
    pub coefficients: Vec<(usize, f64)>,
    pub dict_seed: Option<u64>,
    pub signal_seed: Option<u64>,
}

impl InstanceRecord {
    pub fn from_instance(inst: &SparseInstance) -> Self {
        Self {
            d: inst.d(),
            n: inst.n(),
            m: inst.m(),
            support: inst.support.clone(),
            coefficients: inst
                .support
                .indices()
                .iter()
                .map(|&i| (i, inst.coefficients[i]))
                .collect(),
            dict_seed: inst.dict_seed,
            signal_seed: inst.signal_seed,
        }
    }

    /// Rebuilds the instance on `dict`, recomputing the signal.
    pub fn to_instance(&self, dict: &Dictionary) -> Result<SparseInstance> {
        if dict.d() != self.d || dict.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.d * self.n,
                got: dict.d() * dict.n(),
            });
        }
        let mut x = DVector::zeros(self.n);
        for &(i, v) in &self.coefficients {
            if i >= self.n {
                return Err(Error::InvalidSupport(format!("index {i} >= {}", self.n)));
            }
            x[i] = v;
        }
        let mut inst = SparseInstance::from_coefficients(dict, x)?;
        if inst.support != self.support || inst.m() != self.m {
            return Err(fmt_err("support does not match the nonzero coefficients"));
        }
        inst.dict_seed = self.dict_seed;
        inst.signal_seed = self.signal_seed;
        Ok(inst)
    }
}

pub fn write_instance_json<W: Write>(inst: &SparseInstance, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, &InstanceRecord::from_instance(inst))
        .map_err(|e| fmt_err(e.to_string()))
}

pub fn read_instance_json<R: Read>(r: R) -> Result<InstanceRecord> {
    serde_json::from_reader(r).map_err(|e| fmt_err(e.to_string()))
}

/// First line of a JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub algorithm: Algorithm,
    pub beta: Option<f64>,
    pub residual_tol: f64,
    pub iterates_recorded: bool,
    pub d: usize,
    pub n: usize,
    pub dict_seed: Option<u64>,
    pub signal_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceFooter {
    final_x: Vec<(usize, f64)>,
    final_residual_norm: f64,
    converged: bool,
    stop: StopReason,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum TraceLine {
    Header(TraceHeader),
    Iteration(IterationRecord),
    Final(TraceFooter),
}

pub fn write_trace_jsonl<W: Write>(
    trace: &SolverTrace,
    instance: &SparseInstance,
    mut w: W,
) -> Result<()> {
    let header = TraceHeader {
        format: TRACE_FORMAT.into(),
        version: TRACE_VERSION,
        algorithm: trace.algorithm,
        beta: trace.beta,
        residual_tol: trace.residual_tol,
        iterates_recorded: trace.iterates_recorded,
        d: instance.d(),
        n: instance.n(),
        dict_seed: instance.dict_seed,
        signal_seed: instance.signal_seed,
    };
    let mut line = |v: &TraceLine| -> Result<()> {
        serde_json::to_writer(&mut w, v).map_err(|e| fmt_err(e.to_string()))?;
        w.write_all(b"\n")?;
        Ok(())
    };
    line(&TraceLine::Header(header))?;
    for r in &trace.records {
        line(&TraceLine::Iteration(r.clone()))?;
    }
    line(&TraceLine::Final(TraceFooter {
        final_x: trace
            .final_x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect(),
        final_residual_norm: trace.final_residual_norm,
        converged: trace.converged,
        stop: trace.stop,
    }))?;
    w.flush()?;
    Ok(())
}

pub fn read_trace_jsonl<R: Read>(r: R) -> Result<(TraceHeader, SolverTrace)> {
    let mut header = None;
    let mut records = Vec::new();
    let mut footer = None;
    for (no, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine =
            serde_json::from_str(&line).map_err(|e| fmt_err(format!("line {}: {e}", no + 1)))?;
        match parsed {
            TraceLine::Header(h) if header.is_none() && records.is_empty() => header = Some(h),
            TraceLine::Iteration(rec) if header.is_some() && footer.is_none() => records.push(rec),
            TraceLine::Final(f) if header.is_some() && footer.is_none() => footer = Some(f),
            _ => return Err(fmt_err(format!("line {}: out of order", no + 1))),
        }
    }
    let header = header.ok_or_else(|| fmt_err("missing trace header"))?;
    let footer = footer.ok_or_else(|| fmt_err("missing trace footer"))?;
    if header.format != TRACE_FORMAT || header.version != TRACE_VERSION {
        return Err(fmt_err(format!(
            "unsupported trace format {} v{}",
            header.format, header.version
        )));
    }
    let mut final_x = DVector::zeros(header.n);
    for (i, v) in footer.final_x {
        if i >= header.n {
            return Err(fmt_err(format!("final iterate index {i} >= {}", header.n)));
        }
        final_x[i] = v;
    }
    let trace = SolverTrace {
        algorithm: header.algorithm,
        beta: header.beta,
        records,
        final_x,
        final_residual_norm: footer.final_residual_norm,
        converged: footer.converged,
        stop: footer.stop,
        residual_tol: header.residual_tol,
        iterates_recorded: header.iterates_recorded,
    };
    Ok((header, trace))
}

pub fn write_trace_csv<W: Write>(trace: &SolverTrace, mut w: W) -> Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| fmt_err(e.to_string());
    wtr.write_record([
        "k",
        "atom",
        "sign",
        "gamma",
        "residual_norm",
        "iterate_l1",
        "rho",
    ])
    .map_err(io)?;
    for r in &trace.records {
        wtr.write_record([
            r.k.to_string(),
            r.atom.to_string(),
            r.sign.to_string(),
            r.gamma.to_string(),
            r.residual_norm.to_string(),
            r.iterate_l1.to_string(),
            r.rho.map(|v| v.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_theory_report<W: Write>(report: &TheoryReport, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, report).map_err(|e| fmt_err(e.to_string()))
}

pub fn read_theory_report<R: Read>(r: R) -> Result<TheoryReport> {
    serde_json::from_reader(r).map_err(|e| fmt_err(e.to_string()))
}
