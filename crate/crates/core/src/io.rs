//! Reading series, persisting samples and writing summary tables.
//!
//! Series are CSV with either a bare `y` column or `t,y` columns, with or
//! without a header. Samples are JSON lines: a header record carrying the
//! schema version, series length and the settings of the run, then one record
//! per stored state. Floats round-trip exactly, so summaries of a reloaded
//! file equal summaries of the in-memory output.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::chain::{ChainConfig, ChainOutput};
use crate::error::{Error, Result};
use crate::hyper::Hyperparams;
use crate::model::{ModelState, TimeSeries};
use crate::summaries::{AcceptanceRow, Mass, PowerPhase, ScalarSummary, SignalEstimate};

pub const SCHEMA_VERSION: u32 = 1;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(line, e.to_string())
}

/// Reads a series from CSV. One column is `y` with `t` implied as `1..n`;
/// two columns are `t,y` (in that order unless a header names them) and `t`
/// must run `1, 2, ..., n`.
pub fn read_series<R: Read>(reader: R) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = rdr.records();
    let Some(first) = records.next() else {
        return Err(Error::InvalidSeries("input has no observations".into()));
    };
    let first = first.map_err(csv_err)?;
    let width = first.len();
    if width == 0 || width > 2 {
        return Err(parse_err(
            line_of(&first),
            format!("expected columns `y` or `t,y`, found {width} fields"),
        ));
    }
    let header = first.iter().any(|f| f.parse::<f64>().is_err());
    let (t_col, y_col) = if header {
        let names: Vec<String> = first.iter().map(|f| f.to_ascii_lowercase()).collect();
        let find = |n: &str| names.iter().position(|v| v == n);
        match (width, find("t"), find("y")) {
            (1, _, _) => (None, 0),
            (2, Some(t), Some(y)) => (Some(t), y),
            (2, _, _) => {
                return Err(parse_err(
                    line_of(&first),
                    format!("header must name columns `t` and `y`, found `{}`", names.join(",")),
                ))
            }
            _ => unreachable!(),
        }
    } else if width == 2 {
        (Some(0), 1)
    } else {
        (None, 0)
    };

    let mut values = Vec::new();
    let body = (!header).then_some(Ok(first)).into_iter().chain(records);
    for rec in body {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = rec
                .get(col)
                .ok_or_else(|| parse_err(line, format!("missing column `{name}`")))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("field `{name}`: `{raw}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("field `{name}`: `{raw}` is not finite")));
            }
            Ok(v)
        };
        if rec.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        if let Some(tc) = t_col {
            let t = field(tc, "t")?;
            let want = values.len() + 1;
            if t != want as f64 {
                return Err(parse_err(line, format!("field `t`: expected {want}, found {t}")));
            }
        }
        values.push(field(y_col, "y")?);
    }
    if values.is_empty() {
        return Err(Error::InvalidSeries("input has no observations".into()));
    }
    TimeSeries::new(values)
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

/// Writes `t,y` with `t = 1..n`.
pub fn write_series<W: Write>(writer: W, ts: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "y"]).map_err(csv_err)?;
    for (i, y) in ts.values().iter().enumerate() {
        w.write_record([(i + 1).to_string(), y.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// First record of a samples file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplesHeader {
    pub schema_version: u32,
    /// Length of the fitted series.
    pub n: usize,
    pub hyper: Hyperparams,
    pub config: ChainConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line<H, S> {
    Header(H),
    Sample(S),
}

#[derive(Serialize, Deserialize)]
struct SampleRecord<T> {
    iteration: usize,
    state: T,
}

/// Contents of a samples file.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub header: SamplesHeader,
    pub iterations: Vec<usize>,
    pub samples: Vec<ModelState>,
}

pub fn write_samples<W: Write>(mut writer: W, header: &SamplesHeader, out: &ChainOutput) -> Result<()> {
    serde_json::to_writer(&mut writer, &Line::<_, SampleRecord<&ModelState>>::Header(header))?;
    writeln!(writer)?;
    for (state, &iteration) in out.samples.iter().zip(&out.sample_iterations) {
        let rec = SampleRecord { iteration, state };
        serde_json::to_writer(&mut writer, &Line::<&SamplesHeader, _>::Sample(rec))?;
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a samples file, checking the schema version and that every state is
/// a valid state for the recorded series length and hyperparameters.
pub fn read_samples<R: BufRead>(reader: R) -> Result<SampleFile> {
    let mut header: Option<SamplesHeader> = None;
    let mut iterations = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line<SamplesHeader, SampleRecord<ModelState>> =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        match (parsed, &header) {
            (Line::Header(h), None) => {
                if h.schema_version != SCHEMA_VERSION {
                    return Err(parse_err(
                        lineno,
                        format!(
                            "schema_version {} not supported (expected {SCHEMA_VERSION})",
                            h.schema_version
                        ),
                    ));
                }
                header = Some(h);
            }
            (Line::Header(_), Some(_)) => return Err(parse_err(lineno, "second header record")),
            (Line::Sample(_), None) => {
                return Err(parse_err(lineno, "sample record before the header"))
            }
            (Line::Sample(rec), Some(h)) => {
                rec.state
                    .validate(h.n, h.hyper.psi_s, h.hyper.psi_omega)
                    .map_err(|e| parse_err(lineno, e.to_string()))?;
                iterations.push(rec.iteration);
                samples.push(rec.state);
            }
        }
    }
    let header = header.ok_or_else(|| parse_err(0, "samples file has no header record"))?;
    Ok(SampleFile {
        header,
        iterations,
        samples,
    })
}

fn write_rows<W: Write, I, R>(writer: W, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `iteration,loglik`, zero-based iterations.
pub fn write_loglik<W: Write>(writer: W, loglik: &[f64]) -> Result<()> {
    write_rows(
        writer,
        &["iteration", "loglik"],
        loglik
            .iter()
            .enumerate()
            .map(|(i, v)| [i.to_string(), v.to_string()]),
    )
}

pub fn write_acceptance<W: Write>(writer: W, rows: &[AcceptanceRow]) -> Result<()> {
    write_rows(
        writer,
        &["family", "kind", "attempts", "accepted", "rate"],
        rows.iter().map(|r| {
            [
                r.family.clone(),
                r.kind.clone(),
                r.attempts.to_string(),
                r.accepted.to_string(),
                r.rate.to_string(),
            ]
        }),
    )
}

pub fn write_posterior_k<W: Write>(writer: W, mass: &Mass) -> Result<()> {
    write_rows(
        writer,
        &["k", "probability"],
        mass.iter().map(|(k, p)| [k.to_string(), p.to_string()]),
    )
}

/// `k,segment,m,probability` for the given conditioning `k`.
pub fn write_posterior_m<W: Write>(writer: W, k: usize, per_segment: &[Mass]) -> Result<()> {
    write_rows(
        writer,
        &["k", "segment", "m", "probability"],
        per_segment.iter().enumerate().flat_map(|(j, mass)| {
            mass.iter()
                .map(move |(m, p)| [k.to_string(), j.to_string(), m.to_string(), p.to_string()])
        }),
    )
}

/// One row per histogram bin, repeating the ordinal's mean and SD.
pub fn write_changepoints<W: Write>(
    writer: W,
    k: usize,
    summaries: &[ScalarSummary],
    bin_width: f64,
) -> Result<()> {
    write_rows(
        writer,
        &["k", "ordinal", "mean", "sd", "bin_start", "bin_end", "count"],
        summaries.iter().enumerate().flat_map(|(i, s)| {
            s.histogram(bin_width).into_iter().map(move |(lo, c)| {
                [
                    k.to_string(),
                    i.to_string(),
                    s.mean.to_string(),
                    s.sd.to_string(),
                    lo.to_string(),
                    (lo + bin_width).to_string(),
                    c.to_string(),
                ]
            })
        }),
    )
}

/// `k,m,segment,ordinal,mean,sd,samples`, with `m` written as `m1-m2-...`.
pub fn write_frequencies<W: Write>(
    writer: W,
    k: usize,
    m: &[usize],
    summaries: &[Vec<ScalarSummary>],
) -> Result<()> {
    let m_label = m.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
    write_rows(
        writer,
        &["k", "m", "segment", "ordinal", "mean", "sd", "samples"],
        summaries.iter().enumerate().flat_map(|(j, seg)| {
            let m_label = m_label.clone();
            seg.iter().enumerate().map(move |(l, s)| {
                [
                    k.to_string(),
                    m_label.clone(),
                    j.to_string(),
                    l.to_string(),
                    s.mean.to_string(),
                    s.sd.to_string(),
                    s.values.len().to_string(),
                ]
            })
        }),
    )
}

pub fn write_signal<W: Write>(writer: W, est: &SignalEstimate) -> Result<()> {
    write_rows(
        writer,
        &["t", "mean", "lo2.5", "hi97.5"],
        (0..est.mean.len()).map(|i| {
            [
                (i + 1).to_string(),
                est.mean[i].to_string(),
                est.lower[i].to_string(),
                est.upper[i].to_string(),
            ]
        }),
    )
}

/// Undefined phases are written as empty fields.
pub fn write_power_phase<W: Write>(writer: W, rows: &[PowerPhase]) -> Result<()> {
    write_rows(
        writer,
        &["segment", "ordinal", "frequency", "power", "phase"],
        rows.iter().map(|r| {
            [
                r.segment.to_string(),
                r.ordinal.to_string(),
                r.frequency.to_string(),
                r.power.to_string(),
                r.phase.map(|p| p.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

pub fn write_peak_curve<W: Write>(writer: W, peak: &[f64]) -> Result<()> {
    write_rows(
        writer,
        &["t", "peak"],
        peak.iter()
            .enumerate()
            .map(|(i, v)| [(i + 1).to_string(), v.to_string()]),
    )
}
