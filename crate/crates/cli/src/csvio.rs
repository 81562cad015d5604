//! CSV artifacts: traces, fronts and aggregates.
//!
//! Floats are written in `{:.16e}` form (17 significant digits), which
//! round-trips every `f64` exactly.

use std::io::{Read, Write};

use gpmotpe::optimizer::{AggregateRow, IterationTrace};
use gpmotpe::pareto::{dominates, FrontEntry};
use gpmotpe::DesignPoint;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

pub fn trace_header(d: usize, m: usize) -> Vec<String> {
    std::iter::once("iter".to_string())
        .chain(numbered("x", d))
        .chain(numbered("mean", m))
        .chain(numbered("std", m))
        .chain(numbered("w", m))
        .chain(["hv", "wall_ms", "flags"].map(String::from))
        .collect()
}

/// Writes trace rows. `wall_ms` is left empty unless `with_wall_time`, so
/// reruns produce identical bytes.
pub fn write_trace<W: Write>(
    out: W,
    d: usize,
    m: usize,
    rows: &[IterationTrace],
    with_wall_time: bool,
) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(d, m))?;
    for t in rows {
        let mut rec = vec![t.iter.to_string()];
        rec.extend(t.point.coords().iter().map(|&v| fmt_f64(v)));
        rec.extend(t.mean.iter().map(|&v| fmt_f64(v)));
        rec.extend(t.std.iter().map(|&v| fmt_f64(v)));
        match &t.weights {
            Some(ws) => rec.extend(ws.iter().map(|&v| fmt_f64(v))),
            None => rec.extend(std::iter::repeat_n(String::new(), m)),
        }
        rec.push(fmt_f64(t.hv));
        rec.push(if with_wall_time { format!("{:.3}", t.wall_ms) } else { String::new() });
        rec.push(t.flags.label());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timing<W: Write>(out: W, rows: &[IterationTrace]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "wall_ms"])?;
    for t in rows {
        w.write_record([t.iter.to_string(), format!("{:.3}", t.wall_ms)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn front_header(d: usize, m: usize) -> Vec<String> {
    std::iter::once("index".to_string())
        .chain(numbered("x", d))
        .chain(numbered("mean", m))
        .chain(numbered("std", m))
        .collect()
}

pub fn write_front<W: Write>(out: W, d: usize, m: usize, front: &[FrontEntry]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(front_header(d, m))?;
    for e in front {
        let mut rec = vec![e.index.to_string()];
        rec.extend(e.point.coords().iter().map(|&v| fmt_f64(v)));
        rec.extend(e.mean.iter().map(|&v| fmt_f64(v)));
        rec.extend(e.std.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "hv_mean", "hv_std"])?;
    for r in rows {
        w.write_record([r.iter.to_string(), fmt_f64(r.hv_mean), fmt_f64(r.hv_std)])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a trace or front file, reduced to what the `hv` and `pareto`
/// commands need.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveRow {
    /// 1-based line number in the file.
    pub line: u64,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn columns(headers: &csv::StringRecord, prefix: &str) -> Vec<usize> {
    let mut cols = Vec::new();
    for i in 1.. {
        let name = format!("{prefix}_{i}");
        match headers.iter().position(|h| h.trim() == name) {
            Some(c) => cols.push(c),
            None => break,
        }
    }
    cols
}

/// Reads `x_*`, `mean_*` and `std_*` columns. An empty input yields no
/// rows. At least one `mean_*` column is required otherwise.
pub fn read_objective_rows<R: Read>(input: R) -> Result<Vec<ObjectiveRow>, CsvError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = reader.records();
    let headers = match records.next() {
        None => return Ok(Vec::new()),
        Some(h) => h?,
    };
    if headers.len() == 1 && headers[0].trim().is_empty() {
        return Ok(Vec::new());
    }
    let (xc, mc, sc) = (columns(&headers, "x"), columns(&headers, "mean"), columns(&headers, "std"));
    if mc.is_empty() {
        return Err(CsvError::Parse {
            line: 1,
            message: "header has no mean_1 column".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != headers.len() {
            return Err(CsvError::Parse {
                line,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let parse = |cols: &[usize]| -> Result<Vec<f64>, CsvError> {
            cols.iter()
                .map(|&c| {
                    rec[c].trim().parse::<f64>().map_err(|e| CsvError::Parse {
                        line,
                        message: format!("column {}: {e} ({:?})", &headers[c], &rec[c]),
                    })
                })
                .collect()
        };
        rows.push(ObjectiveRow {
            line,
            x: parse(&xc)?,
            mean: parse(&mc)?,
            std: parse(&sc)?,
        });
    }
    Ok(rows)
}

/// Front of the distinct points in a trace. A point that appears more than
/// once keeps its first position and its last reported statistics, matching
/// how the archive pools repeated evaluations.
pub fn front_of_rows(rows: &[ObjectiveRow]) -> Vec<FrontEntry> {
    let mut distinct: Vec<ObjectiveRow> = Vec::new();
    for r in rows {
        let key = |v: &[f64]| -> Vec<u64> { v.iter().map(|x| (x + 0.0).to_bits()).collect() };
        match distinct.iter_mut().find(|d| key(&d.x) == key(&r.x)) {
            Some(d) => {
                d.mean.clone_from(&r.mean);
                d.std.clone_from(&r.std);
            }
            None => distinct.push(r.clone()),
        }
    }
    (0..distinct.len())
        .filter(|&i| !distinct.iter().any(|o| dominates(&o.mean, &distinct[i].mean)))
        .map(|i| FrontEntry {
            index: i,
            point: DesignPoint::new(distinct[i].x.clone()),
            mean: distinct[i].mean.clone(),
            std: distinct[i].std.clone(),
        })
        .collect()
}
