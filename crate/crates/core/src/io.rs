//! Plain-text formats for datasets and solver traces.
//!
//! Dataset files start with
//!
//! ```text
//! # rglm-dataset v1 <d1> <d2> <n> <family> <scale-convention>
//! ```
//!
//! where `<family>` is `logistic` or `quadratic(<sigma2>)` and
//! `<scale-convention>` is `scales=<standard|explicit>,neff=<effective n>`.
//! Each following line is one measurement, response last:
//!
//! ```text
//! dense  <a_11> <a_12> ... <a_d1d2> <y>
//! entry  <k> <l> [<scale>] <y>
//! pair   <k> <l> <j> [<scale>] <y>
//! masked <k> <l> [<scale>] <y>
//! ```
//!
//! The bracketed scale is present only under `scales=explicit`. Reals are
//! written with 17 significant digits, which round-trips every `f64` exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::glm::{Dataset, GlmFamily, GlmKind};
use crate::linalg::DenseMatrix;
use crate::measure::{standard_scale, MeasurementOp};
use crate::solve::{IterRecord, SolveTrace};

pub const DATASET_MAGIC: &str = "rglm-dataset";
pub const TRACE_HEADER: &str = "t,eta,objective,h,rel_dist,num_rank,fro";

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn is_standard(op: &MeasurementOp, d1: usize, d2: usize) -> bool {
    let s = standard_scale(d1, d2);
    match *op {
        MeasurementOp::Dense { .. } => true,
        MeasurementOp::Entry { scale, .. } | MeasurementOp::Pair { scale, .. } => scale == s,
        MeasurementOp::MaskedEntry { scale, .. } => scale == 1.0,
    }
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> Result<()> {
    let (d1, d2) = dataset.dims();
    let explicit = !dataset.ops().iter().all(|op| is_standard(op, d1, d2));
    let family = match dataset.family().kind() {
        GlmKind::Logistic => "logistic".to_string(),
        GlmKind::Quadratic => format!("quadratic({})", fmt_f64(dataset.family().noise_scale())),
    };
    writeln!(
        w,
        "# {DATASET_MAGIC} v1 {d1} {d2} {} {family} scales={},neff={}",
        dataset.len(),
        if explicit { "explicit" } else { "standard" },
        fmt_f64(dataset.effective_n())
    )?;
    let mut line = String::new();
    for (op, &y) in dataset.ops().iter().zip(dataset.responses()) {
        line.clear();
        let scale_field = |line: &mut String, s: f64| {
            if explicit {
                let _ = write!(line, " {}", fmt_f64(s));
            }
        };
        match op {
            MeasurementOp::Dense { a } => {
                line.push_str("dense");
                for v in a.as_slice() {
                    let _ = write!(line, " {}", fmt_f64(*v));
                }
            }
            &MeasurementOp::Entry { k, l, scale } => {
                let _ = write!(line, "entry {k} {l}");
                scale_field(&mut line, scale);
            }
            &MeasurementOp::Pair { k, l, j, scale } => {
                let _ = write!(line, "pair {k} {l} {j}");
                scale_field(&mut line, scale);
            }
            &MeasurementOp::MaskedEntry { k, l, scale } => {
                let _ = write!(line, "masked {k} {l}");
                scale_field(&mut line, scale);
            }
        }
        let _ = write!(line, " {}", fmt_f64(y));
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        msg: msg.into(),
    })
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    match tok.map(str::parse::<T>) {
        Some(Ok(v)) => Ok(v),
        Some(Err(_)) => perr(line, format!("cannot parse {what}")),
        None => perr(line, format!("missing {what}")),
    }
}

fn parse_family(tok: &str, line: usize) -> Result<GlmFamily> {
    if tok == "logistic" {
        return Ok(GlmFamily::logistic());
    }
    if let Some(inner) = tok.strip_prefix("quadratic(").and_then(|t| t.strip_suffix(')')) {
        let s2: f64 = num(Some(inner), line, "noise variance")?;
        return GlmFamily::quadratic(s2);
    }
    perr(line, format!("unknown family {tok:?}"))
}

fn parse_convention(tok: &str, line: usize) -> Result<(bool, f64)> {
    let mut explicit = None;
    let mut neff = None;
    for part in tok.split(',') {
        match part.split_once('=') {
            Some(("scales", "standard")) => explicit = Some(false),
            Some(("scales", "explicit")) => explicit = Some(true),
            Some(("neff", v)) => neff = Some(num::<f64>(Some(v), line, "neff")?),
            _ => return perr(line, format!("bad scale convention field {part:?}")),
        }
    }
    match (explicit, neff) {
        (Some(e), Some(n)) => Ok((e, n)),
        _ => perr(line, "scale convention needs scales= and neff="),
    }
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return perr(1, "empty dataset file"),
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 8 || toks[0] != "#" || toks[1] != DATASET_MAGIC || toks[2] != "v1" {
        return perr(1, "expected '# rglm-dataset v1 d1 d2 n family scale-convention'");
    }
    let d1: usize = num(Some(toks[3]), 1, "d1")?;
    let d2: usize = num(Some(toks[4]), 1, "d2")?;
    let n: usize = num(Some(toks[5]), 1, "n")?;
    let family = parse_family(toks[6], 1)?;
    let (explicit, neff) = parse_convention(toks[7], 1)?;
    if d1 == 0 || d2 == 0 {
        return perr(1, "dimensions must be positive");
    }
    let std_scale = standard_scale(d1, d2);

    let mut ops = Vec::with_capacity(n);
    let mut responses = Vec::with_capacity(n);
    for (idx, raw) in lines.enumerate() {
        let lineno = idx + 2;
        let raw = raw?;
        if raw.trim().is_empty() {
            continue;
        }
        let mut it = raw.split_whitespace();
        let kind = it.next().unwrap_or("");
        let op = match kind {
            "dense" => {
                let vals: Vec<f64> = it
                    .by_ref()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .or_else(|_| perr(lineno, "bad number in dense row"))?;
                if vals.len() != d1 * d2 + 1 {
                    return perr(lineno, format!("dense row needs {} numbers", d1 * d2 + 1));
                }
                responses.push(vals[d1 * d2]);
                let a = DenseMatrix::from_row_major(d1, d2, vals[..d1 * d2].to_vec())
                    .or_else(|e| perr(lineno, e.to_string()))?;
                ops.push(MeasurementOp::Dense { a });
                continue;
            }
            "entry" | "masked" => {
                let k = num(it.next(), lineno, "k")?;
                let l = num(it.next(), lineno, "l")?;
                let default = if kind == "entry" { std_scale } else { 1.0 };
                let scale = if explicit { num(it.next(), lineno, "scale")? } else { default };
                if kind == "entry" {
                    MeasurementOp::Entry { k, l, scale }
                } else {
                    MeasurementOp::MaskedEntry { k, l, scale }
                }
            }
            "pair" => {
                let k = num(it.next(), lineno, "k")?;
                let l = num(it.next(), lineno, "l")?;
                let j = num(it.next(), lineno, "j")?;
                let scale = if explicit { num(it.next(), lineno, "scale")? } else { std_scale };
                MeasurementOp::Pair { k, l, j, scale }
            }
            other => return perr(lineno, format!("unknown measurement kind {other:?}")),
        };
        responses.push(num(it.next(), lineno, "response")?);
        if it.next().is_some() {
            return perr(lineno, "trailing fields");
        }
        op.validate(d1, d2).or_else(|e| perr(lineno, e.to_string()))?;
        ops.push(op);
    }
    if ops.len() != n {
        return invalid(format!("header declares {n} measurements, found {}", ops.len()));
    }
    Dataset::new(d1, d2, ops, responses, family, neff)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(trace: &SolveTrace, mut w: W) -> Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.t,
            fmt_f64(r.eta),
            fmt_f64(r.objective),
            opt(r.h),
            opt(r.rel_dist),
            r.num_rank,
            fmt_f64(r.fro)
        )?;
    }
    Ok(())
}

/// Parse a trace CSV. Heuristic diagnostics that are not part of the file
/// (`inf_overshoot`) come back as zero; `best_index` is recomputed.
pub fn read_trace_csv<R: BufRead>(r: R) -> Result<SolveTrace> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != TRACE_HEADER {
        return perr(1, format!("expected header {TRACE_HEADER}"));
    }
    let mut records = Vec::new();
    for (idx, raw) in lines.enumerate() {
        let lineno = idx + 2;
        let raw = raw?;
        if raw.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.split(',').collect();
        if f.len() != 7 {
            return perr(lineno, "expected 7 fields");
        }
        let optf = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(Some(s), lineno, what).map(Some)
            }
        };
        records.push(IterRecord {
            t: num(Some(f[0]), lineno, "t")?,
            eta: num(Some(f[1]), lineno, "eta")?,
            objective: num(Some(f[2]), lineno, "objective")?,
            h: optf(f[3], "h")?,
            rel_dist: optf(f[4], "rel_dist")?,
            num_rank: num(Some(f[5]), lineno, "num_rank")?,
            fro: num(Some(f[6]), lineno, "fro")?,
            inf_overshoot: 0.0,
        });
    }
    if records.is_empty() {
        return invalid("trace has no rows");
    }
    let best_index = records
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(SolveTrace {
        records,
        best_index,
        rank: 0,
        rank_bound: 0,
    })
}
