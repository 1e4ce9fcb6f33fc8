//! Rate and weight descriptors: short forms such as `constant:1`,
//! `affine:1,0`, `iterlog:1,1`, `pathological`, `table:rates.csv`, inline
//! JSON (`{"kind":"power","params":{"p":2}}`) or `@file.json`.

use std::fs;
use std::path::Path;

use cmj_core::patree::WeightFunction;
use cmj_core::purebirth::Stop;
use cmj_core::RateSequence;

use crate::error::CliError;

fn numbers(kind: &str, args: &str, want: usize) -> Result<Vec<f64>, CliError> {
    let vals: Vec<f64> = args
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("{kind}: {e} in '{args}'")))?;
    if vals.len() != want {
        return Err(CliError::Config(format!("{kind} takes {want} number(s), got '{args}'")));
    }
    Ok(vals)
}

fn json_or_file<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> Result<Option<T>, CliError> {
    let text = if let Some(path) = s.strip_prefix('@') {
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("{what} file {path}: {e}")))?
    } else if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        return Ok(None);
    };
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::Config(format!("{what} JSON at line {} column {}: {e}", e.line(), e.column())))
}

/// One rate per line; a header line `rate` or `log2_rate` selects the scale
/// (default `rate`).
pub fn read_rate_table(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("rate table {}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    let log_scale = match headers.get(0).map(str::trim) {
        Some("log2_rate") => true,
        Some("rate") => false,
        other => {
            return Err(CliError::Config(format!(
                "rate table {}: first column must be 'rate' or 'log2_rate', found {other:?}",
                path.display()
            )))
        }
    };
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let v: f64 = rec
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| CliError::Config(format!("rate table {} line {}: {e}", path.display(), line + 2)))?;
        out.push(if log_scale { v } else { v.log2() });
    }
    Ok(out)
}

pub fn parse_rates(s: &str) -> Result<RateSequence, CliError> {
    if let Some(seq) = json_or_file::<RateSequence>(s, "rates")? {
        seq.validate()?;
        return Ok(seq);
    }
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let seq = match kind {
        "constant" => RateSequence::Constant { c: numbers(kind, args, 1)?[0] },
        "affine" => {
            let v = numbers(kind, args, 2)?;
            RateSequence::Affine { a: v[0], b: v[1] }
        }
        "power" => RateSequence::Power { p: numbers(kind, args, 1)?[0] },
        "iterlog" => {
            let v = numbers(kind, args, 2)?;
            if v[1] < 0.0 || v[1].fract() != 0.0 {
                return Err(CliError::Config(format!("iterlog depth must be a non-negative integer, got {}", v[1])));
            }
            RateSequence::IteratedLog { c: v[0], k: v[1] as u32 }
        }
        "pathological" if args.is_empty() => RateSequence::Pathological,
        "table" => RateSequence::Table { log2: read_rate_table(Path::new(args))? },
        _ => return Err(CliError::Config(format!("unknown rate descriptor '{s}'"))),
    };
    seq.validate()?;
    Ok(seq)
}

/// `affine:s` is `f(k) = k + s`, `power:p` is `(k+1)^p`, `table:w0,w1,...`.
pub fn parse_weight(s: &str) -> Result<WeightFunction, CliError> {
    if let Some(f) = json_or_file::<WeightFunction>(s, "weight")? {
        return Ok(f);
    }
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    Ok(match kind {
        "constant" => WeightFunction::Constant { c: numbers(kind, args, 1)?[0] },
        "affine" => WeightFunction::Affine { shift: numbers(kind, args, 1)?[0] },
        "power" => WeightFunction::Power { p: numbers(kind, args, 1)?[0] },
        "table" => {
            let n = args.split(',').count();
            WeightFunction::Table { values: numbers(kind, args, n)? }
        }
        _ => return Err(CliError::Config(format!("unknown weight descriptor '{s}'"))),
    })
}

pub fn parse_stop(count: Option<u64>, horizon: Option<f64>) -> Result<Option<Stop>, CliError> {
    match (count, horizon) {
        (Some(_), Some(_)) => Err(CliError::Config("--count and --horizon are mutually exclusive".into())),
        (Some(n), None) => Ok(Some(Stop::Count(n))),
        (None, Some(t)) => Ok(Some(Stop::Horizon(t))),
        (None, None) => Ok(None),
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    let n = s.split(',').count();
    numbers("list", s, n)
}
