//! Synthetic and recorded regulation traces.

use std::io::Read;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market::RegulationTrace;

/// Two seconds in hours, the usual AGC signal interval.
pub const TWO_SECONDS: f64 = 2.0 / 3600.0;

/// I.i.d. set-points uniform on `[-power, power]`.
///
/// The generator is ChaCha8 seeded with `seed_from_u64(seed)`; each sample
/// takes the top 53 bits of one `next_u64` as `x` in `[0, 1)` and maps it to
/// `(2x - 1) * power`. The output is bit-identical across platforms.
pub fn generate_trace(
    seed: u64,
    steps: usize,
    power: f64,
    interval: f64,
) -> Result<RegulationTrace> {
    if steps == 0 {
        return Err(Error::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let setpoints = (0..steps)
        .map(|_| {
            let x = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            (2.0 * x - 1.0) * power
        })
        .collect();
    RegulationTrace::new(interval, setpoints, power)
}

/// How to read the `r` column of a trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceFormat {
    /// `r` is in `[-1, 1]` and gets multiplied by `power`.
    pub normalized: bool,
    /// Flip the sign (for feeds where positive means discharge).
    pub negate: bool,
    /// Interval duration in hours.
    pub interval: f64,
}

impl Default for TraceFormat {
    fn default() -> Self {
        Self {
            normalized: true,
            negate: false,
            interval: TWO_SECONDS,
        }
    }
}

/// Reads a `t,r` CSV trace. `t` only orders the rows and is not parsed.
/// Set-points outside `[-power, power]` are clipped with a warning.
pub fn load_trace_csv(
    path: impl AsRef<Path>,
    power: f64,
    format: TraceFormat,
) -> Result<RegulationTrace> {
    read_trace_csv(std::fs::File::open(path)?, power, format)
}

pub fn read_trace_csv(
    reader: impl Read,
    power: f64,
    format: TraceFormat,
) -> Result<RegulationTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    let r_col = headers
        .iter()
        .position(|h| h == "r")
        .filter(|_| headers.iter().any(|h| h == "t"))
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "expected header `t,r`".into(),
        })?;
    let scale = if format.normalized { power } else { 1.0 };
    let sign = if format.negate { -1.0 } else { 1.0 };
    let mut setpoints = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(&e, 0))?;
        let line = row.position().map_or(0, |p| p.line());
        let field = row.get(r_col).ok_or_else(|| Error::Parse {
            line,
            message: "missing `r` field".into(),
        })?;
        let value: f64 = field.parse().map_err(|_| Error::Parse {
            line,
            message: format!("`{field}` is not a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("`{field}` is not finite"),
            });
        }
        setpoints.push(sign * value * scale);
    }
    RegulationTrace::new(format.interval, setpoints, power)
}

/// Reads a one-column CSV of SoC samples (header optional).
pub fn read_profile_csv(reader: impl Read) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| csv_error(&e, 0))?;
        let line = row.position().map_or(i as u64 + 1, |p| p.line());
        if row.len() != 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected one column, found {}", row.len()),
            });
        }
        let field = &row[0];
        match field.parse::<f64>() {
            Ok(x) if x.is_finite() => out.push(x),
            Ok(_) => {
                return Err(Error::Parse {
                    line,
                    message: format!("`{field}` is not finite"),
                })
            }
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    line,
                    message: format!("`{field}` is not a number"),
                })
            }
        }
    }
    Ok(out)
}

fn csv_error(e: &csv::Error, fallback: u64) -> Error {
    if let csv::ErrorKind::Io(io) = e.kind() {
        return Error::Io(std::io::Error::new(io.kind(), io.to_string()));
    }
    Error::Parse {
        line: e.position().map_or(fallback, |p| p.line()),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_traces_repeat() {
        let a = generate_trace(7, 200, 1.0, 0.1).unwrap();
        let b = generate_trace(7, 200, 1.0, 0.1).unwrap();
        let c = generate_trace(8, 200, 1.0, 0.1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(generate_trace(1, 0, 1.0, 0.1).is_err());
    }

    #[test]
    fn uniform_sanity() {
        let p = 2.5;
        let t = generate_trace(42, 10_000, p, 0.1).unwrap();
        assert!(t.setpoints.iter().all(|r| r.abs() <= p));
        let mean = t.setpoints.iter().sum::<f64>() / 1e4;
        // sd of U(-p, p) is p / sqrt(3); sd of the mean is that over 100
        let sigma = p / 3f64.sqrt() / 100.0;
        assert!(mean.abs() < 3.0 * sigma, "{mean}");
        assert_eq!(t.repeated(2).len(), 20_000);
    }

    #[test]
    fn csv_zero_trace() {
        let t = read_trace_csv("t,r\n0,0\n1,0\n".as_bytes(), 1.0, TraceFormat::default()).unwrap();
        assert_eq!(t.setpoints, vec![0.0, 0.0]);
        assert_eq!(t.interval, TWO_SECONDS);
    }

    #[test]
    fn csv_clips_and_scales() {
        let t = read_trace_csv(
            "t,r\n0,1.5\n1,-0.5\n".as_bytes(),
            1.0,
            TraceFormat::default(),
        )
        .unwrap();
        assert_eq!(t.setpoints, vec![1.0, -0.5]);
        let raw = TraceFormat {
            normalized: false,
            negate: true,
            interval: 0.1,
        };
        let t = read_trace_csv("t,r\n0,1.5\n1,-0.5\n".as_bytes(), 2.0, raw).unwrap();
        assert_eq!(t.setpoints, vec![-1.5, 0.5]);
        let t = read_trace_csv("t,r\n0,0.5\n".as_bytes(), 2.0, TraceFormat::default()).unwrap();
        assert_eq!(t.setpoints, vec![1.0]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = read_trace_csv(
            "t,r\n0,0.1\n1,abc\n".as_bytes(),
            1.0,
            TraceFormat::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err =
            read_trace_csv("t,r\n0,0.1\n1\n".as_bytes(), 1.0, TraceFormat::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read_trace_csv("a,b\n0,1\n".as_bytes(), 1.0, TraceFormat::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(matches!(
            read_trace_csv("t,r\n".as_bytes(), 1.0, TraceFormat::default()),
            Err(Error::Empty)
        ));
    }

    #[test]
    fn profile_csv() {
        assert_eq!(
            read_profile_csv("soc\n0.1\n0.2\n".as_bytes()).unwrap(),
            vec![0.1, 0.2]
        );
        assert_eq!(
            read_profile_csv("0.1\n0.2\n".as_bytes()).unwrap(),
            vec![0.1, 0.2]
        );
        assert!(read_profile_csv("".as_bytes()).unwrap().is_empty());
        let err = read_profile_csv("0.1\nx\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(read_profile_csv("0.1,0.2\n".as_bytes()).is_err());
    }
}
