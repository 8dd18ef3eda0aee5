//! Text formats shared by the command-line tools.
//!
//! Floating-point cells use scientific notation with 17 significant digits,
//! which round-trips every `f64` exactly.

use std::fmt::Write as _;

use crate::assay::AliquotMeasurement;
use crate::error::{Error, Result};
use crate::kinetics::KineticsSample;

pub const TRAJECTORY_HEADER: &str = "t_s,ps_molar";
pub const MEASUREMENT_HEADER: &str = "gel_time_s,bound_counts,unbound_counts,ps_estimate_molar";

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_csv(samples: &[KineticsSample]) -> String {
    let mut out = String::with_capacity(48 * (samples.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(out, "{},{}", format_f64(s.t), format_f64(s.ps));
    }
    out
}

pub fn measurements_csv(measurements: &[AliquotMeasurement]) -> String {
    let mut out = String::with_capacity(64 * (measurements.len() + 1));
    out.push_str(MEASUREMENT_HEADER);
    out.push('\n');
    for m in measurements {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            format_f64(m.gel_time),
            m.bound_counts,
            m.unbound_counts,
            format_f64(m.ps_estimate)
        );
    }
    out
}

fn data_error(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Input(format!("line {line}: {msg}"))
}

/// Parses the measurement CSV. `p0` is attached to every row as the assumed
/// total photolyase. Blank lines are skipped; line numbers are 1-based.
pub fn parse_measurements(text: &str, p0: f64) -> Result<Vec<AliquotMeasurement>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, header)) if header == MEASUREMENT_HEADER => {}
        Some((n, header)) => {
            return Err(data_error(n, format!("expected header '{MEASUREMENT_HEADER}', got '{header}'")))
        }
        None => return Err(Error::Input("empty measurement file".into())),
    }
    let mut out = Vec::new();
    for (n, line) in lines.filter(|(_, l)| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 4 {
            return Err(data_error(n, format!("expected 4 columns, got {}", cells.len())));
        }
        let float = |i: usize, name: &str| {
            cells[i]
                .parse::<f64>()
                .map_err(|_| data_error(n, format!("{name} '{}' is not a number", cells[i])))
        };
        let count = |i: usize, name: &str| {
            cells[i]
                .parse::<u64>()
                .map_err(|_| data_error(n, format!("{name} '{}' is not a non-negative integer", cells[i])))
        };
        let gel_time = float(0, "gel_time_s")?;
        let bound = count(1, "bound_counts")?;
        let unbound = count(2, "unbound_counts")?;
        let ps = float(3, "ps_estimate_molar")?;
        if !gel_time.is_finite() {
            return Err(data_error(n, "gel_time_s must be finite"));
        }
        if ps.is_nan() && bound + unbound > 0 {
            return Err(data_error(n, "ps_estimate_molar is NaN but the bands have counts"));
        }
        if ps.is_infinite() {
            return Err(data_error(n, "ps_estimate_molar must be finite"));
        }
        out.push(AliquotMeasurement {
            gel_time,
            bound_counts: bound,
            unbound_counts: unbound,
            ps_estimate: ps,
            p0_assumed: p0,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_f64(1.0), "1.0000000000000000e0");
        assert_eq!(format_f64(1.8126924692201814e-13), "1.8126924692201814e-13");
        assert_eq!(format_f64(f64::NAN), "NaN");
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = format!("{MEASUREMENT_HEADER}\n1.0,1,2,3e-13\n2.0,x,2,3e-13\n");
        let err = parse_measurements(&text, 1e-12).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let text = format!("{MEASUREMENT_HEADER}\n1.0,1,2,abc\n");
        assert!(parse_measurements(&text, 1e-12).unwrap_err().to_string().contains("line 2"));
        let text = format!("{MEASUREMENT_HEADER}\n1.0,1,2\n");
        assert!(parse_measurements(&text, 1e-12).is_err());
        assert!(parse_measurements("t,ps\n", 1e-12).unwrap_err().to_string().contains("line 1"));
        assert!(parse_measurements("", 1e-12).is_err());
    }

    #[test]
    fn empty_aliquot_round_trips() {
        let m = vec![AliquotMeasurement::from_counts(5.0, 0, 0, 1e-12)];
        let back = parse_measurements(&measurements_csv(&m), 1e-12).unwrap();
        assert!(back[0].ps_estimate.is_nan());
        let bad = format!("{MEASUREMENT_HEADER}\n1.0,1,2,NaN\n");
        assert!(parse_measurements(&bad, 1e-12).is_err());
    }
}
