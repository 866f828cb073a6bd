//! Field snapshot files.
//!
//! ```text
//! LRBS-FIELD v1
//! dim=<d> extent=<e1,...,ed> kind=<int|real> step=<n> seed=<s>
//! <row-major whitespace-separated values>
//! ```
//!
//! Integers are written verbatim; reals use the shortest decimal that
//! round-trips, so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use lrbs_core::geometry::Geometry;
use lrbs_core::{CountField, Field64};

use crate::{CliError, CliResult};

pub const MAGIC: &str = "LRBS-FIELD v1";

/// A loaded snapshot: the field plus its header metadata.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Int { field: CountField, step: u64, seed: u64 },
    Real { field: Field64, step: u64, seed: u64 },
}

impl Snapshot {
    pub fn step(&self) -> u64 {
        match self {
            Snapshot::Int { step, .. } | Snapshot::Real { step, .. } => *step,
        }
    }
}

fn header(dim: usize, extents: &[usize], kind: &str, step: u64, seed: u64) -> String {
    let extent =
        extents.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",");
    format!("dim={dim} extent={extent} kind={kind} step={step} seed={seed}")
}

pub fn render_count_field(field: &CountField, step: u64, seed: u64) -> String {
    let geom = field.geometry();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "{}", header(geom.dim(), geom.extents(), "int", step, seed));
    write_rows(&mut out, geom, |i| field.get(i).to_string());
    out
}

pub fn render_real_field(field: &Field64, step: u64, seed: u64) -> String {
    let geom = field.geometry();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "{}", header(geom.dim(), geom.extents(), "real", step, seed));
    write_rows(&mut out, geom, |i| field.get(i).to_string());
    out
}

fn write_rows(out: &mut String, geom: &Geometry, value: impl Fn(usize) -> String) {
    // one line per trailing-axis row
    let row = *geom.extents().last().expect("nonempty extents");
    for i in 0..geom.len() {
        out.push_str(&value(i));
        if (i + 1) % row == 0 {
            out.push('\n');
        } else {
            out.push(' ');
        }
    }
}

pub fn save_count_field(field: &CountField, step: u64, seed: u64, path: &Path) -> CliResult<()> {
    std::fs::write(path, render_count_field(field, step, seed))?;
    Ok(())
}

pub fn save_real_field(field: &Field64, step: u64, seed: u64, path: &Path) -> CliResult<()> {
    std::fs::write(path, render_real_field(field, step, seed))?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> CliResult<Snapshot> {
    let text = std::fs::read_to_string(path)?;
    parse_snapshot(&text, &path.display().to_string())
}

pub fn parse_snapshot(text: &str, path: &str) -> CliResult<Snapshot> {
    let err = |line: usize, message: String| CliError::Snapshot {
        path: path.to_string(),
        line,
        message,
    };
    let mut lines = text.lines();
    let magic = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    if magic != MAGIC {
        return Err(err(1, format!("bad magic '{magic}', expected '{MAGIC}'")));
    }
    let head = lines.next().ok_or_else(|| err(2, "missing header".into()))?;
    let mut dim = None;
    let mut extent: Option<Vec<usize>> = None;
    let mut kind = None;
    let mut step = None;
    let mut seed = None;
    for part in head.split_whitespace() {
        let (key, value) =
            part.split_once('=').ok_or_else(|| err(2, format!("malformed field '{part}'")))?;
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(|_| err(2, "bad dim".into()))?),
            "extent" => {
                extent = Some(
                    value
                        .split(',')
                        .map(|p| p.parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err(2, "bad extent".into()))?,
                )
            }
            "kind" => kind = Some(value.to_string()),
            "step" => step = Some(value.parse::<u64>().map_err(|_| err(2, "bad step".into()))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| err(2, "bad seed".into()))?),
            other => return Err(err(2, format!("unknown header field '{other}'"))),
        }
    }
    let dim = dim.ok_or_else(|| err(2, "missing dim".into()))?;
    let extent = extent.ok_or_else(|| err(2, "missing extent".into()))?;
    let kind = kind.ok_or_else(|| err(2, "missing kind".into()))?;
    let step = step.ok_or_else(|| err(2, "missing step".into()))?;
    let seed = seed.ok_or_else(|| err(2, "missing seed".into()))?;
    if extent.len() != dim {
        return Err(err(2, format!("extent has {} axes, dim says {dim}", extent.len())));
    }
    let geometry = Geometry::torus(extent);
    let expected = geometry.len();

    match kind.as_str() {
        "int" => {
            let mut values: Vec<u64> = Vec::with_capacity(expected);
            for (offset, line) in lines.enumerate() {
                let line_no = offset + 3;
                for token in line.split_whitespace() {
                    let v = token.parse::<u64>().map_err(|_| {
                        err(line_no, format!("'{token}' is not a nonnegative integer"))
                    })?;
                    values.push(v);
                }
            }
            if values.len() != expected {
                return Err(err(
                    3,
                    format!("value count {} does not match extent ({expected})", values.len()),
                ));
            }
            let field = CountField::from_values(geometry, values)?;
            Ok(Snapshot::Int { field, step, seed })
        }
        "real" => {
            let mut values: Vec<f64> = Vec::with_capacity(expected);
            for (offset, line) in lines.enumerate() {
                let line_no = offset + 3;
                for token in line.split_whitespace() {
                    let v = token
                        .parse::<f64>()
                        .map_err(|_| err(line_no, format!("'{token}' is not a real number")))?;
                    values.push(v);
                }
            }
            if values.len() != expected {
                return Err(err(
                    3,
                    format!("value count {} does not match extent ({expected})", values.len()),
                ));
            }
            let field = Field64::from_values(geometry, values)?;
            Ok(Snapshot::Real { field, step, seed })
        }
        other => Err(err(2, format!("unknown kind '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lrbs_core::field::Field;
    use proptest::prelude::*;

    #[test]
    fn int_round_trip() {
        let geom = Geometry::torus(vec![3, 4]);
        let field = CountField::from_fn(geom, |c| (3 * c[0] + c[1]) as u64);
        let text = render_count_field(&field, 7, 42);
        match parse_snapshot(&text, "mem").unwrap() {
            Snapshot::Int { field: loaded, step, seed } => {
                assert_eq!(loaded, field);
                assert_eq!((step, seed), (7, 42));
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn truncation_reports_line() {
        let geom = Geometry::torus(vec![3, 4]);
        let field = CountField::from_fn(geom, |_| 1);
        let text = render_count_field(&field, 0, 0);
        let cut = &text[..text.len() - 4];
        let err = parse_snapshot(cut, "mem").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn real_value_in_int_file_is_an_error() {
        let text = "LRBS-FIELD v1\ndim=1 extent=3 kind=int step=0 seed=0\n1 1.5 2\n";
        let err = parse_snapshot(text, "mem").unwrap_err();
        assert!(err.to_string().contains("1.5"), "{err}");
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn real_round_trip_is_bit_exact(values in prop::collection::vec(0.0f64..1e6, 12)) {
            let geom = Geometry::torus(vec![3, 4]);
            let field = Field::from_values(geom, values).unwrap();
            let text = render_real_field(&field, 1, 2);
            match parse_snapshot(&text, "mem").unwrap() {
                Snapshot::Real { field: loaded, .. } => {
                    for i in 0..field.len() {
                        prop_assert_eq!(loaded.get(i).to_bits(), field.get(i).to_bits());
                    }
                }
                _ => prop_assert!(false, "wrong kind"),
            }
        }
    }
}
