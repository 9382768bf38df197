//! Output writers: CSV tables, JSON manifests, gnuplot scripts.
//!
//! JSON values are checked for non-finite numbers before anything is written,
//! since the JSON encoder would otherwise silently emit `null`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::ser::{self, Serialize};
use serde::Serializer;

use crate::config::RunConfig;
use crate::density::DensityField;
use crate::error::{Error, Result};

/// Version of every JSON manifest written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(serde::Serialize)]
struct Manifest<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    code_version: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

/// Writes `{schema_version, kind, code_version, config, result}` as pretty JSON.
pub fn write_manifest<T: Serialize>(
    path: &Path,
    kind: &str,
    config: &RunConfig,
    result: &T,
) -> Result<()> {
    let m = Manifest {
        schema_version: SCHEMA_VERSION,
        kind,
        code_version: env!("CARGO_PKG_VERSION"),
        config,
        result,
    };
    let text = to_json(&m)?;
    write_text(path, &(text + "\n"))
}

/// Pretty JSON, refusing NaN and infinities.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    value
        .serialize(FiniteCheck { path: "$".into() })
        .map_err(|e| Error::Serialize(e.0))?;
    serde_json::to_string_pretty(value).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// CSV with a header row. Every value must be finite.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    if let Some((i, _)) = rows
        .iter()
        .enumerate()
        .find(|(_, r)| r.iter().any(|v| !v.is_finite()) || r.len() != header.len())
    {
        return Err(Error::Serialize(format!(
            "row {i} of {} is non-finite or has the wrong width",
            path.display()
        )));
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Serialize(format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:?}")))
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `x,rho` table of a density field.
pub fn write_density_csv(path: &Path, field: &DensityField) -> Result<()> {
    let rows: Vec<Vec<f64>> = field
        .values
        .iter()
        .enumerate()
        .map(|(i, &r)| vec![field.grid.x(i), r])
        .collect();
    write_csv(path, &["x", "rho"], &rows)
}

/// Several fields on one grid: columns `x, <names...>`.
pub fn write_fields_csv(path: &Path, names: &[&str], fields: &[&DensityField]) -> Result<()> {
    let first = fields
        .first()
        .ok_or_else(|| Error::Input("no fields to write".into()))?;
    if fields.iter().any(|f| f.grid != first.grid) || names.len() != fields.len() {
        return Err(Error::Precondition("fields must share one grid and be named".into()));
    }
    let mut header = vec!["x"];
    header.extend_from_slice(names);
    let rows: Vec<Vec<f64>> = (0..first.grid.nx)
        .map(|i| {
            let mut r = vec![first.grid.x(i)];
            r.extend(fields.iter().map(|f| f.values[i]));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Writes `<stem>.dat` (whitespace columns) and `<stem>.gp`, a gnuplot script
/// plotting columns 2.. against column 1 on log-log axes.
pub fn write_gnuplot(
    dir: &Path,
    stem: &str,
    title: &str,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<(PathBuf, PathBuf)> {
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Serialize(format!("{stem}: non-finite plot data")));
    }
    let dat = dir.join(format!("{stem}.dat"));
    let gp = dir.join(format!("{stem}.gp"));
    let mut data = format!("# {}\n", columns.join(" "));
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        data.push_str(&line.join(" "));
        data.push('\n');
    }
    write_text(&dat, &data)?;
    let mut script = String::new();
    script.push_str("set terminal pngcairo size 800,600\n");
    script.push_str(&format!("set output '{stem}.png'\n"));
    script.push_str(&format!("set title '{title}'\n"));
    script.push_str("set logscale xy\nset key left top\n");
    script.push_str(&format!("set xlabel '{}'\n", columns[0]));
    let plots: Vec<String> = (1..columns.len())
        .map(|c| {
            format!(
                "'{stem}.dat' using 1:{} with linespoints title '{}'",
                c + 1,
                columns[c]
            )
        })
        .collect();
    script.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    write_text(&gp, &script)?;
    Ok((dat, gp))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Appends a line to a file, creating it if needed.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// A serializer that only walks the value and fails on the first non-finite float.

#[derive(Debug)]
struct CheckError(String);

impl std::fmt::Display for CheckError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckError {}

impl ser::Error for CheckError {
    fn custom<T: std::fmt::Display>(msg: T) -> Self {
        CheckError(msg.to_string())
    }
}

#[derive(Clone)]
struct FiniteCheck {
    path: String,
}

impl FiniteCheck {
    fn float(&self, v: f64) -> std::result::Result<(), CheckError> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(CheckError(format!("non-finite number {v} at {}", self.path)))
        }
    }

    fn child(&self, key: impl std::fmt::Display) -> FiniteCheck {
        FiniteCheck {
            path: format!("{}.{key}", self.path),
        }
    }
}

struct Seq {
    check: FiniteCheck,
    index: usize,
}

impl Seq {
    fn visit<T: ?Sized + Serialize>(&mut self, v: &T) -> std::result::Result<(), CheckError> {
        let c = self.check.child(format!("[{}]", self.index));
        self.index += 1;
        v.serialize(c)
    }
}

macro_rules! seq_impl {
    ($tr:ident, $method:ident) => {
        impl ser::$tr for Seq {
            type Ok = ();
            type Error = CheckError;
            fn $method<T: ?Sized + Serialize>(&mut self, v: &T) -> std::result::Result<(), CheckError> {
                self.visit(v)
            }
            fn end(self) -> std::result::Result<(), CheckError> {
                Ok(())
            }
        }
    };
}

seq_impl!(SerializeSeq, serialize_element);
seq_impl!(SerializeTuple, serialize_element);
seq_impl!(SerializeTupleStruct, serialize_field);
seq_impl!(SerializeTupleVariant, serialize_field);

impl ser::SerializeMap for Seq {
    type Ok = ();
    type Error = CheckError;
    fn serialize_key<T: ?Sized + Serialize>(&mut self, k: &T) -> std::result::Result<(), CheckError> {
        k.serialize(self.check.clone())
    }
    fn serialize_value<T: ?Sized + Serialize>(&mut self, v: &T) -> std::result::Result<(), CheckError> {
        self.visit(v)
    }
    fn end(self) -> std::result::Result<(), CheckError> {
        Ok(())
    }
}

macro_rules! struct_impl {
    ($tr:ident) => {
        impl ser::$tr for Seq {
            type Ok = ();
            type Error = CheckError;
            fn serialize_field<T: ?Sized + Serialize>(
                &mut self,
                key: &'static str,
                v: &T,
            ) -> std::result::Result<(), CheckError> {
                v.serialize(self.check.child(key))
            }
            fn end(self) -> std::result::Result<(), CheckError> {
                Ok(())
            }
        }
    };
}

struct_impl!(SerializeStruct);
struct_impl!(SerializeStructVariant);

impl Serializer for FiniteCheck {
    type Ok = ();
    type Error = CheckError;
    type SerializeSeq = Seq;
    type SerializeTuple = Seq;
    type SerializeTupleStruct = Seq;
    type SerializeTupleVariant = Seq;
    type SerializeMap = Seq;
    type SerializeStruct = Seq;
    type SerializeStructVariant = Seq;

    fn serialize_bool(self, _: bool) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_i8(self, _: i8) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_i16(self, _: i16) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_i32(self, _: i32) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_i64(self, _: i64) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_u8(self, _: u8) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_u16(self, _: u16) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_u32(self, _: u32) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_u64(self, _: u64) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_f32(self, v: f32) -> std::result::Result<(), CheckError> {
        self.float(v as f64)
    }
    fn serialize_f64(self, v: f64) -> std::result::Result<(), CheckError> {
        self.float(v)
    }
    fn serialize_char(self, _: char) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_str(self, _: &str) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_bytes(self, _: &[u8]) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_none(self) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_some<T: ?Sized + Serialize>(self, v: &T) -> std::result::Result<(), CheckError> {
        v.serialize(self)
    }
    fn serialize_unit(self) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_unit_struct(self, _: &'static str) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_unit_variant(
        self,
        _: &'static str,
        _: u32,
        _: &'static str,
    ) -> std::result::Result<(), CheckError> {
        Ok(())
    }
    fn serialize_newtype_struct<T: ?Sized + Serialize>(
        self,
        _: &'static str,
        v: &T,
    ) -> std::result::Result<(), CheckError> {
        v.serialize(self)
    }
    fn serialize_newtype_variant<T: ?Sized + Serialize>(
        self,
        _: &'static str,
        _: u32,
        variant: &'static str,
        v: &T,
    ) -> std::result::Result<(), CheckError> {
        v.serialize(self.child(variant))
    }
    fn serialize_seq(self, _: Option<usize>) -> std::result::Result<Seq, CheckError> {
        Ok(Seq { check: self, index: 0 })
    }
    fn serialize_tuple(self, _: usize) -> std::result::Result<Seq, CheckError> {
        Ok(Seq { check: self, index: 0 })
    }
    fn serialize_tuple_struct(
        self,
        _: &'static str,
        _: usize,
    ) -> std::result::Result<Seq, CheckError> {
        Ok(Seq { check: self, index: 0 })
    }
    fn serialize_tuple_variant(
        self,
        _: &'static str,
        _: u32,
        variant: &'static str,
        _: usize,
    ) -> std::result::Result<Seq, CheckError> {
        Ok(Seq {
            check: self.child(variant),
            index: 0,
        })
    }
    fn serialize_map(self, _: Option<usize>) -> std::result::Result<Seq, CheckError> {
        Ok(Seq { check: self, index: 0 })
    }
    fn serialize_struct(self, _: &'static str, _: usize) -> std::result::Result<Seq, CheckError> {
        Ok(Seq { check: self, index: 0 })
    }
    fn serialize_struct_variant(
        self,
        _: &'static str,
        _: u32,
        variant: &'static str,
        _: usize,
    ) -> std::result::Result<Seq, CheckError> {
        Ok(Seq {
            check: self.child(variant),
            index: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Grid1d, Provenance};

    #[derive(serde::Serialize)]
    struct Probe {
        a: f64,
        b: Vec<(f64, f64)>,
        c: Option<f64>,
    }

    #[test]
    fn non_finite_json_is_refused() {
        let ok = Probe {
            a: 1.0,
            b: vec![(0.0, 2.0)],
            c: None,
        };
        assert!(to_json(&ok).is_ok());
        let bad = Probe {
            a: 1.0,
            b: vec![(0.0, f64::NAN)],
            c: None,
        };
        let msg = to_json(&bad).unwrap_err().to_string();
        assert!(msg.contains("$.b.[0].[1]"), "{msg}");
        let bad = Probe {
            a: 1.0,
            b: vec![],
            c: Some(f64::INFINITY),
        };
        assert!(to_json(&bad).is_err());
    }

    #[test]
    fn density_csv_has_one_row_per_cell() {
        let dir = tempfile::tempdir().unwrap();
        let field = DensityField {
            grid: Grid1d::new(4, 2.0),
            values: vec![0.1, 0.2, 0.3, 0.4],
            time: 0.0,
            provenance: Provenance::Macro,
        };
        let p = dir.path().join("rho.csv");
        write_density_csv(&p, &field).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,rho");
        assert_eq!(lines.len(), 5);
        assert!(write_csv(&p, &["a"], &[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn manifest_echoes_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let cfg = RunConfig::default();
        write_manifest(&p, "probe", &cfg, &vec![1.0, 2.0]).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        let echoed: RunConfig = serde_json::from_value(v["config"].clone()).unwrap();
        assert_eq!(echoed, cfg);
    }
}
