// SPDX-License-Identifier: Apache-2.0

//! Deterministic CSV/JSON emission and atomic file writes.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use weakval_core::WeakValueTrace;

use crate::CliError;

pub const TRACE_HEADER: [&str; 4] = ["gamma_tau", "re_wv", "im_wv", "postselect_prob"];

/// 17 significant digits in scientific notation; `NaN` for missing values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// JSON formatter writing every float as `{:.16e}`.
struct SciFormatter(serde_json::ser::PrettyFormatter<'static>);

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, SciFormatter(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::Output(e.to_string()))?;
    buf.push(b'\n');
    Ok(buf)
}

/// CSV with the given header and pre-formatted rows.
pub fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let out = (|| {
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    })();
    out.map_err(|e: csv::Error| CliError::Output(e.to_string()))
}

/// Trace rows `gamma_tau, re, im, probability`; gaps write `NaN` weak values.
pub fn trace_csv(trace: &WeakValueTrace) -> Result<Vec<u8>, CliError> {
    let rows = trace
        .gamma_tau()
        .into_iter()
        .zip(&trace.values)
        .zip(&trace.postselection_probs)
        .map(|((gt, v), p)| {
            let (re, im) = v.map_or((f64::NAN, f64::NAN), |v| (v.re, v.im));
            vec![fmt_f64(gt), fmt_f64(re), fmt_f64(im), fmt_f64(*p)]
        });
    to_csv(&TRACE_HEADER, rows)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}
