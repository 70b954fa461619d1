//! CSV and JSON renderings of simulation and analysis results.
//!
//! Every writer returns bytes so a run can hash its outputs before they
//! touch the disk. Numbers use the shortest text that parses back to the
//! same `f64`.

use num_complex::Complex64 as C64;
use serde_json::{json, Value};
use tcenter_core::fitting::Covariance;
use tcenter_core::noise::DecayCurve;
use tcenter_core::readout::ReadoutRecord;
use tcenter_core::register::TransitionCatalog;
use tcenter_core::tomography::{Entry, TomographyResult};

use crate::error::{AppError, AppResult};

/// Shortest round-trip decimal text of `x`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// CSV document with a header row.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn json_bytes(value: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("json value serialises");
    out.push(b'\n');
    out
}

pub const CATALOG_HEADER: [&str; 5] = ["from", "to", "freq_mhz", "abs_drive", "kind"];

/// Transition table, lower level first.
pub fn catalog_csv(cat: &TransitionCatalog) -> Vec<u8> {
    csv_bytes(
        &CATALOG_HEADER,
        cat.transitions.iter().map(|t| {
            vec![cat.label(t.lower).to_string(), cat.label(t.upper).to_string(), num(t.freq_mhz), num(t.abs_drive()), t.kind.name().to_string()]
        }),
    )
}

/// Level diagram data: one row per eigenstate in energy order.
pub fn levels_csv(cat: &TransitionCatalog) -> Vec<u8> {
    csv_bytes(
        &["index", "label", "energy_mhz", "electron", "mixed"],
        cat.levels.levels.iter().enumerate().map(|(i, l)| {
            let electron = if l.label.electron_up() { "up" } else { "down" };
            vec![i.to_string(), l.label.to_string(), num(l.energy_mhz), electron.to_string(), l.mixed.to_string()]
        }),
    )
}

/// Monte Carlo decay curve `sweep_value,mean,stderr`.
pub fn decay_csv(curve: &DecayCurve) -> Vec<u8> {
    csv_bytes(
        &["sweep_value", "mean", "stderr"],
        curve.sweep.iter().zip(&curve.mean).zip(&curve.stderr).map(|((x, m), s)| vec![num(*x), num(*m), num(*s)]),
    )
}

/// Noise-free sweep `sweep_value,value`.
pub fn sweep_csv(points: &[(f64, f64)]) -> Vec<u8> {
    csv_bytes(&["sweep_value", "value"], points.iter().map(|(x, y)| vec![num(*x), num(*y)]))
}

/// Plot-ready trace `x,y,yerr`.
pub fn plot_csv(x: &[f64], y: &[f64], yerr: &[f64]) -> Vec<u8> {
    csv_bytes(&["x", "y", "yerr"], x.iter().zip(y).zip(yerr).map(|((x, y), e)| vec![num(*x), num(*y), num(*e)]))
}

/// One row per shot and readout cycle.
pub fn readout_csv<'a>(records: impl IntoIterator<Item = &'a ReadoutRecord>) -> Vec<u8> {
    csv_bytes(
        &["shot", "cycle", "counts", "state"],
        records.into_iter().flat_map(|r| {
            r.counts.iter().enumerate().map(move |(c, n)| vec![r.shot.to_string(), c.to_string(), n.to_string(), r.state.clone()])
        }),
    )
}

pub fn histogram_csv(hist: &[(u32, f64)]) -> Vec<u8> {
    csv_bytes(&["counts_bin", "frequency"], hist.iter().map(|(c, f)| vec![c.to_string(), num(*f)]))
}

fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn covariance_json(names: &[&str], cov: &Covariance) -> Value {
    json!({ "parameters": names, "matrix": cov.rows() })
}

/// Partial two-nucleus density matrix with its fit. Entries are `[re, im]`.
pub fn tomography_json(result: &TomographyResult) -> Value {
    let m = &result.matrix;
    let entries: serde_json::Map<String, Value> = Entry::ALL
        .iter()
        .map(|&e| (e.name().to_string(), m.entry(e).map_or(Value::Null, complex)))
        .collect();
    json!({
        "state": result.state.name(),
        "basis": ["⇓⇓", "⇓⇑", "⇑⇓", "⇑⇑"],
        "populations": m.populations,
        "populations_stderr": result.populations_stderr,
        "entries": entries,
        "unknown": m.unknown().iter().map(|e| e.name()).collect::<Vec<_>>(),
        "fidelity": result.fidelity,
        "fidelity_stderr": result.fidelity_stderr,
        "fit": {
            "a": result.fit.a,
            "b": result.fit.b,
            "offset": result.fit.offset,
            "rms_residual": result.fit.rms_residual,
            "covariance": covariance_json(&["offset", "a", "b"], &result.fit.covariance),
        },
    })
}

/// Numeric series read from a CSV file with a header and two or three columns.
#[derive(Clone, Debug, PartialEq)]
pub struct XyData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

/// Reads `x,y[,stderr]`; column names are free, their count is not.
pub fn read_xy(text: &str, source_name: &str) -> AppResult<XyData> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| AppError::parse(source_name, 1, e.to_string()))?.clone();
    let width = header.len();
    if !(2..=3).contains(&width) {
        return Err(AppError::parse(source_name, 1, format!("expected columns x,y[,stderr], got {} columns", width)));
    }
    let mut data = XyData { x: vec![], y: vec![], stderr: (width == 3).then(Vec::new) };
    for row in rdr.records() {
        let row = row.map_err(|e| AppError::parse(source_name, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let mut vals = [0.0; 3];
        for (k, field) in row.iter().enumerate() {
            vals[k] = field
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AppError::parse(source_name, line, format!("column {}: `{field}` is not a finite number", k + 1)))?;
        }
        data.x.push(vals[0]);
        data.y.push(vals[1]);
        if let Some(s) = data.stderr.as_mut() {
            s.push(vals[2]);
        }
    }
    if data.x.is_empty() {
        return Err(AppError::Input(format!("{source_name}: no data rows")));
    }
    Ok(data)
}
