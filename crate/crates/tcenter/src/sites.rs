//! CSV form of the ²⁹Si site table.
//!
//! Header: `label,distance_a,a_zz_mhz,a_xz_left_mhz,a_xz_right_mhz`. Blank
//! distance means unknown; a non-blank right value marks a mirror pair.

use std::io::{Read, Write};

use tcenter_core::hyperfine::{SiteRecord, SiteTable};

use crate::error::{AppError, AppResult};

pub const HEADER: [&str; 5] = ["label", "distance_a", "a_zz_mhz", "a_xz_left_mhz", "a_xz_right_mhz"];

/// Site table shipped with the crate: the 24 near-defect site classes with
/// `|A_zz| > 1 MHz` from published first-principles calculations.
pub const BUNDLED_CSV: &str = include_str!("../data/hyperfine_sites.csv");

pub fn bundled_table() -> SiteTable {
    load_table(BUNDLED_CSV.as_bytes(), "bundled hyperfine_sites.csv").expect("bundled table parses")
}

fn number(field: &str, column: &str, source_name: &str, line: usize) -> AppResult<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| AppError::parse(source_name, line, format!("column `{column}`: `{field}` is not a finite number")))
}

fn optional(field: &str, column: &str, source_name: &str, line: usize) -> AppResult<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        number(field, column, source_name, line).map(Some)
    }
}

/// Parses a site table. An empty input yields an empty table.
pub fn load_table<R: Read>(reader: R, source_name: &str) -> AppResult<SiteTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut records: Vec<SiteRecord> = Vec::new();
    let mut header_seen = false;
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            AppError::parse(source_name, line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if !header_seen {
            let got: Vec<&str> = row.iter().map(str::trim).collect();
            if got != HEADER {
                return Err(AppError::parse(source_name, line, format!("expected header `{}`, got `{}`", HEADER.join(","), got.join(","))));
            }
            header_seen = true;
            continue;
        }
        if row.len() != HEADER.len() {
            return Err(AppError::parse(source_name, line, format!("expected {} fields, got {}", HEADER.len(), row.len())));
        }
        let label = row[0].trim().to_string();
        if label.is_empty() {
            return Err(AppError::parse(source_name, line, "empty site label"));
        }
        if records.iter().any(|r| r.label == label) {
            return Err(AppError::parse(source_name, line, format!("duplicate site label `{label}`")));
        }
        let distance = optional(&row[1], HEADER[1], source_name, line)?;
        if let Some(d) = distance {
            if d <= 0.0 {
                return Err(AppError::parse(source_name, line, format!("distance must be positive, got {d}")));
            }
        }
        records.push(SiteRecord {
            label,
            distance_angstrom: distance,
            a_zz_mhz: number(&row[2], HEADER[2], source_name, line)?,
            a_xz_left_mhz: number(&row[3], HEADER[3], source_name, line)?,
            a_xz_right_mhz: optional(&row[4], HEADER[4], source_name, line)?,
        });
    }
    Ok(SiteTable::new(records, source_name)?)
}

/// Writes a table in the same CSV layout; numbers use the shortest
/// representation that parses back to the same value.
pub fn write_table<W: Write>(table: &SiteTable, writer: W) -> AppResult<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| AppError::Input(format!("writing site table: {e}"));
    w.write_record(HEADER).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
    for r in &table.records {
        w.write_record([r.label.clone(), opt(r.distance_angstrom), format!("{:?}", r.a_zz_mhz), format!("{:?}", r.a_xz_left_mhz), opt(r.a_xz_right_mhz)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| AppError::Input(format!("writing site table: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tcenter_core::hyperfine::count_sites_above;

    #[test]
    fn bundled_counts() {
        let t = bundled_table();
        assert_eq!(t.records.len(), 24);
        assert_eq!(count_sites_above(&t, 1.0), 46);
        assert_eq!(count_sites_above(&t, 2.0), 26);
        let p = t.records.iter().find(|r| r.label == "P").unwrap();
        assert_eq!(p.multiplicity(), 2);
        assert!(t.records.iter().all(|r| r.a_zz_mhz.abs() <= p.a_zz_mhz.abs()));
        assert_eq!(t.records.iter().find(|r| r.label == "A").unwrap().multiplicity(), 1);
    }

    #[test]
    fn empty_input_is_an_empty_table() {
        assert!(load_table("".as_bytes(), "empty").unwrap().records.is_empty());
        assert!(load_table(HEADER.join(",").as_bytes(), "header only").unwrap().records.is_empty());
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let text = "label,distance_a,a_zz_mhz,a_xz_left_mhz,a_xz_right_mhz\nA,,31.9,0.8,\nB,,abc,0.1,\n";
        let err = load_table(text.as_bytes(), "t.csv").unwrap_err();
        assert!(err.to_string().starts_with("t.csv:3:"), "{err}");
        let dup = "label,distance_a,a_zz_mhz,a_xz_left_mhz,a_xz_right_mhz\nA,,31.9,0.8,\nA,,1.5,0.1,\n";
        assert!(load_table(dup.as_bytes(), "d.csv").unwrap_err().to_string().contains("d.csv:3: duplicate"));
        assert_eq!(load_table("x,y\n".as_bytes(), "h.csv").unwrap_err().exit_code(), 2);
    }
}
