//! Round trips of the file formats.

use proptest::prelude::*;
use tcenter::config::RunConfig;
use tcenter::export::{plot_csv, read_xy, sweep_csv};
use tcenter::sites::{bundled_table, load_table, write_table};
use tcenter_core::hyperfine::{SiteRecord, SiteTable};

fn record() -> impl Strategy<Value = SiteRecord> {
    (
        "[A-Z][a-z0-9]{0,3}",
        proptest::option::of(0.5..15.0f64),
        -120.0..120.0f64,
        -5.0..5.0f64,
        proptest::option::of(-5.0..5.0f64),
    )
        .prop_map(|(label, d, zz, l, r)| SiteRecord { label, distance_angstrom: d, a_zz_mhz: zz, a_xz_left_mhz: l, a_xz_right_mhz: r })
}

fn tables() -> impl Strategy<Value = SiteTable> {
    proptest::collection::vec(record(), 0..12).prop_map(|mut records| {
        records.sort_by(|a, b| a.label.cmp(&b.label));
        records.dedup_by(|a, b| a.label == b.label);
        SiteTable::new(records, "generated").unwrap()
    })
}

#[test]
fn bundled_table_survives_a_write_read_cycle() {
    let table = bundled_table();
    let mut bytes = Vec::new();
    write_table(&table, &mut bytes).unwrap();
    let back = load_table(bytes.as_slice(), "copy.csv").unwrap();
    assert_eq!(back.records, table.records);
}

#[test]
fn every_preset_loads() {
    for name in ["paper-T1", "paper-noise-correlated", "paper-noise-uncorrelated", "electron-ou"] {
        let cfg = RunConfig::preset(name).unwrap();
        assert_eq!(cfg.register.nuclei.len(), 2, "{name}");
        cfg.noise.validate(3).unwrap();
    }
}

proptest! {
    #[test]
    fn site_tables_round_trip(table in tables()) {
        let mut bytes = Vec::new();
        write_table(&table, &mut bytes).unwrap();
        let back = load_table(bytes.as_slice(), "t.csv").unwrap();
        prop_assert_eq!(back.records, table.records);
    }

    #[test]
    fn sweeps_round_trip_exactly(points in proptest::collection::vec((-1e6..1e6f64, -1.0..1.0f64), 1..40)) {
        let d = read_xy(std::str::from_utf8(&sweep_csv(&points)).unwrap(), "s.csv").unwrap();
        prop_assert_eq!(d.x, points.iter().map(|p| p.0).collect::<Vec<_>>());
        prop_assert_eq!(d.y, points.iter().map(|p| p.1).collect::<Vec<_>>());
        let err: Vec<f64> = points.iter().map(|p| p.1.abs() * 1e-3).collect();
        let x: Vec<f64> = points.iter().map(|p| p.0).collect();
        let y: Vec<f64> = points.iter().map(|p| p.1).collect();
        let d = read_xy(std::str::from_utf8(&plot_csv(&x, &y, &err)).unwrap(), "p.csv").unwrap();
        prop_assert_eq!(d.stderr, Some(err));
    }
}
