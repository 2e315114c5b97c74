//! Sample, lift, persist and reload: the artifacts a run writes must read
//! back to the same objects.

use heatlift_core::dyadic::lift_level;
use heatlift_core::rough::{read_sheet_binary, write_sheet_binary, SheetRecord};
use heatlift_core::sampler::{sample_field, FieldSample, SpectralConfig};

fn config() -> SpectralConfig {
    SpectralConfig {
        n_modes: 32,
        time_horizon: 1.0,
        n_time: 4,
        grid_level: 6,
        dim: 3,
        seed: 21,
    }
}

#[test]
fn field_binary_round_trip() {
    let f = sample_field(&config(), 2).unwrap();
    let mut buf = Vec::new();
    f.write_binary(&mut buf).unwrap();
    let g = FieldSample::read_binary(buf.as_slice()).unwrap();
    assert!(f == g);
    assert!(FieldSample::read_binary(&buf[..buf.len() - 1]).is_err());
}

#[test]
fn field_csv_has_schema_and_one_row_per_value() {
    let f = sample_field(&config(), 0).unwrap();
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: heatlift.field.v1"));
    assert!(lines.next().unwrap().contains(','));
    assert_eq!(lines.count(), f.values().len());
}

#[test]
fn lifted_sheet_round_trips_through_both_codecs() {
    let f = sample_field(&config(), 1).unwrap();
    let sheet = lift_level(&f, 4).unwrap();

    let mut buf = Vec::new();
    write_sheet_binary(&sheet, &mut buf).unwrap();
    let back = read_sheet_binary(buf.as_slice()).unwrap();
    assert_eq!(back.dist_infty(&sheet).unwrap(), 0.0);
    assert_eq!(back.times(), sheet.times());

    let json = serde_json::to_string(&SheetRecord::from(&sheet)).unwrap();
    let rec: SheetRecord = serde_json::from_str(&json).unwrap();
    let again = heatlift_core::rough::RoughSheet::try_from(rec).unwrap();
    assert_eq!(again.dist_infty(&sheet).unwrap(), 0.0);
}

#[test]
fn corrupt_sheet_is_rejected() {
    let f = sample_field(&config(), 1).unwrap();
    let mut buf = Vec::new();
    write_sheet_binary(&lift_level(&f, 2).unwrap(), &mut buf).unwrap();
    buf[0] = b'X';
    assert!(read_sheet_binary(buf.as_slice()).is_err());
}
