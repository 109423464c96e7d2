use std::ffi::{CStr, CString};
use std::ptr;

use terasim_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(terasim_last_error()) }.to_string_lossy().into_owned()
}

fn direct_only() -> *mut TerasimScenario {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("direct.toml");
    std::fs::write(&cfg, "[tracing]\nmax_order = 0\n").unwrap();
    let preset = CString::new("ieee").unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let mut s = ptr::null_mut();
    let st = unsafe { terasim_scenario_load(preset.as_ptr(), path.as_ptr(), &mut s) };
    assert_eq!(st, TerasimStatus::Ok, "{}", last_error());
    s
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(terasim_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn fspl_and_bad_input() {
    let mut db = 0.0;
    assert_eq!(unsafe { terasim_fspl_db(1.0, 300.0, &mut db) }, TerasimStatus::Ok);
    let oracle = 20.0 * (4.0 * std::f64::consts::PI * 300e9 / 299_792_458.0).log10();
    assert!((db - oracle).abs() < 1e-9, "{db} vs {oracle}");
    assert_eq!(unsafe { terasim_fspl_db(-1.0, 300.0, &mut db) }, TerasimStatus::Validation);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { terasim_fspl_db(1.0, 300.0, ptr::null_mut()) }, TerasimStatus::NullArgument);
}

#[test]
fn preset_errors() {
    let mut s = ptr::null_mut();
    let lab = CString::new("lab").unwrap();
    assert_eq!(unsafe { terasim_scenario_from_preset(lab.as_ptr(), &mut s) }, TerasimStatus::Validation);
    assert!(s.is_null());
    assert!(last_error().contains("lab"), "{}", last_error());
    assert_eq!(
        unsafe { terasim_scenario_from_preset(ptr::null(), &mut s) },
        TerasimStatus::NullArgument
    );
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { terasim_scenario_from_preset(bad.as_ptr().cast(), &mut s) },
        TerasimStatus::InvalidUtf8
    );
    let ieee = CString::new("ieee").unwrap();
    let missing = CString::new("/nonexistent/scenario.toml").unwrap();
    assert_eq!(
        unsafe { terasim_scenario_load(ieee.as_ptr(), missing.as_ptr(), &mut s) },
        TerasimStatus::Io
    );
    assert_eq!(
        unsafe { terasim_scenario_from_preset(ieee.as_ptr(), ptr::null_mut()) },
        TerasimStatus::NullArgument
    );
}

#[test]
fn laptop_link_direct_path() {
    let s = direct_only();
    let mut cell = TerasimCell {
        x_m: 0.0,
        y_m: 0.0,
        snr_db: 0.0,
        capacity_bps: 0.0,
        throughput_bps: 0.0,
        has_path: -1,
    };
    assert_eq!(unsafe { terasim_laptop_link(s, TerasimMode::Los, &mut cell) }, TerasimStatus::Ok);
    assert_eq!(cell.has_path, 1);
    assert!(cell.snr_db.is_finite() && cell.capacity_bps > 0.0);
    assert!((cell.throughput_bps / cell.capacity_bps - 0.1).abs() < 1e-12);
    // With only the direct path there is nothing to fall back on.
    assert_eq!(unsafe { terasim_laptop_link(s, TerasimMode::Nlos, &mut cell) }, TerasimStatus::Ok);
    assert_eq!(cell.has_path, 0);
    assert_eq!(cell.snr_db, f64::NEG_INFINITY);
    assert_eq!(cell.capacity_bps, 0.0);
    assert_eq!(
        unsafe { terasim_laptop_link(ptr::null(), TerasimMode::Los, &mut cell) },
        TerasimStatus::NullArgument
    );
    unsafe { terasim_scenario_free(s) };
}

#[test]
fn coverage_grid_access() {
    let s = direct_only();
    let mut grid = ptr::null_mut();
    assert_eq!(unsafe { terasim_coverage(s, TerasimMode::Los, 1.0, &mut grid) }, TerasimStatus::Ok);
    let (mut nx, mut ny) = (0usize, 0usize);
    assert_eq!(unsafe { terasim_coverage_dims(grid, &mut nx, &mut ny) }, TerasimStatus::Ok);
    assert_eq!((nx, ny), (6, 4));
    let mut cell = TerasimCell {
        x_m: 0.0,
        y_m: 0.0,
        snr_db: 0.0,
        capacity_bps: 0.0,
        throughput_bps: 0.0,
        has_path: 0,
    };
    assert_eq!(unsafe { terasim_coverage_cell(grid, 2, 1, &mut cell) }, TerasimStatus::Ok);
    assert!((cell.x_m - 2.05).abs() < 1e-9 && (cell.y_m - 1.05).abs() < 1e-9, "{cell:?}");
    assert_eq!(cell.has_path, 1);
    assert_eq!(unsafe { terasim_coverage_cell(grid, 6, 0, &mut cell) }, TerasimStatus::OutOfRange);
    assert!(last_error().contains("6 x 4"), "{}", last_error());
    assert_eq!(
        unsafe { terasim_coverage_dims(grid, ptr::null_mut(), &mut ny) },
        TerasimStatus::NullArgument
    );
    unsafe {
        terasim_coverage_free(grid);
        terasim_scenario_free(s);
        terasim_coverage_free(ptr::null_mut());
        terasim_scenario_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/terasim.h")).unwrap();
    for name in [
        "TerasimStatus",
        "TerasimCell",
        "typedef struct TerasimScenario TerasimScenario",
        "terasim_scenario_load",
        "terasim_coverage_cell",
        "terasim_last_error",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
