use std::ffi::{CStr, CString};
use std::ptr;

use hydro_ensemble::experiment::synthetic::{generate, SyntheticSpec};
use hydro_ensemble_ffi::*;

fn last_error() -> String {
    let p = he_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config() -> *mut HeConfig {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(he_config_new(&mut cfg), HeStatus::Ok);
        for (k, v) in [
            ("warmup", "12"),
            ("calibration", "60"),
            ("training", "60"),
            ("testing", "auto"),
            ("m", "20"),
            ("n_iterations", "1500"),
            ("seed", "3"),
        ] {
            let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
            assert_eq!(
                he_config_set(cfg, k.as_ptr(), v.as_ptr()),
                HeStatus::Ok,
                "{}",
                last_error()
            );
        }
    }
    cfg
}

fn synthetic_catchment(months: usize) -> *mut HeCatchment {
    let spec = SyntheticSpec {
        months,
        seed: 11,
        ..SyntheticSpec::default()
    };
    let c = generate(&spec).unwrap();
    let m = &c.monthly;
    let mut out = ptr::null_mut();
    let st = unsafe {
        he_catchment_from_monthly(
            c"syn".as_ptr(),
            m.origin.year,
            m.origin.month,
            m.precipitation.as_ptr(),
            m.potential_evaporation.as_ptr(),
            m.streamflow.as_ptr(),
            m.len(),
            &mut out,
        )
    };
    assert_eq!(st, HeStatus::Ok, "{}", last_error());
    out
}

#[test]
fn header_declares_every_export() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/hydro_ensemble.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let mut count = 0;
    for line in source.lines() {
        let Some(rest) = line.split("extern \"C\" fn ").nth(1) else {
            continue;
        };
        let name = rest.split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
        count += 1;
    }
    assert!(count >= 20, "only {count} exports found");
    assert!(header.contains("HE_STATUS_OK = 0"));
    assert!(header.contains("typedef struct HePrediction HePrediction;"));
}

#[test]
fn interval_functions_match_hand_values() {
    let lower = [0.0, 1.0, 2.0];
    let upper = [2.0, 3.0, 4.0];
    let obs = [1.0, 4.0, 2.0];
    let (mut cp, mut aw, mut ais) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(
            he_coverage_probability(lower.as_ptr(), upper.as_ptr(), obs.as_ptr(), 3, &mut cp),
            HeStatus::Ok
        );
        assert_eq!(
            he_average_width(lower.as_ptr(), upper.as_ptr(), 3, &mut aw),
            HeStatus::Ok
        );
        assert_eq!(
            he_average_interval_score(lower.as_ptr(), upper.as_ptr(), obs.as_ptr(), 3, 0.1, &mut ais),
            HeStatus::Ok
        );
    }
    assert!((cp - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(aw, 2.0);
    // widths 2 each; the second observation lies 1 above: penalty 2/0.1 * 1 = 20
    assert!((ais - (6.0 + 20.0) / 3.0).abs() < 1e-12);
}

#[test]
fn bad_alpha_is_rejected() {
    let lower = [1.0];
    let upper = [3.0];
    let obs = [2.0];
    let mut out = 0.0;
    let st = unsafe { he_average_interval_score(lower.as_ptr(), upper.as_ptr(), obs.as_ptr(), 1, 1.5, &mut out) };
    assert_ne!(st, HeStatus::Ok);
    assert!(!last_error().is_empty());
}

#[test]
fn null_arrays_are_rejected() {
    let mut out = 0.0;
    let st = unsafe { he_average_width(ptr::null(), ptr::null(), 4, &mut out) };
    assert_eq!(st, HeStatus::NullPointer);
    assert!(last_error().contains("lower"));
}

#[test]
fn gr2m_matches_core() {
    let p = [50.0, 0.0, 120.0, 80.0, 10.0];
    let e = [30.0, 60.0, 20.0, 40.0, 90.0];
    let mut q = [0.0; 5];
    let st = unsafe { he_gr2m_simulate(400.0, 0.9, p.as_ptr(), e.as_ptr(), 5, q.as_mut_ptr()) };
    assert_eq!(st, HeStatus::Ok);
    let params = hydro_ensemble::gr2m::Gr2mParams::new(400.0, 0.9).unwrap();
    let expect = hydro_ensemble::gr2m::run(&params, &p, &e, hydro_ensemble::gr2m::Gr2mState::initial(&params)).unwrap();
    assert_eq!(q.to_vec(), expect);
}

#[test]
fn gr2m_rejects_bad_parameters() {
    let p = [1.0];
    let mut q = [0.0];
    let st = unsafe { he_gr2m_simulate(-1.0, 0.9, p.as_ptr(), p.as_ptr(), 1, q.as_mut_ptr()) };
    assert_eq!(st, HeStatus::InvalidArgument);
}

#[test]
fn config_roundtrip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.cfg");
    std::fs::write(&path, "m = 30\nschemes = 1, 5\n").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(
            he_config_load(cpath.as_ptr(), &mut cfg),
            HeStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(he_config_validate(cfg), HeStatus::Ok);
        he_config_free(cfg);
    }
    let missing = CString::new(dir.path().join("nope.cfg").to_str().unwrap()).unwrap();
    let st = unsafe { he_config_load(missing.as_ptr(), &mut cfg) };
    assert_eq!(st, HeStatus::Io);
}

#[test]
fn unknown_scheme_is_rejected() {
    let cfg = small_config();
    let c = synthetic_catchment(240);
    let mut pred = ptr::null_mut();
    unsafe {
        assert_eq!(
            he_run_scheme(cfg, c, c"7".as_ptr(), &mut pred),
            HeStatus::InvalidArgument
        );
        assert!(pred.is_null());
        he_catchment_free(c);
        he_config_free(cfg);
    }
}

#[test]
fn basic_scheme_end_to_end() {
    let cfg = small_config();
    let c = synthetic_catchment(240);
    let mut pred = ptr::null_mut();
    unsafe {
        let mut months = 0;
        assert_eq!(he_catchment_months(c, &mut months), HeStatus::Ok);
        assert_eq!(months, 240);
        assert_eq!(
            he_run_scheme(cfg, c, c"basic-linear".as_ptr(), &mut pred),
            HeStatus::Ok,
            "{}",
            last_error()
        );
        let (mut n, mut levels) = (0, 0);
        assert_eq!(he_prediction_months(pred, &mut n), HeStatus::Ok);
        assert_eq!(he_prediction_levels(pred, &mut levels), HeStatus::Ok);
        assert_eq!(n, 240 - 132);
        assert_eq!(levels, 10);
        let mut p0 = 0.0;
        assert_eq!(he_prediction_probability(pred, 0, &mut p0), HeStatus::Ok);
        assert_eq!(he_prediction_probability(pred, levels, &mut p0), HeStatus::NotFound);

        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        assert_eq!(he_prediction_quantile(pred, 0.025, lo.as_mut_ptr(), n), HeStatus::Ok);
        assert_eq!(he_prediction_quantile(pred, 0.975, hi.as_mut_ptr(), n), HeStatus::Ok);
        assert!(lo.iter().zip(&hi).all(|(l, h)| l <= h));
        assert_eq!(
            he_prediction_quantile(pred, 0.5, lo.as_mut_ptr(), n),
            HeStatus::NotFound
        );
        assert_eq!(
            he_prediction_quantile(pred, 0.025, lo.as_mut_ptr(), n - 1),
            HeStatus::InvalidArgument
        );

        let (mut cp, mut aw, mut ais) = (0.0, 0.0, 0.0);
        assert_eq!(
            he_prediction_score(pred, 0.05, &mut cp, &mut aw, &mut ais),
            HeStatus::Ok
        );
        assert!((0.0..=1.0).contains(&cp));
        assert!(aw > 0.0 && ais >= aw);
        assert_eq!(
            he_prediction_score(pred, 0.05, ptr::null_mut(), ptr::null_mut(), &mut ais),
            HeStatus::Ok
        );

        he_prediction_free(pred);
        he_catchment_free(c);
        he_config_free(cfg);
    }
}

#[test]
fn ensemble_scheme_end_to_end() {
    let cfg = small_config();
    let c = synthetic_catchment(240);
    let mut pred = ptr::null_mut();
    unsafe {
        assert_eq!(
            he_run_scheme(cfg, c, c"5".as_ptr(), &mut pred),
            HeStatus::Ok,
            "{}",
            last_error()
        );
        let (mut cp, mut aw, mut ais) = (0.0, 0.0, 0.0);
        assert_eq!(he_prediction_score(pred, 0.1, &mut cp, &mut aw, &mut ais), HeStatus::Ok);
        assert!(cp > 0.5, "coverage {cp}");
        he_prediction_free(pred);
        he_catchment_free(c);
        he_config_free(cfg);
    }
}

#[test]
fn free_functions_accept_null() {
    unsafe {
        he_config_free(ptr::null_mut());
        he_catchment_free(ptr::null_mut());
        he_prediction_free(ptr::null_mut());
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(he_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let src = tempfile::Builder::new().suffix(".c").tempfile().unwrap();
    std::fs::write(
        src.path(),
        "#include \"hydro_ensemble.h\"\nint main(void) { HeConfig *c = 0; return he_config_new(&c) == HE_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&dir)
        .arg(src.path())
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header failed to compile"),
        Err(_) => eprintln!("no C compiler found; skipping header compile check"),
    }
}
