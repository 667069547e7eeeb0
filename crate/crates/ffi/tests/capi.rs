use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use blockade_ghz_ffi::*;

fn last_error() -> String {
    let p = bg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn preset_round_trip_and_pulse_pair() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let name = CString::new("fig2").unwrap();
        assert_eq!(bg_config_preset(name.as_ptr(), &mut cfg), BgStatus::Ok);
        assert_eq!(bg_config_n_atoms(cfg), 5);

        let n = 5;
        let mut amps = vec![0.0; 2 * (2 * n + 1)];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        amps[0] = h;
        amps[2 * (n + 1)] = h;
        let mut start = ptr::null_mut();
        assert_eq!(
            bg_state_from_amplitudes(n, amps.as_ptr(), amps.len(), &mut start),
            BgStatus::Ok
        );
        let mut end = ptr::null_mut();
        assert_eq!(bg_propagate_pulse_pair(cfg, start, &mut end), BgStatus::Ok);
        assert_eq!(bg_state_dim(end), 11);
        let mut pops = vec![0.0; 11];
        assert_eq!(bg_state_populations(end, pops.as_mut_ptr(), pops.len()), BgStatus::Ok);
        assert!((pops[0] - 0.5).abs() < 0.05, "{pops:?}");
        assert!((pops[10] - 0.5).abs() < 0.05, "{pops:?}");

        let mut small = [0.0; 3];
        assert_eq!(
            bg_state_populations(end, small.as_mut_ptr(), small.len()),
            BgStatus::BufferTooSmall
        );
        bg_state_free(start);
        bg_state_free(end);
        bg_config_free(cfg);
    }
}

#[test]
fn ghz_run_reports_fidelity_and_json() {
    let toml = CString::new("n_atoms = 5\nomega_m_T = 175.0\ndelta_T = 50.0\ntau_over_T = 0.43\n").unwrap();
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(bg_config_from_toml(toml.as_ptr(), &mut cfg), BgStatus::Ok);
        let mut res = ptr::null_mut();
        assert_eq!(bg_ghz_run(cfg, &mut res), BgStatus::Ok);
        let (mut f, mut phase) = (0.0, 0.0);
        assert_eq!(bg_ghz_fidelity(res, &mut f, &mut phase), BgStatus::Ok);
        assert!(f >= 0.95, "fidelity {f}");
        let mut json = ptr::null_mut();
        assert_eq!(bg_ghz_summary_json(res, &mut json), BgStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        bg_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((v["ghz_fidelity"].as_f64().unwrap() - f).abs() < 1e-15);
        let mut state = ptr::null_mut();
        assert_eq!(bg_ghz_final_state(res, &mut state), BgStatus::Ok);
        let mut amps = vec![0.0; 22];
        assert_eq!(bg_state_amplitudes(state, amps.as_mut_ptr(), amps.len()), BgStatus::Ok);
        let norm: f64 = amps.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-8, "norm {norm}");
        bg_state_free(state);
        bg_ghz_free(res);
        bg_config_free(cfg);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("omega_m_T = 1.0\n").unwrap();
        assert_eq!(bg_config_from_toml(bad.as_ptr(), &mut cfg), BgStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("n_atoms"));

        assert_eq!(bg_config_from_toml(ptr::null(), &mut cfg), BgStatus::NullPointer);
        let mut state = ptr::null_mut();
        assert_eq!(bg_state_new(0, BgLabel::AllA, 0, &mut state), BgStatus::InvalidArgument);
        assert_eq!(bg_state_new(3, BgLabel::Rydberg, 3, &mut state), BgStatus::InvalidArgument);
        assert_eq!(bg_state_new(3, BgLabel::Rydberg, 2, &mut state), BgStatus::Ok);
        assert_eq!(bg_state_dim(state), 7);
        bg_state_free(state);

        assert_eq!(bg_state_dim(ptr::null()), 0);
        bg_config_free(ptr::null_mut());
        bg_state_free(ptr::null_mut());
        bg_ghz_free(ptr::null_mut());
        bg_string_free(ptr::null_mut());
    }
}

#[test]
fn oracle_check_through_c_abi() {
    let atoms = [2usize, 3, 4];
    let mut dev = f64::NAN;
    let s = unsafe { bg_oracle_check(atoms.as_ptr(), atoms.len(), 20, 7, &mut dev) };
    assert_eq!(s, BgStatus::Ok);
    assert!(dev <= 1e-12);
    let too_big = [7usize];
    let s = unsafe { bg_oracle_check(too_big.as_ptr(), 1, 1, 0, ptr::null_mut()) };
    assert_eq!(s, BgStatus::InvalidArgument);
    assert!(last_error().contains("at most 6"));
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(bg_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/blockade_ghz.h");
    assert!(header.exists());
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["bg_config_from_toml", "bg_ghz_run", "bg_oracle_check", "BG_STATUS_ORACLE_VIOLATION"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"blockade_ghz.h\"\nint main(void) { BgConfig *c = 0; return bg_config_preset(\"fig2\", &c) == BG_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let Ok(status) = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}", header.parent().unwrap().display()))
        .arg(&src)
        .status()
    else {
        eprintln!("no C compiler found; syntax check skipped");
        return;
    };
    assert!(status.success());
}
