use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use pdfrelay::geometry::NetworkConfig;
use pdfrelay::interference::{gamma_from_moments, moments_destination, zeta_coefficients, Phase, PowerProfile};
use pdfrelay::policies::{coop_prob_geometric, coop_prob_hybrid};
use pdfrelay_ffi::*;

fn last_error() -> Option<String> {
    let p = pdfrelay_last_error_message();
    if p.is_null() {
        return None;
    }
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { pdfrelay_string_free(p) };
    Some(s)
}

#[test]
fn reference_config_round_trips() {
    let cfg = pdfrelay_config_reference();
    assert!(!cfg.is_null());
    let mut p = PdfrelayNetworkParams {
        lambda1: 0.0,
        lambda2: 0.0,
        alpha: 0.0,
        cell_radius: 0.0,
        noise_power: 0.0,
        p_s: 0.0,
        p_r: 0.0,
        alpha1: 0.0,
        rho1: 0.0,
    };
    unsafe {
        assert_eq!(pdfrelay_config_get(cfg, &mut p), PdfrelayStatus::Ok);
        let r = NetworkConfig::reference();
        assert_eq!(p.lambda1, r.lambda1);
        assert_eq!(p.cell_radius, 300.0);
        assert_eq!(p.rho1, r.rho1);
        p.alpha = 3.5;
        assert_eq!(pdfrelay_config_set(cfg, &p), PdfrelayStatus::Ok);
        let mut q = p;
        q.alpha = 0.0;
        pdfrelay_config_get(cfg, &mut q);
        assert_eq!(q.alpha, 3.5);
        pdfrelay_config_free(cfg);
    }
}

#[test]
fn rejected_setter_leaves_config_unchanged() {
    let cfg = pdfrelay_config_reference();
    unsafe {
        assert_eq!(pdfrelay_config_set_rho1(cfg, 0.9), PdfrelayStatus::InvalidParameter);
        assert!(last_error().unwrap().contains("rho1"));
        let mut m = PdfrelayMoments::default();
        assert_eq!(pdfrelay_moments_destination(cfg, 1, 0.0, &mut m), PdfrelayStatus::Ok);
        assert!(last_error().is_none());
        let r = NetworkConfig::reference();
        let z = zeta_coefficients(r.rho1, &PowerProfile::equal_phases(r.p_s, r.p_r, 0.5, 0.0).unwrap()).unwrap();
        let want = moments_destination(Phase::First, &r, &z).unwrap();
        assert_eq!(m.mean, want.mean);
        assert_eq!(m.variance, want.variance);
        pdfrelay_config_free(cfg);
    }
}

#[test]
fn power_setter_keeps_noise() {
    let cfg = pdfrelay_config_reference();
    unsafe {
        let mut before = std::mem::zeroed::<PdfrelayNetworkParams>();
        pdfrelay_config_get(cfg, &mut before);
        assert_eq!(pdfrelay_config_set_power_dbm(cfg, 26.0), PdfrelayStatus::Ok);
        let mut after = before;
        pdfrelay_config_get(cfg, &mut after);
        assert_eq!(after.noise_power, before.noise_power);
        assert!((after.p_s / before.p_s - 10f64.powf(0.3)).abs() < 1e-12);
        pdfrelay_config_free(cfg);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let cfg = pdfrelay_config_reference();
    let mut m = PdfrelayMoments::default();
    unsafe {
        assert_eq!(pdfrelay_moments_relay(cfg, 0.0, 300.0, &mut m), PdfrelayStatus::RelayOutsideCell);
        assert_eq!(pdfrelay_moments_destination(cfg, 3, 0.0, &mut m), PdfrelayStatus::InvalidParameter);
        assert_eq!(pdfrelay_moments_destination(ptr::null(), 1, 0.0, &mut m), PdfrelayStatus::NullPointer);
        assert!(last_error().unwrap().contains("config"));
        assert_eq!(pdfrelay_moments_destination(cfg, 1, 0.0, ptr::null_mut()), PdfrelayStatus::NullPointer);
        assert_eq!(pdfrelay_config_set_rho1(ptr::null_mut(), 0.1), PdfrelayStatus::NullPointer);
        assert_eq!(pdfrelay_moments_relay(cfg, 0.0, 150.0, &mut m), PdfrelayStatus::Ok);
        assert!(m.mean > 0.0 && m.variance > 0.0);
        let mut g = PdfrelayGamma::default();
        assert_eq!(pdfrelay_gamma_fit(1.0, -1.0, &mut g), PdfrelayStatus::InvalidParameter);
        pdfrelay_config_free(cfg);
        pdfrelay_config_free(ptr::null_mut());
        pdfrelay_string_free(ptr::null_mut());
    }
}

#[test]
fn scalar_functions_match_the_library() {
    let l1 = 1.0 / (16.0 * 150.0 * 150.0);
    let mut v = 0.0;
    unsafe {
        assert_eq!(pdfrelay_coop_prob_hybrid(l1, 2.0 * l1, 4.0, &mut v), PdfrelayStatus::Ok);
        assert_eq!(v, coop_prob_hybrid(l1, 2.0 * l1, 4.0).unwrap());
        assert_eq!(pdfrelay_coop_prob_geometric(l1, 2.0 * l1, &mut v), PdfrelayStatus::Ok);
        assert_eq!(v, coop_prob_geometric(l1, 2.0 * l1).unwrap());
        let mut g = PdfrelayGamma::default();
        assert_eq!(pdfrelay_gamma_fit(2.0, 8.0, &mut g), PdfrelayStatus::Ok);
        let want = gamma_from_moments(2.0, 8.0).unwrap();
        assert_eq!((g.shape, g.scale), (want.shape, want.scale));
    }
}

#[test]
fn rates_are_consistent() {
    let ch = PdfrelayChannels {
        h_sr: 40.0,
        h_sd_b: 1.0,
        h_sd_m: 1.0,
        h_rd: 10.0,
    };
    let (mut direct, mut fixed, mut best) = (PdfrelayRate::default(), PdfrelayRate::default(), PdfrelayRate::default());
    unsafe {
        assert_eq!(pdfrelay_direct_rate(&ch, 1.0, 0.5, &mut direct), PdfrelayStatus::Ok);
        assert!((direct.rate - 1.0).abs() < 1e-12);
        assert!(direct.c3.is_nan());
        assert_eq!(pdfrelay_pdf_rate(&ch, 1.0, 1.0, 0.5, 0.5, &mut fixed), PdfrelayStatus::Ok);
        assert_eq!(fixed.rate, (fixed.c1 + fixed.c2).min(fixed.c3));
        assert_eq!(pdfrelay_optimize_split(&ch, 1.0, 1.0, 0.5, &mut best), PdfrelayStatus::Ok);
        assert!(best.rate >= fixed.rate && best.rate > direct.rate);
        assert!((0.0..=1.0).contains(&best.common_fraction));
        assert_eq!(pdfrelay_pdf_rate(&ch, 1.0, 1.0, 0.5, 1.5, &mut fixed), PdfrelayStatus::InvalidParameter);
        assert_eq!(pdfrelay_direct_rate(ptr::null(), 1.0, 0.5, &mut direct), PdfrelayStatus::NullPointer);
    }
}

#[test]
fn header_declares_the_api_and_compiles() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/pdfrelay.h")).unwrap();
    for name in [
        "pdfrelay_config_reference",
        "pdfrelay_config_free",
        "pdfrelay_last_error_message",
        "pdfrelay_moments_relay",
        "pdfrelay_optimize_split",
        "PDFRELAY_STATUS_RELAY_OUTSIDE_CELL = 4",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(cc.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"pdfrelay.h\"\n\
         int main(void) {\n\
           PdfrelayConfig *c = pdfrelay_config_reference();\n\
           PdfrelayMoments m;\n\
           PdfrelayStatus s = pdfrelay_moments_destination(c, 1, 0.0, &m);\n\
           pdfrelay_config_free(c);\n\
           return s == PDFRELAY_STATUS_OK ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let o = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
