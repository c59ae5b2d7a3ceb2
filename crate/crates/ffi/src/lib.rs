//! C ABI over the analytic parts of `pdfrelay`.
//!
//! Every function returns a [`PdfrelayStatus`] and writes its result through
//! an out pointer. On failure the message is kept per thread and can be read
//! with [`pdfrelay_last_error_message`]. Simulations are not exported.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pdfrelay::geometry::NetworkConfig;
use pdfrelay::interference::{
    dbm_to_watts, gamma_from_moments, moments_destination, moments_relay, zeta_coefficients, InterferenceMoments,
    Phase, PowerProfile,
};
use pdfrelay::policies::{coop_prob_geometric, coop_prob_hybrid};
use pdfrelay::rates::{direct_rate, optimize_power_split, pdf_rate, EquivalentChannels, RateComponents, RateResult};
use pdfrelay::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdfrelayStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NotConverged = 3,
    RelayOutsideCell = 4,
    DivergentMean = 5,
    OtherError = 6,
    Panic = 7,
}

/// Opaque network configuration.
pub struct PdfrelayConfig(NetworkConfig);

/// Plain-data view of a configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfrelayNetworkParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub cell_radius: f64,
    pub noise_power: f64,
    pub p_s: f64,
    pub p_r: f64,
    pub alpha1: f64,
    pub rho1: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdfrelayMoments {
    pub mean: f64,
    pub variance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdfrelayGamma {
    pub shape: f64,
    pub scale: f64,
}

/// Equivalent (interference-and-noise normalized) channel gains.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdfrelayChannels {
    pub h_sr: f64,
    pub h_sd_b: f64,
    pub h_sd_m: f64,
    pub h_rd: f64,
}

/// `c1`..`c3` are the relayed bounds; a direct rate fills `c1` and `c2`
/// with the two phase terms and sets `c3` to NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PdfrelayRate {
    pub rate: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Common-message fraction; NaN unless the split was optimized.
    pub common_fraction: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> PdfrelayStatus {
    match e {
        Error::InvalidParameter { .. } | Error::NegativeLaplaceArgument(_) => PdfrelayStatus::InvalidParameter,
        Error::QuadratureNotConverged { .. } | Error::NonFiniteIntegrand { .. } => PdfrelayStatus::NotConverged,
        Error::RelayOutsideCell { .. } => PdfrelayStatus::RelayOutsideCell,
        Error::DivergentMean { .. } => PdfrelayStatus::DivergentMean,
        _ => PdfrelayStatus::OtherError,
    }
}

/// Runs `f`, recording errors and catching panics.
fn guard(f: impl FnOnce() -> Result<(), PdfrelayFailure>) -> PdfrelayStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdfrelayStatus::Ok,
        Ok(Err(PdfrelayFailure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PdfrelayStatus::NullPointer
        }
        Ok(Err(PdfrelayFailure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PdfrelayStatus::Panic
        }
    }
}

enum PdfrelayFailure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for PdfrelayFailure {
    fn from(e: Error) -> Self {
        PdfrelayFailure::Core(e)
    }
}

unsafe fn write<T>(out: *mut T, v: T, what: &'static str) -> Result<(), PdfrelayFailure> {
    if out.is_null() {
        return Err(PdfrelayFailure::Null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn config_ref<'a>(cfg: *const PdfrelayConfig) -> Result<&'a NetworkConfig, PdfrelayFailure> {
    cfg.as_ref().map(|c| &c.0).ok_or(PdfrelayFailure::Null("config"))
}

unsafe fn config_mut<'a>(cfg: *mut PdfrelayConfig) -> Result<&'a mut NetworkConfig, PdfrelayFailure> {
    cfg.as_mut().map(|c| &mut c.0).ok_or(PdfrelayFailure::Null("config"))
}

/// Applies `edit` to a copy and keeps it only if the result validates.
unsafe fn edit_config(cfg: *mut PdfrelayConfig, edit: impl FnOnce(&mut NetworkConfig)) -> PdfrelayStatus {
    guard(|| {
        let c = config_mut(cfg)?;
        let mut next = *c;
        edit(&mut next);
        next.validate()?;
        *c = next;
        Ok(())
    })
}

fn channels(ch: &PdfrelayChannels) -> EquivalentChannels {
    EquivalentChannels {
        h_sr_eq: ch.h_sr,
        h_sd_b_eq: ch.h_sd_b,
        h_sd_m_eq: ch.h_sd_m,
        h_rd_eq: ch.h_rd,
    }
}

fn rate_out(r: &RateResult, common_fraction: f64) -> PdfrelayRate {
    let (c1, c2, c3) = match r.components {
        RateComponents::Relayed { c1, c2, c3 } => (c1, c2, c3),
        RateComponents::Direct { phase1, phase2 } => (phase1, phase2, f64::NAN),
    };
    PdfrelayRate {
        rate: r.rate,
        c1,
        c2,
        c3,
        common_fraction,
    }
}

fn moments_out(m: InterferenceMoments) -> PdfrelayMoments {
    PdfrelayMoments {
        mean: m.mean,
        variance: m.variance,
    }
}

fn interferer_profile(c: &NetworkConfig, common_fraction: f64) -> Result<PowerProfile, Error> {
    PowerProfile::equal_phases(c.p_s, c.p_r, c.alpha1, common_fraction)
}

/// Reference configuration. Free with [`pdfrelay_config_free`].
#[no_mangle]
pub extern "C" fn pdfrelay_config_reference() -> *mut PdfrelayConfig {
    match catch_unwind(NetworkConfig::reference) {
        Ok(c) => Box::into_raw(Box::new(PdfrelayConfig(c))),
        Err(_) => ptr::null_mut(),
    }
}

/// # Safety
/// `cfg` must be null or a pointer from [`pdfrelay_config_reference`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_config_free(cfg: *mut PdfrelayConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live config handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_config_get(cfg: *const PdfrelayConfig, out: *mut PdfrelayNetworkParams) -> PdfrelayStatus {
    guard(|| {
        let c = config_ref(cfg)?;
        write(
            out,
            PdfrelayNetworkParams {
                lambda1: c.lambda1,
                lambda2: c.lambda2,
                alpha: c.alpha,
                cell_radius: c.cell_radius,
                noise_power: c.noise_power,
                p_s: c.p_s,
                p_r: c.p_r,
                alpha1: c.alpha1,
                rho1: c.rho1,
            },
            "out",
        )
    })
}

/// Replaces every field. Rejected values leave the handle unchanged.
///
/// # Safety
/// `cfg` must be a live config handle and `params` readable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_config_set(cfg: *mut PdfrelayConfig, params: *const PdfrelayNetworkParams) -> PdfrelayStatus {
    let Some(p) = params.as_ref().copied() else {
        return guard(|| Err(PdfrelayFailure::Null("params")));
    };
    edit_config(cfg, |c| {
        *c = NetworkConfig {
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            alpha: p.alpha,
            cell_radius: p.cell_radius,
            noise_power: p.noise_power,
            p_s: p.p_s,
            p_r: p.p_r,
            alpha1: p.alpha1,
            rho1: p.rho1,
        }
    })
}

/// Sets both power budgets; the noise power is left alone.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_config_set_power_dbm(cfg: *mut PdfrelayConfig, dbm: f64) -> PdfrelayStatus {
    edit_config(cfg, |c| {
        c.p_s = dbm_to_watts(dbm);
        c.p_r = c.p_s;
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_config_set_densities(cfg: *mut PdfrelayConfig, lambda1: f64, lambda2: f64) -> PdfrelayStatus {
    edit_config(cfg, |c| {
        c.lambda1 = lambda1;
        c.lambda2 = lambda2;
    })
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_config_set_cell_radius(cfg: *mut PdfrelayConfig, meters: f64) -> PdfrelayStatus {
    edit_config(cfg, |c| c.cell_radius = meters)
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_config_set_rho1(cfg: *mut PdfrelayConfig, rho1: f64) -> PdfrelayStatus {
    edit_config(cfg, |c| c.rho1 = rho1)
}

/// Message for the last failed call on this thread, or null. Free with
/// [`pdfrelay_string_free`].
#[no_mangle]
pub extern "C" fn pdfrelay_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_deref() {
        Some(m) => CString::new(m.replace('\0', " "))
            .map(CString::into_raw)
            .unwrap_or(ptr::null_mut()),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Cooperation probability of the distance-only policy.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_coop_prob_geometric(lambda1: f64, lambda2: f64, out: *mut f64) -> PdfrelayStatus {
    guard(|| write(out, coop_prob_geometric(lambda1, lambda2)?, "out"))
}

/// Cooperation probability of the policy that also sees source fading.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_coop_prob_hybrid(lambda1: f64, lambda2: f64, alpha: f64, out: *mut f64) -> PdfrelayStatus {
    guard(|| write(out, coop_prob_hybrid(lambda1, lambda2, alpha)?, "out"))
}

/// Interference moments at the base station. `phase` is 1 or 2;
/// `common_fraction` is the interferers' common-message share.
///
/// # Safety
/// `cfg` must be a live config handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_moments_destination(
    cfg: *const PdfrelayConfig,
    phase: u32,
    common_fraction: f64,
    out: *mut PdfrelayMoments,
) -> PdfrelayStatus {
    guard(|| {
        let c = config_ref(cfg)?;
        let phase = match phase {
            1 => Phase::First,
            2 => Phase::Second,
            p => {
                return Err(Error::InvalidParameter {
                    name: "phase",
                    reason: format!("must be 1 or 2, got {p}"),
                }
                .into())
            }
        };
        let z = zeta_coefficients(c.rho1, &interferer_profile(c, common_fraction)?)?;
        write(out, moments_out(moments_destination(phase, c, &z)?), "out")
    })
}

/// First-phase interference moments at a relay `d_relay_bs` meters from the
/// base station.
///
/// # Safety
/// `cfg` must be a live config handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_moments_relay(
    cfg: *const PdfrelayConfig,
    common_fraction: f64,
    d_relay_bs: f64,
    out: *mut PdfrelayMoments,
) -> PdfrelayStatus {
    guard(|| {
        let c = config_ref(cfg)?;
        let z = zeta_coefficients(c.rho1, &interferer_profile(c, common_fraction)?)?;
        write(out, moments_out(moments_relay(c, &z, d_relay_bs)?), "out")
    })
}

/// Gamma law with the given mean and variance.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_gamma_fit(mean: f64, variance: f64, out: *mut PdfrelayGamma) -> PdfrelayStatus {
    guard(|| {
        let g = gamma_from_moments(mean, variance)?;
        write(
            out,
            PdfrelayGamma {
                shape: g.shape,
                scale: g.scale,
            },
            "out",
        )
    })
}

/// Relayed rate for a fixed common-message fraction.
///
/// # Safety
/// `ch` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_pdf_rate(
    ch: *const PdfrelayChannels,
    p_s: f64,
    p_r: f64,
    alpha1: f64,
    common_fraction: f64,
    out: *mut PdfrelayRate,
) -> PdfrelayStatus {
    guard(|| {
        let ch = ch.as_ref().ok_or(PdfrelayFailure::Null("ch"))?;
        let alloc = PowerProfile::equal_phases(p_s, p_r, alpha1, common_fraction)?;
        write(out, rate_out(&pdf_rate(&channels(ch), &alloc), common_fraction), "out")
    })
}

/// Rate without cooperation.
///
/// # Safety
/// `ch` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_direct_rate(
    ch: *const PdfrelayChannels,
    p_s: f64,
    alpha1: f64,
    out: *mut PdfrelayRate,
) -> PdfrelayStatus {
    guard(|| {
        let ch = ch.as_ref().ok_or(PdfrelayFailure::Null("ch"))?;
        if !(p_s.is_finite() && p_s >= 0.0) || !(alpha1 > 0.0 && alpha1 < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p_s/alpha1",
                reason: format!("need p_s >= 0 and 0 < alpha1 < 1, got {p_s}, {alpha1}"),
            }
            .into());
        }
        write(out, rate_out(&direct_rate(&channels(ch), p_s, alpha1), f64::NAN), "out")
    })
}

/// Relayed rate at the best common-message fraction.
///
/// # Safety
/// `ch` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pdfrelay_optimize_split(
    ch: *const PdfrelayChannels,
    p_s: f64,
    p_r: f64,
    alpha1: f64,
    out: *mut PdfrelayRate,
) -> PdfrelayStatus {
    guard(|| {
        let ch = ch.as_ref().ok_or(PdfrelayFailure::Null("ch"))?;
        let best = optimize_power_split(&channels(ch), p_s, p_r, alpha1)?;
        write(out, rate_out(&best.result, best.common_fraction), "out")
    })
}
