//! Analytic inter-cell interference: power-mixture coefficients, moments at
//! the base station and at the relay, Laplace transforms and Gamma fits.
//!
//! Interferers form a PPP of intensity λ1 outside the study disk of radius
//! Rc. Each one cooperates independently with probability ρ1. Radial
//! integrals over [Rc, ∞) are mapped onto (0, 1] with u = Rc/r, so
//! `∫ g(r) r dr = Rc² ∫ g(Rc/u) u⁻³ du`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{invalid, require_nonnegative, require_positive, Error, Result};
use crate::geometry::NetworkConfig;
use crate::quadrature::{integrate, try_integrate, Tolerance};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Two-phase power split of a source and its relay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub p_s: f64,
    pub p_r: f64,
    pub p_s_b: f64,
    pub p_s_m1: f64,
    pub p_s_m2: f64,
    pub p_r_m: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl PowerProfile {
    /// Same source power in both phases, a fraction `common` of the
    /// second-phase power on the common part, and the relay spending its
    /// whole budget in the second phase.
    pub fn equal_phases(p_s: f64, p_r: f64, alpha1: f64, common: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&common) {
            return Err(invalid("common", format!("must lie in [0, 1], got {common}")));
        }
        let alpha2 = 1.0 - alpha1;
        let profile = PowerProfile {
            p_s,
            p_r,
            p_s_b: p_s,
            p_s_m1: common * p_s,
            p_s_m2: (1.0 - common) * p_s,
            p_r_m: p_r / alpha2,
            alpha1,
            alpha2,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Direct transmission only: no relay power.
    pub fn direct(p_s: f64, alpha1: f64) -> Result<Self> {
        Self::equal_phases(p_s, 0.0, alpha1, 0.0)
    }

    pub fn p_s_m(&self) -> f64 {
        self.p_s_m1 + self.p_s_m2
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_s", self.p_s),
            ("p_r", self.p_r),
            ("p_s_b", self.p_s_b),
            ("p_s_m1", self.p_s_m1),
            ("p_s_m2", self.p_s_m2),
            ("p_r_m", self.p_r_m),
        ] {
            require_nonnegative(name, v)?;
        }
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) || self.alpha1 + self.alpha2 != 1.0 {
            return Err(invalid(
                "alpha1",
                format!("time split must satisfy 0 < α1 < 1 and α1 + α2 = 1, got ({}, {})", self.alpha1, self.alpha2),
            ));
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if !close(self.alpha1 * self.p_s_b + self.alpha2 * self.p_s_m(), self.p_s) {
            return Err(invalid("p_s", "phase powers do not average to the source budget"));
        }
        if !close(self.alpha2 * self.p_r_m, self.p_r) {
            return Err(invalid("p_r", "second-phase relay power does not average to the relay budget"));
        }
        Ok(())
    }
}

/// Power-mixture coefficients: first and second raw moments of one
/// interferer's received power per unit path gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaCoefficients {
    pub zeta1: f64,
    pub zeta2: f64,
    pub zeta3: f64,
    pub zeta4: f64,
}

/// The second-phase pair is averaged over reception phases, so a cooperating
/// interferer contributes two independently faded powers `P^m` and `P_r^m`.
pub fn zeta_coefficients(rho1: f64, profile: &PowerProfile) -> Result<ZetaCoefficients> {
    if !(0.0..=1.0).contains(&rho1) {
        return Err(invalid("rho1", format!("must lie in [0, 1], got {rho1}")));
    }
    let p = profile.p_s;
    let pb = profile.p_s_b;
    let pm = profile.p_s_m();
    let prm = profile.p_r_m;
    Ok(ZetaCoefficients {
        zeta1: rho1 * pb + (1.0 - rho1) * p,
        zeta2: 2.0 * (rho1 * pb * pb + (1.0 - rho1) * p * p),
        zeta3: rho1 * (pm + prm) + (1.0 - rho1) * p,
        zeta4: 2.0 * (rho1 * (pm + prm).powi(2) + (1.0 - rho1) * p * p - rho1 * pm * prm),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InterferenceTerm {
    DestPhase1,
    DestPhase2,
    RelayPhase1,
}

impl InterferenceTerm {
    pub fn label(self) -> &'static str {
        match self {
            InterferenceTerm::DestPhase1 => "dest1",
            InterferenceTerm::DestPhase2 => "dest2",
            InterferenceTerm::RelayPhase1 => "relay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceMoments {
    pub mean: f64,
    pub variance: f64,
    pub term: InterferenceTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 2.0 {
        Ok(())
    } else {
        Err(Error::DivergentMean { alpha })
    }
}

fn check_geometry(config: &NetworkConfig) -> Result<()> {
    check_alpha(config.alpha)?;
    require_nonnegative("lambda1", config.lambda1)?;
    require_positive("cell_radius", config.cell_radius)?;
    Ok(())
}

fn check_relay_distance(d: f64, rc: f64) -> Result<()> {
    require_nonnegative("d_relay_bs", d)?;
    if d >= rc {
        return Err(Error::RelayOutsideCell { d, rc });
    }
    Ok(())
}

/// Mean and variance of the interference at the study base station.
pub fn moments_destination(phase: Phase, config: &NetworkConfig, zetas: &ZetaCoefficients) -> Result<InterferenceMoments> {
    check_geometry(config)?;
    let (a, rc, l1) = (config.alpha, config.cell_radius, config.lambda1);
    let (z_mean, z_var, term) = match phase {
        Phase::First => (zetas.zeta1, zetas.zeta2, InterferenceTerm::DestPhase1),
        Phase::Second => (zetas.zeta3, zetas.zeta4, InterferenceTerm::DestPhase2),
    };
    Ok(InterferenceMoments {
        mean: 2.0 * PI * l1 * z_mean / (a - 2.0) * rc.powf(2.0 - a),
        variance: PI * l1 * z_var / (a - 1.0) * rc.powf(2.0 * (1.0 - a)),
        term,
    })
}

/// `∫_0^π (a − b cos θ)^-p dθ` with `a = r² + D²`, `b = 2rD`.
///
/// The substitution `tan(θ/2) = c tan φ`, `c = (r − D)/(r + D)`, leaves the
/// bounded integrand `(cos²φ + c² sin²φ)^{p−1}` on `[0, π/2]`, which stays
/// smooth as `r → D`.
fn angular_kernel(r: f64, d: f64, p: f64, tol: Tolerance) -> Result<f64> {
    let gap = r - d;
    let c = gap / (r + d);
    let c2 = c * c;
    let inner = integrate(
        |phi| {
            let (s, co) = phi.sin_cos();
            (co * co + c2 * s * s).powf(p - 1.0)
        },
        0.0,
        0.5 * PI,
        tol,
    )?
    .value;
    Ok(2.0 * c * gap.powf(-2.0 * p) * inner)
}

/// `(∫∫ d^-α r dr dθ, ∫∫ d^-2α r dr dθ)` over the field outside the study
/// disk, with `d² = r² + D² − 2rD cos θ` the distance to a point at `D`
/// from the centre.
pub fn relay_kernel_integrals(alpha: f64, rc: f64, d: f64, rel_tol: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    require_positive("cell_radius", rc)?;
    check_relay_distance(d, rc)?;
    let inner_tol = Tolerance::relative(rel_tol * 1e-2);
    let outer_tol = Tolerance::relative(rel_tol);
    let kernel = |p: f64| -> Result<f64> {
        // θ ∈ [π, 2π] mirrors [0, π].
        let ring = |r: f64| -> Result<f64> { Ok(2.0 * angular_kernel(r, d, p, inner_tol)? * r) };
        // Near ring: r − D = (Rc − D) e^w up to r = 2Rc, which resolves the
        // peak at the cell edge when D → Rc.
        let edge = rc - d;
        let w_max = ((2.0 * rc - d) / edge).ln();
        let near = try_integrate(
            |w| {
                let x = edge * w.exp();
                Ok(ring(d + x)? * x)
            },
            0.0,
            w_max,
            outer_tol,
        )?
        .value;
        // Far field: u = 2Rc/r.
        let far = try_integrate(
            |u| {
                if u == 0.0 {
                    return Ok(0.0);
                }
                let r = 2.0 * rc / u;
                Ok(ring(r)? * r / u)
            },
            0.0,
            1.0,
            outer_tol,
        )?
        .value;
        Ok(near + far)
    };
    Ok((kernel(alpha / 2.0)?, kernel(alpha)?))
}

/// Mean and variance of the first-phase interference at a relay `d` from the BS.
pub fn moments_relay(config: &NetworkConfig, zetas: &ZetaCoefficients, d_relay_bs: f64) -> Result<InterferenceMoments> {
    check_geometry(config)?;
    check_relay_distance(d_relay_bs, config.cell_radius)?;
    if d_relay_bs == 0.0 {
        let mut m = moments_destination(Phase::First, config, zetas)?;
        m.term = InterferenceTerm::RelayPhase1;
        return Ok(m);
    }
    let (k1, k2) = relay_kernel_integrals(config.alpha, config.cell_radius, d_relay_bs, 1e-8)?;
    Ok(InterferenceMoments {
        mean: config.lambda1 * zetas.zeta1 * k1,
        variance: config.lambda1 * zetas.zeta2 * k2,
        term: InterferenceTerm::RelayPhase1,
    })
}

/// `x/(1+x)`, i.e. `1 − L_G(x)` for a unit exponential gain.
fn one_minus_lg(x: f64) -> f64 {
    x / (1.0 + x)
}

/// `1 − L_G(a) L_G(b)`.
fn one_minus_lg_pair(a: f64, b: f64) -> f64 {
    (a + b + a * b) / ((1.0 + a) * (1.0 + b))
}

/// Per-interferer `1 − E[exp(−s X r^-α)]` at path gain `g = r^-α`.
fn thinned_factor(phase: Phase, s: f64, g: f64, profile: &PowerProfile, rho1: f64) -> f64 {
    let sg = s * g;
    let direct = (1.0 - rho1) * one_minus_lg(sg * profile.p_s);
    match phase {
        Phase::First => rho1 * one_minus_lg(sg * profile.p_s_b) + direct,
        Phase::Second => rho1 * one_minus_lg_pair(sg * profile.p_s_m(), sg * profile.p_r_m) + direct,
    }
}

fn check_laplace(s: f64, profile: &PowerProfile, rho1: f64) -> Result<()> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::NegativeLaplaceArgument(s));
    }
    profile.validate()?;
    if !(0.0..=1.0).contains(&rho1) {
        return Err(invalid("rho1", format!("must lie in [0, 1], got {rho1}")));
    }
    Ok(())
}

/// Laplace transform `E[exp(−s Q)]` of the interference at the study BS.
pub fn laplace_destination(
    phase: Phase,
    s: f64,
    config: &NetworkConfig,
    profile: &PowerProfile,
    rho1: f64,
) -> Result<f64> {
    check_geometry(config)?;
    check_laplace(s, profile, rho1)?;
    if s == 0.0 || config.lambda1 == 0.0 {
        return Ok(1.0);
    }
    let (rc, a) = (config.cell_radius, config.alpha);
    let radial = integrate(
        |u| {
            let g = (u / rc).powf(a);
            thinned_factor(phase, s, g, profile, rho1) / (u * u * u)
        },
        0.0,
        1.0,
        Tolerance {
            abs: 0.0,
            rel: 1e-12,
            max_subdivisions: Tolerance::DEFAULT_MAX_SUBDIVISIONS,
        },
    )?
    .value;
    Ok((-2.0 * PI * config.lambda1 * rc * rc * radial).exp())
}

/// Laplace transform of the first-phase interference at a relay `d` from the BS.
pub fn laplace_relay(
    s: f64,
    config: &NetworkConfig,
    profile: &PowerProfile,
    rho1: f64,
    d_relay_bs: f64,
) -> Result<f64> {
    check_geometry(config)?;
    check_laplace(s, profile, rho1)?;
    check_relay_distance(d_relay_bs, config.cell_radius)?;
    if s == 0.0 || config.lambda1 == 0.0 {
        return Ok(1.0);
    }
    let (rc, a, d) = (config.cell_radius, config.alpha, d_relay_bs);
    let half_a = a / 2.0;
    let outer = try_integrate(
        |u| {
            let r = rc / u;
            let (c0, c1) = (r * r + d * d, 2.0 * r * d);
            let ang = integrate(
                |t| thinned_factor(Phase::First, s, (c0 - c1 * t.cos()).powf(-half_a), profile, rho1),
                0.0,
                PI,
                Tolerance::relative(1e-13),
            )?
            .value;
            Ok(2.0 * ang / (u * u * u))
        },
        0.0,
        1.0,
        Tolerance::relative(1e-11),
    )?
    .value;
    Ok((-config.lambda1 * rc * rc * outer).exp())
}

/// Moment-matched Gamma: `k = mean²/var`, `θ = var/mean`.
pub fn gamma_fit(moments: &InterferenceMoments) -> Result<GammaParams> {
    gamma_from_moments(moments.mean, moments.variance)
}

pub fn gamma_from_moments(mean: f64, variance: f64) -> Result<GammaParams> {
    require_positive("mean", mean)?;
    require_positive("variance", variance)?;
    Ok(GammaParams {
        shape: mean * mean / variance,
        scale: variance / mean,
    })
}

impl GammaParams {
    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }
}

pub fn gamma_pdf(q: f64, params: &GammaParams) -> f64 {
    let (k, th) = (params.shape, params.scale);
    if q < 0.0 {
        return 0.0;
    }
    if q == 0.0 {
        return match k.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => 1.0 / th,
            _ => 0.0,
        };
    }
    ((k - 1.0) * q.ln() - q / th - k * th.ln() - ln_gamma(k)).exp()
}

pub fn gamma_cdf(q: f64, params: &GammaParams) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    gamma_lr(params.shape, q / params.scale)
}

pub fn sample_gamma<R: Rng + ?Sized>(params: &GammaParams, rng: &mut R) -> f64 {
    Gamma::new(params.shape, params.scale)
        .expect("validated Gamma parameters")
        .sample(rng)
}

/// Relay-kernel integrals tabulated over `D/Rc` for one `(α, Rc)`.
///
/// Moments scale linearly in `λ1 ζ`, so one table serves every power
/// profile and cooperation probability. Nodes are uniform in
/// `v = −ln(1 − D/Rc)` so the blow-up near the cell edge stays resolved.
#[derive(Debug, Clone)]
pub struct RelayKernelTable {
    alpha: f64,
    cell_radius: f64,
    v_max: f64,
    ln_k1: Vec<f64>,
    ln_k2: Vec<f64>,
}

impl RelayKernelTable {
    pub const DEFAULT_NODES: usize = 257;
    /// Largest tabulated `D/Rc`; beyond it the kernels are integrated directly.
    pub const MAX_FRACTION: f64 = 0.999;

    pub fn new(alpha: f64, cell_radius: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(invalid("nodes", "need at least two nodes"));
        }
        let v_max = -(1.0 - Self::MAX_FRACTION).ln();
        let mut ln_k1 = Vec::with_capacity(nodes);
        let mut ln_k2 = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let v = v_max * i as f64 / (nodes - 1) as f64;
            let d = cell_radius * -(-v).exp_m1();
            let (k1, k2) = relay_kernel_integrals(alpha, cell_radius, d, 1e-9)?;
            ln_k1.push(k1.ln());
            ln_k2.push(k2.ln());
        }
        Ok(RelayKernelTable {
            alpha,
            cell_radius,
            v_max,
            ln_k1,
            ln_k2,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    /// Kernel integrals at relay distance `d`.
    pub fn kernels(&self, d: f64) -> Result<(f64, f64)> {
        check_relay_distance(d, self.cell_radius)?;
        let frac = d / self.cell_radius;
        if frac > Self::MAX_FRACTION {
            return relay_kernel_integrals(self.alpha, self.cell_radius, d, 1e-8);
        }
        let v = -(-frac).ln_1p();
        let n = self.ln_k1.len();
        let x = (v / self.v_max * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).min(n - 2);
        let w = x - i as f64;
        let lerp = |t: &[f64]| ((1.0 - w) * t[i] + w * t[i + 1]).exp();
        Ok((lerp(&self.ln_k1), lerp(&self.ln_k2)))
    }

    pub fn moments(&self, lambda1: f64, zetas: &ZetaCoefficients, d: f64) -> Result<InterferenceMoments> {
        let (k1, k2) = self.kernels(d)?;
        Ok(InterferenceMoments {
            mean: lambda1 * zetas.zeta1 * k1,
            variance: lambda1 * zetas.zeta2 * k2,
            term: InterferenceTerm::RelayPhase1,
        })
    }
}
