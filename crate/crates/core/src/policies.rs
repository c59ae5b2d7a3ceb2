//! Cooperation policies and their analytic cooperation probabilities.
//!
//! * `Ideal`: relay when the equivalent source→relay gain is at least the
//!   equivalent source→BS gain.
//! * `Geometric`: relay when `r2 <= r1` and `D <= r1`.
//! * `Hybrid`: relay when `g_sd r1^-α <= g_sr r2^-α` and `D <= r1`.
//!
//! Ties always cooperate.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, require_positive, Result};
use crate::geometry::CellScenario;
use crate::quadrature::{integrate, try_integrate, Tolerance};

/// Small-scale power gains, each unit-mean exponential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingDraw {
    pub g_sd: f64,
    pub g_sr: f64,
    pub g_rd: f64,
}

impl FadingDraw {
    pub fn new(g_sd: f64, g_sr: f64, g_rd: f64) -> Result<Self> {
        require_positive("g_sd", g_sd)?;
        require_positive("g_sr", g_sr)?;
        require_positive("g_rd", g_rd)?;
        Ok(FadingDraw { g_sd, g_sr, g_rd })
    }

    pub fn unit() -> Self {
        FadingDraw {
            g_sd: 1.0,
            g_sr: 1.0,
            g_rd: 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        FadingDraw {
            g_sd: exp1(rng),
            g_sr: exp1(rng),
            g_rd: exp1(rng),
        }
    }
}

/// Exp(1) draw bounded away from zero so gains stay strictly positive.
pub(crate) fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let g: f64 = Exp1.sample(rng);
    g.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    Ideal,
    Geometric,
    Hybrid,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Ideal => "E1",
            PolicyKind::Geometric => "E2",
            PolicyKind::Hybrid => "E3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoopDecision {
    pub cooperate: bool,
    pub policy: PolicyKind,
}

pub fn decide_geometric(scenario: &CellScenario) -> CoopDecision {
    CoopDecision {
        cooperate: scenario.r2 <= scenario.r1 && scenario.d_relay_bs <= scenario.r1,
        policy: PolicyKind::Geometric,
    }
}

pub fn decide_hybrid(scenario: &CellScenario, fading: &FadingDraw, alpha: f64) -> CoopDecision {
    let direct = fading.g_sd * scenario.r1.powf(-alpha);
    // r2 = 0 gives an infinite relay-link gain.
    let relay = if scenario.r2 == 0.0 {
        f64::INFINITY
    } else {
        fading.g_sr * scenario.r2.powf(-alpha)
    };
    CoopDecision {
        cooperate: direct <= relay && scenario.d_relay_bs <= scenario.r1,
        policy: PolicyKind::Hybrid,
    }
}

/// Compares equivalent (interference-and-noise normalized) power gains.
pub fn decide_ideal(equiv_sr_gain: f64, equiv_sd_gain: f64) -> CoopDecision {
    CoopDecision {
        cooperate: equiv_sr_gain >= equiv_sd_gain,
        policy: PolicyKind::Ideal,
    }
}

/// Ideal policy with the noise term dropped: `g_sr r2^-α / Q_r >= g_sd r1^-α / Q_d^b`.
pub fn decide_ideal_noise_free(
    scenario: &CellScenario,
    fading: &FadingDraw,
    alpha: f64,
    q_r: f64,
    q_d_b: f64,
) -> CoopDecision {
    let sr = if scenario.r2 == 0.0 {
        f64::INFINITY
    } else {
        fading.g_sr * scenario.r2.powf(-alpha) / q_r
    };
    decide_ideal(sr, fading.g_sd * scenario.r1.powf(-alpha) / q_d_b)
}

/// Density of β = (g_sr/g_sd)^{1/α} for i.i.d. unit exponential gains.
pub fn beta_pdf(z: f64, alpha: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let za = z.powf(alpha);
    alpha * za / z / ((1.0 + za) * (1.0 + za))
}

pub fn beta_cdf(z: f64, alpha: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let za = z.powf(alpha);
    za / (1.0 + za)
}

const RHO_TOL: f64 = 1e-10;

/// Probability that, at angle ψ, a relay within `2 r1 cos ψ` exists, per
/// unit angle: `2λ2cos²ψ / (π(λ1 + 4λ2cos²ψ))`.
fn angular_density(psi: f64, lambda1: f64, lambda2: f64) -> f64 {
    let c2 = psi.cos().powi(2);
    2.0 * lambda2 * c2 / (PI * (lambda1 + 4.0 * lambda2 * c2))
}

fn check_densities(lambda1: f64, lambda2: f64) -> Result<()> {
    require_positive("lambda1", lambda1)?;
    require_nonnegative("lambda2", lambda2)?;
    Ok(())
}

/// ρ2 = P{r2 ≤ r1, D ≤ r1} for independent Rayleigh r1, r2 and uniform ψ0.
pub fn coop_prob_geometric(lambda1: f64, lambda2: f64) -> Result<f64> {
    check_densities(lambda1, lambda2)?;
    if lambda2 == 0.0 {
        return Ok(0.0);
    }
    let side = integrate(
        |psi| angular_density(psi, lambda1, lambda2),
        FRAC_PI_3,
        FRAC_PI_2,
        Tolerance::absolute(RHO_TOL),
    )?;
    let rho = 2.0 * side.value + lambda2 / (3.0 * (lambda1 + lambda2));
    Ok(rho.clamp(0.0, 0.5))
}

/// ρ3 = P{r2 ≤ β r1, D ≤ r1} with β the fading ratio above.
///
/// Conditioned on β = z ≤ 2 the angular range splits at `arccos(z/2)`:
/// beyond it the `D` condition binds, inside it the fading condition binds
/// and contributes `z²λ2/(λ1 + z²λ2)` times the angular share. For z > 2
/// only the `D` condition matters; that tail is mapped onto (0, 1/2] with
/// u = 1/z.
pub fn coop_prob_hybrid(lambda1: f64, lambda2: f64, alpha: f64) -> Result<f64> {
    check_densities(lambda1, lambda2)?;
    require_positive("alpha", alpha)?;
    if alpha <= 2.0 {
        return Err(invalid("alpha", format!("must exceed 2, got {alpha}")));
    }
    if lambda2 == 0.0 {
        return Ok(0.0);
    }
    let inner_tol = Tolerance::absolute(RHO_TOL * 1e-2);
    let body = try_integrate(
        |z| {
            let edge = (0.5 * z).clamp(-1.0, 1.0).acos();
            let outer = integrate(|psi| angular_density(psi, lambda1, lambda2), edge, FRAC_PI_2, inner_tol)?.value;
            let z2l2 = z * z * lambda2;
            let inside = z2l2 * edge / (PI * (lambda1 + z2l2));
            Ok(beta_pdf(z, alpha) * (2.0 * outer + inside))
        },
        0.0,
        2.0,
        Tolerance::absolute(RHO_TOL),
    )?
    .value;
    // f_β(1/u)/u² = f_β(u), so the mapped tail weight is ∫0^{1/2} f_β(u) du.
    let tail_weight = integrate(|u| beta_pdf(u, alpha), 0.0, 0.5, Tolerance::absolute(RHO_TOL))?.value;
    let half_plane = integrate(
        |psi| angular_density(psi, lambda1, lambda2),
        0.0,
        FRAC_PI_2,
        Tolerance::absolute(RHO_TOL),
    )?
    .value;
    Ok((body + tail_weight * 2.0 * half_plane).clamp(0.0, 0.5))
}
