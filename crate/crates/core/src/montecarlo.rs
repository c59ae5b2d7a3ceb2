//! Multi-cell simulation: interferer fields around the study cell,
//! per-trial study-link outcomes and empirical interference laws.
//!
//! The study BS sits at the origin and the study user at `(r1, 0)`. The relay
//! is placed at angle `ψ0` from the user→BS direction, so its distance to the
//! BS is `D`. Interferers are active users of a PPP on the annulus
//! `[Rc, R_max]`. Every other cell runs the hybrid policy through the
//! Bernoulli(ρ1) marks.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Result};
use crate::geometry::{sample_ppp, sample_rayleigh, CellScenario, NetworkConfig, Point2D, Window};
use crate::interference::{
    gamma_cdf, gamma_fit, gamma_from_moments, moments_destination, moments_relay, zeta_coefficients, GammaParams,
    InterferenceMoments, InterferenceTerm, Phase, PowerProfile,
};
use crate::policies::{decide_geometric, decide_hybrid, exp1, FadingDraw, PolicyKind};
use crate::rates::{link_outcome, substream, InterferenceDraw, InterferenceSampler, RateResult, StudyPolicy};
use crate::rng::{derive_seed, par_indexed, stream_rng};
use crate::stats::{histogram, ks_statistic, quantile, sorted, HistogramBin, SampleMoments};

/// Outer radius factor keeping 99.9% of the mean interference: the mean
/// beyond `R` scales as `R^{2−α}`.
pub fn default_rmax_factor(alpha: f64) -> f64 {
    1e-3f64.powf(-1.0 / (alpha - 2.0))
}

/// How the interferer field is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSettings {
    /// `R_max / Rc`.
    pub rmax_factor: f64,
    /// Common-message share `P^{m1}/P^m` used by cooperating interferers.
    pub interferer_common_fraction: f64,
    /// Place interfering relays at their own positions instead of on top of
    /// their sources.
    pub true_relay_positions: bool,
}

impl FieldSettings {
    pub fn for_alpha(alpha: f64) -> Self {
        FieldSettings {
            rmax_factor: default_rmax_factor(alpha),
            interferer_common_fraction: 0.0,
            true_relay_positions: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rmax_factor.is_finite() && self.rmax_factor > 1.0) {
            return Err(invalid("rmax_factor", format!("must exceed 1, got {}", self.rmax_factor)));
        }
        if !(0.0..=1.0).contains(&self.interferer_common_fraction) {
            return Err(invalid(
                "interferer_common_fraction",
                format!("must lie in [0, 1], got {}", self.interferer_common_fraction),
            ));
        }
        Ok(())
    }

    pub fn interferer_profile(&self, config: &NetworkConfig) -> Result<PowerProfile> {
        PowerProfile::equal_phases(config.p_s, config.p_r, config.alpha1, self.interferer_common_fraction)
    }
}

/// Interference powers of one field realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPowers {
    /// At the study BS, first phase.
    pub q_d_b: f64,
    /// At the study BS, second phase, with the random-phase cross term.
    pub q_d_m: f64,
    /// Same realization with the cross term dropped.
    pub q_d_m_averaged: f64,
    /// First-phase interference at each requested relay point.
    pub q_r: Vec<f64>,
    pub n_interferers: usize,
}

/// Relay position for a scenario in the study-cell frame.
pub fn relay_point(scenario: &CellScenario) -> Point2D {
    Point2D::new(
        scenario.r1 - scenario.r2 * scenario.psi0.cos(),
        -scenario.r2 * scenario.psi0.sin(),
    )
}

fn path(d2: f64, half_alpha: f64) -> f64 {
    d2.powf(-half_alpha)
}

/// Samples one interferer field and accumulates the received powers.
pub fn sample_field_powers<R: Rng + ?Sized>(
    config: &NetworkConfig,
    field: &FieldSettings,
    relay_points: &[Point2D],
    rng: &mut R,
) -> Result<FieldPowers> {
    config.validate()?;
    field.validate()?;
    let prof = field.interferer_profile(config)?;
    let rc = config.cell_radius;
    let window = Window::annulus(rc, field.rmax_factor * rc);
    let users = sample_ppp(config.lambda1, &window, rng)?;
    let half_alpha = 0.5 * config.alpha;
    let p_m = prof.p_s_m();
    let cross_amp = 2.0 * (prof.p_s_m1 * prof.p_r_m).sqrt();

    let mut out = FieldPowers {
        q_d_b: 0.0,
        q_d_m: 0.0,
        q_d_m_averaged: 0.0,
        q_r: vec![0.0; relay_points.len()],
        n_interferers: users.len(),
    };
    for z in &users {
        let cooperate = rng.random::<f64>() < config.rho1;
        let g_sd = exp1(rng);
        let g_rd = exp1(rng);
        let theta_k2 = 2.0 * PI * rng.random::<f64>();
        let theta_kr = 2.0 * PI * rng.random::<f64>();
        let l_s = path(z.dist2(&Point2D::ORIGIN), half_alpha);

        let p1 = if cooperate { prof.p_s_b } else { prof.p_s };
        out.q_d_b += g_sd * l_s * p1;
        if cooperate {
            let l_r = if field.true_relay_positions && config.lambda2 > 0.0 {
                let off = Point2D::polar(sample_rayleigh(config.lambda2, rng), 2.0 * PI * rng.random::<f64>());
                path(Point2D::new(z.x + off.x, z.y + off.y).dist2(&Point2D::ORIGIN), half_alpha)
            } else {
                l_s
            };
            let s = g_sd * l_s * p_m;
            let r = g_rd * l_r * prof.p_r_m;
            let cross = cross_amp * (g_sd * l_s * g_rd * l_r).sqrt() * (theta_k2 - theta_kr).cos();
            out.q_d_m += s + r + cross;
            out.q_d_m_averaged += s + r;
        } else {
            let s = g_sd * l_s * prof.p_s;
            out.q_d_m += s;
            out.q_d_m_averaged += s;
        }
        for (q, y) in out.q_r.iter_mut().zip(relay_points) {
            *q += exp1(rng) * path(z.dist2(y), half_alpha) * p1;
        }
    }
    // The cross term can push a sum a hair below zero only through rounding.
    out.q_d_m = out.q_d_m.max(0.0);
    Ok(out)
}

/// `n` field realizations; realization `i` uses the generator keyed by `(seed, i)`.
pub fn sample_field_batch(
    config: &NetworkConfig,
    field: &FieldSettings,
    relay_points: &[Point2D],
    n: usize,
    seed: u64,
) -> Result<Vec<FieldPowers>> {
    par_indexed(n, |i| {
        sample_field_powers(config, field, relay_points, &mut stream_rng(seed, substream::FIELD, i as u64))
    })
    .into_iter()
    .collect()
}

/// Interference drawn from simulated fields.
#[derive(Debug, Clone, Copy)]
pub struct SimulatedInterference {
    pub config: NetworkConfig,
    pub field: FieldSettings,
}

impl InterferenceSampler for SimulatedInterference {
    fn draw(&self, scenario: &CellScenario, rng: &mut ChaCha8Rng) -> Result<InterferenceDraw> {
        let f = sample_field_powers(&self.config, &self.field, &[relay_point(scenario)], rng)?;
        Ok(InterferenceDraw {
            q_d_b: f.q_d_b,
            q_d_m: f.q_d_m,
            q_r: Some(f.q_r[0]),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub q_d_b: f64,
    pub q_d_m: f64,
    pub q_r: f64,
    pub cooperate: bool,
    pub rate: RateResult,
    pub scenario: CellScenario,
    pub seed: u64,
}

/// One fully simulated study-cell trial, reproducible from `seed` alone.
pub fn simulate_trial(
    config: &NetworkConfig,
    field: &FieldSettings,
    scenario: &CellScenario,
    study_policy: StudyPolicy,
    seed: u64,
) -> Result<TrialResult> {
    let powers = sample_field_powers(config, field, &[relay_point(scenario)], &mut stream_rng(seed, substream::FIELD, 0))?;
    let fading = FadingDraw::sample(&mut stream_rng(seed, substream::FADING, 0));
    let q = InterferenceDraw {
        q_d_b: powers.q_d_b,
        q_d_m: powers.q_d_m,
        q_r: Some(powers.q_r[0]),
    };
    let out = link_outcome(config, scenario, &fading, &q, study_policy)?;
    Ok(TrialResult {
        q_d_b: powers.q_d_b,
        q_d_m: powers.q_d_m,
        q_r: powers.q_r[0],
        cooperate: out.cooperate,
        rate: out.rate,
        scenario: *scenario,
        seed,
    })
}

/// Seed of trial `index` in a run keyed by `seed`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    derive_seed(seed, 0, index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Brute-force cooperation frequency with r1, r2 independent Rayleigh and
/// ψ0 uniform. The ideal policy also simulates the interferer field.
pub fn estimate_coop_prob(
    policy: PolicyKind,
    config: &NetworkConfig,
    field: &FieldSettings,
    n: usize,
    seed: u64,
) -> Result<ProportionEstimate> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    require_positive("lambda1", config.lambda1)?;
    if config.lambda2 == 0.0 {
        return Ok(ProportionEstimate {
            estimate: 0.0,
            stderr: 0.0,
            n,
        });
    }
    let hits = par_indexed(n, |i| -> Result<bool> {
        let mut rng = stream_rng(seed, substream::SCENARIO, i as u64);
        let r1 = sample_rayleigh(config.lambda1, &mut rng);
        let r2 = sample_rayleigh(config.lambda2, &mut rng);
        let psi = 2.0 * PI * rng.random::<f64>();
        let s = CellScenario::new(r1, r2, psi)?;
        Ok(match policy {
            PolicyKind::Geometric => decide_geometric(&s).cooperate,
            PolicyKind::Hybrid => {
                let f = FadingDraw::sample(&mut rng);
                decide_hybrid(&s, &f, config.alpha).cooperate
            }
            PolicyKind::Ideal => simulate_trial(config, field, &s, StudyPolicy::Ideal, trial_seed(seed, i as u64))?.cooperate,
        })
    });
    let mut k = 0usize;
    for h in hits {
        k += h? as usize;
    }
    let p = k as f64 / n as f64;
    Ok(ProportionEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        n,
    })
}

/// Analytic moments of one interference term for the simulated field setup.
pub fn analytic_moments(
    term: InterferenceTerm,
    config: &NetworkConfig,
    field: &FieldSettings,
    d_relay_bs: f64,
) -> Result<InterferenceMoments> {
    let zetas = zeta_coefficients(config.rho1, &field.interferer_profile(config)?)?;
    match term {
        InterferenceTerm::DestPhase1 => moments_destination(Phase::First, config, &zetas),
        InterferenceTerm::DestPhase2 => moments_destination(Phase::Second, config, &zetas),
        InterferenceTerm::RelayPhase1 => moments_relay(config, &zetas, d_relay_bs),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalReport {
    pub term: InterferenceTerm,
    pub sample: SampleMoments,
    /// Sorted samples.
    pub samples: Vec<f64>,
    /// Gamma from the analytic moments; `None` where those do not exist.
    pub analytic: Option<GammaParams>,
    pub analytic_moments: Option<InterferenceMoments>,
    /// Why the analytic fit is missing, if it is.
    pub analytic_error: Option<String>,
    /// Gamma from the sample moments.
    pub fitted: GammaParams,
    pub ks_analytic: Option<f64>,
    pub ks_fitted: f64,
    /// KS distance between the two Gamma laws, evaluated on the samples.
    pub ks_between_fits: Option<f64>,
    pub histogram: Vec<HistogramBin>,
}

impl EmpiricalReport {
    pub fn empirical_cdf(&self, q: f64) -> f64 {
        self.samples.partition_point(|&x| x <= q) as f64 / self.samples.len() as f64
    }
}

/// Builds the KS report for a set of interference samples.
pub fn report_from_samples(
    term: InterferenceTerm,
    samples: Vec<f64>,
    analytic_moments: Result<InterferenceMoments>,
) -> Result<EmpiricalReport> {
    if samples.len() < 2 {
        return Err(invalid("n", "need at least two samples"));
    }
    let samples = sorted(samples);
    let sample = SampleMoments::of(&samples);
    let fitted = gamma_from_moments(sample.mean, sample.variance)?;
    let (analytic, analytic_moments, analytic_error) = match analytic_moments.and_then(|m| Ok((gamma_fit(&m)?, m))) {
        Ok((g, m)) => (Some(g), Some(m), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let ks_fitted = ks_statistic(&samples, |q| gamma_cdf(q, &fitted));
    let ks_analytic = analytic.map(|g| ks_statistic(&samples, |q| gamma_cdf(q, &g)));
    let ks_between_fits = analytic.map(|g| {
        samples
            .iter()
            .map(|&q| (gamma_cdf(q, &g) - gamma_cdf(q, &fitted)).abs())
            .fold(0.0, f64::max)
    });
    let hi = quantile(&samples, 0.99);
    let histogram = histogram(&samples, 0.0, hi, 50);
    Ok(EmpiricalReport {
        term,
        sample,
        samples,
        analytic,
        analytic_moments,
        analytic_error,
        fitted,
        ks_analytic,
        ks_fitted,
        ks_between_fits,
        histogram,
    })
}

/// Simulates `n` fields and compares one interference term with its Gamma fits.
pub fn empirical_distribution(
    term: InterferenceTerm,
    config: &NetworkConfig,
    field: &FieldSettings,
    scenario: &CellScenario,
    n: usize,
    seed: u64,
) -> Result<EmpiricalReport> {
    if n < 1000 {
        return Err(invalid("n", format!("need at least 1000 samples, got {n}")));
    }
    let batch = sample_field_batch(config, field, &[relay_point(scenario)], n, seed)?;
    let samples: Vec<f64> = batch
        .iter()
        .map(|f| match term {
            InterferenceTerm::DestPhase1 => f.q_d_b,
            InterferenceTerm::DestPhase2 => f.q_d_m,
            InterferenceTerm::RelayPhase1 => f.q_r[0],
        })
        .collect();
    report_from_samples(term, samples, analytic_moments(term, config, field, scenario.d_relay_bs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmax_factor_for_alpha4() {
        assert!((default_rmax_factor(4.0) - 1000f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn relay_point_distance_matches_law_of_cosines() {
        for (r1, r2, psi) in [(260.0, 104.0, PI / 6.0), (100.0, 40.0, 0.0), (50.0, 80.0, 2.5)] {
            let s = CellScenario::new(r1, r2, psi).unwrap();
            let p = relay_point(&s);
            assert!((p.norm() - s.d_relay_bs).abs() < 1e-9);
            assert!((p.dist(&Point2D::new(r1, 0.0)) - r2).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_field_gives_zero_interference() {
        let mut c = NetworkConfig::reference();
        c.lambda1 = 1e-300;
        let s = CellScenario::new(150.0, 30.0, 0.4).unwrap();
        let t = simulate_trial(&c, &FieldSettings::for_alpha(4.0), &s, StudyPolicy::Never, 5).unwrap();
        assert_eq!((t.q_d_b, t.q_d_m, t.q_r), (0.0, 0.0, 0.0));
    }

    #[test]
    fn trials_are_bit_identical_on_repeat() {
        let c = NetworkConfig::reference();
        let s = CellScenario::new(200.0, 60.0, 0.3).unwrap();
        let f = FieldSettings::for_alpha(4.0);
        let a = simulate_trial(&c, &f, &s, StudyPolicy::Ideal, 42).unwrap();
        let b = simulate_trial(&c, &f, &s, StudyPolicy::Ideal, 42).unwrap();
        assert_eq!(a, b);
        let c2 = simulate_trial(&c, &f, &s, StudyPolicy::Ideal, 43).unwrap();
        assert_ne!(a.q_d_b, c2.q_d_b);
    }

    #[test]
    fn coop_prob_without_idle_users() {
        let mut c = NetworkConfig::reference();
        c.lambda2 = 0.0;
        let e = estimate_coop_prob(PolicyKind::Hybrid, &c, &FieldSettings::for_alpha(4.0), 100, 1).unwrap();
        assert_eq!(e.estimate, 0.0);
    }

    #[test]
    fn cross_term_vanishes_without_common_part() {
        let c = NetworkConfig::reference();
        let f = FieldSettings::for_alpha(4.0);
        let batch = sample_field_batch(&c, &f, &[], 20, 3).unwrap();
        for p in batch {
            assert!((p.q_d_m - p.q_d_m_averaged).abs() <= 1e-12 * p.q_d_m_averaged);
        }
    }
}
