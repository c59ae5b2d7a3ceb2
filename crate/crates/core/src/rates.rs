//! Achievable rates: equivalent channels, partial decode-and-forward rate,
//! direct rate, power-split search and policy-weighted averages.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, Error, Result};
use crate::geometry::{sample_rayleigh, CellScenario, NetworkConfig};
use crate::interference::{
    gamma_fit, moments_destination, sample_gamma, zeta_coefficients, GammaParams, Phase, PowerProfile,
    RelayKernelTable, ZetaCoefficients,
};
use crate::policies::{decide_geometric, decide_hybrid, decide_ideal, FadingDraw};
use crate::rng::{par_indexed, stream_rng};

/// Interference-and-noise normalized power gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentChannels {
    pub h_sr_eq: f64,
    pub h_sd_b_eq: f64,
    pub h_sd_m_eq: f64,
    pub h_rd_eq: f64,
}

/// Channel power gains including path loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawLinkGains {
    pub sd: f64,
    pub sr: f64,
    pub rd: f64,
}

fn path_gain(g: f64, r: f64, alpha: f64) -> f64 {
    if r == 0.0 {
        f64::INFINITY
    } else {
        g * r.powf(-alpha)
    }
}

impl RawLinkGains {
    pub fn from_geometry(scenario: &CellScenario, fading: &FadingDraw, alpha: f64) -> Self {
        RawLinkGains {
            sd: path_gain(fading.g_sd, scenario.r1, alpha),
            sr: path_gain(fading.g_sr, scenario.r2, alpha),
            rd: path_gain(fading.g_rd, scenario.d_relay_bs, alpha),
        }
    }
}

pub fn equivalent_channels(raw: &RawLinkGains, q_r: f64, q_d_b: f64, q_d_m: f64, sigma2: f64) -> Result<EquivalentChannels> {
    require_nonnegative("q_r", q_r)?;
    require_nonnegative("q_d_b", q_d_b)?;
    require_nonnegative("q_d_m", q_d_m)?;
    require_nonnegative("sigma2", sigma2)?;
    let floor = |q: f64, at: &'static str| {
        let f = q + sigma2;
        if f > 0.0 {
            Ok(f)
        } else {
            Err(Error::ZeroNoiseFloor(at))
        }
    };
    let relay = floor(q_r, "relay")?;
    let bs1 = floor(q_d_b, "base station (phase 1)")?;
    let bs2 = floor(q_d_m, "base station (phase 2)")?;
    Ok(EquivalentChannels {
        h_sr_eq: raw.sr / relay,
        h_sd_b_eq: raw.sd / bs1,
        h_sd_m_eq: raw.sd / bs2,
        h_rd_eq: raw.rd / bs2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateComponents {
    Relayed { c1: f64, c2: f64, c3: f64 },
    Direct { phase1: f64, phase2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMode {
    Relayed,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    /// Bits per channel use.
    pub rate: f64,
    pub mode: RateMode,
    pub components: RateComponents,
}

/// `gain * power`, with zero power winning over an infinite gain.
fn snr(gain: f64, power: f64) -> f64 {
    if power == 0.0 {
        0.0
    } else {
        gain * power
    }
}

pub fn pdf_rate(ch: &EquivalentChannels, alloc: &PowerProfile) -> RateResult {
    let (a1, a2) = (alloc.alpha1, alloc.alpha2);
    let c1 = a1 * snr(ch.h_sr_eq, alloc.p_s_b).log2_1p();
    let c2 = a2 * snr(ch.h_sd_m_eq, alloc.p_s_m2).log2_1p();
    let beam = snr(ch.h_sd_m_eq, alloc.p_s_m1).sqrt() + snr(ch.h_rd_eq, alloc.p_r_m).sqrt();
    let c3 = a1 * snr(ch.h_sd_b_eq, alloc.p_s_b).log2_1p() + a2 * (snr(ch.h_sd_m_eq, alloc.p_s_m2) + beam * beam).log2_1p();
    RateResult {
        rate: (c1 + c2).min(c3),
        mode: RateMode::Relayed,
        components: RateComponents::Relayed { c1, c2, c3 },
    }
}

pub fn direct_rate(ch: &EquivalentChannels, p_s: f64, alpha1: f64) -> RateResult {
    let phase1 = alpha1 * snr(ch.h_sd_b_eq, p_s).log2_1p();
    let phase2 = (1.0 - alpha1) * snr(ch.h_sd_m_eq, p_s).log2_1p();
    RateResult {
        rate: phase1 + phase2,
        mode: RateMode::Direct,
        components: RateComponents::Direct { phase1, phase2 },
    }
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizedSplit {
    pub allocation: PowerProfile,
    /// `P_s^{m1} / P_s^m`.
    pub common_fraction: f64,
    pub result: RateResult,
}

pub const SPLIT_GRID_POINTS: usize = 101;
pub const SPLIT_RESOLUTION: f64 = 1e-4;

/// Best common-message fraction with equal source power in both phases and
/// the relay budget spent in the second phase.
///
/// `C1 + C2` falls and `C3` rises with the fraction, so their minimum is
/// unimodal: a grid pass picks the bracket and golden-section search
/// refines it.
pub fn optimize_power_split(ch: &EquivalentChannels, p_s: f64, p_r: f64, alpha1: f64) -> Result<OptimizedSplit> {
    require_nonnegative("p_s", p_s)?;
    require_nonnegative("p_r", p_r)?;
    let eval = |t: f64| -> Result<(PowerProfile, RateResult)> {
        let alloc = PowerProfile::equal_phases(p_s, p_r, alpha1, t)?;
        Ok((alloc, pdf_rate(ch, &alloc)))
    };
    let step = 1.0 / (SPLIT_GRID_POINTS - 1) as f64;
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..SPLIT_GRID_POINTS {
        let r = eval(i as f64 * step)?.1.rate;
        if r > best {
            best = r;
            best_i = i;
        }
    }
    let mut best_t = best_i as f64 * step;
    let mut lo = (best_t - step).max(0.0);
    let mut hi = (best_t + step).min(1.0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = eval(x1)?.1.rate;
    let mut f2 = eval(x2)?.1.rate;
    while hi - lo > SPLIT_RESOLUTION {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = eval(x1)?.1.rate;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = eval(x2)?.1.rate;
        }
    }
    let t = 0.5 * (lo + hi);
    // Only move off the grid point for a strict improvement.
    let refined = eval(t)?;
    if refined.1.rate > best {
        best_t = t;
    }
    let (allocation, result) = eval(best_t)?;
    Ok(OptimizedSplit {
        allocation,
        common_fraction: best_t,
        result,
    })
}

/// How the cell under study decides between relaying and direct transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StudyPolicy {
    /// Equivalent-gain comparison including noise.
    Ideal,
    /// Equivalent-gain comparison with the noise term dropped.
    IdealNoiseFree,
    Geometric,
    Hybrid,
    /// Relay whenever a relay is available.
    Always,
    /// Direct transmission only.
    Never,
}

impl StudyPolicy {
    pub fn label(self) -> &'static str {
        match self {
            StudyPolicy::Ideal => "E1",
            StudyPolicy::IdealNoiseFree => "E1-noise-free",
            StudyPolicy::Geometric => "E2",
            StudyPolicy::Hybrid => "E3",
            StudyPolicy::Always => "always",
            StudyPolicy::Never => "never",
        }
    }
}

/// One draw of the three interference powers seen by the study link.
/// `q_r` is `None` when no relay interference model applies (relay on or
/// beyond the cell edge in the analytic path); relaying is then unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceDraw {
    pub q_d_b: f64,
    pub q_d_m: f64,
    pub q_r: Option<f64>,
}

/// Outcome of one study-link draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkOutcome {
    pub cooperate: bool,
    pub rate: RateResult,
    pub channels: EquivalentChannels,
}

/// Applies the study policy and returns the realized rate: the optimized
/// relayed rate when cooperating, the direct rate otherwise.
pub fn link_outcome(
    config: &NetworkConfig,
    scenario: &CellScenario,
    fading: &FadingDraw,
    q: &InterferenceDraw,
    policy: StudyPolicy,
) -> Result<LinkOutcome> {
    let raw = RawLinkGains::from_geometry(scenario, fading, config.alpha);
    let channels = equivalent_channels(&raw, q.q_r.unwrap_or(0.0), q.q_d_b, q.q_d_m, config.noise_power)?;
    let available = q.q_r.is_some();
    let cooperate = available
        && match policy {
            StudyPolicy::Ideal => decide_ideal(channels.h_sr_eq, channels.h_sd_b_eq).cooperate,
            StudyPolicy::IdealNoiseFree => {
                let q_r = q.q_r.unwrap_or(0.0);
                crate::policies::decide_ideal_noise_free(scenario, fading, config.alpha, q_r, q.q_d_b).cooperate
            }
            StudyPolicy::Geometric => decide_geometric(scenario).cooperate,
            StudyPolicy::Hybrid => decide_hybrid(scenario, fading, config.alpha).cooperate,
            StudyPolicy::Always => true,
            StudyPolicy::Never => false,
        };
    let rate = if cooperate {
        optimize_power_split(&channels, config.p_s, config.p_r, config.alpha1)?.result
    } else {
        direct_rate(&channels, config.p_s, config.alpha1)
    };
    Ok(LinkOutcome {
        cooperate,
        rate,
        channels,
    })
}

/// Study-link geometry to average over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScenarioDistribution {
    Fixed(CellScenario),
    /// Fixed r1; relay distance Rayleigh with the idle-user intensity and
    /// direction uniform.
    RandomRelay { r1: f64 },
    /// Fixed r1 and r2; direction uniform.
    RandomAngle { r1: f64, r2: f64 },
    /// r1 uniform over the ring area `[inner, outer]`, relay as in `RandomRelay`.
    Ring { inner: f64, outer: f64 },
}

impl ScenarioDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, config: &NetworkConfig, rng: &mut R) -> Result<CellScenario> {
        match *self {
            ScenarioDistribution::Fixed(s) => Ok(s),
            ScenarioDistribution::RandomRelay { r1 } => {
                if config.lambda2 <= 0.0 {
                    return Err(invalid("lambda2", "random relay placement needs idle users"));
                }
                let r2 = sample_rayleigh(config.lambda2, rng);
                let psi = 2.0 * PI * rng.random::<f64>();
                CellScenario::new(r1, r2, psi)
            }
            ScenarioDistribution::RandomAngle { r1, r2 } => CellScenario::new(r1, r2, 2.0 * PI * rng.random::<f64>()),
            ScenarioDistribution::Ring { inner, outer } => {
                if !(inner >= 0.0 && outer > inner) {
                    return Err(invalid("ring", format!("need 0 <= inner < outer, got [{inner}, {outer}]")));
                }
                let u: f64 = rng.random();
                let r1 = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
                ScenarioDistribution::RandomRelay { r1 }.sample(config, rng)
            }
        }
    }
}

/// Source of interference draws for a study link.
pub trait InterferenceSampler: Sync {
    fn draw(&self, scenario: &CellScenario, rng: &mut ChaCha8Rng) -> Result<InterferenceDraw>;
}

/// Interference drawn from the moment-matched Gamma laws.
#[derive(Debug, Clone)]
pub struct GammaInterference {
    pub dest1: GammaParams,
    pub dest2: GammaParams,
    pub zetas: ZetaCoefficients,
    lambda1: f64,
    table: Arc<RelayKernelTable>,
}

impl GammaInterference {
    /// `interferer_profile` is the power split used by cooperating interferers;
    /// their cooperation probability is `config.rho1`.
    pub fn new(config: &NetworkConfig, interferer_profile: &PowerProfile, table: Arc<RelayKernelTable>) -> Result<Self> {
        config.validate()?;
        if table.alpha() != config.alpha || table.cell_radius() != config.cell_radius {
            return Err(invalid("table", "relay kernel table was built for another (alpha, cell_radius)"));
        }
        let zetas = zeta_coefficients(config.rho1, interferer_profile)?;
        Ok(GammaInterference {
            dest1: gamma_fit(&moments_destination(Phase::First, config, &zetas)?)?,
            dest2: gamma_fit(&moments_destination(Phase::Second, config, &zetas)?)?,
            zetas,
            lambda1: config.lambda1,
            table,
        })
    }

    pub fn relay_params(&self, d: f64) -> Result<GammaParams> {
        gamma_fit(&self.table.moments(self.lambda1, &self.zetas, d)?)
    }
}

/// Sub-stream ids so each random component keeps its own generator.
pub(crate) mod substream {
    pub const SCENARIO: u64 = 1;
    pub const FADING: u64 = 2;
    pub const Q_DEST1: u64 = 3;
    pub const Q_DEST2: u64 = 4;
    pub const Q_RELAY: u64 = 5;
    pub const FIELD: u64 = 6;
}

impl InterferenceSampler for GammaInterference {
    fn draw(&self, scenario: &CellScenario, rng: &mut ChaCha8Rng) -> Result<InterferenceDraw> {
        let base: u64 = rng.random();
        let q_d_b = sample_gamma(&self.dest1, &mut stream_rng(base, substream::Q_DEST1, 0));
        let q_d_m = sample_gamma(&self.dest2, &mut stream_rng(base, substream::Q_DEST2, 0));
        let q_r = if scenario.d_relay_bs < self.table.cell_radius() {
            let p = self.relay_params(scenario.d_relay_bs)?;
            Some(sample_gamma(&p, &mut stream_rng(base, substream::Q_RELAY, 0)))
        } else {
            None
        };
        Ok(InterferenceDraw { q_d_b, q_d_m, q_r })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub coop_fraction: f64,
}

/// Monte Carlo mean of the realized study-link rate. Draw `i` uses
/// generators keyed by `(seed, i)`, so equal seeds give common random
/// numbers across calls and the result is independent of the worker count.
pub fn average_rate<S: InterferenceSampler>(
    policy: StudyPolicy,
    config: &NetworkConfig,
    distribution: &ScenarioDistribution,
    sampler: &S,
    n_draws: usize,
    seed: u64,
) -> Result<RateEstimate> {
    if n_draws == 0 {
        return Err(invalid("n_draws", "must be at least 1"));
    }
    let draws = par_indexed(n_draws, |i| -> Result<(f64, bool)> {
        let i = i as u64;
        let scenario = distribution.sample(config, &mut stream_rng(seed, substream::SCENARIO, i))?;
        let fading = FadingDraw::sample(&mut stream_rng(seed, substream::FADING, i));
        let q = sampler.draw(&scenario, &mut stream_rng(seed, substream::FIELD, i))?;
        let out = link_outcome(config, &scenario, &fading, &q, policy)?;
        Ok((out.rate.rate, out.cooperate))
    });
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut coop = 0usize;
    for d in draws {
        let (r, c) = d?;
        sum += r;
        sum2 += r * r;
        coop += c as usize;
    }
    let n = n_draws as f64;
    let mean = sum / n;
    let var = if n_draws > 1 {
        ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(RateEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n: n_draws,
        coop_fraction: coop as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ch(sr: f64, b: f64, m: f64, rd: f64) -> EquivalentChannels {
        EquivalentChannels {
            h_sr_eq: sr,
            h_sd_b_eq: b,
            h_sd_m_eq: m,
            h_rd_eq: rd,
        }
    }

    #[test]
    fn equivalent_channel_examples() {
        let raw = RawLinkGains { sd: 2.0, sr: 5.0, rd: 7.0 };
        let e = equivalent_channels(&raw, 0.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(e, ch(5.0, 2.0, 2.0, 7.0));
        let e = equivalent_channels(&raw, 3.0, 3.0, 3.0, 1.0).unwrap();
        assert_eq!(e.h_sd_b_eq, 0.5);
        let e = equivalent_channels(&raw, 1.0, 1.0, 3.0, 1.0).unwrap();
        assert_eq!(e.h_sd_b_eq / e.h_sd_m_eq, 4.0 / 2.0);
        assert_eq!(
            equivalent_channels(&raw, 0.0, 1.0, 1.0, 0.0),
            Err(Error::ZeroNoiseFloor("relay"))
        );
    }

    #[test]
    fn pdf_rate_examples() {
        let zero = PowerProfile::equal_phases(0.0, 0.0, 0.5, 0.3).unwrap();
        assert_eq!(pdf_rate(&ch(3.0, 1.0, 1.0, 2.0), &zero).rate, 0.0);

        // Useless relay and no common part: C3 is the direct rate.
        let c = ch(10.0, 2.0, 1.5, 0.0);
        let p = PowerProfile::equal_phases(1.0, 1.0, 0.5, 0.0).unwrap();
        let r = pdf_rate(&c, &p);
        let d = direct_rate(&c, 1.0, 0.5);
        match r.components {
            RateComponents::Relayed { c3, .. } => assert!((c3 - d.rate).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert!(r.rate <= d.rate + 1e-15);
    }

    #[test]
    fn min_structure() {
        let c = ch(0.4, 2.0, 1.0, 3.0);
        let p = PowerProfile::equal_phases(1.0, 1.0, 0.5, 0.5).unwrap();
        let r = pdf_rate(&c, &p);
        let RateComponents::Relayed { c1, c2, c3 } = r.components else {
            unreachable!()
        };
        assert_eq!(r.rate, (c1 + c2).min(c3));
    }

    #[test]
    fn direct_rate_examples() {
        assert!((direct_rate(&ch(0.0, 1.0, 1.0, 0.0), 1.0, 0.5).rate - 1.0).abs() < 1e-15);
        assert_eq!(direct_rate(&ch(0.0, 5.0, 5.0, 0.0), 0.0, 0.5).rate, 0.0);
        let r = direct_rate(&ch(0.0, 3.0, 3.0, 0.0), 2.0, 0.3).rate;
        assert!((r - 7f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn optimizer_examples() {
        let c = ch(50.0, 1.0, 1.0, 0.0);
        let s = optimize_power_split(&c, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(s.common_fraction, 0.0);

        let c = ch(f64::INFINITY, 1.0, 0.8, 2.0);
        let s = optimize_power_split(&c, 1.0, 1.0, 0.5).unwrap();
        assert!(s.result.rate >= direct_rate(&c, 1.0, 0.5).rate);
    }

    #[test]
    fn optimizer_beats_dense_grid() {
        let cases = [
            ch(2.0, 1.0, 0.7, 1.5),
            ch(30.0, 0.2, 0.15, 0.9),
            ch(1.1, 1.0, 1.0, 0.05),
            ch(500.0, 4.0, 3.0, 20.0),
        ];
        for c in cases {
            let s = optimize_power_split(&c, 1.0, 1.0, 0.5).unwrap();
            let brute = (0..=10_000)
                .map(|i| {
                    let p = PowerProfile::equal_phases(1.0, 1.0, 0.5, i as f64 / 10_000.0).unwrap();
                    pdf_rate(&c, &p).rate
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(s.result.rate >= brute - 1e-6, "{c:?}: {} < {brute}", s.result.rate);
        }
    }

    #[test]
    fn coherent_term_helps() {
        let c = ch(5.0, 1.0, 1.0, 2.0);
        let p = PowerProfile::equal_phases(1.0, 1.0, 0.5, 0.5).unwrap();
        let coherent = pdf_rate(&c, &p);
        let RateComponents::Relayed { c3, .. } = coherent.components else {
            unreachable!()
        };
        let incoherent = 0.5 * (1.0f64 + 1.0).log2()
            + 0.5 * (1.0 + c.h_sd_m_eq * p.p_s_m2 + c.h_sd_m_eq * p.p_s_m1 + c.h_rd_eq * p.p_r_m).log2();
        assert!(c3 > incoherent);
    }

    struct NoInterference;
    impl InterferenceSampler for NoInterference {
        fn draw(&self, _: &CellScenario, _: &mut ChaCha8Rng) -> Result<InterferenceDraw> {
            Ok(InterferenceDraw {
                q_d_b: 0.0,
                q_d_m: 0.0,
                q_r: Some(0.0),
            })
        }
    }

    #[test]
    fn average_rate_degenerate_policies() {
        let cfg = NetworkConfig::reference();
        let s = CellScenario::new(200.0, 0.0, 0.0).unwrap();
        let dist = ScenarioDistribution::Fixed(s);
        let never = average_rate(StudyPolicy::Never, &cfg, &dist, &NoInterference, 2000, 1).unwrap();
        assert_eq!(never.coop_fraction, 0.0);
        // Direct-only mean by hand with the same fading draws.
        let mut manual = 0.0;
        for i in 0..2000u64 {
            let f = FadingDraw::sample(&mut stream_rng(1, substream::FADING, i));
            let raw = RawLinkGains::from_geometry(&s, &f, cfg.alpha);
            let e = equivalent_channels(&raw, 0.0, 0.0, 0.0, cfg.noise_power).unwrap();
            manual += direct_rate(&e, cfg.p_s, cfg.alpha1).rate;
        }
        assert!((never.mean - manual / 2000.0).abs() < 1e-12);

        let always = average_rate(StudyPolicy::Always, &cfg, &dist, &NoInterference, 2000, 1).unwrap();
        assert_eq!(always.coop_fraction, 1.0);
        assert!(always.mean > never.mean);
    }

    #[test]
    fn average_rate_is_reproducible() {
        let cfg = NetworkConfig::reference();
        let table = Arc::new(RelayKernelTable::new(cfg.alpha, cfg.cell_radius, 33).unwrap());
        let prof = PowerProfile::equal_phases(cfg.p_s, cfg.p_r, cfg.alpha1, 0.0).unwrap();
        let g = GammaInterference::new(&cfg, &prof, table).unwrap();
        let dist = ScenarioDistribution::RandomRelay { r1: 250.0 };
        let a = average_rate(StudyPolicy::Hybrid, &cfg, &dist, &g, 500, 9).unwrap();
        let b = average_rate(StudyPolicy::Hybrid, &cfg, &dist, &g, 500, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.coop_fraction > 0.0 && a.coop_fraction < 1.0);
    }
}
