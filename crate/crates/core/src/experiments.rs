//! Registered experiments. Each one turns an [`ExperimentConfig`] into a
//! [`ResultTable`]; the CLI handles parsing and output.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    distance_cdf, distance_pdf, rayleigh_mode, sample_study_link, CellScenario, LinkKind, NetworkConfig, Point2D,
};
use crate::interference::{dbm_to_watts, GammaParams, InterferenceTerm, RelayKernelTable};
use crate::montecarlo::{
    analytic_moments, estimate_coop_prob, report_from_samples, sample_field_batch, FieldPowers, FieldSettings,
    SimulatedInterference,
};
use crate::policies::{coop_prob_geometric, coop_prob_hybrid, FadingDraw, PolicyKind};
use crate::rates::{
    average_rate, link_outcome, substream, GammaInterference, InterferenceDraw, InterferenceSampler, RateEstimate,
    ScenarioDistribution, StudyPolicy,
};
use crate::rng::{par_indexed, stream_rng};
use crate::stats::{ks_statistic, ks_two_sample, sorted, SampleMoments};

/// Where the interferers' cooperation probability comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rho1Mode {
    Geometric,
    Hybrid,
    Fixed(f64),
}

impl Rho1Mode {
    pub fn resolve(&self, lambda1: f64, lambda2: f64, alpha: f64) -> Result<f64> {
        match *self {
            Rho1Mode::Geometric => coop_prob_geometric(lambda1, lambda2),
            Rho1Mode::Hybrid => coop_prob_hybrid(lambda1, lambda2, alpha),
            Rho1Mode::Fixed(v) if (0.0..=1.0).contains(&v) => Ok(v),
            Rho1Mode::Fixed(v) => Err(invalid("rho1_mode", format!("fixed value must lie in [0, 1], got {v}"))),
        }
    }
}

impl fmt::Display for Rho1Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rho1Mode::Geometric => write!(f, "e2"),
            Rho1Mode::Hybrid => write!(f, "e3"),
            Rho1Mode::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for Rho1Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e2" => Ok(Rho1Mode::Geometric),
            "e3" => Ok(Rho1Mode::Hybrid),
            _ => {
                let v = s
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| invalid("rho1_mode", format!("expected e2, e3 or fixed:<v>, got {s:?}")))?;
                if (0.0..=1.0).contains(&v) {
                    Ok(Rho1Mode::Fixed(v))
                } else {
                    Err(invalid("rho1_mode", format!("fixed value must lie in [0, 1], got {v}")))
                }
            }
        }
    }
}

/// Fully resolved experiment inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Network at the configured transmit power; `rho1` already resolved.
    pub network: NetworkConfig,
    pub p_max_dbm: f64,
    pub rho1_mode: Rho1Mode,
    pub field: FieldSettings,
    /// Overrides each experiment's main sample count.
    pub n_trials: Option<usize>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn reference() -> Self {
        let network = NetworkConfig::reference();
        ExperimentConfig {
            field: FieldSettings::for_alpha(network.alpha),
            network,
            p_max_dbm: 23.0,
            rho1_mode: Rho1Mode::Hybrid,
            n_trials: None,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.field.validate()?;
        if self.n_trials == Some(0) {
            return Err(invalid("n_trials", "must be at least 1"));
        }
        Ok(())
    }

    fn trials(&self, default: usize) -> usize {
        self.n_trials.unwrap_or(default)
    }

    /// Network with `λ2 = ratio·λ1` and ρ1 re-resolved.
    pub fn with_ratio(&self, ratio: f64) -> Result<NetworkConfig> {
        let mut n = self.network;
        n.lambda2 = ratio * n.lambda1;
        n.rho1 = self.rho1_mode.resolve(n.lambda1, n.lambda2, n.alpha)?;
        n.validate()?;
        Ok(n)
    }
}

/// Network at another transmit power; the noise floor stays in watts.
pub fn at_power(network: &NetworkConfig, dbm: f64) -> NetworkConfig {
    let mut n = *network;
    n.p_s = dbm_to_watts(dbm);
    n.p_r = n.p_s;
    n
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Missing
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::from)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Scalar results that do not fit the row layout.
    pub summary: Vec<(String, Cell)>,
}

impl ResultTable {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        ResultTable {
            experiment: experiment.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.to_string(), value.into()));
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column values; non-numeric cells become NaN.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let k = self.column(name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows
            .iter()
            .map(|r| match r[k] {
                Cell::Num(v) => v,
                Cell::Int(v) => v as f64,
                _ => f64::NAN,
            })
            .collect()
    }
}

pub struct Experiment {
    pub id: &'static str,
    pub description: &'static str,
    pub run: fn(&ExperimentConfig) -> Result<ResultTable>,
}

static REGISTRY: &[Experiment] = &[
    Experiment {
        id: "fig4",
        description: "source-to-BS distance law: simulated vs Rayleigh",
        run: fig4,
    },
    Experiment {
        id: "fig5",
        description: "source-to-relay distance law: simulated vs Rayleigh",
        run: fig5,
    },
    Experiment {
        id: "fig6",
        description: "cooperation probability vs idle/active density ratio",
        run: fig6,
    },
    Experiment {
        id: "fig7",
        description: "Gamma fits of the three interference terms",
        run: fig7,
    },
    Experiment {
        id: "fig8",
        description: "model vs simulation as transmit power rises",
        run: fig8,
    },
    Experiment {
        id: "fig9",
        description: "relay interference fit as the relay approaches the cell edge",
        run: fig9,
    },
    Experiment {
        id: "fig10",
        description: "rate vs relay distance for an edge user",
        run: fig10,
    },
    Experiment {
        id: "fig11",
        description: "rate vs relay distance across cell sizes",
        run: fig11,
    },
    Experiment {
        id: "fig12",
        description: "rate gain vs user distance, averaged and ideal relay",
        run: fig12,
    },
    Experiment {
        id: "fig13",
        description: "rate gain of outer-ring users across cell sizes",
        run: fig13,
    },
    Experiment {
        id: "acceptance",
        description: "acceptance checks, one row per criterion",
        run: crate::acceptance::run_experiment,
    },
];

/// Registered experiments: figures in numeric order, then the acceptance suite.
pub fn registry() -> &'static [Experiment] {
    REGISTRY
}

pub fn find(id: &str) -> Result<&'static Experiment> {
    REGISTRY.iter().find(|e| e.id == id).ok_or_else(|| Error::UnknownExperiment {
        id: id.to_string(),
        known: REGISTRY.iter().map(|e| e.id).collect::<Vec<_>>().join(", "),
    })
}

pub fn run_experiment(id: &str, config: &ExperimentConfig) -> Result<ResultTable> {
    let e = find(id)?;
    config.validate()?;
    (e.run)(config)
}

// Substream ids for experiment-level draws; kept apart from the per-draw ones.
const STREAM_STUDY_LINK: u64 = 101;

/// Window radius, in cell radii, for the distance-law simulation.
pub const DISTANCE_WINDOW_CELLS: f64 = 10.0;

/// Simulated study-link distances `(r1, r2)`.
pub fn study_link_samples(config: &NetworkConfig, n: usize, seed: u64) -> Result<Vec<CellScenario>> {
    let radius = DISTANCE_WINDOW_CELLS * config.cell_radius;
    par_indexed(n, |i| sample_study_link(config, radius, &mut stream_rng(seed, STREAM_STUDY_LINK, i as u64)))
        .into_iter()
        .collect()
}

fn distance_law(id: &str, cfg: &ExperimentConfig, kind: LinkKind) -> Result<ResultTable> {
    let net = &cfg.network;
    let n = cfg.trials(100_000);
    let links = study_link_samples(net, n, cfg.seed)?;
    let xs = sorted(
        links
            .iter()
            .map(|s| match kind {
                LinkKind::Direct => s.r1,
                LinkKind::Cooperation => s.r2,
            })
            .collect(),
    );
    let ks = ks_statistic(&xs, |r| distance_cdf(kind, r, net));
    let lambda = match kind {
        LinkKind::Direct => net.lambda1,
        LinkKind::Cooperation => net.lambda2,
    };
    let r_max = 4.0 * rayleigh_mode(lambda);
    let mut t = ResultTable::new(id, &["r_m", "pdf_analytic", "cdf_analytic", "cdf_empirical"]);
    for k in 0..=80 {
        let r = r_max * k as f64 / 80.0;
        let emp = xs.partition_point(|&x| x <= r) as f64 / n as f64;
        t.push(vec![
            r.into(),
            distance_pdf(kind, r, net).into(),
            distance_cdf(kind, r, net).into(),
            emp.into(),
        ]);
    }
    t.note("n", n);
    t.note("ks", ks);
    Ok(t)
}

fn fig4(cfg: &ExperimentConfig) -> Result<ResultTable> {
    distance_law("fig4", cfg, LinkKind::Direct)
}

fn fig5(cfg: &ExperimentConfig) -> Result<ResultTable> {
    distance_law("fig5", cfg, LinkKind::Cooperation)
}

pub const FIG6_RATIOS: [f64; 5] = [1.0, 2.0, 4.0, 6.0, 10.0];

fn fig6(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.trials(1_000_000);
    let mut t = ResultTable::new("fig6", &["ratio", "rho2_analytic", "rho3_analytic", "rho_mc", "stderr"]);
    for ratio in FIG6_RATIOS {
        let net = cfg.with_ratio(ratio)?;
        let rho2 = coop_prob_geometric(net.lambda1, net.lambda2)?;
        let rho3 = coop_prob_hybrid(net.lambda1, net.lambda2, net.alpha)?;
        let mc = estimate_coop_prob(PolicyKind::Hybrid, &net, &cfg.field, n, cfg.seed)?;
        t.push(vec![ratio.into(), rho2.into(), rho3.into(), mc.estimate.into(), mc.stderr.into()]);
    }
    t.note("n", n);
    Ok(t)
}

/// Relay distance, as a fraction of Rc, used for the relay-term fits.
pub const FIG7_RELAY_FRACTION: f64 = 0.5;

fn fig7(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.trials(100_000);
    let mut t = ResultTable::new(
        "fig7",
        &[
            "p_dbm",
            "term",
            "mean_analytic",
            "mean_mc",
            "var_analytic",
            "var_mc",
            "shape_analytic",
            "scale_analytic",
            "shape_fitted",
            "scale_fitted",
            "ks_analytic",
            "ks_fitted",
            "ks_between_fits",
        ],
    );
    let d = FIG7_RELAY_FRACTION * cfg.network.cell_radius;
    for dbm in [23.0, 26.0] {
        let net = at_power(&cfg.network, dbm);
        let batch = sample_field_batch(&net, &cfg.field, &[Point2D::new(d, 0.0)], n, cfg.seed)?;
        for term in [InterferenceTerm::DestPhase1, InterferenceTerm::DestPhase2, InterferenceTerm::RelayPhase1] {
            let rep = report_from_samples(
                term,
                pick(&batch, term, 0),
                analytic_moments(term, &net, &cfg.field, d),
            )?;
            t.push(vec![
                dbm.into(),
                term.label().into(),
                rep.analytic_moments.map(|m| m.mean).into(),
                rep.sample.mean.into(),
                rep.analytic_moments.map(|m| m.variance).into(),
                rep.sample.variance.into(),
                rep.analytic.map(|g| g.shape).into(),
                rep.analytic.map(|g| g.scale).into(),
                rep.fitted.shape.into(),
                rep.fitted.scale.into(),
                rep.ks_analytic.into(),
                rep.ks_fitted.into(),
                rep.ks_between_fits.into(),
            ]);
        }
    }
    t.note("n", n);
    t.note("relay_d_m", d);
    Ok(t)
}

fn pick(batch: &[FieldPowers], term: InterferenceTerm, relay: usize) -> Vec<f64> {
    batch
        .iter()
        .map(|f| match term {
            InterferenceTerm::DestPhase1 => f.q_d_b,
            InterferenceTerm::DestPhase2 => f.q_d_m,
            InterferenceTerm::RelayPhase1 => f.q_r[relay],
        })
        .collect()
}

fn gamma_sampler(net: &NetworkConfig, field: &FieldSettings, table: &Arc<RelayKernelTable>) -> Result<GammaInterference> {
    GammaInterference::new(net, &field.interferer_profile(net)?, Arc::clone(table))
}

fn kernel_table(net: &NetworkConfig) -> Result<Arc<RelayKernelTable>> {
    Ok(Arc::new(RelayKernelTable::new(
        net.alpha,
        net.cell_radius,
        RelayKernelTable::DEFAULT_NODES,
    )?))
}

/// Realized rates with interference replayed from a simulated batch, scaled
/// by `power_scale`. Draw `i` shares its fading with `average_rate` draw `i`.
fn replay_rates(
    net: &NetworkConfig,
    scenario: &CellScenario,
    batch: &[FieldPowers],
    relay: usize,
    power_scale: f64,
    policy: StudyPolicy,
    seed: u64,
) -> Result<RateEstimate> {
    let rates = par_indexed(batch.len(), |i| -> Result<(f64, bool)> {
        let f = &batch[i];
        let fading = FadingDraw::sample(&mut stream_rng(seed, substream::FADING, i as u64));
        let q = InterferenceDraw {
            q_d_b: f.q_d_b * power_scale,
            q_d_m: f.q_d_m * power_scale,
            q_r: Some(f.q_r[relay] * power_scale),
        };
        let o = link_outcome(net, scenario, &fading, &q, policy)?;
        Ok((o.rate.rate, o.cooperate))
    });
    summarize(rates)
}

fn summarize(draws: Vec<Result<(f64, bool)>>) -> Result<RateEstimate> {
    let mut rates = Vec::with_capacity(draws.len());
    let mut coop = 0usize;
    for d in draws {
        let (r, c) = d?;
        rates.push(r);
        coop += c as usize;
    }
    let m = SampleMoments::of(&rates);
    Ok(RateEstimate {
        mean: m.mean,
        stderr: m.stderr(),
        n: rates.len(),
        coop_fraction: coop as f64 / rates.len() as f64,
    })
}

/// Direct-link SINR samples with received power `P r^-α g`.
fn direct_sinr(net: &NetworkConfig, r1: f64, q: &[f64], seed: u64) -> Vec<f64> {
    let signal = net.p_s * r1.powf(-net.alpha);
    sorted(
        q.iter()
            .enumerate()
            .map(|(i, &q)| {
                let g = FadingDraw::sample(&mut stream_rng(seed, substream::FADING, i as u64)).g_sd;
                g * signal / (q + net.noise_power)
            })
            .collect(),
    )
}

pub const FIG8_POWERS_DBM: [f64; 10] = [23.0, 24.0, 25.0, 26.0, 27.0, 28.0, 29.0, 30.0, 31.0, 32.0];
/// User positions as fractions of Rc: halfway to the edge and near it.
pub const FIG8_USER_FRACTIONS: [f64; 2] = [0.5, 0.95];

/// One row of the power sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSweepPoint {
    pub p_dbm: f64,
    pub r1: f64,
    pub rate_analytic: RateEstimate,
    pub rate_mc: RateEstimate,
    /// KS between direct-link SINR laws under Gamma and simulated interference.
    pub ks_sinr_dest1: f64,
    pub ks_sinr_dest2: f64,
}

/// Power sweep with the relay on top of the user. Interference is simulated
/// once at the configured power and scaled, since every transmitter scales
/// together; the noise floor stays fixed in watts.
pub fn power_sweep(cfg: &ExperimentConfig, powers: &[f64], user_fractions: &[f64], n: usize) -> Result<Vec<PowerSweepPoint>> {
    let base = &cfg.network;
    let rc = base.cell_radius;
    let points: Vec<Point2D> = user_fractions.iter().map(|f| Point2D::new(f * rc, 0.0)).collect();
    let batch = sample_field_batch(base, &cfg.field, &points, n, cfg.seed)?;
    let table = kernel_table(base)?;
    let mut out = Vec::new();
    for &dbm in powers {
        let net = at_power(base, dbm);
        let scale = net.p_s / base.p_s;
        let gamma = gamma_sampler(&net, &cfg.field, &table)?;
        for (k, &frac) in user_fractions.iter().enumerate() {
            let r1 = frac * rc;
            let scenario = CellScenario::new(r1, 0.0, 0.0)?;
            let rate_mc = replay_rates(&net, &scenario, &batch, k, scale, StudyPolicy::Hybrid, cfg.seed)?;
            let rate_analytic =
                average_rate(StudyPolicy::Hybrid, &net, &ScenarioDistribution::Fixed(scenario), &gamma, n, cfg.seed)?;
            let draws: Vec<InterferenceDraw> = par_indexed(n, |i| {
                gamma.draw(&scenario, &mut stream_rng(cfg.seed, substream::FIELD, i as u64))
            })
            .into_iter()
            .collect::<Result<_>>()?;
            let sim_b: Vec<f64> = batch.iter().map(|f| f.q_d_b * scale).collect();
            let sim_m: Vec<f64> = batch.iter().map(|f| f.q_d_m * scale).collect();
            let gam_b: Vec<f64> = draws.iter().map(|d| d.q_d_b).collect();
            let gam_m: Vec<f64> = draws.iter().map(|d| d.q_d_m).collect();
            let ks = |a: &[f64], b: &[f64]| {
                ks_two_sample(&direct_sinr(&net, r1, a, cfg.seed), &direct_sinr(&net, r1, b, cfg.seed))
            };
            out.push(PowerSweepPoint {
                p_dbm: dbm,
                r1,
                rate_analytic,
                rate_mc,
                ks_sinr_dest1: ks(&sim_b, &gam_b),
                ks_sinr_dest2: ks(&sim_m, &gam_m),
            });
        }
    }
    Ok(out)
}

fn fig8(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.trials(20_000);
    let mut t = ResultTable::new(
        "fig8",
        &[
            "p_dbm",
            "r1_m",
            "rate_analytic",
            "rate_analytic_stderr",
            "rate_mc",
            "rate_mc_stderr",
            "rate_gap",
            "ks_sinr_dest1",
            "ks_sinr_dest2",
        ],
    );
    for p in power_sweep(cfg, &FIG8_POWERS_DBM, &FIG8_USER_FRACTIONS, n)? {
        t.push(vec![
            p.p_dbm.into(),
            p.r1.into(),
            p.rate_analytic.mean.into(),
            p.rate_analytic.stderr.into(),
            p.rate_mc.mean.into(),
            p.rate_mc.stderr.into(),
            (p.rate_analytic.mean - p.rate_mc.mean).into(),
            p.ks_sinr_dest1.into(),
            p.ks_sinr_dest2.into(),
        ]);
    }
    t.note("n", n);
    Ok(t)
}

pub const FIG9_FRACTIONS: [f64; 9] = [0.0, 0.25, 0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0];

/// Relay-term fit at one relay distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayFitPoint {
    pub d_over_rc: f64,
    pub sample: SampleMoments,
    pub analytic: Option<GammaParams>,
    pub mean_analytic: Option<f64>,
    pub var_analytic: Option<f64>,
    pub ks_analytic: Option<f64>,
    pub ks_fitted: f64,
}

/// Relay-term fits at several relay distances from one batch of fields.
pub fn relay_fit_sweep(cfg: &ExperimentConfig, fractions: &[f64], n: usize) -> Result<(Vec<RelayFitPoint>, Vec<FieldPowers>)> {
    let net = &cfg.network;
    let rc = net.cell_radius;
    let points: Vec<Point2D> = fractions.iter().map(|f| Point2D::new(f * rc, 0.0)).collect();
    let batch = sample_field_batch(net, &cfg.field, &points, n, cfg.seed)?;
    let mut out = Vec::new();
    for (k, &frac) in fractions.iter().enumerate() {
        let rep = report_from_samples(
            InterferenceTerm::RelayPhase1,
            pick(&batch, InterferenceTerm::RelayPhase1, k),
            analytic_moments(InterferenceTerm::RelayPhase1, net, &cfg.field, frac * rc),
        )?;
        out.push(RelayFitPoint {
            d_over_rc: frac,
            sample: rep.sample,
            analytic: rep.analytic,
            mean_analytic: rep.analytic_moments.map(|m| m.mean),
            var_analytic: rep.analytic_moments.map(|m| m.variance),
            ks_analytic: rep.ks_analytic,
            ks_fitted: rep.ks_fitted,
        });
    }
    Ok((out, batch))
}

fn fig9(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.trials(20_000);
    let net = &cfg.network;
    let (fits, batch) = relay_fit_sweep(cfg, &FIG9_FRACTIONS, n)?;
    let table = kernel_table(net)?;
    let gamma = gamma_sampler(net, &cfg.field, &table)?;
    let mut t = ResultTable::new(
        "fig9",
        &[
            "d_over_rc",
            "mean_analytic",
            "mean_mc",
            "var_analytic",
            "var_mc",
            "ks_analytic",
            "ks_fitted",
            "rate_analytic",
            "rate_mc",
            "rate_mc_stderr",
        ],
    );
    // Second reading of the sweep: the relay sits on the user (r2 = 0) and
    // the user moves out with it.
    for (k, p) in fits.iter().enumerate() {
        let (rate_a, rate_mc, rate_se) = if p.d_over_rc > 0.0 {
            let scenario = CellScenario::new(p.d_over_rc * net.cell_radius, 0.0, 0.0)?;
            let mc = replay_rates(net, &scenario, &batch, k, 1.0, StudyPolicy::Hybrid, cfg.seed)?;
            let analytic = if p.d_over_rc < 1.0 {
                Some(average_rate(StudyPolicy::Hybrid, net, &ScenarioDistribution::Fixed(scenario), &gamma, n, cfg.seed)?.mean)
            } else {
                None
            };
            (analytic, Some(mc.mean), Some(mc.stderr))
        } else {
            (None, None, None)
        };
        t.push(vec![
            p.d_over_rc.into(),
            p.mean_analytic.into(),
            p.sample.mean.into(),
            p.var_analytic.into(),
            p.sample.variance.into(),
            p.ks_analytic.into(),
            p.ks_fitted.into(),
            rate_a.into(),
            rate_mc.into(),
            rate_se.into(),
        ]);
    }
    t.note("n", n);
    Ok(t)
}

/// Grid of `r2/r1` for the relay-position sweeps.
pub fn relay_ratio_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

pub const FIG10_R1_M: f64 = 260.0;

/// Mean rate for a policy with Gamma-modeled interference.
pub fn gamma_rate(
    net: &NetworkConfig,
    field: &FieldSettings,
    table: &Arc<RelayKernelTable>,
    policy: StudyPolicy,
    distribution: ScenarioDistribution,
    n: usize,
    seed: u64,
) -> Result<RateEstimate> {
    let gamma = gamma_sampler(net, field, table)?;
    average_rate(policy, net, &distribution, &gamma, n, seed)
}

fn fig10(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.trials(40_000);
    let n_mc = (n / 20).max(100);
    let table = kernel_table(&cfg.network)?;
    let mut t = ResultTable::new(
        "fig10",
        &[
            "p_dbm",
            "r2_over_r1",
            "rate_e3",
            "rate_e3_stderr",
            "rate_e2",
            "rate_on_segment",
            "rate_e1_mc",
            "rate_e1_mc_stderr",
            "rate_direct",
        ],
    );
    for dbm in [23.0, 26.0] {
        let net = at_power(&cfg.network, dbm);
        let direct = gamma_rate(
            &net,
            &cfg.field,
            &table,
            StudyPolicy::Never,
            ScenarioDistribution::Fixed(CellScenario::new(FIG10_R1_M, 0.0, 0.0)?),
            n,
            cfg.seed,
        )?;
        for x in relay_ratio_grid() {
            let r2 = x * FIG10_R1_M;
            let angle = ScenarioDistribution::RandomAngle { r1: FIG10_R1_M, r2 };
            let e3 = gamma_rate(&net, &cfg.field, &table, StudyPolicy::Hybrid, angle, n, cfg.seed)?;
            let e2 = gamma_rate(&net, &cfg.field, &table, StudyPolicy::Geometric, angle, n, cfg.seed)?;
            let seg = gamma_rate(
                &net,
                &cfg.field,
                &table,
                StudyPolicy::Always,
                ScenarioDistribution::Fixed(CellScenario::new(FIG10_R1_M, r2, 0.0)?),
                n,
                cfg.seed,
            )?;
            let sim = SimulatedInterference {
                config: net,
                field: cfg.field,
            };
            let e1 = average_rate(StudyPolicy::Ideal, &net, &angle, &sim, n_mc, cfg.seed)?;
            t.push(vec![
                dbm.into(),
                x.into(),
                e3.mean.into(),
                e3.stderr.into(),
                e2.mean.into(),
                seg.mean.into(),
                e1.mean.into(),
                e1.stderr.into(),
                direct.mean.into(),
            ]);
        }
    }
    t.note("r1_m", FIG10_R1_M);
    t.note("n", n);
    t.note("n_mc", n_mc);
    Ok(t)
}

pub const FIG11_R1_M: f64 = 120.0;
pub const FIG11_CELL_RADII_M: [f64; 3] = [150.0, 300.0, 600.0];
pub const FIG11_P_DBM: f64 = 26.0;

fn fig11(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.trials(40_000);
    let mut t = ResultTable::new(
        "fig11",
        &["cell_radius_m", "r2_over_r1", "rate_e3", "rate_e3_stderr", "rate_on_segment", "rate_direct"],
    );
    for rc in FIG11_CELL_RADII_M {
        let mut net = at_power(&cfg.network, FIG11_P_DBM);
        net.cell_radius = rc;
        let table = kernel_table(&net)?;
        let direct = gamma_rate(
            &net,
            &cfg.field,
            &table,
            StudyPolicy::Never,
            ScenarioDistribution::Fixed(CellScenario::new(FIG11_R1_M, 0.0, 0.0)?),
            n,
            cfg.seed,
        )?;
        for x in relay_ratio_grid() {
            let r2 = x * FIG11_R1_M;
            let e3 = gamma_rate(
                &net,
                &cfg.field,
                &table,
                StudyPolicy::Hybrid,
                ScenarioDistribution::RandomAngle { r1: FIG11_R1_M, r2 },
                n,
                cfg.seed,
            )?;
            let seg = gamma_rate(
                &net,
                &cfg.field,
                &table,
                StudyPolicy::Always,
                ScenarioDistribution::Fixed(CellScenario::new(FIG11_R1_M, r2, 0.0)?),
                n,
                cfg.seed,
            )?;
            t.push(vec![
                rc.into(),
                x.into(),
                e3.mean.into(),
                e3.stderr.into(),
                seg.mean.into(),
                direct.mean.into(),
            ]);
        }
    }
    t.note("r1_m", FIG11_R1_M);
    t.note("p_dbm", FIG11_P_DBM);
    t.note("n", n);
    Ok(t)
}

pub const GAIN_RATIOS: [f64; 4] = [1.0, 2.0, 4.0, 6.0];
/// Ideal relay: on the user–BS segment at this fraction of r1 from the user.
pub const IDEAL_RELAY_FRACTION: f64 = 0.4;

/// Rates behind one gain point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub ratio: f64,
    pub r1: f64,
    /// Every cell transmits directly.
    pub direct: RateEstimate,
    /// Relay position random, hybrid policy everywhere.
    pub averaged: RateEstimate,
    /// Relay at the ideal position in the study cell.
    pub ideal: RateEstimate,
}

impl GainPoint {
    pub fn gain_averaged(&self) -> f64 {
        self.averaged.mean / self.direct.mean - 1.0
    }

    pub fn gain_ideal(&self) -> f64 {
        self.ideal.mean / self.direct.mean - 1.0
    }
}

/// Gains against a network where nobody relays; all three rates share
/// common random numbers.
pub fn gain_points(cfg: &ExperimentConfig, ratios: &[f64], r1s: &[f64], n: usize) -> Result<Vec<GainPoint>> {
    let table = kernel_table(&cfg.network)?;
    let mut no_relay = cfg.network;
    no_relay.rho1 = 0.0;
    let mut out = Vec::new();
    for &r1 in r1s {
        let direct = gamma_rate(
            &no_relay,
            &cfg.field,
            &table,
            StudyPolicy::Never,
            ScenarioDistribution::Fixed(CellScenario::new(r1, 0.0, 0.0)?),
            n,
            cfg.seed,
        )?;
        for &ratio in ratios {
            let net = cfg.with_ratio(ratio)?;
            let averaged = gamma_rate(
                &net,
                &cfg.field,
                &table,
                StudyPolicy::Hybrid,
                ScenarioDistribution::RandomRelay { r1 },
                n,
                cfg.seed,
            )?;
            let ideal = gamma_rate(
                &net,
                &cfg.field,
                &table,
                StudyPolicy::Always,
                ScenarioDistribution::Fixed(CellScenario::new(r1, IDEAL_RELAY_FRACTION * r1, 0.0)?),
                n,
                cfg.seed,
            )?;
            out.push(GainPoint {
                ratio,
                r1,
                direct,
                averaged,
                ideal,
            });
        }
    }
    Ok(out)
}

fn fig12(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.trials(20_000);
    let rc = cfg.network.cell_radius;
    let r1s: Vec<f64> = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95]
        .iter()
        .map(|f| f * rc)
        .collect();
    let mut t = ResultTable::new(
        "fig12",
        &[
            "ratio",
            "r1_m",
            "rate_direct",
            "rate_avg",
            "rate_avg_stderr",
            "rate_ideal",
            "gain_avg",
            "gain_ideal",
        ],
    );
    let mut points = gain_points(cfg, &GAIN_RATIOS, &r1s, n)?;
    points.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.r1.total_cmp(&b.r1)));
    for p in points {
        t.push(vec![
            p.ratio.into(),
            p.r1.into(),
            p.direct.mean.into(),
            p.averaged.mean.into(),
            p.averaged.stderr.into(),
            p.ideal.mean.into(),
            p.gain_averaged().into(),
            p.gain_ideal().into(),
        ]);
    }
    t.note("n", n);
    t.note("ideal_relay_fraction", IDEAL_RELAY_FRACTION);
    Ok(t)
}

pub const FIG13_CELL_RADII_M: [f64; 2] = [300.0, 600.0];
/// Outer rings as a fraction of the radius.
pub const FIG13_RINGS: [f64; 2] = [1.0 / 3.0, 0.5];

/// Averaged gain for users uniform over the outer ring `[(1−f)Rc, Rc]`.
pub fn ring_gain(cfg: &ExperimentConfig, net: &NetworkConfig, table: &Arc<RelayKernelTable>, ring: f64, n: usize) -> Result<(RateEstimate, RateEstimate)> {
    let rc = net.cell_radius;
    let dist = ScenarioDistribution::Ring {
        inner: (1.0 - ring) * rc,
        outer: rc,
    };
    let mut no_relay = *net;
    no_relay.rho1 = 0.0;
    let direct = gamma_rate(&no_relay, &cfg.field, table, StudyPolicy::Never, dist, n, cfg.seed)?;
    let averaged = gamma_rate(net, &cfg.field, table, StudyPolicy::Hybrid, dist, n, cfg.seed)?;
    Ok((direct, averaged))
}

fn fig13(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let n = cfg.trials(20_000);
    let mut t = ResultTable::new(
        "fig13",
        &["cell_radius_m", "ratio", "ring_fraction", "rate_direct", "rate_avg", "rate_avg_stderr", "gain_avg"],
    );
    for rc in FIG13_CELL_RADII_M {
        let mut scaled = cfg.clone();
        scaled.network.cell_radius = rc;
        let table = kernel_table(&scaled.network)?;
        for ratio in GAIN_RATIOS {
            let net = scaled.with_ratio(ratio)?;
            for ring in FIG13_RINGS {
                let (direct, averaged) = ring_gain(&scaled, &net, &table, ring, n)?;
                t.push(vec![
                    rc.into(),
                    ratio.into(),
                    ring.into(),
                    direct.mean.into(),
                    averaged.mean.into(),
                    averaged.stderr.into(),
                    (averaged.mean / direct.mean - 1.0).into(),
                ]);
            }
        }
    }
    t.note("n", n);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho1_mode_round_trips() {
        for s in ["e2", "e3", "fixed:0.25"] {
            assert_eq!(s.parse::<Rho1Mode>().unwrap().to_string(), s);
        }
        assert!("fixed:1.5".parse::<Rho1Mode>().is_err());
        assert!("e4".parse::<Rho1Mode>().is_err());
    }

    #[test]
    fn registry_lists_every_figure_then_acceptance() {
        let ids: Vec<&str> = registry().iter().map(|e| e.id).collect();
        assert_eq!(
            ids,
            ["fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13", "acceptance"]
        );
        match find("fig99") {
            Err(Error::UnknownExperiment { known, .. }) => assert!(known.contains("fig13")),
            other => panic!("unexpected {other:?}", other = other.map(|e| e.id)),
        }
    }

    #[test]
    fn fig6_has_contract_columns() {
        let mut cfg = ExperimentConfig::reference();
        cfg.n_trials = Some(2000);
        let t = run_experiment("fig6", &cfg).unwrap();
        assert_eq!(t.columns, ["ratio", "rho2_analytic", "rho3_analytic", "rho_mc", "stderr"]);
        assert_eq!(t.rows.len(), 5);
    }

    #[test]
    fn power_change_keeps_noise() {
        let n = NetworkConfig::reference();
        let m = at_power(&n, 26.0);
        assert_eq!(m.noise_power, n.noise_power);
        assert!((m.p_s / n.p_s - 10f64.powf(0.3)).abs() < 1e-12);
    }
}
