use std::f64::consts::PI;

use pdfrelay::geometry::{sample_ppp, CellScenario, NetworkConfig, Point2D, Window};
use pdfrelay::interference::{moments_destination, zeta_coefficients, InterferenceTerm, Phase};
use pdfrelay::montecarlo::{empirical_distribution, sample_field_batch, simulate_trial, FieldSettings};
use pdfrelay::rates::StudyPolicy;
use pdfrelay::rng::stream_rng;
use pdfrelay::stats::SampleMoments;

fn reference() -> (NetworkConfig, FieldSettings) {
    let c = NetworkConfig::reference();
    (c, FieldSettings::for_alpha(c.alpha))
}

#[test]
fn destination_mean_matches_analytic_value() {
    let (c, f) = reference();
    let batch = sample_field_batch(&c, &f, &[], 20_000, 5).unwrap();
    let q: Vec<f64> = batch.iter().map(|p| p.q_d_b).collect();
    let m = SampleMoments::of(&q);
    let z = zeta_coefficients(c.rho1, &f.interferer_profile(&c).unwrap()).unwrap();
    let a = moments_destination(Phase::First, &c, &z).unwrap();
    // The simulated field stops at R_max; compare with the truncated mean.
    let rmax = f.rmax_factor * c.cell_radius;
    let truncated = a.mean * (1.0 - (rmax / c.cell_radius).powf(2.0 - c.alpha));
    assert!((m.mean - truncated).abs() < 3.0 * m.stderr(), "{} vs {truncated} (se {})", m.mean, m.stderr());
    assert!((m.mean / a.mean - 1.0).abs() < 0.05);
}

#[test]
fn cross_term_averages_out() {
    let (c, mut f) = reference();
    f.interferer_common_fraction = 0.6;
    let batch = sample_field_batch(&c, &f, &[], 20_000, 9).unwrap();
    // Paired difference isolates the random-phase term.
    let diff: Vec<f64> = batch.iter().map(|p| p.q_d_m - p.q_d_m_averaged).collect();
    let m = SampleMoments::of(&diff);
    assert!(m.variance > 0.0);
    assert!(m.mean.abs() < 3.0 * m.stderr(), "mean {} se {}", m.mean, m.stderr());
}

#[test]
fn truncation_radius_is_sufficient() {
    // Interference from the ring [R_max, 2 R_max], relative to the full mean.
    let (c, f) = reference();
    let rmax = f.rmax_factor * c.cell_radius;
    let ring = Window::annulus(rmax, 2.0 * rmax);
    let n = 400;
    let mut sum = 0.0;
    for i in 0..n {
        let mut rng = stream_rng(3, 0, i);
        for z in sample_ppp(c.lambda1, &ring, &mut rng).unwrap() {
            sum += c.p_s * z.norm().powf(-c.alpha);
        }
    }
    let ring_mean = sum / n as f64;
    let z = zeta_coefficients(c.rho1, &f.interferer_profile(&c).unwrap()).unwrap();
    let full = moments_destination(Phase::First, &c, &z).unwrap().mean;
    assert!(ring_mean / full < 0.005, "ring share {}", ring_mean / full);
}

#[test]
fn fitted_and_analytic_gamma_agree() {
    let (c, f) = reference();
    let s = CellScenario::new(150.0, 0.0, 0.0).unwrap();
    let rep = empirical_distribution(InterferenceTerm::DestPhase1, &c, &f, &s, 100_000, 17).unwrap();
    let a = rep.analytic.unwrap();
    assert!((rep.fitted.shape / a.shape - 1.0).abs() < 0.03, "{:?} vs {:?}", rep.fitted, a);
    assert!((rep.fitted.scale / a.scale - 1.0).abs() < 0.03);
    assert!(rep.ks_between_fits.unwrap() < 0.01);
}

#[test]
fn relay_at_cell_edge_has_no_analytic_fit() {
    let (c, f) = reference();
    let s = CellScenario::new(c.cell_radius, 0.0, 0.0).unwrap();
    let rep = empirical_distribution(InterferenceTerm::RelayPhase1, &c, &f, &s, 2_000, 4).unwrap();
    assert!(rep.analytic.is_none());
    assert!(rep.analytic_error.unwrap().contains("cell"));
    assert!(rep.ks_fitted > 0.1);
}

#[test]
fn small_sample_reports_are_rejected() {
    let (c, f) = reference();
    let s = CellScenario::new(100.0, 0.0, 0.0).unwrap();
    assert!(empirical_distribution(InterferenceTerm::DestPhase1, &c, &f, &s, 999, 1).is_err());
}

#[test]
fn interference_free_trial_matches_noise_limited_rate() {
    let (mut c, f) = reference();
    c.lambda1 = 1e-300;
    let s = CellScenario::new(120.0, 40.0, 0.0).unwrap();
    let t = simulate_trial(&c, &f, &s, StudyPolicy::Never, 2).unwrap();
    let fading = pdfrelay::policies::FadingDraw::sample(&mut stream_rng(2, 2, 0));
    let snr = |g: f64| g * 120f64.powf(-4.0) * c.p_s / c.noise_power;
    let expected = 0.5 * (1.0 + snr(fading.g_sd)).log2() * 2.0;
    assert!((t.rate.rate - expected).abs() < 1e-12);
}

#[test]
fn interferers_stay_outside_the_cell() {
    let (c, f) = reference();
    let w = Window::annulus(c.cell_radius, f.rmax_factor * c.cell_radius);
    let pts = sample_ppp(c.lambda1, &w, &mut stream_rng(8, 0, 0)).unwrap();
    assert!(pts.iter().all(|p| p.norm() >= c.cell_radius));
    let expected = c.lambda1 * PI * (f.rmax_factor.powi(2) - 1.0) * c.cell_radius.powi(2);
    assert!((pts.len() as f64 - expected).abs() < 5.0 * expected.sqrt());
    let _ = Point2D::ORIGIN;
}
