use std::f64::consts::PI;

use pdfrelay::geometry::{relay_to_bs_distance, CellScenario, NetworkConfig, Point2D};
use pdfrelay::interference::{gamma_cdf, gamma_from_moments, zeta_coefficients, PowerProfile, RelayKernelTable};
use pdfrelay::policies::{coop_prob_geometric, coop_prob_hybrid, decide_geometric, decide_hybrid, FadingDraw};
use pdfrelay::rates::{
    average_rate, direct_rate, optimize_power_split, pdf_rate, EquivalentChannels, GammaInterference, RateComponents,
    ScenarioDistribution, StudyPolicy,
};
use pdfrelay::stats::{ks_statistic, ks_two_sample};
use proptest::prelude::*;

fn channels() -> impl Strategy<Value = EquivalentChannels> {
    (0.0..50.0f64, 0.0..50.0f64, 0.0..50.0f64, 0.0..50.0f64).prop_map(|(sr, b, m, rd)| EquivalentChannels {
        h_sr_eq: sr,
        h_sd_b_eq: b,
        h_sd_m_eq: m,
        h_rd_eq: rd,
    })
}

fn point() -> impl Strategy<Value = Point2D> {
    (-1e4..1e4f64, -1e4..1e4f64).prop_map(|(x, y)| Point2D::new(x, y))
}

fn fading() -> impl Strategy<Value = FadingDraw> {
    (1e-3..10.0f64, 1e-3..10.0f64, 1e-3..10.0f64).prop_map(|(a, b, c)| FadingDraw::new(a, b, c).unwrap())
}

fn components(r: &pdfrelay::rates::RateResult) -> (f64, f64, f64) {
    match r.components {
        RateComponents::Relayed { c1, c2, c3 } => (c1, c2, c3),
        RateComponents::Direct { .. } => panic!("expected relayed components"),
    }
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in point(), b in point(), c in point()) {
        prop_assert_eq!(a.dist(&b), b.dist(&a));
        prop_assert!(a.dist(&c) <= a.dist(&b) + b.dist(&c) + 1e-9);
        prop_assert_eq!(a.dist(&a), 0.0);
    }

    #[test]
    fn relay_distance_respects_triangle(r1 in 1e-3..1e3f64, r2 in 0.0..1e3f64, psi in -10.0..10.0f64) {
        let d = relay_to_bs_distance(r1, r2, psi).unwrap();
        prop_assert!(d >= (r1 - r2).abs() - 1e-9 * (r1 + r2));
        prop_assert!(d <= r1 + r2 + 1e-9 * (r1 + r2));
    }

    #[test]
    fn hybrid_matches_geometric_with_equal_source_fading(
        r1 in 1.0..500.0f64, r2 in 0.0..500.0f64, psi in 0.0..(2.0 * PI), g in 1e-3..10.0f64, grd in 1e-3..10.0f64,
    ) {
        let s = CellScenario::new(r1, r2, psi).unwrap();
        let f = FadingDraw::new(g, g, grd).unwrap();
        prop_assert_eq!(decide_hybrid(&s, &f, 4.0).cooperate, decide_geometric(&s).cooperate);
    }

    #[test]
    fn decisions_are_scale_invariant(
        r1 in 1.0..500.0f64, r2 in 0.0..500.0f64, psi in 0.0..(2.0 * PI), k in 0.01..100.0f64, f in fading(),
    ) {
        let a = CellScenario::new(r1, r2, psi).unwrap();
        let b = CellScenario::new(k * r1, k * r2, psi).unwrap();
        // Ties sit on a measure-zero boundary; skip draws too close to it.
        let margin = (f.g_sr * r2.powf(-4.0) / (f.g_sd * r1.powf(-4.0))).ln().abs();
        prop_assume!(margin > 1e-9);
        prop_assume!((r2 - r1).abs() > 1e-9 * r1 && (a.d_relay_bs - r1).abs() > 1e-9 * r1);
        prop_assert_eq!(decide_hybrid(&a, &f, 4.0).cooperate, decide_hybrid(&b, &f, 4.0).cooperate);
        prop_assert_eq!(decide_geometric(&a).cooperate, decide_geometric(&b).cooperate);
    }

    #[test]
    fn pdf_rate_is_monotone_in_every_gain(ch in channels(), t in 0.0..1.0f64, which in 0usize..4, bump in 0.0..10.0f64) {
        let alloc = PowerProfile::equal_phases(1.0, 1.0, 0.5, t).unwrap();
        let mut up = ch;
        match which {
            0 => up.h_sr_eq += bump,
            1 => up.h_sd_b_eq += bump,
            2 => up.h_sd_m_eq += bump,
            _ => up.h_rd_eq += bump,
        }
        prop_assert!(pdf_rate(&up, &alloc).rate >= pdf_rate(&ch, &alloc).rate - 1e-12);
    }

    #[test]
    fn pdf_rate_is_the_min_of_its_bounds(ch in channels(), t in 0.0..1.0f64) {
        let r = pdf_rate(&ch, &PowerProfile::equal_phases(1.0, 1.0, 0.5, t).unwrap());
        let (c1, c2, c3) = components(&r);
        prop_assert!(r.rate <= c1 + c2 && r.rate <= c3);
        prop_assert!(r.rate == c1 + c2 || r.rate == c3);
    }

    #[test]
    fn coherent_beam_beats_incoherent_sum(ch in channels(), t in 0.01..1.0f64) {
        prop_assume!(ch.h_sd_m_eq > 1e-6 && ch.h_rd_eq > 1e-6);
        let alloc = PowerProfile::equal_phases(1.0, 1.0, 0.5, t).unwrap();
        let (_, _, c3) = components(&pdf_rate(&ch, &alloc));
        let incoherent = 0.5 * (1.0 + ch.h_sd_b_eq * alloc.p_s_b).log2()
            + 0.5 * (1.0 + ch.h_sd_m_eq * alloc.p_s_m() + ch.h_rd_eq * alloc.p_r_m).log2();
        prop_assert!(c3 > incoherent);
    }

    #[test]
    fn optimizer_dominates_every_grid_point(ch in channels(), p in 0.01..10.0f64) {
        let best = optimize_power_split(&ch, p, p, 0.5).unwrap();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let r = pdf_rate(&ch, &PowerProfile::equal_phases(p, p, 0.5, t).unwrap()).rate;
            prop_assert!(best.result.rate >= r - 1e-9);
        }
    }

    #[test]
    fn direct_rate_is_monotone_in_power(ch in channels(), p in 0.0..10.0f64, dp in 0.0..10.0f64) {
        prop_assert!(direct_rate(&ch, p + dp, 0.5).rate >= direct_rate(&ch, p, 0.5).rate);
    }

    #[test]
    fn zeta_moments_are_consistent(rho in 0.0..1.0f64, t in 0.0..1.0f64, p in 0.01..1.0f64) {
        let z = zeta_coefficients(rho, &PowerProfile::equal_phases(p, p, 0.5, t).unwrap()).unwrap();
        // Second raw moments dominate squared first moments for unit exponential fading.
        prop_assert!(z.zeta2 >= z.zeta1 * z.zeta1 - 1e-15);
        prop_assert!(z.zeta4 >= z.zeta3 * z.zeta3 - 1e-15);
    }

    #[test]
    fn gamma_fit_reproduces_moments(mean in 1e-12..1e3f64, cv in 0.05..5.0f64) {
        let var = (cv * mean).powi(2);
        let g = gamma_from_moments(mean, var).unwrap();
        prop_assert!((g.mean() / mean - 1.0).abs() < 1e-12);
        prop_assert!((g.variance() / var - 1.0).abs() < 1e-12);
        prop_assert!(gamma_cdf(0.0, &g) == 0.0);
    }

    #[test]
    fn ks_is_invariant_under_monotone_maps(
        xs in prop::collection::vec(0.0..1.0f64, 2..200),
        other in prop::collection::vec(0.0..1.0f64, 2..200),
        k in 0.1..5.0f64,
    ) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let mut other = other;
        other.sort_by(f64::total_cmp);
        let ys: Vec<f64> = xs.iter().map(|x| x.powf(k)).collect();
        let a = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        let b = ks_statistic(&ys, |y| y.clamp(0.0, 1.0).powf(1.0 / k));
        prop_assert!((a - b).abs() < 1e-12);
        let other_k: Vec<f64> = other.iter().map(|x| x.powf(k)).collect();
        prop_assert_eq!(ks_two_sample(&xs, &other), ks_two_sample(&ys, &other_k));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cooperation_probability_rises_in_ratio_and_stays_below_half(q in 0.1..50.0f64, dq in 0.1..50.0f64) {
        let l1 = 1e-5;
        let (a2, b2) = (coop_prob_geometric(l1, q * l1).unwrap(), coop_prob_geometric(l1, (q + dq) * l1).unwrap());
        let (a3, b3) = (coop_prob_hybrid(l1, q * l1, 4.0).unwrap(), coop_prob_hybrid(l1, (q + dq) * l1, 4.0).unwrap());
        prop_assert!(b2 > a2 && b3 > a3);
        prop_assert!(b2 < 0.5 && b3 < 0.5);
    }
}

#[test]
fn average_rate_ignores_worker_count() {
    let c = NetworkConfig::reference();
    let table = std::sync::Arc::new(RelayKernelTable::new(4.0, c.cell_radius, 65).unwrap());
    let prof = PowerProfile::equal_phases(c.p_s, c.p_r, c.alpha1, 0.0).unwrap();
    let g = GammaInterference::new(&c, &prof, table).unwrap();
    let dist = ScenarioDistribution::RandomRelay { r1: 250.0 };
    let run = |k: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .unwrap()
            .install(|| average_rate(StudyPolicy::Hybrid, &c, &dist, &g, 3000, 11).unwrap())
    };
    assert_eq!(run(1), run(4));
}
