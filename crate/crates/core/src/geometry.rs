//! Point processes, base-station placement and link-distance geometry.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_finite, require_nonnegative, require_positive, Error, Result};
use crate::policies::FadingDraw;

/// Rejection draws allowed per base station before giving up.
pub const BS_RETRY_BUDGET: u64 = 1_000_000;

/// Reference noise calibration: SNR in dB measured at this distance from the transmitter.
pub const DEFAULT_SNR_DB: f64 = 15.0;
pub const DEFAULT_SNR_REFERENCE_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const ORIGIN: Point2D = Point2D { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point2D {
            x: r * theta.cos(),
            y: r * theta.sin(),
        }
    }

    pub fn dist2(&self, other: &Point2D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point2D) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Finite sampling region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Window {
    Disk { center: Point2D, radius: f64 },
    Annulus { center: Point2D, inner: f64, outer: f64 },
    Rect { min: Point2D, max: Point2D },
}

impl Window {
    pub fn disk(radius: f64) -> Self {
        Window::Disk {
            center: Point2D::ORIGIN,
            radius,
        }
    }

    pub fn annulus(inner: f64, outer: f64) -> Self {
        Window::Annulus {
            center: Point2D::ORIGIN,
            inner,
            outer,
        }
    }

    pub fn square(side: f64) -> Self {
        let h = 0.5 * side;
        Window::Rect {
            min: Point2D::new(-h, -h),
            max: Point2D::new(h, h),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Window::Disk { center, radius } => center.is_finite() && radius.is_finite() && radius > 0.0,
            Window::Annulus { center, inner, outer } => {
                center.is_finite() && inner.is_finite() && outer.is_finite() && inner >= 0.0 && outer > inner
            }
            Window::Rect { min, max } => min.is_finite() && max.is_finite() && max.x > min.x && max.y > min.y,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateWindow(format!("{self:?}")))
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Window::Disk { radius, .. } => PI * radius * radius,
            Window::Annulus { inner, outer, .. } => PI * (outer * outer - inner * inner),
            Window::Rect { min, max } => (max.x - min.x) * (max.y - min.y),
        }
    }

    pub fn centroid(&self) -> Point2D {
        match *self {
            Window::Disk { center, .. } | Window::Annulus { center, .. } => center,
            Window::Rect { min, max } => Point2D::new(0.5 * (min.x + max.x), 0.5 * (min.y + max.y)),
        }
    }

    pub fn contains(&self, p: &Point2D) -> bool {
        match *self {
            Window::Disk { center, radius } => p.dist2(&center) <= radius * radius,
            Window::Annulus { center, inner, outer } => {
                let d2 = p.dist2(&center);
                d2 >= inner * inner && d2 <= outer * outer
            }
            Window::Rect { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
        }
    }

    /// One point uniform over the window.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point2D {
        match *self {
            Window::Disk { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let p = Point2D::polar(r, 2.0 * PI * rng.random::<f64>());
                Point2D::new(center.x + p.x, center.y + p.y)
            }
            Window::Annulus { center, inner, outer } => {
                let u: f64 = rng.random();
                let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
                let p = Point2D::polar(r, 2.0 * PI * rng.random::<f64>());
                Point2D::new(center.x + p.x, center.y + p.y)
            }
            Window::Rect { min, max } => Point2D::new(
                min.x + (max.x - min.x) * rng.random::<f64>(),
                min.y + (max.y - min.y) * rng.random::<f64>(),
            ),
        }
    }
}

/// Scenario parameters shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Active-user intensity (users/m²).
    pub lambda1: f64,
    /// Idle-user intensity (users/m²).
    pub lambda2: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Cell radius Rc (m).
    pub cell_radius: f64,
    /// Noise power σ² (W).
    pub noise_power: f64,
    /// Source power budget (W).
    pub p_s: f64,
    /// Relay power budget (W).
    pub p_r: f64,
    /// First-phase time fraction; the second phase gets `1 - alpha1`.
    pub alpha1: f64,
    /// Cooperation probability used to thin interferer marks.
    pub rho1: f64,
}

impl NetworkConfig {
    /// λ1 = 1/(16·150²), λ2 = 2λ1, α = 4, Rc = 1/(2√λ1) = 300 m, 23 dBm,
    /// 15 dB SNR at 100 m, equal time split, ρ1 from the hybrid policy.
    pub fn reference() -> Self {
        let lambda1 = 1.0 / (16.0 * 150.0 * 150.0);
        let lambda2 = 2.0 * lambda1;
        let alpha = 4.0;
        let p = crate::interference::dbm_to_watts(23.0);
        let rho1 = crate::policies::coop_prob_hybrid(lambda1, lambda2, alpha)
            .expect("hybrid cooperation probability converges for the reference densities");
        NetworkConfig {
            lambda1,
            lambda2,
            alpha,
            cell_radius: default_cell_radius(lambda1),
            noise_power: noise_from_snr(p, DEFAULT_SNR_DB, DEFAULT_SNR_REFERENCE_M, alpha),
            p_s: p,
            p_r: p,
            alpha1: 0.5,
            rho1,
        }
    }

    pub fn alpha2(&self) -> f64 {
        1.0 - self.alpha1
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("lambda1", self.lambda1)?;
        require_nonnegative("lambda2", self.lambda2)?;
        require_finite("alpha", self.alpha)?;
        if self.alpha <= 2.0 {
            return Err(invalid("alpha", format!("must exceed 2, got {}", self.alpha)));
        }
        require_positive("cell_radius", self.cell_radius)?;
        require_nonnegative("noise_power", self.noise_power)?;
        require_nonnegative("p_s", self.p_s)?;
        require_nonnegative("p_r", self.p_r)?;
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) {
            return Err(invalid("alpha1", format!("must lie in (0, 1), got {}", self.alpha1)));
        }
        if !(0.0..=0.5).contains(&self.rho1) {
            return Err(invalid("rho1", format!("must lie in [0, 0.5], got {}", self.rho1)));
        }
        Ok(())
    }
}

/// Rc = 1/(2√λ1).
pub fn default_cell_radius(lambda1: f64) -> f64 {
    0.5 / lambda1.sqrt()
}

/// σ² such that a transmitter at `p_max_w` is received at `reference_m` with the given SNR.
pub fn noise_from_snr(p_max_w: f64, snr_db: f64, reference_m: f64, alpha: f64) -> f64 {
    p_max_w * reference_m.powf(-alpha) / 10f64.powf(snr_db / 10.0)
}

/// Geometry of the cell under study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScenario {
    pub r1: f64,
    pub r2: f64,
    pub psi0: f64,
    pub d_relay_bs: f64,
}

impl CellScenario {
    pub fn new(r1: f64, r2: f64, psi0: f64) -> Result<Self> {
        require_positive("r1", r1)?;
        require_nonnegative("r2", r2)?;
        require_finite("psi0", psi0)?;
        let psi0 = psi0.rem_euclid(2.0 * PI);
        let d_relay_bs = relay_to_bs_distance(r1, r2, psi0)?;
        Ok(CellScenario {
            r1,
            r2,
            psi0,
            d_relay_bs,
        })
    }
}

/// Per-active-user marks of a realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserMarks {
    pub cooperate: bool,
    pub fading: FadingDraw,
    pub theta_k2: f64,
    pub theta_kr: f64,
}

impl UserMarks {
    pub fn sample<R: Rng + ?Sized>(rho1: f64, rng: &mut R) -> Self {
        UserMarks {
            cooperate: rng.random::<f64>() < rho1,
            fading: FadingDraw::sample(rng),
            theta_k2: 2.0 * PI * rng.random::<f64>(),
            theta_kr: 2.0 * PI * rng.random::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub active_users: Vec<Point2D>,
    pub idle_users: Vec<Point2D>,
    pub base_stations: Vec<Point2D>,
    pub marks: Vec<UserMarks>,
    pub window: Window,
}

impl NetworkRealization {
    /// Samples both user processes over `window`, places one base station in
    /// each active user's cell and draws the marks.
    pub fn sample<R: Rng + ?Sized>(config: &NetworkConfig, window: Window, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let active_users = sample_ppp(config.lambda1, &window, rng)?;
        let idle_users = sample_ppp(config.lambda2, &window, rng)?;
        let base_stations = if active_users.is_empty() {
            Vec::new()
        } else {
            place_base_stations(&active_users, &window, rng)?
        };
        let marks = (0..active_users.len())
            .map(|_| UserMarks::sample(config.rho1, rng))
            .collect();
        Ok(NetworkRealization {
            active_users,
            idle_users,
            base_stations,
            marks,
            window,
        })
    }
}

/// Homogeneous PPP over a finite window.
pub fn sample_ppp<R: Rng + ?Sized>(intensity: f64, window: &Window, rng: &mut R) -> Result<Vec<Point2D>> {
    require_nonnegative("intensity", intensity)?;
    window.validate()?;
    let mean = intensity * window.area();
    if mean == 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| invalid("intensity", e.to_string()))?
        .sample(rng) as usize;
    Ok((0..count).map(|_| window.sample_uniform(rng)).collect())
}

/// Index of the point nearest to `p`; the lowest index wins ties.
pub fn nearest_index(p: &Point2D, points: &[Point2D]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, q) in points.iter().enumerate() {
        let d2 = p.dist2(q);
        match best {
            Some((_, b)) if d2 >= b => {}
            _ => best = Some((i, d2)),
        }
    }
    best.map(|(i, _)| i)
}

/// Uniform point in user `owner`'s Voronoi cell intersected with the window.
pub fn place_base_station<R: Rng + ?Sized>(
    owner: usize,
    active_users: &[Point2D],
    window: &Window,
    rng: &mut R,
) -> Result<Point2D> {
    if owner >= active_users.len() {
        return Err(invalid("owner", format!("index {owner} out of range")));
    }
    window.validate()?;
    let home = active_users[owner];
    'draw: for _ in 0..BS_RETRY_BUDGET {
        let p = window.sample_uniform(rng);
        let d_home = p.dist2(&home);
        for (j, q) in active_users.iter().enumerate() {
            // Ties go to the lower index, matching `nearest_index`.
            let d = p.dist2(q);
            if j != owner && (d < d_home || (d == d_home && j < owner)) {
                continue 'draw;
            }
        }
        return Ok(p);
    }
    Err(Error::RetryBudgetExceeded { budget: BS_RETRY_BUDGET })
}

pub fn place_base_stations<R: Rng + ?Sized>(
    active_users: &[Point2D],
    window: &Window,
    rng: &mut R,
) -> Result<Vec<Point2D>> {
    if active_users.is_empty() {
        return Err(invalid("active_users", "must be non-empty"));
    }
    (0..active_users.len())
        .map(|i| place_base_station(i, active_users, window, rng))
        .collect()
}

/// Closest idle user and its distance; ties go to the lowest index.
pub fn nearest_idle(source: &Point2D, idle_users: &[Point2D]) -> Result<(Point2D, f64)> {
    let i = nearest_index(source, idle_users).ok_or(Error::NoCandidateRelay)?;
    Ok((idle_users[i], source.dist(&idle_users[i])))
}

/// Relay-to-BS distance by the law of cosines.
pub fn relay_to_bs_distance(r1: f64, r2: f64, psi0: f64) -> Result<f64> {
    require_nonnegative("r1", r1)?;
    require_nonnegative("r2", r2)?;
    require_finite("psi0", psi0)?;
    let d2 = r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * psi0.cos();
    Ok(d2.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    /// Source to its base station (intensity λ1).
    Direct,
    /// Source to its nearest idle user (intensity λ2).
    Cooperation,
}

impl LinkKind {
    fn intensity(self, config: &NetworkConfig) -> f64 {
        match self {
            LinkKind::Direct => config.lambda1,
            LinkKind::Cooperation => config.lambda2,
        }
    }
}

pub fn rayleigh_pdf(lambda: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    2.0 * PI * lambda * r * (-lambda * PI * r * r).exp()
}

pub fn rayleigh_cdf(lambda: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    -(-lambda * PI * r * r).exp_m1()
}

pub fn rayleigh_mode(lambda: f64) -> f64 {
    1.0 / (2.0 * PI * lambda).sqrt()
}

/// Distance to the nearest point of a PPP of the given intensity.
pub fn sample_rayleigh<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    let e: f64 = Exp1.sample(rng);
    (e / (PI * lambda)).sqrt()
}

pub fn distance_pdf(which: LinkKind, r: f64, config: &NetworkConfig) -> f64 {
    rayleigh_pdf(which.intensity(config), r)
}

pub fn distance_cdf(which: LinkKind, r: f64, config: &NetworkConfig) -> f64 {
    rayleigh_cdf(which.intensity(config), r)
}

/// Draws a study link from a full two-process layout on a disk of
/// `window_radius`.
///
/// The serving cell is the one covering a uniform point of the inner half
/// of the window, so cells are picked in proportion to their area. Its base
/// station is then placed by rejection and the relay is the nearest idle
/// user. Picking cells with equal weight instead would bias r1 towards small
/// cells.
pub fn sample_study_link<R: Rng + ?Sized>(
    config: &NetworkConfig,
    window_radius: f64,
    rng: &mut R,
) -> Result<CellScenario> {
    config.validate()?;
    require_positive("lambda2", config.lambda2)?;
    let window = Window::disk(window_radius);
    window.validate()?;
    let inner = Window::disk(0.5 * window_radius);
    loop {
        let users = sample_ppp(config.lambda1, &window, rng)?;
        let idle = sample_ppp(config.lambda2, &window, rng)?;
        if users.is_empty() || idle.is_empty() {
            continue;
        }
        let probe = inner.sample_uniform(rng);
        let owner = nearest_index(&probe, &users).expect("non-empty");
        let bs = place_base_station(owner, &users, &window, rng)?;
        let user = users[owner];
        let (relay, r2) = nearest_idle(&user, &idle)?;
        let to_bs = (bs.y - user.y).atan2(bs.x - user.x);
        let to_relay = (relay.y - user.y).atan2(relay.x - user.x);
        return CellScenario::new(user.dist(&bs), r2, to_relay - to_bs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn law_of_cosines_examples() {
        assert!((relay_to_bs_distance(3.0, 4.0, PI / 2.0).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(relay_to_bs_distance(7.0, 0.0, 1.3).unwrap(), 7.0);
        // Independent check: sqrt(260² + 104² − 2·260·104·(√3/2)).
        let expected = (67600.0f64 + 10816.0 - 27040.0 * 3f64.sqrt()).sqrt();
        let d = relay_to_bs_distance(260.0, 104.0, PI / 6.0).unwrap();
        assert!((d - expected).abs() < 1e-9);
        assert!((d - 177.71).abs() < 0.01, "{d}");
        assert!(relay_to_bs_distance(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn nearest_idle_examples() {
        let (p, d) = nearest_idle(&Point2D::ORIGIN, &[Point2D::new(3.0, 4.0), Point2D::new(1.0, 0.0)]).unwrap();
        assert_eq!((p, d), (Point2D::new(1.0, 0.0), 1.0));
        let (p, d) = nearest_idle(&Point2D::ORIGIN, &[Point2D::new(2.0, 0.0), Point2D::new(0.0, 2.0)]).unwrap();
        assert_eq!((p, d), (Point2D::new(2.0, 0.0), 2.0));
        assert_eq!(nearest_idle(&Point2D::ORIGIN, &[]), Err(Error::NoCandidateRelay));
    }

    #[test]
    fn ppp_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_ppp(f64::NAN, &Window::disk(1.0), &mut rng).is_err());
        assert!(sample_ppp(1.0, &Window::disk(0.0), &mut rng).is_err());
        assert!(sample_ppp(1.0, &Window::annulus(2.0, 1.0), &mut rng).is_err());
        assert!(sample_ppp(0.0, &Window::disk(5.0), &mut rng).unwrap().is_empty());
    }

    #[test]
    fn ppp_mean_count_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = Window::disk(1000.0);
        let n = 10_000;
        let total: usize = (0..n).map(|_| sample_ppp(1e-4, &w, &mut rng).unwrap().len()).sum();
        let mean = total as f64 / n as f64;
        let expect = PI * 1e6 * 1e-4;
        let se = (expect / n as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect}");
    }

    #[test]
    fn ppp_mean_count_reference_density() {
        let lambda1 = 1.0 / (16.0 * 150.0 * 150.0);
        let w = Window::disk(3000.0);
        let expect = lambda1 * w.area();
        assert!((expect - 78.54).abs() < 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let total: usize = (0..n).map(|_| sample_ppp(lambda1, &w, &mut rng).unwrap().len()).sum();
        let se = (expect / n as f64).sqrt();
        assert!((total as f64 / n as f64 - expect).abs() < 3.0 * se);
    }

    #[test]
    fn ppp_points_stay_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for w in [Window::disk(10.0), Window::annulus(3.0, 10.0), Window::square(4.0)] {
            for p in sample_ppp(5.0, &w, &mut rng).unwrap() {
                assert!(w.contains(&p), "{p:?} outside {w:?}");
            }
        }
    }

    #[test]
    fn single_user_bs_is_uniform_over_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = Window::square(2.0);
        let users = [Point2D::new(0.3, -0.2)];
        let n = 10_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let b = place_base_station(0, &users, &w, &mut rng).unwrap();
            sx += b.x;
            sy += b.y;
        }
        // Uniform on [-1, 1]: sd = 1/√3.
        let se = (1.0 / 3.0f64).sqrt() / (n as f64).sqrt();
        assert!((sx / n as f64).abs() < 3.0 * se);
        assert!((sy / n as f64).abs() < 3.0 * se);
    }

    #[test]
    fn two_users_voronoi_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let users = [Point2D::new(-5.0, 0.0), Point2D::new(5.0, 0.0)];
        let w = Window::square(40.0);
        for _ in 0..500 {
            let bs = place_base_stations(&users, &w, &mut rng).unwrap();
            assert!(bs[0].x < 0.0 && bs[1].x > 0.0);
        }
    }

    #[test]
    fn rejection_budget_is_loud() {
        // The owner's cell misses the window entirely.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let users = [Point2D::new(0.0, 0.0), Point2D::new(100.0, 0.0)];
        let w = Window::Rect {
            min: Point2D::new(60.0, -1.0),
            max: Point2D::new(62.0, 1.0),
        };
        assert_eq!(
            place_base_station(0, &users, &w, &mut rng),
            Err(Error::RetryBudgetExceeded { budget: BS_RETRY_BUDGET })
        );
    }

    #[test]
    fn rayleigh_density_properties() {
        let lambda = 1.0 / (16.0 * 150.0 * 150.0);
        assert_eq!(rayleigh_pdf(lambda, 0.0), 0.0);
        // ∫0^∞ f dr with r = 1/u − 1 mapping.
        let tol = Tolerance::absolute(1e-12);
        let total = integrate(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let r = (1.0 - u) / u * 300.0;
                rayleigh_pdf(lambda, r) * 300.0 / (u * u)
            },
            0.0,
            1.0,
            tol,
        )
        .unwrap()
        .value;
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        let mode = rayleigh_mode(lambda);
        let h = 1e-3;
        assert!(rayleigh_pdf(lambda, mode) > rayleigh_pdf(lambda, mode - h));
        assert!(rayleigh_pdf(lambda, mode) > rayleigh_pdf(lambda, mode + h));
        assert!((mode - 1.0 / (2.0 * PI * lambda).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scenario_normalizes_angle() {
        let s = CellScenario::new(100.0, 40.0, -PI / 2.0).unwrap();
        assert!((s.psi0 - 1.5 * PI).abs() < 1e-12);
        assert!(CellScenario::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn reference_config_is_valid() {
        let c = NetworkConfig::reference();
        c.validate().unwrap();
        assert!((c.cell_radius - 300.0).abs() < 1e-9);
        assert!((c.p_s - 0.199_526_231_496_888).abs() < 1e-12);
    }
}
