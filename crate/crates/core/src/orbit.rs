//! Keplerian propagation with J2 secular drift of the node, perigee and mean
//! anomaly. No drag, no short-period terms.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::{wrap_pi, Epoch, Frame, Vec3, SECONDS_PER_DAY};

/// Earth gravitational parameter, km³/s².
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;
/// Second zonal harmonic.
pub const J2: f64 = 1.082_63e-3;
/// Equatorial radius, km.
pub const EARTH_RADIUS_KM: f64 = 6_378.137;

const KEPLER_TOLERANCE: f64 = 1e-12;
const KEPLER_MAX_ITER: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("Kepler equation did not converge for M={mean_anomaly}, e={eccentricity}")]
    KeplerNonConvergence { mean_anomaly: f64, eccentricity: f64 },
    #[error("invalid orbital elements: {0}")]
    InvalidElements(String),
    #[error("requested epoch {requested} is more than one day before the element epoch {epoch0}")]
    BeforeEpoch { requested: Epoch, epoch0: Epoch },
}

/// Which perturbations `propagate_with` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceModel {
    TwoBody,
    #[default]
    J2Secular,
}

/// Mean Keplerian elements at `epoch0`. Distances in km, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitElements {
    pub semi_major_axis_km: f64,
    pub eccentricity: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub arg_perigee_deg: f64,
    pub mean_anomaly_deg: f64,
    pub epoch0: Epoch,
}

impl OrbitElements {
    pub fn new(
        semi_major_axis_km: f64,
        eccentricity: f64,
        inclination_deg: f64,
        raan_deg: f64,
        arg_perigee_deg: f64,
        mean_anomaly_deg: f64,
        epoch0: Epoch,
    ) -> Result<Self, OrbitError> {
        let el = OrbitElements {
            semi_major_axis_km,
            eccentricity,
            inclination_deg,
            raan_deg,
            arg_perigee_deg,
            mean_anomaly_deg,
            epoch0,
        };
        el.validate()?;
        Ok(el)
    }

    /// Circular orbit at `altitude_km` above the equatorial radius.
    pub fn circular(
        altitude_km: f64,
        inclination_deg: f64,
        raan_deg: f64,
        mean_anomaly_deg: f64,
        epoch0: Epoch,
    ) -> Result<Self, OrbitError> {
        Self::new(
            EARTH_RADIUS_KM + altitude_km,
            0.0,
            inclination_deg,
            raan_deg,
            0.0,
            mean_anomaly_deg,
            epoch0,
        )
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        let bad = |m: String| Err(OrbitError::InvalidElements(m));
        if self.semi_major_axis_km.is_nan() || self.semi_major_axis_km <= EARTH_RADIUS_KM + 100.0 {
            return bad(format!(
                "semi-major axis {} km must exceed {} km",
                self.semi_major_axis_km,
                EARTH_RADIUS_KM + 100.0
            ));
        }
        if !(0.0..1.0).contains(&self.eccentricity) {
            return bad(format!("eccentricity {} outside [0, 1)", self.eccentricity));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return bad(format!("inclination {} outside [0, 180]", self.inclination_deg));
        }
        let angles = [self.raan_deg, self.arg_perigee_deg, self.mean_anomaly_deg];
        if angles.iter().any(|a| !a.is_finite()) {
            return bad("non-finite angle".into());
        }
        Ok(())
    }

    pub fn altitude_km(&self) -> f64 {
        self.semi_major_axis_km - EARTH_RADIUS_KM
    }

    /// Unperturbed mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH_KM3_S2 / self.semi_major_axis_km.powi(3)).sqrt()
    }

    /// Keplerian period 2π/n, seconds.
    pub fn period_s(&self) -> f64 {
        TAU / self.mean_motion()
    }

    pub fn secular_rates(&self) -> SecularRates {
        j2_secular_rates(
            self.semi_major_axis_km,
            self.eccentricity,
            self.inclination_deg,
        )
    }

    /// Mean elements advanced (or rewound) to `t` under `model`.
    pub fn elements_at(&self, t: Epoch, model: ForceModel) -> OrbitElements {
        let dt_days = t.seconds_since(self.epoch0) / SECONDS_PER_DAY;
        let rates = match model {
            ForceModel::TwoBody => SecularRates::default(),
            ForceModel::J2Secular => self.secular_rates(),
        };
        let n_deg_day = self.mean_motion().to_degrees() * SECONDS_PER_DAY;
        OrbitElements {
            raan_deg: (self.raan_deg + rates.raan_deg_per_day * dt_days).rem_euclid(360.0),
            arg_perigee_deg: (self.arg_perigee_deg + rates.arg_perigee_deg_per_day * dt_days)
                .rem_euclid(360.0),
            mean_anomaly_deg: (self.mean_anomaly_deg
                + (n_deg_day + rates.mean_anomaly_drift_deg_per_day) * dt_days)
                .rem_euclid(360.0),
            epoch0: t,
            ..*self
        }
    }
}

/// Satellite position in ECI, km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatState {
    pub position: Vec3,
    pub epoch: Epoch,
}

/// J2 secular drift rates, degrees/day.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SecularRates {
    pub raan_deg_per_day: f64,
    pub arg_perigee_deg_per_day: f64,
    pub mean_anomaly_drift_deg_per_day: f64,
}

/// Solves `M = E - e sin E` for the eccentric anomaly.
///
/// Newton iteration safeguarded by the bracket `[M - e, M + e]`, which always
/// contains the root; a step leaving the bracket is replaced by bisection.
pub fn solve_kepler(mean_anomaly: f64, eccentricity: f64) -> Result<f64, OrbitError> {
    let fail = || OrbitError::KeplerNonConvergence {
        mean_anomaly,
        eccentricity,
    };
    if !mean_anomaly.is_finite() || !(0.0..1.0).contains(&eccentricity) {
        return Err(fail());
    }
    let e = eccentricity;
    let wrapped = wrap_pi(mean_anomaly);
    let offset = mean_anomaly - wrapped;
    let m = wrapped;

    let (mut lo, mut hi) = (m - e, m + e);
    let mut x = if e > 0.8 { m.signum() * PI } else { m };
    x = x.clamp(lo, hi);
    for _ in 0..KEPLER_MAX_ITER {
        let f = x - e * x.sin() - m;
        if f.abs() < KEPLER_TOLERANCE {
            return Ok(x + offset);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let fp = 1.0 - e * x.cos();
        let newton = x - f / fp;
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < f64::EPSILON * 4.0 {
            return Ok(x + offset);
        }
    }
    Err(fail())
}

/// Secular J2 rates for mean elements (a in km, i in degrees).
pub fn j2_secular_rates(a_km: f64, e: f64, inclination_deg: f64) -> SecularRates {
    let n = (MU_EARTH_KM3_S2 / a_km.powi(3)).sqrt();
    let p = a_km * (1.0 - e * e);
    let k = J2 * (EARTH_RADIUS_KM / p).powi(2) * n;
    let ci = inclination_deg.to_radians().cos();
    let to_deg_day = |rad_s: f64| rad_s.to_degrees() * SECONDS_PER_DAY;
    SecularRates {
        raan_deg_per_day: to_deg_day(-1.5 * k * ci),
        arg_perigee_deg_per_day: to_deg_day(0.75 * k * (5.0 * ci * ci - 1.0)),
        mean_anomaly_drift_deg_per_day: to_deg_day(
            0.75 * k * (1.0 - e * e).sqrt() * (3.0 * ci * ci - 1.0),
        ),
    }
}

/// Position at `t` with J2 secular drift.
pub fn propagate(elements: &OrbitElements, t: Epoch) -> Result<SatState, OrbitError> {
    propagate_with(elements, t, ForceModel::J2Secular)
}

pub fn propagate_with(
    elements: &OrbitElements,
    t: Epoch,
    model: ForceModel,
) -> Result<SatState, OrbitError> {
    if t.seconds_since(elements.epoch0) < -SECONDS_PER_DAY {
        return Err(OrbitError::BeforeEpoch {
            requested: t,
            epoch0: elements.epoch0,
        });
    }
    let el = elements.elements_at(t, model);
    let e = el.eccentricity;
    let big_e = solve_kepler(el.mean_anomaly_deg.to_radians(), e)?;
    let (se, ce) = big_e.sin_cos();
    let r = el.semi_major_axis_km * (1.0 - e * ce);
    let nu = ((1.0 - e * e).sqrt() * se).atan2(ce - e);

    let u = el.arg_perigee_deg.to_radians() + nu;
    let (su, cu) = u.sin_cos();
    let (so, co) = el.raan_deg.to_radians().sin_cos();
    let (si, ci) = el.inclination_deg.to_radians().sin_cos();
    let position = Vec3::new(
        r * (co * cu - so * su * ci),
        r * (so * cu + co * su * ci),
        r * (su * si),
        Frame::Eci,
    );
    Ok(SatState { position, epoch: t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t0() -> Epoch {
        Epoch::parse_iso("2021-07-01T00:00:00Z").unwrap()
    }

    #[test]
    fn kepler_examples() {
        assert_eq!(solve_kepler(0.0, 0.7).unwrap(), 0.0);
        assert_abs_diff_eq!(solve_kepler(PI, 0.3).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(solve_kepler(1.0, 0.1).unwrap(), 1.08860, epsilon = 1e-5);
    }

    #[test]
    fn kepler_keeps_branch_and_residual() {
        for &m in &[-50.3, -3.0, 0.2, 7.0, 123.4] {
            for &e in &[0.0, 0.3, 0.95, 0.999] {
                let big_e = solve_kepler(m, e).unwrap();
                assert!((big_e - e * big_e.sin() - m).abs() < 1e-11, "m={m} e={e}");
                assert!((big_e - m).abs() <= e + 1e-12);
            }
        }
    }

    #[test]
    fn kepler_rejects_bad_input() {
        assert!(solve_kepler(f64::NAN, 0.1).is_err());
        assert!(solve_kepler(1.0, 1.0).is_err());
        assert!(solve_kepler(1.0, -0.1).is_err());
    }

    #[test]
    fn polar_orbit_has_no_nodal_drift() {
        let r = j2_secular_rates(6_978.137, 0.0, 90.0);
        assert!(r.raan_deg_per_day.abs() < 1e-12);
    }

    #[test]
    fn sun_synchronous_nodal_rate() {
        let r = j2_secular_rates(6_978.137, 0.0, 97.79);
        let target = 360.0 / 365.2422;
        assert!((r.raan_deg_per_day - 0.9856).abs() / 0.9856 < 0.005);
        assert!((r.raan_deg_per_day - target).abs() / target < 0.005);
    }

    #[test]
    fn nodal_rate_antisymmetric_in_inclination() {
        let a = j2_secular_rates(7_500.0, 0.01, 40.0);
        let b = j2_secular_rates(7_500.0, 0.01, 140.0);
        assert_abs_diff_eq!(a.raan_deg_per_day, -b.raan_deg_per_day, epsilon = 1e-12);
    }

    #[test]
    fn leo_period() {
        let el = OrbitElements::circular(600.0, 50.0, 0.0, 0.0, t0()).unwrap();
        assert_abs_diff_eq!(el.period_s(), 5_801.0, epsilon = 1.0);
    }

    #[test]
    fn circular_equatorial_starts_on_x_rotated_by_mean_anomaly() {
        let el = OrbitElements::circular(600.0, 0.0, 0.0, 30.0, t0()).unwrap();
        let p = propagate(&el, t0()).unwrap().position;
        let a = el.semi_major_axis_km;
        assert_abs_diff_eq!(p.x, a * 30f64.to_radians().cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, a * 30f64.to_radians().sin(), epsilon = 1e-9);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn two_body_repeats_after_one_period() {
        let el = OrbitElements::circular(600.0, 90.0, 10.0, 0.0, t0()).unwrap();
        let p0 = propagate_with(&el, t0(), ForceModel::TwoBody).unwrap().position;
        let p1 = propagate_with(&el, t0().add_seconds(el.period_s()), ForceModel::TwoBody)
            .unwrap()
            .position;
        assert!(p1.sub(&p0).unwrap().norm() < 1e-3);
    }

    #[test]
    fn polar_j2_orbit_repeats_after_draconitic_period() {
        let el = OrbitElements::circular(600.0, 90.0, 10.0, 0.0, t0()).unwrap();
        let r = el.secular_rates();
        let u_rate = el.mean_motion()
            + (r.arg_perigee_deg_per_day + r.mean_anomaly_drift_deg_per_day).to_radians()
                / SECONDS_PER_DAY;
        let p0 = propagate(&el, t0()).unwrap().position;
        let p1 = propagate(&el, t0().add_seconds(TAU / u_rate)).unwrap().position;
        assert!(p1.sub(&p0).unwrap().norm() < 1.0);
    }

    #[test]
    fn rejects_far_past_epochs_and_bad_elements() {
        let el = OrbitElements::circular(600.0, 50.0, 0.0, 0.0, t0()).unwrap();
        assert!(propagate(&el, t0().add_days(-0.5)).is_ok());
        assert!(matches!(
            propagate(&el, t0().add_days(-2.0)),
            Err(OrbitError::BeforeEpoch { .. })
        ));
        assert!(OrbitElements::circular(50.0, 50.0, 0.0, 0.0, t0()).is_err());
        assert!(OrbitElements::new(7000.0, 1.0, 50.0, 0.0, 0.0, 0.0, t0()).is_err());
        assert!(OrbitElements::new(7000.0, 0.0, 181.0, 0.0, 0.0, 0.0, t0()).is_err());
    }

    #[test]
    fn propagation_is_deterministic() {
        let el = OrbitElements::new(7_100.0, 0.02, 63.4, 12.0, 270.0, 5.0, t0()).unwrap();
        let t = t0().add_days(123.456);
        assert_eq!(propagate(&el, t).unwrap(), propagate(&el, t).unwrap());
    }

    #[test]
    fn sso_local_time_of_ascending_node_is_stable() {
        use crate::astro::mean_sun_right_ascension;
        let el = OrbitElements::circular(600.0, 97.8, 280.0, 0.0, t0()).unwrap();
        let ltan_hours = |t: Epoch| {
            let el_t = el.elements_at(t, ForceModel::J2Secular);
            let d = wrap_pi(el_t.raan_deg.to_radians() - mean_sun_right_ascension(t));
            12.0 + d.to_degrees() / 15.0
        };
        let start = ltan_hours(t0());
        for day in (0..=365).step_by(5) {
            let l = ltan_hours(t0().add_days(day as f64));
            assert!((l - start).abs() * 60.0 < 10.0, "day {day}: {l} vs {start}");
        }
    }

    proptest::proptest! {
        #[test]
        fn kepler_residual(m in -10.0f64..10.0, e in 0.0f64..0.99) {
            let big_e = solve_kepler(m, e).unwrap();
            proptest::prop_assert!((big_e - e * big_e.sin() - m).abs() < 1e-12);
        }

        #[test]
        fn circular_radius_is_constant(inc in 0.0f64..180.0, raan in 0.0f64..360.0, days in 0.0f64..365.0) {
            let el = OrbitElements::circular(600.0, inc, raan, 0.0, t0()).unwrap();
            let p = propagate(&el, t0().add_days(days)).unwrap().position;
            proptest::prop_assert!((p.norm() - el.semi_major_axis_km).abs() < 1e-3);
        }

        #[test]
        fn eccentric_radius_within_apsides(e in 0.0f64..0.3, days in 0.0f64..30.0) {
            let el = OrbitElements::new(9_000.0, e, 55.0, 10.0, 20.0, 30.0, t0()).unwrap();
            let r = propagate(&el, t0().add_days(days)).unwrap().position.norm();
            let a = el.semi_major_axis_km;
            proptest::prop_assert!(r >= a * (1.0 - e) - 1e-6 && r <= a * (1.0 + e) + 1e-6);
        }

        #[test]
        fn rewinding_rederived_elements_recovers_position(hours in 0.0f64..24.0, inc in 0.0f64..180.0) {
            let el = OrbitElements::new(7_000.0, 0.05, inc, 33.0, 44.0, 55.0, t0()).unwrap();
            let t1 = t0().add_seconds(hours * 3600.0);
            let later = el.elements_at(t1, ForceModel::J2Secular);
            let back = propagate(&later, t0()).unwrap().position;
            let direct = propagate(&el, t0()).unwrap().position;
            proptest::prop_assert!(back.sub(&direct).unwrap().norm() < 1e-3);
        }
    }
}
