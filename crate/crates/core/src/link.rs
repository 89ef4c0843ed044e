//! Downlink budget: beam spreading plus elevation-scaled atmospheric loss per
//! link, and the end-to-end single-photon detection efficiency.
//!
//! Attenuations are linear factors ≥ 1; their dB form is `10·log10(A)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("elevation {0}° is at or below the horizon")]
    BelowHorizon(f64),
    #[error("slant range must be positive, got {0} km")]
    NonPositiveRange(f64),
    #[error("invalid link parameter {field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Snspd,
    SiApd,
    IngaasApd,
    Custom,
}

impl DetectorKind {
    pub fn label(self) -> &'static str {
        match self {
            DetectorKind::Snspd => "SNSPD",
            DetectorKind::SiApd => "Si-APD",
            DetectorKind::IngaasApd => "IGA-APD",
            DetectorKind::Custom => "custom",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Snspd => "snspd",
            DetectorKind::SiApd => "si-apd",
            DetectorKind::IngaasApd => "ingaas-apd",
            DetectorKind::Custom => "custom",
        }
    }

    pub fn preset(self) -> Option<DetectorPreset> {
        let pde = match self {
            DetectorKind::Snspd => 0.9,
            DetectorKind::SiApd => 0.68,
            DetectorKind::IngaasApd => 0.25,
            DetectorKind::Custom => return None,
        };
        Some(DetectorPreset {
            kind: self,
            pde,
            dark_count_cps: 100.0,
        })
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "snspd" => Ok(DetectorKind::Snspd),
            "si-apd" | "si" => Ok(DetectorKind::SiApd),
            "ingaas-apd" | "iga-apd" | "iga" | "ingaas" => Ok(DetectorKind::IngaasApd),
            "custom" => Ok(DetectorKind::Custom),
            other => Err(format!("unknown detector {other:?}")),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorPreset {
    pub kind: DetectorKind,
    pub pde: f64,
    pub dark_count_cps: f64,
}

/// One wavelength/terminal/detector configuration of a single downlink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub wavelength_m: f64,
    pub tx_diameter_m: f64,
    pub rx_diameter_m: f64,
    pub zenith_attenuation_db: f64,
    pub tx_transmission: f64,
    pub rx_transmission: f64,
    pub optics_transmission: f64,
    pub pointing_loss: f64,
    pub pde: f64,
    pub fried_parameter_m: f64,
    pub detector: DetectorKind,
}

/// Turbulence-free downlink default for the Fried parameter, meters.
pub const DEFAULT_FRIED_PARAMETER_M: f64 = 1e6;

impl LinkParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        let unit = |field: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(LinkError::InvalidParam {
                    field,
                    reason: format!("{v} outside [0, 1]"),
                })
            }
        };
        let positive = |field: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(LinkError::InvalidParam {
                    field,
                    reason: format!("{v} must be positive"),
                })
            }
        };
        positive("wavelength", self.wavelength_m)?;
        positive("tx_diameter", self.tx_diameter_m)?;
        positive("rx_diameter", self.rx_diameter_m)?;
        positive("fried_parameter", self.fried_parameter_m)?;
        if !(self.zenith_attenuation_db >= 0.0 && self.zenith_attenuation_db.is_finite()) {
            return Err(LinkError::InvalidParam {
                field: "zenith_attenuation",
                reason: format!("{} must be non-negative", self.zenith_attenuation_db),
            });
        }
        unit("tx_transmission", self.tx_transmission)?;
        unit("rx_transmission", self.rx_transmission)?;
        unit("optics_transmission", self.optics_transmission)?;
        unit("pointing_loss", self.pointing_loss)?;
        unit("pde", self.pde)?;
        Ok(())
    }

    /// Product of all fixed transmission factors of one link.
    pub fn fixed_transmission(&self) -> f64 {
        self.tx_transmission
            * self.rx_transmission
            * (1.0 - self.pointing_loss)
            * self.optics_transmission
            * self.pde
    }
}

/// Linear attenuation factor to dB.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Diffraction-limited and turbulence-induced divergence angles, radians.
pub fn divergence_angles(wavelength_m: f64, tx_diameter_m: f64, fried_parameter_m: f64) -> (f64, f64) {
    (
        2.44 * wavelength_m / tx_diameter_m,
        2.1 * wavelength_m / fried_parameter_m,
    )
}

/// Zenith attenuation scaled by the air-mass factor 1/sin β, dB.
pub fn atmospheric_attenuation_db(elevation_deg: f64, zenith_db: f64) -> Result<f64, LinkError> {
    if elevation_deg.is_nan() || elevation_deg <= 0.0 {
        return Err(LinkError::BelowHorizon(elevation_deg));
    }
    Ok(zenith_db / elevation_deg.to_radians().sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Attenuation {
    pub linear: f64,
    pub db: f64,
    /// The beam footprint was smaller than the receiver aperture and the
    /// geometric factor was clamped to 1.
    pub far_field_clamped: bool,
}

/// Geometric spreading `L²(θ_diff² + θ_atm²)/D_R²`, clamped to ≥ 1.
pub fn geometric_spreading(range_km: f64, params: &LinkParams) -> (f64, bool) {
    let (diff, atm) = divergence_angles(
        params.wavelength_m,
        params.tx_diameter_m,
        params.fried_parameter_m,
    );
    let l = range_km * 1e3;
    let g = l * l * (diff * diff + atm * atm) / (params.rx_diameter_m * params.rx_diameter_m);
    if g < 1.0 {
        (1.0, true)
    } else {
        (g, false)
    }
}

/// Instantaneous attenuation of one downlink.
pub fn link_attenuation(range_km: f64, params: &LinkParams, elevation_deg: f64) -> Result<Attenuation, LinkError> {
    if range_km.is_nan() || range_km <= 0.0 {
        return Err(LinkError::NonPositiveRange(range_km));
    }
    let atm_db = atmospheric_attenuation_db(elevation_deg, params.zenith_attenuation_db)?;
    let (spread, far_field_clamped) = geometric_spreading(range_km, params);
    let db = to_db(spread) + atm_db;
    Ok(Attenuation {
        linear: spread * from_db(atm_db),
        db,
        far_field_clamped,
    })
}

/// Single-photon detection probability of one link.
pub fn channel_efficiency(attenuation_linear: f64, params: &LinkParams) -> f64 {
    params.fixed_transmission() / attenuation_linear
}

/// Constant loss of both terminals and detectors of a two-link system, dB.
pub fn system_loss_db(params: &LinkParams) -> f64 {
    -to_db(params.fixed_transmission().powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn leo_link(wavelength_nm: f64, detector: DetectorKind) -> LinkParams {
        let (atm, optics, pointing) = if wavelength_nm < 1000.0 {
            (3.0, 0.2, 0.3)
        } else {
            (2.0, 0.35, 0.2)
        };
        LinkParams {
            wavelength_m: wavelength_nm * 1e-9,
            tx_diameter_m: 0.3,
            rx_diameter_m: 0.8,
            zenith_attenuation_db: atm,
            tx_transmission: 0.8,
            rx_transmission: 0.8,
            optics_transmission: optics,
            pointing_loss: pointing,
            pde: detector.preset().unwrap().pde,
            fried_parameter_m: DEFAULT_FRIED_PARAMETER_M,
            detector,
        }
    }

    #[test]
    fn divergence_examples() {
        assert_abs_diff_eq!(divergence_angles(810e-9, 0.3, 1e6).0, 6.588e-6, epsilon = 1e-9);
        assert_abs_diff_eq!(divergence_angles(1550e-9, 0.3, 1e6).0, 1.2607e-5, epsilon = 1e-9);
        let (_, atm) = divergence_angles(1550e-9, 0.3, 1e12);
        assert!(atm < 1e-17);
    }

    #[test]
    fn air_mass_examples() {
        assert_abs_diff_eq!(atmospheric_attenuation_db(90.0, 3.0).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(atmospheric_attenuation_db(30.0, 2.0).unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(atmospheric_attenuation_db(90.0, 0.0).unwrap(), 0.0);
        assert!(matches!(atmospheric_attenuation_db(0.0, 3.0), Err(LinkError::BelowHorizon(_))));
        assert!(atmospheric_attenuation_db(-5.0, 3.0).is_err());
    }

    #[test]
    fn zenith_attenuation_examples() {
        // Hand evaluation: (6e5 · 2.44λ/0.3 / 0.8)² · 10^(A0/10).
        let hand = |lambda: f64, a0: f64| {
            let g = (6e5 * 2.44 * lambda / 0.3 / 0.8_f64).powi(2);
            g * 10f64.powf(a0 / 10.0)
        };
        let a810 = link_attenuation(600.0, &leo_link(810.0, DetectorKind::SiApd), 90.0).unwrap();
        assert_abs_diff_eq!(a810.linear, hand(810e-9, 3.0), epsilon = 1e-9);
        assert_abs_diff_eq!(a810.linear, 48.71, epsilon = 0.01);
        assert_abs_diff_eq!(a810.db, 16.88, epsilon = 0.01);
        assert!(!a810.far_field_clamped);

        let a1550 = link_attenuation(600.0, &leo_link(1550.0, DetectorKind::Snspd), 90.0).unwrap();
        assert_abs_diff_eq!(a1550.linear, hand(1550e-9, 2.0), epsilon = 1e-9);
        assert_abs_diff_eq!(a1550.linear, 141.7, epsilon = 0.1);
        assert_abs_diff_eq!(a1550.db, 21.51, epsilon = 0.01);
        assert_abs_diff_eq!(a1550.db - a810.db, 4.64, epsilon = 0.01);
    }

    #[test]
    fn doubling_receiver_gains_six_db() {
        let p = leo_link(1550.0, DetectorKind::Snspd);
        let q = LinkParams {
            rx_diameter_m: 1.6,
            ..p
        };
        let a = link_attenuation(900.0, &p, 50.0).unwrap().db;
        let b = link_attenuation(900.0, &q, 50.0).unwrap().db;
        assert_abs_diff_eq!(a - b, 20.0 * 2f64.log10(), epsilon = 1e-12);
        assert_abs_diff_eq!(a - b, 6.02, epsilon = 0.005);
    }

    #[test]
    fn far_field_clamp() {
        let p = LinkParams {
            rx_diameter_m: 100.0,
            ..leo_link(810.0, DetectorKind::Snspd)
        };
        let a = link_attenuation(1.0, &p, 90.0).unwrap();
        assert!(a.far_field_clamped);
        assert_abs_diff_eq!(a.db, 3.0, epsilon = 1e-12);
        assert!(link_attenuation(0.0, &p, 90.0).is_err());
    }

    #[test]
    fn efficiency_examples() {
        let ideal = LinkParams {
            tx_transmission: 1.0,
            rx_transmission: 1.0,
            optics_transmission: 1.0,
            pointing_loss: 0.0,
            pde: 1.0,
            ..leo_link(810.0, DetectorKind::Snspd)
        };
        assert_eq!(channel_efficiency(1.0, &ideal), 1.0);

        let p = leo_link(1550.0, DetectorKind::Snspd);
        let eta = channel_efficiency(from_db(21.51), &p);
        let hand = 0.8 * 0.8 * 0.8 * 0.35 * 0.9 / 141.7;
        assert!((eta - 1.139e-3).abs() / 1.139e-3 < 0.01);
        assert!((eta - hand).abs() / hand < 0.001);

        let half = LinkParams { pde: p.pde / 2.0, ..p };
        assert_eq!(channel_efficiency(200.0, &half), channel_efficiency(200.0, &p) / 2.0);
    }

    #[test]
    fn system_loss_presets() {
        let cases = [
            (1550.0, DetectorKind::Snspd, 15.8),
            (810.0, DetectorKind::SiApd, 24.3),
            (1550.0, DetectorKind::IngaasApd, 27.0),
            (810.0, DetectorKind::Snspd, 21.9),
        ];
        for (wl, det, expected) in cases {
            let got = system_loss_db(&leo_link(wl, det));
            assert!((got - expected).abs() <= 0.05, "{wl} {det}: {got}");
        }
    }

    #[test]
    fn validation() {
        let p = leo_link(810.0, DetectorKind::Snspd);
        assert!(p.validate().is_ok());
        assert!(LinkParams { pde: 1.2, ..p }.validate().is_err());
        assert!(LinkParams { rx_diameter_m: 0.0, ..p }.validate().is_err());
        assert!(LinkParams { zenith_attenuation_db: -1.0, ..p }.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn db_decomposition_is_exact(l in 300.0f64..40_000.0, beta in 1.0f64..90.0) {
            let p = leo_link(1550.0, DetectorKind::Snspd);
            let a = link_attenuation(l, &p, beta).unwrap();
            let theta = 2.44 * p.wavelength_m / p.tx_diameter_m;
            let (_, atm) = divergence_angles(p.wavelength_m, p.tx_diameter_m, p.fried_parameter_m);
            let geom = to_db((l * 1e3).powi(2) * (theta * theta + atm * atm) / p.rx_diameter_m.powi(2));
            let expected = geom + p.zenith_attenuation_db / beta.to_radians().sin();
            proptest::prop_assert!((a.db - expected).abs() < 1e-9);
            proptest::prop_assert!((to_db(a.linear) - a.db).abs() < 1e-9);
        }

        #[test]
        fn wavelength_gap_at_identical_geometry(l in 300.0f64..40_000.0, beta in 1.0f64..90.0) {
            let a = link_attenuation(l, &leo_link(1550.0, DetectorKind::Snspd), beta).unwrap().db;
            let b = link_attenuation(l, &leo_link(810.0, DetectorKind::Snspd), beta).unwrap().db;
            let expected = 20.0 * (1550.0f64 / 810.0).log10() - (3.0 - 2.0) / beta.to_radians().sin();
            proptest::prop_assert!((a - b - expected).abs() < 1e-9);
        }

        #[test]
        fn attenuation_monotone(l in 300.0f64..40_000.0, dl in 0.1f64..1000.0, beta in 1.0f64..89.0, db in 0.01f64..1.0) {
            let p = leo_link(810.0, DetectorKind::SiApd);
            let base = link_attenuation(l, &p, beta).unwrap().linear;
            proptest::prop_assert!(link_attenuation(l + dl, &p, beta).unwrap().linear > base);
            proptest::prop_assert!(link_attenuation(l, &p, beta + db).unwrap().linear < base);
        }

        #[test]
        fn efficiency_times_attenuation_is_constant(l in 300.0f64..40_000.0, beta in 1.0f64..90.0) {
            let p = leo_link(810.0, DetectorKind::SiApd);
            let a = link_attenuation(l, &p, beta).unwrap().linear;
            let eta = channel_efficiency(a, &p);
            proptest::prop_assert!((eta * a - p.fixed_transmission()).abs() < 1e-15);
        }
    }
}
