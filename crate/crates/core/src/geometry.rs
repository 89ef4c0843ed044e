//! Station-to-satellite geometry, illumination and the gating predicates that
//! decide when the two-station link may operate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::astro::{
    earth_rotation_angle, geodetic_to_ecef, local_up, rotate_z, AstroError, Frame, GroundStation,
    Vec3,
};
use crate::orbit::{SatState, EARTH_RADIUS_KM};

/// Elevation and slant range of the satellite seen from one station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PassGeometry {
    pub elevation_deg: f64,
    pub range_km: f64,
}

/// Twilight definitions; a station is dark when the Sun is below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwilightRule {
    Civil,
    Nautical,
    #[default]
    Astronomical,
}

impl TwilightRule {
    pub const ALL: [TwilightRule; 3] = [
        TwilightRule::Civil,
        TwilightRule::Nautical,
        TwilightRule::Astronomical,
    ];

    pub fn threshold_deg(self) -> f64 {
        match self {
            TwilightRule::Civil => -6.0,
            TwilightRule::Nautical => -12.0,
            TwilightRule::Astronomical => -18.0,
        }
    }

    pub fn is_dark(self, sun_elevation_deg: f64) -> bool {
        sun_elevation_deg < self.threshold_deg()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TwilightRule::Civil => "civil",
            TwilightRule::Nautical => "nautical",
            TwilightRule::Astronomical => "astronomical",
        }
    }
}

impl fmt::Display for TwilightRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TwilightRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "civil" => Ok(TwilightRule::Civil),
            "nautical" | "maritime" => Ok(TwilightRule::Nautical),
            "astronomical" => Ok(TwilightRule::Astronomical),
            other => Err(format!("unknown twilight rule {other:?}")),
        }
    }
}

/// When the quantum channel may run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationMode {
    NightOnly,
    DayAndNight,
}

impl OperationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OperationMode::NightOnly => "night_only",
            OperationMode::DayAndNight => "day_and_night",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IlluminationState {
    pub satellite_sunlit: bool,
    pub station_dark: [bool; 2],
}

/// Precomputed ECEF quantities for a station.
#[derive(Debug, Clone)]
pub struct StationFrame {
    pub position_km: Vec3,
    pub up: Vec3,
}

impl StationFrame {
    pub fn new(station: &GroundStation) -> Self {
        StationFrame {
            position_km: geodetic_to_ecef(station).scale(1e-3),
            up: local_up(station),
        }
    }
}

/// Elevation and range of `sat` from `station` in the local ENU frame.
pub fn topocentric(station: &GroundStation, sat: &SatState) -> Result<PassGeometry, AstroError> {
    topocentric_from(&StationFrame::new(station), sat)
}

pub fn topocentric_from(frame: &StationFrame, sat: &SatState) -> Result<PassGeometry, AstroError> {
    if sat.position.frame != Frame::Eci {
        return Err(AstroError::FrameMismatch {
            expected: Frame::Eci,
            found: sat.position.frame,
        });
    }
    let theta = earth_rotation_angle(sat.epoch)?;
    let sat_ecef = rotate_z(&sat.position, -theta, Frame::Ecef);
    Ok(look_from_ecef(frame, &sat_ecef))
}

pub(crate) fn look_from_ecef(frame: &StationFrame, sat_ecef_km: &Vec3) -> PassGeometry {
    let rho = Vec3::new(
        sat_ecef_km.x - frame.position_km.x,
        sat_ecef_km.y - frame.position_km.y,
        sat_ecef_km.z - frame.position_km.z,
        Frame::Ecef,
    );
    let range_km = rho.norm();
    let up = rho.x * frame.up.x + rho.y * frame.up.y + rho.z * frame.up.z;
    PassGeometry {
        elevation_deg: (up / range_km).clamp(-1.0, 1.0).asin().to_degrees(),
        range_km,
    }
}

/// Cylindrical-umbra test; `sun` is the ECI unit vector towards the Sun.
pub fn satellite_sunlit(sat: &SatState, sun: &Vec3) -> Result<bool, AstroError> {
    let p = &sat.position;
    let along = p.dot(sun)?;
    if along >= 0.0 {
        return Ok(true);
    }
    let perp = p.sub(&sun.scale(along))?.norm();
    Ok(perp >= EARTH_RADIUS_KM)
}

pub fn night_condition(ill: &IlluminationState) -> bool {
    !ill.satellite_sunlit && ill.station_dark.iter().all(|&d| d)
}

/// Both stations at or above `beta_min_deg` (inclusive gate).
pub fn dual_visibility(g1: &PassGeometry, g2: &PassGeometry, beta_min_deg: f64) -> bool {
    g1.elevation_deg >= beta_min_deg && g2.elevation_deg >= beta_min_deg
}

pub fn communication_allowed(dual_vis: bool, night: bool, mode: OperationMode) -> bool {
    dual_vis && (night || mode == OperationMode::DayAndNight)
}

/// Maximum slant range at elevation `beta_deg` for a satellite at
/// `altitude_km` above a spherical Earth.
pub fn max_slant_range_km(altitude_km: f64, beta_deg: f64) -> f64 {
    let r = EARTH_RADIUS_KM;
    let b = beta_deg.to_radians();
    ((r + altitude_km).powi(2) - (r * b.cos()).powi(2)).sqrt() - r * b.sin()
}
