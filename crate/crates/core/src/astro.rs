//! Time scale, Earth rotation, WGS84 geodesy and a low-precision solar
//! ephemeris.
//!
//! The inertial frame is a single mean-equator frame; Earth orientation is a
//! pure rotation about the polar axis by the Greenwich mean sidereal angle.
//! UTC is treated as uniform, so there is no leap-second table.

use std::f64::consts::{PI, TAU};
use std::fmt;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds per day.
pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Julian date of J2000.0 (2000-01-01T12:00:00).
pub const J2000_JD: f64 = 2_451_545.0;

/// WGS84 semi-major axis in meters.
pub const WGS84_A_M: f64 = 6_378_137.0;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

// 1990-01-01T00:00Z and 2061-01-01T00:00Z, in days from J2000.0.
const SUPPORTED_MIN_DAYS: f64 = -3_652.5;
const SUPPORTED_MAX_DAYS: f64 = 22_280.5;

// GMST at J2000.0 and its rate, degrees and degrees/day.
const GMST_J2000_DEG: f64 = 280.460_618_37;
const GMST_RATE_DEG_PER_DAY: f64 = 360.985_647_366_29;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AstroError {
    #[error("epoch {0} is outside the supported range 1990-2060")]
    EpochOutOfRange(String),
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: Frame, found: Frame },
    #[error("invalid ground station: {0}")]
    InvalidStation(String),
    #[error("cannot parse date-time {input:?}: {reason}")]
    BadTimestamp { input: String, reason: String },
}

/// An instant, stored as continuous days since J2000.0 (UTC, uniform).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Epoch {
    days: f64,
}

impl Epoch {
    pub const J2000: Epoch = Epoch { days: 0.0 };

    pub fn from_days_since_j2000(days: f64) -> Self {
        Epoch { days }
    }

    pub fn from_julian_date(jd: f64) -> Self {
        Epoch {
            days: jd - J2000_JD,
        }
    }

    pub fn days_since_j2000(self) -> f64 {
        self.days
    }

    pub fn julian_date(self) -> f64 {
        self.days + J2000_JD
    }

    pub fn from_utc(dt: DateTime<Utc>) -> Self {
        let delta = dt.signed_duration_since(j2000_utc());
        let secs = delta.num_seconds();
        let nanos = (delta - chrono::Duration::seconds(secs))
            .num_nanoseconds()
            .unwrap_or(0);
        Epoch {
            days: (secs as f64 + nanos as f64 * 1e-9) / SECONDS_PER_DAY,
        }
    }

    pub fn to_utc(self) -> DateTime<Utc> {
        let total_ms = (self.days * SECONDS_PER_DAY * 1e3).round() as i64;
        j2000_utc() + chrono::Duration::milliseconds(total_ms)
    }

    /// Parses an ISO-8601 / RFC 3339 UTC timestamp such as `2021-07-01T00:00:00Z`.
    pub fn parse_iso(text: &str) -> Result<Self, AstroError> {
        DateTime::parse_from_rfc3339(text.trim())
            .map(|dt| Epoch::from_utc(dt.with_timezone(&Utc)))
            .map_err(|e| AstroError::BadTimestamp {
                input: text.to_string(),
                reason: e.to_string(),
            })
    }

    /// Millisecond-resolution ISO-8601 string, always with a `Z` suffix.
    pub fn to_iso(self) -> String {
        self.to_utc().format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
    }

    pub fn calendar_date(self) -> NaiveDate {
        self.to_utc().date_naive()
    }

    pub fn add_seconds(self, seconds: f64) -> Self {
        Epoch {
            days: self.days + seconds / SECONDS_PER_DAY,
        }
    }

    pub fn add_days(self, days: f64) -> Self {
        Epoch {
            days: self.days + days,
        }
    }

    /// `self - earlier`, in seconds.
    pub fn seconds_since(self, earlier: Epoch) -> f64 {
        (self.days - earlier.days) * SECONDS_PER_DAY
    }

    pub fn check_supported(self) -> Result<Self, AstroError> {
        if (SUPPORTED_MIN_DAYS..SUPPORTED_MAX_DAYS).contains(&self.days) {
            Ok(self)
        } else {
            Err(AstroError::EpochOutOfRange(format!("JD {:.6}", self.julian_date())))
        }
    }
}

impl fmt::Display for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

fn j2000_utc() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2000, 1, 1, 12, 0, 0).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Eci,
    Ecef,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Eci => "ECI",
            Frame::Ecef => "ECEF",
        })
    }
}

/// Cartesian vector tagged with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub frame: Frame,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64, frame: Frame) -> Self {
        Vec3 { x, y, z, frame }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn scale(&self, k: f64) -> Self {
        Vec3::new(self.x * k, self.y * k, self.z * k, self.frame)
    }

    pub fn unit(&self) -> Self {
        self.scale(1.0 / self.norm())
    }

    fn same_frame(&self, other: &Vec3) -> Result<(), AstroError> {
        if self.frame == other.frame {
            Ok(())
        } else {
            Err(AstroError::FrameMismatch {
                expected: self.frame,
                found: other.frame,
            })
        }
    }

    pub fn dot(&self, other: &Vec3) -> Result<f64, AstroError> {
        self.same_frame(other)?;
        Ok(self.x * other.x + self.y * other.y + self.z * other.z)
    }

    pub fn cross(&self, other: &Vec3) -> Result<Vec3, AstroError> {
        self.same_frame(other)?;
        Ok(Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
            self.frame,
        ))
    }

    pub fn sub(&self, other: &Vec3) -> Result<Vec3, AstroError> {
        self.same_frame(other)?;
        Ok(Vec3::new(
            self.x - other.x,
            self.y - other.y,
            self.z - other.z,
            self.frame,
        ))
    }

    pub fn add(&self, other: &Vec3) -> Result<Vec3, AstroError> {
        self.same_frame(other)?;
        Ok(Vec3::new(
            self.x + other.x,
            self.y + other.y,
            self.z + other.z,
            self.frame,
        ))
    }

    /// Angle between two vectors of the same frame, radians.
    pub fn angle_to(&self, other: &Vec3) -> Result<f64, AstroError> {
        let c = self.cross(other)?.norm();
        let d = self.dot(other)?;
        Ok(c.atan2(d))
    }
}

/// Geodetic site on the WGS84 ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub name: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

impl GroundStation {
    /// Validates the latitude and normalizes the longitude to (-180, 180].
    pub fn new(
        name: impl Into<String>,
        latitude_deg: f64,
        longitude_deg: f64,
        altitude_m: f64,
    ) -> Result<Self, AstroError> {
        let name = name.into();
        if !latitude_deg.is_finite() || latitude_deg.abs() > 90.0 {
            return Err(AstroError::InvalidStation(format!(
                "{name}: latitude {latitude_deg} outside [-90, 90]"
            )));
        }
        if !longitude_deg.is_finite() || !altitude_m.is_finite() {
            return Err(AstroError::InvalidStation(format!(
                "{name}: non-finite longitude or altitude"
            )));
        }
        Ok(GroundStation {
            name,
            latitude_deg,
            longitude_deg: normalize_longitude(longitude_deg),
            altitude_m,
        })
    }
}

/// Maps any longitude into (-180, 180].
pub fn normalize_longitude(lon_deg: f64) -> f64 {
    let mut l = lon_deg.rem_euclid(360.0);
    if l > 180.0 {
        l -= 360.0;
    }
    l
}

/// Greenwich mean sidereal angle in [0, 2π), linear in time.
pub fn earth_rotation_angle(epoch: Epoch) -> Result<f64, AstroError> {
    let d = epoch.check_supported()?.days_since_j2000();
    // Split the rate to keep the large product exact-ish over decades.
    let turns = d.trunc() * (GMST_RATE_DEG_PER_DAY - 360.0) + d.fract() * GMST_RATE_DEG_PER_DAY;
    Ok((GMST_J2000_DEG + turns).to_radians().rem_euclid(TAU))
}

/// Position of a geodetic site in ECEF, meters.
pub fn geodetic_to_ecef(station: &GroundStation) -> Vec3 {
    let lat = station.latitude_deg.to_radians();
    let lon = station.longitude_deg.to_radians();
    let e2 = WGS84_F * (2.0 - WGS84_F);
    let (slat, clat) = lat.sin_cos();
    let n = WGS84_A_M / (1.0 - e2 * slat * slat).sqrt();
    let h = station.altitude_m;
    Vec3::new(
        (n + h) * clat * lon.cos(),
        (n + h) * clat * lon.sin(),
        (n * (1.0 - e2) + h) * slat,
        Frame::Ecef,
    )
}

/// Outward ellipsoid normal (local "up") at the site, ECEF unit vector.
pub fn local_up(station: &GroundStation) -> Vec3 {
    let lat = station.latitude_deg.to_radians();
    let lon = station.longitude_deg.to_radians();
    Vec3::new(
        lat.cos() * lon.cos(),
        lat.cos() * lon.sin(),
        lat.sin(),
        Frame::Ecef,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conversion {
    EcefToEci,
    EciToEcef,
}

/// Rotates `v` about the polar axis by the Earth rotation angle.
///
/// Convention: `r_eci = Rz(+θ) r_ecef`, so the Greenwich meridian unit vector
/// at θ = π/2 maps to ECI +y.
pub fn ecef_eci_convert(v: &Vec3, epoch: Epoch, direction: Conversion) -> Result<Vec3, AstroError> {
    let (source, target, sign) = match direction {
        Conversion::EcefToEci => (Frame::Ecef, Frame::Eci, 1.0),
        Conversion::EciToEcef => (Frame::Eci, Frame::Ecef, -1.0),
    };
    if v.frame != source {
        return Err(AstroError::FrameMismatch {
            expected: source,
            found: v.frame,
        });
    }
    let theta = sign * earth_rotation_angle(epoch)?;
    Ok(rotate_z(v, theta, target))
}

pub(crate) fn rotate_z(v: &Vec3, theta: f64, target: Frame) -> Vec3 {
    let (s, c) = theta.sin_cos();
    Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z, target)
}

/// Mean solar elements at `epoch`: (mean longitude, ecliptic longitude,
/// obliquity), all radians.
fn solar_longitudes(epoch: Epoch) -> (f64, f64, f64) {
    let n = epoch.days_since_j2000();
    let mean_lon = (280.460 + 0.985_647_4 * n).rem_euclid(360.0);
    let g = (357.528 + 0.985_600_3 * n).rem_euclid(360.0).to_radians();
    let ecl_lon = mean_lon + 1.915 * g.sin() + 0.020 * (2.0 * g).sin();
    let obliquity = 23.439 - 0.000_000_4 * n;
    (
        mean_lon.to_radians(),
        ecl_lon.to_radians(),
        obliquity.to_radians(),
    )
}

/// Unit vector from Earth's center towards the Sun, ECI.
pub fn sun_direction_eci(epoch: Epoch) -> Result<Vec3, AstroError> {
    epoch.check_supported()?;
    let (_, lambda, eps) = solar_longitudes(epoch);
    let (sl, cl) = lambda.sin_cos();
    let (se, ce) = eps.sin_cos();
    Ok(Vec3::new(cl, ce * sl, se * sl, Frame::Eci))
}

/// Right ascension of the fictitious mean Sun, radians in [0, 2π).
///
/// Used to express the local time of an orbit's ascending node.
pub fn mean_sun_right_ascension(epoch: Epoch) -> f64 {
    solar_longitudes(epoch).0.rem_euclid(TAU)
}

/// Geometric elevation of the Sun above the site's horizon, degrees.
pub fn sun_elevation_at_station(station: &GroundStation, epoch: Epoch) -> Result<f64, AstroError> {
    let sun = sun_direction_eci(epoch)?;
    let sun_ecef = ecef_eci_convert(&sun, epoch, Conversion::EciToEcef)?;
    let s = sun_ecef.dot(&local_up(station))?.clamp(-1.0, 1.0);
    Ok(s.asin().to_degrees())
}

/// Wraps an angle in radians into [-π, π).
pub(crate) fn wrap_pi(angle: f64) -> f64 {
    (angle + PI).rem_euclid(TAU) - PI
}
