//! Built-in trade-study scenarios: three orbits, two wavelengths and two
//! detectors per wavelength, all between Paris and Nice.

use crate::astro::{mean_sun_right_ascension, Epoch};
use crate::config::{
    resolve_document, ConfigDocument, ConfigError, GatesDoc, LinkDoc, OrbitDoc, QuantumDoc,
    StationDoc, TimeDoc, DEFAULT_BETA_MIN_DEG, DEFAULT_DETECTORS_PER_STATION,
    DEFAULT_DURATION_DAYS, DEFAULT_START, DEFAULT_STEP_S,
};
use crate::link::DetectorKind;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitClass {
    Leo,
    Meo,
    Sso,
}

impl OrbitClass {
    pub const ALL: [OrbitClass; 3] = [OrbitClass::Leo, OrbitClass::Meo, OrbitClass::Sso];

    pub fn as_str(self) -> &'static str {
        match self {
            OrbitClass::Leo => "leo",
            OrbitClass::Meo => "meo",
            OrbitClass::Sso => "sso",
        }
    }

    fn altitude_km(self) -> f64 {
        match self {
            OrbitClass::Meo => 8_000.0,
            _ => 600.0,
        }
    }

    fn inclination_deg(self) -> f64 {
        match self {
            OrbitClass::Leo => 50.0,
            OrbitClass::Meo => 60.0,
            OrbitClass::Sso => 97.8,
        }
    }

    /// Transmit and receive aperture diameters, meters.
    fn apertures_m(self) -> (f64, f64) {
        match self {
            OrbitClass::Meo => (0.5, 1.0),
            _ => (0.3, 0.8),
        }
    }
}

/// Wavelength and detector pairings offered for each orbit.
const LINKS: [(u32, DetectorKind, &str); 4] = [
    (1550, DetectorKind::Snspd, "1550-snspd"),
    (1550, DetectorKind::IngaasApd, "1550-iga"),
    (810, DetectorKind::Snspd, "810-snspd"),
    (810, DetectorKind::SiApd, "810-si"),
];

pub fn preset_names() -> Vec<String> {
    OrbitClass::ALL
        .iter()
        .flat_map(|o| LINKS.iter().map(move |(_, _, tag)| format!("{}-{tag}", o.as_str())))
        .collect()
}

pub fn default_station_docs() -> Vec<StationDoc> {
    vec![
        StationDoc {
            name: Some("Paris".into()),
            latitude_deg: Some(48.85),
            longitude_deg: Some(2.35),
            altitude_m: Some(0.0),
        },
        StationDoc {
            name: Some("Nice".into()),
            latitude_deg: Some(43.7),
            longitude_deg: Some(7.25),
            altitude_m: Some(0.0),
        },
    ]
}

/// Right ascension of the ascending node putting it at local midnight on
/// `epoch`, degrees in [0, 360).
pub fn midnight_node_raan_deg(epoch: Epoch) -> f64 {
    (mean_sun_right_ascension(epoch).to_degrees() + 180.0).rem_euclid(360.0)
}

pub fn preset_document(name: &str) -> Option<ConfigDocument> {
    let (orbit_tag, link_tag) = name.split_once('-')?;
    let orbit = OrbitClass::ALL.into_iter().find(|o| o.as_str() == orbit_tag)?;
    let &(nm, detector, _) = LINKS.iter().find(|(_, _, tag)| *tag == link_tag)?;
    let infrared = nm == 1550;
    let (tx_d, rx_d) = orbit.apertures_m();
    let start = Epoch::parse_iso(DEFAULT_START).expect("valid default start");

    Some(ConfigDocument {
        preset: None,
        name: Some(name.to_string()),
        stations: Some(default_station_docs()),
        orbit: OrbitDoc {
            altitude_km: Some(orbit.altitude_km()),
            inclination_deg: Some(orbit.inclination_deg()),
            raan_deg: Some(match orbit {
                OrbitClass::Sso => midnight_node_raan_deg(start),
                _ => 0.0,
            }),
            eccentricity: Some(0.0),
            arg_perigee_deg: Some(0.0),
            mean_anomaly_deg: Some(0.0),
            ..Default::default()
        },
        link: LinkDoc {
            wavelength_nm: Some(nm as f64),
            tx_diameter_m: Some(tx_d),
            rx_diameter_m: Some(rx_d),
            zenith_attenuation_db: Some(if infrared { 2.0 } else { 3.0 }),
            tx_transmission: Some(0.8),
            rx_transmission: Some(0.8),
            optics_transmission: Some(if infrared { 0.35 } else { 0.2 }),
            pointing_loss: Some(if infrared { 0.2 } else { 0.3 }),
            detector: Some(detector.as_str().into()),
            ..Default::default()
        },
        quantum: QuantumDoc {
            mu: Some(0.02),
            window_ps: Some(200.0),
            sifting_q: Some(0.5),
            ec_efficiency_f: Some(1.22),
            e0: Some(0.5),
            ep: Some(0.01),
            dark_cps: Some(100.0),
            background_cps: Some(if infrared { 100.0 } else { 400.0 }),
            detectors_per_station: Some(DEFAULT_DETECTORS_PER_STATION),
        },
        gates: GatesDoc {
            beta_min: Some(DEFAULT_BETA_MIN_DEG),
            twilight: Some("astronomical".into()),
            operation: Some(if infrared { "day_and_night" } else { "night_only" }.into()),
            attenuation_averaging: Some("db".into()),
        },
        time: TimeDoc {
            start: Some(DEFAULT_START.into()),
            step_s: Some(DEFAULT_STEP_S),
            duration_days: Some(DEFAULT_DURATION_DAYS),
        },
    })
}

/// Resolved scenario for a preset name.
pub fn scenario(name: &str) -> Result<Scenario, ConfigError> {
    let doc = preset_document(name).ok_or_else(|| ConfigError::UnknownPreset(name.into()))?;
    resolve_document(doc, None).map(|r| r.scenario)
}
