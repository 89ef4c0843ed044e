//! JSON scenario configuration.
//!
//! A document may name a `preset`; its own fields then override the preset's
//! field by field (arrays are replaced whole). After merging, defaults are
//! filled in and the result is validated into a [`Scenario`]. The filled-in
//! document is the "resolved" configuration: parsing it again yields the same
//! scenario.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use serde_with::skip_serializing_none;
use thiserror::Error;

use crate::astro::{Epoch, GroundStation};
use crate::ephemeris::{EphemerisError, EphemerisTable};
use crate::geometry::{OperationMode, TwilightRule};
use crate::link::{DetectorKind, LinkParams, DEFAULT_FRIED_PARAMETER_M};
use crate::orbit::{OrbitElements, EARTH_RADIUS_KM};
use crate::presets;
use crate::quantum::QuantumParams;
use crate::scenario::{AttenuationAveraging, Scenario, Trajectory};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {message}")]
    Range { path: String, message: String },
    #[error("{path}: required value is missing")]
    Missing { path: String },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Ephemeris {
        path: String,
        #[source]
        source: EphemerisError,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    /// Dotted location of the offending key, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Parse { path, .. }
            | ConfigError::Range { path, .. }
            | ConfigError::Missing { path }
            | ConfigError::Ephemeris { path, .. } => Some(path),
            _ => None,
        }
    }
}

#[skip_serializing_none]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub stations: Option<Vec<StationDoc>>,
    #[serde(default)]
    pub orbit: OrbitDoc,
    #[serde(default)]
    pub link: LinkDoc,
    #[serde(default)]
    pub quantum: QuantumDoc,
    #[serde(default)]
    pub gates: GatesDoc,
    #[serde(default)]
    pub time: TimeDoc,
}

#[skip_serializing_none]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationDoc {
    pub name: Option<String>,
    pub latitude_deg: Option<f64>,
    pub longitude_deg: Option<f64>,
    pub altitude_m: Option<f64>,
}

#[skip_serializing_none]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitDoc {
    pub altitude_km: Option<f64>,
    pub semi_major_axis_km: Option<f64>,
    pub eccentricity: Option<f64>,
    pub inclination_deg: Option<f64>,
    pub raan_deg: Option<f64>,
    pub arg_perigee_deg: Option<f64>,
    pub mean_anomaly_deg: Option<f64>,
    /// Element epoch; defaults to the simulation start.
    pub epoch: Option<String>,
    /// Tabulated trajectory file; replaces the elements when set.
    pub ephemeris: Option<String>,
}

#[skip_serializing_none]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub wavelength_nm: Option<f64>,
    pub tx_diameter_m: Option<f64>,
    pub rx_diameter_m: Option<f64>,
    pub zenith_attenuation_db: Option<f64>,
    pub tx_transmission: Option<f64>,
    pub rx_transmission: Option<f64>,
    pub optics_transmission: Option<f64>,
    pub pointing_loss: Option<f64>,
    pub detector: Option<String>,
    /// Overrides the detector's tabulated efficiency.
    pub pde: Option<f64>,
    pub fried_parameter_m: Option<f64>,
}

#[skip_serializing_none]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumDoc {
    pub mu: Option<f64>,
    pub window_ps: Option<f64>,
    pub sifting_q: Option<f64>,
    pub ec_efficiency_f: Option<f64>,
    pub e0: Option<f64>,
    pub ep: Option<f64>,
    pub dark_cps: Option<f64>,
    pub background_cps: Option<f64>,
    pub detectors_per_station: Option<u32>,
}

#[skip_serializing_none]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatesDoc {
    pub beta_min: Option<f64>,
    pub twilight: Option<String>,
    pub operation: Option<String>,
    pub attenuation_averaging: Option<String>,
}

#[skip_serializing_none]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeDoc {
    pub start: Option<String>,
    pub step_s: Option<f64>,
    pub duration_days: Option<f64>,
}

impl ConfigDocument {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config documents always serialize")
    }
}

/// A validated scenario and the fully explicit document it came from.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub document: ConfigDocument,
}

pub const DEFAULT_START: &str = "2021-07-01T00:00:00Z";
pub const DEFAULT_STEP_S: f64 = 10.0;
pub const DEFAULT_DURATION_DAYS: f64 = 365.0;
pub const DEFAULT_BETA_MIN_DEG: f64 = 30.0;
pub const DEFAULT_DETECTORS_PER_STATION: u32 = 4;

/// Parses and resolves a configuration; relative ephemeris paths are taken
/// from the working directory.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    resolve_config(text, None).map(|r| r.scenario)
}

pub fn load_config(path: &Path) -> Result<ResolvedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    resolve_config(&text, path.parent())
}

pub fn resolve_config(text: &str, base_dir: Option<&Path>) -> Result<ResolvedConfig, ConfigError> {
    let user: ConfigDocument = strict_parse(text)?;
    let mut merged = match &user.preset {
        Some(name) => {
            let doc = presets::preset_document(name)
                .ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?;
            serde_json::to_value(doc).expect("serializable")
        }
        None => Value::Object(Default::default()),
    };
    let mut overlay = serde_json::to_value(&user).expect("serializable");
    if let Value::Object(map) = &mut overlay {
        map.remove("preset");
    }
    merge_values(&mut merged, overlay);
    let mut doc: ConfigDocument = serde_json::from_value(merged).map_err(|e| ConfigError::Parse {
        path: ".".into(),
        message: e.to_string(),
    })?;
    if doc.name.is_none() {
        doc.name = Some(user.preset.clone().unwrap_or_else(|| "custom".into()));
    }
    resolve_document(doc, base_dir)
}

/// Fills defaults into an already merged document and builds its scenario.
pub fn resolve_document(mut doc: ConfigDocument, base_dir: Option<&Path>) -> Result<ResolvedConfig, ConfigError> {
    fill_defaults(&mut doc, base_dir)?;
    let scenario = build_scenario(&doc)?;
    Ok(ResolvedConfig {
        scenario,
        document: doc,
    })
}

fn strict_parse(text: &str) -> Result<ConfigDocument, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn merge_values(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                if v.is_null() {
                    continue;
                }
                match b.get_mut(&k) {
                    Some(slot) => merge_values(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn fill_defaults(doc: &mut ConfigDocument, base_dir: Option<&Path>) -> Result<(), ConfigError> {
    doc.preset = None;
    doc.name.get_or_insert_with(|| "custom".into());
    let stations = doc.stations.get_or_insert_with(presets::default_station_docs);
    for s in stations.iter_mut() {
        s.altitude_m.get_or_insert(0.0);
    }

    let t = &mut doc.time;
    t.start.get_or_insert_with(|| DEFAULT_START.into());
    t.step_s.get_or_insert(DEFAULT_STEP_S);
    t.duration_days.get_or_insert(DEFAULT_DURATION_DAYS);

    let o = &mut doc.orbit;
    if let Some(file) = &o.ephemeris {
        let p = PathBuf::from(file);
        if p.is_relative() {
            if let Some(dir) = base_dir {
                o.ephemeris = Some(dir.join(p).display().to_string());
            }
        }
    } else {
        if o.semi_major_axis_km.is_none() {
            if let Some(h) = o.altitude_km.take() {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(ConfigError::Range {
                        path: "orbit.altitude_km".into(),
                        message: format!("{h} is out of range, expected > 0"),
                    });
                }
                o.semi_major_axis_km = Some(EARTH_RADIUS_KM + h);
            }
        }
        o.altitude_km = None;
        o.eccentricity.get_or_insert(0.0);
        o.raan_deg.get_or_insert(0.0);
        o.arg_perigee_deg.get_or_insert(0.0);
        o.mean_anomaly_deg.get_or_insert(0.0);
        o.epoch.get_or_insert_with(|| doc.time.start.clone().unwrap_or_default());
    }

    let l = &mut doc.link;
    l.fried_parameter_m.get_or_insert(DEFAULT_FRIED_PARAMETER_M);
    if let Some(d) = &l.detector {
        let kind = parse_detector(d)?;
        l.detector = Some(kind.as_str().into());
        if l.pde.is_none() {
            l.pde = kind.preset().map(|p| p.pde);
        }
    }

    doc.quantum
        .detectors_per_station
        .get_or_insert(DEFAULT_DETECTORS_PER_STATION);

    let g = &mut doc.gates;
    g.beta_min.get_or_insert(DEFAULT_BETA_MIN_DEG);
    let twilight = match &g.twilight {
        Some(s) => parse_twilight(s)?,
        None => TwilightRule::default(),
    };
    g.twilight = Some(twilight.as_str().into());
    let operation = match &g.operation {
        Some(s) => parse_operation(s)?,
        None => match doc.link.wavelength_nm {
            Some(nm) if nm > 1000.0 => OperationMode::DayAndNight,
            _ => OperationMode::NightOnly,
        },
    };
    g.operation = Some(operation.as_str().into());
    let averaging = match &g.attenuation_averaging {
        Some(s) => parse_averaging(s)?,
        None => AttenuationAveraging::default(),
    };
    g.attenuation_averaging = Some(averaging_str(averaging).into());
    Ok(())
}

fn parse_detector(s: &str) -> Result<DetectorKind, ConfigError> {
    s.parse().map_err(|message| ConfigError::Parse {
        path: "link.detector".into(),
        message,
    })
}

fn parse_twilight(s: &str) -> Result<TwilightRule, ConfigError> {
    s.parse().map_err(|message| ConfigError::Parse {
        path: "gates.twilight".into(),
        message,
    })
}

fn parse_operation(s: &str) -> Result<OperationMode, ConfigError> {
    match s {
        "night_only" => Ok(OperationMode::NightOnly),
        "day_and_night" => Ok(OperationMode::DayAndNight),
        other => Err(ConfigError::Parse {
            path: "gates.operation".into(),
            message: format!("unknown operation mode {other:?} (night_only, day_and_night)"),
        }),
    }
}

fn parse_averaging(s: &str) -> Result<AttenuationAveraging, ConfigError> {
    match s {
        "db" => Ok(AttenuationAveraging::Db),
        "linear" => Ok(AttenuationAveraging::Linear),
        other => Err(ConfigError::Parse {
            path: "gates.attenuation_averaging".into(),
            message: format!("unknown averaging {other:?} (db, linear)"),
        }),
    }
}

fn averaging_str(a: AttenuationAveraging) -> &'static str {
    match a {
        AttenuationAveraging::Db => "db",
        AttenuationAveraging::Linear => "linear",
    }
}

struct Checker<'a> {
    section: &'a str,
}

impl Checker<'_> {
    fn path(&self, key: &str) -> String {
        format!("{}.{}", self.section, key)
    }

    fn need<T: Clone>(&self, key: &str, v: &Option<T>) -> Result<T, ConfigError> {
        v.clone().ok_or_else(|| ConfigError::Missing { path: self.path(key) })
    }

    fn range(&self, key: &str, v: &Option<f64>, ok: impl Fn(f64) -> bool, expect: &str) -> Result<f64, ConfigError> {
        let x = self.need(key, v)?;
        if x.is_finite() && ok(x) {
            Ok(x)
        } else {
            Err(ConfigError::Range {
                path: self.path(key),
                message: format!("{x} is out of range, expected {expect}"),
            })
        }
    }

    fn epoch(&self, key: &str, v: &Option<String>) -> Result<Epoch, ConfigError> {
        let s = self.need(key, v)?;
        Epoch::parse_iso(&s)
            .and_then(|e| e.check_supported())
            .map_err(|e| ConfigError::Range {
                path: self.path(key),
                message: e.to_string(),
            })
    }
}

fn build_scenario(doc: &ConfigDocument) -> Result<Scenario, ConfigError> {
    let time = Checker { section: "time" };
    let start = time.epoch("start", &doc.time.start)?;
    let step_s = time.range("step_s", &doc.time.step_s, |x| x > 0.0, "> 0")?;
    let duration_days = time.range("duration_days", &doc.time.duration_days, |x| x >= 0.0, ">= 0")?;
    start
        .add_days(duration_days)
        .check_supported()
        .map_err(|e| ConfigError::Range {
            path: "time.duration_days".into(),
            message: format!("simulation end: {e}"),
        })?;

    let stations = build_stations(doc.stations.as_deref().unwrap_or_default())?;

    let o = Checker { section: "orbit" };
    let trajectory = match &doc.orbit.ephemeris {
        Some(file) => {
            let table = EphemerisTable::load(Path::new(file)).map_err(|source| ConfigError::Ephemeris {
                path: "orbit.ephemeris".into(),
                source,
            })?;
            Trajectory::Ephemeris {
                source: file.clone(),
                table: Arc::new(table),
            }
        }
        None => {
            let a = o.range("semi_major_axis_km", &doc.orbit.semi_major_axis_km, |x| x > EARTH_RADIUS_KM, "above the Earth's surface")?;
            let e = o.range("eccentricity", &doc.orbit.eccentricity, |x| (0.0..1.0).contains(&x), "[0, 1)")?;
            if a * (1.0 - e) <= EARTH_RADIUS_KM {
                return Err(ConfigError::Range {
                    path: "orbit.eccentricity".into(),
                    message: format!("perigee radius {:.1} km is inside the Earth", a * (1.0 - e)),
                });
            }
            let inc = o.range("inclination_deg", &doc.orbit.inclination_deg, |x| (0.0..=180.0).contains(&x), "[0, 180]")?;
            let raan = o.range("raan_deg", &doc.orbit.raan_deg, |_| true, "a finite angle")?;
            let argp = o.range("arg_perigee_deg", &doc.orbit.arg_perigee_deg, |_| true, "a finite angle")?;
            let m0 = o.range("mean_anomaly_deg", &doc.orbit.mean_anomaly_deg, |_| true, "a finite angle")?;
            let epoch0 = o.epoch("epoch", &doc.orbit.epoch)?;
            let el = OrbitElements::new(a, e, inc, raan, argp, m0, epoch0).map_err(|err| ConfigError::Range {
                path: "orbit".into(),
                message: err.to_string(),
            })?;
            Trajectory::Elements(el)
        }
    };

    let l = Checker { section: "link" };
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    let positive = |x: f64| x > 0.0;
    let detector = parse_detector(&l.need("detector", &doc.link.detector)?)?;
    let link = LinkParams {
        wavelength_m: l.range("wavelength_nm", &doc.link.wavelength_nm, positive, "> 0")? * 1e-9,
        tx_diameter_m: l.range("tx_diameter_m", &doc.link.tx_diameter_m, positive, "> 0")?,
        rx_diameter_m: l.range("rx_diameter_m", &doc.link.rx_diameter_m, positive, "> 0")?,
        zenith_attenuation_db: l.range("zenith_attenuation_db", &doc.link.zenith_attenuation_db, |x| x >= 0.0, ">= 0")?,
        tx_transmission: l.range("tx_transmission", &doc.link.tx_transmission, unit, "[0, 1]")?,
        rx_transmission: l.range("rx_transmission", &doc.link.rx_transmission, unit, "[0, 1]")?,
        optics_transmission: l.range("optics_transmission", &doc.link.optics_transmission, unit, "[0, 1]")?,
        pointing_loss: l.range("pointing_loss", &doc.link.pointing_loss, |x| (0.0..1.0).contains(&x), "[0, 1)")?,
        pde: l.range("pde", &doc.link.pde, |x| x > 0.0 && x <= 1.0, "(0, 1]")?,
        fried_parameter_m: l.range("fried_parameter_m", &doc.link.fried_parameter_m, positive, "> 0")?,
        detector,
    };

    let q = Checker { section: "quantum" };
    let qd = &doc.quantum;
    let quantum = QuantumParams {
        mu: q.range("mu", &qd.mu, positive, "> 0")?,
        window_s: q.range("window_ps", &qd.window_ps, positive, "> 0")? * 1e-12,
        sifting: q.range("sifting_q", &qd.sifting_q, |x| x > 0.0 && x <= 1.0, "(0, 1]")?,
        ec_efficiency: q.range("ec_efficiency_f", &qd.ec_efficiency_f, |x| x >= 1.0, ">= 1")?,
        e0: q.range("e0", &qd.e0, |x| (0.0..=0.5).contains(&x), "[0, 0.5]")?,
        ep: q.range("ep", &qd.ep, |x| (0.0..=0.5).contains(&x), "[0, 0.5]")?,
        dark_count_cps: q.range("dark_cps", &qd.dark_cps, |x| x >= 0.0, ">= 0")?,
        background_cps: q.range("background_cps", &qd.background_cps, |x| x >= 0.0, ">= 0")?,
        detectors_per_station: match q.need("detectors_per_station", &qd.detectors_per_station)? {
            0 => {
                return Err(ConfigError::Range {
                    path: "quantum.detectors_per_station".into(),
                    message: "at least one detector is required".into(),
                })
            }
            n => n,
        },
    };
    if quantum.noise_probability() >= 1.0 {
        return Err(ConfigError::Range {
            path: "quantum".into(),
            message: "noise click probability per window reaches 1".into(),
        });
    }

    let g = Checker { section: "gates" };
    let beta_min_deg = g.range("beta_min", &doc.gates.beta_min, |x| (0.0..90.0).contains(&x), "[0, 90)")?;

    Ok(Scenario {
        name: doc.name.clone().unwrap_or_default(),
        stations,
        trajectory,
        links: [link, link],
        quantum,
        beta_min_deg,
        twilight: parse_twilight(&g.need("twilight", &doc.gates.twilight)?)?,
        operation: parse_operation(&g.need("operation", &doc.gates.operation)?)?,
        averaging: parse_averaging(&g.need("attenuation_averaging", &doc.gates.attenuation_averaging)?)?,
        start,
        step_s,
        duration_days,
    })
}

fn build_stations(docs: &[StationDoc]) -> Result<[GroundStation; 2], ConfigError> {
    if docs.len() != 2 {
        return Err(ConfigError::Range {
            path: "stations".into(),
            message: format!("exactly two stations are required, found {}", docs.len()),
        });
    }
    let build = |k: usize| -> Result<GroundStation, ConfigError> {
        let section = format!("stations[{k}]");
        let c = Checker { section: &section };
        let d = &docs[k];
        let lat = c.range("latitude_deg", &d.latitude_deg, |x| (-90.0..=90.0).contains(&x), "[-90, 90]")?;
        let lon = c.range("longitude_deg", &d.longitude_deg, |_| true, "a finite angle")?;
        let alt = c.range("altitude_m", &d.altitude_m, |x| x > -500.0 && x < 9_000.0, "(-500, 9000) m")?;
        let name = d.name.clone().unwrap_or_else(|| format!("station {}", k + 1));
        GroundStation::new(&name, lat, lon, alt).map_err(|e| ConfigError::Range {
            path: section.clone(),
            message: e.to_string(),
        })
    };
    Ok([build(0)?, build(1)?])
}
