//! Time-stepped simulation of one satellite and two ground stations, and the
//! per-day KPI aggregation.
//!
//! Sample `i` sits at `start + i·Δt` and depends on nothing but `i`, so the
//! timestep range can be split across any number of workers. Chunks are
//! reassembled in index order and aggregated sequentially, which keeps every
//! output bit-identical regardless of the worker count.

use std::sync::Arc;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::{
    earth_rotation_angle, rotate_z, sun_direction_eci, Epoch, Frame, GroundStation,
    SECONDS_PER_DAY,
};
use crate::ephemeris::EphemerisTable;
use crate::geometry::{
    communication_allowed, dual_visibility, look_from_ecef, night_condition, satellite_sunlit,
    IlluminationState, OperationMode, StationFrame, TwilightRule,
};
use crate::link::{channel_efficiency, from_db, link_attenuation, to_db, LinkParams};
use crate::orbit::{propagate, OrbitElements, SatState};
use crate::quantum::{evaluate_sample, CoincidenceResult, QuantumParams};

/// Samples per parallel work unit; fixed so chunking never depends on the
/// worker count.
const CHUNK_SAMPLES: u64 = 8_640;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("trajectory unavailable at {epoch}: {reason}")]
    Propagation { epoch: Epoch, reason: String },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// How attenuation is averaged over communication samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttenuationAveraging {
    /// Arithmetic mean of the dB values.
    #[default]
    Db,
    /// Arithmetic mean of the linear factors, then converted to dB.
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Elements(OrbitElements),
    Ephemeris {
        source: String,
        table: Arc<EphemerisTable>,
    },
}

impl Trajectory {
    pub fn position_at(&self, t: Epoch) -> Result<SatState, ScenarioError> {
        let res = match self {
            Trajectory::Elements(el) => propagate(el, t).map_err(|e| e.to_string()),
            Trajectory::Ephemeris { table, .. } => table.position_at(t).map_err(|e| e.to_string()),
        };
        res.map_err(|reason| ScenarioError::Propagation { epoch: t, reason })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub stations: [GroundStation; 2],
    pub trajectory: Trajectory,
    pub links: [LinkParams; 2],
    pub quantum: QuantumParams,
    pub beta_min_deg: f64,
    pub twilight: TwilightRule,
    pub operation: OperationMode,
    pub averaging: AttenuationAveraging,
    pub start: Epoch,
    pub step_s: f64,
    pub duration_days: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.step_s > 0.0 && self.step_s.is_finite()) {
            return bad(format!("time step {} s must be positive", self.step_s));
        }
        if !(self.duration_days >= 0.0 && self.duration_days.is_finite()) {
            return bad(format!("duration {} days must be non-negative", self.duration_days));
        }
        if !(0.0..90.0).contains(&self.beta_min_deg) {
            return bad(format!("minimum elevation {} outside [0, 90)", self.beta_min_deg));
        }
        for l in &self.links {
            l.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        self.quantum
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if let Trajectory::Elements(el) = &self.trajectory {
            el.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn sample_count(&self) -> u64 {
        (self.duration_days * SECONDS_PER_DAY / self.step_s + 1e-9).floor() as u64
    }

    pub fn epoch_of(&self, index: u64) -> Epoch {
        self.start.add_seconds(index as f64 * self.step_s)
    }

    /// Dual-link constant loss of both terminals and detectors, dB.
    pub fn system_loss_db(&self) -> f64 {
        -to_db(self.links[0].fixed_transmission()) - to_db(self.links[1].fixed_transmission())
    }

    pub fn summary_context(&self) -> SummaryContext {
        SummaryContext {
            step_s: self.step_s,
            duration_days: self.duration_days,
            system_loss_db: self.system_loss_db(),
            averaging: self.averaging,
        }
    }

    /// The same scenario restricted to `[start + offset, start + offset + days)`.
    pub fn window(&self, offset_days: f64, days: f64) -> Scenario {
        Scenario {
            start: self.start.add_days(offset_days),
            duration_days: days,
            ..self.clone()
        }
    }
}

/// One dual-visibility time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub index: u64,
    pub epoch: Epoch,
    pub elevation_deg: [f64; 2],
    pub range_km: [f64; 2],
    pub attenuation_db: [f64; 2],
    pub efficiency: [f64; 2],
    pub dual_vis: bool,
    pub night: bool,
    pub comm: bool,
    pub satellite_sunlit: bool,
    pub far_field_clamped: bool,
    pub coincidence: CoincidenceResult,
}

impl SampleRecord {
    pub fn dual_attenuation_db(&self, system_loss_db: f64) -> f64 {
        self.attenuation_db[0] + self.attenuation_db[1] + system_loss_db
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryContext {
    pub step_s: f64,
    pub duration_days: f64,
    pub system_loss_db: f64,
    pub averaging: AttenuationAveraging,
}

/// Scenario-level KPIs in the layout of the trade-study tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSummary {
    pub avg_dual_link_attenuation_db: Option<f64>,
    pub avg_atm_losses_db: Option<f64>,
    pub system_losses_db: f64,
    /// Mean of each link's attenuation over communication time, dB.
    pub avg_link_attenuation_db: [Option<f64>; 2],
    pub avg_dual_visibility_min_per_day: f64,
    pub avg_communication_min_per_day: f64,
    pub avg_raw_per_day: f64,
    pub avg_raw_unsifted_per_day: f64,
    pub avg_distilled_per_day: f64,
    pub avg_qber: Option<f64>,
    pub flagged_samples: u64,
    pub dual_visibility_samples: u64,
    pub communication_samples: u64,
    pub qber_samples: u64,
    pub step_s: f64,
    pub duration_days: f64,
    pub averaging: AttenuationAveraging,
}

/// Running sums behind a [`KpiSummary`].
#[derive(Debug, Clone, Default)]
pub struct KpiAccumulator {
    vis: u64,
    comm: u64,
    flagged: u64,
    qber_n: u64,
    att_db: [f64; 2],
    att_lin: [f64; 2],
    raw: f64,
    raw_unsifted: f64,
    distilled: f64,
    qber: f64,
}

impl KpiAccumulator {
    pub fn add(&mut self, s: &SampleRecord) {
        if s.dual_vis {
            self.vis += 1;
        }
        if !s.comm {
            return;
        }
        self.comm += 1;
        if s.far_field_clamped {
            self.flagged += 1;
        }
        for k in 0..2 {
            self.att_db[k] += s.attenuation_db[k];
            self.att_lin[k] += from_db(s.attenuation_db[k]);
        }
        self.raw += s.coincidence.raw_rate;
        self.raw_unsifted += s.coincidence.raw_rate_unsifted;
        self.distilled += s.coincidence.distilled_rate;
        if let Some(e) = s.coincidence.qber {
            self.qber += e;
            self.qber_n += 1;
        }
    }

    pub fn finish(&self, ctx: &SummaryContext) -> KpiSummary {
        let per_day = |sum: f64| {
            if ctx.duration_days > 0.0 {
                sum * ctx.step_s / ctx.duration_days
            } else {
                0.0
            }
        };
        let minutes_per_day = |n: u64| per_day(n as f64) / 60.0;
        let link_avg = |k: usize| {
            (self.comm > 0).then(|| match ctx.averaging {
                AttenuationAveraging::Db => self.att_db[k] / self.comm as f64,
                AttenuationAveraging::Linear => to_db(self.att_lin[k] / self.comm as f64),
            })
        };
        let links = [link_avg(0), link_avg(1)];
        let atm = links[0].zip(links[1]).map(|(a, b)| a + b);
        KpiSummary {
            avg_dual_link_attenuation_db: atm.map(|a| a + ctx.system_loss_db),
            avg_atm_losses_db: atm,
            system_losses_db: ctx.system_loss_db,
            avg_link_attenuation_db: links,
            avg_dual_visibility_min_per_day: minutes_per_day(self.vis),
            avg_communication_min_per_day: minutes_per_day(self.comm),
            avg_raw_per_day: per_day(self.raw),
            avg_raw_unsifted_per_day: per_day(self.raw_unsifted),
            avg_distilled_per_day: per_day(self.distilled),
            avg_qber: (self.qber_n > 0).then(|| self.qber / self.qber_n as f64),
            flagged_samples: self.flagged,
            dual_visibility_samples: self.vis,
            communication_samples: self.comm,
            qber_samples: self.qber_n,
            step_s: ctx.step_s,
            duration_days: ctx.duration_days,
            averaging: ctx.averaging,
        }
    }
}

/// Aggregates an ordered sample stream into per-day KPIs.
pub fn aggregate(samples: &[SampleRecord], ctx: &SummaryContext) -> KpiSummary {
    let mut acc = KpiAccumulator::default();
    for s in samples {
        acc.add(s);
    }
    acc.finish(ctx)
}

/// Duration-weighted merge of summaries of consecutive, disjoint runs with
/// the same step, system loss and averaging mode.
pub fn merge_summaries(parts: &[KpiSummary]) -> Option<KpiSummary> {
    let first = parts.first()?;
    let duration: f64 = parts.iter().map(|p| p.duration_days).sum();
    let total = |f: fn(&KpiSummary) -> f64| -> f64 {
        parts.iter().map(|p| f(p) * p.duration_days).sum::<f64>()
    };
    let per_day = |sum: f64| if duration > 0.0 { sum / duration } else { 0.0 };
    let comm: u64 = parts.iter().map(|p| p.communication_samples).sum();
    let qber_n: u64 = parts.iter().map(|p| p.qber_samples).sum();
    let averaging = first.averaging;
    let link = |k: usize| -> Option<f64> {
        if comm == 0 {
            return None;
        }
        let mut acc = 0.0;
        for p in parts {
            if let Some(v) = p.avg_link_attenuation_db[k] {
                let w = p.communication_samples as f64;
                acc += w * match averaging {
                    AttenuationAveraging::Db => v,
                    AttenuationAveraging::Linear => from_db(v),
                };
            }
        }
        let mean = acc / comm as f64;
        Some(match averaging {
            AttenuationAveraging::Db => mean,
            AttenuationAveraging::Linear => to_db(mean),
        })
    };
    let links = [link(0), link(1)];
    let atm = links[0].zip(links[1]).map(|(a, b)| a + b);
    let qber = (qber_n > 0).then(|| {
        parts
            .iter()
            .filter_map(|p| p.avg_qber.map(|q| q * p.qber_samples as f64))
            .sum::<f64>()
            / qber_n as f64
    });
    Some(KpiSummary {
        avg_dual_link_attenuation_db: atm.map(|a| a + first.system_losses_db),
        avg_atm_losses_db: atm,
        system_losses_db: first.system_losses_db,
        avg_link_attenuation_db: links,
        avg_dual_visibility_min_per_day: per_day(total(|p| p.avg_dual_visibility_min_per_day)),
        avg_communication_min_per_day: per_day(total(|p| p.avg_communication_min_per_day)),
        avg_raw_per_day: per_day(total(|p| p.avg_raw_per_day)),
        avg_raw_unsifted_per_day: per_day(total(|p| p.avg_raw_unsifted_per_day)),
        avg_distilled_per_day: per_day(total(|p| p.avg_distilled_per_day)),
        avg_qber: qber,
        flagged_samples: parts.iter().map(|p| p.flagged_samples).sum(),
        dual_visibility_samples: parts.iter().map(|p| p.dual_visibility_samples).sum(),
        communication_samples: comm,
        qber_samples: qber_n,
        step_s: first.step_s,
        duration_days: duration,
        averaging,
    })
}

/// Totals for one 24 h bin counted from the scenario start.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyTotals {
    pub day: u32,
    pub date: NaiveDate,
    pub dual_visibility_s: f64,
    pub communication_s: f64,
    pub raw: f64,
    pub distilled: f64,
}

pub fn daily_totals(samples: &[SampleRecord], start: Epoch, step_s: f64, duration_days: f64) -> Vec<DailyTotals> {
    let n_days = duration_days.max(0.0).ceil() as u32;
    let mut days: Vec<DailyTotals> = (0..n_days)
        .map(|d| DailyTotals {
            day: d,
            date: start.add_days(d as f64).calendar_date(),
            dual_visibility_s: 0.0,
            communication_s: 0.0,
            raw: 0.0,
            distilled: 0.0,
        })
        .collect();
    for s in samples {
        let d = ((s.index as f64 * step_s) / SECONDS_PER_DAY).floor() as usize;
        let Some(day) = days.get_mut(d) else { continue };
        if s.dual_vis {
            day.dual_visibility_s += step_s;
        }
        if s.comm {
            day.communication_s += step_s;
            day.raw += s.coincidence.raw_rate * step_s;
            day.distilled += s.coincidence.distilled_rate * step_s;
        }
    }
    days
}

/// A maximal run of consecutive days without communication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub first_day: u32,
    pub last_day: u32,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub length_days: u32,
}

pub fn gap_analysis(daily: &[DailyTotals]) -> Vec<Gap> {
    let mut gaps = Vec::new();
    let mut open: Option<&DailyTotals> = None;
    let close = |first: &DailyTotals, last: &DailyTotals| Gap {
        first_day: first.day,
        last_day: last.day,
        start: first.date,
        end: last.date,
        length_days: last.day - first.day + 1,
    };
    for (k, d) in daily.iter().enumerate() {
        match (open, d.communication_s > 0.0) {
            (None, false) => open = Some(d),
            (Some(first), true) => {
                gaps.push(close(first, &daily[k - 1]));
                open = None;
            }
            _ => {}
        }
    }
    if let (Some(first), Some(last)) = (open, daily.last()) {
        gaps.push(close(first, last));
    }
    gaps
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub samples: Vec<SampleRecord>,
    pub daily: Vec<DailyTotals>,
    pub summary: KpiSummary,
    pub gaps: Vec<Gap>,
}

impl RunOutput {
    pub fn communication_samples(&self) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(|s| s.comm)
    }
}

struct StepModel<'a> {
    scenario: &'a Scenario,
    frames: [StationFrame; 2],
}

impl StepModel<'_> {
    fn sample(&self, index: u64) -> Result<Option<SampleRecord>, ScenarioError> {
        let sc = self.scenario;
        let t = sc.epoch_of(index);
        let fail = |reason: String| ScenarioError::Propagation { epoch: t, reason };
        let sat = sc.trajectory.position_at(t)?;
        let theta = earth_rotation_angle(t).map_err(|e| fail(e.to_string()))?;
        let sat_ecef = rotate_z(&sat.position, -theta, Frame::Ecef);
        let g = [
            look_from_ecef(&self.frames[0], &sat_ecef),
            look_from_ecef(&self.frames[1], &sat_ecef),
        ];
        if !dual_visibility(&g[0], &g[1], sc.beta_min_deg) {
            return Ok(None);
        }

        let sun = sun_direction_eci(t).map_err(|e| fail(e.to_string()))?;
        let sun_ecef = rotate_z(&sun, -theta, Frame::Ecef);
        let sunlit = satellite_sunlit(&sat, &sun).map_err(|e| fail(e.to_string()))?;
        let dark = |f: &StationFrame| {
            let s = sun_ecef.x * f.up.x + sun_ecef.y * f.up.y + sun_ecef.z * f.up.z;
            sc.twilight.is_dark(s.clamp(-1.0, 1.0).asin().to_degrees())
        };
        let ill = IlluminationState {
            satellite_sunlit: sunlit,
            station_dark: [dark(&self.frames[0]), dark(&self.frames[1])],
        };
        let night = night_condition(&ill);
        let comm = communication_allowed(true, night, sc.operation);

        let mut attenuation_db = [0.0; 2];
        let mut efficiency = [0.0; 2];
        let mut clamped = false;
        for k in 0..2 {
            let a = link_attenuation(g[k].range_km, &sc.links[k], g[k].elevation_deg)
                .map_err(|e| fail(e.to_string()))?;
            attenuation_db[k] = a.db;
            efficiency[k] = channel_efficiency(a.linear, &sc.links[k]);
            clamped |= a.far_field_clamped;
        }
        let coincidence = evaluate_sample(efficiency[0], efficiency[1], &sc.quantum);

        Ok(Some(SampleRecord {
            index,
            epoch: t,
            elevation_deg: [g[0].elevation_deg, g[1].elevation_deg],
            range_km: [g[0].range_km, g[1].range_km],
            attenuation_db,
            efficiency,
            dual_vis: true,
            night,
            comm,
            satellite_sunlit: sunlit,
            far_field_clamped: clamped,
            coincidence,
        }))
    }

    fn chunk(&self, range: std::ops::Range<u64>) -> Result<Vec<SampleRecord>, ScenarioError> {
        let mut out = Vec::new();
        for i in range {
            if let Some(s) = self.sample(i)? {
                out.push(s);
            }
        }
        Ok(out)
    }
}

/// Runs the full time loop. `workers == 0` uses all available cores.
pub fn run_scenario(scenario: &Scenario, workers: usize) -> Result<RunOutput, ScenarioError> {
    scenario.validate()?;
    let model = StepModel {
        scenario,
        frames: [
            StationFrame::new(&scenario.stations[0]),
            StationFrame::new(&scenario.stations[1]),
        ],
    };
    let n = scenario.sample_count();
    let chunks: Vec<_> = (0..n.div_ceil(CHUNK_SAMPLES))
        .map(|c| c * CHUNK_SAMPLES..((c + 1) * CHUNK_SAMPLES).min(n))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ScenarioError::Pool(e.to_string()))?;
    let results: Vec<Result<Vec<SampleRecord>, ScenarioError>> =
        pool.install(|| chunks.into_par_iter().map(|r| model.chunk(r)).collect());

    let mut samples = Vec::new();
    for r in results {
        samples.extend(r?);
    }
    let summary = aggregate(&samples, &scenario.summary_context());
    let daily = daily_totals(&samples, scenario.start, scenario.step_s, scenario.duration_days);
    let gaps = gap_analysis(&daily);
    Ok(RunOutput {
        samples,
        daily,
        summary,
        gaps,
    })
}
