//! Mission-level simulator of satellite-to-ground entanglement distribution
//! between two optical ground stations.
//!
//! The pipeline per time step is: orbit propagation (or ephemeris
//! interpolation), station geometry, illumination and gating, the two-link
//! optical budget, and the coincidence/QBER/distillation model. Results are
//! aggregated into per-day KPIs.

pub mod astro;
pub mod config;
pub mod ephemeris;
pub mod geometry;
pub mod link;
pub mod orbit;
pub mod output;
pub mod presets;
pub mod quantum;
pub mod scenario;

pub use astro::{Epoch, Frame, GroundStation, Vec3};
pub use config::{load_config, parse_config, resolve_config, ConfigDocument, ConfigError, ResolvedConfig};
pub use ephemeris::{EphemerisError, EphemerisTable};
pub use geometry::{OperationMode, PassGeometry, TwilightRule};
pub use link::{DetectorKind, LinkParams};
pub use orbit::{OrbitElements, SatState};
pub use quantum::{CoincidenceResult, QuantumParams};
pub use scenario::{run_scenario, KpiSummary, RunOutput, SampleRecord, Scenario, Trajectory};
