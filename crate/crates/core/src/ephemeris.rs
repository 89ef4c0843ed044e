//! Tabulated satellite positions read from CSV.
//!
//! ```text
//! # frame: ECI
//! epoch,x_km,y_km,z_km
//! 2021-07-01T00:00:00.000Z,6978.137,0,0
//! ```
//!
//! A `frame` column may replace the comment declaration. ECEF tables are
//! rotated to ECI on load. Positions between rows come from a cubic Hermite
//! spline whose tangents are second-order finite differences.

use std::path::Path;

use thiserror::Error;

use crate::astro::{ecef_eci_convert, AstroError, Conversion, Epoch, Frame, Vec3, SECONDS_PER_DAY};
use crate::orbit::{propagate, OrbitElements, OrbitError, SatState};

/// Requests this close to a node return the node exactly.
const SNAP_S: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum EphemerisError {
    #[error("cannot read ephemeris: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("no frame declared; add a `# frame: ECI` line or a frame column")]
    MissingFrame,
    #[error("unknown frame {0:?}")]
    UnknownFrame(String),
    #[error("row {row}: frame {found} conflicts with {expected}")]
    MixedFrames { row: usize, expected: Frame, found: Frame },
    #[error("row {row}: {message}")]
    BadValue { row: usize, message: String },
    #[error("row {row}: epoch does not increase")]
    NonMonotonic { row: usize },
    #[error("at least two rows are required")]
    TooShort,
    #[error("{epoch} is outside the table span {first} .. {last}")]
    OutOfRange { epoch: Epoch, first: Epoch, last: Epoch },
    #[error(transparent)]
    Astro(#[from] AstroError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EphemerisTable {
    epochs: Vec<Epoch>,
    /// ECI kilometers.
    positions: Vec<[f64; 3]>,
    /// Tangents, km per second.
    tangents: Vec<[f64; 3]>,
    source_frame: Frame,
}

fn parse_frame(s: &str) -> Result<Frame, EphemerisError> {
    match s.trim().to_ascii_uppercase().as_str() {
        "ECI" => Ok(Frame::Eci),
        "ECEF" => Ok(Frame::Ecef),
        other => Err(EphemerisError::UnknownFrame(other.into())),
    }
}

impl EphemerisTable {
    /// Builds a table from rows given in `frame`.
    pub fn new(rows: Vec<(Epoch, [f64; 3])>, frame: Frame) -> Result<Self, EphemerisError> {
        if rows.len() < 2 {
            return Err(EphemerisError::TooShort);
        }
        let mut epochs = Vec::with_capacity(rows.len());
        let mut positions = Vec::with_capacity(rows.len());
        for (k, (t, p)) in rows.into_iter().enumerate() {
            if epochs.last().is_some_and(|prev: &Epoch| t <= *prev) {
                return Err(EphemerisError::NonMonotonic { row: k + 1 });
            }
            let v = Vec3::new(p[0], p[1], p[2], frame);
            let eci = match frame {
                Frame::Eci => v,
                Frame::Ecef => ecef_eci_convert(&v, t, Conversion::EcefToEci)?,
            };
            epochs.push(t);
            positions.push([eci.x, eci.y, eci.z]);
        }
        let tangents = finite_difference_tangents(&epochs, &positions);
        Ok(EphemerisTable {
            epochs,
            positions,
            tangents,
            source_frame: frame,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EphemerisError> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn parse_csv(text: &str) -> Result<Self, EphemerisError> {
        let mut declared: Option<Frame> = None;
        for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            let Some(value) = body
                .strip_prefix("frame")
                .map(|r| r.trim_start().trim_start_matches([':', '=']))
            else {
                continue;
            };
            let f = parse_frame(value)?;
            match declared {
                Some(d) if d != f => {
                    return Err(EphemerisError::MixedFrames {
                        row: 0,
                        expected: d,
                        found: f,
                    })
                }
                _ => declared = Some(f),
            }
        }

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| EphemerisError::MissingColumn(name.into()))
        };
        let idx = [column("epoch")?, column("x_km")?, column("y_km")?, column("z_km")?];
        let frame_col = headers.iter().position(|h| h == "frame");
        if declared.is_none() && frame_col.is_none() {
            return Err(EphemerisError::MissingFrame);
        }

        let mut frame = declared;
        let mut rows = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let row = k + 1;
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("");
            if let Some(c) = frame_col {
                let f = parse_frame(field(c))?;
                match frame {
                    Some(expected) if expected != f => {
                        return Err(EphemerisError::MixedFrames { row, expected, found: f })
                    }
                    _ => frame = Some(f),
                }
            }
            let epoch = Epoch::parse_iso(field(idx[0])).map_err(|e| EphemerisError::BadValue {
                row,
                message: e.to_string(),
            })?;
            let mut p = [0.0; 3];
            for (j, slot) in p.iter_mut().enumerate() {
                let s = field(idx[j + 1]);
                *slot = s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| EphemerisError::BadValue {
                        row,
                        message: format!("{:?} is not a finite number", s),
                    })?;
            }
            rows.push((epoch, p));
        }
        Self::new(rows, frame.ok_or(EphemerisError::MissingFrame)?)
    }

    /// ECI rows as CSV with 6-decimal kilometers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# frame: ECI\nepoch,x_km,y_km,z_km\n");
        for (t, p) in self.epochs.iter().zip(&self.positions) {
            out.push_str(&format!("{},{:.6},{:.6},{:.6}\n", t.to_iso(), p[0], p[1], p[2]));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn first_epoch(&self) -> Epoch {
        self.epochs[0]
    }

    pub fn last_epoch(&self) -> Epoch {
        self.epochs[self.epochs.len() - 1]
    }

    pub fn source_frame(&self) -> Frame {
        self.source_frame
    }

    pub fn rows(&self) -> impl Iterator<Item = (Epoch, [f64; 3])> + '_ {
        self.epochs.iter().copied().zip(self.positions.iter().copied())
    }

    pub fn position_at(&self, t: Epoch) -> Result<SatState, EphemerisError> {
        let (first, last) = (self.first_epoch(), self.last_epoch());
        let out_of_range = || EphemerisError::OutOfRange { epoch: t, first, last };
        if t.seconds_since(first) < -SNAP_S || t.seconds_since(last) > SNAP_S {
            return Err(out_of_range());
        }
        let at = |p: [f64; 3]| SatState {
            position: Vec3::new(p[0], p[1], p[2], Frame::Eci),
            epoch: t,
        };
        // Index of the first node after t, clamped so [k-1, k] is a valid interval.
        let k = self.epochs.partition_point(|e| *e <= t).clamp(1, self.len() - 1);
        let (t0, t1) = (self.epochs[k - 1], self.epochs[k]);
        if t.seconds_since(t0).abs() <= SNAP_S {
            return Ok(at(self.positions[k - 1]));
        }
        if t.seconds_since(t1).abs() <= SNAP_S {
            return Ok(at(self.positions[k]));
        }
        let h = t1.seconds_since(t0);
        let s = t.seconds_since(t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (p0, p1) = (self.positions[k - 1], self.positions[k]);
        let (m0, m1) = (self.tangents[k - 1], self.tangents[k]);
        let mut p = [0.0; 3];
        for j in 0..3 {
            p[j] = h00 * p0[j] + h10 * h * m0[j] + h01 * p1[j] + h11 * h * m1[j];
        }
        Ok(at(p))
    }
}

fn finite_difference_tangents(epochs: &[Epoch], positions: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = epochs.len();
    let slope = |a: usize, b: usize| {
        let h = epochs[b].seconds_since(epochs[a]);
        let mut m = [0.0; 3];
        for j in 0..3 {
            m[j] = (positions[b][j] - positions[a][j]) / h;
        }
        m
    };
    (0..n)
        .map(|k| {
            if n == 2 {
                slope(0, 1)
            } else if k == 0 || k == n - 1 {
                // Derivative of the quadratic through the three end nodes.
                let (a, b, c) = if k == 0 { (0, 1, 2) } else { (n - 3, n - 2, n - 1) };
                let h0 = epochs[b].seconds_since(epochs[a]);
                let h1 = epochs[c].seconds_since(epochs[b]);
                let (l, r) = (slope(a, b), slope(b, c));
                let mut m = [0.0; 3];
                for j in 0..3 {
                    m[j] = if k == 0 {
                        l[j] + (l[j] - r[j]) * h0 / (h0 + h1)
                    } else {
                        r[j] + (r[j] - l[j]) * h1 / (h0 + h1)
                    };
                }
                m
            } else {
                let h0 = epochs[k].seconds_since(epochs[k - 1]);
                let h1 = epochs[k + 1].seconds_since(epochs[k]);
                let (l, r) = (slope(k - 1, k), slope(k, k + 1));
                let mut m = [0.0; 3];
                for j in 0..3 {
                    m[j] = (h1 * l[j] + h0 * r[j]) / (h0 + h1);
                }
                m
            }
        })
        .collect()
}

/// Samples a propagated orbit every `step_s` seconds over `days` days.
pub fn tabulate(elements: &OrbitElements, start: Epoch, step_s: f64, days: f64) -> Result<EphemerisTable, EphemerisError> {
    let n = (days * SECONDS_PER_DAY / step_s + 1e-9).floor() as u64;
    let mut rows = Vec::with_capacity(n as usize + 1);
    for i in 0..=n {
        let t = start.add_seconds(i as f64 * step_s);
        let p = propagate(elements, t)?.position;
        rows.push((t, [p.x, p.y, p.z]));
    }
    EphemerisTable::new(rows, Frame::Eci)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn start() -> Epoch {
        Epoch::parse_iso("2021-07-01T00:00:00Z").unwrap()
    }

    fn leo() -> OrbitElements {
        OrbitElements::circular(600.0, 50.0, 0.0, 0.0, start()).unwrap()
    }

    #[test]
    fn nodes_are_exact() {
        let table = tabulate(&leo(), start(), 60.0, 0.1).unwrap();
        for (t, p) in table.rows() {
            let q = table.position_at(t).unwrap().position;
            assert_eq!([q.x, q.y, q.z], p);
        }
    }

    #[test]
    fn interpolation_tracks_the_orbit() {
        let el = leo();
        let table = tabulate(&el, start(), 30.0, 0.2).unwrap();
        for k in 0..500 {
            let t = start().add_seconds(7.3 + k as f64 * 31.1);
            let p = table.position_at(t).unwrap().position;
            let truth = propagate(&el, t).unwrap().position;
            assert!(p.sub(&truth).unwrap().norm() < 0.05, "at {t}");
        }
    }

    #[test]
    fn out_of_range_rejected() {
        let table = tabulate(&leo(), start(), 60.0, 0.1).unwrap();
        assert!(matches!(
            table.position_at(start().add_seconds(-10.0)),
            Err(EphemerisError::OutOfRange { .. })
        ));
        assert!(table.position_at(table.last_epoch().add_seconds(1.0)).is_err());
        assert!(table.position_at(start().add_seconds(-0.0005)).is_ok());
    }

    #[test]
    fn csv_round_trip_within_a_millimeter() {
        let table = tabulate(&leo(), start(), 10.0, 0.05).unwrap();
        let again = EphemerisTable::parse_csv(&table.to_csv()).unwrap();
        assert_eq!(again.len(), table.len());
        for ((ta, pa), (tb, pb)) in table.rows().zip(again.rows()) {
            assert!(ta.seconds_since(tb).abs() < 1e-3);
            for j in 0..3 {
                assert_abs_diff_eq!(pa[j], pb[j], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn ecef_rows_are_rotated() {
        let t = start();
        let text = format!(
            "# frame: ECEF\nepoch,x_km,y_km,z_km\n{},7000,0,0\n{},6999,10,0\n",
            t.to_iso(),
            t.add_seconds(1.0).to_iso()
        );
        let table = EphemerisTable::parse_csv(&text).unwrap();
        assert_eq!(table.source_frame(), Frame::Ecef);
        let p = table.position_at(t).unwrap().position;
        let expect = ecef_eci_convert(&Vec3::new(7000.0, 0.0, 0.0, Frame::Ecef), t, Conversion::EcefToEci).unwrap();
        assert_abs_diff_eq!(p.x, expect.x, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y, expect.y, epsilon = 1e-9);
    }

    #[test]
    fn frame_column_is_accepted() {
        let t = start();
        let text = format!(
            "epoch,x_km,y_km,z_km,frame\n{},7000,0,0,ECI\n{},7000,1,0,eci\n",
            t.to_iso(),
            t.add_seconds(1.0).to_iso()
        );
        assert_eq!(EphemerisTable::parse_csv(&text).unwrap().len(), 2);
    }

    #[test]
    fn malformed_tables() {
        let t = start();
        let (a, b) = (t.to_iso(), t.add_seconds(10.0).to_iso());
        let cases = [
            format!("# frame: ECI\nepoch,x_km,y_km,z_km\n{b},1,2,3\n{a},1,2,3\n"),
            format!("# frame: ECI\nepoch,x_km,y_km\n{a},1,2\n{b},1,2\n"),
            format!("epoch,x_km,y_km,z_km\n{a},1,2,3\n{b},1,2,3\n"),
            format!("epoch,x_km,y_km,z_km,frame\n{a},1,2,3,ECI\n{b},1,2,3,ECEF\n"),
            format!("# frame: ECI\nepoch,x_km,y_km,z_km\n{a},1,2,3\n{b},1,x,3\n"),
            format!("# frame: ECI\nepoch,x_km,y_km,z_km\n{a},1,2,3\n"),
        ];
        let errs: Vec<_> = cases.iter().map(|c| EphemerisTable::parse_csv(c).unwrap_err()).collect();
        assert!(matches!(errs[0], EphemerisError::NonMonotonic { row: 2 }));
        assert!(matches!(&errs[1], EphemerisError::MissingColumn(c) if c == "z_km"));
        assert!(matches!(errs[2], EphemerisError::MissingFrame));
        assert!(matches!(errs[3], EphemerisError::MixedFrames { row: 2, .. }));
        assert!(matches!(errs[4], EphemerisError::BadValue { row: 2, .. }));
        assert!(matches!(errs[5], EphemerisError::TooShort));
    }
}
