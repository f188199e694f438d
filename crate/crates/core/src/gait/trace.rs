use std::io::{Read, Write};
use std::path::Path;

use super::GaitError;

pub const TRACE_HEADER: [&str; 7] = [
    "time_s",
    "hip_angle_r_rad",
    "hip_angle_l_rad",
    "hip_vel_r_rads",
    "hip_vel_l_rads",
    "torque_r_nm",
    "torque_l_nm",
];
pub const TRACE_HEADER_WITH_FORCE: [&str; 9] = [
    "time_s",
    "hip_angle_r_rad",
    "hip_angle_l_rad",
    "hip_vel_r_rads",
    "hip_vel_l_rads",
    "torque_r_nm",
    "torque_l_nm",
    "foot_force_r_n",
    "foot_force_l_n",
];

/// Bilateral hip kinematics and torques on a uniform time grid. Index 0 is right, 1 is left.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaitTrace {
    pub time: Vec<f64>,
    pub hip_angle: [Vec<f64>; 2],
    pub hip_vel: [Vec<f64>; 2],
    pub torque: [Vec<f64>; 2],
    pub foot_force: Option<[Vec<f64>; 2]>,
}

impl GaitTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// Hz, from the first and last timestamps.
    pub fn sample_rate(&self) -> f64 {
        let n = self.time.len();
        if n < 2 {
            return 0.0;
        }
        (n - 1) as f64 / (self.time[n - 1] - self.time[0])
    }

    pub fn validate(&self) -> Result<(), GaitError> {
        let n = self.time.len();
        if n < 2 {
            return Err(GaitError::Schema("need at least two samples".into()));
        }
        let mut cols: Vec<&Vec<f64>> = vec![
            &self.hip_angle[0],
            &self.hip_angle[1],
            &self.hip_vel[0],
            &self.hip_vel[1],
            &self.torque[0],
            &self.torque[1],
        ];
        if let Some(f) = &self.foot_force {
            cols.push(&f[0]);
            cols.push(&f[1]);
        }
        if cols.iter().any(|c| c.len() != n) {
            return Err(GaitError::Schema("columns have different lengths".into()));
        }
        if cols.iter().flat_map(|c| c.iter()).chain(&self.time).any(|v| !v.is_finite()) {
            return Err(GaitError::Schema("non-finite value".into()));
        }
        let dt = (self.time[n - 1] - self.time[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(GaitError::Schema("time must increase".into()));
        }
        for w in self.time.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - dt).abs() > 0.01 * dt {
                return Err(GaitError::Schema("time grid must be uniform and increasing".into()));
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self, GaitError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let with_force = if header == TRACE_HEADER {
            false
        } else if header == TRACE_HEADER_WITH_FORCE {
            true
        } else {
            return Err(GaitError::Schema(format!(
                "unexpected header {:?}; expected {}",
                header.join(","),
                TRACE_HEADER_WITH_FORCE.join(",")
            )));
        };
        let mut t = GaitTrace::default();
        let mut force = [Vec::new(), Vec::new()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| GaitError::Schema(format!("row {}: {e}", line + 2)))?;
            if vals.len() != header.len() {
                return Err(GaitError::Schema(format!("row {}: wrong column count", line + 2)));
            }
            t.time.push(vals[0]);
            for s in 0..2 {
                t.hip_angle[s].push(vals[1 + s]);
                t.hip_vel[s].push(vals[3 + s]);
                t.torque[s].push(vals[5 + s]);
                if with_force {
                    force[s].push(vals[7 + s]);
                }
            }
        }
        if with_force {
            t.foot_force = Some(force);
        }
        t.validate()?;
        Ok(t)
    }

    pub fn read_csv(path: &Path) -> Result<Self, GaitError> {
        Self::read_from(std::fs::File::open(path)?)
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<(), GaitError> {
        let mut w = csv::Writer::from_writer(writer);
        match &self.foot_force {
            Some(_) => w.write_record(TRACE_HEADER_WITH_FORCE)?,
            None => w.write_record(TRACE_HEADER)?,
        }
        for i in 0..self.len() {
            let mut row = vec![
                self.time[i],
                self.hip_angle[0][i],
                self.hip_angle[1][i],
                self.hip_vel[0][i],
                self.hip_vel[1][i],
                self.torque[0][i],
                self.torque[1][i],
            ];
            if let Some(f) = &self.foot_force {
                row.push(f[0][i]);
                row.push(f[1][i]);
            }
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), GaitError> {
        self.write_to(std::fs::File::create(path)?)
    }

    /// Same samples stretched in time by `factor`; velocities scale by its inverse.
    pub fn time_scaled(&self, factor: f64) -> Self {
        let t0 = self.time.first().copied().unwrap_or(0.0);
        let mut out = self.clone();
        out.time = self.time.iter().map(|t| t0 + (t - t0) * factor).collect();
        for s in 0..2 {
            out.hip_vel[s] = self.hip_vel[s].iter().map(|v| v / factor).collect();
        }
        out
    }
}
