//! Phase-indexed reference gait for the imitation terms.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::RewardError;
use crate::dynamics::dof;

/// Joints tracked by the imitation terms.
pub const TRACKED_JOINTS: [&str; 7] = [
    "pelvis_pitch",
    "hip_r",
    "knee_r",
    "ankle_r",
    "hip_l",
    "knee_l",
    "ankle_l",
];

/// Generalized coordinate of each tracked joint.
pub const TRACKED_DOFS: [usize; 7] = [
    dof::PELVIS_PITCH,
    dof::HIP_R,
    dof::KNEE_R,
    dof::ANKLE_R,
    dof::HIP_L,
    dof::KNEE_L,
    dof::ANKLE_L,
];

/// Samples over one cycle at phases `k / n`; phase 1 wraps to phase 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceGait {
    angles: Vec<[f64; 7]>,
    velocities: Vec<[f64; 7]>,
    pelvis_speed: f64,
    cycle_duration: f64,
}

/// Periodic Gaussian bump centred at `c` with width `s`, and its phase derivative.
fn bump(phase: f64, c: f64, s: f64) -> (f64, f64) {
    let d = (phase - c + 0.5).rem_euclid(1.0) - 0.5;
    let v = (-0.5 * d * d / (s * s)).exp();
    (v, -d / (s * s) * v)
}

/// Right-leg joint angles and phase derivatives; phase 0 is peak hip flexion.
fn normative(phase: f64) -> ([f64; 4], [f64; 4]) {
    let w = 2.0 * PI;
    let pitch = 0.02 * (2.0 * w * phase).cos();
    let dpitch = -0.02 * 2.0 * w * (2.0 * w * phase).sin();
    let hip = 0.15 + 0.4 * (w * phase).cos();
    let dhip = -0.4 * w * (w * phase).sin();
    let (k1, dk1) = bump(phase, 0.25, 0.08);
    let (k2, dk2) = bump(phase, 0.8, 0.1);
    let knee = 0.05 + 0.25 * k1 + 1.0 * k2;
    let dknee = 0.25 * dk1 + 1.0 * dk2;
    let (a1, da1) = bump(phase, 0.4, 0.1);
    let (a2, da2) = bump(phase, 0.6, 0.05);
    let ankle = 0.1 * a1 - 0.35 * a2;
    let dankle = 0.1 * da1 - 0.35 * da2;
    ([pitch, hip, knee, ankle], [dpitch, dhip, dknee, dankle])
}

impl ReferenceGait {
    /// Smooth normative walking pattern; the left leg lags the right by half a cycle.
    pub fn parametric(cycle_duration: f64, pelvis_speed: f64, samples: usize) -> Self {
        let mut angles = Vec::with_capacity(samples);
        let mut velocities = Vec::with_capacity(samples);
        for k in 0..samples {
            let phase = k as f64 / samples as f64;
            let (r, dr) = normative(phase);
            let (l, dl) = normative((phase + 0.5).rem_euclid(1.0));
            angles.push([r[0], r[1], r[2], r[3], l[1], l[2], l[3]]);
            velocities.push(
                [dr[0], dr[1], dr[2], dr[3], dl[1], dl[2], dl[3]].map(|v| v / cycle_duration),
            );
        }
        Self {
            angles,
            velocities,
            pelvis_speed,
            cycle_duration,
        }
    }

    /// Parse `phase,<joint>_angle,<joint>_vel,...` for every tracked joint.
    ///
    /// Rows must be sorted by phase starting at 0. A trailing phase-1 row must repeat
    /// the phase-0 row.
    pub fn from_csv<R: Read>(
        reader: R,
        cycle_duration: f64,
        pelvis_speed: f64,
    ) -> Result<Self, RewardError> {
        let bad = |m: String| RewardError::InvalidReference(m);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| bad(format!("missing column {name}")))
        };
        let phase_col = col("phase")?;
        let mut angle_cols = [0; 7];
        let mut vel_cols = [0; 7];
        for (j, name) in TRACKED_JOINTS.iter().enumerate() {
            angle_cols[j] = col(&format!("{name}_angle"))?;
            vel_cols[j] = col(&format!("{name}_vel"))?;
        }
        let mut phases = Vec::new();
        let mut angles = Vec::new();
        let mut velocities = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |c: usize| -> Result<f64, RewardError> {
                rec.get(c)
                    .ok_or_else(|| bad("short row".into()))?
                    .parse::<f64>()
                    .map_err(|e| bad(e.to_string()))
            };
            phases.push(num(phase_col)?);
            let mut a = [0.0; 7];
            let mut v = [0.0; 7];
            for j in 0..7 {
                a[j] = num(angle_cols[j])?;
                v[j] = num(vel_cols[j])?;
            }
            angles.push(a);
            velocities.push(v);
        }
        if phases.len() < 2 || phases[0] != 0.0 {
            return Err(bad("need at least two rows starting at phase 0".into()));
        }
        if phases.windows(2).any(|w| !(w[1] > w[0])) || *phases.last().unwrap() > 1.0 {
            return Err(bad("phases must increase within [0, 1]".into()));
        }
        if *phases.last().unwrap() == 1.0 {
            let (a_end, v_end) = (angles.pop().unwrap(), velocities.pop().unwrap());
            phases.pop();
            let same = |x: &[f64; 7], y: &[f64; 7]| x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-9);
            if !same(&a_end, &angles[0]) || !same(&v_end, &velocities[0]) {
                return Err(bad("phase 1 row must equal phase 0 row".into()));
            }
        }
        let n = phases.len();
        if phases
            .iter()
            .enumerate()
            .any(|(k, p)| (p - k as f64 / n as f64).abs() > 1e-6)
        {
            return Err(bad("phases must be uniformly spaced".into()));
        }
        if !(pelvis_speed > 0.0) || !(cycle_duration > 0.0) {
            return Err(bad("pelvis speed and cycle duration must be positive".into()));
        }
        Ok(Self {
            angles,
            velocities,
            pelvis_speed,
            cycle_duration,
        })
    }

    pub fn pelvis_speed(&self) -> f64 {
        self.pelvis_speed
    }

    pub fn cycle_duration(&self) -> f64 {
        self.cycle_duration
    }

    /// Velocity scale that maps the reference to walking at `v_star`.
    pub fn speed_scale(&self, v_star: f64) -> f64 {
        v_star / self.pelvis_speed
    }

    pub fn phase_at(&self, time: f64, phase_offset: f64) -> f64 {
        (time / self.cycle_duration + phase_offset).rem_euclid(1.0)
    }

    fn interp(table: &[[f64; 7]], phase: f64) -> [f64; 7] {
        let n = table.len();
        let x = phase.rem_euclid(1.0) * n as f64;
        let i = (x.floor() as usize).min(n - 1);
        let f = x - i as f64;
        let (a, b) = (&table[i], &table[(i + 1) % n]);
        std::array::from_fn(|j| a[j] + f * (b[j] - a[j]))
    }

    pub fn angles(&self, phase: f64) -> [f64; 7] {
        Self::interp(&self.angles, phase)
    }

    pub fn velocities(&self, phase: f64) -> [f64; 7] {
        Self::interp(&self.velocities, phase)
    }
}

impl Default for ReferenceGait {
    /// 1.1 s cycle at 1.25 m/s.
    fn default() -> Self {
        Self::parametric(1.1, 1.25, 220)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_and_peaks_at_phase_zero() {
        let g = ReferenceGait::default();
        assert_eq!(g.angles(0.0), g.angles(1.0));
        let hip0 = g.angles(0.0)[1];
        for k in 1..100 {
            assert!(g.angles(k as f64 / 100.0)[1] <= hip0);
        }
        // left leg half a cycle behind
        assert!((g.angles(0.5)[4] - hip0).abs() < 1e-12);
    }

    #[test]
    fn velocities_match_finite_difference() {
        let cycle = 1.1;
        let g = ReferenceGait::parametric(cycle, 1.25, 4000);
        for k in 0..20 {
            let p = k as f64 / 20.0 + 0.013;
            let h = 1e-3;
            let a1 = g.angles(p + h);
            let a0 = g.angles(p - h);
            let v = g.velocities(p);
            for j in 0..7 {
                let fd = (a1[j] - a0[j]) / (2.0 * h * cycle);
                assert!((fd - v[j]).abs() < 2e-2 * (1.0 + v[j].abs()), "joint {j}: {fd} vs {}", v[j]);
            }
        }
    }

    #[test]
    fn speed_scale_example() {
        let g = ReferenceGait::parametric(1.1, 1.0, 10);
        assert_eq!(g.speed_scale(1.25), 1.25);
    }

    #[test]
    fn csv_round_trip() {
        let g = ReferenceGait::parametric(1.0, 1.25, 8);
        let mut s = String::from("phase");
        for j in TRACKED_JOINTS {
            s.push_str(&format!(",{j}_angle,{j}_vel"));
        }
        s.push('\n');
        for k in 0..=8 {
            let p = k as f64 / 8.0;
            let (a, v) = (g.angles(p), g.velocities(p));
            s.push_str(&format!("{p}"));
            for j in 0..7 {
                s.push_str(&format!(",{},{}", a[j], v[j]));
            }
            s.push('\n');
        }
        let parsed = ReferenceGait::from_csv(s.as_bytes(), 1.0, 1.25).unwrap();
        for k in 0..8 {
            let p = k as f64 / 8.0;
            for j in 0..7 {
                assert!((parsed.angles(p)[j] - g.angles(p)[j]).abs() < 1e-12);
            }
        }
        assert!(ReferenceGait::from_csv("phase,hip_r_angle\n0,1\n".as_bytes(), 1.0, 1.0).is_err());
    }
}
