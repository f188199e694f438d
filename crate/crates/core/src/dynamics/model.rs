//! Walker parameters: segments, joints, muscles and the optional hip exoskeleton.

use serde::{Deserialize, Serialize};

use super::SimError;

/// Number of generalized coordinates of the planar walker.
pub const NDOF: usize = 9;
/// Number of rigid bodies (pelvis/torso block, 2 thighs, 2 shanks, 2 feet).
pub const NBODY: usize = 7;
/// Number of foot contact points (heel and toe per foot).
pub const NCONTACT: usize = 4;

/// Generalized coordinate indices.
pub mod dof {
    pub const PELVIS_X: usize = 0;
    pub const PELVIS_Z: usize = 1;
    pub const PELVIS_PITCH: usize = 2;
    pub const HIP_R: usize = 3;
    pub const KNEE_R: usize = 4;
    pub const ANKLE_R: usize = 5;
    pub const HIP_L: usize = 6;
    pub const KNEE_L: usize = 7;
    pub const ANKLE_L: usize = 8;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Right,
    Left,
}

/// Actuated joints, in the order used for limits and constraint forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointId {
    HipR,
    KneeR,
    AnkleR,
    HipL,
    KneeL,
    AnkleL,
}

impl JointId {
    pub const ALL: [JointId; 6] = [
        JointId::HipR,
        JointId::KneeR,
        JointId::AnkleR,
        JointId::HipL,
        JointId::KneeL,
        JointId::AnkleL,
    ];

    pub fn dof(self) -> usize {
        match self {
            JointId::HipR => dof::HIP_R,
            JointId::KneeR => dof::KNEE_R,
            JointId::AnkleR => dof::ANKLE_R,
            JointId::HipL => dof::HIP_L,
            JointId::KneeL => dof::KNEE_L,
            JointId::AnkleL => dof::ANKLE_L,
        }
    }

    pub fn index(self) -> usize {
        self.dof() - dof::HIP_R
    }

    pub fn is_hip(self) -> bool {
        matches!(self, JointId::HipR | JointId::HipL)
    }
}

/// Rigid segment. `com` is the distance of the centre of mass from the
/// proximal joint along the segment axis (for the torso block: above the hips).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub mass: f64,
    pub length: f64,
    pub inertia: f64,
    pub com: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootGeometry {
    /// Sole depth below the ankle joint (m).
    pub ankle_height: f64,
    /// Heel distance behind the ankle (m).
    pub heel: f64,
    /// Toe distance in front of the ankle (m).
    pub toe: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimit {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactParams {
    pub stiffness: f64,
    pub damping: f64,
    pub friction: f64,
    pub tangential_stiffness: f64,
    pub tangential_damping: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 1e4,
            damping: 1e2,
            friction: 0.9,
            tangential_stiffness: 1e4,
            tangential_damping: 1e2,
        }
    }
}

/// One joint a muscle spans. Torque at the joint is `sign * activation * max_torque`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleAction {
    pub joint: JointId,
    /// +1 flexor (dorsiflexor at the ankle), -1 extensor.
    pub sign: i8,
    /// Constant moment arm times maximum isometric force (Nm).
    pub max_torque: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleSpec {
    pub name: String,
    pub actions: Vec<MuscleAction>,
    pub tau_act: f64,
    pub tau_deact: f64,
}

impl MuscleSpec {
    fn new(name: &str, actions: &[(JointId, i8, f64)]) -> Self {
        Self {
            name: name.to_string(),
            actions: actions
                .iter()
                .map(|&(joint, sign, max_torque)| MuscleAction {
                    joint,
                    sign,
                    max_torque,
                })
                .collect(),
            tau_act: 0.01,
            tau_deact: 0.04,
        }
    }

    pub fn spans_hip(&self) -> bool {
        self.actions.iter().any(|a| a.joint.is_hip())
    }
}

/// Hip exoskeleton frame and actuators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExoAttachment {
    pub pelvis_mass: f64,
    pub thigh_mass: f64,
    /// Per-hip torque limit (Nm).
    pub tau_max: f64,
    /// Last applied per-side torque (right, left) in Nm.
    #[serde(default)]
    pub command: [f64; 2],
}

impl Default for ExoAttachment {
    /// 5.94 kg device: 3.54 kg pelvis frame plus 1.2 kg per thigh link.
    fn default() -> Self {
        Self {
            pelvis_mass: 3.54,
            thigh_mass: 1.2,
            tau_max: 0.0,
            command: [0.0; 2],
        }
    }
}

impl ExoAttachment {
    pub fn total_mass(&self) -> f64 {
        self.pelvis_mass + 2.0 * self.thigh_mass
    }

    /// Scale a normalized command pair into applied torques, bounded by `tau_max`.
    pub fn torque(&self, cmd: [f64; 2]) -> [f64; 2] {
        cmd.map(|u| u.clamp(-1.0, 1.0) * self.tau_max)
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = self.pelvis_mass >= 0.0
            && self.thigh_mass >= 0.0
            && self.tau_max >= 0.0
            && self.command.iter().all(|c| c.abs() <= self.tau_max);
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidModel(format!("bad exo attachment {self:?}")))
        }
    }
}

/// Planar seven-segment walker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerModel {
    pub pelvis: Segment,
    pub thigh: [Segment; 2],
    pub shank: [Segment; 2],
    pub foot: [Segment; 2],
    pub foot_geometry: FootGeometry,
    /// Limits ordered as [`JointId::ALL`].
    pub joint_limits: [JointLimit; 6],
    pub muscles: Vec<MuscleSpec>,
    pub gravity: f64,
    pub contact: ContactParams,
    pub limit_stiffness: f64,
    pub limit_damping: f64,
    /// Passive viscous damping at every actuated joint (Nm s/rad).
    pub joint_damping: f64,
    pub physics_dt: f64,
    #[serde(default)]
    pub exo: Option<ExoAttachment>,
    /// Coordinates held fixed at their current value (test rigs, hanging limbs).
    #[serde(default)]
    pub locked_dofs: [bool; NDOF],
}

impl Default for WalkerModel {
    /// 75 kg, 1.75 m subject with Winter-style segment fractions.
    fn default() -> Self {
        let thigh = Segment {
            mass: 7.5,
            length: 0.429,
            inertia: 0.144,
            com: 0.186,
        };
        let shank = Segment {
            mass: 3.4875,
            length: 0.43,
            inertia: 0.059,
            com: 0.186,
        };
        let foot = Segment {
            mass: 1.0875,
            length: 0.25,
            inertia: 0.0174,
            com: 0.075,
        };
        let right = Self::default_muscles(Side::Right);
        let left = Self::default_muscles(Side::Left);
        Self {
            pelvis: Segment {
                mass: 50.85,
                length: 0.55,
                inertia: 3.4,
                com: 0.3,
            },
            thigh: [thigh; 2],
            shank: [shank; 2],
            foot: [foot; 2],
            foot_geometry: FootGeometry {
                ankle_height: 0.068,
                heel: 0.05,
                toe: 0.2,
            },
            joint_limits: [
                JointLimit { lower: -0.5, upper: 2.0 },
                JointLimit { lower: 0.0, upper: 2.3 },
                JointLimit { lower: -0.8, upper: 0.5 },
                JointLimit { lower: -0.5, upper: 2.0 },
                JointLimit { lower: 0.0, upper: 2.3 },
                JointLimit { lower: -0.8, upper: 0.5 },
            ],
            muscles: right.into_iter().chain(left).collect(),
            gravity: 9.81,
            contact: ContactParams::default(),
            limit_stiffness: 500.0,
            limit_damping: 5.0,
            joint_damping: 1.0,
            physics_dt: 0.002,
            exo: None,
            locked_dofs: [false; NDOF],
        }
    }
}

impl WalkerModel {
    /// Five muscles per leg: iliopsoas, gluteus maximus, rectus femoris,
    /// hamstrings and an ankle plantarflexor.
    pub fn default_muscles(side: Side) -> Vec<MuscleSpec> {
        let (hip, knee, ankle, tag) = match side {
            Side::Right => (JointId::HipR, JointId::KneeR, JointId::AnkleR, "r"),
            Side::Left => (JointId::HipL, JointId::KneeL, JointId::AnkleL, "l"),
        };
        vec![
            MuscleSpec::new(&format!("iliopsoas_{tag}"), &[(hip, 1, 150.0)]),
            MuscleSpec::new(&format!("gluteus_maximus_{tag}"), &[(hip, -1, 180.0)]),
            MuscleSpec::new(
                &format!("rectus_femoris_{tag}"),
                &[(hip, 1, 60.0), (knee, -1, 150.0)],
            ),
            MuscleSpec::new(
                &format!("hamstrings_{tag}"),
                &[(hip, -1, 100.0), (knee, 1, 80.0)],
            ),
            MuscleSpec::new(&format!("plantarflexor_{tag}"), &[(ankle, -1, 120.0)]),
        ]
    }

    pub fn n_muscles(&self) -> usize {
        self.muscles.len()
    }

    /// Indices of the muscles spanning a hip joint.
    pub fn hip_muscles(&self) -> Vec<usize> {
        self.muscles
            .iter()
            .enumerate()
            .filter(|(_, m)| m.spans_hip())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.pelvis.mass
            + self
                .thigh
                .iter()
                .chain(&self.shank)
                .chain(&self.foot)
                .map(|s| s.mass)
                .sum::<f64>()
    }

    /// Body weight `m g` in newtons.
    pub fn body_weight(&self) -> f64 {
        self.total_mass() * self.gravity
    }

    /// Hip height with all joints at zero and the soles on the ground.
    pub fn standing_height(&self) -> f64 {
        let side = |s: usize| self.thigh[s].length + self.shank[s].length;
        0.5 * (side(0) + side(1)) + self.foot_geometry.ankle_height
    }

    pub fn exo_attached(&self) -> bool {
        self.exo.is_some()
    }

    pub fn torque_limit(&self) -> f64 {
        self.exo.map_or(0.0, |e| e.tau_max)
    }

    /// Change the exoskeleton torque limit. No-op without an exoskeleton.
    pub fn set_torque_limit(&mut self, tau_max: f64) -> Result<(), SimError> {
        if !(tau_max >= 0.0) {
            return Err(SimError::InvalidModel(format!("torque limit {tau_max}")));
        }
        if let Some(exo) = self.exo.as_mut() {
            exo.tau_max = tau_max;
            exo.command = exo.command.map(|c| c.clamp(-tau_max, tau_max));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let segs = [
            ("pelvis", &self.pelvis),
            ("thigh_r", &self.thigh[0]),
            ("thigh_l", &self.thigh[1]),
            ("shank_r", &self.shank[0]),
            ("shank_l", &self.shank[1]),
            ("foot_r", &self.foot[0]),
            ("foot_l", &self.foot[1]),
        ];
        for (name, s) in segs {
            if !(s.mass > 0.0 && s.length > 0.0 && s.inertia > 0.0) {
                return Err(SimError::InvalidModel(format!(
                    "segment {name} needs positive mass, length, inertia"
                )));
            }
        }
        for (j, lim) in JointId::ALL.iter().zip(&self.joint_limits) {
            if !(lim.lower < lim.upper) {
                return Err(SimError::InvalidModel(format!("joint limit {j:?} empty")));
            }
        }
        if self.muscles.is_empty() {
            return Err(SimError::InvalidModel("no muscles".into()));
        }
        for m in &self.muscles {
            let ok = !m.actions.is_empty()
                && m.tau_act > 0.0
                && m.tau_deact > 0.0
                && m
                    .actions
                    .iter()
                    .all(|a| a.max_torque > 0.0 && (a.sign == 1 || a.sign == -1));
            if !ok {
                return Err(SimError::InvalidModel(format!("muscle {}", m.name)));
            }
        }
        if !(self.physics_dt > 0.0) || !(self.gravity >= 0.0) {
            return Err(SimError::InvalidModel("physics_dt/gravity".into()));
        }
        if let Some(exo) = &self.exo {
            exo.validate()?;
        }
        Ok(())
    }
}

/// Add the exoskeleton frame to the pelvis and its links to both thighs.
pub fn attach_exo(model: &WalkerModel, exo: ExoAttachment) -> Result<WalkerModel, SimError> {
    if model.exo.is_some() {
        return Err(SimError::AlreadyAttached);
    }
    exo.validate()?;
    let mut out = model.clone();
    // Link masses sit at the segment centres of mass.
    out.pelvis.mass += exo.pelvis_mass;
    for thigh in &mut out.thigh {
        thigh.mass += exo.thigh_mass;
    }
    out.exo = Some(exo);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_is_valid_and_weighs_75kg() {
        let m = WalkerModel::default();
        m.validate().unwrap();
        assert!((m.total_mass() - 75.0).abs() < 1e-9);
        assert_eq!(m.n_muscles(), 10);
        assert_eq!(m.hip_muscles(), vec![0, 1, 2, 3, 5, 6, 7, 8]);
    }

    #[test]
    fn default_exo_adds_table_mass() {
        let m = WalkerModel::default();
        let exo = ExoAttachment::default();
        assert!((exo.total_mass() - 5.94).abs() < 1e-12);
        let attached = attach_exo(&m, exo).unwrap();
        assert!((attached.total_mass() - m.total_mass() - 5.94).abs() < 1e-9);
        assert!(attached.exo_attached());
    }

    #[test]
    fn double_attachment_rejected() {
        let m = attach_exo(&WalkerModel::default(), ExoAttachment::default()).unwrap();
        assert!(matches!(
            attach_exo(&m, ExoAttachment::default()),
            Err(SimError::AlreadyAttached)
        ));
    }

    #[test]
    fn invalid_models_rejected() {
        let mut m = WalkerModel::default();
        m.shank[1].mass = 0.0;
        assert!(m.validate().is_err());
        let mut m = WalkerModel::default();
        m.joint_limits[2] = JointLimit { lower: 0.3, upper: 0.3 };
        assert!(m.validate().is_err());
        let mut m = WalkerModel::default();
        m.muscles.clear();
        assert!(m.validate().is_err());
        let mut m = WalkerModel::default();
        m.muscles[0].actions[0].sign = 0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn torque_is_clamped_to_limit() {
        let exo = ExoAttachment {
            tau_max: 6.0,
            ..Default::default()
        };
        assert_eq!(exo.torque([2.0, -0.5]), [6.0, -3.0]);
        let zero = ExoAttachment::default();
        assert_eq!(zero.torque([1.0, -1.0]).map(f64::abs), [0.0, 0.0]);
    }
}
