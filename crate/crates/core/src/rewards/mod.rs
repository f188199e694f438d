//! Reward terms and stage-wise weights.
//!
//! Every term is multiplied by the control timestep so episode returns do not
//! depend on the control frequency.

mod reference;

pub use reference::{ReferenceGait, TRACKED_DOFS, TRACKED_JOINTS};

use serde::{Deserialize, Serialize};

/// Target walking speed (m/s).
pub const TARGET_SPEED: f64 = 1.25;
/// Control timestep (s).
pub const CONTROL_DT: f64 = 0.02;

/// Stage-3 timing reward gain.
pub const ALPHA_D: f64 = 0.5;
/// Stage-4 power reward: assistance gain, magnitude penalty, saturation penalty,
/// saturation threshold and velocity normalization (rad/s).
pub const POWER_ALPHA: f64 = 0.3;
pub const POWER_BETA: f64 = 0.15;
pub const SATURATION_LAMBDA: f64 = 2.0;
pub const SATURATION_DELTA: f64 = 0.8;
pub const OMEGA_SCALE: f64 = 2.0;
/// Total foot force allowed before the foot penalty kicks in, in body weights.
pub const FOOT_FORCE_THRESHOLD: f64 = 1.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid stage {0}, expected 1..=4")]
    InvalidStage(u8),
    #[error("invalid reference gait: {0}")]
    InvalidReference(String),
}

fn check_len(a: usize, b: usize) -> Result<(), RewardError> {
    if a == b {
        Ok(())
    } else {
        Err(RewardError::DimensionMismatch(a, b))
    }
}

pub fn forward_velocity_reward(v: f64, v_star: f64, dt: f64) -> f64 {
    dt * (-5.0 * (v - v_star).powi(2)).exp()
}

pub fn muscle_effort_penalty(activations: &[f64], dt: f64) -> f64 {
    if activations.is_empty() {
        return 0.0;
    }
    -dt / activations.len() as f64 * activations.iter().sum::<f64>()
}

pub fn imitation_qpos_reward(
    q: &[f64],
    q_ref: &[f64],
    weights: &[f64],
    dt: f64,
) -> Result<f64, RewardError> {
    check_len(q.len(), q_ref.len())?;
    check_len(q.len(), weights.len())?;
    Ok(dt
        * q.iter()
            .zip(q_ref)
            .zip(weights)
            .map(|((q, r), w)| w * (-8.0 * (q - r).powi(2)).exp())
            .sum::<f64>())
}

/// Velocity imitation with the reference velocities scaled by `rho`.
pub fn imitation_qvel_reward(
    qd: &[f64],
    qd_ref: &[f64],
    rho: f64,
    weights: &[f64],
    dt: f64,
) -> Result<f64, RewardError> {
    check_len(qd.len(), qd_ref.len())?;
    check_len(qd.len(), weights.len())?;
    Ok(dt
        * qd.iter()
            .zip(qd_ref)
            .zip(weights)
            .map(|((v, r), w)| w * (-8.0 * (v - rho * r).powi(2)).exp())
            .sum::<f64>())
}

pub fn activation_smoothness_reward(
    activations: &[f64],
    prev: &[f64],
    dt: f64,
) -> Result<f64, RewardError> {
    check_len(activations.len(), prev.len())?;
    if activations.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = activations
        .iter()
        .zip(prev)
        .map(|(a, p)| (-4.0 * (a - p).powi(2)).exp())
        .sum();
    Ok(dt / activations.len() as f64 * s)
}

/// Mean squared activation of the hip-spanning muscles, negated.
pub fn hip_activation_penalty(hip_activations: &[f64], dt: f64) -> f64 {
    if hip_activations.is_empty() {
        return 0.0;
    }
    -dt * hip_activations.iter().map(|a| a * a).sum::<f64>() / hip_activations.len() as f64
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Rewards commands whose sign matches the hip velocity, quadratically in magnitude.
pub fn exo_timing_reward_s3(u: [f64; 2], omega: [f64; 2], dt: f64) -> f64 {
    dt * u
        .iter()
        .zip(&omega)
        .map(|(u, w)| ALPHA_D * u * u * sign0(u * w))
        .sum::<f64>()
}

/// Power-aligned assistance with a magnitude penalty and a saturation penalty above
/// [`SATURATION_DELTA`].
pub fn exo_power_reward_s4(u: [f64; 2], omega: [f64; 2], dt: f64) -> f64 {
    dt * u
        .iter()
        .zip(&omega)
        .map(|(&u, &w)| {
            let w_hat = (w / OMEGA_SCALE).clamp(-1.0, 1.0);
            let excess = (u.abs() - SATURATION_DELTA).max(0.0);
            POWER_ALPHA * u * w_hat - POWER_BETA * u * u - SATURATION_LAMBDA * excess * excess
        })
        .sum::<f64>()
}

pub fn torque_rate_penalty(u: [f64; 2], u_prev: [f64; 2], dt: f64) -> f64 {
    -dt * u
        .iter()
        .zip(&u_prev)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
}

/// Largest joint-limit force in body weights, negated.
pub fn constraint_penalty(limit_forces: &[f64], body_weight: f64, dt: f64) -> f64 {
    let worst = limit_forces
        .iter()
        .map(|f| f.abs() / body_weight)
        .fold(0.0, f64::max);
    -dt * worst
}

pub fn foot_force_penalty(f_r: f64, f_l: f64, body_weight: f64, dt: f64) -> f64 {
    -dt * ((f_r.abs() + f_l.abs()) / body_weight - FOOT_FORCE_THRESHOLD).max(0.0)
}

/// Reward terms in their fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Fwd,
    Muscle,
    DeltaA,
    HipAct,
    Exo,
    DeltaTau,
    Qpos,
    Qvel,
    Constraint,
    Foot,
}

impl Term {
    pub const ALL: [Term; 10] = [
        Term::Fwd,
        Term::Muscle,
        Term::DeltaA,
        Term::HipAct,
        Term::Exo,
        Term::DeltaTau,
        Term::Qpos,
        Term::Qvel,
        Term::Constraint,
        Term::Foot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Term::Fwd => "fwd",
            Term::Muscle => "muscle",
            Term::DeltaA => "delta_a",
            Term::HipAct => "hip_act",
            Term::Exo => "exo",
            Term::DeltaTau => "delta_tau",
            Term::Qpos => "qpos",
            Term::Qvel => "qvel",
            Term::Constraint => "constraint",
            Term::Foot => "foot",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Stage reward configuration. A weight of exactly 0 disables the term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    pub stage: u8,
    pub fwd: f64,
    pub muscle: f64,
    pub delta_a: f64,
    pub hip_act: f64,
    pub exo: f64,
    pub delta_tau: f64,
    pub qpos: f64,
    pub qvel: f64,
    pub constraint: f64,
    pub foot: f64,
    /// Per-joint imitation weights ordered as [`TRACKED_JOINTS`].
    pub joint: [f64; 7],
}

impl RewardWeights {
    pub fn get(&self, term: Term) -> f64 {
        match term {
            Term::Fwd => self.fwd,
            Term::Muscle => self.muscle,
            Term::DeltaA => self.delta_a,
            Term::HipAct => self.hip_act,
            Term::Exo => self.exo,
            Term::DeltaTau => self.delta_tau,
            Term::Qpos => self.qpos,
            Term::Qvel => self.qvel,
            Term::Constraint => self.constraint,
            Term::Foot => self.foot,
        }
    }

    pub fn set(&mut self, term: Term, value: f64) {
        let slot = match term {
            Term::Fwd => &mut self.fwd,
            Term::Muscle => &mut self.muscle,
            Term::DeltaA => &mut self.delta_a,
            Term::HipAct => &mut self.hip_act,
            Term::Exo => &mut self.exo,
            Term::DeltaTau => &mut self.delta_tau,
            Term::Qpos => &mut self.qpos,
            Term::Qvel => &mut self.qvel,
            Term::Constraint => &mut self.constraint,
            Term::Foot => &mut self.foot,
        };
        *slot = value;
    }

    pub fn is_active(&self, term: Term) -> bool {
        self.get(term) != 0.0
    }

    /// Replace the per-joint imitation weights; hip weights stay zero from stage 3 on.
    pub fn with_joint_weights(mut self, joint: [f64; 7]) -> Self {
        self.joint = joint;
        if self.stage >= 3 {
            for (w, name) in self.joint.iter_mut().zip(TRACKED_JOINTS) {
                if name.starts_with("hip") {
                    *w = 0.0;
                }
            }
        }
        self
    }
}

/// Stage weights; inactive terms are 0 and stages 3-4 zero the hip imitation weights.
pub fn get_stage_weights(stage: u8) -> Result<RewardWeights, RewardError> {
    let base = |fwd, muscle, delta_a| RewardWeights {
        stage,
        fwd,
        muscle,
        delta_a,
        hip_act: 0.0,
        exo: 0.0,
        delta_tau: 0.0,
        qpos: 1.0,
        qvel: 1.0,
        constraint: 0.0,
        foot: 0.0,
        joint: [1.0; 7],
    };
    let w = match stage {
        1 | 2 => base(0.8, 0.01, 0.005),
        3 => RewardWeights {
            hip_act: 2.0,
            exo: 4.0,
            constraint: 0.5,
            foot: 0.3,
            ..base(1.5, 0.15, 0.05)
        },
        4 => RewardWeights {
            hip_act: 5.0,
            exo: 4.0,
            delta_tau: 1.0,
            constraint: 0.5,
            foot: 0.3,
            ..base(1.5, 0.15, 0.05)
        },
        s => return Err(RewardError::InvalidStage(s)),
    };
    Ok(w.with_joint_weights([1.0; 7]))
}

/// Everything any term may need. Inputs of inactive terms are never read.
#[derive(Debug, Clone, Default)]
pub struct RewardInputs<'a> {
    pub dt: f64,
    pub v: f64,
    pub v_star: f64,
    pub activations: &'a [f64],
    pub prev_activations: &'a [f64],
    pub hip_activations: &'a [f64],
    pub q: &'a [f64],
    pub q_ref: &'a [f64],
    pub qd: &'a [f64],
    pub qd_ref: &'a [f64],
    pub rho: f64,
    pub u: [f64; 2],
    pub u_prev: [f64; 2],
    pub omega: [f64; 2],
    pub limit_forces: &'a [f64],
    pub foot_force: [f64; 2],
    pub body_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// Raw term values ordered as [`Term::ALL`]; inactive terms are 0.
    pub terms: [f64; 10],
    /// Weight applied to each term.
    pub weights: [f64; 10],
    pub total: f64,
}

impl RewardBreakdown {
    pub fn term(&self, t: Term) -> f64 {
        self.terms[t.index()]
    }

    pub fn weighted(&self, t: Term) -> f64 {
        self.weights[t.index()] * self.terms[t.index()]
    }

    pub fn recompute_total(&self) -> f64 {
        self.terms
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| t * w)
            .sum()
    }
}

/// Weighted sum of the active terms. Stage 3 uses the timing exo reward and stage 4
/// the power exo reward.
pub fn total_reward(
    weights: &RewardWeights,
    inp: &RewardInputs<'_>,
) -> Result<RewardBreakdown, RewardError> {
    if !(1..=4).contains(&weights.stage) {
        return Err(RewardError::InvalidStage(weights.stage));
    }
    let dt = inp.dt;
    let mut terms = [0.0; 10];
    for term in Term::ALL {
        if !weights.is_active(term) {
            continue;
        }
        terms[term.index()] = match term {
            Term::Fwd => forward_velocity_reward(inp.v, inp.v_star, dt),
            Term::Muscle => muscle_effort_penalty(inp.activations, dt),
            Term::DeltaA => activation_smoothness_reward(inp.activations, inp.prev_activations, dt)?,
            Term::HipAct => hip_activation_penalty(inp.hip_activations, dt),
            Term::Exo => match weights.stage {
                3 => exo_timing_reward_s3(inp.u, inp.omega, dt),
                4 => exo_power_reward_s4(inp.u, inp.omega, dt),
                _ => 0.0,
            },
            Term::DeltaTau => torque_rate_penalty(inp.u, inp.u_prev, dt),
            Term::Qpos => imitation_qpos_reward(inp.q, inp.q_ref, &weights.joint, dt)?,
            Term::Qvel => imitation_qvel_reward(inp.qd, inp.qd_ref, inp.rho, &weights.joint, dt)?,
            Term::Constraint => constraint_penalty(inp.limit_forces, inp.body_weight, dt),
            Term::Foot => foot_force_penalty(inp.foot_force[0], inp.foot_force[1], inp.body_weight, dt),
        };
    }
    let w = Term::ALL.map(|t| weights.get(t));
    let mut out = RewardBreakdown {
        terms,
        weights: w,
        total: 0.0,
    };
    out.total = out.recompute_total();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = CONTROL_DT;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn forward_velocity_examples() {
        close(forward_velocity_reward(1.25, 1.25, DT), 0.02, 1e-15);
        close(forward_velocity_reward(1.0, 1.25, DT), 0.0146323, 5e-8);
        // direct evaluation: 0.02 * exp(-7.8125)
        close(forward_velocity_reward(0.0, 1.25, DT), 8.0929034e-6, 1e-12);
    }

    #[test]
    fn muscle_effort_examples() {
        assert_eq!(muscle_effort_penalty(&[0.0; 10], DT), 0.0);
        close(muscle_effort_penalty(&[1.0; 10], DT), -0.02, 1e-15);
        close(muscle_effort_penalty(&[1.0, 0.0, 0.0, 0.0], DT), -0.005, 1e-15);
    }

    #[test]
    fn imitation_examples() {
        close(imitation_qpos_reward(&[0.3], &[0.3], &[1.0], DT).unwrap(), 0.02, 1e-15);
        close(imitation_qpos_reward(&[0.5], &[0.0], &[1.0], DT).unwrap(), 0.0027067, 5e-8);
        close(
            imitation_qpos_reward(&[0.0, 0.5], &[0.0, 0.0], &[1.0, 1.0], DT).unwrap(),
            0.0227067,
            5e-8,
        );
        assert!(matches!(
            imitation_qpos_reward(&[0.0, 0.5], &[0.0], &[1.0, 1.0], DT),
            Err(RewardError::DimensionMismatch(2, 1))
        ));
        close(imitation_qvel_reward(&[1.25], &[1.0], 1.25, &[1.0], DT).unwrap(), 0.02, 1e-15);
        close(imitation_qvel_reward(&[0.0], &[0.5], 1.0, &[1.0], DT).unwrap(), 0.0027067, 5e-8);
        assert!(imitation_qvel_reward(&[0.0], &[0.5], 1.0, &[1.0, 1.0], DT).is_err());
    }

    #[test]
    fn smoothness_examples() {
        let a = [0.2, 0.4, 0.9];
        close(activation_smoothness_reward(&a, &a, DT).unwrap(), 0.02, 1e-15);
        close(
            activation_smoothness_reward(&[0.5; 4], &[0.0; 4], DT).unwrap(),
            0.0073576,
            5e-8,
        );
        close(
            activation_smoothness_reward(&[0.0, 1.0], &[0.0, 0.0], DT).unwrap(),
            0.0101832,
            5e-8,
        );
    }

    #[test]
    fn hip_activation_examples() {
        assert_eq!(hip_activation_penalty(&[0.0; 8], DT), 0.0);
        close(hip_activation_penalty(&[1.0; 8], DT), -0.02, 1e-15);
        close(hip_activation_penalty(&[0.5; 8], DT), -0.005, 1e-15);
    }

    #[test]
    fn exo_reward_examples() {
        assert_eq!(exo_timing_reward_s3([0.0, 0.0], [1.0, -1.0], DT), 0.0);
        close(exo_timing_reward_s3([0.5, 0.5], [1.0, 1.0], DT), 0.005, 1e-15);
        close(exo_timing_reward_s3([0.5, 0.5], [-1.0, -1.0], DT), -0.005, 1e-15);
        // stationary joint earns nothing
        assert_eq!(exo_timing_reward_s3([0.9, -0.9], [0.0, 0.0], DT), 0.0);

        assert_eq!(exo_power_reward_s4([0.0, 0.0], [1.0, 1.0], DT), 0.0);
        close(exo_power_reward_s4([0.9, 0.0], [2.0, 0.0], DT), 0.00257, 1e-12);
        close(exo_power_reward_s4([0.5, 0.0], [-2.0, 0.0], DT), -0.00375, 1e-12);
    }

    #[test]
    fn rate_and_stability_examples() {
        assert_eq!(torque_rate_penalty([0.3, -0.2], [0.3, -0.2], DT), 0.0);
        close(torque_rate_penalty([0.5, 0.5], [0.0, 0.0], DT), -0.01, 1e-15);
        close(torque_rate_penalty([1.0, 0.0], [0.0, 0.0], DT), -0.02, 1e-15);

        let mg = 735.75;
        assert_eq!(constraint_penalty(&[0.0; 6], mg, DT), 0.0);
        close(constraint_penalty(&[0.5 * mg, 0.1], mg, DT), -0.01, 1e-15);
        close(constraint_penalty(&[0.1 * mg, -0.9 * mg], mg, DT), -0.018, 1e-15);

        assert_eq!(foot_force_penalty(0.5 * mg, 0.5 * mg, mg, DT), 0.0);
        assert_eq!(foot_force_penalty(0.6 * mg, 0.6 * mg, mg, DT), 0.0);
        close(foot_force_penalty(0.75 * mg, 0.75 * mg, mg, DT), -0.006, 1e-15);
    }

    #[test]
    fn stage_weight_table() {
        let s1 = get_stage_weights(1).unwrap();
        assert_eq!((s1.fwd, s1.muscle, s1.delta_a, s1.qpos, s1.qvel), (0.8, 0.01, 0.005, 1.0, 1.0));
        assert_eq!((s1.hip_act, s1.exo, s1.delta_tau, s1.constraint, s1.foot), (0.0, 0.0, 0.0, 0.0, 0.0));
        let s3 = get_stage_weights(3).unwrap();
        assert_eq!(
            (s3.fwd, s3.muscle, s3.delta_a, s3.hip_act, s3.exo, s3.constraint, s3.foot),
            (1.5, 0.15, 0.05, 2.0, 4.0, 0.5, 0.3)
        );
        assert_eq!(s3.delta_tau, 0.0);
        assert_eq!(s3.joint, [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let s4 = get_stage_weights(4).unwrap();
        assert_eq!((s4.hip_act, s4.delta_tau), (5.0, 1.0));
        assert!(matches!(get_stage_weights(0), Err(RewardError::InvalidStage(0))));
        assert!(get_stage_weights(5).is_err());
    }

    #[test]
    fn stage_two_equals_stage_one() {
        let mut w1 = get_stage_weights(1).unwrap();
        let w2 = get_stage_weights(2).unwrap();
        w1.stage = 2;
        assert_eq!(w1, w2);
    }
}
