//! Observation vectors for the human and exoskeleton actors.

use serde::{Deserialize, Serialize};

use super::model::{dof, NDOF};
use super::sim::SimState;

/// History depth of the exoskeleton observation.
pub const HISTORY: usize = 3;
/// Length of the exoskeleton observation: 3 x (2 angles + 2 velocities) + 3 x 2 commands.
pub const EXO_OBS_DIM: usize = 18;

/// Last three control steps of bilateral hip kinematics and normalized exo commands.
/// Slot 0 is the oldest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsHistory {
    pub hip_angle: [[f64; 2]; HISTORY],
    pub hip_vel: [[f64; 2]; HISTORY],
    pub command: [[f64; 2]; HISTORY],
}

impl ObsHistory {
    /// Fill every slot with the first observation.
    pub fn new(hip_angle: [f64; 2], hip_vel: [f64; 2], command: [f64; 2]) -> Self {
        Self {
            hip_angle: [hip_angle; HISTORY],
            hip_vel: [hip_vel; HISTORY],
            command: [command; HISTORY],
        }
    }

    pub fn from_state(state: &SimState) -> Self {
        Self::new(state.hip_angles(), state.hip_velocities(), [0.0; 2])
    }

    pub fn push(&mut self, hip_angle: [f64; 2], hip_vel: [f64; 2], command: [f64; 2]) {
        self.hip_angle.rotate_left(1);
        self.hip_vel.rotate_left(1);
        self.command.rotate_left(1);
        self.hip_angle[HISTORY - 1] = hip_angle;
        self.hip_vel[HISTORY - 1] = hip_vel;
        self.command[HISTORY - 1] = command;
    }

    pub fn push_state(&mut self, state: &SimState, command: [f64; 2]) {
        self.push(state.hip_angles(), state.hip_velocities(), command);
    }

    /// Most recent normalized command (right, left).
    pub fn current_command(&self) -> [f64; 2] {
        self.command[HISTORY - 1]
    }
}

/// Human observation length without augmentation.
pub fn human_obs_dim(n_muscles: usize, include_exo_torque: bool) -> usize {
    (NDOF - 1) + NDOF + n_muscles + if include_exo_torque { 2 } else { 0 }
}

/// `q` without pelvis x, then `qd`, then activations, then (optionally) the current
/// normalized exo commands.
pub fn observe_human(state: &SimState, history: &ObsHistory, include_exo_torque: bool) -> Vec<f64> {
    let mut obs = Vec::with_capacity(human_obs_dim(state.activations.len(), include_exo_torque));
    obs.extend_from_slice(&state.q[dof::PELVIS_X + 1..]);
    obs.extend_from_slice(&state.qd);
    obs.extend_from_slice(&state.activations);
    if include_exo_torque {
        obs.extend_from_slice(&history.current_command());
    }
    obs
}

/// `[hip_r, hip_l, w_r, w_l]` per step, oldest first, then `[u_r, u_l]` per step.
pub fn observe_exo(history: &ObsHistory) -> [f64; EXO_OBS_DIM] {
    let mut obs = [0.0; EXO_OBS_DIM];
    for k in 0..HISTORY {
        obs[4 * k] = history.hip_angle[k][0];
        obs[4 * k + 1] = history.hip_angle[k][1];
        obs[4 * k + 2] = history.hip_vel[k][0];
        obs[4 * k + 3] = history.hip_vel[k][1];
        obs[12 + 2 * k] = history.command[k][0];
        obs[12 + 2 * k + 1] = history.command[k][1];
    }
    obs
}
