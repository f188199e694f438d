//! Coupled human/exoskeleton walking environment.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    dof, human_obs_dim, lowest_contact_height, observe_exo, observe_human, step, ObsHistory,
    SimError, SimState, WalkerModel, EXO_OBS_DIM, NDOF,
};
use crate::rewards::{ReferenceGait, TRACKED_DOFS};
use crate::rewards::{total_reward, RewardBreakdown, RewardInputs, RewardWeights, CONTROL_DT, TARGET_SPEED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSettings {
    pub control_dt: f64,
    pub target_speed: f64,
    pub max_episode_steps: usize,
    /// Uniform noise half-width on initial joint angles (rad) and velocities (rad/s).
    pub init_noise: f64,
}

impl Default for EnvSettings {
    fn default() -> Self {
        Self {
            control_dt: CONTROL_DT,
            target_speed: TARGET_SPEED,
            max_episode_steps: 500,
            init_noise: 0.02,
        }
    }
}

/// Critic input length: human base observation, the two older exo history slots of hip
/// kinematics, the command history and the reference phase as (sin, cos).
pub fn critic_obs_dim(n_muscles: usize) -> usize {
    human_obs_dim(n_muscles, false) + 8 + 6 + 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub reward: RewardBreakdown,
    pub terminated: bool,
    pub truncated: bool,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone)]
pub struct CoupledEnv {
    model: Arc<WalkerModel>,
    reference: Arc<ReferenceGait>,
    weights: RewardWeights,
    settings: EnvSettings,
    augment: bool,
    state: SimState,
    history: ObsHistory,
    prev_u: [f64; 2],
    phase_offset: f64,
    steps: usize,
    hip_muscles: Vec<usize>,
    rng: ChaCha8Rng,
}

impl CoupledEnv {
    pub fn new(
        model: Arc<WalkerModel>,
        reference: Arc<ReferenceGait>,
        weights: RewardWeights,
        settings: EnvSettings,
        augment: bool,
        rng: ChaCha8Rng,
    ) -> Self {
        let state = SimState::at_rest(&model, model.standing_height());
        let history = ObsHistory::from_state(&state);
        let hip_muscles = model.hip_muscles();
        let mut env = Self {
            model,
            reference,
            weights,
            settings,
            augment,
            state,
            history,
            prev_u: [0.0; 2],
            phase_offset: 0.0,
            steps: 0,
            hip_muscles,
            rng,
        };
        env.reset();
        env
    }

    /// Seeded environment with its own stream.
    pub fn seeded(
        model: Arc<WalkerModel>,
        reference: Arc<ReferenceGait>,
        weights: RewardWeights,
        settings: EnvSettings,
        augment: bool,
        seed: u64,
        stream: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self::new(model, reference, weights, settings, augment, rng)
    }

    pub fn model(&self) -> &WalkerModel {
        &self.model
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn history(&self) -> &ObsHistory {
        &self.history
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    pub fn settings(&self) -> &EnvSettings {
        &self.settings
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Stream used for resets and for sampling actions in this environment.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn episode_steps(&self) -> usize {
        self.steps
    }

    /// Reference phase at the current time.
    pub fn phase(&self) -> f64 {
        self.reference.phase_at(self.state.time, self.phase_offset)
    }

    /// Start a new episode at a random reference phase with the pelvis moving at the
    /// target speed and the lowest foot point on the ground.
    pub fn reset(&mut self) {
        let phase = self.rng.random::<f64>();
        let rho = self.reference.speed_scale(self.settings.target_speed);
        let angles = self.reference.angles(phase);
        let vels = self.reference.velocities(phase);
        let noise = self.settings.init_noise;
        let mut q = [0.0; NDOF];
        let mut qd = [0.0; NDOF];
        for (j, &d) in TRACKED_DOFS.iter().enumerate() {
            q[d] = angles[j] + noise * self.rng.random_range(-1.0..=1.0);
            qd[d] = rho * vels[j] + noise * self.rng.random_range(-1.0..=1.0);
        }
        qd[dof::PELVIS_X] = self.settings.target_speed;
        q[dof::PELVIS_Z] = -lowest_contact_height(&self.model, &q);
        let mut state = SimState::at_rest(&self.model, 0.0);
        state.q = q;
        state.qd = qd;
        self.state = state;
        self.history = ObsHistory::from_state(&self.state);
        self.prev_u = [0.0; 2];
        self.phase_offset = phase;
        self.steps = 0;
    }

    pub fn human_obs_dim(&self) -> usize {
        human_obs_dim(self.model.n_muscles(), self.augment)
    }

    pub fn human_obs(&self) -> Vec<f64> {
        observe_human(&self.state, &self.history, self.augment)
    }

    pub fn exo_obs(&self) -> [f64; EXO_OBS_DIM] {
        observe_exo(&self.history)
    }

    pub fn critic_obs(&self) -> Vec<f64> {
        let mut obs = observe_human(&self.state, &self.history, false);
        let exo = observe_exo(&self.history);
        obs.extend_from_slice(&exo[..8]);
        obs.extend_from_slice(&exo[12..]);
        let phase = 2.0 * std::f64::consts::PI * self.phase();
        obs.push(phase.sin());
        obs.push(phase.cos());
        obs
    }

    /// Apply one control step. Excitations are clipped to [0, 1] and exo commands to
    /// [-1, 1] before reaching the plant.
    pub fn step(&mut self, excitations: &[f64], exo_cmd: [f64; 2]) -> Result<Transition, SimError> {
        let exc: Vec<f64> = excitations.iter().map(|e| e.clamp(0.0, 1.0)).collect();
        let u = exo_cmd.map(|x| x.clamp(-1.0, 1.0));
        let prev_act = self.state.activations.clone();
        let res = step(&self.state, &self.model, &exc, u, self.settings.control_dt)?;
        self.state = res.state;
        self.history.push_state(&self.state, u);
        self.steps += 1;

        let phase = self.phase();
        let q_ref = self.reference.angles(phase);
        let qd_ref = self.reference.velocities(phase);
        let q: Vec<f64> = TRACKED_DOFS.iter().map(|&d| self.state.q[d]).collect();
        let qd: Vec<f64> = TRACKED_DOFS.iter().map(|&d| self.state.qd[d]).collect();
        let hip_act: Vec<f64> = self.hip_muscles.iter().map(|&m| self.state.activations[m]).collect();
        let inputs = RewardInputs {
            dt: self.settings.control_dt,
            v: self.state.forward_speed(),
            v_star: self.settings.target_speed,
            activations: &self.state.activations,
            prev_activations: &prev_act,
            hip_activations: &hip_act,
            q: &q,
            q_ref: &q_ref,
            qd: &qd,
            qd_ref: &qd_ref,
            rho: self.reference.speed_scale(self.settings.target_speed),
            u,
            u_prev: self.prev_u,
            omega: self.state.hip_velocities(),
            limit_forces: &self.state.limit_force,
            foot_force: self.state.foot_force,
            body_weight: self.model.body_weight(),
        };
        let reward = total_reward(&self.weights, &inputs).map_err(|e| SimError::InvalidInput(e.to_string()))?;
        self.prev_u = u;
        Ok(Transition {
            reward,
            terminated: res.fallen,
            truncated: !res.fallen && self.steps >= self.settings.max_episode_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::get_stage_weights;

    fn env(stage: u8, augment: bool) -> CoupledEnv {
        CoupledEnv::seeded(
            Arc::new(WalkerModel::default()),
            Arc::new(ReferenceGait::default()),
            get_stage_weights(stage).unwrap(),
            EnvSettings::default(),
            augment,
            3,
            7,
        )
    }

    #[test]
    fn reset_places_foot_on_ground() {
        let e = env(1, false);
        let h = lowest_contact_height(e.model(), &e.state().q);
        assert!(h.abs() < 1e-12);
        assert_eq!(e.state().forward_speed(), TARGET_SPEED);
    }

    #[test]
    fn observation_lengths() {
        let e = env(4, true);
        assert_eq!(e.human_obs().len(), e.human_obs_dim());
        assert_eq!(e.human_obs().len(), 29);
        assert_eq!(e.exo_obs().len(), 18);
        assert_eq!(e.critic_obs().len(), critic_obs_dim(10));
    }

    #[test]
    fn same_seed_same_rollout() {
        let run = || {
            let mut e = env(3, false);
            let mut out = Vec::new();
            for k in 0..30 {
                let exc = vec![0.2; 10];
                let t = e.step(&exc, [0.3 * (k as f64 * 0.2).sin(), -0.2]).unwrap();
                out.push(t.reward.total);
                if t.done() {
                    e.reset();
                }
            }
            (out, e.state().clone())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn reward_total_matches_breakdown() {
        let mut e = env(1, false);
        let t = e.step(&[0.1; 10], [0.0; 2]).unwrap();
        assert!((t.reward.total - t.reward.recompute_total()).abs() < 1e-12);
        assert!(t.reward.total > 0.0);
    }

    #[test]
    fn truncates_at_episode_limit() {
        let mut e = env(1, false);
        e.settings.max_episode_steps = 2;
        e.reset();
        assert!(!e.step(&[0.0; 10], [0.0; 2]).unwrap().truncated);
        let t = e.step(&[0.0; 10], [0.0; 2]).unwrap();
        assert!(t.truncated || t.terminated);
    }
}
