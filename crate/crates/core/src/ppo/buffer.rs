use super::{compute_gae, PpoError};

/// Per-actor slice of a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorRollout {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Row-major `[len][obs_dim]`.
    pub obs: Vec<f64>,
    /// Unclipped sampled actions, row-major `[len][act_dim]`.
    pub raw_actions: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl ActorRollout {
    fn new(obs_dim: usize, act_dim: usize, cap: usize) -> Self {
        Self {
            obs_dim,
            act_dim,
            obs: Vec::with_capacity(cap * obs_dim),
            raw_actions: Vec::with_capacity(cap * act_dim),
            log_probs: Vec::with_capacity(cap),
        }
    }

    pub fn obs_row(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action_row(&self, i: usize) -> &[f64] {
        &self.raw_actions[i * self.act_dim..(i + 1) * self.act_dim]
    }
}

/// Time-major storage: sample `t * n_envs + e` is step `t` of environment `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub n_steps: usize,
    pub n_envs: usize,
    pub actors: Vec<ActorRollout>,
    pub critic_dim: usize,
    pub critic_obs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    /// Episode ended after this step; the next value is not bootstrapped.
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    /// `actor_dims` holds `(obs_dim, act_dim)` per actor.
    pub fn new(n_steps: usize, n_envs: usize, actor_dims: &[(usize, usize)], critic_dim: usize) -> Self {
        let cap = n_steps * n_envs;
        Self {
            n_steps,
            n_envs,
            actors: actor_dims
                .iter()
                .map(|&(o, a)| ActorRollout::new(o, a, cap))
                .collect(),
            critic_dim,
            critic_obs: Vec::with_capacity(cap * critic_dim),
            rewards: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
            dones: Vec::with_capacity(cap),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.n_steps * self.n_envs
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity()
    }

    pub fn critic_row(&self, i: usize) -> &[f64] {
        &self.critic_obs[i * self.critic_dim..(i + 1) * self.critic_dim]
    }

    /// Record one actor's part of the next sample. Call once per actor, then
    /// [`RolloutBuffer::push_step`].
    pub fn push_actor(&mut self, actor: usize, obs: &[f64], raw_action: &[f64], log_prob: f64) -> Result<(), PpoError> {
        let a = &mut self.actors[actor];
        if obs.len() != a.obs_dim {
            return Err(PpoError::DimensionMismatch { expected: a.obs_dim, got: obs.len() });
        }
        if raw_action.len() != a.act_dim {
            return Err(PpoError::DimensionMismatch { expected: a.act_dim, got: raw_action.len() });
        }
        a.obs.extend_from_slice(obs);
        a.raw_actions.extend_from_slice(raw_action);
        a.log_probs.push(log_prob);
        Ok(())
    }

    pub fn push_step(&mut self, critic_obs: &[f64], reward: f64, value: f64, done: bool) -> Result<(), PpoError> {
        if self.is_full() {
            return Err(PpoError::Shape("rollout buffer is full".into()));
        }
        if critic_obs.len() != self.critic_dim {
            return Err(PpoError::DimensionMismatch { expected: self.critic_dim, got: critic_obs.len() });
        }
        self.critic_obs.extend_from_slice(critic_obs);
        self.rewards.push(reward);
        self.values.push(value);
        self.dones.push(done);
        Ok(())
    }

    /// Run GAE per environment. `last_values[e]` bootstraps the state after the final step.
    pub fn finish(&mut self, last_values: &[f64], gamma: f64, lambda: f64) -> Result<(), PpoError> {
        if !self.is_full() {
            return Err(PpoError::Shape(format!(
                "buffer holds {} of {} samples",
                self.len(),
                self.capacity()
            )));
        }
        if last_values.len() != self.n_envs {
            return Err(PpoError::DimensionMismatch { expected: self.n_envs, got: last_values.len() });
        }
        for a in &self.actors {
            if !a.log_probs.is_empty() && a.log_probs.len() != self.len() {
                return Err(PpoError::Shape("actor rollout length differs from buffer".into()));
            }
        }
        let n = self.capacity();
        self.advantages = vec![0.0; n];
        self.returns = vec![0.0; n];
        let mut r = Vec::with_capacity(self.n_steps);
        let mut v = Vec::with_capacity(self.n_steps + 1);
        let mut d = Vec::with_capacity(self.n_steps);
        for e in 0..self.n_envs {
            r.clear();
            v.clear();
            d.clear();
            for t in 0..self.n_steps {
                let i = t * self.n_envs + e;
                r.push(self.rewards[i]);
                v.push(self.values[i]);
                d.push(self.dones[i]);
            }
            v.push(last_values[e]);
            let (adv, ret) = compute_gae(&r, &v, &d, gamma, lambda);
            for t in 0..self.n_steps {
                let i = t * self.n_envs + e;
                self.advantages[i] = adv[t];
                self.returns[i] = ret[t];
            }
        }
        if self.advantages.iter().any(|a| !a.is_finite()) {
            return Err(PpoError::UpdateDiverged {
                epoch: 0,
                minibatch: 0,
                detail: "non-finite advantage".into(),
            });
        }
        Ok(())
    }

    /// Whether actor `k` recorded samples in this rollout.
    pub fn has_actor(&self, k: usize) -> bool {
        self.actors.get(k).is_some_and(|a| !a.log_probs.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_runs_per_env() {
        let mut b = RolloutBuffer::new(2, 2, &[(1, 1)], 1);
        for t in 0..2 {
            for e in 0..2 {
                b.push_actor(0, &[0.0], &[0.0], 0.0).unwrap();
                b.push_step(&[0.0], if e == 0 { 1.0 } else { 0.0 }, 0.0, false).unwrap();
                let _ = t;
            }
        }
        assert!(b.push_step(&[0.0], 0.0, 0.0, false).is_err());
        b.finish(&[0.0, 10.0], 0.5, 1.0).unwrap();
        // env 0: rewards (1, 1), bootstrap 0
        assert_eq!(b.advantages[0], 1.5);
        assert_eq!(b.advantages[2], 1.0);
        // env 1: rewards (0, 0), bootstrap 10
        assert_eq!(b.advantages[1], 2.5);
        assert_eq!(b.advantages[3], 5.0);
        assert_eq!(b.returns, b.advantages);
    }

    #[test]
    fn finish_requires_full() {
        let mut b = RolloutBuffer::new(2, 1, &[], 1);
        b.push_step(&[0.0], 0.0, 0.0, false).unwrap();
        assert!(b.finish(&[0.0], 0.9, 0.9).is_err());
    }
}
