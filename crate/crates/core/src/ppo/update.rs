use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dist::entropy;
use super::{ActorRollout, Adam, ForwardCache, PolicyNet, PpoConfig, PpoError, RolloutBuffer};

/// Minibatch gradients are accumulated over this many fixed chunks and reduced in order,
/// so results do not depend on the worker count.
const GRAD_CHUNKS: usize = 32;

/// A network together with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub net: PolicyNet,
    pub opt: Adam,
}

impl Learner {
    pub fn new(net: PolicyNet, lr: f64) -> Self {
        let opt = Adam::new(net.params().len(), lr);
        Self { net, opt }
    }
}

/// Minibatch statistics of one actor's surrogate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    /// Mean approximate KL of the last epoch that ran, summed over learning actors.
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub epochs_run: usize,
    pub minibatch_updates: usize,
    pub early_stopped: bool,
}

/// Shift and scale to zero mean and unit population standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if adv.is_empty() {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    for a in adv.iter_mut() {
        *a -= mean;
        if sd > 0.0 {
            *a /= sd;
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    loss: f64,
    kl: f64,
    clipped: f64,
}

impl Sums {
    fn add(&mut self, o: Sums) {
        self.loss += o.loss;
        self.kl += o.kl;
        self.clipped += o.clipped;
    }
}

/// Surrogate terms summed over `idx`, with gradients of `scale * loss` accumulated into
/// `grad`. The entropy bonus is not included.
#[allow(clippy::too_many_arguments)]
fn actor_chunk(
    net: &PolicyNet,
    data: &ActorRollout,
    idx: &[usize],
    adv: &[f64],
    clip: f64,
    scale: f64,
    cache: &mut ForwardCache,
    grad: &mut [f64],
) -> Sums {
    let log_std = net.log_std();
    let n_out = net.n_out();
    let ls_off = grad.len() - n_out;
    let inv_var: Vec<f64> = log_std.iter().map(|l| (-2.0 * l).exp()).collect();
    let mut d_mean = vec![0.0; n_out];
    let mut s = Sums::default();
    for (&i, &a) in idx.iter().zip(adv) {
        net.forward_cached(data.obs_row(i), cache)
            .expect("rollout rows match network input");
        let mean = cache.output();
        let x = data.action_row(i);
        let logp = super::gaussian_log_prob(mean, log_std, x);
        let log_ratio = logp - data.log_probs[i];
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        let surr1 = ratio * a;
        let surr2 = clipped * a;
        s.loss -= surr1.min(surr2);
        s.kl += (ratio - 1.0) - log_ratio;
        if (ratio - 1.0).abs() > clip {
            s.clipped += 1.0;
        }
        let flows = surr1 <= surr2 || (ratio - clipped).abs() == 0.0;
        if !flows {
            continue;
        }
        // d(-ratio * a)/d logp
        let g = -ratio * a * scale;
        for k in 0..n_out {
            let diff = x[k] - mean[k];
            d_mean[k] = g * diff * inv_var[k];
            grad[ls_off + k] += g * (diff * diff * inv_var[k] - 1.0);
        }
        net.backward(cache, &d_mean, grad);
    }
    s
}

/// Mean clipped-surrogate loss (with entropy bonus) of one actor over `idx` and its
/// gradient, accumulated into `grad`. `adv` is aligned with `idx`.
pub fn actor_loss_grad(
    net: &PolicyNet,
    data: &ActorRollout,
    idx: &[usize],
    adv: &[f64],
    clip: f64,
    entropy_coef: f64,
    grad: &mut [f64],
) -> LossStats {
    let n = idx.len() as f64;
    let mut cache = ForwardCache::default();
    let s = actor_chunk(net, data, idx, adv, clip, 1.0 / n, &mut cache, grad);
    let ent = entropy(net.log_std());
    add_entropy_grad(net, entropy_coef, grad);
    LossStats {
        loss: s.loss / n - entropy_coef * ent,
        approx_kl: s.kl / n,
        clip_fraction: s.clipped / n,
        entropy: ent,
    }
}

fn add_entropy_grad(net: &PolicyNet, entropy_coef: f64, grad: &mut [f64]) {
    let off = grad.len() - net.n_log_std();
    for g in &mut grad[off..] {
        *g -= entropy_coef;
    }
}

fn critic_chunk(
    net: &PolicyNet,
    buf: &RolloutBuffer,
    idx: &[usize],
    scale: f64,
    cache: &mut ForwardCache,
    grad: &mut [f64],
) -> f64 {
    let mut loss = 0.0;
    for &i in idx {
        net.forward_cached(buf.critic_row(i), cache)
            .expect("critic rows match network input");
        let err = cache.output()[0] - buf.returns[i];
        loss += 0.5 * err * err;
        net.backward(cache, &[err * scale], grad);
    }
    loss
}

fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

struct ChunkOut {
    actor_grads: Vec<Vec<f64>>,
    actor_sums: Vec<Sums>,
    critic_grad: Vec<f64>,
    critic_loss: f64,
}

/// One PPO update over a finished buffer.
///
/// `learns[k]` selects which of `actors` are trained; the others are left untouched.
/// The critic is trained whenever any actor learns. Epochs stop early once the mean
/// approximate KL of an epoch exceeds `cfg.target_kl`.
pub fn ppo_update<R: Rng + ?Sized>(
    actors: &mut [Learner],
    learns: &[bool],
    critic: &mut Learner,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, PpoError> {
    if actors.len() != learns.len() || actors.len() != buf.actors.len() {
        return Err(PpoError::Shape("actor, mask and buffer counts differ".into()));
    }
    if buf.advantages.len() != buf.len() || buf.is_empty() {
        return Err(PpoError::Shape("advantages not computed".into()));
    }
    for (k, a) in actors.iter().enumerate() {
        if learns[k] && !buf.has_actor(k) {
            return Err(PpoError::Shape(format!("actor {k} learns but recorded no samples")));
        }
        if learns[k] && a.net.n_in() != buf.actors[k].obs_dim {
            return Err(PpoError::DimensionMismatch {
                expected: a.net.n_in(),
                got: buf.actors[k].obs_dim,
            });
        }
    }
    let mut stats = UpdateStats::default();
    if !learns.iter().any(|l| *l) {
        return Ok(stats);
    }
    let learning: Vec<usize> = (0..actors.len()).filter(|k| learns[*k]).collect();
    let n = buf.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mb_size = cfg.minibatch_size.min(n);

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_kl = 0.0;
        let mut epoch_clip = 0.0;
        let mut epoch_pl = 0.0;
        let mut epoch_vl = 0.0;
        let mut n_mb = 0usize;
        for (mb_i, mb) in order.chunks(mb_size).enumerate() {
            let mut adv: Vec<f64> = mb.iter().map(|&i| buf.advantages[i]).collect();
            normalize_advantages(&mut adv);
            let m = mb.len();
            let scale = 1.0 / m as f64;
            let chunk = m.div_ceil(GRAD_CHUNKS);
            let nets: Vec<&PolicyNet> = learning.iter().map(|&k| &actors[k].net).collect();
            let critic_net = &critic.net;
            let outs: Vec<ChunkOut> = mb
                .par_chunks(chunk)
                .zip(adv.par_chunks(chunk))
                .map(|(idx, a)| {
                    let mut cache = ForwardCache::default();
                    let mut actor_grads = Vec::with_capacity(nets.len());
                    let mut actor_sums = Vec::with_capacity(nets.len());
                    for (j, net) in nets.iter().enumerate() {
                        let mut g = vec![0.0; net.params().len()];
                        let s = actor_chunk(
                            net,
                            &buf.actors[learning[j]],
                            idx,
                            a,
                            cfg.clip_range,
                            scale,
                            &mut cache,
                            &mut g,
                        );
                        actor_grads.push(g);
                        actor_sums.push(s);
                    }
                    let mut critic_grad = vec![0.0; critic_net.params().len()];
                    let critic_loss =
                        critic_chunk(critic_net, buf, idx, scale, &mut cache, &mut critic_grad);
                    ChunkOut {
                        actor_grads,
                        actor_sums,
                        critic_grad,
                        critic_loss,
                    }
                })
                .collect();

            let mut outs = outs.into_iter();
            let mut total = outs.next().expect("minibatch is nonempty");
            for o in outs {
                for (acc, g) in total.actor_grads.iter_mut().zip(&o.actor_grads) {
                    for (x, y) in acc.iter_mut().zip(g) {
                        *x += y;
                    }
                }
                for (acc, s) in total.actor_sums.iter_mut().zip(&o.actor_sums) {
                    acc.add(*s);
                }
                for (x, y) in total.critic_grad.iter_mut().zip(&o.critic_grad) {
                    *x += y;
                }
                total.critic_loss += o.critic_loss;
            }

            let mut pl = 0.0;
            let mut kl = 0.0;
            let mut clipf = 0.0;
            for (j, &k) in learning.iter().enumerate() {
                let net = &actors[k].net;
                let ent = entropy(net.log_std());
                add_entropy_grad(net, cfg.entropy_coef, &mut total.actor_grads[j]);
                let s = total.actor_sums[j];
                pl += s.loss * scale - cfg.entropy_coef * ent;
                kl += s.kl * scale;
                clipf += s.clipped * scale;
                stats.entropy = ent;
            }
            clipf /= learning.len() as f64;
            let vl = total.critic_loss * scale;
            let finite = pl.is_finite()
                && vl.is_finite()
                && total.actor_grads.iter().flatten().all(|g| g.is_finite())
                && total.critic_grad.iter().all(|g| g.is_finite());
            if !finite {
                return Err(PpoError::UpdateDiverged {
                    epoch,
                    minibatch: mb_i,
                    detail: format!("policy loss {pl}, value loss {vl}, approx kl {kl}"),
                });
            }
            for (j, &k) in learning.iter().enumerate() {
                let g = &mut total.actor_grads[j];
                clip_grad_norm(g, cfg.max_grad_norm);
                let l = &mut actors[k];
                l.opt.step(l.net.params_mut(), g);
            }
            clip_grad_norm(&mut total.critic_grad, cfg.max_grad_norm);
            critic.opt.step(critic.net.params_mut(), &total.critic_grad);

            epoch_kl += kl;
            epoch_clip += clipf;
            epoch_pl += pl;
            epoch_vl += vl;
            n_mb += 1;
            stats.minibatch_updates += 1;
        }
        let nm = n_mb as f64;
        stats.approx_kl = epoch_kl / nm;
        stats.clip_fraction = epoch_clip / nm;
        stats.policy_loss = epoch_pl / nm;
        stats.value_loss = epoch_vl / nm;
        stats.epochs_run = epoch + 1;
        if stats.approx_kl > cfg.target_kl {
            stats.early_stopped = epoch + 1 < cfg.epochs;
            break;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::{sample_action, Activation, Squash};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_rollout(n: usize, rng: &mut ChaCha8Rng) -> ActorRollout {
        let mut data = ActorRollout {
            obs_dim: 2,
            act_dim: 2,
            obs: Vec::new(),
            raw_actions: Vec::new(),
            log_probs: Vec::new(),
        };
        for _ in 0..n {
            data.obs.extend([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            data.raw_actions.extend([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            data.log_probs.push(rng.random_range(-2.5..-0.5));
        }
        data
    }

    #[test]
    fn normalization_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a: Vec<f64> = (0..1000).map(|_| rng.random_range(-5.0..20.0)).collect();
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let sd = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-10);
        assert!((sd - 1.0).abs() < 1e-10);
    }

    #[test]
    fn surrogate_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = PolicyNet::init(2, &[5], 2, Squash::Symmetric, Some(-0.3), 1.0, &mut rng);
        let data = toy_rollout(40, &mut rng);
        let idx: Vec<usize> = (0..40).collect();
        let adv: Vec<f64> = (0..40).map(|_| rng.random_range(-2.0..2.0)).collect();
        let clip = 0.15;
        let mut grad = vec![0.0; net.params().len()];
        actor_loss_grad(&net, &data, &idx, &adv, clip, 0.01, &mut grad);
        let loss_at = |p: &[f64]| {
            let mut n2 = net.clone();
            n2.params_mut().copy_from_slice(p);
            let mut g = vec![0.0; p.len()];
            actor_loss_grad(&n2, &data, &idx, &adv, clip, 0.01, &mut g).loss
        };
        let h = 1e-6;
        for i in 0..grad.len() {
            let mut p = net.params().to_vec();
            p[i] += h;
            let up = loss_at(&p);
            p[i] -= 2.0 * h;
            let down = loss_at(&p);
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[i]).abs() / grad[i].abs().max(1e-3);
            assert!(err < 1e-5, "param {i}: fd {fd} analytic {}", grad[i]);
        }
    }

    fn ratio_batch(ratio: f64, adv: f64) -> (PolicyNet, ActorRollout) {
        let net = PolicyNet::from_parts(vec![1, 1], vec![0.0, 0.0, 0.0], 1, Activation::Tanh, Squash::None)
            .unwrap();
        let logp = crate::ppo::gaussian_log_prob(&[0.0], &[0.0], &[0.3]);
        let data = ActorRollout {
            obs_dim: 1,
            act_dim: 1,
            obs: vec![1.0],
            raw_actions: vec![0.3],
            log_probs: vec![logp - ratio.ln()],
        };
        let _ = adv;
        (net, data)
    }

    #[test]
    fn ratio_two_uses_clipped_bound() {
        let (net, data) = ratio_batch(2.0, 1.0);
        let mut g = vec![0.0; 3];
        let s = actor_loss_grad(&net, &data, &[0], &[1.0], 0.15, 0.0, &mut g);
        assert!((s.loss + 1.15).abs() < 1e-12);
        assert_eq!(s.clip_fraction, 1.0);
        assert!(g.iter().all(|x| *x == 0.0));
        // negative advantage keeps the unclipped, more pessimistic branch
        let mut g = vec![0.0; 3];
        let s = actor_loss_grad(&net, &data, &[0], &[-1.0], 0.15, 0.0, &mut g);
        assert!((s.loss - 2.0).abs() < 1e-12);
        assert!(g.iter().any(|x| *x != 0.0));
    }

    fn bandit_setup(seed: u64) -> (Learner, Learner, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = PolicyNet::init(1, &[8], 1, Squash::Symmetric, Some(-0.5), 0.01, &mut rng);
        let critic = PolicyNet::critic(1, &mut rng);
        (Learner::new(actor, 0.01), Learner::new(critic, 0.01), rng)
    }

    fn bandit_rollout(actor: &PolicyNet, critic: &PolicyNet, n: usize, rng: &mut ChaCha8Rng) -> RolloutBuffer {
        let mut buf = RolloutBuffer::new(n, 1, &[(1, 1)], 1);
        for _ in 0..n {
            let s = sample_action(actor, &[1.0], rng, false).unwrap();
            let r = if s.action[0] > 0.0 { 1.0 } else { 0.0 };
            buf.push_actor(0, &[1.0], &s.raw, s.log_prob).unwrap();
            buf.push_step(&[1.0], r, critic.value(&[1.0]).unwrap(), true).unwrap();
        }
        buf.finish(&[0.0], 0.99, 0.95).unwrap();
        buf
    }

    fn prob_arm_a(actor: &PolicyNet) -> f64 {
        let mu = actor.forward(&[1.0]).unwrap()[0];
        let sd = actor.log_std()[0].exp();
        // P(N(mu, sd) > 0) via the complementary error function
        0.5 * erfc(-mu / (sd * std::f64::consts::SQRT_2))
    }

    fn erfc(x: f64) -> f64 {
        // Numerical Recipes erfcc, relative error < 1.2e-7
        let z = x.abs();
        let t = 1.0 / (1.0 + 0.5 * z);
        let r = t * (-z * z - 1.265_512_23
            + t * (1.000_023_68
                + t * (0.374_091_96
                    + t * (0.096_784_18
                        + t * (-0.186_288_06
                            + t * (0.278_868_07
                                + t * (-1.135_203_98
                                    + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
            .exp();
        if x >= 0.0 { r } else { 2.0 - r }
    }

    #[test]
    fn bandit_learns_rewarding_arm() {
        let (mut actor, mut critic, mut rng) = bandit_setup(9);
        let cfg = PpoConfig {
            learning_rate: 0.01,
            rollout_steps: 64,
            n_envs: 1,
            minibatch_size: 32,
            epochs: 4,
            target_kl: 0.05,
            entropy_coef: 0.0,
            ..PpoConfig::default()
        };
        assert!(prob_arm_a(&actor.net) < 0.6);
        let mut updates = 0;
        while prob_arm_a(&actor.net) <= 0.95 && updates < 200 {
            let buf = bandit_rollout(&actor.net, &critic.net, 64, &mut rng);
            let mut actors = [actor];
            ppo_update(&mut actors, &[true], &mut critic, &buf, &cfg, &mut rng).unwrap();
            let [a] = actors;
            actor = a;
            updates += 1;
        }
        assert!(prob_arm_a(&actor.net) > 0.95, "after {updates} updates");
    }

    #[test]
    fn frozen_actor_is_bitwise_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let human = PolicyNet::init(3, &[4], 2, Squash::Unit, Some(-0.5), 1.0, &mut rng);
        let exo = PolicyNet::init(2, &[4], 2, Squash::Symmetric, Some(-0.5), 1.0, &mut rng);
        let critic = PolicyNet::critic(4, &mut rng);
        let mut buf = RolloutBuffer::new(16, 2, &[(3, 2), (2, 2)], 4);
        for _ in 0..32 {
            let oh: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let oe: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sh = sample_action(&human, &oh, &mut rng, false).unwrap();
            let se = sample_action(&exo, &oe, &mut rng, false).unwrap();
            buf.push_actor(0, &oh, &sh.raw, sh.log_prob).unwrap();
            buf.push_actor(1, &oe, &se.raw, se.log_prob).unwrap();
            let co: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            buf.push_step(&co, rng.random_range(-1.0..1.0), 0.0, rng.random_bool(0.1)).unwrap();
        }
        buf.finish(&[0.0, 0.0], 0.99, 0.95).unwrap();
        let cfg = PpoConfig {
            rollout_steps: 16,
            n_envs: 2,
            minibatch_size: 8,
            epochs: 3,
            learning_rate: 1e-3,
            target_kl: 1e9,
            ..PpoConfig::default()
        };
        let mut actors = [Learner::new(human.clone(), 1e-3), Learner::new(exo.clone(), 1e-3)];
        let mut c = Learner::new(critic.clone(), 1e-3);
        let stats = ppo_update(&mut actors, &[false, true], &mut c, &buf, &cfg, &mut rng).unwrap();
        assert_eq!(stats.epochs_run, 3);
        assert_eq!(actors[0].net, human);
        assert_ne!(actors[1].net, exo);
        assert_ne!(c.net, critic);
    }

    fn kl_fixture() -> (Learner, Learner, RolloutBuffer) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let actor = PolicyNet::init(2, &[8], 1, Squash::None, Some(-0.5), 1.0, &mut rng);
        let critic = PolicyNet::critic(2, &mut rng);
        let mut buf = RolloutBuffer::new(64, 1, &[(2, 1)], 2);
        for _ in 0..64 {
            let o = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let s = sample_action(&actor, &o, &mut rng, false).unwrap();
            buf.push_actor(0, &o, &s.raw, s.log_prob).unwrap();
            buf.push_step(&o, s.raw[0] * 3.0, 0.0, true).unwrap();
        }
        buf.finish(&[0.0], 0.99, 0.95).unwrap();
        (Learner::new(actor, 0.05), Learner::new(critic, 0.05), buf)
    }

    #[test]
    fn kl_early_stop_applies_no_later_update() {
        let cfg = PpoConfig {
            rollout_steps: 64,
            n_envs: 1,
            minibatch_size: 16,
            epochs: 20,
            learning_rate: 0.05,
            max_grad_norm: 10.0,
            ..PpoConfig::default()
        };
        let (a, c, buf) = kl_fixture();
        let mut actors = [a.clone()];
        let mut critic = c.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let stats = ppo_update(&mut actors, &[true], &mut critic, &buf, &cfg, &mut rng).unwrap();
        assert!(stats.early_stopped);
        assert!(stats.approx_kl > cfg.target_kl);
        let k = stats.epochs_run;
        assert!(k < 20);
        assert_eq!(stats.minibatch_updates, 4 * k);

        // the same seed with exactly k epochs must give identical parameters
        let mut actors2 = [a];
        let mut critic2 = c;
        let mut rng2 = ChaCha8Rng::seed_from_u64(4);
        let cfg_k = PpoConfig { epochs: k, ..cfg };
        ppo_update(&mut actors2, &[true], &mut critic2, &buf, &cfg_k, &mut rng2).unwrap();
        assert_eq!(actors[0].net, actors2[0].net);
        assert_eq!(critic.net, critic2.net);
    }

    #[test]
    fn update_is_reproducible() {
        let cfg = PpoConfig {
            rollout_steps: 64,
            n_envs: 1,
            minibatch_size: 16,
            epochs: 3,
            learning_rate: 1e-3,
            ..PpoConfig::default()
        };
        let run = || {
            let (a, mut c, buf) = kl_fixture();
            let mut actors = [a];
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let s = ppo_update(&mut actors, &[true], &mut c, &buf, &cfg, &mut rng).unwrap();
            (s, actors[0].net.clone())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn nan_advantage_reports_divergence() {
        let (a, mut c, mut buf) = kl_fixture();
        buf.advantages[3] = f64::NAN;
        let cfg = PpoConfig {
            rollout_steps: 64,
            n_envs: 1,
            minibatch_size: 64,
            epochs: 1,
            ..PpoConfig::default()
        };
        let mut actors = [a];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = ppo_update(&mut actors, &[true], &mut c, &buf, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, PpoError::UpdateDiverged { .. }));
    }
}
