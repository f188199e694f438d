use rand::Rng;
use rand_distr::StandardNormal;

use super::{PolicyNet, PpoError};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of a diagonal Gaussian.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), x)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Differential entropy of a diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    /// Clipped to the actor's range; this is what the plant sees.
    pub action: Vec<f64>,
    /// Unclipped Gaussian draw; log-probs are evaluated on this.
    pub raw: Vec<f64>,
    pub log_prob: f64,
}

/// Draw an action. With `deterministic` the mean is returned and no randomness is used.
pub fn sample_action<R: Rng + ?Sized>(
    policy: &PolicyNet,
    obs: &[f64],
    rng: &mut R,
    deterministic: bool,
) -> Result<ActionSample, PpoError> {
    if !policy.is_actor() {
        return Err(PpoError::Shape("critic has no action distribution".into()));
    }
    let mean = policy.forward(obs)?;
    let log_std = policy.log_std();
    let raw: Vec<f64> = if deterministic {
        mean.clone()
    } else {
        mean.iter()
            .zip(log_std)
            .map(|(m, ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect()
    };
    let log_prob = gaussian_log_prob(&mean, log_std, &raw);
    let squash = policy.squash();
    Ok(ActionSample {
        action: raw.iter().map(|x| squash.apply(*x)).collect(),
        raw,
        log_prob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::{Activation, Squash};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bias_net(bias: f64, log_std: f64, squash: Squash) -> PolicyNet {
        PolicyNet::from_parts(vec![1, 1], vec![0.0, bias, log_std], 1, Activation::Tanh, squash)
            .unwrap()
    }

    #[test]
    fn deterministic_zero_net() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = bias_net(0.0, -0.5, Squash::Unit);
        let s = sample_action(&net, &[3.0], &mut rng, true).unwrap();
        assert_eq!(s.action, vec![0.0]);
        let neg = bias_net(-0.7, -0.5, Squash::Unit);
        assert_eq!(sample_action(&neg, &[3.0], &mut rng, true).unwrap().action, vec![0.0]);
        assert_eq!(sample_action(&neg, &[3.0], &mut rng, true).unwrap().raw, vec![-0.7]);
    }

    #[test]
    fn seeded_samples_repeat() {
        let net = bias_net(0.2, -0.5, Squash::Symmetric);
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..10)
                .map(|_| sample_action(&net, &[0.0], &mut rng, false).unwrap().raw[0])
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn empirical_mean_within_three_sigma() {
        let net = bias_net(0.3, 0.0, Squash::None);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_action(&net, &[0.0], &mut rng, false).unwrap().raw[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.3).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn log_prob_is_pre_clip() {
        let net = bias_net(2.0, -0.5, Squash::Symmetric);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_action(&net, &[0.0], &mut rng, false).unwrap();
        assert_eq!(s.action[0], s.raw[0].clamp(-1.0, 1.0));
        let sd = (-0.5f64).exp();
        let z = (s.raw[0] - 2.0) / sd;
        let oracle = -0.5 * z * z - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((s.log_prob - oracle).abs() < 1e-12);
    }
}
