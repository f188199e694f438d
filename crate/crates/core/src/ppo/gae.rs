/// Generalized advantage estimates for one trajectory.
///
/// `values` has one more entry than `rewards`: the last is the bootstrap value of the
/// state after the final step. `dones[t]` stops both bootstrapping and accumulation
/// across the boundary after step `t`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n + 1, "values needs a bootstrap entry");
    assert_eq!(dones.len(), n);
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}
