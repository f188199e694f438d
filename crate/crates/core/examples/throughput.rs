use std::time::Instant;

use smat_core::curriculum::{build_plan, run_stage, PlanOverrides, Preset, Session, TrainingContext};
use smat_core::ppo::PpoConfig;

fn main() {
    let ctx = TrainingContext::new(1);
    let plan = build_plan(Preset::FullSmat, &PlanOverrides::default()).unwrap();
    let ppo = PpoConfig {
        rollout_steps: 256,
        n_envs: 8,
        minibatch_size: 512,
        epochs: 4,
        learning_rate: 3e-4,
        ..PpoConfig::for_stage(1)
    };
    let mut s = Session::initial(&ctx, &plan[0], &ppo).unwrap();
    let t = Instant::now();
    let (_, rows) = run_stage(&mut s, 20_000).unwrap();
    let secs = t.elapsed().as_secs_f64();
    for r in &rows {
        println!("{} {:.3} {:.4} {} {:.4}", r.step, r.episode_reward, r.step_reward, r.episodes, r.approx_kl);
    }
    println!("{:.0} steps/s", s.steps() as f64 / secs);
}
