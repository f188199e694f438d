use std::time::Instant;

use smat_core::curriculum::{build_plan, run_stage, transition, PlanOverrides, Preset, Session, TrainingContext};
use smat_core::ppo::PpoConfig;

fn desk(stage: u8) -> PpoConfig {
    PpoConfig {
        rollout_steps: 256,
        n_envs: 8,
        minibatch_size: 512,
        epochs: 4,
        learning_rate: 3e-4,
        ..PpoConfig::for_stage(stage)
    }
}

fn main() {
    let t = Instant::now();
    let ctx = TrainingContext::new(7);
    let o = PlanOverrides::default();
    let full = build_plan(Preset::FullSmat, &o).unwrap();
    let s4only = build_plan(Preset::Stage4Only, &o).unwrap();
    let mut s1 = Session::initial(&ctx, &full[0], &desk(1)).unwrap();
    let (c1, _) = run_stage(&mut s1, 100_000).unwrap();
    let mut s2 = transition(&ctx, &c1, &full[1], &desk(2)).unwrap();
    let (c2, _) = run_stage(&mut s2, 50_000).unwrap();
    let mut s3 = transition(&ctx, &c2, &full[2], &desk(3)).unwrap();
    let e0 = s3.evaluate(1000).unwrap().mean_abs_command();
    let (c3, r3) = run_stage(&mut s3, 100_000).unwrap();
    let e3 = s3.evaluate(1000).unwrap().mean_abs_command();
    println!("stage3 eval |u| {e0:.4} -> {e3:.4}; train |u| {:.4} -> {:.4}  t={:.0}s", r3[0].mean_abs_u, r3.last().unwrap().mean_abs_u, t.elapsed().as_secs_f64());
    let mut f4 = transition(&ctx, &c3, &full[3], &desk(4)).unwrap();
    let mut o4 = transition(&ctx, &c2, &s4only[2], &desk(4)).unwrap();
    for k in 0..6 {
        run_stage(&mut f4, 50_000).unwrap();
        run_stage(&mut o4, 50_000).unwrap();
        let a = f4.evaluate(1000).unwrap().mean_abs_command();
        let b = o4.evaluate(1000).unwrap().mean_abs_command();
        println!("{}k full {a:.4} only {b:.4} ratio {:.3} t={:.0}s", (k + 1) * 50, b / a, t.elapsed().as_secs_f64());
    }
}
