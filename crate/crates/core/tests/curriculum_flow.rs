use smat_core::curriculum::{
    build_plan, load_checkpoint, run_stage, save_checkpoint, transition, PlanOverrides, Preset, Session,
    TrainingContext,
};
use smat_core::ppo::PpoConfig;

fn tiny(stage: u8) -> PpoConfig {
    PpoConfig {
        rollout_steps: 8,
        n_envs: 2,
        minibatch_size: 8,
        epochs: 2,
        ..PpoConfig::for_stage(stage)
    }
}

#[test]
fn full_plan_chains_through_checkpoints() {
    let ctx = TrainingContext::new(3);
    let plan = build_plan(Preset::FullSmat, &PlanOverrides::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut s = Session::initial(&ctx, &plan[0], &tiny(1)).unwrap();
    let (mut ck, rows) = run_stage(&mut s, 16).unwrap();
    assert_eq!(rows.len(), 1);
    for stage in &plan[1..] {
        let path = dir.path().join(format!("stage{}.ckpt", ck.stage));
        save_checkpoint(&ck, &path).unwrap();
        let from = load_checkpoint(&path).unwrap();
        assert_eq!(from, ck);
        let mut next = transition(&ctx, &from, stage, &tiny(stage.stage)).unwrap();
        assert_eq!(next.model().torque_limit(), stage.tau_max);
        let (out, rows) = run_stage(&mut next, 16).unwrap();
        assert_eq!(out.stage, stage.stage);
        assert!(out.steps >= 16 && rows.iter().all(|r| r.policy_loss.is_finite()));
        ck = out;
    }
    assert_eq!(ck.human.n_in(), 29);
}

#[test]
fn stage4_only_starts_from_stage2() {
    let ctx = TrainingContext::new(4);
    let full = build_plan(Preset::FullSmat, &PlanOverrides::default()).unwrap();
    let only = build_plan(Preset::Stage4Only, &PlanOverrides::default()).unwrap();
    let s1 = Session::initial(&ctx, &full[0], &tiny(1)).unwrap();
    let mut s2 = transition(&ctx, &s1.checkpoint(), &full[1], &tiny(2)).unwrap();
    let (ck2, _) = run_stage(&mut s2, 16).unwrap();
    assert!(transition(&ctx, &ck2, &full[3], &tiny(4)).is_err());
    let s4 = transition(&ctx, &ck2, &only[2], &tiny(4)).unwrap();
    assert_eq!(s4.human().n_in(), ck2.human.n_in() + 2);
    assert_ne!(s4.exo(), &ck2.exo);
    assert_eq!(s4.model().torque_limit(), 25.0);
}

#[test]
fn seeded_sessions_are_reproducible() {
    let run = || {
        let ctx = TrainingContext::new(9);
        let plan = build_plan(Preset::FullSmat, &PlanOverrides::default()).unwrap();
        let mut s = Session::initial(&ctx, &plan[0], &tiny(1)).unwrap();
        run_stage(&mut s, 48).unwrap().0.to_bytes().unwrap()
    };
    assert_eq!(run(), run());
}
