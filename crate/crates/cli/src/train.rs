use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use smat_core::curriculum::{
    load_checkpoint, read_metrics_csv, save_checkpoint, transition, write_metrics_csv, Checkpoint, EvalTrace,
    MetricRow, Preset, Session, StageConfig,
};
use smat_core::dynamics::WalkerModel;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub stage: Option<u8>,
    pub all: bool,
    pub preset: Option<Preset>,
    pub resume: Option<PathBuf>,
    /// Overrides the config's output directory.
    pub output_dir: Option<PathBuf>,
    /// Where to look for source-stage checkpoints; defaults to the output directory.
    pub source_dir: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: u8,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub eval: PathBuf,
    pub steps: u64,
    pub updates: u64,
}

pub fn checkpoint_path(dir: &Path, stage: u8) -> PathBuf {
    dir.join(format!("stage{stage}.ckpt"))
}

pub fn metrics_path(dir: &Path, stage: u8) -> PathBuf {
    dir.join(format!("stage{stage}_metrics.csv"))
}

pub fn eval_path(dir: &Path, stage: u8) -> PathBuf {
    dir.join(format!("stage{stage}_eval.csv"))
}

fn select_stages<'a>(
    plan: &'a [StageConfig],
    args: &TrainArgs,
    preset: Preset,
    resume_stage: Option<u8>,
) -> Result<Vec<&'a StageConfig>, CliError> {
    let ids: Vec<u8> = plan.iter().map(|s| s.stage).collect();
    let find = |n: u8| {
        plan.iter().find(|s| s.stage == n).ok_or_else(|| {
            CliError::Config(format!("stage {n} is not part of preset {preset} (stages {ids:?})"))
        })
    };
    match (args.all, args.stage) {
        (true, Some(_)) => Err(CliError::Config("pass either --all or --stage, not both".into())),
        (true, None) => {
            let first = resume_stage.unwrap_or(ids[0]);
            let start = ids.iter().position(|&s| s == first).ok_or_else(|| {
                CliError::Config(format!("resumed stage {first} is not part of preset {preset}"))
            })?;
            Ok(plan[start..].iter().collect())
        }
        (false, Some(n)) => {
            if !(1..=4).contains(&n) {
                return Err(CliError::Config(format!("stage must be 1 to 4, got {n}")));
            }
            if let Some(r) = resume_stage.filter(|&r| r != n) {
                return Err(CliError::Config(format!("checkpoint is from stage {r}, cannot resume stage {n}")));
            }
            Ok(vec![find(n)?])
        }
        (false, None) => match resume_stage {
            Some(r) => Ok(vec![find(r)?]),
            None => Err(CliError::Config("pass --all or --stage N".into())),
        },
    }
}

/// Run the requested stages, writing a checkpoint, a metric log and an evaluation
/// rollout per stage into the output directory.
pub fn cmd_train(cfg: &RunConfig, args: &TrainArgs) -> Result<Vec<StageOutcome>, CliError> {
    cfg.validate()?;
    let preset = args.preset.unwrap_or(cfg.preset);
    let out = args.output_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let source_dir = args.source_dir.clone().unwrap_or_else(|| out.clone());
    let plan = cfg.plan_for(preset)?;
    let resumed = match &args.resume {
        Some(p) => Some(load_checkpoint(p)?),
        None => None,
    };
    let stages = select_stages(&plan, args, preset, resumed.as_ref().map(|c| c.stage))?;
    std::fs::create_dir_all(&out)?;
    let mut resolved = cfg.clone();
    resolved.preset = preset;
    resolved.output_dir = out.clone();
    std::fs::write(out.join("config.json"), resolved.to_json())?;

    let ctx = cfg.context();
    let mut outcomes = Vec::new();
    let mut resumed = resumed;
    for stage in stages {
        let ppo = cfg.stage_ppo(stage.stage);
        let mut previous_rows = Vec::new();
        let mut session = if let Some(ck) = resumed.take() {
            let s = Session::resume(&ctx, &ck, stage, ppo)?;
            if s.config_hash() != ck.config_hash {
                return Err(CliError::Config(format!(
                    "checkpoint for stage {} was written with a different configuration",
                    ck.stage
                )));
            }
            let log = metrics_path(&out, stage.stage);
            if log.exists() {
                previous_rows = read_metrics_csv(File::open(&log)?)?
                    .into_iter()
                    .filter(|r| r.step <= ck.steps)
                    .collect();
            }
            s
        } else if let Some(src) = stage.source_stage {
            let path = [checkpoint_path(&out, src), checkpoint_path(&source_dir, src)]
                .into_iter()
                .find(|p| p.exists())
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "stage {} starts from the stage {src} checkpoint, which is missing in {}; train stage {src} first",
                        stage.stage,
                        source_dir.display()
                    ))
                })?;
            let from = load_checkpoint(&path)?;
            transition(&ctx, &from, stage, ppo)?
        } else {
            Session::initial(&ctx, stage, ppo)?
        };

        let ck_path = checkpoint_path(&out, stage.stage);
        while session.steps() < stage.budget {
            let row = session.run_update()?;
            if !args.quiet {
                eprintln!(
                    "stage {} update {} step {} episode_reward {:.4} step_reward {:.5} kl {:.4}",
                    stage.stage, row.update, row.step, row.episode_reward, row.step_reward, row.approx_kl
                );
            }
            if cfg.checkpoint_every > 0 && session.updates() % cfg.checkpoint_every == 0 {
                save_checkpoint(&session.checkpoint(), &ck_path)?;
            }
        }
        let ck = session.checkpoint();
        save_checkpoint(&ck, &ck_path)?;
        let mut rows: Vec<MetricRow> = previous_rows;
        rows.extend_from_slice(session.log());
        let m_path = metrics_path(&out, stage.stage);
        write_metrics_csv(BufWriter::new(File::create(&m_path)?), &rows)?;
        let trace = session.evaluate(cfg.eval_steps)?;
        let e_path = eval_path(&out, stage.stage);
        write_eval_trace(&e_path, &trace, session.model())?;
        outcomes.push(StageOutcome {
            stage: stage.stage,
            checkpoint: ck_path,
            metrics: m_path,
            eval: e_path,
            steps: ck.steps,
            updates: ck.updates,
        });
    }
    Ok(outcomes)
}

pub const EVAL_HEADER: [&str; 17] = [
    "time_s",
    "episode",
    "hip_angle_r_rad",
    "hip_angle_l_rad",
    "hip_vel_r_rads",
    "hip_vel_l_rads",
    "knee_angle_r_rad",
    "knee_angle_l_rad",
    "ankle_angle_r_rad",
    "ankle_angle_l_rad",
    "u_r",
    "u_l",
    "exo_torque_r_nm",
    "exo_torque_l_nm",
    "foot_force_r_n",
    "foot_force_l_n",
    "reward",
];

/// Evaluation rollout as CSV; one activation column per muscle follows [`EVAL_HEADER`].
pub fn write_eval_trace(path: &Path, trace: &EvalTrace, model: &WalkerModel) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<String> = EVAL_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend(model.muscles.iter().map(|m| format!("act_{}", m.name)));
    w.write_record(&header)?;
    let mut episode = 0usize;
    for k in 0..trace.len() {
        if trace.resets.get(episode + 1) == Some(&k) {
            episode += 1;
        }
        let mut row = vec![
            trace.time[k].to_string(),
            episode.to_string(),
        ];
        let pairs = [
            trace.hip_angle[k],
            trace.hip_vel[k],
            trace.knee_angle[k],
            trace.ankle_angle[k],
            trace.command[k],
            trace.exo_torque[k],
            trace.foot_force[k],
        ];
        for p in pairs {
            row.push(p[0].to_string());
            row.push(p[1].to_string());
        }
        row.push(trace.reward[k].to_string());
        row.extend(trace.activations[k].iter().map(|a| a.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Checkpoint of a finished stage in a run directory.
pub fn load_stage_checkpoint(dir: &Path, stage: u8) -> Result<Checkpoint, CliError> {
    Ok(load_checkpoint(&checkpoint_path(dir, stage))?)
}
