//! Training sessions: rollout collection, updates and stage transitions.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Checkpoint, CurriculumError, RngState, StageConfig, AUGMENT_DIMS, AUGMENT_INIT_SCALE};
use crate::dynamics::{attach_exo, human_obs_dim, ExoAttachment, SimError, WalkerModel, EXO_OBS_DIM};
use crate::env::{critic_obs_dim, CoupledEnv, EnvSettings};
use crate::gait::{detect_toe_off, segment_cycles, SEGMENT_MIN_PERIOD};
use crate::ppo::{ppo_update, sample_action, Learner, PolicyNet, PpoConfig, RolloutBuffer, UpdateStats};
use crate::rewards::{ReferenceGait, Term};

const NET_STREAM: u64 = 10;
const TRAINER_STREAM: u64 = 20;
const ENV_STREAM: u64 = 1000;
const EVAL_STREAM: u64 = 9000;

/// Everything shared by all stages of a run.
#[derive(Debug, Clone)]
pub struct TrainingContext {
    /// Walker without exoskeleton.
    pub model: WalkerModel,
    /// Exoskeleton masses; the torque limit comes from the stage.
    pub exo: ExoAttachment,
    pub reference: Arc<ReferenceGait>,
    pub env: EnvSettings,
    pub seed: u64,
}

impl TrainingContext {
    pub fn new(seed: u64) -> Self {
        Self {
            model: WalkerModel::default(),
            exo: ExoAttachment::default(),
            reference: Arc::new(ReferenceGait::default()),
            env: EnvSettings::default(),
            seed,
        }
    }

    pub fn stage_model(&self, stage: &StageConfig) -> Result<WalkerModel, SimError> {
        if stage.exo_attached {
            let exo = ExoAttachment {
                tau_max: stage.tau_max,
                command: [0.0; 2],
                ..self.exo
            };
            attach_exo(&self.model, exo)
        } else {
            Ok(self.model.clone())
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// One line of the per-update metric log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub update: u64,
    pub step: u64,
    /// Mean return of episodes that ended during the rollout; NaN if none ended.
    pub episode_reward: f64,
    pub episodes: u64,
    pub step_reward: f64,
    /// Mean weighted value of each term per step, ordered as [`Term::ALL`].
    pub terms: [f64; 10],
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
    pub epochs: u64,
    pub mean_abs_u: f64,
    /// Mean right toe-off in percent of the gait cycle on environment 0; NaN if undetected.
    pub toe_off_pct: f64,
}

pub const METRIC_HEADER: [&str; 23] = [
    "update",
    "step",
    "episode_reward",
    "episodes",
    "step_reward",
    "r_fwd",
    "r_muscle",
    "r_delta_a",
    "r_hip_act",
    "r_exo",
    "r_delta_tau",
    "r_qpos",
    "r_qvel",
    "r_constraint",
    "r_foot",
    "policy_loss",
    "value_loss",
    "approx_kl",
    "clip_fraction",
    "entropy",
    "epochs",
    "mean_abs_u",
    "toe_off_pct",
];

pub fn write_metrics_csv<W: Write>(w: W, rows: &[MetricRow]) -> Result<(), CurriculumError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(METRIC_HEADER)?;
    for r in rows {
        let mut rec = vec![r.update.to_string(), r.step.to_string()];
        rec.push(r.episode_reward.to_string());
        rec.push(r.episodes.to_string());
        rec.push(r.step_reward.to_string());
        rec.extend(r.terms.iter().map(|t| t.to_string()));
        for v in [r.policy_loss, r.value_loss, r.approx_kl, r.clip_fraction, r.entropy] {
            rec.push(v.to_string());
        }
        rec.push(r.epochs.to_string());
        rec.push(r.mean_abs_u.to_string());
        rec.push(r.toe_off_pct.to_string());
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<MetricRow>, CurriculumError> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(METRIC_HEADER) {
        return Err(CurriculumError::InvalidPlan("unexpected metric log header".into()));
    }
    let bad = |m: String| CurriculumError::InvalidPlan(m);
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64, CurriculumError> {
            rec[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", METRIC_HEADER[i])))
        };
        let u = |i: usize| -> Result<u64, CurriculumError> {
            rec[i].parse::<u64>().map_err(|e| bad(format!("column {}: {e}", METRIC_HEADER[i])))
        };
        let mut terms = [0.0; 10];
        for (k, t) in terms.iter_mut().enumerate() {
            *t = f(5 + k)?;
        }
        rows.push(MetricRow {
            update: u(0)?,
            step: u(1)?,
            episode_reward: f(2)?,
            episodes: u(3)?,
            step_reward: f(4)?,
            terms,
            policy_loss: f(15)?,
            value_loss: f(16)?,
            approx_kl: f(17)?,
            clip_fraction: f(18)?,
            entropy: f(19)?,
            epochs: u(20)?,
            mean_abs_u: f(21)?,
            toe_off_pct: f(22)?,
        });
    }
    Ok(rows)
}

/// Per-step record of a deterministic evaluation rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalTrace {
    pub time: Vec<f64>,
    pub hip_angle: Vec<[f64; 2]>,
    pub hip_vel: Vec<[f64; 2]>,
    pub knee_angle: Vec<[f64; 2]>,
    pub ankle_angle: Vec<[f64; 2]>,
    /// Normalized exo commands.
    pub command: Vec<[f64; 2]>,
    /// Applied exo torque (Nm).
    pub exo_torque: Vec<[f64; 2]>,
    pub foot_force: Vec<[f64; 2]>,
    pub activations: Vec<Vec<f64>>,
    pub reward: Vec<f64>,
    /// Indices where a new episode began.
    pub resets: Vec<usize>,
}

impl EvalTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn mean_abs_command(&self) -> f64 {
        if self.command.is_empty() {
            return 0.0;
        }
        self.command.iter().map(|u| 0.5 * (u[0].abs() + u[1].abs())).sum::<f64>() / self.command.len() as f64
    }
}

struct StepRecord {
    human_obs: Vec<f64>,
    human_raw: Vec<f64>,
    human_logp: f64,
    exo: Option<([f64; EXO_OBS_DIM], Vec<f64>, f64)>,
    u: [f64; 2],
    critic_obs: Vec<f64>,
    value: f64,
    reward: f64,
    bootstrap: f64,
    done: bool,
    weighted: [f64; 10],
    hip_r: f64,
    foot_r: f64,
}

/// Trainer state for one stage.
#[derive(Debug, Clone)]
pub struct Session {
    ctx: TrainingContext,
    stage: StageConfig,
    ppo: PpoConfig,
    model: Arc<WalkerModel>,
    actors: [Learner; 2],
    critic: Learner,
    envs: Vec<CoupledEnv>,
    ep_returns: Vec<f64>,
    rng: ChaCha8Rng,
    steps: u64,
    updates: u64,
    config_hash: String,
    log: Vec<MetricRow>,
}

fn config_hash(ctx: &TrainingContext, stage: &StageConfig, ppo: &PpoConfig) -> String {
    let doc = serde_json::json!({
        "model": ctx.model,
        "exo": ctx.exo,
        "reference": *ctx.reference,
        "env": ctx.env,
        "seed": ctx.seed,
        "stage": stage,
        "ppo": ppo,
    });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Session {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        ctx: &TrainingContext,
        stage: &StageConfig,
        ppo: &PpoConfig,
        human: PolicyNet,
        exo: PolicyNet,
        critic: PolicyNet,
        rng: ChaCha8Rng,
        steps: u64,
        updates: u64,
    ) -> Result<Self, CurriculumError> {
        ppo.validate()?;
        stage.mask.validate()?;
        if stage.mask.exo_acts && !stage.exo_attached {
            return Err(CurriculumError::InvalidPlan("exo acts but is not attached".into()));
        }
        let model = Arc::new(
            ctx.stage_model(stage)
                .map_err(|e| CurriculumError::InvalidPlan(e.to_string()))?,
        );
        let nm = model.n_muscles();
        let want_human = human_obs_dim(nm, stage.augment);
        if human.n_in() != want_human {
            return Err(CurriculumError::DimensionMismatch(format!(
                "human actor takes {} inputs, stage {} needs {want_human}",
                human.n_in(),
                stage.stage
            )));
        }
        let envs = (0..ppo.n_envs)
            .map(|e| {
                CoupledEnv::seeded(
                    model.clone(),
                    ctx.reference.clone(),
                    stage.weights.clone(),
                    ctx.env.clone(),
                    stage.augment,
                    ctx.seed.wrapping_add(updates),
                    ENV_STREAM * stage.stage as u64 + e as u64,
                )
            })
            .collect();
        Ok(Self {
            config_hash: config_hash(ctx, stage, ppo),
            ctx: ctx.clone(),
            stage: stage.clone(),
            ppo: ppo.clone(),
            model,
            actors: [Learner::new(human, ppo.learning_rate), Learner::new(exo, ppo.learning_rate)],
            critic: Learner::new(critic, ppo.learning_rate),
            envs,
            ep_returns: vec![0.0; ppo.n_envs],
            rng,
            steps,
            updates,
            log: Vec::new(),
        })
    }

    /// Fresh networks for a stage without a source checkpoint.
    pub fn initial(ctx: &TrainingContext, stage: &StageConfig, ppo: &PpoConfig) -> Result<Self, CurriculumError> {
        if stage.source_stage.is_some() {
            return Err(CurriculumError::InvalidTransition(format!(
                "stage {} starts from stage {:?}",
                stage.stage, stage.source_stage
            )));
        }
        let nm = ctx.model.n_muscles();
        let mut rng = ctx.rng(NET_STREAM + stage.stage as u64);
        let human = PolicyNet::human_actor(human_obs_dim(nm, stage.augment), nm, &mut rng);
        let exo = PolicyNet::exo_actor(EXO_OBS_DIM, &mut rng);
        let critic = PolicyNet::critic(critic_obs_dim(nm), &mut rng);
        let trainer = ctx.rng(TRAINER_STREAM + stage.stage as u64);
        Self::assemble(ctx, stage, ppo, human, exo, critic, trainer, 0, 0)
    }

    /// Continue a stage from one of its own checkpoints.
    pub fn resume(
        ctx: &TrainingContext,
        ckpt: &Checkpoint,
        stage: &StageConfig,
        ppo: &PpoConfig,
    ) -> Result<Self, CurriculumError> {
        if ckpt.stage != stage.stage {
            return Err(CurriculumError::InvalidTransition(format!(
                "cannot resume stage {} from a stage {} checkpoint",
                stage.stage, ckpt.stage
            )));
        }
        ckpt.validate_dims(ctx.model.n_muscles())?;
        Self::assemble(
            ctx,
            stage,
            ppo,
            ckpt.human.clone(),
            ckpt.exo.clone(),
            ckpt.critic.clone(),
            ckpt.rng.restore()?,
            ckpt.steps,
            ckpt.updates,
        )
    }

    pub fn stage(&self) -> &StageConfig {
        &self.stage
    }

    pub fn ppo(&self) -> &PpoConfig {
        &self.ppo
    }

    pub fn model(&self) -> &WalkerModel {
        &self.model
    }

    pub fn human(&self) -> &PolicyNet {
        &self.actors[0].net
    }

    pub fn exo(&self) -> &PolicyNet {
        &self.actors[1].net
    }

    pub fn critic(&self) -> &PolicyNet {
        &self.critic.net
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn log(&self) -> &[MetricRow] {
        &self.log
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            stage: self.stage.stage,
            steps: self.steps,
            updates: self.updates,
            seed: self.ctx.seed,
            config_hash: self.config_hash.clone(),
            rng: RngState::capture(&self.rng),
            human: self.human().clone(),
            exo: self.exo().clone(),
            critic: self.critic().clone(),
        }
    }

    /// Collect one rollout, run GAE and one PPO update.
    pub fn run_update(&mut self) -> Result<MetricRow, CurriculumError> {
        let n_envs = self.envs.len();
        let n_steps = self.ppo.rollout_steps;
        let nm = self.model.n_muscles();
        let mask = self.stage.mask;
        let gamma = self.ppo.gamma;
        let mut buf = RolloutBuffer::new(
            n_steps,
            n_envs,
            &[(human_obs_dim(nm, self.stage.augment), nm), (EXO_OBS_DIM, 2)],
            critic_obs_dim(nm),
        );
        let mut term_sum = [0.0; 10];
        let mut reward_sum = 0.0;
        let mut abs_u = 0.0;
        let mut finished = Vec::new();
        let mut hip_trace = Vec::with_capacity(n_steps);
        let mut foot_trace = Vec::with_capacity(n_steps);
        let human = &self.actors[0].net;
        let exo = &self.actors[1].net;
        let critic = &self.critic.net;
        let start_step = self.steps;

        for t in 0..n_steps {
            let records: Vec<Result<StepRecord, SimError>> = self
                .envs
                .par_iter_mut()
                .map(|env| collect_step(env, human, exo, critic, mask, gamma))
                .collect();
            for (e, rec) in records.into_iter().enumerate() {
                let rec = rec.map_err(|source| CurriculumError::Sim {
                    step: start_step + (t * n_envs + e) as u64,
                    source,
                })?;
                buf.push_actor(0, &rec.human_obs, &rec.human_raw, rec.human_logp)?;
                if let Some((obs, raw, logp)) = &rec.exo {
                    buf.push_actor(1, obs, raw, *logp)?;
                }
                buf.push_step(&rec.critic_obs, rec.reward + rec.bootstrap, rec.value, rec.done)?;
                for (s, w) in term_sum.iter_mut().zip(rec.weighted) {
                    *s += w;
                }
                reward_sum += rec.reward;
                abs_u += 0.5 * (rec.u[0].abs() + rec.u[1].abs());
                self.ep_returns[e] += rec.reward;
                if rec.done {
                    finished.push(self.ep_returns[e]);
                    self.ep_returns[e] = 0.0;
                }
                if e == 0 {
                    hip_trace.push(rec.hip_r);
                    foot_trace.push(rec.foot_r);
                }
            }
        }
        let last: Vec<f64> = self
            .envs
            .iter()
            .map(|env| critic.value(&env.critic_obs()))
            .collect::<Result<_, _>>()?;
        buf.finish(&last, gamma, self.ppo.gae_lambda)?;
        let batch = buf.len() as u64;
        let learns = [mask.human_learns, mask.exo_learns && mask.exo_acts];
        let stats: UpdateStats = ppo_update(&mut self.actors, &learns, &mut self.critic, &buf, &self.ppo, &mut self.rng)
            .map_err(|source| CurriculumError::Update {
                step: start_step + batch,
                source,
            })?;
        self.steps += batch;
        self.updates += 1;

        let n = batch as f64;
        let toe_off = toe_off_pct(&hip_trace, &foot_trace, self.ctx.env.control_dt, self.model.body_weight());
        let row = MetricRow {
            update: self.updates,
            step: self.steps,
            episode_reward: if finished.is_empty() {
                f64::NAN
            } else {
                finished.iter().sum::<f64>() / finished.len() as f64
            },
            episodes: finished.len() as u64,
            step_reward: reward_sum / n,
            terms: term_sum.map(|s| s / n),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
            entropy: stats.entropy,
            epochs: stats.epochs_run as u64,
            mean_abs_u: abs_u / n,
            toe_off_pct: toe_off,
        };
        self.log.push(row.clone());
        Ok(row)
    }

    /// Deterministic rollout of the current policies on a fresh environment.
    pub fn evaluate(&self, n_steps: usize) -> Result<EvalTrace, CurriculumError> {
        let mut env = CoupledEnv::seeded(
            self.model.clone(),
            self.ctx.reference.clone(),
            self.stage.weights.clone(),
            self.ctx.env.clone(),
            self.stage.augment,
            self.ctx.seed,
            EVAL_STREAM + self.stage.stage as u64,
        );
        let mut rng = self.ctx.rng(EVAL_STREAM);
        let mut tr = EvalTrace::default();
        tr.resets.push(0);
        for k in 0..n_steps {
            let h = sample_action(self.human(), &env.human_obs(), &mut rng, true)?;
            let u = if self.stage.mask.exo_acts {
                let a = sample_action(self.exo(), &env.exo_obs(), &mut rng, true)?;
                [a.action[0], a.action[1]]
            } else {
                [0.0; 2]
            };
            let t = env
                .step(&h.action, u)
                .map_err(|source| CurriculumError::Sim { step: k as u64, source })?;
            let s = env.state();
            tr.time.push(s.time);
            tr.hip_angle.push(s.hip_angles());
            tr.hip_vel.push(s.hip_velocities());
            tr.knee_angle.push([s.q[crate::dynamics::dof::KNEE_R], s.q[crate::dynamics::dof::KNEE_L]]);
            tr.ankle_angle.push([s.q[crate::dynamics::dof::ANKLE_R], s.q[crate::dynamics::dof::ANKLE_L]]);
            tr.command.push(u);
            tr.exo_torque.push(s.exo_torque);
            tr.foot_force.push(s.foot_force);
            tr.activations.push(s.activations.clone());
            tr.reward.push(t.reward.total);
            if t.done() {
                env.reset();
                tr.resets.push(k + 1);
            }
        }
        Ok(tr)
    }
}

fn collect_step(
    env: &mut CoupledEnv,
    human: &PolicyNet,
    exo: &PolicyNet,
    critic: &PolicyNet,
    mask: crate::ppo::TrainMask,
    gamma: f64,
) -> Result<StepRecord, SimError> {
    let wrap = |e: crate::ppo::PpoError| SimError::InvalidInput(e.to_string());
    let human_obs = env.human_obs();
    let h = sample_action(human, &human_obs, env.rng_mut(), !mask.human_learns).map_err(wrap)?;
    let (exo_rec, u) = if mask.exo_acts {
        let obs = env.exo_obs();
        let a = sample_action(exo, &obs, env.rng_mut(), !mask.exo_learns).map_err(wrap)?;
        let u = [a.action[0], a.action[1]];
        (Some((obs, a.raw, a.log_prob)), u)
    } else {
        (None, [0.0; 2])
    };
    let critic_obs = env.critic_obs();
    let value = critic.value(&critic_obs).map_err(wrap)?;
    let tr = env.step(&h.action, u)?;
    let bootstrap = if tr.truncated {
        gamma * critic.value(&env.critic_obs()).map_err(wrap)?
    } else {
        0.0
    };
    let weighted = Term::ALL.map(|t| tr.reward.weighted(t));
    let hip_r = env.state().hip_angles()[0];
    let foot_r = env.state().foot_force[0];
    if tr.done() {
        env.reset();
    }
    Ok(StepRecord {
        human_obs,
        human_raw: h.raw,
        human_logp: h.log_prob,
        exo: exo_rec,
        u,
        critic_obs,
        value,
        reward: tr.reward.total,
        bootstrap,
        done: tr.done(),
        weighted,
        hip_r,
        foot_r,
    })
}

fn toe_off_pct(hip: &[f64], foot: &[f64], dt: f64, mg: f64) -> f64 {
    let Ok(cycles) = segment_cycles(hip, 1.0 / dt, SEGMENT_MIN_PERIOD) else {
        return f64::NAN;
    };
    let found: Vec<f64> = detect_toe_off(foot, &cycles, mg).into_iter().flatten().collect();
    if found.is_empty() {
        f64::NAN
    } else {
        found.iter().sum::<f64>() / found.len() as f64
    }
}

/// Start the session for `to` from the checkpoint of its source stage.
///
/// Stage 2 copies the human actor onto the exo-attached walker, stage 3 freezes the
/// human and draws a fresh exo actor, stage 4 widens the human input by the two exo
/// commands and lets both actors learn.
pub fn transition(
    ctx: &TrainingContext,
    from: &Checkpoint,
    to: &StageConfig,
    ppo: &PpoConfig,
) -> Result<Session, CurriculumError> {
    if to.source_stage != Some(from.stage) {
        return Err(CurriculumError::InvalidTransition(format!(
            "stage {} expects a stage {:?} checkpoint, got stage {}",
            to.stage, to.source_stage, from.stage
        )));
    }
    from.validate_dims(ctx.model.n_muscles())?;
    let mut rng = ctx.rng(NET_STREAM + to.stage as u64);
    let base = human_obs_dim(ctx.model.n_muscles(), false);
    let human = if to.augment && from.human.n_in() == base {
        from.human.augment_input(AUGMENT_DIMS, AUGMENT_INIT_SCALE, &mut rng)?
    } else {
        from.human.clone()
    };
    let exo = if to.reinit_exo {
        PolicyNet::exo_actor(EXO_OBS_DIM, &mut rng)
    } else {
        from.exo.clone()
    };
    let trainer = ctx.rng(TRAINER_STREAM + to.stage as u64);
    Session::assemble(ctx, to, ppo, human, exo, from.critic.clone(), trainer, 0, 0)
}

/// Run updates until at least `budget` environment steps have been collected in this
/// call, then return the checkpoint and the metric rows of this call.
pub fn run_stage(session: &mut Session, budget: u64) -> Result<(Checkpoint, Vec<MetricRow>), CurriculumError> {
    let start = session.log.len();
    let target = session.steps + budget;
    while session.steps < target {
        session.run_update()?;
    }
    Ok((session.checkpoint(), session.log[start..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::{build_plan, PlanOverrides, Preset};

    fn tiny() -> PpoConfig {
        PpoConfig {
            rollout_steps: 8,
            n_envs: 2,
            minibatch_size: 8,
            epochs: 2,
            ..PpoConfig::for_stage(1)
        }
    }

    #[test]
    fn zero_budget_returns_input() {
        let ctx = TrainingContext::new(1);
        let plan = build_plan(Preset::FullSmat, &PlanOverrides::default()).unwrap();
        let mut s = Session::initial(&ctx, &plan[0], &tiny()).unwrap();
        let before = s.checkpoint();
        let (ck, rows) = run_stage(&mut s, 0).unwrap();
        assert_eq!(ck, before);
        assert!(rows.is_empty());
    }

    #[test]
    fn stage_order_is_enforced() {
        let ctx = TrainingContext::new(1);
        let plan = build_plan(Preset::FullSmat, &PlanOverrides::default()).unwrap();
        let s = Session::initial(&ctx, &plan[0], &tiny()).unwrap();
        let ck = s.checkpoint();
        assert!(matches!(
            transition(&ctx, &ck, &plan[2], &tiny()),
            Err(CurriculumError::InvalidTransition(_))
        ));
        assert!(Session::initial(&ctx, &plan[1], &tiny()).is_err());
    }

    #[test]
    fn metric_csv_round_trip() {
        let ctx = TrainingContext::new(2);
        let plan = build_plan(Preset::FullSmat, &PlanOverrides::default()).unwrap();
        let mut s = Session::initial(&ctx, &plan[0], &tiny()).unwrap();
        let (_, rows) = run_stage(&mut s, 16).unwrap();
        assert_eq!(rows.len(), 1);
        let mut out = Vec::new();
        write_metrics_csv(&mut out, &rows).unwrap();
        let back = read_metrics_csv(out.as_slice()).unwrap();
        let mut again = Vec::new();
        write_metrics_csv(&mut again, &back).unwrap();
        assert_eq!(out, again);
        assert_eq!(rows[0].step, 16);
    }
}
