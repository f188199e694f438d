//! Four-stage training plan, stage transitions, checkpoints and ablation presets.

mod checkpoint;
mod session;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, RngState, CHECKPOINT_VERSION, MAGIC};
pub use session::{
    read_metrics_csv, run_stage, EvalTrace, transition, write_metrics_csv, MetricRow, Session, TrainingContext,
    METRIC_HEADER,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::SimError;
use crate::ppo::{PpoError, TrainMask};
use crate::rewards::{get_stage_weights, RewardWeights, Term};

/// Torque limit per stage in Nm (stage 1 has no exoskeleton).
pub const TORQUE_SCHEDULE: [f64; 4] = [0.0, 0.0, 6.0, 25.0];
/// Default step budgets per stage.
pub const DEFAULT_BUDGETS: [u64; 4] = [2_000_000, 1_000_000, 200_000, 500_000];
/// Inputs appended to the human actor in stage 4.
pub const AUGMENT_DIMS: usize = 2;
/// Range of the uniform init of the appended input weights.
pub const AUGMENT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error("invalid transition: {0}")]
    InvalidTransition(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("simulation failed at step {step}: {source}")]
    Sim { step: u64, source: SimError },
    #[error("update failed at step {step}: {source}")]
    Update { step: u64, source: PpoError },
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("metric log: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: u8,
    pub budget: u64,
    pub tau_max: f64,
    pub mask: TrainMask,
    pub weights: RewardWeights,
    /// Append the current exo commands to the human observation.
    pub augment: bool,
    pub exo_attached: bool,
    /// Stage whose checkpoint this stage starts from.
    pub source_stage: Option<u8>,
    /// Fresh exo actor instead of the one in the source checkpoint.
    pub reinit_exo: bool,
}

impl StageConfig {
    pub fn default_for(stage: u8) -> Result<Self, CurriculumError> {
        let weights = get_stage_weights(stage)
            .map_err(|e| CurriculumError::InvalidPlan(e.to_string()))?;
        let i = stage as usize - 1;
        let (mask, source) = match stage {
            1 => (TrainMask::HUMAN_ONLY, None),
            2 => (TrainMask::HUMAN_ONLY, Some(1)),
            3 => (TrainMask::EXO_ONLY, Some(2)),
            _ => (TrainMask::JOINT, Some(3)),
        };
        Ok(Self {
            stage,
            budget: DEFAULT_BUDGETS[i],
            tau_max: TORQUE_SCHEDULE[i],
            mask,
            weights,
            augment: stage == 4,
            exo_attached: stage >= 2,
            source_stage: source,
            reinit_exo: stage == 3,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    FullSmat,
    Stage3Only,
    Stage4Only,
    Stage4NoRexo,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::FullSmat, Preset::Stage3Only, Preset::Stage4Only, Preset::Stage4NoRexo];

    pub fn id(self) -> &'static str {
        match self {
            Preset::FullSmat => "full-smat",
            Preset::Stage3Only => "stage3-only",
            Preset::Stage4Only => "stage4-only",
            Preset::Stage4NoRexo => "stage4-no-rexo",
        }
    }

    pub fn stages(self) -> &'static [u8] {
        match self {
            Preset::FullSmat => &[1, 2, 3, 4],
            Preset::Stage3Only => &[1, 2, 3],
            Preset::Stage4Only | Preset::Stage4NoRexo => &[1, 2, 4],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Preset {
    type Err = CurriculumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| CurriculumError::InvalidPlan(format!("unknown preset {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightOverride {
    pub stage: u8,
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanOverrides {
    pub budgets: Option<[u64; 4]>,
    pub joint_weights: Option<[f64; 7]>,
    pub weights: Vec<WeightOverride>,
}

/// Ordered stage list for a preset.
pub fn build_plan(preset: Preset, overrides: &PlanOverrides) -> Result<Vec<StageConfig>, CurriculumError> {
    let mut plan = Vec::new();
    for &stage in preset.stages() {
        let mut cfg = StageConfig::default_for(stage)?;
        if let Some(b) = overrides.budgets {
            cfg.budget = b[stage as usize - 1];
        }
        if let Some(j) = overrides.joint_weights {
            cfg.weights = cfg.weights.with_joint_weights(j);
        }
        for o in overrides.weights.iter().filter(|o| o.stage == stage) {
            let term = Term::ALL
                .into_iter()
                .find(|t| t.name() == o.term)
                .ok_or_else(|| CurriculumError::InvalidPlan(format!("unknown reward term {:?}", o.term)))?;
            if !(o.weight.is_finite() && o.weight >= 0.0) {
                return Err(CurriculumError::InvalidPlan(format!("weight for {} must be >= 0", o.term)));
            }
            cfg.weights.set(term, o.weight);
        }
        if stage == 4 && matches!(preset, Preset::Stage4Only | Preset::Stage4NoRexo) {
            cfg.source_stage = Some(2);
            cfg.reinit_exo = true;
        }
        if stage == 4 && preset == Preset::Stage4NoRexo {
            cfg.weights.set(Term::Exo, 0.0);
        }
        plan.push(cfg);
    }
    Ok(plan)
}

/// Total step budget of a plan.
pub fn plan_budget(plan: &[StageConfig]) -> u64 {
    plan.iter().map(|s| s.budget).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule() {
        let plan = build_plan(Preset::FullSmat, &PlanOverrides::default()).unwrap();
        assert_eq!(plan.len(), 4);
        assert_eq!(plan[1].tau_max, 0.0);
        assert!(plan[1].exo_attached);
        assert_eq!(plan[2].tau_max, 6.0);
        assert_eq!(plan[3].tau_max, 25.0);
        assert!(!plan[0].exo_attached);
        assert!(!plan[2].mask.human_learns);
        assert!(plan[3].augment);
        assert_eq!(plan_budget(&plan), 3_700_000);
        for w in plan[1..].windows(2) {
            assert!(w[1].tau_max >= w[0].tau_max);
        }
    }

    #[test]
    fn desk_budgets_sum() {
        let o = PlanOverrides {
            budgets: Some([200_000; 4]),
            ..Default::default()
        };
        assert_eq!(plan_budget(&build_plan(Preset::FullSmat, &o).unwrap()), 800_000);
    }

    #[test]
    fn presets() {
        let o = PlanOverrides::default();
        let s4 = build_plan(Preset::Stage4Only, &o).unwrap();
        assert_eq!(s4.iter().map(|s| s.stage).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert_eq!(s4[2].source_stage, Some(2));
        assert!(s4[2].reinit_exo);
        let full = build_plan(Preset::FullSmat, &o).unwrap();
        let nr = build_plan(Preset::Stage4NoRexo, &o).unwrap();
        let mut expect = s4[2].clone();
        expect.weights.exo = 0.0;
        assert_eq!(nr[2], expect);
        assert_eq!(full[3].weights.exo, 4.0);
        assert_eq!(
            build_plan(Preset::Stage3Only, &o).unwrap().last().unwrap().stage,
            3
        );
        assert_eq!("stage4-no-rexo".parse::<Preset>().unwrap(), Preset::Stage4NoRexo);
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn active_terms_follow_weights() {
        for stage in 1..=4u8 {
            let cfg = StageConfig::default_for(stage).unwrap();
            let w = get_stage_weights(stage).unwrap();
            assert_eq!(cfg.weights, w);
        }
        let o = PlanOverrides {
            weights: vec![WeightOverride {
                stage: 1,
                term: "bogus".into(),
                weight: 1.0,
            }],
            ..Default::default()
        };
        assert!(build_plan(Preset::FullSmat, &o).is_err());
    }
}
