use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use smat_core::curriculum::{build_plan, PlanOverrides, Preset, StageConfig, TrainingContext};
use smat_core::dynamics::{attach_exo, ExoAttachment, WalkerModel};
use smat_core::env::EnvSettings;
use smat_core::ppo::PpoConfig;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub preset: Preset,
    pub output_dir: PathBuf,
    pub model: WalkerModel,
    pub exo: ExoAttachment,
    pub env: EnvSettings,
    /// PPO settings for stages 1 to 4.
    pub ppo: [PpoConfig; 4],
    pub plan: PlanOverrides,
    /// Length of the deterministic rollout recorded after each stage (control steps).
    pub eval_steps: usize,
    /// Save a checkpoint every this many updates within a stage; 0 saves only at the end.
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            preset: Preset::FullSmat,
            output_dir: PathBuf::from("runs/default"),
            model: WalkerModel::default(),
            exo: ExoAttachment::default(),
            env: EnvSettings::default(),
            ppo: [1, 2, 3, 4].map(PpoConfig::for_stage),
            plan: PlanOverrides::default(),
            eval_steps: 1000,
            checkpoint_every: 0,
        }
    }
}

/// PPO settings sized for a single desktop CPU.
pub fn desk_ppo(stage: u8) -> PpoConfig {
    PpoConfig {
        learning_rate: 3e-4,
        rollout_steps: 256,
        n_envs: 8,
        minibatch_size: 512,
        epochs: 4,
        ..PpoConfig::for_stage(stage)
    }
}

impl RunConfig {
    /// Small-budget variant: 200k/100k/100k/300k steps with [`desk_ppo`] settings.
    pub fn desk() -> Self {
        Self {
            output_dir: PathBuf::from("runs/desk"),
            ppo: [1, 2, 3, 4].map(desk_ppo),
            plan: PlanOverrides {
                budgets: Some([200_000, 100_000, 100_000, 300_000]),
                ..PlanOverrides::default()
            },
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        for (i, p) in self.ppo.iter().enumerate() {
            p.validate()
                .map_err(|e| CliError::Config(format!("ppo[{i}] (stage {}): {e}", i + 1)))?;
        }
        if self.model.exo.is_some() {
            return Err(CliError::Config("model must not carry an exoskeleton; use the exo section".into()));
        }
        attach_exo(&self.model, self.exo).map_err(|e| CliError::Config(e.to_string()))?;
        if self.env.max_episode_steps == 0 || !(self.env.control_dt > 0.0) {
            return Err(CliError::Config("env needs max_episode_steps > 0 and control_dt > 0".into()));
        }
        self.plan_for(self.preset)?;
        Ok(())
    }

    pub fn plan_for(&self, preset: Preset) -> Result<Vec<StageConfig>, CliError> {
        build_plan(preset, &self.plan).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn context(&self) -> TrainingContext {
        TrainingContext {
            model: self.model.clone(),
            exo: self.exo,
            env: self.env.clone(),
            ..TrainingContext::new(self.seed)
        }
    }

    pub fn stage_ppo(&self, stage: u8) -> &PpoConfig {
        &self.ppo[stage as usize - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let d = RunConfig::default();
        d.validate().unwrap();
        assert_eq!(RunConfig::from_json(&d.to_json()).unwrap(), d);
        assert_eq!(RunConfig::from_json("{}").unwrap(), d);
        assert_eq!(d.ppo[0].minibatch_size, 16384);
        assert_eq!(d.ppo[1].learning_rate, 3e-5);
        let desk = RunConfig::desk();
        assert_eq!(RunConfig::from_json(&desk.to_json()).unwrap(), desk);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(matches!(RunConfig::from_json(r#"{"sed": 3}"#), Err(CliError::Config(_))));
        assert!(RunConfig::from_json(r#"{"version": 2}"#).is_err());
        let mut c = RunConfig::default();
        c.ppo[2].minibatch_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn preset_ids_parse_in_json() {
        let c = RunConfig::from_json(r#"{"preset": "stage4-no-rexo", "seed": 4}"#).unwrap();
        assert_eq!(c.preset, Preset::Stage4NoRexo);
        assert_eq!(c.context().seed, 4);
    }
}
