//! Staged multi-agent training of a musculoskeletal walker and a hip exoskeleton.
//!
//! * [`dynamics`]: planar walker with muscles, contact and exoskeleton coupling.
//! * [`rewards`]: per-term rewards and stage weight tables.
//! * [`ppo`]: two actors with a shared critic, GAE and clipped-surrogate updates.
//! * [`env`]: the coupled human/exoskeleton environment used for rollouts.
//! * [`curriculum`]: four-stage plan, transitions, checkpoints and ablation presets.
//! * [`gait`]: offline gait-cycle torque and power analysis.

pub mod dynamics;
pub mod env;
pub mod ppo;
pub mod rewards;
pub mod curriculum;
pub mod gait;
