//! Planar walker physics: seven rigid segments, torque-generating muscles with
//! first-order activation dynamics, penalty ground contact and an optional hip
//! exoskeleton.

mod model;
mod observe;
mod sim;

pub use model::{
    attach_exo, dof, ContactParams, ExoAttachment, FootGeometry, JointId, JointLimit,
    MuscleAction, MuscleSpec, Segment, Side, WalkerModel, NBODY, NCONTACT, NDOF,
};
pub use observe::{
    human_obs_dim, observe_exo, observe_human, ObsHistory, EXO_OBS_DIM, HISTORY,
};
pub use sim::{
    body, lowest_contact_height, mechanical_energy, step, Kinematics, PointKin, SimState,
    StepResult,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid walker model: {0}")]
    InvalidModel(String),
    #[error("invalid step input: {0}")]
    InvalidInput(String),
    #[error("exoskeleton already attached")]
    AlreadyAttached,
    #[error("integration diverged at t = {time:.4} s")]
    IntegrationDiverged { time: f64 },
}
