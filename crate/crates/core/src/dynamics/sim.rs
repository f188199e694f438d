//! Planar multibody integration with activation dynamics and penalty contact.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::model::{dof, JointId, WalkerModel, NBODY, NCONTACT, NDOF};
use super::SimError;

type Mat = SMatrix<f64, NDOF, NDOF>;
type Vecn = SVector<f64, NDOF>;
type Row = [f64; NDOF];

/// Body indices.
pub mod body {
    pub const PELVIS: usize = 0;
    pub const THIGH_R: usize = 1;
    pub const SHANK_R: usize = 2;
    pub const FOOT_R: usize = 3;
    pub const THIGH_L: usize = 4;
    pub const SHANK_L: usize = 5;
    pub const FOOT_L: usize = 6;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub q: [f64; NDOF],
    pub qd: [f64; NDOF],
    pub activations: Vec<f64>,
    pub time: f64,
    /// Vertical contact force per foot (right, left), N.
    pub foot_force: [f64; 2],
    /// Joint-limit constraint forces ordered as [`JointId::ALL`].
    pub limit_force: [f64; 6],
    /// Applied exoskeleton torque (right, left), Nm.
    pub exo_torque: [f64; 2],
    /// Stick-point of each contact (heel_r, toe_r, heel_l, toe_l) while in contact.
    pub anchors: [Option<f64>; NCONTACT],
}

impl SimState {
    /// All coordinates zero except the pelvis height.
    pub fn at_rest(model: &WalkerModel, pelvis_height: f64) -> Self {
        let mut q = [0.0; NDOF];
        q[dof::PELVIS_Z] = pelvis_height;
        Self {
            q,
            qd: [0.0; NDOF],
            activations: vec![0.0; model.n_muscles()],
            time: 0.0,
            foot_force: [0.0; 2],
            limit_force: [0.0; 6],
            exo_torque: [0.0; 2],
            anchors: [None; NCONTACT],
        }
    }

    pub fn forward_speed(&self) -> f64 {
        self.qd[dof::PELVIS_X]
    }

    pub fn hip_angles(&self) -> [f64; 2] {
        [self.q[dof::HIP_R], self.q[dof::HIP_L]]
    }

    pub fn hip_velocities(&self) -> [f64; 2] {
        [self.qd[dof::HIP_R], self.qd[dof::HIP_L]]
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qd).all(|v| v.is_finite())
            && self.activations.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: SimState,
    /// Pelvis below 60 % of standing height or pitched beyond 1 rad.
    pub fallen: bool,
}

fn rot(alpha: f64, w: [f64; 2]) -> [f64; 2] {
    // Body axis u = (sin a, -cos a) points distally, n = (cos a, sin a) forward.
    let (s, c) = alpha.sin_cos();
    [w[0] * s + w[1] * c, -w[0] * c + w[1] * s]
}

/// Position, velocity, velocity-product acceleration and Jacobian of a body point.
#[derive(Debug, Clone, Copy)]
pub struct PointKin {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub bias: [f64; 2],
    pub jac: [Row; 2],
}

/// Forward kinematics of the whole tree at one configuration.
pub struct Kinematics {
    alpha: [f64; NBODY],
    alpha_dot: [f64; NBODY],
    coeff: [Row; NBODY],
    origin: [PointKin; NBODY],
}

const PARENT: [Option<usize>; NBODY] = [None, Some(0), Some(1), Some(2), Some(0), Some(4), Some(5)];

impl Kinematics {
    pub fn new(model: &WalkerModel, q: &[f64; NDOF], qd: &[f64; NDOF]) -> Self {
        let mut coeff = [[0.0; NDOF]; NBODY];
        coeff[body::PELVIS][dof::PELVIS_PITCH] = 1.0;
        for (thigh, hip, knee, ankle) in [
            (body::THIGH_R, dof::HIP_R, dof::KNEE_R, dof::ANKLE_R),
            (body::THIGH_L, dof::HIP_L, dof::KNEE_L, dof::ANKLE_L),
        ] {
            coeff[thigh] = coeff[body::PELVIS];
            coeff[thigh][hip] = 1.0;
            coeff[thigh + 1] = coeff[thigh];
            coeff[thigh + 1][knee] = -1.0;
            coeff[thigh + 2] = coeff[thigh + 1];
            coeff[thigh + 2][ankle] = 1.0;
        }
        let dot = |r: &Row, v: &[f64; NDOF]| r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let alpha = coeff.map(|r| dot(&r, q));
        let alpha_dot = coeff.map(|r| dot(&r, qd));

        let mut base_jac = [[0.0; NDOF]; 2];
        base_jac[0][dof::PELVIS_X] = 1.0;
        base_jac[1][dof::PELVIS_Z] = 1.0;
        let base = PointKin {
            pos: [q[dof::PELVIS_X], q[dof::PELVIS_Z]],
            vel: [qd[dof::PELVIS_X], qd[dof::PELVIS_Z]],
            bias: [0.0; 2],
            jac: base_jac,
        };
        let mut kin = Self {
            alpha,
            alpha_dot,
            coeff,
            origin: [base; NBODY],
        };
        let offset = |b: usize| -> [f64; 2] {
            match b {
                body::SHANK_R => [model.thigh[0].length, 0.0],
                body::FOOT_R => [model.shank[0].length, 0.0],
                body::SHANK_L => [model.thigh[1].length, 0.0],
                body::FOOT_L => [model.shank[1].length, 0.0],
                _ => [0.0, 0.0],
            }
        };
        for b in 1..NBODY {
            let parent = PARENT[b].expect("non-root body has a parent");
            kin.origin[b] = kin.point(parent, offset(b));
        }
        kin
    }

    /// Kinematics of the point with body-local coordinates `w` = (along axis, forward).
    pub fn point(&self, b: usize, w: [f64; 2]) -> PointKin {
        let o = &self.origin[b];
        let r = rot(self.alpha[b], w);
        let rp = rot(self.alpha[b], [-w[1], w[0]]);
        let ad = self.alpha_dot[b];
        let mut jac = o.jac;
        for k in 0..NDOF {
            let c = self.coeff[b][k];
            if c != 0.0 {
                jac[0][k] += rp[0] * c;
                jac[1][k] += rp[1] * c;
            }
        }
        PointKin {
            pos: [o.pos[0] + r[0], o.pos[1] + r[1]],
            vel: [o.vel[0] + ad * rp[0], o.vel[1] + ad * rp[1]],
            bias: [o.bias[0] - ad * ad * r[0], o.bias[1] - ad * ad * r[1]],
            jac,
        }
    }

    pub fn alpha(&self, b: usize) -> f64 {
        self.alpha[b]
    }
}

/// Body mass, inertia and body-local centre of mass.
pub(crate) fn body_inertial(model: &WalkerModel, b: usize) -> (f64, f64, [f64; 2]) {
    let seg = |s: &super::model::Segment, w: [f64; 2]| (s.mass, s.inertia, w);
    let foot_com = |s: &super::model::Segment| {
        [0.5 * model.foot_geometry.ankle_height, s.com]
    };
    match b {
        body::PELVIS => seg(&model.pelvis, [-model.pelvis.com, 0.0]),
        body::THIGH_R => seg(&model.thigh[0], [model.thigh[0].com, 0.0]),
        body::SHANK_R => seg(&model.shank[0], [model.shank[0].com, 0.0]),
        body::FOOT_R => seg(&model.foot[0], foot_com(&model.foot[0])),
        body::THIGH_L => seg(&model.thigh[1], [model.thigh[1].com, 0.0]),
        body::SHANK_L => seg(&model.shank[1], [model.shank[1].com, 0.0]),
        _ => seg(&model.foot[1], foot_com(&model.foot[1])),
    }
}

/// Contact points in (body, local coords) order heel_r, toe_r, heel_l, toe_l.
pub(crate) fn contact_points(model: &WalkerModel) -> [(usize, [f64; 2]); NCONTACT] {
    let g = &model.foot_geometry;
    [
        (body::FOOT_R, [g.ankle_height, -g.heel]),
        (body::FOOT_R, [g.ankle_height, g.toe]),
        (body::FOOT_L, [g.ankle_height, -g.heel]),
        (body::FOOT_L, [g.ankle_height, g.toe]),
    ]
}

/// Kinetic plus gravitational potential energy (ground at z = 0).
pub fn mechanical_energy(model: &WalkerModel, state: &SimState) -> f64 {
    let kin = Kinematics::new(model, &state.q, &state.qd);
    (0..NBODY)
        .map(|b| {
            let (m, i, w) = body_inertial(model, b);
            let p = kin.point(b, w);
            let v2 = p.vel[0] * p.vel[0] + p.vel[1] * p.vel[1];
            let ad = kin.alpha_dot[b];
            0.5 * m * v2 + 0.5 * i * ad * ad + m * model.gravity * p.pos[1]
        })
        .sum()
}

/// Lowest sole point height over both feet.
pub fn lowest_contact_height(model: &WalkerModel, q: &[f64; NDOF]) -> f64 {
    let kin = Kinematics::new(model, q, &[0.0; NDOF]);
    contact_points(model)
        .iter()
        .map(|&(b, w)| kin.point(b, w).pos[1])
        .fold(f64::INFINITY, f64::min)
}

fn add_force(rhs: &mut Vecn, jac: &[Row; 2], f: [f64; 2]) {
    for k in 0..NDOF {
        rhs[k] += jac[0][k] * f[0] + jac[1][k] * f[1];
    }
}

/// Advance the walker by `dt` seconds, split into substeps of at most `model.physics_dt`.
///
/// Joint torques are the muscle torques plus the exoskeleton torque `exo_cmd * tau_max`
/// at both hips. Since hip torques act on the relative hip coordinate they are applied
/// equally and oppositely to pelvis and thigh.
pub fn step(
    state: &SimState,
    model: &WalkerModel,
    excitations: &[f64],
    exo_cmd: [f64; 2],
    dt: f64,
) -> Result<StepResult, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if excitations.len() != model.n_muscles() {
        return Err(SimError::InvalidInput(format!(
            "expected {} excitations, got {}",
            model.n_muscles(),
            excitations.len()
        )));
    }
    if excitations.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(SimError::InvalidInput("excitation outside [0, 1]".into()));
    }
    if exo_cmd.iter().any(|u| !(-1.0..=1.0).contains(u)) {
        return Err(SimError::InvalidInput("exo command outside [-1, 1]".into()));
    }
    let n_sub = (dt / model.physics_dt).ceil().max(1.0) as usize;
    let h = dt / n_sub as f64;
    let exo_torque = match model.exo {
        Some(exo) if exo.tau_max > 0.0 => Some(exo.torque(exo_cmd)),
        _ => None,
    };

    let mut s = state.clone();
    s.exo_torque = exo_torque.unwrap_or([0.0; 2]);
    for _ in 0..n_sub {
        substep(&mut s, model, excitations, exo_torque, h);
        if !s.is_finite() {
            return Err(SimError::IntegrationDiverged { time: s.time });
        }
    }
    let fallen = s.q[dof::PELVIS_Z] < 0.6 * model.standing_height()
        || s.q[dof::PELVIS_PITCH].abs() > 1.0;
    Ok(StepResult { state: s, fallen })
}

fn substep(
    s: &mut SimState,
    model: &WalkerModel,
    excitations: &[f64],
    exo_torque: Option<[f64; 2]>,
    h: f64,
) {
    // Activation dynamics, exact for a constant excitation over the substep.
    for ((a, &u), m) in s.activations.iter_mut().zip(excitations).zip(&model.muscles) {
        let tau = if u > *a { m.tau_act } else { m.tau_deact };
        *a = (u + (*a - u) * (-h / tau).exp()).clamp(0.0, 1.0);
    }

    let kin = Kinematics::new(model, &s.q, &s.qd);
    let mut mass = Mat::zeros();
    let mut rhs = Vecn::zeros();

    for b in 0..NBODY {
        let (m, inertia, w) = body_inertial(model, b);
        let p = kin.point(b, w);
        for r in 0..NDOF {
            let jr = [p.jac[0][r], p.jac[1][r]];
            if jr[0] == 0.0 && jr[1] == 0.0 && kin.coeff[b][r] == 0.0 {
                continue;
            }
            for c in 0..NDOF {
                mass[(r, c)] += m * (jr[0] * p.jac[0][c] + jr[1] * p.jac[1][c])
                    + inertia * kin.coeff[b][r] * kin.coeff[b][c];
            }
            rhs[r] -= m * (jr[0] * p.bias[0] + jr[1] * p.bias[1]);
            rhs[r] -= m * model.gravity * jr[1];
        }
    }

    for (muscle, &a) in model.muscles.iter().zip(&s.activations) {
        for act in &muscle.actions {
            rhs[act.joint.dof()] += f64::from(act.sign) * a * act.max_torque;
        }
    }
    if let Some(t) = exo_torque {
        rhs[dof::HIP_R] += t[0];
        rhs[dof::HIP_L] += t[1];
    }
    for (j, lim) in JointId::ALL.iter().zip(&model.joint_limits) {
        let k = j.dof();
        rhs[k] -= model.joint_damping * s.qd[k];
        let (q, qd) = (s.q[k], s.qd[k]);
        let f = if q < lim.lower {
            (model.limit_stiffness * (lim.lower - q) - model.limit_damping * qd).max(0.0)
        } else if q > lim.upper {
            (model.limit_stiffness * (lim.upper - q) - model.limit_damping * qd).min(0.0)
        } else {
            0.0
        };
        s.limit_force[j.index()] = f;
        rhs[k] += f;
    }

    let c = &model.contact;
    s.foot_force = [0.0; 2];
    for (i, &(b, w)) in contact_points(model).iter().enumerate() {
        let p = kin.point(b, w);
        let depth = -p.pos[1];
        if depth <= 0.0 {
            s.anchors[i] = None;
            continue;
        }
        let normal = (c.stiffness * depth - c.damping * p.vel[1]).max(0.0);
        let anchor = *s.anchors[i].get_or_insert(p.pos[0]);
        let mut tangent =
            -c.tangential_stiffness * (p.pos[0] - anchor) - c.tangential_damping * p.vel[0];
        let bound = c.friction * normal;
        if tangent.abs() > bound {
            tangent = tangent.signum() * bound;
            // Slip: drag the stick point so the spring carries the clamped force.
            s.anchors[i] =
                Some(p.pos[0] + (tangent + c.tangential_damping * p.vel[0]) / c.tangential_stiffness);
        }
        s.foot_force[i / 2] += normal;
        add_force(&mut rhs, &p.jac, [tangent, normal]);
    }

    for k in 0..NDOF {
        if model.locked_dofs[k] {
            for j in 0..NDOF {
                mass[(k, j)] = 0.0;
                mass[(j, k)] = 0.0;
            }
            mass[(k, k)] = 1.0;
            rhs[k] = 0.0;
        }
    }

    let qdd = match mass.cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => Vecn::from_element(f64::NAN),
    };
    for k in 0..NDOF {
        if model.locked_dofs[k] {
            s.qd[k] = 0.0;
            continue;
        }
        s.qd[k] += h * qdd[k];
        s.q[k] += h * s.qd[k];
    }
    s.time += h;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::model::{attach_exo, ExoAttachment};

    fn standing(model: &WalkerModel) -> SimState {
        SimState::at_rest(model, model.standing_height())
    }

    #[test]
    fn standing_pose_touches_ground() {
        let m = WalkerModel::default();
        let s = standing(&m);
        assert!(lowest_contact_height(&m, &s.q).abs() < 1e-12);
    }

    #[test]
    fn zero_input_equilibrium_without_gravity() {
        let mut m = WalkerModel::default();
        m.gravity = 0.0;
        let mut s = SimState::at_rest(&m, 2.0);
        s.activations = vec![0.7; m.n_muscles()];
        let zero = vec![0.0; m.n_muscles()];
        let mut prev = s.activations.clone();
        for _ in 0..20 {
            s = step(&s, &m, &zero, [0.0, 0.0], 0.02).unwrap().state;
            for (a, p) in s.activations.iter().zip(&prev) {
                assert!(*a < *p && *a >= 0.0);
            }
            prev = s.activations.clone();
        }
        // Activations decaying to zero still produce torque, so the equilibrium
        // check uses a pose where all muscles are silent from the start.
        let mut s = SimState::at_rest(&m, 2.0);
        s.qd = [0.0; NDOF];
        let next = step(&s, &m, &zero, [0.0, 0.0], 0.02).unwrap().state;
        assert_eq!(next.qd, s.qd);
        assert_eq!(next.q, s.q);
    }

    #[test]
    fn zero_torque_limit_matches_no_command() {
        let m = attach_exo(&WalkerModel::default(), ExoAttachment::default()).unwrap();
        let s = standing(&m);
        let exc = vec![0.2; m.n_muscles()];
        let a = step(&s, &m, &exc, [1.0, 0.0], 0.02).unwrap();
        let b = step(&s, &m, &exc, [0.0, 0.0], 0.02).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.state.exo_torque, [0.0, 0.0]);
    }

    #[test]
    fn zero_mass_attachment_is_identity() {
        let m = WalkerModel::default();
        let zero = ExoAttachment {
            pelvis_mass: 0.0,
            thigh_mass: 0.0,
            tau_max: 0.0,
            command: [0.0; 2],
        };
        let att = attach_exo(&m, zero).unwrap();
        let mut s = standing(&m);
        let mut t = s.clone();
        let exc = vec![0.3; m.n_muscles()];
        for _ in 0..25 {
            s = step(&s, &m, &exc, [0.0, 0.0], 0.02).unwrap().state;
            t = step(&t, &att, &exc, [0.7, -0.2], 0.02).unwrap().state;
        }
        assert_eq!(s, t);
    }

    #[test]
    fn exo_mass_changes_trajectory() {
        let m = WalkerModel::default();
        let att = attach_exo(&m, ExoAttachment::default()).unwrap();
        let mut s = standing(&m);
        let mut t = standing(&att);
        let exc = vec![0.1; m.n_muscles()];
        let mut max_diff: f64 = 0.0;
        for _ in 0..25 {
            s = step(&s, &m, &exc, [0.0, 0.0], 0.02).unwrap().state;
            t = step(&t, &att, &exc, [0.0, 0.0], 0.02).unwrap().state;
            max_diff = max_diff.max((s.q[dof::PELVIS_Z] - t.q[dof::PELVIS_Z]).abs());
        }
        assert!(max_diff > 1e-6, "pelvis height difference {max_diff}");
    }

    #[test]
    fn applied_torque_never_exceeds_limit() {
        let mut m = attach_exo(&WalkerModel::default(), ExoAttachment::default()).unwrap();
        m.set_torque_limit(6.0).unwrap();
        let s = standing(&m);
        for u in [-1.0, -0.3, 0.0, 0.99, 1.0] {
            let r = step(&s, &m, &vec![0.0; 10], [u, -u], 0.02).unwrap();
            assert!(r.state.exo_torque.iter().all(|t| t.abs() <= 6.0));
            assert_eq!(r.state.exo_torque[0], u * 6.0);
        }
    }

    #[test]
    fn contact_forces_are_unilateral() {
        let m = WalkerModel::default();
        let mut s = SimState::at_rest(&m, m.standing_height() + 0.05);
        let exc = vec![0.0; m.n_muscles()];
        let mut loaded = false;
        for _ in 0..100 {
            let r = step(&s, &m, &exc, [0.0, 0.0], 0.02).unwrap();
            s = r.state;
            assert!(s.foot_force.iter().all(|f| *f >= 0.0));
            loaded |= s.foot_force.iter().any(|f| *f > 0.0);
        }
        assert!(loaded);
    }

    #[test]
    fn deterministic_step() {
        let m = WalkerModel::default();
        let s = standing(&m);
        let exc: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let a = step(&s, &m, &exc, [0.0, 0.0], 0.02).unwrap();
        let b = step(&s, &m, &exc, [0.0, 0.0], 0.02).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_inputs_rejected() {
        let m = WalkerModel::default();
        let s = standing(&m);
        assert!(step(&s, &m, &[0.0; 10], [0.0, 0.0], 0.0).is_err());
        assert!(step(&s, &m, &[1.5; 10], [0.0, 0.0], 0.02).is_err());
        assert!(step(&s, &m, &[0.0; 10], [1.5, 0.0], 0.02).is_err());
        assert!(step(&s, &m, &[0.0; 3], [0.0, 0.0], 0.02).is_err());
    }

    #[test]
    fn non_finite_state_reports_divergence() {
        let m = WalkerModel::default();
        let mut s = standing(&m);
        s.qd[dof::HIP_R] = f64::NAN;
        assert!(matches!(
            step(&s, &m, &[0.0; 10], [0.0, 0.0], 0.02),
            Err(SimError::IntegrationDiverged { .. })
        ));
    }

    #[test]
    fn collapse_reports_fall() {
        let m = WalkerModel::default();
        let mut s = standing(&m);
        let exc = vec![0.0; m.n_muscles()];
        let mut fell = false;
        for _ in 0..300 {
            let r = step(&s, &m, &exc, [0.0, 0.0], 0.02).unwrap();
            s = r.state;
            if r.fallen {
                fell = true;
                break;
            }
        }
        assert!(fell, "passive walker should collapse");
    }
}
