use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use smat_core::curriculum::load_checkpoint;
use smat_core::dynamics::{observe_exo, ObsHistory, EXO_OBS_DIM};
use smat_core::gait::{
    cycle_metrics, normalize_to_cycle, phase_lag, segment_cycles, CycleWaveform, GaitCycle, GaitTrace,
    TorquePowerMetrics, CYCLE_POINTS, SEGMENT_MIN_PERIOD,
};
use smat_core::ppo::PolicyNet;
use smat_core::rewards::CONTROL_DT;

use crate::CliError;

#[derive(Debug, Clone)]
pub struct OfflineArgs {
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
    /// Per-hip torque limit (Nm).
    pub torque_limit: f64,
    pub output_dir: PathBuf,
    /// Rate the policy runs at (s); recorded kinematics are resampled to it.
    pub control_dt: f64,
}

impl OfflineArgs {
    pub fn new(checkpoint: PathBuf, trace: PathBuf, torque_limit: f64, output_dir: PathBuf) -> Self {
        Self {
            checkpoint,
            trace,
            torque_limit,
            output_dir,
            control_dt: CONTROL_DT,
        }
    }
}

/// Cycle statistics of one side.
#[derive(Debug, Clone, PartialEq)]
pub struct SideAnalysis {
    pub cycles: Vec<GaitCycle>,
    pub metrics: TorquePowerMetrics,
    pub exo_torque_wave: CycleWaveform,
    pub power_wave: CycleWaveform,
    pub ref_torque_wave: CycleWaveform,
    /// Lag of the exo torque behind the recorded torque, % cycle; None when the
    /// recorded torque is flat.
    pub phase_lag: Option<f64>,
}

/// Policy output on recorded kinematics, on the control-rate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineRun {
    /// Recorded kinematics and torque resampled to the control rate.
    pub input: GaitTrace,
    /// Normalized commands.
    pub command: Vec<[f64; 2]>,
    /// Nm.
    pub torque: [Vec<f64>; 2],
    /// W.
    pub power: [Vec<f64>; 2],
    /// None when no gait cycles were found on that side.
    pub sides: [Option<SideAnalysis>; 2],
}

fn interp(time: &[f64], values: &[f64], t: f64) -> f64 {
    let i = time.partition_point(|&x| x <= t).clamp(1, time.len() - 1);
    let (t0, t1) = (time[i - 1], time[i]);
    let f = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    values[i - 1] + f * (values[i] - values[i - 1])
}

/// Linear resampling of every channel onto a grid with spacing `dt`.
pub fn resample_trace(trace: &GaitTrace, dt: f64) -> GaitTrace {
    let t0 = trace.time[0];
    let span = trace.time[trace.len() - 1] - t0;
    let n = (span / dt + 1e-9).floor() as usize + 1;
    let time: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    let re = |v: &Vec<f64>| time.iter().map(|&t| interp(&trace.time, v, t)).collect::<Vec<f64>>();
    GaitTrace {
        hip_angle: [re(&trace.hip_angle[0]), re(&trace.hip_angle[1])],
        hip_vel: [re(&trace.hip_vel[0]), re(&trace.hip_vel[1])],
        torque: [re(&trace.torque[0]), re(&trace.torque[1])],
        foot_force: trace.foot_force.as_ref().map(|f| [re(&f[0]), re(&f[1])]),
        time,
    }
}

fn has_variance(x: &[f64]) -> bool {
    x.iter().any(|v| *v != x[0])
}

/// Drive the exo actor with recorded hip kinematics; its own previous commands fill the
/// command history.
pub fn run_offline(exo: &PolicyNet, trace: &GaitTrace, torque_limit: f64, control_dt: f64) -> Result<OfflineRun, CliError> {
    if exo.n_in() != EXO_OBS_DIM || exo.n_out() != 2 || !exo.is_actor() {
        return Err(CliError::Data(format!(
            "checkpoint exo actor has dims {:?}, expected {EXO_OBS_DIM} inputs and 2 outputs",
            exo.dims()
        )));
    }
    if !(torque_limit >= 0.0 && torque_limit.is_finite()) {
        return Err(CliError::Config("torque limit must be a finite value >= 0".into()));
    }
    if !(control_dt > 0.0) {
        return Err(CliError::Config("control dt must be positive".into()));
    }
    trace.validate()?;
    let input = resample_trace(trace, control_dt);
    let n = input.len();
    let angle_at = |k: usize| [input.hip_angle[0][k], input.hip_angle[1][k]];
    let vel_at = |k: usize| [input.hip_vel[0][k], input.hip_vel[1][k]];
    let mut history = ObsHistory::new(angle_at(0), vel_at(0), [0.0; 2]);
    let squash = exo.squash();
    let mut command = Vec::with_capacity(n);
    let mut prev = [0.0; 2];
    for k in 0..n {
        if k > 0 {
            history.push(angle_at(k), vel_at(k), prev);
        }
        let out = exo.forward(&observe_exo(&history))?;
        let u = [squash.apply(out[0]).clamp(-1.0, 1.0), squash.apply(out[1]).clamp(-1.0, 1.0)];
        if !(u[0].is_finite() && u[1].is_finite()) {
            return Err(CliError::Diverged(format!("non-finite exo command at sample {k}")));
        }
        command.push(u);
        prev = u;
    }
    let torque = [0, 1].map(|s| command.iter().map(|u| u[s] * torque_limit).collect::<Vec<f64>>());
    let power = [0, 1].map(|s| torque[s].iter().zip(&input.hip_vel[s]).map(|(t, w)| t * w).collect::<Vec<f64>>());
    let rate = 1.0 / control_dt;
    let mut sides = [None, None];
    for (s, slot) in sides.iter_mut().enumerate() {
        let Ok(cycles) = segment_cycles(&input.hip_angle[s], rate, SEGMENT_MIN_PERIOD) else {
            continue;
        };
        let metrics = cycle_metrics(&torque[s], &input.hip_vel[s], &cycles, rate)?;
        let wave = |sig: &[f64]| normalize_to_cycle(sig, &cycles, CYCLE_POINTS);
        let exo_torque_wave = wave(&torque[s])?;
        let power_wave = wave(&power[s])?;
        let ref_torque_wave = wave(&input.torque[s])?;
        // drop the duplicated 100 % point so the waveform is circular
        let r = &ref_torque_wave.mean[..CYCLE_POINTS - 1];
        let e = &exo_torque_wave.mean[..CYCLE_POINTS - 1];
        let phase_lag = if has_variance(r) { Some(phase_lag(r, e)?) } else { None };
        *slot = Some(SideAnalysis {
            cycles,
            metrics,
            exo_torque_wave,
            power_wave,
            ref_torque_wave,
            phase_lag,
        });
    }
    Ok(OfflineRun {
        input,
        command,
        torque,
        power,
        sides,
    })
}

pub const SAMPLES_FILE: &str = "offline_samples.csv";
pub const CYCLE_FILE: &str = "offline_cycle.csv";
pub const SUMMARY_FILE: &str = "offline_summary.csv";

pub const SAMPLES_HEADER: [&str; 11] = [
    "time_s",
    "hip_angle_r_rad",
    "hip_angle_l_rad",
    "hip_vel_r_rads",
    "hip_vel_l_rads",
    "u_r",
    "u_l",
    "torque_r_nm",
    "torque_l_nm",
    "power_r_w",
    "power_l_w",
];

pub const CYCLE_HEADER: [&str; 13] = [
    "pct",
    "exo_torque_r_mean",
    "exo_torque_r_sd",
    "exo_torque_l_mean",
    "exo_torque_l_sd",
    "power_r_mean",
    "power_r_sd",
    "power_l_mean",
    "power_l_sd",
    "ref_torque_r_mean",
    "ref_torque_r_sd",
    "ref_torque_l_mean",
    "ref_torque_l_sd",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "side",
    "cycles",
    "tau_rms_nm",
    "tau_max_nm",
    "mpp_w",
    "mnp_w",
    "neg_fraction",
    "peak_torque_nm",
    "phase_lag_pct",
    "torque_limit_nm",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_offline(dir: &Path, run: &OfflineRun, torque_limit: f64) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(SAMPLES_FILE))?));
    w.write_record(SAMPLES_HEADER)?;
    for k in 0..run.input.len() {
        let row = [
            run.input.time[k],
            run.input.hip_angle[0][k],
            run.input.hip_angle[1][k],
            run.input.hip_vel[0][k],
            run.input.hip_vel[1][k],
            run.command[k][0],
            run.command[k][1],
            run.torque[0][k],
            run.torque[1][k],
            run.power[0][k],
            run.power[1][k],
        ];
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(CYCLE_FILE))?));
    w.write_record(CYCLE_HEADER)?;
    if let [Some(r), Some(l)] = &run.sides {
        let pct = r.exo_torque_wave.pct();
        for (k, p) in pct.iter().enumerate() {
            let mut row = vec![*p];
            for side in [r, l] {
                row.push(side.exo_torque_wave.mean[k]);
                row.push(side.exo_torque_wave.sd[k]);
            }
            for side in [r, l] {
                row.push(side.power_wave.mean[k]);
                row.push(side.power_wave.sd[k]);
            }
            for side in [r, l] {
                row.push(side.ref_torque_wave.mean[k]);
                row.push(side.ref_torque_wave.sd[k]);
            }
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(SUMMARY_FILE))?));
    w.write_record(SUMMARY_HEADER)?;
    for (s, name) in ["right", "left"].into_iter().enumerate() {
        let peak = run.torque[s].iter().fold(0.0_f64, |a, t| a.max(t.abs()));
        let side = run.sides[s].as_ref();
        let m = side.map(|a| a.metrics);
        w.write_record([
            name.to_string(),
            side.map_or(0, |a| a.cycles.len()).to_string(),
            opt(m.map(|m| m.tau_rms)),
            opt(m.map(|m| m.tau_max)),
            opt(m.map(|m| m.mpp)),
            opt(m.map(|m| m.mnp)),
            opt(m.map(|m| m.neg_fraction)),
            peak.to_string(),
            opt(side.and_then(|a| a.phase_lag)),
            torque_limit.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_eval_offline(args: &OfflineArgs) -> Result<OfflineRun, CliError> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let trace = GaitTrace::read_csv(&args.trace)?;
    let run = run_offline(&ckpt.exo, &trace, args.torque_limit, args.control_dt)?;
    write_offline(&args.output_dir, &run, args.torque_limit)?;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn walking(secs: f64, period: f64, rate: f64) -> GaitTrace {
        let n = (secs * rate) as usize;
        let time: Vec<f64> = (0..n).map(|i| i as f64 / rate).collect();
        let w = 2.0 * PI / period;
        let side = |shift: f64| {
            let a: Vec<f64> = time.iter().map(|t| 0.4 * (w * t + shift).cos()).collect();
            let v: Vec<f64> = time.iter().map(|t| -0.4 * w * (w * t + shift).sin()).collect();
            let tau: Vec<f64> = time.iter().map(|t| (w * t + shift + 0.8).sin()).collect();
            (a, v, tau)
        };
        let (ar, vr, tr) = side(0.0);
        let (al, vl, tl) = side(PI);
        GaitTrace {
            time,
            hip_angle: [ar, al],
            hip_vel: [vr, vl],
            torque: [tr, tl],
            foot_force: None,
        }
    }

    fn exo() -> PolicyNet {
        PolicyNet::exo_actor(EXO_OBS_DIM, &mut ChaCha8Rng::seed_from_u64(5))
    }

    #[test]
    fn resampling_keeps_grid_points() {
        let t = walking(3.0, 1.2, 100.0);
        let r = resample_trace(&t, 0.02);
        assert_eq!(r.len(), 150);
        for k in 0..r.len() {
            assert!((r.hip_angle[0][k] - t.hip_angle[0][2 * k]).abs() < 1e-12);
        }
    }

    #[test]
    fn torque_bounded_by_limit() {
        let mut net = exo();
        for p in net.params_mut() {
            *p *= 400.0;
        }
        let run = run_offline(&net, &walking(6.0, 1.2, 100.0), 12.0, 0.02).unwrap();
        let peak = run.torque.iter().flatten().fold(0.0_f64, |a, t| a.max(t.abs()));
        assert!(peak <= 12.0);
        assert!(peak > 1.0);
    }

    #[test]
    fn stationary_input_settles() {
        let mut t = walking(4.0, 1.2, 100.0);
        for s in 0..2 {
            t.hip_angle[s] = vec![0.2; t.len()];
            t.hip_vel[s] = vec![0.0; t.len()];
        }
        let run = run_offline(&exo(), &t, 10.0, 0.02).unwrap();
        assert!(run.sides.iter().all(|s| s.is_none()));
        let last = *run.command.last().unwrap();
        for u in &run.command[run.command.len() - 50..] {
            assert!((u[0] - last[0]).abs() < 1e-12 && (u[1] - last[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn walking_input_has_cycles_and_lag() {
        let run = run_offline(&exo(), &walking(6.0, 1.2, 100.0), 10.0, 0.02).unwrap();
        // right-side peaks at 1.2..4.8 s, left-side peaks at 0.6..5.4 s
        for (side, n) in run.sides.iter().zip([3, 4]) {
            let a = side.as_ref().unwrap();
            assert_eq!(a.cycles.len(), n);
            let lag = a.phase_lag.unwrap();
            assert!((-50.0..50.0).contains(&lag));
            assert!(a.metrics.tau_max <= 10.0);
        }
    }

    /// Exo actor whose right command is a monotone function of the current right hip angle.
    fn angle_follower() -> PolicyNet {
        let mut net = exo();
        net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        let dims = net.dims().to_vec();
        let mut w0 = 0;
        for l in 0..dims.len() - 1 {
            let (n_in, n_out) = (dims[l], dims[l + 1]);
            let input = if l == 0 { 8 } else { 0 };
            net.params_mut()[w0 + input] = 2.0;
            w0 += n_in * n_out + n_out;
        }
        net
    }

    #[test]
    fn memoryless_controller_lag_is_speed_invariant() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/synthetic_gait.csv");
        let trace = GaitTrace::read_csv(&path).unwrap();
        let lags: Vec<f64> = [0.5, 1.0, 1.5]
            .iter()
            .map(|v| {
                let run = run_offline(&angle_follower(), &trace.time_scaled(1.0 / v), 15.0, 0.02).unwrap();
                run.sides[0].as_ref().unwrap().phase_lag.unwrap()
            })
            .collect();
        assert!(lags.iter().all(|l| (l - lags[1]).abs() <= 1.0), "{lags:?}");
    }

    #[test]
    fn rejects_wrong_actor() {
        let net = PolicyNet::exo_actor(20, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(run_offline(&net, &walking(3.0, 1.2, 100.0), 10.0, 0.02), Err(CliError::Data(_))));
    }
}
