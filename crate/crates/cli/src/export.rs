use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use smat_core::curriculum::read_metrics_csv;
use smat_core::gait::{resample_cycle, segment_cycles, waveform_from_curves, CycleWaveform, CYCLE_POINTS, SEGMENT_MIN_PERIOD};

use crate::train::{eval_path, metrics_path};
use crate::CliError;

pub const REWARD_CURVE_FILE: &str = "reward_curve.csv";
pub const REWARD_CURVE_HEADER: [&str; 9] = [
    "stage",
    "update",
    "step",
    "episode_reward",
    "step_reward",
    "mean_abs_u",
    "approx_kl",
    "entropy",
    "toe_off_pct",
];

pub const GAIT_HEADER: [&str; 13] = [
    "pct",
    "hip_angle_r_mean",
    "hip_angle_r_sd",
    "knee_angle_r_mean",
    "knee_angle_r_sd",
    "ankle_angle_r_mean",
    "ankle_angle_r_sd",
    "exo_torque_r_mean",
    "exo_torque_r_sd",
    "exo_power_r_mean",
    "exo_power_r_sd",
    "foot_force_r_mean",
    "foot_force_r_sd",
];

pub const ACTIVATION_FILE: &str = "activations_stage2_vs_stage4.csv";
pub const ACTIVATION_SUMMARY_FILE: &str = "activation_summary.csv";
pub const ACTIVATION_SUMMARY_HEADER: [&str; 4] = ["muscle", "stage2_mean", "stage4_mean", "change_pct"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExportSummary {
    pub files: Vec<PathBuf>,
    pub reward_rows: usize,
    /// Gait cycles found in each stage's evaluation rollout.
    pub cycles: Vec<(u8, usize)>,
}

/// Evaluation rollout read back by column name.
struct EvalTable {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl EvalTable {
    fn read(path: &Path) -> Result<Self, CliError> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("evaluation file lacks column {name}")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    fn muscles(&self) -> Vec<String> {
        self.header
            .iter()
            .filter_map(|h| h.strip_prefix("act_"))
            .map(str::to_owned)
            .collect()
    }
}

/// Cycle-normalized waveforms of `channels`, pooling cycles found in every episode.
fn pooled_waveforms(table: &EvalTable, channels: &[Vec<f64>], rate: f64) -> Result<(usize, Vec<CycleWaveform>), CliError> {
    let episode = table.column("episode")?;
    let hip = table.column("hip_angle_r_rad")?;
    let mut curves: Vec<Vec<Vec<f64>>> = vec![Vec::new(); channels.len()];
    let mut start = 0;
    while start < episode.len() {
        let mut end = start;
        while end < episode.len() && episode[end] == episode[start] {
            end += 1;
        }
        if let Ok(cycles) = segment_cycles(&hip[start..end], rate, SEGMENT_MIN_PERIOD) {
            for c in &cycles {
                for (k, ch) in channels.iter().enumerate() {
                    curves[k].push(resample_cycle(&ch[start..end], c, CYCLE_POINTS));
                }
            }
        }
        start = end;
    }
    let n = curves[0].len();
    if n == 0 {
        return Ok((0, Vec::new()));
    }
    let waves = curves.iter().map(|c| waveform_from_curves(c)).collect::<Result<Vec<_>, _>>()?;
    Ok((n, waves))
}

fn write_waveforms(path: &Path, header: &[String], waves: &[CycleWaveform], sd: bool) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(header)?;
    if let Some(first) = waves.first() {
        for (k, p) in first.pct().iter().enumerate() {
            let mut row = vec![*p];
            for wave in waves {
                row.push(wave.mean[k]);
                if sd {
                    row.push(wave.sd[k]);
                }
            }
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn control_rate(table: &EvalTable) -> Result<f64, CliError> {
    let t = table.column("time_s")?;
    let ep = table.column("episode")?;
    let dt = t
        .windows(2)
        .zip(ep.windows(2))
        .find(|(_, e)| e[0] == e[1])
        .map(|(t, _)| t[1] - t[0])
        .ok_or_else(|| CliError::Data("evaluation rollout too short".into()))?;
    Ok(1.0 / dt)
}

/// Plot-ready CSVs from a training run directory.
pub fn cmd_export_plots(run_dir: &Path, out_dir: &Path) -> Result<ExportSummary, CliError> {
    let stages: Vec<u8> = (1..=4).filter(|&s| metrics_path(run_dir, s).exists()).collect();
    if stages.is_empty() {
        return Err(CliError::Data(format!("no stage metric logs in {}", run_dir.display())));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut summary = ExportSummary::default();

    let path = out_dir.join(REWARD_CURVE_FILE);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    w.write_record(REWARD_CURVE_HEADER)?;
    for &s in &stages {
        for r in read_metrics_csv(File::open(metrics_path(run_dir, s))?)? {
            w.write_record([
                s.to_string(),
                r.update.to_string(),
                r.step.to_string(),
                r.episode_reward.to_string(),
                r.step_reward.to_string(),
                r.mean_abs_u.to_string(),
                r.approx_kl.to_string(),
                r.entropy.to_string(),
                r.toe_off_pct.to_string(),
            ])?;
            summary.reward_rows += 1;
        }
    }
    w.flush()?;
    summary.files.push(path);

    let mut activation: Vec<(u8, Vec<String>, Vec<CycleWaveform>)> = Vec::new();
    for s in 1..=4u8 {
        let e = eval_path(run_dir, s);
        if !e.exists() {
            continue;
        }
        let table = EvalTable::read(&e)?;
        if table.rows.len() < 2 {
            continue;
        }
        let rate = control_rate(&table)?;
        let tau = table.column("exo_torque_r_nm")?;
        let vel = table.column("hip_vel_r_rads")?;
        let power: Vec<f64> = tau.iter().zip(&vel).map(|(t, w)| t * w).collect();
        let channels = vec![
            table.column("hip_angle_r_rad")?,
            table.column("knee_angle_r_rad")?,
            table.column("ankle_angle_r_rad")?,
            tau,
            power,
            table.column("foot_force_r_n")?,
        ];
        let (n, waves) = pooled_waveforms(&table, &channels, rate)?;
        let path = out_dir.join(format!("gait_stage{s}.csv"));
        let header: Vec<String> = GAIT_HEADER.iter().map(|h| h.to_string()).collect();
        write_waveforms(&path, &header, &waves, true)?;
        summary.files.push(path);
        summary.cycles.push((s, n));
        if s == 2 || s == 4 {
            let muscles = table.muscles();
            let acts = muscles
                .iter()
                .map(|m| table.column(&format!("act_{m}")))
                .collect::<Result<Vec<_>, _>>()?;
            let (_, waves) = pooled_waveforms(&table, &acts, rate)?;
            activation.push((s, muscles, waves));
        }
    }

    if let [(2, names, w2), (4, names4, w4)] = activation.as_slice() {
        if names == names4 && !w2.is_empty() && !w4.is_empty() {
            let mut header = vec!["pct".to_string()];
            let mut waves = Vec::new();
            for (k, m) in names.iter().enumerate() {
                header.push(format!("stage2_{m}"));
                header.push(format!("stage4_{m}"));
                waves.push(w2[k].clone());
                waves.push(w4[k].clone());
            }
            let path = out_dir.join(ACTIVATION_FILE);
            write_waveforms(&path, &header, &waves, false)?;
            summary.files.push(path);

            let path = out_dir.join(ACTIVATION_SUMMARY_FILE);
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
            w.write_record(ACTIVATION_SUMMARY_HEADER)?;
            for (k, m) in names.iter().enumerate() {
                let avg = |v: &CycleWaveform| v.mean.iter().sum::<f64>() / v.mean.len() as f64;
                let (a, b) = (avg(&w2[k]), avg(&w4[k]));
                w.write_record([m.clone(), a.to_string(), b.to_string(), (100.0 * (b - a) / a).to_string()])?;
            }
            w.flush()?;
            summary.files.push(path);
        }
    }
    Ok(summary)
}
