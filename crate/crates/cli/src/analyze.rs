use std::collections::HashSet;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use smat_core::gait::{
    cycle_metrics, normalize_to_cycle, one_euro_filter, segment_cycles, symmetry_pearson, CycleWaveform, GaitTrace,
    OneEuroParams, TorquePowerMetrics, CYCLE_POINTS, SEGMENT_MIN_PERIOD,
};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct AnalyzeArgs {
    pub traces: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Smooth torque and velocity before computing power; None analyzes raw signals.
    pub filter: Option<OneEuroParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub name: String,
    pub cycles: [usize; 2],
    pub side_metrics: [TorquePowerMetrics; 2],
    /// Mean of the right and left metrics.
    pub metrics: TorquePowerMetrics,
    /// Pearson r of right and left cycle-normalized torque; None if either is flat.
    pub symmetry: Option<f64>,
    /// Hip angle, torque and power per side.
    pub waveforms: [[CycleWaveform; 2]; 3],
}

fn mean_metrics(a: &TorquePowerMetrics, b: &TorquePowerMetrics) -> TorquePowerMetrics {
    TorquePowerMetrics {
        tau_rms: 0.5 * (a.tau_rms + b.tau_rms),
        tau_max: 0.5 * (a.tau_max + b.tau_max),
        mpp: 0.5 * (a.mpp + b.mpp),
        mnp: 0.5 * (a.mnp + b.mnp),
        neg_fraction: 0.5 * (a.neg_fraction + b.neg_fraction),
    }
}

pub fn analyze_trace(name: &str, trace: &GaitTrace, filter: Option<&OneEuroParams>) -> Result<TraceReport, CliError> {
    trace.validate()?;
    let rate = trace.sample_rate();
    let smooth = |x: &[f64]| -> Result<Vec<f64>, CliError> {
        match filter {
            Some(p) => Ok(one_euro_filter(x, rate, p)?),
            None => Ok(x.to_vec()),
        }
    };
    let mut cycles = [0; 2];
    let mut side_metrics = [TorquePowerMetrics::default(); 2];
    let mut waves: Vec<[CycleWaveform; 3]> = Vec::new();
    for s in 0..2 {
        let tau = smooth(&trace.torque[s])?;
        let vel = smooth(&trace.hip_vel[s])?;
        let power: Vec<f64> = tau.iter().zip(&vel).map(|(t, w)| t * w).collect();
        let c = segment_cycles(&trace.hip_angle[s], rate, SEGMENT_MIN_PERIOD)
            .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        cycles[s] = c.len();
        side_metrics[s] = cycle_metrics(&tau, &vel, &c, rate)?;
        waves.push([
            normalize_to_cycle(&trace.hip_angle[s], &c, CYCLE_POINTS)?,
            normalize_to_cycle(&tau, &c, CYCLE_POINTS)?,
            normalize_to_cycle(&power, &c, CYCLE_POINTS)?,
        ]);
    }
    let symmetry = symmetry_pearson(&waves[0][1].mean, &waves[1][1].mean).ok();
    let [r, l]: [[CycleWaveform; 3]; 2] = waves.try_into().expect("two sides");
    let [ra, rt, rp] = r;
    let [la, lt, lp] = l;
    Ok(TraceReport {
        name: name.to_string(),
        cycles,
        metrics: mean_metrics(&side_metrics[0], &side_metrics[1]),
        side_metrics,
        symmetry,
        waveforms: [[ra, la], [rt, lt], [rp, lp]],
    })
}

pub const METRICS_FILE: &str = "metrics.csv";

pub const METRICS_HEADER: [&str; 9] = [
    "trace",
    "cycles_r",
    "cycles_l",
    "tau_rms_nm",
    "tau_max_nm",
    "mpp_w",
    "mnp_w",
    "neg_fraction",
    "symmetry_r",
];

pub const WAVEFORM_HEADER: [&str; 13] = [
    "pct",
    "hip_angle_r_mean",
    "hip_angle_r_sd",
    "hip_angle_l_mean",
    "hip_angle_l_sd",
    "torque_r_mean",
    "torque_r_sd",
    "torque_l_mean",
    "torque_l_sd",
    "power_r_mean",
    "power_r_sd",
    "power_l_mean",
    "power_l_sd",
];

fn report_values(r: &TraceReport) -> [f64; 8] {
    [
        r.cycles[0] as f64,
        r.cycles[1] as f64,
        r.metrics.tau_rms,
        r.metrics.tau_max,
        r.metrics.mpp,
        r.metrics.mnp,
        r.metrics.neg_fraction,
        r.symmetry.unwrap_or(f64::NAN),
    ]
}

/// Column-wise mean and sample SD across reports; SD is 0 for a single report.
pub fn summary_rows(reports: &[TraceReport]) -> ([f64; 8], [f64; 8]) {
    let n = reports.len() as f64;
    let mut mean = [0.0; 8];
    for r in reports {
        for (m, v) in mean.iter_mut().zip(report_values(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut sd = [0.0; 8];
    if reports.len() > 1 {
        for r in reports {
            for ((s, v), m) in sd.iter_mut().zip(report_values(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut sd {
            *s = (*s / (n - 1.0)).sqrt();
        }
    }
    (mean, sd)
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn unique_stem(path: &Path, seen: &mut HashSet<String>) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string();
    let mut name = stem.clone();
    let mut k = 2;
    while !seen.insert(name.clone()) {
        name = format!("{stem}_{k}");
        k += 1;
    }
    name
}

/// Metrics per trace plus mean and SD rows, and one waveform file per trace.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Vec<TraceReport>, CliError> {
    if args.traces.is_empty() {
        return Err(CliError::Config("no trace files given".into()));
    }
    let mut seen = HashSet::new();
    let mut reports = Vec::new();
    for path in &args.traces {
        let name = unique_stem(path, &mut seen);
        let trace = GaitTrace::read_csv(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        reports.push(analyze_trace(&name, &trace, args.filter.as_ref())?);
    }
    std::fs::create_dir_all(&args.output_dir)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(args.output_dir.join(METRICS_FILE))?));
    w.write_record(METRICS_HEADER)?;
    for r in &reports {
        let mut row = vec![r.name.clone()];
        row.extend(report_values(r).iter().map(|v| fmt(*v)));
        w.write_record(&row)?;
    }
    let (mean, sd) = summary_rows(&reports);
    for (label, vals) in [("mean", mean), ("sd", sd)] {
        let mut row = vec![label.to_string()];
        row.extend(vals.iter().map(|v| fmt(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;

    for r in &reports {
        let path = args.output_dir.join(format!("{}_waveform.csv", r.name));
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        w.write_record(WAVEFORM_HEADER)?;
        let pct = r.waveforms[0][0].pct();
        for (k, p) in pct.iter().enumerate() {
            let mut row = vec![*p];
            for channel in &r.waveforms {
                for side in channel {
                    row.push(side.mean[k]);
                    row.push(side.sd[k]);
                }
            }
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    Ok(reports)
}
