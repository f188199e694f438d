//! Offline gait signal processing: smoothing, cycle segmentation, torque and power
//! metrics, cycle-normalized waveforms, phase lag and bilateral symmetry.

mod trace;

pub use trace::{GaitTrace, TRACE_HEADER, TRACE_HEADER_WITH_FORCE};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum stride duration accepted by the segmentation (s).
pub const SEGMENT_MIN_PERIOD: f64 = 0.6;
/// Minimum peak prominence as a fraction of the signal's peak-to-peak range.
pub const PROMINENCE_FRACTION: f64 = 0.2;
/// Foot force below this fraction of body weight counts as unloaded.
pub const TOE_OFF_THRESHOLD: f64 = 0.02;
/// Samples of a cycle-normalized waveform (0 to 100 % inclusive).
pub const CYCLE_POINTS: usize = 101;

#[derive(Debug, Error)]
pub enum GaitError {
    #[error("no gait cycles found")]
    EmptySegmentation,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("trace schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneEuroParams {
    /// Hz.
    pub min_cutoff: f64,
    pub beta: f64,
    /// Hz.
    pub d_cutoff: f64,
}

impl Default for OneEuroParams {
    fn default() -> Self {
        Self {
            min_cutoff: 1.0,
            beta: 0.007,
            d_cutoff: 1.0,
        }
    }
}

fn smoothing(cutoff: f64, rate: f64) -> f64 {
    let tau = 1.0 / (2.0 * PI * cutoff);
    1.0 / (1.0 + tau * rate)
}

/// Adaptive-cutoff exponential smoothing; the cutoff rises with the filtered speed.
pub fn one_euro_filter(signal: &[f64], sample_rate: f64, params: &OneEuroParams) -> Result<Vec<f64>, GaitError> {
    if signal.is_empty() {
        return Err(GaitError::InvalidInput("empty signal".into()));
    }
    if !(sample_rate > 0.0) || !(params.min_cutoff > 0.0) || !(params.d_cutoff > 0.0) {
        return Err(GaitError::InvalidInput("sample rate and cutoffs must be positive".into()));
    }
    let a_d = smoothing(params.d_cutoff, sample_rate);
    let mut out = Vec::with_capacity(signal.len());
    let mut x_hat = signal[0];
    let mut dx_hat = 0.0;
    out.push(x_hat);
    for &x in &signal[1..] {
        let dx = (x - x_hat) * sample_rate;
        dx_hat = a_d * dx + (1.0 - a_d) * dx_hat;
        let a = smoothing(params.min_cutoff + params.beta * dx_hat.abs(), sample_rate);
        x_hat = a * x + (1.0 - a) * x_hat;
        out.push(x_hat);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitCycle {
    pub start: usize,
    /// Exclusive; also the start of the next cycle.
    pub end: usize,
    /// s.
    pub duration: f64,
    /// Percent of the cycle.
    pub toe_off: Option<f64>,
}

impl GaitCycle {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Topographic prominence of the peak at `i`.
fn prominence(x: &[f64], i: usize) -> f64 {
    let h = x[i];
    let mut left_min = h;
    for j in (0..i).rev() {
        if x[j] > h {
            break;
        }
        left_min = left_min.min(x[j]);
    }
    let mut right_min = h;
    for &v in &x[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Split at peak hip flexion. Peaks need a prominence of at least 20 % of the signal
/// range and must be `min_period` apart; consecutive peaks bound one cycle.
pub fn segment_cycles(angle: &[f64], sample_rate: f64, min_period: f64) -> Result<Vec<GaitCycle>, GaitError> {
    if !(sample_rate > 0.0) || !(min_period >= 0.0) {
        return Err(GaitError::InvalidInput("sample rate must be positive".into()));
    }
    if angle.len() < 3 || angle.iter().any(|a| !a.is_finite()) {
        return Err(GaitError::EmptySegmentation);
    }
    let (lo, hi) = angle
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = hi - lo;
    if range <= 0.0 {
        return Err(GaitError::EmptySegmentation);
    }
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < angle.len() {
        if angle[i] > angle[i - 1] {
            // walk across a flat top
            let mut j = i;
            while j + 1 < angle.len() && angle[j + 1] == angle[i] {
                j += 1;
            }
            if j + 1 < angle.len() && angle[j + 1] < angle[i] {
                let mid = (i + j) / 2;
                if prominence(angle, mid) >= PROMINENCE_FRACTION * range {
                    peaks.push(mid);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    let min_gap = min_period * sample_rate;
    let mut by_height = peaks.clone();
    by_height.sort_by(|a, b| angle[*b].total_cmp(&angle[*a]).then(a.cmp(b)));
    let mut kept: Vec<usize> = Vec::new();
    for p in by_height {
        if kept.iter().all(|&k| (p as f64 - k as f64).abs() >= min_gap) {
            kept.push(p);
        }
    }
    kept.sort_unstable();
    if kept.len() < 2 {
        return Err(GaitError::EmptySegmentation);
    }
    Ok(kept
        .windows(2)
        .map(|w| GaitCycle {
            start: w[0],
            end: w[1],
            duration: (w[1] - w[0]) as f64 / sample_rate,
            toe_off: None,
        })
        .collect())
}

/// First sample in each cycle where the foot force drops below 2 % of body weight after
/// having been above it, in percent of the cycle.
pub fn detect_toe_off(force: &[f64], cycles: &[GaitCycle], body_weight: f64) -> Vec<Option<f64>> {
    let thr = TOE_OFF_THRESHOLD * body_weight;
    cycles
        .iter()
        .map(|c| {
            if c.end > force.len() || c.is_empty() {
                return None;
            }
            let mut loaded = false;
            for j in c.start..c.end {
                if force[j] >= thr {
                    loaded = true;
                } else if loaded {
                    return Some(100.0 * (j - c.start) as f64 / c.len() as f64);
                }
            }
            None
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TorquePowerMetrics {
    /// Nm.
    pub tau_rms: f64,
    /// Nm, absolute peak.
    pub tau_max: f64,
    /// Mean positive power, W.
    pub mpp: f64,
    /// Mean negative power, W.
    pub mnp: f64,
    /// Share of samples with negative power.
    pub neg_fraction: f64,
}

/// Metrics of one cycle of torque and joint velocity.
pub fn compute_metrics(torque: &[f64], velocity: &[f64], sample_rate: f64) -> Result<TorquePowerMetrics, GaitError> {
    if torque.len() != velocity.len() || torque.is_empty() {
        return Err(GaitError::InvalidInput(format!(
            "torque and velocity need equal nonzero lengths ({} vs {})",
            torque.len(),
            velocity.len()
        )));
    }
    if !(sample_rate > 0.0) {
        return Err(GaitError::InvalidInput("sample rate must be positive".into()));
    }
    let n = torque.len() as f64;
    let mut sq = 0.0;
    let mut peak: f64 = 0.0;
    let mut pos = 0.0;
    let mut neg = 0.0;
    let mut n_neg = 0usize;
    for (t, v) in torque.iter().zip(velocity) {
        sq += t * t;
        peak = peak.max(t.abs());
        let p = t * v;
        if p > 0.0 {
            pos += p;
        } else if p < 0.0 {
            neg += p;
            n_neg += 1;
        }
    }
    Ok(TorquePowerMetrics {
        tau_rms: (sq / n).sqrt(),
        tau_max: peak,
        mpp: pos / n,
        mnp: neg / n,
        neg_fraction: n_neg as f64 / n,
    })
}

/// Per-cycle metrics averaged across cycles.
pub fn cycle_metrics(
    torque: &[f64],
    velocity: &[f64],
    cycles: &[GaitCycle],
    sample_rate: f64,
) -> Result<TorquePowerMetrics, GaitError> {
    if cycles.is_empty() {
        return Err(GaitError::EmptySegmentation);
    }
    let mut acc = TorquePowerMetrics::default();
    for c in cycles {
        if c.end > torque.len() || c.end > velocity.len() {
            return Err(GaitError::InvalidInput("cycle exceeds signal".into()));
        }
        let m = compute_metrics(&torque[c.start..c.end], &velocity[c.start..c.end], sample_rate)?;
        acc.tau_rms += m.tau_rms;
        acc.tau_max += m.tau_max;
        acc.mpp += m.mpp;
        acc.mnp += m.mnp;
        acc.neg_fraction += m.neg_fraction;
    }
    let k = cycles.len() as f64;
    Ok(TorquePowerMetrics {
        tau_rms: acc.tau_rms / k,
        tau_max: acc.tau_max / k,
        mpp: acc.mpp / k,
        mnp: acc.mnp / k,
        neg_fraction: acc.neg_fraction / k,
    })
}

/// Pointwise mean and standard deviation over 0-100 % of the gait cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleWaveform {
    pub mean: Vec<f64>,
    /// Sample standard deviation; zero with a single cycle.
    pub sd: Vec<f64>,
    pub cycles: usize,
}

impl CycleWaveform {
    /// Percent-of-cycle abscissa.
    pub fn pct(&self) -> Vec<f64> {
        let n = self.mean.len();
        (0..n).map(|k| 100.0 * k as f64 / (n - 1) as f64).collect()
    }
}

/// Resample one cycle, `start..=end`, to `n_points` by linear interpolation.
pub fn resample_cycle(signal: &[f64], cycle: &GaitCycle, n_points: usize) -> Vec<f64> {
    let span = (cycle.end - cycle.start) as f64;
    (0..n_points)
        .map(|k| {
            let x = cycle.start as f64 + span * k as f64 / (n_points - 1) as f64;
            let i = (x.floor() as usize).min(signal.len() - 1);
            let f = x - i as f64;
            if f == 0.0 || i + 1 >= signal.len() {
                signal[i]
            } else {
                signal[i] + f * (signal[i + 1] - signal[i])
            }
        })
        .collect()
}

pub fn normalize_to_cycle(signal: &[f64], cycles: &[GaitCycle], n_points: usize) -> Result<CycleWaveform, GaitError> {
    if cycles.is_empty() {
        return Err(GaitError::EmptySegmentation);
    }
    if n_points < 2 {
        return Err(GaitError::InvalidInput("need at least two points per cycle".into()));
    }
    if cycles.iter().any(|c| c.end >= signal.len() || c.is_empty()) {
        return Err(GaitError::InvalidInput("cycle exceeds signal".into()));
    }
    let curves: Vec<Vec<f64>> = cycles.iter().map(|c| resample_cycle(signal, c, n_points)).collect();
    waveform_from_curves(&curves)
}

/// Pointwise mean and sample SD of already resampled cycles of equal length.
pub fn waveform_from_curves(curves: &[Vec<f64>]) -> Result<CycleWaveform, GaitError> {
    let Some(first) = curves.first() else {
        return Err(GaitError::EmptySegmentation);
    };
    let n_points = first.len();
    if curves.iter().any(|c| c.len() != n_points) {
        return Err(GaitError::InvalidInput("cycles resampled to different lengths".into()));
    }
    let k = curves.len() as f64;
    let mut mean = vec![0.0; n_points];
    for c in curves {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= k;
    }
    let mut sd = vec![0.0; n_points];
    if curves.len() > 1 {
        for c in curves {
            for ((s, v), m) in sd.iter_mut().zip(c).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut sd {
            *s = (*s / (k - 1.0)).sqrt();
        }
    }
    Ok(CycleWaveform {
        mean,
        sd,
        cycles: curves.len(),
    })
}

/// Shift of `b` relative to `a` that maximizes their circular cross-correlation, in
/// percent of the cycle within [-50, 50). Positive means `b` lags `a`.
pub fn phase_lag(a: &[f64], b: &[f64]) -> Result<f64, GaitError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(GaitError::InvalidInput("waveforms need equal nonzero length".into()));
    }
    let n = a.len();
    let ma = a.iter().sum::<f64>() / n as f64;
    let mb = b.iter().sum::<f64>() / n as f64;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for k in 0..n {
        let c: f64 = (0..n).map(|i| (a[i] - ma) * (b[(i + k) % n] - mb)).sum();
        if c > best.0 + 1e-12 * c.abs().max(1.0) {
            best = (c, k);
        }
    }
    let mut lag = best.1 as f64;
    if 2 * best.1 >= n {
        lag -= n as f64;
    }
    Ok(100.0 * lag / n as f64)
}

/// Pearson correlation of two waveforms.
pub fn symmetry_pearson(right: &[f64], left: &[f64]) -> Result<f64, GaitError> {
    if right.len() != left.len() || right.len() < 2 {
        return Err(GaitError::InvalidInput("need two equal-length waveforms of length >= 2".into()));
    }
    let n = right.len() as f64;
    let mr = right.iter().sum::<f64>() / n;
    let ml = left.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in right.iter().zip(left) {
        sxy += (x - mr) * (y - ml);
        sxx += (x - mr) * (x - mr);
        syy += (y - ml) * (y - ml);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(GaitError::InvalidInput("zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}
