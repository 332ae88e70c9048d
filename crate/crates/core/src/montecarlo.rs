//! Poisson-arrival Monte Carlo used as an independent check on the
//! accidental-coincidence formula and on the phase error it implies.
//!
//! Each trial owns a random stream derived from `(seed, trial_index)` alone,
//! so results do not depend on how trials are spread over worker threads.
//! Arrivals are generated lazily as sorted event times and coincidences are
//! found by merge-scanning the per-detector streams; windows are never
//! materialized.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp, Poisson};
use rayon::prelude::*;

use crate::error::{invalid, require_non_negative, Error, Result};
use crate::model::{reduce_phase, DetectionSpec, PhasePoint, WindowMode};
use crate::sagnac::shot_noise;
use crate::spurious::{phase_shift_spurious, SpuriousCount};

/// Largest t_meas/τ ratio simulated. Beyond this a double-precision arrival
/// time no longer resolves a jitter window comfortably.
pub const MAX_WINDOWS: f64 = 1e14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub seed: u64,
    pub trials: usize,
    pub window_mode: WindowMode,
}

impl McConfig {
    pub fn new(seed: u64, trials: usize, window_mode: WindowMode) -> Result<Self> {
        if trials == 0 {
            return Err(invalid("trials", "need at least one trial"));
        }
        Ok(Self {
            seed,
            trials,
            window_mode,
        })
    }
}

/// Deterministic random stream for one trial.
pub fn rng_stream(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Per-trial coincidence counts and their agreement with the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub window_mode: WindowMode,
    pub counts: Vec<u64>,
    pub mean: f64,
    /// Unbiased sample variance; zero for a single trial.
    pub variance: f64,
    pub analytic_prediction: f64,
    /// (mean − prediction) / standard error. `None` for fewer than two
    /// trials. When the sample variance vanishes the Poisson variance of the
    /// prediction stands in for it.
    pub z_score: Option<f64>,
}

impl McResult {
    fn from_counts(counts: Vec<u64>, window_mode: WindowMode, analytic_prediction: f64) -> Self {
        let (mean, variance) = mean_variance(counts.iter().map(|&c| c as f64));
        let z_score = (counts.len() >= 2).then(|| {
            let var = if variance > 0.0 { variance } else { analytic_prediction };
            if var > 0.0 {
                (mean - analytic_prediction) / (var / counts.len() as f64).sqrt()
            } else {
                0.0
            }
        });
        Self {
            window_mode,
            counts,
            mean,
            variance,
            analytic_prediction,
            z_score,
        }
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.counts.len() as f64).sqrt()
    }
}

/// Sequential mean and unbiased variance; summation order is fixed.
fn mean_variance(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, variance)
}

/// Sorted Poisson arrival times on [0, duration).
pub struct ArrivalStream {
    rng: ChaCha8Rng,
    gaps: Option<Exp<f64>>,
    now: f64,
    duration: f64,
}

impl ArrivalStream {
    pub fn new(rng: ChaCha8Rng, rate_hz: f64, duration_s: f64) -> Result<Self> {
        require_non_negative("rate_hz", rate_hz)?;
        let gaps = if rate_hz > 0.0 {
            Some(Exp::new(rate_hz).map_err(|e| invalid("rate_hz", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            rng,
            gaps,
            now: 0.0,
            duration: duration_s,
        })
    }
}

impl Iterator for ArrivalStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let gaps = self.gaps.as_ref()?;
        self.now += gaps.sample(&mut self.rng);
        if self.now < self.duration {
            Some(self.now)
        } else {
            self.gaps = None;
            None
        }
    }
}

/// Number of width-`window` bins holding at least one arrival on every stream.
pub fn count_binned<I>(streams: Vec<I>, window_s: f64) -> u64
where
    I: Iterator<Item = f64>,
{
    let bin = |t: f64| (t / window_s).floor() as u64;
    let mut streams = streams;
    let mut heads: Vec<u64> = Vec::with_capacity(streams.len());
    for s in streams.iter_mut() {
        match s.next() {
            Some(t) => heads.push(bin(t)),
            None => return 0,
        }
    }
    let mut count = 0;
    loop {
        let top = *heads.iter().max().expect("at least one stream");
        let all_equal = heads.iter().all(|&h| h == top);
        // advance lagging streams to the leading bin, or every stream past it
        let floor = if all_equal {
            count += 1;
            top + 1
        } else {
            top
        };
        for (s, h) in streams.iter_mut().zip(heads.iter_mut()) {
            while *h < floor {
                match s.next() {
                    Some(t) => *h = bin(t),
                    None => return count,
                }
            }
        }
    }
}

/// Number of N-tuples, one arrival per stream, spanning at most `window_s`.
///
/// Each tuple is counted once through its earliest member; exact ties are
/// broken by stream index.
pub fn count_sliding(streams: &[Vec<f64>], window_s: f64) -> u64 {
    let n = streams.len();
    let mut total: u64 = 0;
    for d in 0..n {
        // per other stream: [lo, hi) index range inside the window
        let mut lo = vec![0usize; n];
        let mut hi = vec![0usize; n];
        for &t in &streams[d] {
            let mut product: u64 = 1;
            for j in (0..n).filter(|&j| j != d) {
                let s = &streams[j];
                let strict = j < d;
                while lo[j] < s.len() && (s[lo[j]] < t || (strict && s[lo[j]] == t)) {
                    lo[j] += 1;
                }
                hi[j] = hi[j].max(lo[j]);
                while hi[j] < s.len() && s[hi[j]] <= t + window_s {
                    hi[j] += 1;
                }
                product *= (hi[j] - lo[j]) as u64;
                if product == 0 {
                    break;
                }
            }
            total += product;
        }
    }
    total
}

fn trial_streams(
    seed: u64,
    trial: u64,
    rates: &[f64],
    duration_s: f64,
) -> Result<Vec<ArrivalStream>> {
    let mut rng = rng_stream(seed, trial);
    rates
        .iter()
        .map(|&r| ArrivalStream::new(ChaCha8Rng::from_rng(&mut rng), r, duration_s))
        .collect()
}

/// Accidental-coincidence prediction for independent Poisson detectors in
/// the given counting mode.
///
/// Binned mode is the product formula (Π r_i t)(τ/t)^(N−1). Sliding mode
/// counts every ordering of the tuple inside the window and is larger by a
/// factor N.
pub fn predicted_accidentals(rates_hz: &[f64], det: &DetectionSpec, mode: WindowMode) -> f64 {
    let t = det.measurement_time_s();
    let tau = det.jitter_s();
    let n = rates_hz.len();
    let base = rates_hz.iter().map(|r| r * t).product::<f64>() * (tau / t).powi(n as i32 - 1);
    match mode {
        WindowMode::Binned => base,
        WindowMode::Sliding => n as f64 * base,
    }
}

/// Simulate independent Poisson arrivals on each detector and count
/// accidental N-fold coincidences per trial.
pub fn simulate_uncorrelated(rates_hz: &[f64], det: &DetectionSpec, mc: &McConfig) -> Result<McResult> {
    if rates_hz.len() < 2 {
        return Err(invalid(
            "rates_hz",
            format!("need at least 2 detectors, got {}", rates_hz.len()),
        ));
    }
    for &r in rates_hz {
        require_non_negative("rates_hz", r)?;
    }
    let t = det.measurement_time_s();
    let tau = det.jitter_s();
    let windows = t / tau;
    if windows > MAX_WINDOWS {
        return Err(Error::TooManyWindows {
            windows,
            limit: MAX_WINDOWS,
        });
    }
    let mode = mc.window_mode;
    let counts = (0..mc.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let streams = trial_streams(mc.seed, trial, rates_hz, t)?;
            Ok(match mode {
                WindowMode::Binned => count_binned(streams, tau),
                WindowMode::Sliding => {
                    let events: Vec<Vec<f64>> = streams.into_iter().map(|s| s.collect()).collect();
                    count_sliding(&events, tau)
                }
            })
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(McResult::from_counts(counts, mode, predicted_accidentals(rates_hz, det, mode)))
}

/// Distribution of phase estimates from simulated coincidence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Per-trial estimate minus the true phase; `None` where the observed
    /// count fell outside the fringe model's range.
    pub errors: Vec<Option<f64>>,
    pub failures: usize,
    pub mean_bias: f64,
    pub spread: f64,
    /// Spurious-count phase shift at the true operating point, with the
    /// coherence factor applied to the pair count.
    pub predicted_bias: Option<f64>,
    /// Shot noise 1/√(N · N·pairs).
    pub predicted_spread: f64,
    /// (mean_bias − predicted_bias) / standard error.
    pub bias_z_score: Option<f64>,
}

impl ExperimentResult {
    pub fn successes(&self) -> usize {
        self.errors.len() - self.failures
    }

    pub fn failure_fraction(&self) -> f64 {
        self.failures as f64 / self.errors.len() as f64
    }

    pub fn bias_standard_error(&self) -> f64 {
        self.spread / (self.successes() as f64).sqrt()
    }
}

/// Simulate N00N coincidences plus Poisson-distributed accidentals and read
/// each trial back through the ideal fringe model.
///
/// Per trial the observed count is Binomial(M, (1 + C cos Nφ)/2) plus
/// Poisson(ΔP). The estimate is taken on the same half-fringe as the true
/// phase, with no correction for accidentals, so its mean error estimates
/// the spurious phase shift.
pub fn simulate_experiment(
    pairs: f64,
    phase: PhasePoint,
    order: u32,
    coherence: f64,
    spurious: SpuriousCount,
    mc: &McConfig,
) -> Result<ExperimentResult> {
    if !(pairs.is_finite() && pairs >= 1.0) {
        return Err(invalid("pairs", format!("need at least one N00N pair, got {pairs}")));
    }
    if !(coherence > 0.0 && coherence <= 1.0) {
        return Err(invalid("coherence", format!("must lie in (0, 1], got {coherence}")));
    }
    if order < 1 {
        return Err(invalid("order", "must be >= 1"));
    }
    let m = pairs.round() as u64;
    let n = order as f64;
    let x = n * reduce_phase(phase.total(), order);
    let p = (0.5 * (1.0 + coherence * x.cos())).clamp(0.0, 1.0);
    let signal = Binomial::new(m, p).map_err(|e| invalid("pairs", e.to_string()))?;
    let lambda = spurious.delta_pcc();
    let noise = if lambda > 0.0 {
        Some(Poisson::new(lambda).map_err(|e| invalid("delta_pcc", e.to_string()))?)
    } else {
        None
    };
    let upper_half = x > PI;

    let errors: Vec<Option<f64>> = (0..mc.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_stream(mc.seed, trial);
            let mut observed = signal.sample(&mut rng) as f64;
            if let Some(noise) = &noise {
                observed += noise.sample(&mut rng);
            }
            let fringe = (2.0 * observed / m as f64 - 1.0) / coherence;
            if !(-1.0..=1.0).contains(&fringe) {
                return None;
            }
            let base = fringe.acos();
            let x_hat = if upper_half { 2.0 * PI - base } else { base };
            Some((x_hat - x) / n)
        })
        .collect();

    let ok: Vec<f64> = errors.iter().flatten().copied().collect();
    let failures = errors.len() - ok.len();
    let (mean_bias, variance) = mean_variance(ok.iter().copied());
    let spread = variance.sqrt();
    let predicted_bias = if m > 0 {
        phase_shift_spurious(coherence * m as f64, phase.total(), order, spurious)?.value()
    } else {
        None
    };
    let bias_z_score = match predicted_bias {
        Some(b) if ok.len() >= 2 && spread > 0.0 => Some((mean_bias - b) / (spread / (ok.len() as f64).sqrt())),
        _ => None,
    };
    Ok(ExperimentResult {
        errors,
        failures,
        mean_bias,
        spread,
        predicted_bias,
        predicted_spread: shot_noise(order, n * m as f64)?,
        bias_z_score,
    })
}

/// Pearson correlation of two equally long samples.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Draw `count` uniform samples from a trial stream.
pub fn uniform_samples(seed: u64, trial_index: u64, count: usize) -> Vec<f64> {
    let mut rng = rng_stream(seed, trial_index);
    (0..count).map(|_| rng.random::<f64>()).collect()
}
