//! Spurious coincidences from uncorrelated photons and the phase error they
//! induce.
//!
//! Accidental N-fold coincidences add ΔP_cc counts on top of the N00N
//! coincidence rate. Reading that excess through the ideal fringe model
//! shifts the inferred phase by Δφ_P, obtained by inverting
//!
//! ```text
//! ΔP_cc = (M/2) { cos(Nφ)(cos(NΔφ) − 1) − sin(Nφ) sin(NΔφ) }
//! ```
//!
//! The shift peaks sharply at the cusps φ = nπ/N. Around coincidence maxima
//! (φ = 2nπ/N) there is an interval where no real shift reproduces the
//! excess; those points are reported as undefined, never clamped.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{invalid, require_non_negative, Result};
use crate::model::{reduce_phase, DetectionSpec};

/// Published crossing offset from each cusp for the N=2, 10 dB, 156 ps
/// configuration. Printed for comparison only.
pub const REPORTED_CROSSING_OFFSET_RAD: f64 = 14e-3;

/// Published half-width of the undefined region for the same configuration.
/// Printed for comparison only.
pub const REPORTED_UNDEFINED_HALF_WIDTH_RAD: f64 = 1e-3;

/// Expected accidental coincidences over one measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpuriousCount {
    delta_pcc: f64,
    rate_hz: f64,
}

impl SpuriousCount {
    pub fn new(delta_pcc: f64, measurement_time_s: f64) -> Result<Self> {
        require_non_negative("delta_pcc", delta_pcc)?;
        if !(measurement_time_s > 0.0 && measurement_time_s.is_finite()) {
            return Err(invalid("measurement_time_s", "must be finite and > 0"));
        }
        Ok(Self {
            delta_pcc,
            rate_hz: delta_pcc / measurement_time_s,
        })
    }

    /// A bare count with no associated measurement time (rate reported per second of a 1 s window).
    pub fn from_count(delta_pcc: f64) -> Result<Self> {
        Self::new(delta_pcc, 1.0)
    }

    pub fn delta_pcc(&self) -> f64 {
        self.delta_pcc
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }
}

/// Accidental coincidences for arbitrary per-detector counts over one
/// measurement: (Π m_i) · (τ/t)^(N−1).
pub fn spurious_from_detector_counts(counts: &[f64], det: &DetectionSpec) -> Result<SpuriousCount> {
    if counts.len() < 2 {
        return Err(invalid("counts", format!("need at least 2 detectors, got {}", counts.len())));
    }
    for &c in counts {
        require_non_negative("counts", c)?;
    }
    let t = det.measurement_time_s();
    let duty = det.jitter_s() / t;
    let product: f64 = counts.iter().product();
    let delta = product * duty.powi(counts.len() as i32 - 1);
    SpuriousCount::new(delta, t)
}

/// Accidental coincidences when `singles_total` uncorrelated photons are
/// split evenly over `order` detectors, each also seeing `dark_rate_hz`.
pub fn spurious_coincidences(
    singles_total: f64,
    order: u32,
    det: &DetectionSpec,
    dark_rate_hz: f64,
) -> Result<SpuriousCount> {
    require_non_negative("singles_total", singles_total)?;
    require_non_negative("dark_rate_hz", dark_rate_hz)?;
    if order < 2 {
        return Err(invalid("order", format!("must be >= 2, got {order}")));
    }
    let per_detector = singles_total / order as f64 + dark_rate_hz * det.measurement_time_s();
    spurious_from_detector_counts(&vec![per_detector; order as usize], det)
}

/// Same as [`spurious_coincidences`] with the singles given as a total rate.
pub fn spurious_from_rate(
    singles_rate_hz: f64,
    order: u32,
    det: &DetectionSpec,
    dark_rate_hz: f64,
) -> Result<SpuriousCount> {
    require_non_negative("singles_rate_hz", singles_rate_hz)?;
    spurious_coincidences(singles_rate_hz * det.measurement_time_s(), order, det, dark_rate_hz)
}

/// (M/2){cos x (cos Nd − 1) − sin x sin Nd} with x = Nφ already reduced.
/// cos(Nd) − 1 is written as −2 sin²(Nd/2) to keep small shifts exact.
fn forward_reduced(pairs: f64, x: f64, order: f64, dphi: f64) -> f64 {
    let nd = order * dphi;
    let half = (0.5 * nd).sin();
    0.5 * pairs * (-2.0 * x.cos() * half * half - x.sin() * nd.sin())
}

/// Change in expected coincidences when the phase moves from `phase_total`
/// to `phase_total + dphi`.
pub fn coincidence_shift_forward(pairs: f64, phase_total: f64, order: u32, dphi: f64) -> f64 {
    let x = order as f64 * reduce_phase(phase_total, order);
    forward_reduced(pairs, x, order as f64, dphi)
}

/// Which sign of the arccosine term a solution uses.
///
/// `Plus` is Δφ_P+ = −(1/N) acos(…) + 2πn/N − φ; `Minus` carries +acos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

/// Solution of the spurious-count phase inversion at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShiftSolution {
    value_rad: f64,
    branch: Branch,
    branch_index: i64,
    defined: bool,
    acos_argument: f64,
}

impl PhaseShiftSolution {
    fn undefined(acos_argument: f64) -> Self {
        Self {
            value_rad: f64::NAN,
            branch: Branch::Plus,
            branch_index: 0,
            defined: false,
            acos_argument,
        }
    }

    /// Signed phase shift, or `None` inside an undefined region.
    pub fn value(&self) -> Option<f64> {
        self.defined.then_some(self.value_rad)
    }

    pub fn abs(&self) -> Option<f64> {
        self.value().map(f64::abs)
    }

    pub fn is_defined(&self) -> bool {
        self.defined
    }

    /// Branch sign and index n; meaningful only when defined.
    pub fn branch(&self) -> Option<(Branch, i64)> {
        self.defined.then_some((self.branch, self.branch_index))
    }

    /// 2ΔP/M + cos(Nφ); exceeds 1 exactly when the solution is undefined.
    pub fn acos_argument(&self) -> f64 {
        self.acos_argument
    }
}

fn check_pairs(pairs: f64) -> Result<f64> {
    if pairs.is_finite() && pairs > 0.0 {
        Ok(pairs)
    } else {
        Err(invalid("pairs", format!("N00N pair count must be > 0, got {pairs}")))
    }
}

/// Phase shift Δφ_P that reproduces `count` extra coincidences at
/// `phase_total`.
///
/// Both signs and n ∈ {−2..2} around the reduced phase are enumerated; the
/// solution of smallest magnitude is returned, then polished with Newton
/// steps on the forward relation so the round trip holds to rounding.
pub fn phase_shift_spurious(
    pairs: f64,
    phase_total: f64,
    order: u32,
    count: SpuriousCount,
) -> Result<PhaseShiftSolution> {
    let pairs = check_pairs(pairs)?;
    if order < 1 {
        return Err(invalid("order", "must be >= 1"));
    }
    if !phase_total.is_finite() {
        return Err(invalid("phase_total", "must be finite"));
    }
    let n = order as f64;
    let reduced = reduce_phase(phase_total, order);
    let period = 2.0 * PI / n;
    let offset_periods = ((phase_total - reduced) / period).round() as i64;
    let x = n * reduced;
    let a = 2.0 * count.delta_pcc() / pairs;
    let arg = x.cos() + a;
    if arg > 1.0 {
        return Ok(PhaseShiftSolution::undefined(arg));
    }
    let theta = arg.max(-1.0).acos();

    let mut best: Option<(f64, Branch, i64)> = None;
    for branch in [Branch::Minus, Branch::Plus] {
        let signed = match branch {
            Branch::Plus => -theta,
            Branch::Minus => theta,
        };
        for k in -2i64..=2 {
            let d = (signed + 2.0 * PI * k as f64 - x) / n;
            if best.is_none_or(|(b, _, _)| d.abs() < b.abs()) {
                best = Some((d, branch, k));
            }
        }
    }
    let (mut d, branch, k) = best.expect("candidate set is non-empty");

    let target = count.delta_pcc();
    let mut residual = (forward_reduced(pairs, x, n, d) - target).abs();
    for _ in 0..4 {
        if residual == 0.0 {
            break;
        }
        let slope = -0.5 * pairs * n * (x + n * d).sin();
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let step = (forward_reduced(pairs, x, n, d) - target) / slope;
        let candidate = d - step;
        let r = (forward_reduced(pairs, x, n, candidate) - target).abs();
        if r < residual {
            d = candidate;
            residual = r;
        } else {
            break;
        }
    }

    Ok(PhaseShiftSolution {
        value_rad: d,
        branch,
        branch_index: k + offset_periods,
        defined: true,
        acos_argument: arg,
    })
}

/// Peak shift at the coincidence-minimum cusps, (2/N)√(ΔP/M).
pub fn phase_shift_cusp(pairs: f64, order: u32, count: SpuriousCount) -> Result<f64> {
    let pairs = check_pairs(pairs)?;
    Ok(2.0 / order as f64 * (count.delta_pcc() / pairs).sqrt())
}

/// Half-width of the undefined interval around each coincidence maximum.
///
/// The inversion fails where cos(Nφ) > 1 − a with a = 2ΔP/M, i.e. for
/// |φ| < acos(1 − a)/N = 2 asin(√(a/2))/N. For a ≥ 2 the whole fringe is
/// undefined and π/N is returned.
pub fn undefined_half_width(pairs: f64, order: u32, count: SpuriousCount) -> Result<f64> {
    let pairs = check_pairs(pairs)?;
    let n = order as f64;
    let a = 2.0 * count.delta_pcc() / pairs;
    if a >= 2.0 {
        return Ok(PI / n);
    }
    Ok(2.0 * (a / 2.0).sqrt().asin() / n)
}

/// Largest total singles rate (Hz, summed over detectors) for which the
/// spurious shift at the optimal bias stays at `safety_margin` times the
/// shot noise, with M = N · pairs.
///
/// At sin(Nφ) = 1 the inversion is exact: |Δφ_P| = asin(2ΔP/M)/N, so the
/// tolerable ΔP follows directly and the product formula is solved for the
/// per-detector count. Returns infinity when no rate can reach the target.
pub fn max_singles_flux(
    pairs_rate_hz: f64,
    order: u32,
    det: &DetectionSpec,
    dark_rate_hz: f64,
    safety_margin: f64,
) -> Result<f64> {
    require_non_negative("pairs_rate_hz", pairs_rate_hz)?;
    require_non_negative("dark_rate_hz", dark_rate_hz)?;
    if !(safety_margin.is_finite() && safety_margin > 0.0) {
        return Err(invalid("safety_margin", format!("must be > 0, got {safety_margin}")));
    }
    if order < 2 {
        return Err(invalid("order", format!("must be >= 2, got {order}")));
    }
    let t = det.measurement_time_s();
    let pairs = pairs_rate_hz * t;
    if pairs == 0.0 {
        return Ok(0.0);
    }
    let n = order as f64;
    let shot = crate::sagnac::shot_noise(order, n * pairs)?;
    let target = safety_margin * shot * n;
    if target >= PI / 2.0 {
        return Ok(f64::INFINITY);
    }
    let delta = 0.5 * pairs * target.sin();
    let duty = det.jitter_s() / t;
    let per_detector = (delta / duty.powi(order as i32 - 1)).powf(1.0 / n);
    let singles_per_detector = (per_detector - dark_rate_hz * t).max(0.0);
    Ok(n * singles_per_detector / t)
}

/// Threshold applied when classifying bias points as safe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZoneThreshold {
    /// |Δφ_P| below the shot noise.
    ShotNoise,
    /// |Δφ_P| below a tenth of the shot noise.
    TenthShotNoise,
    /// Explicit threshold in radians.
    Absolute(f64),
}

impl ZoneThreshold {
    pub fn radians(&self, shot_noise_rad: f64) -> f64 {
        match *self {
            ZoneThreshold::ShotNoise => shot_noise_rad,
            ZoneThreshold::TenthShotNoise => 0.1 * shot_noise_rad,
            ZoneThreshold::Absolute(v) => v,
        }
    }
}

/// Extremum type of the coincidence rate at a cusp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuspKind {
    /// cos(Nφ) = 1; surrounded by an undefined interval when ΔP > 0.
    Maximum,
    /// cos(Nφ) = −1; the shift peaks at (2/N)√(ΔP/M).
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cusp {
    pub phase_rad: f64,
    pub kind: CuspKind,
}

/// Closed phase interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A point where |Δφ_P| meets the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub phase_rad: f64,
    /// | |Δφ_P(φ*)| − threshold |
    pub residual_rad: f64,
    /// Signed distance from the nearest cusp.
    pub offset_from_cusp_rad: f64,
    pub cusp_kind: CuspKind,
}

/// Scan settings for [`bias_zone_scan`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub range_lo: f64,
    pub range_hi: f64,
    /// Grid points per π of total phase; at least 1000.
    pub points_per_pi: usize,
    pub threshold: ZoneThreshold,
}

impl ScanConfig {
    pub fn new(range_lo: f64, range_hi: f64) -> Self {
        Self {
            range_lo,
            range_hi,
            points_per_pi: 2000,
            threshold: ZoneThreshold::ShotNoise,
        }
    }

    pub fn with_threshold(self, threshold: ZoneThreshold) -> Self {
        Self { threshold, ..self }
    }

    pub fn with_resolution(self, points_per_pi: usize) -> Self {
        Self { points_per_pi, ..self }
    }
}

/// Layout of cusps, undefined regions and safe bias windows over a phase range.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasZoneReport {
    pub range: Interval,
    pub threshold_rad: f64,
    pub shot_noise_rad: f64,
    pub cusps: Vec<Cusp>,
    pub undefined_intervals: Vec<Interval>,
    pub above_shot_noise_intervals: Vec<Interval>,
    /// Crossings of |Δφ_P| with the shot noise.
    pub shot_noise_crossings: Vec<Crossing>,
    pub safe_windows: Vec<Interval>,
    /// Crossings of |Δφ_P| with the selected threshold.
    pub threshold_crossings: Vec<Crossing>,
    pub optimal_bias_points: Vec<f64>,
    pub undefined_half_width_rad: f64,
    pub cusp_peak_rad: f64,
}

impl BiasZoneReport {
    pub fn cusp_locations(&self) -> Vec<f64> {
        self.cusps.iter().map(|c| c.phase_rad).collect()
    }

    /// Mean |offset| of shot-noise crossings from cusps of the given kind.
    pub fn mean_crossing_offset(&self, kind: CuspKind) -> Option<f64> {
        let offsets: Vec<f64> = self
            .shot_noise_crossings
            .iter()
            .filter(|c| c.cusp_kind == kind)
            .map(|c| c.offset_from_cusp_rad.abs())
            .collect();
        (!offsets.is_empty()).then(|| offsets.iter().sum::<f64>() / offsets.len() as f64)
    }
}

struct ZoneModel {
    pairs: f64,
    order: u32,
    count: SpuriousCount,
}

impl ZoneModel {
    /// |Δφ_P|, `None` where undefined.
    fn magnitude(&self, phase: f64) -> Option<f64> {
        phase_shift_spurious(self.pairs, phase, self.order, self.count)
            .ok()
            .and_then(|s| s.abs())
    }

    fn is_safe(&self, phase: f64, threshold: f64) -> bool {
        matches!(self.magnitude(phase), Some(m) if m < threshold)
    }

    fn nearest_cusp(&self, phase: f64) -> Cusp {
        let step = PI / self.order as f64;
        let k = (phase / step).round();
        Cusp {
            phase_rad: k * step,
            kind: if (k as i64).rem_euclid(2) == 0 {
                CuspKind::Maximum
            } else {
                CuspKind::Minimum
            },
        }
    }

    /// Narrow [safe, unsafe] (either order) to adjacent floats.
    fn refine(&self, mut a: f64, mut b: f64, threshold: f64) -> (f64, f64) {
        let safe_a = self.is_safe(a, threshold);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a.min(b) || mid >= a.max(b) {
                break;
            }
            if self.is_safe(mid, threshold) == safe_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        (a, b)
    }

    /// Boundary between a safe and an unsafe grid point. Returns the boundary
    /// phase and, when it is a genuine threshold crossing, its record.
    fn boundary(&self, a: f64, b: f64, threshold: f64) -> (f64, Option<Crossing>) {
        let (a, b) = self.refine(a, b, threshold);
        // one side is safe and therefore defined; the crossing is genuine
        // only if the unsafe side is defined too
        let (safe_pt, unsafe_pt) = if self.is_safe(a, threshold) { (a, b) } else { (b, a) };
        let Some(m_unsafe) = self.magnitude(unsafe_pt) else {
            return (safe_pt, None);
        };
        let m_safe = self.magnitude(safe_pt).expect("safe points are defined");
        let (phase, m) = if (m_safe - threshold).abs() <= (m_unsafe - threshold).abs() {
            (safe_pt, m_safe)
        } else {
            (unsafe_pt, m_unsafe)
        };
        let cusp = self.nearest_cusp(phase);
        (
            phase,
            Some(Crossing {
                phase_rad: phase,
                residual_rad: (m - threshold).abs(),
                offset_from_cusp_rad: phase - cusp.phase_rad,
                cusp_kind: cusp.kind,
            }),
        )
    }
}

fn scan_grid(lo: f64, hi: f64, points_per_pi: usize, order: u32) -> Vec<f64> {
    let steps = (((hi - lo) / PI) * points_per_pi as f64).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=steps)
        .map(|i| if i == steps { hi } else { lo + (hi - lo) * i as f64 / steps as f64 })
        .collect();
    // every unsafe run contains a cusp, so cusps are always sampled
    let step = PI / order as f64;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    grid.extend((first..=last).map(|k| k as f64 * step));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Unsafe runs and threshold crossings for one threshold.
fn unsafe_runs(
    model: &ZoneModel,
    grid: &[f64],
    threshold: f64,
) -> (Vec<Interval>, Vec<Crossing>) {
    let safe: Vec<bool> = grid.par_iter().map(|&p| model.is_safe(p, threshold)).collect();
    let mut runs = Vec::new();
    let mut crossings = Vec::new();
    let mut start = (!safe[0]).then_some(grid[0]);
    for i in 1..grid.len() {
        if safe[i] == safe[i - 1] {
            continue;
        }
        let (edge, crossing) = model.boundary(grid[i - 1], grid[i], threshold);
        crossings.extend(crossing);
        if safe[i] {
            let lo = start.take().expect("unsafe run was open");
            runs.push(Interval { lo, hi: edge });
        } else {
            start = Some(edge);
        }
    }
    if let Some(lo) = start {
        runs.push(Interval {
            lo,
            hi: *grid.last().expect("grid is non-empty"),
        });
    }
    (runs, crossings)
}

fn complement(range: Interval, holes: &[Interval]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut cursor = range.lo;
    for h in holes {
        if h.lo > cursor {
            out.push(Interval { lo: cursor, hi: h.lo });
        }
        cursor = cursor.max(h.hi);
    }
    if cursor < range.hi {
        out.push(Interval { lo: cursor, hi: range.hi });
    }
    out
}

/// Map cusps, undefined intervals, above-shot-noise zones and safe windows
/// of |Δφ_P| over a range of total phase.
pub fn bias_zone_scan(
    pairs: f64,
    order: u32,
    count: SpuriousCount,
    shot_noise_rad: f64,
    scan: ScanConfig,
) -> Result<BiasZoneReport> {
    let pairs = check_pairs(pairs)?;
    if order < 1 {
        return Err(invalid("order", "must be >= 1"));
    }
    if !(shot_noise_rad.is_finite() && shot_noise_rad > 0.0) {
        return Err(invalid("shot_noise_rad", format!("must be > 0, got {shot_noise_rad}")));
    }
    if !(scan.range_lo.is_finite() && scan.range_hi.is_finite() && scan.range_lo < scan.range_hi) {
        return Err(invalid(
            "range",
            format!("need finite lo < hi, got [{}, {}]", scan.range_lo, scan.range_hi),
        ));
    }
    if scan.points_per_pi < 1000 {
        return Err(invalid(
            "points_per_pi",
            format!("resolution must be at least 1000 points per π, got {}", scan.points_per_pi),
        ));
    }
    let threshold = scan.threshold.radians(shot_noise_rad);
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(invalid("threshold", format!("must be > 0, got {threshold}")));
    }

    let range = Interval {
        lo: scan.range_lo,
        hi: scan.range_hi,
    };
    let n = order as f64;
    let model = ZoneModel { pairs, order, count };
    let half_width = undefined_half_width(pairs, order, count)?;
    let cusp_peak = phase_shift_cusp(pairs, order, count)?;

    let step = PI / n;
    let first = (range.lo / step).ceil() as i64;
    let last = (range.hi / step).floor() as i64;
    let cusps: Vec<Cusp> = (first..=last)
        .map(|k| Cusp {
            phase_rad: k as f64 * step,
            kind: if k.rem_euclid(2) == 0 {
                CuspKind::Maximum
            } else {
                CuspKind::Minimum
            },
        })
        .collect();

    let mut undefined_intervals = Vec::new();
    if half_width > 0.0 {
        if half_width >= step {
            undefined_intervals.push(range);
        } else {
            // maxima just outside the range can still reach into it
            let period = 2.0 * step;
            let k_lo = ((range.lo - half_width) / period).ceil() as i64;
            let k_hi = ((range.hi + half_width) / period).floor() as i64;
            for k in k_lo..=k_hi {
                let c = k as f64 * period;
                let iv = Interval {
                    lo: (c - half_width).max(range.lo),
                    hi: (c + half_width).min(range.hi),
                };
                if iv.lo < iv.hi {
                    undefined_intervals.push(iv);
                }
            }
        }
    }

    let grid = scan_grid(range.lo, range.hi, scan.points_per_pi, order);
    let (above_shot_noise_intervals, shot_noise_crossings) = unsafe_runs(&model, &grid, shot_noise_rad);
    let (unsafe_threshold, threshold_crossings) = if threshold == shot_noise_rad {
        (above_shot_noise_intervals.clone(), shot_noise_crossings.clone())
    } else {
        unsafe_runs(&model, &grid, threshold)
    };
    let safe_windows = complement(range, &unsafe_threshold);

    let first_opt = ((range.lo - step / 2.0) / step).ceil() as i64;
    let last_opt = ((range.hi - step / 2.0) / step).floor() as i64;
    let optimal_bias_points = (first_opt..=last_opt)
        .map(|k| step / 2.0 + k as f64 * step)
        .collect();

    Ok(BiasZoneReport {
        range,
        threshold_rad: threshold,
        shot_noise_rad,
        cusps,
        undefined_intervals,
        above_shot_noise_intervals,
        shot_noise_crossings,
        safe_windows,
        threshold_crossings,
        optimal_bias_points,
        undefined_half_width_rad: half_width,
        cusp_peak_rad: cusp_peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WindowMode;
    use crate::sagnac::shot_noise;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const M_REF: f64 = 7.2e6;
    const DP_REF: f64 = 101.3;

    fn det(jitter: f64, t: f64) -> DetectionSpec {
        DetectionSpec::new(jitter, t, WindowMode::Binned).unwrap()
    }

    fn count(dp: f64) -> SpuriousCount {
        SpuriousCount::from_count(dp).unwrap()
    }

    #[test]
    fn zero_singles_no_spurious() {
        let c = spurious_coincidences(0.0, 2, &det(156e-12, 1800.0), 0.0).unwrap();
        assert_eq!(c.delta_pcc(), 0.0);
        assert_eq!(c.rate_hz(), 0.0);
    }

    #[test]
    fn spurious_rate_examples() {
        let r = spurious_from_rate(38.1e3, 2, &det(156e-12, 1.0), 0.0).unwrap();
        // f²τ/4
        assert_relative_eq!(r.rate_hz(), 38.1e3f64.powi(2) * 156e-12 / 4.0, max_relative = 1e-12);
        assert_relative_eq!(r.rate_hz(), 0.0566, max_relative = 0.05);
        let r = spurious_from_rate(40e3, 2, &det(200e-12, 1.0), 0.0).unwrap();
        assert_relative_eq!(r.rate_hz(), 0.08, max_relative = 0.02);
        // the rate is independent of the integration time
        let long = spurious_from_rate(40e3, 2, &det(200e-12, 1800.0), 0.0).unwrap();
        assert_relative_eq!(long.rate_hz(), r.rate_hz(), max_relative = 1e-12);
        assert_relative_eq!(long.delta_pcc(), 0.08 * 1800.0, max_relative = 0.02);
    }

    #[test]
    fn dark_counts_are_a_small_correction() {
        let d = det(156e-12, 1800.0);
        let signal = spurious_from_rate(38e3, 2, &d, 0.0).unwrap().delta_pcc();
        let dark_only = spurious_from_rate(0.0, 2, &d, 1e3).unwrap().delta_pcc();
        let both = spurious_from_rate(38e3, 2, &d, 1e3).unwrap().delta_pcc();
        // dark × dark accidentals: (1 kHz / 19 kHz)² ≈ 1/361
        let ratio = dark_only / signal;
        assert_relative_eq!(ratio, 1.0 / 361.0, max_relative = 1e-9);
        assert!(ratio < 1e-2 && ratio > 1e-3);
        // with cross terms: (20/19)² − 1
        assert_relative_eq!(both / signal - 1.0, 39.0 / 361.0, max_relative = 1e-9);
    }

    #[test]
    fn unequal_detectors_use_product() {
        let d = det(1e-9, 1.0);
        let c = spurious_from_detector_counts(&[1e4, 2e4, 3e4], &d).unwrap();
        assert_relative_eq!(c.delta_pcc(), 6e12 * 1e-18, max_relative = 1e-12);
        assert!(spurious_from_detector_counts(&[1.0], &d).is_err());
    }

    #[test]
    fn forward_examples() {
        assert_eq!(coincidence_shift_forward(M_REF, 0.3, 2, 0.0), 0.0);
        assert!(coincidence_shift_forward(M_REF, 0.3, 2, PI).abs() < 1e-6);
        let dp = coincidence_shift_forward(M_REF, PI / 4.0, 2, -1.41e-5);
        // linearization −(M/2)·N·sin(Nφ)·Δφ
        let linear = -(M_REF / 2.0) * 2.0 * (PI / 2.0).sin() * -1.41e-5;
        assert_relative_eq!(dp, linear, max_relative = 1e-4);
        assert_relative_eq!(dp, 101.0, max_relative = 0.02);
    }

    #[test]
    fn no_spurious_counts_no_shift() {
        for phi in [0.0, 0.3, PI / 4.0, PI / 2.0, 2.0] {
            let s = phase_shift_spurious(M_REF, phi, 2, count(0.0)).unwrap();
            assert_eq!(s.value(), Some(0.0), "phi = {phi}");
        }
    }

    #[test]
    fn optimal_bias_shift() {
        let s = phase_shift_spurious(M_REF, PI / 4.0, 2, count(DP_REF)).unwrap();
        let linear = -2.0 * DP_REF / (M_REF * 2.0 * 1.0);
        let v = s.value().unwrap();
        assert_relative_eq!(v, linear, max_relative = 1e-6);
        assert_relative_eq!(v, -1.41e-5, max_relative = 0.02);
        let back = coincidence_shift_forward(M_REF, PI / 4.0, 2, v);
        assert_relative_eq!(back, DP_REF, max_relative = 1e-9);
    }

    #[test]
    fn minimum_cusp_matches_closed_form() {
        let s = phase_shift_spurious(M_REF, PI / 2.0, 2, count(DP_REF)).unwrap();
        let cusp = phase_shift_cusp(M_REF, 2, count(DP_REF)).unwrap();
        assert_relative_eq!(s.abs().unwrap(), 3.75e-3, max_relative = 0.02);
        // the closed form is the leading term of the exact inversion
        assert_relative_eq!(s.abs().unwrap(), cusp, max_relative = 1e-4);
    }

    #[test]
    fn undefined_near_maximum() {
        let s = phase_shift_spurious(M_REF, 1e-4, 2, count(DP_REF)).unwrap();
        assert!(!s.is_defined());
        assert!(s.acos_argument() > 1.0);
        assert_eq!(s.value(), None);
        assert_eq!(s.branch(), None);
        assert!(phase_shift_spurious(0.0, 0.1, 2, count(1.0)).is_err());
    }

    #[test]
    fn cusp_examples() {
        assert_eq!(phase_shift_cusp(10.0, 2, count(0.0)).unwrap(), 0.0);
        assert_relative_eq!(
            phase_shift_cusp(M_REF, 2, count(DP_REF)).unwrap(),
            3.751e-3,
            max_relative = 1e-3
        );
    }

    #[test]
    fn sparse_source_check() {
        // 16000 singles per 20 ms, 100 ps jitter, 1956 as the N00N count
        let d = det(100e-12, 20e-3);
        let c = spurious_coincidences(16000.0, 2, &d, 0.0).unwrap();
        let v = phase_shift_cusp(1956.0, 2, c).unwrap();
        assert_relative_eq!(v, 0.0128, max_relative = 0.01);
        assert!(v < 0.0207);
    }

    #[test]
    fn cusp_condition_is_quarter_count() {
        // (2/N)√(ΔP/M) < 1/√(N·N·M) ⇔ ΔP < 1/4
        for &m in &[10.0, 1e4, 7.2e6] {
            for &(dp, below) in &[(0.2499, true), (0.2501, false)] {
                let peak = phase_shift_cusp(m, 2, count(dp)).unwrap();
                let shot = shot_noise(2, 2.0 * m).unwrap();
                assert_eq!(peak < shot, below, "M = {m}, ΔP = {dp}");
            }
        }
    }

    #[test]
    fn half_width_matches_acos_boundary() {
        let hw = undefined_half_width(M_REF, 2, count(DP_REF)).unwrap();
        let a = 2.0 * DP_REF / M_REF;
        assert_relative_eq!(hw, (1.0 - a).acos() / 2.0, max_relative = 1e-6);
        assert_relative_eq!(hw, 3.75e-3, max_relative = 0.01);
        // just inside and just outside the boundary
        assert!(!phase_shift_spurious(M_REF, hw * 0.999, 2, count(DP_REF)).unwrap().is_defined());
        assert!(phase_shift_spurious(M_REF, hw * 1.001, 2, count(DP_REF)).unwrap().is_defined());
        assert_eq!(undefined_half_width(1.0, 2, count(5.0)).unwrap(), PI / 2.0);
    }

    #[test]
    fn max_flux_zero_pairs() {
        assert_eq!(max_singles_flux(0.0, 2, &det(156e-12, 1800.0), 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn max_flux_back_substitution() {
        let d = det(156e-12, 1800.0);
        let f = max_singles_flux(4e3, 2, &d, 0.0, 1.0).unwrap();
        assert!(f.is_finite() && f > 0.0);
        let pairs = 4e3 * 1800.0;
        let c = spurious_from_rate(f, 2, &d, 0.0).unwrap();
        let s = phase_shift_spurious(pairs, PI / 4.0, 2, c).unwrap();
        let shot = shot_noise(2, 2.0 * pairs).unwrap();
        assert_relative_eq!(s.abs().unwrap(), shot, max_relative = 1e-6);

        // shorter jitter tolerates more flux
        let f_fast = max_singles_flux(4e3, 2, &det(50e-12, 1800.0), 0.0, 1.0).unwrap();
        assert!(f_fast > f);
        // dark counts eat into the budget
        let f_dark = max_singles_flux(4e3, 2, &d, 1e3, 1.0).unwrap();
        assert_relative_eq!(f_dark, f - 2.0 * 1e3, max_relative = 1e-9);
    }

    #[test]
    fn zone_scan_without_spurious_counts() {
        let shot = shot_noise(2, 2.0 * M_REF).unwrap();
        let r = bias_zone_scan(M_REF, 2, count(0.0), shot, ScanConfig::new(0.0, PI)).unwrap();
        assert!(r.undefined_intervals.is_empty());
        assert!(r.above_shot_noise_intervals.is_empty());
        assert_eq!(r.safe_windows, vec![Interval { lo: 0.0, hi: PI }]);
        assert_eq!(r.cusps.len(), 3);
    }

    #[test]
    fn zone_scan_rejects_bad_settings() {
        let shot = 1e-4;
        assert!(bias_zone_scan(1e6, 2, count(1.0), shot, ScanConfig::new(1.0, 0.0)).is_err());
        assert!(bias_zone_scan(1e6, 2, count(1.0), shot, ScanConfig::new(0.0, 1.0).with_resolution(10)).is_err());
        assert!(bias_zone_scan(1e6, 2, count(1.0), 0.0, ScanConfig::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn zone_scan_reference_layout() {
        let shot = shot_noise(2, 2.0 * M_REF).unwrap();
        let r = bias_zone_scan(M_REF, 2, count(DP_REF), shot, ScanConfig::new(-0.1, PI + 0.1)).unwrap();
        assert_eq!(r.cusp_locations().len(), 3);
        assert_eq!(r.undefined_intervals.len(), 2);
        assert_eq!(r.above_shot_noise_intervals.len(), 3);
        assert_eq!(r.safe_windows.len(), 4);
        for c in &r.shot_noise_crossings {
            assert!(c.residual_rad < 1e-9, "{c:?}");
        }
        for p in &r.optimal_bias_points {
            assert!(r.safe_windows.iter().any(|w| w.contains(*p)), "{p}");
        }
        // every undefined interval sits inside an above-shot-noise interval
        for u in &r.undefined_intervals {
            assert!(r.above_shot_noise_intervals.iter().any(|a| a.lo <= u.lo && u.hi <= a.hi));
        }
        let off_min = r.mean_crossing_offset(CuspKind::Minimum).unwrap();
        let off_max = r.mean_crossing_offset(CuspKind::Maximum).unwrap();
        // first-order estimate a/(N²·Δφ_QM) ≈ 38 mrad
        let a = 2.0 * DP_REF / M_REF;
        assert_relative_eq!(off_min, a / (4.0 * shot), max_relative = 0.01);
        assert_relative_eq!(off_max, a / (4.0 * shot), max_relative = 0.01);
    }

    #[test]
    fn tenth_threshold_shrinks_safe_windows() {
        let shot = shot_noise(2, 2.0 * M_REF).unwrap();
        let base = ScanConfig::new(0.0, PI);
        let wide = bias_zone_scan(M_REF, 2, count(DP_REF), shot, base).unwrap();
        let narrow = bias_zone_scan(
            M_REF, 2, count(DP_REF), shot,
            base.with_threshold(ZoneThreshold::TenthShotNoise),
        )
        .unwrap();
        let total = |v: &[Interval]| v.iter().map(Interval::width).sum::<f64>();
        assert!(total(&narrow.safe_windows) < total(&wide.safe_windows));
        // |Δφ_P| ≈ a/(N sin Nφ) dips below a tenth of the shot noise only near π/4 and 3π/4
        assert_eq!(narrow.safe_windows.len(), 2);
        for p in &narrow.optimal_bias_points {
            assert!(narrow.safe_windows.iter().any(|w| w.contains(*p)));
        }
        let a = 2.0 * DP_REF / M_REF;
        let edge = (a / (2.0 * 0.1 * shot)).asin() / 2.0;
        assert_relative_eq!(narrow.safe_windows[0].lo, edge, max_relative = 1e-3);
    }

    proptest! {
        #[test]
        fn round_trip(
            phi in -10.0f64..10.0,
            log_m in 2.0f64..9.0,
            log_ratio in -9.0f64..-1.0,
            order in 2u32..7,
        ) {
            let m = 10f64.powf(log_m);
            let dp = m * 10f64.powf(log_ratio);
            let s = phase_shift_spurious(m, phi, order, count(dp)).unwrap();
            if let Some(v) = s.value() {
                let back = coincidence_shift_forward(m, phi, order, v);
                prop_assert!(((back - dp) / dp).abs() < 1e-9, "back {back} vs {dp}");
            }
        }

        #[test]
        fn n_scaling(x in 0.05f64..3.0, log_ratio in -8.0f64..-2.0) {
            let m = 1e6;
            let dp = m * 10f64.powf(log_ratio);
            let solutions: Vec<_> = [2u32, 3, 4, 6].iter().map(|&n| {
                (n, phase_shift_spurious(m, x / n as f64, n, count(dp)).unwrap())
            }).collect();
            prop_assume!(solutions.iter().all(|(_, s)| s.is_defined()));
            let scaled: Vec<f64> = solutions.iter().map(|(n, s)| s.abs().unwrap() * *n as f64).collect();
            for v in &scaled {
                prop_assert!(((v - scaled[0]) / scaled[0]).abs() < 1e-3);
            }
        }

        #[test]
        fn sign_constant_between_cusps(frac in 0.01f64..0.99, k in -3i64..3, order in 2u32..5) {
            let m = 7.2e6;
            let c = count(101.3);
            let step = PI / order as f64;
            let phi = (k as f64 + frac) * step;
            if let Some(v) = phase_shift_spurious(m, phi, order, c).unwrap().value() {
                // negative while cos(Nφ) falls, positive while it rises
                let falling = k.rem_euclid(2) == 0;
                prop_assert_eq!(v < 0.0, falling);
            }
        }

        #[test]
        fn half_width_tracks_cusp_value(log_m in 3.0f64..9.0, log_ratio in -9.0f64..-3.0, order in 2u32..7) {
            let m = 10f64.powf(log_m);
            let c = count(m * 10f64.powf(log_ratio));
            let hw = undefined_half_width(m, order, c).unwrap();
            let cusp = phase_shift_cusp(m, order, c).unwrap();
            prop_assert!(((hw - cusp) / cusp).abs() < 0.01);
        }
    }
}
