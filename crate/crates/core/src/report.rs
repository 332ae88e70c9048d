//! Command implementations behind the `qfog` binary: noise budget, phase
//! sweep CSV, bias-zone tables, Monte Carlo and Ω_min reports.
//!
//! Every renderer returns a `String` built with fixed formatting so that
//! identical inputs always produce identical bytes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, Instrument};
use crate::dispersion::{coherence_breakdown, pump_drift_phase_error, CoherenceBreakdown, PumpDriftError};
use crate::model::{PhasePoint, EARTH_RATE_RAD_PER_S};
use crate::montecarlo::{simulate_experiment, simulate_uncorrelated, ExperimentResult, McConfig, McResult};
use crate::propagation::{fiber_transmission, noon_ratio, propagate_populations, singles_rate_from_ratio, PhotonPopulations};
use crate::sagnac::{omega_min, sagnac_phase, shot_noise};
use crate::spurious::{
    bias_zone_scan, max_singles_flux, phase_shift_cusp, phase_shift_spurious, spurious_coincidences,
    undefined_half_width, BiasZoneReport, CuspKind, Interval, PhaseShiftSolution, ScanConfig, SpuriousCount,
    ZoneThreshold, REPORTED_CROSSING_OFFSET_RAD, REPORTED_UNDEFINED_HALF_WIDTH_RAD,
};

/// Failure of a CLI command, classified for the process exit code.
#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("computation failed: {0}")]
    Compute(#[from] crate::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CommandError {
    /// 3 malformed config, 4 invalid config, 5 computation, 6 output.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(ConfigError::Read { .. } | ConfigError::Parse(_)) => 3,
            CommandError::Config(ConfigError::Validate(_)) => 4,
            CommandError::Compute(_) => 5,
            CommandError::Output { .. } => 6,
        }
    }
}

/// Every quantity of the noise budget for one instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct Budget {
    pub order: u32,
    pub transmission: f64,
    pub loss_db: f64,
    pub populations: PhotonPopulations,
    pub noon_ratio: f64,
    pub pair_rate_hz: f64,
    pub singles_rate_hz: f64,
    pub measurement_time_s: f64,
    pub pairs: f64,
    pub singles: f64,
    pub spurious: SpuriousCount,
    pub spurious_dark_free: SpuriousCount,
    pub sagnac_phase_rad: f64,
    pub total_phase_rad: f64,
    pub shot_noise_rad: f64,
    pub shift_at_bias: PhaseShiftSolution,
    pub shift_at_bias_coherent: PhaseShiftSolution,
    pub cusp_peak_rad: f64,
    pub undefined_half_width_rad: f64,
    pub omega_min_rad_per_s: f64,
    pub coherence: CoherenceBreakdown,
    pub pump_drift: PumpDriftError,
    pub max_singles_rate_hz: f64,
}

impl Budget {
    pub fn dark_contribution(&self) -> f64 {
        self.spurious.delta_pcc() - self.spurious_dark_free.delta_pcc()
    }
}

/// Assemble the noise budget.
pub fn compute_budget(inst: &Instrument) -> crate::Result<Budget> {
    let order = inst.source.noon_order();
    let n = order as f64;
    let det = &inst.detection;
    let t = det.measurement_time_s();
    let length = inst.geometry.fiber_length_m();

    let transmission = fiber_transmission(&inst.path, length)?;
    let populations = propagate_populations(
        PhotonPopulations::from_fraction(inst.source.initial_noon_fraction())?,
        transmission,
    )?;
    let ratio = noon_ratio(populations)?;
    let pair_rate = inst.source.pair_rate_hz();
    let singles_rate = singles_rate_from_ratio(pair_rate, ratio)?;
    let pairs = pair_rate * t;
    let singles = singles_rate * t;
    let dark = inst.source.dark_rate_hz();

    let spurious = spurious_coincidences(singles, order, det, dark)?;
    let spurious_dark_free = spurious_coincidences(singles, order, det, 0.0)?;
    let shot = shot_noise(order, n * pairs)?;

    let sagnac = sagnac_phase(inst.rotation, &inst.geometry);
    let total = PhasePoint::new(sagnac, inst.bias_phase_rad)?.total();
    let coherence = coherence_breakdown(
        inst.base_coherence,
        inst.reciprocal_delay_s,
        &inst.dispersion,
        length,
        &inst.spectrum,
    )?;

    Ok(Budget {
        order,
        transmission,
        loss_db: inst.path.total_loss_db(length),
        populations,
        noon_ratio: ratio,
        pair_rate_hz: pair_rate,
        singles_rate_hz: singles_rate,
        measurement_time_s: t,
        pairs,
        singles,
        spurious,
        spurious_dark_free,
        sagnac_phase_rad: sagnac,
        total_phase_rad: total,
        shot_noise_rad: shot,
        shift_at_bias: phase_shift_spurious(pairs, total, order, spurious)?,
        shift_at_bias_coherent: phase_shift_spurious(pairs * coherence.total(), total, order, spurious)?,
        cusp_peak_rad: phase_shift_cusp(pairs, order, spurious)?,
        undefined_half_width_rad: undefined_half_width(pairs, order, spurious)?,
        omega_min_rad_per_s: omega_min(&inst.geometry, order, n * pairs)?.rad_per_s(),
        coherence,
        pump_drift: pump_drift_phase_error(
            inst.pump.drift_nm_per_degc,
            inst.pump.stability_degc,
            &inst.spectrum,
            sagnac,
        )?,
        max_singles_rate_hz: max_singles_flux(pair_rate, order, det, dark, 1.0)?,
    })
}

fn shift_text(s: &PhaseShiftSolution) -> String {
    match s.value() {
        Some(v) => format!("{v:.6e} rad"),
        None => format!("undefined (acos argument {:.9})", s.acos_argument()),
    }
}

pub fn render_budget(b: &Budget) -> String {
    let mut out = String::new();
    let mut line = |label: &str, value: String| {
        let _ = writeln!(out, "{label:<34} {value}");
    };
    line("N00N order", b.order.to_string());
    line("total loss", format!("{:.4} dB", b.loss_db));
    line("transmission T", format!("{:.6}", b.transmission));
    line(
        "populations at detectors",
        format!(
            "pairs {:.6e}, singles {:.6e} (per unit source population)",
            b.populations.noon_pairs(),
            b.populations.singles()
        ),
    );
    line("N00N ratio R", format!("{:.6}", b.noon_ratio));
    line("N00N pair rate", format!("{:.6e} Hz", b.pair_rate_hz));
    line("uncorrelated singles rate", format!("{:.6e} Hz", b.singles_rate_hz));
    line("measurement time", format!("{:.6e} s", b.measurement_time_s));
    line("N00N pairs M_N00N", format!("{:.6e}", b.pairs));
    line("singles M_1", format!("{:.6e}", b.singles));
    line("spurious rate", format!("{:.6e} Hz", b.spurious.rate_hz()));
    line("spurious count dP_cc", format!("{:.6e}", b.spurious.delta_pcc()));
    line("dark-count contribution", format!("{:.6e}", b.dark_contribution()));
    line("Sagnac phase", format!("{:.6e} rad", b.sagnac_phase_rad));
    line("total phase (Sagnac + bias)", format!("{:.6e} rad", b.total_phase_rad));
    line("shot noise", format!("{:.6e} rad", b.shot_noise_rad));
    line("spurious shift at bias", shift_text(&b.shift_at_bias));
    line("  with coherence factor", shift_text(&b.shift_at_bias_coherent));
    let verdict = match b.shift_at_bias.abs() {
        Some(v) if v < b.shot_noise_rad => "yes",
        Some(_) => "no",
        None => "undefined",
    };
    line("  below shot noise", verdict.to_string());
    line("cusp peak shift", format!("{:.6e} rad", b.cusp_peak_rad));
    line(
        "undefined half-width",
        format!(
            "{:.6e} rad (reference figure {:.1e} rad)",
            b.undefined_half_width_rad, REPORTED_UNDEFINED_HALF_WIDTH_RAD
        ),
    );
    line("omega_min", format!("{:.6e} rad/s", b.omega_min_rad_per_s));
    let c = &b.coherence;
    line("coherence time", format!("{:.6e} s", c.coherence_time_s));
    line("coherence base", format!("{:.6}", c.base));
    line("coherence reciprocal", format!("{:.9}", c.reciprocal));
    line(
        "coherence chromatic",
        format!("{:.9} (delay {:.6e} s)", c.chromatic, c.chromatic_delay_s),
    );
    line("coherence PMD", format!("{:.9} (delay {:.6e} s)", c.pmd, c.pmd_delay_s));
    line("coherence total", format!("{:.9}", c.total()));
    line(
        "pump drift phase error",
        format!(
            "relative {:.6e}, absolute {:.6e} rad",
            b.pump_drift.relative, b.pump_drift.absolute_rad
        ),
    );
    line("max singles rate (optimal bias)", format!("{:.6e} Hz", b.max_singles_rate_hz));
    out
}

/// One row of the phase sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub phase_total_rad: f64,
    pub abs_dphi_p_rad: Option<f64>,
    pub shot_noise_rad: f64,
    pub shot_noise_tenth_rad: f64,
    pub dphi_p0_rad: f64,
}

impl SweepRow {
    pub fn defined(&self) -> bool {
        self.abs_dphi_p_rad.is_some()
    }
}

pub const SWEEP_HEADER: &str =
    "phase_total_rad,abs_dphi_p_rad,defined_flag,shot_noise_rad,shot_noise_tenth_rad,dphi_p0_rad";

/// |Δφ_P| and reference curves at `points` evenly spaced total phases.
pub fn phase_sweep(
    pairs: f64,
    order: u32,
    count: SpuriousCount,
    shot_noise_rad: f64,
    from: f64,
    to: f64,
    points: usize,
) -> crate::Result<Vec<SweepRow>> {
    if points < 2 {
        return Err(crate::error::invalid("points", format!("need at least 2, got {points}")));
    }
    if !(from.is_finite() && to.is_finite() && from < to) {
        return Err(crate::error::invalid("range", format!("need from < to, got [{from}, {to}]")));
    }
    let peak = phase_shift_cusp(pairs, order, count)?;
    (0..points)
        .into_par_iter()
        .map(|i| {
            let phase = if i + 1 == points {
                to
            } else {
                from + (to - from) * i as f64 / (points - 1) as f64
            };
            let s = phase_shift_spurious(pairs, phase, order, count)?;
            Ok(SweepRow {
                phase_total_rad: phase,
                abs_dphi_p_rad: s.abs(),
                shot_noise_rad,
                shot_noise_tenth_rad: 0.1 * shot_noise_rad,
                dphi_p0_rad: peak,
            })
        })
        .collect()
}

fn sci(v: f64) -> String {
    format!("{v:.8e}")
}

/// CSV text: header plus one line per row, 9 significant digits.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            sci(r.phase_total_rad),
            r.abs_dphi_p_rad.map(sci).unwrap_or_default(),
            u8::from(r.defined()),
            sci(r.shot_noise_rad),
            sci(r.shot_noise_tenth_rad),
            sci(r.dphi_p0_rad),
        );
    }
    out
}

pub fn cmd_budget(inst: &Instrument) -> Result<String, CommandError> {
    Ok(render_budget(&compute_budget(inst)?))
}

pub fn cmd_sweep(inst: &Instrument, from: f64, to: f64, points: usize, out: &Path) -> Result<usize, CommandError> {
    let b = compute_budget(inst)?;
    let rows = phase_sweep(b.pairs, b.order, b.spurious, b.shot_noise_rad, from, to, points)?;
    let text = sweep_csv(&rows);
    std::fs::File::create(out)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|source| CommandError::Output {
            path: out.to_path_buf(),
            source,
        })?;
    Ok(rows.len())
}

pub fn compute_zones(inst: &Instrument, threshold: ZoneThreshold, from: f64, to: f64) -> crate::Result<BiasZoneReport> {
    let b = compute_budget(inst)?;
    bias_zone_scan(
        b.pairs,
        b.order,
        b.spurious,
        b.shot_noise_rad,
        ScanConfig::new(from, to).with_threshold(threshold),
    )
}

fn intervals_text(out: &mut String, title: &str, ivs: &[Interval]) {
    let _ = writeln!(out, "{title} ({}):", ivs.len());
    for iv in ivs {
        let _ = writeln!(
            out,
            "  [{:+.9}, {:+.9}]  width {:.6e}",
            iv.lo,
            iv.hi,
            iv.width()
        );
    }
}

pub fn render_zones(r: &BiasZoneReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "range                 [{:+.9}, {:+.9}] rad", r.range.lo, r.range.hi);
    let _ = writeln!(out, "shot noise            {:.6e} rad", r.shot_noise_rad);
    let _ = writeln!(out, "safe threshold        {:.6e} rad", r.threshold_rad);
    let _ = writeln!(out, "cusp peak shift       {:.6e} rad", r.cusp_peak_rad);
    let _ = writeln!(
        out,
        "undefined half-width  {:.6e} rad (reference figure {:.1e} rad)",
        r.undefined_half_width_rad, REPORTED_UNDEFINED_HALF_WIDTH_RAD
    );
    for (kind, name) in [(CuspKind::Minimum, "minimum"), (CuspKind::Maximum, "maximum")] {
        match r.mean_crossing_offset(kind) {
            Some(off) => {
                let _ = writeln!(
                    out,
                    "shot-noise crossing offset from {name} cusps  {off:.6e} rad (reference figure {:.1e} rad)",
                    REPORTED_CROSSING_OFFSET_RAD
                );
            }
            None => {
                let _ = writeln!(out, "shot-noise crossing offset from {name} cusps  none");
            }
        }
    }
    let _ = writeln!(out, "cusps ({}):", r.cusps.len());
    for c in &r.cusps {
        let kind = match c.kind {
            CuspKind::Maximum => "maximum",
            CuspKind::Minimum => "minimum",
        };
        let _ = writeln!(out, "  {:+.9}  {kind}", c.phase_rad);
    }
    intervals_text(&mut out, "undefined intervals", &r.undefined_intervals);
    intervals_text(&mut out, "above shot noise", &r.above_shot_noise_intervals);
    let _ = writeln!(out, "shot-noise crossings ({}):", r.shot_noise_crossings.len());
    for c in &r.shot_noise_crossings {
        let _ = writeln!(
            out,
            "  {:+.9}  offset {:+.6e}  residual {:.3e}",
            c.phase_rad, c.offset_from_cusp_rad, c.residual_rad
        );
    }
    intervals_text(&mut out, "safe windows", &r.safe_windows);
    let _ = writeln!(out, "optimal bias points ({}):", r.optimal_bias_points.len());
    for p in &r.optimal_bias_points {
        let _ = writeln!(out, "  {p:+.9}");
    }
    out
}

pub fn cmd_zones(inst: &Instrument, threshold: ZoneThreshold, from: f64, to: f64) -> Result<String, CommandError> {
    Ok(render_zones(&compute_zones(inst, threshold, from, to)?))
}

/// Default zones range: one full period of the N=2 fringe.
pub const DEFAULT_ZONE_RANGE: (f64, f64) = (0.0, PI);

/// Outcome of the Monte Carlo command.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub measurement_time_s: f64,
    pub rates_hz: Vec<f64>,
    pub seed: u64,
    pub uncorrelated: McResult,
    pub experiment: ExperimentResult,
}

pub fn compute_mc(inst: &Instrument, trials: usize, seed: u64, scale: f64) -> crate::Result<McReport> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(crate::error::invalid("scale", format!("must lie in (0, 1], got {scale}")));
    }
    let b = compute_budget(inst)?;
    let t = inst.detection.measurement_time_s() * scale;
    let det = inst.detection.with_measurement_time(t)?;
    let order = b.order;
    let per_detector = b.singles_rate_hz / order as f64 + inst.source.dark_rate_hz();
    let rates = vec![per_detector; order as usize];
    let mc = McConfig::new(seed, trials, det.window_mode())?;
    let uncorrelated = simulate_uncorrelated(&rates, &det, &mc)?;
    let spurious = spurious_coincidences(b.singles_rate_hz * t, order, &det, inst.source.dark_rate_hz())?;
    let phase = PhasePoint::from_total(b.total_phase_rad)?;
    let experiment = simulate_experiment(b.pair_rate_hz * t, phase, order, b.coherence.total(), spurious, &mc)?;
    Ok(McReport {
        measurement_time_s: t,
        rates_hz: rates,
        seed,
        uncorrelated,
        experiment,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "n/a".into())
}

pub fn render_mc(r: &McReport) -> String {
    let mut out = String::new();
    let u = &r.uncorrelated;
    let e = &r.experiment;
    let rates: Vec<String> = r.rates_hz.iter().map(|x| format!("{x:.6e}")).collect();
    let _ = writeln!(out, "seed                  {}", r.seed);
    let _ = writeln!(out, "trials                {}", u.counts.len());
    let _ = writeln!(out, "measurement time      {:.6e} s", r.measurement_time_s);
    let _ = writeln!(out, "detector rates        [{}] Hz", rates.join(", "));
    let _ = writeln!(out, "window mode           {}", u.window_mode);
    let _ = writeln!(out, "accidentals:");
    let _ = writeln!(out, "  mean                {:.6e}", u.mean);
    let _ = writeln!(out, "  sigma               {:.6e}", u.variance.sqrt());
    let _ = writeln!(out, "  standard error      {:.6e}", u.standard_error());
    let _ = writeln!(out, "  analytic prediction {:.6e}", u.analytic_prediction);
    let _ = writeln!(out, "  z-score             {}", opt(u.z_score));
    let _ = writeln!(out, "phase estimates:");
    let _ = writeln!(out, "  mean bias           {:.6e} rad", e.mean_bias);
    let _ = writeln!(out, "  predicted bias      {}", opt(e.predicted_bias));
    let _ = writeln!(out, "  bias z-score        {}", opt(e.bias_z_score));
    let _ = writeln!(out, "  spread              {:.6e} rad", e.spread);
    let _ = writeln!(out, "  shot noise          {:.6e} rad", e.predicted_spread);
    let _ = writeln!(
        out,
        "  inversion failures  {} of {} ({:.4})",
        e.failures,
        e.errors.len(),
        e.failure_fraction()
    );
    out
}

pub fn cmd_mc(inst: &Instrument, trials: usize, seed: u64, scale: f64) -> Result<String, CommandError> {
    Ok(render_mc(&compute_mc(inst, trials, seed, scale)?))
}

/// Ω_min with M = N · pairs collected over the measurement time.
pub fn cmd_omega_min(inst: &Instrument) -> Result<String, CommandError> {
    let order = inst.source.noon_order();
    let photons = order as f64 * inst.source.pair_rate_hz() * inst.detection.measurement_time_s();
    let w = omega_min(&inst.geometry, order, photons)?.rad_per_s();
    let mut out = String::new();
    let _ = writeln!(out, "N00N order            {order}");
    let _ = writeln!(out, "photons M             {photons:.6e}");
    let _ = writeln!(out, "shot noise            {:.6e} rad", shot_noise(order, photons)?);
    let _ = writeln!(out, "omega_min             {w:.6e} rad/s");
    let _ = writeln!(out, "earth rate            {EARTH_RATE_RAD_PER_S:.6e} rad/s");
    let _ = writeln!(
        out,
        "below earth rate      {}",
        if w < EARTH_RATE_RAD_PER_S { "yes" } else { "no" }
    );
    Ok(out)
}
