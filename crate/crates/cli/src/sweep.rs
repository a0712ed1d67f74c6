//! Rephasing-area sweeps and the per-group rendering of a linear ramp.
//!
//! Amplitudes in sweep rows are per-group means of `Im ρ12` (the summed
//! coherence divided by the number of spatial groups), which puts them on
//! the same scale as the single-group laws they are compared with.

use std::f64::consts::PI;

use rayon::prelude::*;

use echoform::theory::sampled_zero_crossings;
use echoform::{emissive_window, predict_e1, predict_e2, EchoReadout, ExperimentSpec, ProfileMode};

use crate::run::{execute, near_window_edge, RunOutput};
use crate::{CliError, Result};

/// Parameter swept when a spec carries no `[sweep]` section.
pub const DEFAULT_PARAMETER: &str = "R.area";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub phi_r_over_pi: f64,
    pub e1_sim: f64,
    pub e2_sim: f64,
    pub e2_eff: f64,
    pub eta: f64,
    pub e1_eq3: f64,
    pub e2_eq4: f64,
}

impl SweepRow {
    fn new(phi_r_over_pi: f64, e1: f64, e2: f64, e2_eff: f64, eta: f64) -> Self {
        SweepRow {
            phi_r_over_pi,
            e1_sim: e1,
            e2_sim: e2,
            e2_eff,
            eta,
            e1_eq3: predict_e1(phi_r_over_pi * PI),
            e2_eq4: predict_e2(phi_r_over_pi * PI),
        }
    }
}

/// Areas `from, from + step, …` up to `to` inclusive. A step longer than
/// the range yields just `from`.
pub fn sweep_areas(from_pi: f64, to_pi: f64, step_pi: f64) -> Result<Vec<f64>> {
    if ![from_pi, to_pi, step_pi].iter().all(|v| v.is_finite()) {
        return Err(CliError::Usage("sweep bounds must be finite".into()));
    }
    if step_pi <= 0.0 {
        return Err(CliError::Usage(format!(
            "sweep step must be positive, got {step_pi}"
        )));
    }
    if to_pi < from_pi {
        return Err(CliError::Usage(format!(
            "empty sweep range: from {from_pi} exceeds to {to_pi}"
        )));
    }
    if from_pi < 0.0 {
        return Err(CliError::Usage(format!(
            "sweep areas must be non-negative, got {from_pi}"
        )));
    }
    let n = ((to_pi - from_pi) / step_pi + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| from_pi + i as f64 * step_pi).collect())
}

/// Runs the spec once per rephasing peak area. Rows are independent and
/// come back in ascending area order.
pub fn sweep_rephasing_area(
    spec: &ExperimentSpec,
    from_pi: f64,
    to_pi: f64,
    step_pi: f64,
) -> Result<Vec<SweepRow>> {
    let parameter = spec
        .sweep
        .as_ref()
        .map_or(DEFAULT_PARAMETER, |s| s.parameter.as_str());
    let targets = spec.swept_pulses(parameter).ok_or_else(|| {
        CliError::Usage(format!("sweep parameter `{parameter}` matches no pulse"))
    })?;
    let areas = sweep_areas(from_pi, to_pi, step_pi)?;
    areas
        .par_iter()
        .map(|&a| {
            let run = execute(&spec.with_pulse_area(&targets, a), EchoReadout::Analytic)?;
            Ok(run_row(&run, a))
        })
        .collect()
}

/// Summarizes one run as a sweep row at peak area `area_pi`.
pub fn run_row(run: &RunOutput, area_pi: f64) -> SweepRow {
    let n = run.n_groups() as f64;
    match &run.report {
        Some(r) if r.amplitudes.len() == 2 => SweepRow::new(
            area_pi,
            r.amplitudes[0] / n,
            r.amplitudes[1] / n,
            r.e2_eff / n,
            r.efficiency,
        ),
        Some(r) => SweepRow::new(
            area_pi,
            r.amplitudes[0] / n,
            f64::NAN,
            f64::NAN,
            r.efficiency,
        ),
        None => SweepRow::new(area_pi, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
    }
}

/// Reads a linear-ramp run as a dense sweep: one row per group, keyed by
/// the rephasing area that group saw. `None` unless the run is a linear
/// ramp with two rephasing pulses.
pub fn ramp_rows(run: &RunOutput) -> Option<Vec<SweepRow>> {
    if run.spatial.mode != ProfileMode::Linear || run.timeline.events.len() != 3 {
        return None;
    }
    let report = run.report.as_ref()?;
    let data = run.data_profile()?;
    Some(
        (0..run.n_groups())
            .map(|j| {
                let e1 = report.per_group_echo[0][j];
                let e2 = report.per_group_echo[1][j];
                let e2_eff = if e2 > 0.0 { e2 } else { 0.0 };
                let eta = if data[j] != 0.0 {
                    e2_eff.abs() / data[j].abs()
                } else {
                    f64::NAN
                };
                SweepRow::new(run.rephasing_area(j) / PI, e1, e2, e2_eff, eta)
            })
            .collect(),
    )
}

/// Comparison of a dense ramp sweep against the closed-form laws.
#[derive(Debug, Clone, PartialEq)]
pub struct RampAnalysis {
    pub e1_rms: f64,
    /// Factor bringing simulated E2 onto the E2 law at Φ_R = π.
    pub e2_scale: f64,
    pub e2_rms: f64,
    /// Sign changes of simulated E2, in π units.
    pub e2_crossings: Vec<f64>,
    /// Rows whose E2 sign contradicts the window law, away from edges.
    pub window_mismatches: Vec<f64>,
    pub window_checked: usize,
}

pub fn analyze_ramp(rows: &[SweepRow]) -> Option<RampAnalysis> {
    if rows.is_empty() {
        return None;
    }
    let rms = |it: &mut dyn Iterator<Item = f64>| {
        let (sum, n) = it.fold((0.0, 0usize), |(s, n), d| (s + d * d, n + 1));
        (sum / n as f64).sqrt()
    };
    let e1_rms = rms(&mut rows.iter().map(|r| r.e1_sim - r.e1_eq3));
    let at_pi = rows.iter().min_by(|a, b| {
        (a.phi_r_over_pi - 1.0)
            .abs()
            .total_cmp(&(b.phi_r_over_pi - 1.0).abs())
    })?;
    let e2_scale = at_pi.e2_eq4 / at_pi.e2_sim;
    let e2_rms = rms(&mut rows.iter().map(|r| e2_scale * r.e2_sim - r.e2_eq4));
    let xs: Vec<f64> = rows.iter().map(|r| r.phi_r_over_pi).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.e2_sim).collect();
    let e2_crossings = sampled_zero_crossings(&xs, &ys);
    let mut window_mismatches = Vec::new();
    let mut window_checked = 0;
    for r in rows {
        if near_window_edge(r.phi_r_over_pi) {
            continue;
        }
        window_checked += 1;
        let predicted = emissive_window(r.phi_r_over_pi * PI, Default::default());
        if predicted != (r.e2_sim > 0.0) {
            window_mismatches.push(r.phi_r_over_pi);
        }
    }
    Some(RampAnalysis {
        e1_rms,
        e2_scale,
        e2_rms,
        e2_crossings,
        window_mismatches,
        window_checked,
    })
}

/// Interior local maxima of `eta` as `(area, eta)` pairs; a trailing
/// endpoint above its neighbour counts too.
pub fn local_maxima(rows: &[SweepRow]) -> Vec<(f64, f64)> {
    let eta: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    (0..eta.len())
        .filter(|&i| {
            let left = i == 0 || eta[i] > eta[i - 1];
            let right = i + 1 == eta.len() || eta[i] > eta[i + 1];
            i > 0 && left && right
        })
        .map(|i| (rows[i].phi_r_over_pi, eta[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn areas_inclusive() {
        let a = sweep_areas(0.25, 2.0, 0.25).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(a[7], 2.0);
    }

    #[test]
    fn step_larger_than_range_gives_one_row() {
        assert_eq!(sweep_areas(0.5, 0.75, 1.0).unwrap(), vec![0.5]);
        assert_eq!(sweep_areas(0.5, 0.5, 0.1).unwrap(), vec![0.5]);
    }

    #[test]
    fn bad_ranges() {
        assert!(matches!(
            sweep_areas(1.0, 0.5, 0.1),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            sweep_areas(0.0, 1.0, 0.0),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            sweep_areas(0.0, f64::NAN, 0.1),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn maxima() {
        let rows: Vec<SweepRow> = [0.1, 0.3, 0.2, 0.25, 0.15, 0.18]
            .iter()
            .enumerate()
            .map(|(i, &eta)| SweepRow::new(i as f64, 0.0, 0.0, 0.0, eta))
            .collect();
        assert_eq!(
            local_maxima(&rows),
            vec![(1.0, 0.3), (3.0, 0.25), (5.0, 0.18)]
        );
    }
}
