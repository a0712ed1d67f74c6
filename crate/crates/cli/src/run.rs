//! One simulation of a spec plus the derived echo diagnostics.

use std::f64::consts::PI;
use std::fmt::Write as _;

use echoform::theory::EmissiveWindowParams;
use echoform::{
    analyze_echoes, build_grids, build_timeline, emissive_window, fit_sin_power, simulate_ensemble,
    EchoReadout, EchoReport, EnsembleResult, ExperimentSpec, FitResult, PulseProfile,
    PulseTimeline, SpatialProfile, US,
};

use crate::Result;

/// Groups whose rephasing area lies this close (in π units) to a window
/// edge are left out of window-consistency checks.
pub const WINDOW_MARGIN_PI: f64 = 0.05;

/// Groups with a final-echo coherence below this fraction of the largest
/// are treated as numerically zero.
pub const NEGLIGIBLE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: ExperimentSpec,
    pub timeline: PulseTimeline,
    pub spatial: SpatialProfile,
    pub result: EnsembleResult,
    /// `None` when the pulse count has no echo bookkeeping.
    pub report: Option<EchoReport>,
}

pub fn execute(spec: &ExperimentSpec, readout: EchoReadout) -> Result<RunOutput> {
    let timeline = build_timeline(spec)?;
    let (spatial, spectral) = build_grids(spec)?;
    let result = simulate_ensemble(&timeline, &spatial, &spectral)?;
    let report = match timeline.events.len() {
        2 | 3 => Some(analyze_echoes(&result, &timeline, readout, None)?),
        _ => None,
    };
    Ok(RunOutput {
        spec: spec.clone(),
        timeline,
        spatial,
        result,
        report,
    })
}

impl RunOutput {
    pub fn n_groups(&self) -> usize {
        self.spatial.amplitudes.len()
    }

    /// Per-group `Im ρ12` at the data time.
    pub fn data_profile(&self) -> Option<Vec<f64>> {
        let report = self.report.as_ref()?;
        let idx = self.result.sample_index(report.data_time).ok()?;
        Some(self.result.groups_at(idx))
    }

    /// Rephasing area (radians) seen by group `j` through the last pulse.
    pub fn rephasing_area(&self, j: usize) -> f64 {
        let last = self.timeline.events.last().expect("run has pulses");
        last.segment_for(self.spatial.amplitudes[j]).area()
    }

    /// `sin^k` fit of the two-pulse echo profile against `G_j`.
    pub fn profile_fit(&self) -> Option<FitResult> {
        let report = self.report.as_ref()?;
        if report.echo_times.len() != 1 {
            return None;
        }
        fit_sin_power(&self.spatial.amplitudes, &report.per_group_echo[0], 1.0).ok()
    }

    /// Agreement between the emissive mask of the final echo and the
    /// window laws applied per group. Only meaningful when both rephasing
    /// pulses carry the same area.
    pub fn window_consistency(&self) -> Option<WindowConsistency> {
        let report = self.report.as_ref()?;
        if self.timeline.events.len() != 3 {
            return None;
        }
        let (r1, r2) = (&self.timeline.events[1], &self.timeline.events[2]);
        if r1.segment != r2.segment || r1.profile != r2.profile {
            return None;
        }
        let echo = report.per_group_echo.last()?;
        let floor = NEGLIGIBLE_FRACTION * echo.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut out = WindowConsistency::default();
        for (j, &v) in echo.iter().enumerate() {
            let phi = self.rephasing_area(j);
            if near_window_edge(phi / PI) || v.abs() <= floor {
                out.excluded += 1;
                continue;
            }
            if emissive_window(phi, EmissiveWindowParams::default()) == (v > 0.0) {
                out.agree += 1;
            } else {
                out.disagree.push(j);
            }
        }
        Some(out)
    }

    /// Plain-text digest of the run.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "spatial groups: {} ({})",
            self.n_groups(),
            self.spatial.mode
        );
        for e in &self.timeline.events {
            let _ = writeln!(
                s,
                "pulse {}: t = {:.3} us, area = {:.4} pi, profile = {}",
                e.name,
                e.start / US,
                e.segment.area() / PI,
                match e.profile {
                    PulseProfile::Gaussian => "gaussian",
                    PulseProfile::Uniform => "uniform",
                }
            );
        }
        let Some(report) = &self.report else {
            let _ = writeln!(
                s,
                "no echo analysis for {} pulses",
                self.timeline.events.len()
            );
            return s;
        };
        let _ = writeln!(
            s,
            "data amplitude: {:.6} at {:.3} us",
            report.data_amplitude,
            report.data_time / US
        );
        for (i, (t, a)) in report.echo_times.iter().zip(&report.amplitudes).enumerate() {
            let _ = writeln!(s, "echo E{}: {:.6} at {:.3} us", i + 1, a, t / US);
        }
        if report.echo_times.len() == 2 {
            let _ = writeln!(s, "E2_eff: {:.6}", report.e2_eff);
        }
        let _ = writeln!(
            s,
            "eta: {:.6} ({:?} scope)",
            report.efficiency, report.scope
        );
        match self.profile_fit() {
            Some(fit) => {
                let _ = writeln!(
                    s,
                    "fitted exponent: {:.2} (rms {:.4})",
                    fit.exponent, fit.rms_residual
                );
            }
            None => {
                let _ = writeln!(s, "fitted exponent: n/a");
            }
        }
        match self.window_consistency() {
            Some(w) => {
                let _ = writeln!(s, "window consistency: {}", w.verdict());
            }
            None => {
                let _ = writeln!(s, "window consistency: n/a");
            }
        }
        s
    }
}

/// Whether `x` (an area in π units) sits within the margin of any window
/// boundary `2n`, `2n + α` or `2(n + 1) − α`.
pub fn near_window_edge(x: f64) -> bool {
    let alpha = EmissiveWindowParams::default().alpha;
    let r = x.rem_euclid(2.0);
    [0.0, alpha, 2.0 - alpha, 2.0]
        .iter()
        .any(|b| (r - b).abs() < WINDOW_MARGIN_PI)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowConsistency {
    pub agree: usize,
    pub excluded: usize,
    /// Groups whose sign contradicts the window law.
    pub disagree: Vec<usize>,
}

impl WindowConsistency {
    pub fn consistent(&self) -> bool {
        self.disagree.is_empty()
    }

    pub fn verdict(&self) -> String {
        if self.consistent() {
            format!(
                "consistent ({} groups agree, {} excluded)",
                self.agree, self.excluded
            )
        } else {
            format!(
                "inconsistent ({} agree, {} disagree: {:?}, {} excluded)",
                self.agree,
                self.disagree.len(),
                self.disagree,
                self.excluded
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_edges() {
        assert!(near_window_edge(0.62));
        assert!(near_window_edge(1.4));
        assert!(near_window_edge(1.98));
        assert!(near_window_edge(2.01));
        assert!(!near_window_edge(1.0));
        assert!(!near_window_edge(0.3));
    }
}
