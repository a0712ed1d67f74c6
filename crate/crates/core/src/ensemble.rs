//! Ensemble propagation over the spatial × spectral grid and echo readout.

use ndarray::Array2;
use rayon::prelude::*;

use crate::dynamics::{propagate_unchecked, AtomParams, DriveSegment, TwoLevelState};
use crate::error::{invalid, Error, Result};
use crate::grid::{SpatialProfile, SpectralGrid};
use crate::sequence::{echo_times, PulseTimeline, US};

/// Piecewise-constant drive for one spatial group, covering `[0, ∞)`.
struct Piece {
    end: f64,
    rabi: f64,
    phase: f64,
}

fn pieces(timeline: &PulseTimeline, g: f64) -> Vec<Piece> {
    let mut out = Vec::with_capacity(2 * timeline.events.len() + 1);
    let mut cursor = 0.0;
    for e in &timeline.events {
        if e.start > cursor {
            out.push(Piece {
                end: e.start,
                rabi: 0.0,
                phase: 0.0,
            });
        }
        let seg = e.segment_for(g);
        out.push(Piece {
            end: e.end(),
            rabi: seg.rabi_frequency,
            phase: seg.phase,
        });
        cursor = e.end();
    }
    out.push(Piece {
        end: f64::INFINITY,
        rabi: 0.0,
        phase: 0.0,
    });
    out
}

/// Time series of one atom (one detuning within one spatial group), sampled
/// every `timeline.sample_dt` from the ground state at `t = 0`.
///
/// Profiled pulses have their Rabi frequency multiplied by
/// `spatial_amplitude`; the detuning stays active during pulses.
pub fn simulate_group(
    timeline: &PulseTimeline,
    spatial_amplitude: f64,
    atom: AtomParams,
) -> Result<Vec<TwoLevelState>> {
    if !(spatial_amplitude > 0.0 && spatial_amplitude <= 1.0) {
        return Err(invalid(format!(
            "spatial amplitude must lie in (0, 1], got {spatial_amplitude}"
        )));
    }
    if !(atom.detuning.is_finite() && atom.gamma2 >= 0.0 && atom.gamma2.is_finite()) {
        return Err(invalid(format!("invalid atom parameters {atom:?}")));
    }
    Ok(trace(timeline, &pieces(timeline, spatial_amplitude), &atom))
}

fn trace(timeline: &PulseTimeline, pieces: &[Piece], atom: &AtomParams) -> Vec<TwoLevelState> {
    let n = timeline.n_samples();
    let mut out = Vec::with_capacity(n);
    let mut state = TwoLevelState::GROUND;
    let mut t = 0.0;
    let mut idx = 0;
    for i in 0..n {
        let target = i as f64 * timeline.sample_dt;
        while t < target {
            while pieces[idx].end <= t {
                idx += 1;
            }
            let p = &pieces[idx];
            let stop = p.end.min(target);
            let seg = DriveSegment {
                duration: stop - t,
                rabi_frequency: p.rabi,
                phase: p.phase,
            };
            state = propagate_unchecked(state, &seg, atom);
            t = stop;
        }
        out.push(state);
    }
    out
}

/// Spectrally weighted coherences per spatial group plus their totals.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    /// Shape `(n_spatial, n_samples)`.
    pub per_group_im_rho12: Array2<f64>,
    pub per_group_re_rho12: Array2<f64>,
    pub total_im_rho12: Vec<f64>,
    pub total_re_rho12: Vec<f64>,
    pub sample_dt: f64,
}

impl EnsembleResult {
    pub fn n_groups(&self) -> usize {
        self.per_group_im_rho12.nrows()
    }

    pub fn sample_index(&self, t: f64) -> Result<usize> {
        let last = self.times.len().saturating_sub(1);
        let idx = (t / self.sample_dt).round();
        if !(t.is_finite() && idx >= 0.0 && idx <= last as f64) {
            return Err(Error::OutOfRange {
                t_us: t / US,
                end_us: self.times.get(last).copied().unwrap_or(0.0) / US,
            });
        }
        Ok(idx as usize)
    }

    /// Per-group `Im ρ12` at sample `idx`.
    pub fn groups_at(&self, idx: usize) -> Vec<f64> {
        self.per_group_im_rho12.column(idx).to_vec()
    }
}

/// Runs every (spatial, spectral) trajectory.
///
/// Groups are distributed over the current rayon pool, but each group sums
/// its detunings in index order and the totals add groups in index order,
/// so the result is bit-identical for any worker count.
pub fn simulate_ensemble(
    timeline: &PulseTimeline,
    spatial: &SpatialProfile,
    spectral: &SpectralGrid,
) -> Result<EnsembleResult> {
    if spatial.is_empty() || spectral.is_empty() {
        return Err(invalid("empty spatial or spectral grid"));
    }
    if spectral.detunings.len() != spectral.weights.len() {
        return Err(invalid(
            "spectral grid weights and detunings differ in length",
        ));
    }
    if let Some(g) = spatial.amplitudes.iter().find(|&&g| !(g > 0.0 && g <= 1.0)) {
        return Err(invalid(format!("spatial amplitude {g} outside (0, 1]")));
    }

    let n = timeline.n_samples();
    let gamma2 = timeline.gamma2;
    let groups: Vec<(Vec<f64>, Vec<f64>)> = spatial
        .amplitudes
        .par_iter()
        .map(|&g| {
            let drive = pieces(timeline, g);
            let mut im = vec![0.0; n];
            let mut re = vec![0.0; n];
            for (&detuning, &w) in spectral.detunings.iter().zip(&spectral.weights) {
                let states = trace(timeline, &drive, &AtomParams { detuning, gamma2 });
                for (i, s) in states.iter().enumerate() {
                    im[i] += w * s.im_rho12;
                    re[i] += w * s.re_rho12;
                }
            }
            (im, re)
        })
        .collect();

    let n_groups = groups.len();
    let mut per_im = Array2::zeros((n_groups, n));
    let mut per_re = Array2::zeros((n_groups, n));
    let mut total_im = vec![0.0; n];
    let mut total_re = vec![0.0; n];
    for (j, (im, re)) in groups.into_iter().enumerate() {
        for i in 0..n {
            per_im[[j, i]] = im[i];
            per_re[[j, i]] = re[i];
            total_im[i] += im[i];
            total_re[i] += re[i];
        }
    }
    Ok(EnsembleResult {
        times: timeline.sample_times(),
        per_group_im_rho12: per_im,
        per_group_re_rho12: per_re,
        total_im_rho12: total_im,
        total_re_rho12: total_re,
        sample_dt: timeline.sample_dt,
    })
}

/// Which spatial groups contribute to an amplitude.
#[derive(Debug, Clone, Copy)]
pub enum GroupScope<'a> {
    All,
    Mask(&'a [bool]),
}

/// Summed `Im ρ12` at the sample nearest `t`, sign preserved.
pub fn extract_amplitude(result: &EnsembleResult, t: f64, scope: GroupScope<'_>) -> Result<f64> {
    let idx = result.sample_index(t)?;
    match scope {
        GroupScope::All => Ok(result.total_im_rho12[idx]),
        GroupScope::Mask(mask) => {
            if mask.len() != result.n_groups() {
                return Err(invalid(format!(
                    "mask has {} entries for {} groups",
                    mask.len(),
                    result.n_groups()
                )));
            }
            Ok(result
                .per_group_im_rho12
                .column(idx)
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(v, _)| v)
                .sum())
        }
    }
}

/// Groups with strictly positive (emissive) coherence, and their sum.
pub fn emissive_filter(per_group: &[f64]) -> (Vec<bool>, f64) {
    let mask: Vec<bool> = per_group.iter().map(|&v| v > 0.0).collect();
    let sum = per_group.iter().filter(|&&v| v > 0.0).sum();
    (mask, sum)
}

/// `|echo| / |data|`.
pub fn efficiency(echo_amplitude: f64, data_amplitude: f64) -> Result<f64> {
    if data_amplitude == 0.0 || !data_amplitude.is_finite() {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(echo_amplitude.abs() / data_amplitude.abs())
}

/// How the echo instant is located.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EchoReadout {
    /// Nearest sample to the analytic echo time.
    #[default]
    Analytic,
    /// Largest `|total Im ρ12|` within `half_window` seconds of the analytic
    /// time. Diagnostic only.
    PeakSearch { half_window: f64 },
}

/// Numerator scope for the echo efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EfficiencyScope {
    AllGroups,
    Emissive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EchoReport {
    pub echo_times: Vec<f64>,
    /// Total `Im ρ12` at each echo.
    pub amplitudes: Vec<f64>,
    /// `per_group_echo[e][j]`: group `j` at echo `e`.
    pub per_group_echo: Vec<Vec<f64>>,
    pub emissive_mask: Vec<bool>,
    /// Emissive-only sum at the final echo.
    pub e2_eff: f64,
    pub data_time: f64,
    pub data_amplitude: f64,
    pub scope: EfficiencyScope,
    pub efficiency: f64,
}

impl EchoReport {
    pub fn final_echo(&self) -> f64 {
        *self
            .amplitudes
            .last()
            .expect("report holds at least one echo")
    }
}

/// Reads the data coherence and every echo of a finished run.
///
/// Two-pulse runs default to an all-group efficiency; double rephasing uses
/// the emissive part of the final echo.
pub fn analyze_echoes(
    result: &EnsembleResult,
    timeline: &PulseTimeline,
    readout: EchoReadout,
    scope: Option<EfficiencyScope>,
) -> Result<EchoReport> {
    let analytic = echo_times(timeline)?;
    let scope = scope.unwrap_or(if analytic.len() == 1 {
        EfficiencyScope::AllGroups
    } else {
        EfficiencyScope::Emissive
    });

    let data_time = timeline.data_time()?;
    let data_amplitude = extract_amplitude(result, data_time, GroupScope::All)?;

    let mut times = Vec::with_capacity(analytic.len());
    let mut amplitudes = Vec::with_capacity(analytic.len());
    let mut per_group = Vec::with_capacity(analytic.len());
    for &t in &analytic {
        let centre = result.sample_index(t)?;
        let idx = match readout {
            EchoReadout::Analytic => centre,
            EchoReadout::PeakSearch { half_window } => {
                let span = (half_window / result.sample_dt).round() as usize;
                let lo = centre.saturating_sub(span);
                let hi = (centre + span).min(result.times.len() - 1);
                (lo..=hi)
                    .max_by(|&a, &b| {
                        result.total_im_rho12[a]
                            .abs()
                            .total_cmp(&result.total_im_rho12[b].abs())
                            .then(b.cmp(&a))
                    })
                    .unwrap_or(centre)
            }
        };
        times.push(result.times[idx]);
        amplitudes.push(result.total_im_rho12[idx]);
        per_group.push(result.groups_at(idx));
    }

    let (emissive_mask, e2_eff) = emissive_filter(per_group.last().expect("at least one echo"));
    let numerator = match scope {
        EfficiencyScope::AllGroups => *amplitudes.last().expect("at least one echo"),
        EfficiencyScope::Emissive => e2_eff,
    };
    Ok(EchoReport {
        echo_times: times,
        amplitudes,
        per_group_echo: per_group,
        emissive_mask,
        e2_eff,
        data_time,
        data_amplitude,
        scope,
        efficiency: efficiency(numerator, data_amplitude)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PulseProfile;
    use crate::grid::{build_spatial_profile, build_spectral_grid, ProfileMode};
    use crate::sequence::PulseEvent;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const MHZ: f64 = 2.0 * PI * 1e6;

    fn pulse(name: &str, t_us: f64, area: f64, profile: PulseProfile) -> PulseEvent {
        PulseEvent {
            name: name.into(),
            start: t_us * US,
            segment: DriveSegment::with_area(0.1 * US, area),
            profile,
        }
    }

    fn single(area: f64, total_us: f64) -> PulseTimeline {
        PulseTimeline::new(
            vec![pulse("D", 0.1, area, PulseProfile::Uniform)],
            total_us * US,
            0.1 * US,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn line_centre_coherence_persists() {
        let tl = single(PI / 2.0, 5.0);
        let series = simulate_group(&tl, 1.0, AtomParams::default()).unwrap();
        assert_eq!(series.len(), 51);
        for s in &series[2..] {
            assert_abs_diff_eq!(s.im_rho12.abs(), 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(s.re_rho12, 0.0, epsilon = 1e-12);
        }
        assert_eq!(series[0], TwoLevelState::GROUND);
        assert_eq!(series[1], TwoLevelState::GROUND);
    }

    #[test]
    fn detuned_coherence_rotates_at_detuning() {
        let tl = single(PI / 2.0, 5.0);
        let delta = 0.5 * MHZ;
        let series = simulate_group(&tl, 1.0, AtomParams::detuned(delta)).unwrap();
        let reference = series[2].rho12();
        for (i, s) in series.iter().enumerate().skip(2) {
            let elapsed = (i - 2) as f64 * 0.1 * US;
            let expected = reference * num_complex::Complex64::from_polar(1.0, delta * elapsed);
            assert_abs_diff_eq!(s.re_rho12, expected.re, epsilon = 1e-12);
            assert_abs_diff_eq!(s.im_rho12, expected.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn purity_conserved_along_trajectory() {
        let tl = PulseTimeline::new(
            vec![
                pulse("D", 0.1, 0.2 * PI, PulseProfile::Gaussian),
                pulse("R1", 3.1, PI, PulseProfile::Gaussian),
                pulse("R2", 9.1, PI, PulseProfile::Gaussian),
            ],
            13.0 * US,
            0.1 * US,
            0.0,
        )
        .unwrap();
        for (g, d) in [(1.0, 0.0), (0.37, 1.1 * MHZ), (0.02, -1.4 * MHZ)] {
            let series = simulate_group(&tl, g, AtomParams::detuned(d)).unwrap();
            for s in series {
                assert!((s.purity() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sample_inside_a_pulse_sees_partial_rotation() {
        let tl = PulseTimeline::new(
            vec![pulse("D", 0.0, PI, PulseProfile::Uniform)],
            0.2 * US,
            0.05 * US,
            0.0,
        )
        .unwrap();
        let series = simulate_group(&tl, 1.0, AtomParams::default()).unwrap();
        assert_abs_diff_eq!(
            series[1].rho22,
            0.5 * (1.0 - (PI / 2.0).cos()),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(series[2].rho22, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_out_of_range_amplitude() {
        let tl = single(PI / 2.0, 1.0);
        assert!(simulate_group(&tl, 0.0, AtomParams::default()).is_err());
        assert!(simulate_group(&tl, 1.5, AtomParams::default()).is_err());
    }

    #[test]
    fn fid_decays_with_gaussian_envelope() {
        // uniform π/2 data pulse; after it each detuning class only precesses,
        // so the spectral sum is Σ w Im(c_k e^{iΔ_k t}) with c_k taken from a
        // single-pulse propagation, and its envelope is exp(−(σ t)²/2)
        let tl = single(PI / 2.0, 3.0);
        let spatial = build_spatial_profile(ProfileMode::Uniform, 3, f64::NAN).unwrap();
        let spectral = build_spectral_grid(281, 10e3, 1.2e6).unwrap();
        let r = simulate_ensemble(&tl, &spatial, &spectral).unwrap();
        let seg = DriveSegment::with_area(0.1 * US, PI / 2.0);
        let post: Vec<num_complex::Complex64> = spectral
            .detunings
            .iter()
            .map(|&d| {
                crate::dynamics::propagate_segment(
                    TwoLevelState::GROUND,
                    seg,
                    AtomParams::detuned(d),
                )
                .unwrap()
                .rho12()
            })
            .collect();
        let sigma = 2.0 * PI * 1.2e6 / (8.0 * 2f64.ln()).sqrt();
        let start = r.total_im_rho12[2];
        for i in 2..=8 {
            let elapsed = (i - 2) as f64 * 0.1 * US;
            let oracle: f64 = 3.0
                * spectral
                    .detunings
                    .iter()
                    .zip(&spectral.weights)
                    .zip(&post)
                    .map(|((d, w), c)| {
                        w * (c * num_complex::Complex64::from_polar(1.0, d * elapsed)).im
                    })
                    .sum::<f64>();
            assert_abs_diff_eq!(r.total_im_rho12[i], oracle, epsilon = 1e-12);
            // pulse-time dephasing shifts the effective origin by a fraction of the pulse
            let lo = (-0.5 * (sigma * (elapsed + 0.1 * US)).powi(2)).exp();
            let hi = (-0.5 * (sigma * elapsed).powi(2)).exp();
            let ratio = r.total_im_rho12[i] / start;
            assert!(
                ratio <= hi + 1e-3 && ratio >= lo * 0.9,
                "t = {elapsed}: {lo} {ratio} {hi}"
            );
        }
        assert!(r.total_im_rho12[30].abs() < 1e-3 * start.abs());
    }

    #[test]
    fn totals_are_sums_of_groups() {
        let tl = PulseTimeline::new(
            vec![
                pulse("D", 0.1, PI / 2.0, PulseProfile::Gaussian),
                pulse("R", 2.1, PI, PulseProfile::Uniform),
            ],
            5.0 * US,
            0.1 * US,
            0.0,
        )
        .unwrap();
        let spatial = build_spatial_profile(ProfileMode::Gaussian, 9, 0.9955).unwrap();
        let spectral = build_spectral_grid(41, 50e3, 1.2e6).unwrap();
        let r = simulate_ensemble(&tl, &spatial, &spectral).unwrap();
        for i in 0..r.times.len() {
            let s: f64 = r.per_group_im_rho12.column(i).sum();
            assert!((s - r.total_im_rho12[i]).abs() <= 1e-12);
        }
        let report = analyze_echoes(&r, &tl, EchoReadout::Analytic, None).unwrap();
        assert_eq!(report.scope, EfficiencyScope::AllGroups);
        assert_abs_diff_eq!(report.echo_times[0], 4.1 * US, epsilon = 1e-15);
        assert!(report.data_amplitude < 0.0);
        assert!(report.amplitudes[0] > 0.0);
        let peak = analyze_echoes(
            &r,
            &tl,
            EchoReadout::PeakSearch {
                half_window: 0.3 * US,
            },
            None,
        )
        .unwrap();
        assert!((peak.echo_times[0] - 4.1 * US).abs() <= 0.3 * US + 1e-15);
        assert!(peak.amplitudes[0].abs() >= report.amplitudes[0].abs());
    }

    #[test]
    fn amplitude_scopes_and_range() {
        let tl = single(PI / 2.0, 2.0);
        let spatial = build_spatial_profile(ProfileMode::Uniform, 4, f64::NAN).unwrap();
        let spectral = build_spectral_grid(1, 10e3, 1.2e6).unwrap();
        let r = simulate_ensemble(&tl, &spatial, &spectral).unwrap();
        let all = extract_amplitude(&r, 1.0 * US, GroupScope::All).unwrap();
        assert_abs_diff_eq!(all, -2.0, epsilon = 1e-12);
        let half =
            extract_amplitude(&r, 1.0 * US, GroupScope::Mask(&[true, false, true, false])).unwrap();
        assert_abs_diff_eq!(half, -1.0, epsilon = 1e-12);
        assert!(matches!(
            extract_amplitude(&r, 2.5 * US, GroupScope::All),
            Err(Error::OutOfRange { .. })
        ));
        assert!(extract_amplitude(&r, 1.0 * US, GroupScope::Mask(&[true])).is_err());
    }

    #[test]
    fn emissive_filter_is_strict() {
        let (mask, sum) = emissive_filter(&[0.2, 0.0, -0.1, 0.3]);
        assert_eq!(mask, vec![true, false, false, true]);
        assert_abs_diff_eq!(sum, 0.5, epsilon = 1e-15);
        let (mask, sum) = emissive_filter(&[-0.2, -0.4]);
        assert!(mask.iter().all(|m| !m));
        assert_eq!(sum, 0.0);
    }

    #[test]
    fn efficiency_ratio() {
        assert_abs_diff_eq!(efficiency(0.3, -0.6).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(efficiency(-0.6, -0.6).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(efficiency(0.3, 0.0), Err(Error::UndefinedEfficiency));
    }
}
