//! Pulse timelines and their echo bookkeeping.

use std::f64::consts::PI;

use crate::config::{ExperimentSpec, PulseProfile};
use crate::dynamics::DriveSegment;
use crate::error::{invalid, Error, Result};

/// Seconds per microsecond.
pub const US: f64 = 1e-6;

/// Extra time simulated past the last analytic echo when the span is not
/// configured.
pub const DEFAULT_TAIL: f64 = 0.9 * US;

#[derive(Debug, Clone, PartialEq)]
pub struct PulseEvent {
    pub name: String,
    /// Arrival (start) time in seconds.
    pub start: f64,
    /// Peak drive; profiled pulses scale `rabi_frequency` by `G_j`.
    pub segment: DriveSegment,
    pub profile: PulseProfile,
}

impl PulseEvent {
    pub fn end(&self) -> f64 {
        self.start + self.segment.duration
    }

    /// Drive seen by a spatial group of relative amplitude `g`.
    pub fn segment_for(&self, g: f64) -> DriveSegment {
        match self.profile {
            PulseProfile::Gaussian => DriveSegment {
                rabi_frequency: self.segment.rabi_frequency * g,
                ..self.segment
            },
            PulseProfile::Uniform => self.segment,
        }
    }
}

/// Ordered, non-overlapping square pulses; gaps are free evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTimeline {
    pub events: Vec<PulseEvent>,
    pub total_duration: f64,
    pub sample_dt: f64,
    /// Upper-state decay rate (1/s) applied to every atom.
    pub gamma2: f64,
}

/// Boundary comparisons tolerate this much float noise (seconds).
const TIME_EPS: f64 = 1e-15;

impl PulseTimeline {
    pub fn new(
        events: Vec<PulseEvent>,
        total_duration: f64,
        sample_dt: f64,
        gamma2: f64,
    ) -> Result<Self> {
        if !(sample_dt > 0.0 && sample_dt.is_finite()) {
            return Err(invalid(format!(
                "sample_dt must be positive, got {sample_dt}"
            )));
        }
        if !(total_duration >= 0.0 && total_duration.is_finite()) {
            return Err(invalid(format!("invalid total duration {total_duration}")));
        }
        if !(gamma2 >= 0.0 && gamma2.is_finite()) {
            return Err(invalid(format!("invalid decay rate {gamma2}")));
        }
        for e in &events {
            if e.start < 0.0 || !e.start.is_finite() {
                return Err(invalid(format!("pulse `{}` starts at {}", e.name, e.start)));
            }
            if e.segment.duration < 0.0 || e.segment.rabi_frequency < 0.0 {
                return Err(invalid(format!(
                    "pulse `{}` has a negative duration or drive",
                    e.name
                )));
            }
        }
        for pair in events.windows(2) {
            if pair[1].start + TIME_EPS < pair[0].end() {
                return Err(Error::Overlap {
                    first: pair[0].name.clone(),
                    second: pair[1].name.clone(),
                });
            }
        }
        Ok(PulseTimeline {
            events,
            total_duration,
            sample_dt,
            gamma2,
        })
    }

    pub fn n_samples(&self) -> usize {
        (self.total_duration / self.sample_dt).round() as usize + 1
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..self.n_samples())
            .map(|i| i as f64 * self.sample_dt)
            .collect()
    }

    /// Nearest sample index to `t`, or an error if `t` is off the grid.
    pub fn sample_index(&self, t: f64) -> Result<usize> {
        let last = (self.n_samples() - 1) as f64;
        let idx = (t / self.sample_dt).round();
        if !(t.is_finite() && idx >= 0.0 && idx <= last) {
            return Err(Error::OutOfRange {
                t_us: t / US,
                end_us: last * self.sample_dt / US,
            });
        }
        Ok(idx as usize)
    }

    /// Time of maximum data coherence: the end of the first pulse.
    pub fn data_time(&self) -> Result<f64> {
        self.events
            .first()
            .map(PulseEvent::end)
            .ok_or_else(|| Error::NotApplicable("timeline has no pulses".into()))
    }
}

/// Analytic echo times from pulse arrival times.
///
/// Two pulses give `2 t_R − t_D`; three give `E1 = 2 t_R1 − t_D` and
/// `E2 = 2 t_R2 − E1`.
pub fn echo_times(timeline: &PulseTimeline) -> Result<Vec<f64>> {
    let t: Vec<f64> = timeline.events.iter().map(|e| e.start).collect();
    match t.as_slice() {
        [d, r] => Ok(vec![2.0 * r - d]),
        [d, r1, r2] => {
            let e1 = 2.0 * r1 - d;
            Ok(vec![e1, 2.0 * r2 - e1])
        }
        _ => Err(Error::NotApplicable(format!(
            "echo times need 2 or 3 pulses, timeline has {}",
            t.len()
        ))),
    }
}

/// Converts a validated spec into a timeline (times in seconds, Rabi
/// frequencies in rad/s).
pub fn build_timeline(spec: &ExperimentSpec) -> Result<PulseTimeline> {
    let sim = &spec.simulation;
    let duration = sim.pulse_duration_us * US;
    if !(duration > 0.0) {
        return Err(invalid(format!(
            "pulse duration must be positive, got {} us",
            sim.pulse_duration_us
        )));
    }
    let events: Vec<PulseEvent> = spec
        .pulses
        .iter()
        .map(|p| PulseEvent {
            name: p.name.clone(),
            start: p.t_us * US,
            segment: DriveSegment::with_area(duration, p.area(sim.pulse_duration_us))
                .with_phase(p.phase_pi * PI),
            profile: p.profile,
        })
        .collect();
    for pair in events.windows(2) {
        if pair[1].start <= pair[0].start || pair[1].start + TIME_EPS < pair[0].end() {
            return Err(Error::Overlap {
                first: pair[0].name.clone(),
                second: pair[1].name.clone(),
            });
        }
    }

    let total = match sim.duration_us {
        Some(d) => d * US,
        None => {
            let probe = PulseTimeline::new(events.clone(), 0.0, sim.sample_dt_us * US, 0.0)?;
            match echo_times(&probe) {
                Ok(echoes) => echoes.last().copied().unwrap_or(0.0) + DEFAULT_TAIL,
                Err(_) => events.last().map_or(0.0, PulseEvent::end) + 2.0 * US,
            }
        }
    };
    // snap to the sampling grid so the last sample sits at the end of the span
    let dt = sim.sample_dt_us * US;
    let total = (total / dt).round() * dt;
    PulseTimeline::new(events, total, dt, sim.gamma2_per_us / US)
}
