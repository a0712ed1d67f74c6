//! Photon-echo simulation for inhomogeneously broadened two-level ensembles
//! driven by spatially shaped square pulses.
//!
//! The ensemble is discretized along two independent axes: transverse
//! groups, each seeing a relative field amplitude `G_j`, and spectral
//! classes spread over the inhomogeneous line. Every (group, detuning) pair
//! evolves independently and observables are plain sums.

pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod sequence;
pub mod theory;

pub use config::{
    parse_config, parse_config_lenient, validate_spec, ConfigError, ConfigErrorKind,
    ExperimentSpec, PulseProfile, PulseSpec, PulseStrength, SweepSpec,
};
pub use dynamics::{propagate_segment, rk4_oracle, AtomParams, DriveSegment, TwoLevelState};
pub use ensemble::{
    analyze_echoes, efficiency, emissive_filter, extract_amplitude, simulate_ensemble,
    simulate_group, EchoReadout, EchoReport, EfficiencyScope, EnsembleResult, GroupScope,
};
pub use error::{Error, Result};
pub use grid::{
    build_spatial_profile, build_spectral_grid, ProfileMode, SpatialProfile, SpectralGrid,
};
pub use sequence::{build_timeline, echo_times, PulseEvent, PulseTimeline, US};
pub use theory::{
    emissive_window, find_zero_crossings, fit_sin_power, predict_e1, predict_e2,
    EmissiveWindowParams, FitResult,
};

/// Spatial and spectral grids described by a spec.
pub fn build_grids(spec: &ExperimentSpec) -> Result<(SpatialProfile, SpectralGrid)> {
    let spatial = build_spatial_profile(
        spec.spatial.mode,
        spec.spatial.n_groups,
        spec.spatial.coverage,
    )?;
    let spectral = build_spectral_grid(
        spec.spectral.n_groups,
        spec.spectral.spacing_khz * 1e3,
        spec.spectral.fwhm_mhz * 1e6,
    )?;
    Ok((spatial, spectral))
}
