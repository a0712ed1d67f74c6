//! Discretization of the ensemble: spectral detunings and transverse groups.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

/// Inhomogeneous broadening sampled on a centered, uniform detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGrid {
    /// Angular detunings (rad/s), strictly increasing and symmetric about 0.
    pub detunings: Vec<f64>,
    /// Normalized weights, summing to one.
    pub weights: Vec<f64>,
}

impl SpectralGrid {
    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }
}

/// Builds `n_points` detunings at `spacing` Hz with a normal-shaped weight of
/// the given FWHM, truncated to the grid and renormalized.
pub fn build_spectral_grid(n_points: usize, spacing: f64, fwhm: f64) -> Result<SpectralGrid> {
    if n_points % 2 == 0 {
        return Err(invalid(format!(
            "spectral point count must be odd to include zero detuning, got {n_points}"
        )));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(invalid(format!(
            "spectral spacing must be positive, got {spacing}"
        )));
    }
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(invalid(format!("FWHM must be positive, got {fwhm}")));
    }

    let center = (n_points / 2) as i64;
    let offsets: Vec<f64> = (0..n_points as i64)
        .map(|k| spacing * (k - center) as f64)
        .collect();
    let raw: Vec<f64> = offsets
        .iter()
        .map(|f| (-4.0 * LN_2 * (f / fwhm).powi(2)).exp())
        .collect();
    let norm: f64 = raw.iter().sum();

    Ok(SpectralGrid {
        detunings: offsets.iter().map(|f| 2.0 * PI * f).collect(),
        weights: raw.iter().map(|w| w / norm).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileMode {
    Gaussian,
    Uniform,
    Linear,
}

impl ProfileMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileMode::Gaussian => "gaussian",
            ProfileMode::Uniform => "uniform",
            ProfileMode::Linear => "linear",
        }
    }
}

impl fmt::Display for ProfileMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ProfileMode::Gaussian),
            "uniform" => Ok(ProfileMode::Uniform),
            "linear" => Ok(ProfileMode::Linear),
            other => Err(invalid(format!("unknown spatial mode `{other}`"))),
        }
    }
}

/// Transverse atom groups and the relative field amplitude `G_j` each sees.
///
/// Every group carries the same number of atoms; only the Rabi frequency of
/// profile-following pulses is scaled by `amplitudes[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialProfile {
    pub mode: ProfileMode,
    /// Gaussian mode: units of the beam σ. Uniform mode: evenly spaced on
    /// [−1, 1]. Linear mode: the ramp coordinate, equal to the amplitude.
    pub positions: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

impl SpatialProfile {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }
}

/// Half-width `z` of the symmetric interval holding `coverage` of a standard
/// normal.
pub fn coverage_half_width(coverage: f64) -> Result<f64> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(invalid(format!(
            "coverage must lie in (0, 1), got {coverage}"
        )));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + 0.5 * coverage))
}

fn symmetric_positions(n: usize, half_width: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let last = (n - 1) as f64;
    (0..n)
        .map(|j| half_width * (2.0 * j as f64 - last) / last)
        .collect()
}

pub fn build_spatial_profile(
    mode: ProfileMode,
    n_groups: usize,
    coverage: f64,
) -> Result<SpatialProfile> {
    if n_groups == 0 {
        return Err(invalid("at least one spatial group is required"));
    }
    let (positions, amplitudes) = match mode {
        ProfileMode::Gaussian => {
            let z = coverage_half_width(coverage)?;
            let positions = symmetric_positions(n_groups, z);
            let amplitudes = positions.iter().map(|x| (-0.5 * x * x).exp()).collect();
            (positions, amplitudes)
        }
        ProfileMode::Uniform => (symmetric_positions(n_groups, 1.0), vec![1.0; n_groups]),
        ProfileMode::Linear => {
            let ramp: Vec<f64> = (1..=n_groups).map(|j| j as f64 / n_groups as f64).collect();
            (ramp.clone(), ramp)
        }
    };
    Ok(SpatialProfile {
        mode,
        positions,
        amplitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_spectral_grid_spans_1_4_mhz() {
        let g = build_spectral_grid(281, 10e3, 1.2e6).unwrap();
        assert_eq!(g.len(), 281);
        assert_abs_diff_eq!(g.detunings[0], -2.0 * PI * 1.4e6, epsilon = 1e-6);
        assert_abs_diff_eq!(g.detunings[280], 2.0 * PI * 1.4e6, epsilon = 1e-6);
        assert_eq!(g.detunings[140], 0.0);
        for k in 0..281 {
            assert_eq!(g.detunings[k], -g.detunings[280 - k]);
            assert_eq!(g.weights[k], g.weights[280 - k]);
        }
        assert!(g.detunings.windows(2).all(|w| w[1] > w[0]));
        let sum: f64 = g.weights.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn edge_weight_ratio() {
        let g = build_spectral_grid(281, 10e3, 1.2e6).unwrap();
        let ratio = g.weights[0] / g.weights[140];
        let expected = (-4.0 * LN_2 * (1.4f64 / 1.2).powi(2)).exp();
        assert_abs_diff_eq!(ratio, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(ratio, 0.0230, epsilon = 5e-5);
    }

    #[test]
    fn spectral_grid_rejects_bad_input() {
        assert!(build_spectral_grid(280, 10e3, 1.2e6).is_err());
        assert!(build_spectral_grid(281, 0.0, 1.2e6).is_err());
        assert!(build_spectral_grid(281, 10e3, -1.0).is_err());
    }

    #[test]
    fn gaussian_profile_covers_requested_mass() {
        let p = build_spatial_profile(ProfileMode::Gaussian, 41, 0.9955).unwrap();
        assert_eq!(p.len(), 41);
        let z = p.positions[40];
        assert_abs_diff_eq!(z, 2.84, epsilon = 0.005);
        assert_eq!(p.positions[0], -z);
        assert_abs_diff_eq!(p.amplitudes[0], 0.0177, epsilon = 2e-4);
        assert_eq!(p.amplitudes[20], 1.0);

        let normal = Normal::standard();
        let mass = normal.cdf(z) - normal.cdf(-z);
        assert_abs_diff_eq!(mass, 0.9955, epsilon = 1e-6);

        for j in 0..20 {
            assert!(p.amplitudes[j] < p.amplitudes[j + 1]);
            assert!(p.amplitudes[40 - j] < p.amplitudes[39 - j]);
        }
    }

    #[test]
    fn uniform_and_linear_profiles() {
        let u = build_spatial_profile(ProfileMode::Uniform, 41, f64::NAN).unwrap();
        assert!(u.amplitudes.iter().all(|&a| a == 1.0));
        let l = build_spatial_profile(ProfileMode::Linear, 128, f64::NAN).unwrap();
        assert_eq!(l.amplitudes[0], 1.0 / 128.0);
        assert_eq!(l.amplitudes[127], 1.0);
        assert!(l.amplitudes.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn coverage_out_of_range() {
        for c in [0.0, 1.0, -0.2, 1.5] {
            assert!(build_spatial_profile(ProfileMode::Gaussian, 41, c).is_err());
        }
        assert!(build_spatial_profile(ProfileMode::Gaussian, 0, 0.9).is_err());
        let single = build_spatial_profile(ProfileMode::Gaussian, 1, 0.9).unwrap();
        assert_eq!(single.amplitudes, vec![1.0]);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [
            ProfileMode::Gaussian,
            ProfileMode::Uniform,
            ProfileMode::Linear,
        ] {
            assert_eq!(m.as_str().parse::<ProfileMode>().unwrap(), m);
        }
        assert!("lorentzian".parse::<ProfileMode>().is_err());
    }
}
