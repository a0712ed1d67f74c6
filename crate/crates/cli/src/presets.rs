//! Built-in experiment descriptions for the three figure reproductions.

use std::fmt;
use std::str::FromStr;

use echoform::ExperimentSpec;

use crate::{load_spec, CliError, Result};

const FIG1_D: &str = include_str!("../presets/fig1_d.cfg");
const FIG1_R: &str = include_str!("../presets/fig1_r.cfg");
const FIG1_DR: &str = include_str!("../presets/fig1_dr.cfg");
const FIG2: &str = include_str!("../presets/fig2.cfg");
const FIG3: &str = include_str!("../presets/fig3.cfg");

/// Which pulses of the two-pulse run follow the Gaussian profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig1Case {
    /// Gaussian data pulse, uniform π rephasing.
    D,
    /// Uniform data pulse, Gaussian rephasing.
    R,
    /// Both Gaussian.
    DR,
}

impl Fig1Case {
    pub const ALL: [Fig1Case; 3] = [Fig1Case::D, Fig1Case::R, Fig1Case::DR];

    pub fn as_str(&self) -> &'static str {
        match self {
            Fig1Case::D => "d",
            Fig1Case::R => "r",
            Fig1Case::DR => "dr",
        }
    }

    /// Exponent of the `sin^k((π/2) G_j)` law the echo profile follows.
    pub fn expected_exponent(&self) -> f64 {
        match self {
            Fig1Case::D => 1.0,
            Fig1Case::R => 2.0,
            Fig1Case::DR => 3.0,
        }
    }
}

impl fmt::Display for Fig1Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Fig1Case {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(Fig1Case::D),
            "r" => Ok(Fig1Case::R),
            "dr" => Ok(Fig1Case::DR),
            other => Err(CliError::Usage(format!(
                "unknown fig1 case `{other}` (expected d, r or dr)"
            ))),
        }
    }
}

pub fn fig1_text(case: Fig1Case) -> &'static str {
    match case {
        Fig1Case::D => FIG1_D,
        Fig1Case::R => FIG1_R,
        Fig1Case::DR => FIG1_DR,
    }
}

pub fn fig1(case: Fig1Case) -> ExperimentSpec {
    load_spec(fig1_text(case)).expect("built-in preset parses")
}

pub fn fig2_text() -> &'static str {
    FIG2
}

/// Uniform π/2 data pulse, rephasing areas ramped linearly to 2π across
/// 128 groups.
pub fn fig2() -> ExperimentSpec {
    load_spec(FIG2).expect("built-in preset parses")
}

pub fn fig3_text() -> &'static str {
    FIG3
}

/// Gaussian double rephasing with a π/5 data pulse and both rephasing
/// pulses at `peak_area_pi`.
pub fn fig3(peak_area_pi: f64) -> ExperimentSpec {
    let spec = load_spec(FIG3).expect("built-in preset parses");
    let idx = spec.swept_pulses("R.area").expect("preset has R1 and R2");
    spec.with_pulse_area(&idx, peak_area_pi)
}

/// Looks up a preset by name: `fig1-d`, `fig1-r`, `fig1-dr`, `fig2`, `fig3`.
pub fn by_name(name: &str) -> Result<ExperimentSpec> {
    match name {
        "fig2" => Ok(fig2()),
        "fig3" => Ok(fig3(1.0)),
        _ => match name.strip_prefix("fig1-") {
            Some(case) => Ok(fig1(case.parse()?)),
            None => Err(CliError::Usage(format!("unknown preset `{name}`"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use echoform::{PulseProfile, PulseStrength};

    #[test]
    fn presets_parse() {
        for case in Fig1Case::ALL {
            let spec = fig1(case);
            assert_eq!(spec.pulses.len(), 2);
            assert_eq!(spec.pulses[0].t_us, 0.1);
            assert_eq!(spec.pulses[1].t_us, 2.1);
        }
        assert_eq!(fig2().spatial.n_groups, 128);
        let spec = fig3(0.5);
        assert_eq!(spec.pulses[0].strength, PulseStrength::AreaPi(0.2));
        assert_eq!(spec.pulses[1].strength, PulseStrength::AreaPi(0.5));
        assert_eq!(spec.pulses[2].strength, PulseStrength::AreaPi(0.5));
    }

    #[test]
    fn fig1_profiles() {
        let gaussian = |c| {
            fig1(c)
                .pulses
                .iter()
                .map(|p| p.profile == PulseProfile::Gaussian)
                .collect::<Vec<_>>()
        };
        assert_eq!(gaussian(Fig1Case::D), [true, false]);
        assert_eq!(gaussian(Fig1Case::R), [false, true]);
        assert_eq!(gaussian(Fig1Case::DR), [true, true]);
    }

    #[test]
    fn names() {
        assert!(by_name("fig1-dr").is_ok());
        assert!(matches!(by_name("fig1-x"), Err(CliError::Usage(_))));
        assert!(matches!(by_name("fig4"), Err(CliError::Usage(_))));
    }
}
