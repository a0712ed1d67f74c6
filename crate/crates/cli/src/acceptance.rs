//! The acceptance suite shared by `echoform selftest` and the test target.
//!
//! Each check prints as one line of the pass/fail table; `detail` carries
//! the measured values so a failure is readable without rerunning.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use echoform::{
    build_grids, build_spectral_grid, parse_config, propagate_segment, rk4_oracle, simulate_group,
    AtomParams, DriveSegment, EchoReadout, TwoLevelState, US,
};

use crate::output::{render_csv, Table};
use crate::presets::{self, Fig1Case};
use crate::run::{execute, RunOutput};
use crate::sweep::{analyze_ramp, local_maxima, ramp_rows, sweep_rephasing_area, SweepRow};
use crate::{with_workers, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Check::new(name, passed, detail),
            Err(e) => Check::new(name, false, format!("error: {e}")),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<34} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub fn render_table(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        s.push_str(&c.line());
        s.push('\n');
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    s.push_str(&format!("{passed}/{} checks passed\n", checks.len()));
    s
}

/// Every check, in table order.
pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    for case in Fig1Case::ALL {
        out.push(fig1(case));
    }
    out.push(fig2());
    out.extend(fig3());
    out.extend(properties());
    out
}

fn within(x: f64, centre: f64, tol: f64) -> bool {
    (x - centre).abs() <= tol
}

fn rms(a: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = a.fold((0.0, 0usize), |(s, n), d| (s + d * d, n + 1));
    (s / n as f64).sqrt()
}

pub fn fig1(case: Fig1Case) -> Check {
    let name = format!("fig1 case {case}");
    Check::from_result(&name, fig1_inner(case))
}

fn fig1_inner(case: Fig1Case) -> Result<(bool, String)> {
    let run = execute(&presets::fig1(case), EchoReadout::Analytic)?;
    let report = run.report.as_ref().expect("two-pulse run has a report");
    let eta = report.efficiency;
    let fit = run
        .profile_fit()
        .ok_or_else(|| echoform::Error::FitUndefined("echo profile could not be fitted".into()))?;
    let k_ok = within(fit.exponent, case.expected_exponent(), 0.1);
    let mut detail = format!("eta={eta:.4} k={:.2}", fit.exponent);
    let passed = match case {
        Fig1Case::D => {
            let echo = &report.per_group_echo[0];
            let peak = echo.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let dev = rms(run
                .spatial
                .amplitudes
                .iter()
                .zip(echo)
                .map(|(g, e)| e / peak - (FRAC_PI_2 * g).sin()));
            detail.push_str(&format!(" profile_rms={dev:.4}"));
            within(eta, 1.0, 0.02) && dev < 0.02 && k_ok
        }
        Fig1Case::R => (0.40..=0.55).contains(&eta) && k_ok,
        Fig1Case::DR => within(eta, 0.70, 0.05) && k_ok,
    };
    Ok((passed, detail))
}

pub fn fig2() -> Check {
    Check::from_result("fig2 ramp sweep", fig2_inner())
}

fn fig2_inner() -> Result<(bool, String)> {
    let run = execute(&presets::fig2(), EchoReadout::Analytic)?;
    let rows = ramp_rows(&run).expect("fig2 is a linear ramp");
    let a = analyze_ramp(&rows).expect("non-empty ramp");
    let crossings_ok = a.e2_crossings.len() == 2
        && within(a.e2_crossings[0], 0.63, 0.05)
        && within(a.e2_crossings[1], 1.37, 0.05);
    let passed = a.e1_rms < 0.02 && a.e2_rms < 0.05 && crossings_ok;
    let detail = format!(
        "E1_rms={:.4} E2_rms={:.4} crossings={:?}pi window_mismatch={}/{}",
        a.e1_rms,
        a.e2_rms,
        a.e2_crossings
            .iter()
            .map(|x| (x * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>(),
        a.window_mismatches.len(),
        a.window_checked
    );
    Ok((passed, detail))
}

/// The four parts of the double-rephasing efficiency criterion.
pub fn fig3() -> Vec<Check> {
    let base = presets::fig3(1.0);
    let sweep = base.sweep.clone().expect("fig3 preset carries a sweep");
    let main = sweep_rephasing_area(&base, sweep.from_pi, sweep.to_pi, sweep.step_pi);
    let tail = sweep_rephasing_area(&base, 4.0, 8.0, sweep.step_pi);
    let main = match main {
        Ok(rows) => rows,
        Err(e) => {
            return [
                "fig3 eta(pi)",
                "fig3 max eta",
                "fig3 damped oscillation",
                "fig3 tail",
            ]
            .iter()
            .map(|n| Check::new(*n, false, format!("error: {e}")))
            .collect()
        }
    };
    let mut out = Vec::new();

    let at_pi = main.iter().find(|r| r.phi_r_over_pi == 1.0);
    out.push(match at_pi {
        Some(r) => Check::new(
            "fig3 eta(pi)",
            within(r.eta, 0.069, 0.02),
            format!("eta={:.4}", r.eta),
        ),
        None => Check::new("fig3 eta(pi)", false, "sweep misses pi".into()),
    });

    let best = main
        .iter()
        .max_by(|a, b| a.eta.total_cmp(&b.eta))
        .expect("non-empty sweep");
    out.push(Check::new(
        "fig3 max eta",
        within(best.eta, 0.26, 0.04) && best.phi_r_over_pi == 0.5,
        format!("max eta={:.4} at {}pi", best.eta, best.phi_r_over_pi),
    ));

    let maxima = local_maxima(&main);
    let decreasing = maxima.len() >= 2 && maxima.windows(2).all(|w| w[1].1 < w[0].1);
    out.push(Check::new(
        "fig3 damped oscillation",
        decreasing,
        format!("local maxima {}", fmt_pairs(&maxima)),
    ));

    out.push(Check::from_result(
        "fig3 tail",
        tail.map(|rows| {
            let lo = rows.iter().map(|r| r.eta).fold(f64::INFINITY, f64::min);
            let hi = rows.iter().map(|r| r.eta).fold(f64::NEG_INFINITY, f64::max);
            let mean = rows.iter().map(|r| r.eta).sum::<f64>() / rows.len() as f64;
            let all_in = rows.iter().all(|r| within(r.eta, 0.10, 0.03));
            (
                all_in,
                format!(
                    "eta over 4pi..8pi in [{lo:.4}, {hi:.4}], mean {mean:.4}, outside band: {}",
                    fmt_areas(&rows)
                ),
            )
        }),
    ));
    out
}

fn fmt_pairs(p: &[(f64, f64)]) -> String {
    p.iter()
        .map(|(a, e)| format!("{e:.4}@{a}pi"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn fmt_areas(rows: &[SweepRow]) -> String {
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !within(r.eta, 0.10, 0.03))
        .map(|r| format!("{}pi", r.phi_r_over_pi))
        .collect();
    if bad.is_empty() {
        "none".into()
    } else {
        bad.join(",")
    }
}

pub fn properties() -> Vec<Check> {
    vec![
        Check::from_result("property purity", purity()),
        Check::from_result("property rk4 oracle", oracle()),
        Check::from_result("property composition", composition()),
        Check::from_result("property weight normalization", weights()),
        Check::from_result("property conjugacy", conjugacy()),
        Check::from_result("property two-pulse law", two_pulse_law()),
        Check::from_result("property worker determinism", determinism()),
        Check::from_result("property config round-trip", round_trip()),
    ]
}

fn max_dev(a: &TwoLevelState, b: &TwoLevelState) -> f64 {
    [
        a.rho11 - b.rho11,
        a.rho22 - b.rho22,
        a.re_rho12 - b.re_rho12,
        a.im_rho12 - b.im_rho12,
    ]
    .iter()
    .fold(0.0f64, |m, d| m.max(d.abs()))
}

const MHZ: f64 = 2.0 * PI * 1e6;

fn purity() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut count = 0;
    for spec in [
        presets::fig3(1.0),
        presets::fig1(Fig1Case::DR),
        presets::fig2(),
    ] {
        let timeline = echoform::build_timeline(&spec)?;
        let (spatial, spectral) = build_grids(&spec)?;
        let groups = spatial.amplitudes.iter().step_by(5);
        for &g in groups {
            for &d in spectral.detunings.iter().step_by(20) {
                for s in simulate_group(&timeline, g, AtomParams::detuned(d))? {
                    worst = worst.max((s.purity() - 1.0).abs());
                }
                count += 1;
            }
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max |purity-1|={worst:.2e} over {count} trajectories"),
    ))
}

fn random_state(rng: &mut ChaCha8Rng) -> TwoLevelState {
    let cos_t: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let len: f64 = rng.gen_range(0.0..=1.0);
    let sin_t = (1.0 - cos_t * cos_t).sqrt();
    TwoLevelState::from_bloch([
        len * sin_t * phi.cos(),
        len * sin_t * phi.sin(),
        len * cos_t,
    ])
}

fn random_segment(rng: &mut ChaCha8Rng) -> (DriveSegment, AtomParams) {
    let seg = DriveSegment::new(
        rng.gen_range(0.01..=0.1) * US,
        rng.gen_range(0.0..=7.5) * MHZ,
    )
    .with_phase(rng.gen_range(-PI..PI));
    (seg, AtomParams::detuned(rng.gen_range(-1.4..=1.4) * MHZ))
}

fn oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let state = random_state(&mut rng);
        let (seg, atom) = random_segment(&mut rng);
        let exact = propagate_segment(state, seg, atom)?;
        let rk = rk4_oracle(state, seg, atom, 1e-9)?;
        worst = worst.max(max_dev(&exact, &rk));
    }
    Ok((
        worst < 1e-6,
        format!("max deviation {worst:.2e} over 1000 segments"),
    ))
}

fn composition() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let state = random_state(&mut rng);
        let (seg, atom) = random_segment(&mut rng);
        let f: f64 = rng.gen_range(0.0..=1.0);
        let first = DriveSegment {
            duration: seg.duration * f,
            ..seg
        };
        let second = DriveSegment {
            duration: seg.duration - first.duration,
            ..seg
        };
        let whole = propagate_segment(state, seg, atom)?;
        let split = propagate_segment(propagate_segment(state, first, atom)?, second, atom)?;
        worst = worst.max(max_dev(&whole, &split));
    }
    Ok((
        worst <= 1e-9,
        format!("max deviation {worst:.2e} over 1000 splits"),
    ))
}

fn weights() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (n, spacing, fwhm) in [
        (281, 10e3, 1.2e6),
        (141, 20e3, 1.2e6),
        (101, 10e3, 0.3e6),
        (1001, 1e3, 2.0e6),
        (1, 10e3, 1.2e6),
    ] {
        let g = build_spectral_grid(n, spacing, fwhm)?;
        worst = worst.max((g.weights.iter().sum::<f64>() - 1.0).abs());
    }
    Ok((worst <= 1e-12, format!("max |sum w - 1|={worst:.2e}")))
}

fn conjugacy() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut runs: Vec<RunOutput> = Fig1Case::ALL
        .iter()
        .map(|&c| execute(&presets::fig1(c), EchoReadout::Analytic))
        .collect::<Result<_>>()?;
    runs.push(execute(&presets::fig3(1.0), EchoReadout::Analytic)?);
    for run in &runs {
        let report = run.report.as_ref().expect("echo run");
        for &t in &report.echo_times {
            let i = run.result.sample_index(t)?;
            let re = run.result.total_re_rho12[i].abs();
            let im = run.result.total_im_rho12[i].abs();
            worst = worst.max((re - 1e-12).max(0.0) / im);
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max |Re|/|Im| at echoes {worst:.2e}"),
    ))
}

/// Echo coherence of a single line-centre atom, with the free-precession
/// phase cycled over eight values so only the rephased term survives.
pub fn single_atom_echo(phi_d: f64, phi_r: f64) -> Result<f64> {
    const CYCLE: usize = 8;
    let (pulse, gap) = (0.1 * US, 2.0 * US);
    let centre = AtomParams::default();
    let mut sum = 0.0;
    for k in 0..CYCLE {
        let free = AtomParams::detuned(2.0 * PI * k as f64 / CYCLE as f64 / gap);
        let mut s = TwoLevelState::GROUND;
        s = propagate_segment(s, DriveSegment::with_area(pulse, phi_d), centre)?;
        s = propagate_segment(s, DriveSegment::free(gap), free)?;
        s = propagate_segment(s, DriveSegment::with_area(pulse, phi_r), centre)?;
        s = propagate_segment(s, DriveSegment::free(gap), free)?;
        sum += s.im_rho12;
    }
    Ok(sum / CYCLE as f64)
}

fn two_pulse_law() -> Result<(bool, String)> {
    let areas_d = [PI / 10.0, PI / 4.0, PI / 2.0, 0.7 * PI];
    let areas_r = [PI / 4.0, PI / 2.0, PI, 1.3 * PI, 1.75 * PI];
    let mut worst = 0.0f64;
    for &d in &areas_d {
        for &r in &areas_r {
            let expected = 0.5 * d.sin() * (0.5 * r).sin().powi(2);
            let got = single_atom_echo(d, r)?;
            worst = worst.max(((got - expected) / expected).abs());
        }
    }
    Ok((
        worst < 1e-6,
        format!("max relative error {worst:.2e} over 20 area pairs"),
    ))
}

fn determinism() -> Result<(bool, String)> {
    let spec = presets::fig3(1.0);
    let render = |threads: usize| -> Result<Vec<u8>> {
        let run = with_workers(threads, || execute(&spec, EchoReadout::Analytic))??;
        let report = run.report.as_ref().expect("echo run");
        let mut bytes = render_csv(&Table::Timeseries(&run.result));
        bytes.extend(render_csv(&Table::Profile {
            spatial: &run.spatial,
            report,
        }));
        Ok(bytes)
    };
    let one = render(1)?;
    let mut same = true;
    for threads in [2, 8] {
        same &= render(threads)? == one;
    }
    Ok((same, format!("1/2/8 workers, {} bytes compared", one.len())))
}

/// The round-trip corpus, embedded so `selftest` needs no files on disk.
pub const CORPUS: [(&str, &str); 20] = [
    ("01_minimal", include_str!("../corpus/01_minimal.cfg")),
    ("02_two_pulse", include_str!("../corpus/02_two_pulse.cfg")),
    ("03_drpe", include_str!("../corpus/03_drpe.cfg")),
    ("04_rabi", include_str!("../corpus/04_rabi.cfg")),
    ("05_simulation", include_str!("../corpus/05_simulation.cfg")),
    ("06_spectral", include_str!("../corpus/06_spectral.cfg")),
    ("07_uniform", include_str!("../corpus/07_uniform.cfg")),
    ("08_linear", include_str!("../corpus/08_linear.cfg")),
    ("09_sweep", include_str!("../corpus/09_sweep.cfg")),
    (
        "10_sweep_single",
        include_str!("../corpus/10_sweep_single.cfg"),
    ),
    ("11_phase", include_str!("../corpus/11_phase.cfg")),
    ("12_exponents", include_str!("../corpus/12_exponents.cfg")),
    ("13_comments", include_str!("../corpus/13_comments.cfg")),
    ("14_crlf", include_str!("../corpus/14_crlf.cfg")),
    ("15_adjacent", include_str!("../corpus/15_adjacent.cfg")),
    (
        "16_long_pulses",
        include_str!("../corpus/16_long_pulses.cfg"),
    ),
    (
        "17_many_pulses",
        include_str!("../corpus/17_many_pulses.cfg"),
    ),
    ("18_large_area", include_str!("../corpus/18_large_area.cfg")),
    (
        "19_section_order",
        include_str!("../corpus/19_section_order.cfg"),
    ),
    (
        "20_named_sweep",
        include_str!("../corpus/20_named_sweep.cfg"),
    ),
];

fn round_trip() -> Result<(bool, String)> {
    let mut failures = Vec::new();
    for (name, text) in CORPUS {
        let ok = match parse_config(text) {
            Ok(spec) => {
                let canonical = spec.to_config_text();
                match parse_config(&canonical) {
                    Ok(again) => again == spec && again.to_config_text() == canonical,
                    Err(_) => false,
                }
            }
            Err(_) => false,
        };
        if !ok {
            failures.push(name);
        }
    }
    Ok((
        failures.is_empty(),
        format!("{} files, failures: {:?}", CORPUS.len(), failures),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_echo_sign_and_size() {
        let e = single_atom_echo(FRAC_PI_2, PI).unwrap();
        assert!((e - 0.5).abs() < 1e-9, "{e}");
    }

    #[test]
    fn corpus_round_trips() {
        let (ok, detail) = round_trip().unwrap();
        assert!(ok, "{detail}");
    }
}
