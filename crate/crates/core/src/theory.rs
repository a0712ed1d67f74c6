//! Closed-form echo laws and the fitting utilities used to compare them
//! with simulation.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{invalid, Error, Result};

/// Emissive windows `2n < Φ/π < 2n + α` and `2(n+1) − α < Φ/π < 2(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissiveWindowParams {
    pub alpha: f64,
    /// Highest window index `n` considered.
    pub n_max: u32,
}

impl Default for EmissiveWindowParams {
    fn default() -> Self {
        EmissiveWindowParams {
            alpha: 5.0 / 8.0,
            n_max: 4,
        }
    }
}

/// Whether a rephasing area `phi_r` (radians) leaves an emissive second
/// echo. Boundaries are excluded.
pub fn emissive_window(phi_r: f64, params: EmissiveWindowParams) -> bool {
    if !(phi_r >= 0.0 && phi_r.is_finite()) {
        return false;
    }
    let x = phi_r / PI;
    let n = (x / 2.0).floor();
    if n > params.n_max as f64 {
        return false;
    }
    let r = x - 2.0 * n;
    (r > 0.0 && r < params.alpha) || (r > 2.0 - params.alpha && r < 2.0)
}

/// First-echo amplitude law `sin²(Φ/2) / 2`.
pub fn predict_e1(phi_r: f64) -> f64 {
    0.5 * (0.5 * phi_r).sin().powi(2)
}

/// Second-echo amplitude law `−√2 sin²(Φ/2) (0.3 − cos²(Φ/2))`; positive
/// values are emissive.
pub fn predict_e2(phi_r: f64) -> f64 {
    let (s, c) = (0.5 * phi_r).sin_cos();
    -SQRT_2 * s * s * (0.3 - c * c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub exponent: f64,
    pub scale: f64,
    pub rms_residual: f64,
}

pub const FIT_K_MIN: f64 = 0.5;
pub const FIT_K_MAX: f64 = 4.0;
pub const FIT_K_STEP: f64 = 0.01;

fn signed_pow(x: f64, k: f64) -> f64 {
    x.signum() * x.abs().powf(k)
}

/// Least-squares fit of `scale · sin^k((π/2) · a · G_j)` to a spatial echo
/// profile. The profile is normalized by its largest-magnitude entry; `k`
/// is scanned over `[0.5, 4]` in steps of 0.01 with the scale solved in
/// closed form at each step.
pub fn fit_sin_power(g: &[f64], profile: &[f64], arg_scale: f64) -> Result<FitResult> {
    if g.len() != profile.len() {
        return Err(invalid(format!(
            "amplitude and profile lengths differ ({} vs {})",
            g.len(),
            profile.len()
        )));
    }
    if g.len() < 5 {
        return Err(invalid(format!("need at least 5 points, got {}", g.len())));
    }
    let peak = profile
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0);
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::FitUndefined("profile is identically zero".into()));
    }
    let y: Vec<f64> = profile.iter().map(|v| v / peak).collect();
    let base: Vec<f64> = g
        .iter()
        .map(|gj| (FRAC_PI_2 * arg_scale * gj).sin())
        .collect();

    let steps = ((FIT_K_MAX - FIT_K_MIN) / FIT_K_STEP).round() as usize;
    let mut best: Option<FitResult> = None;
    for i in 0..=steps {
        let k = FIT_K_MIN + i as f64 * FIT_K_STEP;
        let model: Vec<f64> = base.iter().map(|&b| signed_pow(b, k)).collect();
        let mm: f64 = model.iter().map(|m| m * m).sum();
        if mm == 0.0 {
            continue;
        }
        let my: f64 = model.iter().zip(&y).map(|(m, v)| m * v).sum();
        let scale = my / mm;
        let sse: f64 = model
            .iter()
            .zip(&y)
            .map(|(m, v)| (v - scale * m).powi(2))
            .sum();
        let rms = (sse / y.len() as f64).sqrt();
        if best.is_none_or(|b| rms < b.rms_residual) {
            best = Some(FitResult {
                exponent: k,
                scale,
                rms_residual: rms,
            });
        }
    }
    best.ok_or_else(|| Error::FitUndefined("model vanishes for every exponent".into()))
}

const CROSSING_SCAN_INTERVALS: usize = 4096;

/// Sign changes of `f` on `[0, 2π]`, refined by bisection to within `tol`.
pub fn find_zero_crossings<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<Vec<f64>> {
    find_zero_crossings_in(f, 0.0, 2.0 * PI, tol)
}

/// Sign changes of `f` strictly inside `[lo, hi]`. Exact zeros at the
/// interval ends are not crossings.
pub fn find_zero_crossings_in<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !(hi > lo) {
        return Err(invalid(format!("empty interval [{lo}, {hi}]")));
    }
    let h = (hi - lo) / CROSSING_SCAN_INTERVALS as f64;
    let mut out = Vec::new();
    // last point with a non-zero value
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=CROSSING_SCAN_INTERVALS {
        let x = if i == CROSSING_SCAN_INTERVALS {
            hi
        } else {
            lo + i as f64 * h
        };
        let y = f(x);
        if y == 0.0 || !y.is_finite() {
            continue;
        }
        if let Some((xp, yp)) = prev {
            if yp.signum() != y.signum() {
                let (mut a, mut b) = (xp, x);
                let sa = yp.signum();
                while b - a > tol {
                    let m = 0.5 * (a + b);
                    let fm = f(m);
                    if fm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if fm.signum() == sa {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        prev = Some((x, y));
    }
    Ok(out)
}

/// Sign changes of sampled data, located by linear interpolation.
pub fn sampled_zero_crossings(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for (&x, &y) in xs.iter().zip(ys) {
        if y == 0.0 {
            continue;
        }
        if let Some((xp, yp)) = prev {
            if yp.signum() != y.signum() {
                out.push(xp + (x - xp) * yp / (yp - y));
            }
        }
        prev = Some((x, y));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn win(phi: f64) -> bool {
        emissive_window(phi, EmissiveWindowParams::default())
    }

    #[test]
    fn window_examples() {
        assert!(win(PI / 4.0));
        assert!(!win(PI));
        assert!(win(1.5 * PI));
        assert!(!win(5.0 * PI / 8.0));
        assert!(!win(0.0));
        assert!(!win(2.0 * PI));
        assert!(win(2.1 * PI));
        // beyond n_max no window is reported
        assert!(!win(10.1 * PI));
    }

    #[test]
    fn e1_examples() {
        assert_abs_diff_eq!(predict_e1(PI), 0.5, epsilon = 1e-15);
        assert_eq!(predict_e1(0.0), 0.0);
        assert_abs_diff_eq!(predict_e1(PI / 2.0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn e2_examples() {
        assert_abs_diff_eq!(predict_e2(PI), -SQRT_2 * 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(predict_e2(PI), -0.424, epsilon = 5e-4);
        assert_eq!(predict_e2(0.0), 0.0);
        let root = 2.0 * 0.3f64.sqrt().acos();
        assert_abs_diff_eq!(predict_e2(root), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(root / PI, 0.631, epsilon = 5e-4);
    }

    #[test]
    fn e2_crossings_match_alpha() {
        let xs = find_zero_crossings(predict_e2, 1e-12).unwrap();
        assert_eq!(xs.len(), 2, "{xs:?}");
        let root = 2.0 * 0.3f64.sqrt().acos();
        assert_abs_diff_eq!(xs[0], root, epsilon = 1e-11);
        assert_abs_diff_eq!(xs[1], 2.0 * PI - root, epsilon = 1e-11);
        assert!((xs[0] / PI - 0.625).abs() < 0.01);
        assert!((xs[1] / PI - 1.375).abs() < 0.01);
    }

    #[test]
    fn constant_has_no_crossings() {
        assert!(find_zero_crossings(|_| 1.0, 1e-9).unwrap().is_empty());
        assert!(find_zero_crossings(|_| 1.0, 0.0).is_err());
    }

    #[test]
    fn sampled_crossings_interpolate() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, -1.0, -1.0, 3.0];
        assert_eq!(sampled_zero_crossings(&xs, &ys), vec![0.5, 2.25]);
    }

    fn gaussian_amplitudes() -> Vec<f64> {
        let z = 2.84;
        (0..41)
            .map(|j| {
                let x = -z + 2.0 * z * j as f64 / 40.0;
                (-0.5 * x * x).exp()
            })
            .collect()
    }

    #[test]
    fn self_fit_recovers_exponent() {
        let g = gaussian_amplitudes();
        for k in [1.0, 2.0, 3.0] {
            let profile: Vec<f64> = g
                .iter()
                .map(|x| 0.37 * (FRAC_PI_2 * x).sin().powf(k))
                .collect();
            let fit = fit_sin_power(&g, &profile, 1.0).unwrap();
            assert_abs_diff_eq!(fit.exponent, k, epsilon = 0.02);
            assert!(fit.rms_residual < 1e-6, "{fit:?}");
            assert_abs_diff_eq!(fit.scale, 1.0, epsilon = 1e-6);
        }
        // negative profiles normalise by their extreme entry
        let neg: Vec<f64> = g.iter().map(|x| -(FRAC_PI_2 * x).sin().powi(2)).collect();
        assert_abs_diff_eq!(
            fit_sin_power(&g, &neg, 1.0).unwrap().exponent,
            2.0,
            epsilon = 0.02
        );
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let g = gaussian_amplitudes();
        assert!(matches!(
            fit_sin_power(&g, &vec![0.0; 41], 1.0),
            Err(Error::FitUndefined(_))
        ));
        assert!(fit_sin_power(&g[..4], &g[..4], 1.0).is_err());
        assert!(fit_sin_power(&g, &g[..40], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn window_agrees_with_e2_sign(phi in 0.0..2.0 * PI) {
            let root = 2.0 * 0.3f64.sqrt().acos();
            let near = [root, 2.0 * PI - root]
                .iter()
                .any(|c| (phi - c).abs() < 0.01 * PI);
            if !near {
                prop_assert_eq!(win(phi), predict_e2(phi) > 0.0);
            }
        }

        #[test]
        fn laws_are_periodic(phi in 0.0..6.0 * PI) {
            prop_assert!((predict_e1(phi + 2.0 * PI) - predict_e1(phi)).abs() < 1e-12);
            prop_assert!((predict_e2(phi + 2.0 * PI) - predict_e2(phi)).abs() < 1e-12);
            let x = phi / PI;
            let frac = x - 2.0 * (x / 2.0).floor();
            let off_boundary = [0.0, 0.625, 1.375, 2.0].iter().all(|b| (frac - b).abs() > 1e-9);
            if off_boundary {
                prop_assert_eq!(win(phi + 2.0 * PI), win(phi));
            }
        }

        #[test]
        fn e2_is_mirror_symmetric(phi in 0.0..2.0 * PI) {
            prop_assert!((predict_e2(2.0 * PI - phi) - predict_e2(phi)).abs() < 1e-12);
        }
    }
}
