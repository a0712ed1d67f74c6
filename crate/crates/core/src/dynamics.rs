//! Single-atom two-level dynamics.
//!
//! The production propagator rotates the Bloch vector
//! `r = (2 Re ρ12, 2 Im ρ12, ρ22 − ρ11)` about the drive axis
//! `A = (−Ω cos φ, −Ω sin φ, Δ)` with `dr/dt = A × r`. A resonant phase-0
//! pulse from the ground state therefore drives `Im ρ12` negative (the data
//! coherence is absorptive), a first echo comes out emissive and a uniform
//! double rephasing returns an absorptive second echo. Free evolution
//! advances `ρ12` by `exp(iΔt)`.
//!
//! With a non-zero upper-state decay the closed-form rotation no longer
//! applies and the segment is integrated numerically with sub-steps of at
//! most one nanosecond. [`rk4_oracle`] integrates the density-matrix
//! equation in its commutator form and serves as an independent check.

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Upper bound on the integration sub-step used when decay is enabled.
pub const DECAY_SUBSTEP: f64 = 1e-9;

/// Density-matrix elements of one atom group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelState {
    pub rho11: f64,
    pub rho22: f64,
    pub re_rho12: f64,
    pub im_rho12: f64,
}

impl TwoLevelState {
    /// All population in `|1⟩`, no coherence.
    pub const GROUND: TwoLevelState = TwoLevelState {
        rho11: 1.0,
        rho22: 0.0,
        re_rho12: 0.0,
        im_rho12: 0.0,
    };

    pub fn rho12(&self) -> Complex64 {
        Complex64::new(self.re_rho12, self.im_rho12)
    }

    /// `ρ11² + ρ22² + 2|ρ12|²`; equal to one for a pure state.
    pub fn purity(&self) -> f64 {
        self.rho11 * self.rho11
            + self.rho22 * self.rho22
            + 2.0 * (self.re_rho12 * self.re_rho12 + self.im_rho12 * self.im_rho12)
    }

    pub fn bloch(&self) -> [f64; 3] {
        [
            2.0 * self.re_rho12,
            2.0 * self.im_rho12,
            self.rho22 - self.rho11,
        ]
    }

    pub fn from_bloch(r: [f64; 3]) -> Self {
        TwoLevelState {
            rho11: 0.5 * (1.0 - r[2]),
            rho22: 0.5 * (1.0 + r[2]),
            re_rho12: 0.5 * r[0],
            im_rho12: 0.5 * r[1],
        }
    }

    fn check_finite(&self) -> Result<()> {
        let fields = [self.rho11, self.rho22, self.re_rho12, self.im_rho12];
        if fields.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(invalid(format!("non-finite state {self:?}")))
        }
    }
}

impl Default for TwoLevelState {
    fn default() -> Self {
        Self::GROUND
    }
}

/// A square drive segment. `rabi_frequency` is angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSegment {
    pub duration: f64,
    pub rabi_frequency: f64,
    pub phase: f64,
}

impl DriveSegment {
    pub fn new(duration: f64, rabi_frequency: f64) -> Self {
        DriveSegment {
            duration,
            rabi_frequency,
            phase: 0.0,
        }
    }

    /// Undriven evolution for `duration` seconds.
    pub fn free(duration: f64) -> Self {
        Self::new(duration, 0.0)
    }

    /// Segment of the given duration whose Rabi frequency produces `area`.
    pub fn with_area(duration: f64, area: f64) -> Self {
        Self::new(duration, area / duration)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn area(&self) -> f64 {
        self.rabi_frequency * self.duration
    }

    fn check(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.rabi_frequency.is_finite() && self.phase.is_finite())
        {
            return Err(invalid(format!("non-finite drive segment {self:?}")));
        }
        if self.duration < 0.0 {
            return Err(invalid(format!("negative duration {}", self.duration)));
        }
        if self.rabi_frequency < 0.0 {
            return Err(invalid(format!(
                "negative Rabi frequency {}",
                self.rabi_frequency
            )));
        }
        Ok(())
    }
}

/// Per-atom medium parameters: detuning (rad/s) and upper-state decay (1/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AtomParams {
    pub detuning: f64,
    pub gamma2: f64,
}

impl AtomParams {
    pub fn detuned(detuning: f64) -> Self {
        AtomParams {
            detuning,
            gamma2: 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.detuning.is_finite() && self.gamma2.is_finite()) {
            return Err(invalid(format!("non-finite atom parameters {self:?}")));
        }
        if self.gamma2 < 0.0 {
            return Err(invalid(format!("negative decay rate {}", self.gamma2)));
        }
        Ok(())
    }
}

fn drive_axis(seg: &DriveSegment, atom: &AtomParams) -> [f64; 3] {
    let (s, c) = seg.phase.sin_cos();
    [
        -seg.rabi_frequency * c,
        -seg.rabi_frequency * s,
        atom.detuning,
    ]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Rotates `r` about `axis` by `|axis| * t` (Rodrigues).
fn rotate(r: [f64; 3], axis: [f64; 3], t: f64) -> [f64; 3] {
    let rate = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if rate == 0.0 || t == 0.0 {
        return r;
    }
    let n = [axis[0] / rate, axis[1] / rate, axis[2] / rate];
    let (s, c) = (rate * t).sin_cos();
    let n_cross_r = cross(n, r);
    let n_dot_r = n[0] * r[0] + n[1] * r[1] + n[2] * r[2];
    let k = n_dot_r * (1.0 - c);
    [
        r[0] * c + n_cross_r[0] * s + n[0] * k,
        r[1] * c + n_cross_r[1] * s + n[1] * k,
        r[2] * c + n_cross_r[2] * s + n[2] * k,
    ]
}

fn bloch_rhs(r: [f64; 3], axis: [f64; 3], gamma: f64) -> [f64; 3] {
    let d = cross(axis, r);
    [
        d[0] - 0.5 * gamma * r[0],
        d[1] - 0.5 * gamma * r[1],
        d[2] - gamma * (r[2] + 1.0),
    ]
}

fn bloch_rk4(mut r: [f64; 3], axis: [f64; 3], gamma: f64, duration: f64) -> [f64; 3] {
    let steps = (duration / DECAY_SUBSTEP).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let add =
        |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    for _ in 0..steps {
        let k1 = bloch_rhs(r, axis, gamma);
        let k2 = bloch_rhs(add(r, k1, 0.5 * h), axis, gamma);
        let k3 = bloch_rhs(add(r, k2, 0.5 * h), axis, gamma);
        let k4 = bloch_rhs(add(r, k3, h), axis, gamma);
        for i in 0..3 {
            r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    r
}

/// Evolves `state` through one square segment.
///
/// Without decay this is the exact generalized-Rabi rotation through the
/// angle `√(Ω² + Δ²)·T`, so the result does not depend on how a time span is
/// split into segments.
pub fn propagate_segment(
    state: TwoLevelState,
    seg: DriveSegment,
    atom: AtomParams,
) -> Result<TwoLevelState> {
    state.check_finite()?;
    seg.check()?;
    atom.check()?;
    Ok(propagate_unchecked(state, &seg, &atom))
}

pub(crate) fn propagate_unchecked(
    state: TwoLevelState,
    seg: &DriveSegment,
    atom: &AtomParams,
) -> TwoLevelState {
    if seg.duration == 0.0 {
        return state;
    }
    let axis = drive_axis(seg, atom);
    let r = if atom.gamma2 == 0.0 {
        rotate(state.bloch(), axis, seg.duration)
    } else {
        bloch_rk4(state.bloch(), axis, atom.gamma2, seg.duration)
    };
    TwoLevelState::from_bloch(r)
}

type Matrix2 = [[Complex64; 2]; 2];

fn density_matrix(s: &TwoLevelState) -> Matrix2 {
    let rho12 = s.rho12();
    [
        [Complex64::new(s.rho11, 0.0), rho12],
        [rho12.conj(), Complex64::new(s.rho22, 0.0)],
    ]
}

fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `dρ/dt = i[H, ρ] − ½{Γ, ρ} + Γ ρ22 |1⟩⟨1|` with
/// `H = [[0, Ω e^{iφ}/2], [Ω e^{−iφ}/2, −Δ]]` and `Γ = diag(0, γ)`.
fn liouvillian(rho: &Matrix2, h: &Matrix2, gamma: f64) -> Matrix2 {
    let i = Complex64::i();
    let hr = mat_mul(h, rho);
    let rh = mat_mul(rho, h);
    let mut d = [[Complex64::new(0.0, 0.0); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            d[a][b] = i * (hr[a][b] - rh[a][b]);
        }
    }
    // Anticommutator with diag(0, γ): row 2 and column 2 each pick up γ/2.
    d[0][1] -= 0.5 * gamma * rho[0][1];
    d[1][0] -= 0.5 * gamma * rho[1][0];
    d[1][1] -= gamma * rho[1][1];
    d[0][0] += gamma * rho[1][1];
    d
}

/// Classic fourth-order Runge–Kutta integration of the density-matrix
/// equation in commutator form, at a fixed step no larger than `substep`.
pub fn rk4_oracle(
    state: TwoLevelState,
    seg: DriveSegment,
    atom: AtomParams,
    substep: f64,
) -> Result<TwoLevelState> {
    if !(substep > 0.0 && substep.is_finite()) {
        return Err(invalid(format!("substep must be positive, got {substep}")));
    }
    state.check_finite()?;
    seg.check()?;
    atom.check()?;
    if seg.duration == 0.0 {
        return Ok(state);
    }

    let coupling = 0.5 * seg.rabi_frequency * Complex64::from_polar(1.0, seg.phase);
    let h: Matrix2 = [
        [Complex64::new(0.0, 0.0), coupling],
        [coupling.conj(), Complex64::new(-atom.detuning, 0.0)],
    ];
    let steps = (seg.duration / substep).ceil().max(1.0) as usize;
    let dt = seg.duration / steps as f64;
    let axpy = |x: &Matrix2, k: &Matrix2, s: f64| {
        let mut out = *x;
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] += k[a][b] * s;
            }
        }
        out
    };

    let mut rho = density_matrix(&state);
    for _ in 0..steps {
        let k1 = liouvillian(&rho, &h, atom.gamma2);
        let k2 = liouvillian(&axpy(&rho, &k1, 0.5 * dt), &h, atom.gamma2);
        let k3 = liouvillian(&axpy(&rho, &k2, 0.5 * dt), &h, atom.gamma2);
        let k4 = liouvillian(&axpy(&rho, &k3, dt), &h, atom.gamma2);
        for a in 0..2 {
            for b in 0..2 {
                rho[a][b] += (k1[a][b] + k2[a][b] * 2.0 + k3[a][b] * 2.0 + k4[a][b]) * (dt / 6.0);
            }
        }
    }
    Ok(TwoLevelState {
        rho11: rho[0][0].re,
        rho22: rho[1][1].re,
        re_rho12: rho[0][1].re,
        im_rho12: rho[0][1].im,
    })
}
