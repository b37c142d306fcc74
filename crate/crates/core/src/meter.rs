// SPDX-License-Identifier: Apache-2.0

//! Meter readout of a weak measurement on a cavity mode.
//!
//! The system couples to the mode either through the Rabi interaction
//! `g A ⊗ N` with pointer `N = a^† + a`, or, in the rotating-wave regime,
//! through `g (e^{i Delta t/2} sigma_+ ⊗ a + h.c.)`. Shifts are first order in
//! `g t`; [`simulate_rabi`] and [`simulate_jc`] provide a joint system-meter
//! ground truth.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::Evolution;
use crate::linalg;
use crate::operator::{sigma_minus, sigma_plus, FockSpace, Operator};
use crate::tolerances;
use crate::weakvalue::WeakMeasurementSetup;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Initial state of the meter mode.
#[derive(Clone, Debug, PartialEq)]
pub enum MeterState {
    Vacuum,
    Number(usize),
    /// Thermal state with mean occupation `n_eq`.
    Thermal { n_eq: f64 },
    Custom(Operator),
}

impl MeterState {
    /// Thermal state at temperature `k_b_t` (in energy units).
    pub fn thermal_at(omega_f: f64, k_b_t: f64, hbar: f64) -> Self {
        MeterState::Thermal {
            n_eq: thermal_occupation(omega_f, k_b_t, hbar),
        }
    }

    pub fn density(&self, space: &FockSpace) -> Result<Operator> {
        match self {
            MeterState::Vacuum => space.number_state(0),
            MeterState::Number(n) => space.number_state(*n),
            MeterState::Thermal { n_eq } => space.thermal_state(*n_eq),
            MeterState::Custom(rho) => {
                if rho.dim() != space.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: space.dim(),
                        found: rho.dim(),
                    });
                }
                rho.check_density(tolerances::DENSITY)?;
                Ok(rho.clone())
            }
        }
    }

    /// Mean occupation for states diagonal in the number basis.
    pub fn occupation(&self) -> Option<f64> {
        match self {
            MeterState::Vacuum => Some(0.0),
            MeterState::Number(n) => Some(*n as f64),
            MeterState::Thermal { n_eq } => Some(*n_eq),
            MeterState::Custom(_) => None,
        }
    }
}

/// `n_eq = 1/(e^{hbar w / k_B T} - 1)`, so that `2 n_eq + 1 = coth(hbar w / 2 k_B T)`.
pub fn thermal_occupation(omega_f: f64, k_b_t: f64, hbar: f64) -> f64 {
    if k_b_t <= 0.0 {
        return 0.0;
    }
    1.0 / (hbar * omega_f / k_b_t).exp_m1()
}

/// Initial-state averages entering the shift formulas and their inversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterAverages {
    /// `<[Q_I(t+tau), N_I(t/2)]>_0`.
    pub cq: C64,
    /// `<[P_I(t+tau), N_I(t/2)]>_0`.
    pub cp: C64,
    /// `<{Q_I(t+tau), N_I(t/2)}>_0`.
    pub acq: C64,
    /// `<{P_I(t+tau), N_I(t/2)}>_0`.
    pub acp: C64,
    pub n0: f64,
    pub q0: f64,
    pub p0: f64,
}

impl MeterAverages {
    /// Closed forms for states diagonal in the number basis with mean occupation `n`.
    pub fn diagonal_state(space: &FockSpace, n: f64, t: f64, tau: f64) -> Self {
        let phi = space.omega_f * (t / 2.0 + tau);
        let (s, sp) = (space.q_scale(), space.p_scale());
        let k = 2.0 * n + 1.0;
        Self {
            cq: C64::new(0.0, -2.0 * s * phi.sin()),
            cp: C64::new(0.0, -2.0 * sp * phi.cos()),
            acq: C64::new(2.0 * s * phi.cos() * k, 0.0),
            acp: C64::new(-2.0 * sp * phi.sin() * k, 0.0),
            n0: 0.0,
            q0: 0.0,
            p0: 0.0,
        }
    }
}

/// Shifts of both quadratures for one weak measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub q_shift: f64,
    pub p_shift: f64,
    pub g: f64,
    pub t: f64,
    pub tau: f64,
    pub omega_f: f64,
    pub delta: f64,
    pub weak_values: Vec<C64>,
}

fn real_part(z: C64, scale: f64, what: &str) -> f64 {
    if z.im.abs() > tolerances::IMAGINARY_RESIDUE * scale.max(1.0) {
        log::warn!("{what}: discarding imaginary part {:e}", z.im);
    }
    z.re
}

/// Meter average of `L` after the weak measurement, including the
/// normalisation denominator:
/// `[<L>_0 - i g t Re A <[L,N]>_0 + g t Im A <{L,N}>_0] / [1 + 2 g t Im A <N>_0]`.
pub fn shift_general(l_i: &Operator, n_i: &Operator, mu0: &Operator, wv: C64, g: f64, t: f64) -> Result<f64> {
    for op in [n_i, mu0] {
        if op.dim() != l_i.dim() {
            return Err(Error::DimensionMismatch {
                expected: l_i.dim(),
                found: op.dim(),
            });
        }
    }
    let gt = g * t;
    let l0 = l_i.expectation(mu0);
    let comm = l_i.commutator(n_i).expectation(mu0);
    let anti = l_i.anticommutator(n_i).expectation(mu0);
    let n0 = n_i.expectation(mu0);
    let num = l0 - I * comm * (gt * wv.re) + anti * (gt * wv.im);
    let den = C64::new(1.0, 0.0) + n0 * (2.0 * gt * wv.im);
    Ok(real_part(num / den, l_i.max_abs(), "shift_general"))
}

fn report(q: f64, p: f64, g: f64, t: f64, tau: f64, omega_f: f64, delta: f64, wvs: Vec<C64>) -> ShiftReport {
    ShiftReport {
        q_shift: q,
        p_shift: p,
        g,
        t,
        tau,
        omega_f,
        delta,
        weak_values: wvs,
    }
}

/// Rabi-model quadrature shifts for a number state `|n>` (or any state diagonal
/// in the number basis with mean occupation `n`):
/// `Q = -2gt s [sin(phi) Re A - (2n+1) cos(phi) Im A]`,
/// `P = -2gt s' [cos(phi) Re A + (2n+1) sin(phi) Im A]`, `phi = w (t/2 + tau)`.
pub fn rabi_shifts_number_state(n: f64, wv: C64, g: f64, t: f64, tau: f64, space: &FockSpace) -> ShiftReport {
    let gt = g * t;
    let phi = space.omega_f * (t / 2.0 + tau);
    let k = 2.0 * n + 1.0;
    let q = -2.0 * gt * space.q_scale() * (phi.sin() * wv.re - k * phi.cos() * wv.im);
    let p = -2.0 * gt * space.p_scale() * (phi.cos() * wv.re + k * phi.sin() * wv.im);
    report(q, p, g, t, tau, space.omega_f, 0.0, vec![wv])
}

/// Thermal meter: the number-state shifts with `n` replaced by `n_eq`.
pub fn rabi_shifts_thermal(n_eq: f64, wv: C64, g: f64, t: f64, tau: f64, space: &FockSpace) -> ShiftReport {
    rabi_shifts_number_state(n_eq, wv, g, t, tau, space)
}

/// Vacuum shifts in polar form:
/// `Q = 2gt s |A| sin(phi_w - phi)`, `P = -2gt s' |A| cos(phi_w - phi)`.
pub fn rabi_shifts_vacuum_polar(modulus: f64, phase: f64, g: f64, t: f64, tau: f64, space: &FockSpace) -> ShiftReport {
    let gt = g * t;
    let phi = space.omega_f * (t / 2.0 + tau);
    let q = 2.0 * gt * space.q_scale() * modulus * (phase - phi).sin();
    let p = -2.0 * gt * space.p_scale() * modulus * (phase - phi).cos();
    report(q, p, g, t, tau, space.omega_f, 0.0, vec![C64::from_polar(modulus, phase)])
}

/// Commutator and anticommutator averages of the quadratures with the pointer,
/// plus the bare averages, evaluated numerically in the truncated space.
pub fn commutator_averages(space: &FockSpace, state: &MeterState, t: f64, tau: f64) -> Result<MeterAverages> {
    if space.n_max < 2 {
        log::warn!("n_max = {} truncates the a^2 terms of the anticommutators", space.n_max);
    }
    let mu0 = state.density(space)?;
    let n_i = space.pointer_interaction(t / 2.0);
    let q_i = space.q_interaction(t + tau);
    let p_i = space.p_interaction(t + tau);
    Ok(MeterAverages {
        cq: q_i.commutator(&n_i).expectation(&mu0),
        cp: p_i.commutator(&n_i).expectation(&mu0),
        acq: q_i.anticommutator(&n_i).expectation(&mu0),
        acp: p_i.anticommutator(&n_i).expectation(&mu0),
        n0: n_i.expectation(&mu0).re,
        q0: q_i.expectation(&mu0).re,
        p0: p_i.expectation(&mu0).re,
    })
}

/// Rabi shifts for an arbitrary meter state from its averages.
pub fn rabi_shifts_from_averages(avg: &MeterAverages, wv: C64, g: f64, t: f64) -> (f64, f64) {
    let gt = g * t;
    let den = 1.0 + 2.0 * gt * wv.im * avg.n0;
    let q = C64::new(avg.q0, 0.0) - I * avg.cq * (gt * wv.re) + avg.acq * (gt * wv.im);
    let p = C64::new(avg.p0, 0.0) - I * avg.cp * (gt * wv.re) + avg.acp * (gt * wv.im);
    (q.re / den, p.re / den)
}

/// Rotating-wave shifts driven by the `sigma_+` and `sigma_-` weak values for a
/// state diagonal in the number basis (`<a^† a> = n`, `<a a^†> = n + 1`):
/// `Q = 2gt s Im[e^{i chi} s+ n + e^{-i chi} s- (n+1)]`,
/// `P = 2gt s' Re[e^{i chi} s+ n - e^{-i chi} s- (n+1)]`, `chi = Delta t/2 + w (t + tau)`.
#[allow(clippy::too_many_arguments)]
pub fn jc_shifts(wv_plus: C64, wv_minus: C64, n: f64, g: f64, t: f64, tau: f64, space: &FockSpace, delta: f64) -> ShiftReport {
    if (delta * t).abs() > tolerances::DETUNING_GUARD {
        log::warn!("Delta*t = {} outside the short-interaction regime", delta * t);
    }
    let gt = g * t;
    let chi = delta * t / 2.0 + space.omega_f * (t + tau);
    let e = C64::from_polar(1.0, chi);
    let plus = e * wv_plus * n;
    let minus = e.conj() * wv_minus * (n + 1.0);
    let q = 2.0 * gt * space.q_scale() * (plus + minus).im;
    let p = 2.0 * gt * space.p_scale() * (plus - minus).re;
    report(q, p, g, t, tau, space.omega_f, delta, vec![wv_plus, wv_minus])
}

/// Vacuum rotating-wave shifts, where only `sigma_-` contributes:
/// `Q = 2gt s |s-| sin(phi_w - chi)`, `P = -2gt s' |s-| cos(phi_w - chi)`.
pub fn jc_shifts_vacuum_polar(wv_minus: C64, g: f64, t: f64, tau: f64, space: &FockSpace, delta: f64) -> ShiftReport {
    let gt = g * t;
    let chi = delta * t / 2.0 + space.omega_f * (t + tau);
    let (m, phase) = (wv_minus.norm(), wv_minus.arg());
    let q = 2.0 * gt * space.q_scale() * m * (phase - chi).sin();
    let p = -2.0 * gt * space.p_scale() * m * (phase - chi).cos();
    report(q, p, g, t, tau, space.omega_f, delta, vec![ZERO, wv_minus])
}

/// Weak value from measured quadrature averages `q_f`, `p_f`, inverting the
/// two first-order shift relations for an arbitrary meter state.
pub fn invert_weak_value(q_f: f64, p_f: f64, avg: &MeterAverages, g: f64, t: f64) -> Result<C64> {
    let gt = g * t;
    let n0 = C64::new(avg.n0, 0.0);
    let (q0, p0) = (avg.q0, avg.p0);
    let den = avg.acq * avg.cp - avg.acp * avg.cq + n0 * 2.0 * (avg.cq * p_f - avg.cp * q_f);
    if gt == 0.0 || !(den.norm() >= tolerances::INVERSION_SINGULAR) {
        return Err(Error::SingularInversion(den.norm()));
    }
    let re_num = avg.acq * (p_f - p0) - avg.acp * (q_f - q0) + n0 * 2.0 * (p0 * q_f - p_f * q0);
    let im_num = avg.cq * (p_f - p0) - avg.cp * (q_f - q0);
    let re = I / gt * re_num / den;
    let im = -im_num / den / gt;
    let scale = re.norm().max(im.norm());
    Ok(C64::new(
        real_part(re, scale, "inverted real part"),
        real_part(im, scale, "inverted imaginary part"),
    ))
}

// ---------------------------------------------------------------------------
// Joint system-meter simulation
// ---------------------------------------------------------------------------

/// How the weak interaction is applied in the joint simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interaction {
    /// `U = exp(-i g t V)` applied exactly.
    Exact,
    /// `rho + i g t [rho, V]`, the first-order joint state.
    FirstOrder,
}

/// Quadrature averages and post-selection probability of a joint simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointReadout {
    pub q: f64,
    pub p: f64,
    pub postselection_prob: f64,
}

/// Dual of the channel applied to the post-selection: `F` with
/// `Tr[sigma_f e^{D tau}(X)] = Tr[F X]` for every `X`.
fn dual_postselection(ev: &dyn Evolution, sigma_f: &Operator, tau: f64) -> Result<Operator> {
    let d = ev.dim();
    let mut f = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut e = DMatrix::zeros(d, d);
            e[(i, j)] = C64::new(1.0, 0.0);
            let out = ev.evolve(&Operator::from_matrix_unchecked(e), tau)?;
            // Tr[F |i><j|] = F[j, i]
            f[(j, i)] = sigma_f.expectation(&out);
        }
    }
    Ok(Operator::from_matrix_unchecked(f))
}

/// Evolves `sigma_i ⊗ mu0` under `generator` (system ⊗ meter, system index slow),
/// dissipates the system, post-selects and reads both quadratures.
fn joint_readout(
    sigma_i: &Operator,
    sigma_f: &Operator,
    ev: &dyn Evolution,
    mu0: &Operator,
    generator: &Operator,
    gt: f64,
    q_i: &Operator,
    p_i: &Operator,
    tau: f64,
    mode: Interaction,
) -> Result<JointReadout> {
    let rho0 = sigma_i.kron(mu0);
    let rho = match mode {
        Interaction::Exact => {
            let u = Operator::from_matrix_unchecked(linalg::expm(&(generator.matrix() * C64::new(0.0, -gt)))?);
            &(&u * &rho0) * &u.dagger()
        }
        Interaction::FirstOrder => &rho0 + &(&rho0.commutator(generator) * C64::new(0.0, gt)),
    };
    let f = dual_postselection(ev, sigma_f, tau)?;
    let (ds, dm) = (sigma_i.dim(), mu0.dim());
    let mut mu = DMatrix::<C64>::zeros(dm, dm);
    for m in 0..dm {
        for mp in 0..dm {
            let mut acc = ZERO;
            for s in 0..ds {
                for sp in 0..ds {
                    acc += f.get(sp, s) * rho.get(s * dm + m, sp * dm + mp);
                }
            }
            mu[(m, mp)] = acc;
        }
    }
    let mu = Operator::from_matrix_unchecked(mu);
    let prob = mu.trace();
    if !(prob.norm() >= tolerances::POSTSELECTION_VANISHES) {
        return Err(Error::PostselectionVanishes(prob.norm()));
    }
    Ok(JointReadout {
        q: (q_i.expectation(&mu) / prob).re,
        p: (p_i.expectation(&mu) / prob).re,
        postselection_prob: prob.re,
    })
}

/// Rabi weak measurement simulated on the joint space: interaction
/// `g t A ⊗ N_I(t/2)`, system dissipation for `tau`, post-selection, and the
/// quadratures `Q_I(t + tau)`, `P_I(t + tau)`.
pub fn simulate_rabi(
    setup: &WeakMeasurementSetup,
    ev: &dyn Evolution,
    state: &MeterState,
    space: &FockSpace,
    tau: f64,
    mode: Interaction,
) -> Result<JointReadout> {
    let mu0 = state.density(space)?;
    let n_i = space.pointer_interaction(setup.t() / 2.0);
    let generator = setup.observable().kron(&n_i);
    joint_readout(
        setup.sigma_i(),
        setup.sigma_fi(),
        ev,
        &mu0,
        &generator,
        setup.gt(),
        &space.q_interaction(setup.t() + tau),
        &space.p_interaction(setup.t() + tau),
        tau,
        mode,
    )
}

/// Rotating-wave weak measurement on the joint space with interaction
/// `g t (e^{i Delta t/2} sigma_+ ⊗ a + e^{-i Delta t/2} sigma_- ⊗ a^†)`.
/// The setup's observable is ignored; its states and coupling are used.
pub fn simulate_jc(
    setup: &WeakMeasurementSetup,
    ev: &dyn Evolution,
    state: &MeterState,
    space: &FockSpace,
    tau: f64,
    delta: f64,
    mode: Interaction,
) -> Result<JointReadout> {
    if setup.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: setup.dim(),
        });
    }
    let mu0 = state.density(space)?;
    let (a, ad) = space.ladder();
    let ph = C64::from_polar(1.0, delta * setup.t() / 2.0);
    let generator = &(&sigma_plus().kron(&a) * ph) + &(&sigma_minus().kron(&ad) * ph.conj());
    joint_readout(
        setup.sigma_i(),
        setup.sigma_fi(),
        ev,
        &mu0,
        &generator,
        setup.gt(),
        &space.q_interaction(setup.t() + tau),
        &space.p_interaction(setup.t() + tau),
        tau,
        mode,
    )
}
