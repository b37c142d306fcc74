// SPDX-License-Identifier: Apache-2.0

//! Weak values of observables measured before a dissipative stage:
//!
//! `A_w(tau) = Tr[sigma_f e^{D tau}(A sigma_i)] / Tr[sigma_f e^{D tau}(sigma_i)]`.
//!
//! The denominator is the post-selection probability. The post-selected state
//! is held constant in the interaction picture.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lindblad::{AnalyticChannel, Dissipator, Evolution};
use crate::operator::{pauli_dot, Axis, BlochVector, Operator};
use crate::tolerances;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Pre-selection, post-selection, observable and coupling of one weak measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakMeasurementSetup {
    sigma_i: Operator,
    sigma_fi: Operator,
    observable: Operator,
    g: f64,
    t: f64,
}

impl WeakMeasurementSetup {
    /// Validates that both states are densities of the observable's dimension.
    pub fn new(sigma_i: Operator, sigma_fi: Operator, observable: Operator) -> Result<Self> {
        let dim = observable.dim();
        for s in [&sigma_i, &sigma_fi] {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            s.check_density(tolerances::DENSITY)?;
        }
        Ok(Self {
            sigma_i,
            sigma_fi,
            observable,
            g: 0.0,
            t: 0.0,
        })
    }

    /// Setup from pure states given as (unnormalised) kets.
    pub fn from_kets(psi_i: &DVector<C64>, psi_f: &DVector<C64>, observable: Operator) -> Result<Self> {
        Self::new(Operator::pure_state(psi_i)?, Operator::pure_state(psi_f)?, observable)
    }

    pub fn with_coupling(mut self, g: f64, t: f64) -> Result<Self> {
        if !g.is_finite() || !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid coupling g={g}, t={t}")));
        }
        self.g = g;
        self.t = t;
        Ok(self)
    }

    pub fn with_observable(&self, observable: Operator) -> Result<Self> {
        if observable.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: observable.dim(),
            });
        }
        Ok(Self {
            observable,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.observable.dim()
    }

    pub fn sigma_i(&self) -> &Operator {
        &self.sigma_i
    }

    pub fn sigma_fi(&self) -> &Operator {
        &self.sigma_fi
    }

    pub fn observable(&self) -> &Operator {
        &self.observable
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `g t`, the small parameter of the meter shifts.
    pub fn gt(&self) -> f64 {
        self.g * self.t
    }

    /// `Tr[A sigma_i]`.
    pub fn expectation(&self) -> C64 {
        self.observable.expectation(&self.sigma_i)
    }

    /// SHA-256 over the matrices and couplings, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        for op in [&self.sigma_i, &self.sigma_fi, &self.observable] {
            for z in op.matrix().iter() {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
        h.update(self.g.to_le_bytes());
        h.update(self.t.to_le_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Weak value together with its denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakValue {
    pub value: C64,
    /// `Tr[sigma_f e^{D tau}(sigma_i)]`, real for density inputs.
    pub postselection_prob: f64,
}

fn quotient(num: C64, den: C64) -> Result<WeakValue> {
    if !(den.norm() >= tolerances::POSTSELECTION_VANISHES) {
        return Err(Error::PostselectionVanishes(den.norm()));
    }
    Ok(WeakValue {
        value: num / den,
        postselection_prob: den.re,
    })
}

fn numerator_and_denominator(setup: &WeakMeasurementSetup, num_op: &Operator, den_op: &Operator) -> (C64, C64) {
    (
        setup.sigma_fi.expectation(num_op),
        setup.sigma_fi.expectation(den_op),
    )
}

fn check_evolution_dim(setup: &WeakMeasurementSetup, dim: usize) -> Result<()> {
    if dim != setup.dim() {
        return Err(Error::DimensionMismatch {
            expected: setup.dim(),
            found: dim,
        });
    }
    Ok(())
}

/// Dissipative weak value at time `tau` after the weak interaction.
pub fn weak_value_dissipative(setup: &WeakMeasurementSetup, ev: &dyn Evolution, tau: f64) -> Result<WeakValue> {
    check_evolution_dim(setup, ev.dim())?;
    let a_sigma = &setup.observable * &setup.sigma_i;
    let num_op = ev.evolve(&a_sigma, tau)?;
    let den_op = ev.evolve(&setup.sigma_i, tau)?;
    let (num, den) = numerator_and_denominator(setup, &num_op, &den_op);
    quotient(num, den)
}

/// `tau -> inf` limit from the asymptotic projector of a constant-rate dissipator.
///
/// With a unique steady state this is `Tr[A sigma_i]`; with a degenerate
/// ground manifold, stationary coherences keep the value anomalous.
pub fn weak_value_limit_infinite(setup: &WeakMeasurementSetup, d: &Dissipator) -> Result<WeakValue> {
    check_evolution_dim(setup, d.dim())?;
    let ss = d.steady_state()?;
    let num_op = ss.apply(&(&setup.observable * &setup.sigma_i))?;
    let den_op = ss.apply(&setup.sigma_i)?;
    let (num, den) = numerator_and_denominator(setup, &num_op, &den_op);
    quotient(num, den)
}

/// Matrix elements `x_jk = <g_j| X |g_k>` on a set of ground kets.
pub fn ground_block(x: &Operator, ground: &[DVector<C64>]) -> DMatrix<C64> {
    let n = ground.len();
    DMatrix::from_fn(n, n, |j, k| (ground[j].adjoint() * x.matrix() * &ground[k])[(0, 0)])
}

/// Long-time weak value for pure post-selection `psi_f` from the ground-block
/// coefficients `a_jk` (numerator) and `b_jk` (denominator):
/// `sum a_jk <psi_f|g_j><g_k|psi_f> / sum b_jk <psi_f|g_j><g_k|psi_f>`.
pub fn degenerate_limit_quotient(
    psi_f: &DVector<C64>,
    ground: &[DVector<C64>],
    a: &DMatrix<C64>,
    b: &DMatrix<C64>,
) -> Result<C64> {
    let n = ground.len();
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.nrows(),
        });
    }
    let f = psi_f / C64::new(psi_f.norm(), 0.0);
    let overlaps: Vec<C64> = ground.iter().map(|g| f.dotc(g)).collect();
    let mut num = ZERO;
    let mut den = ZERO;
    for j in 0..n {
        for k in 0..n {
            let w = overlaps[j] * overlaps[k].conj();
            num += a[(j, k)] * w;
            den += b[(j, k)] * w;
        }
    }
    if !(den.norm() >= tolerances::POSTSELECTION_VANISHES) {
        return Err(Error::PostselectionVanishes(den.norm()));
    }
    Ok(num / den)
}

/// Split of a pure-state weak value into the mean and the coherence term:
/// `A_w = <A>_i + Delta_i A * Tr[sigma_f e^{D tau}(|psi_perp><psi_i|)] / Tr[sigma_f e^{D tau}(|psi_i><psi_i|)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnomalyDecomposition {
    pub mean: C64,
    pub uncertainty: f64,
    pub coherence_quotient: C64,
}

impl AnomalyDecomposition {
    pub fn value(&self) -> C64 {
        self.mean + self.coherence_quotient * self.uncertainty
    }
}

pub fn anomaly_decomposition(
    psi_i: &DVector<C64>,
    psi_f: &DVector<C64>,
    observable: &Operator,
    ev: &dyn Evolution,
    tau: f64,
) -> Result<AnomalyDecomposition> {
    let psi = psi_i / C64::new(psi_i.norm(), 0.0);
    let sigma_f = Operator::pure_state(psi_f)?;
    let a_psi = observable.matrix() * &psi;
    let mean = psi.dotc(&a_psi);
    let residual = &a_psi - &psi * mean;
    let uncertainty = residual.norm();
    let sigma_i = Operator::outer(&psi, &psi)?;
    let den = sigma_f.expectation(&ev.evolve(&sigma_i, tau)?);
    if !(den.norm() >= tolerances::POSTSELECTION_VANISHES) {
        return Err(Error::PostselectionVanishes(den.norm()));
    }
    let coherence_quotient = if uncertainty > 0.0 {
        let perp = residual / C64::new(uncertainty, 0.0);
        let coh = Operator::outer(&perp, &psi)?;
        sigma_f.expectation(&ev.evolve(&coh, tau)?) / den
    } else {
        ZERO
    };
    Ok(AnomalyDecomposition {
        mean,
        uncertainty,
        coherence_quotient,
    })
}

// ---------------------------------------------------------------------------
// Two-level closed forms
// ---------------------------------------------------------------------------

/// Attenuated post-selection vector `(f_x e^{-gamma tau/2}, f_y e^{-gamma tau/2}, f_z e^{-gamma tau})`.
pub fn attenuated_postselection(f_i: BlochVector, gamma: f64, tau: f64) -> [f64; 3] {
    let h = (-gamma * tau / 2.0).exp();
    [f_i.x * h, f_i.y * h, f_i.z * (-gamma * tau).exp()]
}

/// Attenuated vector for any closed-form two-level channel: coherences scale
/// with the amplitude, `z` with the population factor.
pub fn attenuated_postselection_channel(f_i: BlochVector, channel: AnalyticChannel, tau: f64) -> [f64; 3] {
    let amp = channel.amplitude(tau);
    [f_i.x * amp, f_i.y * amp, f_i.z * channel.population(tau)]
}

fn cdot(a: [f64; 3], m: [C64; 3]) -> C64 {
    m[0] * a[0] + m[1] * a[1] + m[2] * a[2]
}

fn cross_cr(m: [C64; 3], v: [f64; 3]) -> [C64; 3] {
    [
        m[1] * v[2] - m[2] * v[1],
        m[2] * v[0] - m[0] * v[2],
        m[0] * v[1] - m[1] * v[0],
    ]
}

/// Bloch-vector quotient for `A = a 1 + b m.sigma` given the attenuated vector `fg`:
/// `a + b [fg.m + (i.m)(1 + fg_z - f_z) + i fg.(m x i)] / [1 + fg.i + fg_z - f_z]`.
/// Dot products are bilinear, so complex `m` covers non-Hermitian observables.
pub fn weak_value_bloch(i_vec: BlochVector, f_i: BlochVector, fg: [f64; 3], a: C64, b: C64, m: [C64; 3]) -> Result<C64> {
    let iv = i_vec.to_array();
    let dz = fg[2] - f_i.z;
    let den = 1.0 + fg[0] * iv[0] + fg[1] * iv[1] + fg[2] * iv[2] + dz;
    if !(den.abs() >= tolerances::POSTSELECTION_VANISHES) {
        return Err(Error::DenominatorVanishes(den));
    }
    let cross = cross_cr(m, iv);
    let num = cdot(fg, m) + cdot(iv, m) * (1.0 + dz) + I * (cross[0] * fg[0] + cross[1] * fg[1] + cross[2] * fg[2]);
    Ok(a + b * num / den)
}

fn check_bloch_state(v: BlochVector) -> Result<()> {
    let n = v.norm();
    if !n.is_finite() || n > 1.0 + tolerances::STRUCTURAL {
        return Err(Error::NormTooLarge { norm: n });
    }
    Ok(())
}

/// Two-level weak value under amplitude damping at rate `gamma`.
pub fn weak_value_2level_analytic(
    i_vec: BlochVector,
    f_i: BlochVector,
    a: f64,
    b: f64,
    m: [C64; 3],
    gamma: f64,
    tau: f64,
) -> Result<C64> {
    check_bloch_state(i_vec)?;
    check_bloch_state(f_i)?;
    let fg = attenuated_postselection(f_i, gamma, tau);
    weak_value_bloch(i_vec, f_i, fg, C64::new(a, 0.0), C64::new(b, 0.0), m)
}

/// Same quotient with the attenuation of any closed-form two-level channel.
pub fn weak_value_2level_channel(
    i_vec: BlochVector,
    f_i: BlochVector,
    a: f64,
    b: f64,
    m: [C64; 3],
    channel: AnalyticChannel,
    tau: f64,
) -> Result<C64> {
    check_bloch_state(i_vec)?;
    check_bloch_state(f_i)?;
    let fg = attenuated_postselection_channel(f_i, channel, tau);
    weak_value_bloch(i_vec, f_i, fg, C64::new(a, 0.0), C64::new(b, 0.0), m)
}

/// `m` vectors of `sigma_+` and `sigma_-`: `(1, +-i, 0)/2` with `a = 0`, `b = 1`.
pub fn m_plus_minus(sign: PlusMinus) -> [C64; 3] {
    match sign {
        PlusMinus::Plus => [C64::new(0.5, 0.0), C64::new(0.0, 0.5), ZERO],
        PlusMinus::Minus => [C64::new(0.5, 0.0), C64::new(0.0, -0.5), ZERO],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlusMinus {
    Plus,
    Minus,
}

/// Expanded closed forms of the `sigma_+` and `sigma_-` weak values.
pub fn weak_value_sigma_pm(i_vec: BlochVector, f_i: BlochVector, gamma: f64, tau: f64, sign: PlusMinus) -> Result<C64> {
    check_bloch_state(i_vec)?;
    check_bloch_state(f_i)?;
    let fg = attenuated_postselection(f_i, gamma, tau);
    let den = 1.0 + fg[0] * i_vec.x + fg[1] * i_vec.y + fg[2] * i_vec.z + (fg[2] - f_i.z);
    if !(den.abs() >= tolerances::POSTSELECTION_VANISHES) {
        return Err(Error::DenominatorVanishes(den));
    }
    let num = match sign {
        PlusMinus::Minus => {
            let k = 1.0 - f_i.z;
            C64::new(i_vec.x * k + fg[0] * (1.0 + i_vec.z), -(i_vec.y * k + fg[1] * (1.0 + i_vec.z)))
        }
        PlusMinus::Plus => {
            let k = 1.0 - f_i.z + 2.0 * fg[2];
            C64::new(i_vec.x * k + fg[0] * (1.0 - i_vec.z), i_vec.y * k + fg[1] * (1.0 - i_vec.z))
        }
    };
    Ok(num / (2.0 * den))
}

/// Operator probed by the Rabi coupling over a short interaction of length
/// `t`: `cos(w_a t/2) sigma_x - sin(w_a t/2) sigma_y`, and its Bloch vector.
pub fn measured_operator_rabi(omega_a: f64, t: f64) -> (Operator, BlochVector) {
    let phi = omega_a * t / 2.0;
    let n = BlochVector::new(phi.cos(), -phi.sin(), 0.0);
    (pauli_dot(n.to_complex()), n)
}

/// Interaction-picture post-selection vector for a Schrodinger-picture
/// choice `f` made at time `t + tau` (clockwise rotation about `z`).
pub fn postselection_rotation(f: BlochVector, omega_a: f64, t_plus_tau: f64) -> BlochVector {
    let (s, c) = (omega_a * t_plus_tau).sin_cos();
    BlochVector::new(f.x * c + f.y * s, f.y * c - f.x * s, f.z)
}

/// Inverse of [`postselection_rotation`]: the Schrodinger-picture choice that
/// keeps the interaction-picture vector at `f_i`.
pub fn schrodinger_postselection(f_i: BlochVector, omega_a: f64, t_plus_tau: f64) -> BlochVector {
    let (s, c) = (omega_a * t_plus_tau).sin_cos();
    BlochVector::new(f_i.x * c - f_i.y * s, f_i.y * c + f_i.x * s, f_i.z)
}

// ---------------------------------------------------------------------------
// Small-epsilon amplification
// ---------------------------------------------------------------------------

/// Kets `psi_i = -sign(eps)|g> + |eps|/2 |e>` and `psi_f = (eps|g> + (1-i)|e>)/sqrt 2`,
/// normalised. Their overlap probability is `eps^2/4` to leading order.
pub fn epsilon_kets(epsilon: f64) -> Result<(DVector<C64>, DVector<C64>)> {
    if !(epsilon != 0.0 && epsilon.abs() <= 0.2) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    // Basis (|e>, |g>).
    let psi_i = DVector::from_vec(vec![C64::new(epsilon.abs() / 2.0, 0.0), C64::new(-epsilon.signum(), 0.0)]);
    let psi_f = DVector::from_vec(vec![C64::new(1.0, -1.0), C64::new(epsilon, 0.0)]) / C64::new(2f64.sqrt(), 0.0);
    let ni = psi_i.norm();
    let nf = psi_f.norm();
    Ok((psi_i / C64::new(ni, 0.0), psi_f / C64::new(nf, 0.0)))
}

/// Density matrices of [`epsilon_kets`].
pub fn epsilon_states(epsilon: f64) -> Result<(Operator, Operator)> {
    let (i, f) = epsilon_kets(epsilon)?;
    Ok((Operator::pure_state(&i)?, Operator::pure_state(&f)?))
}

/// `sigma_x` weak value to first order in `gamma tau`: `tau gamma/eps + i(2 - tau gamma)/eps`.
pub fn markov_short_time_wv(gamma: f64, tau: f64, epsilon: f64) -> C64 {
    let gt = gamma * tau;
    if gt > tolerances::SHORT_TIME_GUARD {
        log::warn!("gamma*tau = {gt} is outside the short-time regime");
    }
    C64::new(gt / epsilon, (2.0 - gt) / epsilon)
}

/// Non-Markovian counterpart: `lambda tau^2 gamma0/(2 eps) + i(4 - lambda tau^2 gamma0)/(2 eps)`.
pub fn nonmarkov_short_time_wv(gamma0: f64, lambda: f64, tau: f64, epsilon: f64) -> C64 {
    if lambda * tau > tolerances::SHORT_TIME_GUARD || gamma0 * tau > tolerances::SHORT_TIME_GUARD {
        log::warn!("lambda*tau = {}, gamma0*tau = {} outside the short-time regime", lambda * tau, gamma0 * tau);
    }
    let q = lambda * tau * tau * gamma0;
    C64::new(q / (2.0 * epsilon), (4.0 - q) / (2.0 * epsilon))
}

/// `sigma_x` setup on the epsilon states.
pub fn epsilon_setup(epsilon: f64) -> Result<WeakMeasurementSetup> {
    let (i, f) = epsilon_states(epsilon)?;
    WeakMeasurementSetup::new(i, f, crate::operator::pauli(Axis::X))
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub setup_fingerprint: String,
    pub channel: String,
    pub rate_scale: f64,
}

/// Weak value sampled over a grid of dissipation times. Points where the
/// post-selection probability vanishes are kept as gaps (`None`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakValueTrace {
    pub tau_grid: Vec<f64>,
    pub values: Vec<Option<C64>>,
    pub postselection_probs: Vec<f64>,
    pub metadata: TraceMetadata,
}

impl WeakValueTrace {
    pub fn len(&self) -> usize {
        self.tau_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_grid.is_empty()
    }

    /// Abscissa in units of the channel rate.
    pub fn gamma_tau(&self) -> Vec<f64> {
        self.tau_grid.iter().map(|t| t * self.metadata.rate_scale).collect()
    }

    pub fn gap_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn defined(&self) -> impl Iterator<Item = (f64, C64)> + '_ {
        self.tau_grid
            .iter()
            .zip(&self.values)
            .filter_map(|(&t, v)| v.map(|v| (t, v)))
    }
}

/// Weak value at every `tau` in a strictly increasing grid.
///
/// Constant-rate channels are evaluated point by point in parallel; others
/// are propagated in one pass. Output order follows the grid.
pub fn trace_over_tau(setup: &WeakMeasurementSetup, ev: &dyn Evolution, tau_grid: &[f64]) -> Result<WeakValueTrace> {
    check_evolution_dim(setup, ev.dim())?;
    if tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("tau grid must be strictly increasing".into()));
    }
    let a_sigma = &setup.observable * &setup.sigma_i;
    let pairs: Vec<(C64, C64)> = if ev.sequential() {
        let nums = ev.evolve_many(&a_sigma, tau_grid)?;
        let dens = ev.evolve_many(&setup.sigma_i, tau_grid)?;
        nums.iter()
            .zip(&dens)
            .map(|(n, d)| numerator_and_denominator(setup, n, d))
            .collect()
    } else {
        tau_grid
            .par_iter()
            .map(|&tau| {
                let n = ev.evolve(&a_sigma, tau)?;
                let d = ev.evolve(&setup.sigma_i, tau)?;
                Ok(numerator_and_denominator(setup, &n, &d))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let mut values = Vec::with_capacity(pairs.len());
    let mut probs = Vec::with_capacity(pairs.len());
    for (num, den) in pairs {
        match quotient(num, den) {
            Ok(w) => {
                values.push(Some(w.value));
                probs.push(w.postselection_prob);
            }
            Err(Error::PostselectionVanishes(_)) => {
                values.push(None);
                probs.push(den.re.max(0.0));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(WeakValueTrace {
        tau_grid: tau_grid.to_vec(),
        values,
        postselection_probs: probs,
        metadata: TraceMetadata {
            setup_fingerprint: setup.fingerprint(),
            channel: ev.describe(),
            rate_scale: ev.rate_scale(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::amplitude_damping;
    use crate::operator::{pauli, sigma_minus, sigma_plus};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ket2(e: C64, g: C64) -> DVector<C64> {
        DVector::from_vec(vec![e, g])
    }

    #[test]
    fn standard_weak_value_at_zero_tau() {
        let psi_i = ket2(c(0.6, 0.0), c(0.8, 0.0));
        let psi_f = ket2(c(0.6, 0.0), c(-0.7, 0.2));
        let x = pauli(Axis::X);
        let setup = WeakMeasurementSetup::from_kets(&psi_i, &psi_f, x.clone()).unwrap();
        let d = amplitude_damping(1.0).unwrap();
        let w = weak_value_dissipative(&setup, &d, 0.0).unwrap();
        let fi = psi_f.normalize();
        let expected = fi.dotc(&(x.matrix() * &psi_i)) / fi.dotc(&psi_i);
        assert!((w.value - expected).norm() < 1e-12);
        assert!((w.postselection_prob - fi.dotc(&psi_i).norm_sqr()).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_pair_vanishes_at_zero() {
        let setup = WeakMeasurementSetup::new(
            Operator::diagonal(&[1.0, 0.0]),
            Operator::diagonal(&[0.0, 1.0]),
            pauli(Axis::X),
        )
        .unwrap();
        let d = amplitude_damping(1.0).unwrap();
        assert!(matches!(
            weak_value_dissipative(&setup, &d, 0.0),
            Err(Error::PostselectionVanishes(_))
        ));
        assert!(weak_value_dissipative(&setup, &d, 0.5).is_ok());
    }

    #[test]
    fn rejects_non_density() {
        let r = WeakMeasurementSetup::new(Operator::diagonal(&[2.0, 0.0]), Operator::diagonal(&[1.0, 0.0]), pauli(Axis::X));
        assert!(matches!(r, Err(Error::NotDensity(_))));
    }

    #[test]
    fn limit_is_expectation_for_unique_ground() {
        let psi_i = ket2(c(0.3, 0.1), c(0.8, -0.2));
        let psi_f = ket2(c(0.5, 0.0), c(0.1, 0.4));
        let a = pauli(Axis::Y);
        let setup = WeakMeasurementSetup::from_kets(&psi_i, &psi_f, a).unwrap();
        let d = amplitude_damping(2.0).unwrap();
        let lim = weak_value_limit_infinite(&setup, &d).unwrap();
        assert!((lim.value - setup.expectation()).norm() < 1e-10);
    }

    #[test]
    fn bloch_formula_reduces_to_standard() {
        let i_vec = BlochVector::new(0.6, 0.0, 0.8);
        let f_vec = BlochVector::new(-0.3, 0.4, 0.5);
        let m = BlochVector::new(1.0, 0.0, 0.0).to_complex();
        let w = weak_value_2level_analytic(i_vec, f_vec, 0.0, 1.0, m, 0.0, 3.0).unwrap();
        let iv = i_vec;
        let num = c(f_vec.x + iv.x, 0.0) + I * f_vec.dot(&BlochVector::new(1.0, 0.0, 0.0).cross(&iv));
        let expected = num / (1.0 + f_vec.dot(&iv));
        assert!((w - expected).norm() < 1e-14);
    }

    #[test]
    fn sigma_pm_examples() {
        let up = BlochVector::new(0.0, 0.0, 1.0);
        let down = BlochVector::new(0.0, 0.0, -1.0);
        let wm = weak_value_sigma_pm(up, down, 1.0, 0.5, PlusMinus::Minus).unwrap();
        assert!(wm.norm().is_finite());
        let wp = weak_value_sigma_pm(up, down, 1.0, 0.5, PlusMinus::Plus).unwrap();
        assert_eq!(wp, ZERO);
        for sign in [PlusMinus::Plus, PlusMinus::Minus] {
            let i_vec = BlochVector::new(0.2, -0.5, 0.3);
            let f_vec = BlochVector::new(-0.4, 0.1, 0.6);
            let a = weak_value_sigma_pm(i_vec, f_vec, 0.7, 1.1, sign).unwrap();
            let b = weak_value_2level_analytic(i_vec, f_vec, 0.0, 1.0, m_plus_minus(sign), 0.7, 1.1).unwrap();
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn sigma_pm_match_trace_formula() {
        let psi_i = ket2(c(0.8, 0.1), c(0.3, -0.5));
        let psi_f = ket2(c(0.2, 0.0), c(0.7, 0.6));
        let d = amplitude_damping(1.0).unwrap();
        let sp = WeakMeasurementSetup::from_kets(&psi_i, &psi_f, sigma_plus()).unwrap();
        let sm = sp.with_observable(sigma_minus()).unwrap();
        let iv = BlochVector::from_density(sp.sigma_i()).unwrap();
        let fv = BlochVector::from_density(sp.sigma_fi()).unwrap();
        for tau in [0.0, 0.4, 2.0] {
            let tp = weak_value_dissipative(&sp, &d, tau).unwrap().value;
            let tm = weak_value_dissipative(&sm, &d, tau).unwrap().value;
            let ap = weak_value_sigma_pm(iv, fv, 1.0, tau, PlusMinus::Plus).unwrap();
            let am = weak_value_sigma_pm(iv, fv, 1.0, tau, PlusMinus::Minus).unwrap();
            assert!((tp - ap).norm() < 1e-12 * (1.0 + tp.norm()));
            assert!((tm - am).norm() < 1e-12 * (1.0 + tm.norm()));
        }
    }

    #[test]
    fn measured_operator_examples() {
        let (op, n) = measured_operator_rabi(1.0, 0.0);
        assert!(op.max_abs_diff(&pauli(Axis::X)) < 1e-15);
        assert_eq!(n, BlochVector::new(1.0, -0.0, 0.0));
        let (op, _) = measured_operator_rabi(std::f64::consts::PI, 1.0);
        assert!(op.max_abs_diff(&(-&pauli(Axis::Y))) < 1e-15);
        for t in [0.3, 1.7, 9.0] {
            assert!((measured_operator_rabi(2.0, t).1.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rotation_round_trip_and_period() {
        let f = BlochVector::new(0.3, -0.4, 0.5);
        assert_eq!(postselection_rotation(f, 2.0, 0.0), f);
        let w = 1.7;
        let p = postselection_rotation(f, w, 2.0 * std::f64::consts::PI / w);
        assert!((p.x - f.x).abs() < 1e-14 && (p.y - f.y).abs() < 1e-14);
        let r = postselection_rotation(schrodinger_postselection(f, w, 0.9), w, 0.9);
        assert!((r.x - f.x).abs() < 1e-15 && (r.y - f.y).abs() < 1e-15 && r.z == f.z);
    }

    #[test]
    fn epsilon_states_properties() {
        for eps in [0.01, -0.01, 0.2] {
            let (i, f) = epsilon_kets(eps).unwrap();
            let p = f.dotc(&i).norm_sqr();
            assert!((p - eps * eps / 4.0).abs() < eps.abs().powi(3));
        }
        let (a, _) = epsilon_kets(0.05).unwrap();
        let (b, _) = epsilon_kets(-0.05).unwrap();
        assert_eq!(a[1], -b[1]);
        assert!(matches!(epsilon_kets(0.0), Err(Error::EpsilonOutOfRange(_))));
        assert!(matches!(epsilon_kets(0.3), Err(Error::EpsilonOutOfRange(_))));
    }

    #[test]
    fn epsilon_weak_value_at_zero_is_imaginary() {
        let eps = 0.01;
        let setup = epsilon_setup(eps).unwrap();
        let d = amplitude_damping(0.1).unwrap();
        let w = weak_value_dissipative(&setup, &d, 0.0).unwrap().value;
        let approx = markov_short_time_wv(0.1, 0.0, eps);
        assert_eq!(approx, c(0.0, 2.0 / eps));
        assert!((w - approx).norm() / approx.norm() < 1e-2);
        assert_eq!(nonmarkov_short_time_wv(1.0, 1.0, 0.0, eps), c(0.0, 2.0 / eps));
    }

    #[test]
    fn nonmarkov_law_is_quadratic() {
        let a = nonmarkov_short_time_wv(0.1, 1.0, 0.02, 0.01).re;
        let b = nonmarkov_short_time_wv(0.1, 1.0, 0.01, 0.01).re;
        assert!((a / b - 4.0).abs() < 1e-12);
    }

    #[test]
    fn trace_has_gaps_and_order() {
        let setup = WeakMeasurementSetup::new(
            Operator::diagonal(&[1.0, 0.0]),
            Operator::diagonal(&[0.0, 1.0]),
            pauli(Axis::Z),
        )
        .unwrap();
        let d = amplitude_damping(0.5).unwrap();
        let grid = [0.0, 0.5, 1.0, 2.0];
        let tr = trace_over_tau(&setup, &d, &grid).unwrap();
        assert_eq!(tr.values[0], None);
        assert_eq!(tr.gap_count(), 1);
        for (k, &tau) in grid.iter().enumerate().skip(1) {
            let w = weak_value_dissipative(&setup, &d, tau).unwrap();
            assert_eq!(tr.values[k], Some(w.value));
        }
        assert_eq!(tr.gamma_tau(), vec![0.0, 0.25, 0.5, 1.0]);
        assert!(trace_over_tau(&setup, &d, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let s = epsilon_setup(0.01).unwrap();
        assert_eq!(s.fingerprint(), epsilon_setup(0.01).unwrap().fingerprint());
        assert_ne!(s.fingerprint(), epsilon_setup(0.02).unwrap().fingerprint());
        assert_eq!(s.fingerprint().len(), 64);
    }
}
