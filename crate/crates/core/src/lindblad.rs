// SPDX-License-Identifier: Apache-2.0

//! Lindblad dissipators and the propagation `C -> e^{D tau}(C)`.
//!
//! Superoperators act on column-stacked operators: `vec(A X B) = (B^T ⊗ A) vec(X)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ode::{self, OdeOptions};
use crate::operator::{sigma_minus, sodium_jump_operators, Operator};
use crate::tolerances;
use crate::C64;

/// Dissipation rate of a channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rate {
    Constant { gamma: f64 },
    /// Rate of a two-level atom in a lossy cavity with Lorentzian coupling
    /// spectrum of width `lambda` and strength `gamma0`.
    NonMarkovJc { gamma0: f64, lambda: f64 },
}

impl Rate {
    pub fn constant(gamma: f64) -> Self {
        Rate::Constant { gamma }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Rate::Constant { gamma } if !(gamma >= 0.0 && gamma.is_finite()) => Err(
                Error::InvalidParameter(format!("rate must be finite and nonnegative, got {gamma}")),
            ),
            Rate::NonMarkovJc { gamma0, lambda }
                if !(gamma0 > 0.0 && lambda > 0.0 && gamma0.is_finite() && lambda.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "gamma0 and lambda must be positive, got {gamma0}, {lambda}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Rate::Constant { .. })
    }

    /// Rate at time `tau` after the start of dissipation.
    pub fn at(&self, tau: f64) -> f64 {
        match *self {
            Rate::Constant { gamma } => gamma,
            Rate::NonMarkovJc { gamma0, lambda } => nonmarkov_gamma(tau, gamma0, lambda),
        }
    }

    /// Rate continued to complex time, used to route integration around poles.
    pub fn at_complex(&self, tau: C64) -> C64 {
        match *self {
            Rate::Constant { gamma } => C64::new(gamma, 0.0),
            Rate::NonMarkovJc { gamma0, lambda } => nonmarkov_gamma_complex(tau, gamma0, lambda),
        }
    }

    /// Real times in `(0, t_max]` where the rate diverges.
    pub fn poles(&self, t_max: f64) -> Vec<f64> {
        match *self {
            Rate::Constant { .. } => Vec::new(),
            Rate::NonMarkovJc { gamma0, lambda } => nonmarkov_poles(gamma0, lambda, t_max),
        }
    }

    /// Natural rate scale used to turn `Gamma tau` abscissae into times.
    pub fn scale(&self) -> f64 {
        match *self {
            Rate::Constant { gamma } => gamma,
            Rate::NonMarkovJc { gamma0, .. } => gamma0,
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Constant { gamma } => write!(f, "{gamma}"),
            Rate::NonMarkovJc { gamma0, lambda } => {
                write!(f, "nonmarkov_jc(gamma0={gamma0}, lambda={lambda})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DissipationChannel {
    pub jump: Operator,
    pub rate: Rate,
    pub label: String,
}

impl DissipationChannel {
    pub fn new(jump: Operator, rate: Rate, label: impl Into<String>) -> Result<Self> {
        rate.validate()?;
        Ok(Self {
            jump,
            rate,
            label: label.into(),
        })
    }
}

/// Anything that maps an operator `C` to `e^{D tau}(C)`.
pub trait Evolution: Sync {
    fn dim(&self) -> usize;

    fn evolve(&self, c: &Operator, tau: f64) -> Result<Operator>;

    /// Evolves `c` to every time in `taus` (ascending).
    fn evolve_many(&self, c: &Operator, taus: &[f64]) -> Result<Vec<Operator>> {
        taus.iter().map(|&t| self.evolve(c, t)).collect()
    }

    /// Whether a grid is cheaper to sweep in one ordered pass than point by point.
    fn sequential(&self) -> bool {
        false
    }

    /// Rate used to express times as `Gamma tau`.
    fn rate_scale(&self) -> f64;

    fn describe(&self) -> String;
}

/// Sum of Lindblad channels, `D(C) = sum_i gamma_i (L C L^† - {L^† L, C}/2)`.
#[derive(Clone, Debug)]
pub struct Dissipator {
    dim: usize,
    channels: Vec<DissipationChannel>,
    /// Per-channel superoperators at unit rate.
    unit_superops: Vec<DMatrix<C64>>,
    /// Full generator when every rate is constant.
    superop: Option<DMatrix<C64>>,
}

/// Unit-rate superoperator `conj(L) ⊗ L - (I ⊗ L^†L + (L^†L)^T ⊗ I)/2`.
fn unit_superop(l: &DMatrix<C64>) -> DMatrix<C64> {
    let n = l.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let ldl = l.adjoint() * l;
    let half = C64::new(0.5, 0.0);
    l.conjugate().kronecker(l) - (id.kronecker(&ldl) + ldl.transpose().kronecker(&id)) * half
}

impl Dissipator {
    pub fn new(channels: Vec<DissipationChannel>, dim: usize) -> Result<Self> {
        build_dissipator(channels, dim)
    }

    pub fn channels(&self) -> &[DissipationChannel] {
        &self.channels
    }

    pub fn is_constant(&self) -> bool {
        self.superop.is_some()
    }

    /// Materialised `dim^2 x dim^2` generator; `None` for time-dependent rates.
    pub fn superoperator(&self) -> Option<&DMatrix<C64>> {
        self.superop.as_ref()
    }

    /// `D(C)` at time `tau`, evaluated directly on the operator.
    pub fn apply(&self, c: &Operator, tau: f64) -> Result<Operator> {
        self.check_dim(c)?;
        let mut out = Operator::zeros(self.dim);
        for ch in &self.channels {
            let l = &ch.jump;
            let ld = l.dagger();
            let ldl = &ld * l;
            let term = &(&(l * c) * &ld) - &(&ldl.anticommutator(c) * 0.5);
            out = &out + &(&term * ch.rate.at(tau));
        }
        Ok(out)
    }

    fn check_dim(&self, c: &Operator) -> Result<()> {
        if c.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: c.dim(),
            });
        }
        Ok(())
    }

    /// Propagator `e^{D tau}` as a `dim^2 x dim^2` matrix.
    pub fn propagator(&self, tau: f64) -> Result<DMatrix<C64>> {
        check_tau(tau)?;
        let n2 = self.dim * self.dim;
        if let Some(s) = &self.superop {
            return linalg::expm(&(s * C64::new(tau, 0.0)));
        }
        let mut p = DMatrix::zeros(n2, n2);
        for k in 0..n2 {
            let mut e = DVector::zeros(n2);
            e[k] = C64::new(1.0, 0.0);
            let basis = Operator::from_vectorized(&e, self.dim);
            let out = self.integrate_vectorised(&basis, &[tau])?;
            p.set_column(k, &out[0].vectorize());
        }
        Ok(p)
    }

    /// Long-time behaviour from the kernel of the generator.
    pub fn steady_state(&self) -> Result<SteadyState> {
        steady_state(self)
    }

    /// Integrates `dC/dtau = D(tau)(C)` from zero to each of the ascending `taus`.
    ///
    /// Where a rate has a pole on the real axis the equation is singular and
    /// real-time integration cannot pick the continuation. The solution is
    /// analytic in `tau` (the local exponents are integers), so the path
    /// detours around each pole on a semicircle in the upper half plane.
    fn integrate_vectorised(&self, c: &Operator, taus: &[f64]) -> Result<Vec<Operator>> {
        let t_max = taus.last().copied().unwrap_or(0.0);
        let mut poles: Vec<f64> = self
            .channels
            .iter()
            .flat_map(|ch| ch.rate.poles(t_max * 1.5 + 1.0))
            .collect();
        poles.sort_by(f64::total_cmp);
        poles.dedup();
        let radius = detour_radius(&poles);
        poles.retain(|&p| p - radius < t_max);

        let mut out: Vec<Option<DVector<C64>>> = vec![None; taus.len()];
        let mut t_cur = 0.0;
        let mut state = c.vectorize();
        let mut next = 0usize;
        for &p in &poles {
            if next >= taus.len() {
                break;
            }
            let (a, b) = (p - radius, p + radius);
            // Targets before the detour.
            let before: Vec<usize> = (next..taus.len()).filter(|&i| taus[i] <= a).collect();
            let at_a = self.run_segment(&state, Path::Line(C64::new(t_cur, 0.0), C64::new(a, 0.0)), &before, taus, t_cur, a, &mut out)?;
            next += before.len();
            state = at_a;
            // Targets strictly inside the detour window, left of the pole.
            let left: Vec<usize> = (next..taus.len()).filter(|&i| taus[i] < p && taus[i] > a).collect();
            for &i in &left {
                let s = self.run_segment(&state, Path::Line(C64::new(a, 0.0), C64::new(taus[i], 0.0)), &[], taus, a, taus[i], &mut out)?;
                out[i] = Some(s);
            }
            next += left.len();
            if next < taus.len() && (taus[next] - p).abs() <= 1e-12 * p.max(1.0) {
                return Err(Error::NoConvergence(format!(
                    "requested time {} coincides with a rate pole",
                    taus[next]
                )));
            }
            state = self.run_segment(&state, Path::Arc { centre: p, radius }, &[], taus, 0.0, 1.0, &mut out)?;
            // Targets inside the window right of the pole, reached backwards from p + r.
            let right: Vec<usize> = (next..taus.len()).filter(|&i| taus[i] > p && taus[i] < b).collect();
            for &i in &right {
                let s = self.run_segment(&state, Path::Line(C64::new(b, 0.0), C64::new(taus[i], 0.0)), &[], taus, b, taus[i], &mut out)?;
                out[i] = Some(s);
            }
            next += right.len();
            t_cur = b;
        }
        let rest: Vec<usize> = (next..taus.len()).collect();
        if !rest.is_empty() {
            let t_end = taus[taus.len() - 1];
            self.run_segment(&state, Path::Line(C64::new(t_cur, 0.0), C64::new(t_end, 0.0)), &rest, taus, t_cur, t_end, &mut out)?;
        }
        Ok(out
            .into_iter()
            .map(|v| Operator::from_vectorized(&v.expect("every target visited"), self.dim))
            .collect())
    }

    /// Integrates along `path` (parametrised by `s` in `[0, 1]`), storing the
    /// state at each real target `taus[i]` for `i` in `targets`, which must lie
    /// on a line path between `t_from` and `t_to`. Returns the end state.
    #[allow(clippy::too_many_arguments)]
    fn run_segment(
        &self,
        y0: &DVector<C64>,
        path: Path,
        targets: &[usize],
        taus: &[f64],
        t_from: f64,
        t_to: f64,
        out: &mut [Option<DVector<C64>>],
    ) -> Result<DVector<C64>> {
        let n2 = self.dim * self.dim;
        let span = t_to - t_from;
        let mut s_points: Vec<f64> = targets
            .iter()
            .map(|&i| if span == 0.0 { 1.0 } else { ((taus[i] - t_from) / span).clamp(0.0, 1.0) })
            .collect();
        s_points.push(1.0);
        if path.is_trivial() {
            for &i in targets {
                out[i] = Some(y0.clone());
            }
            return Ok(y0.clone());
        }
        let states = ode::integrate(
            |s, y, dy| {
                let (tau, dtau) = path.point(s);
                let yv = DVector::from_column_slice(y);
                let mut acc = DVector::<C64>::zeros(n2);
                for (ch, sup) in self.channels.iter().zip(&self.unit_superops) {
                    let r = if tau.im == 0.0 {
                        C64::new(ch.rate.at(tau.re), 0.0)
                    } else {
                        ch.rate.at_complex(tau)
                    };
                    if r != C64::new(0.0, 0.0) {
                        acc += (sup * &yv) * (r * dtau);
                    }
                }
                dy.copy_from_slice(acc.as_slice());
            },
            0.0,
            y0.as_slice(),
            &s_points,
            &OdeOptions::default(),
        )?;
        for (k, &i) in targets.iter().enumerate() {
            out[i] = Some(DVector::from_column_slice(&states[k]));
        }
        Ok(DVector::from_column_slice(&states[states.len() - 1]))
    }
}

/// Integration path in complex time.
#[derive(Clone, Copy, Debug)]
enum Path {
    Line(C64, C64),
    /// Upper semicircle from `centre - radius` to `centre + radius`.
    Arc { centre: f64, radius: f64 },
}

impl Path {
    fn is_trivial(&self) -> bool {
        matches!(self, Path::Line(a, b) if a == b)
    }

    /// Point and derivative with respect to `s`.
    fn point(&self, s: f64) -> (C64, C64) {
        match *self {
            Path::Line(a, b) => (a + (b - a) * s, b - a),
            Path::Arc { centre, radius } => {
                let theta = std::f64::consts::PI * (1.0 - s);
                let e = C64::from_polar(radius, theta);
                (C64::new(centre, 0.0) + e, C64::new(0.0, -std::f64::consts::PI) * e)
            }
        }
    }
}

/// Detour radius: a quarter of the distance to the origin or the next pole.
fn detour_radius(poles: &[f64]) -> f64 {
    let mut gap = poles.first().copied().unwrap_or(1.0);
    for w in poles.windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    0.25 * gap
}

impl Evolution for Dissipator {
    fn dim(&self) -> usize {
        self.dim
    }

    /// Constant rates use the superoperator exponential; time-dependent rates
    /// integrate the master equation adaptively.
    fn evolve(&self, c: &Operator, tau: f64) -> Result<Operator> {
        self.check_dim(c)?;
        check_tau(tau)?;
        if tau == 0.0 {
            return Ok(c.clone());
        }
        match &self.superop {
            Some(s) => {
                let p = linalg::expm(&(s * C64::new(tau, 0.0)))?;
                Ok(Operator::from_vectorized(&(p * c.vectorize()), self.dim))
            }
            None => Ok(self.integrate_vectorised(c, &[tau])?.remove(0)),
        }
    }

    fn evolve_many(&self, c: &Operator, taus: &[f64]) -> Result<Vec<Operator>> {
        self.check_dim(c)?;
        for &t in taus {
            check_tau(t)?;
        }
        if self.superop.is_some() || taus.windows(2).any(|w| w[1] < w[0]) {
            return taus.iter().map(|&t| self.evolve(c, t)).collect();
        }
        self.integrate_vectorised(c, taus)
    }

    fn sequential(&self) -> bool {
        !self.is_constant()
    }

    fn rate_scale(&self) -> f64 {
        let s = self
            .channels
            .iter()
            .map(|c| c.rate.scale())
            .fold(0.0, f64::max);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self
            .channels
            .iter()
            .map(|c| format!("{}@{}", c.label, c.rate))
            .collect();
        format!("lindblad(dim={}; {})", self.dim, parts.join(", "))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite tau {tau}")));
    }
    if tau < 0.0 {
        return Err(Error::NegativeTau(tau));
    }
    Ok(())
}

/// Builds a dissipator, materialising the generator when all rates are constant.
pub fn build_dissipator(channels: Vec<DissipationChannel>, dim: usize) -> Result<Dissipator> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    for ch in &channels {
        if ch.jump.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ch.jump.dim(),
            });
        }
        ch.rate.validate()?;
    }
    let unit_superops: Vec<DMatrix<C64>> = channels
        .iter()
        .map(|c| unit_superop(c.jump.matrix()))
        .collect();
    let superop = channels.iter().all(|c| c.rate.is_constant()).then(|| {
        let n2 = dim * dim;
        let mut s = DMatrix::zeros(n2, n2);
        for (c, u) in channels.iter().zip(&unit_superops) {
            s += u * C64::new(c.rate.at(0.0), 0.0);
        }
        s
    });
    Ok(Dissipator {
        dim,
        channels,
        unit_superops,
        superop,
    })
}

/// Spontaneous emission `L = sigma_-` at rate `gamma`.
pub fn amplitude_damping(gamma: f64) -> Result<Dissipator> {
    build_dissipator(
        vec![DissipationChannel::new(sigma_minus(), Rate::constant(gamma), "sigma_minus")?],
        2,
    )
}

/// `sigma_-` channel with the non-Markovian Jaynes-Cummings rate.
pub fn nonmarkov_jc(gamma0: f64, lambda: f64) -> Result<Dissipator> {
    build_dissipator(
        vec![DissipationChannel::new(
            sigma_minus(),
            Rate::NonMarkovJc { gamma0, lambda },
            "sigma_minus",
        )?],
        2,
    )
}

/// Six-level `J_e = 3/2 -> J_g = 1/2` spontaneous emission with common rate `gamma`.
pub fn sodium_dissipator(gamma: f64) -> Result<Dissipator> {
    let channels = sodium_jump_operators()
        .into_iter()
        .map(|(l, q)| DissipationChannel::new(l, Rate::constant(gamma), format!("L{}", q.label())))
        .collect::<Result<Vec<_>>>()?;
    build_dissipator(channels, 6)
}

// ---------------------------------------------------------------------------
// Analytic two-level channels
// ---------------------------------------------------------------------------

/// Closed-form amplitude damping in the `(|e>, |g>)` basis.
pub fn two_level_damping_apply(c: &Operator, gamma: f64, tau: f64) -> Result<Operator> {
    check_tau(tau)?;
    let decay = (-gamma * tau).exp();
    damping_with_amplitude(c, (-gamma * tau / 2.0).exp(), decay)
}

/// `[[c_ee G^2, c_eg G], [c_ge G, c_gg + c_ee (1 - G^2)]]` with population
/// factor `pop = G^2` passed separately to keep `e^{-gamma tau}` exact.
fn damping_with_amplitude(c: &Operator, amp: f64, pop: f64) -> Result<Operator> {
    if c.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: c.dim(),
        });
    }
    let (ee, eg, ge, gg) = (c.get(0, 0), c.get(0, 1), c.get(1, 0), c.get(1, 1));
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[ee * pop, eg * amp, ge * amp, gg + ee * (1.0 - pop)],
    );
    Operator::from_matrix(m)
}

fn nonmarkov_d(gamma0: f64, lambda: f64) -> C64 {
    C64::new(lambda * lambda - 2.0 * gamma0 * lambda, 0.0).sqrt()
}

fn real_with_guard(z: C64, what: &str) -> f64 {
    let scale = z.norm().max(1.0);
    if z.im.abs() > tolerances::IMAGINARY_RESIDUE * scale {
        log::warn!("{what}: imaginary residue {:e} discarded", z.im);
    }
    z.re
}

/// `tanh(x) / x`, continuous through `x = 0`.
fn tanhc(x: C64) -> C64 {
    if x.norm() < 1e-4 {
        let x2 = x * x;
        return C64::new(1.0, 0.0) - x2 / 3.0 + x2 * x2 * (2.0 / 15.0);
    }
    if x.re.abs() > 20.0 {
        return C64::new(x.re.signum(), 0.0) / x;
    }
    x.tanh() / x
}

/// Time-dependent decay rate
/// `gamma(tau) = 2 gamma0 lambda sinh(d tau/2) / (d cosh(d tau/2) + lambda sinh(d tau/2))`,
/// `d = sqrt(lambda^2 - 2 gamma0 lambda)`, evaluated in complex arithmetic so the
/// strong-coupling branch (`lambda < 2 gamma0`, imaginary `d`) needs no special case.
///
/// In strong coupling the excited amplitude passes through zero and the rate
/// has a pole there (see [`nonmarkov_poles`]).
pub fn nonmarkov_gamma(tau: f64, gamma0: f64, lambda: f64) -> f64 {
    real_with_guard(
        nonmarkov_gamma_complex(C64::new(tau, 0.0), gamma0, lambda),
        "nonmarkov_gamma",
    )
}

/// [`nonmarkov_gamma`] at complex time.
pub fn nonmarkov_gamma_complex(tau: C64, gamma0: f64, lambda: f64) -> C64 {
    let d = nonmarkov_d(gamma0, lambda);
    let half = tau / 2.0;
    let x = d * half;
    let one = C64::new(1.0, 0.0);
    let (ch, sh) = if x.re.abs() > 20.0 {
        (one, C64::new(x.re.signum(), 0.0))
    } else {
        (x.cosh(), x.sinh())
    };
    if ch.norm() >= sh.norm() {
        // tanh(x)/x form, regular at x = 0.
        let t = tanhc(x);
        t * half * (2.0 * gamma0 * lambda) / (one + t * half * lambda)
    } else {
        // coth form, regular where cosh(x) vanishes.
        C64::new(2.0 * gamma0 * lambda, 0.0) / (d * (ch / sh) + lambda)
    }
}

/// Real zeros of the excited amplitude in `(0, t_max]`, where the rate
/// diverges. Only strong coupling (`lambda < 2 gamma0`) has any:
/// `tan(w tau/2) = -w/lambda` with `w = sqrt(2 gamma0 lambda - lambda^2)`.
pub fn nonmarkov_poles(gamma0: f64, lambda: f64, t_max: f64) -> Vec<f64> {
    let w2 = 2.0 * gamma0 * lambda - lambda * lambda;
    if w2 <= 0.0 {
        return Vec::new();
    }
    let w = w2.sqrt();
    let first = std::f64::consts::PI - (w / lambda).atan();
    let period = 2.0 * std::f64::consts::PI / w;
    (0..)
        .map(|k| 2.0 * first / w + k as f64 * period)
        .take_while(|&t| t <= t_max)
        .collect()
}

/// Excited-state amplitude `G(tau) = e^{-lambda tau/2} [cosh(d tau/2) + (lambda/d) sinh(d tau/2)]`,
/// so that the channel keeps coherences as `G` and populations as `G^2`.
///
/// `G` is signed: in strong coupling it oscillates through zero.
pub fn nonmarkov_big_gamma(tau: f64, gamma0: f64, lambda: f64) -> f64 {
    let d = nonmarkov_d(gamma0, lambda);
    let x = d * (tau / 2.0);
    let lt = lambda * tau / 2.0;
    let g = if x.norm() < 1.0 {
        // cosh x + lambda tau/2 * sinh(x)/x, no division by d.
        let x2 = x * x;
        let mut sinhc = C64::new(1.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 1..12 {
            term = term * x2 / (((2 * k) * (2 * k + 1)) as f64);
            sinhc += term;
        }
        (x.cosh() + sinhc * lt) * (-lt).exp()
    } else {
        let r = C64::new(lambda, 0.0) / d;
        let one = C64::new(1.0, 0.0);
        ((one + r) * (x - lt).exp() + (one - r) * (-x - lt).exp()) * 0.5
    };
    real_with_guard(g, "nonmarkov_big_gamma")
}

/// The amplitude written as
/// `sqrt(lambda - gamma0 - gamma0 cosh(tau sqrt(lambda(lambda - 2 gamma0)))) / sqrt(lambda - 2 gamma0)
///  * exp(-lambda tau/2 + artanh(sqrt(lambda) tanh(sqrt(lambda) tau sqrt(lambda - 2 gamma0)/2) / sqrt(lambda - 2 gamma0)))`
/// with principal branches. Its modulus equals `|G(tau)|`; the sign and phase
/// depend on the branch, so [`nonmarkov_big_gamma`] is the canonical form.
pub fn nonmarkov_big_gamma_artanh_form(tau: f64, gamma0: f64, lambda: f64) -> C64 {
    let c = |x: f64| C64::new(x, 0.0);
    let s_l = c(lambda).sqrt();
    let s_l2 = c(lambda - 2.0 * gamma0).sqrt();
    let d = c(lambda * (lambda - 2.0 * gamma0)).sqrt();
    let pref = (c(lambda - gamma0) - (d * tau).cosh() * gamma0).sqrt() / s_l2;
    let arg = s_l * (s_l * s_l2 * (tau / 2.0)).tanh() / s_l2;
    pref * (c(-lambda * tau / 2.0) + arg.atanh()).exp()
}

/// Both spellings of `d` agree: `sqrt(lambda^2 - 2 gamma0 lambda) = sqrt(lambda) sqrt(lambda - 2 gamma0)`.
pub fn nonmarkov_d_forms(gamma0: f64, lambda: f64) -> (C64, C64) {
    let a = nonmarkov_d(gamma0, lambda);
    let b = C64::new(lambda, 0.0).sqrt() * C64::new(lambda - 2.0 * gamma0, 0.0).sqrt();
    (a, b)
}

/// Closed-form non-Markovian channel on a 2x2 operator.
pub fn nonmarkov_damping_apply(c: &Operator, gamma0: f64, lambda: f64, tau: f64) -> Result<Operator> {
    check_tau(tau)?;
    let g = nonmarkov_big_gamma(tau, gamma0, lambda);
    damping_with_amplitude(c, g, g * g)
}

/// Two-level channels with closed-form propagation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticChannel {
    AmplitudeDamping { gamma: f64 },
    NonMarkovJc { gamma0: f64, lambda: f64 },
}

impl AnalyticChannel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AnalyticChannel::AmplitudeDamping { gamma } => Rate::Constant { gamma }.validate(),
            AnalyticChannel::NonMarkovJc { gamma0, lambda } => {
                Rate::NonMarkovJc { gamma0, lambda }.validate()
            }
        }
    }

    /// Coherence amplitude after `tau`.
    pub fn amplitude(&self, tau: f64) -> f64 {
        match *self {
            AnalyticChannel::AmplitudeDamping { gamma } => (-gamma * tau / 2.0).exp(),
            AnalyticChannel::NonMarkovJc { gamma0, lambda } => nonmarkov_big_gamma(tau, gamma0, lambda),
        }
    }

    /// Excited population factor after `tau`.
    pub fn population(&self, tau: f64) -> f64 {
        match *self {
            AnalyticChannel::AmplitudeDamping { gamma } => (-gamma * tau).exp(),
            AnalyticChannel::NonMarkovJc { .. } => self.amplitude(tau).powi(2),
        }
    }
}

impl Evolution for AnalyticChannel {
    fn dim(&self) -> usize {
        2
    }

    fn evolve(&self, c: &Operator, tau: f64) -> Result<Operator> {
        check_tau(tau)?;
        damping_with_amplitude(c, self.amplitude(tau), self.population(tau))
    }

    fn rate_scale(&self) -> f64 {
        match *self {
            AnalyticChannel::AmplitudeDamping { gamma } if gamma > 0.0 => gamma,
            AnalyticChannel::AmplitudeDamping { .. } => 1.0,
            AnalyticChannel::NonMarkovJc { gamma0, .. } => gamma0,
        }
    }

    fn describe(&self) -> String {
        match self {
            AnalyticChannel::AmplitudeDamping { gamma } => format!("amplitude_damping(gamma={gamma})"),
            AnalyticChannel::NonMarkovJc { gamma0, lambda } => {
                format!("nonmarkov_jc(gamma0={gamma0}, lambda={lambda})")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Long-time limit
// ---------------------------------------------------------------------------

/// Kernel of a constant-rate generator.
#[derive(Clone, Debug)]
pub enum SteadyState {
    /// One-dimensional kernel: the unique stationary density.
    Unique { state: Operator, projector: DMatrix<C64> },
    /// Higher-dimensional kernel, including stationary coherences.
    Degenerate { basis: Vec<Operator>, projector: DMatrix<C64> },
}

impl SteadyState {
    /// `lim_{tau -> inf} e^{D tau}` as a superoperator.
    pub fn projector(&self) -> &DMatrix<C64> {
        match self {
            SteadyState::Unique { projector, .. } | SteadyState::Degenerate { projector, .. } => {
                projector
            }
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            SteadyState::Unique { .. } => 1,
            SteadyState::Degenerate { basis, .. } => basis.len(),
        }
    }

    /// `lim_{tau -> inf} e^{D tau}(C)`.
    pub fn apply(&self, c: &Operator) -> Result<Operator> {
        let p = self.projector();
        let dim = (p.nrows() as f64).sqrt().round() as usize;
        if c.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
        Ok(Operator::from_vectorized(&(p * c.vectorize()), dim))
    }
}

/// Kernel of the generator via SVD, and the spectral projector onto it.
pub fn steady_state(d: &Dissipator) -> Result<SteadyState> {
    let s = d.superop.as_ref().ok_or_else(|| {
        Error::InvalidParameter("steady state needs constant rates".into())
    })?;
    let projector = linalg::kernel_projector(s, tolerances::NULL_SPACE)?;
    let kernel = linalg::null_space(s, tolerances::NULL_SPACE)?;
    let basis: Vec<Operator> = kernel
        .column_iter()
        .map(|col| Operator::from_vectorized(&col.into_owned(), d.dim))
        .collect();
    match basis.len() {
        0 => Err(Error::NoConvergence("generator has no kernel".into())),
        1 => {
            let k = &basis[0];
            let tr = k.trace();
            if tr.norm() < tolerances::STRUCTURAL {
                return Err(Error::NoConvergence("stationary operator is traceless".into()));
            }
            let state = k.scale(Complex64::new(1.0, 0.0) / tr);
            Ok(SteadyState::Unique { state, projector })
        }
        _ => Ok(SteadyState::Degenerate { basis, projector }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{pauli, Axis, SodiumLevel};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sample_operator(dim: usize, seed: u64) -> Operator {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        Operator::from_matrix(DMatrix::from_fn(dim, dim, |_, _| c(next(), next()))).unwrap()
    }

    #[test]
    fn dissipator_on_excited_state() {
        let g = 0.7;
        let d = amplitude_damping(g).unwrap();
        let ee = Operator::diagonal(&[1.0, 0.0]);
        let out = d.apply(&ee, 0.0).unwrap();
        assert!(out.max_abs_diff(&Operator::diagonal(&[-g, g])) < 1e-15);
        let mixed = Operator::diagonal(&[0.5, 0.5]);
        let out = d.apply(&mixed, 0.0).unwrap();
        assert!(out.max_abs_diff(&Operator::diagonal(&[-g / 2.0, g / 2.0])) < 1e-15);
    }

    #[test]
    fn superoperator_matches_direct_action() {
        let d = sodium_dissipator(1.3).unwrap();
        let s = d.superoperator().unwrap();
        for seed in 0..5 {
            let x = sample_operator(6, seed);
            let direct = d.apply(&x, 0.0).unwrap();
            let vec = Operator::from_vectorized(&(s * x.vectorize()), 6);
            assert!(direct.max_abs_diff(&vec) < 1e-13);
            assert!(direct.trace().norm() < 1e-13);
        }
    }

    #[test]
    fn rejects_mismatched_jump() {
        let ch = DissipationChannel::new(Operator::identity(3), Rate::constant(1.0), "x").unwrap();
        assert!(matches!(
            build_dissipator(vec![ch], 2),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
        assert!(DissipationChannel::new(sigma_minus(), Rate::constant(-1.0), "x").is_err());
        assert!(DissipationChannel::new(sigma_minus(), Rate::NonMarkovJc { gamma0: 0.0, lambda: 1.0 }, "x").is_err());
    }

    #[test]
    fn evolve_zero_tau_and_negative() {
        let d = amplitude_damping(1.0).unwrap();
        let x = sample_operator(2, 3);
        assert_eq!(d.evolve(&x, 0.0).unwrap(), x);
        assert!(matches!(d.evolve(&x, -1.0), Err(Error::NegativeTau(_))));
    }

    #[test]
    fn analytic_damping_examples() {
        let ee = Operator::diagonal(&[1.0, 0.0]);
        let out = two_level_damping_apply(&ee, 1.0, 2f64.ln()).unwrap();
        assert!(out.max_abs_diff(&Operator::diagonal(&[0.5, 0.5])) < 1e-15);
        let eg = &sigma_minus().dagger() * 1.0;
        let out = two_level_damping_apply(&eg, 2.0, 0.3).unwrap();
        assert!((out.get(0, 1) - c((-0.3f64).exp(), 0.0)).norm() < 1e-15);
        let rho = crate::operator::bloch_to_density(crate::BlochVector::new(0.3, 0.2, -0.1)).unwrap();
        let out = two_level_damping_apply(&rho, 1.0, 800.0).unwrap();
        assert!(out.max_abs_diff(&Operator::diagonal(&[0.0, 1.0])) < 1e-15);
    }

    #[test]
    fn expm_matches_analytic_damping() {
        let d = amplitude_damping(0.8).unwrap();
        for (k, tau) in [0.1, 1.0, 10.0].into_iter().enumerate() {
            let x = sample_operator(2, 10 + k as u64);
            let a = d.evolve(&x, tau).unwrap();
            let b = two_level_damping_apply(&x, 0.8, tau).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn nonmarkov_rate_basics() {
        assert_eq!(nonmarkov_gamma(0.0, 1.0, 1.0), 0.0);
        let g = nonmarkov_gamma(1.0, 1.0, 1000.0);
        assert!((g - 1.0).abs() < 0.01);
        // cosh(d tau/2) = 0 at tau = pi/w in strong coupling; there gamma = 2 gamma0.
        let w = (2.0f64 * 0.5 - 0.25).sqrt();
        let g = nonmarkov_gamma(std::f64::consts::PI / w, 1.0, 0.5);
        assert!((g - 2.0).abs() < 1e-12, "{g}");
        // Leading order gamma0 lambda tau.
        let (g0, lam) = (0.3, 2.0);
        for tau in [1e-6, 1e-5] {
            let r = nonmarkov_gamma(tau, g0, lam) / (g0 * lam * tau);
            assert!((r - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn nonmarkov_rate_is_minus_twice_log_derivative() {
        for &(g0, lam) in &[(1.0, 10.0), (1.0, 0.5), (1.0, 2.0)] {
            for &tau in &[0.1, 0.7, 1.9, 3.3] {
                let h = 1e-6;
                let gp = nonmarkov_big_gamma(tau + h, g0, lam);
                let gm = nonmarkov_big_gamma(tau - h, g0, lam);
                let g = nonmarkov_big_gamma(tau, g0, lam);
                let fd = -2.0 * (gp - gm) / (2.0 * h) / g;
                let rate = nonmarkov_gamma(tau, g0, lam);
                assert!((fd - rate).abs() < 1e-6 * (1.0 + rate.abs()), "{g0} {lam} {tau}: {fd} vs {rate}");
            }
        }
    }

    #[test]
    fn big_gamma_examples() {
        assert_eq!(nonmarkov_big_gamma(0.0, 1.0, 3.0), 1.0);
        let g = nonmarkov_big_gamma(1.0, 1.0, 1000.0);
        assert!((g / (-0.5f64).exp() - 1.0).abs() < 0.01);
        // Critical damping lambda = 2 gamma0 has d = 0.
        let g = nonmarkov_big_gamma(1.5, 1.0, 2.0);
        assert!((g - (-1.5f64).exp() * (1.0 + 1.5)).abs() < 1e-14);
    }

    #[test]
    fn big_gamma_pseudomode_equation() {
        // G'' = -lambda G' - gamma0 lambda G / 2
        for &(g0, lam) in &[(1.0, 10.0), (1.0, 0.5)] {
            for &tau in &[0.5, 2.0, 4.5] {
                let h = 1e-4;
                let f = |t| nonmarkov_big_gamma(t, g0, lam);
                let d1 = (f(tau + h) - f(tau - h)) / (2.0 * h);
                let d2 = (f(tau + h) - 2.0 * f(tau) + f(tau - h)) / (h * h);
                let resid = d2 + lam * d1 + g0 * lam / 2.0 * f(tau);
                assert!(resid.abs() < 1e-6, "{resid}");
            }
        }
    }

    #[test]
    fn artanh_form_has_same_modulus() {
        for &(g0, lam) in &[(1.0, 10.0), (1.0, 0.5), (0.3, 5.0), (2.0, 1.0)] {
            for &tau in &[0.1, 0.9, 2.5, 4.0] {
                let a = nonmarkov_big_gamma_artanh_form(tau, g0, lam);
                let b = nonmarkov_big_gamma(tau, g0, lam);
                assert!((a.norm() - b.abs()).abs() < 1e-10, "{g0} {lam} {tau}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn d_forms_agree() {
        for &(g0, lam) in &[(1.0, 10.0), (1.0, 0.5), (0.1, 1.0), (3.0, 0.01)] {
            let (a, b) = nonmarkov_d_forms(g0, lam);
            assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn strong_coupling_amplitude_changes_sign() {
        let f = |t| nonmarkov_big_gamma(t, 1.0, 0.5);
        assert!(f(4.0) > 0.0 && f(5.5) < 0.0);
    }

    #[test]
    fn ode_matches_closed_form_nonmarkov() {
        for &(g0, lam) in &[(1.0, 10.0), (1.0, 0.5)] {
            let d = nonmarkov_jc(g0, lam).unwrap();
            let x = sample_operator(2, 77);
            let taus = [0.5, 1.0, 2.5, 5.0];
            let numeric = d.evolve_many(&x, &taus).unwrap();
            for (tau, n) in taus.iter().zip(&numeric) {
                let exact = nonmarkov_damping_apply(&x, g0, lam, *tau).unwrap();
                assert!(n.max_abs_diff(&exact) < 1e-7, "{lam} {tau}: {:e}", n.max_abs_diff(&exact));
            }
        }
    }

    #[test]
    fn ode_dense_grid_through_rate_pole() {
        let (g0, lam) = (1.0, 0.5);
        let pole = nonmarkov_poles(g0, lam, 5.0)[0];
        assert!((nonmarkov_big_gamma(pole, g0, lam)).abs() < 1e-12);
        let d = nonmarkov_jc(g0, lam).unwrap();
        let x = sample_operator(2, 78);
        let mut taus: Vec<f64> = (1..=100).map(|k| k as f64 * 0.05).collect();
        taus.extend([pole - 0.01, pole + 0.01]);
        taus.sort_by(f64::total_cmp);
        let numeric = d.evolve_many(&x, &taus).unwrap();
        for (tau, n) in taus.iter().zip(&numeric) {
            let exact = nonmarkov_damping_apply(&x, g0, lam, *tau).unwrap();
            assert!(n.max_abs_diff(&exact) < 1e-7, "{tau}: {:e}", n.max_abs_diff(&exact));
        }
        assert!(d.evolve(&x, pole).is_err());
    }

    #[test]
    fn time_dependent_propagator_matches_evolve() {
        let d = nonmarkov_jc(1.0, 2.0).unwrap();
        let p = d.propagator(1.3).unwrap();
        let x = sample_operator(2, 5);
        let a = Operator::from_vectorized(&(p * x.vectorize()), 2);
        let b = d.evolve(&x, 1.3).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-8);
    }

    #[test]
    fn two_level_steady_state_unique() {
        let d = amplitude_damping(1.0).unwrap();
        match d.steady_state().unwrap() {
            SteadyState::Unique { state, .. } => {
                assert!(state.max_abs_diff(&Operator::diagonal(&[0.0, 1.0])) < 1e-12)
            }
            other => panic!("expected unique, got rank {}", other.rank()),
        }
    }

    #[test]
    fn sodium_steady_space_holds_ground_coherences() {
        let d = sodium_dissipator(1.0).unwrap();
        let ss = d.steady_state().unwrap();
        assert_eq!(ss.rank(), 4);
        let [g1, g2] = SodiumLevel::ground_indices();
        let coh = Operator::outer(&crate::operator::ket(6, g1), &crate::operator::ket(6, g2)).unwrap();
        assert!(ss.apply(&coh).unwrap().max_abs_diff(&coh) < 1e-12);
        let x = sample_operator(6, 9);
        let far = d.evolve(&x, 50.0).unwrap();
        assert!(far.max_abs_diff(&ss.apply(&x).unwrap()) < 1e-8);
    }

    #[test]
    fn non_markov_breaks_semigroup() {
        let d = nonmarkov_jc(1.0, 1.0).unwrap();
        let x = Operator::diagonal(&[1.0, 0.0]);
        let once = nonmarkov_damping_apply(&x, 1.0, 1.0, 2.0).unwrap();
        let half = nonmarkov_damping_apply(&x, 1.0, 1.0, 1.0).unwrap();
        let twice = nonmarkov_damping_apply(&half, 1.0, 1.0, 1.0).unwrap();
        assert!(once.max_abs_diff(&twice) > 1e-2);
        assert!(!d.is_constant());
        let _ = pauli(Axis::X);
    }
}
