// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand-Prince 5(4) integrator for complex linear systems.

use crate::error::{Error, Result};
use crate::tolerances;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: tolerances::ODE_RTOL,
            atol: tolerances::ODE_ATOL,
            max_steps: 200_000,
            initial_step: None,
        }
    }
}

// Butcher tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for &(c, k) in terms {
            acc += k[i] * c;
        }
        *o = y[i] + acc * h;
    }
}

/// Integrates `y' = f(t, y)` from `t0` and returns the state at each of the
/// ascending `times` (all `>= t0`). Steps land exactly on every output time.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[C64], times: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidParameter("output times must ascend from t0".into()));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let zero = C64::new(0.0, 0.0);
    let mut k: [Vec<C64>; 7] = std::array::from_fn(|_| vec![zero; n]);
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut out = Vec::with_capacity(times.len());
    let span = times.last().map_or(0.0, |&tl| tl - t0);
    let mut h = opts.initial_step.unwrap_or((span * 1e-3).max(1e-6));
    let mut steps = 0usize;
    f(t, &y, &mut k[0]);

    for &target in times {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::NoConvergence(format!(
                    "ODE exceeded {} steps at t = {t}",
                    opts.max_steps
                )));
            }
            steps += 1;
            let remaining = target - t;
            let last = h >= remaining;
            let hs = if last { remaining } else { h };

            axpy(&mut tmp, &y, hs, &[(A21, &k[0])]);
            f(t + C2 * hs, &tmp, &mut k[1]);
            axpy(&mut tmp, &y, hs, &[(A31, &k[0]), (A32, &k[1])]);
            f(t + C3 * hs, &tmp, &mut k[2]);
            axpy(&mut tmp, &y, hs, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
            f(t + C4 * hs, &tmp, &mut k[3]);
            axpy(&mut tmp, &y, hs, &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])]);
            f(t + C5 * hs, &tmp, &mut k[4]);
            axpy(
                &mut tmp,
                &y,
                hs,
                &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])],
            );
            f(t + hs, &tmp, &mut k[5]);
            axpy(
                &mut y_new,
                &y,
                hs,
                &[(B1, &k[0]), (B3, &k[2]), (B4, &k[3]), (B5, &k[4]), (B6, &k[5])],
            );
            f(t + hs, &y_new, &mut k[6]);

            let mut err2 = 0.0;
            for i in 0..n {
                let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * hs;
                let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err2 += (e.norm() / sc).powi(2);
            }
            let err = (err2 / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                h = hs * 0.2;
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::NoConvergence(format!("non-finite ODE state near t = {t}")));
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { target } else { t + hs };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                // Do not let a short final step shrink the next one.
                h = if last { h.max(hs * factor) } else { hs * factor };
            } else {
                h = hs * factor.min(1.0);
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::NoConvergence(format!("ODE step underflow at t = {t}")));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}
