// SPDX-License-Identifier: Apache-2.0

//! Dense linear algebra on top of nalgebra: matrix exponential and null spaces.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::C64;

const THETA: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068),
    (13, 5.371920351148152),
];

/// Padé coefficients `b_j = (2m-j)! m! / ((2m)! j! (m-j)!)`, scaled so `b_0` is
/// the leading value used by scaling-and-squaring tables.
fn pade_coefficients(m: usize) -> Vec<f64> {
    // Build as ratios to avoid factorial overflow: b_{j+1}/b_j = (m-j)/((2m-j)(j+1)).
    let mut b = vec![1.0f64; m + 1];
    for j in 0..m {
        b[j + 1] = b[j] * (m - j) as f64 / (((2 * m - j) * (j + 1)) as f64);
    }
    // Normalise to b_m = 1 as in the usual tables; the quotient is unchanged.
    let scale = b[m];
    b.iter().map(|v| v / scale).collect()
}

fn one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring with a Padé approximant of degree 3 to 13.
pub fn expm(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidOperator);
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix in expm".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = one_norm(a);
    let ident = DMatrix::<C64>::identity(n, n);
    if norm == 0.0 {
        return Ok(ident);
    }

    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            return pade_solve(a, m, &ident);
        }
    }
    let s = ((norm / THETA[4].1).log2().ceil()).max(0.0) as i32;
    let scaled = a * C64::new(2f64.powi(-s), 0.0);
    let mut r = pade_solve(&scaled, 13, &ident)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_solve(a: &DMatrix<C64>, m: usize, ident: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let b = pade_coefficients(m);
    let c = |x: f64| C64::new(x, 0.0);
    let a2 = a * a;
    let (u, v) = if m < 13 {
        // Powers A^0, A^2, A^4, ...
        let mut powers = vec![ident.clone(), a2.clone()];
        while powers.len() < m.div_ceil(2) + 1 {
            let next = powers.last().unwrap() * &a2;
            powers.push(next);
        }
        let mut odd = DMatrix::zeros(a.nrows(), a.ncols());
        let mut even = DMatrix::zeros(a.nrows(), a.ncols());
        for (k, p) in powers.iter().enumerate() {
            if 2 * k < m {
                odd += p * c(b[2 * k + 1]);
            }
            if 2 * k <= m {
                even += p * c(b[2 * k]);
            }
        }
        (a * odd, even)
    } else {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let u_inner = &a6 * (&a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]))
            + &a6 * c(b[7])
            + &a4 * c(b[5])
            + &a2 * c(b[3])
            + ident * c(b[1]);
        let u = a * u_inner;
        let v = &a6 * (&a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]))
            + &a6 * c(b[6])
            + &a4 * c(b[4])
            + &a2 * c(b[2])
            + ident * c(b[0]);
        (u, v)
    };
    let p = &v + &u;
    let q = &v - &u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::NoConvergence("singular Padé denominator".into()))
}

/// Orthonormal basis of the right null space of `a` (columns of the result).
///
/// Singular values below `rel_tol * sigma_max` count as zero. Values inside the
/// band `(rel_tol, 1e3 * rel_tol]` are treated as ambiguous and reported as an
/// error so callers never guess the rank.
pub fn null_space(a: &DMatrix<C64>, rel_tol: f64) -> Result<DMatrix<C64>> {
    let n = a.ncols();
    // Pad to square so the SVD returns a full V.
    let rows = a.nrows().max(n);
    let mut padded = DMatrix::<C64>::zeros(rows, n);
    padded.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = padded
        .try_svd(false, true, 1e-15, 10_000)
        .ok_or_else(|| Error::NoConvergence("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::NoConvergence("SVD returned no V".into()))?;
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    let mut cols = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cut {
            cols.push(v_t.row(k).adjoint());
        } else if s <= 1e3 * cut {
            return Err(Error::NoConvergence(format!(
                "ambiguous null-space rank: singular value {s:e} near cutoff {cut:e}"
            )));
        }
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Basis of the left null space: columns `y` with `y^† a = 0`.
pub fn left_null_space(a: &DMatrix<C64>, rel_tol: f64) -> Result<DMatrix<C64>> {
    null_space(&a.adjoint(), rel_tol)
}

/// Spectral projector onto the kernel of `a`, `R (L^† R)^{-1} L^†`.
///
/// `R` and `L` span right and left kernels. The result is the projector onto
/// `ker a` along `range a`, which is the `t -> inf` limit of `exp(a t)` when
/// every other eigenvalue has negative real part.
pub fn kernel_projector(a: &DMatrix<C64>, rel_tol: f64) -> Result<DMatrix<C64>> {
    let r = null_space(a, rel_tol)?;
    let l = left_null_space(a, rel_tol)?;
    if r.ncols() != l.ncols() {
        return Err(Error::NoConvergence(format!(
            "left/right kernel dimensions differ: {} vs {}",
            l.ncols(),
            r.ncols()
        )));
    }
    if r.ncols() == 0 {
        return Ok(DMatrix::zeros(a.nrows(), a.ncols()));
    }
    let gram = l.adjoint() * &r;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::NoConvergence("kernel is not semisimple".into()))?;
    Ok(r * inv * l.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn pade_coefficients_degree_13_table() {
        let b = pade_coefficients(13);
        // Leading entries of the standard degree-13 table (b_13 = 1).
        assert!((b[0] / 64764752532480000.0 - 1.0).abs() < 1e-14);
        assert!((b[1] / 32382376266240000.0 - 1.0).abs() < 1e-14);
        assert!((b[12] / 182.0 - 1.0).abs() < 1e-14);
        let b3 = pade_coefficients(3);
        assert_eq!(b3.iter().map(|v| v.round()).collect::<Vec<_>>(), vec![120.0, 60.0, 12.0, 1.0]);
    }

    #[test]
    fn expm_zero_and_diagonal() {
        let z = DMatrix::<C64>::zeros(3, 3);
        assert_eq!(expm(&z).unwrap(), DMatrix::identity(3, 3));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-3.0, 0.5), c(20.0, 0.0)]));
        let e = expm(&d).unwrap();
        assert!((e[(0, 0)] - c(1.0f64.exp(), 0.0)).norm() < 1e-14);
        assert!((e[(1, 1)] - c(-3.0, 0.5).exp()).norm() < 1e-15);
        assert!((e[(2, 2)].re / 20f64.exp() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn expm_rotation_generator() {
        // exp(-i theta sigma_y) is a real rotation.
        let theta = 0.7;
        let a = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(-theta, 0.), c(theta, 0.), c(0., 0.)]);
        let e = expm(&a).unwrap();
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[c(theta.cos(), 0.), c(-theta.sin(), 0.), c(theta.sin(), 0.), c(theta.cos(), 0.)],
        );
        assert!(max_diff(&e, &expected) < 1e-15);
    }

    #[test]
    fn expm_nilpotent() {
        let a = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(5.0, 1.0), c(0., 0.), c(0., 0.)]);
        let e = expm(&a).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(5.0, 1.0), c(0., 0.), c(1., 0.)]);
        assert!(max_diff(&e, &expected) < 1e-13);
    }

    #[test]
    fn expm_matches_nalgebra_across_norms() {
        let base = DMatrix::from_fn(5, 5, |i, j| {
            c(((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5, ((i + 2 * j) % 5) as f64 / 5.0 - 0.4)
        });
        for scale in [1e-4, 0.02, 0.2, 0.9, 2.0, 5.0, 40.0] {
            let a = &base * c(scale, 0.0);
            let ours = expm(&a).unwrap();
            let theirs = a.clone().exp();
            let rel = max_diff(&ours, &theirs) / theirs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(rel < 1e-12, "scale {scale}: rel {rel:e}");
        }
    }

    #[test]
    fn expm_rejects_non_finite() {
        let mut a = DMatrix::<C64>::zeros(2, 2);
        a[(0, 1)] = c(f64::INFINITY, 0.0);
        assert!(expm(&a).is_err());
    }

    #[test]
    fn null_space_of_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 3, &[c(1., 0.), c(0., 0.), c(1., 0.), c(0., 0.), c(1., 0.), c(0., 0.)]);
        let k = null_space(&a, 1e-9).unwrap();
        assert_eq!(k.ncols(), 1);
        assert!((&a * &k).norm() < 1e-14);
        let full = DMatrix::<C64>::identity(3, 3);
        assert_eq!(null_space(&full, 1e-9).unwrap().ncols(), 0);
    }

    #[test]
    fn null_space_ambiguous_band() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.), c(1e-8, 0.)]));
        assert!(matches!(null_space(&a, 1e-9), Err(Error::NoConvergence(_))));
    }

    #[test]
    fn kernel_projector_is_exp_limit() {
        // Generator of a two-state decay 1 -> 0 in vectorised-population form.
        let a = DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(-1., 0.)]);
        let p = kernel_projector(&a, 1e-9).unwrap();
        let limit = expm(&(&a * c(60.0, 0.0))).unwrap();
        assert!(max_diff(&p, &limit) < 1e-14);
        assert!(max_diff(&(&p * &p), &p) < 1e-14);
    }
}
