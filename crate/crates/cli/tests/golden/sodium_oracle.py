"""Reference weak-value trace for the six-level sodium pair.

Independent of the Rust code: Clebsch-Gordan amplitudes come from sympy,
J_y from the ladder operators, propagation from scipy's expm on a
row-stacked Liouvillian.  Basis: excited m = -3/2..3/2, then ground
m = -1/2, 1/2.

    python3 sodium_oracle.py > sodium_anomalous.csv
"""

import numpy as np
import sympy
from scipy.linalg import expm
from sympy.physics.quantum.cg import CG

HALF = sympy.Rational(1, 2)
EXC = [sympy.Rational(k, 2) for k in (-3, -1, 1, 3)]
GRD = [-HALF, HALF]


def exc(m):
    return EXC.index(m)


def grd(m):
    return 4 + GRD.index(m)


def jumps():
    ops = []
    for q in (0, -1, 1):
        L = np.zeros((6, 6), complex)
        for mg in GRD:
            me = mg + q
            if me in EXC:
                c = CG(HALF, mg, 1, q, sympy.Rational(3, 2), me).doit()
                L[grd(mg), exc(me)] = float(c)
        ops.append(L)
    return ops


def jy_block(j, ms):
    n = len(ms)
    jp = np.zeros((n, n), complex)
    for k, m in enumerate(ms[:-1]):
        jp[k + 1, k] = float(sympy.sqrt(j * (j + 1) - m * (m + 1)))
    return (jp - jp.conj().T) / 2j


def jy():
    out = np.zeros((6, 6), complex)
    out[:4, :4] = jy_block(sympy.Rational(3, 2), EXC)
    out[4:, 4:] = jy_block(HALF, GRD)
    return out


def liouvillian(ops, gamma):
    eye = np.eye(6)
    lv = np.zeros((36, 36), complex)
    for L in ops:
        LdL = L.conj().T @ L
        # row-stacking: vec(A X B) = kron(A, B.T) vec(X)
        lv += np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T)
    return gamma * lv


def main():
    a = 0.0498
    psi_i = np.array([1, 1j, 1, 1, 0, 0]) / 2
    psi_f = np.array([a, -0.995, 0, -a * (1 + 1j), a, -0.00734 + 0.00114j])
    psi_f = psi_f / np.linalg.norm(psi_f)
    rho = np.outer(psi_i, psi_i.conj())
    proj = np.outer(psi_f, psi_f.conj())
    A = jy()
    lv = liouvillian(jumps(), 1.0)
    print("gamma_tau,re_wv,im_wv,postselect_prob")
    for gt in np.linspace(0.0, 10.0, 21):
        prop = expm(lv * gt)
        num = np.trace(proj @ (prop @ (A @ rho).reshape(-1)).reshape(6, 6))
        den = np.trace(proj @ (prop @ rho.reshape(-1)).reshape(6, 6))
        wv = num / den
        print(f"{gt:.16e},{wv.real:.16e},{wv.imag:.16e},{den.real:.16e}")


if __name__ == "__main__":
    main()
