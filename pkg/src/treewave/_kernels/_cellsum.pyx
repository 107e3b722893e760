# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled oscillatory cell sum; same contract as cellsum_np.cell_sum."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, fabs, M_PI
from scipy.special.cython_special cimport fresnel

cnp.import_array()


def cell_sum(object z_in, object u_in, int s):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] z = np.ascontiguousarray(
        np.atleast_2d(np.asarray(z_in, dtype=np.float64)))
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] u = np.ascontiguousarray(
        np.asarray(u_in, dtype=np.complex128))
    cdef Py_ssize_t P = z.shape[0]
    cdef Py_ssize_t N = z.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = np.zeros(P, dtype=np.complex128)
    if N < 2:
        return out

    cdef double sq2pi = sqrt(2.0 / M_PI)
    cdef double sqpi2 = sqrt(M_PI / 2.0)
    cdef double z0, z1, dz, zm, sv, cv, ph0, ph1
    cdef double complex F0, F1, E0, E1, u0, u1, m, acc, cell
    cdef double complex inv2is = 1.0 / (2j * s)
    cdef Py_ssize_t i, k

    for i in range(P):
        acc = 0
        z1 = z[i, 0]
        fresnel(z1 * sq2pi, &sv, &cv)
        F1 = sqpi2 * (cv + 1j * s * sv)
        ph1 = z1 * z1
        E1 = cos(ph1) + 1j * s * sin(ph1)
        for k in range(N - 1):
            z0 = z1
            F0 = F1
            E0 = E1
            z1 = z[i, k + 1]
            fresnel(z1 * sq2pi, &sv, &cv)
            F1 = sqpi2 * (cv + 1j * s * sv)
            ph1 = z1 * z1
            E1 = cos(ph1) + 1j * s * sin(ph1)
            u0 = u[k]
            u1 = u[k + 1]
            dz = z1 - z0
            if fabs(dz) < 1e-8:
                zm = 0.5 * (z0 + z1)
                ph0 = zm * zm
                cell = (cos(ph0) + 1j * s * sin(ph0)) * 0.5 * (u0 + u1) * dz
            else:
                m = (u1 - u0) / dz
                cell = (u0 - m * z0) * (F1 - F0) + m * (E1 - E0) * inv2is
            acc = acc + cell
        out[i] = acc
    return out
