# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernel; same contract as ``_kernels_py.propagate``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef double complex cplx


cdef inline void _fwht(cplx* psi, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t h = 1, i, j
    cdef cplx a, b
    while h < dim:
        i = 0
        while i < dim:
            for j in range(i, i + h):
                a = psi[j]
                b = psi[j + h]
                psi[j] = a + b
                psi[j + h] = a - b
            i += 2 * h
        h *= 2


cdef inline void _ising(cplx* psi, const cplx* phase, Py_ssize_t dim, int frame) noexcept nogil:
    cdef Py_ssize_t i
    if frame == 1:
        _fwht(psi, dim)
    for i in range(dim):
        psi[i] = psi[i] * phase[i]
    if frame == 1:
        _fwht(psi, dim)


cdef inline void _noise(cplx* psi, const double* w, const double* cos_t, const double* sin_t,
                        Py_ssize_t n, Py_ssize_t dim, int frame) noexcept nogil:
    cdef Py_ssize_t j, lo, base, i
    cdef double c, s
    cdef cplx up, dn, m01, m10, e_minus, e_plus
    for j in range(n):
        lo = (<Py_ssize_t>1) << (n - 1 - j)
        c = cos(w[j])
        s = sin(w[j])
        if frame == 1:
            e_minus = c - 1j * s
            e_plus = c + 1j * s
            base = 0
            while base < dim:
                for i in range(base, base + lo):
                    psi[i] = psi[i] * e_minus
                    psi[i + lo] = psi[i + lo] * e_plus
                base += 2 * lo
        else:
            m01 = -1j * s * (cos_t[j] - 1j * sin_t[j])
            m10 = -1j * s * (cos_t[j] + 1j * sin_t[j])
            base = 0
            while base < dim:
                for i in range(base, base + lo):
                    up = psi[i]
                    dn = psi[i + lo]
                    psi[i] = c * up + m01 * dn
                    psi[i + lo] = m10 * up + c * dn
                base += 2 * lo


cdef extern from *:
    int __builtin_parityll(unsigned long long) nogil


cdef void _measure(const cplx* psi, Py_ssize_t dim, const long long* flips, const long long* zymask,
                   const long long* nys, Py_ssize_t n_obs, double* out_vals, double* out_norm) noexcept nogil:
    cdef Py_ssize_t o, i
    cdef cplx acc, ph, v
    cdef double norm = 0.0
    for i in range(dim):
        norm += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
    out_norm[0] = sqrt(norm)
    for o in range(n_obs):
        acc = 0
        for i in range(dim):
            v = psi[i ^ flips[o]].conjugate() * psi[i]
            if __builtin_parityll(<unsigned long long>(i & zymask[o])):
                acc = acc - v
            else:
                acc = acc + v
        ph = 1
        for i in range(nys[o] % 4):
            ph = ph * 1j
        out_vals[o] = (acc * ph).real


def propagate(psi0, int frame, phase_half, phase_full, cos_t, sin_t, noise, sample_steps, flips, zymask, nys):
    cdef cnp.ndarray[cplx, ndim=1, mode="c"] p0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=1, mode="c"] ph = np.ascontiguousarray(phase_half, dtype=np.complex128)
    cdef cnp.ndarray[cplx, ndim=1, mode="c"] pf = np.ascontiguousarray(phase_full, dtype=np.complex128)
    cdef cnp.ndarray[double, ndim=1, mode="c"] ct = np.ascontiguousarray(cos_t, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1, mode="c"] st = np.ascontiguousarray(sin_t, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3, mode="c"] w = np.ascontiguousarray(noise, dtype=np.float64)
    cdef cnp.ndarray[long long, ndim=1, mode="c"] ss = np.ascontiguousarray(sample_steps, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1, mode="c"] fl = np.ascontiguousarray(flips, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1, mode="c"] zy = np.ascontiguousarray(zymask, dtype=np.int64)
    cdef cnp.ndarray[long long, ndim=1, mode="c"] ny = np.ascontiguousarray(nys, dtype=np.int64)
    cdef Py_ssize_t B = w.shape[0], steps = w.shape[1], n = w.shape[2]
    cdef Py_ssize_t dim = p0.shape[0], S = ss.shape[0], O = fl.shape[0]
    values_arr = np.zeros((B, S, O))
    norms_arr = np.zeros((B, S))
    cdef double[:, :, ::1] values = values_arr
    cdef double[:, ::1] norms = norms_arr
    cdef Py_ssize_t b, step, k, i, nxt
    cdef bint boundary
    cdef cplx* psi = <cplx*> malloc(dim * sizeof(cplx))
    if psi == NULL:
        raise MemoryError()
    with nogil:
        for b in range(B):
            for i in range(dim):
                psi[i] = p0[i]
            k = 0
            while k < S and ss[k] == 0:
                _measure(psi, dim, &fl[0], &zy[0], &ny[0], O, &values[b, k, 0] if O else NULL, &norms[b, k])
                k += 1
            if steps == 0:
                continue
            _ising(psi, &ph[0], dim, frame)
            for step in range(steps):
                _noise(psi, &w[b, step, 0], &ct[0], &st[0], n, dim, frame)
                nxt = step + 1
                boundary = nxt == steps or (k < S and ss[k] == nxt)
                if boundary:
                    _ising(psi, &ph[0], dim, frame)
                    while k < S and ss[k] == nxt:
                        _measure(psi, dim, &fl[0], &zy[0], &ny[0], O, &values[b, k, 0] if O else NULL, &norms[b, k])
                        k += 1
                    if nxt < steps:
                        _ising(psi, &ph[0], dim, frame)
                else:
                    _ising(psi, &pf[0], dim, frame)
    free(psi)
    return values_arr, norms_arr
