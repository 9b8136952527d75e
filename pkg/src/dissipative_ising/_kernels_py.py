"""Pure-numpy trajectory kernel, vectorized over a batch of trajectories.

Interface shared with the compiled ``_kernels`` module.  States are
``2**n`` amplitude vectors with site 0 on the most significant bit and bit
value 0 meaning spin up.
"""
from __future__ import annotations

import numpy as np

FRAME_ZZ = 0
FRAME_XX = 1


def _fwht(psi: np.ndarray, n: int) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis, in place."""
    b = psi.shape[0]
    for bit in range(n):
        lo = 1 << bit
        view = psi.reshape(b, -1, 2, lo)
        a = view[:, :, 0, :].copy()
        view[:, :, 0, :] += view[:, :, 1, :]
        view[:, :, 1, :] = a - view[:, :, 1, :]
    return psi


def _ising(psi, phase, frame, n):
    if frame == FRAME_XX:
        _fwht(psi, n)
        psi *= phase
        _fwht(psi, n)
    else:
        psi *= phase


def _noise(psi, w, cos_t, sin_t, frame, n):
    b = psi.shape[0]
    for j in range(n):
        lo = 1 << (n - 1 - j)
        view = psi.reshape(b, -1, 2, lo)
        wj = w[:, j][:, None, None]
        if frame == FRAME_XX:
            view[:, :, 0, :] *= np.exp(-1j * wj)
            view[:, :, 1, :] *= np.exp(1j * wj)
        else:
            c, s = np.cos(wj), np.sin(wj)
            up = view[:, :, 0, :].copy()
            dn = view[:, :, 1, :]
            e = cos_t[j] + 1j * sin_t[j]
            view[:, :, 0, :] = c * up - 1j * s * np.conj(e) * dn
            view[:, :, 1, :] = -1j * s * e * up + c * dn


def _measure(psi, flips, zymask, nys, out_vals, out_norm, k):
    dim = psi.shape[1]
    idx = np.arange(dim, dtype=np.int64)
    for o in range(flips.size):
        mask = idx & zymask[o]
        parity = np.zeros(dim, dtype=np.int64)
        while mask.any():
            parity ^= mask & 1
            mask = mask >> 1
        sign = 1.0 - 2.0 * parity
        val = (np.conj(psi[:, idx ^ flips[o]]) * psi * sign).sum(axis=1) * (1j ** nys[o])
        out_vals[:, k, o] = val.real
    out_norm[:, k] = np.sqrt((np.abs(psi) ** 2).sum(axis=1))


def propagate(psi0, frame, phase_half, phase_full, cos_t, sin_t, noise, sample_steps, flips, zymask, nys):
    """Evolve ``noise.shape[0]`` trajectories; return ``(values[B,S,O], norms[B,S])``.

    ``noise[b, k, j]`` is the integrated phase ``W_j`` of step ``k``.
    """
    noise = np.asarray(noise, dtype=float)
    b, steps, n = noise.shape
    sample_steps = np.asarray(sample_steps, dtype=np.int64)
    values = np.zeros((b, sample_steps.size, len(flips)))
    norms = np.zeros((b, sample_steps.size))
    psi = np.repeat(np.asarray(psi0, dtype=complex)[None, :], b, axis=0)
    flips = np.asarray(flips, dtype=np.int64)
    zymask = np.asarray(zymask, dtype=np.int64)
    nys = np.asarray(nys, dtype=np.int64)
    k = 0
    while k < sample_steps.size and sample_steps[k] == 0:
        _measure(psi, flips, zymask, nys, values, norms, k)
        k += 1
    if steps == 0:
        return values, norms
    _ising(psi, phase_half, frame, n)
    for step in range(steps):
        _noise(psi, noise[:, step, :], cos_t, sin_t, frame, n)
        nxt = step + 1
        boundary = nxt == steps or (k < sample_steps.size and sample_steps[k] == nxt)
        if boundary:
            _ising(psi, phase_half, frame, n)
            while k < sample_steps.size and sample_steps[k] == nxt:
                _measure(psi, flips, zymask, nys, values, norms, k)
                k += 1
            if nxt < steps:
                _ising(psi, phase_half, frame, n)
        else:
            _ising(psi, phase_full, frame, n)
    return values, norms
