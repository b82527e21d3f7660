"""Hot RK4 stepping loops for the two closed loops.

One source body per loop; a numba-compiled twin is built when numba imports
successfully, and the plain function doubles as the pure-numpy fallback.
Selection order: an explicit ``backend=`` argument wins, then the environment
flag ``CONSENSUS_NET_NO_NUMBA=1`` forces numpy, otherwise numba is used when
available.  ``benchmarks/bench_kernels.py`` compares the two paths.

Within each step the active disturbance segment is frozen at the step's left
endpoint, so a stage landing exactly on a switch time still sees the old
segment; the step starting at the switch sees the new one (right-continuous
switching aligned to the step grid).
"""

from __future__ import annotations

import os

import numpy as np

ENV_DISABLE_NUMBA = "CONSENSUS_NET_NO_NUMBA"

_STAGE_OFFSETS = np.array([0.0, 0.5, 0.5, 1.0])
_STAGE_WEIGHTS = np.array([1.0, 2.0, 2.0, 1.0])


def _rk4_matched(z0, L, g1, g2, g3, g4,
                 seg_starts, seg_base, seg_ch, seg_ce, seg_rate,
                 dt, n_steps, sample_every, out):
    """Step the matched loop; write every sample_every-th state into ``out``.

    Returns the number of finite samples written; fewer than out.shape[0]
    means the state went non-finite at the first missing sample.
    """
    n = L.shape[0]
    n_seg = seg_starts.shape[0]
    z = z0.copy()
    out[0] = z
    seg = 0
    kcur = np.zeros(3 * n)  # defined before the stage loop for type stability
    for k in range(n_steps):
        t = k * dt
        while seg + 1 < n_seg and t >= seg_starts[seg + 1] - 0.25 * dt:
            seg += 1
        base = seg_base[seg]
        ch = seg_ch[seg]
        ce = seg_ce[seg]
        rate = seg_rate[seg]
        acc = np.zeros(3 * n)
        for s in range(4):
            if s == 0:
                zs = z
            else:
                zs = z + (dt * _STAGE_OFFSETS[s]) * kcur
            ts = t + _STAGE_OFFSETS[s] * dt
            x = zs[0:n]
            y = zs[n:2 * n]
            dh = zs[2 * n:3 * n]
            lx = np.dot(L, x)
            scal = (ch + ce * np.exp(-rate * ts)) / (12.0 + ts)
            kcur = np.empty(3 * n)
            kcur[0:n] = y
            kcur[n:2 * n] = -g1 * lx - g2 * y - g3 * dh + base + scal
            kcur[2 * n:3 * n] = g1 * lx + g4 * y
            acc = acc + _STAGE_WEIGHTS[s] * kcur
        z = z + (dt / 6.0) * acc
        if (k + 1) % sample_every == 0:
            row = (k + 1) // sample_every
            if not np.isfinite(z).all():
                return row
            out[row] = z
    return out.shape[0]


def _rk4_unmatched(z0, L, kx, kd, ks, a1, nu,
                   seg_starts, seg_base, seg_ch, seg_ce, seg_rate,
                   dt, n_steps, sample_every, out):
    """Unmatched-loop twin of ``_rk4_matched``."""
    n = L.shape[0]
    n_seg = seg_starts.shape[0]
    z = z0.copy()
    out[0] = z
    seg = 0
    kcur = np.zeros(3 * n)  # defined before the stage loop for type stability
    for k in range(n_steps):
        t = k * dt
        while seg + 1 < n_seg and t >= seg_starts[seg + 1] - 0.25 * dt:
            seg += 1
        base = seg_base[seg]
        ch = seg_ch[seg]
        ce = seg_ce[seg]
        rate = seg_rate[seg]
        acc = np.zeros(3 * n)
        for s in range(4):
            if s == 0:
                zs = z
            else:
                zs = z + (dt * _STAGE_OFFSETS[s]) * kcur
            ts = t + _STAGE_OFFSETS[s] * dt
            x = zs[0:n]
            y = zs[n:2 * n]
            dh = zs[2 * n:3 * n]
            yt = y - ks * dh
            drive = a1 * x + nu * yt
            lx = np.dot(L, x)
            scal = (ch + ce * np.exp(-rate * ts)) / (12.0 + ts)
            kcur = np.empty(3 * n)
            kcur[0:n] = y + base + scal
            kcur[n:2 * n] = -kx * lx - kd * yt - drive
            kcur[2 * n:3 * n] = -drive / ks
            acc = acc + _STAGE_WEIGHTS[s] * kcur
        z = z + (dt / 6.0) * acc
        if (k + 1) % sample_every == 0:
            row = (k + 1) // sample_every
            if not np.isfinite(z).all():
                return row
            out[row] = z
    return out.shape[0]


rk4_matched_numpy = _rk4_matched
rk4_unmatched_numpy = _rk4_unmatched

try:
    from numba import njit

    rk4_matched_numba = njit(cache=True)(_rk4_matched)
    rk4_unmatched_numba = njit(cache=True)(_rk4_unmatched)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    rk4_matched_numba = None
    rk4_unmatched_numba = None
    HAVE_NUMBA = False


def active_backend(backend: str | None = None) -> str:
    """Resolve 'numba' or 'numpy' from the argument and the environment."""
    if backend is not None:
        if backend not in ("numba", "numpy"):
            raise ValueError(f"backend: expected 'numba' or 'numpy', got {backend!r}")
        if backend == "numba" and not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is not importable")
        return backend
    if os.environ.get(ENV_DISABLE_NUMBA, "").strip() not in ("", "0"):
        return "numpy"
    return "numba" if HAVE_NUMBA else "numpy"


def matched_kernel(backend: str | None = None):
    return rk4_matched_numba if active_backend(backend) == "numba" else rk4_matched_numpy


def unmatched_kernel(backend: str | None = None):
    return rk4_unmatched_numba if active_backend(backend) == "numba" else rk4_unmatched_numpy


def warm_up():
    """Trigger JIT compilation of both kernels on a tiny problem."""
    if active_backend() != "numba":
        return
    L = np.zeros((1, 1))
    seg = (np.array([0.0]), np.zeros((1, 1)), np.zeros(1), np.zeros(1), np.zeros(1))
    out = np.zeros((2, 3))
    z0 = np.zeros(3)
    rk4_matched_numba(z0, L, 1.0, 1.0, 1.0, 1.0, *seg, 0.01, 1, 1, out)
    rk4_unmatched_numba(z0, L, 1.0, 1.0, 1.0, 1.0, 1.0, *seg, 0.01, 1, 1, out)
