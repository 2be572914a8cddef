"""Inverse design of the single-mode (or few-mode) input states.

Forward maps give the amplitudes that survive photon subtraction, the one-photon
check and erasure, as functions of the input amplitudes.  The inverse maps are
triangular in the photon number and are solved in a single pass from nonzero
vacuum ("seed") amplitudes.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DesignError


def _vec(x, length=None) -> np.ndarray:
    v = np.asarray(x, dtype=complex).ravel()
    if length is not None and len(v) < length:
        v = np.concatenate([v, np.zeros(length - len(v), dtype=complex)])
    return v


# ---------------------------------------------------------------- two terms

def forward_two_term(f_in, g_in, t1: float, r1: float, t2: float, r2: float):
    """Amplitudes ``(f, g)`` of ``|n>|V>`` and ``|n>|H>`` after subtraction and erasure.

    Inputs have length ``N + 2``; outputs have length ``2N + 2``.
    """
    f_in, g_in = _vec(f_in), _vec(g_in)
    L = max(len(f_in), len(g_in))
    f_in, g_in = _vec(f_in, L), _vec(g_in, L)
    n_out = 2 * L - 2
    f = np.zeros(n_out, dtype=complex)
    g = np.zeros(n_out, dtype=complex)
    for n in range(n_out):
        base = t1**n * r1
        for k in range(n + 1):
            if k + 1 >= L or n - k >= L:
                continue
            c = math.sqrt(k + 1) * math.sqrt(math.comb(n, k)) * base
            f[n] += c * r2**k * t2 ** (n - k) * f_in[k + 1] * g_in[n - k]
            g[n] += c * r2 ** (n - k) * t2**k * g_in[k + 1] * f_in[n - k]
    return f, g


def invert_two_term(f, g, t1: float, r1: float, t2: float, r2: float, seeds=(1.0, 1.0)):
    """Input amplitudes reproducing targets ``f``, ``g`` (length ``N + 1``).

    Runs the recurrence
    ``f~_{n+1} = (f_n - F_n) / (sqrt(n+1) t1^n r1 r2^n g~_0)`` (and its mirror
    for ``g~``) for ``n = 0..N``.  Returns vectors of length ``N + 2``.
    """
    f, g = _vec(f), _vec(g)
    N1 = max(len(f), len(g))
    f, g = _vec(f, N1), _vec(g, N1)
    f0, g0 = complex(seeds[0]), complex(seeds[1])
    if f0 == 0 or g0 == 0:
        raise DesignError("seed amplitudes must be nonzero")
    if r1 == 0 or t1 == 0 or r2 == 0 or t2 == 0:
        raise DesignError("t1, r1, t2, r2 must be nonzero for the recurrence")
    ft = np.zeros(N1 + 1, dtype=complex)
    gt = np.zeros(N1 + 1, dtype=complex)
    ft[0], gt[0] = f0, g0
    for n in range(N1):
        base = t1**n * r1
        F = G = 0j
        for k in range(n):
            c = math.sqrt(k + 1) * math.sqrt(math.comb(n, k)) * base
            F += c * r2**k * t2 ** (n - k) * ft[k + 1] * gt[n - k]
            G += c * r2 ** (n - k) * t2**k * gt[k + 1] * ft[n - k]
        lead = math.sqrt(n + 1) * base
        ft[n + 1] = (f[n] - F) / (lead * r2**n * g0)
        gt[n + 1] = (g[n] - G) / (lead * t2**n * f0)
    return ft, gt


# ---------------------------------------------------------------- d sources

def _convolve_nd(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Exact full N-dimensional discrete convolution."""
    out = np.zeros(tuple(a + b - 1 for a, b in zip(x.shape, y.shape)), dtype=complex)
    for idx in zip(*np.nonzero(x)):
        sl = tuple(slice(i, i + s) for i, s in zip(idx, y.shape))
        out[sl] += x[idx] * y
    return out


def _inv_sqrt_fact_grid(shape) -> np.ndarray:
    """``1 / sqrt(prod_a m_a!)`` on a grid."""
    grids = np.meshgrid(*[np.arange(s) for s in shape], indexing="ij")
    out = np.ones(shape)
    for g in grids:
        out = out / np.sqrt(np.vectorize(math.factorial, otypes=[float])(g))
    return out


def _total_grid(shape) -> np.ndarray:
    return sum(np.meshgrid(*[np.arange(s) for s in shape], indexing="ij"))


def _branch_factors(sources, t1, r1, axis):
    """Per-source factors: subtracted (B1 on ``axis``) and untouched (B0), scaled by 1/sqrt(m!)."""
    sub, keep = [], []
    for s in sources:
        shape = s.shape
        m_ax = np.arange(shape[axis]).reshape([-1 if a == axis else 1 for a in range(s.ndim)])
        keep.append(s * t1**m_ax * _inv_sqrt_fact_grid(shape))
        shifted = np.take(s, range(1, shape[axis]), axis=axis)
        m_sub = np.arange(shape[axis] - 1).reshape([-1 if a == axis else 1 for a in range(s.ndim)])
        sub.append(shifted * np.sqrt(m_sub + 1) * t1**m_sub * r1 * _inv_sqrt_fact_grid(shifted.shape))
    return sub, keep


def forward_joint(sources: Sequence, t1: float, r1: float, axis: int = -1) -> list:
    """Branch amplitudes after subtraction on ``axis`` and balanced erasure of every mode.

    ``sources[k]`` is the amplitude tensor of the ``k``-th few-mode input; the
    photon is subtracted from mode ``axis`` of each.  Returns one tensor per
    branch ``j`` (photon subtracted from source ``j``), indexed by the photon
    numbers of the merged modes.
    """
    sources = [np.asarray(s, dtype=complex) for s in sources]
    ndim = sources[0].ndim
    axis = axis % ndim
    d = len(sources)
    sub, keep = _branch_factors(sources, t1, r1, axis)
    out = []
    for j in range(d):
        acc = sub[j]
        for k in range(d):
            if k != j:
                acc = _convolve_nd(acc, keep[k])
        tot = _total_grid(acc.shape)
        out.append(acc / _inv_sqrt_fact_grid(acc.shape) * float(d) ** (-tot / 2))
    return out


def forward_multi(sources: Sequence, t1: float, r1: float, d: int | None = None) -> list:
    """Single-mode case of :func:`forward_joint`.

    ``f_{j,n} = sqrt(n!) t1^n r1 d^{-n/2} sum' sqrt(n_j+1) f~_{j,n_j+1}/sqrt(n_j!)
    prod_{k!=j} f~_{k,n_k}/sqrt(n_k!)`` with ``sum_k n_k = n``.
    """
    sources = [_vec(s) for s in sources]
    if d is not None and d != len(sources):
        raise ValueError(f"d={d} but {len(sources)} sources given")
    L = max(len(s) for s in sources)
    return forward_joint([_vec(s, L) for s in sources], t1, r1, axis=0)


def invert_joint(targets: Sequence, t1: float, r1: float, seeds=None, axis: int = -1) -> list:
    """Inverse of :func:`forward_joint` on the target support.

    ``targets[j]`` has extent ``N + 1`` per mode.  Returned sources have extent
    ``N + 2`` on ``axis`` and ``N + 1`` elsewhere; amplitudes with no photon on
    ``axis`` other than the vacuum one are free and set to zero.  Solved by
    induction on the total photon number: at each level the only unknowns are
    ``f~_j[m + e_axis]``, which enter with coefficient
    ``sqrt(m_axis+1) t1^m_axis r1 d^{-|m|/2} prod_{k!=j} f~_k[0]``.
    """
    targets = [np.asarray(t, dtype=complex) for t in targets]
    d = len(targets)
    ndim = targets[0].ndim
    axis = axis % ndim
    shape_t = targets[0].shape
    if any(t.shape != shape_t for t in targets):
        raise ValueError("all targets must share one shape")
    seeds = np.ones(d, dtype=complex) if seeds is None else np.broadcast_to(np.asarray(seeds, dtype=complex), (d,))
    if np.any(seeds == 0):
        raise DesignError("seed amplitudes must be nonzero")
    if r1 == 0 or t1 == 0:
        raise DesignError("t1 and r1 must be nonzero")
    src_shape = tuple(s + 1 if a == axis else s for a, s in enumerate(shape_t))
    sources = [np.zeros(src_shape, dtype=complex) for _ in range(d)]
    for k in range(d):
        sources[k][(0,) * ndim] = seeds[k]
    tot = _total_grid(shape_t)
    m_ax = np.indices(shape_t)[axis]
    for level in range(int(tot.max()) + 1):
        current = forward_joint(sources, t1, r1, axis)
        solved = []
        for j in range(d):
            others = np.prod(np.delete(seeds, j)) if d > 1 else 1.0
            for idx in zip(*np.nonzero(tot == level)):
                coef = math.sqrt(m_ax[idx] + 1) * t1 ** m_ax[idx] * r1 * float(d) ** (-level / 2) * others
                if coef == 0:
                    raise DesignError(f"zero coefficient at {idx}")
                rest = current[j][idx] if all(i < s for i, s in zip(idx, current[j].shape)) else 0
                target_idx = tuple(i + 1 if a == axis else i for a, i in enumerate(idx))
                solved.append((j, target_idx, (targets[j][idx] - rest) / coef))
        for j, target_idx, val in solved:
            sources[j][target_idx] = val
    return sources


def invert_multi(targets: Sequence, t1: float, r1: float, d: int | None = None, seeds=None) -> list:
    """Input vectors (length ``N + 2``) whose :func:`forward_multi` matches ``targets`` on ``0..N``."""
    targets = [_vec(t) for t in targets]
    if d is not None and d != len(targets):
        raise ValueError(f"d={d} but {len(targets)} targets given")
    L = max(len(t) for t in targets)
    return [s.ravel() for s in invert_joint([_vec(t, L) for t in targets], t1, r1, seeds, axis=0)]


# ---------------------------------------------------------------- Schmidt

RANK_RTOL = 1e-10


def schmidt_split(tensor, left_axes: Sequence[int], rtol: float = RANK_RTOL):
    """Schmidt decomposition of an amplitude tensor across ``left_axes | rest``.

    Returns ``(left, right, coeffs)``: ``left[j]`` and ``right[j]`` are
    orthonormal tensors over the left and right axes and ``coeffs`` the
    descending Schmidt coefficients, so that
    ``tensor == sum_j coeffs[j] * left[j] (x) right[j]`` (axes reordered as
    ``left_axes + right_axes``).  Singular values below ``rtol * max`` are
    dropped.
    """
    T = np.asarray(tensor, dtype=complex)
    left_axes = list(left_axes)
    right_axes = [a for a in range(T.ndim) if a not in left_axes]
    if not left_axes or not right_axes:
        raise ValueError("bipartition must be nonempty on both sides")
    if not np.any(T):
        raise ValueError("cannot decompose the zero tensor")
    Tp = np.transpose(T, left_axes + right_axes)
    lshape = Tp.shape[: len(left_axes)]
    rshape = Tp.shape[len(left_axes):]
    mat = Tp.reshape(math.prod(lshape), math.prod(rshape))
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    rank = int(np.sum(s > rtol * s[0]))
    left = [u[:, j].reshape(lshape) for j in range(rank)]
    right = [vh[j, :].reshape(rshape) for j in range(rank)]
    return left, right, s[:rank]
