"""Passive linear optics and the photon-subtraction operators on Fock states.

Beam-splitter convention, used by every element in this package: for input
modes ``i`` and ``j`` the creation operators are substituted as

    a_i^+  ->  t a_i^+ + r e^{i phi} a_j^+
    a_j^+  ->  t a_j^+ - r e^{-i phi} a_i^+

so a single photon entering ``i`` of a balanced splitter leaves as
``(|1,0> + |0,1>)/sqrt(2)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import RegistryError
from .fock import FockState, Mode, as_mode, map_kets


@dataclass(frozen=True)
class BeamSplitterParams:
    """Real transmittance and reflectance amplitudes with ``t**2 + r**2 == 1``."""

    t: float
    r: float

    def __post_init__(self):
        if not (0 <= self.t <= 1 and 0 <= self.r <= 1):
            raise ValueError(f"t and r must lie in [0, 1], got t={self.t}, r={self.r}")
        if abs(self.t**2 + self.r**2 - 1) > 1e-12:
            raise ValueError(f"t^2 + r^2 = {self.t**2 + self.r**2}, expected 1")

    @classmethod
    def from_t(cls, t: float) -> "BeamSplitterParams":
        return cls(t, math.sqrt(max(0.0, 1 - t * t)))

    @classmethod
    def balanced(cls) -> "BeamSplitterParams":
        s = math.sqrt(0.5)
        return cls(s, s)


@lru_cache(maxsize=None)
def _fact_ratio_sqrt(out_i, out_j, in_i, in_j) -> float:
    f = math.factorial
    return math.sqrt(f(out_i) * f(out_j) / (f(in_i) * f(in_j)))


def mix_modes(state: FockState, mode_i, mode_j, u) -> FockState:
    """Lift a 2x2 mode transformation to Fock space.

    ``u[0]`` holds the images of ``a_i^+`` as ``(coef on a_i^+, coef on a_j^+)``
    and ``u[1]`` those of ``a_j^+``.  Exact for any photon number.
    """
    mode_i, mode_j = as_mode(mode_i), as_mode(mode_j)
    if mode_i == mode_j:
        raise RegistryError("a two-mode element needs two distinct modes")
    i, j = state.registry.index(mode_i), state.registry.index(mode_j)
    (aii, aij), (aji, ajj) = u
    comb = math.comb

    def ket(occ, amp):
        ni, nj = occ[i], occ[j]
        for k in range(ni + 1):
            ck = comb(ni, k) * aii**k * aij ** (ni - k)
            if ck == 0:
                continue
            for l in range(nj + 1):
                cl = comb(nj, l) * ajj**l * aji ** (nj - l)
                if cl == 0:
                    continue
                oi, oj = k + nj - l, ni - k + l
                new = list(occ)
                new[i], new[j] = oi, oj
                yield tuple(new), amp * ck * cl * _fact_ratio_sqrt(oi, oj, ni, nj)

    return map_kets(state, ket)


def apply_beam_splitter(
    state: FockState, mode_i, mode_j, params: BeamSplitterParams, phase: float = 0.0
) -> FockState:
    """Two-mode beam splitter in the package convention (see module docstring)."""
    t, r = params.t, params.r
    e = cmath.exp(1j * phase)
    return mix_modes(state, mode_i, mode_j, ((t, r * e), (-r / e, t)))


def apply_phase(state: FockState, mode, phi: float) -> FockState:
    k = state.registry.index(mode)
    e = cmath.exp(1j * phi)
    return map_kets(state, lambda occ, a: [(occ, a * e ** occ[k])])


def apply_pbs(state: FockState, spatial_in_a: int, spatial_in_b: int,
              spatial_out_a: int, spatial_out_b: int) -> FockState:
    """Polarizing beam splitter: V is transmitted (a->a', b->b'), H is reflected (a->b', b->a').

    Implemented as a relabelling of modes, so it is exactly unitary.
    """
    reg = state.registry
    va, ha = reg.polarization_modes(spatial_in_a)
    vb, hb = reg.polarization_modes(spatial_in_b)
    mapping = {
        va: Mode(spatial_out_a, "V"),
        vb: Mode(spatial_out_b, "V"),
        ha: Mode(spatial_out_b, "H"),
        hb: Mode(spatial_out_a, "H"),
    }
    return state.relabel(mapping)


def apply_waveplate(state: FockState, spatial: int, angle: float) -> FockState:
    """Rotate the polarization of ``spatial`` by ``angle`` radians.

    Same law as the beam splitter with ``t = cos(angle)``, ``r = sin(angle)``
    acting between the V and H modes: ``|V> -> cos|V> + sin|H>``.
    """
    v, h = state.registry.polarization_modes(spatial)
    c, s = math.cos(angle), math.sin(angle)
    return mix_modes(state, v, h, ((c, s), (-s, c)))


def subtract_photon(state: FockState, mode, k: int, params: BeamSplitterParams) -> FockState:
    """Apply ``B_0`` (k=0) or ``B_1`` (k=1) to one mode.

    ``B_0 = sum_n t^n |n><n|`` and ``B_1 = sum_n sqrt(n+1) t^n r |n><n+1|``:
    the action of a beam splitter whose other port is heralded with ``k``
    photons out of an initially empty ancilla.
    """
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    m = state.registry.index(mode)
    t, r = params.t, params.r

    def ket(occ, a):
        n = occ[m]
        if k == 0:
            yield occ, a * t**n
        elif n >= 1:
            new = list(occ)
            new[m] = n - 1
            yield tuple(new), a * math.sqrt(n) * t ** (n - 1) * r

    return map_kets(state, ket)
