"""Sparse multimode Fock states.

A :class:`FockState` maps occupation vectors (one photon count per mode of a
:class:`ModeRegistry`) to complex amplitudes.  States are never renormalised by
the conditional operations in this package: the squared norm of a state is the
probability of the measurement record that produced it.
"""

from __future__ import annotations

import cmath
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import CapError, RegistryError

PRUNE_THRESHOLD = 1e-14

POLARIZATIONS = ("V", "H")

Occupation = tuple


class Mode(NamedTuple):
    """An optical mode: a spatial index plus ``"V"``, ``"H"`` or ``None`` (scalar)."""

    spatial: int
    pol: str | None = None

    def __str__(self):
        return f"{self.spatial}{self.pol or ''}"


def as_mode(label) -> Mode:
    if isinstance(label, Mode):
        return label
    if isinstance(label, int):
        return Mode(label)
    spatial, pol = label
    return Mode(int(spatial), pol)


class ModeRegistry:
    """Ordered, immutable collection of unique mode labels."""

    __slots__ = ("_modes", "_index")

    def __init__(self, modes: Iterable = ()):
        modes = tuple(as_mode(m) for m in modes)
        index = {}
        pols_at = defaultdict(set)
        for i, m in enumerate(modes):
            if m.pol not in (None, *POLARIZATIONS):
                raise RegistryError(f"unknown polarization {m.pol!r} for mode {m}")
            if m in index:
                raise RegistryError(f"duplicate mode label {m}")
            index[m] = i
            pols_at[m.spatial].add(m.pol)
        for spatial, pols in pols_at.items():
            if None in pols and len(pols) > 1:
                raise RegistryError(
                    f"spatial index {spatial} mixes scalar and polarized modes"
                )
        self._modes = modes
        self._index = index

    @property
    def modes(self) -> tuple:
        return self._modes

    def __len__(self):
        return len(self._modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self._modes)

    def __getitem__(self, i) -> Mode:
        return self._modes[i]

    def __contains__(self, mode):
        return as_mode(mode) in self._index

    def __eq__(self, other):
        return isinstance(other, ModeRegistry) and self._modes == other._modes

    def __hash__(self):
        return hash(self._modes)

    def __repr__(self):
        return "ModeRegistry(" + ", ".join(str(m) for m in self._modes) + ")"

    def index(self, mode) -> int:
        mode = as_mode(mode)
        try:
            return self._index[mode]
        except KeyError:
            raise RegistryError(f"mode {mode} is not in {self!r}") from None

    def spatial_indices(self) -> set:
        return {m.spatial for m in self._modes}

    def polarization_modes(self, spatial: int) -> tuple:
        """Return the ``(V, H)`` modes of ``spatial``, raising if either is missing."""
        v, h = Mode(spatial, "V"), Mode(spatial, "H")
        if v not in self._index or h not in self._index:
            raise RegistryError(f"spatial index {spatial} does not carry V and H modes")
        return v, h

    def fresh_spatial(self, count: int = 1, start: int | None = None) -> list:
        """Spatial indices not used by this registry."""
        used = self.spatial_indices()
        nxt = (max(used) + 1 if used else 0) if start is None else start
        out = []
        while len(out) < count:
            if nxt not in used:
                out.append(nxt)
            nxt += 1
        return out

    def concat(self, other: "ModeRegistry") -> "ModeRegistry":
        clash = self.spatial_indices() & other.spatial_indices()
        if clash:
            raise RegistryError(f"spatial index collision: {sorted(clash)}")
        return ModeRegistry(self._modes + other._modes)

    def without(self, modes: Iterable) -> "ModeRegistry":
        drop = {as_mode(m) for m in modes}
        return ModeRegistry(m for m in self._modes if m not in drop)

    def relabel(self, mapping: Mapping) -> "ModeRegistry":
        mapping = {as_mode(k): as_mode(v) for k, v in mapping.items()}
        for k in mapping:
            self.index(k)
        return ModeRegistry(mapping.get(m, m) for m in self._modes)


def registry(*modes) -> ModeRegistry:
    """Shorthand: ``registry((1, "V"), (1, "H"), 2)``."""
    return ModeRegistry(modes)


def _clean(amplitudes: Mapping, prune: float) -> dict:
    return {
        k: complex(amplitudes[k])
        for k in sorted(amplitudes)
        if abs(amplitudes[k]) > prune
    }


@dataclass(frozen=True)
class FockState:
    """Immutable sparse pure state, possibly unnormalised.

    Keys of ``amplitudes`` are occupation tuples aligned with ``registry``;
    iteration order is lexicographic.
    """

    registry: ModeRegistry
    amplitudes: Mapping = field(default_factory=dict)
    prune: float = PRUNE_THRESHOLD

    @classmethod
    def from_amplitudes(cls, reg, amplitudes: Mapping, prune: float = PRUNE_THRESHOLD):
        if not isinstance(reg, ModeRegistry):
            reg = ModeRegistry(reg)
        n = len(reg)
        amps = {}
        for occ, amp in amplitudes.items():
            occ = tuple(int(c) for c in occ)
            if len(occ) != n:
                raise RegistryError(
                    f"occupation {occ} has length {len(occ)}, registry has {n} modes"
                )
            if min(occ, default=0) < 0:
                raise ValueError(f"negative photon count in {occ}")
            amps[occ] = amps.get(occ, 0) + amp
        return cls(reg, _clean(amps, prune), prune)

    def _derive(self, reg, amplitudes) -> "FockState":
        return FockState(reg, _clean(amplitudes, self.prune), self.prune)

    def __len__(self):
        return len(self.amplitudes)

    def items(self):
        return self.amplitudes.items()

    def amplitude(self, occupation) -> complex:
        return self.amplitudes.get(tuple(occupation), 0j)

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def is_zero(self) -> bool:
        return not self.amplitudes

    def scaled(self, c) -> "FockState":
        return self._derive(self.registry, {k: c * a for k, a in self.items()})

    def normalized(self) -> "FockState":
        n2 = self.norm2()
        if n2 == 0:
            raise ValueError("cannot normalise the zero state")
        return self.scaled(1 / math.sqrt(n2))

    def __add__(self, other: "FockState") -> "FockState":
        _require_same_registry(self, other)
        out = dict(self.amplitudes)
        for k, a in other.items():
            out[k] = out.get(k, 0) + a
        return self._derive(self.registry, out)

    def __sub__(self, other):
        return self + other.scaled(-1)

    def photon_numbers(self) -> set:
        return {sum(k) for k in self.amplitudes}

    def max_photons(self) -> int:
        return max(self.photon_numbers(), default=0)

    def relabel(self, mapping: Mapping) -> "FockState":
        return FockState(self.registry.relabel(mapping), self.amplitudes, self.prune)

    def reorder(self, target: ModeRegistry) -> "FockState":
        """Permute the mode order to ``target`` (same set of labels)."""
        if set(target) != set(self.registry):
            raise RegistryError(f"cannot reorder {self.registry!r} into {target!r}")
        perm = [self.registry.index(m) for m in target]
        return self._derive(target, {tuple(k[i] for i in perm): a for k, a in self.items()})

    def to_dense(self, cutoff: int) -> np.ndarray:
        """Dense tensor with one axis of length ``cutoff + 1`` per mode."""
        out = np.zeros((cutoff + 1,) * len(self.registry), dtype=complex)
        for k, a in self.items():
            if max(k, default=0) > cutoff:
                raise CapError(f"occupation {k} exceeds cutoff {cutoff}")
            out[k] = a
        return out

    @classmethod
    def from_dense(cls, reg, tensor, prune: float = PRUNE_THRESHOLD) -> "FockState":
        tensor = np.asarray(tensor)
        return cls.from_amplitudes(
            reg, {idx: tensor[idx] for idx in zip(*np.nonzero(tensor))}, prune
        )

    def __repr__(self):
        terms = " + ".join(
            f"({a:.4g})|{','.join(map(str, k))}>" for k, a in list(self.items())[:8]
        )
        more = " + ..." if len(self) > 8 else ""
        return f"FockState[{self.registry!r}]: {terms or '0'}{more}"


def _require_same_registry(a: FockState, b: FockState):
    if a.registry != b.registry:
        raise RegistryError(f"registry mismatch: {a.registry!r} vs {b.registry!r}")


def vacuum(reg) -> FockState:
    reg = reg if isinstance(reg, ModeRegistry) else ModeRegistry(reg)
    return FockState(reg, {(0,) * len(reg): 1 + 0j})


def basis_state(reg, occupation) -> FockState:
    return FockState.from_amplitudes(reg, {tuple(occupation): 1.0})


def zero_state(reg) -> FockState:
    reg = reg if isinstance(reg, ModeRegistry) else ModeRegistry(reg)
    return FockState(reg, {})


def _check_caps(occ, mode_cap, total_cap):
    if mode_cap is not None and max(occ, default=0) > mode_cap:
        raise CapError(f"occupation {occ} exceeds per-mode cap {mode_cap}", max(occ))
    if total_cap is not None and sum(occ) > total_cap:
        raise CapError(
            f"occupation {occ} holds {sum(occ)} photons, above the total cap {total_cap}",
            sum(occ),
        )


def make_state(
    reg,
    terms: Sequence,
    mode_cap: int | None = None,
    total_cap: int | None = None,
    prune: float = PRUNE_THRESHOLD,
) -> FockState:
    """Superposition of product states.

    Args:
        reg: mode registry (or iterable of mode labels).
        terms: ``(coeff, vectors)`` pairs; ``vectors[k][n]`` is the amplitude of
            ``n`` photons in mode ``k``.
        mode_cap: largest allowed photon number per mode.
        total_cap: largest allowed total photon number.

    Returns:
        The state ``sum_terms coeff * prod_k sum_n vectors[k][n] |n>_k``.
    """
    if not isinstance(reg, ModeRegistry):
        reg = ModeRegistry(reg)
    if len(reg) == 0:
        raise RegistryError("registry must not be empty")
    amps = defaultdict(complex)
    for coeff, vectors in terms:
        if len(vectors) != len(reg):
            raise RegistryError(
                f"term has {len(vectors)} amplitude vectors for {len(reg)} modes"
            )
        support = []
        for vec in vectors:
            vec = np.asarray(vec, dtype=complex).ravel()
            nz = [(n, vec[n]) for n in np.flatnonzero(vec)]
            if mode_cap is not None and nz and nz[-1][0] > mode_cap:
                raise CapError(
                    f"amplitude vector populates {nz[-1][0]} photons, cap is {mode_cap}",
                    int(nz[-1][0]),
                )
            support.append(nz)
        for combo in itertools.product(*support):
            occ = tuple(int(n) for n, _ in combo)
            _check_caps(occ, mode_cap, total_cap)
            amps[occ] += coeff * math.prod(a for _, a in combo)
    return FockState.from_amplitudes(reg, amps, prune)


def tensor(a: FockState, b: FockState, total_cap: int | None = None) -> FockState:
    """Tensor product; the registry of ``b`` is appended to that of ``a``."""
    reg = a.registry.concat(b.registry)
    amps = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            occ = ka + kb
            if total_cap is not None:
                _check_caps(occ, None, total_cap)
            amps[occ] = va * vb
    return FockState(reg, _clean(amps, min(a.prune, b.prune)), min(a.prune, b.prune))


def tensor_all(states: Sequence[FockState]) -> FockState:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def add_vacuum_modes(state: FockState, modes: Iterable) -> FockState:
    modes = [as_mode(m) for m in modes]
    reg = ModeRegistry(tuple(state.registry) + tuple(modes))
    pad = (0,) * len(modes)
    return FockState(reg, {k + pad: a for k, a in state.items()}, state.prune)


def inner(a: FockState, b: FockState) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    _require_same_registry(a, b)
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for k, v in small.items():
        w = large.amplitudes.get(k)
        if w is not None:
            total += v.conjugate() * w if small is a else w.conjugate() * v
    return total


def fidelity(a: FockState, b: FockState) -> float:
    """``|<a|b>|^2 / (<a|a><b|b>)``."""
    na, nb = a.norm2(), b.norm2()
    if na == 0 or nb == 0:
        raise ValueError("fidelity is undefined for a zero-norm state")
    return min(1.0, abs(inner(a, b)) ** 2 / (na * nb))


def _split_indices(reg: ModeRegistry, modes) -> tuple:
    idx = [reg.index(m) for m in modes]
    if len(set(idx)) != len(idx):
        raise RegistryError("measured modes must be distinct")
    keep = [i for i in range(len(reg)) if i not in set(idx)]
    return idx, keep


def project_counts(state: FockState, measured_modes: Sequence, counts: Sequence) -> FockState:
    """Post-select photon counts on ``measured_modes`` and drop those modes.

    The returned state is unnormalised; its squared norm is the probability of
    the detection pattern when ``state`` is normalised.
    """
    measured_modes = [as_mode(m) for m in measured_modes]
    if len(measured_modes) != len(counts):
        raise ValueError("one count per measured mode is required")
    idx, keep = _split_indices(state.registry, measured_modes)
    counts = tuple(int(c) for c in counts)
    amps = {}
    for k, a in state.items():
        if tuple(k[i] for i in idx) == counts:
            amps[tuple(k[i] for i in keep)] = a
    return FockState(state.registry.without(measured_modes), amps, state.prune)


def count_distribution(state: FockState, measured_modes: Sequence) -> dict:
    """Probability (squared norm) of every count pattern on ``measured_modes``."""
    idx, _ = _split_indices(state.registry, [as_mode(m) for m in measured_modes])
    out = defaultdict(float)
    for k, a in state.items():
        out[tuple(k[i] for i in idx)] += abs(a) ** 2
    return dict(sorted(out.items()))


def project_onto(state: FockState, bra: FockState) -> FockState:
    """Partial inner product ``<bra|state>`` over the modes of ``bra``.

    ``bra`` lives on a subset of the modes of ``state``; the result lives on the
    remaining modes.
    """
    idx, keep = _split_indices(state.registry, list(bra.registry))
    amps = defaultdict(complex)
    for k, a in state.items():
        b = bra.amplitudes.get(tuple(k[i] for i in idx))
        if b is not None:
            amps[tuple(k[i] for i in keep)] += b.conjugate() * a
    rest = state.registry.without(bra.registry)
    return FockState(rest, _clean(amps, state.prune), state.prune)


def map_kets(state: FockState, fn, reg: ModeRegistry | None = None) -> FockState:
    """Apply ``fn(occ, amp) -> iterable of (occ', amp')`` to every ket and sum."""
    amps = defaultdict(complex)
    for k, a in state.items():
        for k2, a2 in fn(k, a):
            amps[k2] += a2
    return FockState(reg or state.registry, _clean(amps, state.prune), state.prune)


def global_phase_aligned(a: FockState, b: FockState) -> FockState:
    """Return ``b`` multiplied by the phase that makes ``<a|b>`` real and positive."""
    ov = inner(a, b)
    if ov == 0:
        return b
    return b.scaled(cmath.exp(-1j * cmath.phase(ov)))


def max_abs_difference(a: FockState, b: FockState) -> float:
    _require_same_registry(a, b)
    keys = set(a.amplitudes) | set(b.amplitudes)
    return max((abs(a.amplitude(k) - b.amplitude(k)) for k in keys), default=0.0)
