"""Conditional building blocks: QND photon check, quantum scissors, erasure,
Bell/GHZ projections and the C-SHIFT gate.

Every conditional operation returns a :class:`ConditionalResult` whose state is
left unnormalised, so ``result.probability == result.state.norm2()`` for a
normalised input.  Configurable gate-success factors for idealised gates are
folded into the amplitude as ``sqrt(factor)``, which keeps that identity.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import RegistryError, SupportError
from .fock import (
    FockState,
    Mode,
    ModeRegistry,
    as_mode,
    fidelity,
    make_state,
    map_kets,
    project_counts,
    project_onto,
    tensor,
)
from .optics import BeamSplitterParams, apply_beam_splitter, apply_phase, apply_waveplate

BALANCED = BeamSplitterParams.balanced()


@dataclass(frozen=True)
class ConditionalResult:
    """Heralded branch of a conditional operation.

    ``branches`` holds detector-resolved sub-branches when the physical
    detectors cannot tell them apart (polarization-blind photodetectors);
    ``mixed`` is set when those sub-branches are not proportional to one
    another, in which case ``state`` is only a representative.
    """

    state: FockState
    probability: float
    outcome_label: str
    branches: dict = field(default_factory=dict)
    mixed: bool = False
    details: dict = field(default_factory=dict)


def _result(state: FockState, label: str, **kw) -> ConditionalResult:
    return ConditionalResult(state, state.norm2(), label, **kw)


def _combine_subbranches(branches: dict, label: str, details=None) -> ConditionalResult:
    """Merge detector sub-branches into one result.

    When every nonzero sub-branch is the same ray the heralded state is pure and
    is represented by that ray carrying the total probability.
    """
    nonzero = [s for s in branches.values() if not s.is_zero()]
    total = sum(s.norm2() for s in nonzero)
    if not nonzero:
        first = next(iter(branches.values()))
        return ConditionalResult(first, 0.0, label, branches, False, details or {})
    ref = max(nonzero, key=FockState.norm2)
    mixed = any(fidelity(ref, s) < 1 - 1e-10 for s in nonzero)
    state = ref.scaled(math.sqrt(total / ref.norm2()))
    return ConditionalResult(state, total, label, branches, mixed, details or {})


# ---------------------------------------------------------------- QND

def qudit_qnd(state: FockState, modes: Sequence, success: float = 1.0) -> ConditionalResult:
    """Ideal check that exactly one photon is present across ``modes``."""
    idx = [state.registry.index(m) for m in modes]
    amp = math.sqrt(success)
    out = map_kets(
        state, lambda occ, a: [(occ, a * amp)] if sum(occ[i] for i in idx) == 1 else []
    )
    return _result(out, "one photon in " + ",".join(str(as_mode(m)) for m in modes))


def qnd_circuit(state: FockState, spatial_mode: int):
    """Pre-detection state of the interferometric QND device.

    Two ancilla photons enter fresh spatial modes ``a`` and ``b`` polarized
    along the two diagonals and meet on a balanced beam splitter.  With one
    photon per output port they form the polarization singlet; when both
    leave through the same port they share one polarization, because the
    cross term of two orthogonal diagonal photons in one mode cancels.  A
    second balanced splitter mixes the signal with port ``a`` and two
    polarization-resolving detector pairs watch its outputs.  Orthogonal
    single clicks (one V and one H photon, in different ports) herald a
    singlet projection that teleports the signal polarization onto ``b``.
    The vacuum never heralds: it brings at most one photon, or two of equal
    polarization, to the detectors.

    Returns:
        ``(joint_state, detector_groups, output_spatial)`` where each detector
        group is the ``(V, H)`` mode pair behind one output port.
    """
    reg = state.registry
    v_in, h_in = reg.polarization_modes(spatial_mode)
    a, b = reg.fresh_spatial(2)
    anc_reg = ModeRegistry([Mode(a, "V"), Mode(a, "H"), Mode(b, "V"), Mode(b, "H")])
    ancilla = make_state(anc_reg, [(1.0, [[1], [0, 1], [1], [0, 1]])])
    joint = tensor(state, ancilla)
    joint = apply_waveplate(joint, a, math.pi / 4)
    joint = apply_waveplate(joint, b, -math.pi / 4)
    for p in ("V", "H"):
        joint = apply_beam_splitter(joint, Mode(a, p), Mode(b, p), BALANCED)
    for p in ("V", "H"):
        joint = apply_beam_splitter(joint, Mode(spatial_mode, p), Mode(a, p), BALANCED)
    detectors = [(v_in, h_in), (Mode(a, "V"), Mode(a, "H"))]
    return joint, detectors, b


QND_PATTERNS = ((1, 0, 0, 1), (0, 1, 1, 0))


def _blind_detector_patterns(groups, counts):
    """All per-polarization count patterns compatible with blind detector totals."""
    per_group = []
    for (v, h), c in zip(groups, counts):
        per_group.append([((v, h), (nv, c - nv)) for nv in range(c + 1)])
    for combo in itertools.product(*per_group):
        modes, pattern = [], []
        for (v, h), (nv, nh) in combo:
            modes += [v, h]
            pattern += [nv, nh]
        yield modes, tuple(pattern)


def qnd_single_photon(
    state: FockState, spatial_mode: int, backend: str = "ideal", success: float = 1.0
) -> ConditionalResult:
    """Heralded check for exactly one photon in ``spatial_mode``, polarization untouched.

    ``ideal`` projects on the one-photon subspace of the (V, H) pair and scales
    by ``sqrt(success)``.  ``interferometric`` simulates :func:`qnd_circuit` and
    keeps the orthogonal-polarization coincidences; the photon-number
    distribution left in the output is reported so multi-photon events can be
    inspected separately.
    """
    if backend == "ideal":
        v, h = state.registry.polarization_modes(spatial_mode)
        return qudit_qnd(state, [v, h], success)
    if backend != "interferometric":
        raise ValueError(f"unknown QND backend {backend!r}")

    joint, detectors, out = qnd_circuit(state, spatial_mode)
    modes = [m for g in detectors for m in g]
    branches = {}
    for pattern in QND_PATTERNS:
        br = project_counts(joint, modes, pattern)
        br = br.relabel({Mode(out, "V"): Mode(spatial_mode, "V"),
                         Mode(out, "H"): Mode(spatial_mode, "H")})
        branches["PD1=%dV%dH,PD2=%dV%dH" % pattern] = br

    v, h = branches[next(iter(branches))].registry.polarization_modes(spatial_mode)
    by_output = {}
    for br in branches.values():
        iv, ih = br.registry.index(v), br.registry.index(h)
        for occ, amp in br.items():
            n = occ[iv] + occ[ih]
            by_output[n] = by_output.get(n, 0.0) + abs(amp) ** 2
    res = _combine_subbranches(
        branches, "orthogonal coincidence", {"output_photon_probabilities": dict(sorted(by_output.items()))}
    )
    if success != 1.0:
        res = ConditionalResult(res.state.scaled(math.sqrt(success)), res.probability * success,
                                res.outcome_label, res.branches, res.mixed, res.details)
    return res


# ---------------------------------------------------------------- scissors

@dataclass(frozen=True)
class ScissorsResource:
    N: int
    c: np.ndarray
    p_qs: float


def scissors_resource(N: int) -> ScissorsResource:
    """Two-mode ancilla coefficients and success probability of the (0, N) scissors."""
    if N < 0:
        raise ValueError("N must be non-negative")
    f = math.factorial
    weights = np.array([f(k) * f(N - k) for k in range(N + 1)], dtype=float)
    scale = 2.0**-N * f(N)
    p_qs = 1.0 / float(np.sum(weights / scale))
    c = np.sqrt(p_qs * weights / scale)
    return ScissorsResource(N, c, p_qs)


def scissors_circuit(state: FockState, mode, N: int):
    """Pre-detection state of the scissors: ancilla ``sum_k c_k|k>|N-k>`` in fresh
    modes ``(s2, s3)`` and a balanced splitter between ``mode`` and ``s2``.

    Returns ``(joint_state, (mode, s2), s3)``.
    """
    mode = as_mode(mode)
    state.registry.index(mode)
    s2, s3 = state.registry.fresh_spatial(2)
    res = scissors_resource(N)
    anc = FockState.from_amplitudes(
        [Mode(s2), Mode(s3)], {(k, N - k): res.c[k] for k in range(N + 1)}
    )
    joint = apply_beam_splitter(tensor(state, anc), mode, Mode(s2), BALANCED)
    return joint, (mode, Mode(s2)), Mode(s3)


def quantum_scissors(state: FockState, mode, N: int) -> ConditionalResult:
    """Truncate ``mode`` to at most ``N`` photons, heralded by the (0, N) pattern.

    The output replaces ``mode`` in the registry; the conditional map is
    ``sqrt(p_qs) * Pi_N``.
    """
    mode = as_mode(mode)
    joint, (d1, d2), out = scissors_circuit(state, mode, N)
    cond = project_counts(joint, [d1, d2], [0, N])
    # the output mode takes the place of the consumed input
    cond = cond.relabel({out: mode})
    pos = state.registry.index(mode)
    order = list(state.registry)
    order[pos] = mode
    return _result(cond.reorder(ModeRegistry(order)), f"scissors (0,{N})")


def truncate(state: FockState, mode, N: int) -> FockState:
    """Closed-form projector onto at most ``N`` photons in ``mode``."""
    k = state.registry.index(mode)
    return map_kets(state, lambda occ, a: [(occ, a)] if occ[k] <= N else [])


# ---------------------------------------------------------------- erasure

def erasure_circuit(state: FockState, source_modes: Sequence, weights=None):
    """Cascade of two-mode mixers whose kept port carries ``sum_j w_j a_j``.

    Returns ``(joint_state, discarded_ports, kept_mode)``; the discarded ports
    are measured later, so the joint state is unitary-equivalent to the input.
    """
    sources = [as_mode(m) for m in source_modes]
    d = len(sources)
    if d < 2:
        raise ValueError("erasure needs at least two source modes")
    w = np.full(d, 1 / math.sqrt(d), dtype=complex) if weights is None else np.asarray(weights, dtype=complex)
    if len(w) != d:
        raise ValueError(f"{len(w)} weights for {d} source modes")
    if abs(float(np.sum(np.abs(w) ** 2)) - 1) > 1e-12:
        raise ValueError(f"erasure weights are not normalised (sum |w|^2 = {np.sum(np.abs(w) ** 2)})")

    s = state
    if w[0] != 0:
        s = apply_phase(s, sources[0], cmath.phase(w[0]))
    acc, acc_norm = sources[0], abs(w[0])
    discarded = []
    for m, wj in zip(sources[1:], w[1:]):
        if wj != 0:
            s = apply_phase(s, m, cmath.phase(wj))
        new_norm = math.hypot(acc_norm, abs(wj))
        t, r = (abs(wj) / new_norm, acc_norm / new_norm) if new_norm > 0 else (1.0, 0.0)
        s = apply_beam_splitter(s, acc, m, BeamSplitterParams(t, r))
        discarded.append(acc)
        acc, acc_norm = m, new_norm
    return s, discarded, acc


def erase_to_single_mode(
    state: FockState, source_modes: Sequence, weights=None, output=None
) -> ConditionalResult:
    """Merge ``source_modes`` into one mode, heralded by empty discarded ports.

    Args:
        source_modes: the ``d >= 2`` modes to merge.
        weights: normalised complex weights ``w_j`` (default ``1/sqrt(d)``); an
            input creation operator ``a_j^+`` contributes ``w_j a_out^+``.
        output: label for the surviving mode (default: scalar mode on the
            spatial index of the first source).
    """
    joint, discarded, kept = erasure_circuit(state, source_modes, weights)
    cond = project_counts(joint, discarded, [0] * len(discarded))
    out = as_mode(output) if output is not None else Mode(as_mode(source_modes[0]).spatial)
    if out != kept:
        cond = cond.relabel({kept: out})
    return _result(cond, "no photon at the discarded ports")


# ---------------------------------------------------------------- Bell / GHZ

def polarization_qudit(spatial: int) -> list:
    """Polarization encoding: index 0 is V, index 1 is H."""
    return [Mode(spatial, "V"), Mode(spatial, "H")]


def ghz_bra(qudits: Sequence[Sequence], phases: Sequence[float]) -> FockState:
    """Normalised ``sum_j e^{-i theta_j} |j>...|j> / sqrt(d)`` on one-hot qudits."""
    d = len(phases)
    qudits = [[as_mode(m) for m in q] for q in qudits]
    for q in qudits:
        if len(q) != d:
            raise RegistryError(f"qudit {[str(m) for m in q]} has {len(q)} modes, expected d={d}")
    reg = ModeRegistry([m for q in qudits for m in q])
    amps = {}
    for j, th in enumerate(phases):
        occ = []
        for _ in qudits:
            occ += [1 if p == j else 0 for p in range(d)]
        amps[tuple(occ)] = cmath.exp(-1j * th) / math.sqrt(d)
    return FockState.from_amplitudes(reg, amps)


def ghz_project(
    state: FockState, qudits: Sequence[Sequence], phases: Sequence[float], success: float = 1.0
) -> ConditionalResult:
    """Ideal projection of single-photon qudits onto a GHZ state.

    ``qudits[k]`` lists the ``d`` modes of qudit ``k`` (use
    :func:`polarization_qudit` for V/H encoding); ``phases`` has length ``d``.
    Returns the relative state of the other modes.
    """
    bra = ghz_bra(qudits, phases)
    for m in bra.registry:
        state.registry.index(m)
    out = project_onto(state, bra)
    if success != 1.0:
        out = out.scaled(math.sqrt(success))
    return _result(out, f"GHZ_{len(qudits)},{len(phases)}")


def bell_project(state: FockState, spatial_a: int, spatial_b: int, theta: float,
                 success: float = 1.0) -> ConditionalResult:
    """Project two polarization qubits onto ``(|VV> + e^{-i theta}|HH>)/sqrt(2)``."""
    res = ghz_project(
        state, [polarization_qudit(spatial_a), polarization_qudit(spatial_b)], [0.0, theta], success
    )
    return ConditionalResult(res.state, res.probability, f"Bell(theta={theta:g})")


def bell_circuit(state: FockState, spatial_a: int, spatial_b: int, theta: float):
    """Waveplate on ``b`` then a balanced splitter between ``a`` and ``b``.

    The waveplate (90 degree rotation followed by a phase ``theta`` on V) maps
    the target Bell state onto the polarization singlet, the only two-photon
    state giving a (1, 1) coincidence behind a balanced splitter.
    Returns ``(joint_state, detector_groups)``.
    """
    s = apply_waveplate(state, spatial_b, math.pi / 2)
    s = apply_phase(s, Mode(spatial_b, "V"), theta)
    for p in ("V", "H"):
        s = apply_beam_splitter(s, Mode(spatial_a, p), Mode(spatial_b, p), BALANCED)
    return s, [polarization_qudit(spatial_a), polarization_qudit(spatial_b)]


def bell_project_circuit(state: FockState, spatial_a: int, spatial_b: int, theta: float) -> ConditionalResult:
    joint, detectors = bell_circuit(state, spatial_a, spatial_b, theta)
    branches = {}
    for modes, pattern in _blind_detector_patterns(detectors, (1, 1)):
        branches["PD1=%dV%dH,PD2=%dV%dH" % pattern] = project_counts(joint, modes, pattern)
    return _combine_subbranches(branches, "coincidence (1,1)")


def ghz_swap(sides: Sequence[FockState], qudits: Sequence[Sequence], phases: Sequence[float],
             success: float = 1.0) -> ConditionalResult:
    """GHZ projection of ``tensor(*sides)`` without building the joint state.

    ``qudits[k]`` are modes of ``sides[k]``.  Uses
    ``<GHZ| prod_k |side_k> = sum_j e^{i theta_j}/sqrt(d) prod_k <j|side_k>``.
    """
    d = len(phases)
    rels = []
    for side, q in zip(sides, qudits):
        q = [as_mode(m) for m in q]
        if len(q) != d:
            raise RegistryError(f"qudit has {len(q)} modes, expected d={d}")
        rels.append([project_counts(side, q, [1 if p == j else 0 for p in range(d)]) for j in range(d)])
    total = None
    for j, th in enumerate(phases):
        term = rels[0][j]
        for k in range(1, len(sides)):
            term = tensor(term, rels[k][j])
        term = term.scaled(cmath.exp(1j * th) * math.sqrt(success / d))
        total = term if total is None else total + term
    return _result(total, f"GHZ_{len(sides)},{d}")


# ---------------------------------------------------------------- C-SHIFT

def _one_hot_index(occ, idx):
    vals = [occ[i] for i in idx]
    if sum(vals) != 1 or max(vals) != 1:
        return None
    return vals.index(1)


def cshift(state: FockState, qudit_a_modes: Sequence, qudit_b_modes: Sequence, d: int) -> FockState:
    """``|j>_a |j'>_b -> |j>_a |j' - j mod d>_b`` on single-photon qudits.

    Positions are 0-based, so position 0 plays the role of index ``d``.
    """
    ia = [state.registry.index(m) for m in qudit_a_modes]
    ib = [state.registry.index(m) for m in qudit_b_modes]
    if len(ia) != d or len(ib) != d:
        raise RegistryError(f"C-SHIFT needs {d} modes per qudit")

    def ket(occ, amp):
        j, jp = _one_hot_index(occ, ia), _one_hot_index(occ, ib)
        if j is None or jp is None:
            raise SupportError(f"ket {occ} is outside the one-photon-per-qudit subspace")
        new = list(occ)
        for p, i in enumerate(ib):
            new[i] = 1 if p == (jp - j) % d else 0
        yield tuple(new), amp

    return map_kets(state, ket)


def ghz_project_cshift(state: FockState, qudits: Sequence[Sequence], phases: Sequence[float]) -> ConditionalResult:
    """GHZ projection realised as a C-SHIFT cascade plus product detection.

    C-SHIFT from qudit 1 onto each other qudit factorises the GHZ state into
    ``(sum_j e^{-i theta_j}|j>) |0>...|0>``, which is then projected on.
    """
    d = len(phases)
    s = state
    for q in qudits[1:]:
        s = cshift(s, qudits[0], q, d)
    first = FockState.from_amplitudes(
        [as_mode(m) for m in qudits[0]],
        {tuple(1 if p == j else 0 for p in range(d)): cmath.exp(-1j * th) / math.sqrt(d)
         for j, th in enumerate(phases)},
    )
    s = project_onto(s, first)
    for q in qudits[1:]:
        s = project_counts(s, q, [1] + [0] * (d - 1))
    return _result(s, f"GHZ_{len(qudits)},{d} via C-SHIFT")
