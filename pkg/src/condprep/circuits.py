"""Full-circuit simulations of the entangling devices.

``polarization_branch`` is the two-source device (photon subtraction into a
polarization-tagged mode, one-photon check, polarization erasure, scissors).
``spatial_branch`` is its ``d``-source generalisation in which the subtracted
photon is tagged by one of ``d`` auxiliary spatial modes; each source may be a
few-mode state, in which case the photon is subtracted from its last mode and
every mode position is erased separately.

Both return a :class:`BranchRun` with the conditional state and the measured
conditional probability at every checkpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fock import (
    FockState,
    Mode,
    ModeRegistry,
    add_vacuum_modes,
    make_state,
    map_kets,
    project_counts,
    tensor,
)
from .optics import BeamSplitterParams, apply_beam_splitter
from .protocols import erase_to_single_mode, qnd_single_photon, quantum_scissors, qudit_qnd


@dataclass
class BranchRun:
    state: FockState
    data_modes: list            # output data modes, in order
    qudit: list                 # auxiliary modes encoding the term index
    checkpoints: list = field(default_factory=list)   # (stage names, conditional probability)

    def record(self, stages, before: float, after: float):
        self.checkpoints.append((tuple(stages), after / before if before > 0 else 0.0))


def polarization_branch(
    f_in,
    g_in,
    bs1: BeamSplitterParams,
    pbs2: BeamSplitterParams,
    N: int | None,
    base: int = 1,
    qnd_success: float = 1.0,
    qnd_backend: str = "ideal",
    source_state: FockState | None = None,
) -> BranchRun:
    """Simulate the polarization device on inputs ``|f~>_{V} |g~>_{H}``.

    Spatial index ``base`` is the input/output mode and ``base + 1`` receives
    the subtracted photon.  ``pbs2`` gives the erasure weights ``(r2, t2)`` on
    ``(V, H)`` through its ``(t, r)`` fields.  ``N=None`` skips the scissors.
    """
    one, two = base, base + 1
    modes = [Mode(one, "V"), Mode(one, "H")]
    s = source_state if source_state is not None else make_state(modes, [(1.0, [f_in, g_in])])
    s = add_vacuum_modes(s, [Mode(two, "V"), Mode(two, "H")])
    run = BranchRun(s, [Mode(one)], [Mode(two, "V"), Mode(two, "H")])

    p0 = s.norm2()
    for p in ("V", "H"):
        s = apply_beam_splitter(s, Mode(one, p), Mode(two, p), bs1)
    p1 = s.norm2()
    run.record(["subtraction"], p0, p1)

    s = qnd_single_photon(s, two, backend=qnd_backend, success=qnd_success).state
    p2 = s.norm2()
    run.record(["qnd"], p1, p2)

    s = erase_to_single_mode(s, modes, weights=[pbs2.r, pbs2.t], output=Mode(one)).state
    p3 = s.norm2()
    run.record(["erasure"], p2, p3)

    if N is not None:
        s = quantum_scissors(s, Mode(one), N).state
        run.record(["scissors"], p3, s.norm2())
    run.state = s
    return run


def _relabel_source(src: FockState, targets: Sequence[Mode]) -> FockState:
    return src.relabel(dict(zip(src.registry, targets)))


def spatial_branch(
    sources: Sequence,
    bs1: BeamSplitterParams,
    N: int | None,
    base: int = 1,
    qnd_success: float = 1.0,
    streaming: bool = True,
) -> BranchRun:
    """Simulate the ``d``-source device with balanced erasure.

    Args:
        sources: one entry per source; either a :class:`FockState` on ``L``
            modes or an amplitude array with ``L`` axes.
        bs1: subtraction beam splitter applied to the last mode of each source.
        N: scissors cut applied to every merged mode (``None`` to skip).
        streaming: interleave sources with the erasure cascade.  Elements on
            disjoint modes commute and the auxiliary counts are not touched
            between subtraction and the one-photon check, so kets with more
            than one auxiliary photon can be dropped early; the result is
            identical to the direct ordering but far smaller in memory.
    """
    states = []
    for src in sources:
        if isinstance(src, FockState):
            states.append(src)
        else:
            arr = np.asarray(src, dtype=complex)
            states.append(FockState.from_dense([Mode(i) for i in range(arr.ndim)], arr))
    d = len(states)
    L = len(states[0].registry)
    src_modes = [[Mode(base + j * L + a) for a in range(L)] for j in range(d)]
    aux = [Mode(base + d * L + j) for j in range(d)]
    outputs = [Mode(base + a) for a in range(L)]

    if streaming:
        s, checkpoint = _spatial_streaming(states, src_modes, aux, bs1, qnd_success)
    else:
        s, checkpoint = _spatial_direct(states, src_modes, aux, bs1, qnd_success)
    run = BranchRun(s, outputs, aux)
    run.checkpoints.extend(checkpoint)
    if N is not None:
        before = s.norm2()
        for m in outputs:
            s = quantum_scissors(s, m, N).state
        run.record(["scissors"], before, s.norm2())
    run.state = s
    return run


def _spatial_direct(states, src_modes, aux, bs1, qnd_success):
    d, L = len(src_modes), len(src_modes[0])
    s = _relabel_source(states[0], src_modes[0])
    for j in range(1, d):
        s = tensor(s, _relabel_source(states[j], src_modes[j]))
    s = add_vacuum_modes(s, aux)
    p0 = s.norm2()
    for j in range(d):
        s = apply_beam_splitter(s, src_modes[j][-1], aux[j], bs1)
    p1 = s.norm2()
    s = qudit_qnd(s, aux, qnd_success).state
    p2 = s.norm2()
    for a in range(L):
        if d > 1:
            s = erase_to_single_mode(s, [src_modes[j][a] for j in range(d)],
                                     output=src_modes[0][a]).state
    p3 = s.norm2()
    checkpoints = [(("subtraction",), p1 / p0), (("qnd",), p2 / p1 if p1 else 0.0),
                   (("erasure",), p3 / p2 if p2 else 0.0)]
    return s, checkpoints


def _spatial_streaming(states, src_modes, aux, bs1, qnd_success):
    d, L = len(src_modes), len(src_modes[0])
    s = None
    acc = None
    for j in range(d):
        piece = add_vacuum_modes(_relabel_source(states[j], src_modes[j]), [aux[j]])
        s = piece if s is None else tensor(s, piece)
        if j == 0:
            p0 = s.norm2()
        else:
            p0 *= piece.norm2()
        s = apply_beam_splitter(s, src_modes[j][-1], aux[j], bs1)
        aux_idx = [s.registry.index(m) for m in aux[: j + 1]]
        s = map_kets(s, lambda occ, a: [(occ, a)] if sum(occ[i] for i in aux_idx) <= 1 else [])
        if acc is None:
            acc = list(src_modes[0])
            continue
        # balanced cascade: the kept port carries sum_{k<=j} a_k / sqrt(j+1)
        params = BeamSplitterParams(math.sqrt(1 / (j + 1)), math.sqrt(j / (j + 1)))
        for a in range(L):
            s = apply_beam_splitter(s, acc[a], src_modes[j][a], params)
            s = project_counts(s, [acc[a]], [0])
            acc[a] = src_modes[j][a]
    s = qudit_qnd(s, aux, qnd_success).state
    s = s.relabel({acc[a]: src_modes[0][a] for a in range(L) if acc[a] != src_modes[0][a]})
    return s, [(("subtraction", "qnd", "erasure"), s.norm2() / p0)]


def branch_amplitudes(run: BranchRun, d: int, cutoff: int) -> list:
    """Dense amplitude tensors of the data modes for each term index ``j``."""
    out = []
    for j in range(d):
        rel = project_counts(run.state, run.qudit, [1 if p == j else 0 for p in range(d)])
        rel = rel.reorder(ModeRegistry(run.data_modes))
        out.append(rel.to_dense(cutoff))
    return out
