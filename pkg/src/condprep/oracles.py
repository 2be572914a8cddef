"""Side-by-side checks of closed forms against full circuit simulation.

Each function returns ``(rows, max_deviation)`` where ``rows`` is a list of
dicts suitable for tabulation.
"""

from __future__ import annotations

import math

import numpy as np

from . import design
from .circuits import branch_amplitudes, polarization_branch, spatial_branch
from .fock import FockState, Mode, add_vacuum_modes, make_state, project_counts
from .optics import BeamSplitterParams, apply_beam_splitter, subtract_photon
from .protocols import qnd_single_photon, quantum_scissors, scissors_resource

_BAL = BeamSplitterParams.balanced()


def _random_vector(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def _aligned_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """Max |a - c b| with ``c`` the least-squares complex constant."""
    a, b = np.ravel(a), np.ravel(b)
    nb = np.vdot(b, b)
    c = np.vdot(b, a) / nb if nb else 0
    return float(np.max(np.abs(a - c * b), initial=0.0))


def pqs_table(max_n: int):
    rows, dev = [], 0.0
    for N in range(max_n + 1):
        analytic = scissors_resource(N).p_qs
        amps = np.ones(N + 1) / math.sqrt(N + 1)
        st = FockState.from_dense([Mode(0)], amps)
        sim = quantum_scissors(st, Mode(0), N).probability
        rows.append({"N": N, "analytic": analytic, "simulated": sim})
        dev = max(dev, abs(sim - analytic))
    return rows, dev


def qnd_table(trials: int = 5, seed: int = 0):
    rng = np.random.default_rng(seed)
    rows, dev = [], 0.0
    for k in range(trials):
        pol = _random_vector(rng, 2)
        pol /= np.linalg.norm(pol)
        st = FockState.from_amplitudes([Mode(0, "V"), Mode(0, "H")], {(1, 0): pol[0], (0, 1): pol[1]})
        res = qnd_single_photon(st, 0, backend="interferometric")
        fid = abs(np.vdot([res.state.amplitude((1, 0)), res.state.amplitude((0, 1))], pol)) ** 2
        fid /= res.probability
        rows.append({"trial": k, "analytic": 0.125, "simulated": res.probability, "fidelity": fid})
        dev = max(dev, abs(res.probability - 0.125), abs(fid - 1))
    return rows, dev


def bop_table(max_n: int = 6, t: float = 0.8):
    params = BeamSplitterParams.from_t(t)
    rows, dev = [], 0.0
    for n in range(max_n + 1):
        st = FockState.from_amplitudes([Mode(0)], {(n,): 1.0})
        joint = apply_beam_splitter(add_vacuum_modes(st, [Mode(1)]), Mode(0), Mode(1), params)
        for k in (0, 1):
            sim = project_counts(joint, [Mode(1)], [k])
            ana = subtract_photon(st, Mode(0), k, params)
            d = max((abs(sim.amplitude(o) - ana.amplitude(o))
                     for o in set(sim.amplitudes) | set(ana.amplitudes)), default=0.0)
            rows.append({"n": n, "k": k, "analytic_norm2": ana.norm2(), "simulated_norm2": sim.norm2(),
                         "max_amplitude_deviation": d})
            dev = max(dev, d)
    return rows, dev


def two_term_table(max_n: int = 3, trials: int = 3, seed: int = 0,
                   t1=0.6, r1=0.8, t2=0.5, r2=math.sqrt(0.75)):
    rng = np.random.default_rng(seed)
    bs1, pbs2 = BeamSplitterParams(t1, r1), BeamSplitterParams(t2, r2)
    rows, dev = [], 0.0
    for N in range(max_n + 1):
        for k in range(trials):
            ft, gt = _random_vector(rng, N + 2), _random_vector(rng, N + 2)
            f, g = design.forward_two_term(ft, gt, t1, r1, t2, r2)
            run = polarization_branch(ft, gt, bs1, pbs2, None)
            sim = branch_amplitudes(run, 2, 2 * N + 1)
            d = _aligned_deviation(np.concatenate([f, g]), np.concatenate(sim))
            rows.append({"N": N, "trial": k, "max_amplitude_deviation": d})
            dev = max(dev, d)
    return rows, dev


def multi_table(d: int = 3, max_n: int = 2, trials: int = 2, seed: int = 0):
    rng = np.random.default_rng(seed)
    rows, dev = [], 0.0
    for N in range(max_n + 1):
        for k in range(trials):
            srcs = [_random_vector(rng, N + 2) for _ in range(d)]
            ana = design.forward_multi(srcs, _BAL.t, _BAL.r)
            run = spatial_branch(srcs, _BAL, None)
            sim = branch_amplitudes(run, d, len(ana[0]) - 1)
            dv = _aligned_deviation(np.concatenate(ana), np.concatenate(sim))
            rows.append({"N": N, "trial": k, "max_amplitude_deviation": dv})
            dev = max(dev, dv)
    return rows, dev


def round_trip_table(d: int, n: int, trials: int, seed: int):
    """``forward(invert(targets)) - targets`` on random targets."""
    rng = np.random.default_rng(seed)
    rows, dev = [], 0.0
    for k in range(trials):
        targets = [_random_vector(rng, n + 1) for _ in range(d)]
        if d == 2:
            ft, gt = design.invert_two_term(*targets, _BAL.t, _BAL.r, _BAL.t, _BAL.r)
            out = design.forward_two_term(ft, gt, _BAL.t, _BAL.r, _BAL.t, _BAL.r)
        else:
            out = design.forward_multi(design.invert_multi(targets, _BAL.t, _BAL.r), _BAL.t, _BAL.r)
        dv = max(float(np.max(np.abs(o[: n + 1] - t))) for o, t in zip(out, targets))
        rows.append({"trial": k, "max_deviation": dv})
        dev = max(dev, dv)
    return rows, dev
