import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condprep.errors import RegistryError, SupportError
from condprep.fock import (
    FockState,
    Mode,
    count_distribution,
    fidelity,
    make_state,
    tensor,
)
from condprep.protocols import (
    bell_circuit,
    bell_project,
    bell_project_circuit,
    cshift,
    erase_to_single_mode,
    erasure_circuit,
    ghz_project,
    ghz_project_cshift,
    ghz_swap,
    polarization_qudit,
    qnd_circuit,
    qnd_single_photon,
    quantum_scissors,
    qudit_qnd,
    scissors_circuit,
    scissors_resource,
    truncate,
)

from _oracles import crandn

POL = [Mode(0, "V"), Mode(0, "H")]


def _pol_photon(alpha, beta, spatial=0):
    return FockState.from_amplitudes(
        [Mode(spatial, "V"), Mode(spatial, "H")], {(1, 0): alpha, (0, 1): beta}
    )


# ---------------------------------------------------------------- QND

def test_ideal_qnd_keeps_one_photon_sector():
    s = FockState.from_amplitudes(POL, {(0, 0): 0.5, (1, 0): 0.5, (0, 1): 0.5j, (1, 1): 0.5})
    res = qnd_single_photon(s, 0, success=0.5)
    assert set(res.state.amplitudes) == {(1, 0), (0, 1)}
    assert math.isclose(res.probability, 0.5 * 0.5)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, math.pi), st.floats(-math.pi, math.pi))
def test_interferometric_qnd_one_eighth(theta, phi):
    a, b = math.cos(theta / 2), cmath.exp(1j * phi) * math.sin(theta / 2)
    s = _pol_photon(a, b)
    res = qnd_single_photon(s, 0, backend="interferometric")
    assert abs(res.probability - 0.125) < 1e-12
    assert not res.mixed
    assert math.isclose(fidelity(res.state, s), 1.0, abs_tol=1e-12)


def test_interferometric_qnd_rejects_vacuum_and_reports_multiphoton():
    vac = FockState.from_amplitudes(POL, {(0, 0): 1})
    assert qnd_single_photon(vac, 0, backend="interferometric").probability < 1e-15
    # vacuum admixtures never herald
    mix = FockState.from_amplitudes(POL, {(0, 0): 0.8, (1, 0): 0.6})
    res = qnd_single_photon(mix, 0, backend="interferometric")
    assert abs(res.probability - 0.36 * 0.125) < 1e-12
    for amps in ({(1, 1): 1}, {(2, 0): 0.6, (0, 2): 0.8}, {(2, 1): 1}):
        res = qnd_single_photon(FockState.from_amplitudes(POL, amps), 0, backend="interferometric")
        probs = res.details["output_photon_probabilities"]
        assert math.isclose(sum(probs.values()), res.probability, rel_tol=1e-12, abs_tol=1e-15)
        assert all(n >= 1 for n in probs)


def test_qnd_completeness():
    s = _pol_photon(0.6, 0.8j)
    joint, detectors, _ = qnd_circuit(s, 0)
    modes = [m for g in detectors for m in g]
    dist = count_distribution(joint, modes)
    assert math.isclose(sum(dist.values()), 1.0, rel_tol=1e-12)
    heralds = dist.get((1, 0, 0, 1), 0) + dist.get((0, 1, 1, 0), 0)
    assert abs(heralds - 0.125) < 1e-12


def test_qudit_qnd_needs_exactly_one_photon():
    reg = [Mode(k) for k in range(3)]
    s = FockState.from_amplitudes(reg, {(1, 0, 0): 1, (1, 1, 0): 1, (0, 0, 0): 1})
    res = qudit_qnd(s, reg)
    assert set(res.state.amplitudes) == {(1, 0, 0)}


# ---------------------------------------------------------------- scissors

@pytest.mark.parametrize("N", range(5))
def test_scissors_probability_closed_form(N):
    # 1/p = 2^N / N! * sum_k k!(N-k)!
    expect = 1 / (2**N / math.factorial(N) * sum(math.factorial(k) * math.factorial(N - k) for k in range(N + 1)))
    assert abs(scissors_resource(N).p_qs - expect) < 1e-15
    # the two-mode ancilla is normalised
    assert abs(np.sum(scissors_resource(N).c ** 2) - 1) < 1e-12


def test_scissors_probability_table_values():
    assert [scissors_resource(N).p_qs for N in range(3)] == pytest.approx([1, 0.25, 0.1], abs=1e-15)


@pytest.mark.parametrize("N", range(5))
def test_scissors_map_is_scaled_projector(N):
    rng = np.random.default_rng(N)
    p = scissors_resource(N).p_qs
    for cutoff in (N, N + 2):
        st_in = FockState.from_dense([Mode(0)], crandn(rng, cutoff + 1))
        out = quantum_scissors(st_in, Mode(0), N).state
        for n in range(cutoff + 1):
            ref = math.sqrt(p) * st_in.amplitude((n,)) if n <= N else 0
            assert abs(out.amplitude((n,)) - ref) < 1e-12


def test_scissors_on_entangled_input_keeps_mode_order():
    s = FockState.from_amplitudes([Mode(0), Mode(1)], {(0, 2): 0.6, (1, 0): 0.8})
    out = quantum_scissors(s, Mode(1), 1)
    assert list(out.state.registry) == [Mode(0), Mode(1)]
    assert np.isclose(out.state.amplitude((1, 0)), 0.8 * math.sqrt(0.25))
    assert out.state.amplitude((0, 2)) == 0
    assert truncate(s, Mode(1), 1).amplitudes == {(1, 0): 0.8}


@pytest.mark.parametrize("N", range(4))
def test_scissors_detection_completeness(N):
    s = FockState.from_dense([Mode(0)], np.ones(N + 3) / math.sqrt(N + 3))
    joint, dets, _ = scissors_circuit(s, Mode(0), N)
    dist = count_distribution(joint, list(dets))
    assert math.isclose(sum(dist.values()), 1.0, rel_tol=1e-12)


# ---------------------------------------------------------------- erasure

def test_erasure_weights_single_photons():
    rng = np.random.default_rng(3)
    w = crandn(rng, 3)
    w /= np.linalg.norm(w)
    reg = [Mode(k) for k in range(3)]
    for j in range(3):
        occ = tuple(1 if k == j else 0 for k in range(3))
        out = erase_to_single_mode(FockState.from_amplitudes(reg, {occ: 1}), reg, w).state
        assert np.isclose(out.amplitude((1,)), w[j])


def test_erasure_of_product_is_multinomial():
    reg = [Mode(0), Mode(1)]
    s = FockState.from_amplitudes(reg, {(1, 1): 1})
    out = erase_to_single_mode(s, reg).state
    # (a^+ + b^+)^2/2 on one mode: a^+ b^+ -> (c^+)^2 / 2 -> sqrt(2)/2 |2>
    assert np.isclose(out.amplitude((2,)), math.sqrt(2) / 2)


def test_erasure_completeness_and_validation():
    reg = [Mode(k) for k in range(3)]
    s = FockState.from_amplitudes(reg, {(1, 0, 1): 0.6, (0, 2, 0): 0.8})
    joint, disc, kept = erasure_circuit(s, reg)
    assert math.isclose(sum(count_distribution(joint, disc).values()), 1.0, rel_tol=1e-12)
    with pytest.raises(ValueError):
        erasure_circuit(s, reg, [1, 1, 1])
    with pytest.raises(ValueError):
        erasure_circuit(s, reg[:1])


# ---------------------------------------------------------------- Bell / GHZ

def _two_qubit_state(coeffs):
    reg = polarization_qudit(1) + polarization_qudit(2)
    amps = {}
    for (i, j), c in zip(itertools.product(range(2), repeat=2), coeffs):
        amps[(1 - i, i, 1 - j, j)] = c
    return FockState.from_amplitudes(reg, amps)


@pytest.mark.parametrize("theta", [0.0, math.pi / 2, math.pi, 1.234])
def test_bell_projection_amplitude(theta):
    rng = np.random.default_rng(7)
    c = crandn(rng, 4)
    extra = FockState.from_amplitudes([Mode(0)], {(0,): 1})
    s = tensor(extra, _two_qubit_state(c))
    res = bell_project(s, 1, 2, theta)
    # <VV| + e^{+i theta} <HH| over sqrt 2
    ref = (c[0] + cmath.exp(1j * theta) * c[3]) / math.sqrt(2)
    assert np.isclose(res.state.amplitude((0,)), ref)


@pytest.mark.parametrize("theta", [0.0, math.pi / 2, math.pi, 2.2])
def test_bell_circuit_proportional_to_ideal(theta):
    rng = np.random.default_rng(11)
    reg = [Mode(0)] + polarization_qudit(1) + polarization_qudit(2)
    for _ in range(5):
        # data mode entangled with one photon on each side
        amps = {}
        for n in range(3):
            for i, j in itertools.product(range(2), repeat=2):
                amps[(n, 1 - i, i, 1 - j, j)] = complex(crandn(rng))
        s = FockState.from_amplitudes(reg, amps)
        ideal = bell_project(s, 1, 2, theta)
        circ = bell_project_circuit(s, 1, 2, theta)
        assert not circ.mixed
        # only the singlet gives one photon per port behind a balanced splitter
        assert math.isclose(circ.probability, ideal.probability, rel_tol=1e-10)
        assert math.isclose(fidelity(circ.state, ideal.state), 1.0, abs_tol=1e-12)


def test_bell_circuit_completeness():
    s = _two_qubit_state([0.5, 0.5, 0.5j, -0.5])
    joint, dets = bell_circuit(s, 1, 2, 0.3)
    modes = [m for g in dets for m in g]
    assert math.isclose(sum(count_distribution(joint, modes).values()), 1.0, rel_tol=1e-12)


def _qudit_basis(d, M):
    return [[Mode(10 * (k + 1) + p) for p in range(d)] for k in range(M)]


def _ghz_dense(d, M, phases):
    v = np.zeros((2,) * (d * M), dtype=complex)
    for j, th in enumerate(phases):
        occ = [0] * (d * M)
        for k in range(M):
            occ[k * d + j] = 1
        v[tuple(occ)] = cmath.exp(-1j * th) / math.sqrt(d)
    return v


def test_ghz_project_against_dense_overlap():
    d, M = 3, 2
    rng = np.random.default_rng(5)
    qudits = _qudit_basis(d, M)
    phases = rng.uniform(0, 2 * math.pi, d)
    # random state of the two qudits (single photon each) times a marker mode
    amps = {}
    for j1, j2 in itertools.product(range(d), repeat=2):
        occ = [0] * (d * M)
        occ[j1], occ[d + j2] = 1, 1
        amps[tuple(occ)] = complex(crandn(rng))
    s = FockState.from_amplitudes([m for q in qudits for m in q], amps)
    res = ghz_project(tensor(FockState.from_amplitudes([Mode(0)], {(0,): 1}), s), qudits, phases)
    dense = np.zeros((2,) * (d * M), dtype=complex)
    for occ, a in amps.items():
        dense[occ] = a
    assert np.isclose(res.state.amplitude((0,)), np.vdot(_ghz_dense(d, M, phases), dense))


def test_ghz_swap_equals_joint_projection():
    rng = np.random.default_rng(9)
    d = 3
    sides = []
    for k in range(2):
        q = [Mode(100 * (k + 1) + p) for p in range(d)]
        data = Mode(k)
        amps = {}
        for j in range(d):
            for n in range(2):
                occ = [n] + [1 if p == j else 0 for p in range(d)]
                amps[tuple(occ)] = complex(crandn(rng))
        sides.append(FockState.from_amplitudes([data] + q, amps))
    qudits = [list(s.registry)[1:] for s in sides]
    phases = rng.uniform(0, 6, d)
    a = ghz_swap(sides, qudits, phases, success=0.3).state
    b = ghz_project(tensor(sides[0], sides[1]), qudits, phases, success=0.3).state
    for occ in set(a.amplitudes) | set(b.amplitudes):
        assert abs(a.amplitude(occ) - b.amplitude(occ)) < 1e-12


def test_ghz_wrong_qudit_size():
    with pytest.raises(RegistryError):
        ghz_swap([FockState.from_amplitudes([Mode(0), Mode(1)], {(1, 0): 1})], [[Mode(0), Mode(1)]], [0, 0, 0])


def test_cshift_maps_ghz_to_product():
    d, M = 3, 3
    rng = np.random.default_rng(21)
    phases = rng.uniform(0, 2 * math.pi, d)
    qudits = _qudit_basis(d, M)
    reg = [m for q in qudits for m in q]
    ghz = FockState.from_dense(reg, _ghz_dense(d, M, phases))
    s = ghz
    for q in qudits[1:]:
        s = cshift(s, qudits[0], q, d)
    # (sum_j e^{-i theta_j}|j>) |index d>|index d>; index d sits at position 0
    first = np.array([cmath.exp(-1j * th) for th in phases]) / math.sqrt(d)
    ref = {}
    for j in range(d):
        occ = [0] * (d * M)
        occ[j] = 1
        for k in range(1, M):
            occ[k * d] = 1
        ref[tuple(occ)] = first[j]
    assert abs(fidelity(s, FockState.from_amplitudes(reg, ref)) - 1) < 1e-12


def test_cshift_definition_and_support():
    d = 3
    qa, qb = [Mode(p) for p in range(d)], [Mode(10 + p) for p in range(d)]
    reg = qa + qb
    for j, jp in itertools.product(range(d), repeat=2):
        occ = [0] * 6
        occ[j], occ[d + jp] = 1, 1
        out = cshift(FockState.from_amplitudes(reg, {tuple(occ): 1}), qa, qb, d)
        (key,) = out.amplitudes
        assert key[d:].index(1) == (jp - j) % d
    with pytest.raises(SupportError):
        cshift(FockState.from_amplitudes(reg, {(0,) * 6: 1}), qa, qb, d)


def test_ghz_projection_via_cshift_matches_ideal():
    d, M = 3, 3
    rng = np.random.default_rng(4)
    qudits = _qudit_basis(d, M)
    reg = [m for q in qudits for m in q]
    amps = {}
    for js in itertools.product(range(d), repeat=M):
        occ = [0] * (d * M)
        for k, j in enumerate(js):
            occ[k * d + j] = 1
        amps[tuple(occ)] = complex(crandn(rng))
    s = tensor(FockState.from_amplitudes([Mode(0)], {(0,): 1}), FockState.from_amplitudes(reg, amps))
    phases = rng.uniform(0, 6, d)
    a = ghz_project(s, qudits, phases).state
    b = ghz_project_cshift(s, qudits, phases).state
    assert abs(a.amplitude((0,)) - b.amplitude((0,))) < 1e-12
