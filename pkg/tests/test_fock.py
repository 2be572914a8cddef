import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condprep.errors import CapError, RegistryError
from condprep.fock import (
    FockState,
    Mode,
    ModeRegistry,
    add_vacuum_modes,
    basis_state,
    count_distribution,
    fidelity,
    inner,
    make_state,
    project_counts,
    project_onto,
    tensor,
    vacuum,
)

from _oracles import crandn


def test_registry_rejects_duplicates_and_mixed_labels():
    with pytest.raises(RegistryError):
        ModeRegistry([Mode(0), Mode(0)])
    with pytest.raises(RegistryError):
        ModeRegistry([Mode(0), Mode(0, "V")])
    with pytest.raises(RegistryError):
        ModeRegistry([Mode(0, "X")])


def test_registry_lookup_and_fresh_indices():
    reg = ModeRegistry([Mode(0, "V"), Mode(0, "H"), Mode(3)])
    assert reg.index(Mode(3)) == 2
    assert reg.polarization_modes(0) == (Mode(0, "V"), Mode(0, "H"))
    assert reg.fresh_spatial(2) == [4, 5]
    with pytest.raises(RegistryError):
        reg.index(Mode(7))
    with pytest.raises(RegistryError):
        reg.polarization_modes(3)


def test_concat_collision():
    with pytest.raises(RegistryError):
        ModeRegistry([Mode(1)]).concat(ModeRegistry([Mode(1, "V"), Mode(1, "H")]))


def test_make_state_matches_outer_product():
    rng = np.random.default_rng(0)
    a, b = crandn(rng, 3), crandn(rng, 2)
    s = make_state([Mode(0), Mode(1)], [(2.0, [a, b])])
    np.testing.assert_allclose(s.to_dense(2)[:, :2], 2.0 * np.outer(a, b), atol=1e-14)


def test_make_state_caps():
    with pytest.raises(CapError) as exc:
        make_state([Mode(0)], [(1, [[0, 0, 0, 1]])], mode_cap=2)
    assert exc.value.photons == 3
    with pytest.raises(CapError):
        make_state([Mode(0), Mode(1)], [(1, [[0, 1], [0, 0, 1]])], total_cap=2)


def test_pruning_and_sorted_keys():
    s = FockState.from_amplitudes([Mode(0), Mode(1)], {(1, 0): 1.0, (0, 1): 1e-16, (0, 0): 0.5})
    assert list(s.amplitudes) == [(0, 0), (1, 0)]


def test_unnormalised_norm_is_probability():
    s = make_state([Mode(0)], [(1, [[0.6, 0.0, 0.0]])])
    assert math.isclose(s.norm2(), 0.36)
    assert math.isclose(s.normalized().norm2(), 1.0)


def test_tensor_and_inner():
    rng = np.random.default_rng(1)
    a = FockState.from_dense([Mode(0)], crandn(rng, 3))
    b = FockState.from_dense([Mode(1)], crandn(rng, 2))
    ab = tensor(a, b)
    np.testing.assert_allclose(ab.to_dense(2)[:, :2], np.outer(a.to_dense(2), b.to_dense(1)), atol=1e-14)
    assert math.isclose(ab.norm2(), a.norm2() * b.norm2())
    c = FockState.from_dense([Mode(0)], crandn(rng, 3))
    assert np.isclose(inner(a, c), np.vdot(a.to_dense(2), c.to_dense(2)))


def test_project_counts_drops_modes():
    reg = [Mode(0), Mode(1)]
    s = FockState.from_amplitudes(reg, {(0, 1): 0.6, (1, 0): 0.8})
    p = project_counts(s, [Mode(1)], [1])
    assert list(p.registry) == [Mode(0)]
    assert p.amplitudes == {(0,): 0.6}


def test_project_onto_partial_inner_product():
    reg = [Mode(0), Mode(1)]
    s = FockState.from_amplitudes(reg, {(0, 1): 0.6, (1, 0): 0.8j})
    bra = FockState.from_amplitudes([Mode(1)], {(1,): 1j})
    p = project_onto(s, bra)
    assert np.isclose(p.amplitude((0,)), -1j * 0.6)


def test_vacuum_and_basis():
    reg = ModeRegistry([Mode(0), Mode(1)])
    assert vacuum(reg).amplitudes == {(0, 0): 1}
    assert basis_state(reg, (2, 1)).photon_numbers() == {3}
    s = add_vacuum_modes(basis_state(reg, (1, 0)), [Mode(5)])
    assert s.amplitudes == {(1, 0, 0): 1}


def test_fidelity_phase_invariant():
    s = FockState.from_amplitudes([Mode(0)], {(0,): 1, (1,): 1j})
    assert math.isclose(fidelity(s, s.scaled(np.exp(0.3j) * 2)), 1.0)
    with pytest.raises(ValueError):
        fidelity(s, s.scaled(0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_count_distribution_sums_to_norm(seed, modes, cutoff):
    rng = np.random.default_rng(seed)
    s = FockState.from_dense([Mode(k) for k in range(modes)], crandn(rng, *(cutoff + 1,) * modes))
    for k in range(modes):
        dist = count_distribution(s, [Mode(k)])
        assert math.isclose(sum(dist.values()), s.norm2(), rel_tol=1e-12)
        total = sum(project_counts(s, [Mode(k)], n).norm2() for n in dist)
        assert math.isclose(total, s.norm2(), rel_tol=1e-12)


def test_reorder_and_dense_roundtrip():
    rng = np.random.default_rng(2)
    t = crandn(rng, 2, 3)
    s = FockState.from_dense([Mode(0), Mode(1)], t)
    r = s.reorder(ModeRegistry([Mode(1), Mode(0)]))
    np.testing.assert_allclose(r.to_dense(2)[:3, :2], t.T, atol=1e-14)
