import numpy as np
import pytest
from hypothesis import given, settings, strategies as hst

from causal_lab import operators as op
from oracles import bloch, bloch_overlap, loop_partial_trace

seeds = hst.integers(min_value=0, max_value=2**32 - 1)


def test_kron_basics():
    assert np.allclose(op.kron(np.eye(2), np.eye(2)), np.eye(4))
    p = op.kron(op.basis_projector(0), op.basis_projector(1))
    assert np.allclose(p, np.diag([0, 1, 0, 0]))


@given(seeds)
def test_kron_trace_and_associativity(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(3))
    assert abs(np.trace(op.kron(a, b)) - np.trace(a) * np.trace(b)) < 1e-12
    assert np.max(np.abs(op.kron(op.kron(a, b), c) - op.kron(a, op.kron(b, c)))) < 1e-14


def test_partial_trace_examples():
    ra, rb = op.random_density(2, 1), op.random_density(3, 2)
    assert np.allclose(op.partial_trace(np.kron(ra, rb), (2, 3), [0]), ra)
    assert np.allclose(op.partial_trace(op.bell_state(), (2, 2), [1]), np.eye(2) / 2)


def test_partial_trace_matches_loop_oracle():
    rho = op.random_density(8, 11)
    dims = (2, 2, 2)
    assert np.allclose(op.partial_trace(rho, dims, [0, 2]), loop_partial_trace(rho, dims, [0, 2]), atol=1e-14)
    rho = op.random_density(12, 3)
    dims = (3, 2, 2)
    for keep in ([0], [1], [2], [0, 1], [1, 2]):
        assert np.allclose(op.partial_trace(rho, dims, keep), loop_partial_trace(rho, dims, keep), atol=1e-14)


def test_partial_trace_rejects_bad_dims():
    with pytest.raises(op.DimensionError):
        op.partial_trace(np.eye(4), (2, 3), [0])


@given(seeds)
def test_partial_trace_full_is_trace(seed):
    rho = op.random_density(8, seed)
    full = op.partial_trace(rho, (2, 2, 2), [])
    assert abs(complex(np.asarray(full).ravel()[0]) - np.trace(rho)) < 1e-12


@given(seeds)
def test_partial_trace_product(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.allclose(op.partial_trace(np.kron(a, b), (2, 3), [0]), a * np.trace(b), atol=1e-12)


def test_reorder_examples():
    a, b = op.random_density(2, 5), op.random_density(3, 6)
    assert np.allclose(op.reorder_subsystems(np.kron(a, b), (2, 3), [0, 1]), np.kron(a, b))
    assert np.allclose(op.reorder_subsystems(np.kron(a, b), (2, 3), [1, 0]), np.kron(b, a))


@given(seeds, hst.permutations([0, 1, 2, 3]))
def test_reorder_round_trip_and_trace(seed, perm):
    rng = np.random.default_rng(seed)
    dims = (2, 2, 2, 2)
    w = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    m = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    back = op.reorder_subsystems(op.reorder_subsystems(w, dims, perm), dims, op.inverse_permutation(perm))
    assert np.max(np.abs(back - w)) < 1e-14
    lhs = np.trace(op.reorder_subsystems(w, dims, perm) @ op.reorder_subsystems(m, dims, perm))
    assert abs(lhs - np.trace(w @ m)) < 1e-9


def test_bloch_states():
    assert np.allclose(op.bloch_pure_state(0, 0), op.basis_projector(0))
    assert np.allclose(op.bloch_pure_state(180, 0), op.basis_projector(1))
    p1, p2 = op.bloch_pure_state(45, 0), op.bloch_pure_state(-135, 0)
    assert np.allclose(p1 + p2, np.eye(2))
    assert np.allclose(p1 @ p2, 0, atol=1e-15)


@given(hst.floats(-360, 360), hst.floats(-360, 360), hst.floats(-360, 360), hst.floats(-360, 360))
def test_bloch_overlap_formula(t1, p1, t2, p2):
    a, b = op.bloch_pure_state(t1, p1), op.bloch_pure_state(t2, p2)
    assert abs(np.trace(a @ b).real - bloch_overlap(bloch(t1, p1), bloch(t2, p2))) < 1e-12
    assert np.allclose(op.bloch_vector(t1, p1), bloch(t1, p1))


def test_hermitian_basis():
    b2 = op.hermitian_basis(2)
    assert len(b2) == 4
    assert np.linalg.matrix_rank(op.hs_gram(b2)) == 4
    b3 = op.hermitian_basis(3)
    assert len(b3) == 9
    assert abs(np.linalg.det(op.hs_gram(b3))) > 1e-6
    for m in b3:
        assert op.is_hermitian(m)


@given(seeds)
def test_hermitian_basis_reconstructs(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    a = x + x.conj().T
    basis = op.hermitian_basis(2)
    g = op.hs_gram(basis)
    coeffs = np.linalg.solve(g, [np.trace(b @ a).real for b in basis])
    rebuilt = sum(c * b for c, b in zip(coeffs, basis))
    assert np.max(np.abs(rebuilt - a)) < 1e-12


@given(seeds, hst.integers(1, 5))
def test_haar_unitary(seed, d):
    u = op.haar_unitary(d, seed)
    assert np.max(np.abs(u.conj().T @ u - np.eye(d))) <= 1e-10
    assert np.array_equal(u, op.haar_unitary(d, seed))


def test_haar_moment():
    vals = [abs(op.haar_unitary(2, s)[0, 0]) ** 2 for s in range(10_000)]
    assert abs(np.mean(vals) - 0.5) < 0.02


@given(seeds, hst.integers(2, 4))
def test_random_effect_and_density(seed, d):
    m = op.random_effect(d, seed)
    ev = np.linalg.eigvalsh(m)
    assert ev.min() >= -1e-12 and ev.max() <= 1 + 1e-12
    rho = op.random_density(d, seed)
    assert abs(np.trace(rho) - 1) < 1e-12
    assert np.linalg.eigvalsh(rho).min() >= -1e-12
    assert np.array_equal(rho, op.random_density(d, seed))


def test_random_effect_has_no_boundary_atoms():
    hits = 0
    for s in range(1000):
        ev = np.linalg.eigvalsh(op.random_effect(2, s))
        hits += int(np.any(ev == 0.0) or np.any(ev == 1.0))
    assert hits == 0


def test_entangled_state_schmidt_bound():
    for s in range(20):
        p = op.random_entangled_pure_state((2, 2), s)
        assert abs(np.trace(p) - 1) < 1e-12
        assert np.allclose(p @ p, p, atol=1e-12)
        red = op.partial_trace(p, (2, 2), [0])
        assert np.linalg.eigvalsh(red).min() >= 0.1 ** 2 - 1e-12


def test_psd_tolerance():
    assert op.is_density(np.diag([1 + 5e-11, -5e-11]))
    assert not op.is_density(np.diag([1.001, -0.001]))
