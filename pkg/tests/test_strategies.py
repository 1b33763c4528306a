import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as hst

from causal_lab import strategies as st
from causal_lab.channels import (
    QuantumChannel,
    cnot_then_discard_control,
    constant_channel,
    identity_channel,
    random_channel,
)
from causal_lab.operators import (
    PAULI_I,
    PAULI_Z,
    DimensionError,
    basis_projector,
    bell_state,
    kron,
    random_density,
)
from causal_lab.settings import (
    random_s2_setting,
    table_e1_setting,
)
from causal_lab.theorems import random_quantum_sequential
from oracles import bloch, bloch_overlap, kron_born

ALL = sorted(st.BUILTIN_STRATEGIES)
PLUS = np.full((2, 2), 0.5)


def chois(player):
    return {
        (j, k): st.instrument_choi(player, j, k)
        for j in range(player.n_outcomes)
        for k in range(player.n_preparations)
    }


# --------------------------------------------------------------------------- channels


def test_channel_choi_convention():
    rng = np.random.default_rng(0)
    ch = random_channel(2, 3, 2, 4)
    rho = random_density(2, 1)
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    m = x + x.conj().T
    assert abs(np.trace(ch.choi() @ np.kron(rho, m)) - np.trace(ch(rho) @ m)) < 1e-12
    assert np.linalg.eigvalsh(ch.positive_choi()).min() > -1e-12


def test_channel_rejects_non_tp():
    with pytest.raises(ValueError):
        QuantumChannel((0.5 * np.eye(2),))


def test_constant_and_cnot_channels():
    sigma = random_density(2, 9)
    ch = constant_channel(sigma, 2)
    assert np.allclose(ch(random_density(2, 3)), sigma)
    cnot = cnot_then_discard_control(True)
    # control |1>, target |0> → target flipped
    assert np.allclose(cnot(np.kron(basis_projector(1), basis_projector(0))), basis_projector(1))
    assert np.allclose(cnot(np.kron(basis_projector(0), basis_projector(1))), basis_projector(1))
    other = cnot_then_discard_control(False)
    assert np.allclose(other(np.kron(basis_projector(0), basis_projector(1))), basis_projector(1))


# --------------------------------------------------------------------------- instruments


def test_instrument_choi_examples():
    a = table_e1_setting(1).alice
    assert np.allclose(st.instrument_choi(a, 0, 0), 0.65 * np.kron(basis_projector(0), basis_projector(0)))
    for j in range(2):
        total = sum(st.instrument_choi(a, j, k) for k in range(2))
        mix = sum(a.cond[j, k] * a.preparations[k] for k in range(2))
        assert np.allclose(total, np.kron(a.effects[j], mix))
        assert abs(np.trace(total) - np.trace(a.effects[j])) < 1e-12
    with pytest.raises(IndexError):
        st.instrument_choi(a, 2, 0)


def test_instrument_choi_zero_weight():
    from causal_lab.settings import PlayerSetting

    z0, z1 = basis_projector(0), basis_projector(1)
    p = PlayerSetting((z0, z1), (z0, z1), [[1.0, 0.0], [0.0, 1.0]])
    assert np.allclose(st.instrument_choi(p, 0, 1), 0)


# --------------------------------------------------------------------------- closed forms


def test_si_closed_form():
    w = st.build_process_matrix(st.builtin_strategy("si"))
    assert np.allclose(w.matrix, kron(PLUS, np.eye(2), PLUS, np.eye(2)))
    assert abs(np.trace(w.matrix) - 4) < 1e-12


def test_sn_closed_form():
    w = st.build_process_matrix(st.builtin_strategy("sn12"))
    assert np.allclose(w.matrix, kron(basis_projector(0), identity_channel().choi(), np.eye(2)))


def test_sc_closed_form_separable():
    w = st.build_process_matrix(st.builtin_strategy("sc"))
    z0, z1 = basis_projector(0), basis_projector(1)
    expected = 0.5 * kron(z0, np.eye(2), z0, np.eye(2)) + 0.5 * kron(z1, np.eye(2), z1, np.eye(2))
    assert np.allclose(w.matrix, expected)
    assert np.linalg.eigvalsh(w.matrix).min() > -1e-12
    assert abs(np.trace(w.matrix) - 4) < 1e-12


def test_sqseq_has_no_closed_form():
    with pytest.raises(st.UnsupportedClosedForm):
        st.build_process_matrix(st.builtin_strategy("sq12"))


# --------------------------------------------------------------------------- backends


def test_si_probabilities_bloch_oracle():
    p = st.simulate_distribution(st.builtin_strategy("si"), table_e1_setting(1))
    assert abs(p.marginal([0]).ravel()[0] - 0.5) < 1e-14
    # frozen from (1 + n·m)/2 with n = x̂, m = Bloch(45°, 0)
    expected = bloch_overlap(np.array([1.0, 0, 0]), bloch(45, 0))
    assert abs(expected - 0.8535533905932737) < 1e-15
    assert abs(p.marginal([2]).ravel()[0] - 0.8535533905932737) < 1e-14


def test_si_factorizes():
    s = table_e1_setting(2)
    p = st.simulate_distribution(st.builtin_strategy("si"), s).probs
    pa = p.sum(axis=(2, 3))
    pb = p.sum(axis=(0, 1))
    assert np.max(np.abs(p - np.einsum("ab,cd->abcd", pa, pb))) < 1e-14


def test_sn_conditional_bloch_oracle():
    p = st.simulate_distribution(st.builtin_strategy("sn12"), table_e1_setting(1)).probs
    pk1j2 = p.sum(axis=(0, 3))
    cond = pk1j2[0, 0] / pk1j2[0].sum()  # k1 = |0>, j2 = Π(45°, 0)
    assert abs(cond - bloch_overlap(bloch(0, 0), bloch(45, 0))) < 1e-14
    assert abs(cond - 0.8535533905932737) < 1e-14


def test_mixed_inputs_born():
    m = kron(np.eye(2) / 2, np.eye(2), np.eye(2) / 2, np.eye(2))
    w = st.ProcessMatrix(m, (2, 2, 2, 2))
    for seed in range(5):
        s = random_s2_setting(seed=seed)
        p = st.born_distribution(w, s)
        for j in range(2):
            assert abs(p.marginal([0])[j] - np.trace(s.alice.effects[j]).real / 2) < 1e-12


@pytest.mark.parametrize("name", ALL)
@pytest.mark.parametrize("n", range(1, 8))
def test_backend_equivalence(name, n):
    spec = st.builtin_strategy(name)
    s = table_e1_setting(n)
    sim = st.simulate_distribution(spec, s)
    w = st.process_matrix(spec)
    born = st.born_distribution(w, s)
    assert abs(sim.probs.sum() - 1) < 1e-10
    assert abs(born.probs.sum() - 1) < 1e-10
    assert np.max(np.abs(sim.probs - born.probs)) < 1e-10


@pytest.mark.parametrize("name", ["si", "sq", "sn21", "sc12"])
def test_born_matches_kron_oracle(name):
    s = table_e1_setting(3)
    w = st.process_matrix(st.builtin_strategy(name))
    born = st.born_distribution(w, s).probs
    ref = kron_born(w.matrix, chois(s.alice), chois(s.bob))
    for (j1, k1, j2, k2), v in ref.items():
        assert abs(born[j1, k1, j2, k2] - v) < 1e-12


def test_dims_mismatch():
    spec = st.IndividualStrategy(random_density(3, 0), random_density(2, 1))
    with pytest.raises(DimensionError):
        st.simulate_distribution(spec, table_e1_setting(1))


def test_negative_born_probability_rejected():
    m = kron(np.eye(2) / 2, np.eye(2), np.eye(2) / 2, np.eye(2)) - 0.9 * kron(
        basis_projector(0), np.eye(2), basis_projector(0), np.eye(2)
    )
    w = st.ProcessMatrix(m, (2, 2, 2, 2))
    with pytest.raises(st.InvalidProcessMatrix):
        st.born_distribution(w, table_e1_setting(1))


# --------------------------------------------------------------------------- reconstruction


@pytest.mark.parametrize("name", ["si", "sc", "sq", "sn12", "sn21", "sc12", "sc21"])
def test_reconstruction_matches_closed_form(name):
    spec = st.builtin_strategy(name)
    diff = st.reconstruct_process_matrix(spec).matrix - st.build_process_matrix(spec).matrix
    assert np.linalg.norm(diff) <= 1e-9


def test_reconstruction_reproduces_random_settings():
    spec = st.builtin_strategy("sq12")
    w = st.reconstruct_process_matrix(spec)
    for seed in range(20):
        s = random_s2_setting(seed=seed)
        diff = st.born_distribution(w, s).probs - st.simulate_distribution(spec, s).probs
        assert np.max(np.abs(diff)) <= 1e-9


def test_reconstruction_non_qubit():
    spec = st.NoMemorySequential(random_density(2, 0), random_channel(3, 2, 2, 1), st.FORWARD, d_o_last=2)
    w = st.reconstruct_process_matrix(spec)
    assert np.linalg.norm(w.matrix - st.build_process_matrix(spec).matrix) < 1e-9


# --------------------------------------------------------------------------- validity


@pytest.mark.parametrize("name", ALL)
def test_builtins_physical(name):
    w = st.process_matrix(st.builtin_strategy(name))
    rep = st.validate_process_matrix(w)
    assert rep.physical, rep.failures
    assert rep.trace_residual <= 1e-8
    assert max(rep.residual_eq1, rep.residual_eq2, rep.residual_eq3) <= 1e-8


def test_trace_failure_flagged():
    w = st.build_process_matrix(st.builtin_strategy("si"))
    bad = st.ProcessMatrix(w.matrix * 3.5 / 4, w.dims)
    assert "trace" in st.validate_process_matrix(bad).failures


def test_bidirectional_signalling_flagged():
    z = PAULI_Z
    m = (
        kron(PAULI_I, PAULI_I, PAULI_I, PAULI_I)
        + 0.3 * kron(PAULI_I, z, z, PAULI_I)
        + 0.3 * kron(z, PAULI_I, PAULI_I, z)
        + 0.3 * kron(z, z, z, z)
    ) / 4
    rep = st.validate_process_matrix(st.ProcessMatrix(m, (2, 2, 2, 2)))
    assert rep.psd
    assert abs(rep.trace - 4) < 1e-12
    assert rep.residual_eq3 > 1e-3
    assert not rep.physical


# --------------------------------------------------------------------------- structure


def test_structural_si():
    assert st.structural_class_check(st.process_matrix(st.builtin_strategy("si")), st.SI) <= 1e-10
    # ‖Φ+ − I/4‖·‖I_O1 ⊗ I_O2‖ = sqrt(1 − 1/2 + 1/4)·2
    oracle = math.sqrt(1 - 0.5 + 0.25) * 2
    res = st.structural_class_check(st.process_matrix(st.builtin_strategy("sq")), st.SI)
    assert abs(res - 1.7320508075688772) < 1e-12
    assert abs(res - oracle) < 1e-12
    assert res >= 0.4


def test_structural_sqseq():
    w = st.reconstruct_process_matrix(st.builtin_strategy("sq12"))
    assert st.structural_class_check(w, st.SQ_SEQ, st.FORWARD) <= 1e-9
    assert st.structural_class_check(w, st.SQ) > 1e-3
    w21 = st.reconstruct_process_matrix(st.builtin_strategy("sq21"))
    assert st.structural_class_check(w21, st.SQ_SEQ, st.BACKWARD) <= 1e-9
    assert st.structural_class_check(w21, st.SQ_SEQ, st.FORWARD) > 1e-3


def test_structural_sn():
    w = st.process_matrix(st.builtin_strategy("sn12"))
    assert st.structural_class_check(w, st.SN, st.FORWARD) <= 1e-10
    assert st.structural_class_check(w, st.SN, st.BACKWARD) > 1e-3
    with pytest.raises(ValueError):
        st.structural_class_check(w, st.SC)


# --------------------------------------------------------------------------- invariants


@given(hst.integers(0, 2**32 - 1))
@hsettings(max_examples=25, deadline=None)
def test_si_embeds_as_sn(seed):
    rng = np.random.default_rng(seed)
    spec = st.IndividualStrategy(random_density(2, rng), random_density(2, rng))
    s = random_s2_setting(seed=seed)
    a = st.simulate_distribution(spec, s).probs
    b = st.simulate_distribution(spec.as_sequential(), s).probs
    assert np.max(np.abs(a - b)) <= 1e-12


@given(hst.integers(0, 2**32 - 1))
@hsettings(max_examples=25, deadline=None)
def test_direction_mirroring(seed):
    rng = np.random.default_rng(seed)
    rho, ch = random_density(2, rng), random_channel(2, 2, 2, rng)
    s = random_s2_setting(seed=seed)
    fwd = st.NoMemorySequential(rho, ch, st.FORWARD)
    bwd = st.NoMemorySequential(rho, ch, st.BACKWARD)
    lhs = st.simulate_distribution(bwd, s).probs
    rhs = st.swap_parties(st.simulate_distribution(fwd, s.swapped())).probs
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@given(hst.integers(0, 2**32 - 1))
@hsettings(max_examples=20, deadline=None)
def test_random_sequential_normalized(seed):
    spec = random_quantum_sequential(np.random.SeedSequence(seed))
    p = st.simulate_distribution(spec, random_s2_setting(seed=seed)).probs
    assert abs(p.sum() - 1) <= 1e-10
    assert p.min() >= 0


def test_weights_validated():
    with pytest.raises(ValueError):
        st.ClassicalParallel([(0.6, basis_projector(0), basis_projector(0)), (0.6, PLUS, PLUS)])


def test_class_labels():
    assert st.class_label(st.builtin_strategy("sq12")) == "S_Q,1->2"
    assert st.class_label(st.builtin_strategy("sn21")) == "S_N,2->1"
    assert st.class_label(st.builtin_strategy("sc")) == "S_C"


def test_sqseq_builtin_structure():
    spec = st.builtin_strategy("sq12")
    weights = [b.weight for b in spec.branches]
    assert weights == [0.75, 0.25]
    assert np.allclose(spec.branches[0].rho12, bell_state())
