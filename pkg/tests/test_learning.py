"""Heisenberg-picture learning of hidden shallow circuits."""

import numpy as np
import pytest

from quditcirc import (
    Circuit,
    ConfigError,
    LocalOperator,
    QuditRegister,
    TomographySettings,
    assemble_double_circuit,
    batch_learn,
    circuit_unitary,
    conjugate_through_gates,
    double_circuit_from_truth,
    generalized_pauli,
    haar_unitary,
    learn_site_images,
    learning_groups,
    make_oracle,
    operator_to_global,
    random_brickwork,
    verify_double,
)
from quditcirc.learning import SAMPLED_UNITARY_TOL


def _hidden(n=4, p=2, depth=2, seed=0):
    reg = QuditRegister(n, p)
    return random_brickwork(reg, depth, np.random.default_rng(seed))


def test_learning_groups_cover_disjointly():
    groups = learning_groups(8, 1)
    assert sorted(s for g in groups for s in g) == list(range(8))
    for g in groups:
        for a in g:
            for b in g:
                if a != b:
                    assert abs(a - b) > 2  # balls of radius 1 disjoint


def test_exact_images_match_conjugation():
    # oracle-learned images vs direct Heisenberg conjugation
    hidden = _hidden()
    oracle = make_oracle(hidden)
    settings = TomographySettings(mode="exact")
    gates = list(hidden.gates())
    for site in (0, 2):
        img = learn_site_images(make_oracle(hidden), site, settings)
        for which, (a, b) in (("X", (1, 0)), ("Z", (0, 1))):
            want = conjugate_through_gates(
                generalized_pauli(2, a, b, site), gates, 1e-12
            )
            got = img.imageX if which == "X" else img.imageZ
            union = sorted(set(got.support) | set(want.support))
            g = got.tensor_with_identity(union).sorted()
            w = want.tensor_with_identity(union).sorted()
            assert np.max(np.abs(g.matrix - w.matrix)) < 1e-10


def test_exact_images_qutrit():
    hidden = _hidden(n=4, p=3, depth=1, seed=3)
    settings = TomographySettings(mode="exact")
    img = learn_site_images(make_oracle(hidden), 1, settings)
    assert img.unitarity_defect() < 1e-8


def test_batch_learn_query_count():
    # [DERIVED] counter audit: exact mode charges one query per (group, prep)
    hidden = _hidden(n=8, p=2, depth=1, seed=1)
    oracle = make_oracle(hidden, spread=1)
    batch_learn(oracle, TomographySettings(mode="exact"))
    groups = learning_groups(8, 1)
    assert oracle.queries == len(groups) * 2  # qubit preps: one per generator

    seq = make_oracle(hidden, spread=1)
    for site in range(8):
        learn_site_images(seq, site, TomographySettings(mode="exact"))
    assert seq.queries == 8 * 2
    assert 2 * oracle.queries <= seq.queries


def test_double_circuit_from_truth_equals_v_tensor_vdag():
    # double-swap identity with exact images: U (x) U^dag from swaps
    for seed in range(3):
        hidden = _hidden(n=3, p=2, depth=2, seed=seed)
        double = double_circuit_from_truth(hidden)
        got = circuit_unitary(double.circuit())
        V = circuit_unitary(hidden)
        VC = np.kron(V.conj().T, V)  # primed half is most significant
        assert np.max(np.abs(got - VC)) < 1e-10


def test_learned_double_circuit_exact():
    hidden = _hidden(n=4, p=2, depth=2, seed=5)
    oracle = make_oracle(hidden)
    images = batch_learn(oracle, TomographySettings(mode="exact"))
    learned = assemble_double_circuit(images, 2)
    assert verify_double(learned, hidden) < 1e-10


def test_sampled_mode_requires_prime():
    reg = QuditRegister(4, 4)
    gate = LocalOperator([0, 1], haar_unitary(16, np.random.default_rng(0)), 4)
    hidden = Circuit(reg, [[gate]])
    with pytest.raises(ConfigError):
        batch_learn(make_oracle(hidden), TomographySettings(mode="sampled", seed=0))


def test_sampled_shots_below_schedule_rejected():
    settings = TomographySettings(mode="sampled", shots=10, seed=0)
    hidden = _hidden(n=4, p=2, depth=1, seed=2)
    with pytest.raises(ConfigError):
        batch_learn(make_oracle(hidden), settings)


def test_sampled_learning_small_distance():
    hidden = _hidden(n=4, p=2, depth=1, seed=7)
    settings = TomographySettings(mode="sampled", epsilon=0.1, delta=0.1, seed=7)
    images = batch_learn(make_oracle(hidden), settings)
    learned = assemble_double_circuit(images, 2, tol=SAMPLED_UNITARY_TOL)
    assert verify_double(learned, hidden) < 0.1


def test_sampled_learning_deterministic():
    hidden = _hidden(n=4, p=2, depth=1, seed=7)
    settings = TomographySettings(mode="sampled", epsilon=0.2, delta=0.2, seed=9)
    img1 = batch_learn(make_oracle(hidden), settings)
    img2 = batch_learn(make_oracle(hidden), settings)
    for a, b in zip(img1, img2):
        assert np.array_equal(a.imageX.matrix, b.imageX.matrix)
        assert np.array_equal(a.imageZ.matrix, b.imageZ.matrix)


def test_hoeffding_schedule_scaling():
    s = TomographySettings(mode="sampled", epsilon=0.1, delta=0.1)
    n, p = 6, 2
    assert s.schedule_shots(n, p, 3) > s.schedule_shots(n, p, 2)
    # halving epsilon quadruples the per-observable budget up to log factors
    tight = TomographySettings(mode="sampled", epsilon=0.05, delta=0.1)
    assert tight.schedule_shots(n, p, 2) > 3.9 * s.schedule_shots(n, p, 2)
