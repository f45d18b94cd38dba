"""Charge-spreading protocol: symmetric ensembles and the Q_A readout."""

import numpy as np
import pytest

from quditcirc import (
    ConfigError,
    ProtocolConfig,
    QuditRegister,
    StateVector,
    analytic_average,
    apply_circuit,
    comb_conserved_charge,
    comb_symmetric_gate,
    default_partition,
    distinguish,
    expectation,
    make_global_sampler,
    make_shallow_sampler,
    number_charge,
    prepare_charged_state,
    required_repetitions,
    run_protocol_once,
    shallow_symmetric_circuit,
    symmetric_haar,
)
from quditcirc.types import Circuit, LocalOperator


def _config(n=12, p=2, q=3, **kw):
    reg = QuditRegister(n, p)
    return ProtocolConfig(reg, default_partition(n), q, **kw)


def test_default_partition_sizes():
    part = default_partition(12)
    assert len(part.A) == 3 and len(part.B) == 3 and len(part.C) == 6


def test_symmetric_haar_commutes_with_charge():
    charge = number_charge(2)
    rng = np.random.default_rng(0)
    for _ in range(5):
        g = symmetric_haar([0, 1, 2], charge, rng)
        Q = charge.region_operator([0, 1, 2]).matrix
        assert np.max(np.abs(g.matrix @ Q - Q @ g.matrix)) < 1e-10
        assert g.is_unitary(1e-10)


def test_charge_conservation_under_shallow_circuits():
    # [DERIVED] block-diagonal gates preserve <Q> exactly
    reg = QuditRegister(10, 2)
    charge = number_charge(2)
    Q_all = charge.region_operator(list(range(10)))
    rng = np.random.default_rng(42)
    for _ in range(25):
        circ = shallow_symmetric_circuit(reg, int(rng.integers(1, 4)), charge, rng)
        digits = rng.integers(0, 2, size=10)
        state = StateVector.computational(reg, digits)
        before = expectation(state, Q_all)
        after = expectation(apply_circuit(state, circ), Q_all)
        assert abs(after - before) < 1e-9


def test_prepare_charged_state_charge():
    config = _config()
    state = prepare_charged_state(config)
    q_a = config.charge.region_operator(config.partition.A)
    assert abs(expectation(state, q_a) - config.q) < 1e-12
    with pytest.raises(ConfigError):
        _config(q=4)  # |A|=3 qubits cannot carry charge 4


def test_analytic_means_match_closed_forms():
    # closed-form targets: shallow mean q/2 on AB, global mean |A| q / n
    config = _config()
    assert abs(analytic_average("shallow", config) - 1.5) < 1e-9
    assert abs(analytic_average("global", config) - 0.75) < 1e-9
    config3 = _config(n=8, p=3, q=2)
    assert abs(analytic_average("shallow", config3) - 1.0) < 1e-9
    assert abs(analytic_average("global", config3) - 0.5) < 1e-9


def test_exact_mode_single_run_bounds():
    config = _config(seed=5)
    rng = np.random.default_rng(1)
    sampler = make_shallow_sampler(config, 1)
    qa = run_protocol_once(config, sampler(rng), rng)
    assert -1e-9 <= qa <= config.q + 1e-9


def test_shallow_sampler_depth_guard():
    config = _config()
    with pytest.raises(ConfigError):
        make_shallow_sampler(config, 2)  # 2*depth exceeds |B| = 3


def test_required_repetitions_formula():
    config = _config(delta=0.01)
    # q0 = |A| = 3 = q, so 32 * ln(200) rounded up
    assert required_repetitions(config) == int(np.ceil(32 * np.log(2 / 0.01)))


def test_distinguish_labels_both_ensembles():
    config = _config(seed=11)
    shallow = distinguish(make_shallow_sampler(config, 1), config, reps=40)
    glob = distinguish(make_global_sampler(config), config, reps=40)
    assert shallow.decision == "shallow"
    assert glob.decision == "global"
    assert shallow.mean > glob.mean


def test_distinguish_deterministic():
    config = _config(seed=11)
    r1 = distinguish(make_shallow_sampler(config, 1), config, reps=10)
    r2 = distinguish(make_shallow_sampler(config, 1), config, reps=10)
    assert r1.samples == r2.samples


def test_shots_mode_unbiased():
    config = _config(seed=2, mode="shots")
    result = distinguish(make_shallow_sampler(config, 1), config, reps=200)
    # binomial-style outcome noise, mean still near q/2
    assert abs(result.mean - 1.5) < 4 * max(result.stderr, 1e-3)


def test_comb_charge_conserved_by_comb_gates():
    reg = QuditRegister(8, 2, "comb")
    comb = comb_conserved_charge(reg)
    rng = np.random.default_rng(3)
    layer = [comb_symmetric_gate(reg, e, rng) for e in [(0, 1), (2, 3), (4, 5), (6, 7)]]
    layer2 = [comb_symmetric_gate(reg, e, rng) for e in [(0, 2), (4, 6)]]
    circ = Circuit(reg, [layer, layer2])
    amps = rng.standard_normal(reg.dim) + 1j * rng.standard_normal(reg.dim)
    state = StateVector(reg, amps / np.linalg.norm(amps))
    before = comb.total_expectation(state)
    after = comb.total_expectation(apply_circuit(state, circ))
    assert abs(after - before) < 1e-9
