"""Acceptance gate: twelve end-to-end criteria with stated tolerances.

Each test prints one pass/fail line directly to the terminal (bypassing
capture) and asserts the same condition, so the printed summary always
matches the pytest verdict.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from quditcirc import (
    CompileSpec,
    ProtocolConfig,
    QuditRegister,
    StateVector,
    TensorFactorization,
    TomographySettings,
    analytic_average,
    apply_circuit,
    assemble_double_circuit,
    batch_learn,
    beta_subalgebra_qca,
    circuit_unitary,
    compile_shift,
    compose_qca,
    default_partition,
    distinguish,
    double_circuit_from_truth,
    expectation,
    gnvw_index,
    hermitian_split,
    learn_site_images,
    learning_groups,
    make_global_sampler,
    make_oracle,
    make_shallow_sampler,
    number_charge,
    operator_to_densities,
    pump_subalgebra,
    qca_equal,
    qca_from_circuit,
    random_brickwork,
    shallow_symmetric_circuit,
    shift_qca,
    swap_operator,
    ti_brickwork,
    two_layer_decompose,
    verify_double,
    weyl_matrix,
)
from quditcirc.learning import SAMPLED_UNITARY_TOL
from quditcirc.types import LocalOperator


def _report(capsys, num, name, ok, detail):
    line = f"ACCEPTANCE {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    with capsys.disabled():
        print(line)
    assert ok, line


def _protocol_config(**kw):
    reg = QuditRegister(12, 2)
    return ProtocolConfig(reg, default_partition(12), 3, **kw)


def test_01_protocol_analytic(capsys):
    t0 = time.monotonic()
    config = _protocol_config()
    shallow = analytic_average("shallow", config)
    glob = analytic_average("global", config)
    dt = time.monotonic() - t0
    ok = abs(shallow - 1.5) < 1e-9 and abs(glob - 0.75) < 1e-9 and dt < 10
    _report(capsys, 1, "protocol-analytic", ok,
            f"shallow={shallow:.12f} global={glob:.12f} t={dt:.2f}s")


def test_02_protocol_monte_carlo(capsys):
    t0 = time.monotonic()
    config = _protocol_config(seed=100)
    mc_s = distinguish(make_shallow_sampler(config, 1), config, reps=2000)
    mc_g = distinguish(make_global_sampler(config), config, reps=2000)
    mc_ok = (abs(mc_s.mean - 1.5) <= 3 * mc_s.stderr
             and abs(mc_g.mean - 0.75) <= 3 * mc_g.stderr)
    correct = 0
    for trial in range(100):
        config_t = _protocol_config(seed=1000 + trial, delta=0.01)
        if trial % 2 == 0:
            result = distinguish(make_shallow_sampler(config_t, 1), config_t)
            correct += result.decision == "shallow"
        else:
            result = distinguish(make_global_sampler(config_t), config_t)
            correct += result.decision == "global"
    dt = time.monotonic() - t0
    ok = mc_ok and correct >= 99 and dt < 300
    _report(capsys, 2, "protocol-monte-carlo", ok,
            f"means={mc_s.mean:.4f}/{mc_g.mean:.4f} "
            f"SE={mc_s.stderr:.4f}/{mc_g.stderr:.4f} "
            f"correct={correct}/100 t={dt:.1f}s")


def test_03_charge_conservation(capsys):
    reg = QuditRegister(10, 2)
    charge = number_charge(2)
    Q = charge.region_operator(list(range(10)))
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        circ = shallow_symmetric_circuit(reg, int(rng.integers(1, 4)), charge, rng)
        state = StateVector.computational(reg, rng.integers(0, 2, size=10))
        drift = abs(expectation(apply_circuit(state, circ), Q)
                    - expectation(state, Q))
        worst = max(worst, drift)
    ok = worst < 1e-9
    _report(capsys, 3, "charge-conservation", ok, f"max drift={worst:.3e} over 100 circuits")


def test_04_swap_pauli_identity(capsys):
    worst = 0.0
    for p in (2, 3, 5):
        acc = np.zeros((p * p, p * p), dtype=complex)
        for a in range(p):
            for b in range(p):
                P = weyl_matrix(p, a, b)
                acc += np.kron(P, P.conj().T)
        worst = max(worst, np.abs(acc / p - swap_operator(p).matrix).max())
    ok = worst < 1e-12
    _report(capsys, 4, "swap-pauli", ok, f"max entrywise error={worst:.3e}, p in (2,3,5)")


def test_05_density_decompositions(capsys):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        H = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        H = H + H.conj().T
        alpha, rho_p, beta, rho_m = hermitian_split(LocalOperator([0, 1], H, 2))
        worst = max(worst, np.abs(alpha * rho_p.matrix - beta * rho_m.matrix - H).max())
    for _ in range(200):
        O = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        acc = np.zeros((4, 4), dtype=complex)
        for w, rho in operator_to_densities(LocalOperator([0, 1], O, 2)):
            acc += w * rho.matrix
        worst = max(worst, np.abs(acc - O).max())
    ok = worst < 1e-10
    _report(capsys, 5, "density-decompositions", ok,
            f"max reconstruction error={worst:.3e} over 200+200 operators")


def test_06_double_circuit_self_test(capsys):
    rng = np.random.default_rng(6)
    worst = 0.0
    count = 0
    for n in (2, 3, 4):
        trials = 7 if n < 4 else 6
        for _ in range(trials):
            reg = QuditRegister(n, 2)
            hidden = random_brickwork(reg, 2, rng)
            double = double_circuit_from_truth(hidden)
            got = circuit_unitary(double.circuit())
            V = circuit_unitary(hidden)
            want = np.kron(V.conj().T, V)
            worst = max(worst, np.linalg.norm(got - want, 2))
            count += 1
    ok = worst < 1e-10 and count == 20
    _report(capsys, 6, "double-circuit-self-test", ok,
            f"max opnorm error={worst:.3e} over {count} unitaries")


def test_07_learning_exact(capsys):
    t0 = time.monotonic()
    reg = QuditRegister(6, 2)
    hidden = random_brickwork(reg, 2, np.random.default_rng(17))
    images = batch_learn(make_oracle(hidden), TomographySettings(mode="exact"))
    learned = assemble_double_circuit(images, 2)
    distance = verify_double(learned, hidden)

    reg8 = QuditRegister(8, 2)
    hidden8 = random_brickwork(reg8, 1, np.random.default_rng(18))
    batch_oracle = make_oracle(hidden8, spread=1)
    batch_learn(batch_oracle, TomographySettings(mode="exact"))
    seq_oracle = make_oracle(hidden8, spread=1)
    for site in range(8):
        learn_site_images(seq_oracle, site, TomographySettings(mode="exact"))
    dt = time.monotonic() - t0
    ok = (distance < 1e-8
          and 2 * batch_oracle.queries <= seq_oracle.queries
          and dt < 120)
    _report(capsys, 7, "learning-exact", ok,
            f"distance={distance:.3e} queries batch/seq="
            f"{batch_oracle.queries}/{seq_oracle.queries} t={dt:.1f}s")


def test_08_learning_sampled(capsys):
    t0 = time.monotonic()
    good = 0
    distances = []
    for trial in range(50):
        reg = QuditRegister(4, 2)
        hidden = random_brickwork(reg, 1, np.random.default_rng(300 + trial))
        settings = TomographySettings(
            mode="sampled", epsilon=0.1, delta=0.1, seed=300 + trial
        )
        images = batch_learn(make_oracle(hidden), settings)
        learned = assemble_double_circuit(images, 2, tol=SAMPLED_UNITARY_TOL)
        d = verify_double(learned, hidden, seed=trial)
        distances.append(d)
        good += d < 0.1
    dt = time.monotonic() - t0
    ok = good >= 45 and dt < 900
    _report(capsys, 8, "learning-sampled", ok,
            f"distance<0.1 in {good}/50 trials, median={np.median(distances):.4f} "
            f"t={dt:.1f}s")


def test_09_gnvw_index(capsys):
    checks = []
    for p in (2, 3):
        for e in (-2, -1, 0, 1, 2):
            checks.append(gnvw_index(shift_qca(12, p, e)) == Fraction(p) ** e)
    for seed in range(20):
        reg = QuditRegister(8, 2, "periodic")
        circ = random_brickwork(reg, 1, np.random.default_rng(400 + seed))
        checks.append(gnvw_index(qca_from_circuit(circ)) == 1)
    reg = QuditRegister(12, 2, "periodic")
    members = [
        shift_qca(12, 2, 1),
        shift_qca(12, 2, -1),
        qca_from_circuit(random_brickwork(reg, 1, np.random.default_rng(99))),
    ]
    indices = [gnvw_index(m) for m in members]
    for i, a in enumerate(members):
        for j, b in enumerate(members):
            checks.append(gnvw_index(compose_qca(a, b)) == indices[i] * indices[j])
    assert all(isinstance(gnvw_index(m), Fraction) for m in members)
    ok = all(checks)
    _report(capsys, 9, "gnvw-index", ok,
            f"{sum(checks)}/{len(checks)} exact rational checks")


def test_10_staircase_compilation(capsys):
    count_ok = True
    table_ok = True
    for n in range(5, 33):
        for e in (1, 2):
            stair = compile_shift(n, 2, e)
            count_ok &= stair.gate_count == (n - 1) * e
            table_ok &= qca_equal(stair.as_qca(), shift_qca(n, 2, e), 1e-10)
    pump_ok = True
    for pa, pb in ((2, 3), (2, 2)):
        factor = TensorFactorization(pa, pb)
        for n in range(4, 9):
            stair = pump_subalgebra(n, factor)
            pump_ok &= qca_equal(
                stair.as_qca(), beta_subalgebra_qca(n, factor, 1), 1e-10
            )
    ok = count_ok and table_ok and pump_ok
    _report(capsys, 10, "staircase-compilation", ok,
            f"counts={count_ok} tables={table_ok} pumps(p=6,p=4)={pump_ok}")


def test_11_two_layer_factorization(capsys):
    details = []
    ok = True
    for depth, sizes in ((1, (12, 18, 24)), (2, (24, 36, 48))):
        counts = []
        for n in sizes:
            reg = QuditRegister(n, 2, "periodic")
            circ = ti_brickwork(reg, depth, np.random.default_rng(50 + depth))
            # two_layer_decompose raises unless mu1 o mu2 = zeta within 1e-9
            blocks1, blocks2 = two_layer_decompose(circ, n, tight=True)
            for blocks in (blocks1, blocks2):
                seen = set()
                for b in blocks:
                    ok &= not (set(b.support) & seen)
                    seen |= set(b.support)
            counts.append(len(blocks1) + len(blocks2))
        a = (counts[2] - counts[0]) / (sizes[2] - sizes[0])
        b = counts[0] - a * sizes[0]
        ok &= counts[1] == a * sizes[1] + b
        details.append(f"r'={depth}: counts={counts} fit={a:.4f}n{b:+.1f}")
    _report(capsys, 11, "two-layer-factorization", ok, "; ".join(details))


def test_12_determinism(capsys):
    config = _protocol_config(seed=42)
    r1 = distinguish(make_shallow_sampler(config, 1), config, reps=15)
    r2 = distinguish(make_shallow_sampler(config, 1), config, reps=15)
    proto_ok = r1.samples == r2.samples

    reg = QuditRegister(4, 2)
    hidden = random_brickwork(reg, 1, np.random.default_rng(8))
    settings = TomographySettings(mode="sampled", epsilon=0.2, delta=0.2, seed=8)
    img1 = batch_learn(make_oracle(hidden), settings)
    img2 = batch_learn(make_oracle(hidden), settings)
    learn_ok = all(
        np.array_equal(a.imageX.matrix, b.imageX.matrix)
        and np.array_equal(a.imageZ.matrix, b.imageZ.matrix)
        for a, b in zip(img1, img2)
    )

    c1 = random_brickwork(reg, 2, np.random.default_rng(9))
    c2 = random_brickwork(reg, 2, np.random.default_rng(9))
    circ_ok = all(
        np.array_equal(g1.matrix, g2.matrix) for g1, g2 in zip(c1.gates(), c2.gates())
    )
    ok = proto_ok and learn_ok and circ_ok
    _report(capsys, 12, "determinism", ok,
            f"protocol={proto_ok} sampled-learning={learn_ok} circuits={circ_ok}")
