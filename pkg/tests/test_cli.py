"""Serialization round-trips and the command-line harness."""

import json
import os

import numpy as np
import pytest

from quditcirc import (
    QuditRegister,
    circuit_from_json,
    circuit_to_json,
    qca_from_json,
    qca_to_json,
    qca_equal,
    random_brickwork,
    shift_qca,
    ti_brickwork,
)
from quditcirc.cli import main
from quditcirc.errors import ConfigError


def test_circuit_json_roundtrip_byte_stable():
    reg = QuditRegister(6, 2)
    circ = random_brickwork(reg, 2, np.random.default_rng(0))
    text = circuit_to_json(circ)
    again = circuit_to_json(circuit_from_json(text))
    assert text == again
    parsed = circuit_from_json(text)
    assert parsed.depth == 2 and parsed.register.n == 6
    for g1, g2 in zip(circ.gates(), parsed.gates()):
        assert g1.support == g2.support
        assert np.array_equal(g1.matrix, g2.matrix)


def test_qca_json_roundtrip_byte_stable():
    q = shift_qca(6, 3, 1)
    text = qca_to_json(q)
    back = qca_from_json(text)
    assert qca_to_json(back) == text
    assert qca_equal(back, q, 0.0)


def test_malformed_json_raises_config_error():
    with pytest.raises(ConfigError):
        circuit_from_json("{not json")
    with pytest.raises(ConfigError):
        circuit_from_json('{"n": 2, "p": 2}')  # missing layers
    with pytest.raises(ConfigError):
        qca_from_json('{"n": 2, "p": 2, "r": 0, "images": []}')  # missing sites


def _run(args):
    return main([str(a) for a in args])


def test_cli_distinguish_analytic(tmp_path, capsys):
    out = tmp_path / "run"
    assert _run(["distinguish", "--mode", "analytic", "--out", out]) == 0
    record = json.loads((out / "result.json").read_text())
    assert abs(record["summary"]["shallow_mean"] - 1.5) < 1e-9
    assert abs(record["summary"]["global_mean"] - 0.75) < 1e-9
    assert record["config"]["n"] == 12  # defaults materialized
    assert "version" in record and "wall_clock_s" in record


def test_cli_distinguish_deterministic_csv(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert _run(["distinguish", "--seed", 7, "--reps", 12, "--out", out]) == 0
    assert (a / "samples.csv").read_bytes() == (b / "samples.csv").read_bytes()
    header = (a / "samples.csv").read_text().splitlines()[0]
    assert header == "repetition,seed,qA"


def test_cli_distinguish_global_oracle(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"oracle": "global"}))
    out = tmp_path / "g"
    assert _run(["distinguish", "--config", config, "--seed", 3, "--reps", 40,
                 "--out", out]) == 0
    record = json.loads((out / "result.json").read_text())
    assert record["summary"]["decision"] == "global"


def test_cli_unknown_config_key_exit_2(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"nn": 12}))
    assert _run(["distinguish", "--config", config, "--out", tmp_path / "x"]) == 2


def test_cli_learn_exact(tmp_path):
    out = tmp_path / "learn"
    assert _run(["learn", "--seed", 1, "--out", out]) == 0
    record = json.loads((out / "result.json").read_text())
    assert record["summary"]["distance"] < 1e-8
    assert record["summary"]["sequential_queries"] >= record["summary"]["batch_queries"]
    assert (out / "circuit.json").exists()


def test_cli_learn_bad_mode_exit_2(tmp_path):
    assert _run(["learn", "--mode", "analytic", "--out", tmp_path / "x"]) == 2


def test_cli_qca_index_shift(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"shift": {"n": 8, "p": 2, "e": 1}}))
    out = tmp_path / "idx"
    assert _run(["qca", "index", "--config", config, "--out", out]) == 0
    record = json.loads((out / "result.json").read_text())
    assert record["summary"]["index"] == "2"


def test_cli_qca_compile_and_reload(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"n": 5, "p": 2, "shifts": [{"e": 1}]}))
    out = tmp_path / "comp"
    assert _run(["qca", "compile", "--config", config, "--out", out]) == 0
    record = json.loads((out / "result.json").read_text())
    assert record["summary"]["gate_count"] == 4
    compiled = circuit_from_json((out / "circuit.json").read_text(), "periodic")
    from quditcirc import qca_from_circuit

    assert qca_equal(qca_from_circuit(compiled), shift_qca(5, 2, 1), 1e-10)


def test_cli_qca_verify_corrupted_table(tmp_path):
    q = shift_qca(6, 2, 1)
    obj = json.loads(qca_to_json(q))
    obj["images"][2]["imageX"]["matrix"] = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
    table = tmp_path / "bad.json"
    table.write_text(json.dumps(obj))
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"table": str(table)}))
    out = tmp_path / "verify"
    assert _run(["qca", "verify", "--config", config, "--out", out]) == 0
    record = json.loads((out / "result.json").read_text())
    assert not record["summary"]["passed"]
    assert record["summary"]["failures"]


def test_cli_qca_decompose(tmp_path):
    reg = QuditRegister(12, 2, "periodic")
    circ = ti_brickwork(reg, 1, np.random.default_rng(4))
    path = tmp_path / "circ.json"
    path.write_text(circuit_to_json(circ))
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"circuit": str(path), "tight": True}))
    out = tmp_path / "dec"
    assert _run(["qca", "decompose", "--config", config, "--out", out]) == 0
    record = json.loads((out / "result.json").read_text())
    assert record["summary"]["mu1_blocks"] and record["summary"]["mu2_blocks"]


def test_cli_missing_config_file_exit_2(tmp_path):
    assert _run(["qca", "index", "--config", tmp_path / "nope.json",
                 "--out", tmp_path / "x"]) == 2
