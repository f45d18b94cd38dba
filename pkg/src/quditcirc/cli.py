"""Command-line harness: distinguish | learn | qca {index,compile,pump,decompose,verify}.

Every run emits result.json (resolved config echo, summary, wall clock,
version tag) into the --out directory, plus samples.csv / circuit.json
where applicable.  Identical config and seed reproduce all payloads
bit-exactly except the wall-clock field.

Exit codes: 0 success, 2 config error, 3 guard violation, 4 internal
consistency failure.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, ConsistencyError, GuardError, QuditError
from .learning import (
    SAMPLED_UNITARY_TOL,
    TomographySettings,
    assemble_double_circuit,
    batch_learn,
    learn_site_images,
    make_oracle,
    verify_double,
)
from .protocol import (
    ProtocolConfig,
    analytic_average,
    default_partition,
    distinguish,
    make_global_sampler,
    make_shallow_sampler,
    required_repetitions,
)
from .qca import (
    CompileSpec,
    TensorFactorization,
    beta_subalgebra_qca,
    compile_qca,
    gnvw_index,
    pump_subalgebra,
    qca_equal,
    qca_from_circuit,
    shift_qca,
    two_layer_decompose,
    verify_qca,
)
from .seeds import child_seed
from .serialize import (
    circuit_from_json,
    circuit_to_json,
    qca_from_json,
    qca_to_json,
)
from .sim import random_brickwork
from .types import Circuit, QuditRegister

_MODE_ALIASES = {"exact": "exact", "sampled": "shots", "analytic": "analytic"}

_DEFAULTS = {
    "distinguish": {
        "n": 12,
        "p": 2,
        "q": 3,
        "delta": 0.01,
        "mode": "exact",
        "seed": 0,
        "depth": 1,
        "oracle": "shallow",
        "reps": None,
    },
    "learn": {
        "n": 6,
        "p": 2,
        "depth": 2,
        "mode": "exact",
        "epsilon": 0.1,
        "delta": 0.1,
        "shots": None,
        "seed": 0,
        "circuit": None,
        "spread": None,
        "compare_sequential": True,
    },
    "qca index": {"table": None, "circuit": None, "shift": None},
    "qca verify": {"table": None, "full_rank": None},
    "qca compile": {
        "n": None,
        "p": None,
        "shifts": [],
        "pump": None,
        "circuit": None,
        "tight": True,
    },
    "qca pump": {"n": None, "p_a": None, "p_b": None},
    "qca decompose": {"circuit": None, "tight": False},
}


def _load_json_file(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def resolve_config(command: str, file_config: dict, overrides: dict) -> dict:
    """Defaults, then config file, then explicit CLI flags."""
    config = dict(_DEFAULTS[command])
    for source in (file_config, overrides):
        for key, value in source.items():
            if key not in config:
                raise ConfigError(f"unknown config key {key!r} for {command!r}")
            config[key] = value
    return config


def _write_record(out_dir: str, command: str, config: dict, summary: dict, t0: float,
                  samples=None, circuit_json=None, extra_files=()):
    record = {
        "command": command,
        "config": config,
        "summary": summary,
        "wall_clock_s": time.monotonic() - t0,
        "version": __version__,
    }
    if samples is not None:
        record["samples"] = [row[2] for row in samples]
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "result.json"), "w") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if samples is not None:
        lines = ["repetition,seed,qA"]
        lines += [f"{k},{seed},{qa!r}" for k, seed, qa in samples]
        with open(os.path.join(out_dir, "samples.csv"), "w") as fh:
            fh.write("\n".join(lines) + "\n")
    if circuit_json is not None:
        with open(os.path.join(out_dir, "circuit.json"), "w") as fh:
            fh.write(circuit_json + "\n")
    for name, text in extra_files:
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text + "\n")
    return record


# ---------------------------------------------------------------------------
# distinguish


def run_distinguish(config: dict, out_dir: str) -> dict:
    t0 = time.monotonic()
    register = QuditRegister(int(config["n"]), int(config["p"]))
    mode = _MODE_ALIASES.get(config["mode"])
    if mode is None:
        raise ConfigError(f"unknown mode {config['mode']!r}")
    pconf = ProtocolConfig(
        register=register,
        partition=default_partition(register.n),
        q=int(config["q"]),
        mode=mode,
        delta=float(config["delta"]),
        seed=int(config["seed"]),
    )
    if mode == "analytic":
        summary = {
            "shallow_mean": analytic_average("shallow", pconf),
            "global_mean": analytic_average("global", pconf),
            "threshold": 3.0 * pconf.q / 8.0,
        }
        return _write_record(out_dir, "distinguish", config, summary, t0)
    if config["oracle"] == "shallow":
        sampler = make_shallow_sampler(pconf, int(config["depth"]))
    elif config["oracle"] == "global":
        sampler = make_global_sampler(pconf)
    else:
        raise ConfigError(f"unknown oracle {config['oracle']!r}")
    reps = config["reps"]
    result = distinguish(sampler, pconf, reps=None if reps is None else int(reps))
    samples = [
        (k, child_seed(pconf.seed, k), qa) for k, qa in enumerate(result.samples)
    ]
    summary = {
        "decision": result.decision,
        "mean": result.mean,
        "stderr": result.stderr,
        "repetitions": result.repetitions,
        "required_repetitions": required_repetitions(pconf),
        "threshold": 3.0 * pconf.q / 8.0,
        "delta": result.delta,
    }
    return _write_record(out_dir, "distinguish", config, summary, t0, samples=samples)


# ---------------------------------------------------------------------------
# learn


def _hidden_circuit(config: dict) -> Circuit:
    if config["circuit"] is not None:
        circuit = circuit_from_json(json.dumps(_load_json_file(config["circuit"])))
        if circuit.register.n != int(config["n"]) or circuit.register.p != int(config["p"]):
            raise ConfigError("hidden circuit does not match configured n, p")
        return circuit
    register = QuditRegister(int(config["n"]), int(config["p"]))
    rng = np.random.default_rng(child_seed(int(config["seed"]), 0))
    return random_brickwork(register, int(config["depth"]), rng)


def run_learn(config: dict, out_dir: str) -> dict:
    t0 = time.monotonic()
    hidden = _hidden_circuit(config)
    n, p = hidden.register.n, hidden.register.p
    mode = config["mode"]
    if mode == "analytic":
        raise ConfigError("learn supports modes exact and sampled only")
    if mode not in ("exact", "sampled"):
        raise ConfigError(f"unknown mode {mode!r}")
    settings = TomographySettings(
        mode=mode,
        shots=config["shots"],
        epsilon=float(config["epsilon"]),
        delta=float(config["delta"]),
        seed=int(config["seed"]),
    )
    oracle = make_oracle(hidden, spread=config["spread"])
    images = batch_learn(oracle, settings)
    batch_queries = oracle.queries
    if mode == "exact":
        learned = assemble_double_circuit(images, p)
    else:
        learned = assemble_double_circuit(images, p, tol=SAMPLED_UNITARY_TOL)
    distance = verify_double(learned, hidden, seed=int(config["seed"]))
    summary = {
        "n": n,
        "p": p,
        "spread": oracle.spread,
        "distance": distance,
        "batch_queries": batch_queries,
        "gate_count": learned.gate_count,
    }
    if config["compare_sequential"]:
        seq_oracle = make_oracle(hidden, spread=config["spread"])
        for site in range(n):
            learn_site_images(seq_oracle, site, settings)
        summary["sequential_queries"] = seq_oracle.queries
        summary["query_ratio"] = seq_oracle.queries / batch_queries
    return _write_record(
        out_dir, "learn", config, summary, t0,
        circuit_json=circuit_to_json(learned.circuit()),
    )


# ---------------------------------------------------------------------------
# qca subcommands


def _qca_input(config: dict):
    given = [k for k in ("table", "circuit", "shift") if config.get(k) is not None]
    if len(given) != 1:
        raise ConfigError("provide exactly one of table, circuit, shift")
    kind = given[0]
    if kind == "table":
        return qca_from_json(json.dumps(_load_json_file(config["table"])))
    if kind == "circuit":
        circuit = circuit_from_json(
            json.dumps(_load_json_file(config["circuit"])), geometry="periodic"
        )
        return qca_from_circuit(circuit)
    spec = config["shift"]
    try:
        return shift_qca(int(spec["n"]), int(spec["p"]), int(spec["e"]))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"shift spec needs n, p, e: {exc}") from exc


def run_qca(subcommand: str, config: dict, out_dir: str) -> dict:
    t0 = time.monotonic()
    command = f"qca {subcommand}"
    if subcommand == "index":
        qca = _qca_input(config)
        index = gnvw_index(qca)
        summary = {
            "index": str(index),
            "numerator": index.numerator,
            "denominator": index.denominator,
        }
        return _write_record(out_dir, command, config, summary, t0)

    if subcommand == "verify":
        if config["table"] is None:
            raise ConfigError("qca verify needs a table path")
        qca = qca_from_json(json.dumps(_load_json_file(config["table"])))
        report = verify_qca(qca, full_rank=config["full_rank"])
        summary = {
            "passed": report.passed,
            "checks": report.checks,
            "failures": report.failures,
        }
        return _write_record(out_dir, command, config, summary, t0)

    if subcommand == "pump":
        try:
            n, p_a, p_b = int(config["n"]), int(config["p_a"]), int(config["p_b"])
        except TypeError as exc:
            raise ConfigError("qca pump needs n, p_a, p_b") from exc
        factor = TensorFactorization(p_a, p_b)
        stair = pump_subalgebra(n, factor)
        target = beta_subalgebra_qca(n, factor, 1)
        if not qca_equal(stair.as_qca(), target, 1e-10):
            raise ConsistencyError("pump staircase deviates from the direct subalgebra shift")
        circuit = Circuit(stair.register, [[g] for g in stair.gates])
        summary = {"gate_count": stair.gate_count, "verified": True}
        return _write_record(
            out_dir, command, config, summary, t0,
            circuit_json=circuit_to_json(circuit),
        )

    if subcommand == "compile":
        if config["n"] is None or config["p"] is None:
            raise ConfigError("qca compile needs n and p")
        n, p = int(config["n"]), int(config["p"])
        shifts = []
        for entry in config["shifts"]:
            factor = entry.get("factor")
            if factor is not None:
                factor = TensorFactorization(int(factor[0]), int(factor[1]))
            shifts.append((factor, int(entry["e"])))
        pump = config["pump"]
        if pump is not None:
            pump = TensorFactorization(int(pump[0]), int(pump[1]))
        circuit_part = None
        if config["circuit"] is not None:
            circuit_part = circuit_from_json(
                json.dumps(_load_json_file(config["circuit"])), geometry="periodic"
            )
        spec = CompileSpec(
            n=n, p=p, shifts=shifts, pump=pump,
            circuit=circuit_part, tight=bool(config["tight"]),
        )
        stair = compile_qca(spec)
        circuit = Circuit(stair.register, [[g] for g in stair.gates])
        summary = {"gate_count": stair.gate_count, "verified": True}
        return _write_record(
            out_dir, command, config, summary, t0,
            circuit_json=circuit_to_json(circuit),
        )

    if subcommand == "decompose":
        if config["circuit"] is None:
            raise ConfigError("qca decompose needs a circuit path")
        circuit = circuit_from_json(
            json.dumps(_load_json_file(config["circuit"])), geometry="periodic"
        )
        blocks1, blocks2 = two_layer_decompose(
            circuit, circuit.register.n, tight=bool(config["tight"])
        )
        # mu2 acts first, mu1 second; blocks within each layer are disjoint
        out_circuit = Circuit(circuit.register, [blocks2, blocks1])
        summary = {
            "mu2_blocks": [sorted(b.support) for b in blocks2],
            "mu1_blocks": [sorted(b.support) for b in blocks1],
            "gate_count": len(blocks1) + len(blocks2),
        }
        return _write_record(
            out_dir, command, config, summary, t0,
            circuit_json=circuit_to_json(out_circuit),
        )

    raise ConfigError(f"unknown qca subcommand {subcommand!r}")


# ---------------------------------------------------------------------------
# argument parsing


def _add_common_flags(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed (64-bit)")
    parser.add_argument("--mode", choices=["exact", "sampled", "analytic"])
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--reps", type=int, help="override repetition count")
    parser.add_argument("--shots", type=int, help="override shots per setting")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quditcirc",
        description="Shallow-circuit protocol, learning, and QCA compilation harness.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common_flags(sub.add_parser("distinguish", help="run the charge-spreading protocol"))
    _add_common_flags(sub.add_parser("learn", help="learn a hidden shallow circuit"))
    qca = sub.add_parser("qca", help="QCA index, compilation, and verification")
    qca_sub = qca.add_subparsers(dest="subcommand", required=True)
    for name in ("index", "compile", "pump", "decompose", "verify"):
        _add_common_flags(qca_sub.add_parser(name))
    return parser


def _overrides(args, command: str) -> dict:
    out = {}
    if args.seed is not None and command in ("distinguish", "learn"):
        out["seed"] = args.seed
    if args.mode is not None and command in ("distinguish", "learn"):
        out["mode"] = args.mode
    if args.reps is not None and command == "distinguish":
        out["reps"] = args.reps
    if args.shots is not None and command == "learn":
        out["shots"] = args.shots
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command if args.command != "qca" else f"qca {args.subcommand}"
    try:
        file_config = _load_json_file(args.config) if args.config else {}
        if not isinstance(file_config, dict):
            raise ConfigError("config file must contain a JSON object")
        config = resolve_config(command, file_config, _overrides(args, command))
        if args.command == "distinguish":
            record = run_distinguish(config, args.out)
        elif args.command == "learn":
            record = run_learn(config, args.out)
        else:
            record = run_qca(args.subcommand, config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GuardError as exc:
        print(f"guard violation: {exc}", file=sys.stderr)
        return 3
    except ConsistencyError as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return 4
    except QuditError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(record["summary"], sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
