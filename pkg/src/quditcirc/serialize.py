"""JSON serialization for circuits and QCA generator tables.

Schema for circuits:
    {"n": int, "p": int,
     "layers": [[{"support": [sites], "matrix": [[re, im], ...] row-major}]]}

Matrices are stored as exact floating-point [re, im] pairs, row-major.
Dumps use sorted keys and fixed separators so serialize -> parse ->
serialize is byte-stable.
"""

import json

import numpy as np

from .errors import ConfigError
from .qca import QCAMap
from .types import Circuit, LocalOperator, QuditRegister

_DUMP_KWARGS = {"sort_keys": True, "separators": (",", ":")}


def _matrix_to_pairs(matrix: np.ndarray):
    """Row-major list of [re, im] pairs."""
    mat = np.asarray(matrix, dtype=complex)
    return [[float(z.real), float(z.imag)] for z in mat.reshape(-1)]


def _pairs_to_matrix(pairs, dim: int) -> np.ndarray:
    if len(pairs) != dim * dim:
        raise ConfigError(f"matrix has {len(pairs)} entries, expected {dim * dim}")
    flat = np.array([complex(re, im) for re, im in pairs])
    return flat.reshape(dim, dim)


def _gate_to_obj(gate: LocalOperator) -> dict:
    return {"support": list(gate.support), "matrix": _matrix_to_pairs(gate.matrix)}


def _gate_from_obj(obj: dict, p: int) -> LocalOperator:
    try:
        support = [int(s) for s in obj["support"]]
        dim = p ** len(support)
        matrix = _pairs_to_matrix(obj["matrix"], dim)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed gate object: {exc}") from exc
    return LocalOperator(support, matrix, p)


def circuit_to_obj(circuit: Circuit) -> dict:
    return {
        "n": circuit.register.n,
        "p": circuit.register.p,
        "layers": [[_gate_to_obj(g) for g in layer] for layer in circuit.layers],
    }


def circuit_from_obj(obj: dict, geometry: str = "open") -> Circuit:
    try:
        n, p = int(obj["n"]), int(obj["p"])
        raw_layers = obj["layers"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed circuit object: {exc}") from exc
    register = QuditRegister(n, p, geometry)
    layers = [[_gate_from_obj(g, p) for g in layer] for layer in raw_layers]
    return Circuit(register, layers)


def circuit_to_json(circuit: Circuit) -> str:
    return json.dumps(circuit_to_obj(circuit), **_DUMP_KWARGS)


def circuit_from_json(text: str, geometry: str = "open") -> Circuit:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid circuit JSON: {exc}") from exc
    return circuit_from_obj(obj, geometry)


def qca_to_obj(qca: QCAMap) -> dict:
    images = []
    for site in range(qca.register.n):
        imX, imZ = qca.images[site]
        images.append(
            {"site": site, "imageX": _gate_to_obj(imX), "imageZ": _gate_to_obj(imZ)}
        )
    return {
        "n": qca.register.n,
        "p": qca.register.p,
        "r": qca.spread,
        "images": images,
    }


def qca_from_obj(obj: dict, geometry: str = "periodic") -> QCAMap:
    try:
        n, p, r = int(obj["n"]), int(obj["p"]), int(obj["r"])
        raw = obj["images"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed QCA object: {exc}") from exc
    register = QuditRegister(n, p, geometry)
    images = {}
    for entry in raw:
        try:
            site = int(entry["site"])
            images[site] = (
                _gate_from_obj(entry["imageX"], p),
                _gate_from_obj(entry["imageZ"], p),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed QCA image entry: {exc}") from exc
    missing = [s for s in range(n) if s not in images]
    if missing:
        raise ConfigError(f"QCA table missing image entries for sites {missing}")
    return QCAMap(register, r, images)


def qca_to_json(qca: QCAMap) -> str:
    return json.dumps(qca_to_obj(qca), **_DUMP_KWARGS)


def qca_from_json(text: str, geometry: str = "periodic") -> QCAMap:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid QCA JSON: {exc}") from exc
    return qca_from_obj(obj, geometry)
