"""Charge-conservation protocol separating shallow symmetric circuits from
globally symmetric Haar unitaries.

The protocol: prepare a product state carrying charge q in interval A,
scramble A+B with a symmetric Haar unitary, apply the unknown instance W,
and read out the partial charge Q_A.  Shallow symmetric circuits leave a
mean of q/2 in A; global symmetric Haar unitaries dilute it to |A| q / n.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    GuardError,
    InvalidDimensionError,
    NonHermitianError,
    SupportError,
    SymmetryViolationError,
)
from .seeds import child_seed
from .sim import apply_circuit, apply_local_to_vector, expectation, haar_unitary, weyl_matrix
from .types import Circuit, LocalOperator, QuditRegister, StateVector

MAX_SECTOR_DIM = 2**12  # dense sampling guard for one symmetric unitary
MAX_TWIRL_DIM = 2**20  # enumeration guard for analytic sector averages


# ---------------------------------------------------------------------------
# charge operators


class ChargeOperator:
    """A conserved charge Q = sum_i Q_i with identical single-site terms.

    The per-site matrix is shifted so its minimum eigenvalue is 0.
    """

    def __init__(self, per_site: np.ndarray, p: int):
        mat = np.asarray(per_site, dtype=complex)
        if mat.shape != (p, p):
            raise InvalidDimensionError("per-site charge must be p x p")
        if np.max(np.abs(mat - mat.conj().T)) > 1e-10:
            raise NonHermitianError("per-site charge must be hermitian")
        evals = np.linalg.eigvalsh(mat)
        if abs(evals.min()) > 1e-12:
            mat = mat - evals.min() * np.eye(p)
            evals = evals - evals.min()
        self.per_site = mat
        self.p = p
        self.site_norm = float(np.max(np.abs(evals)))
        self._sector_cache = {}  # m -> list of per-sector index arrays
        self._region_cache = {}  # m -> region operator matrix

    @property
    def is_diagonal(self) -> bool:
        return np.max(np.abs(self.per_site - np.diag(np.diag(self.per_site)))) < 1e-12

    def level_values(self) -> np.ndarray:
        """Charge carried by each computational level (diagonal charges only)."""
        if not self.is_diagonal:
            raise ConfigError("level_values requires a diagonal charge")
        return np.real(np.diag(self.per_site))

    def region_operator(self, sites) -> LocalOperator:
        """Q_S = sum over the region, as one LocalOperator."""
        sites = sorted(sites)
        m = len(sites)
        if m == 0:
            raise SupportError("charge region must be nonempty")
        if m not in self._region_cache:
            d = self.p**m
            total = np.zeros((d, d), dtype=complex)
            for k in range(m):
                left = np.eye(self.p**k)
                right = np.eye(self.p ** (m - k - 1))
                total += np.kron(np.kron(left, self.per_site), right)
            self._region_cache[m] = total
        return LocalOperator(sites, self._region_cache[m], self.p)

    def sector_indices(self, m: int):
        """Index groups of equal total charge on m sites (big-endian)."""
        if m not in self._sector_cache:
            labels = _sector_labels(self, m)
            self._sector_cache[m] = [
                np.flatnonzero(labels == lab) for lab in np.unique(labels)
            ]
        return self._sector_cache[m]


def number_charge(p: int) -> ChargeOperator:
    """The occupation-number charge diag(0, 1, ..., p-1)."""
    return ChargeOperator(np.diag(np.arange(p, dtype=float)), p)


# ---------------------------------------------------------------------------
# partitions and configuration


@dataclass(frozen=True)
class Partition:
    """Disjoint intervals A, B, C covering an open chain."""

    A: tuple
    B: tuple
    C: tuple

    def __post_init__(self):
        sites = list(self.A) + list(self.B) + list(self.C)
        if len(set(sites)) != len(sites):
            raise ConfigError("partition intervals overlap")
        n = len(sites)
        if sorted(sites) != list(range(n)):
            raise ConfigError("partition must cover sites 0..n-1")
        if len(self.A) != len(self.B):
            raise ConfigError("|A| must equal |B|")
        # floor-rounded versions of n/5 <= |A| <= n/4 <= |C|
        if len(self.A) < n // 5 or len(self.A) > -(-n // 4) or len(self.C) < n // 4:
            raise ConfigError(
                f"partition sizes |A|={len(self.A)} |C|={len(self.C)} violate n/5<=|A|<=n/4<=|C|"
            )

    @property
    def n(self) -> int:
        return len(self.A) + len(self.B) + len(self.C)


def default_partition(n: int) -> Partition:
    """|A| = |B| = floor(n/4), C takes the remainder."""
    a = n // 4
    return Partition(tuple(range(a)), tuple(range(a, 2 * a)), tuple(range(2 * a, n)))


@dataclass
class ProtocolConfig:
    register: QuditRegister
    partition: Partition
    q: int
    mode: str = "exact"  # exact | shots | analytic
    repetitions: int = 1
    delta: float = 0.01
    seed: int = 0
    charge: ChargeOperator = None

    def __post_init__(self):
        if self.charge is None:
            self.charge = number_charge(self.register.p)
        if self.partition.n != self.register.n:
            raise ConfigError("partition does not match register size")
        if self.q > len(self.partition.A) * (self.register.p - 1):
            raise ConfigError(f"initial charge q={self.q} not expressible in A")
        if self.q < 0:
            raise ConfigError("q must be nonnegative")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.mode not in ("exact", "shots", "analytic"):
            raise ConfigError(f"unknown mode {self.mode!r}")

    @property
    def q0(self) -> float:
        """Range bound |A| * ||Q_i|| on measured Q_A values."""
        return len(self.partition.A) * self.charge.site_norm


@dataclass
class ProtocolResult:
    samples: list
    mean: float
    stderr: float
    decision: str
    repetitions: int
    delta: float


# ---------------------------------------------------------------------------
# symmetric unitary sampling


def _sector_labels(charge: ChargeOperator, m: int) -> np.ndarray:
    """Total charge of each big-endian basis index on m sites."""
    vals, _ = np.linalg.eigh(charge.per_site)
    p = charge.p
    labels = np.zeros(p**m)
    for k in range(m):
        stride = p ** (m - 1 - k)
        digits = (np.arange(p**m) // stride) % p
        labels += vals[digits]
    return np.round(labels, 9)


def symmetric_haar(region, charge: ChargeOperator, rng: np.random.Generator) -> LocalOperator:
    """Haar unitary on each charge sector of Q restricted to the region."""
    region = sorted(region)
    m = len(region)
    if m == 0:
        raise SupportError("region must be nonempty")
    p = charge.p
    if p**m > MAX_SECTOR_DIM:
        raise GuardError(f"region dimension {p**m} exceeds dense sampling guard")
    block = np.zeros((p**m, p**m), dtype=complex)
    for idx in charge.sector_indices(m):
        block[np.ix_(idx, idx)] = haar_unitary(len(idx), rng)
    if charge.is_diagonal:
        U = block
    else:
        _, V = np.linalg.eigh(charge.per_site)
        basis = np.array([[1.0]])
        for _ in range(m):
            basis = np.kron(basis, V)
        U = basis @ block @ basis.conj().T
    return LocalOperator(region, U, p)


def shallow_symmetric_circuit(
    register: QuditRegister, depth: int, charge: ChargeOperator, rng: np.random.Generator
) -> Circuit:
    """Brickwork circuit of charge-conserving nearest-neighbor gates."""
    if depth < 0:
        raise ConfigError("depth must be >= 0")
    layers = []
    for layer_idx in range(depth):
        start = layer_idx % 2
        layer = []
        for i in range(start, register.n - 1, 2):
            layer.append(symmetric_haar([i, i + 1], charge, rng))
        layers.append(layer)
    return Circuit(register, layers)


# ---------------------------------------------------------------------------
# ensemble instances


class SymmetricInstance:
    """One sampled instance W of a symmetric ensemble."""

    def apply(self, state: StateVector) -> StateVector:
        raise NotImplementedError

    def check_commutes(self, charge: ChargeOperator, tol: float) -> None:
        raise NotImplementedError


class CircuitInstance(SymmetricInstance):
    def __init__(self, circuit: Circuit):
        self.circuit = circuit

    def apply(self, state):
        return apply_circuit(state, self.circuit)

    def check_commutes(self, charge, tol):
        for gate in self.circuit.gates():
            q_local = charge.region_operator(gate.support).sorted()
            g = gate.sorted()
            comm = g.matrix @ q_local.matrix - q_local.matrix @ g.matrix
            if np.max(np.abs(comm)) > tol:
                raise SymmetryViolationError(
                    f"gate on {gate.support} does not commute with the charge"
                )


class GlobalSymmetricHaarInstance(SymmetricInstance):
    """Global symmetric Haar unitary, sampled sector-by-sector on demand.

    Only sectors that carry amplitude are materialized; the per-instance
    seed makes repeated application deterministic.
    """

    def __init__(self, register: QuditRegister, charge: ChargeOperator, seed: int):
        if not charge.is_diagonal:
            raise ConfigError("lazy global sampling requires a diagonal charge")
        if register.dim > MAX_TWIRL_DIM:
            raise GuardError("register too large for sector bookkeeping")
        self.register = register
        self.charge = charge
        self.seed = seed
        self._blocks = {}

    def apply(self, state):
        key = ("global", self.register.n)
        if key not in self.charge._sector_cache:
            labels = _global_labels(self.register, self.charge)
            self.charge._sector_cache[key] = [
                np.flatnonzero(labels == lab) for lab in np.unique(labels)
            ]
        vec = state.amplitudes.copy()
        for lab, idx in enumerate(self.charge._sector_cache[key]):
            sub = vec[idx]
            if np.linalg.norm(sub) < 1e-14:
                continue
            if lab not in self._blocks:
                rng = np.random.default_rng(child_seed(self.seed, lab))
                self._blocks[lab] = haar_unitary(len(idx), rng)
            vec[idx] = self._blocks[lab] @ sub
        return StateVector(self.register, vec)

    def check_commutes(self, charge, tol):
        return None  # block structure commutes by construction


def _global_labels(register: QuditRegister, charge: ChargeOperator) -> np.ndarray:
    """Total charge of each little-endian global basis index."""
    vals = charge.level_values()
    n, p = register.n, register.p
    labels = np.zeros(register.dim)
    for i in range(n):
        digits = (np.arange(register.dim) // p**i) % p
        labels += vals[digits]
    return np.round(labels, 9)


def make_shallow_sampler(config: ProtocolConfig, depth: int):
    """Sampler for the shallow symmetric brickwork ensemble."""
    if 2 * depth > len(config.partition.B):
        raise ConfigError(
            f"2*depth={2 * depth} exceeds |B|={len(config.partition.B)}; "
            "the supergate factorization is not guaranteed"
        )

    def sample(rng):
        return CircuitInstance(
            shallow_symmetric_circuit(config.register, depth, config.charge, rng)
        )

    return sample


def make_global_sampler(config: ProtocolConfig):
    """Sampler for the global symmetric Haar ensemble."""

    def sample(rng):
        return GlobalSymmetricHaarInstance(
            config.register, config.charge, int(rng.integers(0, 2**63))
        )

    return sample


# ---------------------------------------------------------------------------
# the protocol


def prepare_charged_state(config: ProtocolConfig) -> StateVector:
    """Product state with charge q greedily packed into the left end of A."""
    p = config.register.p
    digits = [0] * config.register.n
    remaining = config.q
    for site in config.partition.A:
        fill = min(p - 1, remaining)
        digits[site] = fill
        remaining -= fill
        if remaining == 0:
            break
    if remaining > 0:
        raise ConfigError(f"charge q={config.q} does not fit in A")
    return StateVector.computational(config.register, digits)


def measure_region_charge(
    state: StateVector, sites, charge: ChargeOperator, rng: np.random.Generator
) -> float:
    """One projective outcome of the commuting family {Q_i} on a region."""
    sites = sorted(sites)
    n, p = state.register.n, state.register.p
    tens = np.abs(state.tensor()) ** 2
    axes = [n - 1 - s for s in sites]
    rest = [a for a in range(n) if a not in axes]
    probs = tens.transpose(axes + rest).reshape(p ** len(sites), -1).sum(axis=1)
    probs = probs / probs.sum()
    outcome = rng.choice(len(probs), p=probs)
    vals = charge.level_values()
    total = 0.0
    for k in range(len(sites)):
        digit = (outcome // p ** (len(sites) - 1 - k)) % p
        total += vals[digit]
    return float(total)


def run_protocol_once(
    config: ProtocolConfig, W: SymmetricInstance, rng: np.random.Generator
) -> float:
    """One pass: charged state -> U_AB -> W -> Q_A readout."""
    W.check_commutes(config.charge, 1e-8)
    state = prepare_charged_state(config)
    region_ab = sorted(config.partition.A + config.partition.B)
    u_ab = symmetric_haar(region_ab, config.charge, rng)
    state = StateVector(
        config.register, apply_local_to_vector(state.amplitudes, u_ab, config.register)
    )
    state = W.apply(state)
    if config.mode == "shots":
        return measure_region_charge(state, config.partition.A, config.charge, rng)
    q_a = config.charge.region_operator(config.partition.A)
    return expectation(state, q_a)


def analytic_average(scenario: str, config: ProtocolConfig) -> float:
    """Exact ensemble mean of Q_A via the sector-uniform twirl.

    A symmetric Haar average maps a charge eigenstate to the maximally
    mixed state of its sector, so the mean of Q_A is the sector average
    of the charge inside A.
    """
    if not config.charge.is_diagonal:
        raise ConfigError("analytic averages support diagonal charges only")
    if scenario == "shallow":
        region = sorted(config.partition.A + config.partition.B)
    elif scenario == "global":
        region = list(range(config.register.n))
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    p = config.register.p
    m = len(region)
    if p**m > MAX_TWIRL_DIM:
        raise GuardError("region too large for twirl enumeration")
    vals = config.charge.level_values()
    a_pos = [region.index(s) for s in config.partition.A]
    idx = np.arange(p**m)
    per_site = np.stack([vals[(idx // p**k) % p] for k in range(m)])
    totals = np.round(per_site.sum(axis=0), 9)
    sector = totals == np.round(float(config.q), 9)
    if not np.any(sector):
        raise ConfigError("no basis state carries total charge q")
    return float(per_site[a_pos][:, sector].sum(axis=0).mean())


def required_repetitions(config: ProtocolConfig) -> int:
    """Hoeffding count for confidence 1-delta at margin q/8 around 3q/8."""
    if not 0 < config.delta < 0.5:
        raise ConfigError("delta must lie in (0, 1/2)")
    if config.q <= 0:
        raise ConfigError("distinguishing requires q > 0")
    ratio = config.q0 / config.q
    return math.ceil(32.0 * ratio * ratio * math.log(2.0 / config.delta))


def distinguish(sampler, config: ProtocolConfig, reps: int = None) -> ProtocolResult:
    """Run the repeated protocol and label the ensemble.

    sampler(rng) must return a fresh SymmetricInstance; it is queried
    exactly once per repetition.  reps overrides the Hoeffding count.
    """
    reps = required_repetitions(config) if reps is None else int(reps)
    if reps < 1:
        raise ConfigError("repetitions must be >= 1")
    samples = []
    for k in range(reps):
        rng = np.random.default_rng(child_seed(config.seed, k))
        W = sampler(rng)
        samples.append(run_protocol_once(config, W, rng))
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    threshold = 3.0 * config.q / 8.0
    decision = "shallow" if mean > threshold else "global"
    return ProtocolResult(samples, mean, stderr, decision, reps, config.delta)


# ---------------------------------------------------------------------------
# comb (dilute discrete symmetry) scenario


@dataclass
class CombCharge:
    """Conserved data of the comb scenario.

    terms: per-tip hermitians X + X^dagger whose sum is the conserved Q.
    product_factors: per-tip X operators whose product is the symmetry Q'.
    """

    terms: list
    product_factors: list

    def total_expectation(self, state: StateVector) -> float:
        return sum(expectation(state, t) for t in self.terms)


def comb_conserved_charge(register: QuditRegister) -> CombCharge:
    """Q = sum over tips of X + X^dagger, plus the product symmetry Q'."""
    if register.geometry != "comb":
        raise SupportError("comb_conserved_charge requires comb geometry")
    p = register.p
    X = weyl_matrix(p, 1, 0)
    terms = [LocalOperator([t], X + X.conj().T, p) for t in register.tip_sites]
    factors = [LocalOperator([t], X, p) for t in register.tip_sites]
    return CombCharge(terms, factors)


def _tip_x_eigenbasis(p: int) -> np.ndarray:
    """Columns are the Fourier eigenvectors of the shift X."""
    omega = np.exp(2j * np.pi / p)
    j, k = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
    return omega ** (j * k) / np.sqrt(p)


def comb_symmetric_gate(
    register: QuditRegister, edge, rng: np.random.Generator
) -> LocalOperator:
    """Haar gate on a comb edge, symmetric under the tip factor of Q'.

    Spine-spine edges see no tip factor and get an unconstrained Haar
    unitary; spine-tip edges are Haar within each X-eigenspace of the tip.
    """
    if register.geometry != "comb":
        raise SupportError("comb_symmetric_gate requires comb geometry")
    edges = register.comb_edges()
    pair = tuple(sorted(edge))
    if pair not in {tuple(sorted(e)) for e in edges}:
        raise SupportError(f"{edge} is not an edge of the comb")
    p = register.p
    tips = set(register.tip_sites)
    if not set(pair) & tips:
        return LocalOperator(list(pair), haar_unitary(p * p, rng), p)
    spine = pair[0] if pair[1] in tips else pair[1]
    tip = pair[1] if pair[1] in tips else pair[0]
    V = _tip_x_eigenbasis(p)
    mat = np.zeros((p * p, p * p), dtype=complex)
    for k in range(p):
        proj = np.outer(V[:, k], V[:, k].conj())
        mat += np.kron(haar_unitary(p, rng), proj)
    # support order [spine, tip]: spine is the most significant factor
    return LocalOperator([spine, tip], mat, p)
