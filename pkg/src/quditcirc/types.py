"""Domain types: registers, states, local operators, circuits.

Conventions fixed here and relied on everywhere else:

* Global basis index is little-endian in the site label: basis state k has
  site i in level (k // p**i) % p.  Equivalently, reshaping an amplitude
  vector to shape (p,)*n puts site i on axis n-1-i.
* A LocalOperator's matrix is indexed big-endian in its support list:
  the matrix of A on support [a, b] is kron(A_a, A_b), i.e. support[0]
  is the most significant digit of the local basis index.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensionError, NonUnitaryError, SupportError

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
NORM_TOL = 1e-10


@dataclass(frozen=True)
class QuditRegister:
    """An n-site register of dimension-p qudits on a fixed geometry.

    geometry is one of "open", "periodic", or "comb".  For a comb, sites
    alternate spine/tip: spine i is site 2i, its tip is site 2i+1.
    """

    n: int
    p: int
    geometry: str = "open"

    def __post_init__(self):
        if self.n < 1:
            raise InvalidDimensionError(f"site count must be >= 1, got {self.n}")
        if self.p < 2:
            raise InvalidDimensionError(f"local dimension must be >= 2, got {self.p}")
        if self.geometry not in ("open", "periodic", "comb"):
            raise InvalidDimensionError(f"unknown geometry {self.geometry!r}")
        if self.geometry == "comb" and self.n % 2 != 0:
            raise InvalidDimensionError("comb register needs one tip per spine site")

    @property
    def dim(self) -> int:
        return self.p**self.n

    # comb labeling helpers
    @property
    def spine_sites(self):
        return list(range(0, self.n, 2)) if self.geometry == "comb" else []

    @property
    def tip_sites(self):
        return list(range(1, self.n, 2)) if self.geometry == "comb" else []

    def comb_edges(self):
        """Edges of the comb graph as (site, site) pairs."""
        if self.geometry != "comb":
            raise SupportError("comb_edges requires comb geometry")
        edges = [(2 * i, 2 * i + 1) for i in range(self.n // 2)]
        edges += [(2 * i, 2 * i + 2) for i in range(self.n // 2 - 1)]
        return edges

    def distance(self, i: int, j: int) -> int:
        d = abs(i - j)
        if self.geometry == "periodic":
            d = min(d, self.n - d)
        return d


@dataclass
class StateVector:
    """Pure state of a full register."""

    register: QuditRegister
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.register.dim,):
            raise InvalidDimensionError(
                f"amplitude vector has shape {amps.shape}, expected ({self.register.dim},)"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidDimensionError(f"state norm {norm} deviates from 1")
        self.amplitudes = amps

    @classmethod
    def computational(cls, register: QuditRegister, digits) -> "StateVector":
        """Product basis state with the given per-site levels."""
        digits = list(digits)
        if len(digits) != register.n:
            raise InvalidDimensionError("need one digit per site")
        index = 0
        for i, d in enumerate(digits):
            if not 0 <= d < register.p:
                raise InvalidDimensionError(f"digit {d} out of range for p={register.p}")
            index += d * register.p**i
        amps = np.zeros(register.dim, dtype=complex)
        amps[index] = 1.0
        return cls(register, amps)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped so axis a carries site n-1-a."""
        p, n = self.register.p, self.register.n
        return self.amplitudes.reshape((p,) * n)


@dataclass
class DensityMatrix:
    """Density operator on an ordered subset of sites."""

    support: list
    matrix: np.ndarray
    p: int

    def __post_init__(self):
        self.support = list(self.support)
        mat = np.asarray(self.matrix, dtype=complex)
        d = self.p ** len(self.support)
        if mat.shape != (d, d):
            raise InvalidDimensionError(f"matrix shape {mat.shape} does not match support")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
            raise InvalidDimensionError("density matrix is not hermitian")
        evals = np.linalg.eigvalsh(mat)
        if evals.min() < -HERMITIAN_TOL:
            raise InvalidDimensionError(f"density matrix has negative eigenvalue {evals.min()}")
        if abs(np.trace(mat).real - 1.0) > HERMITIAN_TOL:
            raise InvalidDimensionError(f"density matrix trace {np.trace(mat)} deviates from 1")
        self.matrix = mat


@dataclass
class LocalOperator:
    """A complex matrix together with its ordered support-site list."""

    support: list
    matrix: np.ndarray
    p: int

    def __post_init__(self):
        self.support = [int(s) for s in self.support]
        if len(self.support) == 0:
            raise SupportError("support must be nonempty")
        if len(set(self.support)) != len(self.support):
            raise SupportError(f"support sites must be distinct, got {self.support}")
        mat = np.asarray(self.matrix, dtype=complex)
        d = self.p ** len(self.support)
        if mat.shape != (d, d):
            raise InvalidDimensionError(
                f"matrix shape {mat.shape} does not match support of {len(self.support)} sites"
            )
        self.matrix = mat

    @property
    def dim(self) -> int:
        return self.p ** len(self.support)

    def dagger(self) -> "LocalOperator":
        return LocalOperator(list(self.support), self.matrix.conj().T, self.p)

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        d = self.dim
        return np.max(np.abs(self.matrix @ self.matrix.conj().T - np.eye(d))) <= tol

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol

    def sorted(self) -> "LocalOperator":
        """Equivalent operator with support sites in ascending order."""
        order = np.argsort(self.support)
        if np.all(order == np.arange(len(self.support))):
            return self
        m = len(self.support)
        tens = self.matrix.reshape((self.p,) * (2 * m))
        perm = list(order) + [m + k for k in order]
        tens = tens.transpose(perm)
        support = [self.support[k] for k in order]
        return LocalOperator(support, tens.reshape(self.dim, self.dim), self.p)

    def tensor_with_identity(self, extra_sites) -> "LocalOperator":
        """Extend the support by identity factors on extra sites."""
        extra = [s for s in extra_sites if s not in self.support]
        if not extra:
            return self
        mat = np.kron(self.matrix, np.eye(self.p ** len(extra)))
        return LocalOperator(list(self.support) + extra, mat, self.p)


@dataclass
class Circuit:
    """Ordered layers of non-overlapping unitary local gates.

    Layers apply in list order: layer 0 acts first on states.
    """

    register: QuditRegister
    layers: list = field(default_factory=list)

    def __post_init__(self):
        for layer in self.layers:
            seen = set()
            for gate in layer:
                if not isinstance(gate, LocalOperator):
                    raise SupportError("gates must be LocalOperators")
                if gate.p != self.register.p:
                    raise InvalidDimensionError("gate dimension does not match register")
                for s in gate.support:
                    if not 0 <= s < self.register.n:
                        raise SupportError(f"gate site {s} out of range")
                    if s in seen:
                        raise SupportError(f"overlapping supports within a layer at site {s}")
                    seen.add(s)
                if not gate.is_unitary():
                    raise NonUnitaryError("circuit gate is not unitary within 1e-10")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self):
        """All gates in application order."""
        for layer in self.layers:
            yield from layer

    @property
    def gate_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def inverse_gates(self):
        """Daggered gates in reversed order; applying them undoes the circuit."""
        out = []
        for layer in reversed(self.layers):
            out.extend(g.dagger() for g in layer)
        return out
