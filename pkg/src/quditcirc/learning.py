"""Learning a shallow circuit from oracle access.

The hidden unitary U has a known spread r, so the Heisenberg image of a
single-site generator lives on the radius-r ball of its site.  We recover
imageX = U X_i U^dag and imageZ = U Z_i U^dag by preparing the site in a
small set of density operators, leaving the rest maximally mixed, and
tomographing the reduced output state on the ball.  The images then
assemble into a shallow circuit for U (x) U^dag out of swap gates and
their U-conjugates.

Preparation of "everything else maximally mixed" is exact here: a fresh
uniformly random computational basis state per shot averages to I/p per
site, so the shot outcomes are i.i.d. draws from the env-averaged
distribution and we sample them directly from it.
"""

from dataclasses import dataclass, field
from math import ceil, log

import numpy as np
import scipy.linalg

from .errors import ConfigError, ConsistencyError, GuardError, SupportError
from .seeds import child_seed
from .sim import (
    MAX_GLOBAL_DIM,
    apply_gates_to_density,
    apply_local_to_vector,
    extend_to_support,
    local_product,
    operator_to_densities,
    operator_to_global,
    partial_trace,
    swap_operator,
    weyl_matrix,
)
from .types import Circuit, LocalOperator, QuditRegister

EXACT_IMAGE_TOL = 1e-8
EXACT_UNITARY_TOL = 1e-6
SAMPLED_UNITARY_TOL = 1.5


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, int(p**0.5) + 1))


# ---------------------------------------------------------------------------
# oracle


class OracleChannel:
    """Black-box access to a hidden circuit with declared spread r.

    The hidden circuit is reachable only through apply/evolve_density,
    each of which counts as one query.  Sampled-mode repetitions are
    charged through add_queries by the learner.
    """

    def __init__(self, hidden: Circuit, spread: int):
        self._hidden = hidden
        self.register = hidden.register
        self.spread = int(spread)
        self.queries = 0

    def apply(self, state):
        from .sim import apply_circuit

        self.queries += 1
        return apply_circuit(state, self._hidden)

    def evolve_density(self, rho: np.ndarray) -> np.ndarray:
        self.queries += 1
        return apply_gates_to_density(rho, self._hidden.gates(), self.register)

    def add_queries(self, count: int) -> None:
        self.queries += int(count)

    def ball(self, site: int):
        """Sites within distance spread of site, ascending."""
        reg = self.register
        return [s for s in range(reg.n) if reg.distance(site, s) <= self.spread]


def make_oracle(hidden: Circuit, spread=None) -> OracleChannel:
    """Wrap a circuit as an oracle; default spread is the depth lightcone."""
    if spread is None:
        spread = hidden.depth
    return OracleChannel(hidden, spread)


# ---------------------------------------------------------------------------
# tomography settings


@dataclass
class TomographySettings:
    """Mode and accuracy budget for image learning.

    In sampled mode, shots=None selects the Hoeffding schedule for the
    per-site target epsilon/(4n) at confidence delta.  An explicit shots
    below that schedule is rejected.
    """

    mode: str = "exact"
    shots: int = None
    epsilon: float = 0.1
    delta: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ConfigError(f"unknown tomography mode {self.mode!r}")
        if self.mode == "sampled":
            if self.shots is not None and self.shots < 1:
                raise ConfigError("shots must be >= 1 in sampled mode")
            if not (0 < self.delta < 1) or self.epsilon <= 0:
                raise ConfigError("sampled mode needs epsilon > 0 and 0 < delta < 1")

    def site_target(self, n: int) -> float:
        # per-site operator-norm budget eps/(4n)
        return self.epsilon / (4.0 * n)

    def schedule_shots(self, n: int, p: int, k: int) -> int:
        """Hoeffding shot count per measurement setting.

        Per-observable accuracy eps_site/p^k covers the coherent worst
        case of the linear-inversion sum; the log term union-bounds over
        all 2n * p^(2k) observable estimates of a full run.
        """
        e_w = self.site_target(n) / p**k
        m_tot = 2 * n * p ** (2 * k)
        return ceil(2.0 * log(2.0 * m_tot / self.delta) / e_w**2)

    def resolve_shots(self, n: int, p: int, k: int) -> int:
        need = self.schedule_shots(n, p, k)
        if self.shots is None:
            return need
        if self.shots < need:
            raise ConfigError(
                f"{self.shots} shots per setting below the (epsilon, delta) "
                f"schedule requirement {need}"
            )
        return self.shots


@dataclass
class HeisenbergImage:
    """Learned images of X_i and Z_i, supported on the ball of site i."""

    site: int
    imageX: LocalOperator
    imageZ: LocalOperator

    def image_of_weyl(self, a: int, b: int) -> LocalOperator:
        """Image of X^a Z^b via the algebra homomorphism."""
        p = self.imageX.p
        out = LocalOperator(list(self.imageX.support), np.eye(self.imageX.dim), p)
        for _ in range(a % p):
            out = local_product(out, self.imageX)
        for _ in range(b % p):
            out = local_product(out, self.imageZ)
        return out

    def unitarity_defect(self) -> float:
        dx = self.imageX.matrix @ self.imageX.matrix.conj().T - np.eye(self.imageX.dim)
        dz = self.imageZ.matrix @ self.imageZ.matrix.conj().T - np.eye(self.imageZ.dim)
        return max(np.abs(dx).max(), np.abs(dz).max())


# ---------------------------------------------------------------------------
# measurement bases (prime p): eigenbases of Z and of XZ^c, c = 0..p-1


def _measurement_bases(p: int):
    bases = [np.eye(p, dtype=complex)]
    for c in range(p):
        w = weyl_matrix(p, 1, c)
        # schur of a normal matrix gives an orthonormal eigenbasis even
        # when hermitian combinations of w are degenerate
        t, q = scipy.linalg.schur(w, output="complex")
        bases.append(q)
    return bases


def _basis_index(p: int, a: int, b: int) -> int:
    if a % p == 0:
        return 0
    c = (b * pow(a, -1, p)) % p
    return 1 + c


_TOMO_CACHE = {}


def _tomography_plan(p: int, k: int):
    """Per-(p, k) tables for linear-inversion tomography on k sites.

    Returns (bases, settings, plan) where plan maps each Weyl label
    tuple to (setting index, diagonal of V^dag W V).
    """
    key = (p, k)
    if key in _TOMO_CACHE:
        return _TOMO_CACHE[key]
    bases = _measurement_bases(p)
    n_b = len(bases)
    site_diag = {}
    for a in range(p):
        for b in range(p):
            c = _basis_index(p, a, b)
            v = bases[c]
            site_diag[(a, b)] = (c, np.diag(v.conj().T @ weyl_matrix(p, a, b) @ v).copy())
    settings = [()]
    for _ in range(k):
        settings = [s + (c,) for s in settings for c in range(n_b)]
    setting_index = {s: t for t, s in enumerate(settings)}
    plan = {}
    labels = [()]
    for _ in range(k):
        labels = [l + ((a, b),) for l in labels for a in range(p) for b in range(p)]
    for lab in labels:
        cs = tuple(site_diag[ab][0] for ab in lab)
        d = np.ones(1, dtype=complex)
        for ab in lab:
            d = np.kron(d, site_diag[ab][1])
        plan[lab] = (setting_index[cs], d)
    _TOMO_CACHE[key] = (bases, settings, plan)
    return _TOMO_CACHE[key]


def _weyl_kron(p: int, lab) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for a, b in lab:
        m = np.kron(m, weyl_matrix(p, a, b))
    return m


def _sampled_estimate(rho: np.ndarray, p: int, k: int, shots: int, rng) -> np.ndarray:
    """Shot-sampled linear-inversion estimate of a k-site density matrix."""
    bases, settings, plan = _tomography_plan(p, k)
    d = p**k
    v_cache = {}
    freqs = {}
    for t, s in enumerate(settings):
        v = np.ones((1, 1), dtype=complex)
        for c in s:
            v = np.kron(v, bases[c])
        probs = np.real(np.diag(v.conj().T @ rho @ v))
        probs = np.clip(probs, 0.0, None)
        probs = probs / probs.sum()
        counts = rng.multinomial(shots, probs)
        freqs[t] = counts / shots
    est = np.zeros((d, d), dtype=complex)
    for lab, (t, diag) in plan.items():
        mean_w = np.dot(freqs[t], diag)  # estimate of Tr(W rho)
        est += mean_w * _weyl_kron(p, lab).conj().T
    est /= d
    # project to the physical cone
    est = (est + est.conj().T) / 2
    evals, evecs = np.linalg.eigh(est)
    evals = np.clip(evals, 0.0, None)
    tr = evals.sum()
    if tr <= 0:
        return np.eye(d) / d
    return (evecs * (evals / tr)) @ evecs.conj().T


# ---------------------------------------------------------------------------
# image learning


def _site_preparations(p: int):
    """Weighted input densities whose recombination yields X and Z images.

    Qubits use the two stabilizer states (1+X)/2 and (1+Z)/2; the image
    of sigma follows from image(2 rho - 1).  Qudits use the general
    density decomposition of X and Z (up to eight states).
    """
    preps = {}
    if p == 2:
        for name, a, b in (("X", 1, 0), ("Z", 0, 1)):
            rho = (np.eye(2) + weyl_matrix(2, a, b)) / 2
            preps[name] = [(2.0, rho)]
    else:
        for name, a, b in (("X", 1, 0), ("Z", 0, 1)):
            op = LocalOperator([0], weyl_matrix(p, a, b), p)
            preps[name] = [(w, dm.matrix) for w, dm in operator_to_densities(op)]
    return preps


def learning_groups(n: int, r: int):
    """Interleaved site groups with pairwise ball-disjoint members."""
    step = min(2 * r + 1, n)
    return [list(range(g, n, step)) for g in range(step)]


def _learn_group(oracle: OracleChannel, sites, settings: TomographySettings):
    """Learn images for mutually far-separated sites with shared queries."""
    reg = oracle.register
    p, n = reg.p, reg.n
    if reg.dim > MAX_GLOBAL_DIM:
        raise GuardError(f"register dimension {reg.dim} exceeds {MAX_GLOBAL_DIM}")
    balls = {}
    for i in sites:
        ball = oracle.ball(i)
        balls[i] = ball
    preps = _site_preparations(p)
    if settings.mode == "sampled" and not _is_prime(p):
        raise ConfigError("sampled tomography needs prime local dimension")

    # one evolved global density per (generator name, prep index)
    reduced = {}
    weights = {}
    n_preps = {name: len(terms) for name, terms in preps.items()}
    for name in ("X", "Z"):
        for j in range(n_preps[name]):
            w, rho_site = preps[name][j]
            weights[(name, j)] = w
            # product input: prep at each group site, I/p elsewhere
            m = np.ones((1, 1), dtype=complex)
            for _ in sites:
                m = np.kron(m, rho_site)
            loc = LocalOperator(list(sites), m, p)
            glob = operator_to_global(loc, reg) / p ** (n - len(sites))
            out = oracle.evolve_density(glob)
            for i in sites:
                reduced[(i, name, j)] = partial_trace(out, reg, balls[i])

    if settings.mode == "sampled":
        # each shot of each setting is one physical oracle use, shared
        # by the whole group; evolve_density already charged one per prep
        k_max = max(len(balls[i]) for i in sites)
        shots = settings.resolve_shots(n, p, k_max)
        n_settings = len(_tomography_plan(p, k_max)[1])
        total_preps = sum(n_preps[nm] for nm in ("X", "Z"))
        oracle.add_queries(total_preps * (n_settings * shots - 1))

    rng = np.random.default_rng(child_seed(settings.seed, min(sites)))
    images = []
    for i in sites:
        ball = balls[i]
        k = len(ball)
        d = p**k
        mats = {}
        for name in ("X", "Z"):
            acc = np.zeros((d, d), dtype=complex)
            for j in range(n_preps[name]):
                m = reduced[(i, name, j)]
                if settings.mode == "sampled":
                    shots = settings.resolve_shots(n, p, k)
                    m = _sampled_estimate(m, p, k, shots, rng)
                acc += weights[(name, j)] * m
            img = p ** (k - 1) * acc
            if p == 2:
                img = img - np.eye(d)
            mats[name] = img
        images.append(
            HeisenbergImage(
                i,
                LocalOperator(ball, mats["X"], p),
                LocalOperator(ball, mats["Z"], p),
            )
        )
    return images


def learn_site_images(
    oracle: OracleChannel, site: int, settings: TomographySettings
) -> HeisenbergImage:
    """Learn the X and Z images of one site."""
    if not 0 <= site < oracle.register.n:
        raise SupportError(f"site {site} out of range")
    img = _learn_group(oracle, [site], settings)[0]
    if settings.mode == "exact" and img.unitarity_defect() > EXACT_IMAGE_TOL:
        raise ConsistencyError(
            f"exact-mode image at site {site} fails unitarity by {img.unitarity_defect()}"
        )
    return img


def batch_learn(oracle: OracleChannel, settings: TomographySettings):
    """Learn every site image, batching far-separated sites per query."""
    reg = oracle.register
    groups = learning_groups(reg.n, oracle.spread)
    images = [None] * reg.n
    for group in groups:
        for img in _learn_group(oracle, group, settings):
            images[img.site] = img
    return images


# ---------------------------------------------------------------------------
# double-circuit assembly from swaps


def primed(site: int, n: int) -> int:
    """Index of the mirror site on the primed half of the doubled register."""
    return n + site


def conjugated_swap(image: HeisenbergImage, p: int, n: int, tol=EXACT_UNITARY_TOL):
    """(U x 1) S_{i,i'} (U^dag x 1) built from the learned images.

    Equals (1/p) sum_{a,b} image(X^a Z^b) (x) (X^a Z^b)^dag on the ball
    of i joined with the primed partner i'.  The raw sum is checked for
    unitarity within tol, then polar-projected so downstream circuit
    validation sees an exact unitary.
    """
    ball = list(image.imageX.support)
    ip = primed(image.site, n)
    support = ball + [ip]
    d = p ** len(support)
    acc = np.zeros((d, d), dtype=complex)
    xpow = [None] * p
    xpow[0] = LocalOperator(ball, np.eye(p ** len(ball)), p)
    for a in range(1, p):
        xpow[a] = local_product(xpow[a - 1], image.imageX)
    zpow = [None] * p
    zpow[0] = xpow[0]
    for b in range(1, p):
        zpow[b] = local_product(zpow[b - 1], image.imageZ)
    for a in range(p):
        for b in range(p):
            im = local_product(xpow[a], zpow[b])
            w = weyl_matrix(p, a, b).conj().T
            acc += np.kron(im.matrix, w)
    acc /= p
    defect = np.abs(acc @ acc.conj().T - np.eye(d)).max()
    if defect > tol:
        raise ConsistencyError(
            f"conjugated swap at site {image.site} off unitary by {defect:.3g}"
        )
    u, _, vh = np.linalg.svd(acc)
    return LocalOperator(support, u @ vh, p)


@dataclass
class LearnedDoubleCircuit:
    """Gate realization of U (x) U^dag on the doubled register.

    Following the operator-product order of the swap identity, written as
    (product of conjugated swaps) * (product of plain swaps): the plain
    swap layer acts first on states, the conjugated-swap layers after.
    """

    register: QuditRegister
    swap_layer: list
    conjugated_layers: list = field(default_factory=list)

    def circuit(self) -> Circuit:
        return Circuit(self.register, [self.swap_layer] + self.conjugated_layers)

    @property
    def gate_count(self) -> int:
        return len(self.swap_layer) + sum(len(l) for l in self.conjugated_layers)


def assemble_double_circuit(images, p: int, tol=EXACT_UNITARY_TOL) -> LearnedDoubleCircuit:
    """Build the U (x) U^dag double circuit from per-site images."""
    n = len(images)
    doubled = QuditRegister(2 * n, p)
    swap_layer = [
        extend_to_support(swap_operator(p, (i, primed(i, n))), [i, primed(i, n)])
        for i in range(n)
    ]
    gates = [conjugated_swap(img, p, n, tol=tol) for img in images]
    # greedy packing into non-overlapping layers
    layers = []
    for g in gates:
        placed = False
        for layer in layers:
            used = {s for h in layer for s in h.support}
            if used.isdisjoint(g.support):
                layer.append(g)
                placed = True
                break
        if not placed:
            layers.append([g])
    return LearnedDoubleCircuit(doubled, swap_layer, layers)


def double_circuit_from_truth(truth: Circuit) -> LearnedDoubleCircuit:
    """Double circuit from the true images; self-test of the identity."""
    from .sim import conjugate_through_gates, generalized_pauli

    n, p = truth.register.n, truth.register.p
    gates = list(truth.gates())
    images = []
    for i in range(n):
        ix = conjugate_through_gates(generalized_pauli(p, 1, 0, i), gates)
        iz = conjugate_through_gates(generalized_pauli(p, 0, 1, i), gates)
        sup = sorted(set(ix.support) | set(iz.support))
        images.append(
            HeisenbergImage(i, extend_to_support(ix, sup), extend_to_support(iz, sup))
        )
    return assemble_double_circuit(images, p, tol=1e-8)


# ---------------------------------------------------------------------------
# verification


def _truth_double_gates(truth: Circuit):
    """Gates realizing V (x) V^dag on the doubled register, in order."""
    n = truth.register.n
    p = truth.register.p
    gates = []
    for g in truth.gates():
        gates.append(LocalOperator(list(g.support), g.matrix, p))
    for g in truth.inverse_gates():
        gates.append(LocalOperator([primed(s, n) for s in g.support], g.matrix, p))
    return gates


def _random_product_state(register: QuditRegister, rng) -> np.ndarray:
    amps = np.ones(1, dtype=complex)
    for _ in range(register.n):
        v = rng.standard_normal(register.p) + 1j * rng.standard_normal(register.p)
        v /= np.linalg.norm(v)
        # little-endian index: later sites are more significant
        amps = np.kron(v, amps)
    return amps


def _opnorm_difference(apply_a, apply_b, dim: int, rng, iters: int = 60) -> float:
    """Largest singular value of A - B via power iteration on pairs."""

    def delta(v):
        return apply_a(v) - apply_b(v)

    def delta_dag(v):
        # A, B unitary: A^dag v computed by inverse application
        return apply_a(v, dagger=True) - apply_b(v, dagger=True)

    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = delta_dag(delta(v))
        nw = np.linalg.norm(w)
        if nw < 1e-30:
            return 0.0
        v = w / nw
        sigma = np.sqrt(nw)
    return float(sigma)


def verify_double(learned: LearnedDoubleCircuit, truth: Circuit, seed: int = 0) -> float:
    """Distance between the learned double circuit and V (x) V^dag.

    Max trace distance over 20 seeded random product states, combined
    with a power-iteration operator-norm estimate when the doubled
    dimension stays within the dense guard.
    """
    reg = learned.register
    n, p = truth.register.n, truth.register.p
    if reg.n != 2 * n or reg.p != p:
        raise ConfigError("learned register does not double the truth register")
    if reg.dim > MAX_GLOBAL_DIM:
        raise GuardError(f"doubled dimension {reg.dim} exceeds {MAX_GLOBAL_DIM}")
    learned_gates = list(learned.circuit().gates())
    truth_gates = _truth_double_gates(truth)

    def run(gates, vec, dagger=False):
        if dagger:
            seq = [LocalOperator(g.support, g.matrix.conj().T, p) for g in reversed(gates)]
        else:
            seq = gates
        for g in seq:
            vec = apply_local_to_vector(vec, g, reg)
        return vec

    rng = np.random.default_rng(child_seed(seed, 0))
    dist = 0.0
    for _ in range(20):
        v = _random_product_state(reg, rng)
        a = run(learned_gates, v)
        b = run(truth_gates, v)
        # pure-state trace distance sqrt(1 - |<a|b>|^2), computed as the
        # norm of the orthogonal component to avoid cancellation near 0
        w = a - b * np.vdot(b, a)
        dist = max(dist, float(np.linalg.norm(w)))
    if reg.dim <= 2**12:
        op = _opnorm_difference(
            lambda v, dagger=False: run(learned_gates, v, dagger),
            lambda v, dagger=False: run(truth_gates, v, dagger),
            reg.dim,
            rng,
        )
        dist = max(dist, op)
    return dist
