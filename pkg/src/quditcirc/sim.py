"""Dense statevector / density-matrix simulation primitives.

Everything here is a pure function; randomness enters only through an
explicitly passed numpy Generator.
"""

import numpy as np

from .errors import (
    GuardError,
    InvalidDimensionError,
    NonHermitianError,
    SupportError,
)
from .types import Circuit, DensityMatrix, LocalOperator, QuditRegister, StateVector

# Dense-matrix size guard for whole-register operator reconstruction.
MAX_GLOBAL_DIM = 2**14


# ---------------------------------------------------------------------------
# generalized Pauli (Weyl) operators


def weyl_matrix(p: int, a: int, b: int) -> np.ndarray:
    """Matrix of X^a Z^b (Z applied first) for a dimension-p qudit."""
    if p < 2:
        raise InvalidDimensionError(f"local dimension must be >= 2, got {p}")
    a %= p
    b %= p
    omega = np.exp(2j * np.pi / p)
    # X|j> = |j+1 mod p>, Z|j> = omega^j |j>
    X = np.zeros((p, p), dtype=complex)
    X[(np.arange(p) + 1) % p, np.arange(p)] = 1.0
    Z = np.diag(omega ** np.arange(p))
    return np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b)


def generalized_pauli(p: int, a: int, b: int, site: int = 0) -> LocalOperator:
    """Single-site generalized Pauli X^a Z^b as a LocalOperator."""
    return LocalOperator([site], weyl_matrix(p, a, b), p)


def weyl_string(p: int, sites, powers) -> LocalOperator:
    """Tensor product of X^a Z^b factors over the given sites.

    powers is a list of (a, b) pairs aligned with sites.
    """
    mat = np.array([[1.0 + 0j]])
    for a, b in powers:
        mat = np.kron(mat, weyl_matrix(p, a, b))
    return LocalOperator(list(sites), mat, p)


def swap_operator(p: int, sites=(0, 1)) -> LocalOperator:
    """Two-site swap gate |xy> -> |yx>."""
    if p < 2:
        raise InvalidDimensionError(f"local dimension must be >= 2, got {p}")
    d = p * p
    S = np.zeros((d, d))
    for x in range(p):
        for y in range(p):
            S[y * p + x, x * p + y] = 1.0
    return LocalOperator(list(sites), S.astype(complex), p)


def partial_swap_operator(p_a: int, p_b: int, sites=(0, 1)) -> LocalOperator:
    """Gate exchanging only the second tensor factor (dimension p_b) of two
    sites whose local space factors as C^{p_a} (x) C^{p_b}."""
    p = p_a * p_b
    d = p * p
    S = np.zeros((d, d))
    for a1 in range(p_a):
        for b1 in range(p_b):
            for a2 in range(p_a):
                for b2 in range(p_b):
                    src = (a1 * p_b + b1) * p + (a2 * p_b + b2)
                    dst = (a1 * p_b + b2) * p + (a2 * p_b + b1)
                    S[dst, src] = 1.0
    return LocalOperator(list(sites), S.astype(complex), p)


# ---------------------------------------------------------------------------
# applying local operators to states and matrices


def _site_axis(n: int, site: int) -> int:
    return n - 1 - site


def apply_local_to_tensor(tens: np.ndarray, op: LocalOperator, n: int, axes_offset: int = 0):
    """Contract op into the site axes of a (p,)*k tensor.

    axes_offset selects row axes (0) or column axes (n) of an operator
    tensor; for state tensors use 0.
    """
    m = len(op.support)
    p = op.p
    G = op.matrix.reshape((p,) * (2 * m))
    target = [axes_offset + _site_axis(n, s) for s in op.support]
    out = np.tensordot(G, tens, axes=(list(range(m, 2 * m)), target))
    return np.moveaxis(out, list(range(m)), target)


def apply_local_to_vector(vec: np.ndarray, op: LocalOperator, register: QuditRegister):
    """Apply a local operator to a full amplitude vector."""
    n, p = register.n, register.p
    for s in op.support:
        if not 0 <= s < n:
            raise SupportError(f"operator site {s} out of range for n={n}")
    tens = vec.reshape((p,) * n)
    return apply_local_to_tensor(tens, op, n).reshape(-1)


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    """Evolve a state through a circuit layer by layer."""
    if circuit.register.n != state.register.n or circuit.register.p != state.register.p:
        raise InvalidDimensionError("circuit register does not match state register")
    vec = state.amplitudes
    for gate in circuit.gates():
        vec = apply_local_to_vector(vec, gate, state.register)
    return StateVector(state.register, vec)


def apply_gates_to_density(rho: np.ndarray, gates, register: QuditRegister) -> np.ndarray:
    """Conjugate a full-register density matrix by a gate sequence."""
    n, p = register.n, register.p
    tens = rho.reshape((p,) * (2 * n))
    for g in gates:
        tens = apply_local_to_tensor(tens, g, n, axes_offset=0)
        conj = LocalOperator(g.support, g.matrix.conj(), g.p)
        tens = apply_local_to_tensor(tens, conj, n, axes_offset=n)
    d = register.dim
    return tens.reshape(d, d)


def expectation(state: StateVector, op: LocalOperator) -> float:
    """<psi|O|psi> for a hermitian local observable."""
    if not op.is_hermitian():
        raise NonHermitianError("expectation requires a hermitian observable")
    out = apply_local_to_vector(state.amplitudes, op, state.register)
    val = np.vdot(state.amplitudes, out)
    return float(val.real)


def reduced_density(state: StateVector, region) -> DensityMatrix:
    """Partial trace of a pure state onto an ordered site list."""
    region = list(region)
    if not region:
        raise SupportError("region must be nonempty")
    n, p = state.register.n, state.register.p
    for s in region:
        if not 0 <= s < n:
            raise SupportError(f"region site {s} out of range")
    tens = state.tensor()
    axes = [_site_axis(n, s) for s in region]
    rest = [a for a in range(n) if a not in axes]
    M = tens.transpose(axes + rest).reshape(p ** len(region), -1)
    rho = M @ M.conj().T
    return DensityMatrix(region, rho, p)


def partial_trace(rho: np.ndarray, register: QuditRegister, region) -> np.ndarray:
    """Partial trace of a full-register matrix onto an ordered site list."""
    region = list(region)
    if not region:
        raise SupportError("region must be nonempty")
    n, p = register.n, register.p
    tens = rho.reshape((p,) * (2 * n))
    keep = [_site_axis(n, s) for s in region]
    drop = [a for a in range(n) if a not in keep]
    perm = keep + drop + [n + a for a in keep] + [n + a for a in drop]
    dk = p ** len(keep)
    dd = p ** len(drop)
    M = tens.transpose(perm).reshape(dk, dd, dk, dd)
    return np.einsum("aibi->ab", M)


# ---------------------------------------------------------------------------
# operator algebra on local supports


def extend_to_support(op: LocalOperator, support) -> LocalOperator:
    """Rewrite op on a larger (sorted) support, padding with identity."""
    support = sorted(support)
    missing = [s for s in op.support if s not in support]
    if missing:
        raise SupportError(f"target support misses sites {missing}")
    return op.tensor_with_identity([s for s in support if s not in op.support]).sorted()


def local_product(a: LocalOperator, b: LocalOperator) -> LocalOperator:
    """Operator product a @ b on the union support."""
    union = sorted(set(a.support) | set(b.support))
    A = extend_to_support(a, union)
    B = extend_to_support(b, union)
    return LocalOperator(union, A.matrix @ B.matrix, a.p)


def conjugate_by_gate(op: LocalOperator, gate: LocalOperator) -> LocalOperator:
    """G op G^dagger, extending supports as needed.

    Skips the work when supports are disjoint (exact commutation).
    """
    if not set(op.support) & set(gate.support):
        return op
    union = sorted(set(op.support) | set(gate.support))
    big = extend_to_support(op, union)
    m = len(union)
    p = op.p
    tens = big.matrix.reshape((p,) * (2 * m))
    # union[k] sits on tensor axis k; apply_local_to_tensor addresses
    # axis m-1-s for site label s, so relabel accordingly
    pos = {s: m - 1 - k for k, s in enumerate(union)}
    gate_local = LocalOperator([pos[s] for s in gate.support], gate.matrix, p)
    tens = apply_local_to_tensor(tens, gate_local, m, axes_offset=0)
    gate_conj = LocalOperator(gate_local.support, gate.matrix.conj(), p)
    tens = apply_local_to_tensor(tens, gate_conj, m, axes_offset=m)
    return LocalOperator(union, tens.reshape(big.dim, big.dim), p)


def truncate_support(op: LocalOperator, tol: float = 1e-10) -> LocalOperator:
    """Drop support sites on which the operator acts as identity."""
    current = op.sorted()
    changed = True
    while changed and len(current.support) > 1:
        changed = False
        m = len(current.support)
        p = current.p
        tens = current.matrix.reshape((p,) * (2 * m))
        for k in range(m):
            red = np.trace(tens, axis1=k, axis2=m + k) / p
            # candidate = identity on axis k tensor red
            eye = np.eye(p)
            sub_in = "".join(chr(97 + i) for i in range(2 * m - 2))
            row = sub_in[: m - 1]
            col = sub_in[m - 1 :]
            out = row[:k] + "y" + row[k:] + col[:k] + "z" + col[k:]
            cand = np.einsum(f"yz,{sub_in}->{out}", eye, red)
            if np.max(np.abs(tens - cand)) <= tol:
                support = current.support[:k] + current.support[k + 1 :]
                d = p ** (m - 1)
                current = LocalOperator(support, red.reshape(d, d), p)
                changed = True
                break
    return current


def conjugate_through_gates(op: LocalOperator, gates, truncate_tol=None) -> LocalOperator:
    """Image of op under conjugation by a gate sequence (first gate innermost).

    This realizes the Heisenberg image U op U^dagger for U the product of
    the gates in application order.
    """
    current = op
    for g in gates:
        current = conjugate_by_gate(current, g)
        # truncating between gates keeps the dense support from
        # accumulating across non-overlapping conjugations
        if truncate_tol is not None and len(current.support) > 2:
            current = truncate_support(current, truncate_tol)
    if truncate_tol is not None:
        current = truncate_support(current, truncate_tol)
    return current


def operator_to_global(op: LocalOperator, register: QuditRegister) -> np.ndarray:
    """Full p^n x p^n matrix of a local operator (dimension guarded)."""
    n, p = register.n, register.p
    if register.dim > MAX_GLOBAL_DIM:
        raise GuardError(f"global dimension {register.dim} exceeds guard {MAX_GLOBAL_DIM}")
    full = extend_to_support(op, sorted(set(op.support) | set(range(n))))
    m = n
    tens = full.matrix.reshape((p,) * (2 * m))
    pos = {s: k for k, s in enumerate(full.support)}
    perm = [pos[n - 1 - a] for a in range(n)]
    tens = tens.transpose(perm + [m + k for k in perm])
    return tens.reshape(register.dim, register.dim)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Full unitary matrix of a circuit (dimension guarded)."""
    reg = circuit.register
    if reg.dim > MAX_GLOBAL_DIM:
        raise GuardError(f"global dimension {reg.dim} exceeds guard {MAX_GLOBAL_DIM}")
    n, p = reg.n, reg.p
    U = np.eye(reg.dim, dtype=complex).reshape((p,) * (2 * n))
    for g in circuit.gates():
        U = apply_local_to_tensor(U, g, n, axes_offset=0)
    return U.reshape(reg.dim, reg.dim)


# ---------------------------------------------------------------------------
# random unitaries


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Ginibre matrix with phase fix."""
    if dim < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {dim}")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_brickwork(register: QuditRegister, depth: int, rng: np.random.Generator) -> Circuit:
    """Brickwork of Haar nearest-neighbor gates; layer d starts at site d % 2.

    On a periodic even-size register, odd layers include the wrap gate
    [n-1, 0] so every site is covered.
    """
    n, p = register.n, register.p
    layers = []
    for d in range(depth):
        layer = [
            LocalOperator([i, i + 1], haar_unitary(p * p, rng), p)
            for i in range(d % 2, n - 1, 2)
        ]
        if register.geometry == "periodic" and d % 2 == 1 and n % 2 == 0 and n > 2:
            layer.append(LocalOperator([n - 1, 0], haar_unitary(p * p, rng), p))
        layers.append(layer)
    return Circuit(register, layers)


def ti_brickwork(register: QuditRegister, depth: int, rng: np.random.Generator) -> Circuit:
    """Translation-invariant brickwork: one Haar gate repeated per layer.

    Requires even n on a periodic register so layer d (offset d % 2)
    tiles the circle; odd layers include the wrap gate [n-1, 0].
    """
    n, p = register.n, register.p
    if register.geometry != "periodic" or n % 2:
        raise InvalidDimensionError("ti_brickwork needs a periodic register of even size")
    layers = []
    for d in range(depth):
        U = haar_unitary(p * p, rng)
        layer = [LocalOperator([i, i + 1], U, p) for i in range(d % 2, n - 1, 2)]
        if d % 2 == 1:
            layer.append(LocalOperator([n - 1, 0], U, p))
        layers.append(layer)
    return Circuit(register, layers)


# ---------------------------------------------------------------------------
# decompositions into density operators


def hermitian_split(H: LocalOperator):
    """Split a hermitian operator as alpha*rho_plus - beta*rho_minus.

    alpha is the sum of positive eigenvalues and beta the absolute sum of
    negative ones.  An absent side gets weight 0 and a maximally mixed
    placeholder density.
    """
    if not H.is_hermitian():
        raise NonHermitianError("hermitian_split requires a hermitian input")
    evals, evecs = np.linalg.eigh(H.matrix)
    d = H.dim
    pos = evals > 0
    neg = evals < 0
    alpha = float(evals[pos].sum())
    beta = float(-evals[neg].sum())
    mixed = np.eye(d) / d

    def _side(mask, weight):
        if weight <= 0:
            return DensityMatrix(H.support, mixed, H.p)
        vecs = evecs[:, mask]
        vals = np.abs(evals[mask])
        rho = (vecs * vals) @ vecs.conj().T / weight
        return DensityMatrix(H.support, rho, H.p)

    return alpha, _side(pos, alpha), beta, _side(neg, beta)


def operator_to_densities(O: LocalOperator):
    """Write an arbitrary operator as a weighted sum of <= 4 densities."""
    H = LocalOperator(O.support, (O.matrix + O.matrix.conj().T) / 2, O.p)
    K = LocalOperator(O.support, (O.matrix - O.matrix.conj().T) / 2j, O.p)
    terms = []
    for part, scale in ((H, 1.0), (K, 1j)):
        alpha, rho_p, beta, rho_m = hermitian_split(part)
        if alpha > 0:
            terms.append((scale * alpha, rho_p))
        if beta > 0:
            terms.append((-scale * beta, rho_m))
    return terms
