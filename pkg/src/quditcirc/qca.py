"""One-dimensional QCA as generator-image tables, with index and compiler.

A QCA on a periodic chain is stored as the table of Heisenberg images of
the single-site Weyl generators X_i, Z_i.  All operations below work on
that table: verification of the automorphism relations, composition by
Weyl-basis push-through, the GNVW index from boundary support algebras,
and O(n)-gate staircase compilations of shifts, tensor-factor pumping,
and the blend-based two-layer factorization of a shallow TI circuit.
"""

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError, ConsistencyError, GuardError, SupportError
from .sim import (
    MAX_GLOBAL_DIM,
    apply_local_to_vector,
    conjugate_through_gates,
    extend_to_support,
    generalized_pauli,
    local_product,
    operator_to_global,
    partial_swap_operator,
    swap_operator,
    truncate_support,
    weyl_matrix,
)
from .types import Circuit, LocalOperator, QuditRegister

MAX_BLOCK_DIM = 4096  # dense Skolem-Noether extraction guard
QCA_TOL = 1e-9


# ---------------------------------------------------------------------------
# the map type


@dataclass
class QCAMap:
    """Generator-image table of an algebra automorphism on a circle."""

    register: QuditRegister
    spread: int
    images: dict  # site -> (imageX, imageZ) as LocalOperators

    def image(self, site: int, which: str) -> LocalOperator:
        pair = self.images[site]
        return pair[0] if which == "X" else pair[1]

    @property
    def n(self) -> int:
        return self.register.n

    @property
    def p(self) -> int:
        return self.register.p


def _support_radius(register: QuditRegister, site: int, op: LocalOperator) -> int:
    return max(register.distance(site, s) for s in op.support)


def _measured_spread(register: QuditRegister, images: dict) -> int:
    return max(
        _support_radius(register, i, op) for i, pair in images.items() for op in pair
    )


def identity_qca(n: int, p: int) -> QCAMap:
    reg = QuditRegister(n, p, "periodic")
    images = {
        i: (generalized_pauli(p, 1, 0, i), generalized_pauli(p, 0, 1, i))
        for i in range(n)
    }
    return QCAMap(reg, 0, images)


def qca_from_circuit(circuit: Circuit) -> QCAMap:
    """Images of every generator under conjugation by the circuit."""
    reg = circuit.register
    if reg.geometry != "periodic":
        reg = QuditRegister(reg.n, reg.p, "periodic")
    gates = list(circuit.gates())
    images = {}
    for i in range(reg.n):
        ix = conjugate_through_gates(generalized_pauli(reg.p, 1, 0, i), gates, 1e-12)
        iz = conjugate_through_gates(generalized_pauli(reg.p, 0, 1, i), gates, 1e-12)
        images[i] = (ix, iz)
    return QCAMap(reg, _measured_spread(reg, images), images)


def shift_qca(n: int, p: int, e: int) -> QCAMap:
    """X_i -> X_{i+e}, Z_i -> Z_{i+e} on the circle."""
    reg = QuditRegister(n, p, "periodic")
    images = {
        i: (
            generalized_pauli(p, 1, 0, (i + e) % n),
            generalized_pauli(p, 0, 1, (i + e) % n),
        )
        for i in range(n)
    }
    return QCAMap(reg, _measured_spread(reg, images), images)


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, name: str, ok: bool, detail: str = ""):
        self.checks.append(name)
        if not ok:
            self.failures.append(f"{name}: {detail}" if detail else name)


def _identity_like(op: LocalOperator) -> float:
    return np.abs(op.matrix - np.eye(op.dim)).max()


def _commutator_norm(a: LocalOperator, b: LocalOperator) -> float:
    if not set(a.support) & set(b.support):
        return 0.0
    ab = local_product(a, b)
    ba = local_product(b, a)
    return np.abs(ab.matrix - ba.matrix).max()


def verify_qca(qca: QCAMap, full_rank=None, tol: float = QCA_TOL) -> VerificationReport:
    """Check the automorphism relations of an image table.

    full_rank=None runs the generated-algebra rank check only when
    p^(2n) <= 1024; full_rank=True forces it up to p^(2n) <= 2^12.
    """
    rep = VerificationReport()
    n, p = qca.n, qca.p
    omega = np.exp(2j * np.pi / p)
    for i in range(n):
        ix, iz = qca.images[i]
        for name, op in (("X", ix), ("Z", iz)):
            powed = op
            for _ in range(p - 1):
                powed = local_product(powed, op)
            rep.record(
                f"order: image{name}^p = I at site {i}",
                _identity_like(powed) <= tol,
                f"defect {_identity_like(powed):.3g}",
            )
        zx = local_product(iz, ix)
        xz = local_product(ix, iz)
        dev = np.abs(zx.matrix - omega * xz.matrix).max()
        rep.record(
            f"weyl relation at site {i}", dev <= tol, f"defect {dev:.3g}"
        )
        r_i = max(_support_radius(qca.register, i, op) for op in (ix, iz))
        rep.record(
            f"support radius at site {i}",
            r_i <= qca.spread,
            f"radius {r_i} > declared {qca.spread}",
        )
    for i in range(n):
        for j in range(i + 1, n):
            worst = max(
                _commutator_norm(a, b)
                for a in qca.images[i]
                for b in qca.images[j]
            )
            rep.record(
                f"commutation sites {i},{j}", worst <= tol, f"defect {worst:.3g}"
            )
    dim_sq = p ** (2 * n)
    run_rank = full_rank if full_rank is not None else dim_sq <= 1024
    if run_rank:
        if dim_sq > 2**12:
            raise GuardError(f"rank check at dimension {dim_sq} exceeds guard")
        rows = np.empty((dim_sq, dim_sq), dtype=complex)
        t = 0
        for lab in _weyl_labels(p, list(range(n))):
            rows[t] = operator_to_global(_image_of_weyl(qca, lab), qca.register).ravel()
            t += 1
        rank = np.linalg.matrix_rank(rows, tol=1e-6)
        rep.record(
            "generated algebra has full rank",
            rank == dim_sq,
            f"rank {rank} != {dim_sq}",
        )
    return rep


# ---------------------------------------------------------------------------
# composition and inversion


def _weyl_labels(p: int, sites):
    labels = [()]
    for s in sites:
        labels = [l + ((s, a, b),) for l in labels for a in range(p) for b in range(p)]
    return labels


def _image_of_weyl(qca: QCAMap, lab) -> LocalOperator:
    """Image of a Weyl string prod_s X_s^a Z_s^b via the homomorphism."""
    p = qca.p
    out = None
    for s, a, b in lab:
        if a % p == 0 and b % p == 0:
            continue
        ix, iz = qca.images[s]
        cur = None
        for _ in range(a % p):
            cur = ix if cur is None else local_product(cur, ix)
        for _ in range(b % p):
            cur = iz if cur is None else local_product(cur, iz)
        out = cur if out is None else local_product(out, cur)
    if out is None:
        return LocalOperator([lab[0][0] if lab else 0], np.eye(p), p)
    return out


def map_operator(qca: QCAMap, op: LocalOperator, truncate_tol=1e-12) -> LocalOperator:
    """Push an arbitrary local operator through the automorphism.

    Expands op in the Weyl basis of its support; each basis string maps
    to the ordered product of generator images.
    """
    op = op.sorted()
    p = qca.p
    k = len(op.support)
    acc = None
    for lab in _weyl_labels(p, op.support):
        w = np.ones((1, 1), dtype=complex)
        for _, a, b in lab:
            w = np.kron(w, weyl_matrix(p, a, b))
        coeff = np.trace(w.conj().T @ op.matrix) / p**k
        if abs(coeff) < 1e-15:
            continue
        img = _image_of_weyl(qca, lab)
        if acc is None:
            acc = LocalOperator(img.support, coeff * img.matrix, p)
        else:
            union = sorted(set(acc.support) | set(img.support))
            acc = LocalOperator(
                union,
                extend_to_support(acc, union).matrix
                + coeff * extend_to_support(img, union).matrix,
                p,
            )
    if acc is None:
        raise ConsistencyError("operator expanded to zero")
    if truncate_tol is not None:
        acc = truncate_support(acc, truncate_tol)
    return acc


def compose_qca(f: QCAMap, g: QCAMap) -> QCAMap:
    """The automorphism f after g: images of g pushed through f."""
    if f.n != g.n or f.p != g.p:
        raise ConfigError("composition needs matching registers")
    images = {}
    for i in range(f.n):
        gx, gz = g.images[i]
        images[i] = (map_operator(f, gx), map_operator(f, gz))
    return QCAMap(f.register, _measured_spread(f.register, images), images)


def qca_equal(f: QCAMap, g: QCAMap, tol: float = QCA_TOL) -> bool:
    if f.n != g.n or f.p != g.p:
        return False
    for i in range(f.n):
        for a, b in zip(f.images[i], g.images[i]):
            union = sorted(set(a.support) | set(b.support))
            da = extend_to_support(a, union).matrix
            db = extend_to_support(b, union).matrix
            if np.abs(da - db).max() > tol:
                return False
    return True


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(v)))
    return v * (abs(v[j]) / v[j])


def reconstruct_unitary(register: QuditRegister, images) -> np.ndarray:
    """Skolem-Noether: the unitary realizing a generator-image table.

    images[i] = (imageX_i, imageZ_i) with supports inside the register.
    alpha(|0...0><0...0|) is rank one with range U|0...0>; the remaining
    columns follow from U|j> = prod_i imageX_i^{j_i} U|0>.  The result
    is fixed up to the global phase, which is set canonically.
    """
    n, p = register.n, register.p
    dim = register.dim
    if dim > MAX_BLOCK_DIM:
        raise GuardError(f"reconstruction at dimension {dim} exceeds {MAX_BLOCK_DIM}")
    proj = np.eye(dim, dtype=complex)
    for i in range(n):
        iz = images[i][1]
        acc = np.eye(iz.dim, dtype=complex)
        powed = np.eye(iz.dim, dtype=complex)
        for _ in range(p - 1):
            powed = powed @ iz.matrix
            acc += powed
        loc = LocalOperator(iz.support, acc / p, p)
        proj = proj @ operator_to_global(loc, register)
    j = int(np.argmax(np.linalg.norm(proj, axis=0)))
    u0 = proj[:, j]
    nu = np.linalg.norm(u0)
    if nu < 1e-8:
        raise ConsistencyError("image of the reference projector has no rank")
    u0 = _canonical_phase(u0 / nu)
    cols = u0.reshape(dim, 1)
    for i in range(n):
        ix = images[i][0]
        blocks = [cols]
        cur = cols
        for _ in range(p - 1):
            cur = np.stack(
                [apply_local_to_vector(cur[:, t], ix, register) for t in range(cur.shape[1])],
                axis=1,
            )
            blocks.append(cur)
        cols = np.concatenate(blocks, axis=1)
    U = cols
    defect = np.abs(U.conj().T @ U - np.eye(dim)).max()
    if defect > 1e-6:
        raise ConsistencyError(f"reconstructed unitary off by {defect:.3g}")
    u, _, vh = np.linalg.svd(U)
    return u @ vh


def invert_qca(f: QCAMap) -> QCAMap:
    """Inverse automorphism via global Skolem-Noether reconstruction."""
    reg = f.register
    if reg.dim > MAX_GLOBAL_DIM:
        raise GuardError(f"inversion at dimension {reg.dim} exceeds {MAX_GLOBAL_DIM}")
    U = reconstruct_unitary(reg, f.images)
    n, p = reg.n, reg.p
    images = {}
    for i in range(n):
        pair = []
        for a, b in ((1, 0), (0, 1)):
            G = operator_to_global(generalized_pauli(p, a, b, i), reg)
            A = U.conj().T @ G @ U
            # global index is little-endian, so site n-1 is the leading digit
            op = LocalOperator(list(range(n - 1, -1, -1)), A, p).sorted()
            pair.append(truncate_support(op, 1e-9))
        images[i] = tuple(pair)
    return QCAMap(reg, _measured_spread(reg, images), images)


# ---------------------------------------------------------------------------
# GNVW index via boundary support algebras


def _cell_slices(op: LocalOperator, cell, p: int):
    """Partial evaluations of op against basis functionals off the cell."""
    op = op.sorted()
    sup = op.support
    in_idx = [k for k, s in enumerate(sup) if s in cell]
    out_idx = [k for k, s in enumerate(sup) if s not in cell]
    if not in_idx:
        return []
    m = len(sup)
    tens = op.matrix.reshape((p,) * (2 * m))
    perm = (
        in_idx
        + out_idx
        + [m + k for k in in_idx]
        + [m + k for k in out_idx]
    )
    di = p ** len(in_idx)
    do = p ** len(out_idx)
    t = tens.transpose(perm).reshape(di, do, di, do)
    sites_in = [sup[k] for k in in_idx]
    out = []
    for mu in range(do):
        for nu in range(do):
            out.append(LocalOperator(sites_in, t[:, mu, :, nu], p))
    return out


def _algebra_dim(mats, dim: int, tol: float = 1e-7) -> int:
    """Dimension of the algebra generated by matrices (closure by products)."""
    basis_vecs = []
    basis_mats = []

    def add(m):
        v = m.ravel().astype(complex)
        nv0 = np.linalg.norm(v)
        if nv0 < 1e-12:
            return False
        v = v / nv0
        for b in basis_vecs:
            v = v - np.vdot(b, v) * b
        nv = np.linalg.norm(v)
        if nv <= tol:
            return False
        basis_vecs.append(v / nv)
        basis_mats.append(m / nv0)
        return True

    queue = list(mats)
    while queue:
        m = queue.pop()
        if add(m):
            new = basis_mats[-1]
            for other in basis_mats[:-1]:
                queue.append(new @ other)
                queue.append(other @ new)
            queue.append(new @ new)
        if len(basis_vecs) == dim * dim:
            break
    return len(basis_vecs)


def _boundary_dim(qca: QCAMap, source_sites, cell_sites) -> int:
    cell = set(cell_sites)
    cell_sorted = sorted(cell_sites)
    full = []
    for i in source_sites:
        for op in qca.images[i]:
            for sl in _cell_slices(op, cell, qca.p):
                full.append(extend_to_support(sl, cell_sorted).matrix)
    full.append(np.eye(qca.p ** len(cell_sorted), dtype=complex))
    return _algebra_dim(full, qca.p ** len(cell_sorted))


def _power_of(base: int, value: int) -> int:
    e = 0
    v = value
    while v > 1:
        if v % base:
            raise ConsistencyError(f"support algebra dimension {value} not a power of {base}")
        v //= base
        e += 1
    if value < 1:
        raise ConsistencyError(f"bad support algebra dimension {value}")
    return e


def gnvw_index(qca: QCAMap) -> Fraction:
    """The GNVW index as an exact rational power of p.

    Coarse-grains into supercells of max(1, r) sites and compares the
    support algebras of the left/right cell images across one boundary:
    ind^2 = dim S(alpha(A_L), A_R) / dim S(alpha(A_R), A_L).
    """
    n, p, r = qca.n, qca.p, qca.spread
    if n < 4 * (r + 1):
        raise ConfigError(f"index needs n >= 4(r+1) = {4 * (r + 1)}, got {n}")
    m = max(1, r)
    left = [(n - m + j) % n for j in range(m)]
    right = list(range(m))
    dim_l = _boundary_dim(qca, left, right)
    dim_r = _boundary_dim(qca, right, left)
    e_l = _power_of(p, dim_l)
    e_r = _power_of(p, dim_r)
    if (e_l - e_r) % 2:
        raise ConsistencyError(f"odd index exponent from dims {dim_l}/{dim_r}")
    e = (e_l - e_r) // 2
    return Fraction(p**e) if e >= 0 else Fraction(1, p**-e)


# ---------------------------------------------------------------------------
# staircases


@dataclass(frozen=True)
class TensorFactorization:
    """Per-site split p = p_a * p_b; the A factor is kept, B is pumped."""

    p_a: int
    p_b: int

    def __post_init__(self):
        if self.p_a < 1 or self.p_b < 1:
            raise ConfigError("factor dimensions must be >= 1")

    @property
    def p(self) -> int:
        return self.p_a * self.p_b


@dataclass
class StaircaseCircuit:
    """Sequential (non-layered) gate list realizing a QCA."""

    register: QuditRegister
    gates: list

    @property
    def gate_count(self) -> int:
        return len(self.gates)

    def as_qca(self) -> QCAMap:
        images = {}
        reg = self.register
        for i in range(reg.n):
            ix = conjugate_through_gates(
                generalized_pauli(reg.p, 1, 0, i), self.gates, 1e-12
            )
            iz = conjugate_through_gates(
                generalized_pauli(reg.p, 0, 1, i), self.gates, 1e-12
            )
            images[i] = (ix, iz)
        return QCAMap(reg, _measured_spread(reg, images), images)

    def inverse(self) -> "StaircaseCircuit":
        return StaircaseCircuit(
            self.register, [g.dagger() for g in reversed(self.gates)]
        )


def _staircase_once(n: int, p: int, gate_matrix: np.ndarray) -> list:
    """Right-shift staircase: the bond gate walks down from the top.

    Application order S_{n-2,n-1}, ..., S_{0,1} realizes the +1 shift of
    the pumped content; the wrap-around gate is omitted.
    """
    gates = []
    for i in range(n - 2, -1, -1):
        gates.append(LocalOperator([i, i + 1], gate_matrix, p))
    return gates


def compile_shift(n: int, p: int, e: int, factor: TensorFactorization = None) -> StaircaseCircuit:
    """Staircase of (n-1)|e| swaps realizing the shift by e.

    With a factorization, partial swaps move only the B tensor factor,
    leaving every A-factor operator in place.
    """
    reg = QuditRegister(n, p, "periodic")
    if factor is None:
        gate = swap_operator(p).matrix
    else:
        if factor.p != p:
            raise ConfigError(f"factorization {factor} does not multiply to {p}")
        gate = partial_swap_operator(factor.p_a, factor.p_b).matrix
    gates = []
    for _ in range(abs(e)):
        gates.extend(_staircase_once(n, p, gate))
    stair = StaircaseCircuit(reg, gates)
    if e < 0:
        stair = stair.inverse()
    return stair


def _factor_schmidt(factor: TensorFactorization, matrix: np.ndarray):
    """Operator-Schmidt split of a single-site operator across A (x) B."""
    pa, pb = factor.p_a, factor.p_b
    t = matrix.reshape(pa, pb, pa, pb).transpose(0, 2, 1, 3).reshape(pa * pa, pb * pb)
    u, s, vh = np.linalg.svd(t, full_matrices=False)
    terms = []
    for j in range(len(s)):
        if s[j] < 1e-13:
            continue
        a = (u[:, j] * s[j]).reshape(pa, pa)
        b = vh[j].reshape(pb, pb)
        terms.append((a, b))
    return terms


def beta_subalgebra_qca(n: int, factor: TensorFactorization, e: int = 1) -> QCAMap:
    """Directly constructed beta: A factors fixed, B factors shifted by e."""
    p = factor.p
    reg = QuditRegister(n, p, "periodic")
    eye_a = np.eye(factor.p_a)
    eye_b = np.eye(factor.p_b)
    images = {}
    for i in range(n):
        pair = []
        for a_pow, b_pow in ((1, 0), (0, 1)):
            w = weyl_matrix(p, a_pow, b_pow)
            acc = None
            for a_m, b_m in _factor_schmidt(factor, w):
                j = (i + e) % n
                if j == i:
                    term = LocalOperator([i], np.kron(a_m, b_m), p)
                else:
                    lo, hi = (i, j) if i < j else (j, i)
                    if i < j:
                        mat = np.kron(np.kron(a_m, eye_b), np.kron(eye_a, b_m))
                    else:
                        mat = np.kron(np.kron(eye_a, b_m), np.kron(a_m, eye_b))
                    term = LocalOperator([lo, hi], mat, p)
                if acc is None:
                    acc = term
                else:
                    union = sorted(set(acc.support) | set(term.support))
                    acc = LocalOperator(
                        union,
                        extend_to_support(acc, union).matrix
                        + extend_to_support(term, union).matrix,
                        p,
                    )
            pair.append(truncate_support(acc, 1e-12))
        images[i] = tuple(pair)
    return QCAMap(reg, _measured_spread(reg, images), images)


def pump_subalgebra(n: int, factor: TensorFactorization) -> StaircaseCircuit:
    """Staircase of n-1 partial swaps pumping the B factor by one site."""
    return compile_shift(n, factor.p, 1, factor=factor)


# ---------------------------------------------------------------------------
# halfspace truncation, bands, and the two-layer factorization


def is_translation_invariant(circuit: Circuit) -> bool:
    """True if some cyclic shift maps every layer onto itself."""
    n = circuit.register.n
    for period in range(1, n):
        if n % period:
            continue
        ok = True
        for layer in circuit.layers:
            table = {tuple(sorted(g.support)): g.sorted() for g in layer}
            for g in layer:
                shifted = tuple(sorted((s + period) % n for s in g.support))
                h = table.get(shifted)
                if h is None:
                    ok = False
                    break
                moved = LocalOperator(
                    [(s + period) % n for s in g.support], g.matrix, g.p
                ).sorted()
                if not np.allclose(moved.matrix, h.matrix, atol=1e-12):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return True
    return False


def truncate_halfspace(ti_circuit: Circuit, c: int) -> Circuit:
    """zeta_c: drop every gate whose support touches {z >= c}."""
    if not is_translation_invariant(ti_circuit):
        warnings.warn("truncating a circuit that is not translation invariant")
    layers = []
    for layer in ti_circuit.layers:
        kept = [g for g in layer if all(s < c for s in g.support)]
        layers.append(kept)
    return Circuit(ti_circuit.register, layers)


@dataclass
class BandQCA:
    """tau_{c,c'} = zeta_{c'} o zeta_c^{-1}, compressed to one band gate."""

    register: QuditRegister
    c: int
    c_prime: int
    spread: int
    gate: LocalOperator  # unitary on the band sites

    @property
    def band_sites(self):
        return list(self.gate.support)

    def image(self, site: int, which: str) -> LocalOperator:
        a, b = (1, 0) if which == "X" else (0, 1)
        gen = generalized_pauli(self.register.p, a, b, site)
        if site not in self.gate.support:
            return gen
        return truncate_support(conjugate_through_gates(gen, [self.gate]), 1e-12)


def _extract_block(register: QuditRegister, sites, image_pairs) -> LocalOperator:
    """Block unitary on an ordered site run from its generator images.

    image_pairs[k] are the images of X, Z at sites[k]; all supports must
    stay inside the run, which is re-indexed as its own register.
    """
    w = len(sites)
    p = register.p
    if p**w > MAX_BLOCK_DIM:
        raise GuardError(f"block of width {w} exceeds the dense guard")
    pos = {s: k for k, s in enumerate(sites)}
    sub = QuditRegister(w, p)
    sub_images = []
    for k in range(w):
        pair = []
        for op in image_pairs[k]:
            if not set(op.support) <= set(sites):
                raise ConsistencyError(
                    f"block image support {op.support} leaves the run {sites}"
                )
            relabeled = LocalOperator([pos[s] for s in op.support], op.matrix, p).sorted()
            pair.append(relabeled)
        sub_images.append(tuple(pair))
    U = reconstruct_unitary(sub, sub_images)
    # the reconstructed matrix is little-endian in the run positions;
    # LocalOperator wants the leading support site most significant
    return LocalOperator(list(reversed(sites)), U, p).sorted()


def band_qca(ti_circuit: Circuit, c: int, c_prime: int, tight: bool = False) -> BandQCA:
    """The band automorphism between two halfspace truncations.

    The default spacing c + 5r' < c' applies; tight mode relaxes it to
    c + 2r' < c' for desk-scale registers, validated by the same checks.
    """
    reg = ti_circuit.register
    rp = ti_circuit.depth
    min_gap = 2 * rp if tight else 5 * rp
    if not c + min_gap < c_prime:
        raise ConfigError(f"band needs c + {min_gap} < c', got [{c}, {c_prime})")
    zeta_c = truncate_halfspace(ti_circuit, c)
    zeta_cp = truncate_halfspace(ti_circuit, c_prime)
    gates = zeta_c.inverse_gates() + list(zeta_cp.gates())
    lo = max(c - rp, 0)
    sites = list(range(lo, c_prime))
    pairs = []
    p = reg.p
    for s in sites:
        pair = []
        for a, b in ((1, 0), (0, 1)):
            img = conjugate_through_gates(
                generalized_pauli(p, a, b, s), gates, 1e-12
            )
            pair.append(img)
        pairs.append(tuple(pair))
    gate = _extract_block(reg, sites, pairs)
    band = BandQCA(reg, c, c_prime, rp, gate)
    # the band must reproduce zeta on the deep interior [c, c' - r');
    # at c = 0 the circle is cut there, so the first r' sites see the
    # removed wrap-around gates and are excluded from the comparison
    zeta = qca_from_circuit(ti_circuit)
    lo_check = c if c > 0 else rp
    for s in range(lo_check, c_prime - rp):
        for which in ("X", "Z"):
            a = band.image(s, which)
            bimg = zeta.image(s, which)
            union = sorted(set(a.support) | set(bimg.support))
            dev = np.abs(
                extend_to_support(a, union).matrix
                - extend_to_support(bimg, union).matrix
            ).max()
            if dev > QCA_TOL:
                raise ConsistencyError(
                    f"band disagrees with zeta at site {s}: {dev:.3g}"
                )
    return band


def _circular_runs(fixed, n: int):
    """Maximal runs of non-fixed sites in circular order."""
    if all(fixed):
        return []
    if not any(fixed):
        return [list(range(n))]
    start = next(i for i in range(n) if fixed[i])
    runs = []
    cur = []
    for k in range(1, n + 1):
        i = (start + k) % n
        if fixed[i]:
            if cur:
                runs.append(cur)
                cur = []
        else:
            cur.append(i)
    if cur:
        runs.append(cur)
    return runs


def two_layer_decompose(ti_circuit: Circuit, n: int, tight: bool = False):
    """zeta = mu1 o mu2 with each layer a product of disjoint blocks.

    mu2 collects the band automorphisms tau_{Tj, Tj+H}; mu1 = zeta o
    mu2^{-1} falls apart into the complementary blocks.  Spacing is
    T = 20r', H = 10r' by default, or T = 6r', H = 3r' in tight mode.
    """
    reg = ti_circuit.register
    if reg.n != n:
        raise ConfigError(f"register has {reg.n} sites, expected {n}")
    rp = ti_circuit.depth
    if rp == 0:
        return [], []
    period = (6 if tight else 20) * rp
    half = period // 2
    if n % period or n < 2 * period:
        raise ConfigError(
            f"two-layer spacing needs n a multiple of {period}, n >= {2 * period}"
        )
    if not is_translation_invariant(ti_circuit):
        warnings.warn("two-layer factorization of a non-TI circuit")
    blocks2 = []
    for j in range(n // period):
        tau = band_qca(ti_circuit, period * j, period * j + half, tight=tight)
        blocks2.append(tau.gate)
    used = [set(b.support) for b in blocks2]
    for a in range(len(used)):
        for b in range(a + 1, len(used)):
            if used[a] & used[b]:
                raise ConsistencyError("mu2 blocks overlap")

    # mu1 = zeta o mu2^{-1}: conjugate through the inverted blocks, then zeta
    mu1_gates = [b.dagger() for b in blocks2] + list(ti_circuit.gates())
    p = reg.p
    images = {}
    fixed = []
    for i in range(n):
        pair = []
        for a, b in ((1, 0), (0, 1)):
            img = conjugate_through_gates(
                generalized_pauli(p, a, b, i), mu1_gates, 1e-12
            )
            pair.append(img)
        images[i] = tuple(pair)
        is_fixed = all(
            op.support == [i]
            and np.abs(op.matrix - weyl_matrix(p, a, b)).max() < 1e-10
            for op, (a, b) in zip(pair, ((1, 0), (0, 1)))
        )
        fixed.append(is_fixed)
    runs = _circular_runs(fixed, n)
    blocks1 = []
    for run in runs:
        # pad the run with the union of image supports, circular-sorted
        support = set()
        for i in run:
            for op in images[i]:
                support |= set(op.support)
        if not set(run) <= support:
            support |= set(run)
        anchor = run[0]
        ordered = sorted(support, key=lambda s: (s - anchor) % n)
        pairs = [images[s] for s in ordered]
        blocks1.append(_extract_block(reg, ordered, pairs))
    used1 = [set(b.support) for b in blocks1]
    for a in range(len(used1)):
        for b in range(a + 1, len(used1)):
            if used1[a] & used1[b]:
                raise ConsistencyError("mu1 blocks overlap")

    # composition check: mu2 then mu1 reproduces zeta on all generators
    seq = blocks2 + blocks1
    zeta_gates = list(ti_circuit.gates())
    for i in range(n):
        for a, b in ((1, 0), (0, 1)):
            gen = generalized_pauli(p, a, b, i)
            got = conjugate_through_gates(gen, seq, 1e-12)
            want = conjugate_through_gates(gen, zeta_gates, 1e-12)
            union = sorted(set(got.support) | set(want.support))
            dev = np.abs(
                extend_to_support(got, union).matrix
                - extend_to_support(want, union).matrix
            ).max()
            if dev > QCA_TOL:
                raise ConsistencyError(
                    f"two-layer composition off at site {i}: {dev:.3g}"
                )
    return blocks1, blocks2


# ---------------------------------------------------------------------------
# end-to-end compiler


@dataclass
class CompileSpec:
    """Decomposed QCA input: factor shifts, a pump, and a TI circuit part."""

    n: int
    p: int
    shifts: list = field(default_factory=list)  # (TensorFactorization or None, e)
    pump: TensorFactorization = None
    circuit: Circuit = None
    tight: bool = True


def compile_qca(spec: CompileSpec, verify: bool = True) -> StaircaseCircuit:
    """Concatenate the staircase compilations of a decomposed QCA."""
    reg = QuditRegister(spec.n, spec.p, "periodic")
    gates = []
    expected = identity_qca(spec.n, spec.p)
    for factor, e in spec.shifts:
        if e == 0:
            continue
        stair = compile_shift(spec.n, spec.p, e, factor=factor)
        gates.extend(stair.gates)
        if factor is None:
            part = shift_qca(spec.n, spec.p, e)
        else:
            part = beta_subalgebra_qca(spec.n, factor, e)
        expected = compose_qca(part, expected)
    if spec.pump is not None:
        stair = pump_subalgebra(spec.n, spec.pump)
        gates.extend(stair.gates)
        expected = compose_qca(beta_subalgebra_qca(spec.n, spec.pump, 1), expected)
    if spec.circuit is not None:
        if spec.circuit.register.n != spec.n or spec.circuit.register.p != spec.p:
            raise ConfigError("circuit part does not match the compile register")
        if spec.circuit.depth > 0:
            mu1, mu2 = two_layer_decompose(spec.circuit, spec.n, tight=spec.tight)
            gates.extend(mu2)
            gates.extend(mu1)
            expected = compose_qca(qca_from_circuit(spec.circuit), expected)
    stair = StaircaseCircuit(reg, gates)
    if verify:
        got = stair.as_qca()
        if not qca_equal(got, expected, 1e-8):
            raise ConsistencyError("compiled staircase deviates from the target QCA")
    return stair
