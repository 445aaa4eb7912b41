"""Pauli transfer matrices.

Convention: ``G[i, j] = tr(P_i G(P_j)) / 2**n`` and a state is
``rho = 2**-n sum_i s_i P_i``, so ``s' = G @ s`` and sequential channels
compose as ``G2 @ G1``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import paulis
from .errors import DimensionError, ValidationError


def _n_from_dim(size: int, base: int) -> int:
    n = int(round(np.log(size) / np.log(base)))
    if n < 1 or base ** n != size:
        raise DimensionError(f"size {size} is not a power of {base}")
    return n


@dataclass(frozen=True, eq=False)
class Ptm:
    """Real 4**n x 4**n transfer matrix in the canonical Pauli order."""

    m: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"PTM must be square, got shape {m.shape}")
        n = _n_from_dim(m.shape[0], 4)
        if self.n and self.n != n:
            raise DimensionError(f"PTM shape {m.shape} does not match n={self.n}")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    @classmethod
    def identity(cls, n: int) -> "Ptm":
        return cls(np.eye(4 ** n))

    def __matmul__(self, other: "Ptm") -> "Ptm":
        return compose(self, other)

    def __array__(self, dtype=None, copy=None):
        return self.m if dtype is None else self.m.astype(dtype)

    def allclose(self, other: "Ptm", atol: float = 1e-12) -> bool:
        return self.n == other.n and np.allclose(self.m, other.m, rtol=0, atol=atol)

    def to_json(self) -> dict:
        return {"n": self.n, "basis": paulis.default_basis(self.n),
                "rows": [[float(x) for x in row] for row in self.m]}

    @classmethod
    def from_json(cls, data: dict) -> "Ptm":
        n = int(data["n"])
        basis = data.get("basis", paulis.default_basis(n))
        m = np.asarray(data["rows"], dtype=float)
        if basis != paulis.default_basis(n):
            # permute from the stated basis into the canonical one
            src = paulis.labels(n, basis)
            perm = np.array([paulis.index_of(lab) for lab in src])
            out = np.empty_like(m)
            out[np.ix_(perm, perm)] = m
            m = out
        return cls(m, n)

    def to_csv(self) -> str:
        labs = paulis.labels(self.n)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", *labs])
        for lab, row in zip(labs, self.m):
            w.writerow([lab, *(repr(float(x)) for x in row)])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class BlochVector:
    """Generalized Bloch vector with ``s[0] = 1``."""

    s: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        if s.ndim != 1:
            raise DimensionError("Bloch vector must be one-dimensional")
        n = _n_from_dim(s.shape[0], 4)
        if self.n and self.n != n:
            raise DimensionError(f"Bloch vector length {s.shape[0]} does not match n={self.n}")
        if abs(s[0] - 1.0) > 1e-12:
            raise ValidationError(f"s_0 must be 1 (unit trace), got {s[0]}")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "n", n)

    def __getitem__(self, key):
        if isinstance(key, str):
            key = paulis.index_of(key)
        return self.s[key]

    def density_matrix(self) -> np.ndarray:
        mats = paulis.pauli_matrices(self.n)
        return np.einsum("k,kab->ab", self.s, mats) / 2 ** self.n

    @classmethod
    def from_density_matrix(cls, rho: np.ndarray) -> "BlochVector":
        rho = np.asarray(rho, dtype=complex)
        n = _n_from_dim(rho.shape[0], 2)
        s = np.einsum("kab,ba->k", paulis.pauli_matrices(n), rho).real
        return cls(s, n)

    def to_json(self) -> dict:
        return {"n": self.n, "basis": paulis.default_basis(self.n), "s": [float(x) for x in self.s]}

    @classmethod
    def from_json(cls, data: dict) -> "BlochVector":
        return cls(np.asarray(data["s"], dtype=float), int(data["n"]))


@dataclass(frozen=True, eq=False)
class PauliChannel:
    """Pauli channel with error probabilities ``p`` and fidelities ``f = W p``."""

    p: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        n = _n_from_dim(p.shape[0], 4)
        if np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-10:
            raise ValidationError("Pauli channel probabilities must be >= 0 and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "n", n)

    @property
    def f(self) -> np.ndarray:
        return paulis.walsh_matrix(self.n) @ self.p

    @classmethod
    def from_fidelities(cls, f: np.ndarray) -> "PauliChannel":
        f = np.asarray(f, dtype=float)
        n = _n_from_dim(f.shape[0], 4)
        return cls(paulis.walsh_matrix(n) @ f / 4 ** n, n)

    def ptm(self) -> Ptm:
        return Ptm(np.diag(self.f))


def _check_same(*items) -> int:
    ns = {it.n for it in items}
    if len(ns) != 1:
        raise DimensionError(f"qubit counts differ: {sorted(ns)}")
    return ns.pop()


def _superop_to_ptm(kraus: Sequence[np.ndarray], n: int) -> np.ndarray:
    dim = 2 ** n
    if n <= 4:
        mats = paulis.pauli_matrices(n)
        out = np.zeros((4 ** n, 4 ** n))
        for k in kraus:
            # tr(P_i K P_j K^dag) for all i, j
            kp = np.einsum("ab,jbc->jac", k, mats)
            kpk = np.einsum("jac,dc->jad", kp, k.conj())
            out += np.einsum("iab,jba->ij", mats, kpk).real
        return out / dim
    # n in {5, 6}: vectorized superoperator route
    t = np.stack([paulis.pauli_matrix(j, n).reshape(-1) for j in range(4 ** n)], axis=1)
    sup = sum(np.kron(k, k.conj()) for k in kraus)
    return (t.conj().T @ sup @ t).real / dim


def ptm_from_unitary(u: np.ndarray, atol: float = 1e-10) -> Ptm:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DimensionError("unitary must be square")
    n = _n_from_dim(u.shape[0], 2)
    if not np.allclose(u.conj().T @ u, np.eye(2 ** n), rtol=0, atol=atol):
        raise ValidationError("matrix is not unitary")
    return Ptm(_superop_to_ptm([u], n))


def ptm_from_kraus(kraus: Iterable[np.ndarray], atol: float = 1e-10) -> Ptm:
    kraus = [np.asarray(k, dtype=complex) for k in kraus]
    if not kraus:
        raise ValidationError("need at least one Kraus operator")
    n = _n_from_dim(kraus[0].shape[0], 2)
    total = sum(k.conj().T @ k for k in kraus)
    if not np.allclose(total, np.eye(2 ** n), rtol=0, atol=atol):
        raise ValidationError("Kraus operators are not trace preserving")
    return Ptm(_superop_to_ptm(kraus, n))


def rzz_unitary(theta: float) -> np.ndarray:
    """exp(-i theta ZZ / 2)."""
    zz = np.array([1, -1, -1, 1], dtype=complex)
    return np.diag(np.exp(-0.5j * theta * zz))


def rotation_block(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def rzz_ptm(theta: float) -> Ptm:
    """Closed form: identity on the commuting sector, rotations on the rest."""
    m = np.eye(16)
    for i in range(8, 16, 2):
        m[i:i + 2, i:i + 2] = rotation_block(theta)
    return Ptm(m)


def pauli_ptm(p, n: int | None = None) -> Ptm:
    """PTM of conjugation by a Pauli: diagonal commutation signs."""
    p = paulis.as_pauli(p, n)
    return Ptm(np.diag(paulis.walsh_matrix(p.n)[p.index]))


def compose(g2: Ptm, g1: Ptm) -> Ptm:
    """Channel ``g1`` followed by ``g2``."""
    _check_same(g2, g1)
    return Ptm(g2.m @ g1.m)


def mix(terms: Iterable[tuple[float, Ptm]], quasi: bool = False) -> Ptm:
    terms = list(terms)
    if not terms:
        raise ValidationError("mix needs at least one term")
    _check_same(*(g for _, g in terms))
    weights = np.array([w for w, _ in terms], dtype=float)
    if not quasi:
        if np.any(weights < 0) or abs(weights.sum() - 1) > 1e-12:
            raise ValidationError("mixture weights must be non-negative and sum to 1 "
                                  "(pass quasi=True for signed combinations)")
    return Ptm(sum(w * g.m for w, g in terms))


def apply(g: Ptm, s: BlochVector) -> BlochVector:
    _check_same(g, s)
    out = g.m @ s.s
    return BlochVector(out, g.n)


# ---------------------------------------------------------------------------
# twirling

FULL = "FULL"
COMMUTING = "COMMUTING"
ANTICOMMUTING = "ANTICOMMUTING"


def twirl_set(subset, n: int = 2, relative_to: str = "ZZ") -> np.ndarray:
    """Resolve a twirl subset to Pauli indices.

    ``subset`` is FULL, COMMUTING, ANTICOMMUTING (relative to the Pauli
    ``relative_to``) or an explicit iterable of indices / labels.
    """
    if isinstance(subset, str):
        if subset == FULL:
            return np.arange(4 ** n)
        ref = paulis.index_of(relative_to)
        if len(relative_to) != n:
            raise DimensionError(f"reference Pauli {relative_to!r} is not an {n}-qubit label")
        row = paulis.walsh_matrix(n)[ref]
        if subset == COMMUTING:
            return np.flatnonzero(row > 0)
        if subset == ANTICOMMUTING:
            return np.flatnonzero(row < 0)
        raise ValidationError(f"unknown twirl subset {subset!r}")
    idx = np.array([paulis.index_of(s) if isinstance(s, str) else int(s) for s in subset],
                   dtype=np.int64)
    if idx.size == 0:
        raise ValidationError("twirl subset is empty")
    if np.any((idx < 0) | (idx >= 4 ** n)):
        raise DimensionError("twirl subset index out of range")
    return idx


def twirl_mask(subset, n: int = 2, relative_to: str = "ZZ") -> np.ndarray:
    """Entry-wise factor applied by the twirl: mean over k of W_ki W_kj."""
    idx = twirl_set(subset, n, relative_to)
    rows = paulis.walsh_matrix(n)[idx]
    return rows.T @ rows / len(idx)


def twirl(g: Ptm, subset=FULL, relative_to: str = "ZZ") -> Ptm:
    """Average of ``PTM(P) g PTM(P)`` over the Paulis in ``subset``."""
    idx = twirl_set(subset, g.n, relative_to)
    w = paulis.walsh_matrix(g.n)
    acc = np.zeros_like(g.m)
    for k in idx:
        acc += w[k][:, None] * g.m * w[k][None, :]
    return Ptm(acc / len(idx))


# ---------------------------------------------------------------------------
# validity


@dataclass(frozen=True)
class CptpReport:
    trace_preserving: bool
    completely_positive: bool
    min_choi_eigenvalue: float

    @property
    def cptp(self) -> bool:
        return self.trace_preserving and self.completely_positive


def choi_from_ptm(g: Ptm) -> np.ndarray:
    """Unit-trace Choi matrix ``4**-n sum_ij G_ij P_j^T (x) P_i``.

    Input system first; for a trace-preserving map the trace is 1.
    """
    n = g.n
    if n > 4:
        raise DimensionError("Choi construction is limited to n <= 4")
    mats = paulis.pauli_matrices(n)
    # sum_ij G_ij P_j^T (x) P_i = sum_j P_j^T (x) (sum_i G_ij P_i)
    out_ops = np.einsum("ij,iab->jab", g.m, mats)
    choi = sum(np.kron(mats[j].T, out_ops[j]) for j in range(4 ** n))
    return choi / 4 ** n


def is_cptp(g: Ptm, tol: float = 1e-9) -> CptpReport:
    e0 = np.zeros(4 ** g.n)
    e0[0] = 1.0
    tp = bool(np.max(np.abs(g.m[0] - e0)) <= tol)
    choi = choi_from_ptm(g)
    choi = 0.5 * (choi + choi.conj().T)
    lam = float(np.linalg.eigvalsh(choi).min())
    return CptpReport(tp, lam >= -tol, lam)


# ---------------------------------------------------------------------------
# states and fixtures

_BLOCH_1Q = {  # (I, X, Y, Z) components of the +1 eigenstate
    1: np.array([1.0, 1.0, 0.0, 0.0]),
    2: np.array([1.0, 0.0, 1.0, 0.0]),
    3: np.array([1.0, 0.0, 0.0, 1.0]),
}


def product_bloch(factors: Sequence[np.ndarray]) -> BlochVector:
    """Bloch vector of a product state from single-qubit (I,X,Y,Z) vectors."""
    n = len(factors)
    d = paulis.digits(n)
    s = np.ones(4 ** n)
    for q, b in enumerate(factors):
        s = s * np.asarray(b, dtype=float)[d[:, q]]
    return BlochVector(s, n)


def pauli_eigenstate(p, eigenvalue: int = 1, n: int | None = None) -> BlochVector:
    """Separable eigenstate of ``P_p``; identity factors get the +Z fiducial.

    A -1 eigenvalue flips the first non-identity factor.
    """
    p = paulis.as_pauli(p, n)
    if p.index == 0:
        raise ValidationError("the identity has no nontrivial eigenstate")
    if eigenvalue not in (1, -1):
        raise ValidationError("eigenvalue must be +1 or -1")
    factors = []
    flipped = eigenvalue == 1
    for c in paulis.digits(p.n)[p.index]:
        b = _BLOCH_1Q[int(c) if c else 3].copy()
        if c and not flipped:
            b[1:] *= -1
            flipped = True
        factors.append(b)
    return product_bloch(factors)


def random_cptp_ptm(rng: np.random.Generator, n: int = 2, kraus_rank: int = 4) -> Ptm:
    """Random channel from a Gaussian Stinespring isometry."""
    return ptm_from_kraus(random_kraus(rng, n, kraus_rank))


def random_kraus(rng: np.random.Generator, n: int = 2, kraus_rank: int = 4) -> list[np.ndarray]:
    """Kraus operators cut from a random isometry (QR of a complex Gaussian)."""
    dim = 2 ** n
    z = rng.normal(size=(kraus_rank * dim, dim)) + 1j * rng.normal(size=(kraus_rank * dim, dim))
    q, _ = np.linalg.qr(z)
    return [q[k * dim:(k + 1) * dim] for k in range(kraus_rank)]


def random_pauli_channel(rng: np.random.Generator, n: int = 2, strength: float = 0.05) -> PauliChannel:
    """Pauli channel with identity weight ``1 - strength`` and random errors."""
    p = rng.random(4 ** n)
    p[0] = 0.0
    p *= strength / p.sum()
    p[0] = 1.0 - strength
    return PauliChannel(p, n)
