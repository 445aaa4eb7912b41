"""Pauli shaping: turn an implemented channel G into a target A = C (.) G.

The characteristic matrix C and the quasi-probability matrix Q are Walsh
duals, ``Q = W C W / 16**n`` and ``C = W Q W``. Sampling the Pauli pair
(P_i before, P_j after... in circuit order P_j, G, P_i) with probability
``|Q_ij| / gamma`` and weighting by ``gamma * sign(Q_ij)`` realizes A in
expectation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import paulis
from .errors import DimensionError, SingularError, UnreachableTarget, ValidationError
from .ptm import Ptm, twirl_set

ZERO_THRESHOLD = 1e-10
DROP_THRESHOLD = 1e-15


@dataclass(frozen=True, eq=False)
class CharacteristicMatrix:
    c: np.ndarray
    free_mask: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        mask = np.array(self.free_mask, dtype=bool)
        if c.shape != mask.shape or c.shape[0] != c.shape[1]:
            raise DimensionError("characteristic matrix and mask shapes differ")
        n = int(round(np.log(c.shape[0]) / np.log(4)))
        c.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "free_mask", mask)
        object.__setattr__(self, "n", n)

    def with_free(self, values) -> "CharacteristicMatrix":
        """Copy with the free entries replaced (scalar or full matrix)."""
        c = np.array(self.c)
        vals = np.broadcast_to(np.asarray(values, dtype=float), c.shape)
        c[self.free_mask] = vals[self.free_mask]
        return CharacteristicMatrix(c, self.free_mask)

    def apply(self, g: Ptm) -> Ptm:
        return Ptm(self.c * g.m)


@dataclass(frozen=True, eq=False)
class QuasiProbMatrix:
    q: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionError("quasi-probability matrix must be square")
        n = int(round(np.log(q.shape[0]) / np.log(4)))
        if 4 ** n != q.shape[0]:
            raise DimensionError("quasi-probability matrix must be 4**n square")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "n", n)

    @property
    def gamma(self) -> float:
        return float(np.abs(self.q).sum())

    @property
    def total(self) -> float:
        return float(self.q.sum())

    def characteristic(self) -> np.ndarray:
        w = paulis.walsh_matrix(self.n)
        return w @ self.q @ w


def characteristic_matrix(target: Ptm, actual: Ptm, free_fill="zero",
                          threshold: float = ZERO_THRESHOLD) -> CharacteristicMatrix:
    """C with ``C_ij = A_ij / G_ij`` wherever G is structurally nonzero.

    Entries where both vanish are free; ``free_fill`` is ``"zero"``, ``"one"``,
    a scalar, or a full matrix whose free entries are used.
    """
    if target.n != actual.n:
        raise DimensionError("target and actual PTMs differ in qubit count")
    a, g = target.m, actual.m
    g_zero = np.abs(g) <= threshold
    a_zero = np.abs(a) <= threshold
    bad = np.argwhere(g_zero & ~a_zero)
    if bad.size:
        raise UnreachableTarget(bad)
    c = np.zeros_like(a)
    np.divide(a, g, out=c, where=~g_zero)
    free = g_zero & a_zero
    if isinstance(free_fill, str):
        if free_fill.lower() not in ("zero", "one"):
            raise ValidationError(f"unknown free_fill policy {free_fill!r}")
        fill = 0.0 if free_fill.lower() == "zero" else 1.0
    else:
        fill = free_fill
    return CharacteristicMatrix(c, free).with_free(fill)


def quasi_probs(c) -> QuasiProbMatrix:
    cm = c.c if isinstance(c, CharacteristicMatrix) else np.asarray(c, dtype=float)
    n = int(round(np.log(cm.shape[0]) / np.log(4)))
    w = paulis.walsh_matrix(n)
    return QuasiProbMatrix(w @ cm @ w / 16 ** n)


def identity_quasi(n: int = 2) -> QuasiProbMatrix:
    q = np.zeros((4 ** n, 4 ** n))
    q[0, 0] = 1.0
    return QuasiProbMatrix(q)


def twirl_quasi(subset, n: int = 2, relative_to: str = "ZZ") -> QuasiProbMatrix:
    """Plan that conjugates by a uniformly random Pauli of ``subset``."""
    idx = twirl_set(subset, n, relative_to)
    q = np.zeros((4 ** n, 4 ** n))
    q[idx, idx] = 1.0 / len(idx)
    return QuasiProbMatrix(q)


def clifford_quasi_probs(sigma, v, f, alpha: float) -> QuasiProbMatrix:
    """Closed-form Q for a Clifford with Pauli noise, target U diag(f)**(1+alpha).

    ``W q = f**alpha`` and ``Q_ij = 4**-n q[sigma(i) (+) j]``. The signs ``v``
    cancel between target and actual and are accepted only for completeness.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    f = np.asarray(f, dtype=float)
    size = f.shape[0]
    n = int(round(np.log(size) / np.log(4)))
    if sorted(sigma.tolist()) != list(range(size)):
        raise ValidationError("sigma must be a permutation")
    if np.asarray(v).shape != sigma.shape:
        raise DimensionError("sign vector length mismatch")
    if alpha < 0 and np.any(f == 0):
        raise SingularError("zero fidelity cannot be inverted")
    if np.any(f <= 0) and alpha != int(alpha):
        raise ValidationError("fractional powers need positive fidelities")
    w = paulis.walsh_matrix(n)
    q = w @ f ** alpha / size
    prod = paulis.product_table(n)
    return QuasiProbMatrix(q[prod[sigma[:, None], np.arange(size)[None, :]]] / size)


def convolve(q1: QuasiProbMatrix, q2: QuasiProbMatrix) -> QuasiProbMatrix:
    """``Q_ij = sum_kl q2_kl q1[i (+) k, j (+) l]``: Q of C1 (.) C2."""
    if q1.n != q2.n:
        raise DimensionError("cannot convolve plans of different qubit counts")
    prod = paulis.product_table(q1.n)
    out = np.zeros_like(q1.q)
    for k, l in zip(*np.nonzero(q2.q)):
        out += q2.q[k, l] * q1.q[np.ix_(prod[:, k], prod[:, l])]
    return QuasiProbMatrix(out)


def shaped_ptm(q: QuasiProbMatrix, g: Ptm) -> Ptm:
    """Aggregate channel ``sum_ij Q_ij PTM(P_i) G PTM(P_j)`` by explicit sandwiches."""
    if q.n != g.n:
        raise DimensionError("plan and PTM differ in qubit count")
    w = paulis.walsh_matrix(g.n)
    acc = np.zeros_like(g.m)
    for i, j in zip(*np.nonzero(q.q)):
        acc += q.q[i, j] * (w[i][:, None] * g.m * w[j][None, :])
    return Ptm(acc)


@dataclass(frozen=True, eq=False)
class ShapingPlan:
    """Sampling table for a quasi-probability matrix.

    Each entry: Pauli ``j`` before the gate, Pauli ``i`` after it, drawn with
    ``prob`` and weighted by ``weight``.
    """

    n: int
    i: np.ndarray
    j: np.ndarray
    prob: np.ndarray
    weight: np.ndarray
    gamma: float
    dropped_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_quasi(cls, q: QuasiProbMatrix, drop: float = DROP_THRESHOLD,
                   meta: dict | None = None) -> "ShapingPlan":
        mag = np.abs(q.q)
        keep = mag >= drop
        dropped = float(mag[~keep].sum())
        ii, jj = np.nonzero(keep)
        vals = q.q[ii, jj]
        gamma = float(np.abs(vals).sum())
        if gamma == 0:
            raise ValidationError("quasi-probability matrix is empty")
        return cls(q.n, ii, jj, np.abs(vals) / gamma, gamma * np.sign(vals), gamma,
                   dropped, dict(meta or {}))

    def quasi(self) -> QuasiProbMatrix:
        q = np.zeros((4 ** self.n, 4 ** self.n))
        q[self.i, self.j] = self.prob * self.weight
        return QuasiProbMatrix(q)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Entry indices into the table."""
        return rng.choice(len(self.prob), size=size, p=self.prob)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "basis": paulis.default_basis(self.n),
            "gamma": self.gamma,
            "dropped_mass": self.dropped_mass,
            "meta": self.meta,
            "entries": [
                {"i": int(a), "j": int(b), "prob": float(p), "weight": float(w)}
                for a, b, p, w in zip(self.i, self.j, self.prob, self.weight)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ShapingPlan":
        ent = data["entries"]
        n = int(data.get("n", 2))
        if data.get("basis", paulis.default_basis(n)) != paulis.default_basis(n):
            raise ValidationError("plan basis does not match the canonical basis")
        return cls(
            n,
            np.array([e["i"] for e in ent], dtype=np.int64),
            np.array([e["j"] for e in ent], dtype=np.int64),
            np.array([e["prob"] for e in ent], dtype=float),
            np.array([e["weight"] for e in ent], dtype=float),
            float(data["gamma"]),
            float(data.get("dropped_mass", 0.0)),
            dict(data.get("meta", {})),
        )
