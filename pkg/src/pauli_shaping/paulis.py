"""n-qubit Pauli group algebra.

Paulis are stored as integer indices. For two qubits the canonical order is the
block-friendly basis below (serialized as ``"eq20"``), where indices 0..7 commute with ZZ,
8..15 anti-commute with ZZ, and index ``2k+1`` is proportional to ``ZZ * P_2k``.
Every other qubit count uses plain base-4 digits, qubit 0 most significant,
with I, X, Y, Z -> 0, 1, 2, 3 (``"base4"``).

Phases of products are exact quarter turns ``k`` meaning ``i**k``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, DimensionError, UnsupportedError, ValidationError

MAX_QUBITS = 6
SINGLE = "IXYZ"

BLOCK_LABELS = (
    "II", "ZZ", "XX", "YY", "IZ", "ZI", "YX", "XY",
    "XI", "YZ", "XZ", "YI", "IX", "ZY", "ZX", "IY",
)

# single-qubit product a*b = i**_MUL_PHASE[a, b] * _MUL_CODE[a, b]
_X_BIT = np.array([0, 1, 1, 0], dtype=np.int8)
_Z_BIT = np.array([0, 0, 1, 1], dtype=np.int8)
_MUL_CODE = np.array([[0, 1, 2, 3],
                      [1, 0, 3, 2],
                      [2, 3, 0, 1],
                      [3, 2, 1, 0]], dtype=np.int8)
_MUL_PHASE = np.array([[0, 0, 0, 0],
                       [0, 0, 1, 3],
                       [0, 3, 0, 1],
                       [0, 1, 3, 0]], dtype=np.int8)

_PAULI_1Q = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def default_basis(n: int) -> str:
    return "eq20" if n == 2 else "base4"


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DimensionError(f"qubit count must be a positive integer, got {n!r}")
    if n > MAX_QUBITS:
        raise CapacityError(f"n={n} exceeds the dense limit of {MAX_QUBITS} qubits")


def _resolve(n: int, basis: str | None) -> str:
    _check_n(n)
    basis = basis or default_basis(n)
    if basis not in ("eq20", "base4"):
        raise UnsupportedError(f"unknown basis {basis!r}")
    if basis == "eq20" and n != 2:
        raise DimensionError('the block basis ("eq20") is defined for n=2 only')
    return basis


@lru_cache(maxsize=None)
def labels(n: int, basis: str | None = None) -> tuple[str, ...]:
    """Pauli labels in canonical index order."""
    basis = _resolve(n, basis)
    if basis == "eq20":
        return BLOCK_LABELS
    codes = _base4_digits(n)
    return tuple("".join(SINGLE[c] for c in row) for row in codes)


@lru_cache(maxsize=None)
def _base4_digits(n: int) -> np.ndarray:
    idx = np.arange(4 ** n)
    return np.stack([(idx // 4 ** (n - 1 - q)) % 4 for q in range(n)], axis=1).astype(np.int8)


@lru_cache(maxsize=None)
def digits(n: int, basis: str | None = None) -> np.ndarray:
    """Array of shape (4**n, n) with the single-qubit code of each factor."""
    basis = _resolve(n, basis)
    if basis == "base4":
        out = _base4_digits(n)
    else:
        out = np.array([[SINGLE.index(c) for c in lab] for lab in BLOCK_LABELS], dtype=np.int8)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _code_to_index(n: int, basis: str) -> np.ndarray:
    d = digits(n, basis).astype(np.int64)
    codes = d @ (4 ** np.arange(n - 1, -1, -1))
    inv = np.empty(4 ** n, dtype=np.int64)
    inv[codes] = np.arange(4 ** n)
    return inv


def index_of(label: str, basis: str | None = None) -> int:
    label = label.strip().upper()
    n = len(label)
    if n == 0 or any(c not in SINGLE for c in label):
        raise ValidationError(f"invalid Pauli label {label!r}")
    basis = _resolve(n, basis)
    code = 0
    for c in label:
        code = 4 * code + SINGLE.index(c)
    return int(_code_to_index(n, basis)[code])


def label_of(index: int, n: int, basis: str | None = None) -> str:
    labs = labels(n, basis)
    if not 0 <= index < len(labs):
        raise DimensionError(f"index {index} out of range for n={n}")
    return labs[index]


@dataclass(frozen=True)
class PauliIndex:
    """An n-qubit Pauli referenced by its canonical index."""

    index: int
    n: int

    def __post_init__(self):
        _check_n(self.n)
        if not 0 <= int(self.index) < 4 ** self.n:
            raise DimensionError(f"index {self.index} out of range for n={self.n}")

    @classmethod
    def from_label(cls, label: str) -> "PauliIndex":
        return cls(index_of(label), len(label.strip()))

    @property
    def label(self) -> str:
        return label_of(self.index, self.n)

    @property
    def basis(self) -> str:
        return default_basis(self.n)

    def to_json(self) -> dict:
        return {"index": int(self.index), "n": self.n, "basis": self.basis, "label": self.label}

    @classmethod
    def from_json(cls, data) -> "PauliIndex":
        if isinstance(data, str):
            return cls.from_label(data)
        n = int(data["n"])
        if data.get("basis", default_basis(n)) != default_basis(n):
            # re-map an index given in the non-canonical basis
            lab = label_of(int(data["index"]), n, data["basis"])
            return cls.from_label(lab)
        return cls(int(data["index"]), n)

    def __str__(self) -> str:
        return self.label


def as_pauli(p, n: int | None = None) -> PauliIndex:
    """Coerce a label, index or PauliIndex to PauliIndex."""
    if isinstance(p, PauliIndex):
        return p
    if isinstance(p, str):
        return PauliIndex.from_label(p)
    if n is None:
        raise DimensionError("an integer Pauli index needs an explicit qubit count")
    return PauliIndex(int(p), n)


@lru_cache(maxsize=None)
def _tables(n: int, basis: str) -> tuple[np.ndarray, np.ndarray]:
    """Product index table and phase table over all index pairs."""
    d = digits(n, basis)
    size = 4 ** n
    code = np.zeros((size, size), dtype=np.int64)
    phase = np.zeros((size, size), dtype=np.int8)
    for q in range(n):
        a = d[:, q][:, None]
        b = d[:, q][None, :]
        code = 4 * code + _MUL_CODE[a, b]
        phase += _MUL_PHASE[a, b]
    prod = _code_to_index(n, basis)[code]
    phase %= 4
    prod.setflags(write=False)
    phase.setflags(write=False)
    return prod, phase


def product_table(n: int, basis: str | None = None) -> np.ndarray:
    """``table[i, j] = i (+) j``, the index of P_i P_j up to phase."""
    return _tables(n, _resolve(n, basis))[0]


def phase_table(n: int, basis: str | None = None) -> np.ndarray:
    """Quarter-turn phase of P_i P_j relative to its product index."""
    return _tables(n, _resolve(n, basis))[1]


def _same_n(i: PauliIndex, j: PauliIndex) -> None:
    if i.n != j.n:
        raise DimensionError(f"Pauli qubit counts differ: {i.n} vs {j.n}")


def pauli_mul(i, j) -> tuple[PauliIndex, int]:
    """Return ``(k, phase)`` with ``P_i P_j = i**phase * P_k``."""
    i, j = as_pauli(i, getattr(j, "n", None)), as_pauli(j, getattr(i, "n", None))
    _same_n(i, j)
    prod, phase = _tables(i.n, default_basis(i.n))
    return PauliIndex(int(prod[i.index, j.index]), i.n), int(phase[i.index, j.index])


def commutator_sign(i, j) -> int:
    i, j = as_pauli(i, getattr(j, "n", None)), as_pauli(j, getattr(i, "n", None))
    _same_n(i, j)
    return int(walsh_matrix(i.n)[i.index, j.index])


@lru_cache(maxsize=None)
def _walsh(n: int, basis: str) -> np.ndarray:
    d = digits(n, basis)
    x = _X_BIT[d].astype(np.int64)
    z = _Z_BIT[d].astype(np.int64)
    sym = (x @ z.T + z @ x.T) % 2
    w = (1 - 2 * sym).astype(float)
    w.setflags(write=False)
    return w


def walsh_matrix(n: int, basis: str | None = None) -> np.ndarray:
    """Symmetric +-1 matrix with ``W[i, j] = +1`` iff P_i and P_j commute.

    Stored as float64 so that products with real matrices hit BLAS; every entry
    is exactly +-1 and integer sums stay exact.
    """
    return _walsh(n, _resolve(n, basis))


def pauli_matrix(p, n: int | None = None) -> np.ndarray:
    p = as_pauli(p, n)
    out = np.ones((1, 1), dtype=complex)
    for c in digits(p.n)[p.index]:
        out = np.kron(out, _PAULI_1Q[c])
    return out


@lru_cache(maxsize=None)
def pauli_matrices(n: int) -> np.ndarray:
    """All Pauli matrices of n qubits, shape (4**n, 2**n, 2**n)."""
    _check_n(n)
    if n > 4:
        raise CapacityError("explicit Pauli matrices are only built for n <= 4")
    out = np.stack([pauli_matrix(k, n) for k in range(4 ** n)])
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Clifford library

_CLIFFORDS = {
    "identity": np.eye(4, dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def clifford_names() -> tuple[str, ...]:
    return tuple(_CLIFFORDS)


def clifford_unitary(name: str) -> np.ndarray:
    try:
        return _CLIFFORDS[name].copy()
    except KeyError:
        raise UnsupportedError(f"unknown Clifford {name!r}; known: {sorted(_CLIFFORDS)}") from None


def pauli_map_from_unitary(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sigma, v) with ``U^dag P_i U = v_i P_sigma(i)``, found by conjugation."""
    u = np.asarray(u, dtype=complex)
    dim = u.shape[0]
    n = int(round(np.log2(dim)))
    if 2 ** n != dim or u.shape != (dim, dim):
        raise DimensionError("unitary must be 2**n square")
    paulis = pauli_matrices(n)
    sigma = np.empty(4 ** n, dtype=np.int64)
    v = np.empty(4 ** n, dtype=np.int64)
    for i, p in enumerate(paulis):
        conj = u.conj().T @ p @ u
        overlaps = np.einsum("kab,ba->k", paulis, conj) / dim
        k = int(np.argmax(np.abs(overlaps)))
        val = overlaps[k]
        if abs(abs(val) - 1) > 1e-10 or abs(val.imag) > 1e-10:
            raise ValidationError("unitary does not map Paulis to signed Paulis")
        sigma[i], v[i] = k, int(round(val.real))
    if len(set(sigma.tolist())) != len(sigma):
        raise ValidationError("Pauli map is not a bijection")
    return sigma, v


@lru_cache(maxsize=None)
def _clifford_table(name: str) -> tuple[np.ndarray, np.ndarray]:
    sigma, v = pauli_map_from_unitary(clifford_unitary(name))
    sigma.setflags(write=False)
    v.setflags(write=False)
    return sigma, v


def clifford_pauli_map(name: str) -> tuple[np.ndarray, np.ndarray]:
    """Permutation and signs for a named 2-qubit Clifford in the block basis.

    To add a gate, register its 4x4 unitary in ``_CLIFFORDS``; the table is
    derived (and checked for bijectivity) on first use.
    """
    clifford_unitary(name)
    return _clifford_table(name)
