"""Noisy R_ZZ gate models and SPAM error models."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.linalg import expm

from . import paulis
from .errors import DimensionError, UnsupportedError, ValidationError
from .ptm import BlochVector, Ptm, ptm_from_unitary, rotation_block, rzz_unitary


# ---------------------------------------------------------------------------
# gate models


@dataclass(frozen=True)
class OverRotation:
    """Coherent calibration error: R_ZZ(theta + eps)."""

    theta: float
    eps: float
    kind = "over_rotation"


@dataclass(frozen=True)
class LindbladExample:
    """R_ZZ(theta) generated together with a fixed dissipator of strength eps."""

    theta: float
    eps: float
    kind = "lindblad_example"

    def __post_init__(self):
        if not 0.0 <= self.eps < 0.5:
            raise ValidationError(f"LindbladExample needs eps in [0, 1/2), got {self.eps}")


@dataclass(frozen=True, eq=False)
class PauliNoiseAfter:
    theta: float
    p: np.ndarray
    kind = "pauli_noise_after"


@dataclass(frozen=True, eq=False)
class PauliNoiseBefore:
    theta: float
    p: np.ndarray
    kind = "pauli_noise_before"


@dataclass(frozen=True, eq=False)
class ExplicitPtm:
    ptm: Ptm
    theta: float | None = None
    kind = "explicit_ptm"


NoiseSpec = OverRotation | LindbladExample | PauliNoiseAfter | PauliNoiseBefore | ExplicitPtm


def lindblad_generator(h: np.ndarray, gamma: np.ndarray, n: int) -> np.ndarray:
    """PTM of ``L(rho) = -i[H, rho] + sum_jk Gamma_jk (P_j rho P_k - {P_k P_j, rho}/2)``.

    ``gamma`` is indexed by the non-identity Paulis 1..4**n-1 in canonical order.
    The generator is assembled column by column from its action on each Pauli.
    """
    mats = paulis.pauli_matrices(n)
    size = 4 ** n
    gamma = np.asarray(gamma, dtype=complex)
    if gamma.shape != (size - 1, size - 1):
        raise DimensionError(f"Gamma must be {size - 1}x{size - 1}")
    if not np.allclose(gamma, gamma.conj().T, atol=1e-12):
        raise ValidationError("Gamma must be Hermitian")
    pairs = [(j + 1, k + 1, gamma[j, k]) for j, k in zip(*np.nonzero(gamma))]
    gen = np.zeros((size, size))
    for b in range(size):
        rho = mats[b]
        out = -1j * (h @ rho - rho @ h)
        for j, k, g in pairs:
            pkpj = mats[k] @ mats[j]
            out = out + g * (mats[j] @ rho @ mats[k] - 0.5 * (pkpj @ rho + rho @ pkpj))
        gen[:, b] = np.einsum("aij,ji->a", mats, out).real / 2 ** n
    return gen


def lindblad_example_gamma(eps: float) -> np.ndarray:
    """Dissipator coefficients for the example channel.

    Four rank-one blocks [[1, -i], [i, 1]] on the anti-commuting pairs
    (XI,YZ), (XZ,YI), (IX,ZY), (ZX,IY), scaled so the ZZ fidelity is 1-2 eps.
    """
    gamma = np.zeros((15, 15), dtype=complex)
    blk = np.array([[1, -1j], [1j, 1]])
    for i in (8, 10, 12, 14):
        gamma[i - 1:i + 1, i - 1:i + 1] = blk
    return -np.log1p(-2 * eps) / 16 * gamma


def lindblad_example_ptm(theta: float, eps: float) -> Ptm:
    LindbladExample(theta, eps)
    h = 0.5 * theta * paulis.pauli_matrix("ZZ")
    gen = lindblad_generator(h, lindblad_example_gamma(eps), 2)
    # scipy's expm is scaling-and-squaring with a degree-13 Pade approximant
    return Ptm(expm(gen))


def lindblad_example_closed_form(theta: float, eps: float) -> Ptm:
    """Closed-form PTM of the example channel (block-diagonal)."""
    LindbladExample(theta, eps)
    return Ptm(_example_noise_matrix(eps, rotation_block(theta)))


def lindblad_example_noise(eps: float) -> Ptm:
    """The noise factor N with G = U N = N U."""
    return Ptm(_example_noise_matrix(eps, np.eye(2)))


def _example_noise_matrix(eps: float, bottom: np.ndarray) -> np.ndarray:
    e = eps
    m = np.zeros((16, 16))
    m[0:2, 0:2] = [[1, 0], [2 * e, 1 - 2 * e]]
    m[2:4, 2:4] = [[1 - e, -e], [-e, 1 - e]]
    for i in (4, 6):
        m[i:i + 2, i:i + 2] = [[1 - e, e], [e, 1 - e]]
    for i in (8, 10, 12, 14):
        m[i:i + 2, i:i + 2] = np.sqrt(1 - 2 * e) * bottom
    return m


def build_gate_ptm(spec: NoiseSpec) -> Ptm:
    if isinstance(spec, OverRotation):
        return ptm_from_unitary(rzz_unitary(spec.theta + spec.eps))
    if isinstance(spec, LindbladExample):
        return lindblad_example_ptm(spec.theta, spec.eps)
    if isinstance(spec, (PauliNoiseAfter, PauliNoiseBefore)):
        p = np.asarray(spec.p, dtype=float)
        if p.shape != (16,) or np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-10:
            raise ValidationError("Pauli noise needs 16 probabilities summing to 1")
        noise = np.diag(paulis.walsh_matrix(2) @ p)
        u = ptm_from_unitary(rzz_unitary(spec.theta)).m
        return Ptm(noise @ u if isinstance(spec, PauliNoiseAfter) else u @ noise)
    if isinstance(spec, ExplicitPtm):
        return spec.ptm
    raise UnsupportedError(f"unknown noise spec {spec!r}")


def nominal_theta(spec: NoiseSpec) -> float | None:
    return getattr(spec, "theta", None)


_KINDS = {
    "over_rotation": OverRotation,
    "lindblad_example": LindbladExample,
    "pauli_noise_after": PauliNoiseAfter,
    "pauli_noise_before": PauliNoiseBefore,
}


def noise_spec_from_json(data: dict) -> NoiseSpec:
    data = dict(data)
    kind = data.pop("kind", None)
    if kind == "ideal":
        return OverRotation(float(data.pop("theta")), 0.0)
    if kind == "explicit_ptm":
        theta = data.pop("theta", None)
        return ExplicitPtm(Ptm.from_json(data.pop("ptm")), theta)
    if kind not in _KINDS:
        raise UnsupportedError(f"unknown noise kind {kind!r}")
    if kind.startswith("pauli_noise"):
        return _KINDS[kind](float(data["theta"]), np.asarray(data["p"], dtype=float))
    return _KINDS[kind](float(data["theta"]), float(data["eps"]))


def noise_spec_to_json(spec: NoiseSpec) -> dict:
    if isinstance(spec, ExplicitPtm):
        return {"kind": spec.kind, "theta": spec.theta, "ptm": spec.ptm.to_json()}
    if isinstance(spec, (PauliNoiseAfter, PauliNoiseBefore)):
        return {"kind": spec.kind, "theta": spec.theta, "p": [float(x) for x in spec.p]}
    return {"kind": spec.kind, "theta": spec.theta, "eps": spec.eps}


# ---------------------------------------------------------------------------
# SPAM


def flip_matrix(p01: float, p10: float) -> np.ndarray:
    """Single-qubit readout matrix; column = true bit, row = reported bit."""
    return np.array([[1 - p01, p10], [p01, 1 - p10]])


def hadamard_walsh(n: int) -> np.ndarray:
    """Unnormalized 2**n Walsh-Hadamard matrix, qubit 0 most significant."""
    return reduce(np.kron, [np.array([[1.0, 1.0], [1.0, -1.0]])] * n)


@dataclass(frozen=True, eq=False)
class SpamModel:
    """State-preparation and readout errors.

    The prepared Bloch vector is ``prep_scale`` times the intended one on all
    non-identity components, optionally followed by ``prep_channel``. The
    readout matrix ``A[reported, true]`` acts on computational-basis bits.
    """

    n: int = 2
    prep_scale: float = 1.0
    readout: np.ndarray | None = None
    prep_channel: Ptm | None = None
    _a: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not -1.0 <= self.prep_scale <= 1.0:
            raise ValidationError("prep_scale must lie in [-1, 1]")
        dim = 2 ** self.n
        a = np.eye(dim) if self.readout is None else np.array(self.readout, dtype=float)
        if a.shape != (dim, dim):
            raise DimensionError(f"readout matrix must be {dim}x{dim}")
        if np.any(a < -1e-12) or not np.allclose(a.sum(axis=0), 1.0, atol=1e-10):
            raise ValidationError("readout matrix must be column stochastic")
        if self.prep_channel is not None and self.prep_channel.n != self.n:
            raise DimensionError("prep channel qubit count mismatch")
        a.setflags(write=False)
        object.__setattr__(self, "_a", a)

    @property
    def a(self) -> np.ndarray:
        return self._a

    @classmethod
    def ideal(cls, n: int = 2) -> "SpamModel":
        return cls(n)

    @classmethod
    def from_flips(cls, p01, p10, prep_scale: float = 1.0,
                   prep_channel: Ptm | None = None) -> "SpamModel":
        """Product readout from per-qubit flip probabilities."""
        p01, p10 = np.atleast_1d(p01), np.atleast_1d(p10)
        if p01.shape != p10.shape:
            raise DimensionError("p01 and p10 need one entry per qubit")
        a = reduce(np.kron, [flip_matrix(x, y) for x, y in zip(p01, p10)])
        return cls(len(p01), prep_scale, a, prep_channel)

    @classmethod
    def symmetric(cls, n: int = 2, flip: float = 0.0, prep_scale: float = 1.0) -> "SpamModel":
        return cls.from_flips([flip] * n, [flip] * n, prep_scale)

    def prepare(self, intended: BlochVector) -> np.ndarray:
        if intended.n != self.n:
            raise DimensionError("state qubit count mismatch")
        s = np.array(intended.s, dtype=float)
        s[1:] *= self.prep_scale
        if self.prep_channel is not None:
            s = self.prep_channel.m @ s
        return s

    def to_json(self) -> dict:
        out = {"n": self.n, "prep_scale": self.prep_scale,
               "readout": [[float(x) for x in row] for row in self._a]}
        if self.prep_channel is not None:
            out["prep_channel"] = self.prep_channel.to_json()
        return out


def readout_bias(spam: SpamModel) -> np.ndarray:
    """``m_j = 2**-n (W2 A W2)_jj`` indexed by Z-type bitmask j (qubit 0 = MSB)."""
    w2 = hadamard_walsh(spam.n)
    m = np.diag(w2 @ spam.a @ w2) / 2 ** spam.n
    if np.any(np.abs(m) > 1 + 1e-12):
        raise ValidationError("readout bias outside [-1, 1]")
    return m


def support_mask(p) -> int:
    """Bitmask of non-identity tensor factors, qubit 0 most significant."""
    p = paulis.as_pauli(p)
    mask = 0
    for c in paulis.digits(p.n)[p.index]:
        mask = 2 * mask + (1 if c else 0)
    return mask


def readout_bias_for(spam: SpamModel, p) -> float:
    return float(readout_bias(spam)[support_mask(p)])
