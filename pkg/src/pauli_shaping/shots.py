"""Shot-level Monte Carlo of twirled circuits and shaped estimators.

A circuit is a list of twirl Paulis, one per gate layer; layer k applies
``PTM(P_k) G PTM(P_k)``. Expectations are computed exactly along the PTM
chain and shots are drawn from the exact distribution of recorded bitstrings,
which is equivalent in law to simulating each shot's random flips.

Random streams are Philox generators keyed by ``(seed, *keys)`` so every
circuit owns a stream independent of evaluation order.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import paulis
from .errors import DimensionError, ValidationError
from .noise import SpamModel, hadamard_walsh, readout_bias_for, support_mask
from .ptm import COMMUTING, ANTICOMMUTING, BlochVector, Ptm, twirl_set
from .shaping import ShapingPlan

FULL_TWIRL_EACH = "FULL_TWIRL_EACH"
COMMUTING_TWIRL_EACH = "COMMUTING_TWIRL_EACH"
CORRELATED_PAIRS = "CORRELATED_PAIRS"
_KINDS = (FULL_TWIRL_EACH, COMMUTING_TWIRL_EACH, CORRELATED_PAIRS)


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the given key path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True)
class TwirlScheme:
    kind: str
    state_prep_twirl: bool = False
    readout_twirl: bool = True
    relative_to: str = "ZZ"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown twirl scheme {self.kind!r}")

    def check_depth(self, d: int) -> None:
        if d < 0:
            raise ValidationError("depth must be non-negative")
        if self.kind == CORRELATED_PAIRS and d % 2:
            raise ValidationError("correlated-pair circuits need even depth")

    def sample(self, rng: np.random.Generator, depth: int, n: int = 2, count: int = 1) -> np.ndarray:
        """Twirl Paulis for ``count`` circuits, shape (count, depth)."""
        self.check_depth(depth)
        if self.kind == FULL_TWIRL_EACH:
            return rng.integers(0, 4 ** n, size=(count, depth))
        comm = twirl_set(COMMUTING, n, self.relative_to)
        if self.kind == COMMUTING_TWIRL_EACH:
            return comm[rng.integers(0, len(comm), size=(count, depth))]
        anti = twirl_set(ANTICOMMUTING, n, self.relative_to)
        pairs = depth // 2
        c_first = rng.random((count, pairs)) < 0.5
        a = comm[rng.integers(0, len(comm), size=(count, pairs))]
        b = anti[rng.integers(0, len(anti), size=(count, pairs))]
        out = np.empty((count, depth), dtype=np.int64)
        out[:, 0::2] = np.where(c_first, a, b)
        out[:, 1::2] = np.where(c_first, b, a)
        return out


def run_chain(gate: Ptm, twirls: np.ndarray, s0: np.ndarray) -> np.ndarray:
    """Final Bloch vectors after each circuit's twirled gate layers.

    ``twirls`` has shape (count, depth); ``s0`` is (dim,) or (count, dim).
    """
    w = paulis.walsh_matrix(gate.n)
    twirls = np.atleast_2d(twirls)
    s = np.broadcast_to(np.asarray(s0, dtype=float), (twirls.shape[0], 4 ** gate.n)).copy()
    gt = gate.m.T
    for k in range(twirls.shape[1]):
        signs = w[twirls[:, k]]
        s = ((s * signs) @ gt) * signs
    return s


@lru_cache(maxsize=None)
def _basis_indices(basis: str) -> np.ndarray:
    """Pauli index measured by each Z-type bitmask l in a rotated frame."""
    n = len(basis)
    out = np.empty(2 ** n, dtype=np.int64)
    for l in range(2 ** n):
        lab = "".join(basis[q] if (l >> (n - 1 - q)) & 1 else "I" for q in range(n))
        out[l] = paulis.index_of(lab)
    return out


def measurement_basis(p) -> str:
    """Per-qubit measurement basis for a Pauli; identity factors read Z."""
    lab = paulis.as_pauli(p).label
    return "".join("Z" if c == "I" else c for c in lab)


def compatible(p, basis: str) -> bool:
    lab = paulis.as_pauli(p).label
    return all(c in ("I", b) for c, b in zip(lab, basis))


@lru_cache(maxsize=None)
def _parity(n: int) -> np.ndarray:
    """``z[j, k] = (-1)**popcount(j & k)``."""
    return hadamard_walsh(n)


def twirled_readout(a: np.ndarray) -> np.ndarray:
    """Readout matrix averaged over classical X-flip masks."""
    dim = a.shape[0]
    k = np.arange(dim)
    return sum(a[np.ix_(k ^ m, k ^ m)] for m in range(dim)) / dim


def prepared_state(initial: BlochVector, spam: SpamModel, prep_twirl=None) -> np.ndarray:
    """Average prepared Bloch vector, including optional state-prep twirling."""
    s = spam.prepare(initial)
    if prep_twirl is not None:
        p = paulis.as_pauli(prep_twirl, initial.n)
        s = 0.5 * (s + paulis.walsh_matrix(initial.n)[p.index] * s)
    return s


def recorded_distribution(finals: np.ndarray, basis: str, spam: SpamModel,
                          readout_twirl: bool = True) -> np.ndarray:
    """Distribution over recorded bitstrings, shape (count, 2**n)."""
    n = len(basis)
    v = np.atleast_2d(finals)[:, _basis_indices(basis)]
    p = v @ _parity(n) / 2 ** n
    a = twirled_readout(spam.a) if readout_twirl else spam.a
    p = p @ a.T
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=1, keepdims=True)


def _observable_mask(p, basis: str) -> int:
    if not compatible(p, basis):
        raise ValidationError(f"{paulis.as_pauli(p).label} is not readable in basis {basis}")
    return support_mask(p)


def exact_circuit_expectation(gate: Ptm, twirls, initial: BlochVector, spam: SpamModel,
                              observable, scheme: TwirlScheme | None = None,
                              prep_twirl=None) -> np.ndarray | float:
    """mu(T) of one or many circuits: exact mean of the recorded parity."""
    scheme = scheme or TwirlScheme(FULL_TWIRL_EACH)
    obs = paulis.as_pauli(observable, initial.n)
    basis = measurement_basis(obs)
    twirls = np.asarray(twirls, dtype=np.int64)
    single = twirls.ndim == 1
    finals = run_chain(gate, np.atleast_2d(twirls), prepared_state(initial, spam, prep_twirl))
    dist = recorded_distribution(finals, basis, spam, scheme.readout_twirl)
    vals = dist @ _parity(initial.n)[_observable_mask(obs, basis)]
    return float(vals[0]) if single else vals


def sample_outcome(gate: Ptm, twirls, initial: BlochVector, spam: SpamModel, observable,
                   rng: np.random.Generator, scheme: TwirlScheme | None = None,
                   prep_twirl=None) -> int:
    """One explicit shot: draw prep twirl and readout flips, then a bitstring."""
    scheme = scheme or TwirlScheme(FULL_TWIRL_EACH)
    n = initial.n
    obs = paulis.as_pauli(observable, n)
    basis = measurement_basis(obs)
    s = spam.prepare(initial)
    if prep_twirl is not None and rng.random() < 0.5:
        s = paulis.walsh_matrix(n)[paulis.as_pauli(prep_twirl, n).index] * s
    final = run_chain(gate, np.atleast_2d(np.asarray(twirls, dtype=np.int64)), s)
    p = np.clip(final[:, _basis_indices(basis)] @ _parity(n) / 2 ** n, 0, None)[0]
    p /= p.sum()
    true_bits = rng.choice(2 ** n, p=p)
    flips = int(rng.integers(0, 2 ** n)) if scheme.readout_twirl else 0
    physical = true_bits ^ flips
    reported = rng.choice(2 ** n, p=spam.a[:, physical]) ^ flips
    return int(_parity(n)[_observable_mask(obs, basis), reported])


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class DecayRecord:
    d: int
    mu_hat: float
    stderr: float
    n_tot: int


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """One prepared state and measurement setting, swept over depths.

    ``observable`` is the probed Pauli; ``recycled`` lists further Paulis read
    from the same bitstrings. State-prep twirling, when enabled by the scheme,
    applies ``observable``.
    """

    depths: Sequence[int]
    n_circuits: int
    shots_per_circuit: int
    seed: int
    scheme: TwirlScheme
    spam: SpamModel
    observable: object
    initial: BlochVector
    recycled: tuple = ()
    tag: int = 0

    def __post_init__(self):
        if not len(self.depths):
            raise ValidationError("depths must be non-empty")
        if self.n_circuits < 1 or self.shots_per_circuit < 1:
            raise ValidationError("need at least one circuit and one shot per circuit")
        for d in self.depths:
            self.scheme.check_depth(int(d))

    @property
    def n_tot(self) -> int:
        return self.n_circuits * self.shots_per_circuit

    def observables(self) -> list[paulis.PauliIndex]:
        n = self.initial.n
        return [paulis.as_pauli(self.observable, n)] + [paulis.as_pauli(p, n) for p in self.recycled]


def _estimate_depth(gate: Ptm, plan: ExperimentPlan, k: int) -> tuple[dict, dict]:
    d = int(plan.depths[k])
    n = plan.initial.n
    obs = plan.observables()
    basis = measurement_basis(obs[0])
    masks = np.array([_observable_mask(o, basis) for o in obs])
    z = _parity(n)[masks]                                   # (n_obs, 2**n)
    prep = plan.observable if plan.scheme.state_prep_twirl else None
    s0 = prepared_state(plan.initial, plan.spam, prep)
    twirls = np.empty((plan.n_circuits, d), dtype=np.int64)
    rngs = [stream(plan.seed, plan.tag, d, c) for c in range(plan.n_circuits)]
    for c, rng in enumerate(rngs):
        twirls[c] = plan.scheme.sample(rng, d, n)[0]
    finals = run_chain(gate, twirls, s0)
    dist = recorded_distribution(finals, basis, plan.spam, plan.scheme.readout_twirl)
    counts = np.stack([rng.multinomial(plan.shots_per_circuit, p) for rng, p in zip(rngs, dist)])
    means = counts @ z.T / plan.shots_per_circuit            # (n_circuits, n_obs)
    out, raw = {}, {}
    for o_idx, o in enumerate(obs):
        cm = means[:, o_idx]
        mu = float(cm.mean())
        if plan.n_circuits > 1:
            se = float(cm.std(ddof=1) / np.sqrt(plan.n_circuits))
        else:
            se = float(np.sqrt(max(1 - mu * mu, 0.0) / plan.n_tot))
        out[o.index] = DecayRecord(d, mu, se, plan.n_tot)
        raw[o.index] = cm
    return out, raw


def estimate_decays(gate: Ptm, plan: ExperimentPlan, threads: int = 1) -> dict[int, list[DecayRecord]]:
    """Decay records for the probed and recycled observables, keyed by index."""
    ks = range(len(plan.depths))
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(lambda k: _estimate_depth(gate, plan, k), ks))
    else:
        results = [_estimate_depth(gate, plan, k) for k in ks]
    keys = [o.index for o in plan.observables()]
    return {key: [r[0][key] for r in results] for key in keys}


def estimate_mu(gate: Ptm, plan: ExperimentPlan, threads: int = 1) -> list[DecayRecord]:
    obs = paulis.as_pauli(plan.observable, plan.initial.n).index
    return estimate_decays(gate, plan, threads)[obs]


def circuit_means(gate: Ptm, plan: ExperimentPlan, depth_index: int = 0) -> np.ndarray:
    """Per-circuit shot means of the probed observable at one depth."""
    obs = paulis.as_pauli(plan.observable, plan.initial.n).index
    return _estimate_depth(gate, plan, depth_index)[1][obs]


def decays_to_csv(rows: Sequence[tuple[str, str, DecayRecord]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "observable", "d", "mu_hat", "stderr", "n_tot"])
    for scheme, obs, r in rows:
        w.writerow([scheme, obs, r.d, repr(r.mu_hat), repr(r.stderr), r.n_tot])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# concentration


def empirical_delta(gate: Ptm, scheme: TwirlScheme, observable, initial: BlochVector,
                    depth: int, n_samples: int, rng: np.random.Generator,
                    spam: SpamModel | None = None) -> tuple[float, float]:
    """Sample std of mu(T) over random circuits, with its standard error."""
    if n_samples < 2:
        raise ValidationError("need at least two samples")
    spam = spam or SpamModel.ideal(initial.n)
    twirls = scheme.sample(rng, depth, initial.n, n_samples)
    prep = observable if scheme.state_prep_twirl else None
    vals = exact_circuit_expectation(gate, twirls, initial, spam, observable, scheme, prep)
    dev = vals - vals.mean()
    var = float(dev @ dev / (n_samples - 1))
    delta = np.sqrt(var)
    m4 = float(np.mean(dev ** 4))
    var_se = np.sqrt(max(m4 - var * var, 0.0) / n_samples)
    se = var_se / (2 * delta) if delta > 0 else 0.0
    return float(delta), float(se)


# ---------------------------------------------------------------------------
# shaped estimation


def _entry_means(g: Ptm, plan: ShapingPlan, s: np.ndarray, obs: int) -> np.ndarray:
    """Exact mean of the observable for every plan entry (P_j, G, P_i)."""
    w = paulis.walsh_matrix(g.n)
    return w[plan.i, obs] * ((w[plan.j] * s[None, :]) @ g.m[obs])


def shaped_expectation_exact(g: Ptm, plan: ShapingPlan, initial: BlochVector, observable,
                             spam: SpamModel | None = None) -> float:
    obs = paulis.as_pauli(observable, g.n)
    s = (spam or SpamModel.ideal(g.n)).prepare(initial)
    mu = _entry_means(g, plan, s, obs.index)
    if spam is not None:
        mu = mu * readout_bias_for(spam, obs)
    return float(np.sum(plan.prob * plan.weight * mu))


def estimate_shaped_expectation(g: Ptm, plan: ShapingPlan, initial: BlochVector, observable,
                                shots: int, rng: np.random.Generator,
                                spam: SpamModel | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of tr[O A(rho)] and its standard error.

    Entries are drawn per shot from the plan; each shot's +-1 outcome is
    multiplied by the entry weight. Readout errors, if any, are twirled.
    """
    if shots < 1:
        raise ValidationError("shots must be positive")
    if plan.n != g.n or initial.n != g.n:
        raise DimensionError("plan, gate and state disagree on qubit count")
    obs = paulis.as_pauli(observable, g.n)
    s = (spam or SpamModel.ideal(g.n)).prepare(initial)
    mu = _entry_means(g, plan, s, obs.index)
    if spam is not None:
        mu = mu * readout_bias_for(spam, obs)
    counts = rng.multinomial(shots, plan.prob)
    plus = rng.binomial(counts, np.clip((1 + mu) / 2, 0, 1))
    minus = counts - plus
    total = np.sum(plan.weight * (plus - minus))
    sq = np.sum(plan.weight ** 2 * counts)
    est = total / shots
    var = (sq / shots - est * est) * shots / max(shots - 1, 1)
    return float(est), float(np.sqrt(max(var, 0.0) / shots))
