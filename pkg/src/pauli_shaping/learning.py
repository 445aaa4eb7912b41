"""SPAM-robust learning of a noisy R_ZZ(theta) PTM.

The two-qubit block basis splits the PTM into 2x2 blocks (i, i+1). Elements fall into
four classes:

* Type 1: diagonal of the commuting blocks (indices 1..7), learned by
  modified cycle benchmarking (full twirl of the noisy gate).
* Type 3: products ``G_ij G_ji`` of the anti-commuting blocks, learned from
  damped oscillations under the commuting-sector twirl.
* Type 2: diagonal of the anti-commuting blocks (indices 8..15), learned from
  correlated twirl pairs plus the Type-3 products.
* Type 4: off-diagonals of the commuting blocks, only bounded by demanding a
  CPTP reconstruction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import paulis
from .errors import InconsistentInputs, SingularError, StrongNoiseRegime, ValidationError
from .fitting import FitResult, fit_damped_cosine, fit_exponential
from .noise import SpamModel
from .ptm import Ptm, is_cptp, pauli_eigenstate
from .shots import (COMMUTING_TWIRL_EACH, CORRELATED_PAIRS, FULL_TWIRL_EACH, DecayRecord,
                    ExperimentPlan, TwirlScheme, estimate_decays)

TOP_BLOCKS = (0, 2, 4, 6)
BOTTOM_BLOCKS = (8, 10, 12, 14)

# (probed Pauli, recycled Paulis read from the same bitstrings)
MCB_SETTINGS = (("ZZ", ("IZ", "ZI")), ("XX", ()), ("YY", ()), ("YX", ()), ("XY", ()))
PTB_SETTINGS = (("XZ", ("XI",)), ("ZX", ("IX",)))
CTB_SETTINGS = (("XZ", ("XI",)), ("YZ", ("YI",)), ("ZX", ("IX",)), ("ZY", ("IY",)))


# ---------------------------------------------------------------------------
# block algebra


def block_powers_params(block) -> tuple[float, float, float, float]:
    """(a, r, omega, delta) with ``(B**d)[0, 0] = a r**d cos(omega d - delta)``."""
    b = np.asarray(block, dtype=float)
    gii, gij, gji, gjj = b[0, 0], b[0, 1], b[1, 0], b[1, 1]
    disc = (gii - gjj) ** 2 + 4 * gij * gji
    if disc >= 0:
        raise StrongNoiseRegime("block has real eigenvalues; its powers do not oscillate")
    root = np.sqrt(-disc)
    a = 2 * np.sqrt(gij * gji / disc)
    r = np.sqrt(gii * gjj - gij * gji)
    omega = np.arctan2(root, gii + gjj)
    delta = np.arctan2(gii - gjj, root)
    return float(a), float(r), float(omega), float(delta)


def invert_block_params(r: float, omega: float, delta: float) -> tuple[float, float, float]:
    """(G_ii, G_jj, G_ij G_ji) from the oscillation parameters."""
    if not 0 < omega < np.pi:
        raise ValidationError("omega must lie in (0, pi)")
    if abs(np.cos(delta)) < 1e-15:
        raise SingularError("delta = +-pi/2 is singular")
    product = -(r * np.sin(omega) / np.cos(delta)) ** 2
    gii = r * (np.cos(omega) + np.sin(omega) * np.tan(delta))
    gjj = r * (np.cos(omega) - np.sin(omega) * np.tan(delta))
    return float(gii), float(gjj), float(product)


def negate_offdiag(block) -> np.ndarray:
    b = np.array(block, dtype=float)
    b[0, 1], b[1, 0] = -b[0, 1], -b[1, 0]
    return b


def correlated_pair_block(block) -> np.ndarray:
    """Mean block of a correlated twirl pair, ``(B_C B_A + B_A B_C) / 2``."""
    b = np.asarray(block, dtype=float)
    bt = negate_offdiag(b)
    return 0.5 * (b @ bt + bt @ b)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    converged: bool = True

    def to_json(self) -> dict:
        return {"value": float(self.value), "stderr": float(self.stderr),
                "converged": bool(self.converged)}

    @classmethod
    def from_json(cls, data: dict) -> "Estimate":
        return cls(float(data["value"]), float(data["stderr"]), bool(data.get("converged", True)))


@dataclass(frozen=True)
class LearningKnobs:
    n_circuits: int = 100
    shots_per_circuit: int = 2000
    exp_depths: tuple = (0, 1, 2, 4, 8, 16, 32, 64)
    cos_depths: tuple = tuple(range(41))
    ctb_depths: tuple = (0, 2, 4, 8, 16, 32, 64)
    seed: int = 0
    threads: int = 1
    readout_twirl: bool = True
    state_prep_twirl: bool = True


@dataclass
class SchemeRun:
    """Fits and decay curves of one learning scheme."""

    estimates: dict
    fits: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return all(f.converged for f in self.fits.values())


def _label(i: int) -> str:
    return paulis.label_of(i, 2)


def _run_settings(gate: Ptm, spam: SpamModel, knobs: LearningKnobs, settings, scheme: TwirlScheme,
                  depths: Sequence[int], tag0: int) -> dict[int, list[DecayRecord]]:
    curves = {}
    for t, (probe, recycled) in enumerate(settings):
        plan = ExperimentPlan(
            depths=tuple(depths), n_circuits=knobs.n_circuits,
            shots_per_circuit=knobs.shots_per_circuit, seed=knobs.seed, scheme=scheme,
            spam=spam, observable=probe, initial=pauli_eigenstate(probe), recycled=recycled,
            tag=tag0 + t,
        )
        curves.update(estimate_decays(gate, plan, threads=knobs.threads))
    return curves


def run_modified_cb(gate: Ptm, spam: SpamModel, knobs: LearningKnobs = LearningKnobs()) -> SchemeRun:
    """Type-1 fidelities G_ii (i = 1..7) from full-twirl decays."""
    scheme = TwirlScheme(FULL_TWIRL_EACH, readout_twirl=knobs.readout_twirl)
    curves = _run_settings(gate, spam, knobs, MCB_SETTINGS, scheme, knobs.exp_depths, 100)
    run = SchemeRun({}, curves=curves)
    for i in range(1, 8):
        fit = fit_exponential(curves[i])
        run.fits[i] = fit
        run.estimates[i] = Estimate(fit["r"], fit.uncertainties["r"], fit.converged)
    return run


def _product_stderr(fit: FitResult, product: float) -> float:
    if fit.covariance is None:
        return float("inf")
    r, om, de = fit["r"], fit["omega"], fit["delta"]
    jac = np.array([2 * product / r, 2 * product / np.tan(om), 2 * product * np.tan(de)])
    cov = fit.covariance[1:, 1:]
    return float(np.sqrt(max(jac @ cov @ jac, 0.0)))


def run_partial_twirl_benchmark(gate: Ptm, spam: SpamModel, theta_nominal: float,
                                knobs: LearningKnobs = LearningKnobs()) -> SchemeRun:
    """Type-3 products per anti-commuting block from damped oscillations.

    ``estimates`` maps block index i (8, 10, 12, 14) to the product estimate;
    ``extra`` holds the fallback diagonal estimates and fitted parameters.
    """
    scheme = TwirlScheme(COMMUTING_TWIRL_EACH, state_prep_twirl=knobs.state_prep_twirl,
                         readout_twirl=knobs.readout_twirl)
    curves = _run_settings(gate, spam, knobs, PTB_SETTINGS, scheme, knobs.cos_depths, 200)
    run = SchemeRun({}, curves=curves)
    for i in BOTTOM_BLOCKS:
        fit = fit_damped_cosine(curves[i], theta_nominal)
        run.fits[i] = fit
        om = fit["omega"]
        if not 1e-3 < om < np.pi - 1e-3:
            raise StrongNoiseRegime(f"oscillation fit for block {_label(i)} pinned at omega={om}")
        gii, gjj, prod = invert_block_params(fit["r"], om, fit["delta"])
        run.estimates[i] = Estimate(prod, _product_stderr(fit, prod), fit.converged)
        run.extra[i] = {"G_ii": gii, "G_jj": gjj, "r": fit["r"], "omega": om, "delta": fit["delta"]}
    return run


def run_correlated_twirl_benchmark(gate: Ptm, spam: SpamModel, type3_products: dict,
                                   knobs: LearningKnobs = LearningKnobs()) -> SchemeRun:
    """Type-2 diagonals G_ii (i = 8..15) as ``sqrt(r_hat + product)``."""
    scheme = TwirlScheme(CORRELATED_PAIRS, readout_twirl=knobs.readout_twirl)
    curves = _run_settings(gate, spam, knobs, CTB_SETTINGS, scheme, knobs.ctb_depths, 300)
    run = SchemeRun({}, curves=curves)
    for i in range(8, 16):
        pts = [(rec.d / 2, rec.mu_hat, rec.stderr) for rec in curves[i]]
        fit = fit_exponential(pts)
        run.fits[i] = fit
        prod = type3_products[i & ~1]
        radicand = fit["r"] + prod.value
        if radicand < 0:
            raise InconsistentInputs(f"r_hat + product < 0 for {_label(i)}; Type-3 input is off")
        value = np.sqrt(radicand)
        stderr = np.sqrt(fit.uncertainties["r"] ** 2 + prod.stderr ** 2) / (2 * max(value, 1e-12))
        run.estimates[i] = Estimate(float(value), float(stderr), fit.converged and prod.converged)
    return run


# ---------------------------------------------------------------------------
# learned PTM


@dataclass
class LearnedPtm:
    theta: float | None
    type1: dict[int, Estimate]
    type2: dict[int, Estimate]
    type3_products: dict[int, Estimate]
    type4_bounds: dict[int, dict] = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def count(self) -> int:
        return len(self.type1) + len(self.type2) + len(self.type3_products)

    def all_converged(self) -> bool:
        ests = [*self.type1.values(), *self.type2.values(), *self.type3_products.values()]
        return all(e.converged for e in ests)

    def matrix(self, type4: dict | None = None, split_type3: bool = True) -> np.ndarray:
        """Block-diagonal reconstruction.

        Type-4 entries default to 0. Type-3 products are split with the
        labeled heuristic ``G_ij = -G_ji`` (sign from sin(theta)) unless
        ``split_type3`` is false, which leaves the off-diagonals at 0.
        """
        m = np.zeros((16, 16))
        m[0, 0] = 1.0
        for i, e in {**self.type1, **self.type2}.items():
            m[i, i] = e.value
        sgn = 1.0 if self.theta is None or np.sin(self.theta) >= 0 else -1.0
        if split_type3:
            for i, e in self.type3_products.items():
                mag = np.sqrt(max(-e.value, 0.0))
                m[i, i + 1], m[i + 1, i] = -sgn * mag, sgn * mag
        for (i, j), v in (type4 or {}).items():
            m[i, j] = v
        return m

    def ptm(self, **kwargs) -> Ptm:
        return Ptm(self.matrix(**kwargs))

    def weak_noise_flags(self) -> dict[int, bool]:
        out = {}
        m = self.matrix()
        for i in BOTTOM_BLOCKS:
            b = m[i:i + 2, i:i + 2]
            out[i] = bool((b[0, 0] - b[1, 1]) ** 2 + 4 * b[0, 1] * b[1, 0] < 0)
        return out

    def to_json(self) -> dict:
        def est(d):
            return {_label(i): e.to_json() for i, e in sorted(d.items())}
        return {
            "theta": self.theta,
            "basis": "eq20",
            "type1": est(self.type1),
            "type2": est(self.type2),
            "type3_products": est(self.type3_products),
            "type4_bounds": {_label(i): b for i, b in sorted(self.type4_bounds.items())},
            "fits": self.fits,
            "flags": list(self.flags),
        }

    @classmethod
    def from_json(cls, data: dict) -> "LearnedPtm":
        def est(d):
            return {paulis.index_of(k): Estimate.from_json(v) for k, v in d.items()}
        return cls(
            data.get("theta"),
            est(data["type1"]),
            est(data["type2"]),
            est(data["type3_products"]),
            {paulis.index_of(k): v for k, v in data.get("type4_bounds", {}).items()},
            data.get("fits", {}),
            list(data.get("flags", [])),
        )


def _feasible(m: np.ndarray, tol: float) -> bool:
    return is_cptp(Ptm(m), tol).completely_positive


def _max_feasible(base: np.ndarray, direction: np.ndarray, tol: float, t_max: float,
                  iters: int = 60) -> float:
    """Largest t in [0, t_max] with base + t*direction CP (a convex set)."""
    if _feasible(base + t_max * direction, tol):
        return t_max
    lo, hi = 0.0, t_max
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _feasible(base + mid * direction, tol):
            lo = mid
        else:
            hi = mid
    return lo


def bound_type4(learned: LearnedPtm, tol: float = 1e-9, t_max: float = 1.0) -> dict[int, dict]:
    """CPTP-consistent ranges for the unknown commuting-block off-diagonals.

    Block 0 is special: trace preservation pins G_01 = 0, so only G_10 is
    scanned and the product is exactly 0. Other blocks scan the symmetric
    (G_ij = G_ji = t) and antisymmetric (G_ij = -G_ji = t) families in both
    directions with every other unknown at 0.
    """
    base = learned.matrix()
    report = is_cptp(Ptm(base), tol)
    out = {}
    if not report.completely_positive:
        for i in TOP_BLOCKS:
            out[i] = {"feasible": False, "min_choi_eigenvalue": report.min_choi_eigenvalue}
        return out
    for i in TOP_BLOCKS:
        j = i + 1
        if i == 0:
            d = np.zeros((16, 16))
            d[1, 0] = 1.0
            up = _max_feasible(base, d, tol, t_max)
            down = _max_feasible(base, -d, tol, t_max)
            out[i] = {"feasible": True, "labels": [_label(i), _label(j)],
                      "g_ji_range": [-down, up], "product_interval": [0.0, 0.0]}
            continue
        sym = np.zeros((16, 16))
        sym[i, j] = sym[j, i] = 1.0
        anti = np.zeros((16, 16))
        anti[i, j], anti[j, i] = 1.0, -1.0
        ts = max(_max_feasible(base, sym, tol, t_max), _max_feasible(base, -sym, tol, t_max))
        ta = max(_max_feasible(base, anti, tol, t_max), _max_feasible(base, -anti, tol, t_max))
        out[i] = {"feasible": True, "labels": [_label(i), _label(j)],
                  "t_sym": ts, "t_anti": ta, "product_interval": [-ta * ta, ts * ts]}
    return out


# ---------------------------------------------------------------------------
# pipeline


def statistical_tol(learned: LearnedPtm, k: float = 3.0, floor: float = 1e-9) -> float:
    """Choi-eigenvalue slack matching ``k`` standard errors of the estimates.

    A PTM entry perturbed by e moves Choi eigenvalues by at most about e/16
    per entry for two qubits, so noisy reconstructions get ``k*max(se)/16``.
    """
    ests = [*learned.type1.values(), *learned.type2.values(), *learned.type3_products.values()]
    se = max((e.stderr for e in ests if np.isfinite(e.stderr)), default=0.0)
    return max(floor, k * se / 16)


def learn_gate(gate: Ptm, spam: SpamModel, theta_nominal: float,
               knobs: LearningKnobs = LearningKnobs(), type4_tol: float | str = "auto"):
    """Run all three schemes; returns the LearnedPtm and the per-scheme runs.

    ``type4_tol="auto"`` bounds the Type-4 entries with a Choi tolerance
    derived from the estimate uncertainties (see :func:`statistical_tol`).
    """
    mcb = run_modified_cb(gate, spam, knobs)
    ptb = run_partial_twirl_benchmark(gate, spam, theta_nominal, knobs)
    ctb = run_correlated_twirl_benchmark(gate, spam, ptb.estimates, knobs)
    fits = {}
    for name, run in (("modified_cb", mcb), ("partial_twirl", ptb), ("correlated_twirl", ctb)):
        fits[name] = {_label(i): f.to_json() for i, f in sorted(run.fits.items())}
    learned = LearnedPtm(theta_nominal, mcb.estimates, ctb.estimates, ptb.estimates, fits=fits)
    for i, ok in learned.weak_noise_flags().items():
        if not ok:
            learned.flags.append(f"block {_label(i)} outside the weak-noise regime")
    if any(e.value < 0 for e in ctb.estimates.values()):
        learned.flags.append("negative Type-2 estimate")
    tol = statistical_tol(learned) if type4_tol == "auto" else float(type4_tol)
    learned.type4_bounds = bound_type4(learned, tol)
    if not all(b["feasible"] for b in learned.type4_bounds.values()):
        learned.flags.append("learned channel is not CPTP at Type-4 = 0")
    return learned, {"modified_cb": mcb, "partial_twirl": ptb, "correlated_twirl": ctb}
