"""Closed-form analysis: Fisher information, circuit-to-circuit spread,
overhead formulas for the two worked examples, and approximate amplification.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import paulis
from .errors import SingularError, ValidationError
from .noise import lindblad_example_closed_form
from .ptm import Ptm, rotation_block, rzz_ptm
from .shaping import CharacteristicMatrix, QuasiProbMatrix, quasi_probs
from .shots import COMMUTING_TWIRL_EACH, CORRELATED_PAIRS, FULL_TWIRL_EACH

G_XMAX = 10.0
TOP_BLOCKS = (0, 2, 4, 6)
BOTTOM_BLOCKS = (8, 10, 12, 14)


# ---------------------------------------------------------------------------
# Fisher information


def g_of_x(x):
    """``x**2 / (4 (e**x - 1))``, continued to 0 at x = 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x == 0, 0.0, x * x / (4 * np.expm1(x)))
    return out if out.ndim else float(out)


def fisher_optimum(xatol: float = 1e-10) -> tuple[float, float]:
    """Maximizer of g on (0, 10] and the maximum value."""
    res = minimize_scalar(lambda x: -g_of_x(x), bounds=(1e-12, G_XMAX), method="bounded",
                          options={"xatol": xatol})
    return float(res.x), float(-res.fun)


def _check_exp(a: float, r: float) -> None:
    if not 0 < a <= 1:
        raise ValidationError("amplitude must lie in (0, 1]")
    if r >= 1:
        raise ValidationError("r >= 1: information grows without bound, no finite optimum")
    if r <= 0:
        raise ValidationError("r must be positive")


def fisher_exp(a: float, r: float, d):
    """Per-shot information about r from an ``A r**d`` decay at depth d."""
    _check_exp(a, r)
    d = np.asarray(d, dtype=float)
    mu2 = a * a * r ** (2 * d)
    # d = 0 carries no information, even when A = 1 makes mu2 = 1
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(d == 0, 0.0, mu2 / (1 - mu2) * d * d / (r * r))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FisherReport:
    parameter: str
    depths: tuple
    values: tuple
    d_star: int
    max_information: float

    def to_json(self) -> dict:
        return {"parameter": self.parameter, "depths": list(self.depths),
                "values": list(self.values), "d_star": self.d_star,
                "max_information": self.max_information}


def fisher_max_exp(a: float, r: float) -> tuple[int, float]:
    """Integer depth maximizing :func:`fisher_exp` and the maximum.

    The continuous optimum is ``x* / (2 ln(1/r))``; floor and ceil are both
    evaluated and the better one kept.
    """
    _check_exp(a, r)
    x_star, _ = fisher_optimum()
    d_cont = x_star / (2 * np.log(1 / r))
    cands = [max(int(np.floor(d_cont)), 1), max(int(np.ceil(d_cont)), 1)]
    vals = [fisher_exp(a, r, d) for d in cands]
    k = int(np.argmax(vals))
    return cands[k], float(vals[k])


def fisher_report(a: float, r: float, depths) -> FisherReport:
    vals = fisher_exp(a, r, np.asarray(depths))
    d_star, best = fisher_max_exp(a, r)
    return FisherReport("r", tuple(int(d) for d in depths), tuple(map(float, np.atleast_1d(vals))),
                        d_star, best)


def fisher_damped_bounds(a: float, r: float, omega: float, delta: float, d) -> dict:
    """Per-depth information about r, omega and delta for a damped cosine.

    Includes the bounds ``I_delta <= A**2`` and ``I_omega <= (A r**d d)**2``.
    """
    d = np.asarray(d, dtype=float)
    phase = omega * d - delta
    amp = a * r ** d
    mu = amp * np.cos(phase)
    denom = 1 - mu * mu
    if np.any(denom <= 0):
        raise ValidationError("|mu| reaches 1; information undefined")
    i_r = (a * d * r ** (d - 1) * np.cos(phase)) ** 2 / denom
    i_omega = (amp * d * np.sin(phase)) ** 2 / denom
    i_delta = (amp * np.sin(phase)) ** 2 / denom
    bound_omega = (amp * d) ** 2
    return {
        "I_r": i_r, "I_omega": i_omega, "I_delta": i_delta,
        "bound_delta": a * a, "bound_omega": bound_omega,
        "delta_ok": bool(np.all(i_delta <= a * a + 1e-15)),
        "omega_ok": bool(np.all(i_omega <= bound_omega * (1 + 1e-12) + 1e-15)),
    }


# ---------------------------------------------------------------------------
# concentration


def variance_mu_hat(mu: float, delta: float, n_circuits: int, shots_per_circuit: int) -> float:
    """Variance of the pooled mean over N_c circuits with N_s/c shots each."""
    n_tot = n_circuits * shots_per_circuit
    return (1 - mu * mu) / n_tot + (shots_per_circuit - 1) / shots_per_circuit * delta ** 2 / n_circuits


def _block_layer(theta: float, commuting: bool) -> tuple[np.ndarray, np.ndarray]:
    """Ideal 2x2 block and its image under an anti-commuting twirl."""
    if commuting:
        b = np.eye(2)
    else:
        b = rotation_block(theta)
    flipped = b * np.array([[1, -1], [-1, 1]])
    return b, flipped


def transfer_matrix(scheme: str, theta: float, commuting: bool = False) -> tuple[np.ndarray, int]:
    """4x4 second-moment transfer matrix per step and the step length in gates."""
    b, bt = _block_layer(theta, commuting)
    if scheme == FULL_TWIRL_EACH:
        return 0.5 * (np.kron(b, b) + np.kron(bt, bt)), 1
    if scheme == COMMUTING_TWIRL_EACH:
        return np.kron(b, b), 1
    if scheme == CORRELATED_PAIRS:
        p, q = b @ bt, bt @ b
        return 0.5 * (np.kron(p, p) + np.kron(q, q)), 2
    raise ValidationError(f"unknown twirl scheme {scheme!r}")


def _mean_matrix(scheme: str, theta: float, commuting: bool) -> tuple[np.ndarray, int]:
    b, bt = _block_layer(theta, commuting)
    if scheme == FULL_TWIRL_EACH:
        return 0.5 * (b + bt), 1
    if scheme == COMMUTING_TWIRL_EACH:
        return b, 1
    if scheme == CORRELATED_PAIRS:
        return 0.5 * (b @ bt + bt @ b), 2
    raise ValidationError(f"unknown twirl scheme {scheme!r}")


def predict_delta(scheme: str, theta: float, d: int, s_pair=(1.0, 0.0),
                  commuting: bool = False) -> float:
    """Spread of the first block component over random noiseless circuits."""
    v, step = transfer_matrix(scheme, theta, commuting)
    m, _ = _mean_matrix(scheme, theta, commuting)
    if d < 0 or d % step:
        raise ValidationError(f"depth {d} incompatible with scheme {scheme}")
    k = d // step
    s = np.asarray(s_pair, dtype=float)
    second = (np.linalg.matrix_power(v, k) @ np.kron(s, s))[0]
    mu = (np.linalg.matrix_power(m, k) @ s)[0]
    return float(np.sqrt(max(second - mu * mu, 0.0)))


def delta_closed_form(theta: float, d: int) -> float:
    """Full-twirl spread for an anti-commuting observable starting at (1, 0)."""
    val = 0.5 * (1 + np.cos(2 * theta) ** d - 2 * np.cos(theta) ** (2 * d))
    return float(np.sqrt(max(val, 0.0)))


# ---------------------------------------------------------------------------
# coherent over-rotation (example1 helpers)


def _cs(theta: float, eps: float) -> tuple[float, float]:
    cd, sd = np.cos(theta + eps), np.sin(theta + eps)
    if abs(cd) < 1e-12 or abs(sd) < 1e-12:
        raise SingularError("rotation angle is at a singular point")
    return np.cos(theta) / cd, np.sin(theta) / sd


def gamma_example1(theta: float, eps: float, x: float, y: float | None = None) -> float:
    """Overhead for cancelling an over-rotation with top-block free entries x, y."""
    c, s = _cs(theta, eps)
    y = x if y is None else y
    t = x + y
    tot = (8 * abs(x - y) + abs(2 + t + 2 * c + 2 * s) + abs(2 + t - 2 * c - 2 * s)
           + abs(2 - t - 2 * c + 2 * s) + abs(2 - t + 2 * c - 2 * s))
    return tot / 8


def minimize_gamma_example1(theta: float, eps: float) -> tuple[float, float]:
    """``(x*, gamma*) = (m, M)``."""
    c, s = _cs(theta, eps)
    big = max(abs(c), abs(s))
    small = np.sign(c * s) * min(abs(c), abs(s))
    return float(small), float(big)


def example1_characteristic(theta: float, eps: float, x: float, y: float | None = None) -> CharacteristicMatrix:
    """C cancelling R_ZZ(theta + eps) -> R_ZZ(theta) with x, y in every top block."""
    from .shaping import characteristic_matrix
    y = x if y is None else y
    cm = characteristic_matrix(rzz_ptm(theta), rzz_ptm(theta + eps))
    fill = np.zeros_like(cm.c)
    for i in TOP_BLOCKS:
        fill[i, i + 1], fill[i + 1, i] = x, y
    return cm.with_free(fill)


# ---------------------------------------------------------------------------
# Lindblad cancellation (example2 helpers)


def _check_eps(eps: float) -> None:
    if not 0 <= eps < 0.5:
        raise ValidationError("eps must lie in [0, 1/2)")


def gamma_example2(eps: float, x: float) -> float:
    """Overhead for cancelling the example Lindblad channel with free entry x."""
    _check_eps(eps)
    e = eps
    a = 1 / (1 - 2 * e) + 6 / (1 - e)
    h = 16 / np.sqrt(1 - 2 * e)
    b = 1 / (2 * e - 1)
    k = 2 * e * e / (1 - 3 * e + 2 * e * e)
    return (abs(1 - x + a) / 16
            + (abs(1 + x + a - h) + abs(1 + x + a + h)) / 32
            + (abs(1 - x + b) + abs(1 + x + b)) / 4
            + 3 * (abs(x - k) + abs(x + k)) / 16)


def gamma_example2_limit(x):
    x = np.asarray(x, dtype=float)
    out = (28 * np.abs(x) + 3 * np.abs(x - 8) + np.abs(x + 24)) / 32
    return out if out.ndim else float(out)


def example2_characteristic(eps: float, x: float) -> CharacteristicMatrix:
    from .shaping import characteristic_matrix
    _check_eps(eps)
    g = lindblad_example_closed_form(0.4, eps)
    cm = characteristic_matrix(rzz_ptm(0.4), g)
    fill = np.zeros_like(cm.c)
    fill[0, 1] = x
    return cm.with_free(fill)


# ---------------------------------------------------------------------------
# free-entry optimizer


def block_tie_mask(cm: CharacteristicMatrix) -> np.ndarray:
    """Free entries that sit inside the 2x2 block-diagonal support."""
    size = cm.c.shape[0]
    idx = np.arange(size) // 2
    return cm.free_mask & (idx[:, None] == idx[None, :])


def minimize_free_gamma(cm: CharacteristicMatrix, tie_mask=None) -> tuple[float, float, CharacteristicMatrix]:
    """Exact minimizer of gamma when the tied free entries share one value x.

    Free entries outside ``tie_mask`` are set to zero. Q is affine in x, so
    gamma(x) = sum |a + x b| is convex piecewise linear and minimized at a
    weighted median of the breakpoints -a/b with weights |b|.
    """
    tie = block_tie_mask(cm) if tie_mask is None else np.asarray(tie_mask, dtype=bool) & cm.free_mask
    base = cm.with_free(0.0)
    a = quasi_probs(base).q.ravel()
    unit = np.zeros_like(base.c)
    unit[tie] = 1.0
    b = quasi_probs(unit).q.ravel()
    nz = np.abs(b) > 1e-15
    if not nz.any():
        return 0.0, float(np.abs(a).sum()), base
    pts = -a[nz] / b[nz]
    w = np.abs(b[nz])
    order = np.argsort(pts)
    cw = np.cumsum(w[order])
    x = float(pts[order][np.searchsorted(cw, 0.5 * cw[-1])])
    fill = np.where(tie, x, 0.0)
    best = cm.with_free(fill)
    return x, quasi_probs(best).gamma, best


# ---------------------------------------------------------------------------
# approximate amplification


def eta(g_ii: float, g_jj: float, alpha: float, gap: float = 1e-12) -> float:
    """``(g_ii**(1+a) - g_jj**(1+a)) / (g_ii - g_jj)``, limit ``(1+a) g_ii**a``."""
    if g_ii <= 0 or g_jj <= 0:
        raise ValidationError("diagonal entries must be positive")
    if abs(g_ii - g_jj) <= gap:
        mid = 0.5 * (g_ii + g_jj)
        return float((1 + alpha) * mid ** alpha)
    return float((g_ii ** (1 + alpha) - g_jj ** (1 + alpha)) / (g_ii - g_jj))


@dataclass(frozen=True, eq=False)
class AmplificationPlan:
    alpha: float
    eta: dict
    c: np.ndarray
    gamma: float
    order: str = "first"
    quasi: QuasiProbMatrix | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "order": self.order,
            "eta": {paulis.label_of(i, 2): v for i, v in sorted(self.eta.items())},
            "gamma": self.gamma,
            "c": [[float(v) for v in row] for row in self.c],
        }


def approx_amplification(top_pairs, alpha: float, eps_report: float | None = None,
                         bottom_r=None, order: str = "first") -> AmplificationPlan:
    """Characteristic matrix scaling the noise to roughly N**(1+alpha).

    ``top_pairs`` maps each top block start (0, 2, 4, 6) to its diagonal pair
    (G_ii, G_jj), or is a sequence in that order. Bottom blocks use the
    damping ``bottom_r`` (scalar or one per block); without it ``eps_report``
    gives ``r = sqrt(1 - 2 eps)``.

    ``order="first"`` linearizes in the noise: diagonals ``1 + a (G_ii - 1)``,
    off-diagonals ``1 + a``, bottom blocks ``1 - a eps_b`` with
    ``r**2 = 1 - 2 eps_b``. ``order="exact"`` uses exact powers and eta.
    The block-0 entry above the diagonal is free and set to ``1 + a``.
    """
    if alpha < 0:
        raise ValidationError("alpha must be non-negative")
    if order not in ("first", "exact"):
        raise ValidationError(f"unknown order {order!r}")
    if not isinstance(top_pairs, dict):
        top_pairs = dict(zip(TOP_BLOCKS, top_pairs))
    if sorted(top_pairs) != list(TOP_BLOCKS):
        raise ValidationError("need diagonal pairs for the four top blocks")
    if bottom_r is None:
        if eps_report is None:
            raise ValidationError("give bottom_r or eps_report")
        _check_eps(eps_report)
        bottom_r = np.sqrt(1 - 2 * eps_report)
    rs = np.broadcast_to(np.asarray(bottom_r, dtype=float), (4,))
    if np.any(rs <= 0):
        raise ValidationError("bottom damping must be positive")

    c = np.zeros((16, 16))
    etas = {}
    for i in TOP_BLOCKS:
        gi, gj = map(float, top_pairs[i])
        etas[i] = eta(gi, gj, alpha)
        if order == "first":
            di, dj, off = 1 + alpha * (gi - 1), 1 + alpha * (gj - 1), 1 + alpha
        else:
            di, dj, off = gi ** alpha, gj ** alpha, etas[i]
        c[i:i + 2, i:i + 2] = [[di, off], [off, dj]]
    c[0, 1] = 1 + alpha
    for k, i in enumerate(BOTTOM_BLOCKS):
        r = rs[k]
        c[i:i + 2, i:i + 2] = 1 - alpha * (1 - r * r) / 2 if order == "first" else r ** alpha
    q = quasi_probs(c)
    return AmplificationPlan(float(alpha), etas, c, q.gamma, order, q)


def example2_amplification(eps: float, alpha: float, order: str = "first") -> AmplificationPlan:
    g = lindblad_example_closed_form(0.4, eps).m
    pairs = {i: (g[i, i], g[i + 1, i + 1]) for i in TOP_BLOCKS}
    return approx_amplification(pairs, alpha, eps_report=eps, order=order)


def _real_power(block: np.ndarray, p: float) -> np.ndarray:
    w, v = np.linalg.eig(block)
    if np.any(np.abs(w.imag) > 1e-12) or np.any(w.real <= 0):
        raise ValidationError("matrix power needs a real positive spectrum")
    return (v @ np.diag(w.real ** p) @ np.linalg.inv(v)).real


def amplified_target(theta: float, eps: float, alpha: float) -> Ptm:
    """``U N**(1+alpha)`` for the example channel, powers taken blockwise."""
    n = np.eye(16)
    base = lindblad_example_closed_form(0.0, eps).m
    for i in range(0, 16, 2):
        blk = base[i:i + 2, i:i + 2]
        if i in TOP_BLOCKS:
            n[i:i + 2, i:i + 2] = _real_power(blk, 1 + alpha)
        else:
            # bottom noise blocks are r * identity
            n[i:i + 2, i:i + 2] = blk[0, 0] ** (1 + alpha) * np.eye(2)
    return Ptm(rzz_ptm(theta).m @ n)


def amplification_residual(theta: float, eps: float, alpha: float, order: str = "first") -> float:
    plan = example2_amplification(eps, alpha, order)
    g = lindblad_example_closed_form(theta, eps).m
    return float(np.abs(plan.c * g - amplified_target(theta, eps, alpha).m).max())


# ---------------------------------------------------------------------------
# sweeps


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def sweep_g_of_x(xs=None) -> str:
    xs = np.linspace(0.01, G_XMAX, 1000) if xs is None else np.asarray(xs, dtype=float)
    x_star, g_star = fisher_optimum()
    rows = [("grid", x, g_of_x(x)) for x in xs]
    rows.append(("optimum", x_star, g_star))
    return _csv(["kind", "x", "g"], rows)


def sweep_delta(theta: float, depths, scheme: str = FULL_TWIRL_EACH) -> str:
    rows = []
    for d in depths:
        rows.append((int(d), predict_delta(scheme, theta, int(d)), delta_closed_form(theta, int(d))))
    return _csv(["d", "delta_predicted", "delta_closed_form"], rows)


def sweep_gamma_example1(theta: float, eps: float, xs) -> str:
    return _csv(["x", "gamma"], [(x, gamma_example1(theta, eps, x)) for x in xs])


def sweep_gamma_example2(eps: float, xs) -> str:
    return _csv(["x", "gamma", "gamma_limit"],
                [(x, gamma_example2(eps, x), gamma_example2_limit(x)) for x in xs])


def sweep_fisher_exp(a: float, r: float, depths) -> str:
    return _csv(["d", "information"], [(int(d), fisher_exp(a, r, d)) for d in depths])
