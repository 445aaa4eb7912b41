"""Weighted nonlinear fits of decay curves.

Two models: ``A r**d`` (EXP) and ``A r**d cos(omega d - delta)`` (DAMPED_COS).
Points are ``(d, mu_hat, stderr)`` tuples or DecayRecord-like objects. Weights
are ``1/stderr**2`` with stderr floored at 1e-4.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import ValidationError

EXP = "EXP"
DAMPED_COS = "DAMPED_COS"
STDERR_FLOOR = 1e-4
R_MAX = 1.05
_EDGE = 1e-9


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    uncertainties: dict
    residual_norm: float
    converged: bool
    message: str = ""
    covariance: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __getitem__(self, key: str) -> float:
        return self.params[key]

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "params": {k: float(v) for k, v in self.params.items()},
            "uncertainties": {k: float(v) for k, v in self.uncertainties.items()},
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "message": self.message,
        }


def _unpack(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = []
    for p in points:
        if hasattr(p, "mu_hat"):
            rows.append((p.d, p.mu_hat, p.stderr))
        else:
            rows.append(tuple(p))
    if not rows:
        raise ValidationError("no points to fit")
    d, mu, se = (np.array(c, dtype=float) for c in zip(*rows))
    return d, mu, np.maximum(se, STDERR_FLOOR)


def _finish(model, names, res) -> FitResult:
    jac = res.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
        unc = np.sqrt(np.clip(np.diag(cov), 0, None))
    except np.linalg.LinAlgError:
        cov = None
        unc = np.full(len(names), np.inf)
    return FitResult(
        model,
        dict(zip(names, map(float, res.x))),
        dict(zip(names, map(float, unc))),
        float(np.linalg.norm(res.fun)),
        bool(res.success),
        str(res.message),
        cov,
    )


def _exp_guess(d, mu) -> tuple[float, float]:
    pos = mu > 1e-3
    if pos.sum() >= 2 and np.ptp(d[pos]) > 0:
        slope, icpt = np.polyfit(d[pos], np.log(mu[pos]), 1)
        return float(np.clip(np.exp(icpt), 1e-3, 1.5)), float(np.clip(np.exp(slope), 1e-3, R_MAX - 1e-6))
    return float(np.clip(abs(mu[np.argmin(d)]), 1e-3, 1.5)), 0.9


def fit_exponential(points, max_nfev: int = 2000) -> FitResult:
    """Fit ``d -> A r**d`` by weighted least squares."""
    d, mu, se = _unpack(points)
    if len(np.unique(d)) < 3:
        raise ValidationError("exponential fit needs at least three distinct depths")
    if not np.any(np.abs(mu) > 3 * se):
        raise ValidationError("no point rises above the noise floor")

    def resid(x):
        return (x[0] * x[1] ** d - mu) / se

    a0, r0 = _exp_guess(d, mu)
    if mu[np.argmin(d)] < 0:
        a0 = -a0
    res = least_squares(resid, [a0, r0], bounds=([-2.0, _EDGE], [2.0, R_MAX]),
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    return _finish(EXP, ("A", "r"), res)


def damped_cosine(d, a, r, omega, delta):
    d = np.asarray(d, dtype=float)
    return a * r ** d * np.cos(omega * d - delta)


def fit_damped_cosine(points, theta_nominal: float, max_nfev: int = 4000) -> FitResult:
    """Fit ``d -> A r**d cos(omega d - delta)``.

    Starts from (1, 1, theta_nominal, 0); if that fit fails or leaves a poor
    chi-square, restarts at omega in {theta/2, theta, 2 theta} and keeps the best.
    """
    d, mu, se = _unpack(points)
    if len(np.unique(d)) < 6:
        raise ValidationError("damped-cosine fit needs at least six distinct depths")
    if not 0 < theta_nominal < np.pi:
        raise ValidationError("nominal angle must lie in (0, pi)")
    if np.ptp(d) * theta_nominal < 2 * np.pi:
        raise ValidationError("depths do not span one oscillation period at the nominal angle")

    def resid(x):
        return (damped_cosine(d, *x) - mu) / se

    lo = [-2.0, _EDGE, _EDGE, -np.pi / 2 + _EDGE]
    hi = [2.0, R_MAX, np.pi - _EDGE, np.pi / 2 - _EDGE]

    def run(omega0):
        x0 = [1.0, 1.0, float(np.clip(omega0, 1e-3, np.pi - 1e-3)), 0.0]
        return least_squares(resid, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15,
                             gtol=1e-15, max_nfev=max_nfev)

    dof = max(len(d) - 4, 1)
    best = run(theta_nominal)
    if not best.success or 2 * best.cost / dof > 4.0:
        for omega0 in (theta_nominal / 2, theta_nominal, 2 * theta_nominal):
            trial = run(omega0)
            if trial.cost < best.cost:
                best = trial
    return _finish(DAMPED_COS, ("A", "r", "omega", "delta"), best)
