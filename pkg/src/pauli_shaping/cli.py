"""File-driven command line: learn, shape, simulate, analyze.

Every subcommand reads a JSON config (``--config``), writes its outputs into
``--out`` and returns 0 on success, 1 on configuration or input errors and 2
when a statistical warning is raised (e.g. an unconverged fit).
"""
from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError as SchemaError, field_validator

from . import analysis, learning, noise, paulis, shaping, shots
from .errors import PauliShapingError, UnreachableTarget
from .ptm import pauli_eigenstate, rzz_ptm

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_WARN = 2


class ConfigError(Exception):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class _Versioned(_Strict):
    schema_version: Literal[1]


def _noise_dict(v: dict | None) -> dict | None:
    if v is not None:
        try:
            noise.noise_spec_from_json(v)
        except (PauliShapingError, KeyError, TypeError) as exc:
            raise ValueError(f"invalid noise spec: {exc}") from exc
    return v


class SpamConfig(_Strict):
    prep_scale: float = 1.0
    flip: float | None = None
    p01: list[float] | None = None
    p10: list[float] | None = None

    def build(self) -> noise.SpamModel:
        if self.p01 is not None or self.p10 is not None:
            if self.p01 is None or self.p10 is None or self.flip is not None:
                raise ConfigError("spam: give both p01 and p10, or flip alone")
            return noise.SpamModel.from_flips(self.p01, self.p10, self.prep_scale)
        return noise.SpamModel.symmetric(2, self.flip or 0.0, self.prep_scale)


class KnobsConfig(_Strict):
    n_circuits: int = Field(100, ge=1)
    shots_per_circuit: int = Field(2000, ge=1)
    exp_depths: list[int] = list(learning.LearningKnobs.exp_depths)
    cos_depths: list[int] = list(learning.LearningKnobs.cos_depths)
    ctb_depths: list[int] = list(learning.LearningKnobs.ctb_depths)
    readout_twirl: bool = True
    state_prep_twirl: bool = True


class LearnConfig(_Versioned):
    noise: dict
    spam: SpamConfig = SpamConfig()
    knobs: KnobsConfig = KnobsConfig()
    theta_nominal: float | None = None
    type4_tol: Union[float, Literal["auto"]] = "auto"
    seed: int = 0

    @field_validator("noise")
    @classmethod
    def _noise(cls, v):
        return _noise_dict(v)


class CancelTarget(_Strict):
    kind: Literal["cancel"]
    theta: float | None = None


class AmplifyTarget(_Strict):
    kind: Literal["amplify"]
    alpha: float = Field(ge=0)
    order: Literal["first", "exact"] = "first"


class ShapeConfig(_Versioned):
    learned: str | None = None
    noise: dict | None = None
    target: Annotated[Union[CancelTarget, AmplifyTarget], Field(discriminator="kind")]
    free_fill: Union[Literal["zero", "one", "optimize"], float] = "zero"
    drop_threshold: float = shaping.DROP_THRESHOLD

    @field_validator("noise")
    @classmethod
    def _noise(cls, v):
        return _noise_dict(v)


class SimulateConfig(_Versioned):
    noise: dict
    plan: str | None = None
    spam: SpamConfig | None = None
    initial: str = "XI"
    initial_eigenvalue: Literal[1, -1] = 1
    observable: str = "XI"
    shots: int = Field(100_000, ge=1)
    theta_ideal: float | None = None
    seed: int = 0

    @field_validator("noise")
    @classmethod
    def _noise(cls, v):
        return _noise_dict(v)


class GOfX(_Strict):
    name: Literal["g-of-x"]
    x_max: float = analysis.G_XMAX
    points: int = Field(1000, ge=2)


class DeltaSweep(_Strict):
    name: Literal["delta-mcb"]
    theta: float = 0.7
    depths: list[int] = list(range(21))


class FisherSweep(_Strict):
    name: Literal["fisher-exp"]
    a: float = 1.0
    r: float = 0.99
    depths: list[int] = list(range(0, 201))


class Gamma1Sweep(_Strict):
    name: Literal["gamma-example1"]
    theta: float = 0.4
    eps: float = 0.05
    xs: list[float] = list(np.linspace(-3, 3, 121))


class Gamma2Sweep(_Strict):
    name: Literal["gamma-example2"]
    eps: float = 0.01
    xs: list[float] = list(np.linspace(-30, 30, 121))


class AmplifySweep(_Strict):
    name: Literal["amplification"]
    theta: float = 0.4
    alphas: list[float] = [0.5, 1.0]
    eps: list[float] = [0.02, 0.01, 0.005]


Request = Annotated[Union[GOfX, DeltaSweep, FisherSweep, Gamma1Sweep, Gamma2Sweep, AmplifySweep],
                    Field(discriminator="name")]


class AnalyzeConfig(_Versioned):
    requests: list[Request] = []


# ---------------------------------------------------------------------------
# helpers


def _load_config(path: str, model):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        return model.model_validate(raw)
    except SchemaError as exc:
        raise ConfigError(str(exc)) from exc


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, payload: dict) -> None:
    body = dict(_clean(payload))
    body["timestamp"] = datetime.now(timezone.utc).isoformat()
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _resolve(base: Path, name: str) -> str:
    p = Path(name)
    return str(p if p.is_absolute() else base / p)


# ---------------------------------------------------------------------------
# commands


def cmd_learn(cfg: LearnConfig, out: Path, seed: int | None = None, threads: int = 1) -> int:
    spec = noise.noise_spec_from_json(cfg.noise)
    gate = noise.build_gate_ptm(spec)
    theta = cfg.theta_nominal if cfg.theta_nominal is not None else noise.nominal_theta(spec)
    if theta is None:
        raise ConfigError("theta_nominal is required for an explicit PTM without theta")
    k = cfg.knobs
    knobs = learning.LearningKnobs(k.n_circuits, k.shots_per_circuit, tuple(k.exp_depths),
                                   tuple(k.cos_depths), tuple(k.ctb_depths),
                                   cfg.seed if seed is None else seed, threads,
                                   k.readout_twirl, k.state_prep_twirl)
    learned, runs = learning.learn_gate(gate, cfg.spam.build(), theta, knobs, cfg.type4_tol)
    rows = []
    for name, run in runs.items():
        for idx, curve in sorted(run.curves.items()):
            rows.extend((name, paulis.label_of(idx, 2), rec) for rec in curve)
    (out / "curves.csv").write_text(shots.decays_to_csv(rows))
    payload = learned.to_json()
    payload["n_estimates"] = learned.count()
    payload["all_converged"] = learned.all_converged()
    payload["seed"] = knobs.seed
    _write_json(out / "learned.json", payload)
    if not learned.all_converged():
        print("warning: at least one fit did not converge", file=sys.stderr)
        return EXIT_WARN
    return EXIT_OK


def _bottom_r(m: np.ndarray) -> list[float]:
    return [float(np.sqrt(max(np.linalg.det(m[i:i + 2, i:i + 2]), 0.0))) for i in analysis.BOTTOM_BLOCKS]


def cmd_shape(cfg: ShapeConfig, out: Path, base: Path = Path(".")) -> int:
    if (cfg.learned is None) == (cfg.noise is None):
        raise ConfigError("give exactly one of 'learned' or 'noise'")
    warnings = []
    if cfg.learned is not None:
        learned = learning.LearnedPtm.from_json(_read_json(_resolve(base, cfg.learned)))
        g = learned.ptm()
        theta = learned.theta
        warnings.append("Type-4 entries set to 0; CPTP-consistent bounds: "
                        + json.dumps(_clean({paulis.label_of(i, 2): b.get("product_interval")
                                             for i, b in learned.type4_bounds.items()})))
        warnings.append("Type-3 products split with G_ij = -G_ji")
    else:
        spec = noise.noise_spec_from_json(cfg.noise)
        g = noise.build_gate_ptm(spec)
        theta = noise.nominal_theta(spec)

    meta = {"target": cfg.target.model_dump(), "warnings": warnings}
    if isinstance(cfg.target, CancelTarget):
        theta = cfg.target.theta if cfg.target.theta is not None else theta
        if theta is None:
            raise ConfigError("cancel target needs a rotation angle")
        fill = "zero" if cfg.free_fill == "optimize" else cfg.free_fill
        cm = shaping.characteristic_matrix(rzz_ptm(theta), g, free_fill=fill)
        if cfg.free_fill == "optimize":
            x, _, cm = analysis.minimize_free_gamma(cm)
            meta["free_x"] = x
        q = shaping.quasi_probs(cm)
        meta["theta"] = theta
    else:
        m = g.m
        pairs = {i: (m[i, i], m[i + 1, i + 1]) for i in analysis.TOP_BLOCKS}
        amp = analysis.approx_amplification(pairs, cfg.target.alpha, bottom_r=_bottom_r(m),
                                            order=cfg.target.order)
        q = amp.quasi
        meta["eta"] = amp.to_json()["eta"]
    plan = shaping.ShapingPlan.from_quasi(q, cfg.drop_threshold, meta)
    _write_json(out / "plan.json", plan.to_json())
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(cfg: SimulateConfig, out: Path, seed: int | None = None, base: Path = Path(".")) -> int:
    spec = noise.noise_spec_from_json(cfg.noise)
    g = noise.build_gate_ptm(spec)
    if cfg.plan is None:
        plan = shaping.ShapingPlan.from_quasi(shaping.identity_quasi(2))
    else:
        plan = shaping.ShapingPlan.from_json(_read_json(_resolve(base, cfg.plan)))
    spam = cfg.spam.build() if cfg.spam is not None else None
    initial = pauli_eigenstate(cfg.initial, cfg.initial_eigenvalue)
    obs = paulis.as_pauli(cfg.observable, 2)
    theta = cfg.theta_ideal if cfg.theta_ideal is not None else noise.nominal_theta(spec)
    if theta is None:
        raise ConfigError("theta_ideal is required for an explicit PTM without theta")
    seed = cfg.seed if seed is None else seed
    rng = shots.stream(seed, 900)
    est, se = shots.estimate_shaped_expectation(g, plan, initial, obs, cfg.shots, rng, spam)
    ideal = float(rzz_ptm(theta).m[obs.index] @ initial.s)
    unmitigated = float(g.m[obs.index] @ initial.s)
    payload = {
        "estimate": est,
        "stderr": se,
        "ideal_value": ideal,
        "unmitigated_value": unmitigated,
        "expected_value": shots.shaped_expectation_exact(g, plan, initial, obs, spam),
        "bias": est - ideal,
        "bias_over_sigma": (est - ideal) / se if se > 0 else 0.0,
        "gamma": plan.gamma,
        "shots": cfg.shots,
        "seed": seed,
        "observable": obs.label,
        "initial": cfg.initial,
    }
    _write_json(out / "estimate.json", payload)
    return EXIT_OK


def _run_request(req) -> tuple[str, str]:
    if isinstance(req, GOfX):
        return "g_of_x.csv", analysis.sweep_g_of_x(np.linspace(req.x_max / req.points, req.x_max, req.points))
    if isinstance(req, DeltaSweep):
        return f"delta_mcb_theta{req.theta:g}.csv", analysis.sweep_delta(req.theta, req.depths)
    if isinstance(req, FisherSweep):
        return f"fisher_exp_r{req.r:g}.csv", analysis.sweep_fisher_exp(req.a, req.r, req.depths)
    if isinstance(req, Gamma1Sweep):
        return "gamma_example1.csv", analysis.sweep_gamma_example1(req.theta, req.eps, req.xs)
    if isinstance(req, Gamma2Sweep):
        return "gamma_example2.csv", analysis.sweep_gamma_example2(req.eps, req.xs)
    if isinstance(req, AmplifySweep):
        rows = []
        for a in req.alphas:
            for e in req.eps:
                plan = analysis.example2_amplification(e, a)
                rows.append((a, e, plan.gamma, 1 + a * (1 + e),
                             analysis.amplification_residual(req.theta, e, a)))
        return "amplification.csv", analysis._csv(["alpha", "eps", "gamma", "gamma_first_order", "residual"], rows)
    raise ConfigError(f"unknown analysis {req!r}")


def cmd_analyze(cfg: AnalyzeConfig, out: Path) -> int:
    seen: dict[str, int] = {}
    for req in cfg.requests:
        name, text = _run_request(req)
        if name in seen:
            seen[name] += 1
            stem, ext = name.rsplit(".", 1)
            name = f"{stem}_{seen[name]}.{ext}"
        else:
            seen[name] = 0
        (out / name).write_text(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "learn": LearnConfig,
    "shape": ShapeConfig,
    "simulate": SimulateConfig,
    "analyze": AnalyzeConfig,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pauli-shaping", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for shot simulation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    base = Path(args.config).resolve().parent
    try:
        cfg = _load_config(args.config, _COMMANDS[args.command])
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "learn":
            return cmd_learn(cfg, out, args.seed, args.threads)
        if args.command == "shape":
            return cmd_shape(cfg, out, base)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args.seed, base)
        return cmd_analyze(cfg, out)
    except UnreachableTarget as exc:
        print(f"error: {exc}; offending indices {exc.indices}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, PauliShapingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
