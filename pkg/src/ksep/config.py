"""INI-style experiment configuration.

Sections: ``experiment``, ``kernel``, ``profile``, ``L_rule``, ``intervals``,
``tolerances``, ``exact``, ``intensity`` and ``kappa_tau``.  Every key is
optional; missing keys take the values in ``DEFAULTS``.  Errors name the
offending field as ``section.key``.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

from .errors import ConfigError
from .experiments import L_KINDS, LRule
from .kernel import JumpKernel, validate
from .profiles import BinomialStep, DeterministicStep, InitialProfile, ProductPeriodic

DEFAULTS = {
    "experiment": {"K": "1", "times": "2000", "replicas": "1000", "seed": "0", "keep": "64",
                   "ranks": "4", "target": "auto"},
    "kernel": {"type": "nearest_neighbor"},
    "profile": {"variant": "step"},
    "L_rule": {"kind": "c_bt", "c": "10", "gamma": "0.25", "share": "true"},
    "intervals": {"counts": "(1, 2], (2, 3], (3, 4]", "mean": "(0, inf)"},
    "tolerances": {"level": "0.01", "band": "0.01", "cap": "0.08", "ratio_band": "0.85, 1.15",
                   "corr_band": "0.05", "mean_rel": "0.15", "route_rel": "1e-8",
                   "bound_tol": "1e-9", "check_decay": "true"},
    "exact": {"seed": "0", "instances": "20"},
    "intensity": {"points": "(1, 0.3), (10, -2.5), (100, 5), (1000, 40.2), (0.5, 0), "
                            "(5, 1.7), (50, -10), (200, 12.5), (2000, 60), (4000, -30)"},
    "kappa_tau": {"times": "50, 200, 800, 3200", "A": "(0, 1]", "B": "(-inf, 0]"},
}

_INTERVAL = re.compile(r"\(\s*([^,\s]+)\s*,\s*([^\]\s]+)\s*[\]\)]")
_PAIR = re.compile(r"\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)")


def _float(path: str, s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(path, f"expected a number, got {s!r}") from None


def _int(path: str, s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ConfigError(path, f"expected an integer, got {s!r}") from None


def _bool(path: str, s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(path, f"expected a boolean, got {s!r}")


def _floats(path: str, s: str) -> list[float]:
    return [_float(path, x) for x in s.split(",") if x.strip()]


def parse_intervals(path: str, s: str) -> list[tuple[float, float]]:
    """'(a, b], (c, inf)' -> [(a, b), (c, inf)] with half-open (a, b] semantics."""
    out = [(_float(path, a), _float(path, b)) for a, b in _INTERVAL.findall(s)]
    if not out:
        raise ConfigError(path, f"no intervals found in {s!r}")
    for a, b in out:
        if not a < b:
            raise ConfigError(path, f"empty interval ({a}, {b}]")
    return out


def _pairs(path: str, s: str) -> list[tuple[float, float]]:
    out = [(_float(path, a), _float(path, b)) for a, b in _PAIR.findall(s)]
    if not out:
        raise ConfigError(path, f"no (t, y) pairs found in {s!r}")
    return out


def _kernel(sec) -> JumpKernel:
    kind = sec["type"]
    if kind == "nearest_neighbor":
        return JumpKernel.nearest_neighbor()
    if kind == "pairs":
        if "pairs" not in sec:
            raise ConfigError("kernel.pairs", "required for type = pairs")
        pairs = []
        for item in sec["pairs"].split(","):
            try:
                y, p = item.split(":")
                pairs.append((int(y), float(p)))
            except ValueError:
                raise ConfigError("kernel.pairs", f"bad entry {item.strip()!r}; use offset:prob") from None
        eps = _float("kernel.truncation_eps", sec.get("truncation_eps", "0"))
        try:
            kernel = JumpKernel.from_pairs(pairs, eps)
            validate(kernel, strict=True)
            return kernel
        except ValueError as exc:
            raise ConfigError("kernel.pairs", str(exc)) from None
    raise ConfigError("kernel.type", f"unknown kernel type {kind!r}")


def _profile(sec, K: int) -> InitialProfile:
    variant = sec["variant"]
    L = sec.get("L", "inf")
    L = math.inf if L.strip() == "inf" else _int("profile.L", L)
    try:
        if variant == "step":
            layers = _int("profile.layers", sec["layers"]) if "layers" in sec else None
            return DeterministicStep(K, L, layers)
        if variant == "binomial":
            return BinomialStep(K, _float("profile.alpha", sec.get("alpha", "")), L)
        if variant == "periodic":
            return ProductPeriodic.from_means(K, _floats("profile.means", sec.get("means", "")), L)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"profile.{variant}", str(exc)) from None
    raise ConfigError("profile.variant", f"unknown variant {variant!r}")


def _rule(sec) -> LRule:
    kind = sec["kind"]
    if kind not in L_KINDS:
        raise ConfigError("L_rule.kind", f"expected one of {L_KINDS}, got {kind!r}")
    L = _int("L_rule.L", sec["L"]) if "L" in sec else None
    try:
        return LRule(kind, _float("L_rule.c", sec["c"]), _float("L_rule.gamma", sec["gamma"]), L,
                     _bool("L_rule.share", sec["share"]))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("L_rule", str(exc)) from None


@dataclass
class ExperimentConfig:
    raw: dict
    path: str | None
    K: int
    times: list[float]
    replicas: int
    seed: int
    keep: int
    ranks: int
    target: str
    kernel: JumpKernel
    profile: InitialProfile
    rule: LRule
    count_intervals: list
    mean_set: list
    tolerances: dict
    exact_seed: int
    exact_instances: int
    intensity_points: list
    kt_times: list[float]
    kt_A: list
    kt_B: list
    extra: dict = field(default_factory=dict)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        self.seed = int(seed)
        self.raw["experiment"]["seed"] = str(seed)
        return self


def load_config(path=None, text: str | None = None) -> ExperimentConfig:
    """Read a config file (or ``text``) over the defaults."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_dict(DEFAULTS)
    try:
        if text is not None:
            cp.read_string(text)
        elif path is not None:
            with open(path) as fh:
                cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(str(path), f"malformed config: {exc}") from None
    unknown = set(cp.sections()) - set(DEFAULTS)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown section")
    raw = {s: dict(cp[s]) for s in cp.sections()}
    ex = raw["experiment"]
    K = _int("experiment.K", ex["K"])
    if K < 1:
        raise ConfigError("experiment.K", "must be at least 1")
    times = _floats("experiment.times", ex["times"])
    if not times or any(not t > 1 for t in times):
        raise ConfigError("experiment.times", "need at least one time, all greater than 1")
    target = ex["target"]
    if target not in ("auto", "full", "psi", "block"):
        raise ConfigError("experiment.target", f"unknown target {target!r}")
    tol = raw["tolerances"]
    band = _floats("tolerances.ratio_band", tol["ratio_band"])
    if len(band) != 2:
        raise ConfigError("tolerances.ratio_band", "expected two numbers")
    tolerances = {k: _float(f"tolerances.{k}", tol[k])
                  for k in ("level", "band", "cap", "corr_band", "mean_rel", "route_rel", "bound_tol")}
    tolerances["ratio_band"] = tuple(band)
    tolerances["check_decay"] = _bool("tolerances.check_decay", tol["check_decay"])
    kt = raw["kappa_tau"]
    return ExperimentConfig(
        raw=raw, path=None if path is None else str(path), K=K, times=times,
        replicas=_int("experiment.replicas", ex["replicas"]),
        seed=_int("experiment.seed", ex["seed"]), keep=_int("experiment.keep", ex["keep"]),
        ranks=_int("experiment.ranks", ex["ranks"]), target=target,
        kernel=_kernel(raw["kernel"]), profile=_profile(raw["profile"], K), rule=_rule(raw["L_rule"]),
        count_intervals=parse_intervals("intervals.counts", raw["intervals"]["counts"]),
        mean_set=parse_intervals("intervals.mean", raw["intervals"]["mean"]),
        tolerances=tolerances, exact_seed=_int("exact.seed", raw["exact"]["seed"]),
        exact_instances=_int("exact.instances", raw["exact"]["instances"]),
        intensity_points=_pairs("intensity.points", raw["intensity"]["points"]),
        kt_times=_floats("kappa_tau.times", kt["times"]),
        kt_A=parse_intervals("kappa_tau.A", kt["A"]), kt_B=parse_intervals("kappa_tau.B", kt["B"]))
