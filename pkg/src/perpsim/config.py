"""Flat key-value experiment configuration.

The format is deliberately dumb: one ``dotted.key = value`` per line,
``#`` comments, no nesting ambiguity.  Law descriptions nest through key
prefixes (``model.eta.base.kind = pareto``).  Validation collects every
error before giving up rather than stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .errors import DomainError
from .laws import (Comonotone, Expm1, Exponential, Independent, JointLaw,
                   Lognormal, Normal, Pareto, PointMass, ScalarLaw, Shifted,
                   ShiftedExponential, Weibull)
from .modulated import ModulatedSpec

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "parse_kv",
           "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = (
    "tail-infinite", "tail-finite", "big-jump", "cramer", "prestationary",
    "exceedance", "modulated", "clt", "local", "green", "gamma",
    "diagnostics",
)


class ConfigError(ValueError):
    """Carries the full list of validation problems."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def parse_kv(text: str) -> Dict[str, str]:
    """Raw key-value pairs; duplicate keys are an error."""
    pairs: Dict[str, str] = {}
    errors: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            errors.append(f"line {lineno}: empty key")
            continue
        if key in pairs:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        pairs[key] = value
    if errors:
        raise ConfigError(errors)
    return pairs


class _Reader:
    """Typed access to the key-value map with error accumulation and
    used-key tracking (whatever is left over is an unknown key)."""

    def __init__(self, pairs: Dict[str, str]):
        self.pairs = pairs
        self.used = set()
        self.errors: List[str] = []

    def has(self, key: str) -> bool:
        return key in self.pairs

    def raw(self, key: str, default=None, required=False):
        if key in self.pairs:
            self.used.add(key)
            return self.pairs[key]
        if required:
            self.errors.append(f"missing required key {key!r}")
        return default

    def real(self, key: str, default=None, required=False,
             positive=False) -> Optional[float]:
        raw = self.raw(key, required=required)
        if raw is None:
            return default
        try:
            val = float(raw)
        except ValueError:
            self.errors.append(f"{key}: not a number: {raw!r}")
            return default
        if positive and not val > 0:
            self.errors.append(f"{key}: must be > 0, got {val}")
            return default
        return val

    def integer(self, key: str, default=None, required=False,
                positive=False) -> Optional[int]:
        raw = self.raw(key, required=required)
        if raw is None:
            return default
        try:
            val = int(raw)
        except ValueError:
            self.errors.append(f"{key}: not an integer: {raw!r}")
            return default
        if positive and not val > 0:
            self.errors.append(f"{key}: must be > 0, got {val}")
            return default
        return val

    def real_list(self, key: str, default=None, required=False):
        raw = self.raw(key, required=required)
        if raw is None:
            return default
        try:
            return [float(tok) for tok in raw.replace(",", " ").split()]
        except ValueError:
            self.errors.append(f"{key}: not a list of numbers: {raw!r}")
            return default

    def int_list(self, key: str, default=None, required=False):
        vals = self.real_list(key, default=None, required=required)
        if vals is None:
            return default
        out = []
        for v in vals:
            if v != int(v):
                self.errors.append(f"{key}: expected integers, got {v}")
                return default
            out.append(int(v))
        return out

    def choice(self, key: str, options, default=None, required=False):
        raw = self.raw(key, required=required)
        if raw is None:
            return default
        if raw not in options:
            self.errors.append(
                f"{key}: {raw!r} is not one of {sorted(options)}")
            return default
        return raw


_LAW_FIELDS = {
    "normal": ("mean", "variance"),
    "exponential": ("rate",),
    "shifted-exponential": ("rate", "shift"),
    "pareto": ("index", "scale"),
    "lognormal": ("mu", "sigma2"),
    "weibull": ("shape", "scale"),
    "point": ("value",),
}

_POSITIVE_FIELDS = {"variance", "rate", "index", "scale", "sigma2", "shape"}


def _parse_law(r: _Reader, prefix: str, depth: int = 0) -> Optional[ScalarLaw]:
    kind = r.raw(f"{prefix}.kind", required=True)
    if kind is None:
        return None
    if depth > 4:
        r.errors.append(f"{prefix}.kind: law nesting too deep")
        return None
    if kind == "shifted":
        off = r.real(f"{prefix}.offset", required=True)
        base = _parse_law(r, f"{prefix}.base", depth + 1)
        if off is None or base is None:
            return None
        return Shifted(base, off)
    if kind == "expm1":
        base = _parse_law(r, f"{prefix}.base", depth + 1)
        return None if base is None else Expm1(base)
    if kind not in _LAW_FIELDS:
        r.errors.append(
            f"{prefix}.kind: unknown law {kind!r} (known: "
            f"{sorted(_LAW_FIELDS) + ['shifted', 'expm1']})")
        return None
    vals = []
    ok = True
    for name in _LAW_FIELDS[kind]:
        v = r.real(f"{prefix}.{name}", required=True,
                   positive=name in _POSITIVE_FIELDS)
        if v is None:
            ok = False
        vals.append(v)
    if not ok:
        return None
    ctor = {"normal": Normal, "exponential": Exponential,
            "shifted-exponential": ShiftedExponential, "pareto": Pareto,
            "lognormal": Lognormal, "weibull": Weibull, "point": PointMass}[kind]
    try:
        return ctor(*vals)
    except (DomainError, ValueError) as exc:
        r.errors.append(f"{prefix}: {exc}")
        return None


def _parse_joint(r: _Reader) -> Optional[JointLaw]:
    dep = r.choice("model.dependence", {"independent", "comonotone"},
                   default="independent")
    eta = _parse_law(r, "model.eta")
    if dep == "comonotone":
        shift = r.real("model.shift", default=0.0)
        if eta is None:
            return None
        try:
            return Comonotone(eta, shift)
        except DomainError as exc:
            r.errors.append(f"model: {exc}")
            return None
    xi = _parse_law(r, "model.xi")
    if xi is None or eta is None:
        return None
    return Independent(xi, eta)


def _parse_modulated(r: _Reader) -> Optional[ModulatedSpec]:
    m = r.integer("modulated.states", required=True, positive=True)
    atom = r.integer("modulated.atom", default=0)
    base = _parse_joint(r)
    if m is None or base is None:
        return None
    P = []
    fu, fv, gu, gv = [], [], [], []
    ok = True
    for i in range(m):
        row = r.real_list(f"modulated.p.{i}", required=True)
        if row is None or len(row) != m:
            if row is not None:
                r.errors.append(f"modulated.p.{i}: expected {m} entries")
            ok = False
            row = [0.0] * m
        P.append(tuple(row))
        for name, dest, default in (("f", (fu, fv), (0.0, 1.0)),
                                    ("g", (gu, gv), (0.0, 1.0))):
            const = r.real(f"modulated.{name}.{i}.const", default=default[0])
            coef = r.real(f"modulated.{name}.{i}.coef", default=default[1])
            dest[0].append(const)
            dest[1].append(coef)
    if not ok:
        return None
    try:
        return ModulatedSpec(P=tuple(P), atom=atom, fu=tuple(fu),
                             fv=tuple(fv), gu=tuple(gu), gv=tuple(gv),
                             base=base)
    except DomainError as exc:
        r.errors.append(f"modulated: {exc}")
        return None


@dataclass
class ExperimentConfig:
    kind: str
    joint: Optional[JointLaw]
    spec: Optional[ModulatedSpec]
    params: Dict[str, object]
    seed: int
    workers: int
    experiment_id: str


# Per-kind parameter schemas: (reader method, key, kwargs)
_PARAM_SCHEMAS = {
    "tail-infinite": [
        ("real_list", "params.log_levels", dict(required=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
        ("real", "params.tol", dict(default=1e-9, positive=True)),
        ("integer", "params.n_cap", dict(default=100_000, positive=True)),
    ],
    "tail-finite": [
        ("real_list", "params.log_levels", dict(required=True)),
        ("int_list", "params.horizons", dict(required=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
    ],
    "big-jump": [
        ("real", "params.c_envelope", dict(required=True, positive=True)),
        ("real", "params.eps", dict(required=True, positive=True)),
        ("integer", "params.horizon", dict(required=True, positive=True)),
        ("real", "params.level_quantile", dict(default=0.99)),
        ("real", "params.level", dict()),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
    ],
    "cramer": [
        ("integer", "params.n_mc", dict(required=True, positive=True)),
        ("integer", "params.hill_k", dict()),
        ("real_list", "params.level_quantiles", dict(default=[0.99, 0.999])),
        ("integer", "params.n_pi", dict(default=2000, positive=True)),
        ("integer", "params.n_inner", dict(default=2000, positive=True)),
        ("real", "params.tol", dict(default=1e-9, positive=True)),
        ("integer", "params.n_cap", dict(default=100_000, positive=True)),
    ],
    "prestationary": [
        ("real", "params.level", dict(required=True, positive=True)),
        ("int_list", "params.horizons", dict(required=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
        ("integer", "params.n_mc_dinf", dict(default=200_000, positive=True)),
    ],
    "exceedance": [
        ("real", "params.level", dict(required=True, positive=True)),
        ("int_list", "params.horizons", dict(required=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
    ],
    "modulated": [
        ("real_list", "params.levels", dict(required=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
        ("integer", "params.n_cycles", dict(default=100_000, positive=True)),
    ],
    "clt": [
        ("integer", "params.horizon", dict(required=True, positive=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
    ],
    "local": [
        ("integer", "params.horizon", dict(required=True, positive=True)),
        ("real", "params.delta", dict(required=True, positive=True)),
        ("integer", "params.n_windows", dict(default=13, positive=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
    ],
    "green": [
        ("real", "params.level", dict(required=True)),
        ("real", "params.window", dict(required=True, positive=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
    ],
    "gamma": [
        ("integer", "params.horizon", dict(required=True, positive=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
    ],
    "diagnostics": [
        ("real_list", "params.y_grid", dict(required=True)),
        ("integer", "params.n_mc", dict(required=True, positive=True)),
    ],
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate an experiment config; raises ConfigError
    listing every problem found."""
    pairs = parse_kv(text)
    r = _Reader(pairs)

    kind = r.choice("experiment.kind", set(EXPERIMENT_KINDS), required=True)
    experiment_id = r.raw("experiment.id", default=kind or "experiment")
    seed = r.integer("run.seed", default=0)
    workers = r.integer("run.workers", default=1, positive=True)

    joint = None
    spec = None
    if kind == "modulated":
        spec = _parse_modulated(r)
    elif kind is not None:
        joint = _parse_joint(r)

    params: Dict[str, object] = {}
    if kind is not None:
        for method, key, kwargs in _PARAM_SCHEMAS[kind]:
            val = getattr(r, method)(key, **kwargs)
            params[key.split(".", 1)[1]] = val

    unknown = sorted(set(pairs) - r.used)
    for key in unknown:
        r.errors.append(f"unknown key {key!r}")
    if r.errors:
        raise ConfigError(r.errors)

    cfg = ExperimentConfig(kind=kind, joint=joint, spec=spec, params=params,
                           seed=seed, workers=workers,
                           experiment_id=experiment_id)
    _validate_semantics(cfg)
    return cfg


def _validate_semantics(cfg: ExperimentConfig) -> None:
    """Model-level precondition checks done before any simulation."""
    errors: List[str] = []
    j = cfg.joint
    if cfg.kind in ("tail-infinite", "tail-finite", "big-jump",
                    "prestationary"):
        try:
            if not (j.xi_mean() < 0):
                errors.append(
                    "model.xi: this experiment requires E xi < 0 "
                    f"(found {j.xi_mean()})")
        except DomainError:
            errors.append("model.xi: mean unavailable in closed form")
    if cfg.kind in ("clt", "local", "green"):
        try:
            if not (j.xi_mean() > 0):
                errors.append(
                    "model.xi: this experiment requires E xi > 0 "
                    f"(found {j.xi_mean()})")
        except DomainError:
            errors.append("model.xi: mean unavailable in closed form")
    if cfg.kind == "gamma":
        try:
            if abs(j.xi_mean()) > 1e-12:
                errors.append("model.xi: gamma experiment requires E xi = 0")
        except DomainError:
            errors.append("model.xi: mean unavailable in closed form")
    if cfg.kind == "big-jump":
        if j is not None and not j.eta_min() > 0:
            errors.append(
                "model.eta: big-jump conditioning requires eta >= delta > 0 "
                f"(essential infimum {j.eta_min()})")
        lvl = cfg.params.get("level")
        lq = cfg.params.get("level_quantile")
        if lvl is None and lq is None:
            errors.append("params.level or params.level_quantile required")
    if cfg.kind in ("tail-infinite", "tail-finite"):
        for t in cfg.params.get("log_levels") or []:
            if t <= 1.0:
                errors.append(
                    f"params.log_levels: levels are log x and must be > 1 "
                    f"(x > e), got {t}")
    if cfg.kind in ("clt", "local", "green", "gamma", "tail-infinite",
                    "tail-finite", "prestationary") and j is not None:
        if j.eta_min() < 0:
            errors.append("model.eta: this experiment requires eta >= 0")
    for key in ("horizons",):
        if key in cfg.params and cfg.params[key]:
            if min(cfg.params[key]) < 1:
                errors.append(f"params.{key}: horizons must be >= 1")
    if errors:
        raise ConfigError(errors)
