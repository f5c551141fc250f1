"""Run configuration: YAML loading, validation and the name registries.

Every object a config mentions (group, norm, field, source, source shape)
is looked up by name.  A name of the form ``"package.module:callable"`` is
imported and called with the remaining keys, which is the plugin hook.
"""

from __future__ import annotations

import copy
import importlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .calculus import FDScheme, ScalarField
from .errors import ConfigError
from .fields import FIELD_FACTORIES, Source, manufactured_source, power_source, zero_source
from .groups import CarnotGroup, HomogeneousNorm, euclidean_group, gauge_norm, heisenberg_group
from .liouville import SourceShape
from .quadrature import QuadratureBudget

CHECKS = ("ws", "eq19", "eq22", "eq23", "eq25", "wh", "eq27", "th45", "density",
          "liouville", "classify", "sharpness", "volume")


def _plugin(name: str):
    mod, _, attr = name.partition(":")
    if not attr:
        return None
    try:
        return getattr(importlib.import_module(mod), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot load plugin {name!r}: {exc}") from exc


def _split(spec, key: str, what: str) -> tuple[str, dict]:
    if isinstance(spec, str):
        return spec, {}
    if not isinstance(spec, dict) or key not in spec:
        raise ConfigError(f"{what} spec needs a {key!r} entry, got {spec!r}")
    params = {k: v for k, v in spec.items() if k != key}
    return str(spec[key]), params


def build_group(spec) -> CarnotGroup:
    kind, params = _split(spec, "kind", "group")
    try:
        if kind == "euclidean":
            return euclidean_group(int(params.get("dim", 3)))
        if kind == "heisenberg":
            return heisenberg_group(int(params.get("n", 1)))
    except TypeError as exc:
        raise ConfigError(f"bad group parameters {params}: {exc}") from exc
    fn = _plugin(kind)
    if fn is None:
        raise ConfigError(f"unknown group kind {kind!r}")
    return fn(**params)


def build_norm(spec, G: CarnotGroup) -> HomogeneousNorm:
    kind, params = _split(spec or "gauge", "kind", "norm")
    if kind == "gauge":
        return gauge_norm(G)
    fn = _plugin(kind)
    if fn is None:
        raise ConfigError(f"unknown norm {kind!r}")
    return fn(G, **params)


def build_field(spec, G: CarnotGroup, S: HomogeneousNorm) -> ScalarField:
    kind, params = _split(spec, "field", "field")
    fn = FIELD_FACTORIES.get(kind) or _plugin(kind)
    if fn is None:
        raise ConfigError(f"unknown field {kind!r}; known: {sorted(FIELD_FACTORIES)}")
    try:
        return fn(G, S, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for field {kind!r}: {exc}") from exc


def build_source(spec, G: CarnotGroup, own: ScalarField, p: float, scheme: FDScheme) -> Source:
    """``own`` is the field whose operator image a ``manufactured`` source uses."""
    kind, params = _split(spec or "zero", "source", "source")
    if kind == "zero":
        return zero_source()
    if kind == "power":
        if "exponent" not in params:
            raise ConfigError("power source needs an exponent")
        return power_source(float(params["exponent"]), params.get("argument", "v"),
                            float(params.get("coeff", 1.0)))
    if kind == "manufactured":
        return manufactured_source(G, own, p, scheme)
    fn = _plugin(kind)
    if fn is None:
        raise ConfigError(f"unknown source {kind!r}")
    return fn(**params)


_SHAPE_KEYS = {"argument", "positive", "at_zero", "zeros", "zero_exponents", "liminf_exponent",
               "periodic_zeros", "continuous", "name"}


def build_shape(spec: dict) -> SourceShape:
    """A :class:`SourceShape` from its keyword fields.

    ``floor: {var: v, power: d, coeff: c}`` declares the lower bound
    ``c z^d`` of the source on ``{var >= z}``.
    """
    if not isinstance(spec, dict):
        raise ConfigError("a source shape must be a mapping")
    unknown = set(spec) - _SHAPE_KEYS - {"floor"}
    if unknown:
        raise ConfigError(f"unknown shape keys {sorted(unknown)}")
    kw = {k: v for k, v in spec.items() if k in _SHAPE_KEYS}
    if "zeros" in kw:
        kw["zeros"] = tuple(float(z) for z in kw["zeros"])
    if "zero_exponents" in kw:
        kw["zero_exponents"] = tuple(kw["zero_exponents"])
    fl = spec.get("floor")
    if fl is not None:
        var, power, coeff = fl.get("var", "v"), float(fl.get("power", 0.0)), float(fl.get("coeff", 1.0))
        kw["floor"] = lambda v, z, _var=var, _pw=power, _c=coeff: _c * z ** _pw if v == _var else 0.0
    return SourceShape(**kw)


def _radii(values, what: str) -> tuple:
    try:
        out = tuple(float(r) for r in values)
    except TypeError as exc:
        raise ConfigError(f"{what} must be a list of numbers") from exc
    if not out or any(not (r > 0 and math.isfinite(r)) for r in out):
        raise ConfigError(f"{what} must be a nonempty list of positive numbers")
    return out


def _exponents(d: dict, keys, what: str) -> dict:
    out = {}
    for k in keys:
        if k not in d:
            raise ConfigError(f"{what} needs {k!r}")
        out[k] = d[k] if isinstance(d[k], (int, str)) else float(d[k])
    return out


@dataclass
class RunConfig:
    """Validated run description; ``raw`` keeps the parsed mapping for the report echo."""

    name: str
    seed: int
    checks: tuple
    raw: dict
    radii: tuple = (1.0, 2.0, 4.0)
    samples: int = 100_000
    method: str = "monte_carlo"
    exclusion_radius: float = 0.0
    out_dir: Optional[str] = None
    formats: tuple = ("json",)
    group_spec: Any = None
    norm_spec: Any = None
    system: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    harnack: dict = field(default_factory=dict)
    density: dict = field(default_factory=dict)
    liouville: dict = field(default_factory=dict)
    classify: dict = field(default_factory=dict)
    sharpness: dict = field(default_factory=dict)

    @property
    def budget(self) -> QuadratureBudget:
        return QuadratureBudget(self.samples, self.seed, self.method, self.exclusion_radius)

    def needs_system(self) -> bool:
        return any(c in self.checks for c in ("ws", "eq19", "eq22", "eq23", "eq25", "eq27", "th45"))

    def needs_group(self) -> bool:
        return self.needs_system() or any(c in self.checks for c in ("wh", "density", "volume"))

    @classmethod
    def from_mapping(cls, raw: dict, seed: Optional[int] = None, samples: Optional[int] = None,
                     out_dir: Optional[str] = None, fmt: Optional[str] = None) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("the config must be a mapping at top level")
        raw = copy.deepcopy(raw)
        known = {"name", "seed", "checks", "radii", "budget", "output", "group", "norm", "system",
                 "constants", "harnack", "density", "liouville", "classify", "sharpness"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
        if seed is not None:
            raw["seed"] = seed
        if "seed" not in raw:
            raise ConfigError("seed is required (no wall-clock seeding)")
        try:
            sd = int(raw["seed"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("seed must be an integer") from exc
        if sd < 0:
            raise ConfigError("seed must be nonnegative")
        checks = tuple(raw.get("checks") or ())
        if not checks:
            raise ConfigError("the check list is empty")
        bad = [c for c in checks if c not in CHECKS]
        if bad:
            raise ConfigError(f"unknown checks {bad}; known: {list(CHECKS)}")
        bud = dict(raw.get("budget") or {})
        if samples is not None:
            bud["samples"] = samples
            raw["budget"] = bud
        outp = dict(raw.get("output") or {})
        if out_dir is not None:
            outp["dir"] = out_dir
        if fmt is not None:
            outp["format"] = fmt
        formats = outp.get("format", "json")
        formats = tuple([formats] if isinstance(formats, str) else formats)
        if any(f not in ("json", "csv") for f in formats):
            raise ConfigError("output format must be json or csv")
        cfg = cls(name=str(raw.get("name", "run")), seed=sd, checks=checks, raw=raw,
                  radii=_radii(raw.get("radii", (1.0, 2.0, 4.0)), "radii"),
                  samples=int(bud.get("samples", 100_000)),
                  method=str(bud.get("method", "monte_carlo")),
                  exclusion_radius=float(bud.get("exclusion_radius", 0.0)),
                  out_dir=outp.get("dir"), formats=formats,
                  group_spec=raw.get("group"), norm_spec=raw.get("norm"),
                  system=dict(raw.get("system") or {}), constants=dict(raw.get("constants") or {}),
                  harnack=dict(raw.get("harnack") or {}), density=dict(raw.get("density") or {}),
                  liouville=dict(raw.get("liouville") or {}), classify=dict(raw.get("classify") or {}),
                  sharpness=dict(raw.get("sharpness") or {}))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, **overrides) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
        return cls.from_mapping(raw, **overrides)

    def validate(self):
        """Fail early on anything that would only surface mid-run."""
        self.budget  # noqa: B018  (budget validation)
        if self.needs_group():
            if self.group_spec is None:
                raise ConfigError("a group is required for the requested checks")
            G = build_group(self.group_spec)
            S = build_norm(self.norm_spec, G)
            if self.needs_system():
                self.build_instance(G, S)
            if "wh" in self.checks or "density" in self.checks or "volume" in self.checks:
                for sec, nm in ((self.harnack, "harnack"), (self.density, "density")):
                    if sec.get("radii") is not None:
                        _radii(sec["radii"], f"{nm}.radii")
        if "liouville" in self.checks:
            _exponents(self.liouville, ("Q", "p", "q", "a", "b"), "liouville")
        if "sharpness" in self.checks:
            _exponents(self.sharpness, ("Q", "p", "q", "a", "b"), "sharpness")
        if "classify" in self.checks:
            for k in ("f", "g"):
                build_shape(self.classify.get(k))
            _exponents(self.classify, ("Q", "p", "q"), "classify")
        if self.needs_system():
            self.estimate_constants_kwargs()
        if "density" in self.checks and "eps" not in self.density:
            raise ConfigError("density needs eps")

    def estimate_constants_kwargs(self) -> dict:
        c = dict(self.constants)
        if "mu" in c:
            raise ConfigError("'mu' is ambiguous: use frame_matrix for the group or young_mu")
        unknown = set(c) - {"alpha", "beta", "ell", "eta", "young_mu"}
        if unknown:
            raise ConfigError(f"unknown constants {sorted(unknown)}")
        if "young_mu" in c:
            c["mu_y"] = c.pop("young_mu")
        return {k: (None if v is None else float(v)) for k, v in c.items()}

    def build_instance(self, G: CarnotGroup, S: HomogeneousNorm):
        from .estimates import SystemInstance

        s = self.system
        for k in ("p", "q", "u", "v"):
            if k not in s:
                raise ConfigError(f"system needs {k!r}")
        unknown = set(s) - {"p", "q", "a", "b", "u", "v", "f", "g", "inf_u_zero", "inf_v_zero",
                            "kappa", "fd_step"}
        if unknown:
            raise ConfigError(f"unknown system keys {sorted(unknown)}")
        p, q = float(s["p"]), float(s["q"])
        scheme = FDScheme(step=float(s["fd_step"])) if "fd_step" in s else FDScheme()
        u = build_field(s["u"], G, S)
        v = build_field(s["v"], G, S)
        f = build_source(s.get("f"), G, u, p, scheme)
        g = build_source(s.get("g"), G, v, q, scheme)
        opt = {k: (None if s.get(k) is None else float(s[k])) for k in ("a", "b", "kappa")}
        return SystemInstance(G, S, p, q, u, v, f, g, radii=self.radii, budget=self.budget,
                              scheme=scheme, inf_u_zero=bool(s.get("inf_u_zero", False)),
                              inf_v_zero=bool(s.get("inf_v_zero", False)), name=self.name, **opt)

    def echo(self) -> dict:
        """The parsed config with overrides applied, in a JSON-safe form."""
        return _json_safe(self.raw)


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x
