"""Flat ``key = value`` experiment configurations.

One record type per CLI command. Lists are comma separated, or written as
``logspace(a, b, n)`` (base-10 exponents) or ``linspace(a, b, n)``. Blank
lines and ``#`` comments are ignored. Unknown keys are rejected.

Serialisation writes every float with ``repr`` so ``parse(serialize(c)) == c``.
"""
from dataclasses import dataclass, fields, replace
import re

import numpy as np

from .errors import ConfigError

_RANGE = re.compile(r"^(logspace|linspace)\(\s*([^,]+),\s*([^,]+),\s*([^,)]+)\)$")


def _floats(text):
    m = _RANGE.match(text.strip())
    if m:
        kind, a, b, n = m.groups()
        fn = np.logspace if kind == "logspace" else np.linspace
        return tuple(float(v) for v in fn(float(a), float(b), int(n)))
    if not text.strip():
        return ()
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    vals = _floats(text)
    out = tuple(int(round(v)) for v in vals)
    if any(o != v for o, v in zip(out, vals)):
        raise ValueError(f"expected integers, got {text!r}")
    return out


def _strs(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


# field type annotation -> (parser, formatter)
_CODECS = {
    "float": (float, repr),
    "int": (int, str),
    "str": (str.strip, str),
    "bool": (_bool, lambda b: "true" if b else "false"),
    "floats": (_floats, lambda t: ",".join(repr(float(v)) for v in t)),
    "ints": (_ints, lambda t: ",".join(str(int(v)) for v in t)),
    "strs": (_strs, lambda t: ",".join(t)),
}


@dataclass(frozen=True)
class FixedPointConfig:
    """Cartesian grid of problem instances.

    ``observation`` selects how ``alpha`` maps to ``(alpha_c, alpha_2)``:
    ``single`` gives ``(alpha, alpha)``, ``prior`` gives ``(alpha, 1)``,
    ``full`` gives ``(1, 1)`` and ``eiv`` gives ``(alpha, alpha_2)``.
    """

    lam: "floats" = (1.0,)
    delta: "floats" = (3.0,)
    R: "floats" = (2.0,)
    alpha: "floats" = (0.85,)
    alpha_2: "floats" = (1.0,)
    observation: "str" = "single"
    quad_order: "int" = 64


@dataclass(frozen=True)
class BayesConfig:
    alpha: "floats" = (0.704,)
    delta: "floats" = (3.0,)
    # prior scale varrho is set equal to R
    R: "floats" = (2.0,)
    quad_order: "int" = 64


@dataclass(frozen=True)
class ContourConfig:
    alpha: "float" = 0.704
    R: "floats" = (1.0, 1.75, 2.5, 3.25, 4.0)
    delta: "floats" = (1.0, 2.75, 4.5, 6.25, 8.0)
    lambda_min: "float" = 1e-3
    lambda_max: "float" = 1e3
    lambda_tol: "float" = 1e-4
    quad_order: "int" = 64


@dataclass(frozen=True)
class OptimalLambdaConfig:
    delta: "floats" = (3.0,)
    R: "floats" = (2.0,)
    alpha: "floats" = (0.85,)
    alpha_2: "floats" = (1.0,)
    observation: "str" = "single"
    lambda_min: "float" = 1e-3
    lambda_max: "float" = 1e3
    lambda_tol: "float" = 1e-4
    quad_order: "int" = 64


@dataclass(frozen=True)
class SimulateConfig:
    """Monte Carlo runs of the ridge-logistic fit against the asymptotics.

    ``lambda_policy = opt`` fits each observation kind at its own
    asymptotically optimal lambda; ``fixed`` sweeps the ``lam`` list.
    """

    p: "int" = 600
    delta: "floats" = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    R: "float" = 4.0
    alpha: "float" = 0.7
    alpha_2: "float" = 1.0
    design: "str" = "gaussian"
    truth: "str" = "ones"
    observation: "strs" = ("single",)
    lambda_policy: "str" = "opt"
    lam: "floats" = (1.0,)
    trials: "int" = 50
    seed: "int" = 0
    n_test: "int" = 100_000
    bayes: "bool" = True
    lambda_min: "float" = 1e-3
    lambda_max: "float" = 1e3
    lambda_tol: "float" = 1e-4
    quad_order: "int" = 64


@dataclass(frozen=True)
class LowdimConfig:
    p: "int" = 2
    R: "float" = 1.0
    alpha: "float" = 0.85
    n: "ints" = (20, 50, 100, 200, 500, 1000, 2000, 5000, 10000, 20000)
    strategies: "strs" = ("single", "prior", "complete")
    # stand-in for the unregularised fit, which the solver does not allow
    lam: "float" = 1e-8
    trials: "int" = 200
    seed: "int" = 0
    design: "str" = "gaussian"


CONFIG_TYPES = {
    "fixed-point": FixedPointConfig,
    "bayes": BayesConfig,
    "contour": ContourConfig,
    "optimal-lambda": OptimalLambdaConfig,
    "simulate": SimulateConfig,
    "lowdim": LowdimConfig,
}


def _codec(f):
    return _CODECS[f.type]


def parse_config(text, cls):
    """Parse ``key = value`` lines into ``cls``, starting from its defaults."""
    known = {f.name: f for f in fields(cls)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for {cls.__name__}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _codec(known[key])[0](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return cls(**values)


def serialize_config(cfg):
    return "".join(f"{f.name} = {_codec(f)[1](getattr(cfg, f.name))}\n" for f in fields(cfg))


def load_config(path, cls):
    with open(path) as fh:
        return parse_config(fh.read(), cls)


def override(cfg, **kwargs):
    """Replace the given fields, ignoring ``None`` and keys ``cfg`` lacks."""
    names = {f.name for f in fields(cfg)}
    return replace(cfg, **{k: v for k, v in kwargs.items() if v is not None and k in names})
