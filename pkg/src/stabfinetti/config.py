"""Run configuration: budgets, tolerances, seed and output format.

A config file is a flat TOML document of ``key = value`` lines.  Values set
on the command line win over the file, and the file path itself can be
given through the ``STABFINETTI_CONFIG`` environment variable.
"""
import os
from dataclasses import dataclass, field, asdict, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


CONFIG_ENV = "STABFINETTI_CONFIG"


class ResourceError(RuntimeError):
    """A configured budget or cap would be exceeded."""

    def __init__(self, cap, value, limit):
        self.cap = cap
        self.value = value
        self.limit = limit
        super().__init__(f"{cap} exceeded: {value} > {limit}")


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-12
    psd: float = 1e-10
    trace: float = 1e-10
    unitary: float = 1e-10
    invariance: float = 1e-9
    eig: float = 1e-9
    sdp_gap: float = 1e-7
    sdp_feas: float = 1e-7


@dataclass(frozen=True)
class RunConfig:
    matrix_budget: int = 50_000_000
    orbit_point_budget: int = 10_000_000
    sdp_dim_cap: int = 256
    clifford_budget: int = 20_000
    tol: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    output: str = "json"

    def to_dict(self):
        return asdict(self)

    def updated(self, **kw):
        """Return a copy with top-level or tolerance fields replaced."""
        tol_names = {f.name for f in fields(Tolerances)}
        tol_kw = {k: v for k, v in kw.items() if k in tol_names}
        top_kw = {k: v for k, v in kw.items() if k not in tol_names}
        cfg = replace(self, **top_kw) if top_kw else self
        if tol_kw:
            cfg = replace(cfg, tol=replace(cfg.tol, **tol_kw))
        return cfg


DEFAULT = RunConfig()


def load_config(path=None):
    """Read a config file; fall back to ``$STABFINETTI_CONFIG``, then defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    flat = dict(raw)
    flat.update(flat.pop("tol", {}))
    known = {f.name for f in fields(RunConfig)} | {f.name for f in fields(Tolerances)}
    bad = sorted(set(flat) - known)
    if bad:
        raise DomainError(f"unknown config keys: {bad}")
    return RunConfig().updated(**flat)
