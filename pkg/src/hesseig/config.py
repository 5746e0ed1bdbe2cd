"""Run configuration: a small line-oriented key-value grammar.

Sections in square brackets, ``key = value`` lines, ``#`` comments, lists
comma-separated.  Example::

    [run]
    mode = eigen            # eigen | oracle | sweep | verify | flow

    [problem]
    n = 2
    k = 1
    s = 0.0
    domain = disk(1.0)
    delta = 0.0             # sweep mode reads 'deltas' instead
    deltas = 0.2, 0.1, 0.05, 0.025

    [solver]
    h = 0.015625
    lambda_tol = 0.002

    [outputs]
    out_dir = ./out

The parser tracks line numbers so both syntax errors and semantic errors
(violated problem invariants) point at the offending line.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .domains import Domain, parse_domain
from .errors import ConfigError, ParameterError
from .problem import ProblemSpec, weight_exponent_floor

MODES = ("eigen", "oracle", "sweep", "verify", "flow")

_REQUIRED = (("run", "mode"), ("problem", "n"), ("problem", "k"),
             ("problem", "s"), ("problem", "domain"))

_DEFAULTS = {
    ("problem", "delta"): "0.0",
    ("solver", "h"): "0.015625",
    ("solver", "lambda_tol"): "0.002",
    ("solver", "picard_cap"): "3000",
    ("solver", "blowup_cap"): "1e6",
    ("solver", "beta"): "1.5",
    ("solver", "flow_M"): "8.0",
    ("solver", "flow_p"): "0.0",
    ("solver", "flow_t_end"): "1.0",
    ("outputs", "out_dir"): "./hesseig-out",
    ("verify", "snapshot"): "",
}


@dataclass
class RunConfig:
    """Fully validated run description."""

    mode: str
    n: int
    k: int
    s: float
    domain: Domain
    delta: float
    deltas: list
    h: float
    lambda_tol: float
    picard_cap: int
    blowup_cap: float
    beta: float
    flow_M: float
    flow_p: float
    flow_t_end: float
    out_dir: str
    snapshot: str
    raw: dict = field(default_factory=dict)

    def to_problem_spec(self) -> ProblemSpec:
        return ProblemSpec(
            n=self.n, k=self.k, s=self.s, domain=self.domain,
            delta=self.delta, h=self.h, lambda_rel_tol=self.lambda_tol,
            picard_max_iter=self.picard_cap, blowup_value_cap=self.blowup_cap)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "n": self.n, "k": self.k, "s": self.s,
            "domain": self.domain.to_dict(), "delta": self.delta,
            "deltas": self.deltas, "h": self.h, "lambda_tol": self.lambda_tol,
            "picard_cap": self.picard_cap, "blowup_cap": self.blowup_cap,
            "beta": self.beta, "flow_M": self.flow_M, "flow_p": self.flow_p,
            "flow_t_end": self.flow_t_end, "out_dir": self.out_dir,
            "snapshot": self.snapshot,
        }


def _tokenize(text: str):
    """Yield (line_number, section, key, value) triples."""
    section = None
    entries = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}",
                                  line=lineno)
            section = line[1:-1].strip().lower()
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}",
                              line=lineno)
        if section is None:
            raise ConfigError("key outside any [section]", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        entries[(section, key.lower())] = value
        lines[(section, key.lower())] = lineno
    return entries, lines


def _number(entries, lines, section, key, caster, constraint=None,
            describe=None):
    raw = entries[(section, key)]
    lineno = lines.get((section, key))
    try:
        val = caster(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid "
                          f"{caster.__name__}", line=lineno) from None
    if constraint is not None and not constraint(val):
        raise ConfigError(f"[{section}] {key} = {raw}: {describe}", line=lineno)
    return val


def parse_config(text: str) -> RunConfig:
    """Parse and validate config text; errors carry line numbers."""
    entries, lines = _tokenize(text)
    missing = [f"[{sec}] {key}" for sec, key in _REQUIRED
               if (sec, key) not in entries]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))
    for key, default in _DEFAULTS.items():
        entries.setdefault(key, default)

    mode = entries[("run", "mode")].lower()
    if mode not in MODES:
        raise ConfigError(f"[run] mode = {mode!r} not one of {MODES}",
                          line=lines.get(("run", "mode")))
    n = _number(entries, lines, "problem", "n", int,
                lambda v: v >= 1, "n must be >= 1")
    k = _number(entries, lines, "problem", "k", int,
                lambda v: 1 <= v <= n, f"k must satisfy 1 <= k <= n = {n}")
    floor = weight_exponent_floor(n, k)
    s = _number(entries, lines, "problem", "s", float,
                lambda v: v > floor,
                f"s must exceed -min(1, n/(2k)) = {floor}")
    try:
        domain = parse_domain(entries[("problem", "domain")])
    except ParameterError as exc:
        raise ConfigError(str(exc), line=lines.get(("problem", "domain"))) \
            from None
    delta = _number(entries, lines, "problem", "delta", float,
                    lambda v: v >= 0, "delta must be nonnegative")
    deltas = []
    if ("problem", "deltas") in entries:
        lineno = lines.get(("problem", "deltas"))
        try:
            deltas = [float(v) for v in
                      entries[("problem", "deltas")].split(",") if v.strip()]
        except ValueError:
            raise ConfigError("deltas must be a comma-separated float list",
                              line=lineno) from None
        if any(d <= 0 for d in deltas):
            raise ConfigError("all deltas must be positive", line=lineno)
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise ConfigError("deltas must be strictly decreasing",
                              line=lineno)
    if mode == "sweep" and not deltas:
        raise ConfigError("[problem] deltas is required for sweep mode")
    h = _number(entries, lines, "solver", "h", float,
                lambda v: v > 0, "h must be positive")
    lambda_tol = _number(entries, lines, "solver", "lambda_tol", float,
                         lambda v: v > 0, "lambda_tol must be positive")
    picard_cap = _number(entries, lines, "solver", "picard_cap", int,
                         lambda v: v > 0, "picard_cap must be positive")
    blowup_cap = _number(entries, lines, "solver", "blowup_cap", float,
                         lambda v: v > 0, "blowup_cap must be positive")
    beta = _number(entries, lines, "solver", "beta", float,
                   lambda v: v > 1, "beta must exceed 1")
    flow_M = _number(entries, lines, "solver", "flow_m", float,
                     lambda v: v > 1, "flow_M must exceed 1") \
        if ("solver", "flow_m") in entries else float(_DEFAULTS[("solver", "flow_M")])
    flow_p = _number(entries, lines, "solver", "flow_p", float,
                     lambda v: 0 <= v < k, f"flow_p must lie in [0, k={k})")
    flow_t_end = _number(entries, lines, "solver", "flow_t_end", float,
                         lambda v: v > 0, "flow_t_end must be positive")
    if mode == "flow" and delta <= 0:
        raise ConfigError("[problem] delta must be positive for flow mode",
                          line=lines.get(("problem", "delta")))

    raw = {f"{sec}.{key}": val for (sec, key), val in sorted(entries.items())}
    return RunConfig(
        mode=mode, n=n, k=k, s=s, domain=domain, delta=delta, deltas=deltas,
        h=h, lambda_tol=lambda_tol, picard_cap=picard_cap,
        blowup_cap=blowup_cap, beta=beta, flow_M=flow_M, flow_p=flow_p,
        flow_t_end=flow_t_end, out_dir=entries[("outputs", "out_dir")],
        snapshot=entries[("verify", "snapshot")], raw=raw)


def apply_overrides(text: str, overrides) -> str:
    """Apply --set section.key=value pairs on top of config text."""
    extra = []
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        target, value = item.split("=", 1)
        if "." not in target:
            raise ConfigError(f"--set {item!r}: key must be section.key")
        section, key = target.split(".", 1)
        extra.append(f"[{section.strip()}]\n{key.strip()} = {value.strip()}")
    return text + "\n" + "\n".join(extra) + "\n"
