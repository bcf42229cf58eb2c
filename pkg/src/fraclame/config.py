"""Experiment configuration files: ``key = value`` lines, ``#`` comments."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

EXPERIMENTS = ("symbols", "korn", "commutator", "solve", "weighted", "perturbative", "regularity", "locallimit", "bench")
COEFFICIENTS = ("constant", "separable", "product", "perturbed", "noncoercive", "sign-changing", "table")
LOADS = ("zero", "smooth", "random")


class ConfigError(ValueError):
    """Carries every violation found, each prefixed by its line number when known."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


@dataclass
class ExperimentConfig:
    experiment: str
    s: float
    n: int = 1
    N: int = 256
    L: float = 1.0
    support_fraction: float = 0.5
    t: float | None = None
    s1: float | None = None
    s2: float | None = None
    epsilon: float = 0.0
    sigma: float | None = None
    q: float = 2.0
    tail_policy: str = "periodic"
    coefficient: str = "constant"
    kappa: float = 1.0
    amplitude: float = 0.25
    coef_alpha: float = 0.5
    coef_lambda: float = 0.25
    coef_Lambda: float = 10.0
    coefficient_table: str | None = None
    lame_c: float = -2.0
    oscillation: float = 1.5
    load: str = "smooth"
    tol: float = 1e-10
    max_iter: int = 200
    outer_max: int = 50
    frequencies: tuple = (4, 8, 16, 32)
    grids: tuple = (64, 128, 256)
    s_list: tuple = (0.6, 0.8, 0.95)
    trials: int = 100
    bench_sizes: tuple = (512, 1024, 2048, 4096)
    seed: int = 0
    out: str = "out"
    source: str | None = None
    lines: dict = field(default_factory=dict)

    @property
    def resolved_t(self) -> float:
        return self.s if self.t is None else self.t


_CONVERTERS = {
    "experiment": str, "s": float, "n": int, "N": int, "L": float, "support_fraction": float,
    "t": float, "s1": float, "s2": float, "epsilon": float, "sigma": float, "q": float,
    "tail_policy": str, "coefficient": str, "kappa": float, "amplitude": float, "coef_alpha": float,
    "coef_lambda": float, "coef_Lambda": float, "coefficient_table": str, "lame_c": float,
    "oscillation": float, "load": str, "tol": float, "max_iter": int, "outer_max": int,
    "frequencies": _ints, "grids": _ints, "s_list": _floats, "trials": int, "bench_sizes": _ints,
    "seed": int, "out": str,
}
REQUIRED = ("experiment", "s")


def parse_text(text: str, source: str | None = None) -> ExperimentConfig:
    values, lines, errors = {}, {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _CONVERTERS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError:
            errors.append(f"line {lineno}: cannot parse {key} = {value!r}")
            continue
        lines[key] = lineno
    for key in REQUIRED:
        if key not in values and not any(f"{key!r}" in e for e in errors):
            errors.append(f"missing required key {key!r}")
    if errors:
        raise ConfigError(errors)
    cfg = ExperimentConfig(**values, source=source, lines=lines)
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_text(path.read_text(encoding="utf-8"), str(path))


def _at(cfg: ExperimentConfig, *keys) -> str:
    found = [f"line {cfg.lines[k]}" for k in keys if k in cfg.lines]
    return (", ".join(found) + ": ") if found else ""


def validate(cfg: ExperimentConfig) -> list[str]:
    """Re-check every module constraint; returns human-readable violations."""
    from .grid import GridSpec
    from .params import FractionalParams, ParameterError

    out = []
    if cfg.experiment not in EXPERIMENTS:
        out.append(f"{_at(cfg, 'experiment')}experiment must be one of {', '.join(EXPERIMENTS)}")
    try:
        GridSpec(cfg.n, cfg.N, cfg.L, cfg.support_fraction)
    except ValueError as exc:
        out.append(f"{_at(cfg, 'n', 'N', 'L', 'support_fraction')}{exc}")
    try:
        FractionalParams(cfg.s, cfg.t, cfg.s1, cfg.s2, cfg.epsilon, cfg.sigma).check_sigma(cfg.coef_alpha)
    except ParameterError as exc:
        msg = str(exc)
        if "t =" in msg:
            msg += " (admissible range: s in (0,1) and s <= t < min{2s, 1})"
        out.append(f"{_at(cfg, 's', 't', 's1', 's2', 'epsilon', 'sigma')}{msg}")
    if cfg.coefficient not in COEFFICIENTS:
        out.append(f"{_at(cfg, 'coefficient')}coefficient must be one of {', '.join(COEFFICIENTS)}")
    if cfg.coefficient == "table" and not cfg.coefficient_table:
        out.append("coefficient = table needs coefficient_table")
    if not 0 < cfg.coef_alpha < 1:
        out.append(f"{_at(cfg, 'coef_alpha')}coef_alpha must lie in (0, 1)")
    if cfg.coef_lambda <= 0 or cfg.coef_Lambda <= 0:
        out.append(f"{_at(cfg, 'coef_lambda', 'coef_Lambda')}coef_lambda and coef_Lambda must be positive")
    if cfg.load not in LOADS:
        out.append(f"{_at(cfg, 'load')}load must be one of {', '.join(LOADS)}")
    if cfg.tail_policy not in ("periodic", "box-exterior", "analytic-diagonal-correction", "none"):
        out.append(f"{_at(cfg, 'tail_policy')}unknown tail_policy {cfg.tail_policy!r}")
    if cfg.lame_c == 1:
        out.append(f"{_at(cfg, 'lame_c')}lame_c = 1 makes the Lame symbol singular")
    if cfg.oscillation < 1:
        out.append(f"{_at(cfg, 'oscillation')}oscillation (max/min of the weight) must be at least 1")
    if cfg.q < 1:
        out.append(f"{_at(cfg, 'q')}q must be at least 1")
    if not cfg.tol > 0:
        out.append(f"{_at(cfg, 'tol')}tol must be positive")
    if cfg.max_iter < 1 or cfg.outer_max < 1 or cfg.trials < 1:
        out.append("max_iter, outer_max and trials must be positive")
    if list(cfg.frequencies) != sorted(cfg.frequencies) or not cfg.frequencies:
        out.append(f"{_at(cfg, 'frequencies')}frequencies must be a nonempty increasing list")
    if any(not 0 < s < 1 for s in cfg.s_list) or list(cfg.s_list) != sorted(cfg.s_list):
        out.append(f"{_at(cfg, 's_list')}s_list must be increasing values in (0, 1)")
    for key in ("grids", "bench_sizes"):
        for N in getattr(cfg, key):
            if N < 8 or N & (N - 1):
                out.append(f"{_at(cfg, key)}{key} entries must be powers of two >= 8")
                break
    return out


def as_dict(cfg: ExperimentConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name not in ("lines",)}
