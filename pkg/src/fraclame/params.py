"""Fractional exponents and their admissibility constraints."""
from __future__ import annotations

from dataclasses import dataclass


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class FractionalParams:
    """Exponents of the problem.

    ``t`` defaults to ``s``; ``s1``/``s2`` default to the symmetric split ``s, s``;
    ``sigma`` defaults to ``None`` (unset).
    """

    s: float
    t: float | None = None
    s1: float | None = None
    s2: float | None = None
    epsilon: float = 0.0
    sigma: float | None = None

    def __post_init__(self):
        s = self.s
        if not 0 < s < 1:
            raise ParameterError(f"s must lie in (0, 1), got {s}")
        if self.t is None:
            object.__setattr__(self, "t", s)
        if self.s1 is None and self.s2 is None:
            object.__setattr__(self, "s1", s)
            object.__setattr__(self, "s2", s)
        elif self.s1 is None:
            object.__setattr__(self, "s1", 2 * s - self.s2)
        elif self.s2 is None:
            object.__setattr__(self, "s2", 2 * s - self.s1)
        for msg in self.violations():
            raise ParameterError(msg)

    def violations(self) -> list[str]:
        out = []
        s, t = self.s, self.t
        upper = min(2 * s, 1.0)
        if not (s <= t < upper):
            out.append(f"t = {t} violates s <= t < min(2s, 1) = {upper:g} (s = {s})")
        if abs(self.s1 + self.s2 - 2 * s) > 1e-12:
            out.append(f"s1 + s2 = {self.s1 + self.s2} must equal 2s = {2 * s}")
        if not (0 < self.s1 < 2 and 0 < self.s2 < 2):
            out.append("s1 and s2 must lie in (0, 2)")
        if self.epsilon < 0:
            out.append("epsilon must be nonnegative")
        elif self.epsilon >= self.s2:
            out.append(f"epsilon = {self.epsilon} must be smaller than s2 = {self.s2}")
        if self.sigma is not None and self.sigma <= 0:
            out.append("sigma must be positive")
        return out

    @property
    def two_s_minus_t(self) -> float:
        return 2 * self.s - self.t

    def check_sigma(self, alpha: float):
        """``sigma`` may not exceed the Hoelder exponent of the coefficient it is paired with."""
        if self.sigma is not None and self.sigma > alpha:
            raise ParameterError(f"sigma = {self.sigma} exceeds the coefficient exponent alpha = {alpha}")
