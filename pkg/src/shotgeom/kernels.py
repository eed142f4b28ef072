"""Impulse kernels of shot-noise fields."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .errors import InvalidParameterError
from .process import MarkDistribution

# The truncation radius keeps the expected tail a decade below eps_tail,
# so that single evaluations (not only their mean) stay below eps_tail.
TAIL_SAFETY = 0.1


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class RadialKernel:
    """``g(r) = C r^-nu`` for ``r <= 1`` and an outer tail for ``r > 1``.

    The tail is ``r^-lam`` (``outer='power'``) or ``exp(-a r^gamma)``
    (``outer='stretched-exp'``).  Contributions from atoms further than
    ``r_trunc`` are dropped; ``r_trunc`` is derived from ``eps_tail``
    unless given.
    """

    nu: float = 0.5
    C: float = 1.0
    outer: str = "power"
    lam: float = 23.0
    a: float = 1.0
    gamma: float = 1.0
    dim: int = 2
    eps_tail: float = 1e-8
    r_trunc: float | None = field(default=None)

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidParameterError("inner exponent nu must be positive")
        if not self.C > 0:
            raise InvalidParameterError("amplitude C must be positive")
        if self.dim < 1:
            raise InvalidParameterError("dimension must be positive")
        if self.outer == "power":
            if not self.lam > 11 * self.dim:
                raise InvalidParameterError(f"power tail needs lam > 11 d, got {self.lam}")
        elif self.outer == "stretched-exp":
            if not (self.a > 0 and 0 < self.gamma < self.dim):
                raise InvalidParameterError("stretched tail needs a > 0 and 0 < gamma < d")
        else:
            raise InvalidParameterError(f"unknown outer form {self.outer!r}")
        if self.eps_tail < 0:
            raise InvalidParameterError("eps_tail must be non-negative")
        if self.r_trunc is None:
            object.__setattr__(self, "r_trunc", self._solve_r_trunc())
        elif not self.r_trunc > 0:
            raise InvalidParameterError("r_trunc must be positive")

    @property
    def outer_code(self) -> int:
        return 0 if self.outer == "power" else 1

    def params(self) -> tuple:
        """Flat parameter tuple for the compiled evaluators."""
        return (float(self.r_trunc), float(self.C), float(self.nu), self.outer_code,
                float(self.lam), float(self.a), float(self.gamma))

    def tail_mass(self, R: float) -> float:
        """Integral of ``g`` over ``|x| > R`` (for ``R >= 1``)."""
        d = self.dim
        s = sphere_area(d)
        if self.outer == "power":
            return s * R ** (d - self.lam) / (self.lam - d)
        k = d / self.gamma
        return (s / (self.gamma * self.a ** k) * special.gamma(k)
                * special.gammaincc(k, self.a * R ** self.gamma))

    def _solve_r_trunc(self) -> float:
        target = self.eps_tail * TAIL_SAFETY
        if target <= 0:
            return math.inf
        if self.tail_mass(1.0) <= target:
            return 1.0
        if self.outer == "power":
            d, s = self.dim, sphere_area(self.dim)
            return (s / ((self.lam - d) * target)) ** (1.0 / (self.lam - d))
        hi = 2.0
        while self.tail_mass(hi) > target:
            hi *= 2
        return optimize.brentq(lambda R: self.tail_mass(R) - target, 1.0, hi, xtol=1e-12)

    def value(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        with np.errstate(divide="ignore"):
            inner = self.C * rho ** (-self.nu)
            if self.outer == "power":
                out = rho ** (-self.lam)
            else:
                out = np.exp(-self.a * rho ** self.gamma)
        return np.where(rho <= 1.0, inner, out)

    def derivative(self, rho) -> np.ndarray:
        """Radial derivative ``g'(r)``; the inner branch is used at ``r = 1``."""
        rho = np.asarray(rho, dtype=float)
        with np.errstate(divide="ignore"):
            inner = -self.nu * self.C * rho ** (-self.nu - 1)
            if self.outer == "power":
                out = -self.lam * rho ** (-self.lam - 1)
            else:
                out = (-self.a * self.gamma * rho ** (self.gamma - 1)
                       * np.exp(-self.a * rho ** self.gamma))
        return np.where(rho <= 1.0, inner, out)

    def lipschitz_outside(self, r0: float) -> float:
        """Bound on ``|g'|`` over ``[r0, inf)``."""
        rho = np.concatenate([np.geomspace(r0, max(r0, 1.0), 64), np.geomspace(1.0, 1e3, 2048)])
        return float(np.max(np.abs(self.derivative(rho[rho >= r0]))))


@dataclass(frozen=True)
class TokenKernel:
    """Indicator kernel ``L 1{|y - x| <= r}`` with disc marks ``(L, r)``."""

    dim: int = 2

    def __post_init__(self):
        if self.dim != 2:
            raise InvalidParameterError("token discs are planar")


@dataclass(frozen=True)
class FieldSpec:
    """A kernel together with the law of the marks it consumes."""

    kernel: RadialKernel | TokenKernel
    marks: MarkDistribution = MarkDistribution()

    def __post_init__(self):
        if isinstance(self.kernel, TokenKernel) and self.marks.kind != "disc":
            raise InvalidParameterError("token fields need disc marks")
        if isinstance(self.kernel, RadialKernel) and self.marks.kind == "disc":
            raise InvalidParameterError("radial fields take unit or amplitude marks")

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def is_token(self) -> bool:
        return isinstance(self.kernel, TokenKernel)

    @property
    def padding(self) -> float:
        """Interaction range used to emulate infinite input."""
        if self.is_token:
            return self.marks.r_max
        return self.kernel.r_trunc
