"""Test functions ``h`` and their primitives ``H`` for weighted perimeters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _phi(x):
    # exp(1 / (x^2 - 1)) on (-1, 1), zero outside
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1
    d = np.where(inside, x * x - 1.0, -1.0)
    return np.where(inside, np.exp(1.0 / d), 0.0)


def _phi_integral(s):
    """Integral of ``_phi`` from 0 to ``s``, for ``s`` in [-1, 1].

    The integrand is smooth with all derivatives vanishing at +-1, so a
    fixed 64-point Gauss-Legendre rule reaches round-off accuracy.
    """
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    a = np.abs(s)
    x = 0.5 * a[..., None] * (_GL_X + 1.0)
    return np.sign(s) * 0.5 * a * (_phi(x) * _GL_W).sum(axis=-1)


_HALF_MASS = float(_phi_integral(1.0))


@dataclass(frozen=True)
class TestFunction:
    """A member of the shipped family.

    ``kind='bump'``: ``h(t) = exp(1 / ((t - c)^2 / w^2 - 1))`` for
    ``|t - c| < w`` and 0 elsewhere, with ``H(t) = int_{-inf}^t h``.

    ``kind='linear'``: ``h = 1`` and ``H(t) = t``.  Not compactly supported;
    useful where the integrand should be the plain jump size.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str = "bump"
    c: float = 0.0
    w: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bump", "linear"):
            raise InvalidParameterError(f"unknown test function {self.kind!r}")
        if self.kind == "bump" and not self.w > 0:
            raise InvalidParameterError("bump width must be positive")

    @staticmethod
    def bump(c: float, w: float) -> "TestFunction":
        return TestFunction("bump", float(c), float(w))

    @staticmethod
    def linear() -> "TestFunction":
        return TestFunction("linear")

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "linear":
            return -np.inf, np.inf
        return self.c - self.w, self.c + self.w

    def h(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            return np.ones_like(t)
        return _phi((t - self.c) / self.w)

    def H(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            return t.copy()
        return self.w * (_HALF_MASS + _phi_integral((t - self.c) / self.w))

    @property
    def total_mass(self) -> float:
        return 2 * self.w * _HALF_MASS if self.kind == "bump" else np.inf
