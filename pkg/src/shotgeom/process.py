"""Unit-intensity marked Poisson processes and seed streams."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .configuration import MarkedConfiguration
from .errors import InvalidParameterError
from .geometry import Region


@dataclass(frozen=True)
class SeedStream:
    """A reproducible random stream.

    The generator is PCG64 seeded by ``SeedSequence(entropy=master,
    spawn_key=namespace + (index,))``.  SeedSequence hashes its entropy and
    spawn key into the generator state, so any stream can be rebuilt in
    isolation and distinct keys give independent streams.
    """

    master: int
    index: int = 0
    namespace: tuple = ()

    def __post_init__(self):
        if self.index < 0 or self.master < 0:
            raise InvalidParameterError("seed and stream index must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.master),
                                    spawn_key=tuple(self.namespace) + (int(self.index),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *keys: int) -> "SeedStream":
        """Stream ``keys[-1]`` of a family nested under this stream."""
        ns = tuple(self.namespace) + (int(self.index),) + tuple(int(k) for k in keys[:-1])
        return SeedStream(self.master, int(keys[-1]), ns)


@dataclass(frozen=True)
class MarkDistribution:
    """Law of the marks.

    ``unit`` marks carry no payload.  ``amplitude`` marks are a discrete
    law on non-zero reals.  ``disc`` marks pair such an amplitude with an
    independent radius, either fixed (``radius_lo == radius_hi``) or
    uniform on ``[radius_lo, radius_hi]``.
    """

    kind: str = "unit"
    values: tuple = (1.0,)
    probs: tuple = (1.0,)
    radius_lo: float = 1.0
    radius_hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("unit", "amplitude", "disc"):
            raise InvalidParameterError(f"unknown mark kind {self.kind!r}")
        if self.kind != "unit":
            if len(self.values) != len(self.probs) or not self.values:
                raise InvalidParameterError("amplitude values and probabilities differ in length")
            if any(v == 0 for v in self.values):
                raise InvalidParameterError("amplitudes must be non-zero")
            if any(p < 0 for p in self.probs) or not math.isclose(sum(self.probs), 1.0, abs_tol=1e-12):
                raise InvalidParameterError("amplitude probabilities must sum to 1")
        if self.kind == "disc" and not (0 < self.radius_lo <= self.radius_hi):
            raise InvalidParameterError("disc radii need 0 < radius_lo <= radius_hi")

    @staticmethod
    def discs(radius_lo: float, radius_hi: float | None = None,
              values=(1.0,), probs=(1.0,)) -> "MarkDistribution":
        hi = radius_lo if radius_hi is None else radius_hi
        return MarkDistribution("disc", tuple(map(float, values)), tuple(map(float, probs)),
                                float(radius_lo), float(hi))

    @property
    def r_max(self) -> float:
        return self.radius_hi if self.kind == "disc" else 0.0

    def mean_radius(self) -> float:
        return 0.5 * (self.radius_lo + self.radius_hi)

    def mean_area(self) -> float:
        lo, hi = self.radius_lo, self.radius_hi
        if hi == lo:
            return math.pi * lo * lo
        return math.pi * (hi ** 3 - lo ** 3) / (3 * (hi - lo))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "unit":
            return np.zeros((n, 0))
        amp = np.asarray(self.values)[rng.choice(len(self.values), size=n, p=self.probs)] \
            if len(self.values) > 1 else np.full(n, self.values[0])
        if self.kind == "amplitude":
            return amp.reshape(n, 1)
        if self.radius_hi > self.radius_lo:
            r = rng.uniform(self.radius_lo, self.radius_hi, size=n)
        else:
            r = np.full(n, self.radius_lo)
        return np.column_stack([amp, r])


def sample_poisson(region: Region, marks: MarkDistribution = MarkDistribution(),
                   seed: SeedStream | np.random.Generator = SeedStream(0)) -> MarkedConfiguration:
    """Unit-intensity Poisson process on ``region`` with i.i.d. marks.

    Points are drawn on a bounding box and thinned to the region, which
    leaves a Poisson process with the right intensity on the region.
    """
    vol = region.volume
    if vol is not None and not math.isfinite(vol):
        raise InvalidParameterError("cannot sample on a region of infinite volume")
    bb = region.bounding_box()
    if bb is None:
        raise InvalidParameterError("region has no bounding box")
    rng = seed if isinstance(seed, np.random.Generator) else seed.generator()
    lo, hi = bb
    n = rng.poisson(float(np.prod(hi - lo)))
    pts = lo + (hi - lo) * rng.random((n, region.dim))
    mk = marks.sample(rng, n)
    if region.kind != "box":
        keep = region.contains(pts)
        pts, mk = pts[keep], mk[keep]
    pts = _redraw_coincident(pts, lo, hi, region, rng)
    return MarkedConfiguration(pts, mk, marks.kind)


def _redraw_coincident(pts, lo, hi, region, rng):
    while pts.shape[0] > 1:
        _, first = np.unique(pts, axis=0, return_index=True)
        if first.size == pts.shape[0]:
            break
        dup = np.setdiff1d(np.arange(pts.shape[0]), first)
        for i in dup:
            while True:
                p = lo + (hi - lo) * rng.random(region.dim)
                if region.contains(p)[0]:
                    pts[i] = p
                    break
    return pts
