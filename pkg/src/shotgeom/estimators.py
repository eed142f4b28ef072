"""Monte Carlo estimators: replicate batches, variances, sigma_0^2, CLT checks."""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import ndimage, special
from scipy.integrate import trapezoid

from .errors import (DegenerateConfigurationError, DegenerateSampleError,
                     InvalidParameterError, ReplicateBudgetExceeded,
                     SingularEvaluationError)
from .field import build_grid, grid_steps
from .functionals import FunctionalSpec, cell_values, evaluate, sample_input
from .geometry import LatticeWindow, make_cube_window, padded_box
from .kernels import FieldSpec, RadialKernel, TokenKernel
from .process import SeedStream, sample_poisson
from .testfunctions import TestFunction

N_BATCHES = 25
FAILURE_BUDGET = 1e-3
MAX_ATTEMPTS = 3

# Stream namespaces, so that different experiments never share randomness.
NS_REPLICATE = 0
NS_VARIANCE = 1
NS_COV_SERIES = 2
NS_VOLUME_INTEGRAL = 3
NS_ORIGIN = 4
NS_RETRY = 99

RECOVERABLE = (DegenerateConfigurationError, SingularEvaluationError)


# -- replicate batches ---------------------------------------------------------

@dataclass
class SampleBatch:
    spec: FunctionalSpec
    window: LatticeWindow
    n: int
    values: np.ndarray
    seeds: np.ndarray
    master: int
    namespace: tuple = ()
    failed: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def var(self) -> float:
        return float(np.var(self.values, ddof=1))


def run_replicates(fn: Callable[[SeedStream], object], n: int, master: int,
                   namespace: tuple = (), threads: int = 1,
                   budget: float = FAILURE_BUDGET,
                   collect: Callable[[int, object], None] | None = None):
    """Call ``fn`` once per stream ``0..n-1`` and collect results in order.

    A replicate raising a degenerate-geometry or singular-evaluation error
    is recorded and redrawn from a retry stream; the run fails when more
    than ``budget * n`` replicates had to be redrawn.  With ``collect``,
    results are handed over one by one in index order and not kept.
    """
    streams = [SeedStream(master, r, tuple(namespace)) for r in range(n)]

    def one(s: SeedStream):
        err = None
        for attempt in range(MAX_ATTEMPTS):
            st = s if attempt == 0 else s.child(NS_RETRY, attempt)
            try:
                return fn(st), attempt > 0
            except RECOVERABLE as e:
                err = e
        raise err

    if threads > 1:
        ex = ThreadPoolExecutor(max_workers=threads)
        results = ex.map(one, streams)
    else:
        ex = None
        results = map(one, streams)
    out, failed = [], []
    try:
        for r, (v, f) in enumerate(results):
            if f:
                failed.append(r)
            if collect is None:
                out.append(v)
            else:
                collect(r, v)
    finally:
        if ex is not None:
            ex.shutdown()
    if len(failed) > budget * n:
        raise ReplicateBudgetExceeded(failed, n, budget)
    return out, failed


def window_key(w: LatticeWindow) -> int:
    """Stable 63-bit digest of the window's cells.

    Replicate streams are keyed by it, so two windows sharing a master seed
    and replicate index still see independent inputs.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(np.int64(w.dim).tobytes())
    h.update(np.ascontiguousarray(w.cells, dtype=np.int64).tobytes())
    return int.from_bytes(h.digest(), "little") >> 1


def replicate(spec: FunctionalSpec, w: LatticeWindow, n: int, master: int,
              namespace: tuple = (NS_REPLICATE,), threads: int = 1,
              budget: float = FAILURE_BUDGET) -> SampleBatch:
    """``n`` independent evaluations; replicate ``r`` uses stream ``r`` of the
    family keyed by ``namespace`` and the window."""
    if n < 2:
        raise InvalidParameterError("need at least two replicates")

    def fn(s):
        return evaluate(spec, sample_input(spec, w, s), w)

    ns = tuple(namespace) + (window_key(w),)
    vals, failed = run_replicates(fn, n, master, ns, threads, budget)
    return SampleBatch(spec, w, n, np.asarray(vals, dtype=float), np.arange(n),
                       master, tuple(namespace), failed)


def replicate_levels(spec: FunctionalSpec, w: LatticeWindow, n: int, master: int,
                     levels: Sequence[float], namespace: tuple = (NS_REPLICATE,),
                     threads: int = 1, budget: float = FAILURE_BUDGET) -> list[SampleBatch]:
    """Excursion volumes at several levels from shared field replicates."""
    if spec.kind != "excursion-volume":
        raise InvalidParameterError("level sweeps are offered for excursion volume")
    lv = np.asarray(levels, dtype=float)

    def fn(s):
        z = sample_input(spec, w, s)
        g = build_grid(z, spec.field.kernel, w, spec.h_grid)
        v = g.values[g.mask]
        srt = np.sort(v)
        above = v.size - np.searchsorted(srt, lv, side="left")
        return above * spec.h_grid ** w.dim

    ns = tuple(namespace) + (window_key(w),)
    vals, failed = run_replicates(fn, n, master, ns, threads, budget)
    vals = np.asarray(vals, dtype=float)
    return [SampleBatch(replace(spec, u=float(u)), w, n, vals[:, i].copy(), np.arange(n),
                        master, tuple(namespace), failed) for i, u in enumerate(lv)]


# -- batching -------------------------------------------------------------------

def batch_slices(n: int, batches: int = N_BATCHES) -> list[slice]:
    edges = np.linspace(0, n, batches + 1).round().astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def batched_se(values: np.ndarray, stat: Callable[[np.ndarray], float] = np.mean,
               batches: int = N_BATCHES) -> float:
    """Standard error of ``stat`` from its spread over contiguous batches."""
    values = np.asarray(values)
    if values.shape[0] < 2 * batches:
        raise InvalidParameterError(f"need at least {2 * batches} values for {batches} batches")
    est = np.array([stat(values[s]) for s in batch_slices(values.shape[0], batches)])
    return float(np.std(est, ddof=1) / math.sqrt(batches))


# -- variance scan ------------------------------------------------------------------

@dataclass
class VarianceRow:
    a: float
    volume: float
    n: int
    mean: float
    var: float
    var_per_volume: float
    se: float  # of var_per_volume
    failed: int = 0


def variance_row(batch: SampleBatch, a: float | None = None,
                 batches: int = N_BATCHES) -> VarianceRow:
    vol = batch.window.volume
    var = batch.var
    se = batched_se(batch.values, lambda v: np.var(v, ddof=1), batches) / vol
    side = a if a is not None else vol ** (1.0 / batch.window.dim)
    return VarianceRow(float(side), vol, batch.n, batch.mean, var, var / vol, se,
                       len(batch.failed))


def variance_scan(spec: FunctionalSpec, sizes: Sequence[float], n: int, master: int,
                  threads: int = 1, budget: float = FAILURE_BUDGET,
                  batches: int = N_BATCHES) -> list[VarianceRow]:
    """Sample variance of ``F_W`` on cubes ``Q_a`` for each side ``a``."""
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise InvalidParameterError("sizes must increase")
    if n < 500:
        raise InvalidParameterError("variance scans need n >= 500 per size")
    rows = []
    for i, a in enumerate(sizes):
        w = make_cube_window(a, spec.dim)
        b = replicate(spec, w, n, master, (NS_VARIANCE, i), threads, budget)
        rows.append(variance_row(b, a, batches))
    return rows


# -- sigma_0^2 ----------------------------------------------------------------------

@dataclass
class Sigma0Estimate:
    method: str
    raw: float
    se: float
    truncation: float
    n: int
    tail_indicator: float = 0.0
    tail_flag: bool = False
    batch_estimates: np.ndarray | None = None
    profile: dict | None = None

    @property
    def floored(self) -> float:
        return max(self.raw, 0.0)


def _lag_sums(V: np.ndarray, K: int):
    """Per lag ``|k|_inf <= K``: sums of ``V[j] V[j+k]``, of ``V[j]`` and of
    ``V[j+k]`` over the pairs inside the array, and the pair count."""
    d = V.ndim
    lags = np.array(list(np.ndindex(*(2 * K + 1,) * d))) - K
    out = np.empty((4, len(lags)))
    for t, k in enumerate(lags):
        a = tuple(slice(max(0, -kk), V.shape[q] - max(0, kk)) for q, kk in enumerate(k))
        b = tuple(slice(max(0, kk), V.shape[q] - max(0, -kk)) for q, kk in enumerate(k))
        out[0, t] = np.sum(V[a] * V[b])
        out[1, t] = np.sum(V[a])
        out[2, t] = np.sum(V[b])
        out[3, t] = V[a].size
    return lags, out


def _centred_cov(sums: np.ndarray, mu: float) -> np.ndarray:
    """Lag covariances from ``_lag_sums`` accumulated over replicates."""
    prod, sa, sb, cnt = sums
    return (prod - mu * (sa + sb)) / cnt + mu * mu


def sigma0_cov_series(spec: FunctionalSpec, K: int, n: int, master: int,
                      block: int | None = None, threads: int = 1,
                      batches: int = N_BATCHES, node_budget: float = 6e7) -> Sigma0Estimate:
    """``Var(F_0) + sum over 0 < |k|_inf <= K of Cov(F_0, F_k)``.

    Each replicate samples one configuration on a padded cube of
    ``block^d`` cells (default ``2K + 2``) and records the per-cell values
    ``F_k``.  Lag covariances average ``(F_j - mu)(F_{j+k} - mu)`` over all
    cell pairs of all replicates, ``mu`` being the overall mean.
    """
    if K < 1:
        raise InvalidParameterError("K must be at least 1")
    M = 2 * K + 2 if block is None else int(block)
    if M < 2 * K + 1:
        raise InvalidParameterError("block too small for lag K")
    if n < 2 * batches:
        raise InvalidParameterError(f"need at least {2 * batches} replicates")
    spec = replace(spec, mode="infinite")
    d = spec.dim
    nodes = (M + 2 * spec.padding) ** d / spec.h_grid ** d
    if nodes > node_budget:
        raise InvalidParameterError(f"K={K} needs {nodes:.3g} grid nodes per replicate")
    w = make_cube_window(M, d)
    slices = batch_slices(n, batches)
    owner = np.repeat(np.arange(batches), [s.stop - s.start for s in slices])
    nl = (2 * K + 1) ** d
    acc = np.zeros((batches, 4, nl))
    S1 = np.zeros(batches)
    lag_ref = []

    def fn(s):
        V = cell_values(spec, sample_input(spec, w, s), w)
        return float(V.sum()), _lag_sums(V, K)

    def collect(r, v):
        b = owner[r]
        S1[b] += v[0]
        acc[b] += v[1][1]
        if not lag_ref:
            lag_ref.append(v[1][0])

    run_replicates(fn, n, master, (NS_COV_SERIES,), threads, collect=collect)
    lags = lag_ref[0]
    mu = S1.sum() / (float(M ** d) * n)
    C = _centred_cov(acc.sum(axis=0), mu)
    be = np.array([_centred_cov(acc[b], mu).sum() for b in range(batches)])
    se = float(np.std(be, ddof=1) / math.sqrt(batches))
    edge = np.max(np.abs(lags), axis=1) == K
    return Sigma0Estimate("cov-series", float(C.sum()), se, float(K), n,
                          tail_indicator=float(np.max(np.abs(C[edge]))),
                          batch_estimates=be,
                          profile={"lags": lags, "cov": C, "mean": mu})


def _lag_grid_sums(I: np.ndarray, L: int) -> np.ndarray:
    """For lags ``|z_q| <= L``: sums over in-array pairs ``(y, y+z)`` of
    ``I[y] I[y+z]``, ``I[y]`` and ``I[y+z]``, stacked on the first axis.

    Computed with zero-padded FFTs (no wrap-around); ``I`` is a 0/1 array,
    so the sums are integers and are rounded.
    """
    shape = [sfft.next_fast_len(s + L, real=True) for s in I.shape]
    axes = tuple(range(I.ndim))
    FI = sfft.rfftn(I, shape)
    FJ = sfft.rfftn(np.ones_like(I), shape)
    idx = [np.r_[np.arange(L + 1), np.arange(s - L, s)] for s in shape]
    out = []
    for F in (FI * np.conj(FI), FJ * np.conj(FI), FI * np.conj(FJ)):
        ac = sfft.irfftn(F, shape, axes=axes)[np.ix_(*idx)]
        out.append(np.roll(ac, L, axis=axes))
    return np.rint(np.stack(out))


def sigma0_volume_integral(field: FieldSpec, u: float, R_int: float, n: int, master: int,
                           h_grid: float = 0.125, side: float | None = None,
                           n_angles: int = 64, threads: int = 1,
                           batches: int = N_BATCHES, tail_ratio: float = 1e-4) -> Sigma0Estimate:
    """Integral of the exceedance covariance ``C(x)`` over ``|x| <= R_int``.

    Every replicate samples the field on a grid over a cube of side
    ``side`` (default ``4 R_int``) with infinite input.  Exceedance pair
    counts for all grid lags up to ``R_int`` are accumulated over
    replicates; ``C`` is then averaged over ``n_angles`` directions on a
    radial grid of step ``h/2`` (bilinear interpolation between lags) and
    integrated against ``sigma_{d-1} rho^{d-1} d rho`` by the trapezoid
    rule.  The tail flag is raised when ``|C(R_int)|`` exceeds both
    ``tail_ratio * C(0)`` and three standard errors.
    """
    if field.dim != 2:
        raise InvalidParameterError("the volume integral is implemented in the plane")
    steps = grid_steps(h_grid)
    side = 4 * R_int if side is None else side
    side = float(math.ceil(side))
    w = make_cube_window(side, 2)
    L = int(math.ceil(R_int * steps)) + 1
    if n < 2 * batches:
        raise InvalidParameterError(f"need at least {2 * batches} replicates")
    if any(s * steps <= 2 * L for s in w.mask.shape):
        raise InvalidParameterError("cube too small for the integration radius")
    spec = FunctionalSpec("excursion-volume", field, u=u, mode="infinite", h_grid=h_grid)

    slices = batch_slices(n, batches)
    owner = np.repeat(np.arange(batches), [s.stop - s.start for s in slices])
    acc = np.zeros((batches, 3, 2 * L + 1, 2 * L + 1))
    S1 = np.zeros(batches)

    def fn(s):
        g = build_grid(sample_input(spec, w, s), field.kernel, w, h_grid)
        I = (g.values >= u).astype(float)
        return float(I.sum()), _lag_grid_sums(I, L)

    def collect(r, v):
        S1[owner[r]] += v[0]
        acc[owner[r]] += v[1]

    run_replicates(fn, n, master, (NS_VOLUME_INTEGRAL,), threads, collect=collect)
    N = np.array(w.mask.shape) * steps
    z = np.arange(-L, L + 1)
    pairs = np.outer(N[0] - np.abs(z), N[1] - np.abs(z))
    p = S1.sum() / (np.prod(N) * n)

    rho = np.arange(0.0, R_int + 1e-12, 0.5 * h_grid)
    if rho[-1] < R_int:
        rho = np.append(rho, R_int)
    th = (np.arange(n_angles) + 0.5) * 2 * math.pi / n_angles
    cx = (rho[:, None] * np.cos(th)[None, :]) * steps + L
    cy = (rho[:, None] * np.sin(th)[None, :]) * steps + L

    def profile(sums, m):
        C = (sums[0] - p * (sums[1] + sums[2])) / (pairs * m) + p * p
        Cr = ndimage.map_coordinates(C, [cx.ravel(), cy.ravel()], order=1)
        return Cr.reshape(cx.shape).mean(axis=1)

    def integral(Cr):
        return float(trapezoid(2 * math.pi * rho * Cr, rho))

    Cr = profile(acc.sum(axis=0), n)
    parts = [profile(acc[b], sl.stop - sl.start) for b, sl in enumerate(slices)]
    be = np.array([integral(c) for c in parts])
    se = float(np.std(be, ddof=1) / math.sqrt(batches))
    tail_se = float(np.std([c[-1] for c in parts], ddof=1) / math.sqrt(batches))
    tail = abs(float(Cr[-1]))
    c0 = float(Cr[0])
    flag = bool(tail > max(tail_ratio * abs(c0), 3 * tail_se))
    return Sigma0Estimate("volume-integral", integral(Cr), se, float(R_int), n,
                          tail_indicator=tail / abs(c0) if c0 else 0.0, tail_flag=flag,
                          batch_estimates=be,
                          profile={"rho": rho, "cov": Cr, "p": p, "tail_se": tail_se})


# -- Kolmogorov distance and rates ------------------------------------------------

def ks_normal(z: np.ndarray) -> float:
    """``sup_t |F_n(t) - Phi(t)|`` for a standardized sample."""
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    cdf = special.ndtr(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def kolmogorov_distance(batch, standardization="plug-in") -> float:
    """Kolmogorov distance between a standardized sample and N(0, 1).

    ``standardization`` is ``'plug-in'`` (mean and SD of the first half,
    distance computed on the second half) or a pair ``(mu, sigma)``.
    """
    v = np.asarray(batch.values if isinstance(batch, SampleBatch) else batch, dtype=float)
    if v.size < 100:
        raise InvalidParameterError("need at least 100 values")
    if isinstance(standardization, str):
        if standardization != "plug-in":
            raise InvalidParameterError(f"unknown standardization {standardization!r}")
        half = v.size // 2
        fit, ev = v[:half], v[half:]
        mu, sd = float(np.mean(fit)), float(np.std(fit, ddof=1))
        if not sd > 0:
            raise DegenerateSampleError("held-out half has zero variance")
    else:
        mu, sd = map(float, standardization)
        ev = v
        if not sd > 0:
            raise InvalidParameterError("sigma must be positive")
    return ks_normal((ev - mu) / sd)


@dataclass
class RateFit:
    sizes: np.ndarray
    dk: np.ndarray
    slope: float
    intercept: float
    residual: float
    excluded: np.ndarray


def rate_fit(sizes: Sequence[float], dk: Sequence[float]) -> RateFit:
    """Least-squares line through ``(log |W|, log d_K)``."""
    s = np.asarray(sizes, dtype=float)
    d = np.asarray(dk, dtype=float)
    if s.size < 3:
        raise InvalidParameterError("need at least three sizes")
    bad = ~(d > 0)
    x, y = np.log(s[~bad]), np.log(d[~bad])
    if x.size < 2:
        raise InvalidParameterError("fewer than two positive distances")
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.linalg.norm(A @ coef - y))
    return RateFit(s, d, float(coef[0]), float(coef[1]), res, bad)


# -- the field at the origin ------------------------------------------------------

ORIGIN_ATOMS = 4_000_000  # expected atoms per chunk of origin draws


def origin_samples(field: FieldSpec, n: int, master: int, gradient: bool = False):
    """``n`` independent draws of ``f(0)`` (and optionally its gradient).

    Atoms are drawn directly in the ball ``B(0, padding)``, the only atoms
    that can reach the origin.  Draws are made in chunks holding about
    ``ORIGIN_ATOMS`` atoms, chunk ``c`` using its own stream, so memory
    stays bounded.  Returns ``f`` or ``(f, grad)``.
    """
    if gradient and isinstance(field.kernel, TokenKernel):
        raise InvalidParameterError("token fields have no gradient density")
    chunk = max(1, int(ORIGIN_ATOMS / _ball_volume(field.dim, field.padding)))
    parts = [_origin_chunk(field, min(chunk, n - a),
                           SeedStream(master, c, (NS_ORIGIN, 0)).generator(), gradient)
             for c, a in enumerate(range(0, n, chunk))]
    if not gradient:
        return np.concatenate(parts)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _ball_volume(d: int, R: float) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * R ** d


def _origin_chunk(field: FieldSpec, n: int, rng: np.random.Generator, gradient: bool):
    d = field.dim
    R = field.padding
    vol = _ball_volume(d, R)
    cnt = rng.poisson(vol, size=n)
    tot = int(cnt.sum())
    owner = np.repeat(np.arange(n), cnt)
    rho = R * rng.random(tot) ** (1.0 / d)
    marks = field.marks.sample(rng, tot)
    if isinstance(field.kernel, TokenKernel):
        return np.bincount(owner, weights=marks[:, 0] * (rho <= marks[:, 1]), minlength=n)
    if np.any(rho < 1e-12):
        raise SingularEvaluationError("atom drawn at the origin")
    amp = marks[:, 0] if marks.shape[1] else np.ones(tot)
    k = field.kernel
    f = np.bincount(owner, weights=amp * k.value(rho), minlength=n)
    if not gradient:
        return f
    dirs = rng.standard_normal((tot, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    # atom at rho * dir; grad of g(|y - x|) at y = 0 points along -dir
    gcomp = -(amp * k.derivative(rho))[:, None] * dirs
    grad = np.stack([np.bincount(owner, weights=gcomp[:, q], minlength=n) for q in range(d)],
                    axis=1)
    return f, grad


def cont_mean_density(field: FieldSpec, test: TestFunction, n: int, master: int):
    """``E[h(f(0)) |grad f(0)|]`` with its standard error."""
    f, g = origin_samples(field, n, master, gradient=True)
    x = test.h(f) * np.linalg.norm(g, axis=1)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n))


def jump_mean_density(field: FieldSpec, test: TestFunction, n: int, master: int):
    """Expected jump integrand per unit area for a token field.

    Each disc boundary adds ``2 pi r (H(f + max(L,0)) - H(f + min(L,0)))``
    where ``f`` is the field of the remaining discs, an independent copy
    of ``f(0)``.  Returns the mean and its standard error.
    """
    if not isinstance(field.kernel, TokenKernel):
        raise InvalidParameterError("jump densities are for token fields")
    f = origin_samples(field, n, master)
    rng = SeedStream(master, 0, (NS_ORIGIN, 1)).generator()
    m = field.marks.sample(rng, n)
    L, r = m[:, 0], m[:, 1]
    x = 2 * math.pi * r * (test.H(f + np.maximum(L, 0)) - test.H(f + np.minimum(L, 0)))
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n))


# -- anti-concentration --------------------------------------------------------------

def sup_interval_mass(sample: np.ndarray, delta: float) -> float:
    """Largest fraction of the sample inside an open interval of length ``2 delta``."""
    x = np.sort(np.asarray(sample, dtype=float))
    if x.size == 0:
        return 0.0
    # an open interval starting just below x[i] holds x[i] .. x[j] with x[j] < x[i] + 2 delta
    j = np.searchsorted(x, x + 2 * delta, side="left")
    return float(np.max(j - np.arange(x.size)) / x.size)


@dataclass
class AntiConcentration:
    deltas: np.ndarray
    mass: np.ndarray
    slope: float


def anti_concentration(field: FieldSpec | None, deltas: Sequence[float], n: int, master: int,
                       sample: np.ndarray | None = None) -> AntiConcentration:
    """Sup over ``v`` of the empirical ``P(f(0) in (v - delta, v + delta))``.

    Pass ``sample`` to analyse given values instead of drawing the field.
    The slope is the least-squares slope of log mass against log delta.
    """
    d = np.asarray(deltas, dtype=float)
    if np.any(np.diff(d) >= 0):
        raise InvalidParameterError("deltas must decrease")
    if sample is None:
        if n < 100_000:
            raise InvalidParameterError("anti-concentration needs n >= 1e5")
        sample = origin_samples(field, n, master)
    mass = np.array([sup_interval_mass(sample, t) for t in d])
    ok = mass > 0
    slope = float(np.polyfit(np.log(d[ok]), np.log(mass[ok]), 1)[0]) if ok.sum() >= 2 else float("nan")
    return AntiConcentration(d, mass, slope)
