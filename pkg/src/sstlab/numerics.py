"""Shared numerical kernel: quadrature with divergence detection, Gaussian
special functions, Hermite polynomials, a symmetric tridiagonal eigensolver,
and the reproducible random-stream contract."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.special

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Divergence probing: cutoffs double starting here.  A truncated integral is
# declared divergent after PROBE_RUN successive doublings that each grow the
# value by more than PROBE_GROWTH - 1 while the per-doubling increments do
# not decay (decaying increments mean a convergent tail that is merely slow).
PROBE_START = 20.0
PROBE_GROWTH = 1.01
PROBE_DECAY = 0.99
PROBE_RUN = 3
PROBE_MAX_DOUBLINGS = 10
FLAT_GROWTH = 1e-13
OVERFLOW_BOUND = 1e280


class Divergent:
    """Sentinel returned when a truncated integral keeps growing."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "Divergent"


DIVERGENT = Divergent()


def is_divergent(value) -> bool:
    return isinstance(value, Divergent)


class NonIntegrable(Exception):
    """Raised when a measure that must be finite has divergent mass."""


class MaxDepthExceeded(Exception):
    """Raised when quadrature refinement stalls (typically a singularity)."""


class ConvergenceFailure(Exception):
    """Raised when grid refinement does not settle the eigenvalue."""


def _finite_quad(f, lo: float, hi: float, tol: float) -> float:
    if hi <= lo:
        return 0.0
    val, err = scipy.integrate.quad(f, lo, hi, epsabs=tol, epsrel=tol, limit=400)
    if not math.isfinite(val) or err > 50.0 * tol * (1.0 + abs(val)):
        raise MaxDepthExceeded(
            f"quadrature stalled on [{lo}, {hi}]: value={val}, err={err}"
        )
    return val


def _tail_quad_right(f, lo: float, tol: float) -> float:
    # exponential substitution x = lo - ln(t), t in (0, 1]
    def g(t):
        return f(lo - math.log(t)) / t

    return _finite_quad(g, 0.0, 1.0, tol)


def _tail_quad_left(f, hi: float, tol: float) -> float:
    def g(t):
        return f(hi + math.log(t)) / t

    return _finite_quad(g, 0.0, 1.0, tol)


def _safe_abs(f, x: float) -> float:
    try:
        v = f(x)
    except OverflowError:
        return math.inf
    if not math.isfinite(v):
        return math.inf
    return abs(v)


def _probe_halfline(f, lo: float, tol: float, side: int):
    """Integrate toward an infinite endpoint with doubling cutoffs.

    Returns the full integral, or DIVERGENT when the truncated values keep
    growing past the probe threshold.  `side` is +1 for [lo, +inf) and -1
    for (-inf, lo] (with `lo` then the finite upper endpoint).
    """
    start = max(PROBE_START, abs(lo) + PROBE_START)
    edge = start if side > 0 else -start
    for probe in (0.5 * (lo + edge), edge):
        if _safe_abs(f, probe) > OVERFLOW_BOUND:
            return DIVERGENT
    cutoff = start
    if side > 0:
        total = _finite_quad(f, lo, cutoff, tol)
    else:
        total = _finite_quad(f, -cutoff, lo, tol)
    run = 0
    prev_piece = None
    for _ in range(PROBE_MAX_DOUBLINGS):
        new_cutoff = 2.0 * cutoff
        for probe in (0.5 * (cutoff + new_cutoff), new_cutoff):
            if _safe_abs(f, side * probe) > OVERFLOW_BOUND:
                return DIVERGENT
        if side > 0:
            piece = _finite_quad(f, cutoff, new_cutoff, tol)
        else:
            piece = _finite_quad(f, -new_cutoff, -cutoff, tol)
        grew = abs(piece) > (PROBE_GROWTH - 1.0) * abs(total)
        decaying = prev_piece is not None and abs(piece) < PROBE_DECAY * abs(prev_piece)
        total += piece
        cutoff = new_cutoff
        if grew and not decaying:
            run += 1
            if run >= PROBE_RUN:
                return DIVERGENT
        else:
            run = 0
        if abs(piece) <= FLAT_GROWTH * (1.0 + abs(total)):
            break
        prev_piece = piece
    if side > 0:
        total += _tail_quad_right(f, cutoff, tol)
    else:
        total += _tail_quad_left(f, -cutoff, tol)
    return total


def adaptive_quad(f: Callable[[float], float], lo: float, hi: float,
                  tol: float = 1e-10):
    """Integrate f over [lo, hi], handling infinite endpoints.

    Returns the value, or the DIVERGENT sentinel when the doubling probe
    toward an infinite endpoint keeps growing.  Raises MaxDepthExceeded when
    refinement stalls on a finite piece.
    """
    if lo > hi:
        raise ValueError("lo > hi")
    lo_inf = math.isinf(lo)
    hi_inf = math.isinf(hi)
    if not lo_inf and not hi_inf:
        return _finite_quad(f, lo, hi, tol)
    if lo_inf and hi_inf:
        left = _probe_halfline(f, 0.0, tol, side=-1)
        if is_divergent(left):
            return DIVERGENT
        right = _probe_halfline(f, 0.0, tol, side=+1)
        if is_divergent(right):
            return DIVERGENT
        return left + right
    if hi_inf:
        return _probe_halfline(f, lo, tol, side=+1)
    return _probe_halfline(f, hi, tol, side=-1)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / SQRT_2PI
    return float(out) if out.ndim == 0 else out


def normal_cdf(x):
    out = scipy.special.ndtr(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def normal_quantile(p):
    out = scipy.special.ndtri(np.asarray(p, dtype=float))
    return float(out) if out.ndim == 0 else out


def hermite(n: int, x):
    """Probabilists' Hermite polynomial via the three-term recurrence
    H_{n+1} = x H_n - n H_{n-1}, H_0 = 1, H_1 = x."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return float(h_prev) if h_prev.ndim == 0 else h_prev
    h = x.copy()
    for k in range(1, n):
        h, h_prev = x * h - k * h_prev, h
    return float(h) if h.ndim == 0 else h


@dataclass(frozen=True)
class TridiagonalOperator:
    """Symmetric discretization of a Sturm-Liouville form on a uniform grid.

    Holds the matrix of -L in the inner product weighted by `weight`; the
    divergence-form construction keeps discrete symmetry exact.  `refine`
    rebuilds the operator with twice the resolution for extrapolation.
    """

    grid: np.ndarray
    diag: np.ndarray
    offdiag: np.ndarray
    weight: np.ndarray
    boundary: tuple
    refine: Optional[Callable[[], "TridiagonalOperator"]] = None

    def symmetrized(self):
        """Diagonal similarity transform making the matrix symmetric."""
        w = self.weight
        d = self.diag / w
        e = self.offdiag / np.sqrt(w[:-1] * w[1:])
        return d, e


def sturm_liouville_operator(lo: float, hi: float, n: int,
                             log_weight: Callable[[np.ndarray], np.ndarray],
                             boundary=("dirichlet", "dirichlet")) -> TridiagonalOperator:
    """Discretize -exp(-W) d/dx (exp(W) d/dx) on [lo, hi].

    `log_weight` returns W = ln of the symmetrizing density.  Dirichlet ends
    drop the boundary node; reflecting ends keep it with a half mass cell.
    """
    if n < 8:
        raise ValueError("grid too coarse")
    delta = (hi - lo) / n
    nodes = lo + delta * np.arange(n + 1)
    mids = lo + delta * (np.arange(n) + 0.5)
    w_mid = np.exp(log_weight(mids))

    keep_lo = boundary[0] != "dirichlet"
    keep_hi = boundary[1] != "dirichlet"
    idx0 = 0 if keep_lo else 1
    idx1 = n + 1 if keep_hi else n
    grid = nodes[idx0:idx1]
    m = grid.size

    nu = np.exp(log_weight(grid)) * delta
    if keep_lo:
        nu[0] *= 0.5
    if keep_hi:
        nu[-1] *= 0.5

    diag = np.zeros(m)
    for k in range(m):
        i = k + idx0
        left = w_mid[i - 1] if i - 1 >= 0 else 0.0
        right = w_mid[i] if i < n else 0.0
        diag[k] = (left + right) / delta ** 2
    offdiag = -w_mid[idx0:idx1 - 1] / delta ** 2

    def _refine():
        return sturm_liouville_operator(lo, hi, 2 * n, log_weight, boundary)

    return TridiagonalOperator(grid=grid, diag=diag, offdiag=offdiag,
                               weight=nu, boundary=boundary, refine=_refine)


def _smallest_eigenvalue_once(op: TridiagonalOperator) -> float:
    d, e = op.symmetrized()
    vals = scipy.linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, 0),
                                         eigvals_only=True)
    return float(vals[0])


def smallest_dirichlet_eigenvalue(op: TridiagonalOperator,
                                  rtol: float = 1e-4) -> float:
    """Smallest eigenvalue of -L, Richardson-extrapolated over n and 2n."""
    lam = _smallest_eigenvalue_once(op)
    if op.refine is None:
        return lam
    lam2 = _smallest_eigenvalue_once(op.refine())
    if abs(lam2 - lam) > rtol * max(1.0, abs(lam2)):
        raise ConvergenceFailure(
            f"eigenvalue moved from {lam} to {lam2} under refinement"
        )
    return (4.0 * lam2 - lam) / 3.0


def substream(master_seed: int, path_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one path.

    Counter-based: the (seed, index) pair keys a Philox generator, so any
    worker layout replays the identical variate sequence for a given path.
    """
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF,
                    path_index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RngContract:
    """Master seed plus the substream derivation rule."""

    master_seed: int

    def substream(self, path_index: int) -> np.random.Generator:
        return substream(self.master_seed, path_index)
