"""Coefficient models for the generator a d^2/dx^2 + b d/dx, their stationary
measures, segment states, the link kernel, and the analytic finiteness
criteria deciding existence of strong stationary times."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.integrate
import scipy.interpolate

from . import numerics
from .numerics import (DIVERGENT, Divergent, NonIntegrable, adaptive_quad,
                       is_divergent)

OU = "ornstein_uhlenbeck"
POWER = "power_potential"
TABULATED = "tabulated"

# Tabulated coefficient grids must reach at least this far out.
TABLE_SPAN_MIN = 20.0


def _power_patch(alpha: float, r0: float):
    """Even quartic A + B x^2 + C x^4 matching |x|^alpha and its first two
    derivatives at x = r0, keeping the drift C^1 through the origin."""
    C = alpha * (alpha - 2.0) * r0 ** (alpha - 4.0) / 8.0
    B = alpha * (4.0 - alpha) * r0 ** (alpha - 2.0) / 4.0
    A = r0 ** alpha * (1.0 - alpha * (6.0 - alpha) / 8.0)
    return A, B, C


@dataclass(frozen=True)
class CoefficientModel:
    """Diffusion coefficient pair (a, b) with derivative fields.

    kind selects the evaluation rules; params carries the kind-specific
    constants.  All evaluators accept scalars or arrays.
    """

    kind: str
    params: dict = field(default_factory=dict)

    # -- coefficient fields ------------------------------------------------
    def a(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind in (OU, POWER):
            out = np.ones_like(x)
        else:
            out = self._tab_a(x)
        return float(out) if out.ndim == 0 else out

    def a_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind in (OU, POWER):
            out = np.zeros_like(x)
        else:
            out = self._tab_a_prime(x)
        return float(out) if out.ndim == 0 else out

    def b(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == OU:
            out = -x
        elif self.kind == POWER:
            out = -self._u_prime(x)
        else:
            out = self._tab_b(x)
        return float(out) if out.ndim == 0 else out

    def b_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == OU:
            out = -np.ones_like(x)
        elif self.kind == POWER:
            out = -self._u_second(x)
        else:
            out = self._tab_b_prime(x)
        return float(out) if out.ndim == 0 else out

    def little_c(self, x):
        """Antiderivative of b/a from the base point 0."""
        x = np.asarray(x, dtype=float)
        if self.kind == OU:
            out = -0.5 * x * x
        elif self.kind == POWER:
            out = -(self._u(x) - self._u(np.zeros(())))
        else:
            out = self._tab_c(x)
        return float(out) if out.ndim == 0 else out

    # -- power potential ---------------------------------------------------
    def _u(self, x):
        alpha = self.params["alpha"]
        r0 = self.params["smoothing_radius"]
        A, B, C = self.params["patch"]
        ax = np.abs(x)
        inner = A + B * x * x + C * x ** 4
        return np.where(ax >= r0, ax ** alpha, inner)

    def _u_prime(self, x):
        alpha = self.params["alpha"]
        r0 = self.params["smoothing_radius"]
        _, B, C = self.params["patch"]
        ax = np.abs(x)
        outer = alpha * np.sign(x) * np.maximum(ax, r0) ** (alpha - 1.0)
        inner = 2.0 * B * x + 4.0 * C * x ** 3
        return np.where(ax >= r0, outer, inner)

    def _u_second(self, x):
        alpha = self.params["alpha"]
        r0 = self.params["smoothing_radius"]
        _, B, C = self.params["patch"]
        ax = np.abs(x)
        outer = alpha * (alpha - 1.0) * np.maximum(ax, r0) ** (alpha - 2.0)
        inner = 2.0 * B + 12.0 * C * x * x
        return np.where(ax >= r0, outer, inner)

    # -- tabulated ---------------------------------------------------------
    def _tab_eval(self, x, spline, aff_lo, aff_hi):
        orig = np.asarray(x, dtype=float)
        xv = np.atleast_1d(orig)
        x_lo, x_hi = self.params["x_lo"], self.params["x_hi"]
        out = np.empty_like(xv)
        below = xv < x_lo
        above = xv > x_hi
        mid = ~(below | above)
        out[mid] = spline(xv[mid])
        out[below] = aff_lo[0] + aff_lo[1] * (xv[below] - x_lo)
        out[above] = aff_hi[0] + aff_hi[1] * (xv[above] - x_hi)
        return out.reshape(orig.shape)

    def _tab_a(self, x):
        p = self.params
        return np.maximum(self._tab_eval(x, p["a_spline"], p["a_aff_lo"], p["a_aff_hi"]),
                          p["a_floor"])

    def _tab_a_prime(self, x):
        p = self.params
        return self._tab_eval(x, p["a_spline"].derivative(),
                              (p["a_aff_lo"][1], 0.0), (p["a_aff_hi"][1], 0.0))

    def _tab_b(self, x):
        p = self.params
        return self._tab_eval(x, p["b_spline"], p["b_aff_lo"], p["b_aff_hi"])

    def _tab_b_prime(self, x):
        p = self.params
        return self._tab_eval(x, p["b_spline"].derivative(),
                              (p["b_aff_lo"][1], 0.0), (p["b_aff_hi"][1], 0.0))

    def _tab_c(self, x):
        p = self.params
        orig = np.asarray(x, dtype=float)
        xv = np.atleast_1d(orig)
        x_lo, x_hi = p["x_lo"], p["x_hi"]
        out = p["c_spline"](np.clip(xv, x_lo, x_hi))
        below = xv < x_lo
        above = xv > x_hi
        if np.any(below):
            out[below] += self._affine_c_tail(xv[below], x_lo, p["a_aff_lo"], p["b_aff_lo"])
        if np.any(above):
            out[above] += self._affine_c_tail(xv[above], x_hi, p["a_aff_hi"], p["b_aff_hi"])
        return out.reshape(orig.shape)

    @staticmethod
    def _affine_c_tail(x, edge, a_aff, b_aff):
        """Closed-form integral of b/a past the table edge where both
        coefficients continue affinely."""
        a0, a1 = a_aff
        b0, b1 = b_aff
        s = x - edge
        if a1 == 0.0:
            return (b0 * s + 0.5 * b1 * s * s) / a0
        ratio = np.log(np.abs(a0 + a1 * s) / abs(a0))
        return (b1 / a1) * s + (b0 - b1 * a0 / a1) * ratio / a1


def ou_model() -> CoefficientModel:
    """Unit diffusion with linear restoring drift; stationary law standard
    Gaussian."""
    return CoefficientModel(kind=OU)


def power_model(alpha: float, smoothing_radius: float = 0.5) -> CoefficientModel:
    """Unit diffusion with drift -U' for U = |x|^alpha outside the smoothing
    radius and a C^2 quartic patch inside."""
    if alpha < 1.0:
        raise ValueError("alpha below 1 leaves the drift non-Lipschitz")
    if smoothing_radius <= 0:
        raise ValueError("smoothing radius must be positive")
    patch = _power_patch(alpha, smoothing_radius)
    return CoefficientModel(kind=POWER, params={
        "alpha": float(alpha),
        "smoothing_radius": float(smoothing_radius),
        "patch": patch,
    })


def tabulated_model(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> CoefficientModel:
    """Cubic-interpolated coefficients on a user grid, extended affinely
    outside.  The grid must cover [-20, 20]."""
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if x.ndim != 1 or x.size < 8 or np.any(np.diff(x) <= 0):
        raise ValueError("grid must be strictly increasing with >= 8 points")
    if x[0] > -TABLE_SPAN_MIN or x[-1] < TABLE_SPAN_MIN:
        raise ValueError(f"grid must cover [-{TABLE_SPAN_MIN}, {TABLE_SPAN_MIN}]")
    if np.any(a <= 0):
        raise ValueError("diffusion coefficient must be positive")
    a_spline = scipy.interpolate.CubicSpline(x, a)
    b_spline = scipy.interpolate.CubicSpline(x, b)
    ratio_spline = scipy.interpolate.CubicSpline(x, b / a)
    c_vals = np.concatenate(([0.0], scipy.integrate.cumulative_simpson(
        b / a, x=x)))
    c_vals -= np.interp(0.0, x, c_vals)
    c_spline = scipy.interpolate.CubicSpline(x, c_vals)
    # re-anchor so c(0) = 0 exactly under the spline
    c_spline = scipy.interpolate.CubicSpline(x, c_vals - c_spline(0.0))
    params = {
        "x_lo": float(x[0]), "x_hi": float(x[-1]),
        "a_spline": a_spline, "b_spline": b_spline,
        "c_spline": c_spline, "ratio_spline": ratio_spline,
        "a_aff_lo": (float(a[0]), float(a_spline.derivative()(x[0]))),
        "a_aff_hi": (float(a[-1]), float(a_spline.derivative()(x[-1]))),
        "b_aff_lo": (float(b[0]), float(b_spline.derivative()(x[0]))),
        "b_aff_hi": (float(b[-1]), float(b_spline.derivative()(x[-1]))),
        "a_floor": float(min(1e-12, 0.5 * a.min())),
    }
    return CoefficientModel(kind=TABULATED, params=params)


def tabulated_model_from_file(path: str) -> CoefficientModel:
    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] < 3:
        raise ValueError("expected three columns: x, a, b")
    return tabulated_model(data[:, 0], data[:, 1], data[:, 2])


def brownian_model() -> CoefficientModel:
    """Driftless unit-diffusion test model (infinite stationary mass)."""
    x = np.linspace(-25.0, 25.0, 101)
    return tabulated_model(x, np.ones_like(x), np.zeros_like(x))


# ---------------------------------------------------------------------------
# stationary measure


@dataclass(frozen=True)
class StationaryMeasure:
    """Normalized stationary density exp(c)/(m a) with table-backed CDF and
    quantile maps.  Immutable after construction."""

    model: CoefficientModel
    m: float
    tables: "object"  # sstlab.tables.ModelTables

    def c(self, x):
        return self.model.little_c(x)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(self.model.little_c(x) - math.log(self.m)) / self.model.a(x)
        return float(out) if out.ndim == 0 else out

    def cdf(self, x):
        return self.tables.cdf(x)

    def log_cdf(self, x):
        return self.tables.log_cdf(x)

    def log_tail(self, x):
        return self.tables.log_tail(x)

    def quantile(self, u):
        return self.tables.quantile(u)

    def phi(self, x):
        """sqrt(a) times the stationary density; the endpoint noise weight."""
        x = np.asarray(x, dtype=float)
        out = np.exp(self.model.little_c(x) - math.log(self.m)
                     - 0.5 * np.log(self.model.a(x)))
        return float(out) if out.ndim == 0 else out


def build_measure(model: CoefficientModel, n_knots: int = 4096) -> StationaryMeasure:
    """Normalize exp(c)/a into a probability measure.

    Raises NonIntegrable when the mass diverges (detected by the doubling
    probe on truncated integrals).
    """
    from . import tables as _tables

    def integrand(x):
        return math.exp(model.little_c(x)) / model.a(x)

    mass = adaptive_quad(integrand, -math.inf, math.inf, tol=1e-11)
    if is_divergent(mass):
        raise NonIntegrable("stationary measure has divergent mass")
    tabs = _tables.build_tables(model, n_knots=n_knots)
    return StationaryMeasure(model=model, m=tabs.mass, tables=tabs)


# ---------------------------------------------------------------------------
# segments and the link kernel


@dataclass(frozen=True)
class SegmentState:
    """Segment of the extended line with CDF coordinates attached."""

    x: float
    y: float
    u: float
    v: float

    def __post_init__(self):
        if not self.x <= self.y:
            raise ValueError("segment endpoints out of order")
        if math.isinf(self.x) and math.isinf(self.y) and self.x == self.y:
            raise ValueError("degenerate infinite segment is not a state")
        if not (0.0 <= self.u <= self.v <= 1.0):
            raise ValueError("CDF coordinates out of order")


def segment(measure: StationaryMeasure, x: float, y: float) -> SegmentState:
    u = 0.0 if math.isinf(x) and x < 0 else float(measure.cdf(x))
    v = 1.0 if math.isinf(y) and y > 0 else float(measure.cdf(y))
    return SegmentState(x=float(x), y=float(y), u=u, v=v)


def mass_h(seg: SegmentState) -> float:
    """Stationary mass of the segment, exactly v - u in CDF coordinates."""
    if seg.x == seg.y:
        return 0.0
    return seg.v - seg.u


def link_cdf(measure: StationaryMeasure, seg: SegmentState, t: float) -> float:
    """CDF at t of the link kernel row attached to the segment: the
    stationary law conditioned to [x, y], a Dirac mass when degenerate."""
    if seg.x == seg.y:
        return 1.0 if t >= seg.x else 0.0
    h = mass_h(seg)
    top = min(t, seg.y)
    mass = float(measure.cdf(top)) - seg.u
    if mass <= 0.0:
        return 0.0
    return min(mass / h, 1.0)


def midpoint_s(measure: StationaryMeasure, x: float, y: float,
               rtol: float = 1e-10) -> float:
    """Midpoint of [x, y] in the metric with line element 1/sqrt(a).

    Bisection on the antiderivative of 1/sqrt(a); absolute tolerance
    rtol * (y - x).
    """
    if y < x:
        raise ValueError("x must not exceed y")
    if x == y:
        return x
    target = 0.5 * (measure.tables.ahalf(x) + measure.tables.ahalf(y))
    lo, hi = x, y
    tol = rtol * (y - x)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if measure.tables.ahalf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# finiteness criteria


@dataclass(frozen=True)
class CriterionReport:
    i_minus: object  # float or Divergent
    i_plus: object
    recurrent_left: bool
    recurrent_right: bool
    mass_finite: bool

    @property
    def sst_exists(self) -> bool:
        return (self.mass_finite and self.recurrent_left and self.recurrent_right
                and not is_divergent(self.i_minus) and not is_divergent(self.i_plus))


def check_recurrence(model: CoefficientModel):
    """Booleans (recurrent_left, recurrent_right, mass_finite): divergence of
    the scale integrals on each side, finiteness of the stationary mass."""
    def scale(x):
        return math.exp(-model.little_c(x))

    def mass_integrand(x):
        return math.exp(model.little_c(x)) / model.a(x)

    left = adaptive_quad(scale, -math.inf, 0.0, tol=1e-9)
    right = adaptive_quad(scale, 0.0, math.inf, tol=1e-9)
    mass = adaptive_quad(mass_integrand, -math.inf, math.inf, tol=1e-9)
    return is_divergent(left), is_divergent(right), not is_divergent(mass)


def _tail_ratio_integrand(model: CoefficientModel, m: float, side: int):
    """J(y) = (1/m) * integral of exp(c(s) - c(y))/a(s) over the tail past y.

    The shifted exponent keeps the product of the huge scale factor and the
    tiny tail mass well conditioned.
    """
    def J(y):
        cy = model.little_c(y)

        def inner(s):
            return math.exp(model.little_c(s) - cy) / model.a(s)

        if side > 0:
            val = adaptive_quad(inner, y, math.inf, tol=1e-11)
        else:
            val = adaptive_quad(inner, -math.inf, y, tol=1e-11)
        if is_divergent(val):
            raise NonIntegrable("tail mass diverges inside criterion integrand")
        return val / m

    return J


def criterion_I(model: CoefficientModel, mass: Optional[float] = None) -> CriterionReport:
    """Existence criterion: both one-sided integrals I- and I+ finite together
    with positive recurrence.

    Each side is evaluated in the Fubini form as the integral of
    exp(-c(y)) * mu(tail beyond y); divergence is reported by the doubling
    probe rather than as an error.
    """
    rec_l, rec_r, mass_finite = check_recurrence(model)
    if not mass_finite:
        return CriterionReport(i_minus=DIVERGENT, i_plus=DIVERGENT,
                               recurrent_left=rec_l, recurrent_right=rec_r,
                               mass_finite=False)
    if mass is None:
        mass = adaptive_quad(
            lambda x: math.exp(model.little_c(x)) / model.a(x),
            -math.inf, math.inf, tol=1e-11)
    j_plus = _tail_ratio_integrand(model, mass, side=+1)
    j_minus = _tail_ratio_integrand(model, mass, side=-1)
    i_plus = adaptive_quad(j_plus, 0.0, math.inf, tol=1e-8)
    i_minus = adaptive_quad(lambda y: j_minus(-y), 0.0, math.inf, tol=1e-8)
    return CriterionReport(i_minus=i_minus, i_plus=i_plus,
                           recurrent_left=rec_l, recurrent_right=rec_r,
                           mass_finite=True)


class _CumulativeIntegral:
    """Cached antiderivative from 0 of a scalar field, cubic between knots.

    Knot spacing grows geometrically away from the origin so far probes stay
    cheap; per-cell Gauss-Legendre keeps polynomial fields exact.
    """

    def __init__(self, f, step: float = 0.125):
        self.f = f
        self.step = step
        self.knots = [0.0]
        self.vals = [0.0]
        self.slopes = [float(f(0.0))]
        self._gl = np.polynomial.legendre.leggauss(8)

    def _extend_to(self, x: float):
        import bisect as _b  # noqa: F401  (kept close to its use below)
        while self.knots[-1] < x:
            lo = self.knots[-1]
            h = self.step * max(1.0, lo / 16.0)
            hi = lo + h
            nodes = 0.5 * (lo + hi) + 0.5 * h * self._gl[0]
            piece = 0.5 * h * float(
                np.dot(self._gl[1], [self.f(t) for t in nodes]))
            self.knots.append(hi)
            self.vals.append(self.vals[-1] + piece)
            self.slopes.append(float(self.f(hi)))

    def __call__(self, x: float) -> float:
        import bisect
        if x <= 0.0:
            return 0.0
        self._extend_to(x)
        idx = min(bisect.bisect_right(self.knots, x) - 1, len(self.knots) - 2)
        h = self.knots[idx + 1] - self.knots[idx]
        t = (x - self.knots[idx]) / h
        v0, v1 = self.vals[idx], self.vals[idx + 1]
        s0, s1 = self.slopes[idx] * h, self.slopes[idx + 1] * h
        t2, t3 = t * t, t * t * t
        return ((2 * t3 - 3 * t2 + 1) * v0 + (t3 - 2 * t2 + t) * s0
                + (-2 * t3 + 3 * t2) * v1 + (t3 - t2) * s1)


def feller_explosion_test(a_hat, b_hat) -> bool:
    """Explosion test for a diffusion on the half line (reflected at 0).

    Evaluates the nested scale/speed integral toward +infinity with the
    divergence probe; True means the integral is finite, i.e. the process
    reaches +infinity in finite time almost surely.
    """
    ratio = _CumulativeIntegral(lambda y: b_hat(y) / a_hat(y))

    def outer(x):
        if x <= 0.0:
            return 0.0
        gx = ratio(x)
        # the inner integrand exp(G(z) - G(x))/a(z) concentrates below z = x
        # when G climbs; integrate in s = x - z over the visible window
        decay = max(b_hat(x) / a_hat(x), 0.0)
        span = x if decay <= 0 else min(x, 80.0 / decay)

        def inner(s):
            z = x - s
            return math.exp(ratio(z) - gx) / a_hat(z)

        val, _ = scipy.integrate.quad(inner, 0.0, span, epsabs=1e-13,
                                      epsrel=1e-9, limit=200)
        return val

    result = adaptive_quad(outer, 0.0, math.inf, tol=1e-7)
    return not is_divergent(result)


def dual_edge_coefficients(model: CoefficientModel, measure: StationaryMeasure):
    """Coefficient pair (a_hat, b_hat) of the comparison process whose
    explosion decides finiteness of the one-sided criterion: drift
    a' - b + 2 a mu / mu((-inf, .]) on the half line."""
    def a_hat(x):
        return float(model.a(x))

    def b_hat(x):
        log_ratio = (model.little_c(x) - math.log(measure.m)
                     - measure.log_cdf(x))
        return float(model.a_prime(x) - model.b(x)
                     + 2.0 * math.exp(log_ratio))

    return a_hat, b_hat
