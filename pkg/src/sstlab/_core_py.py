"""Pure-Python path kernels.

This is the fallback backend: every function here has a compiled twin in
the extension module, written with textually identical arithmetic so the
two backends produce bit-identical trajectories from the same generator
state.  Keep any change in lockstep with the twin.
"""

import math

BACKEND = "python"

_LN_EDGE_HYST = 2.0  # fringe -> bulk re-entry at eps_edge * hysteresis


class Tabs:
    """Unpacked field tables plus kind constants, list-backed for speed."""

    __slots__ = ("kind", "kw", "x_max", "w0", "dw", "n", "log_m",
                 "c_v", "c_s", "la_v", "la_s", "b_v", "b_s",
                 "lf_v", "lf_s", "lg_v", "lg_s", "ah_v", "ah_s", "ex")

    def __init__(self, pack):
        self.kind = int(pack["kind_id"])
        self.kw = float(pack["kw"])
        self.x_max = float(pack["x_max"])
        self.w0 = float(pack["w0"])
        self.dw = float(pack["dw"])
        self.n = int(pack["n_cells"])
        self.log_m = float(pack["log_m"])
        for key in ("c_v", "c_s", "la_v", "la_s", "b_v", "b_s",
                    "lf_v", "lf_s", "lg_v", "lg_s", "ah_v", "ah_s"):
            setattr(self, key, [float(t) for t in pack[key]])
        self.ex = [float(t) for t in pack["extra"]]


def make_tables(pack):
    return Tabs(pack)


# ---------------------------------------------------------------------------
# field evaluation


def _w_of_x(tab, x):
    if x >= 0.0:
        return x / (tab.kw + x)
    return x / (tab.kw - x)


def _x_of_w(tab, w):
    if w >= 0.0:
        return tab.kw * w / (1.0 - w)
    return tab.kw * w / (1.0 + w)


def _herm(tab, v, s, w):
    pos = (w - tab.w0) / tab.dw
    i = int(math.floor(pos))
    if i < 0:
        i = 0
    if i > tab.n - 1:
        i = tab.n - 1
    t = pos - i
    if t < 0.0:
        t = 0.0
    if t > 1.0:
        t = 1.0
    t2 = t * t
    t3 = t2 * t
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * v[i]
            + (t3 - 2.0 * t2 + t) * tab.dw * s[i]
            + (-2.0 * t3 + 3.0 * t2) * v[i + 1]
            + (t3 - t2) * tab.dw * s[i + 1])


def _herm_x(tab, v, s, x):
    return _herm(tab, v, s, _w_of_x(tab, x))


def _invert_mono(tab, v, s, target):
    """Solve interpolant(w) = target for a nondecreasing table by bisection
    on the containing cell."""
    n = tab.n
    if target <= v[0]:
        return tab.w0
    if target >= v[n]:
        return tab.w0 + n * tab.dw
    lo = 0
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if v[mid] <= target:
            lo = mid
        else:
            hi = mid
    i = lo
    tlo = 0.0
    thi = 1.0
    dws_lo = tab.dw * s[i]
    dws_hi = tab.dw * s[i + 1]
    for _ in range(45):
        t = 0.5 * (tlo + thi)
        t2 = t * t
        t3 = t2 * t
        val = ((2.0 * t3 - 3.0 * t2 + 1.0) * v[i]
               + (t3 - 2.0 * t2 + t) * dws_lo
               + (-2.0 * t3 + 3.0 * t2) * v[i + 1]
               + (t3 - t2) * dws_hi)
        if val < target:
            tlo = t
        else:
            thi = t
    return tab.w0 + (i + 0.5 * (tlo + thi)) * tab.dw


def coeff_c(tab, x):
    if tab.kind == 0:
        return -0.5 * x * x
    ax = x if x >= 0.0 else -x
    if ax <= tab.x_max:
        if tab.kind == 1:
            return _herm_x(tab, tab.c_v, tab.c_s, x)
        return _herm_x(tab, tab.c_v, tab.c_s, x)
    if tab.kind == 1:
        alpha = tab.ex[0]
        pA = tab.ex[2]
        return -(math.pow(ax, alpha) - pA)
    # tabulated: closed-form integral of the affine continuation of b/a
    if x > 0.0:
        edge = tab.x_max
        c_edge = tab.c_v[tab.n]
        a0 = tab.ex[4]
        a1 = tab.ex[5]
        b0 = tab.ex[8]
        b1 = tab.ex[9]
        ds = x - edge
    else:
        edge = -tab.x_max
        c_edge = tab.c_v[0]
        a0 = tab.ex[2]
        a1 = tab.ex[3]
        b0 = tab.ex[6]
        b1 = tab.ex[7]
        ds = x - edge
    if a1 == 0.0:
        return c_edge + (b0 * ds + 0.5 * b1 * ds * ds) / a0
    arg = (a0 + a1 * ds) / a0
    if arg < 1e-12:
        arg = 1e-12
    return c_edge + (b1 / a1) * ds + (b0 - b1 * a0 / a1) * math.log(arg) / a1


def coeff_a(tab, x):
    if tab.kind != 2:
        return 1.0
    ax = x if x >= 0.0 else -x
    if ax <= tab.x_max:
        return math.exp(_herm_x(tab, tab.la_v, tab.la_s, x))
    if x > 0.0:
        val = tab.ex[4] + tab.ex[5] * (x - tab.x_max)
    else:
        val = tab.ex[2] + tab.ex[3] * (x + tab.x_max)
    return val if val > 1e-12 else 1e-12


def coeff_ap(tab, x):
    if tab.kind != 2:
        return 0.0
    ax = x if x >= 0.0 else -x
    if ax <= tab.x_max:
        a = math.exp(_herm_x(tab, tab.la_v, tab.la_s, x))
        # d(ln a)/dx = slope/dxdw recovers a' from the log table
        w = _w_of_x(tab, x)
        one = 1.0 - (w if w >= 0.0 else -w)
        dwdx = one * one / tab.kw
        pos = (w - tab.w0) / tab.dw
        i = int(math.floor(pos))
        if i < 0:
            i = 0
        if i > tab.n - 1:
            i = tab.n - 1
        t = pos - i
        if t < 0.0:
            t = 0.0
        if t > 1.0:
            t = 1.0
        # derivative of the Hermite cubic in w
        t2 = t * t
        d = ((6.0 * t2 - 6.0 * t) * tab.la_v[i]
             + (3.0 * t2 - 4.0 * t + 1.0) * tab.dw * tab.la_s[i]
             + (-6.0 * t2 + 6.0 * t) * tab.la_v[i + 1]
             + (3.0 * t2 - 2.0 * t) * tab.dw * tab.la_s[i + 1]) / tab.dw
        return a * d * dwdx
    return tab.ex[5] if x > 0.0 else tab.ex[3]


def coeff_b(tab, x):
    if tab.kind == 0:
        return -x
    ax = x if x >= 0.0 else -x
    if ax <= tab.x_max:
        return _herm_x(tab, tab.b_v, tab.b_s, x)
    if tab.kind == 1:
        alpha = tab.ex[0]
        sgn = 1.0 if x >= 0.0 else -1.0
        return -alpha * sgn * math.pow(ax, alpha - 1.0)
    if x > 0.0:
        return tab.ex[8] + tab.ex[9] * (x - tab.x_max)
    return tab.ex[6] + tab.ex[7] * (x + tab.x_max)


def log_cdf(tab, x):
    w = _w_of_x(tab, x)
    return _herm(tab, tab.lf_v, tab.lf_s, w)


def log_tail(tab, x):
    w = _w_of_x(tab, x)
    return _herm(tab, tab.lg_v, tab.lg_s, w)


def phi_of(tab, x):
    # sqrt(a) * stationary density, evaluated in log space
    if tab.kind == 2:
        la = math.log(coeff_a(tab, x))
    else:
        la = 0.0
    arg = coeff_c(tab, x) - tab.log_m - 0.5 * la
    if arg < -700.0:
        return 0.0
    return math.exp(arg)


def quantile(tab, u):
    if u <= 0.0:
        return -math.inf
    if u >= 1.0:
        return math.inf
    w = _invert_mono(tab, tab.lf_v, tab.lf_s, math.log(u))
    return _x_of_w(tab, w)


def tail_quantile(tab, g):
    """Position whose upper-tail mass is g (inverts the log-tail table)."""
    if g <= 0.0:
        return math.inf
    if g >= 1.0:
        return -math.inf
    target = -math.log(g)
    n = tab.n
    # lg is decreasing: invert -lg which is nondecreasing
    neg_v = [-t for t in tab.lg_v]
    neg_s = [-t for t in tab.lg_s]
    w = _invert_mono(tab, neg_v, neg_s, target)
    return _x_of_w(tab, w)


def cdf(tab, x):
    if x >= 0.0:
        return 1.0 - math.exp(log_tail(tab, x))
    return math.exp(log_cdf(tab, x))


def ahalf(tab, x):
    return _herm_x(tab, tab.ah_v, tab.ah_s, x)


def ahalf_inverse(tab, p):
    w = _invert_mono(tab, tab.ah_v, tab.ah_s, p)
    return _x_of_w(tab, w)


def midpoint(tab, x, y):
    return ahalf_inverse(tab, 0.5 * (ahalf(tab, x) + ahalf(tab, y)))


def psi_inverse(tab, R, S):
    """Endpoints (x, y) with segment mass R and metric midpoint S."""
    if R <= 0.0:
        return S, S
    P = ahalf(tab, S)
    FS = cdf(tab, S)
    # expand a bracket [p_lo, P] in the half-width coordinate
    step = 1e-4
    p_lo = P - step
    for _ in range(80):
        x = ahalf_inverse(tab, p_lo)
        y = ahalf_inverse(tab, 2.0 * P - p_lo)
        val = cdf(tab, y) - cdf(tab, x) - R
        if val >= 0.0:
            break
        step *= 2.0
        p_lo = P - step
    else:
        raise ChartInversionFailure("bracket expansion failed")
    p_hi = P
    for _ in range(90):
        p = 0.5 * (p_lo + p_hi)
        x = ahalf_inverse(tab, p)
        y = ahalf_inverse(tab, 2.0 * P - p)
        val = cdf(tab, y) - cdf(tab, x) - R
        if val > 0.0:
            p_lo = p
        else:
            p_hi = p
        if p_hi - p_lo < 1e-14 * (1.0 + abs(P)):
            break
    p = 0.5 * (p_lo + p_hi)
    x = ahalf_inverse(tab, p)
    y = ahalf_inverse(tab, 2.0 * P - p)
    _ = FS
    return x, y


class ChartInversionFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# elementary samplers


def besq3_step(gen, q, dt):
    """Exact squared-Bessel(3) transition over dt from q >= 0."""
    z1 = float(gen.standard_normal())
    z2 = float(gen.standard_normal())
    z3 = float(gen.standard_normal())
    root = z1 + math.sqrt(q / dt)
    return dt * (root * root + z2 * z2 + z3 * z3)


def bes3_hit_time(gen, r0, level, dt_base, dt_min):
    """First time the Bessel(3) radius started at r0 reaches `level`,
    with exact transitions and step size shrinking near the level."""
    r = r0
    t = 0.0
    while True:
        d = level - r
        dt = 0.25 * d * d
        if dt > dt_base:
            dt = dt_base
        if dt < dt_min:
            dt = dt_min
        q_new = besq3_step(gen, r * r, dt)
        r_new = math.sqrt(q_new)
        if r_new >= level:
            frac = (level - r) / (r_new - r)
            return t + dt * frac
        t += dt
        r = r_new


def linear_y_path(gen, y0, dt, t_max, level, grid, out_y):
    """Exact transitions of dY = Y dt + sqrt(2) dB; stops when |Y| = level
    (level <= 0 disables hitting).  Records Y on the time grid."""
    edt = math.exp(dt)
    sd = math.sqrt(math.expm1(2.0 * dt))
    y = y0
    t = 0.0
    gi = 0
    ng = len(grid) if grid is not None else 0
    hit_t = math.inf
    while t < t_max:
        y_new = edt * y + sd * float(gen.standard_normal())
        t_new = t + dt
        while gi < ng and grid[gi] <= t_new:
            frac = (grid[gi] - t) / dt
            out_y[gi] = y + (y_new - y) * frac
            gi += 1
        ay = y_new if y_new >= 0.0 else -y_new
        if level > 0.0 and ay >= level:
            ay0 = y if y >= 0.0 else -y
            denom = ay - ay0
            frac = (level - ay0) / denom if denom > 0.0 else 1.0
            hit_t = t + dt * frac
            break
        y = y_new
        t = t_new
    while gi < ng:
        out_y[gi] = y
        gi += 1
    return hit_t


def _gamma0(y):
    """Mass of the standard Gaussian on [0, y], series-stabilized near 0."""
    if y >= 1e-3:
        return 0.5 * math.erf(y * 0.7071067811865476)
    y2 = y * y
    series = y * (1.0 - y2 / 6.0 + y2 * y2 / 40.0 - y2 * y2 * y2 / 336.0)
    return series * 0.3989422804014327


def g_repulsion(y):
    """2 gamma(y) / gamma([0, y]): the entrance repulsion of the symmetric
    dual's upper endpoint."""
    pdf = 0.3989422804014327 * math.exp(-0.5 * y * y)
    return 2.0 * pdf / _gamma0(y)


def ou_ystar_path(gen, y0, dt, t_max, level, grid, out_y):
    """Upper endpoint of the symmetric Gaussian dual: drift y + g(y),
    unit-variance noise doubled, entrance from 0.

    Splitting: the singular 2/y part advances by an exact Bessel(3)
    transition, the bounded remainder y + g(y) - 2/y by Euler.
    """
    y = y0
    t = 0.0
    gi = 0
    ng = len(grid) if grid is not None else 0
    hit_t = math.inf
    sqrt_half = 0.7071067811865476
    while t < t_max:
        q = 0.5 * y * y
        qn = besq3_step(gen, q, dt)
        y_b = math.sqrt(2.0 * qn)
        if y > 1e-8:
            corr = y + g_repulsion(y) - 2.0 / y
        else:
            corr = 0.0
        y_new = y_b + corr * dt
        if y_new < 0.0:
            y_new = 0.0
        t_new = t + dt
        while gi < ng and grid[gi] <= t_new:
            frac = (grid[gi] - t) / dt
            out_y[gi] = y + (y_new - y) * frac
            gi += 1
        if level > 0.0 and y_new >= level:
            denom = y_new - y
            frac = (level - y) / denom if denom > 0.0 else 1.0
            hit_t = t + dt * frac
            break
        y = y_new
        t = t_new
    while gi < ng:
        out_y[gi] = y
        gi += 1
    _ = sqrt_half
    return hit_t


def reflected_u_path(tab, gen, u0, dt_base, dt_min, t_max, x_explode):
    """Comparison process on the half line: drift a' - b + 2 a mu / F,
    reflected at 0 by absolute value, absorbed at the escape level.

    Returns (explosion_time, final_state); explosion_time is inf when the
    path survives to t_max.
    """
    u = u0
    t = 0.0
    while t < t_max:
        ap = coeff_ap(tab, u)
        b = coeff_b(tab, u)
        a = coeff_a(tab, u)
        if u > tab.x_max:
            rep = b if b >= 0.0 else -b
            rep = 2.0 * a * (rep / a)
        else:
            arg = coeff_c(tab, u) - tab.log_m - log_cdf(tab, u)
            rep = 2.0 * math.exp(arg) if arg > -700.0 else 0.0
        drift = ap - b + rep
        ad = drift if drift >= 0.0 else -drift
        dt = 0.1 * (1.0 + u) / (1.0 + ad)
        if dt > dt_base:
            dt = dt_base
        if dt < dt_min:
            dt = dt_min
        xi = float(gen.standard_normal())
        u_new = u + drift * dt + math.sqrt(2.0 * a * dt) * xi
        if u_new < 0.0:
            u_new = -u_new
        t += dt
        if u_new >= x_explode:
            return t, math.inf
        u = u_new
    return math.inf, u


def x_euler_path(tab, gen, x0, dt_base, dt_min, t_max, grid, out_x):
    """Euler path of the base diffusion dX = b dt + sqrt(2a) dB."""
    x = x0
    t = 0.0
    gi = 0
    ng = len(grid) if grid is not None else 0
    while t < t_max:
        b = coeff_b(tab, x)
        a = coeff_a(tab, x)
        ab = b if b >= 0.0 else -b
        dt = 0.1 * (1.0 + (x if x >= 0.0 else -x)) / (1.0 + ab)
        if dt > dt_base:
            dt = dt_base
        if dt < dt_min:
            dt = dt_min
        xi = float(gen.standard_normal())
        x_new = x + b * dt + math.sqrt(2.0 * a * dt) * xi
        t_new = t + dt
        while gi < ng and grid[gi] <= t_new:
            frac = (grid[gi] - t) / dt
            out_x[gi] = x + (x_new - x) * frac
            gi += 1
        x = x_new
        t = t_new
    while gi < ng:
        out_x[gi] = x
        gi += 1
    return x


# ---------------------------------------------------------------------------
# the segment-valued dual


# endpoint modes
_BULK = 0
_FRINGE = 1
_INF = 2

# start modes
START_DIAGONAL = 0
START_SEGMENT = 1
START_HALFLINE_LEFT = 2   # segment (-inf, y0]
START_HALFLINE_RIGHT = 3  # segment [x0, +inf)


def _chart_coeffs(tab, R, S, x, y, alpha):
    phx = phi_of(tab, x)
    phy = phi_of(tab, y)
    tot = phx + phy
    gam = 2.0 * tot * tot - 8.0 * alpha * phx * phy
    aS = coeff_a(tab, S)
    rootaS = math.sqrt(aS)
    drift = (0.5 * alpha * coeff_ap(tab, S)
             + (0.5 * coeff_ap(tab, x) - coeff_b(tab, x)) * 0.5
             * math.sqrt(aS / coeff_a(tab, x))
             + (0.5 * coeff_ap(tab, y) - coeff_b(tab, y)) * 0.5
             * math.sqrt(aS / coeff_a(tab, y)))
    cov = 0.0
    sig2 = 0.0
    if alpha > 0.0:
        if R < 1e-4:
            ratio = (coeff_b(tab, S) - 0.5 * coeff_ap(tab, S)) / rootaS
        else:
            ratio = (phy - phx) / R
        drift += 2.0 * alpha * rootaS * ratio
        sig2 = 2.0 * alpha * aS / gam
        cov = 2.0 * alpha * rootaS * (phy - phx) / gam
    return drift / gam, gam, sig2, cov


def dual_path(tab, gen, start_mode, x0, y0, alpha,
              dt_base, dt_min, t_max, r_switch, eps_edge, x_explode,
              ds_base, ds_min, grid, out_h, out_lo, out_hi,
              couple_u0, out_cu):
    """One trajectory of the segment-valued dual.

    State per endpoint: CDF coordinate while in the bulk, raw position in
    the fringe beyond the eps_edge mass threshold, or escaped-to-infinity.
    The diagonal neighborhood runs in the (mass, midpoint) chart with exact
    Bessel transitions for the mass coordinate.

    Returns a dict with hitting times of -inf and +inf, the absorption
    time, the accumulated carre-du-champ clock, and coupling diagnostics.
    """
    ln_eps = math.log(eps_edge)

    mode_l = _BULK
    mode_r = _BULK
    xl = 0.0
    xr = 0.0
    ul = 0.0      # P[X <= xl]
    gr = 0.0      # P[X > xr]
    in_chart = False
    R = 0.0
    S = 0.0

    if start_mode == START_DIAGONAL:
        in_chart = True
        R = 0.0
        S = x0
    elif start_mode == START_SEGMENT:
        xl = x0
        xr = y0
        ul = cdf(tab, xl)
        gr = 1.0 - cdf(tab, xr)
        if cdf(tab, xr) - ul < r_switch:
            in_chart = True
            R = cdf(tab, xr) - ul
            S = midpoint(tab, xl, xr)
    elif start_mode == START_HALFLINE_LEFT:
        mode_l = _INF
        xl = -math.inf
        ul = 0.0
        xr = y0
        gr = 1.0 - cdf(tab, xr)
    else:
        mode_r = _INF
        xr = math.inf
        gr = 0.0
        xl = x0
        ul = cdf(tab, xl)

    tau_minus = math.inf
    tau_plus = math.inf
    t = 0.0
    varsigma = 0.0
    n_steps = 0
    gi = 0
    ng = len(grid) if grid is not None else 0

    have_u = couple_u0 == couple_u0  # not NaN
    ucur = couple_u0 if have_u else 0.0
    t_u_zero = math.inf
    viol = 0
    vpoints = 0

    def record(t_old, t_new, h_old, h_new, lo_old, lo_new, hi_old, hi_new):
        nonlocal gi
        while gi < ng and grid[gi] <= t_new:
            span = t_new - t_old
            frac = (grid[gi] - t_old) / span if span > 0.0 else 1.0
            if out_h is not None:
                out_h[gi] = h_old + (h_new - h_old) * frac
            if out_lo is not None:
                out_lo[gi] = lo_old + (lo_new - lo_old) * frac
            if out_hi is not None:
                out_hi[gi] = hi_old + (hi_new - hi_old) * frac
            gi += 1

    while t < t_max:
        n_steps += 1
        if n_steps > 500_000_000:
            break

        if in_chart:
            ds = 0.25 * R * R
            if ds > ds_base:
                ds = ds_base
            if ds < ds_min:
                ds = ds_min
            if R <= 0.0:
                x = S
                y = S
            else:
                x, y = psi_inverse(tab, R, S)
            drift_s, gam, sig2, cov = _chart_coeffs(tab, R, S, x, y, alpha)
            qn = besq3_step(gen, R * R, ds)
            R_new = math.sqrt(qn)
            R_mid = 0.5 * (R + R_new)
            S_stage = S + 0.5 * ds * drift_s
            xm, ym = psi_inverse(tab, R_mid, S_stage)
            drift2, gam2, sig22, cov2 = _chart_coeffs(tab, R_mid, S_stage,
                                                      xm, ym, alpha)
            S_new = S + ds * drift2
            if alpha > 0.0 and sig22 > 0.0:
                dw1 = (R_new - R) - ds / (R_mid if R_mid > 1e-12 else 1e-12)
                sig = math.sqrt(sig22)
                rho = cov2 / sig
                if rho > 1.0:
                    rho = 1.0
                if rho < -1.0:
                    rho = -1.0
                perp = math.sqrt(1.0 - rho * rho)
                xi = float(gen.standard_normal())
                S_new += sig * (rho * dw1 + perp * math.sqrt(ds) * xi)
            dt_orig = ds / gam2
            t_new = t + dt_orig
            if t_new > t_max:
                # stop on the time budget; clip the partial step
                frac = (t_max - t) / dt_orig
                varsigma += ds * frac
                record(t, t_max, R, R + (R_new - R) * frac,
                       x, x, y, y)
                t = t_max
                R = R + (R_new - R) * frac
                break
            varsigma += ds
            record(t, t_new, R, R_new, x, x, y, y)
            t = t_new
            R = R_new
            S = S_new
            if R >= 1.05 * r_switch:
                x, y = psi_inverse(tab, R, S)
                xl = x
                xr = y
                ul = cdf(tab, xl)
                gr = 1.0 - cdf(tab, xr)
                mode_l = _BULK
                mode_r = _BULK
                in_chart = False
            continue

        # --- normal stepping -------------------------------------------
        ucdf_l = ul if mode_l != _INF else 0.0
        ucdf_r = (1.0 - gr) if mode_r != _INF else 1.0
        h = ucdf_r - ucdf_l
        if h < 1e-300:
            h = 1e-300

        phx = phi_of(tab, xl) if mode_l != _INF else 0.0
        phy = phi_of(tab, xr) if mode_r != _INF else 0.0

        # chart re-entry needs two finite endpoints
        if (h < r_switch and mode_l == _BULK and mode_r == _BULK):
            R = h
            S = midpoint(tab, xl, xr)
            in_chart = True
            continue

        dt = dt_base * h * h if h < 1.0 else dt_base
        if dt > dt_base:
            dt = dt_base
        dl = 0.0
        dr = 0.0
        if mode_l == _FRINGE:
            dl = coeff_ap(tab, xl) - coeff_b(tab, xl)
            al = dl if dl >= 0.0 else -dl
            cap = 0.1 * (1.0 + (xl if xl >= 0.0 else -xl)) / (1.0 + al)
            if cap < dt:
                dt = cap
        if mode_r == _FRINGE:
            dr = coeff_ap(tab, xr) - coeff_b(tab, xr)
            ar = dr if dr >= 0.0 else -dr
            cap = 0.1 * (1.0 + (xr if xr >= 0.0 else -xr)) / (1.0 + ar)
            if cap < dt:
                dt = cap
        if dt < dt_min:
            dt = dt_min
        rdt = math.sqrt(dt)

        xi1 = float(gen.standard_normal())
        if alpha > 0.0:
            xi2 = float(gen.standard_normal())
            rho = 1.0 - 2.0 * alpha
            xiy = rho * xi1 + math.sqrt(1.0 - rho * rho) * xi2
        else:
            xiy = xi1
        xix = xi1

        mix = 1.0 - 2.0 * alpha
        gam = 2.0 * (phx + phy) * (phx + phy) - 8.0 * alpha * phx * phy

        t_new = t + dt
        clip = 1.0
        if t_new > t_max:
            clip = (t_max - t) / dt
            dt = t_max - t
            rdt = math.sqrt(dt)
            t_new = t_max

        # left endpoint
        new_mode_l = mode_l
        xl_new = xl
        ul_new = ul
        if mode_l == _BULK:
            du = -(2.0 * phx / h) * (phx + mix * phy) * dt \
                - 1.4142135623730951 * phx * xix * rdt
            ul_new = ul + du
            if ul_new <= 0.0:
                ul_new = 0.5 * ul
            lnu = math.log(ul_new)
            # Newton track of the position from the previous point
            xn = xl
            for _ in range(3):
                fx = log_cdf(tab, xn) - lnu
                slope = math.exp(coeff_c(tab, xn) - tab.log_m
                                 - math.log(coeff_a(tab, xn))
                                 - log_cdf(tab, xn))
                if slope < 1e-300:
                    break
                xn -= fx / slope
            if not (abs(log_cdf(tab, xn) - lnu) < 1e-9):
                xn = quantile(tab, ul_new)
            xl_new = xn
            if ul_new < eps_edge:
                new_mode_l = _FRINGE
        elif mode_l == _FRINGE:
            drift = dl - (2.0 * math.sqrt(coeff_a(tab, xl)) / h) \
                * (phx + mix * phy) * math.sqrt(coeff_a(tab, xl))
            xl_new = xl + drift * dt \
                - math.sqrt(2.0 * coeff_a(tab, xl)) * xix * rdt
            if xl_new <= -x_explode:
                new_mode_l = _INF
                if tau_minus == math.inf:
                    tau_minus = t_new
                xl_new = -math.inf
                ul_new = 0.0
            else:
                lf = log_cdf(tab, xl_new)
                ul_new = math.exp(lf)
                if lf > ln_eps + _LN_EDGE_HYST:
                    new_mode_l = _BULK

        # right endpoint
        new_mode_r = mode_r
        xr_new = xr
        gr_new = gr
        if mode_r == _BULK:
            dv = (2.0 * phy / h) * (phy + mix * phx) * dt \
                + 1.4142135623730951 * phy * xiy * rdt
            gr_new = gr - dv
            if gr_new <= 0.0:
                gr_new = 0.5 * gr
            lng = math.log(gr_new)
            yn = xr
            for _ in range(3):
                fy = log_tail(tab, yn) - lng
                slope = -math.exp(coeff_c(tab, yn) - tab.log_m
                                  - math.log(coeff_a(tab, yn))
                                  - log_tail(tab, yn))
                if slope > -1e-300:
                    break
                yn -= fy / slope
            if not (abs(log_tail(tab, yn) - lng) < 1e-9):
                yn = tail_quantile(tab, gr_new)
            xr_new = yn
            if gr_new < eps_edge:
                new_mode_r = _FRINGE
        elif mode_r == _FRINGE:
            drift = dr + (2.0 * math.sqrt(coeff_a(tab, xr)) / h) \
                * (phy + mix * phx) * math.sqrt(coeff_a(tab, xr))
            xr_new = xr + drift * dt \
                + math.sqrt(2.0 * coeff_a(tab, xr)) * xiy * rdt
            if xr_new >= x_explode:
                new_mode_r = _INF
                if tau_plus == math.inf:
                    tau_plus = t_new
                xr_new = math.inf
                gr_new = 0.0
            else:
                lg = log_tail(tab, xr_new)
                gr_new = math.exp(lg)
                if lg > ln_eps + _LN_EDGE_HYST:
                    new_mode_r = _BULK

        # coupled comparison process, driven by the same right-endpoint noise
        if have_u and t_u_zero == math.inf and mode_r != _INF:
            arg = coeff_c(tab, ucur) - tab.log_m - log_cdf(tab, ucur)
            rep = 2.0 * math.exp(arg) if arg > -700.0 else 0.0
            du_drift = coeff_ap(tab, ucur) - coeff_b(tab, ucur) + rep
            u_new = ucur + du_drift * dt \
                + math.sqrt(2.0 * coeff_a(tab, xr)) * xiy * rdt
            if u_new < 0.0:
                u_new = -u_new
                if ucur > 0.0:
                    t_u_zero = t_new
            vpoints += 1
            if mode_r != _INF and u_new > xr_new:
                viol += 1
            ucur = u_new

        varsigma += gam * dt
        h_new = ((1.0 - gr_new) if new_mode_r != _INF else 1.0) \
            - (ul_new if new_mode_l != _INF else 0.0)
        record(t, t_new,
               h, h_new,
               xl if mode_l != _INF else -math.inf,
               xl_new if new_mode_l != _INF else -math.inf,
               xr if mode_r != _INF else math.inf,
               xr_new if new_mode_r != _INF else math.inf)
        t = t_new
        mode_l = new_mode_l
        mode_r = new_mode_r
        xl = xl_new
        xr = xr_new
        ul = ul_new
        gr = gr_new
        _ = clip

        if mode_l == _INF and mode_r == _INF:
            break

    absorbed = mode_l == _INF and mode_r == _INF
    tau_star = tau_minus if tau_minus > tau_plus else tau_plus
    if not absorbed:
        tau_star = math.inf
    if gi < ng:
        # fill the remaining grid with the final state
        h_fin = 1.0 if absorbed else (((1.0 - gr) if mode_r != _INF else 1.0)
                                      - (ul if mode_l != _INF else 0.0))
        while gi < ng:
            if out_h is not None:
                out_h[gi] = h_fin
            if out_lo is not None:
                out_lo[gi] = xl if mode_l != _INF else -math.inf
            if out_hi is not None:
                out_hi[gi] = xr if mode_r != _INF else math.inf
            gi += 1
    if out_cu is not None and have_u:
        out_cu[0] = float(viol)
        out_cu[1] = float(vpoints)
        out_cu[2] = t_u_zero
    return {
        "tau_minus": tau_minus,
        "tau_plus": tau_plus,
        "tau_star": tau_star,
        "varsigma": varsigma,
        "t_end": t,
        "n_steps": n_steps,
        "absorbed": 1 if absorbed else 0,
        "xl": xl if mode_l != _INF else -math.inf,
        "xr": xr if mode_r != _INF else math.inf,
    }
