"""Mather's alpha and beta functions from sampled effective Hamiltonians.

The discrete conjugate ``g*(y) = max_x <x, y> - g(x)`` over samples equals
the conjugate of the lower convex hull of the samples, so the fast path builds
the hull once and reads each query off the edge slopes.
"""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .cell import EffectiveHamiltonian, _threads
from .errors import EmptyInput, InfeasibleWinding, MinimumOnBoundary, NonUniformGrid, SpecError
from .hamiltonian import HamiltonianSpec

UNIFORM_RTOL = 1e-9


def lower_hull(x, g):
    """Indices of the lower convex hull vertices of sorted points ``(x, g)``."""
    idx = []
    for i in range(len(x)):
        while len(idx) >= 2:
            j, k = idx[-2], idx[-1]
            # drop k if it lies on or above the chord j -> i
            if (g[k] - g[j]) * (x[i] - x[j]) >= (g[i] - g[j]) * (x[k] - x[j]):
                idx.pop()
            else:
                break
        idx.append(i)
    return np.array(idx, dtype=int)


def _conjugate_1d(x, g, y):
    """Discrete conjugate on arbitrary sorted ``x`` (uniformity not required)."""
    hv = lower_hull(x, g)
    xh, gh = x[hv], g[hv]
    if len(xh) == 1:
        return y * xh[0] - gh[0]
    slopes = np.diff(gh) / np.diff(xh)
    # vertex k maximises x y - g for slopes[k-1] <= y <= slopes[k]
    k = np.searchsorted(slopes, y, side="left")
    return y * xh[k] - gh[k]


def conjugate_bruteforce(x, g, y):
    """O(N M) reference conjugate."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.max(np.outer(y, x) - g[None, :], axis=1)


def _check_axis(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise EmptyInput("no samples to transform")
    if x.size > 1:
        d = np.diff(x)
        if np.any(d <= 0) or np.ptp(d) > UNIFORM_RTOL * max(abs(d).max(), 1.0):
            raise NonUniformGrid("samples must be sorted on a uniform grid")
    return x


def hull_slope_range(x, g):
    hv = lower_hull(np.asarray(x, float), np.asarray(g, float))
    if len(hv) == 1:
        return -np.inf, np.inf
    s = np.diff(g[hv]) / np.diff(x[hv])
    return float(s[0]), float(s[-1])


def _default_dual_axis(x, g):
    # input nodes inside the slope range: the conjugate is exact and finite there
    lo, hi = hull_slope_range(x, g)
    y = x[(x >= lo - 1e-12) & (x <= hi + 1e-12)]
    return y if y.size else x.copy()


def fenchel_transform(x, g, y=None):
    """Discrete Legendre-Fenchel conjugate of sampled values.

    1D: ``x`` sorted uniform, ``g`` same length; returns ``(y, g*)``.  The
    default ``y`` is the input nodes lying within the hull's slope range.

    2D: ``x`` is a pair of uniform axes, ``g`` has shape ``(len(x0), len(x1))``
    and ``y`` an optional pair of output axes; the transform is taken one axis
    at a time, ``g*(y0, y1) = max_x0 [x0 y0 + max_x1 (x1 y1 - g)]``.
    """
    if isinstance(x, (tuple, list)) and len(x) == 2 and np.ndim(x[0]) == 1 and np.ndim(g) == 2:
        x0, x1 = _check_axis(x[0]), _check_axis(x[1])
        g = np.asarray(g, dtype=float)
        if g.shape != (x0.size, x1.size):
            raise SpecError("2D samples must have shape (len(x0), len(x1))")
        y0, y1 = (x0, x1) if y is None else (np.asarray(y[0], float), np.asarray(y[1], float))
        inner = np.stack([_conjugate_1d(x1, row, y1) for row in g])  # (len(x0), len(y1))
        out = np.stack([_conjugate_1d(x0, -inner[:, j], y0) for j in range(y1.size)], axis=1)
        return (y0, y1), out
    x = _check_axis(x)
    g = np.asarray(g, dtype=float)
    if g.shape != x.shape:
        raise SpecError("values and samples must have the same length")
    if not np.all(np.isfinite(g)):
        raise SpecError("sample values must be finite")
    y = _default_dual_axis(x, g) if y is None else np.asarray(y, dtype=float)
    return y, _conjugate_1d(x, g, y)


# ---------------------------------------------------------------------------
# alpha and beta


def _sampled_csv(axis_label, x, values, lower=None, upper=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = [axis_label, "value"] + (["lower", "upper"] if lower is not None else [])
    w.writerow(cols)
    for i, xi in enumerate(x):
        row = [repr(float(xi)), repr(float(values[i]))]
        if lower is not None:
            row += [repr(float(lower[i])), repr(float(upper[i]))]
        w.writerow(row)
    return buf.getvalue()


@dataclass
class AlphaFunction:
    """Effective Hamiltonian read as Mather's alpha on the cohomology axis ``c``."""

    eh: EffectiveHamiltonian

    @property
    def c(self):
        return self.eh.p

    @property
    def values(self):
        return self.eh.value

    @property
    def superlinear(self) -> bool:
        if self.eh.n != 1 or len(self.c) < 4:
            return False
        s = np.diff(self.values) / np.diff(self.c)
        return bool(s[0] < s[1:-1].min() and s[-1] > s[1:-1].max())

    def to_json(self):
        d = self.eh.to_json()
        d["c"] = d.pop("p")
        return d

    def to_csv(self):
        return _sampled_csv("c", self.c, self.values, self.eh.lower, self.eh.upper)


@dataclass
class BetaFunction:
    """Sampled beta with the subdifferential interval ``[sub_lo, sub_hi]`` at each ``h``."""

    h: np.ndarray
    values: np.ndarray
    sub_lo: np.ndarray
    sub_hi: np.ndarray
    gap: float = 0.0

    def __call__(self, h):
        return np.interp(h, self.h, self.values)

    def to_json(self):
        return {
            "h": self.h.tolist(),
            "value": self.values.tolist(),
            "sub_lo": self.sub_lo.tolist(),
            "sub_hi": self.sub_hi.tolist(),
            "gap": self.gap,
        }

    def to_csv(self):
        return _sampled_csv("h", self.h, self.values, self.sub_lo, self.sub_hi)

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True)


def beta_from_alpha(alpha: AlphaFunction, h=None) -> BetaFunction:
    """``beta = alpha*`` on the sampled cohomology grid (1D)."""
    c, a = np.asarray(alpha.c, float), np.asarray(alpha.values, float)
    h, b = fenchel_transform(c, a, h)
    hv = lower_hull(c, a)
    ch = c[hv]
    if len(ch) > 1:
        slopes = np.diff(a[hv]) / np.diff(ch)
        k = np.searchsorted(slopes, h, side="left")
        k2 = np.searchsorted(slopes, h, side="right")
        lo, hi = ch[k], ch[np.minimum(k2, len(ch) - 1)]
    else:
        lo = hi = np.full(h.shape, ch[0])
    return BetaFunction(h, b, lo, hi, float(np.max(alpha.eh.gap)))


@dataclass(frozen=True)
class BetaZero:
    value: float
    gap: float
    argmin: object


def beta_zero(alpha) -> BetaZero:
    """``beta(0) = -min alpha`` with a 3-point quadratic refinement of the minimum."""
    eh = alpha.eh if isinstance(alpha, AlphaFunction) else alpha
    v = np.asarray(eh.value, dtype=float)
    if eh.n == 1:
        c = np.asarray(eh.p, dtype=float)
        i = int(np.argmin(v))
        if i == 0 or i == len(v) - 1:
            raise MinimumOnBoundary(f"minimum at the edge of the sampled range (c={c[i]})")
        m = _parabola_min(c[i - 1 : i + 2], v[i - 1 : i + 2])
        return BetaZero(-m, float(eh.gap[i]), float(c[i]))
    shape = tuple(len(a) for a in eh.axes)
    V = v.reshape(shape)
    i, j = np.unravel_index(int(np.argmin(V)), shape)
    if i in (0, shape[0] - 1) or j in (0, shape[1] - 1):
        raise MinimumOnBoundary("minimum on the edge of the sampled lattice")
    m0 = V[i, j]
    d0 = m0 - _parabola_min(eh.axes[0][i - 1 : i + 2], V[i - 1 : i + 2, j])
    d1 = m0 - _parabola_min(eh.axes[1][j - 1 : j + 2], V[i, j - 1 : j + 2])
    gap = float(eh.gap.reshape(shape)[i, j])
    return BetaZero(-(m0 - d0 - d1), gap, (float(eh.axes[0][i]), float(eh.axes[1][j])))


def _parabola_min(x, y):
    """Minimum of the parabola through three points, never above the middle sample."""
    x0, x1, x2 = x
    y0, y1, y2 = y
    d = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / d
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / d
    if a <= 0:
        return float(y1)
    xs = -b / (2 * a)
    if not (x0 <= xs <= x2):
        return float(y1)
    m = y1 + a * (xs - x1) ** 2 + (2 * a * x1 + b) * (xs - x1)
    return float(min(m, y1))


# ---------------------------------------------------------------------------
# Aubry estimate


def _action(r, spec, drift, w, tau):
    """Average action of the loop ``q_i = drift_i + r_i`` and its gradient in ``r``."""
    q = drift + r
    qn = np.roll(q, -1)
    qn[-1] += w  # q_M = q_0 + w
    v = (qn - q) / tau
    L, pstar = spec.lagrangian(q[:, None], v[:, None])
    # envelope theorem: L_v = p*, L_q = -H_q(q, p*)
    Lv = pstar[:, 0]
    Lq = -spec.grad_q(np.mod(q, 1.0)[:, None], pstar)[:, 0]
    M = len(q)
    f = tau * L.sum() / (M * tau)
    g = (tau * Lq - Lv + np.roll(Lv, 1)) / (M * tau)
    return float(f), g


def aubry_beta_estimate(spec: HamiltonianSpec, h: float, M: int = 400, tau: float = 0.05, restarts: int = 20, seed: int = 42) -> float:
    """Minimal average discrete action over loops with rotation number ``h``.

    Loops are ``q_i = q_0 + w i / M + r_i`` with ``r`` periodic and
    ``w = h M tau`` required to be an integer.  Restarts draw random offsets and
    residuals from a seeded generator; the smallest action wins.
    """
    if spec.n != 1:
        raise SpecError("periodic configurations are implemented for n = 1 only")
    if M < 8:
        raise ValueError("at least 8 states are required")
    if tau > 0.1 or M * tau < 20 - 1e-9:
        raise ValueError("need tau <= 0.1 and M tau >= 20")
    target = h * M * tau
    w = round(target)
    if abs(target - w) > 1e-6:
        raise InfeasibleWinding(f"h M tau = {target} is not an integer winding number")
    rng = np.random.default_rng(seed)
    drift = w * np.arange(M) / M
    starts = [(0.0, np.zeros(M))]
    for _ in range(restarts - 1):
        starts.append((rng.uniform(0, 1), 0.05 * rng.standard_normal(M)))

    def run(start):
        q0, r0 = start
        res = minimize(
            _action, r0 + q0, args=(spec, drift, w, tau), jac=True, method="L-BFGS-B",
            options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-10},
        )
        return float(res.fun)

    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            vals = list(ex.map(run, starts))
    else:
        vals = [run(s) for s in starts]
    return min(vals)


# ---------------------------------------------------------------------------
# biconjugate


@dataclass(frozen=True)
class BiconjugateReport:
    max_gap: float
    passed: bool
    tol: float = 1e-8


def biconjugate_check(beta, h=None, tol: float = 1e-8) -> BiconjugateReport:
    """``max |beta** - beta|`` on the sample grid; zero iff the samples are convex."""
    if isinstance(beta, BetaFunction):
        h, b = np.asarray(beta.h, float), np.asarray(beta.values, float)
    else:
        h, b = np.asarray(h, float), np.asarray(beta, float)
    if h.size == 0:
        return BiconjugateReport(0.0, True, tol)
    hv = lower_hull(h, b)
    if len(hv) > 1:
        c = np.diff(b[hv]) / np.diff(h[hv])
    else:
        c = np.array([0.0])
    star = _conjugate_1d(h, b, c)
    bb = _conjugate_1d(c, star, h)
    gap = float(np.max(np.abs(bb - b)))
    return BiconjugateReport(gap, gap <= tol, tol)
