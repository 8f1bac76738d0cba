"""Hamiltonians on the cotangent bundle of the torus.

All spec classes evaluate vectorised over broadcastable ``q`` and ``p`` arrays
whose trailing axis is the dimension ``n``.  The module-level helpers
(:func:`eval_h`, :func:`grad_p`, ...) accept scalars as well and fold ``q``
into the unit cube first.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq, minimize

from .errors import (
    InvalidWidth,
    NotSuperlinear,
    OutOfFiberBox,
    SpecError,
    UnboundedRegion,
)
from .torus import (
    FourierPotential,
    PeriodicField,
    TorusGrid,
    as_points,
    fold,
    periodic_from_json,
)

CONVEXITY_TOL = 1e-10


def _sq(p):
    return np.sum(p * p, axis=-1)


# ---------------------------------------------------------------------------
# truncation profiles


def _quintic(t):
    return t * (1 - t) ** 3 * (1 + 3 * t)


def _quintic_d(t):
    return 1 - 18 * t**2 + 32 * t**3 - 15 * t**4


def _quintic_d2(t):
    return -36 * t + 96 * t**2 - 60 * t**3


def _septic(t):
    return t - 20 * t**4 + 45 * t**5 - 36 * t**6 + 10 * t**7


def _septic_d(t):
    return 1 - 80 * t**3 + 225 * t**4 - 216 * t**5 + 70 * t**6


def _septic_d2(t):
    return -240 * t**2 + 900 * t**3 - 1080 * t**4 + 420 * t**5


# Each shape phi on [0, 1] has phi(0)=phi(1)=0, phi'(0)=1, phi'(1)=0, phi''=0 at both ends,
# phi >= 0 and |phi'| <= 1, so r + eps*phi((s-r)/eps) glues C^2 to s and to r.
_SHAPES = {
    "quintic": (_quintic, _quintic_d, _quintic_d2),
    "septic": (_septic, _septic_d, _septic_d2),
}


@dataclass(frozen=True)
class TruncationProfile:
    """Cutoff ``f`` with ``f(s) = s`` below ``r``, ``f = r`` above ``r + eps``, ``|f'| <= 1``."""

    r: float
    eps: float
    shape: str = "quintic"

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidWidth(f"smoothing width must be positive, got {self.eps}")
        if self.shape not in _SHAPES:
            raise SpecError(f"unknown truncation shape {self.shape!r}")

    def _t(self, s):
        return np.clip((np.asarray(s, dtype=float) - self.r) / self.eps, 0.0, 1.0)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        phi = _SHAPES[self.shape][0]
        inner = self.r + self.eps * phi(self._t(s))
        return np.where(s <= self.r, s, np.where(s >= self.r + self.eps, self.r, inner))

    def d(self, s):
        s = np.asarray(s, dtype=float)
        dphi = _SHAPES[self.shape][1]
        return np.where(s <= self.r, 1.0, np.where(s >= self.r + self.eps, 0.0, dphi(self._t(s))))

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        d2phi = _SHAPES[self.shape][2]
        inside = (s > self.r) & (s < self.r + self.eps)
        return np.where(inside, d2phi(self._t(s)) / self.eps, 0.0)

    @cached_property
    def peak_fraction(self) -> float:
        """Interior argmax of the bump shape on [0, 1]."""
        return brentq(_SHAPES[self.shape][1], 1e-6, 1 - 1e-6)

    @property
    def peak(self) -> float:
        return self.r + self.eps * _SHAPES[self.shape][0](self.peak_fraction)

    def range_on(self, lo: float, hi: float) -> tuple[float, float]:
        """Exact (min, max) of f over [lo, hi]; ``hi`` may be ``inf``."""
        # f increases up to r + eps*t*, then decreases to r and stays there.
        top = self.r + self.eps * self.peak_fraction
        f_lo = float(self(lo))
        f_hi = self.r if np.isinf(hi) else float(self(hi))
        fmax = float(self(np.clip(top, lo, hi))) if not np.isinf(hi) else float(self(max(top, lo)))
        return min(f_lo, f_hi), max(fmax, f_lo, f_hi)

    def to_json(self) -> dict:
        return {"r": self.r, "eps": self.eps, "shape": self.shape}


def make_truncation(r: float, eps: float, shape: str = "quintic") -> TruncationProfile:
    return TruncationProfile(float(r), float(eps), shape)


# ---------------------------------------------------------------------------
# spec variants


class HamiltonianSpec:
    """Common interface; concrete kinds override what they support."""

    kind = "abstract"
    n = 1
    convex = True
    superlinear = True

    def h(self, q, p):
        raise NotImplementedError

    def grad_p(self, q, p):
        raise NotImplementedError

    def grad_q(self, q, p):
        raise NotImplementedError

    def lagrangian(self, q, v):
        """Fiber Legendre transform; returns ``(L, p_star)``."""
        raise NotSuperlinear(f"{self.kind} spec has no Legendre dual")

    def min_fiber(self, q):
        """``(min_p H(q, p), argmin)`` for each q."""
        raise NotImplementedError(f"{self.kind} spec does not expose fiber minima")

    def fiber_roots(self, q, level):
        """Both fiber roots of ``H(q, .) = level`` in one dimension (NaN where none)."""
        raise NotImplementedError(f"{self.kind} spec does not expose fiber roots")

    def level_radius(self, q, level):
        """Radius rho with ``H(q, rho e) = level`` for fiber-radial specs, else None."""
        return None

    def quadratic_coefficients(self, grid: TorusGrid):
        """Nodal ``(a, c, b)`` if ``H(q_i, P) = a_i/2 |P - c_i|^2 + b_i``, else None."""
        return None

    def q_breakpoints(self) -> list:
        return [[] for _ in range(self.n)]

    def to_json(self) -> dict:
        raise NotImplementedError

    def digest(self) -> str:
        blob = json.dumps(spec_to_json(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class Mechanical(HamiltonianSpec):
    """``H = |p|^2 / 2 + V(q)``."""

    kind = "mechanical"

    def __init__(self, potential):
        self.potential = potential
        self.n = potential.n

    def h(self, q, p):
        return 0.5 * _sq(p) + self.potential(q)

    def grad_p(self, q, p):
        return np.broadcast_to(p, np.broadcast_shapes(np.shape(q), np.shape(p))).astype(float)

    def grad_q(self, q, p):
        g = self.potential.grad(q)
        return np.broadcast_to(g, np.broadcast_shapes(np.shape(g), np.shape(p))).astype(float)

    def lagrangian(self, q, v):
        return 0.5 * _sq(v) - self.potential(q), np.asarray(v, dtype=float)

    def min_fiber(self, q):
        q = np.asarray(q, dtype=float)
        return self.potential(q), np.zeros(q.shape)

    def fiber_roots(self, q, level):
        rad = self.level_radius(q, level)
        return -rad, rad

    def level_radius(self, q, level):
        with np.errstate(invalid="ignore"):
            return np.sqrt(2.0 * (level - self.potential(q)))

    def quadratic_coefficients(self, grid):
        V = self.potential.on_grid(grid).ravel()
        return np.ones_like(V), np.zeros((V.size, self.n)), V

    def q_breakpoints(self):
        return self.potential.breakpoints()

    def to_json(self):
        return {"kind": self.kind, "potential": self.potential.to_json()}


class ProductForm(HamiltonianSpec):
    """``H = gamma(q) (|p|^2 - 1)`` with ``gamma >= 0``."""

    kind = "product"

    def __init__(self, gamma):
        self.gamma = gamma
        self.n = gamma.n
        probe = TorusGrid(self.n, 1024 if self.n == 1 else 128)
        gmin = float(np.min(gamma.on_grid(probe)))
        if isinstance(gamma, PeriodicField):
            gmin = min(gmin, float(gamma.values.min()))
        if gmin < 0:
            raise SpecError(f"product form requires gamma >= 0, found {gmin}")
        self.superlinear = gmin > 0

    def h(self, q, p):
        return self.gamma(q) * (_sq(p) - 1.0)

    def grad_p(self, q, p):
        return 2.0 * self.gamma(q)[..., None] * p

    def grad_q(self, q, p):
        return self.gamma.grad(q) * (_sq(p) - 1.0)[..., None]

    def lagrangian(self, q, v):
        if not self.superlinear:
            raise NotSuperlinear("gamma vanishes somewhere; the Legendre dual is not finite")
        g = self.gamma(q)
        v = np.asarray(v, dtype=float)
        return _sq(v) / (4.0 * g) + g, v / (2.0 * g[..., None])

    def min_fiber(self, q):
        q = np.asarray(q, dtype=float)
        return -self.gamma(q), np.zeros(q.shape)

    def fiber_roots(self, q, level):
        rad = self.level_radius(q, level)
        return -rad, rad

    def level_radius(self, q, level):
        g = self.gamma(q)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.sqrt(1.0 + level / g)

    def quadratic_coefficients(self, grid):
        g = self.gamma.on_grid(grid).ravel()
        return 2.0 * g, np.zeros((g.size, self.n)), -g

    def q_breakpoints(self):
        return self.gamma.breakpoints()

    def to_json(self):
        return {"kind": self.kind, "gamma": self.gamma.to_json()}


class FiberOnly(HamiltonianSpec):
    """q-independent convex ``h(p)``.

    ``form="quadratic"``: ``a/2 |p - center|^2 + offset``;
    ``form="power"``: ``|p|^k / k`` with ``k > 1``.
    """

    kind = "fiber_only"

    def __init__(self, n=1, form="quadratic", a=1.0, center=None, offset=0.0, k=2.0):
        self.n = n
        self.form = form
        if form == "quadratic":
            if a <= 0:
                raise SpecError("quadratic coefficient must be positive")
            self.a = float(a)
            self.center = np.zeros(n) if center is None else np.asarray(center, dtype=float)
            self.offset = float(offset)
        elif form == "power":
            if k <= 1:
                raise SpecError("power exponent must exceed 1")
            self.k = float(k)
        else:
            raise SpecError(f"unknown fiber form {form!r}")

    def _shape(self, q, p):
        return np.broadcast_shapes(np.shape(q)[:-1], np.shape(p)[:-1])

    def h(self, q, p):
        p = np.asarray(p, dtype=float)
        if self.form == "quadratic":
            val = 0.5 * self.a * _sq(p - self.center) + self.offset
        else:
            val = np.sqrt(_sq(p)) ** self.k / self.k
        return np.broadcast_to(val, self._shape(q, p)).copy()

    def grad_p(self, q, p):
        p = np.asarray(p, dtype=float)
        if self.form == "quadratic":
            g = self.a * (p - self.center)
        else:
            r = np.sqrt(_sq(p))[..., None]
            with np.errstate(invalid="ignore", divide="ignore"):
                g = np.where(r > 0, r ** (self.k - 2) * p, 0.0)
        return np.broadcast_to(g, self._shape(q, p) + (self.n,)).copy()

    def grad_q(self, q, p):
        return np.zeros(self._shape(q, p) + (self.n,))

    def lagrangian(self, q, v):
        v = np.asarray(v, dtype=float)
        if self.form == "quadratic":
            L = v @ self.center + _sq(v) / (2 * self.a) - self.offset
            pstar = self.center + v / self.a
        else:
            kk = self.k / (self.k - 1)
            r = np.sqrt(_sq(v))
            L = r**kk / kk
            with np.errstate(invalid="ignore", divide="ignore"):
                pstar = np.where(r[..., None] > 0, r[..., None] ** (kk - 2) * v, 0.0)
        shape = np.broadcast_shapes(np.shape(q)[:-1], v.shape[:-1])
        return np.broadcast_to(L, shape).copy(), np.broadcast_to(pstar, shape + (self.n,)).copy()

    def min_fiber(self, q):
        q = np.asarray(q, dtype=float)
        if self.form == "quadratic":
            return np.full(q.shape[:-1], self.offset), np.broadcast_to(self.center, q.shape).copy()
        return np.zeros(q.shape[:-1]), np.zeros(q.shape)

    def fiber_roots(self, q, level):
        rad = self.level_radius(q, level)
        c = self.center[0] if self.form == "quadratic" else 0.0
        return c - rad, c + rad

    def level_radius(self, q, level):
        shape = np.shape(q)[:-1]
        with np.errstate(invalid="ignore"):
            if self.form == "quadratic":
                rad = np.sqrt(2.0 * (level - self.offset) / self.a)
            else:
                rad = (self.k * level) ** (1.0 / self.k) if level >= 0 else np.nan
        return np.broadcast_to(rad, shape).copy()

    def quadratic_coefficients(self, grid):
        if self.form == "power" and self.k != 2.0:
            return None
        a = self.a if self.form == "quadratic" else 1.0
        c = self.center if self.form == "quadratic" else np.zeros(self.n)
        e = self.offset if self.form == "quadratic" else 0.0
        m = grid.size
        return np.full(m, a), np.tile(c, (m, 1)), np.full(m, e)

    def to_json(self):
        d = {"kind": self.kind, "n": self.n, "form": self.form}
        if self.form == "quadratic":
            d.update(a=self.a, center=self.center.tolist(), offset=self.offset)
        else:
            d.update(k=self.k)
        return d


class Tabulated(HamiltonianSpec):
    """Values on a q-grid times a uniform fiber grid on ``[-P, P]^n``; multilinear interpolation."""

    kind = "tabulated"

    def __init__(self, grid: TorusGrid, values, P: float = 4.0):
        self.grid = grid
        self.n = grid.n
        self.P = float(P)
        v = np.asarray(values, dtype=float)
        if v.ndim != 2 * self.n or v.shape[: self.n] != grid.shape:
            raise SpecError(f"tabulated values must have shape {grid.shape} + (M,)*{self.n}")
        if not np.all(np.isfinite(v)):
            raise SpecError("tabulated values must be finite")
        self.M = v.shape[self.n]
        self.values = v
        self.p_axis = np.linspace(-self.P, self.P, self.M)
        self.dp = self.p_axis[1] - self.p_axis[0]
        self.convex = self._fiber_convex()
        self.superlinear = False
        # periodic wrap: append the q = 1 slab
        padded = v
        for a in range(self.n):
            first = np.take(padded, [0], axis=a)
            padded = np.concatenate([padded, first], axis=a)
        qax = np.arange(grid.N + 1) / grid.N
        self._interp = RegularGridInterpolator(
            [qax] * self.n + [self.p_axis] * self.n, padded, method="linear"
        )

    def _fiber_convex(self) -> bool:
        for a in range(self.n, 2 * self.n):
            d2 = np.diff(self.values, n=2, axis=a)
            if d2.size and d2.min() < -CONVEXITY_TOL:
                return False
        return True

    def _check_box(self, p):
        if np.any(np.abs(p) > self.P + 1e-12):
            raise OutOfFiberBox(f"fiber point outside [-{self.P}, {self.P}]^{self.n}")

    def h(self, q, p):
        q, p = np.broadcast_arrays(fold(np.asarray(q, dtype=float)), np.asarray(p, dtype=float))
        self._check_box(p)
        pts = np.concatenate([q, p], axis=-1)
        return self._interp(pts.reshape(-1, 2 * self.n)).reshape(q.shape[:-1])

    def grad_p(self, q, p):
        p = np.asarray(p, dtype=float)
        self._check_box(p)
        out = []
        for a in range(self.n):
            e = np.zeros(self.n)
            e[a] = self.dp
            hi = np.clip(p + e, -self.P, self.P)
            lo = np.clip(p - e, -self.P, self.P)
            out.append((self.h(q, hi) - self.h(q, lo)) / (hi[..., a] - lo[..., a]))
        return np.stack(out, axis=-1)

    def grad_q(self, q, p):
        q = np.asarray(q, dtype=float)
        out = []
        for a in range(self.n):
            e = np.zeros(self.n)
            e[a] = self.grid.h
            out.append((self.h(q + e, p) - self.h(q - e, p)) / (2 * self.grid.h))
        return np.stack(out, axis=-1)

    def _fiber_nodes(self):
        mesh = np.meshgrid(*([self.p_axis] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def lagrangian(self, q, v):
        if not self.convex:
            raise NotSuperlinear("tabulated spec fails the fiber convexity check")
        q = np.atleast_2d(np.asarray(q, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        q, v = np.broadcast_arrays(q, v)
        nodes = self._fiber_nodes()
        Ls, ps = [], []
        for qi, vi in zip(q.reshape(-1, self.n), v.reshape(-1, self.n)):
            vals = nodes @ vi - self.h(np.broadcast_to(qi, nodes.shape), nodes)
            j = int(np.argmax(vals))
            pj = nodes[j]
            if np.any(np.abs(np.abs(pj) - self.P) < 1e-12):
                raise NotSuperlinear(f"supremum reached on the fiber-box boundary at p={pj}")
            box = [(x - self.dp, x + self.dp) for x in pj]
            res = minimize(
                lambda x: -(x @ vi - float(self.h(qi, x))), pj, method="L-BFGS-B", bounds=box
            )
            best = max(vals[j], -res.fun)
            Ls.append(best)
            ps.append(res.x if -res.fun >= vals[j] else pj)
        return np.array(Ls).reshape(q.shape[:-1]), np.array(ps).reshape(q.shape)

    def min_fiber(self, q):
        q = np.asarray(q, dtype=float)
        nodes = self._fiber_nodes()
        flat = q.reshape(-1, self.n)
        vals = self.h(flat[:, None, :], nodes[None, :, :])
        j = np.argmin(vals, axis=1)
        return vals[np.arange(len(flat)), j].reshape(q.shape[:-1]), nodes[j].reshape(q.shape)

    def to_json(self):
        return {
            "kind": self.kind,
            "grid": self.grid.to_json(),
            "P": self.P,
            "M": self.M,
            "values": self.values.ravel().tolist(),
        }


class Truncated(HamiltonianSpec):
    """``f(H)`` for a truncation profile ``f``; equals ``H`` on ``{H <= r}``."""

    kind = "truncated"
    convex = False
    superlinear = False

    def __init__(self, base: HamiltonianSpec, profile: TruncationProfile):
        self.base = base
        self.profile = profile
        self.n = base.n

    def h(self, q, p):
        return self.profile(self.base.h(q, p))

    def grad_p(self, q, p):
        return self.profile.d(self.base.h(q, p))[..., None] * self.base.grad_p(q, p)

    def grad_q(self, q, p):
        return self.profile.d(self.base.h(q, p))[..., None] * self.base.grad_q(q, p)

    def min_fiber(self, q):
        m, arg = self.base.min_fiber(q)
        return np.minimum(m, self.profile.r), arg

    def fiber_roots(self, q, level):
        if level > self.profile.r:
            raise ValueError("truncated spec is not invertible above r")
        return self.base.fiber_roots(q, level)

    def level_radius(self, q, level):
        return self.base.level_radius(q, level)

    def q_breakpoints(self):
        return self.base.q_breakpoints()

    def to_json(self):
        return {"kind": self.kind, "base": self.base.to_json(), **self.profile.to_json()}


class Sheared(HamiltonianSpec):
    """``H(q, p + dg(q))``: the pull-back of ``base`` by the exact shear ``(q, p) -> (q, p + dg)``."""

    kind = "sheared"

    def __init__(self, base: HamiltonianSpec, shear: FourierPotential):
        if not isinstance(shear, FourierPotential):
            raise SpecError("shear generating function must be a Fourier potential")
        self.base = base
        self.shear = shear
        self.n = base.n
        self.convex = base.convex
        self.superlinear = base.superlinear

    def _shift(self, q, p):
        return np.asarray(p, dtype=float) + self.shear.grad(q)

    def h(self, q, p):
        return self.base.h(q, self._shift(q, p))

    def grad_p(self, q, p):
        return self.base.grad_p(q, self._shift(q, p))

    def grad_q(self, q, p):
        P = self._shift(q, p)
        hp = self.base.grad_p(q, P)
        return self.base.grad_q(q, P) + np.einsum("...ij,...j->...i", self.shear.hessian(q), hp)

    def lagrangian(self, q, v):
        L, pstar = self.base.lagrangian(q, v)
        dg = self.shear.grad(q)
        return L - np.sum(dg * v, axis=-1), pstar - dg

    def min_fiber(self, q):
        m, arg = self.base.min_fiber(q)
        return m, arg - self.shear.grad(q)

    def fiber_roots(self, q, level):
        lo, hi = self.base.fiber_roots(q, level)
        s = self.shear.grad(q)[..., 0]
        return lo - s, hi - s

    def quadratic_coefficients(self, grid):
        coeffs = self.base.quadratic_coefficients(grid)
        if coeffs is None:
            return None
        a, c, b = coeffs
        return a, c - self.shear.grad(grid.points()), b

    def to_json(self):
        return {"kind": self.kind, "base": self.base.to_json(), "shear": self.shear.to_json()}


def apply_truncation(spec: HamiltonianSpec, profile: TruncationProfile) -> HamiltonianSpec:
    if isinstance(spec, Tabulated):
        return Tabulated(spec.grid, profile(spec.values), spec.P)
    return Truncated(spec, profile)


# ---------------------------------------------------------------------------
# JSON


def spec_to_json(spec: HamiltonianSpec) -> dict:
    d = spec.to_json()
    d["convex"] = bool(spec.convex)
    d["superlinear"] = bool(spec.superlinear)
    return d


def spec_from_json(d: dict) -> HamiltonianSpec:
    kind = d.get("kind")
    if kind == "mechanical":
        return Mechanical(periodic_from_json(d["potential"]))
    if kind == "product":
        return ProductForm(periodic_from_json(d["gamma"]))
    if kind == "fiber_only":
        return FiberOnly(
            n=int(d.get("n", 1)),
            form=d.get("form", "quadratic"),
            a=d.get("a", 1.0),
            center=d.get("center"),
            offset=d.get("offset", 0.0),
            k=d.get("k", 2.0),
        )
    if kind == "tabulated":
        grid = TorusGrid.from_json(d["grid"])
        M = int(d["M"])
        vals = np.asarray(d["values"], dtype=float).reshape(grid.shape + (M,) * grid.n)
        return Tabulated(grid, vals, d.get("P", 4.0))
    if kind == "truncated":
        prof = make_truncation(d["r"], d["eps"], d.get("shape", "quintic"))
        return apply_truncation(spec_from_json(d["base"]), prof)
    if kind == "sheared":
        return Sheared(spec_from_json(d["base"]), periodic_from_json(d["shear"]))
    raise SpecError(f"unknown Hamiltonian kind {kind!r}")


def load_spec(path) -> HamiltonianSpec:
    with open(path) as fh:
        return spec_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# point-wise operations


def _prep(spec, q, p):
    q = fold(as_points(q, spec.n))
    p = as_points(p, spec.n)
    if not np.all(np.isfinite(p)):
        raise ValueError("fiber vector must be finite")
    return q, p


def _scalarize(x, q, p):
    return float(x) if np.ndim(x) == 0 or (np.size(x) == 1 and q.ndim == 1 and p.ndim == 1) else x


def eval_h(spec: HamiltonianSpec, q, p):
    q, p = _prep(spec, q, p)
    out = spec.h(q, p)
    return float(np.squeeze(out)) if np.size(out) == 1 else out


def grad_p(spec: HamiltonianSpec, q, p):
    q, p = _prep(spec, q, p)
    return spec.grad_p(q, p)


def grad_q(spec: HamiltonianSpec, q, p):
    q, p = _prep(spec, q, p)
    return spec.grad_q(q, p)


def legendre_lagrangian(spec: HamiltonianSpec, q, v):
    """``L(q, v) = sup_p <p, v> - H(q, p)``; returns ``(L, maximizing p)``."""
    q, v = _prep(spec, q, v)
    L, pstar = spec.lagrangian(q, v)
    if np.size(L) == 1:
        return float(np.squeeze(L)), np.asarray(pstar).reshape(spec.n)
    return L, pstar


# ---------------------------------------------------------------------------
# oscillation


@dataclass(frozen=True)
class Box:
    """Whole torus times the fiber cube ``[-P, P]^n``."""

    P: float


@dataclass(frozen=True)
class Ball:
    """Whole torus times the fiber ball of radius ``R``."""

    R: float = 1.0


@dataclass(frozen=True)
class OscillationResult:
    value: float
    vmin: float
    vmax: float
    coarse: float

    @property
    def discrepancy(self) -> float:
        return abs(self.value - self.coarse)


def _fiber_samples(n, region, Np):
    ext = region.P if isinstance(region, Box) else region.R
    ax = np.linspace(-ext, ext, Np)
    mesh = np.meshgrid(*([ax] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    if isinstance(region, Ball):
        pts = pts[_sq(pts) <= ext**2 * (1 + 1e-12)]
        if n == 2:
            th = np.linspace(0, 2 * np.pi, 4 * Np, endpoint=False)
            pts = np.concatenate([pts, ext * np.stack([np.cos(th), np.sin(th)], axis=-1)])
    return pts


def _extrema(spec, region, Nq, Np):
    q = TorusGrid(spec.n, Nq).points()
    p = _fiber_samples(spec.n, region, Np)
    vals = spec.h(q[:, None, :], p[None, :, :])
    i_min = np.unravel_index(np.argmin(vals), vals.shape)
    i_max = np.unravel_index(np.argmax(vals), vals.shape)
    return (
        (float(vals[i_min]), q[i_min[0]], p[i_min[1]]),
        (float(vals[i_max]), q[i_max[0]], p[i_max[1]]),
    )


def _polish(spec, region, start_q, start_p, sign):
    """Local bounded search from a grid extremum; only accepted if it improves."""
    n = spec.n
    ext = region.P if isinstance(region, Box) else region.R
    x0 = np.concatenate([start_q, start_p])
    bounds = [(x - 0.05, x + 0.05) for x in start_q] + [
        (max(-ext, x - 0.05 * ext), min(ext, x + 0.05 * ext)) for x in start_p
    ]

    def f(x):
        p = x[n:]
        if isinstance(region, Ball) and _sq(p) > ext**2:
            p = p * ext / np.sqrt(_sq(p))
        return sign * float(spec.h(fold(x[:n]), p))

    res = minimize(f, x0, method="L-BFGS-B", bounds=bounds)
    return sign * res.fun


def _osc_sweep(spec, region, levels=2):
    Nq, Np = (256, 257) if spec.n == 1 else (16, 17)
    results = []
    for _ in range(levels):
        (mn, qmn, pmn), (mx, qmx, pmx) = _extrema(spec, region, Nq, Np)
        results.append((mn, mx, (qmn, pmn), (qmx, pmx)))
        Nq, Np = 2 * Nq, 2 * Np - 1
    mn, mx, amin, amax = results[-1]
    mn = min(mn, _polish(spec, region, *amin, sign=1.0))
    mx = max(mx, _polish(spec, region, *amax, sign=-1.0))
    return mn, mx, (results[0][0], results[0][1])


def _support_radius(spec: Truncated, start=1.0, limit=256.0):
    """Fiber radius beyond which the truncated spec is identically ``r``."""
    level = spec.profile.r + spec.profile.eps
    P = start
    while P <= limit:
        q = TorusGrid(spec.n, 64 if spec.n == 1 else 16).points()
        shell = _box_shell(spec.n, P)
        if np.min(spec.base.h(q[:, None, :], shell[None, :, :])) >= level:
            return P
        P *= 2
    raise UnboundedRegion("truncated spec does not become constant on any fiber box")


def _box_shell(n, P, m=65):
    ax = np.linspace(-P, P, m)
    if n == 1:
        return np.array([[-P], [P]])
    top = np.stack([ax, np.full(m, P)], axis=-1)
    return np.concatenate([top, -top, top[:, ::-1], -top[:, ::-1]])


def oscillation(obj, region=None) -> OscillationResult:
    """``max - min`` of a spec over a region, or of a periodic function over the torus.

    Truncated specs are handled through the exact range of the profile over the
    base spec's value range, which avoids resolving the thin smoothing layer.
    """
    if not isinstance(obj, HamiltonianSpec):
        grid = obj.grid if isinstance(obj, PeriodicField) else TorusGrid(obj.n, 256 if obj.n == 1 else 64)
        coarse = obj.on_grid(grid)
        fine = obj.on_grid(grid.refine())
        lo, hi = float(fine.min()), float(fine.max())
        return OscillationResult(hi - lo, lo, hi, float(coarse.max() - coarse.min()))

    if isinstance(obj, Truncated):
        if region is None:
            P = _support_radius(obj)
            base_min, _, (cmin, _) = _osc_sweep(obj.base, Box(P))
            base_max = cmax = np.inf
        else:
            base_min, base_max, (cmin, cmax) = _osc_sweep(obj.base, region)
        fmin, fmax = obj.profile.range_on(base_min, base_max)
        gmin, gmax = obj.profile.range_on(cmin, cmax)
        return OscillationResult(fmax - fmin, fmin, fmax, gmax - gmin)

    if region is None:
        P = obj.P if isinstance(obj, Tabulated) else 4.0
        q = TorusGrid(obj.n, 64 if obj.n == 1 else 16).points()
        shell = obj.h(q[:, None, :], _box_shell(obj.n, P)[None, :, :])
        if np.ptp(shell) > 0:
            raise UnboundedRegion("spec is not constant on the fiber-box boundary")
        region = Box(P)
    mn, mx, (cmin, cmax) = _osc_sweep(obj, region)
    return OscillationResult(mx - mn, mn, mx, cmax - cmin)
