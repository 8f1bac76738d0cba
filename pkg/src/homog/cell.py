"""Effective Hamiltonian via the cell problem ``inf_u max_q H(q, p + du(q))``.

Three independent routes:

* :func:`homogenize_minimax`: annealed log-sum-exp smoothing of the max,
  minimised over grid correctors by damped Newton; certified from below by
  closed-measure duality.
* :func:`homogenize_1d_quadrature`: the classical one-dimensional formula via
  averaged fiber roots.
* :func:`homogenize_laxoleinik`: large-time limit of ``u_t + H(q, p + Du) = 0``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar
from scipy.special import logsumexp, softmax

from . import _kernels
from .errors import (
    CFLViolation,
    DimensionNot1,
    NoConvergence,
    NonConvexSpec,
    NotSuperlinear,
    QuadratureNotConverged,
    RootBracketingFailure,
    SampleError,
    EmptyInput,
    UnstableBlowup,
)
from .hamiltonian import HamiltonianSpec, Truncated
from .torus import PeriodicField, TorusGrid, as_points


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HOMOG_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# configuration and result types


@dataclass(frozen=True)
class SolverConfig:
    """Minimax solver settings.

    Temperatures run ``beta0 * growth**k`` for ``k < stages``; the defaults go
    from 10 to 10240.
    """

    beta0: float = 10.0
    growth: float = 4.0
    stages: int = 6
    max_iter: int = 60
    tol: float = 1e-12
    gap_tol: float = 1e-2
    N: int = 64
    scheme: str = "spectral"
    armijo: float = 1e-4
    strict: bool = False

    def __post_init__(self):
        if not (self.beta0 > 0 and self.growth > 1 and self.stages >= 1):
            raise ValueError("temperatures must be positive and strictly increasing")
        if not (self.tol > 0 and self.gap_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.scheme not in ("spectral", "centered"):
            raise ValueError(f"unknown differentiation scheme {self.scheme!r}")

    @property
    def temperatures(self) -> np.ndarray:
        return self.beta0 * self.growth ** np.arange(self.stages)


@dataclass(frozen=True, eq=False)
class CorrectorField:
    """Mean-zero corrector ``u`` and its discrete differential."""

    field: PeriodicField
    scheme: str = "spectral"

    @classmethod
    def from_values(cls, grid: TorusGrid, values, scheme="spectral"):
        v = np.asarray(values, dtype=float).reshape(grid.shape)
        return cls(PeriodicField(grid, v - v.mean()), scheme)

    @classmethod
    def zero(cls, grid: TorusGrid, scheme="spectral"):
        return cls(PeriodicField(grid, np.zeros(grid.shape)), scheme)

    @property
    def grid(self) -> TorusGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    @property
    def du(self) -> np.ndarray:
        """Nodal differential, shape ``(N**n, n)`` in row-major node order."""
        return self.field.derivative(self.scheme).reshape(self.grid.size, self.grid.n)


@dataclass
class MinimaxResult:
    value: float
    corrector: CorrectorField
    gap: float
    lower: float
    converged: bool = True
    iterations: int = 0

    def __iter__(self):
        return iter((self.value, self.corrector, self.gap))


@dataclass
class EffectiveHamiltonian:
    """Sampled effective Hamiltonian with per-sample certified bounds."""

    p: np.ndarray
    value: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    method: str
    spec_digest: str = ""
    axes: tuple = ()
    convex_ok: bool = True
    correctors: list = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return 1 if self.p.ndim == 1 else self.p.shape[1]

    @property
    def gap(self) -> np.ndarray:
        return self.upper - self.lower

    def to_json(self) -> dict:
        return {
            "p": self.p.tolist(),
            "value": self.value.tolist(),
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "method": self.method,
            "spec_digest": self.spec_digest,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EffectiveHamiltonian":
        p = np.asarray(d["p"], dtype=float)
        return cls(
            p,
            np.asarray(d["value"], dtype=float),
            np.asarray(d["lower"], dtype=float),
            np.asarray(d["upper"], dtype=float),
            d.get("method", ""),
            d.get("spec_digest", ""),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        pcols = ["p"] if self.n == 1 else [f"p{a + 1}" for a in range(self.n)]
        w.writerow(pcols + ["value", "lower", "upper"])
        P = self.p.reshape(len(self.value), -1)
        for pi, v, lo, up in zip(P, self.value, self.lower, self.upper):
            w.writerow([repr(float(x)) for x in pi] + [repr(float(v)), repr(float(lo)), repr(float(up))])
        return buf.getvalue()

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# ---------------------------------------------------------------------------
# minimax


@lru_cache(maxsize=16)
def _diff_matrices(n: int, N: int, scheme: str):
    if scheme == "spectral":
        k = np.fft.fftfreq(N, 1.0 / N)
        k[N // 2] = 0.0
        D1 = np.fft.ifft(2j * np.pi * k[:, None] * np.fft.fft(np.eye(N), axis=0), axis=0).real
    else:
        D1 = (np.roll(np.eye(N), 1, axis=1) - np.roll(np.eye(N), -1, axis=1)) * (N / 2.0)
    if n == 1:
        return (D1,)
    I = np.eye(N)
    return (np.kron(D1, I), np.kron(I, D1))


def _fiber_hessian(spec, q, P, coeffs):
    """``H_pp`` at nodes, shape ``(M, n, n)``."""
    M, n = P.shape
    if coeffs is not None:
        return coeffs[0][:, None, None] * np.eye(n)[None]
    step = 1e-5
    out = np.empty((M, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = step
        out[:, :, a] = (spec.grad_p(q, P + e) - spec.grad_p(q, P - e)) / (2 * step)
    return 0.5 * (out + out.transpose(0, 2, 1))


class _Objective:
    """Smoothed max and its derivatives for one (spec, p, grid)."""

    def __init__(self, spec, p, grid, scheme):
        self.spec = spec
        self.p = p
        self.q = grid.points()
        self.D = _diff_matrices(grid.n, grid.N, scheme)
        self.M = grid.size
        self.coeffs = spec.quadratic_coefficients(grid)

    def P(self, u):
        return self.p + np.stack([D @ u for D in self.D], axis=-1)

    def hvals(self, u):
        return self.spec.h(self.q, self.P(u))

    def smooth(self, u, beta):
        return logsumexp(beta * self.hvals(u)) / beta

    def newton_system(self, u, beta):
        P = self.P(u)
        h = self.spec.h(self.q, P)
        w = softmax(beta * h)
        Hp = self.spec.grad_p(self.q, P)
        Hpp = _fiber_hessian(self.spec, self.q, P, self.coeffs)
        n = P.shape[1]
        g = sum(D.T @ (w * Hp[:, a]) for a, D in enumerate(self.D))
        K = np.zeros((self.M, self.M))
        for a in range(n):
            for b in range(n):
                diag = w * Hpp[:, a, b] + beta * w * Hp[:, a] * Hp[:, b]
                K += (self.D[a].T * diag) @ self.D[b]
        K -= beta * np.outer(g, g)
        return g, K


def _newton_stage(obj, u, beta, cfg):
    its = 0
    M = obj.M
    for _ in range(cfg.max_iter):
        g, K = obj.newton_system(u, beta)
        K[np.diag_indices(M)] += 1e-10 * max(np.trace(K) / M, 1e-300) + 1e-14
        K += 1.0 / M  # pins the constant mode
        shift = 0.0
        while True:
            try:
                cf = sla.cho_factor(K, check_finite=False)
                d = -sla.cho_solve(cf, g, check_finite=False)
                break
            except sla.LinAlgError:
                # indefinite (non-convex direct path): Levenberg shift
                shift = max(10 * shift, 1e-6 * max(np.abs(np.diag(K)).max(), 1.0))
                K[np.diag_indices(M)] += shift
                if shift > 1e12:
                    d = -g
                    break
        dec = float(g @ d)
        if -dec < cfg.tol:
            break
        f0 = obj.smooth(u, beta)
        t = 1.0
        while obj.smooth(u + t * d, beta) > f0 + cfg.armijo * t * dec and t > 1e-12:
            t *= 0.5
        u = u + t * d
        its += 1
    return u - u.mean(), its


def _dual_lower(spec, obj, u, beta):
    """Closed-measure lower bound for the discrete cell problem at corrector ``u``.

    For a probability vector ``mu`` and flux ``F = mu v`` with ``D^T F = 0``,
    convexity gives ``max_i H(q_i, p + Du_i) >= p.sum(F) - sum mu_i L(q_i, v_i)``
    for every ``u``.  In 1D the closed measures are ``mu ~ 1/v`` with ``v`` of one
    sign, and the bound collapses to ``sum mu_i H_i``.
    """
    if not spec.convex:
        return -np.inf
    P = obj.P(u)
    n = P.shape[1]
    h = spec.h(obj.q, P)
    Hp = spec.grad_p(obj.q, P)
    best = -np.inf
    if n == 1:
        v = Hp[:, 0]
        if np.all(v > 0) or np.all(v < 0):
            mu = 1.0 / v
            mu /= mu.sum()
            best = float(mu @ h)
        return best
    # 2D: project softmax fluxes onto discretely divergence-free fields.  Any
    # probability vector works, so scan temperatures and a little uniform mass
    # (which keeps velocities F / mu finite where the softmax underflows).
    N = int(round(np.sqrt(obj.M)))
    k = np.fft.fftfreq(N, 1.0 / N)
    k[N // 2] = 0.0
    kx, ky = k[:, None], k[None, :]
    k2 = kx**2 + ky**2
    k2[k2 == 0] = 1.0  # mean and Nyquist-zeroed modes carry no divergence
    for b in beta * 2.0 ** -np.arange(0, 10.5, 0.5):
        ws = softmax(b * h)
        fx = np.fft.fft2((ws * Hp[:, 0]).reshape(N, N))
        fy = np.fft.fft2((ws * Hp[:, 1]).reshape(N, N))
        proj = (kx * fx + ky * fy) / k2
        Fs = np.stack([np.fft.ifft2(fx - kx * proj).real.ravel(), np.fft.ifft2(fy - ky * proj).real.ravel()], axis=-1)
        for theta in (0.0, 1e-8, 1e-6, 1e-4, 1e-2):
            mu = (1 - theta) * ws + theta / obj.M
            F = (1 - theta) * Fs
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                try:
                    L, _ = spec.lagrangian(obj.q, F / mu[:, None])
                except (NotSuperlinear, NotImplementedError):
                    return best
                val = float(obj.p @ F.sum(axis=0) - mu @ L)
            if np.isfinite(val) and val > best:
                best = val
    return best


def _values(u):
    return np.asarray(u.values if isinstance(u, CorrectorField) else u, dtype=float).ravel().copy()


def _anneal(obj, u, cfg):
    """Run every temperature stage from ``u``; keep the corrector with the smallest hard max."""
    best = float(obj.hvals(u).max())
    best_u = u.copy()
    total = 0
    beta = cfg.temperatures[0]
    for beta in cfg.temperatures:
        u, its = _newton_stage(obj, u, beta, cfg)
        total += its
        hv = float(obj.hvals(u).max())
        if hv < best:
            best, best_u = hv, u.copy()
    return best, best_u, total, beta


def _pointwise_lower(spec, grid):
    m, _ = spec.min_fiber(grid.points())
    return float(np.max(m))


def homogenize_minimax(spec: HamiltonianSpec, p, config: SolverConfig | None = None, u0=None, path="clip"):
    """Upper bound, corrector and certification gap for ``H_bar(p)``.

    Truncated specs are homogenized through their base spec and clipped at the
    truncation level (``path="clip"``); ``path="direct"`` minimises the
    truncated spec itself and is kept as a cross-check.
    """
    cfg = config or SolverConfig()
    p = as_points(p, spec.n).reshape(spec.n)
    if isinstance(spec, Truncated):
        r = spec.profile.r
        if path == "clip":
            res = homogenize_minimax(spec.base, p, cfg, u0)
            value = min(res.value, r)
            lower = min(res.lower, r)
            return MinimaxResult(value, res.corrector, value - lower, lower, res.converged, res.iterations)
        if path != "direct":
            raise ValueError(f"unknown truncation path {path!r}")
    elif not spec.convex:
        raise NonConvexSpec(f"{spec.kind} spec is not fiberwise convex")

    grid = TorusGrid(spec.n, cfg.N)
    obj = _Objective(spec, p, grid, cfg.scheme)
    starts = [np.zeros(grid.size) if u0 is None else _values(u0)]
    if isinstance(spec, Truncated):
        # the truncated objective is flat above r + eps; a cold start can stall
        # there, so also descend from the convex base problem's corrector
        base_res = homogenize_minimax(spec.base, p, cfg, u0)
        starts.append(_values(base_res.corrector))
    best, best_u, total = np.inf, None, 0
    for u in starts:
        val, u_opt, its, beta = _anneal(obj, u, cfg)
        total += its
        if val < best:
            best, best_u = val, u_opt

    lower = _pointwise_lower(spec, grid)
    if isinstance(spec, Truncated):
        base_obj = _Objective(spec.base, p, grid, cfg.scheme)
        dual = max(_dual_lower(spec.base, base_obj, best_u, beta), base_res.lower)
        lower = max(lower, min(dual, spec.profile.r))
    else:
        lower = max(lower, _dual_lower(spec, obj, best_u, beta))
    lower = min(lower, best)
    gap = best - lower
    converged = gap <= cfg.gap_tol
    if not converged:
        msg = f"minimax gap {gap:.3g} above tolerance {cfg.gap_tol} at p={p.tolist()}"
        if cfg.strict:
            raise NoConvergence(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    corr = CorrectorField.from_values(grid, best_u, cfg.scheme)
    return MinimaxResult(best, corr, gap, lower, converged, total)


# ---------------------------------------------------------------------------
# one-dimensional quadrature oracle


def _max_of_fiber_min(spec):
    grid = TorusGrid(1, 4096)
    q = grid.points()
    m, _ = spec.min_fiber(q)
    i = int(np.argmax(m))
    q0 = q[i, 0]
    res = minimize_scalar(
        lambda x: -float(spec.min_fiber(np.array([[x]]))[0][0]),
        bounds=(q0 - grid.h, q0 + grid.h),
        method="bounded",
        options={"xatol": 1e-13},
    )
    if -float(res.fun) >= m[i]:
        return -float(res.fun), float(res.x) % 1.0
    return float(m[i]), float(q0)


def _graded_breaks(q0, levels=30):
    """Breakpoints accumulating geometrically at ``q0`` on the unit period."""
    pts = {q0}
    for k in range(2, levels):
        pts.update(((q0 + 2.0**-k) % 1.0, (q0 - 2.0**-k) % 1.0))
    return pts


def _root_integral(spec, lam, which, breakpoints):
    def integrand(x):
        lo, hi = spec.fiber_roots(np.array([[x]]), lam)
        val = float((hi if which > 0 else lo)[0])
        if not np.isfinite(val):
            raise RootBracketingFailure(f"no fiber root at level {lam}", q=x)
        return val

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            val, err = quad(integrand, 0.0, 1.0, points=breakpoints or None, epsabs=1e-13, epsrel=1e-10, limit=400)
        except Warning as exc:
            raise QuadratureNotConverged(f"fiber-root quadrature at level {lam}: {exc}") from None
    return val


def homogenize_1d_quadrature(spec: HamiltonianSpec, p) -> float:
    """``H_bar(p)`` in one dimension from ``P_pm(lam) = int p_pm(q, lam) dq``.

    On ``[P_-(lam0), P_+(lam0)]`` with ``lam0 = max_q min_p H`` the value is
    ``lam0``; outside it solves ``P_pm(lam) = p`` for ``lam``.
    """
    if spec.n != 1:
        raise DimensionNot1(f"quadrature oracle needs n = 1, got n = {spec.n}")
    if not spec.convex and not isinstance(spec, Truncated):
        raise NonConvexSpec(f"{spec.kind} spec is not fiberwise convex")
    if isinstance(spec, Truncated):
        return min(homogenize_1d_quadrature(spec.base, p), spec.profile.r)
    p = float(np.asarray(p, dtype=float).reshape(-1)[0])
    lam0, qstar = _max_of_fiber_min(spec)
    # near lam0 the roots have a near-kink at qstar
    pts = {float(x) for x in spec.q_breakpoints()[0]} | _graded_breaks(qstar)
    bps = sorted(x for x in pts if 1e-12 < x < 1.0 - 1e-12)
    # the fiber minimum at the maximising q touches lam0 only to round-off
    lam_edge = lam0 + 1e-14 * max(1.0, abs(lam0))
    which = 1 if p >= 0 else -1
    edge = _root_integral(spec, lam_edge, which, bps)
    if (which > 0 and p <= edge) or (which < 0 and p >= edge):
        return lam0
    f = lambda lam: _root_integral(spec, lam, which, bps) - p
    hi_step = 1.0
    hi = lam_edge + hi_step
    while np.sign(f(hi)) != which:
        hi_step *= 2
        hi = lam_edge + hi_step
        if hi_step > 1e8:
            raise RootBracketingFailure(f"could not bracket the level for p={p}", q=None)
    return float(brentq(f, lam_edge, hi, xtol=1e-13, rtol=1e-14))


# ---------------------------------------------------------------------------
# Lax-Oleinik


def _llf_numpy(spec, p, grid, T, cfl, alpha_floor, blowup):
    """Generic local Lax-Friedrichs march for specs without nodal quadratic form."""
    q = grid.points()
    n, h = grid.n, grid.h
    u = np.zeros(grid.shape)
    t, half = 0.0, None
    while t < T:
        fwd = [(np.roll(u, -1, axis=a) - u) / h for a in range(n)]
        bwd = [(u - np.roll(u, 1, axis=a)) / h for a in range(n)]
        Pm = p + np.stack([b.ravel() for b in bwd], axis=-1)
        Pp = p + np.stack([f.ravel() for f in fwd], axis=-1)
        Pc = 0.5 * (Pm + Pp)
        # dissipation: largest fiber speed over the local gradient box
        corners = [spec.grad_p(q, np.where(np.array(m, bool), Pp, Pm)) for m in np.ndindex(*(2,) * n)]
        alpha = np.max(np.abs(np.stack(corners)), axis=0)
        amax = max(float(alpha.sum(axis=-1).max()), alpha_floor)
        dt = cfl * h / amax
        if half is None and t + dt >= T / 2:
            dt = T / 2 - t
        dt = min(dt, T - t)
        Hn = spec.h(q, Pc) - 0.5 * np.sum(alpha * (Pp - Pm), axis=-1)
        u = u - dt * Hn.reshape(grid.shape)
        if np.abs(u).max() > blowup:
            raise UnstableBlowup(f"Lax-Oleinik values exceed {blowup:.3g}")
        t += dt
        if half is None and t >= T / 2:
            half = u.copy()
    return u, half


def homogenize_laxoleinik(spec: HamiltonianSpec, p, T: float = 200.0, N: int = 512, scheme="llf", cfl=0.45) -> float:
    """``-(u(T) - u(T/2)) / (T/2)`` averaged over the grid, from ``u(., 0) = 0``."""
    if not 0 < cfl <= 0.45:
        raise CFLViolation(f"CFL number must lie in (0, 0.45], got {cfl}")
    if isinstance(spec, Truncated):
        return min(homogenize_laxoleinik(spec.base, p, T, N, scheme, cfl), spec.profile.r)
    if not spec.convex:
        raise NonConvexSpec(f"{spec.kind} spec is not fiberwise convex")
    grid = TorusGrid(spec.n, N)
    p = as_points(p, spec.n).reshape(spec.n)
    q = grid.points()
    H0 = spec.h(q, np.broadcast_to(p, q.shape))
    Hmax = float(H0.max())
    blowup = 10.0 * T * max(float(np.abs(H0).max()), 1.0)
    coeffs = spec.quadratic_coefficients(grid)
    if coeffs is not None:
        a, c, b = coeffs
        # comparison keeps H(q, p + Du) <= max_q H(q, p), which bounds the speeds
        alpha_floor = float(np.max(np.sqrt(2.0 * a * np.maximum(Hmax - b, 0.0))))
        alpha_floor = max(alpha_floor, 1e-8)
        if spec.n == 1:
            if scheme not in ("llf", "godunov"):
                raise ValueError(f"unknown scheme {scheme!r}")
            uT, uh, steps = _kernels.march_1d(
                a, c[:, 0].copy(), b, float(p[0]), grid.h, float(T), float(cfl), alpha_floor, scheme == "godunov", blowup
            )
        else:
            if scheme != "llf":
                raise ValueError("only the llf scheme is available in two dimensions")
            uT, uh, steps = _kernels.march_2d(
                a.reshape(N, N), c.reshape(N, N, 2), b.reshape(N, N), p.copy(), grid.h, float(T), float(cfl),
                alpha_floor * np.sqrt(2), blowup,
            )
        if steps < 0:
            raise UnstableBlowup(f"Lax-Oleinik values exceed {blowup:.3g}")
    else:
        if scheme != "llf":
            raise ValueError("only the llf scheme is available for this spec")
        gp = np.abs(spec.grad_p(q, np.broadcast_to(p, q.shape))).sum(axis=-1)
        uT, uh = _llf_numpy(spec, p, grid, float(T), cfl, max(float(gp.max()), 1e-8), blowup)
    return float(-np.mean(uT - uh) / (T / 2))


# ---------------------------------------------------------------------------
# batch driver


def _as_samples(p_grid, n):
    if n == 1:
        P = np.asarray(p_grid, dtype=float).reshape(-1)
        if P.size == 0:
            raise EmptyInput("empty fiber sample grid")
        if np.any(np.diff(P) < 0):
            raise ValueError("fiber samples must be sorted")
        return P[:, None], (P,)
    if isinstance(p_grid, tuple) and len(p_grid) == 2:
        ax = tuple(np.asarray(x, dtype=float).reshape(-1) for x in p_grid)
        if min(x.size for x in ax) == 0:
            raise EmptyInput("empty fiber sample grid")
        mesh = np.meshgrid(*ax, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1), ax
    P = np.asarray(p_grid, dtype=float).reshape(-1, n)
    if P.size == 0:
        raise EmptyInput("empty fiber sample grid")
    return P, ()


def _line_convex(p, v, tol):
    if len(v) < 3:
        return True
    s = np.diff(v) / np.diff(p)
    return bool(np.all(np.diff(s) * np.diff(p)[1:] >= -np.maximum(tol[1:-1], 1e-9) * 2))


def check_convex_lines(eh: EffectiveHamiltonian) -> bool:
    tol = np.maximum(eh.gap, 1e-9)
    if eh.n == 1:
        return _line_convex(eh.p, eh.value, tol)
    if not eh.axes:
        return True
    shape = tuple(len(a) for a in eh.axes)
    V, G = eh.value.reshape(shape), tol.reshape(shape)
    ok = all(_line_convex(eh.axes[0], V[:, j], G[:, j]) for j in range(shape[1]))
    return ok and all(_line_convex(eh.axes[1], V[i], G[i]) for i in range(shape[0]))


def effective_on_grid(
    spec: HamiltonianSpec,
    p_grid,
    method: str = "minimax",
    config: SolverConfig | None = None,
    T: float = 200.0,
    N_lo: int = 512,
    keep_correctors: bool = False,
) -> EffectiveHamiltonian:
    """Evaluate ``H_bar`` at every fiber sample.

    Minimax samples run outward from the sample nearest the origin, each
    warm-started from an already solved neighbour.  The other methods treat
    samples independently and may use ``HOMOG_THREADS`` worker threads.
    """
    P, axes = _as_samples(p_grid, spec.n)
    m = len(P)
    value = np.empty(m)
    lower = np.empty(m)
    upper = np.empty(m)
    correctors = [None] * m

    if method == "minimax":
        cfg = config or SolverConfig()
        order = np.lexsort((np.arange(m), np.linalg.norm(P, axis=1)))
        done = []
        for i in order:
            u0 = None
            if done:
                j = done[int(np.argmin(np.linalg.norm(P[done] - P[i], axis=1)))]
                u0 = correctors[j]
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    res = homogenize_minimax(spec, P[i], cfg, u0=u0)
            except Exception as exc:  # noqa: BLE001 - re-raised with the sample attached
                raise SampleError(P[i].tolist(), exc) from exc
            value[i], lower[i], upper[i] = res.value, res.lower, res.value
            correctors[i] = res.corrector
            done.append(i)
    elif method in ("quadrature", "laxoleinik", "laxoleinik-godunov"):
        def one(i):
            try:
                if method == "quadrature":
                    return homogenize_1d_quadrature(spec, P[i, 0] if spec.n == 1 else P[i])
                scheme = "godunov" if method.endswith("godunov") else "llf"
                return homogenize_laxoleinik(spec, P[i], T=T, N=N_lo, scheme=scheme)
            except Exception as exc:  # noqa: BLE001
                raise SampleError(P[i].tolist(), exc) from exc

        workers = _threads()
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                vals = list(ex.map(one, range(m)))
        else:
            vals = [one(i) for i in range(m)]
        value[:] = vals
        lower[:] = value
        upper[:] = value
    else:
        raise ValueError(f"unknown method {method!r}")

    eh = EffectiveHamiltonian(
        P[:, 0].copy() if spec.n == 1 else P,
        value,
        lower,
        upper,
        method,
        spec.digest(),
        axes,
        correctors=correctors if keep_correctors else [],
    )
    eh.convex_ok = check_convex_lines(eh)
    return eh


# ---------------------------------------------------------------------------
# certificates


def subsolution_certificate(spec: HamiltonianSpec, p, u, h: float, direction: str = "sub") -> bool:
    """Whether ``H(q, p + du) <= h + margin`` at every node (``direction="super"``: ``>= h - margin``).

    The margin is the largest fiber speed along the section times the grid spacing.
    """
    corr = u if isinstance(u, CorrectorField) else CorrectorField.from_values(u.grid, u.values)
    p = as_points(p, spec.n).reshape(spec.n)
    q = corr.grid.points()
    P = p + corr.du
    vals = spec.h(q, P)
    margin = float(np.max(np.linalg.norm(spec.grad_p(q, P), axis=-1))) * corr.grid.h
    if direction == "sub":
        return bool(np.max(vals) <= h + margin)
    if direction == "super":
        return bool(np.min(vals) >= h - margin)
    raise ValueError(f"direction must be 'sub' or 'super', got {direction!r}")
