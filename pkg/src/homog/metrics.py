"""Hofer length, Calabi invariant and asymptotic spectral invariants.

The Hofer distance itself is never computed.  Reports publish the interval
``[lower, upper]`` with the upper end from the oscillation of a compactly
supported truncation and the lower end from either the Calabi invariant
(unit-ball regions) or the asymptotic gamma-distance.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .cell import EffectiveHamiltonian, SolverConfig, effective_on_grid
from .errors import (
    ExtensionNotVanishing,
    NotCompactlySupported,
    PlateauNotReached,
    QuadratureNotConverged,
    SpecError,
)
from .hamiltonian import (
    HamiltonianSpec,
    Tabulated,
    Truncated,
    apply_truncation,
    make_truncation,
    oscillation,
)
from .mather import beta_zero
from .torus import TorusGrid

BALL_VOLUME = {1: 2.0, 2: np.pi}
DEFAULT_EPS = tuple(0.1 * 2.0 ** -k for k in range(7))


@dataclass(frozen=True)
class Sublevel:
    """``S_r = {H <= r}``."""

    r: float

    def to_json(self):
        return {"kind": "sublevel", "r": self.r}


@dataclass(frozen=True)
class UnitBall:
    """Unit co-ball bundle ``{|p| <= 1}``."""

    def to_json(self):
        return {"kind": "unit-ball"}


def parse_region(text: str):
    if text == "unit-ball":
        return UnitBall()
    if text.startswith("sublevel:"):
        return Sublevel(float(text.split(":", 1)[1]))
    raise ValueError(f"region must be 'sublevel:<r>' or 'unit-ball', got {text!r}")


def richardson(values, ratio: float = 2.0) -> float:
    """Extrapolate the last three terms of a sequence with errors ``a e + b e^2``."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return float(v[-1])
    a, b, c = v[-3:]
    r1 = (ratio * b - a) / (ratio - 1)
    r2 = (ratio * c - b) / (ratio - 1)
    return float((ratio**2 * r2 - r1) / (ratio**2 - 1))


# ---------------------------------------------------------------------------
# Hofer length


def _compact_support_ok(spec):
    return isinstance(spec, (Truncated, Tabulated))


def hofer_length(spec: HamiltonianSpec) -> float:
    """Oscillation over the support; the time integral of an autonomous spec is trivial."""
    if not _compact_support_ok(spec):
        raise NotCompactlySupported(f"{spec.kind} spec is not compactly supported")
    try:
        return oscillation(spec).value
    except Exception as exc:
        if exc.__class__.__name__ == "UnboundedRegion":
            raise NotCompactlySupported(str(exc)) from exc
        raise


def hofer_length_limit(spec: HamiltonianSpec, r: float, eps_sequence=DEFAULT_EPS, shape="quintic"):
    """``eps -> 0`` limit of the Hofer length of ``f_{r,eps}(H)``; returns ``(limit, lengths)``."""
    lengths = [hofer_length(apply_truncation(spec, make_truncation(r, e, shape))) for e in eps_sequence]
    return richardson(lengths), lengths


# ---------------------------------------------------------------------------
# Calabi


def _gl_panels(breaks, m):
    """Composite Gauss-Legendre nodes and weights; ``breaks`` has shape ``(..., K+1)``."""
    x, w = np.polynomial.legendre.leggauss(m)
    a, b = breaks[..., :-1, None], breaks[..., 1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w
    return nodes.reshape(*breaks.shape[:-1], -1), weights.reshape(*breaks.shape[:-1], -1)


def _subdivide(breaks, s):
    """Split every panel into ``s`` equal pieces (last axis)."""
    t = np.linspace(0.0, 1.0, s + 1)[:-1]
    a, b = breaks[..., :-1, None], breaks[..., 1:, None]
    inner = (a + (b - a) * t).reshape(*breaks.shape[:-1], -1)
    return np.concatenate([inner, breaks[..., -1:]], axis=-1)


def _q_breaks(spec):
    bps = spec.q_breakpoints() if hasattr(spec, "q_breakpoints") else [[] for _ in range(spec.n)]
    return [np.array([0.0] + sorted({float(x) for x in b if 0 < x < 1}) + [1.0]) for b in bps]


def _radial_breaks(spec, q, region, levels):
    """Per-q radial panel edges: 0, level radii inside the region, outer radius."""
    if isinstance(region, UnitBall):
        outer = np.ones(len(q))
        cuts = []
    else:  # support of a truncated spec
        pr = spec.profile
        outer = spec.level_radius(q, pr.r + pr.eps)
        bad = ~np.isfinite(outer)
        if np.any(bad):
            # fibers never leaving the truncation layer contribute only if f(H) != r
            if np.any(spec.h(q[bad], np.zeros((int(bad.sum()), spec.n))) != pr.r):
                raise NotCompactlySupported("truncated spec does not reach its top level on every fiber")
            outer = np.where(bad, 0.0, outer)
        cuts = [spec.level_radius(q, pr.r), spec.level_radius(q, pr.r + pr.eps * pr.peak_fraction)]
    for lev in levels:
        cuts.append(spec.level_radius(q, lev))
    cols = [np.zeros(len(q))]
    for c in cuts:
        if c is None:
            continue
        c = np.where(np.isfinite(c), np.clip(c, 0.0, outer), 0.0)
        cols.append(c)
    cols.append(outer)
    B = np.sort(np.stack(cols, axis=-1), axis=-1)
    return B


def _calabi_once(spec, region, s, m, shift, levels):
    n = spec.n
    qb = [_subdivide(b, s) for b in _q_breaks(spec)]
    qn, qw = zip(*[_gl_panels(b, m) for b in qb])
    if n == 1:
        q = qn[0][:, None]
        wq = qw[0]
    else:
        Q0, Q1 = np.meshgrid(qn[0], qn[1], indexing="ij")
        q = np.stack([Q0.ravel(), Q1.ravel()], axis=-1)
        wq = np.outer(qw[0], qw[1]).ravel()
    R = _subdivide(_radial_breaks(spec, q, region, levels), s)
    rho, wr = _gl_panels(R, m)  # (Nq, K)
    if n == 1:
        total = 0.0
        for sign in (1.0, -1.0):
            vals = spec.h(q[:, None, :], (sign * rho)[..., None]) - shift
            total += np.sum(wq * np.sum(wr * vals, axis=1))
        return float(total)
    nth = 16 * s
    th = 2 * np.pi * np.arange(nth) / nth
    e = np.stack([np.cos(th), np.sin(th)], axis=-1)
    total = 0.0
    chunk = max(1, 200000 // (rho.shape[1] * nth))
    for i0 in range(0, len(q), chunk):
        sl = slice(i0, i0 + chunk)
        P = rho[sl, :, None, None] * e[None, None, :, :]
        vals = spec.h(q[sl, None, None, :], P) - shift
        inner = np.sum(wr[sl] * rho[sl] * vals.mean(axis=-1), axis=1) * 2 * np.pi
        total += np.sum(wq[sl] * inner)
    return float(total)


class _Support:
    """Marker region: the support of a truncated spec."""


def calabi_invariant(spec: HamiltonianSpec, region=None, rtol: float = 1e-8, m: int = 12) -> float:
    """``int H dq dp`` over the unit co-ball bundle or over the support of a truncation.

    ``region=None`` integrates a truncated spec over ``{H <= r + eps}`` after
    subtracting the value ``r`` it takes at infinity; other specs default to
    the unit co-ball bundle.  Panels are split at the q-breakpoints of the Hamiltonian
    and, per q, at the fiber radii where the truncation profile joins, then
    refined by halving until two levels agree well inside ``rtol``.
    """
    probe = np.zeros((1, spec.n))
    radial = spec.level_radius(probe, 0.0) is not None
    levels = []
    if region is None and isinstance(spec, Truncated):
        if not radial:
            raise NotCompactlySupported("support integration needs a fiber-radial base spec")
        region, shift = _Support(), spec.profile.r
    else:
        region, shift = region or UnitBall(), 0.0
        if radial:
            levels.append(0.0)
        if isinstance(spec, Truncated):
            pr = spec.profile
            levels += [pr.r, pr.r + pr.eps * pr.peak_fraction, pr.r + pr.eps]
    prev = None
    s = 1
    for _ in range(7):
        val = _calabi_once(spec, region, s, m, shift, levels)
        if prev is not None and abs(val - prev) <= 0.1 * rtol * max(abs(val), 1.0):
            return val
        prev = val
        s *= 2
    raise QuadratureNotConverged(f"Calabi quadrature did not settle (last change {abs(val - prev):.3g})")


def hofer_lower_bound_calabi(cal: float, n: int) -> float:
    if n not in BALL_VOLUME:
        raise SpecError(f"dimension must be 1 or 2, got {n}")
    return abs(cal) / BALL_VOLUME[n]


def siburg_extension(spec: HamiltonianSpec, eps: float, shape="quintic") -> HamiltonianSpec:
    """Extension by ``f_{0,eps}``: unchanged on the co-ball bundle, at most ``eps`` outside, zero far out."""
    q = TorusGrid(spec.n, 256 if spec.n == 1 else 32).points()
    if spec.n == 1:
        sphere = np.array([[-1.0], [1.0]])
    else:
        th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        sphere = np.stack([np.cos(th), np.sin(th)], axis=-1)
    on = spec.h(q[:, None, :], sphere[None])
    if np.max(np.abs(on)) > 1e-10:
        raise ExtensionNotVanishing(f"spec does not vanish on the unit sphere bundle (max {np.abs(on).max():.3g})")
    ext = apply_truncation(spec, make_truncation(0.0, eps, shape))
    # audit: outside the ball the extension stays within [0, eps]
    shell = sphere[None, :, :] * np.linspace(1.0, 3.0, 41)[:, None, None]
    vals = ext.h(q[:, None, None, :], shell[None])
    if vals.max() > eps + 1e-12 or vals.min() < -1e-12:
        raise ExtensionNotVanishing("extension leaves [0, eps] outside the unit co-ball bundle")
    return ext


@dataclass
class ExtensionLimitReport:
    eps: list
    calabi_eps: list
    calabi_base: float
    differences: list
    extrapolated: float
    monotone: bool
    passed: bool

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def calabi_extension_limit(spec: HamiltonianSpec, eps_sequence=DEFAULT_EPS, tol: float = 1e-3) -> ExtensionLimitReport:
    base = calabi_invariant(spec, UnitBall())
    cals = [calabi_invariant(siburg_extension(spec, e)) for e in eps_sequence]
    diffs = [abs(c - base) for c in cals]
    monotone = all(d1 <= d0 + 1e-12 for d0, d1 in zip(diffs, diffs[1:]))
    return ExtensionLimitReport(
        list(map(float, eps_sequence)),
        cals,
        base,
        diffs,
        richardson(cals),
        monotone,
        bool(monotone and diffs[-1] <= tol),
    )


# ---------------------------------------------------------------------------
# asymptotic spectral invariants


@dataclass(frozen=True)
class SpectralPair:
    c_plus: float
    c_minus: float
    gap: float

    def __iter__(self):
        return iter((self.c_plus, self.c_minus))


def c_pm_asymptotic(eh: EffectiveHamiltonian, region) -> SpectralPair:
    """``(sup, inf)`` of the clipped effective Hamiltonian over the samples."""
    v = np.asarray(eh.value, dtype=float)
    gap = float(np.max(eh.gap)) if len(v) else 0.0
    if isinstance(region, Sublevel):
        r = region.r
        if v.min() >= r:
            raise SpecError(f"level r={r} must exceed inf of the effective Hamiltonian ({v.min():.6g})")
        if v.max() < r:
            raise PlateauNotReached(f"sampled effective Hamiltonian never reaches r={r}; widen the p-range")
        clipped = np.minimum(v, r)
        return SpectralPair(float(clipped.max()), float(clipped.min()), gap)
    if isinstance(region, UnitBall):
        if v.max() < -gap - 1e-9:
            raise PlateauNotReached("sampled range does not reach the unit sphere, where the value is 0")
        clipped = np.minimum(v, 0.0)
        return SpectralPair(0.0, float(clipped.min()), gap)
    raise SpecError(f"unknown region {region!r}")


@dataclass(frozen=True)
class GammaResult:
    gamma: float
    c_plus: float
    c_minus: float
    beta0: float
    residual: float
    gap: float


def gamma_asymptotic(eh: EffectiveHamiltonian, region, beta0: float | None = None) -> GammaResult:
    cp = c_pm_asymptotic(eh, region)
    if beta0 is None:
        beta0 = beta_zero(eh).value
    gamma = cp.c_plus - cp.c_minus
    target = region.r + beta0 if isinstance(region, Sublevel) else beta0
    return GammaResult(gamma, cp.c_plus, cp.c_minus, beta0, abs(gamma - target), cp.gap)


# ---------------------------------------------------------------------------
# report


@dataclass
class MetricsReport:
    region: object
    eps_sequence: list
    calabi: float
    hofer_lower: float
    hofer_upper: float
    c_plus_inf: float
    c_minus_inf: float
    gamma_inf: float
    beta0: float
    identity_residuals: dict
    spec_digest: str = ""
    grid: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    gap: float = 0.0
    volume_convention: str = "omega^n"
    hofer_lower_source: str = ""

    def to_json(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["region"] = self.region.to_json()
        return d

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value", "lower", "upper"])
        g = self.gap
        rows = [
            ("calabi", self.calabi, self.calabi, self.calabi),
            ("hofer", (self.hofer_lower + self.hofer_upper) / 2, self.hofer_lower, self.hofer_upper),
            ("c_plus_inf", self.c_plus_inf, self.c_plus_inf - g, self.c_plus_inf),
            ("c_minus_inf", self.c_minus_inf, self.c_minus_inf - g, self.c_minus_inf),
            ("gamma_inf", self.gamma_inf, self.gamma_inf - g, self.gamma_inf + g),
            ("beta0", self.beta0, self.beta0, self.beta0 + g),
        ]
        for name, v, lo, hi in rows:
            w.writerow([name, repr(float(v)), repr(float(lo)), repr(float(hi))])
        return buf.getvalue()

    @property
    def ordering_slack(self) -> float:
        return self.hofer_upper - self.gamma_inf


def metrics_report(
    spec: HamiltonianSpec,
    region,
    p_grid,
    method: str = "minimax",
    config: SolverConfig | None = None,
    eps_sequence=DEFAULT_EPS,
    eh: EffectiveHamiltonian | None = None,
) -> MetricsReport:
    """Assemble every metric quantity for ``spec`` on ``region``."""
    cfg = config or SolverConfig()
    if eh is None:
        eh = effective_on_grid(spec, p_grid, method, cfg)
    g = gamma_asymptotic(eh, region)
    if isinstance(region, Sublevel):
        upper, _ = hofer_length_limit(spec, region.r, eps_sequence)
        cal = calabi_invariant(apply_truncation(spec, make_truncation(region.r, eps_sequence[-1])))
        lower, source = g.gamma, "gamma"
        residuals = {"gamma_vs_r_plus_beta0": g.residual}
    else:
        upper, _ = hofer_length_limit(spec, 0.0, eps_sequence)
        cal = calabi_invariant(spec, UnitBall())
        cal_lower = hofer_lower_bound_calabi(cal, spec.n)
        lower, source = (cal_lower, "calabi") if cal_lower >= g.gamma else (g.gamma, "gamma")
        residuals = {"gamma_vs_beta0": g.residual}
    return MetricsReport(
        region,
        list(map(float, eps_sequence)),
        cal,
        lower,
        upper,
        g.c_plus,
        g.c_minus,
        g.gamma,
        g.beta0,
        residuals,
        spec.digest(),
        {"n": spec.n, "N": cfg.N, "samples": int(len(eh.value)), "method": method},
        {"identity": 2e-2, "gap": cfg.gap_tol},
        g.gap,
        "omega^n",
        source,
    )
